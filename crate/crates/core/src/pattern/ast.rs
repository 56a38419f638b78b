use std::fmt;

/// Regular part of a pattern. Leaves are event variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternAst {
    Leaf(String),
    Concat(Vec<PatternAst>),
    Union(Vec<PatternAst>),
    Star(Box<PatternAst>),
    Plus(Box<PatternAst>),
}

impl PatternAst {
    pub fn leaf(v: &str) -> Self {
        PatternAst::Leaf(v.to_string())
    }

    /// Variables in order of first appearance.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            PatternAst::Leaf(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            PatternAst::Concat(cs) | PatternAst::Union(cs) => {
                cs.iter().for_each(|c| c.collect_vars(out))
            }
            PatternAst::Star(c) | PatternAst::Plus(c) => c.collect_vars(out),
        }
    }

    /// Rewrites every `Plus(r)` as `Concat(r, Star(r))`.
    pub fn desugar(&self) -> PatternAst {
        match self {
            PatternAst::Leaf(_) => self.clone(),
            PatternAst::Concat(cs) => PatternAst::Concat(cs.iter().map(|c| c.desugar()).collect()),
            PatternAst::Union(cs) => PatternAst::Union(cs.iter().map(|c| c.desugar()).collect()),
            PatternAst::Star(c) => PatternAst::Star(Box::new(c.desugar())),
            PatternAst::Plus(c) => {
                let inner = c.desugar();
                PatternAst::Concat(vec![inner.clone(), PatternAst::Star(Box::new(inner))])
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            PatternAst::Union(cs) if cs.len() > 1 => 0,
            PatternAst::Concat(cs) if cs.len() > 1 => 1,
            PatternAst::Union(cs) | PatternAst::Concat(cs) if cs.len() == 1 => cs[0].precedence(),
            _ => 2,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for PatternAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternAst::Leaf(v) => f.write_str(v),
            PatternAst::Concat(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" · ")?;
                    }
                    c.fmt_child(f, 2)?;
                }
                Ok(())
            }
            PatternAst::Union(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    c.fmt_child(f, 1)?;
                }
                Ok(())
            }
            PatternAst::Star(c) => {
                c.fmt_child(f, 2)?;
                f.write_str("*")
            }
            PatternAst::Plus(c) => {
                c.fmt_child(f, 2)?;
                f.write_str("+")
            }
        }
    }
}
