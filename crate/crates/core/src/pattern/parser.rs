//! Lexer and recursive-descent parser for pattern files.
//!
//! ```text
//! pattern  := regex [WHERE formula] [PARTITION BY ident] [config]
//! regex    := concat ('|' concat)*
//! concat   := postfix (('·' | ';')? postfix)*
//! postfix  := primary ('*' | '+')*
//! primary  := ident | call | '(' regex ')'
//! formula  := conj (('OR' | '∨') conj)*
//! conj     := unary (('AND' | '∧') unary)*
//! unary    := ('NOT' | '¬') unary | '(' formula ')' | call
//! call     := ident '(' var (',' const)* ')'
//! const    := number | string | ident | '(' number ',' number ')'
//! config   := '[config]' (key '=' value)*
//! ```
//!
//! An identifier directly followed by `(` inside the regular part is an
//! inline predicate bound to its first argument.

use crate::algebra::{Const, PredicateAtom, PredicateFormula};

use super::{PatternAst, PatternError, PatternSpec, PredicateRegistry, DEFAULT_PARTITION};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Concat,
    Star,
    Plus,
    Pipe,
    And,
    Or,
    Not,
    Minus,
    Assign,
    Where,
    Partition,
    By,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, PatternError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let err = |msg: String| PatternError::Parse {
            line: start_line,
            col: start_col,
            message: msg,
        };
        let mut push = |tok: Tok| {
            out.push(Spanned {
                tok,
                line: start_line,
                col: start_col,
            })
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '·' | ';' => Some(Tok::Concat),
            '*' => Some(Tok::Star),
            '+' => Some(Tok::Plus),
            '|' => Some(Tok::Pipe),
            '∧' => Some(Tok::And),
            '∨' => Some(Tok::Or),
            '¬' => Some(Tok::Not),
            '=' => Some(Tok::Assign),
            '-' if !chars
                .get(i + 1)
                .is_some_and(|d| d.is_ascii_digit() || *d == '.') =>
            {
                Some(Tok::Minus)
            }
            _ => None,
        };
        if let Some(tok) = single {
            push(tok);
            i += 1;
            col += 1;
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err("unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            push(Tok::Str(s));
            continue;
        }
        if c.is_ascii_digit() || c == '-' || c == '.' {
            let start = i;
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let raw: String = chars[start..i].iter().collect();
            col += i - start;
            let v: f64 = raw
                .parse()
                .map_err(|_| err(format!("malformed number `{raw}`")))?;
            push(Tok::Num(v));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            push(match word.as_str() {
                "WHERE" => Tok::Where,
                "PARTITION" => Tok::Partition,
                "BY" => Tok::By,
                "AND" => Tok::And,
                "OR" => Tok::Or,
                "NOT" => Tok::Not,
                _ => Tok::Ident(word),
            });
            continue;
        }
        return Err(err(format!("unexpected character `{c}`")));
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    registry: &'a PredicateRegistry,
    /// Bindings contributed by inline predicates in the regular part.
    inline: Vec<(String, PredicateFormula)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> PatternError {
        let s = &self.toks[self.pos];
        PatternError::Parse {
            line: s.line,
            col: s.col,
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), PatternError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {:?}", self.peek())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, PatternError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected {what}, found {other:?}"))),
        }
    }

    fn regex(&mut self) -> Result<PatternAst, PatternError> {
        let mut alts = Vec::new();
        push_flat(&mut alts, self.concat()?, true);
        while *self.peek() == Tok::Pipe {
            self.bump();
            push_flat(&mut alts, self.concat()?, true);
        }
        Ok(if alts.len() == 1 {
            alts.pop().unwrap()
        } else {
            PatternAst::Union(alts)
        })
    }

    fn concat(&mut self) -> Result<PatternAst, PatternError> {
        let mut parts = Vec::new();
        push_flat(&mut parts, self.postfix()?, false);
        loop {
            match self.peek() {
                Tok::Concat => {
                    self.bump();
                    push_flat(&mut parts, self.postfix()?, false);
                }
                Tok::Ident(_) | Tok::LParen => push_flat(&mut parts, self.postfix()?, false),
                _ => break,
            }
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            PatternAst::Concat(parts)
        })
    }

    fn postfix(&mut self) -> Result<PatternAst, PatternError> {
        let mut node = self.primary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    node = PatternAst::Star(Box::new(node));
                }
                Tok::Plus => {
                    self.bump();
                    node = PatternAst::Plus(Box::new(node));
                }
                _ => return Ok(node),
            }
        }
    }

    fn primary(&mut self) -> Result<PatternAst, PatternError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.regex()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek_at(1) == Tok::LParen {
                    let atom = self.call()?;
                    let var = atom.var.clone();
                    self.inline
                        .push((var.clone(), PredicateFormula::Atom(atom)));
                    Ok(PatternAst::Leaf(var))
                } else {
                    self.bump();
                    Ok(PatternAst::Leaf(name))
                }
            }
            other => Err(self.error(format!("expected a variable or `(`, found {other:?}"))),
        }
    }

    fn formula(&mut self) -> Result<PredicateFormula, PatternError> {
        let mut alts = vec![self.conj()?];
        while *self.peek() == Tok::Or {
            self.bump();
            alts.push(self.conj()?);
        }
        Ok(if alts.len() == 1 {
            alts.pop().unwrap()
        } else {
            PredicateFormula::Or(alts)
        })
    }

    fn conj(&mut self) -> Result<PredicateFormula, PatternError> {
        let mut parts = vec![self.unary()?];
        while *self.peek() == Tok::And {
            self.bump();
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            PredicateFormula::And(parts)
        })
    }

    fn unary(&mut self) -> Result<PredicateFormula, PatternError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(PredicateFormula::negate(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(_) => Ok(PredicateFormula::Atom(self.call()?)),
            other => Err(self.error(format!("expected a predicate, found {other:?}"))),
        }
    }

    fn call(&mut self) -> Result<PredicateAtom, PatternError> {
        let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
        let name = self.ident("predicate name")?;
        self.expect(Tok::LParen, "`(`")?;
        let var = self.ident("event variable")?;
        let mut args = Vec::new();
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.constant()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        let kernel = match self.registry.build(&name, &args) {
            None => return Err(PatternError::UnknownPredicate(name)),
            Some(Err(message)) => {
                return Err(PatternError::BadArguments {
                    predicate: name,
                    line,
                    col,
                    message,
                })
            }
            Some(Ok(k)) => k,
        };
        Ok(PredicateAtom::new(name, var, args, kernel))
    }

    fn constant(&mut self) -> Result<Const, PatternError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Const::Num(v))
            }
            Tok::Minus => {
                self.bump();
                match self.bump() {
                    Tok::Num(v) => Ok(Const::Num(-v)),
                    _ => Err(self.error("expected a number after `-`")),
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Const::Str(s))
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(Const::Ident(s))
            }
            Tok::LParen => {
                self.bump();
                let a = self.number()?;
                self.expect(Tok::Comma, "`,`")?;
                let b = self.number()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Const::Pair(a, b))
            }
            other => Err(self.error(format!("expected a constant, found {other:?}"))),
        }
    }

    fn number(&mut self) -> Result<f64, PatternError> {
        match self.constant()? {
            Const::Num(v) => Ok(v),
            _ => Err(self.error("expected a number")),
        }
    }
}

fn push_flat(out: &mut Vec<PatternAst>, node: PatternAst, union: bool) {
    match node {
        PatternAst::Union(cs) if union => out.extend(cs),
        PatternAst::Concat(cs) if !union => out.extend(cs),
        other => out.push(other),
    }
}

fn flatten_conjuncts(f: PredicateFormula, out: &mut Vec<PredicateFormula>) {
    match f {
        PredicateFormula::And(cs) => cs.into_iter().for_each(|c| flatten_conjuncts(c, out)),
        other => out.push(other),
    }
}

/// Splits the pattern text from its optional `[config]` section.
fn split_config(text: &str) -> (String, Option<(usize, String)>) {
    let mut pattern = String::new();
    let mut lines = text.lines().enumerate();
    for (no, line) in lines.by_ref() {
        if line.trim() == "[config]" {
            let rest: Vec<&str> = lines.map(|(_, l)| l).collect();
            return (pattern, Some((no + 2, rest.join("\n"))));
        }
        pattern.push_str(line);
        pattern.push('\n');
    }
    (pattern, None)
}

pub(super) fn parse(text: &str, registry: &PredicateRegistry) -> Result<PatternSpec, PatternError> {
    let (body, config) = split_config(text);
    let mut p = Parser {
        toks: lex(&body)?,
        pos: 0,
        registry,
        inline: Vec::new(),
    };
    let ast = p.regex()?;
    let mut conjuncts = Vec::new();
    if *p.peek() == Tok::Where {
        p.bump();
        flatten_conjuncts(p.formula()?, &mut conjuncts);
    }
    let mut partition = DEFAULT_PARTITION.to_string();
    if *p.peek() == Tok::Partition {
        p.bump();
        p.expect(Tok::By, "`BY`")?;
        partition = p.ident("partition attribute")?;
    }
    if *p.peek() != Tok::Eof {
        return Err(p.error(format!("unexpected {:?}", p.peek())));
    }

    let mut spec = PatternSpec::new(ast);
    spec.partition_attribute = partition;

    // group conjuncts by their single event variable
    let mut grouped: Vec<(String, Vec<PredicateFormula>)> = Vec::new();
    for (var, f) in std::mem::take(&mut p.inline) {
        push_group(&mut grouped, var, f);
    }
    for c in conjuncts {
        let vars: Vec<String> = c.vars().iter().map(|v| v.to_string()).collect();
        if vars.len() != 1 {
            return Err(PatternError::MixedVariables(c.to_string()));
        }
        push_group(&mut grouped, vars[0].clone(), c);
    }
    for (var, mut parts) in grouped {
        // `True(v)` is a vacuous conjunct, not a predicate of the alphabet
        parts.retain(|c| !matches!(c, PredicateFormula::Atom(a) if a.name == "True"));
        let f = if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            PredicateFormula::And(parts)
        };
        spec.bindings.push((var, f));
    }

    if let Some((first_line, cfg)) = config {
        parse_config(&cfg, first_line, registry, &mut spec)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn push_group(groups: &mut Vec<(String, Vec<PredicateFormula>)>, var: String, f: PredicateFormula) {
    let mut parts = Vec::new();
    flatten_conjuncts(f, &mut parts);
    match groups.iter_mut().find(|(v, _)| *v == var) {
        Some((_, existing)) => existing.extend(parts),
        None => groups.push((var, parts)),
    }
}

fn parse_config(
    text: &str,
    first_line: usize,
    registry: &PredicateRegistry,
    spec: &mut PatternSpec,
) -> Result<(), PatternError> {
    // Entries may span lines (long extras lists), so lex the whole section.
    let mut toks = lex(text)?;
    for t in &mut toks {
        t.line += first_line - 1;
    }
    let mut p = Parser {
        toks,
        pos: 0,
        registry,
        inline: Vec::new(),
    };
    while *p.peek() != Tok::Eof {
        let key = p.ident("config key")?;
        p.expect(Tok::Assign, "`=`")?;
        match key.as_str() {
            "order" => {
                let v = p.number()?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(PatternError::InvalidConfig(format!(
                        "order must be a non-negative integer, got {v}"
                    )));
                }
                spec.order = v as usize;
            }
            "theta" => spec.theta = p.number()?,
            "horizon" => {
                let v = p.number()?;
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(PatternError::InvalidConfig(format!(
                        "horizon must be a positive integer, got {v}"
                    )));
                }
                spec.horizon = Some(v as usize);
            }
            "extras" => {
                p.expect(Tok::LBracket, "`[`")?;
                let mut extras = Vec::new();
                if *p.peek() != Tok::RBracket {
                    extras.push(p.call()?);
                    while *p.peek() == Tok::Comma {
                        p.bump();
                        extras.push(p.call()?);
                    }
                }
                p.expect(Tok::RBracket, "`]`")?;
                spec.extras = extras;
            }
            other => {
                return Err(PatternError::InvalidConfig(format!(
                    "unknown key `{other}`"
                )))
            }
        }
    }
    Ok(())
}

/// Parses a comma-separated list of predicate calls, e.g. the value of an
/// `--extras` flag.
pub(super) fn parse_calls(
    text: &str,
    registry: &PredicateRegistry,
) -> Result<Vec<PredicateAtom>, PatternError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        registry,
        inline: Vec::new(),
    };
    let mut out = Vec::new();
    if *p.peek() == Tok::LBracket {
        p.bump();
    }
    while let Tok::Ident(_) = p.peek() {
        out.push(p.call()?);
        if *p.peek() == Tok::Comma {
            p.bump();
        }
    }
    if *p.peek() == Tok::RBracket {
        p.bump();
    }
    if *p.peek() != Tok::Eof {
        return Err(p.error(format!("unexpected {:?}", p.peek())));
    }
    Ok(out)
}
