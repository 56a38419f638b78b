use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::algebra::atoms::{BetweenKernel, EqKernel, TrueKernel};
use crate::algebra::{AtomKernel, Const, Value};

type Constructor = dyn Fn(&[Const]) -> Result<Arc<dyn AtomKernel>, String> + Send + Sync;

/// Maps predicate names to kernel constructors, plus named constants that
/// identifiers in argument lists resolve to (e.g. `PortCoords`).
#[derive(Clone, Default)]
pub struct PredicateRegistry {
    constructors: HashMap<String, Arc<Constructor>>,
    constants: HashMap<String, Const>,
}

impl fmt::Debug for PredicateRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<&String> = self.constructors.keys().collect();
        names.sort();
        f.debug_struct("PredicateRegistry")
            .field("predicates", &names)
            .field("constants", &self.constants.len())
            .finish()
    }
}

impl PredicateRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry with the domain-free atoms:
    /// `True(x)`, `Eq(x, attr, value)` and `Between(x, attr, lo, hi)`.
    pub fn generic() -> Self {
        let mut reg = Self::empty();
        reg.register("True", |args| {
            expect_arity(args, 0)?;
            Ok(Arc::new(TrueKernel))
        });
        reg.register("Eq", |args| {
            expect_arity(args, 2)?;
            let attr = ident_arg(&args[0])?;
            let value = match &args[1] {
                Const::Num(v) => Value::Num(*v),
                Const::Ident(s) | Const::Str(s) => Value::from(s.as_str()),
                Const::Pair(..) => return Err("Eq does not accept a coordinate pair".into()),
            };
            Ok(Arc::new(EqKernel::new(attr, value)))
        });
        reg.register("Between", |args| {
            expect_arity(args, 3)?;
            let attr = ident_arg(&args[0])?;
            Ok(Arc::new(BetweenKernel::new(
                attr,
                num_arg(&args[1])?,
                num_arg(&args[2])?,
            )))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, constructor: F)
    where
        F: Fn(&[Const]) -> Result<Arc<dyn AtomKernel>, String> + Send + Sync + 'static,
    {
        self.constructors
            .insert(name.to_string(), Arc::new(constructor));
    }

    pub fn define_constant(&mut self, name: &str, value: Const) {
        self.constants.insert(name.to_string(), value);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.constructors.contains_key(name)
    }

    pub fn constant(&self, name: &str) -> Option<&Const> {
        self.constants.get(name)
    }

    /// Builds the kernel for `name(args)`. Identifier arguments naming a
    /// registered constant are substituted first.
    pub fn build(&self, name: &str, args: &[Const]) -> Option<Result<Arc<dyn AtomKernel>, String>> {
        let ctor = self.constructors.get(name)?;
        let resolved: Vec<Const> = args
            .iter()
            .map(|a| match a {
                Const::Ident(id) => self.constants.get(id).cloned().unwrap_or_else(|| a.clone()),
                other => other.clone(),
            })
            .collect();
        Some(ctor(&resolved))
    }
}

pub fn expect_arity(args: &[Const], n: usize) -> Result<(), String> {
    if args.len() == n {
        Ok(())
    } else {
        Err(format!(
            "expected {n} constant argument(s), got {}",
            args.len()
        ))
    }
}

pub fn num_arg(arg: &Const) -> Result<f64, String> {
    match arg {
        Const::Num(v) => Ok(*v),
        other => Err(format!("expected a number, got `{other}`")),
    }
}

pub fn ident_arg(arg: &Const) -> Result<String, String> {
    match arg {
        Const::Ident(s) | Const::Str(s) => Ok(s.clone()),
        other => Err(format!("expected an identifier, got `{other}`")),
    }
}
