//! Loading patterns, streams and chains from command-line arguments.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use cef::algebra::SatOracle;
use cef::engine::io::read_stream;
use cef::geo::{builtin_registry, GeoContext, GeoPoint};
use cef::pattern::{parse_pattern, parse_predicate_list, PatternSpec, PredicateRegistry};
use cef::pmc::{ForecastTable, Horizon, LearnOptions, PatternMarkovChain};
use cef::sfa::{compile, CompiledPattern, DisambiguatedDfa};
use cef::Event;

use crate::{Internal, ModelArgs, OracleArg, PatternArgs, Usage};

pub struct Loaded {
    pub spec: PatternSpec,
    pub registry: PredicateRegistry,
    pub geo: GeoContext,
}

pub fn oracle(arg: OracleArg) -> SatOracle {
    match arg {
        OracleArg::Assume => SatOracle::AssumeAllSatisfiable,
        OracleArg::Interval => SatOracle::IntervalPruning,
    }
}

/// Parses the pattern with flags overriding its `[config]` section.
pub fn load_pattern(args: &PatternArgs) -> Result<Loaded> {
    if let Some(t) = args.theta {
        if !(t > 0.0 && t <= 1.0) {
            bail!(Usage(format!("--theta must lie in (0, 1], got {t}")));
        }
    }
    let mut geo = GeoContext::default();
    if let Some(path) = &args.regions {
        geo.load_regions_file(path)
            .with_context(|| format!("loading regions from {}", path.display()))?;
    }
    if let Some(path) = &args.fishing {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        geo.load_fishing_vessels(&text);
    }
    let registry = builtin_registry(geo.clone());
    let text = std::fs::read_to_string(&args.pattern)
        .with_context(|| format!("reading pattern {}", args.pattern.display()))?;
    let mut spec = parse_pattern(&text, &registry)
        .with_context(|| format!("parsing {}", args.pattern.display()))?;
    if let Some(m) = args.order {
        spec.order = m;
    }
    if let Some(t) = args.theta {
        spec.theta = t;
    }
    if args.horizon.is_some() {
        spec.horizon = args.horizon;
    }
    if let Some(h) = spec.horizon {
        if h == 0 {
            bail!(Usage("horizon must be at least 1".into()));
        }
    }
    if let Some(extras) = &args.extras {
        spec = apply_extras(spec, extras, &registry)?;
    }
    spec.validate()?;
    Ok(Loaded {
        spec,
        registry,
        geo,
    })
}

/// Replaces the pattern's extras; `none` or an empty list clears them.
pub fn apply_extras(
    spec: PatternSpec,
    list: &str,
    registry: &PredicateRegistry,
) -> Result<PatternSpec> {
    let list = list.trim();
    let extras = if list.is_empty() || list == "none" {
        Vec::new()
    } else {
        parse_predicate_list(list, registry).with_context(|| format!("parsing extras `{list}`"))?
    };
    Ok(spec.with_extras(extras)?)
}

pub fn compile_spec(spec: &PatternSpec, args: &PatternArgs) -> Result<CompiledPattern> {
    compile(spec, oracle(args.oracle), spec.order, args.state_cap).context("compiling pattern")
}

pub fn horizon(spec: &PatternSpec) -> Horizon {
    match spec.horizon {
        Some(h) => Horizon::Fixed(h),
        None => Horizon::Auto { theta: spec.theta },
    }
}

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    read_stream(path).with_context(|| format!("reading stream {}", path.display()))
}

/// The chain from `--model`, or learned from `--train`.
pub fn load_chain(
    dfa: &DisambiguatedDfa,
    spec: &PatternSpec,
    model: &ModelArgs,
) -> Result<Option<PatternMarkovChain>> {
    if let Some(path) = &model.model {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading model {}", path.display()))?;
        let pmc = PatternMarkovChain::from_json(&text)
            .with_context(|| format!("loading model {}", path.display()))?;
        if pmc.num_states() != dfa.num_states() || pmc.finals() != dfa.dfa.finals.as_slice() {
            bail!(
                "model {} has {} states but the compiled automaton has {}; compile with the same pattern and order",
                path.display(),
                pmc.num_states(),
                dfa.num_states()
            );
        }
        return Ok(Some(pmc));
    }
    let Some(path) = &model.train else {
        return Ok(None);
    };
    let events = read_events(path)?;
    Ok(Some(learn(dfa, spec, &events, model)?))
}

pub fn learn(
    dfa: &DisambiguatedDfa,
    spec: &PatternSpec,
    events: &[Event],
    model: &ModelArgs,
) -> Result<PatternMarkovChain> {
    let options = LearnOptions {
        per_partition: !model.pooled,
        laplace: model.laplace,
        ..LearnOptions::default()
    };
    let learned = PatternMarkovChain::learn(dfa, events, &spec.partition_attribute, options)
        .context("learning chain")?;
    learned
        .pmc
        .validate()
        .map_err(|e| Internal(format!("learned chain is not stochastic: {e}")))?;
    Ok(learned.pmc)
}

pub fn require_chain(chain: Option<PatternMarkovChain>) -> Result<PatternMarkovChain> {
    chain.ok_or_else(|| {
        Usage("a chain is needed: pass --train STREAM or --model pmc.json".into()).into()
    })
}

pub fn table(pmc: &PatternMarkovChain, spec: &PatternSpec) -> Result<Arc<ForecastTable>> {
    Ok(Arc::new(
        ForecastTable::build(pmc, spec.theta, horizon(spec)).context("building forecast table")?,
    ))
}

/// `--center lon,lat`, else the first named point (alphabetically), else
/// the anchor of the first region.
pub fn center(text: Option<&str>, geo: &GeoContext) -> Result<Option<GeoPoint>> {
    if let Some(t) = text {
        let parts: Vec<&str> = t.split(',').map(str::trim).collect();
        let [lon, lat] = parts.as_slice() else {
            bail!(Usage(format!("--center expects `lon,lat`, got `{t}`")));
        };
        let (lon, lat): (f64, f64) = match (lon.parse(), lat.parse()) {
            (Ok(a), Ok(b)) => (a, b),
            _ => bail!(Usage(format!("--center expects numbers, got `{t}`"))),
        };
        return Ok(Some(
            GeoPoint::checked(lon, lat).map_err(|e| Usage(e.to_string()))?,
        ));
    }
    let mut names: Vec<&String> = geo.points.keys().collect();
    names.sort();
    if let Some(n) = names.first() {
        return Ok(Some(geo.points[*n]));
    }
    let mut regions: Vec<&String> = geo.regions.keys().collect();
    regions.sort();
    Ok(regions.first().map(|n| geo.regions[*n].anchor()))
}

pub fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Usage(format!("{flag}: cannot parse `{s}`")).into())
        })
        .collect()
}

pub fn arc(dfa: DisambiguatedDfa) -> Arc<DisambiguatedDfa> {
    Arc::new(dfa)
}
