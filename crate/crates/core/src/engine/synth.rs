use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Event, MintermSet, Value};
use crate::geo::{bearing_deg, destination, GeoPoint};
use crate::pmc::PatternMarkovChain;
use crate::sfa::DisambiguatedDfa;

use super::EngineError;

pub const DEFAULT_MAX_TRIES: usize = 10_000;

/// Per-partition memory of a source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceState {
    /// Most recent minterms, oldest first, at most the source's order.
    pub history: Vec<usize>,
    /// Automaton state for automaton-driven sources.
    pub state: usize,
}

/// A generator of minterm indices.
pub trait MintermSource: Send + Sync {
    fn num_minterms(&self) -> usize;
    fn start(&self) -> SourceState;
    fn sample(&self, state: &mut SourceState, rng: &mut ChaCha8Rng) -> usize;
}

fn weighted(probs: &[f64]) -> Result<WeightedIndex<f64>, EngineError> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0)
        || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(EngineError::InvalidSource(format!(
            "not a distribution: {probs:?}"
        )));
    }
    WeightedIndex::new(probs).map_err(|e| EngineError::InvalidSource(e.to_string()))
}

/// Independent draws from a fixed distribution.
#[derive(Debug, Clone)]
pub struct IidSource {
    k: usize,
    dist: WeightedIndex<f64>,
}

impl IidSource {
    pub fn new(probs: &[f64]) -> Result<Self, EngineError> {
        Ok(IidSource {
            k: probs.len(),
            dist: weighted(probs)?,
        })
    }
}

impl MintermSource for IidSource {
    fn num_minterms(&self) -> usize {
        self.k
    }

    fn start(&self) -> SourceState {
        SourceState::default()
    }

    fn sample(&self, _: &mut SourceState, rng: &mut ChaCha8Rng) -> usize {
        self.dist.sample(rng)
    }
}

/// Order-`m` Markov model over minterms.
///
/// `rows` is indexed by the last `m` minterms read as a base-`k` number,
/// oldest digit first. Until `m` minterms have been drawn, `initial` is used.
#[derive(Debug, Clone)]
pub struct MarkovSource {
    k: usize,
    order: usize,
    rows: Vec<WeightedIndex<f64>>,
    initial: WeightedIndex<f64>,
}

impl MarkovSource {
    pub fn new(order: usize, rows: &[Vec<f64>], initial: &[f64]) -> Result<Self, EngineError> {
        let k = initial.len();
        let expected = k.checked_pow(order as u32).unwrap_or(usize::MAX);
        if rows.len() != expected || rows.iter().any(|r| r.len() != k) {
            return Err(EngineError::InvalidSource(format!(
                "order {order} over {k} minterms needs {expected} rows of length {k}"
            )));
        }
        Ok(MarkovSource {
            k,
            order,
            rows: rows.iter().map(|r| weighted(r)).collect::<Result<_, _>>()?,
            initial: weighted(initial)?,
        })
    }
}

impl MintermSource for MarkovSource {
    fn num_minterms(&self) -> usize {
        self.k
    }

    fn start(&self) -> SourceState {
        SourceState::default()
    }

    fn sample(&self, state: &mut SourceState, rng: &mut ChaCha8Rng) -> usize {
        let m = if state.history.len() < self.order {
            self.initial.sample(rng)
        } else {
            let ctx = state.history.iter().fold(0, |acc, &h| acc * self.k + h);
            self.rows[ctx].sample(rng)
        };
        if self.order > 0 {
            if state.history.len() == self.order {
                state.history.remove(0);
            }
            state.history.push(m);
        }
        m
    }
}

/// Drives an automaton with a chain over its states: from state `i` the
/// mass `π(i, j)` is split evenly over the minterms leading to `j`. The
/// state sequence seen by the automaton is then exactly the chain.
#[derive(Debug, Clone)]
pub struct PmcSource {
    dfa: Arc<DisambiguatedDfa>,
    rows: Vec<Option<WeightedIndex<f64>>>,
    reset_on_detection: bool,
}

impl PmcSource {
    pub fn new(
        dfa: Arc<DisambiguatedDfa>,
        pmc: &PatternMarkovChain,
        reset_on_detection: bool,
    ) -> Result<Self, EngineError> {
        let inner = &dfa.dfa;
        if pmc.num_states() != inner.num_states() {
            return Err(EngineError::InvalidSource(
                "chain and automaton sizes differ".into(),
            ));
        }
        let k = inner.num_minterms();
        let mut rows = Vec::with_capacity(inner.num_states());
        for q in 0..inner.num_states() {
            let targets = inner.row(q);
            let weights: Vec<f64> = (0..k)
                .map(|a| {
                    let j = targets[a];
                    let share = targets.iter().filter(|&&t| t == j).count() as f64;
                    pmc.get(q, j) / share
                })
                .collect();
            let total: f64 = weights.iter().sum();
            rows.push(if total > 0.0 {
                Some(
                    WeightedIndex::new(&weights)
                        .map_err(|e| EngineError::InvalidSource(e.to_string()))?,
                )
            } else if inner.is_final(q) {
                None
            } else {
                return Err(EngineError::InvalidSource(format!(
                    "state {q} has no mass on its structural successors"
                )));
            });
        }
        Ok(PmcSource {
            dfa,
            rows,
            reset_on_detection,
        })
    }
}

impl MintermSource for PmcSource {
    fn num_minterms(&self) -> usize {
        self.dfa.dfa.num_minterms()
    }

    fn start(&self) -> SourceState {
        SourceState {
            history: Vec::new(),
            state: self.dfa.dfa.initial,
        }
    }

    fn sample(&self, st: &mut SourceState, rng: &mut ChaCha8Rng) -> usize {
        let inner = &self.dfa.dfa;
        let a = match &self.rows[st.state] {
            Some(dist) => dist.sample(rng),
            None => rng.gen_range(0..inner.num_minterms()),
        };
        let next = inner.next(st.state, a);
        st.state = if self.reset_on_detection && inner.is_final(next) {
            inner.initial
        } else {
            next
        };
        a
    }
}

/// Turns a sampled minterm into a concrete event.
pub trait AttributeEmitter: Send + Sync {
    fn emit(
        &self,
        minterm: usize,
        partition: &Arc<str>,
        timestamp: i64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Event, EngineError>;
}

type Attributes = Vec<(Arc<str>, Value)>;

/// One fixed attribute set per minterm.
#[derive(Debug, Clone)]
pub struct TemplateEmitter {
    alphabet: Arc<MintermSet>,
    templates: Vec<Option<Attributes>>,
}

impl TemplateEmitter {
    /// For each minterm, picks the first candidate that classifies to it.
    pub fn search(alphabet: Arc<MintermSet>, candidates: &[Attributes]) -> Self {
        let mut templates = vec![None; alphabet.len()];
        for c in candidates {
            let mut e = Event::new(0, "");
            for (k, v) in c {
                e.set(k.clone(), v.clone());
            }
            if let Ok(m) = alphabet.classify_index(&e) {
                templates[m].get_or_insert_with(|| c.clone());
            }
        }
        TemplateEmitter {
            alphabet,
            templates,
        }
    }

    pub fn covers_all(&self) -> bool {
        self.templates.iter().all(Option::is_some)
    }
}

impl AttributeEmitter for TemplateEmitter {
    fn emit(
        &self,
        minterm: usize,
        partition: &Arc<str>,
        timestamp: i64,
        _: &mut ChaCha8Rng,
    ) -> Result<Event, EngineError> {
        let template = self.templates[minterm]
            .as_ref()
            .ok_or(EngineError::UninvertibleMinterm { minterm, tries: 0 })?;
        let mut e = Event::new(timestamp, partition.clone());
        for (k, v) in template {
            e.set(k.clone(), v.clone());
        }
        if self.alphabet.classify_index(&e)? != minterm {
            return Err(EngineError::UninvertibleMinterm { minterm, tries: 1 });
        }
        Ok(e)
    }
}

type Proposal = dyn Fn(&mut ChaCha8Rng) -> Attributes + Send + Sync;

/// Draws attribute proposals until one classifies to the wanted minterm.
pub struct RejectionEmitter {
    alphabet: Arc<MintermSet>,
    proposal: Box<Proposal>,
    pub max_tries: usize,
}

impl RejectionEmitter {
    pub fn new(
        alphabet: Arc<MintermSet>,
        proposal: impl Fn(&mut ChaCha8Rng) -> Attributes + Send + Sync + 'static,
    ) -> Self {
        RejectionEmitter {
            alphabet,
            proposal: Box::new(proposal),
            max_tries: DEFAULT_MAX_TRIES,
        }
    }
}

impl AttributeEmitter for RejectionEmitter {
    fn emit(
        &self,
        minterm: usize,
        partition: &Arc<str>,
        timestamp: i64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Event, EngineError> {
        for _ in 0..self.max_tries {
            let mut e = Event::new(timestamp, partition.clone());
            for (k, v) in (self.proposal)(rng) {
                e.set(k, v);
            }
            if self.alphabet.classify_index(&e)? == minterm {
                return Ok(e);
            }
        }
        Err(EngineError::UninvertibleMinterm {
            minterm,
            tries: self.max_tries,
        })
    }
}

/// AIS-like positions within `radius_km` of `center`, speeds in knots
/// `[0, 25)` and headings that point roughly at the center half the time.
pub fn ais_proposal(
    center: GeoPoint,
    radius_km: f64,
) -> impl Fn(&mut ChaCha8Rng) -> Attributes + Send + Sync + 'static {
    move |rng| {
        let p = destination(
            center,
            rng.gen_range(0.0..360.0),
            rng.gen_range(0.0..radius_km),
        );
        let heading = if rng.gen_bool(0.5) {
            (bearing_deg(p, center) + rng.gen_range(-30.0..30.0)).rem_euclid(360.0)
        } else {
            rng.gen_range(0.0..360.0)
        };
        vec![
            (Arc::from("lon"), Value::Num(p.lon)),
            (Arc::from("lat"), Value::Num(p.lat)),
            (Arc::from("speed"), Value::Num(rng.gen_range(0.0..25.0))),
            (Arc::from("heading"), Value::Num(heading)),
        ]
    }
}

const GEO_ATTRIBUTES: [&str; 4] = ["lon", "lat", "speed", "heading"];

/// A proposal covering every attribute the alphabet's predicates read.
///
/// Attributes with witness values (equality constants, band edges and
/// midpoints) are drawn from those values. With `area` set, positions,
/// speeds and headings come from [`ais_proposal`] unless witnesses exist.
/// Any other attribute is drawn uniformly from `[-100, 100)`.
pub fn alphabet_proposal(
    alphabet: &MintermSet,
    area: Option<(GeoPoint, f64)>,
) -> impl Fn(&mut ChaCha8Rng) -> Attributes + Send + Sync + 'static {
    let mut pools: Vec<(Arc<str>, Vec<Value>)> = Vec::new();
    let mut free: Vec<Arc<str>> = Vec::new();
    for atom in alphabet.predicates() {
        for (attr, value) in atom.witnesses() {
            match pools.iter_mut().find(|(a, _)| **a == *attr) {
                Some((_, pool)) if !pool.contains(&value) => pool.push(value),
                Some(_) => {}
                None => pools.push((Arc::from(attr), vec![value])),
            }
        }
    }
    for atom in alphabet.predicates() {
        for attr in atom.attributes() {
            let geo = area.is_some() && GEO_ATTRIBUTES.contains(&attr.as_str());
            if !geo
                && !pools.iter().any(|(a, _)| **a == *attr)
                && !free.iter().any(|a| **a == *attr)
            {
                free.push(Arc::from(attr));
            }
        }
    }
    let ais = area.map(|(center, radius)| ais_proposal(center, radius));
    move |rng| {
        let mut out = ais.as_ref().map(|f| f(rng)).unwrap_or_default();
        for (attr, pool) in &pools {
            let v = pool[rng.gen_range(0..pool.len())].clone();
            match out.iter_mut().find(|(a, _)| a == attr) {
                Some(slot) => slot.1 = v,
                None => out.push((attr.clone(), v)),
            }
        }
        for attr in &free {
            out.push((attr.clone(), Value::Num(rng.gen_range(-100.0..100.0))));
        }
        out
    }
}

/// `v000`, `v001`, ... zero-padded to a common width.
pub fn partition_keys(count: usize) -> Vec<Arc<str>> {
    let width = count.saturating_sub(1).to_string().len();
    (0..count)
        .map(|i| Arc::from(format!("v{i:0width$}")))
        .collect()
}

/// `n` events over `partitions` partitions chosen uniformly at random. Each
/// partition keeps its own source state; timestamps are the global index.
pub fn generate_synthetic_stream(
    source: &dyn MintermSource,
    emitter: &dyn AttributeEmitter,
    n: usize,
    partitions: usize,
    seed: u64,
) -> Result<Vec<Event>, EngineError> {
    if n > 0 && partitions == 0 {
        return Err(EngineError::InvalidSource(
            "at least one partition is needed".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys = partition_keys(partitions);
    let mut states: Vec<SourceState> = (0..partitions).map(|_| source.start()).collect();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let p = rng.gen_range(0..partitions);
        let m = source.sample(&mut states[p], &mut rng);
        out.push(emitter.emit(m, &keys[p], t as i64, &mut rng)?);
    }
    Ok(out)
}
