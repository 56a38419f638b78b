use super::{PatternMarkovChain, PmcError};

/// Horizon cap for automatically sized distributions.
pub const MAX_AUTO_HORIZON: usize = 5000;
/// Cumulative mass the automatic horizon aims to cover at least.
pub const AUTO_HORIZON_MASS: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Fixed(usize),
    /// Smallest `n` whose cumulative mass reaches `max(theta, 0.999)`,
    /// capped at [`MAX_AUTO_HORIZON`].
    Auto {
        theta: f64,
    },
}

/// `probs[n - 1] = P(W = n)` for `n = 1..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingTimeDistribution {
    pub state: usize,
    pub horizon: usize,
    pub probs: Vec<f64>,
    /// Probability of not having reached a final state within the horizon.
    pub tail_mass: f64,
}

impl WaitingTimeDistribution {
    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// The chain split into transient (non-final) and absorbing parts.
pub(super) struct Blocks {
    /// Row of `N` for each transient state, or `None` for finals.
    index: Vec<Option<usize>>,
    /// `N` restricted to transient columns.
    transient: Vec<Vec<(usize, f64)>>,
    /// `C·1`: one-step absorption probability per transient row.
    absorb: Vec<f64>,
}

impl Blocks {
    pub(super) fn new(pmc: &PatternMarkovChain) -> Self {
        let n = pmc.num_states();
        let mut index = vec![None; n];
        let mut next = 0;
        for (q, slot) in index.iter_mut().enumerate() {
            if !pmc.is_final(q) {
                *slot = Some(next);
                next += 1;
            }
        }
        let mut transient = Vec::with_capacity(next);
        let mut absorb = Vec::with_capacity(next);
        for q in (0..n).filter(|&q| !pmc.is_final(q)) {
            let mut row = Vec::new();
            let mut c = 0.0;
            for &(j, p) in pmc.row(q) {
                match index[j] {
                    Some(col) => row.push((col, p)),
                    None => c += p,
                }
            }
            transient.push(row);
            absorb.push(c);
        }
        Blocks {
            index,
            transient,
            absorb,
        }
    }
}

/// Iterates `p[n] = ξ N^{n-1} C 1` by repeated vector-matrix products.
fn iterate(
    blocks: &Blocks,
    mut xi: Vec<f64>,
    horizon: Horizon,
) -> Result<(Vec<f64>, f64), PmcError> {
    let (limit, target) = match horizon {
        Horizon::Fixed(0) => return Err(PmcError::InvalidHorizon(0)),
        Horizon::Fixed(h) => (h, None),
        Horizon::Auto { theta } => (MAX_AUTO_HORIZON, Some(theta.max(AUTO_HORIZON_MASS))),
    };
    let mut probs = Vec::new();
    let mut cumulative = 0.0;
    let mut next = vec![0.0; xi.len()];
    for _ in 0..limit {
        let p: f64 = xi.iter().zip(&blocks.absorb).map(|(v, c)| v * c).sum();
        probs.push(p);
        cumulative += p;
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &v) in xi.iter().enumerate() {
            if v != 0.0 {
                for &(j, pij) in &blocks.transient[i] {
                    next[j] += v * pij;
                }
            }
        }
        std::mem::swap(&mut xi, &mut next);
        if target.is_some_and(|t| cumulative >= t) {
            break;
        }
    }
    let tail = xi.iter().sum::<f64>().max(0.0);
    Ok((probs, tail))
}

/// Distribution of the number of steps until the chain, started in the
/// non-final `state`, first enters a final state.
pub fn waiting_time_distribution(
    pmc: &PatternMarkovChain,
    state: usize,
    horizon: Horizon,
) -> Result<WaitingTimeDistribution, PmcError> {
    if state >= pmc.num_states() {
        return Err(PmcError::UnknownState(state));
    }
    if pmc.is_final(state) {
        return Err(PmcError::FinalStateQuery(state));
    }
    distribution_with(&Blocks::new(pmc), state, horizon)
}

pub(super) fn distribution_with(
    blocks: &Blocks,
    state: usize,
    horizon: Horizon,
) -> Result<WaitingTimeDistribution, PmcError> {
    let mut xi = vec![0.0; blocks.transient.len()];
    xi[blocks.index[state].expect("non-final")] = 1.0;
    let (probs, tail_mass) = iterate(blocks, xi, horizon)?;
    Ok(WaitingTimeDistribution {
        state,
        horizon: probs.len(),
        probs,
        tail_mass,
    })
}

/// Same as [`waiting_time_distribution`] for an arbitrary initial
/// distribution over all states; mass on final states is ignored.
/// Returns `(probs, tail_mass)`.
pub fn waiting_time_from_distribution(
    pmc: &PatternMarkovChain,
    initial: &[f64],
    horizon: Horizon,
) -> Result<(Vec<f64>, f64), PmcError> {
    if initial.len() != pmc.num_states() {
        return Err(PmcError::Malformed(
            "initial distribution length must equal the state count".into(),
        ));
    }
    let blocks = Blocks::new(pmc);
    let mut xi = vec![0.0; blocks.transient.len()];
    for (q, &w) in initial.iter().enumerate() {
        if let Some(i) = blocks.index[q] {
            xi[i] = w;
        }
    }
    iterate(&blocks, xi, horizon)
}
