use serde::{Deserialize, Serialize};

use super::waiting::{distribution_with, Blocks};
use super::{Horizon, PatternMarkovChain, PmcError, WaitingTimeDistribution};

/// Slack used when comparing interval masses against the threshold and
/// against each other.
pub const MASS_EPS: f64 = 1e-12;

/// Interval `[start, end]` of future steps, 1-based, with its mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub state: usize,
    pub start: usize,
    pub end: usize,
    pub probability: f64,
}

impl Forecast {
    /// `end - start`, the width used as spread.
    pub fn spread(&self) -> usize {
        self.end - self.start
    }
}

/// Prefix sums with a leading zero: `cum[n]` is the mass of `1..=n`.
pub fn prefix_mass(probs: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(probs.len() + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cum.push(acc);
    }
    cum
}

fn check_theta(theta: f64) -> Result<(), PmcError> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(PmcError::InvalidTheta(theta))
    }
}

/// Shortest window whose mass reaches `theta`. Among equally short windows
/// the heavier wins, then the earlier one.
pub fn forecast_interval(dist: &WaitingTimeDistribution, theta: f64) -> Result<Forecast, PmcError> {
    check_theta(theta)?;
    let cum = prefix_mass(&dist.probs);
    let h = dist.probs.len();
    if cum[h] < theta - MASS_EPS {
        return Err(PmcError::HorizonTooShort {
            states: vec![dist.state],
        });
    }
    let enough = |s: usize, e: usize| cum[e] - cum[s - 1] >= theta - MASS_EPS;
    let mut best: Option<(usize, usize, f64)> = None;
    let mut start = 1;
    for end in 1..=h {
        if !enough(start, end) {
            continue;
        }
        while start < end && enough(start + 1, end) {
            start += 1;
        }
        let mass = cum[end] - cum[start - 1];
        let better = match best {
            None => true,
            Some((bs, be, bm)) => {
                let (len, blen) = (end - start, be - bs);
                len < blen || (len == blen && mass > bm + MASS_EPS)
            }
        };
        if better {
            best = Some((start, end, mass));
        }
    }
    let (start, end, probability) = best.expect("total mass reaches theta");
    Ok(Forecast {
        state: dist.state,
        start,
        end,
        probability,
    })
}

/// Forecasts for every non-final state, computed once per chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTable {
    pub theta: f64,
    /// Indexed by state; `None` for final states and failed states.
    entries: Vec<Option<Forecast>>,
}

impl ForecastTable {
    /// Fails with every state whose horizon holds less than `theta`.
    pub fn build(pmc: &PatternMarkovChain, theta: f64, horizon: Horizon) -> Result<Self, PmcError> {
        let (table, failures) = Self::build_lenient(pmc, theta, horizon)?;
        if failures.is_empty() {
            Ok(table)
        } else {
            Err(PmcError::HorizonTooShort { states: failures })
        }
    }

    /// Like [`ForecastTable::build`] but keeps going, leaving failed states
    /// without a forecast. Returns the failed states alongside.
    pub fn build_lenient(
        pmc: &PatternMarkovChain,
        theta: f64,
        horizon: Horizon,
    ) -> Result<(Self, Vec<usize>), PmcError> {
        check_theta(theta)?;
        let blocks = Blocks::new(pmc);
        let mut entries = vec![None; pmc.num_states()];
        let mut failures = Vec::new();
        for (q, slot) in entries.iter_mut().enumerate() {
            if pmc.is_final(q) {
                continue;
            }
            let dist = distribution_with(&blocks, q, horizon)?;
            match forecast_interval(&dist, theta) {
                Ok(f) => *slot = Some(f),
                Err(PmcError::HorizonTooShort { .. }) => failures.push(q),
                Err(e) => return Err(e),
            }
        }
        if !failures.is_empty() {
            log::warn!(
                "horizon too short for {} state(s): {:?}",
                failures.len(),
                failures
            );
        }
        Ok((ForecastTable { theta, entries }, failures))
    }

    pub fn get(&self, state: usize) -> Option<&Forecast> {
        self.entries.get(state).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.entries.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Forecast> {
        self.entries.iter().flatten()
    }
}
