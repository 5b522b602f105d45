use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{Evaluator, ModelKind};
use crate::tracking::{Outcome, TransitionRecord};

pub const PROBABILITY_FLOOR: f64 = 1e-9;

/// Records entering the likelihood with their success labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodDataset {
    pub items: Vec<(TransitionRecord, bool)>,
    pub shots: usize,
    pub turnovers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetCaps {
    pub max_shots: Option<usize>,
    pub max_turnovers: Option<usize>,
    pub seed: u64,
}

impl Default for DatasetCaps {
    fn default() -> Self {
        DatasetCaps {
            max_shots: Some(4000),
            max_turnovers: Some(600),
            seed: 0,
        }
    }
}

impl DatasetCaps {
    pub fn unlimited() -> Self {
        DatasetCaps {
            max_shots: None,
            max_turnovers: None,
            seed: 0,
        }
    }
}

impl LikelihoodDataset {
    pub fn from_records(records: &[TransitionRecord]) -> Self {
        Self::build(records.to_vec(), Vec::new())
    }

    /// Keeps at most the capped number of shots and turnovers, chosen after a
    /// seeded shuffle so the subset does not depend on corpus order beyond the seed.
    pub fn sampled(records: &[TransitionRecord], caps: &DatasetCaps) -> Self {
        let (mut shots, mut turnovers): (Vec<TransitionRecord>, Vec<TransitionRecord>) = records
            .iter()
            .cloned()
            .partition(|r| r.outcome != Outcome::Turnover);
        let mut rng = ChaCha8Rng::seed_from_u64(caps.seed);
        shots.shuffle(&mut rng);
        turnovers.shuffle(&mut rng);
        if let Some(n) = caps.max_shots {
            shots.truncate(n);
        }
        if let Some(n) = caps.max_turnovers {
            turnovers.truncate(n);
        }
        Self::build(shots, turnovers)
    }

    fn build(a: Vec<TransitionRecord>, b: Vec<TransitionRecord>) -> Self {
        let items: Vec<(TransitionRecord, bool)> = a
            .into_iter()
            .chain(b)
            .map(|r| {
                let y = r.outcome == Outcome::Scored;
                (r, y)
            })
            .collect();
        let turnovers = items.iter().filter(|(r, _)| r.outcome == Outcome::Turnover).count();
        LikelihoodDataset {
            shots: items.len() - turnovers,
            turnovers,
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Bernoulli log-likelihood with probabilities clamped away from 0 and 1.
pub fn bernoulli_log_likelihood(probabilities: &[f64], labels: &[bool]) -> f64 {
    probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| term(p, y))
        .sum()
}

fn term(p: f64, y: bool) -> f64 {
    let p = if p.is_nan() { PROBABILITY_FLOOR } else { p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR) };
    if y {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// Per-item terms are computed in parallel and summed in dataset order.
pub fn log_likelihood(dataset: &LikelihoodDataset, ev: &Evaluator, kind: ModelKind) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::insufficient("likelihood dataset is empty"));
    }
    let terms: Vec<Result<f64>> = dataset
        .items
        .par_iter()
        .map(|(r, y)| Ok(term(ev.value(kind, &r.state, r.target)?, *y)))
        .collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn half_probability_is_ln_half() {
        for y in [true, false] {
            assert!((bernoulli_log_likelihood(&[0.5], &[y]) - 0.5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_predictions_are_near_zero() {
        let ys = [true, false, true, true, false];
        let ps: Vec<f64> = ys.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
        let ll = bernoulli_log_likelihood(&ps, &ys);
        assert!(ll <= 0.0 && ll >= 5.0 * (1.0 - PROBABILITY_FLOOR).ln() - 1e-15);
    }

    #[test]
    fn matches_log_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ps: Vec<f64> = (0..100).map(|_| rng.random_range(0.5..0.99)).collect();
        let ys: Vec<bool> = (0..100).map(|_| rng.random::<f64>() < 0.9).collect();
        let product: f64 = ps.iter().zip(&ys).map(|(&p, &y)| if y { p } else { 1.0 - p }).product();
        assert!(product > 0.0);
        assert!((bernoulli_log_likelihood(&ps, &ys) - product.ln()).abs() < 1e-9);
    }

    #[test]
    fn permutation_invariant() {
        let ps = [0.2, 0.7, 0.4, 0.9];
        let ys = [false, true, true, false];
        let a = bernoulli_log_likelihood(&ps, &ys);
        let b = bernoulli_log_likelihood(&[0.9, 0.4, 0.2, 0.7], &[false, true, false, true]);
        assert!((a - b).abs() < 1e-12);
    }
}
