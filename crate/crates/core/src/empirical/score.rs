use serde::{Deserialize, Serialize};

use crate::court::{CourtSpec, Point};
use crate::error::{Error, Result};
use crate::estimation::simplex::{nelder_mead_minimize, Bounds, SimplexConfig};
use crate::tracking::{Outcome, TransitionRecord};

pub const SCORE_BIN_WIDTH: f64 = 1.0;
/// Qualifying attempts per distance bin on a full-season corpus.
pub const FULL_SCALE_MIN_ATTEMPTS: usize = 2000;
pub const FULL_SCALE_GAMES: usize = 580;
pub const MIN_SCALED_ATTEMPTS: usize = 20;

/// Shot success as `min(1, amplitude · exp(−decay · distance))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModelParams {
    pub amplitude: f64,
    pub decay: f64,
}

impl ScoreModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.amplitude > 0.0 && self.amplitude <= 1.0 && self.decay > 0.0 && self.decay.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!("score model parameters out of range: {self:?}")))
        }
    }

    pub fn at_distance(&self, distance: f64) -> f64 {
        (self.amplitude * (-self.decay * distance).exp()).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotSample {
    pub distance: f64,
    pub made: bool,
}

pub fn shots_from_records(records: &[TransitionRecord], court: &CourtSpec) -> Vec<ShotSample> {
    records
        .iter()
        .filter(|r| r.outcome != Outcome::Turnover)
        .map(|r| ShotSample {
            distance: court.distance_to_goal(r.target),
            made: r.outcome == Outcome::Scored,
        })
        .collect()
}

/// Qualifying threshold scaled to a corpus of `n_games`.
pub fn scaled_min_attempts(n_games: usize) -> usize {
    let scaled = FULL_SCALE_MIN_ATTEMPTS as f64 * n_games as f64 / FULL_SCALE_GAMES as f64;
    (scaled.round() as usize).clamp(MIN_SCALED_ATTEMPTS, FULL_SCALE_MIN_ATTEMPTS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBin {
    pub lower: f64,
    pub attempts: usize,
    pub made: usize,
    pub mean_distance: f64,
}

pub fn score_bins(shots: &[ShotSample]) -> Vec<ScoreBin> {
    let n_bins = shots
        .iter()
        .map(|s| (s.distance / SCORE_BIN_WIDTH).floor() as usize + 1)
        .max()
        .unwrap_or(0);
    let mut bins: Vec<ScoreBin> = (0..n_bins)
        .map(|k| ScoreBin {
            lower: k as f64 * SCORE_BIN_WIDTH,
            attempts: 0,
            made: 0,
            mean_distance: 0.0,
        })
        .collect();
    for s in shots.iter().filter(|s| s.distance.is_finite() && s.distance >= 0.0) {
        let b = &mut bins[(s.distance / SCORE_BIN_WIDTH).floor() as usize];
        b.attempts += 1;
        b.made += s.made as usize;
        b.mean_distance += s.distance;
    }
    for b in &mut bins {
        if b.attempts > 0 {
            b.mean_distance /= b.attempts as f64;
        }
    }
    bins
}

/// Least-squares exponential fit to per-bin success frequencies of bins with
/// more than `min_attempts` attempts.
pub fn fit_score_model(shots: &[ShotSample], min_attempts: usize) -> Result<ScoreModelParams> {
    let bins: Vec<ScoreBin> = score_bins(shots)
        .into_iter()
        .filter(|b| b.attempts > min_attempts)
        .collect();
    if bins.is_empty() {
        return Err(Error::insufficient(format!(
            "no distance bin has more than {min_attempts} shot attempts"
        )));
    }
    let pts: Vec<(f64, f64)> = bins
        .iter()
        .map(|b| (b.mean_distance, b.made as f64 / b.attempts as f64))
        .collect();

    // Log-linear start, then refine on the probability scale.
    let (mut amp0, mut dec0) = (pts[0].1.max(1e-3), 0.05);
    if pts.len() > 1 {
        let n = pts.len() as f64;
        let lx: Vec<(f64, f64)> = pts.iter().map(|&(x, p)| (x, p.max(1e-6).ln())).collect();
        let mx = lx.iter().map(|p| p.0).sum::<f64>() / n;
        let my = lx.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = lx.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = lx.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            dec0 = -sxy / sxx;
            amp0 = (my + dec0 * mx).exp();
        }
    }
    let lower = [1e-9, 1e-9];
    let upper = [1.0, 10.0];
    let init = [amp0.clamp(lower[0], upper[0]), dec0.clamp(lower[1], upper[1])];
    let sse = |p: &[f64]| {
        pts.iter()
            .map(|&(x, f)| (p[0] * (-p[1] * x).exp() - f).powi(2))
            .sum::<f64>()
    };
    let mut cfg = SimplexConfig::new(
        vec![0.1, 0.02],
        Bounds {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        },
    );
    cfg.max_iterations = 4000;
    cfg.tolerance = 1e-18;
    cfg.x_tolerance = 1e-9;
    let mut point = init.to_vec();
    for _ in 0..2 {
        point = nelder_mead_minimize(sse, &point, &cfg)?.point;
    }
    Ok(ScoreModelParams {
        amplitude: point[0],
        decay: point[1],
    })
}

pub fn score_probability(p: Point, params: &ScoreModelParams, court: &CourtSpec) -> f64 {
    params.at_distance(court.distance_to_goal(p))
}
