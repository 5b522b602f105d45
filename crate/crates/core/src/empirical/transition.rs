use serde::{Deserialize, Serialize};

use crate::court::{CourtSpec, Point, Vec2};
use crate::error::{Error, Result};
use crate::tracking::TransitionRecord;

pub const DISPLACEMENT_BIN: f64 = 0.5;
pub const DEFAULT_FILTER_SIGMA: f64 = 0.4;
pub const MIN_TRANSITION_RECORDS: usize = 500;

/// Smoothed 2D histogram of ball displacements from movement start to the
/// terminal event. Bins are symmetric about zero displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    pub bin_width: f64,
    pub dx_min: f64,
    pub dy_min: f64,
    pub n_dx: usize,
    pub n_dy: usize,
    /// Gaussian filter width in bins.
    pub filter_sigma: f64,
    /// Row-major, `dx` fastest.
    pub probabilities: Vec<f64>,
}

impl TransitionTable {
    /// Empty table whose extent covers every displacement within the court.
    pub fn empty(court: &CourtSpec, bin_width: f64, filter_sigma: f64) -> Self {
        let half_x = (court.half_length / bin_width - 1e-9).ceil();
        let half_y = (court.width / bin_width - 1e-9).ceil();
        TransitionTable {
            bin_width,
            dx_min: -half_x * bin_width,
            dy_min: -half_y * bin_width,
            n_dx: 2 * half_x as usize,
            n_dy: 2 * half_y as usize,
            filter_sigma,
            probabilities: vec![0.0; 4 * half_x as usize * half_y as usize],
        }
    }

    pub fn bin_area(&self) -> f64 {
        self.bin_width * self.bin_width
    }

    pub fn dx_edges(&self) -> Vec<f64> {
        (0..=self.n_dx).map(|i| self.dx_min + i as f64 * self.bin_width).collect()
    }

    pub fn dy_edges(&self) -> Vec<f64> {
        (0..=self.n_dy).map(|j| self.dy_min + j as f64 * self.bin_width).collect()
    }

    pub fn bin_of(&self, d: Vec2) -> Option<usize> {
        let i = ((d.x - self.dx_min) / self.bin_width).floor();
        let j = ((d.y - self.dy_min) / self.bin_width).floor();
        if i < 0.0 || j < 0.0 || i >= self.n_dx as f64 || j >= self.n_dy as f64 {
            return None;
        }
        Some(j as usize * self.n_dx + i as usize)
    }

    pub fn bin_center(&self, index: usize) -> Vec2 {
        let (i, j) = (index % self.n_dx, index / self.n_dx);
        Point::new(
            self.dx_min + (i as f64 + 0.5) * self.bin_width,
            self.dy_min + (j as f64 + 0.5) * self.bin_width,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.probabilities.len() != self.n_dx * self.n_dy || self.n_dx == 0 || self.n_dy == 0 {
            return Err(Error::config("transition table shape does not match its bins"));
        }
        if !(self.bin_width > 0.0 && self.filter_sigma >= 0.0) {
            return Err(Error::config("transition table bin width and sigma must be positive"));
        }
        if self.probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::config("transition probabilities must be finite and non-negative"));
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("transition probabilities sum to {total}")));
        }
        Ok(())
    }
}

/// Normalized Gaussian weights for integer offsets within 4σ.
fn kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (4.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Half-sample mirror of an out-of-range index.
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian smoothing of a row-major grid. Mass that would leave
/// the grid is mirrored back, so the total is preserved.
pub fn gaussian_filter(values: &[f64], nx: usize, ny: usize, sigma: f64) -> Vec<f64> {
    let w = kernel(sigma);
    let r = (w.len() / 2) as i64;
    let mut along_x = vec![0.0; values.len()];
    for j in 0..ny {
        for i in 0..nx {
            let v = values[j * nx + i];
            if v == 0.0 {
                continue;
            }
            for (k, wk) in w.iter().enumerate() {
                let t = reflect(i as i64 + k as i64 - r, nx as i64);
                along_x[j * nx + t] += v * wk;
            }
        }
    }
    let mut out = vec![0.0; values.len()];
    for j in 0..ny {
        for i in 0..nx {
            let v = along_x[j * nx + i];
            if v == 0.0 {
                continue;
            }
            for (k, wk) in w.iter().enumerate() {
                let t = reflect(j as i64 + k as i64 - r, ny as i64);
                out[t * nx + i] += v * wk;
            }
        }
    }
    out
}

/// Builds the table from raw displacements. Displacements outside the table
/// extent are ignored.
pub fn fit_transition_from_displacements(
    displacements: &[Vec2],
    court: &CourtSpec,
    filter_sigma: f64,
) -> Result<TransitionTable> {
    if displacements.len() < MIN_TRANSITION_RECORDS {
        return Err(Error::insufficient(format!(
            "{} transitions, need at least {MIN_TRANSITION_RECORDS}",
            displacements.len()
        )));
    }
    let mut table = TransitionTable::empty(court, DISPLACEMENT_BIN, filter_sigma);
    let mut counts = vec![0.0; table.probabilities.len()];
    for d in displacements {
        if let Some(k) = table.bin_of(*d) {
            counts[k] += 1.0;
        }
    }
    let smoothed = gaussian_filter(&counts, table.n_dx, table.n_dy, filter_sigma);
    let total: f64 = smoothed.iter().sum();
    if total <= 0.0 {
        return Err(Error::insufficient("no displacement falls inside the transition table"));
    }
    table.probabilities = smoothed.into_iter().map(|c| c / total).collect();
    Ok(table)
}

pub fn fit_transition_model(records: &[TransitionRecord], court: &CourtSpec, filter_sigma: f64) -> Result<TransitionTable> {
    let d: Vec<Vec2> = records.iter().map(|r| r.displacement).collect();
    fit_transition_from_displacements(&d, court, filter_sigma)
}

/// Probability mass of the bin holding `target − ball_position`.
pub fn transition_probability(ball_position: Point, target: Point, table: &TransitionTable) -> f64 {
    table
        .bin_of(target - ball_position)
        .map_or(0.0, |k| table.probabilities[k])
}
