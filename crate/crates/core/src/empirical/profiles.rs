use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{BallSpeedProfile, SPEED_BINS, SPEED_BIN_WIDTH};
use crate::tracking::{Movement, TransitionRecord};

pub const MIN_PROFILE_RECORDS: usize = 50;
pub const CHOICE_BINS: usize = 10;
pub const CHOICE_BIN_WIDTH: f64 = 1.0;

/// Replaces `None` entries by the value of the nearest populated entry;
/// ties go to the shorter distance.
fn nearest_fill(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let populated: Vec<usize> = (0..values.len()).filter(|&k| values[k].is_some()).collect();
    if populated.is_empty() {
        return None;
    }
    Some(
        (0..values.len())
            .map(|k| {
                let nearest = populated
                    .iter()
                    .copied()
                    .min_by_key(|&p| (p.abs_diff(k), p))
                    .expect("at least one populated bin");
                values[nearest].expect("populated")
            })
            .collect(),
    )
}

/// Mean observed ball speed per 1 m travel-distance bin for one movement type.
pub fn fit_ball_speed_profile(records: &[TransitionRecord], movement: Movement) -> Result<BallSpeedProfile> {
    let own: Vec<&TransitionRecord> = records
        .iter()
        .filter(|r| r.movement == movement && r.travel_time > 0.0)
        .collect();
    if own.len() < MIN_PROFILE_RECORDS {
        return Err(Error::insufficient(format!(
            "{}: {} records, need at least {MIN_PROFILE_RECORDS}",
            movement.as_str(),
            own.len()
        )));
    }
    let mut sums = vec![(0.0, 0usize); SPEED_BINS];
    let mut beyond = (0.0, 0usize);
    let limit = SPEED_BINS as f64 * SPEED_BIN_WIDTH;
    for r in own {
        let speed = r.travel_distance / r.travel_time;
        if r.travel_distance >= limit {
            beyond.0 += speed;
            beyond.1 += 1;
        } else {
            let k = (r.travel_distance / SPEED_BIN_WIDTH).floor() as usize;
            sums[k].0 += speed;
            sums[k].1 += 1;
        }
    }
    let means: Vec<Option<f64>> = sums
        .iter()
        .map(|&(s, n)| (n > 0).then(|| s / n as f64))
        .collect();
    let mean_speeds = nearest_fill(&means).ok_or_else(|| {
        Error::insufficient(format!("{}: no record shorter than {limit} m", movement.as_str()))
    })?;
    let terminal_speed = if beyond.1 > 0 {
        beyond.0 / beyond.1 as f64
    } else {
        mean_speeds[SPEED_BINS - 1]
    };
    Ok(BallSpeedProfile {
        movement,
        bin_width: SPEED_BIN_WIDTH,
        mean_speeds,
        terminal_speed,
    })
}

/// Fraction of transitions that are passes, per 1 m travel-distance bin,
/// with one overflow bin for everything at or beyond the last edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRateCurve {
    pub bin_width: f64,
    pub pass_fraction: Vec<f64>,
    pub overflow_fraction: f64,
}

impl ChoiceRateCurve {
    pub fn constant(fraction: f64) -> Self {
        ChoiceRateCurve {
            bin_width: CHOICE_BIN_WIDTH,
            pass_fraction: vec![fraction; CHOICE_BINS],
            overflow_fraction: fraction,
        }
    }

    pub fn from_fn(f: impl Fn(f64) -> f64) -> Self {
        ChoiceRateCurve {
            bin_width: CHOICE_BIN_WIDTH,
            pass_fraction: (0..CHOICE_BINS)
                .map(|k| f((k as f64 + 0.5) * CHOICE_BIN_WIDTH))
                .collect(),
            overflow_fraction: f(CHOICE_BINS as f64 * CHOICE_BIN_WIDTH + 0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.bin_width > 0.0
            && !self.pass_fraction.is_empty()
            && self
                .pass_fraction
                .iter()
                .chain(std::iter::once(&self.overflow_fraction))
                .all(|f| (0.0..=1.0).contains(f));
        if ok {
            Ok(())
        } else {
            Err(Error::config("choice-rate fractions must lie in [0, 1]"))
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.pass_fraction.len()).map(|k| k as f64 * self.bin_width).collect()
    }

    /// Pass weight at a travel distance.
    pub fn weight(&self, distance: f64) -> f64 {
        let k = (distance.max(0.0) / self.bin_width).floor();
        if k < self.pass_fraction.len() as f64 {
            self.pass_fraction[k as usize]
        } else {
            self.overflow_fraction
        }
    }
}

pub fn fit_movement_choice_rate(records: &[TransitionRecord]) -> Result<ChoiceRateCurve> {
    if records.len() < MIN_PROFILE_RECORDS {
        return Err(Error::insufficient(format!(
            "{} records, need at least {MIN_PROFILE_RECORDS} for the choice rate",
            records.len()
        )));
    }
    let mut counts = vec![(0usize, 0usize); CHOICE_BINS + 1];
    for r in records {
        let k = ((r.travel_distance / CHOICE_BIN_WIDTH).floor() as usize).min(CHOICE_BINS);
        counts[k].0 += (r.movement == Movement::Pass) as usize;
        counts[k].1 += 1;
    }
    let fractions: Vec<Option<f64>> = counts
        .iter()
        .map(|&(p, n)| (n > 0).then(|| p as f64 / n as f64))
        .collect();
    let mut filled = nearest_fill(&fractions).expect("records populate at least one bin");
    let overflow_fraction = filled.pop().expect("overflow bin");
    Ok(ChoiceRateCurve {
        bin_width: CHOICE_BIN_WIDTH,
        pass_fraction: filled,
        overflow_fraction,
    })
}
