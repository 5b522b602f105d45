use serde::{Deserialize, Serialize};

use super::{Sequence, MAX_PLAYER_SPEED};

/// Thresholds describing a truncated or corrupt sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Largest tolerated gap between consecutive frames, seconds.
    pub max_gap: f64,
    /// Shortest tolerated sequence, seconds.
    pub min_duration: f64,
    pub max_speed: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_gap: 0.2,
            min_duration: 0.5,
            max_speed: MAX_PLAYER_SPEED,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub retained: Vec<Sequence>,
    /// Dropped scene ids with the first rule they broke.
    pub dropped: Vec<(String, String)>,
}

fn rejection(seq: &Sequence, cfg: &FilterConfig) -> Option<String> {
    const EPS: f64 = 1e-9;
    if seq.frames.is_empty() {
        return Some("no frames".into());
    }
    if let Some(w) = seq
        .frames
        .windows(2)
        .find(|w| w[1].timestamp - w[0].timestamp > cfg.max_gap + EPS)
    {
        return Some(format!(
            "gap of {:.3} s after t={:.3}",
            w[1].timestamp - w[0].timestamp,
            w[0].timestamp
        ));
    }
    for ev in seq.events.iter().filter(|e| e.kind.is_movement()) {
        match seq.frame_at(ev.timestamp) {
            Some(f) if f.possessor.is_some() => {}
            Some(_) => return Some(format!("no possessor at movement start t={:.3}", ev.timestamp)),
            // Out-of-range annotations are reported by extraction.
            None => {}
        }
    }
    for f in &seq.frames {
        let bad = f.players.iter().find(|p| {
            !(p.position.is_finite() && p.velocity.is_finite()) || p.velocity.norm() > cfg.max_speed
        });
        if let Some(p) = bad {
            return Some(format!("implausible state for player {} at t={:.3}", p.id, f.timestamp));
        }
    }
    if seq.duration() < cfg.min_duration - EPS {
        return Some(format!("duration {:.3} s below minimum", seq.duration()));
    }
    None
}

/// Drops sequences with frame gaps, a missing possessor at movement start,
/// implausible player states or too short a duration.
pub fn filter_scenes(sequences: Vec<Sequence>, cfg: &FilterConfig) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for seq in sequences {
        match rejection(&seq, cfg) {
            None => out.retained.push(seq),
            Some(reason) => out.dropped.push((seq.meta.scene_id.clone(), reason)),
        }
    }
    out
}
