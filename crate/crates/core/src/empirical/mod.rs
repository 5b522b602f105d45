//! Empirical models fitted from a training corpus: transition table, score
//! model, ball-speed profiles, pass/dribble choice rate and the residual
//! distribution of observed arrival times.

pub mod profiles;
pub mod score;
pub mod transition;

use serde::{Deserialize, Serialize};

pub use profiles::{fit_ball_speed_profile, fit_movement_choice_rate, ChoiceRateCurve};
pub use score::{
    fit_score_model, scaled_min_attempts, score_probability, shots_from_records, ScoreModelParams, ShotSample,
};
pub use transition::{
    fit_transition_from_displacements, fit_transition_model, gaussian_filter, transition_probability, TransitionTable, DEFAULT_FILTER_SIGMA,
};

use crate::court::CourtSpec;
use crate::error::Result;
use crate::kinematics::{fit_residual_distribution, player_intercept_time, BallSpeedProfile, ModelParams, ResidualParams};
use crate::tracking::{Movement, SceneCorpus, TransitionRecord};

/// A value per movement type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByMovement<T> {
    pub pass: T,
    pub dribble: T,
}

impl<T> ByMovement<T> {
    pub fn get(&self, movement: Movement) -> &T {
        match movement {
            Movement::Pass => &self.pass,
            Movement::Dribble => &self.dribble,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTables {
    pub transition: TransitionTable,
    /// Separate pass and dribble tables, used instead of the pooled one when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_by_movement: Option<ByMovement<TransitionTable>>,
    pub score: ScoreModelParams,
    pub speed: ByMovement<BallSpeedProfile>,
    pub choice: ChoiceRateCurve,
    pub residual: ResidualParams,
}

impl EmpiricalTables {
    pub fn validate(&self) -> Result<()> {
        self.transition.validate()?;
        if let Some(t) = &self.transition_by_movement {
            t.pass.validate()?;
            t.dribble.validate()?;
        }
        self.score.validate()?;
        self.speed.pass.validate()?;
        self.speed.dribble.validate()?;
        self.choice.validate()?;
        self.residual.validate()
    }

    pub fn speed_profile(&self, movement: Movement) -> &BallSpeedProfile {
        self.speed.get(movement)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmpiricalConfig {
    pub filter_sigma: f64,
    /// Fixed qualifying threshold for score bins; scaled with corpus size when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_min_attempts: Option<usize>,
    pub per_movement_transition: bool,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        EmpiricalConfig {
            filter_sigma: DEFAULT_FILTER_SIGMA,
            score_min_attempts: None,
            per_movement_transition: false,
        }
    }
}

/// Observed minus expected arrival time of the credited receiver, for each
/// record that carries both.
pub fn arrival_residuals(records: &[TransitionRecord], params: &ModelParams) -> Vec<f64> {
    records
        .iter()
        .filter_map(|r| {
            let arrival = r.receiver_arrival?;
            let who = r.state.player(r.receiver.as_ref()?)?;
            let tau = player_intercept_time(who, r.target, params, r.state.is_possessor(who));
            Some(arrival - tau)
        })
        .collect()
}

pub fn fit_empirical_tables(
    corpus: &SceneCorpus,
    court: &CourtSpec,
    params: &ModelParams,
    cfg: &EmpiricalConfig,
) -> Result<EmpiricalTables> {
    let records = &corpus.records;
    let transition = fit_transition_model(records, court, cfg.filter_sigma)?;
    let transition_by_movement = if cfg.per_movement_transition {
        let of = |m: Movement| -> Result<TransitionTable> {
            let own: Vec<TransitionRecord> = records.iter().filter(|r| r.movement == m).cloned().collect();
            fit_transition_model(&own, court, cfg.filter_sigma)
        };
        Some(ByMovement {
            pass: of(Movement::Pass)?,
            dribble: of(Movement::Dribble)?,
        })
    } else {
        None
    };
    let min_attempts = cfg
        .score_min_attempts
        .unwrap_or_else(|| scaled_min_attempts(corpus.game_ids.len()));
    let score = fit_score_model(&shots_from_records(records, court), min_attempts)?;
    let speed = ByMovement {
        pass: fit_ball_speed_profile(records, Movement::Pass)?,
        dribble: fit_ball_speed_profile(records, Movement::Dribble)?,
    };
    let choice = fit_movement_choice_rate(records)?;
    let residual = fit_residual_distribution(&arrival_residuals(records, params))?;
    Ok(EmpiricalTables {
        transition,
        transition_by_movement,
        score,
        speed,
        choice,
        residual,
    })
}
