use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::ModelParams;
use crate::scoring::{Evaluator, ModelKind};

use super::likelihood::{log_likelihood, LikelihoodDataset};
use super::simplex::{nelder_mead_maximize, Bounds, SimplexConfig, SimplexOutcome};

pub const PARAMETER_NAMES: [&str; 5] = ["accel", "lambda", "kappa", "reaction_attacker", "reaction_defender"];

/// The feasible region for the optimized parameters.
pub fn parameter_bounds() -> Bounds {
    Bounds {
        lower: vec![1.0, 1.0, 1.0, 0.0, 0.0],
        upper: vec![8.0, f64::INFINITY, f64::INFINITY, 1.0, 1.0],
    }
}

pub fn to_vector(p: &ModelParams) -> Vec<f64> {
    vec![p.accel, p.lambda, p.kappa, p.reaction_attacker, p.reaction_defender]
}

pub fn from_vector(x: &[f64], v_max: f64) -> ModelParams {
    ModelParams {
        accel: x[0],
        v_max,
        lambda: x[1],
        kappa: x[2],
        reaction_attacker: x[3],
        reaction_defender: x[4],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Objective spread across the simplex at convergence, log-likelihood units.
    pub simplex_tolerance: f64,
    /// Coordinate spread across the simplex at convergence.
    pub coordinate_tolerance: f64,
    pub initial_step: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Fresh simplices started from the best point after the first run.
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let b = parameter_bounds();
        OptimizerConfig {
            max_iterations: 400,
            simplex_tolerance: 1e-4,
            coordinate_tolerance: 1e-3,
            initial_step: vec![1.0, 10.0, 0.3, 0.1, 0.1],
            lower: b.lower,
            upper: b.upper,
            restarts: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn bounds(&self) -> Bounds {
        Bounds {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }

    /// Bounds may be tightened for experiments but never widened.
    pub fn validate(&self) -> Result<()> {
        let feasible = parameter_bounds();
        if self.lower.len() != 5 || self.upper.len() != 5 || self.initial_step.len() != 5 {
            return Err(Error::config("optimizer bounds and steps need five entries"));
        }
        for j in 0..5 {
            if self.lower[j] < feasible.lower[j] || self.upper[j] > feasible.upper[j] || self.lower[j] > self.upper[j] {
                return Err(Error::config(format!(
                    "bounds for {} must lie within [{}, {}]",
                    PARAMETER_NAMES[j], feasible.lower[j], feasible.upper[j]
                )));
            }
        }
        if self.max_iterations == 0 || !(self.simplex_tolerance > 0.0) || !(self.coordinate_tolerance > 0.0) {
            return Err(Error::config("optimizer iterations and tolerances must be positive"));
        }
        Ok(())
    }

    fn simplex(&self) -> SimplexConfig {
        SimplexConfig {
            max_iterations: self.max_iterations,
            tolerance: self.simplex_tolerance,
            x_tolerance: self.coordinate_tolerance,
            initial_step: self.initial_step.clone(),
            bounds: self.bounds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model_kind: ModelKind,
    pub parameter_names: Vec<String>,
    pub init: ModelParams,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub scenes: usize,
    pub shots: usize,
    pub turnovers: usize,
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
    pub params: ModelParams,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub simplex_spread: f64,
    pub coordinate_spread: Vec<f64>,
    /// Parameters whose probes moved the objective less than the tolerance.
    pub unidentified: Vec<String>,
    /// Best objective after each iteration, across restarts.
    pub trajectory: Vec<f64>,
    pub runs: usize,
    /// Set when the parameters were taken from another model's fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_from: Option<ModelKind>,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serializes")
    }
}

/// Generic bounded maximization with restarts and identifiability probes.
pub fn maximize_with_diagnostics<F>(
    mut objective: F,
    init: &[f64],
    cfg: &OptimizerConfig,
) -> Result<(SimplexOutcome, Vec<bool>, usize, Vec<f64>)>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate_len(init.len())?;
    let simplex = cfg.simplex();
    let mut best = nelder_mead_maximize(&mut objective, init, &simplex)?;
    let mut trajectory = best.history.clone();
    let mut total_iterations = best.iterations;
    let mut total_evaluations = best.evaluations;
    let mut runs = 1;
    for _ in 0..cfg.restarts {
        let next = nelder_mead_maximize(&mut objective, &best.point, &simplex)?;
        runs += 1;
        total_iterations += next.iterations;
        total_evaluations += next.evaluations;
        trajectory.extend(next.history.iter().map(|v| v.max(best.value)));
        let gain = next.value - best.value;
        if next.value >= best.value {
            best = SimplexOutcome {
                iterations: total_iterations,
                evaluations: total_evaluations,
                history: Vec::new(),
                ..next
            };
        }
        if gain < cfg.simplex_tolerance {
            break;
        }
    }
    best.iterations = total_iterations;
    best.evaluations = total_evaluations;

    let bounds = cfg.bounds();
    let unidentified = (0..init.len())
        .map(|j| {
            [1.0, -1.0].iter().all(|sign| {
                let mut probe = best.point.clone();
                probe[j] += sign * cfg.initial_step[j];
                bounds.project(&mut probe);
                probe[j] == best.point[j] || (objective(&probe) - best.value).abs() < cfg.simplex_tolerance
            })
        })
        .collect();
    Ok((best, unidentified, runs, trajectory))
}

impl OptimizerConfig {
    fn validate_len(&self, n: usize) -> Result<()> {
        if self.initial_step.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::config("optimizer configuration does not match the parameter count"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be positive"));
        }
        Ok(())
    }
}

pub struct ParameterFit {
    pub params: ModelParams,
    pub report: FitReport,
}

/// Maximum-likelihood fit of the five optimized parameters; `v_max` is held
/// at its value in `init`.
pub fn fit_model_parameters(
    dataset: &LikelihoodDataset,
    kind: ModelKind,
    init: &ModelParams,
    ev: &Evaluator,
    cfg: &OptimizerConfig,
) -> Result<ParameterFit> {
    cfg.validate()?;
    if !cfg.bounds().contains(&to_vector(init)) {
        return Err(Error::config(format!("initial parameters {init:?} lie outside the bounds")));
    }
    if dataset.is_empty() {
        return Err(Error::insufficient("likelihood dataset is empty"));
    }
    let v_max = init.v_max;
    let objective = |x: &[f64]| {
        let params = from_vector(x, v_max);
        let e = Evaluator { params: &params, ..*ev };
        log_likelihood(dataset, &e, kind).unwrap_or(f64::NEG_INFINITY)
    };
    let initial = objective(&to_vector(init));
    if !initial.is_finite() {
        return Err(Error::Numerical("log-likelihood at the initial parameters is not finite".into()));
    }
    let (best, unidentified, runs, trajectory) = maximize_with_diagnostics(objective, &to_vector(init), cfg)?;
    let params = from_vector(&best.point, v_max);
    let report = FitReport {
        model_kind: kind,
        parameter_names: PARAMETER_NAMES.iter().map(|s| s.to_string()).collect(),
        init: *init,
        lower: cfg.lower.clone(),
        upper: cfg.upper.clone(),
        scenes: dataset.len(),
        shots: dataset.shots,
        turnovers: dataset.turnovers,
        initial_log_likelihood: initial,
        final_log_likelihood: best.value,
        params,
        converged: best.converged,
        iterations: best.iterations,
        evaluations: best.evaluations,
        simplex_spread: best.spread,
        coordinate_spread: best.coordinate_spread.clone(),
        unidentified: PARAMETER_NAMES
            .iter()
            .zip(&unidentified)
            .filter(|(_, &u)| u)
            .map(|(n, _)| n.to_string())
            .collect(),
        trajectory,
        runs,
        fallback_from: None,
    };
    Ok(ParameterFit { params, report })
}

/// Replaces a non-converged fit by parameters fitted for another model,
/// recording the substitution in the report.
pub fn apply_fallback(fit: ParameterFit, fallback: &ModelParams, from: ModelKind) -> ParameterFit {
    if fit.report.converged {
        return fit;
    }
    let mut report = fit.report;
    report.params = *fallback;
    report.fallback_from = Some(from);
    ParameterFit {
        params: *fallback,
        report,
    }
}
