//! Independent checks: a Monte Carlo simulation of the control race and a
//! synthetic scene generator with known parameters.

pub mod synth;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{compute_control, FieldKind, IntegrationConfig};
use crate::court::{CourtSpec, Point};
use crate::empirical::EmpiricalTables;
use crate::error::{Error, Result};
use crate::kinematics::{player_intercept_time, time_of_flight, ModelParams, ResidualParams};
use crate::tracking::{Movement, PlayerId, SceneState, Side};

pub use synth::{
    generate_synthetic_corpus, generate_synthetic_scene, random_scene_state, GeneratedScene, Layout, SyntheticConfig,
    SyntheticTruth,
};

pub const MIN_SAMPLES: usize = 100;
/// Oracle steps per integration step.
pub const SUBSTEPS: usize = 4;

/// Control from a single player with a unit arrival probability.
pub fn analytic_single_player_control(lambda: f64, t_start: f64, horizon: f64) -> f64 {
    1.0 - (-lambda * (horizon - t_start)).exp()
}

/// Draws from the two-sided Lorentzian by picking a side with its mass and
/// scaling a half-Cauchy variate by that side's half-width.
pub fn sample_residual<R: Rng + ?Sized>(rp: &ResidualParams, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let half = (std::f64::consts::FRAC_PI_2 * u).tan();
    if rng.random::<f64>() < rp.left_weight() {
        rp.location - rp.gamma_left * half
    } else {
        rp.location + rp.gamma_right * half
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceSample {
    /// Control-completion time per participant, absent beyond the horizon.
    pub completion: Vec<(PlayerId, Option<f64>)>,
    pub winner: Option<PlayerId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceEstimate {
    pub attack: f64,
    pub defense: f64,
    pub no_control: f64,
    pub se_attack: f64,
    pub se_defense: f64,
    pub se_no_control: f64,
    pub samples: usize,
}

/// Integral of F(slack(t)) over `[a, b]` by adaptive bisection, to an
/// integrated-hazard error of about 1e-6 at control rate `rate`.
#[allow(clippy::too_many_arguments)]
fn cdf_integral(rp: &ResidualParams, slack: &impl Fn(f64) -> f64, a: f64, b: f64, sa: f64, sb: f64, rate: f64, depth: u32) -> f64 {
    let whole = rp.mean_cdf(sa, sb) * (b - a);
    let m = 0.5 * (a + b);
    let sm = slack(m);
    let halves = rp.mean_cdf(sa, sm) * (m - a) + rp.mean_cdf(sm, sb) * (b - m);
    if depth >= 12 || rate * (whole - halves).abs() <= 1e-6 {
        halves
    } else {
        cdf_integral(rp, slack, a, m, sa, sm, rate, depth + 1) + cdf_integral(rp, slack, m, b, sm, sb, rate, depth + 1)
    }
}

/// Cumulative hazard of every participant on a fine time grid.
struct HazardGrid {
    ids: Vec<(PlayerId, Side)>,
    times: Vec<f64>,
    /// `cumulative[i][k]` is participant i's integrated hazard up to `times[k]`.
    cumulative: Vec<Vec<f64>>,
}

impl HazardGrid {
    fn build(
        state: &SceneState,
        target: Point,
        movement: Movement,
        params: &ModelParams,
        tables: &EmpiricalTables,
        kind: FieldKind,
        cfg: &IntegrationConfig,
    ) -> Self {
        let profile = tables.speed_profile(movement);
        let t_calc = time_of_flight(state.ball, target, profile);
        let possessor = state.possessor.as_ref();
        let mut players: Vec<_> = state
            .players
            .iter()
            .filter(|p| p.side == Side::Defense || movement == Movement::Pass || Some(&p.id) == possessor)
            .collect();
        players.sort_by(|a, b| a.id.cmp(&b.id));
        let (t0, t1) = match kind {
            FieldKind::Ppcf => (t_calc, t_calc + cfg.horizon_after_arrival),
            FieldKind::Pbcf => (0.0, t_calc),
        };
        let step = cfg.dt / SUBSTEPS as f64;
        let n = if t1 > t0 { ((t1 - t0) / step).ceil() as usize } else { 0 };
        let times: Vec<f64> = (0..=n).map(|k| (t0 + k as f64 * step).min(t1)).collect();
        let offset = target - state.ball;
        let d = offset.norm();
        let velocity = if d > 0.0 { offset * (profile.speed(d) / d) } else { Point::ZERO };
        let rp = &tables.residual;
        let cumulative = players
            .iter()
            .map(|p| {
                let own = Some(&p.id) == possessor;
                let rate = if p.side == Side::Attack { params.lambda } else { params.kappa * params.lambda };
                let fixed = rp.cdf(t_calc - player_intercept_time(p, target, params, own));
                let mut acc = vec![0.0; times.len()];
                for k in 1..times.len() {
                    let (a, b) = (times[k - 1], times[k]);
                    let f = match kind {
                        FieldKind::Ppcf => fixed,
                        FieldKind::Pbcf => {
                            let slack = |t: f64| t - player_intercept_time(p, state.ball + velocity * t, params, own);
                            cdf_integral(rp, &slack, a, b, slack(a), slack(b), rate, 0) / (b - a)
                        }
                    };
                    acc[k] = acc[k - 1] + rate * f * (b - a);
                }
                acc
            })
            .collect();
        HazardGrid {
            ids: players.iter().map(|p| (p.id.clone(), p.side)).collect(),
            times,
            cumulative,
        }
    }

    /// Time at which the integrated hazard first reaches `level`.
    fn completion(&self, i: usize, level: f64) -> Option<f64> {
        let c = &self.cumulative[i];
        let k = c.partition_point(|&h| h < level);
        if k == 0 || k >= c.len() {
            return None;
        }
        let (h0, h1) = (c[k - 1], c[k]);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        Some(t0 + (t1 - t0) * (level - h0) / (h1 - h0))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> RaceSample {
        let completion: Vec<(PlayerId, Option<f64>)> = (0..self.ids.len())
            .map(|i| {
                let e: f64 = rng.sample(Exp1);
                (self.ids[i].0.clone(), self.completion(i, e))
            })
            .collect();
        let winner = completion
            .iter()
            .filter_map(|(id, t)| t.map(|t| (id, t)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)))
            .map(|(id, _)| id.clone());
        RaceSample { completion, winner }
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One race draw; sample `index` always sees the same random stream.
pub fn mc_race_sample(
    state: &SceneState,
    target: Point,
    movement: Movement,
    params: &ModelParams,
    tables: &EmpiricalTables,
    kind: FieldKind,
    cfg: &IntegrationConfig,
    seed: u64,
    index: u64,
) -> RaceSample {
    HazardGrid::build(state, target, movement, params, tables, kind, cfg).sample(&mut sample_rng(seed, index))
}

/// Monte Carlo estimate of who wins the control race: each participant gets
/// an independent unit-exponential clock against their integrated hazard on a
/// grid four times finer than the integration step.
pub fn mc_control_race(
    state: &SceneState,
    target: Point,
    movement: Movement,
    params: &ModelParams,
    tables: &EmpiricalTables,
    n_samples: usize,
    seed: u64,
    kind: FieldKind,
    cfg: &IntegrationConfig,
) -> Result<RaceEstimate> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::config(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    let grid = HazardGrid::build(state, target, movement, params, tables, kind, cfg);
    let sides: Vec<Side> = grid.ids.iter().map(|x| x.1).collect();
    let (attack, defense) = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = grid.sample(&mut sample_rng(seed, i));
            match s.winner.and_then(|w| grid.ids.iter().position(|x| x.0 == w)) {
                Some(k) if sides[k] == Side::Attack => (1usize, 0usize),
                Some(_) => (0, 1),
                None => (0, 0),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_samples as f64;
    let p = |c: usize| c as f64 / n;
    let se = |q: f64| (q * (1.0 - q) / n).sqrt();
    let (pa, pd) = (p(attack), p(defense));
    let pn = p(n_samples - attack - defense);
    Ok(RaceEstimate {
        attack: pa,
        defense: pd,
        no_control: pn,
        se_attack: se(pa),
        se_defense: se(pd),
        se_no_control: se(pn),
        samples: n_samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub index: usize,
    pub kind: FieldKind,
    pub movement: Movement,
    pub target: Point,
    pub deterministic_attack: f64,
    pub deterministic_defense: f64,
    pub mc: RaceEstimate,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub states: usize,
    pub samples: usize,
    pub seed: u64,
    pub cases: Vec<OracleCase>,
    pub max_abs_difference: f64,
    pub all_pass: bool,
}

impl OracleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("oracle report serializes")
    }
}

/// Compares the integrated attack totals with the Monte Carlo race on
/// randomized states, for both field kinds and both movement types.
pub fn run_oracle_suite(
    n_states: usize,
    n_samples: usize,
    seed: u64,
    params: &ModelParams,
    tables: &EmpiricalTables,
    cfg: &IntegrationConfig,
    court: &CourtSpec,
) -> Result<OracleReport> {
    cfg.validate()?;
    let mut cases = Vec::new();
    for index in 0..n_states {
        let mut rng = sample_rng(seed ^ 0x5eed_0a1c, index as u64);
        let state = random_scene_state(&mut rng, court);
        let target = Point::new(
            rng.random_range(0.3..court.half_length - 0.3),
            rng.random_range(0.3..court.width - 0.3),
        );
        for kind in [FieldKind::Ppcf, FieldKind::Pbcf] {
            for movement in Movement::BOTH {
                let det = compute_control(kind, &state, target, movement, params, tables, cfg, court)?;
                let mc = mc_control_race(&state, target, movement, params, tables, n_samples, seed.wrapping_add(index as u64), kind, cfg)?;
                let tolerance = f64::max(0.05, 3.0 * mc.se_attack);
                let pass = (det.attack_total - mc.attack).abs() <= tolerance;
                cases.push(OracleCase {
                    index,
                    kind,
                    movement,
                    target,
                    deterministic_attack: det.attack_total,
                    deterministic_defense: det.defense_total,
                    mc,
                    tolerance,
                    pass,
                });
            }
        }
    }
    let max_abs_difference = cases
        .iter()
        .map(|c| (c.deterministic_attack - c.mc.attack).abs())
        .fold(0.0, f64::max);
    Ok(OracleReport {
        states: n_states,
        samples: n_samples,
        seed,
        all_pass: cases.iter().all(|c| c.pass),
        max_abs_difference,
        cases,
    })
}
