//! Potential pass/ball control fields: a competing-risk race between the
//! participating players for the ball at a target location.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::court::{CourtGrid, CourtSpec, Field, Point};
use crate::empirical::{ChoiceRateCurve, EmpiricalTables};
use crate::error::{Error, Result};
use crate::kinematics::{player_intercept_time, time_of_flight, ModelParams, ResidualParams};
use crate::tracking::{Movement, PlayerId, PlayerState, SceneState, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    pub dt: f64,
    /// Potential-pass integration window after the ball arrives, seconds.
    pub horizon_after_arrival: f64,
    pub saturation_threshold: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            dt: 0.04,
            horizon_after_arrival: 10.0,
            saturation_threshold: 0.99,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::config(format!("dt must lie in (0, 0.1], got {}", self.dt)));
        }
        if !(self.horizon_after_arrival > 0.0 && self.horizon_after_arrival.is_finite()) {
            return Err(Error::config("horizon_after_arrival must be positive"));
        }
        if !(self.saturation_threshold > 0.9 && self.saturation_threshold < 1.0) {
            return Err(Error::config("saturation_threshold must lie in (0.9, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// Control once the ball has arrived at the target.
    Ppcf,
    /// Control of the ball while it travels to the target.
    Pbcf,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Ppcf => "ppcf",
            FieldKind::Pbcf => "pbcf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerControl {
    pub id: PlayerId,
    pub side: Side,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResult {
    pub per_player: Vec<PlayerControl>,
    pub attack_total: f64,
    pub defense_total: f64,
    /// Probability that nobody controls the ball in flight; PBCF only.
    pub no_control: Option<f64>,
    /// Ball arrival time at the target.
    pub t_calc: f64,
    /// Time at which integration stopped.
    pub t_end: f64,
}

impl ControlResult {
    pub fn player(&self, id: &PlayerId) -> Option<f64> {
        self.per_player.iter().find(|p| &p.id == id).map(|p| p.value)
    }
}

/// Uncontrolled-mass error tolerated on one piece before it is bisected.
const REFINE_TOL: f64 = 1e-4;
/// Every step is split at least this many times: a hazard bump narrower
/// than the sample spacing is otherwise invisible to the refinement test.
const MIN_DEPTH: u32 = 1;
const MAX_DEPTH: u32 = 7;

struct Accumulator {
    control: Vec<f64>,
    remaining: f64,
}

impl Accumulator {
    fn accrue(&mut self, rates: &[f64], h: f64) {
        let total: f64 = rates.iter().sum();
        if total > 0.0 {
            let decay = (-total * h).exp();
            let gained = self.remaining * (1.0 - decay);
            for (c, r) in self.control.iter_mut().zip(rates) {
                *c += gained * r / total;
            }
            self.remaining *= decay;
        }
    }

    /// Accrues `[a, b]`, whose mean rates are `whole`, bisecting while the
    /// half-interval means disagree with the whole-interval mean.
    fn refine<F>(&mut self, hazards: &mut F, a: f64, b: f64, whole: &[f64], depth: u32)
    where
        F: FnMut(f64, f64, &mut [f64]),
    {
        if depth == MAX_DEPTH {
            self.accrue(whole, b - a);
            return;
        }
        let m = 0.5 * (a + b);
        let mut left = vec![0.0; whole.len()];
        let mut right = vec![0.0; whole.len()];
        hazards(a, m, &mut left);
        hazards(m, b, &mut right);
        let err: f64 = whole
            .iter()
            .zip(left.iter().zip(&right))
            .map(|(w, (l, r))| (w - 0.5 * (l + r)).abs())
            .sum::<f64>()
            * (b - a);
        if depth >= MIN_DEPTH && self.remaining * err <= REFINE_TOL {
            self.accrue(&left, m - a);
            self.accrue(&right, b - m);
        } else {
            self.refine(hazards, a, m, &left, depth + 1);
            self.refine(hazards, m, b, &right, depth + 1);
        }
    }
}

/// Competing-risk accumulation over `[t_start, t_end]`. `hazards(a, b, out)`
/// writes each participant's mean control rate over `[a, b]`. Within a piece
/// the rates are held at those means and the uncontrolled mass decays
/// exactly, so no piece can overshoot. Each `dt` step is bisected, at least
/// once and then adaptively until half-piece means agree with the
/// whole-piece mean, which resolves players switching on or off within a
/// step. Stops early, at a step
/// boundary, once the controlled mass reaches `saturation`. Returns
/// per-participant mass and the stop time.
pub fn integrate_control<F>(mut hazards: F, n: usize, t_start: f64, t_end: f64, dt: f64, saturation: Option<f64>) -> (Vec<f64>, f64)
where
    F: FnMut(f64, f64, &mut [f64]),
{
    let mut acc = Accumulator {
        control: vec![0.0; n],
        remaining: 1.0,
    };
    let mut rates = vec![0.0; n];
    let mut t = t_start;
    let span = t_end - t_start;
    if n == 0 || !(span > 0.0) {
        return (acc.control, t_start);
    }
    let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
    for k in 0..steps {
        let next = if k + 1 == steps { t_end } else { t_start + (k + 1) as f64 * dt };
        hazards(t, next, &mut rates);
        acc.refine(&mut hazards, t, next, &rates, 0);
        t = next;
        let controlled = 1.0 - acc.remaining;
        debug_assert!((0.0..=1.0 + 1e-12).contains(&controlled));
        if saturation.is_some_and(|s| controlled >= s) {
            break;
        }
    }
    (acc.control, t)
}

struct Participant<'a> {
    player: &'a PlayerState,
    is_possessor: bool,
    rate: f64,
}

/// Players in the race for a component, in a canonical order so results do
/// not depend on the order of the input list. A dribble involves only the
/// ball handler on the attacking side.
fn participants<'a>(state: &'a SceneState, movement: Movement, params: &ModelParams) -> Vec<Participant<'a>> {
    let mut out: Vec<Participant> = state
        .players
        .iter()
        .filter_map(|p| {
            let is_possessor = state.is_possessor(p);
            let eligible = match (movement, p.side) {
                (_, Side::Defense) => true,
                (Movement::Pass, Side::Attack) => true,
                (Movement::Dribble, Side::Attack) => is_possessor,
            };
            eligible.then(|| Participant {
                player: p,
                is_possessor,
                rate: params.control_rate(p.side),
            })
        })
        .collect();
    out.sort_by(|a, b| {
        let key = |p: &Participant| (p.player.side == Side::Defense, p.player.id.0.clone());
        key(a).cmp(&key(b))
    });
    out
}

fn finish(parts: &[Participant], control: Vec<f64>, no_control: Option<f64>, t_calc: f64, t_end: f64) -> ControlResult {
    let per_player: Vec<PlayerControl> = parts
        .iter()
        .zip(control)
        .map(|(p, value)| PlayerControl {
            id: p.player.id.clone(),
            side: p.player.side,
            value,
        })
        .collect();
    let total = |side| per_player.iter().filter(|p| p.side == side).map(|p| p.value).sum();
    ControlResult {
        attack_total: total(Side::Attack),
        defense_total: total(Side::Defense),
        per_player,
        no_control,
        t_calc,
        t_end,
    }
}

fn check_target(target: Point, court: &CourtSpec) -> Result<()> {
    if court.contains(target) {
        Ok(())
    } else {
        Err(Error::Domain(format!("target ({:.3}, {:.3}) lies off the court", target.x, target.y)))
    }
}

/// Control after the ball arrives at `target`. Each player's rate is fixed
/// at their arrival probability for the ball arrival time.
pub fn compute_ppcf(
    state: &SceneState,
    target: Point,
    movement: Movement,
    params: &ModelParams,
    tables: &EmpiricalTables,
    cfg: &IntegrationConfig,
    court: &CourtSpec,
) -> Result<ControlResult> {
    check_target(target, court)?;
    let t_calc = time_of_flight(state.ball, target, tables.speed_profile(movement));
    let parts = participants(state, movement, params);
    let rates: Vec<f64> = parts
        .iter()
        .map(|p| {
            let tau = player_intercept_time(p.player, target, params, p.is_possessor);
            p.rate * tables.residual.cdf(t_calc - tau)
        })
        .collect();
    let (control, t_end) = integrate_control(
        |_, _, out| out.copy_from_slice(&rates),
        parts.len(),
        t_calc,
        t_calc + cfg.horizon_after_arrival,
        cfg.dt,
        Some(cfg.saturation_threshold),
    );
    Ok(finish(&parts, control, None, t_calc, t_end))
}

/// Recently evaluated per-player values keyed by time; adaptive bisection
/// revisits each endpoint several times.
#[derive(Default)]
struct SlackCache {
    entries: Vec<(f64, Vec<f64>)>,
    next: usize,
}

impl SlackCache {
    const CAPACITY: usize = 2 * MAX_DEPTH as usize + 2;

    fn get(&mut self, t: f64, eval: &impl Fn(f64) -> Vec<f64>) -> usize {
        if let Some(i) = self.entries.iter().position(|(at, _)| *at == t) {
            return i;
        }
        let value = (t, eval(t));
        if self.entries.len() < Self::CAPACITY {
            self.entries.push(value);
            self.entries.len() - 1
        } else {
            let i = self.next;
            self.entries[i] = value;
            self.next = (i + 1) % Self::CAPACITY;
            i
        }
    }

    /// Values at `a` (copied, since looking up `b` may evict it) and at `b`.
    fn pair(&mut self, a: f64, b: f64, eval: &impl Fn(f64) -> Vec<f64>) -> (Vec<f64>, &[f64]) {
        let i = self.get(a, eval);
        let at_a = self.entries[i].1.clone();
        let j = self.get(b, eval);
        (at_a, &self.entries[j].1)
    }
}

/// Control of the ball along its straight path from the ball position to
/// `target`, integrated up to the arrival time.
pub fn compute_pbcf(
    state: &SceneState,
    target: Point,
    movement: Movement,
    params: &ModelParams,
    tables: &EmpiricalTables,
    cfg: &IntegrationConfig,
    court: &CourtSpec,
) -> Result<ControlResult> {
    check_target(target, court)?;
    let profile = tables.speed_profile(movement);
    let t_calc = time_of_flight(state.ball, target, profile);
    let parts = participants(state, movement, params);
    let offset = target - state.ball;
    let distance = offset.norm();
    let velocity = if distance > 0.0 {
        offset * (profile.speed(distance) / distance)
    } else {
        Point::ZERO
    };
    let rp: &ResidualParams = &tables.residual;
    // Arrival slack t − τ(r(t)); taken as linear within a piece, so the
    // piece mean of the CDF is exact.
    let slack = |t: f64| -> Vec<f64> {
        let on_path = state.ball + velocity * t;
        parts.iter().map(|p| t - player_intercept_time(p.player, on_path, params, p.is_possessor)).collect()
    };
    let mut cache = SlackCache::default();
    let (control, t_end) = integrate_control(
        |a, b, out| {
            let (sa, sb) = cache.pair(a, b, &slack);
            for (k, (o, p)) in out.iter_mut().zip(&parts).enumerate() {
                *o = p.rate * rp.mean_cdf(sa[k], sb[k]);
            }
        },
        parts.len(),
        0.0,
        t_calc,
        cfg.dt,
        None,
    );
    let controlled: f64 = control.iter().sum();
    Ok(finish(&parts, control, Some((1.0 - controlled).max(0.0)), t_calc, t_end))
}

pub fn compute_control(
    kind: FieldKind,
    state: &SceneState,
    target: Point,
    movement: Movement,
    params: &ModelParams,
    tables: &EmpiricalTables,
    cfg: &IntegrationConfig,
    court: &CourtSpec,
) -> Result<ControlResult> {
    match kind {
        FieldKind::Ppcf => compute_ppcf(state, target, movement, params, tables, cfg, court),
        FieldKind::Pbcf => compute_pbcf(state, target, movement, params, tables, cfg, court),
    }
}

/// Pass/dribble mixture weighted by the pass rate at this travel distance.
pub fn combine_components(pass_result: f64, dribble_result: f64, travel_distance: f64, curve: &ChoiceRateCurve) -> f64 {
    let w = curve.weight(travel_distance);
    w * pass_result + (1.0 - w) * dribble_result
}

/// Pass/dribble-combined attacking control at one target.
pub fn combined_attack_control(
    kind: FieldKind,
    state: &SceneState,
    target: Point,
    params: &ModelParams,
    tables: &EmpiricalTables,
    cfg: &IntegrationConfig,
    court: &CourtSpec,
) -> Result<f64> {
    let pass = compute_control(kind, state, target, Movement::Pass, params, tables, cfg, court)?;
    let dribble = compute_control(kind, state, target, Movement::Dribble, params, tables, cfg, court)?;
    Ok(combine_components(
        pass.attack_total,
        dribble.attack_total,
        state.ball.distance(target),
        &tables.choice,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiagnostic {
    pub cell: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct FieldOutcome {
    pub field: Field,
    /// Cells that could not be evaluated; their value is 0.
    pub diagnostics: Vec<CellDiagnostic>,
}

/// Combined attacking control over every grid cell. Cells are independent
/// and evaluated in parallel.
pub fn field_over_grid(
    state: &SceneState,
    grid: &CourtGrid,
    kind: FieldKind,
    params: &ModelParams,
    tables: &EmpiricalTables,
    cfg: &IntegrationConfig,
) -> Result<FieldOutcome> {
    cfg.validate()?;
    let evaluated: Vec<std::result::Result<f64, String>> = grid
        .cells
        .par_iter()
        .map(|cell| {
            combined_attack_control(kind, state, cell.center, params, tables, cfg, &grid.court)
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut values = Vec::with_capacity(evaluated.len());
    let mut diagnostics = Vec::new();
    for (cell, v) in evaluated.into_iter().enumerate() {
        match v {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                values.push(0.0);
                diagnostics.push(CellDiagnostic {
                    cell,
                    message: format!("non-finite control value {v}"),
                });
            }
            Err(message) => {
                values.push(0.0);
                diagnostics.push(CellDiagnostic { cell, message });
            }
        }
    }
    Ok(FieldOutcome {
        field: Field::new(grid.clone(), values)?,
        diagnostics,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::empirical::{ByMovement, ScoreModelParams, TransitionTable};
    use crate::kinematics::BallSpeedProfile;
    use proptest::prelude::*;

    pub(crate) fn reference_params() -> ModelParams {
        ModelParams {
            accel: 7.76,
            v_max: 5.0,
            lambda: 36.6,
            kappa: 1.02,
            reaction_attacker: 0.157,
            reaction_defender: 0.495,
        }
    }

    pub(crate) fn test_tables() -> EmpiricalTables {
        let court = CourtSpec::default();
        let mut transition = TransitionTable::empty(&court, 0.5, 0.4);
        let n = transition.probabilities.len();
        transition.probabilities = vec![1.0 / n as f64; n];
        EmpiricalTables {
            transition,
            transition_by_movement: None,
            score: ScoreModelParams {
                amplitude: 0.65,
                decay: 0.07,
            },
            speed: ByMovement {
                pass: BallSpeedProfile::from_fn(Movement::Pass, |d| 4.0 + 0.6 * d),
                dribble: BallSpeedProfile::from_fn(Movement::Dribble, |d| 2.5 + 0.2 * d),
            },
            choice: ChoiceRateCurve::from_fn(|d| (0.1 * d).min(0.9)),
            residual: ResidualParams::new(0.05, 0.15, 0.35).unwrap(),
        }
    }

    pub(crate) fn player(id: &str, side: Side, x: f64, y: f64, vx: f64, vy: f64) -> PlayerState {
        PlayerState {
            id: PlayerId(id.into()),
            side,
            position: Point::new(x, y),
            velocity: Point::new(vx, vy),
        }
    }

    pub(crate) fn sample_state() -> SceneState {
        let players = vec![
            player("a0", Side::Attack, 8.0, 7.0, -1.0, 0.0),
            player("a1", Side::Attack, 4.0, 2.0, 0.0, 1.0),
            player("a2", Side::Attack, 3.0, 12.0, 0.5, -0.5),
            player("a3", Side::Attack, 9.5, 11.0, 0.0, 0.0),
            player("a4", Side::Attack, 1.5, 5.0, 0.0, 0.0),
            player("d0", Side::Defense, 7.0, 7.2, 0.0, 0.0),
            player("d1", Side::Defense, 3.6, 2.8, 0.3, 0.8),
            player("d2", Side::Defense, 3.2, 10.8, 0.0, 0.0),
            player("d3", Side::Defense, 8.4, 10.2, -0.5, 0.0),
            player("d4", Side::Defense, 2.0, 6.0, 0.0, 0.0),
        ];
        SceneState {
            timestamp: 0.0,
            players,
            ball: Point::new(8.2, 7.0),
            possessor: Some(PlayerId("a0".into())),
        }
    }

    #[test]
    fn single_constant_rate_matches_closed_form() {
        let lambda = 36.6;
        let (c, t) = integrate_control(|_, _, out| out[0] = lambda, 1, 0.0, 0.2, 0.04, None);
        assert!((t - 0.2).abs() < 1e-15);
        let exact = 1.0 - (-lambda * 0.2f64).exp();
        assert!((c[0] - exact).abs() < 0.005);
        assert!((c[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let (c, _) = integrate_control(|_, _, out| out.fill(20.0), 2, 1.3, 11.3, 0.04, Some(0.99));
        assert!((c[0] - c[1]).abs() < 1e-12);
        assert!(c[0] + c[1] >= 0.99);
        assert!((c[0] - 0.5).abs() < 0.006);
    }

    #[test]
    fn zero_rates_give_no_control() {
        let (c, _) = integrate_control(|_, _, out| out.fill(0.0), 3, 0.0, 10.0, 0.04, Some(0.99));
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_range_is_empty() {
        let (c, t) = integrate_control(|_, _, out| out.fill(5.0), 2, 0.7, 0.7, 0.04, None);
        assert_eq!(c, vec![0.0, 0.0]);
        assert_eq!(t, 0.7);
    }

    #[test]
    fn pbcf_at_ball_has_no_flight() {
        let s = sample_state();
        let r = compute_pbcf(&s, s.ball, Movement::Pass, &reference_params(), &test_tables(), &IntegrationConfig::default(), &CourtSpec::default()).unwrap();
        assert_eq!(r.attack_total, 0.0);
        assert_eq!(r.defense_total, 0.0);
        assert_eq!(r.no_control, Some(1.0));
    }

    #[test]
    fn pbcf_single_attacker_on_the_path() {
        // A possessor carrying the ball reaches every point of its path at once.
        let rp = ResidualParams::new(0.1, 0.2, 0.3).unwrap();
        let lambda = 36.6;
        let t_calc = 0.37;
        let (c, _) = integrate_control(|_, _, out| out[0] = lambda * rp.cdf(0.0), 1, 0.0, t_calc, 0.04, None);
        let exact = 1.0 - (-lambda * rp.cdf(0.0) * t_calc).exp();
        assert!((c[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn off_court_target_is_a_domain_error() {
        let s = sample_state();
        let e = compute_ppcf(&s, Point::new(-1.0, 3.0), Movement::Pass, &reference_params(), &test_tables(), &IntegrationConfig::default(), &CourtSpec::default());
        assert!(matches!(e, Err(Error::Domain(_))));
    }

    #[test]
    fn dribble_involves_only_the_handler() {
        let s = sample_state();
        let r = compute_ppcf(&s, Point::new(5.0, 6.0), Movement::Dribble, &reference_params(), &test_tables(), &IntegrationConfig::default(), &CourtSpec::default()).unwrap();
        let attackers: Vec<&PlayerControl> = r.per_player.iter().filter(|p| p.side == Side::Attack).collect();
        assert_eq!(attackers.len(), 1);
        assert_eq!(attackers[0].id.0, "a0");
        assert_eq!(r.per_player.len(), 6);
    }

    #[test]
    fn result_invariants() {
        let s = sample_state();
        let (p, t, c, court) = (reference_params(), test_tables(), IntegrationConfig::default(), CourtSpec::default());
        for target in [Point::new(2.0, 2.0), Point::new(6.0, 9.0), Point::new(12.0, 14.0)] {
            for mv in Movement::BOTH {
                let pp = compute_ppcf(&s, target, mv, &p, &t, &c, &court).unwrap();
                let pb = compute_pbcf(&s, target, mv, &p, &t, &c, &court).unwrap();
                for r in [&pp, &pb] {
                    assert!(r.per_player.iter().all(|x| (0.0..=1.0).contains(&x.value)));
                    assert!(r.attack_total + r.defense_total + r.no_control.unwrap_or(0.0) <= 1.0 + 1e-6);
                }
                assert!(pp.attack_total + pp.defense_total >= 0.99 - 1e-12 || pp.t_end >= pp.t_calc + 10.0 - 1e-9);
                let sum = pb.attack_total + pb.defense_total + pb.no_control.unwrap();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn combine_components_examples() {
        assert_eq!(combine_components(0.3, 0.8, 4.0, &ChoiceRateCurve::constant(1.0)), 0.3);
        assert!((combine_components(0.2, 0.6, 4.0, &ChoiceRateCurve::constant(0.5)) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn field_is_order_independent_and_bounded() {
        let s = sample_state();
        let grid = CourtGrid::new(CourtSpec::default(), 1.0).unwrap();
        let (p, t, c) = (reference_params(), test_tables(), IntegrationConfig::default());
        let a = field_over_grid(&s, &grid, FieldKind::Pbcf, &p, &t, &c).unwrap();
        let mut shuffled = s.clone();
        shuffled.players.reverse();
        shuffled.players.swap(1, 6);
        let b = field_over_grid(&shuffled, &grid, FieldKind::Pbcf, &p, &t, &c).unwrap();
        assert!(a.diagnostics.is_empty());
        assert_eq!(a.field.values, b.field.values);
        assert!(a.field.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn halving_dt_barely_moves_the_field() {
        let s = sample_state();
        let grid = CourtGrid::new(CourtSpec::default(), 1.0).unwrap();
        let (p, t) = (reference_params(), test_tables());
        let coarse = IntegrationConfig::default();
        let fine = IntegrationConfig { dt: 0.02, ..coarse };
        for kind in [FieldKind::Ppcf, FieldKind::Pbcf] {
            let a = field_over_grid(&s, &grid, kind, &p, &t, &coarse).unwrap().field;
            let b = field_over_grid(&s, &grid, kind, &p, &t, &fine).unwrap().field;
            let worst = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(worst < 0.01, "{kind:?}: {worst}");
        }
    }

    fn arbitrary_state() -> impl Strategy<Value = SceneState> {
        proptest::collection::vec((0.5..14.0f64, 0.5..14.7f64, -3.0..3.0f64, -3.0..3.0f64), 10).prop_map(|v| {
            let players = v
                .iter()
                .enumerate()
                .map(|(i, &(x, y, vx, vy))| {
                    let side = if i < 5 { Side::Attack } else { Side::Defense };
                    player(&format!("p{i}"), side, x, y, vx, vy)
                })
                .collect();
            SceneState {
                timestamp: 0.0,
                players,
                ball: Point::new(v[0].0, v[0].1),
                possessor: Some(PlayerId("p0".into())),
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn larger_kappa_never_helps_the_attack(s in arbitrary_state(), tx in 0.2..14.0f64, ty in 0.2..15.0f64, k in 1.0..3.0f64, dk in 0.0..2.0f64) {
            let court = CourtSpec::default();
            let t = test_tables();
            let c = IntegrationConfig::default();
            let lo = ModelParams { kappa: k, ..reference_params() };
            let hi = ModelParams { kappa: k + dk, ..reference_params() };
            let target = Point::new(tx, ty);
            for mv in Movement::BOTH {
                let a = compute_pbcf(&s, target, mv, &lo, &t, &c, &court).unwrap();
                let b = compute_pbcf(&s, target, mv, &hi, &t, &c, &court).unwrap();
                prop_assert!(b.attack_total <= a.attack_total + 1e-12);
                let a = compute_ppcf(&s, target, mv, &lo, &t, &c, &court).unwrap();
                let b = compute_ppcf(&s, target, mv, &hi, &t, &c, &court).unwrap();
                // Saturation can stop the two runs on different steps.
                prop_assert!(b.attack_total <= a.attack_total + 0.01);
            }
        }

        #[test]
        fn dt_refinement_is_within_five_dt(s in arbitrary_state(), tx in 0.2..14.0f64, ty in 0.2..15.0f64) {
            let court = CourtSpec::default();
            let (p, t) = (reference_params(), test_tables());
            let coarse = IntegrationConfig::default();
            let fine = IntegrationConfig { dt: 0.02, ..coarse };
            let target = Point::new(tx, ty);
            for mv in Movement::BOTH {
                let a = compute_pbcf(&s, target, mv, &p, &t, &coarse, &court).unwrap();
                let b = compute_pbcf(&s, target, mv, &p, &t, &fine, &court).unwrap();
                prop_assert!((a.attack_total - b.attack_total).abs() < 5.0 * coarse.dt);
                prop_assert!((a.defense_total - b.defense_total).abs() < 5.0 * coarse.dt);
            }
        }

        #[test]
        fn partial_sums_are_monotone(rates in proptest::collection::vec(0.0..80.0f64, 1..6), t_end in 0.0..3.0f64) {
            let mut last = 0.0;
            let n = rates.len();
            for k in 1..=20 {
                let (c, _) = integrate_control(|_, _, out| out.copy_from_slice(&rates), n, 0.0, t_end * k as f64 / 20.0, 0.04, None);
                let s: f64 = c.iter().sum();
                prop_assert!(s >= last - 1e-12 && s <= 1.0 + 1e-12);
                last = s;
            }
        }
    }
}
