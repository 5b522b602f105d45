//! Synthetic scenes drawn from the model itself under known parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::IntegrationConfig;
use crate::court::{AttackDirection, CourtSpec, Point};
use crate::empirical::{ByMovement, ChoiceRateCurve, EmpiricalTables, ScoreModelParams, TransitionTable};
use crate::error::{Error, Result};
use crate::kinematics::{player_intercept_time, time_of_flight, BallSpeedProfile, ModelParams, ResidualParams};
use crate::scoring::{Evaluator, ModelKind};
use crate::tracking::{
    write_scene_file, Event, EventKind, Movement, Outcome, PlayerId, PlayerState, SceneMeta, SceneState, SceneHeader, Sequence, Side,
    ARRIVAL_RADIUS, PLAYERS_PER_TEAM,
};

use super::sample_residual;

/// Ground truth the generator draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub params: ModelParams,
    pub score: ScoreModelParams,
    pub residual: ResidualParams,
    pub pass_speed: BallSpeedProfile,
    pub dribble_speed: BallSpeedProfile,
    pub choice: ChoiceRateCurve,
}

impl Default for SyntheticTruth {
    fn default() -> Self {
        SyntheticTruth {
            params: ModelParams {
                accel: 7.76,
                v_max: 5.0,
                lambda: 36.6,
                kappa: 1.02,
                reaction_attacker: 0.157,
                reaction_defender: 0.495,
            },
            score: ScoreModelParams {
                amplitude: 0.75,
                decay: 0.06,
            },
            residual: ResidualParams {
                location: 0.0,
                gamma_left: 0.01,
                gamma_right: 0.1,
            },
            pass_speed: BallSpeedProfile::from_fn(Movement::Pass, |d| 5.0 + 0.5 * d),
            dribble_speed: BallSpeedProfile::from_fn(Movement::Dribble, |d| 2.5 + 0.25 * d),
            choice: ChoiceRateCurve::from_fn(|d| (0.15 + 0.08 * d).min(0.9)),
        }
    }
}

impl SyntheticTruth {
    /// Truth taken from fitted tables and parameters.
    pub fn from_tables(params: ModelParams, tables: &EmpiricalTables) -> Self {
        SyntheticTruth {
            params,
            score: tables.score,
            residual: tables.residual,
            pass_speed: tables.speed.pass.clone(),
            dribble_speed: tables.speed.dribble.clone(),
            choice: tables.choice.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.score.validate()?;
        self.residual.validate()?;
        self.pass_speed.validate()?;
        self.dribble_speed.validate()?;
        self.choice.validate()
    }

    /// Model tables matching the truth. The transition table is uniform since
    /// the generator does not model where movements end.
    pub fn tables(&self, court: &CourtSpec) -> EmpiricalTables {
        let mut transition = TransitionTable::empty(court, 0.5, 0.4);
        let n = transition.probabilities.len();
        transition.probabilities = vec![1.0 / n as f64; n];
        EmpiricalTables {
            transition,
            transition_by_movement: None,
            score: self.score,
            speed: ByMovement {
                pass: self.pass_speed.clone(),
                dribble: self.dribble_speed.clone(),
            },
            choice: self.choice.clone(),
            residual: self.residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub scenes: usize,
    pub scenes_per_game: usize,
    pub seed: u64,
    pub frame_rate: f64,
    /// Recorded time before the movement starts, seconds.
    pub pre_roll: f64,
    /// Model whose value is the success probability of each scene.
    pub generating_model: ModelKind,
    pub truth: SyntheticTruth,
    /// Standard deviation of Gaussian noise on written positions, metres.
    pub position_noise: f64,
    /// Standard deviation of Gaussian noise on written velocities, m/s.
    pub velocity_noise: f64,
    /// Spread of the per-game, per-team defensive pressure in [-spread, spread];
    /// higher pressure puts defenders closer and earlier.
    pub pressure_spread: f64,
    pub layout: Layout,
    pub integration: IntegrationConfig,
    pub court: CourtSpec,
}

/// How the receiver and their marker are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Players spread around the goal with no regard to the target.
    Natural,
    /// Receiver and marker both expected near the target around the time
    /// the ball gets there, so outcomes are sensitive to the parameters.
    #[default]
    Contested,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            scenes: 2000,
            scenes_per_game: 200,
            seed: 0,
            frame_rate: 25.0,
            pre_roll: 0.4,
            generating_model: ModelKind::Bimos,
            truth: SyntheticTruth::default(),
            position_noise: 0.0,
            velocity_noise: 0.0,
            pressure_spread: 1.0,
            layout: Layout::default(),
            integration: IntegrationConfig::default(),
            court: CourtSpec::default(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.scenes_per_game == 0 {
            return Err(Error::config("scene and per-game counts must be positive"));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::config("frame_rate must be positive"));
        }
        if !(self.pre_roll.is_finite() && self.pre_roll >= 0.0) {
            return Err(Error::config("pre_roll must be non-negative"));
        }
        if !(self.pressure_spread.is_finite() && (0.0..=1.0).contains(&self.pressure_spread)) {
            return Err(Error::config("pressure_spread must lie in [0, 1]"));
        }
        for (name, v) in [("position_noise", self.position_noise), ("velocity_noise", self.velocity_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be non-negative")));
            }
        }
        self.court.validate()?;
        self.integration.validate()?;
        self.truth.validate()
    }

    pub fn games(&self) -> usize {
        self.scenes.div_ceil(self.scenes_per_game)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    /// The scene as written: unstandardized, quantized to the file precision.
    pub sequence: Sequence,
    pub movement: Movement,
    /// Target in standardized coordinates.
    pub target: Point,
    /// Probability of a made shot under the generating model.
    pub value: f64,
    pub outcome: Outcome,
    /// Receiver arrival time after the movement start.
    pub arrival: f64,
}

fn quantize(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn quantize_point(p: Point) -> Point {
    Point::new(quantize(p.x), quantize(p.y))
}

fn random_velocity<R: Rng>(rng: &mut R, scale: f64) -> Point {
    let v = Point::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale));
    let s = v.norm();
    if s > scale {
        v * (scale / s)
    } else {
        v
    }
}

fn inside(court: &CourtSpec, p: Point, margin: f64) -> Point {
    Point::new(
        p.x.clamp(margin, court.half_length - margin),
        p.y.clamp(margin, court.width - margin),
    )
}

fn place_players<R: Rng>(
    rng: &mut R,
    court: &CourtSpec,
    attack: &[PlayerId],
    defense: &[PlayerId],
    pressure: f64,
) -> (Vec<PlayerState>, Point) {
    let goal = court.goal_position;
    let mut players = Vec::with_capacity(attack.len() + defense.len());
    for id in attack {
        let r = rng.random_range(1.5..8.5);
        let a = rng.random_range(-1.4..1.4f64);
        let p = inside(court, goal + Point::new(a.cos(), a.sin()) * r, 0.3);
        players.push(PlayerState {
            id: id.clone(),
            side: Side::Attack,
            position: quantize_point(p),
            velocity: quantize_point(random_velocity(rng, 3.0)),
        });
    }
    for (k, id) in defense.iter().enumerate() {
        let mark = players[k % attack.len()].position;
        let to_goal = goal - mark;
        let dir = if to_goal.norm() > 0.0 { to_goal * (1.0 / to_goal.norm()) } else { Point::new(-1.0, 0.0) };
        let gap = rng.random_range(0.8..2.0) * (-1.2 * pressure).exp();
        let jitter = Point::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        players.push(PlayerState {
            id: id.clone(),
            side: Side::Defense,
            position: quantize_point(inside(court, mark + dir * gap + jitter, 0.3)),
            velocity: quantize_point(random_velocity(rng, 2.0)),
        });
    }
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    let ball = quantize_point(inside(court, players[0].position + Point::new(a.cos(), a.sin()) * 0.3, 0.05));
    (players, ball)
}

/// A plausible standardized ten-player state with `a0` in possession.
pub fn random_scene_state<R: Rng>(rng: &mut R, court: &CourtSpec) -> SceneState {
    let ids = |c: char| (0..PLAYERS_PER_TEAM).map(|k| PlayerId(format!("{c}{k}"))).collect::<Vec<_>>();
    let (players, ball) = place_players(rng, court, &ids('a'), &ids('d'), 0.0);
    SceneState {
        timestamp: 0.0,
        possessor: Some(players[0].id.clone()),
        players,
        ball,
    }
}

/// Defensive pressure shared by all scenes of one team in one game.
fn game_pressure(cfg: &SyntheticConfig, game: usize, team: &str) -> f64 {
    if cfg.pressure_spread == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9a3e_0000);
    rng.set_stream(2 * game as u64 + u64::from(team == "away"));
    rng.random_range(-cfg.pressure_spread..=cfg.pressure_spread)
}

fn scene_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn unit(v: Point) -> Point {
    let n = v.norm();
    if n > 0.0 {
        v * (1.0 / n)
    } else {
        Point::new(-1.0, 0.0)
    }
}

/// Moves `player` so that their expected intercept time at `target` is close
/// to `time`, approaching from a random side with a random velocity.
fn contest<R: Rng>(rng: &mut R, court: &CourtSpec, player: &mut PlayerState, target: Point, time: f64, params: &ModelParams) {
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    let u = Point::new(a.cos(), a.sin());
    let velocity = quantize_point(random_velocity(rng, 3.5));
    let at = |r: f64| PlayerState {
        position: quantize_point(inside(court, target + u * r, 0.3)),
        velocity,
        ..player.clone()
    };
    let tau = |r: f64| player_intercept_time(&at(r), target, params, false);
    let (mut lo, mut hi) = (1.3, 12.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if tau(mid) < time {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    *player = at(lo);
}

/// Draws scene `index`. The same `(seed, index)` always gives the same scene.
pub fn generate_synthetic_scene(cfg: &SyntheticConfig, index: usize) -> Result<GeneratedScene> {
    let court = &cfg.court;
    let truth = &cfg.truth;
    let tables = truth.tables(court);
    let mut rng = scene_rng(cfg.seed, index);
    let game = index / cfg.scenes_per_game;
    let (team, opponent) = if index.is_multiple_of(2) { ("home", "away") } else { ("away", "home") };
    let ids = |t: &str| (0..PLAYERS_PER_TEAM).map(|k| PlayerId(format!("{t}{k}"))).collect::<Vec<_>>();
    let pressure = game_pressure(cfg, game, team);
    let (players, ball) = place_players(&mut rng, court, &ids(team), &ids(opponent), pressure);
    let mut state = SceneState {
        timestamp: 0.0,
        possessor: Some(players[0].id.clone()),
        players,
        ball,
    };

    let receiver_idx = rng.random_range(1..PLAYERS_PER_TEAM);
    let goal = court.goal_position;
    let jitter = |rng: &mut ChaCha8Rng| Point::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    // Targets stay clear of the arrival radius so the run is observable.
    let draw_target = |rng: &mut ChaCha8Rng, from: Point, lo: f64, hi: f64| {
        let mut t = from;
        for _ in 0..50 {
            t = quantize_point(inside(court, from + unit(goal - from) * rng.random_range(lo..hi) + jitter(rng), 0.3));
            if t.distance(from) >= 1.3 {
                break;
            }
        }
        t
    };
    let pass_target = draw_target(&mut rng, state.players[receiver_idx].position, 1.3, 3.5);
    let w = truth.choice.weight(pass_target.distance(state.ball));
    let movement = if rng.random::<f64>() < w { Movement::Pass } else { Movement::Dribble };
    let (receiver, target) = match movement {
        Movement::Pass => (receiver_idx, pass_target),
        Movement::Dribble => (0, draw_target(&mut rng, state.players[0].position, 1.5, 5.0)),
    };
    if cfg.layout == Layout::Contested {
        let flight = time_of_flight(state.ball, target, tables.speed_profile(movement));
        if receiver != 0 {
            let delta = rng.random_range(-0.4..0.4);
            contest(&mut rng, court, &mut state.players[receiver], target, flight + delta, &truth.params);
        }
        // The marker contests a point along the ball path.
        let f = rng.random_range(0.3..1.0);
        let spot = state.ball + (target - state.ball) * f;
        let delta = rng.random_range(-0.3..0.3) - 0.5 * pressure;
        contest(&mut rng, court, &mut state.players[PLAYERS_PER_TEAM + receiver], spot, flight * f + delta, &truth.params);
    }

    let ev = Evaluator {
        court,
        params: &truth.params,
        tables: &tables,
        integration: &cfg.integration,
    };
    let value = ev.value(cfg.generating_model, &state, target)?;
    let scored = rng.random::<f64>() < value;
    let controlled = scored || {
        // Misses and turnovers split by how likely attack control was.
        let s = truth.score.at_distance(court.distance_to_goal(target)).max(1e-12);
        let pc = (value / s).min(1.0);
        let p_miss_given_fail = ((pc - value) / (1.0 - value).max(1e-12)).clamp(0.0, 1.0);
        rng.random::<f64>() < p_miss_given_fail
    };
    let outcome = match (scored, controlled) {
        (true, _) => Outcome::Scored,
        (false, true) => Outcome::Missed,
        (false, false) => Outcome::Turnover,
    };

    // Receiver run: reaches the arrival radius at the drawn arrival time.
    let mover = &state.players[receiver];
    let start = mover.position;
    let d0 = start.distance(target);
    let is_possessor = receiver == 0;
    let tau = player_intercept_time(mover, target, &truth.params, is_possessor);
    let floor = f64::max(0.08, (d0 - ARRIVAL_RADIUS) / 9.0);
    let mut arrival = tau + sample_residual(&truth.residual, &mut rng);
    for _ in 0..100 {
        if arrival >= floor {
            break;
        }
        arrival = tau + sample_residual(&truth.residual, &mut rng);
    }
    let arrival = arrival.max(floor);
    let dir = unit(target - start);
    let approach = (d0 - ARRIVAL_RADIUS).max(0.0);
    let run_speed = approach / arrival;

    let profile = tables.speed_profile(movement);
    let flight = time_of_flight(state.ball, target, profile);
    let ball_dir = unit(target - state.ball);
    let ball_speed = state.ball.distance(target) / flight.max(1e-9);

    let dt = 1.0 / cfg.frame_rate;
    let pre = (cfg.pre_roll * cfg.frame_rate).round() as usize;
    let t0 = pre as f64 * dt;
    let post_span = f64::max(flight, arrival + (ARRIVAL_RADIUS / run_speed.max(1.0))) + 0.2;
    let post = ((post_span * cfg.frame_rate).ceil() as usize).max(((0.5 + dt) * cfg.frame_rate).ceil() as usize);

    let pos_noise = Normal::new(0.0, cfg.position_noise.max(1e-300)).expect("finite noise");
    let vel_noise = Normal::new(0.0, cfg.velocity_noise.max(1e-300)).expect("finite noise");
    let noisy = |v: f64, sd: f64, n: &Normal<f64>, rng: &mut ChaCha8Rng| if sd > 0.0 { v + n.sample(rng) } else { v };

    let direction = if rng.random::<bool>() { AttackDirection::Left } else { AttackDirection::Right };
    let full = Point::new(court.full_length, court.width);
    let emit = |p: Point| {
        let p = court.standardize_point(p, direction);
        quantize_point(Point::new(p.x.clamp(0.0, full.x), p.y.clamp(0.0, full.y)))
    };
    let emit_v = |v: Point| quantize_point(court.standardize_velocity(v, direction));

    let mut frames = Vec::with_capacity(pre + post + 1);
    for k in 0..=(pre + post) {
        let t = k as f64 * dt;
        let s = t - t0;
        let mut players = Vec::with_capacity(state.players.len());
        for (i, p) in state.players.iter().enumerate() {
            let (pos, vel) = if s <= 0.0 {
                (p.position + p.velocity * s, p.velocity)
            } else if i == receiver {
                let run = (run_speed * s).min(d0);
                let v = if run < d0 { dir * run_speed } else { Point::ZERO };
                (start + dir * run, v)
            } else {
                let decay = (-s / 0.5).exp();
                (p.position + p.velocity * (0.5 * (1.0 - decay)), p.velocity * decay)
            };
            let pos = Point::new(noisy(pos.x, cfg.position_noise, &pos_noise, &mut rng), noisy(pos.y, cfg.position_noise, &pos_noise, &mut rng));
            let vel = Point::new(noisy(vel.x, cfg.velocity_noise, &vel_noise, &mut rng), noisy(vel.y, cfg.velocity_noise, &vel_noise, &mut rng));
            players.push(PlayerState {
                id: p.id.clone(),
                side: p.side,
                position: emit(pos),
                velocity: emit_v(vel),
            });
        }
        let ball = if s <= 0.0 {
            state.ball
        } else if s < flight {
            state.ball + ball_dir * (ball_speed * s)
        } else {
            target
        };
        let possessor = if s <= 0.0 || movement == Movement::Dribble {
            Some(state.players[0].id.clone())
        } else if s >= flight && outcome != Outcome::Turnover {
            Some(state.players[receiver].id.clone())
        } else {
            None
        };
        frames.push(SceneState {
            timestamp: quantize(t),
            players,
            ball: emit(ball),
            possessor,
        });
    }

    let start_kind = match movement {
        Movement::Pass => EventKind::PassRelease,
        Movement::Dribble => EventKind::DribbleStart,
    };
    let mut end = match outcome {
        Outcome::Turnover => Event::new(quantize(t0 + flight), EventKind::Turnover),
        _ => {
            let mut e = Event::new(quantize(t0 + flight), EventKind::Shot);
            e.points = Some(court.point_value(target));
            e.made = Some(outcome == Outcome::Scored);
            e
        }
    };
    end.player = Some(state.players[receiver].id.clone());
    end.location = Some(emit(target));
    let mut begin = Event::new(quantize(t0), start_kind);
    begin.player = Some(state.players[0].id.clone());
    state.timestamp = t0;

    let sequence = Sequence {
        meta: SceneMeta {
            scene_id: format!("syn{index:06}"),
            game_id: format!("g{game:04}"),
            team_id: team.to_string(),
            attack_direction: direction,
        },
        frame_rate: cfg.frame_rate,
        standardized: false,
        frames,
        events: vec![begin, end],
    };
    Ok(GeneratedScene {
        sequence,
        movement,
        target,
        value,
        outcome,
        arrival,
    })
}

/// Generates every scene and groups them into one scene file per game,
/// returned as `(game_id, file contents)` in game order.
pub fn generate_synthetic_corpus(cfg: &SyntheticConfig) -> Result<Vec<(String, String)>> {
    cfg.validate()?;
    let scenes: Vec<GeneratedScene> = (0..cfg.scenes)
        .into_par_iter()
        .map(|i| generate_synthetic_scene(cfg, i))
        .collect::<Result<_>>()?;
    let header = SceneHeader {
        frame_rate: cfg.frame_rate,
        court: cfg.court,
        ..SceneHeader::default()
    };
    Ok(scenes
        .chunks(cfg.scenes_per_game)
        .map(|chunk| {
            let seqs: Vec<Sequence> = chunk.iter().map(|s| s.sequence.clone()).collect();
            (seqs[0].meta.game_id.clone(), write_scene_file(&header, &seqs))
        })
        .collect())
}
