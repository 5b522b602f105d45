//! Scene ingestion: the open scene-file format, validation and filtering,
//! coordinate standardization and extraction of terminal transitions.

mod extract;
mod filter;
mod format;
mod split;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::court::{AttackDirection, CourtSpec, Point, Vec2};
use crate::error::{Error, Result};

pub use extract::{extract_terminal_transitions, ARRIVAL_RADIUS};
pub use filter::{filter_scenes, FilterConfig, FilterOutcome};
pub use format::{parse_scene_stream, write_scene_file, ParseOutput, SceneHeader, FORMAT_VERSION};
pub use split::split_train_test;

/// Sanity bound on player speed, m/s.
pub const MAX_PLAYER_SPEED: f64 = 12.0;
pub const PLAYERS_PER_TEAM: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub String);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Attack,
    Defense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub id: PlayerId,
    pub side: Side,
    pub position: Point,
    pub velocity: Vec2,
}

impl PlayerState {
    pub fn is_plausible(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.velocity.norm() <= MAX_PLAYER_SPEED
    }
}

/// Instantaneous game state: ten players, the ball and (when annotated) the
/// ball possessor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub timestamp: f64,
    pub players: Vec<PlayerState>,
    pub ball: Point,
    pub possessor: Option<PlayerId>,
}

impl SceneState {
    /// Checks the 5-versus-5 layout, unique ids and that the possessor, if
    /// any, is an attacker.
    pub fn validate(&self) -> Result<()> {
        let attackers = self.players.iter().filter(|p| p.side == Side::Attack).count();
        let defenders = self.players.len() - attackers;
        if attackers != PLAYERS_PER_TEAM || defenders != PLAYERS_PER_TEAM {
            return Err(Error::MalformedFrame(format!(
                "expected 5 attackers and 5 defenders, got {attackers} and {defenders}"
            )));
        }
        for (i, p) in self.players.iter().enumerate() {
            if self.players[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::MalformedFrame(format!("duplicate player id {}", p.id)));
            }
        }
        if let Some(id) = &self.possessor {
            match self.player(id) {
                Some(p) if p.side == Side::Attack => {}
                Some(_) => return Err(Error::MalformedFrame(format!("possessor {id} is a defender"))),
                None => return Err(Error::MalformedFrame(format!("possessor {id} is not on court"))),
            }
        }
        Ok(())
    }

    pub fn player(&self, id: &PlayerId) -> Option<&PlayerState> {
        self.players.iter().find(|p| &p.id == id)
    }

    pub fn attackers(&self) -> impl Iterator<Item = &PlayerState> {
        self.players.iter().filter(|p| p.side == Side::Attack)
    }

    pub fn defenders(&self) -> impl Iterator<Item = &PlayerState> {
        self.players.iter().filter(|p| p.side == Side::Defense)
    }

    pub fn is_possessor(&self, player: &PlayerState) -> bool {
        self.possessor.as_ref() == Some(&player.id)
    }

    /// Applies the left-half standardization, clamping positions that sit
    /// slightly outside the court.
    pub fn standardized(&self, court: &CourtSpec, direction: AttackDirection) -> Result<SceneState> {
        let mut out = self.clone();
        for p in &mut out.players {
            let pos = court.clamp_full_court(p.position)?;
            p.position = court.standardize_point(pos, direction);
            p.velocity = court.standardize_velocity(p.velocity, direction);
        }
        out.ball = court.standardize_point(court.clamp_full_court(self.ball)?, direction);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Movement {
    Pass,
    Dribble,
}

impl Movement {
    pub const BOTH: [Movement; 2] = [Movement::Pass, Movement::Dribble];

    pub fn as_str(self) -> &'static str {
        match self {
            Movement::Pass => "pass",
            Movement::Dribble => "dribble",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Scored,
    Missed,
    Turnover,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PassRelease,
    DribbleStart,
    Shot,
    Turnover,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PassRelease => "pass_release",
            EventKind::DribbleStart => "dribble_start",
            EventKind::Shot => "shot",
            EventKind::Turnover => "turnover",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pass_release" => EventKind::PassRelease,
            "dribble_start" => EventKind::DribbleStart,
            "shot" => EventKind::Shot,
            "turnover" => EventKind::Turnover,
            _ => return None,
        })
    }

    pub fn is_movement(self) -> bool {
        matches!(self, EventKind::PassRelease | EventKind::DribbleStart)
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, EventKind::Shot | EventKind::Turnover)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub timestamp: f64,
    pub kind: EventKind,
    pub points: Option<u8>,
    pub made: Option<bool>,
    pub location: Option<Point>,
    pub player: Option<PlayerId>,
}

impl Event {
    pub fn new(timestamp: f64, kind: EventKind) -> Self {
        Event {
            timestamp,
            kind,
            points: None,
            made: None,
            location: None,
            player: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub scene_id: String,
    pub game_id: String,
    pub team_id: String,
    pub attack_direction: AttackDirection,
}

/// A contiguous run of frames plus its event annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub meta: SceneMeta,
    pub frame_rate: f64,
    pub standardized: bool,
    pub frames: Vec<SceneState>,
    pub events: Vec<Event>,
}

impl Sequence {
    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }

    /// Frame closest in time to `t`, provided `t` lies within half a frame
    /// period of the recorded span. Ties go to the earlier frame.
    pub fn frame_at(&self, t: f64) -> Option<&SceneState> {
        let first = self.frames.first()?;
        let last = self.frames.last()?;
        let slack = 0.5 / self.frame_rate.max(1e-9) + 1e-9;
        if t < first.timestamp - slack || t > last.timestamp + slack {
            return None;
        }
        let idx = self.frames.partition_point(|f| f.timestamp < t);
        let candidates = [idx.checked_sub(1), (idx < self.frames.len()).then_some(idx)];
        candidates
            .into_iter()
            .flatten()
            .min_by(|&a, &b| {
                let da = (self.frames[a].timestamp - t).abs();
                let db = (self.frames[b].timestamp - t).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .map(|i| &self.frames[i])
    }

    /// Rotates every frame and event location into left-half coordinates.
    /// Idempotent: already standardized sequences are returned unchanged.
    pub fn standardize(&self, court: &CourtSpec) -> Result<Sequence> {
        if self.standardized {
            return Ok(self.clone());
        }
        let dir = self.meta.attack_direction;
        let frames = self
            .frames
            .iter()
            .map(|f| f.standardized(court, dir))
            .collect::<Result<Vec<_>>>()?;
        let events = self
            .events
            .iter()
            .map(|e| {
                let mut e = e.clone();
                if let Some(loc) = e.location {
                    e.location = Some(court.standardize_point(court.clamp_full_court(loc)?, dir));
                }
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sequence {
            meta: self.meta.clone(),
            frame_rate: self.frame_rate,
            standardized: true,
            frames,
            events,
        })
    }
}

/// One pass or dribble whose next event is a shot or turnover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub scene_id: String,
    pub game_id: String,
    pub team_id: String,
    pub movement: Movement,
    /// Game state at pass release or dribble start.
    pub state: SceneState,
    pub target: Point,
    pub displacement: Vec2,
    pub travel_distance: f64,
    pub travel_time: f64,
    pub outcome: Outcome,
    pub shot_points: u8,
    /// Attacker credited with the terminal event.
    pub receiver: Option<PlayerId>,
    /// Observed time for the receiver to come within [`ARRIVAL_RADIUS`] of
    /// the target, measured from movement start.
    pub receiver_arrival: Option<f64>,
}

impl TransitionRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(format!("record {}: {m}", self.scene_id)));
        let expected = self.target - self.state.ball;
        if expected.distance(self.displacement) > 1e-9 {
            return bad("displacement does not match target minus ball");
        }
        if (self.displacement.norm() - self.travel_distance).abs() > 1e-9 {
            return bad("travel distance does not match displacement");
        }
        if !(self.travel_time > 0.0 && self.travel_time.is_finite()) {
            return bad("travel time must be positive");
        }
        let scored = self.outcome == Outcome::Scored;
        match (scored, self.shot_points) {
            (true, 2 | 3) | (false, 0) => {}
            _ => return bad("outcome and shot points disagree"),
        }
        if self.state.possessor.is_none() {
            return bad("no possessor at movement start");
        }
        self.state.validate()
    }

    pub fn scored(&self) -> bool {
        self.outcome == Outcome::Scored
    }

    /// Maps the record into left-half coordinates.
    pub fn standardized(&self, court: &CourtSpec, direction: AttackDirection) -> Result<TransitionRecord> {
        let mut out = self.clone();
        out.state = self.state.standardized(court, direction)?;
        out.target = court.standardize_point(court.clamp_full_court(self.target)?, direction);
        out.displacement = out.target - out.state.ball;
        out.travel_distance = out.displacement.norm();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneCorpus {
    pub split: SplitLabel,
    pub game_ids: Vec<String>,
    pub records: Vec<TransitionRecord>,
}

impl SceneCorpus {
    /// Builds a corpus from records, sorting them stably by game and time.
    pub fn from_records(mut records: Vec<TransitionRecord>, split: SplitLabel) -> Result<Self> {
        records.sort_by(|a, b| {
            a.game_id
                .cmp(&b.game_id)
                .then(a.state.timestamp.total_cmp(&b.state.timestamp))
                .then(a.scene_id.cmp(&b.scene_id))
        });
        let mut game_ids: Vec<String> = records.iter().map(|r| r.game_id.clone()).collect();
        game_ids.dedup();
        let corpus = SceneCorpus {
            split,
            game_ids,
            records,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Every scene id must belong to exactly one game.
    pub fn validate(&self) -> Result<()> {
        let mut owner: std::collections::HashMap<&str, &str> = std::collections::HashMap::new();
        for r in &self.records {
            let game = owner.entry(&r.scene_id).or_insert(&r.game_id);
            if *game != r.game_id {
                return Err(Error::Domain(format!(
                    "scene {} appears in games {} and {}",
                    r.scene_id, game, r.game_id
                )));
            }
            if !self.game_ids.iter().any(|g| g == &r.game_id) {
                return Err(Error::Domain(format!("game {} missing from game list", r.game_id)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("corpus serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let corpus: SceneCorpus =
            serde_json::from_str(text).map_err(|e| Error::Serialization(format!("corpus: {e}")))?;
        corpus.validate()?;
        Ok(corpus)
    }
}

/// A problem found while reading or processing a scene file; the offending
/// item is skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub scene_id: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(id) = &self.scene_id {
            write!(f, "scene {id}: ")?;
        }
        f.write_str(&self.message)
    }
}
