//! Line-oriented scene files.
//!
//! ```text
//! offball-scenes 1 rate=25 [half_length=.. width=.. goal_x=.. goal_y=..]
//! scene <scene_id> game=<game_id> team=<team_id> attack=left|right
//! F <t> <ball_x> <ball_y> {<A|D> <id> <x> <y> <vx> <vy>}x10 <possessor|->
//! E <t> <kind> [points=N] [made=0|1] [x=..] [y=..] [player=<id>]
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Velocities may be
//! written as `-`, in which case they are estimated by central differences
//! over neighbouring frames.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use crate::court::{AttackDirection, CourtSpec, Point};
use crate::error::{Error, Result};

use super::{Diagnostic, Event, EventKind, PlayerId, PlayerState, SceneMeta, SceneState, Sequence, Side};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "offball-scenes";
const TUPLE_LEN: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneHeader {
    pub version: u32,
    pub frame_rate: f64,
    pub court: CourtSpec,
}

impl Default for SceneHeader {
    fn default() -> Self {
        SceneHeader {
            version: FORMAT_VERSION,
            frame_rate: 25.0,
            court: CourtSpec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParseOutput {
    pub header: SceneHeader,
    pub sequences: Vec<Sequence>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Reads a scene stream. A missing or unreadable header is fatal; any other
/// malformed line is reported and skipped.
pub fn parse_scene_stream<R: BufRead>(input: R) -> Result<ParseOutput> {
    let mut lines = input.lines().enumerate();
    let mut header = None;
    for (idx, line) in lines.by_ref() {
        let line = line.map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        header = Some(parse_header(trimmed).map_err(|message| Error::Parse { line: idx + 1, message })?);
        break;
    }
    let header = header.ok_or_else(|| Error::Parse {
        line: 0,
        message: "missing header".into(),
    })?;

    let mut sequences: Vec<Sequence> = Vec::new();
    let mut velocity_gaps: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut diagnostics = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                diagnostics.push(diag(line_no, None, format!("unreadable line: {e}")));
                continue;
            }
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match tokens[0] {
            "scene" => match parse_scene_line(&tokens) {
                Ok(meta) => {
                    sequences.push(Sequence {
                        meta,
                        frame_rate: header.frame_rate,
                        standardized: false,
                        frames: Vec::new(),
                        events: Vec::new(),
                    });
                    velocity_gaps.push(Vec::new());
                }
                Err(m) => diagnostics.push(diag(line_no, None, m)),
            },
            "F" | "E" if sequences.is_empty() => {
                diagnostics.push(diag(line_no, None, "record before any scene line".into()));
            }
            "F" => {
                let seq = sequences.last_mut().expect("checked above");
                match parse_frame(&tokens) {
                    Ok((frame, missing)) => {
                        let frame_idx = seq.frames.len();
                        seq.frames.push(frame);
                        velocity_gaps
                            .last_mut()
                            .expect("paired with sequence")
                            .extend(missing.into_iter().map(|p| (frame_idx, p)));
                    }
                    Err(m) => diagnostics.push(diag(line_no, Some(seq.meta.scene_id.clone()), m)),
                }
            }
            "E" => {
                let seq = sequences.last_mut().expect("checked above");
                match parse_event(&tokens) {
                    Ok(ev) => seq.events.push(ev),
                    Err(m) => diagnostics.push(diag(line_no, Some(seq.meta.scene_id.clone()), m)),
                }
            }
            other => diagnostics.push(diag(line_no, None, format!("unknown record type {other:?}"))),
        }
    }

    for (seq, gaps) in sequences.iter_mut().zip(velocity_gaps) {
        finish_sequence(seq, &gaps);
    }
    Ok(ParseOutput {
        header,
        sequences,
        diagnostics,
    })
}

fn diag(line: usize, scene_id: Option<String>, message: String) -> Diagnostic {
    Diagnostic {
        line: Some(line),
        scene_id,
        message,
    }
}

fn parse_header(line: &str) -> std::result::Result<SceneHeader, String> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(format!("header must start with {MAGIC:?}"));
    }
    let version: u32 = tokens
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or("header lacks a format version")?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let mut header = SceneHeader {
        version,
        ..SceneHeader::default()
    };
    for tok in tokens {
        let (key, value) = tok.split_once('=').ok_or_else(|| format!("bad header field {tok:?}"))?;
        let v: f64 = value.parse().map_err(|_| format!("bad number in header field {tok:?}"))?;
        let c = &mut header.court;
        match key {
            "rate" => header.frame_rate = v,
            "half_length" => c.half_length = v,
            "width" => c.width = v,
            "goal_x" => c.goal_position.x = v,
            "goal_y" => c.goal_position.y = v,
            "three_point_radius" => c.three_point_radius = v,
            "corner_three_distance" => c.corner_three_distance = v,
            "corner_zone_y_extent" => c.corner_zone_y_extent = v,
            _ => return Err(format!("unknown header field {key:?}")),
        }
    }
    if !(header.frame_rate.is_finite() && header.frame_rate > 0.0) {
        return Err("frame rate must be positive".into());
    }
    header.court.validate().map_err(|e| e.to_string())?;
    Ok(header)
}

fn parse_scene_line(tokens: &[&str]) -> std::result::Result<SceneMeta, String> {
    let scene_id = tokens.get(1).ok_or("scene line lacks an id")?.to_string();
    let mut game_id = None;
    let mut team_id = None;
    let mut attack = None;
    for tok in &tokens[2..] {
        match tok.split_once('=') {
            Some(("game", v)) => game_id = Some(v.to_string()),
            Some(("team", v)) => team_id = Some(v.to_string()),
            Some(("attack", "left")) => attack = Some(AttackDirection::Left),
            Some(("attack", "right")) => attack = Some(AttackDirection::Right),
            _ => return Err(format!("bad scene field {tok:?}")),
        }
    }
    Ok(SceneMeta {
        scene_id,
        game_id: game_id.ok_or("scene line lacks game=")?,
        team_id: team_id.ok_or("scene line lacks team=")?,
        attack_direction: attack.ok_or("scene line lacks attack=")?,
    })
}

fn num(tok: &str, what: &str) -> std::result::Result<f64, String> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("bad {what} {tok:?}")),
    }
}

/// Returns the frame and the indices of players whose velocity was omitted.
fn parse_frame(tokens: &[&str]) -> std::result::Result<(SceneState, Vec<usize>), String> {
    let body = tokens.len().saturating_sub(5);
    if tokens.len() < 5 || body % TUPLE_LEN != 0 {
        return Err(format!("frame has {} fields, which is not a whole number of player tuples", tokens.len()));
    }
    let n_players = body / TUPLE_LEN;
    if n_players != 2 * super::PLAYERS_PER_TEAM {
        return Err(format!("frame has {n_players} players, expected 10"));
    }
    let timestamp = num(tokens[1], "timestamp")?;
    let ball = Point::new(num(tokens[2], "ball x")?, num(tokens[3], "ball y")?);
    let mut players = Vec::with_capacity(n_players);
    let mut missing = Vec::new();
    for (k, t) in tokens[4..4 + body].chunks(TUPLE_LEN).enumerate() {
        let side = match t[0] {
            "A" => Side::Attack,
            "D" => Side::Defense,
            other => return Err(format!("bad team tag {other:?}")),
        };
        let position = Point::new(num(t[2], "x")?, num(t[3], "y")?);
        let velocity = if t[4] == "-" && t[5] == "-" {
            missing.push(k);
            Point::ZERO
        } else {
            Point::new(num(t[4], "vx")?, num(t[5], "vy")?)
        };
        players.push(PlayerState {
            id: PlayerId(t[1].to_string()),
            side,
            position,
            velocity,
        });
    }
    let possessor = match *tokens.last().expect("length checked") {
        "-" => None,
        id => Some(PlayerId(id.to_string())),
    };
    let frame = SceneState {
        timestamp,
        players,
        ball,
        possessor,
    };
    frame.validate().map_err(|e| e.to_string())?;
    Ok((frame, missing))
}

fn parse_event(tokens: &[&str]) -> std::result::Result<Event, String> {
    if tokens.len() < 3 {
        return Err("event needs a timestamp and a kind".into());
    }
    let timestamp = num(tokens[1], "event timestamp")?;
    let kind = EventKind::parse(tokens[2]).ok_or_else(|| format!("unknown event kind {:?}", tokens[2]))?;
    let mut ev = Event::new(timestamp, kind);
    let (mut x, mut y) = (None, None);
    for tok in &tokens[3..] {
        let (key, value) = tok.split_once('=').ok_or_else(|| format!("bad event field {tok:?}"))?;
        match key {
            "points" => {
                ev.points = Some(match value {
                    "0" => 0,
                    "2" => 2,
                    "3" => 3,
                    _ => return Err(format!("bad shot points {value:?}")),
                })
            }
            "made" => {
                ev.made = Some(match value {
                    "1" => true,
                    "0" => false,
                    _ => return Err(format!("bad made flag {value:?}")),
                })
            }
            "x" => x = Some(num(value, "event x")?),
            "y" => y = Some(num(value, "event y")?),
            "player" => ev.player = Some(PlayerId(value.to_string())),
            _ => return Err(format!("unknown event field {key:?}")),
        }
    }
    ev.location = match (x, y) {
        (Some(x), Some(y)) => Some(Point::new(x, y)),
        (None, None) => None,
        _ => return Err("event location needs both x and y".into()),
    };
    if kind == EventKind::Shot && ev.made.is_none() {
        return Err("shot event lacks made=".into());
    }
    Ok(ev)
}

/// Sorts frames and events by time and fills omitted velocities.
fn finish_sequence(seq: &mut Sequence, gaps: &[(usize, usize)]) {
    let mut order: Vec<usize> = (0..seq.frames.len()).collect();
    order.sort_by(|&a, &b| seq.frames[a].timestamp.total_cmp(&seq.frames[b].timestamp));
    let mut rank = vec![0; order.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut frames: Vec<SceneState> = order.iter().map(|&i| seq.frames[i].clone()).collect();
    seq.events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let tracks: Vec<HashMap<&PlayerId, Point>> = frames
        .iter()
        .map(|f| f.players.iter().map(|p| (&p.id, p.position)).collect())
        .collect();
    let times: Vec<f64> = frames.iter().map(|f| f.timestamp).collect();
    let mut fills = Vec::new();
    for &(frame_idx, player_idx) in gaps {
        let at = rank[frame_idx];
        let id = &frames[at].players[player_idx].id;
        let lo = at.checked_sub(1).filter(|&j| tracks[j].contains_key(id)).unwrap_or(at);
        let hi = Some(at + 1).filter(|&j| j < frames.len() && tracks[j].contains_key(id)).unwrap_or(at);
        let v = if hi > lo && times[hi] > times[lo] {
            (tracks[hi][id] - tracks[lo][id]) * (1.0 / (times[hi] - times[lo]))
        } else {
            Point::ZERO
        };
        fills.push((at, player_idx, v));
    }
    drop(tracks);
    for (at, player_idx, v) in fills {
        frames[at].players[player_idx].velocity = v;
    }
    seq.frames = frames;
}

fn fmt_num(out: &mut String, v: f64) {
    // Normalize negative zero so that output is stable under rotation.
    let v = if v == 0.0 { 0.0 } else { v };
    write!(out, " {v:.4}").expect("write to string");
}

/// Serializes sequences in the scene-file format with four decimals.
pub fn write_scene_file(header: &SceneHeader, sequences: &[Sequence]) -> String {
    let mut out = String::new();
    let c = &header.court;
    let d = CourtSpec::default();
    write!(out, "{MAGIC} {} rate={}", header.version, header.frame_rate).expect("write");
    let overrides = [
        ("half_length", c.half_length, d.half_length),
        ("width", c.width, d.width),
        ("goal_x", c.goal_position.x, d.goal_position.x),
        ("goal_y", c.goal_position.y, d.goal_position.y),
        ("three_point_radius", c.three_point_radius, d.three_point_radius),
        ("corner_three_distance", c.corner_three_distance, d.corner_three_distance),
        ("corner_zone_y_extent", c.corner_zone_y_extent, d.corner_zone_y_extent),
    ];
    for (key, v, default) in overrides {
        if v != default {
            write!(out, " {key}={v}").expect("write");
        }
    }
    out.push('\n');
    for seq in sequences {
        let dir = match seq.meta.attack_direction {
            AttackDirection::Left => "left",
            AttackDirection::Right => "right",
        };
        writeln!(
            out,
            "scene {} game={} team={} attack={dir}",
            seq.meta.scene_id, seq.meta.game_id, seq.meta.team_id
        )
        .expect("write");
        for f in &seq.frames {
            out.push('F');
            fmt_num(&mut out, f.timestamp);
            fmt_num(&mut out, f.ball.x);
            fmt_num(&mut out, f.ball.y);
            for p in &f.players {
                let tag = match p.side {
                    Side::Attack => "A",
                    Side::Defense => "D",
                };
                write!(out, " {tag} {}", p.id).expect("write");
                fmt_num(&mut out, p.position.x);
                fmt_num(&mut out, p.position.y);
                fmt_num(&mut out, p.velocity.x);
                fmt_num(&mut out, p.velocity.y);
            }
            match &f.possessor {
                Some(id) => writeln!(out, " {id}").expect("write"),
                None => out.push_str(" -\n"),
            }
        }
        for e in &seq.events {
            out.push('E');
            fmt_num(&mut out, e.timestamp);
            write!(out, " {}", e.kind.as_str()).expect("write");
            if let Some(p) = e.points {
                write!(out, " points={p}").expect("write");
            }
            if let Some(m) = e.made {
                write!(out, " made={}", u8::from(m)).expect("write");
            }
            if let Some(loc) = e.location {
                let clean = |v: f64| if v == 0.0 { 0.0 } else { v };
                write!(out, " x={:.4} y={:.4}", clean(loc.x), clean(loc.y)).expect("write");
            }
            if let Some(id) = &e.player {
                write!(out, " player={id}").expect("write");
            }
            out.push('\n');
        }
    }
    out
}
