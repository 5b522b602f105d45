use crate::court::Point;

use super::{
    Diagnostic, Event, EventKind, Movement, Outcome, PlayerId, SceneState, Sequence, Side, TransitionRecord,
};

/// A receiver counts as arrived once within this distance of the target.
pub const ARRIVAL_RADIUS: f64 = 1.0;

fn diag(seq: &Sequence, message: String) -> Diagnostic {
    Diagnostic {
        line: None,
        scene_id: Some(seq.meta.scene_id.clone()),
        message,
    }
}

/// Emits one record for every pass release or dribble start whose very
/// next event is a shot or a turnover. The game state is captured at the
/// movement event; the target is the shot or ball-loss location.
pub fn extract_terminal_transitions(seq: &Sequence) -> (Vec<TransitionRecord>, Vec<Diagnostic>) {
    let sorted;
    let seq = if seq.frames.windows(2).all(|w| w[0].timestamp <= w[1].timestamp) {
        seq
    } else {
        let mut s = seq.clone();
        s.frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        sorted = s;
        &sorted
    };
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut events: Vec<&Event> = seq.events.iter().collect();
    events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    for (k, pair) in events.windows(2).enumerate() {
        let (start, end) = (pair[0], pair[1]);
        if !(start.kind.is_movement() && end.kind.is_terminal()) {
            continue;
        }
        match build_record(seq, start, end, k) {
            Ok(r) => records.push(r),
            Err(m) => diagnostics.push(diag(seq, m)),
        }
    }
    (records, diagnostics)
}

fn build_record(seq: &Sequence, start: &Event, end: &Event, k: usize) -> Result<TransitionRecord, String> {
    let state = seq
        .frame_at(start.timestamp)
        .ok_or_else(|| format!("movement at t={:.3} lies outside the recorded frames", start.timestamp))?;
    let end_frame = seq
        .frame_at(end.timestamp)
        .ok_or_else(|| format!("terminal event at t={:.3} lies outside the recorded frames", end.timestamp))?;
    let possessor = state
        .possessor
        .clone()
        .ok_or_else(|| format!("no possessor at movement start t={:.3}", start.timestamp))?;
    let travel_time = end.timestamp - start.timestamp;
    if travel_time <= 0.0 {
        return Err(format!("non-positive travel time at t={:.3}", start.timestamp));
    }
    let movement = match start.kind {
        EventKind::PassRelease => Movement::Pass,
        _ => Movement::Dribble,
    };
    let target = end.location.unwrap_or(end_frame.ball);
    let (outcome, shot_points) = match end.kind {
        EventKind::Shot if end.made == Some(true) => match end.points {
            Some(p @ (2 | 3)) => (Outcome::Scored, p),
            _ => return Err(format!("made shot at t={:.3} lacks 2 or 3 points", end.timestamp)),
        },
        EventKind::Shot => (Outcome::Missed, 0),
        _ => (Outcome::Turnover, 0),
    };

    let receiver = match movement {
        Movement::Dribble => Some(possessor),
        Movement::Pass => end
            .player
            .clone()
            .filter(|id| state.player(id).is_some_and(|p| p.side == Side::Attack))
            .or_else(|| nearest_attacker(end_frame, target, Some(&possessor))),
    };
    let receiver_arrival = receiver
        .as_ref()
        .and_then(|id| arrival_time(seq, id, target, state.timestamp));

    let displacement = target - state.ball;
    Ok(TransitionRecord {
        scene_id: format!("{}/{k}", seq.meta.scene_id),
        game_id: seq.meta.game_id.clone(),
        team_id: seq.meta.team_id.clone(),
        movement,
        state: state.clone(),
        target,
        displacement,
        travel_distance: displacement.norm(),
        travel_time,
        outcome,
        shot_points,
        receiver,
        receiver_arrival,
    })
}

fn nearest_attacker(frame: &SceneState, target: Point, exclude: Option<&PlayerId>) -> Option<PlayerId> {
    frame
        .attackers()
        .filter(|p| Some(&p.id) != exclude)
        .min_by(|a, b| {
            a.position
                .distance(target)
                .total_cmp(&b.position.distance(target))
                .then(a.id.cmp(&b.id))
        })
        .map(|p| p.id.clone())
}

fn arrival_time(seq: &Sequence, id: &PlayerId, target: Point, t0: f64) -> Option<f64> {
    seq.frames
        .iter()
        .filter(|f| f.timestamp >= t0 - 1e-9)
        .find(|f| {
            f.player(id)
                .is_some_and(|p| p.position.distance(target) <= ARRIVAL_RADIUS)
        })
        .map(|f| f.timestamp - t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::court::{AttackDirection, CourtSpec};
    use crate::tracking::{PlayerState, SceneMeta};
    use proptest::prelude::*;

    fn frame(t: f64) -> SceneState {
        let players = (0..10)
            .map(|k| PlayerState {
                id: PlayerId(format!("p{k}")),
                side: if k < 5 { Side::Attack } else { Side::Defense },
                position: Point::new(2.0 + k as f64, 3.0 + 0.7 * k as f64),
                velocity: Point::new(-0.5, 0.25),
            })
            .collect();
        SceneState {
            timestamp: t,
            players,
            ball: Point::new(2.2, 3.0),
            possessor: Some(PlayerId("p0".into())),
        }
    }

    fn seq_with(events: Vec<Event>) -> Sequence {
        Sequence {
            meta: SceneMeta {
                scene_id: "s".into(),
                game_id: "g".into(),
                team_id: "t".into(),
                attack_direction: AttackDirection::Right,
            },
            frame_rate: 25.0,
            standardized: false,
            frames: (0..50).map(|i| frame(i as f64 * 0.04)).collect(),
            events,
        }
    }

    fn shot(t: f64, points: u8, made: bool, at: Point) -> Event {
        Event {
            points: Some(points),
            made: Some(made),
            location: Some(at),
            ..Event::new(t, EventKind::Shot)
        }
    }

    #[test]
    fn pass_to_made_three() {
        let seq = seq_with(vec![
            Event::new(0.4, EventKind::PassRelease),
            shot(1.0, 3, true, Point::new(9.0, 4.0)),
        ]);
        let (recs, diags) = extract_terminal_transitions(&seq);
        assert!(diags.is_empty());
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!((r.movement, r.outcome, r.shot_points), (Movement::Pass, Outcome::Scored, 3));
        assert!((r.travel_time - 0.6).abs() < 1e-12);
        assert!((r.state.timestamp - 0.4).abs() < 1e-12);
        r.validate().unwrap();
    }

    #[test]
    fn only_the_last_movement_before_the_shot_counts() {
        let seq = seq_with(vec![
            Event::new(0.2, EventKind::DribbleStart),
            Event::new(0.6, EventKind::PassRelease),
            shot(1.2, 2, false, Point::new(3.0, 7.0)),
        ]);
        let (recs, _) = extract_terminal_transitions(&seq);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].movement, Movement::Pass);
        assert_eq!(recs[0].outcome, Outcome::Missed);
        assert_eq!(recs[0].shot_points, 0);
    }

    #[test]
    fn turnover_uses_ball_loss_location() {
        let loss = Point::new(6.0, 6.0);
        let mut to = Event::new(0.8, EventKind::Turnover);
        to.location = Some(loss);
        let seq = seq_with(vec![Event::new(0.4, EventKind::DribbleStart), to]);
        let (recs, _) = extract_terminal_transitions(&seq);
        assert_eq!(recs[0].target, loss);
        assert_eq!(recs[0].outcome, Outcome::Turnover);
        assert_eq!(recs[0].receiver, Some(PlayerId("p0".into())));
    }

    #[test]
    fn out_of_range_annotation_is_skipped() {
        let seq = seq_with(vec![
            Event::new(0.4, EventKind::PassRelease),
            shot(5.0, 2, true, Point::new(3.0, 7.0)),
        ]);
        let (recs, diags) = extract_terminal_transitions(&seq);
        assert!(recs.is_empty());
        assert_eq!(diags.len(), 1);
    }

    #[test]
    fn receiver_arrival_is_first_frame_within_radius() {
        let mut seq = seq_with(vec![
            Event::new(0.4, EventKind::PassRelease),
            shot(1.2, 2, true, Point::new(4.6, 4.4)),
        ]);
        // p2 sits at (4, 4.4): 0.6 m away, so it is inside the radius from the start.
        let (recs, _) = extract_terminal_transitions(&seq);
        assert_eq!(recs[0].receiver, Some(PlayerId("p2".into())));
        assert_eq!(recs[0].receiver_arrival, Some(0.0));
        for f in seq.frames.iter_mut() {
            let p = &mut f.players[2];
            p.position = if f.timestamp < 0.8 - 1e-9 { Point::new(9.0, 9.0) } else { Point::new(4.6, 4.4) };
        }
        seq.events[1].player = Some(PlayerId("p2".into()));
        let (recs, _) = extract_terminal_transitions(&seq);
        assert!((recs[0].receiver_arrival.unwrap() - 0.4).abs() < 1e-9);
    }

    #[test]
    fn extraction_commutes_with_standardization() {
        let court = CourtSpec::default();
        let seq = seq_with(vec![
            Event::new(0.4, EventKind::PassRelease),
            shot(1.0, 3, true, Point::new(20.0, 4.0)),
            Event::new(1.2, EventKind::DribbleStart),
            Event {
                location: Some(Point::new(18.0, 10.0)),
                ..Event::new(1.6, EventKind::Turnover)
            },
        ]);
        let (raw, _) = extract_terminal_transitions(&seq);
        let (std_first, _) = extract_terminal_transitions(&seq.standardize(&court).unwrap());
        assert_eq!(raw.len(), 2);
        for (a, b) in raw.iter().zip(&std_first) {
            let a = a.standardized(&court, AttackDirection::Right).unwrap();
            assert!(a.target.distance(b.target) < 1e-9);
            assert!(a.displacement.distance(b.displacement) < 1e-9);
            assert!(a.state.ball.distance(b.state.ball) < 1e-9);
            for (p, q) in a.state.players.iter().zip(&b.state.players) {
                assert!(p.position.distance(q.position) < 1e-9);
                assert!(p.velocity.distance(q.velocity) < 1e-12);
            }
            assert_eq!(a.receiver, b.receiver);
            assert_eq!(a.receiver_arrival, b.receiver_arrival);
            assert_eq!((a.movement, a.outcome, a.shot_points), (b.movement, b.outcome, b.shot_points));
        }
    }

    fn arb_event() -> impl Strategy<Value = Event> {
        (0.0..2.2f64, 0..4usize, any::<bool>(), 0.0..14.0f64, 0.0..15.0f64).prop_map(|(t, kind, made, x, y)| {
            let kind = [EventKind::PassRelease, EventKind::DribbleStart, EventKind::Shot, EventKind::Turnover][kind];
            let mut e = Event::new(t, kind);
            if kind == EventKind::Shot {
                e.made = Some(made);
                e.points = Some(if x > 8.0 { 3 } else { 2 });
            }
            if kind.is_terminal() {
                e.location = Some(Point::new(x, y));
            }
            e
        })
    }

    proptest! {
        #[test]
        fn emitted_records_satisfy_invariants(events in proptest::collection::vec(arb_event(), 0..12)) {
            let seq = seq_with(events);
            let (recs, _) = extract_terminal_transitions(&seq);
            for r in &recs {
                prop_assert!(r.validate().is_ok(), "{:?}", r.validate());
            }
        }

        #[test]
        fn frame_order_does_not_matter(events in proptest::collection::vec(arb_event(), 0..8), seed in 0u64..1000) {
            let seq = seq_with(events);
            let mut shuffled = seq.clone();
            let n = shuffled.frames.len();
            for i in 0..n {
                let j = (seed as usize).wrapping_mul(31).wrapping_add(i * 17) % n;
                shuffled.frames.swap(i, j);
            }
            shuffled.events.reverse();
            prop_assert_eq!(extract_terminal_transitions(&seq).0, extract_terminal_transitions(&shuffled).0);
        }
    }
}
