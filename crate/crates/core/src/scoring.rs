//! Scoring-opportunity values (BMOS/BIMOS) and their evaluation against
//! actual points.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{combined_attack_control, CellDiagnostic, FieldKind, IntegrationConfig};
use crate::court::{Cell, CourtGrid, CourtSpec, Field, Point};
use crate::empirical::{score_probability, transition_probability, EmpiricalTables, TransitionTable};
use crate::error::{Error, Result};
use crate::kinematics::ModelParams;
use crate::tracking::{Movement, PlayerId, SceneCorpus, SceneState, Side, TransitionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Score × potential pass control × transition.
    Bmos,
    /// Score × potential ball control in flight.
    Bimos,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Bmos => "bmos",
            ModelKind::Bimos => "bimos",
        }
    }

    pub fn field_kind(self) -> FieldKind {
        match self {
            ModelKind::Bmos => FieldKind::Ppcf,
            ModelKind::Bimos => FieldKind::Pbcf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceFilter {
    All,
    Pass,
    Dribble,
}

impl SequenceFilter {
    pub const ALL: [SequenceFilter; 3] = [SequenceFilter::All, SequenceFilter::Pass, SequenceFilter::Dribble];

    pub fn admits(self, movement: Movement) -> bool {
        match self {
            SequenceFilter::All => true,
            SequenceFilter::Pass => movement == Movement::Pass,
            SequenceFilter::Dribble => movement == Movement::Dribble,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SequenceFilter::All => "all",
            SequenceFilter::Pass => "pass",
            SequenceFilter::Dribble => "dribble",
        }
    }
}

/// How a scene's expected points are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectationMode {
    /// Model value at the terminal target times the point value there.
    #[default]
    AtTarget,
    /// Sum over the grid of model value times point value.
    Surface,
}

/// Everything needed to evaluate a model value at a target.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    pub court: &'a CourtSpec,
    pub params: &'a ModelParams,
    pub tables: &'a EmpiricalTables,
    pub integration: &'a IntegrationConfig,
}

impl Evaluator<'_> {
    fn control(&self, kind: FieldKind, state: &SceneState, target: Point) -> Result<f64> {
        combined_attack_control(kind, state, target, self.params, self.tables, self.integration, self.court)
    }

    fn transition_with(&self, table_mass: impl Fn(&TransitionTable) -> f64, distance: f64) -> f64 {
        match &self.tables.transition_by_movement {
            None => table_mass(&self.tables.transition),
            Some(t) => {
                let w = self.tables.choice.weight(distance);
                w * table_mass(&t.pass) + (1.0 - w) * table_mass(&t.dribble)
            }
        }
    }

    /// Transition mass of the displacement bin holding `target − ball`.
    pub fn transition_at(&self, ball: Point, target: Point) -> f64 {
        self.transition_with(|t| transition_probability(ball, target, t), ball.distance(target))
    }

    /// Transition mass over a whole grid cell.
    pub fn transition_over_cell(&self, ball: Point, cell: &Cell, half_extent: Point) -> f64 {
        self.transition_with(|t| cell_mass(t, ball, cell, half_extent), ball.distance(cell.center))
    }

    pub fn bmos_value(&self, state: &SceneState, target: Point) -> Result<f64> {
        let s = score_probability(target, &self.tables.score, self.court);
        let c = self.control(FieldKind::Ppcf, state, target)?;
        Ok(s * c * self.transition_at(state.ball, target))
    }

    pub fn bimos_value(&self, state: &SceneState, target: Point) -> Result<f64> {
        let s = score_probability(target, &self.tables.score, self.court);
        Ok(s * self.control(FieldKind::Pbcf, state, target)?)
    }

    pub fn value(&self, kind: ModelKind, state: &SceneState, target: Point) -> Result<f64> {
        match kind {
            ModelKind::Bmos => self.bmos_value(state, target),
            ModelKind::Bimos => self.bimos_value(state, target),
        }
    }

    /// Model value for a grid cell; BMOS integrates the transition table over the cell.
    fn cell_value(&self, kind: ModelKind, state: &SceneState, grid: &CourtGrid, index: usize) -> Result<f64> {
        let cell = &grid.cells[index];
        match kind {
            ModelKind::Bimos => self.bimos_value(state, cell.center),
            ModelKind::Bmos => {
                let s = score_probability(cell.center, &self.tables.score, self.court);
                let c = self.control(FieldKind::Ppcf, state, cell.center)?;
                Ok(s * c * self.transition_over_cell(state.ball, cell, cell_half_extent(grid, index)))
            }
        }
    }
}

/// Half-widths of a (possibly clipped) grid cell.
fn cell_half_extent(grid: &CourtGrid, index: usize) -> Point {
    let (i, j) = (index % grid.n_x, index / grid.n_x);
    let w = (grid.court.half_length - i as f64 * grid.cell_size).min(grid.cell_size);
    let h = (grid.court.width - j as f64 * grid.cell_size).min(grid.cell_size);
    Point::new(0.5 * w, 0.5 * h)
}

/// Probability mass of the displacement rectangle covered by a cell, with
/// the table density uniform within each bin.
fn cell_mass(table: &TransitionTable, ball: Point, cell: &Cell, half: Point) -> f64 {
    let lo = cell.center - half - ball;
    let hi = cell.center + half - ball;
    let bw = table.bin_width;
    let i0 = (((lo.x - table.dx_min) / bw).floor().max(0.0)) as usize;
    let j0 = (((lo.y - table.dy_min) / bw).floor().max(0.0)) as usize;
    let i1 = (((hi.x - table.dx_min) / bw).ceil().max(0.0) as usize).min(table.n_dx);
    let j1 = (((hi.y - table.dy_min) / bw).ceil().max(0.0) as usize).min(table.n_dy);
    let mut mass = 0.0;
    for j in j0..j1 {
        let y0 = table.dy_min + j as f64 * bw;
        let oy = (hi.y.min(y0 + bw) - lo.y.max(y0)).max(0.0);
        if oy == 0.0 {
            continue;
        }
        for i in i0..i1 {
            let x0 = table.dx_min + i as f64 * bw;
            let ox = (hi.x.min(x0 + bw) - lo.x.max(x0)).max(0.0);
            mass += table.probabilities[j * table.n_dx + i] * ox * oy;
        }
    }
    mass / table.bin_area()
}

#[derive(Debug, Clone)]
pub struct Surface {
    pub field: Field,
    pub total: f64,
    pub diagnostics: Vec<CellDiagnostic>,
}

/// Model value over every grid cell and its sum.
pub fn aggregate_surface(ev: &Evaluator, state: &SceneState, grid: &CourtGrid, kind: ModelKind) -> Result<Surface> {
    ev.integration.validate()?;
    let evaluated: Vec<std::result::Result<f64, String>> = (0..grid.len())
        .into_par_iter()
        .map(|k| ev.cell_value(kind, state, grid, k).map_err(|e| e.to_string()))
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut diagnostics = Vec::new();
    for (cell, v) in evaluated.into_iter().enumerate() {
        match v {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                values.push(0.0);
                diagnostics.push(CellDiagnostic {
                    cell,
                    message: format!("non-finite value {v}"),
                });
            }
            Err(message) => {
                values.push(0.0);
                diagnostics.push(CellDiagnostic { cell, message });
            }
        }
    }
    let field = Field::new(grid.clone(), values)?;
    Ok(Surface {
        total: field.total(),
        field,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvaluation {
    pub scene_id: String,
    pub game_id: String,
    pub team_id: String,
    pub model_kind: ModelKind,
    pub movement: Movement,
    pub value_at_target: f64,
    pub expected_points: f64,
    pub actual_points: f64,
}

pub fn evaluate_scene(
    ev: &Evaluator,
    record: &TransitionRecord,
    kind: ModelKind,
    mode: ExpectationMode,
    grid: Option<&CourtGrid>,
) -> Result<SceneEvaluation> {
    if !ev.court.contains(record.target) {
        return Err(Error::Domain(format!("scene {}: target lies off the court", record.scene_id)));
    }
    let value = ev
        .value(kind, &record.state, record.target)
        .map_err(|e| Error::Domain(format!("scene {}: {e}", record.scene_id)))?;
    let expected_points = match mode {
        ExpectationMode::AtTarget => value * ev.court.point_value(record.target) as f64,
        ExpectationMode::Surface => {
            let grid = grid.ok_or_else(|| Error::config("surface expectation needs a grid"))?;
            let s = aggregate_surface(ev, &record.state, grid, kind)?;
            s.field
                .values
                .iter()
                .zip(&grid.cells)
                .map(|(v, c)| v * ev.court.point_value(c.center) as f64)
                .sum()
        }
    };
    Ok(SceneEvaluation {
        scene_id: record.scene_id.clone(),
        game_id: record.game_id.clone(),
        team_id: record.team_id.clone(),
        model_kind: kind,
        movement: record.movement,
        value_at_target: value,
        expected_points,
        actual_points: record.shot_points as f64,
    })
}

#[derive(Debug, Clone, Default)]
pub struct CorpusEvaluation {
    pub scenes: Vec<SceneEvaluation>,
    /// Scene ids that could not be evaluated, with the reason.
    pub failures: Vec<(String, String)>,
}

pub fn evaluate_corpus(
    ev: &Evaluator,
    corpus: &SceneCorpus,
    kind: ModelKind,
    mode: ExpectationMode,
    grid: Option<&CourtGrid>,
) -> CorpusEvaluation {
    let results: Vec<Result<SceneEvaluation>> = corpus
        .records
        .par_iter()
        .map(|r| evaluate_scene(ev, r, kind, mode, grid))
        .collect();
    let mut out = CorpusEvaluation::default();
    for (r, rec) in results.into_iter().zip(&corpus.records) {
        match r {
            Ok(e) => out.scenes.push(e),
            Err(e) => out.failures.push((rec.scene_id.clone(), e.to_string())),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTeamAggregate {
    pub game_id: String,
    pub team_id: String,
    pub actual_points: f64,
    pub expected_points: f64,
    pub sequence_filter: SequenceFilter,
}

/// Coefficient of determination of `expected` against the identity line.
pub fn r_squared(expected: &[f64], actual: &[f64]) -> Result<f64> {
    if expected.len() != actual.len() || actual.len() < 2 {
        return Err(Error::insufficient("R² needs at least two paired values"));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    let ss_res: f64 = expected.iter().zip(actual).map(|(e, a)| (e - a).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Numerical("R² undefined: actual totals have zero variance".into()));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Per-(game, team) sums under a sequence filter, ordered by (game, team).
pub fn aggregate_games(scenes: &[SceneEvaluation], filter: SequenceFilter) -> Result<Vec<GameTeamAggregate>> {
    let mut sums: BTreeMap<(&str, &str), (f64, f64)> = BTreeMap::new();
    for s in scenes.iter().filter(|s| filter.admits(s.movement)) {
        let e = sums.entry((&s.game_id, &s.team_id)).or_default();
        e.0 += s.actual_points;
        e.1 += s.expected_points;
    }
    if sums.is_empty() {
        return Err(Error::insufficient(format!("no scenes pass the {} filter", filter.as_str())));
    }
    Ok(sums
        .into_iter()
        .map(|((g, t), (actual, expected))| GameTeamAggregate {
            game_id: g.into(),
            team_id: t.into(),
            actual_points: actual,
            expected_points: expected,
            sequence_filter: filter,
        })
        .collect())
}

pub fn evaluate_games(scenes: &[SceneEvaluation], filter: SequenceFilter) -> Result<(Vec<GameTeamAggregate>, f64)> {
    let aggs = aggregate_games(scenes, filter)?;
    let e: Vec<f64> = aggs.iter().map(|a| a.expected_points).collect();
    let a: Vec<f64> = aggs.iter().map(|a| a.actual_points).collect();
    let r2 = r_squared(&e, &a)?;
    Ok((aggs, r2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub filter: SequenceFilter,
    pub aggregates: usize,
    pub scenes: usize,
    pub actual_points: f64,
    pub expected_points: f64,
    /// Absent when the filter leaves too few aggregates to define it.
    pub r_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_kind: ModelKind,
    pub expectation: ExpectationMode,
    pub summaries: Vec<FilterSummary>,
    pub aggregates: Vec<GameTeamAggregate>,
    pub failures: Vec<(String, String)>,
}

impl EvaluationReport {
    pub fn build(kind: ModelKind, mode: ExpectationMode, eval: &CorpusEvaluation) -> Result<Self> {
        let mut summaries = Vec::new();
        let mut all = Vec::new();
        for filter in SequenceFilter::ALL {
            let scenes = eval.scenes.iter().filter(|s| filter.admits(s.movement)).count();
            match evaluate_games(&eval.scenes, filter) {
                Ok((aggs, r2)) => {
                    summaries.push(summary(filter, scenes, &aggs, Some(r2), None));
                    if filter == SequenceFilter::All {
                        all = aggs;
                    }
                }
                Err(e) => {
                    let aggs = aggregate_games(&eval.scenes, filter).unwrap_or_default();
                    if filter == SequenceFilter::All && aggs.is_empty() {
                        return Err(e);
                    }
                    if filter == SequenceFilter::All {
                        all = aggs.clone();
                    }
                    summaries.push(summary(filter, scenes, &aggs, None, Some(e.to_string())));
                }
            }
        }
        Ok(EvaluationReport {
            model_kind: kind,
            expectation: mode,
            summaries,
            aggregates: all,
            failures: eval.failures.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn aggregates_csv(&self) -> String {
        let mut out = String::from("game_id,team_id,filter,actual_points,expected_points\n");
        for a in &self.aggregates {
            out.push_str(&format!(
                "{},{},{},{},{:.6}\n",
                a.game_id,
                a.team_id,
                a.sequence_filter.as_str(),
                a.actual_points,
                a.expected_points
            ));
        }
        out
    }
}

fn summary(filter: SequenceFilter, scenes: usize, aggs: &[GameTeamAggregate], r2: Option<f64>, note: Option<String>) -> FilterSummary {
    FilterSummary {
        filter,
        aggregates: aggs.len(),
        scenes,
        actual_points: aggs.iter().map(|a| a.actual_points).sum(),
        expected_points: aggs.iter().map(|a| a.expected_points).sum(),
        r_squared: r2,
        note,
    }
}

pub const PLAYER_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSummary {
    pub player_id: PlayerId,
    pub scenes: usize,
    /// Mean over scenes of the best expected points within reach of the player.
    pub mean_max_expected: f64,
    /// Mean actual points credited to the player per scene.
    pub mean_actual: f64,
}

/// Grid cells whose centers lie within the player radius, or the containing
/// cell when none does.
fn cells_near(grid: &CourtGrid, p: Point) -> Vec<usize> {
    let near: Vec<usize> = (0..grid.len())
        .filter(|&k| grid.cells[k].center.distance(p) <= PLAYER_RADIUS)
        .collect();
    if near.is_empty() {
        let clamped = Point::new(
            p.x.clamp(0.0, grid.court.half_length - 1e-9),
            p.y.clamp(0.0, grid.court.width - 1e-9),
        );
        grid.cell_index(clamped).into_iter().collect()
    } else {
        near
    }
}

/// Best expected points near each attacker in one scene.
pub fn scene_player_values(ev: &Evaluator, state: &SceneState, grid: &CourtGrid, kind: ModelKind) -> Vec<(PlayerId, f64)> {
    state
        .players
        .iter()
        .filter(|p| p.side == Side::Attack)
        .map(|p| {
            let best = cells_near(grid, p.position)
                .into_iter()
                .filter_map(|k| {
                    let v = ev.cell_value(kind, state, grid, k).ok()?;
                    Some(v * ev.court.point_value(grid.cells[k].center) as f64)
                })
                .fold(0.0, f64::max);
            (p.id.clone(), best)
        })
        .collect()
}

pub fn player_summary(
    ev: &Evaluator,
    corpus: &SceneCorpus,
    grid: &CourtGrid,
    kind: ModelKind,
    min_scenes: usize,
) -> Result<Vec<PlayerSummary>> {
    let per_scene: Vec<Vec<(PlayerId, f64)>> = corpus
        .records
        .par_iter()
        .map(|r| scene_player_values(ev, &r.state, grid, kind))
        .collect();
    let mut acc: BTreeMap<PlayerId, (usize, f64, f64)> = BTreeMap::new();
    for (rec, values) in corpus.records.iter().zip(per_scene) {
        for (id, v) in values {
            let credited = if rec.receiver.as_ref() == Some(&id) {
                rec.shot_points as f64
            } else {
                0.0
            };
            let e = acc.entry(id).or_default();
            e.0 += 1;
            e.1 += v;
            e.2 += credited;
        }
    }
    let mut out: Vec<PlayerSummary> = acc
        .into_iter()
        .filter(|(_, (n, _, _))| *n >= min_scenes.max(1))
        .map(|(player_id, (n, e, a))| PlayerSummary {
            player_id,
            scenes: n,
            mean_max_expected: e / n as f64,
            mean_actual: a / n as f64,
        })
        .collect();
    if out.is_empty() {
        return Err(Error::insufficient(format!("no player appears in {min_scenes} or more scenes")));
    }
    out.sort_by(|a, b| {
        b.mean_max_expected
            .total_cmp(&a.mean_max_expected)
            .then_with(|| a.player_id.cmp(&b.player_id))
    });
    Ok(out)
}

pub fn player_summary_csv(rows: &[PlayerSummary]) -> String {
    let mut out = String::from("player_id,scenes,mean_max_expected,mean_actual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            r.player_id, r.scenes, r.mean_max_expected, r.mean_actual
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::tests::{reference_params, sample_state, test_tables};
    use crate::control::{compute_pbcf, compute_ppcf, combine_components};
    use crate::empirical::ScoreModelParams;
    use crate::tracking::Outcome;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Ctx {
        court: CourtSpec,
        params: ModelParams,
        tables: EmpiricalTables,
        integration: IntegrationConfig,
    }

    impl Ctx {
        fn new() -> Self {
            Ctx {
                court: CourtSpec::default(),
                params: reference_params(),
                tables: test_tables(),
                integration: IntegrationConfig::default(),
            }
        }

        fn ev(&self) -> Evaluator<'_> {
            Evaluator {
                court: &self.court,
                params: &self.params,
                tables: &self.tables,
                integration: &self.integration,
            }
        }
    }

    /// Transition table concentrated on displacements towards the goal.
    fn peaked_tables() -> EmpiricalTables {
        let mut t = test_tables();
        let n = t.transition.probabilities.len();
        let mut p = vec![0.0; n];
        for (k, d) in [(-3.0, 0.0), (-2.0, 1.5), (-5.0, -2.0), (-1.0, 3.0)].iter().enumerate() {
            let b = t.transition.bin_of(Point::new(d.0, d.1)).unwrap();
            p[b] = [0.4, 0.3, 0.2, 0.1][k];
        }
        t.transition.probabilities = crate::empirical::gaussian_filter(&p, t.transition.n_dx, t.transition.n_dy, 0.4);
        t
    }

    #[test]
    fn bmos_is_the_product_of_its_factors() {
        let c = Ctx::new();
        let s = sample_state();
        let target = Point::new(5.0, 6.0);
        let ppcf = |m| compute_ppcf(&s, target, m, &c.params, &c.tables, &c.integration, &c.court).unwrap().attack_total;
        let control = combine_components(ppcf(Movement::Pass), ppcf(Movement::Dribble), s.ball.distance(target), &c.tables.choice);
        let score = c.tables.score.amplitude * (-c.tables.score.decay * c.court.distance_to_goal(target)).exp();
        let k = c.tables.transition.bin_of(target - s.ball).unwrap();
        let expected = score * control * c.tables.transition.probabilities[k];
        assert_eq!(c.ev().bmos_value(&s, target).unwrap(), expected);
    }

    #[test]
    fn bimos_is_the_product_of_its_factors() {
        let c = Ctx::new();
        let s = sample_state();
        let target = Point::new(3.0, 9.0);
        let pbcf = |m| compute_pbcf(&s, target, m, &c.params, &c.tables, &c.integration, &c.court).unwrap().attack_total;
        let control = combine_components(pbcf(Movement::Pass), pbcf(Movement::Dribble), s.ball.distance(target), &c.tables.choice);
        let score = c.tables.score.amplitude * (-c.tables.score.decay * c.court.distance_to_goal(target)).exp();
        assert_eq!(c.ev().bimos_value(&s, target).unwrap(), score * control);
    }

    #[test]
    fn trivial_factor_cases() {
        let mut c = Ctx::new();
        let s = sample_state();
        assert_eq!(c.ev().bimos_value(&s, s.ball).unwrap(), 0.0);
        c.tables.transition.probabilities.iter_mut().for_each(|p| *p = 0.0);
        assert_eq!(c.ev().bmos_value(&s, Point::new(4.0, 4.0)).unwrap(), 0.0);
        c.tables.score = ScoreModelParams {
            amplitude: 1.0,
            decay: 1e-300,
        };
        let target = Point::new(6.0, 3.0);
        let pbcf = |m| compute_pbcf(&s, target, m, &c.params, &c.tables, &c.integration, &c.court).unwrap().attack_total;
        let control = combine_components(pbcf(Movement::Pass), pbcf(Movement::Dribble), s.ball.distance(target), &c.tables.choice);
        assert_eq!(c.ev().bimos_value(&s, target).unwrap(), control);
    }

    #[test]
    fn cell_mass_integrates_bins() {
        let c = Ctx::new();
        let t = &c.tables.transition;
        let n = t.probabilities.len() as f64;
        let grid = CourtGrid::new(c.court, 1.0).unwrap();
        let ball = Point::new(7.1, 7.3);
        for k in [0, 17, 100] {
            let m = cell_mass(t, ball, &grid.cells[k], cell_half_extent(&grid, k));
            assert!((m - 4.0 / n).abs() < 1e-12, "{m}");
        }
        let last = grid.len() - 1;
        let half = cell_half_extent(&grid, last);
        assert!((4.0 * half.x * half.y - grid.cells[last].area).abs() < 1e-12);
    }

    #[test]
    fn bmos_surface_total_is_a_probability() {
        let mut c = Ctx::new();
        c.tables = peaked_tables();
        let s = sample_state();
        for size in [0.5, 1.0, 2.0] {
            let grid = CourtGrid::new(c.court, size).unwrap();
            let surf = aggregate_surface(&c.ev(), &s, &grid, ModelKind::Bmos).unwrap();
            assert!(surf.total >= 0.0 && surf.total <= 1.0, "{size}: {}", surf.total);
            assert!(surf.diagnostics.is_empty());
        }
    }

    #[test]
    fn surface_argmax_ignores_score_amplitude() {
        let mut c = Ctx::new();
        c.tables = peaked_tables();
        let s = sample_state();
        let grid = CourtGrid::new(c.court, 1.0).unwrap();
        let a = aggregate_surface(&c.ev(), &s, &grid, ModelKind::Bimos).unwrap().field.argmax().unwrap();
        c.tables.score.amplitude *= 0.3;
        let b = aggregate_surface(&c.ev(), &s, &grid, ModelKind::Bimos).unwrap().field.argmax().unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn unreachable_cells_give_zero_surface() {
        let mut c = Ctx::new();
        c.params.lambda = 1.0;
        c.params.kappa = 1.0;
        c.tables.residual = crate::kinematics::ResidualParams::new(0.0, 1e-6, 1e-6).unwrap();
        let mut s = sample_state();
        // Attackers pinned far away and a ball already at the possessor's feet.
        for p in s.players.iter_mut().filter(|p| p.side == Side::Attack) {
            p.position = Point::new(28.0, 15.0);
        }
        s.ball = Point::new(28.0, 15.0);
        let grid = CourtGrid::new(c.court, 2.0).unwrap();
        let surf = aggregate_surface(&c.ev(), &s, &grid, ModelKind::Bmos).unwrap();
        // The Lorentzian tail keeps every arrival probability strictly positive.
        assert!(surf.total < 1e-3, "{}", surf.total);
    }

    fn record(id: &str, game: &str, team: &str, movement: Movement, outcome: Outcome, points: u8, target: Point) -> TransitionRecord {
        let state = sample_state();
        let displacement = target - state.ball;
        TransitionRecord {
            scene_id: id.into(),
            game_id: game.into(),
            team_id: team.into(),
            movement,
            state,
            target,
            displacement,
            travel_distance: displacement.norm(),
            travel_time: 1.0,
            outcome,
            shot_points: points,
            receiver: Some(PlayerId("a1".into())),
            receiver_arrival: None,
        }
    }

    #[test]
    fn scene_evaluation_fields() {
        let c = Ctx::new();
        let three = record("s1", "g", "t", Movement::Pass, Outcome::Scored, 3, Point::new(8.0, 2.0));
        let e = evaluate_scene(&c.ev(), &three, ModelKind::Bimos, ExpectationMode::AtTarget, None).unwrap();
        assert_eq!(e.actual_points, 3.0);
        assert_eq!(e.expected_points, e.value_at_target * c.court.point_value(three.target) as f64);
        let lost = record("s2", "g", "t", Movement::Dribble, Outcome::Turnover, 0, Point::new(5.0, 5.0));
        assert_eq!(evaluate_scene(&c.ev(), &lost, ModelKind::Bmos, ExpectationMode::AtTarget, None).unwrap().actual_points, 0.0);
        let off = record("s3", "g", "t", Movement::Pass, Outcome::Missed, 0, Point::new(20.0, 5.0));
        match evaluate_scene(&c.ev(), &off, ModelKind::Bmos, ExpectationMode::AtTarget, None) {
            Err(Error::Domain(m)) => assert!(m.contains("s3")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn r_squared_definitions() {
        let a = [3.0, 7.0, 11.0, 2.0];
        assert_eq!(r_squared(&a, &a).unwrap(), 1.0);
        let mean = [5.75; 4];
        assert!(r_squared(&mean, &a).unwrap().abs() < 1e-15);
        assert!(r_squared(&[0.0, 0.0, 0.0, 0.0], &a).unwrap() < 0.0);
        assert!(matches!(r_squared(&[1.0, 2.0], &[4.0, 4.0]), Err(Error::Numerical(_))));
    }

    #[test]
    fn r_squared_under_known_noise() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let actual_dist = Normal::new(100.0, 10.0).unwrap();
        let noise = Normal::new(0.0, 5.0).unwrap();
        let analytic = 1.0 - 25.0 / 100.0;
        let trials: Vec<f64> = (0..20)
            .map(|_| {
                let a: Vec<f64> = (0..200).map(|_| actual_dist.sample(&mut rng)).collect();
                let e: Vec<f64> = a.iter().map(|x| x + noise.sample(&mut rng)).collect();
                r_squared(&e, &a).unwrap()
            })
            .collect();
        let mean = trials.iter().sum::<f64>() / trials.len() as f64;
        assert!((mean - analytic).abs() < 0.05, "{trials:?}");
        assert!(trials.iter().all(|r| (r - analytic).abs() < 0.15), "{trials:?}");
    }

    #[test]
    fn games_are_aggregated_by_game_and_team() {
        let scenes: Vec<SceneEvaluation> = [("g2", "b", Movement::Pass, 2.0, 0.5), ("g1", "a", Movement::Dribble, 3.0, 1.1), ("g1", "a", Movement::Pass, 0.0, 0.4), ("g1", "b", Movement::Pass, 2.0, 0.9)]
            .iter()
            .enumerate()
            .map(|(i, &(g, t, m, a, e))| SceneEvaluation {
                scene_id: format!("s{i}"),
                game_id: g.into(),
                team_id: t.into(),
                model_kind: ModelKind::Bmos,
                movement: m,
                value_at_target: e / 3.0,
                expected_points: e,
                actual_points: a,
            })
            .collect();
        let all = aggregate_games(&scenes, SequenceFilter::All).unwrap();
        let keys: Vec<(&str, &str)> = all.iter().map(|a| (a.game_id.as_str(), a.team_id.as_str())).collect();
        assert_eq!(keys, vec![("g1", "a"), ("g1", "b"), ("g2", "b")]);
        assert_eq!(all[0].actual_points, 3.0);
        assert!((all[0].expected_points - 1.5).abs() < 1e-12);
        assert_eq!(aggregate_games(&scenes, SequenceFilter::Dribble).unwrap().len(), 1);
        let none: Vec<SceneEvaluation> = scenes.iter().filter(|s| s.movement == Movement::Pass).cloned().collect();
        assert!(matches!(aggregate_games(&none, SequenceFilter::Dribble), Err(Error::InsufficientData(_))));
    }

    fn corpus_of(records: Vec<TransitionRecord>) -> SceneCorpus {
        SceneCorpus::from_records(records, crate::tracking::SplitLabel::All).unwrap()
    }

    #[test]
    fn player_summary_cases() {
        let c = Ctx::new();
        let grid = CourtGrid::new(c.court, 1.0).unwrap();
        let one = corpus_of(vec![record("s1", "g", "t", Movement::Pass, Outcome::Scored, 2, Point::new(4.0, 3.0))]);
        assert!(matches!(player_summary(&c.ev(), &one, &grid, ModelKind::Bimos, 2), Err(Error::InsufficientData(_))));
        let rows = player_summary(&c.ev(), &one, &grid, ModelKind::Bimos, 1).unwrap();
        assert_eq!(rows.len(), 5);
        let direct = scene_player_values(&c.ev(), &one.records[0].state, &grid, ModelKind::Bimos);
        for (id, v) in direct {
            let row = rows.iter().find(|r| r.player_id == id).unwrap();
            assert_eq!(row.mean_max_expected, v);
            assert_eq!(row.mean_actual, if id.0 == "a1" { 2.0 } else { 0.0 });
        }
    }

    #[test]
    fn player_at_the_argmax_tops_the_ranking() {
        let c = Ctx::new();
        let grid = CourtGrid::new(c.court, 1.0).unwrap();
        let base = sample_state();
        let surf = aggregate_surface(&c.ev(), &base, &grid, ModelKind::Bimos).unwrap();
        let points: Vec<f64> = surf
            .field
            .values
            .iter()
            .zip(&grid.cells)
            .map(|(v, cell)| v * c.court.point_value(cell.center) as f64)
            .collect();
        let best = (0..points.len()).max_by(|&a, &b| points[a].total_cmp(&points[b])).unwrap();
        let mut records = Vec::new();
        for k in 0..3 {
            let mut r = record(&format!("s{k}"), "g", "t", Movement::Pass, Outcome::Missed, 0, Point::new(4.0, 3.0));
            let star = r.state.players.iter_mut().find(|p| p.id.0 == "a3").unwrap();
            star.position = grid.cells[best].center;
            r.scene_id = format!("s{k}");
            records.push(r);
        }
        let rows = player_summary(&c.ev(), &corpus_of(records.clone()), &grid, ModelKind::Bimos, 1).unwrap();
        assert_eq!(rows[0].player_id.0, "a3");
        let doubled: Vec<TransitionRecord> = records
            .iter()
            .cloned()
            .chain(records.iter().cloned().map(|mut r| {
                r.scene_id.push_str("-copy");
                r
            }))
            .collect();
        let rows2 = player_summary(&c.ev(), &corpus_of(doubled), &grid, ModelKind::Bimos, 1).unwrap();
        let ids = |rs: &[PlayerSummary]| rs.iter().map(|r| r.player_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&rows), ids(&rows2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn bmos_total_bounded_for_random_states(seed in 0u64..1000) {
            let mut c = Ctx::new();
            c.tables = peaked_tables();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = sample_state();
            for p in &mut s.players {
                p.position = Point::new(rng.random_range(0.5..14.0), rng.random_range(0.5..14.7));
                p.velocity = Point::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            }
            s.ball = s.players[0].position;
            let grid = CourtGrid::new(c.court, 1.0).unwrap();
            let surf = aggregate_surface(&c.ev(), &s, &grid, ModelKind::Bmos).unwrap();
            prop_assert!(surf.total >= 0.0 && surf.total <= 1.0);
            prop_assert!(surf.field.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
