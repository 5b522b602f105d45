//! End-to-end steps behind the command-line tool: each takes parsed inputs
//! and an [`EngineConfig`] and returns serializable outputs.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EngineConfig, ModelArtifact};
use crate::court::{CourtGrid, CourtSpec};
use crate::empirical::fit_empirical_tables;
use crate::error::{Error, Result};
use crate::estimation::{apply_fallback, fit_model_parameters, FitReport, LikelihoodDataset};
use crate::oracle::{generate_synthetic_corpus, run_oracle_suite, OracleReport};
use crate::scoring::{
    aggregate_games, aggregate_surface, evaluate_corpus, player_summary, EvaluationReport, Evaluator, ModelKind,
    PlayerSummary, SequenceFilter, Surface,
};
use crate::tracking::{
    extract_terminal_transitions, filter_scenes, parse_scene_stream, split_train_test, Diagnostic, Outcome, SceneCorpus,
    Sequence, SplitLabel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: usize,
    pub sequences: usize,
    pub retained: usize,
    pub dropped: Vec<(String, String)>,
    pub records: usize,
    pub shots: usize,
    pub turnovers: usize,
    pub train_records: usize,
    pub test_records: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl IngestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ingest report serializes")
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub train: SceneCorpus,
    pub test: Option<SceneCorpus>,
    pub report: IngestReport,
}

/// Parses, filters, standardizes and extracts every input, given as
/// `(name, contents)` pairs. Malformed lines and scenes are reported, not fatal.
pub fn ingest(inputs: &[(String, String)], cfg: &EngineConfig) -> Result<IngestOutput> {
    let mut sequences = Vec::new();
    let mut diagnostics = Vec::new();
    for (name, text) in inputs {
        let out = parse_scene_stream(text.as_bytes()).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{name}: {message}"),
            },
            other => other,
        })?;
        let court = out.header.court;
        diagnostics.extend(out.diagnostics.into_iter().map(|mut d| {
            d.message = format!("{name}: {}", d.message);
            d
        }));
        sequences.extend(out.sequences.into_iter().map(|s| (court, s)));
    }
    let n_sequences = sequences.len();
    let (courts, seqs): (Vec<_>, Vec<Sequence>) = sequences.into_iter().unzip();
    let courts: HashMap<String, CourtSpec> =
        seqs.iter().zip(courts).map(|(s, c)| (s.meta.scene_id.clone(), c)).collect();
    let filtered = filter_scenes(seqs, &cfg.filter);
    let court_of = |id: &str| courts.get(id).copied().unwrap_or(cfg.court);
    let extracted: Vec<(Vec<_>, Vec<Diagnostic>)> = filtered
        .retained
        .par_iter()
        .map(|seq| match seq.standardize(&court_of(&seq.meta.scene_id)) {
            Ok(std) => extract_terminal_transitions(&std),
            Err(e) => (
                Vec::new(),
                vec![Diagnostic {
                    line: None,
                    scene_id: Some(seq.meta.scene_id.clone()),
                    message: e.to_string(),
                }],
            ),
        })
        .collect();
    let mut records = Vec::new();
    for (r, d) in extracted {
        records.extend(r);
        diagnostics.extend(d);
    }
    let all = SceneCorpus::from_records(records, SplitLabel::All)?;
    let shots = all.records.iter().filter(|r| r.outcome != Outcome::Turnover).count();
    let turnovers = all.records.len() - shots;
    let (train, test) = if cfg.test_games > 0 {
        let (train, test) = split_train_test(&all, cfg.test_games, cfg.seed)?;
        (train, Some(test))
    } else {
        (all.clone(), None)
    };
    let report = IngestReport {
        files: inputs.len(),
        sequences: n_sequences,
        retained: filtered.retained.len(),
        dropped: filtered.dropped,
        records: all.records.len(),
        shots,
        turnovers,
        train_records: train.records.len(),
        test_records: test.as_ref().map_or(0, |t| t.records.len()),
        diagnostics,
    };
    Ok(IngestOutput { train, test, report })
}

pub fn fit_empirical(corpus: &SceneCorpus, cfg: &EngineConfig) -> Result<ModelArtifact> {
    let tables = fit_empirical_tables(corpus, &cfg.court, &cfg.init, &cfg.empirical)?;
    Ok(ModelArtifact::new(cfg.court, cfg.init, tables))
}

/// Maximum-likelihood fit of one model's parameters, stored into a copy of
/// the artifact. A BMOS fit that fails to converge falls back to the BIMOS
/// parameters when the config allows it and the artifact has them.
pub fn fit_params(
    corpus: &SceneCorpus,
    artifact: &ModelArtifact,
    kind: ModelKind,
    cfg: &EngineConfig,
) -> Result<(ModelArtifact, FitReport)> {
    let dataset = LikelihoodDataset::sampled(&corpus.records, &cfg.caps);
    let ev = Evaluator {
        court: &artifact.court,
        params: &cfg.init,
        tables: &artifact.tables,
        integration: &cfg.integration,
    };
    let mut fit = fit_model_parameters(&dataset, kind, &cfg.init, &ev, &cfg.optimizer)?;
    if kind == ModelKind::Bmos && cfg.bmos_fallback {
        if let Some(bimos) = artifact.bimos {
            fit = apply_fallback(fit, &bimos, ModelKind::Bimos);
        }
    }
    let mut out = artifact.clone();
    out.set_params(kind, fit.params);
    Ok((out, fit.report))
}

fn evaluator<'a>(artifact: &'a ModelArtifact, kind: ModelKind, cfg: &'a EngineConfig) -> Evaluator<'a> {
    Evaluator {
        court: &artifact.court,
        params: artifact.params_for(kind),
        tables: &artifact.tables,
        integration: &cfg.integration,
    }
}

/// Surface for the frame nearest `at` in the named scene, or in the first
/// scene whose recording covers `at` when no id is given.
pub fn field(
    artifact: &ModelArtifact,
    scene_text: &str,
    scene_id: Option<&str>,
    at: f64,
    kind: ModelKind,
    cfg: &EngineConfig,
) -> Result<Surface> {
    let parsed = parse_scene_stream(scene_text.as_bytes())?;
    let seq = parsed
        .sequences
        .iter()
        .find(|s| scene_id.is_none_or(|id| s.meta.scene_id == id) && s.frame_at(at).is_some())
        .ok_or_else(|| match scene_id {
            Some(id) => Error::Domain(format!("scene {id} has no frame at t={at}")),
            None => Error::Domain(format!("no scene has a frame at t={at}")),
        })?;
    let court = parsed.header.court;
    let state = seq
        .frame_at(at)
        .expect("checked above")
        .standardized(&court, seq.meta.attack_direction)?;
    state.validate()?;
    let grid = CourtGrid::new(artifact.court, cfg.grid.cell_size)?;
    aggregate_surface(&evaluator(artifact, kind, cfg), &state, &grid, kind)
}

/// Game aggregates for `filter` with per-filter summaries for all filters.
pub fn evaluate(
    corpus: &SceneCorpus,
    artifact: &ModelArtifact,
    kind: ModelKind,
    filter: SequenceFilter,
    cfg: &EngineConfig,
) -> Result<EvaluationReport> {
    let grid = CourtGrid::new(artifact.court, cfg.grid.cell_size)?;
    let ev = evaluator(artifact, kind, cfg);
    let eval = evaluate_corpus(&ev, corpus, kind, cfg.expectation, Some(&grid));
    let mut report = EvaluationReport::build(kind, cfg.expectation, &eval)?;
    report.aggregates = aggregate_games(&eval.scenes, filter)?;
    Ok(report)
}

pub fn players(
    corpus: &SceneCorpus,
    artifact: &ModelArtifact,
    kind: ModelKind,
    min_scenes: usize,
    cfg: &EngineConfig,
) -> Result<Vec<PlayerSummary>> {
    let grid = CourtGrid::new(artifact.court, cfg.grid.cell_size)?;
    player_summary(&evaluator(artifact, kind, cfg), corpus, &grid, kind, min_scenes)
}

pub fn oracle(artifact: &ModelArtifact, samples: usize, seed: u64, cfg: &EngineConfig) -> Result<OracleReport> {
    run_oracle_suite(
        cfg.oracle.states,
        samples,
        seed,
        artifact.params_for(ModelKind::Bimos),
        &artifact.tables,
        &cfg.integration,
        &artifact.court,
    )
}

/// Scene files, one per game, named `<game_id>.scenes`.
pub fn synth(cfg: &EngineConfig) -> Result<Vec<(String, String)>> {
    let files = generate_synthetic_corpus(&cfg.synth)?;
    Ok(files.into_iter().map(|(game, text)| (format!("{game}.scenes"), text)).collect())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` to a path that must not exist yet unless `force` is set.
pub fn write_new(path: &Path, contents: &str, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::AlreadyExists, "output exists; pass --force to overwrite"),
        ));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Path of the resolved-config echo written beside an output file.
pub fn config_echo_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".config.toml");
    out.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SyntheticConfig;

    fn small_cfg() -> EngineConfig {
        let mut cfg = EngineConfig::default();
        cfg.synth = SyntheticConfig {
            scenes: 60,
            scenes_per_game: 20,
            seed: 3,
            ..SyntheticConfig::default()
        };
        cfg
    }

    #[test]
    fn ingest_counts_add_up() {
        let cfg = small_cfg();
        let files = synth(&cfg).unwrap();
        let out = ingest(&files, &cfg).unwrap();
        assert_eq!(out.report.files, 3);
        assert_eq!(out.report.sequences, 60);
        assert_eq!(out.report.records, 60);
        assert_eq!(out.report.shots + out.report.turnovers, 60);
        assert!(out.report.diagnostics.is_empty());
        assert!(out.test.is_none());
    }

    #[test]
    fn held_out_games_are_disjoint() {
        let mut cfg = small_cfg();
        cfg.test_games = 1;
        let out = ingest(&synth(&cfg).unwrap(), &cfg).unwrap();
        let test = out.test.unwrap();
        assert_eq!(test.game_ids.len(), 1);
        assert!(out.train.game_ids.iter().all(|g| !test.game_ids.contains(g)));
        assert_eq!(out.report.train_records + out.report.test_records, 60);
    }

    #[test]
    fn corrupted_file_header_is_fatal() {
        let cfg = small_cfg();
        let err = ingest(&[("bad".into(), "not a scene file\n".into())], &cfg).unwrap_err();
        assert_eq!(err.class(), crate::ErrorClass::Data);
    }

    #[test]
    fn write_once_refuses_existing_output() {
        let dir = std::env::temp_dir().join(format!("offball-write-{}", std::process::id()));
        let path = dir.join("a.txt");
        let _ = fs::remove_dir_all(&dir);
        write_new(&path, "one", false).unwrap();
        assert!(write_new(&path, "two", false).is_err());
        assert_eq!(read_text(&path).unwrap(), "one");
        write_new(&path, "two", true).unwrap();
        assert_eq!(read_text(&path).unwrap(), "two");
        fs::remove_dir_all(&dir).unwrap();
        assert_eq!(config_echo_path(Path::new("out/x.toml")), Path::new("out/x.toml.config.toml"));
    }
}
