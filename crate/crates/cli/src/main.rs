use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use offball_core::config::{EngineConfig, ModelArtifact};
use offball_core::pipeline::{self, config_echo_path, read_text, write_new};
use offball_core::oracle::SyntheticTruth;
use offball_core::scoring::{player_summary_csv, ModelKind, SequenceFilter};
use offball_core::tracking::SceneCorpus;
use offball_core::{Error, ErrorClass};

const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "offball", version, about = "Off-ball scoring opportunity surfaces from tracking scenes")]
struct Cli {
    /// Engine configuration (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, filter and extract scene files into a corpus.
    Ingest {
        #[arg(required = true)]
        scenes: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Hold out this many games into a separate test corpus.
        #[arg(long)]
        test_games: Option<usize>,
        /// Test corpus path; defaults to `<out>.test.json`.
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Fit transition, score, speed, choice and residual models.
    FitEmpirical {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximum-likelihood fit of the physical parameters.
    FitParams {
        corpus: PathBuf,
        artifact: PathBuf,
        #[command(flatten)]
        model: ModelSel,
        #[arg(long)]
        out: PathBuf,
    },
    /// Model surface over the court for one frame.
    Field {
        artifact: PathBuf,
        scene: PathBuf,
        #[command(flatten)]
        model: ModelSel,
        /// Frame timestamp, seconds.
        #[arg(long)]
        at: f64,
        #[arg(long)]
        scene_id: Option<String>,
        #[arg(long)]
        cell_size: Option<f64>,
        /// Output format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expected versus actual points per game and team.
    Evaluate {
        corpus: PathBuf,
        artifact: PathBuf,
        #[command(flatten)]
        model: ModelSel,
        #[arg(long, value_enum, default_value_t = FilterArg::All)]
        filter: FilterArg,
        /// JSON report.
        #[arg(long)]
        out: PathBuf,
        /// Aggregates table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Per-player expected and actual points.
    Players {
        corpus: PathBuf,
        artifact: PathBuf,
        #[command(flatten)]
        model: ModelSel,
        #[arg(long, default_value_t = 1)]
        min_scenes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo check of the integrated control fields.
    Oracle {
        artifact: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic scene corpus, one file per game.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        scenes: Option<usize>,
        /// Generate under this artifact's tables and parameters instead of the configured truth.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ModelSel {
    #[arg(long, value_enum, default_value_t = ModelArg::Bimos)]
    model: ModelArg,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    Bmos,
    Bimos,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Bmos => ModelKind::Bmos,
            ModelArg::Bimos => ModelKind::Bimos,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FilterArg {
    All,
    Pass,
    Dribble,
}

impl From<FilterArg> for SequenceFilter {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::All => SequenceFilter::All,
            FilterArg::Pass => SequenceFilter::Pass,
            FilterArg::Dribble => SequenceFilter::Dribble,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Csv,
    Json,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Configuration => 3,
        ErrorClass::Data => 4,
        ErrorClass::Numerical => 5,
        ErrorClass::Io => 6,
    }
}

fn load_config(cli: &Cli) -> offball_core::Result<EngineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => EngineConfig::from_toml(&read_text(p)?)?,
        None => EngineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.synth.seed = seed;
        cfg.caps.seed = seed;
    }
    Ok(cfg)
}

fn load_corpus(path: &Path) -> offball_core::Result<SceneCorpus> {
    SceneCorpus::from_json(&read_text(path)?)
}

fn load_artifact(path: &Path) -> offball_core::Result<ModelArtifact> {
    ModelArtifact::from_toml(&read_text(path)?)
}

/// Writes an output together with the resolved-config echo beside it.
fn emit(path: &Path, contents: &str, cfg: &EngineConfig, force: bool) -> offball_core::Result<()> {
    write_new(path, contents, force)?;
    write_new(&config_echo_path(path), &cfg.to_toml(), force)
}

fn run(cli: Cli) -> offball_core::Result<()> {
    let mut cfg = load_config(&cli)?;
    let force = cli.force;
    match cli.command {
        Command::Ingest {
            scenes,
            out,
            test_games,
            test_out,
        } => {
            if let Some(n) = test_games {
                cfg.test_games = n;
            }
            cfg.validate()?;
            let inputs = scenes
                .iter()
                .map(|p| Ok((p.display().to_string(), read_text(p)?)))
                .collect::<offball_core::Result<Vec<_>>>()?;
            let result = pipeline::ingest(&inputs, &cfg)?;
            let r = &result.report;
            for d in &r.diagnostics {
                eprintln!("warning: {d}");
            }
            for (id, why) in &r.dropped {
                eprintln!("dropped scene {id}: {why}");
            }
            eprintln!(
                "{} files, {} sequences, {} retained, {} records ({} shots, {} turnovers)",
                r.files, r.sequences, r.retained, r.records, r.shots, r.turnovers
            );
            emit(&out, &result.train.to_json(), &cfg, force)?;
            let mut report_path = out.clone().into_os_string();
            report_path.push(".report.json");
            write_new(Path::new(&report_path), &r.to_json(), force)?;
            if let Some(test) = &result.test {
                let path = test_out.unwrap_or_else(|| {
                    let mut p = out.clone().into_os_string();
                    p.push(".test.json");
                    p.into()
                });
                write_new(&path, &test.to_json(), force)?;
                eprintln!("held out {} games ({} records)", test.game_ids.len(), test.records.len());
            }
        }
        Command::FitEmpirical { corpus, out } => {
            cfg.validate()?;
            let corpus = load_corpus(&corpus)?;
            let artifact = pipeline::fit_empirical(&corpus, &cfg)?;
            let t = &artifact.tables;
            eprintln!(
                "score amplitude {:.4} decay {:.4}; residual x0 {:.4} left {:.4} right {:.4}",
                t.score.amplitude, t.score.decay, t.residual.location, t.residual.gamma_left, t.residual.gamma_right
            );
            emit(&out, &artifact.to_toml(), &cfg, force)?;
        }
        Command::FitParams {
            corpus,
            artifact,
            model,
            out,
        } => {
            cfg.validate()?;
            let corpus = load_corpus(&corpus)?;
            let artifact = load_artifact(&artifact)?;
            let kind = model.model.into();
            let (fitted, report) = pipeline::fit_params(&corpus, &artifact, kind, &cfg)?;
            let p = fitted.params_for(kind);
            eprintln!(
                "{}: accel {:.4} lambda {:.4} kappa {:.4} rt_att {:.4} rt_def {:.4}; log-likelihood {:.4} -> {:.4}, converged {}",
                kind.as_str(),
                p.accel,
                p.lambda,
                p.kappa,
                p.reaction_attacker,
                p.reaction_defender,
                report.initial_log_likelihood,
                report.final_log_likelihood,
                report.converged
            );
            if !report.unidentified.is_empty() {
                eprintln!("warning: weakly identified parameters: {}", report.unidentified.join(", "));
            }
            if let Some(from) = report.fallback_from {
                eprintln!("warning: fit did not converge; using {} parameters", from.as_str());
            }
            emit(&out, &fitted.to_toml(), &cfg, force)?;
            let mut rp = out.clone().into_os_string();
            rp.push(".fit.json");
            write_new(Path::new(&rp), &report.to_json(), force)?;
        }
        Command::Field {
            artifact,
            scene,
            model,
            at,
            scene_id,
            cell_size,
            format,
            out,
        } => {
            if let Some(c) = cell_size {
                cfg.grid.cell_size = c;
            }
            cfg.validate()?;
            let artifact = load_artifact(&artifact)?;
            let text = read_text(&scene)?;
            let surface = pipeline::field(&artifact, &text, scene_id.as_deref(), at, model.model.into(), &cfg)?;
            for d in &surface.diagnostics {
                eprintln!("warning: cell {}: {}", d.cell, d.message);
            }
            eprintln!("total {:.6} over {} cells", surface.total, surface.field.values.len());
            let format = format.unwrap_or(match out.extension().and_then(|e| e.to_str()) {
                Some("json") => Format::Json,
                _ => Format::Csv,
            });
            let body = match format {
                Format::Csv => surface.field.to_csv(),
                Format::Json => surface.field.to_json(),
            };
            emit(&out, &body, &cfg, force)?;
        }
        Command::Evaluate {
            corpus,
            artifact,
            model,
            filter,
            out,
            csv,
        } => {
            cfg.validate()?;
            let corpus = load_corpus(&corpus)?;
            let artifact = load_artifact(&artifact)?;
            let report = pipeline::evaluate(&corpus, &artifact, model.model.into(), filter.into(), &cfg)?;
            for (id, why) in &report.failures {
                eprintln!("warning: scene {id}: {why}");
            }
            for s in &report.summaries {
                match s.r_squared {
                    Some(r2) => eprintln!("{}: {} aggregates, R^2 {:.4}", s.filter.as_str(), s.aggregates, r2),
                    None => eprintln!(
                        "{}: {} aggregates, R^2 undefined ({})",
                        s.filter.as_str(),
                        s.aggregates,
                        s.note.as_deref().unwrap_or("")
                    ),
                }
            }
            emit(&out, &report.to_json(), &cfg, force)?;
            if let Some(csv) = csv {
                write_new(&csv, &report.aggregates_csv(), force)?;
            }
        }
        Command::Players {
            corpus,
            artifact,
            model,
            min_scenes,
            out,
        } => {
            cfg.validate()?;
            let corpus = load_corpus(&corpus)?;
            let artifact = load_artifact(&artifact)?;
            let rows = pipeline::players(&corpus, &artifact, model.model.into(), min_scenes, &cfg)?;
            eprintln!("{} players with at least {min_scenes} scenes", rows.len());
            emit(&out, &player_summary_csv(&rows), &cfg, force)?;
        }
        Command::Oracle {
            artifact,
            samples,
            states,
            out,
        } => {
            if let Some(n) = samples {
                cfg.oracle.samples = n;
            }
            if let Some(n) = states {
                cfg.oracle.states = n;
            }
            cfg.validate()?;
            let artifact = load_artifact(&artifact)?;
            let report = pipeline::oracle(&artifact, cfg.oracle.samples, cfg.seed, &cfg)?;
            let failed = report.cases.iter().filter(|c| !c.pass).count();
            eprintln!(
                "{} cases, {failed} outside tolerance, max difference {:.4}",
                report.cases.len(),
                report.max_abs_difference
            );
            emit(&out, &report.to_json(), &cfg, force)?;
        }
        Command::Synth { out, scenes, artifact } => {
            if let Some(n) = scenes {
                cfg.synth.scenes = n;
            }
            if let Some(path) = artifact {
                let a = load_artifact(&path)?;
                cfg.synth.truth = SyntheticTruth::from_tables(*a.params_for(cfg.synth.generating_model), &a.tables);
                cfg.synth.court = a.court;
            }
            cfg.validate()?;
            let files = pipeline::synth(&cfg)?;
            if !force && out.read_dir().is_ok_and(|mut d| d.next().is_some()) {
                return Err(Error::Io {
                    path: out.display().to_string(),
                    source: std::io::Error::new(
                        std::io::ErrorKind::AlreadyExists,
                        "output directory is not empty; pass --force to overwrite",
                    ),
                });
            }
            for (name, text) in &files {
                write_new(&out.join(name), text, force)?;
            }
            write_new(&out.join("config.toml"), &cfg.to_toml(), force)?;
            eprintln!("wrote {} scenes in {} files to {}", cfg.synth.scenes, files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(3);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
