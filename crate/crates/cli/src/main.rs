use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use gasforge::bench::{
    emit_report, full_grid, load_dataset, load_specs, parse_report, prepare, run_matrix, run_trial, synthetic_period,
    write_fee_paths, write_loss_curve, write_period, write_predictions, ExperimentSpec, PredictorSpec, ReportFormat,
    SimulationConfig, SyntheticPeriodSpec,
};
use gasforge::features::{align_sentiment, build_windows, export_dataset, import_dataset, SentimentFlags};
use gasforge::fee::{simulate_proactive, simulate_reactive_on_demand, DemandKind, MechanismParams};
use gasforge::ingest::{export_blocks, import_blocks, FileFormat, IngestSource, RpcClient};
use gasforge::models::{
    alpha_chain, audit, load_model, mse, save_model, AuditContexts, AuditRow, ModelRegistry, Regressor,
};
use gasforge::sentiment::{
    aggregate, export_scores, export_series, import_scores, import_series, parse_chat_export, score_messages, Interval,
    LexiconScorer,
};

#[derive(Parser)]
#[command(
    name = "gasforge",
    version,
    about = "Gas-demand datasets, forecasters and base-fee simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch blocks over JSON-RPC, or check and convert a block file.
    Ingest {
        #[arg(long, conflicts_with = "file", requires_all = ["from", "to", "out"])]
        rpc: Option<String>,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long)]
        file: Option<PathBuf>,
        /// CSV, or JSONL for `.jsonl`/`.ndjson`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build lagged feature windows, optionally with aligned sentiment.
    Featurize {
        #[arg(long)]
        blocks: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        hourly: Option<PathBuf>,
        #[arg(long)]
        daily: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score chat messages and aggregate them per hour or day.
    Sentiment {
        /// Chat export JSON (lexicon scorer).
        #[arg(long)]
        chat: Option<PathBuf>,
        /// Score CSV `timestamp,p_pos,p_neg,p_neu` (file scorer).
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ScorerArg::Lexicon)]
        scorer: ScorerArg,
        #[arg(long, default_value = "hour")]
        interval: Interval,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-message scores.
        #[arg(long)]
        scores_out: Option<PathBuf>,
    },
    /// Train one model on the first experiment of a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Trial index; the seed is `base_seed + trial`.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        loss_curve: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Monotonicity audit over the α chain (NAM models only).
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Test MSE of a saved model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "blocks")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        blocks: Option<PathBuf>,
        #[arg(long)]
        hourly: Option<PathBuf>,
        #[arg(long)]
        daily: Option<PathBuf>,
        /// Score only the windows after this chronological fraction.
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Run an experiment matrix and write the report. Exits non-zero if any
    /// cell fails.
    Matrix {
        /// JSON experiment spec or array of specs.
        #[arg(long, required_unless_present = "synthetic")]
        config: Option<PathBuf>,
        /// Generate the two synthetic periods into this directory and run the
        /// full 2 x 3 x 4 grid; `--config`, when given, supplies the training
        /// fields of every cell.
        #[arg(long)]
        synthetic: Option<PathBuf>,
        #[arg(long, default_value_t = 6_000)]
        synthetic_blocks: usize,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the output extension.
        #[arg(long)]
        format: Option<ReportFormat>,
    },
    /// Simulate one fee mechanism on a synthetic demand path.
    Simulate {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reactive vs proactive on the same demand path.
    Compare {
        #[arg(long)]
        params: PathBuf,
        /// Overrides the config's predictor: `perfect-foresight`, `zero`,
        /// `persistence` or a model file.
        #[arg(long)]
        predictor: Option<PredictorSpec>,
        #[arg(long)]
        out: PathBuf,
        /// Per-block fee and load of both runs.
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Convert a CSV or JSON report to another format.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        format: Option<ReportFormat>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScorerArg {
    Lexicon,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Reactive,
    Proactive,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Ingest {
            rpc,
            from,
            to,
            file,
            out,
        } => {
            let seq = match (rpc, file) {
                (Some(url), None) => RpcClient::http(&url).fetch_range(from.unwrap_or(0), to.unwrap_or(0))?,
                (None, Some(path)) => import_blocks(&IngestSource::infer(&path.to_string_lossy())?)?,
                _ => bail!("give either --rpc with --from/--to/--out, or --file"),
            };
            if let (Some(first), Some(last)) = (seq.first(), seq.last()) {
                println!("{} blocks, {} to {}", seq.len(), first.block_number, last.block_number);
            }
            if let Some(out) = out {
                export_blocks(&seq, &out, FileFormat::from_path(&out))?;
            }
        }
        Command::Featurize {
            blocks,
            k,
            hourly,
            daily,
            out,
        } => {
            let seq = import_blocks(&IngestSource::infer(&blocks.to_string_lossy())?)?;
            let windows = build_windows(&seq, k, &MechanismParams::default())?;
            let hourly = hourly.map(|p| import_series(&p, Interval::Hour)).transpose()?;
            let daily = daily.map(|p| import_series(&p, Interval::Day)).transpose()?;
            let flags = SentimentFlags {
                use_hour_sentiment: hourly.is_some(),
                use_day_sentiment: daily.is_some(),
            };
            let aligned = align_sentiment(&windows, hourly.as_ref(), daily.as_ref(), flags)?;
            export_dataset(&aligned.dataset, &out)?;
            println!(
                "{} windows ({flags}), {} dropped",
                aligned.dataset.len(),
                aligned.dropped
            );
        }
        Command::Sentiment {
            chat,
            scores,
            scorer,
            interval,
            out,
            scores_out,
        } => {
            let scored = match (scorer, chat, scores) {
                (ScorerArg::Lexicon, Some(chat), None) => {
                    score_messages(&parse_chat_export(&chat)?, &LexiconScorer::default())?
                }
                (ScorerArg::File, None, Some(scores)) => import_scores(&scores)?,
                (ScorerArg::Lexicon, ..) => bail!("the lexicon scorer reads --chat"),
                (ScorerArg::File, ..) => bail!("the file scorer reads --scores"),
            };
            if let Some(path) = scores_out {
                export_scores(&scored, &path)?;
            }
            let series = aggregate(&scored, interval);
            export_series(&series, &out)?;
            println!("{} messages in {} {interval} chunks", scored.len(), series.len());
        }
        Command::Train {
            config,
            out,
            trial,
            loss_curve,
            predictions,
            audit: audit_out,
        } => {
            let spec = load_specs(&config)?
                .into_iter()
                .next()
                .context("config holds no experiment")?;
            let dataset = load_dataset(&spec)?;
            let prepared = prepare(&dataset, spec.train_fraction)?;
            let seed = spec.base_seed.wrapping_add(trial);
            let outcome = run_trial(
                &prepared,
                &spec.model,
                &spec.train,
                seed,
                &ModelRegistry::with_builtins(),
            )?;
            save_model(&outcome.trained, &out)?;
            println!("{} seed {seed}: test mse {}", spec.model, outcome.test_mse);
            if let Some(m) = &outcome.fitted.monotonic {
                println!(
                    "monotonicity: violation {} after {} penalized epochs",
                    m.total_violation, m.step_two_epochs
                );
            }
            if let Some(path) = loss_curve {
                write_loss_curve(&outcome.fitted.loss_curve, create(&path)?)?;
            }
            if let Some(path) = predictions {
                write_predictions(&prepared.test, &outcome.predictions, create(&path)?)?;
            }
            if let Some(path) = audit_out {
                write_audit(&outcome.trained.model, &prepared, &spec, seed, &path)?;
            }
        }
        Command::Evaluate {
            model,
            dataset,
            blocks,
            hourly,
            daily,
            train_fraction,
            predictions,
        } => {
            let trained = load_model(&model)?;
            let data = match (dataset, blocks) {
                (Some(path), None) => import_dataset(&path)?,
                (None, Some(blocks)) => load_dataset(&ExperimentSpec {
                    dataset: None,
                    blocks: Some(blocks),
                    hourly,
                    daily,
                    ..spec_for(&trained.layout)
                })?,
                _ => bail!("give --dataset or --blocks"),
            };
            if data.layout() != trained.layout {
                bail!(
                    "model expects k = {} and `{}`, data has k = {} and `{}`",
                    trained.layout.k,
                    trained.layout.flags,
                    data.k(),
                    data.flags()
                );
            }
            let test = match train_fraction {
                Some(f) => gasforge::features::chronological_split(&data, f)?.1,
                None => data,
            };
            let (x, y) = trained.scaler.design_matrix(&test);
            let predicted = trained.model.predict(&x)?;
            println!("{} windows, mse {}", y.len(), mse(&predicted, &y)?);
            if let Some(path) = predictions {
                write_predictions(&test, &predicted, create(&path)?)?;
            }
        }
        Command::Matrix {
            config,
            synthetic,
            synthetic_blocks,
            out,
            format,
        } => {
            let specs = match synthetic {
                Some(dir) => {
                    let template = match &config {
                        Some(path) => load_specs(path)?
                            .into_iter()
                            .next()
                            .context("config holds no experiment")?,
                        None => ExperimentSpec {
                            trials: 2,
                            ..spec_for(&gasforge::features::DatasetLayout {
                                k: 1,
                                flags: SentimentFlags::ONCHAIN_ONLY,
                            })
                        },
                    };
                    std::fs::create_dir_all(&dir)?;
                    let mut periods = Vec::new();
                    for (i, (label, kind)) in [
                        ("Period 1", DemandKind::Spike),
                        ("Period 2", DemandKind::Autoregressive),
                    ]
                    .iter()
                    .enumerate()
                    {
                        let spec = SyntheticPeriodSpec::new(*label, *kind, 11 + i as u64, synthetic_blocks);
                        let period = synthetic_period(&spec, &template.mechanism)?;
                        periods.push((
                            label.to_string(),
                            write_period(&period, &dir, &format!("period{}", i + 1))?,
                        ));
                    }
                    full_grid(&periods, &template)
                }
                None => load_specs(config.as_deref().context("--config is required")?)?,
            };
            let outcome = run_matrix(&specs)?;
            for cell in outcome.failures() {
                if let Err(e) = &cell.result {
                    eprintln!("failed: {e}");
                }
            }
            let rows = outcome.rows();
            if !rows.is_empty() {
                emit_report(&rows, &out, format.unwrap_or_else(|| ReportFormat::from_path(&out)))?;
            }
            println!("{} of {} cells succeeded", rows.len(), outcome.cells.len());
            return Ok(outcome.all_succeeded());
        }
        Command::Simulate { mode, params, out } => {
            let config = SimulationConfig::load(&params)?;
            let trajectory = match mode {
                Mode::Reactive => {
                    let demand = config.demand.build()?;
                    simulate_reactive_on_demand(&demand, &config.mechanism, config.horizon(), config.initial_fee)?
                }
                Mode::Proactive => {
                    if let PredictorSpec::PerfectForesight = config.predictor {
                        let demand = config.demand.build()?;
                        let oracle =
                            gasforge::fee::PerfectForesight::new(&demand, config.mechanism, config.initial_fee);
                        simulate_proactive(
                            &demand,
                            &oracle,
                            &config.mechanism,
                            config.horizon(),
                            config.initial_fee,
                        )?
                    } else {
                        config.compare()?.proactive
                    }
                }
            };
            trajectory.save_csv(&out)?;
            println!("{} blocks simulated", trajectory.len());
        }
        Command::Compare {
            params,
            predictor,
            out,
            paths,
        } => {
            let mut config = SimulationConfig::load(&params)?;
            if let Some(p) = predictor {
                config.predictor = p;
            }
            let comparison = config.compare()?;
            let r = &comparison.report;
            println!(
                "mean |y|: reactive {:.6}, proactive {:.6}",
                r.reactive.mean_abs_load, r.proactive.mean_abs_load
            );
            std::fs::write(&out, serde_json::to_string_pretty(r)? + "\n")?;
            if let Some(path) = paths {
                write_fee_paths(&comparison.reactive, &comparison.proactive, create(&path)?)?;
            }
            if r.shift_by_one == Some(false) {
                eprintln!("perfect-foresight run is not the reactive run shifted by one block");
                return Ok(false);
            }
        }
        Command::Report { input, out, format } => {
            let rows = parse_report(&input, ReportFormat::from_path(&input))?;
            emit_report(&rows, &out, format.unwrap_or_else(|| ReportFormat::from_path(&out)))?;
        }
    }
    Ok(true)
}

/// Defaults for everything but the layout.
fn spec_for(layout: &gasforge::features::DatasetLayout) -> ExperimentSpec {
    ExperimentSpec {
        period: "cli".into(),
        dataset: None,
        blocks: None,
        hourly: None,
        daily: None,
        k: layout.k,
        use_onchain: true,
        use_day_sentiment: layout.flags.use_day_sentiment,
        use_hour_sentiment: layout.flags.use_hour_sentiment,
        model: "nam-monotonic".into(),
        trials: 5,
        base_seed: 0,
        train_fraction: 0.8,
        train: Default::default(),
        mechanism: MechanismParams::default(),
    }
}

fn write_audit(
    model: &gasforge::models::Model,
    prepared: &gasforge::bench::Prepared,
    spec: &ExperimentSpec,
    seed: u64,
    path: &Path,
) -> Result<()> {
    let constraints = alpha_chain(&prepared.layout);
    if constraints.is_empty() {
        bail!("k = {} has no α pair to audit", prepared.layout.k);
    }
    let cfg = &spec.train;
    let contexts = AuditContexts::sample(&prepared.x_train, cfg.grid_points, cfg.contexts, seed)?;
    let mut rows: Vec<AuditRow> = Vec::new();
    for c in constraints {
        rows.extend(audit(model, c, cfg.grid_points, cfg.step, &contexts)?);
    }
    AuditRow::save_csv(&rows, path)?;
    Ok(())
}
