use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use appraisal::config::{config_schema, PipelineConfig};
use appraisal::dataset::Segment;
use appraisal::evaluation::ModelRecipe;
use appraisal::pipeline::{self, Collected, Outputs, SavedModel, SelectionOutcome};
use appraisal::report::{self, Bundle, PredictionRow, ReportFormat};
use appraisal::rng::derive_seed;
use appraisal::synth::{synth_generate, SynthSpec};
use appraisal::Error;

#[derive(Parser)]
#[command(name = "appraisal", version, about = "Mass appraisal pipeline for land parcels and flats")]
struct Cli {
    /// Pipeline configuration (JSON). Relative paths inside it resolve
    /// against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log level: error, warn, info, debug.
    #[arg(long, global = true, default_value = "warn")]
    log: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw records and report rejects.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with its planted truth.
    Synth {
        #[arg(long, value_enum, default_value = "land-parcel")]
        segment: SegmentArg,
        #[arg(long, default_value_t = 3000)]
        n: usize,
        /// Full generator spec (JSON); overrides --segment and --n.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Remove outliers from a record file.
    Clean {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Build the feature table from a record file.
    Features {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Correlation screen, F scores and recursive elimination.
    Select {
        #[arg(long)]
        features: PathBuf,
    },
    FitOls(FitArgs),
    FitRk(FitArgs),
    FitRulefit(FitArgs),
    FitForest(FitArgs),
    /// Apply a saved OLS or RuleFit model to a feature table.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Hold-out and cross-validated metrics for the configured models.
    Evaluate(FitArgs),
    /// Render text tables and plot data from a run's bundle.json.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        format: ReportFormat,
    },
    /// Run every stage.
    Run,
    /// Print the configuration JSON schema.
    Schema,
}

#[derive(clap::Args)]
struct FitArgs {
    #[arg(long)]
    features: PathBuf,
    /// selected.json from the select command; restricts the linear models.
    #[arg(long)]
    selected: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SegmentArg {
    LandParcel,
    Flat,
}

enum Failure {
    Usage(String),
    Stage(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            e => Failure::Stage(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().filter_level(cli.log).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut config = match &cli.config {
        Some(p) => {
            let mut c = PipelineConfig::from_file(p).map_err(|e| Failure::Usage(e.to_string()))?;
            c.resolve_paths(p.parent().unwrap_or(Path::new(".")));
            c
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.output = o.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Schema => {
            let schema = config_schema()?;
            // a closed pipe (`appraisal schema | head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{schema}");
            Ok(())
        }
        Command::Run => {
            let m = pipeline::run_pipeline(&config)?;
            println!("{} files written to {}", m.files.len(), config.output.display());
            Ok(())
        }
        Command::Synth { segment, n, spec } => {
            let spec = match spec {
                Some(p) => {
                    let s = std::fs::read_to_string(&p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&s).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
                }
                None => match segment {
                    SegmentArg::LandParcel => SynthSpec::land(n),
                    SegmentArg::Flat => SynthSpec::flats(n),
                },
            };
            let data = synth_generate(&spec, config.seed)?;
            let files = data.write_to_dir(&config.output)?;
            println!("{} files written to {}", files.len(), config.output.display());
            Ok(())
        }
        Command::Ingest { input } => {
            if let Some(i) = input {
                config.input.records = i;
            }
            standalone(&config, |out| pipeline::stage_collect(&config, out).map(|_| ()))
        }
        Command::Clean { input } => {
            if let Some(i) = input {
                config.input.records = i;
            }
            standalone(&config, |out| {
                let c = pipeline::stage_collect(&config, out)?;
                pipeline::stage_outliers(&c.records, &config, out).map(|_| ())
            })
        }
        Command::Features { input } => {
            if let Some(i) = input {
                config.input.records = i;
            }
            standalone(&config, |out| {
                let c: Collected = pipeline::stage_collect(&config, out)?;
                pipeline::stage_features(&c.records, &c, &config, out).map(|_| ())
            })
        }
        Command::Select { features } => standalone(&config, |out| {
            let table = pipeline::load_table(&features)?;
            pipeline::stage_selection(&table, &config, out).map(|_| ())
        }),
        Command::FitOls(a) => fit_one(&config, &a, "ols"),
        Command::FitRk(a) => fit_one(&config, &a, "rk"),
        Command::FitRulefit(a) => fit_one(&config, &a, "rulefit"),
        Command::FitForest(a) => fit_one(&config, &a, "forest"),
        Command::Evaluate(a) => standalone(&config, |out| {
            let table = pipeline::load_table(&a.features)?;
            let linear = load_selected(a.selected.as_deref())?;
            let mut bundle = Bundle { dataset: config.segment.as_str().into(), ..Default::default() };
            let params = pipeline::stage_model(&table, linear.as_deref(), &config, out, &mut bundle)?;
            pipeline::stage_evaluate(&table, linear.as_deref(), &params, &config, out, &mut bundle)?;
            pipeline::write_bundle_and_report(&bundle, &config, out)
        }),
        Command::Predict { model, features } => standalone(&config, |out| {
            let saved = SavedModel::from_file(&model)?;
            let table = pipeline::load_table(&features)?;
            let pred = saved.predict_psmp(&table)?;
            let actual = appraisal::evaluation::to_psmp(&table.table.target, target_of(&saved));
            let rows: Vec<PredictionRow> = table
                .ids
                .iter()
                .zip(actual)
                .zip(pred)
                .map(|((id, a), p)| PredictionRow { id: id.clone(), actual: a, predicted: p, split: "predict".into() })
                .collect();
            out.write_with("predictions.csv", |b| report::write_predictions_csv(&rows, b)).map(|_| ())
        }),
        Command::Report { bundle, format } => standalone(&config, |out| {
            let s = std::fs::read_to_string(&bundle).map_err(|e| Error::File { path: bundle.clone(), source: e })?;
            let b: Bundle = serde_json::from_str(&s)?;
            let dir = out.root().join("report");
            for f in report::emit_report(&b, &dir, format, config.report.histogram_bins)? {
                out.adopt(&f)?;
            }
            Ok(())
        }),
    }
}

fn target_of(m: &SavedModel) -> appraisal::features::TargetKind {
    match m {
        SavedModel::Ols { target, .. } | SavedModel::Rulefit { target, .. } => *target,
    }
}

/// Runs one stage into the output root and writes its manifest.
fn standalone(config: &PipelineConfig, f: impl FnOnce(&mut Outputs) -> appraisal::Result<()>) -> Result<(), Failure> {
    config.validate()?;
    let mut out = Outputs::new(&config.output)?;
    let result = f(&mut out);
    let m = match &result {
        Ok(()) => out.manifest(vec![], None),
        Err(e) => out.manifest(vec![], Some(("standalone", e))),
    };
    out.write_manifest(&m)?;
    result?;
    println!("{} files written to {}", m.files.len(), config.output.display());
    Ok(())
}

fn load_selected(path: Option<&Path>) -> appraisal::Result<Option<Vec<String>>> {
    let Some(p) = path else { return Ok(None) };
    let s = std::fs::read_to_string(p).map_err(|e| Error::File { path: p.to_path_buf(), source: e })?;
    let sel: SelectionOutcome = serde_json::from_str(&s)?;
    Ok(Some(sel.chosen))
}

fn fit_one(config: &PipelineConfig, a: &FitArgs, tag: &str) -> Result<(), Failure> {
    let recipe = config
        .models()
        .into_iter()
        .chain([
            ModelRecipe::Ols,
            ModelRecipe::Rk { config: Default::default() },
            ModelRecipe::Rulefit { config: Default::default() },
            ModelRecipe::Forest { params: appraisal::rulefit::baseline_forest_params() },
        ])
        .find(|r| r.tag() == tag)
        .expect("every tag has a default recipe");
    if matches!(recipe, ModelRecipe::Rk { .. }) && config.segment == Segment::Flat && config.features.target.is_none() {
        return Err(Failure::Usage("fit-rk needs the log_psmp target; set features.target".into()));
    }
    standalone(config, |out| {
        let table = pipeline::load_table(&a.features)?;
        let linear = load_selected(a.selected.as_deref())?;
        let (train, test) = pipeline::train_test(&table, config)?;
        let tr = pipeline::recipe_table(&recipe, &train, linear.as_deref())?;
        let te = pipeline::recipe_table(&recipe, &test, linear.as_deref())?;
        let mut bundle = Bundle { dataset: config.segment.as_str().into(), ..Default::default() };
        pipeline::fit_and_write(&recipe, tag, &tr, &te, config.target(), derive_seed(config.seed, 100), config, out, &mut bundle)?;
        Ok(())
    })
}
