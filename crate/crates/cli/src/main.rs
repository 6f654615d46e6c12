use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hardreject_core::data::FilterMode;
use hardreject_core::evaluation::write_table_csv;
use hardreject_core::hardness::{HardnessMethod, HardnessScores};
use hardreject_core::pipeline::{
    self, degeneracy_note, files, finalize, hardness_for, prepare, select_thresholds, split_curve,
    ExperimentConfig, ModelBundle, RunManifest, Setup,
};
use hardreject_core::search::{rejection_grid, write_trace_csv, ACCEPT_ALL};
use hardreject_core::selective::write_predictions_csv;
use hardreject_core::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(
    name = "hardreject",
    version,
    about = "Hardness filtering and reject-option thresholds for binary classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute instance hardness or influence scores for the training set.
    Hardness {
        #[command(flatten)]
        common: Common,
        /// Defaults to the config's filter method.
        #[arg(long)]
        method: Option<String>,
    },
    /// Choose thresholds on validation splits and write a manifest.
    Search {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scores: ScoresArg,
    },
    /// Refit on the full training set at a manifest's thresholds.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scores: ScoresArg,
    },
    /// Evaluate a trained model on the test set.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Overrides the config's test_path.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Split-averaged metrics across the rejection grid at one t_f.
    Curve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scores: ScoresArg,
        /// Defaults to the manifest's t_f, or no filtering.
        #[arg(long = "t-f")]
        t_f: Option<f64>,
    },
    /// Run all 13 filter and reject configurations.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Search, train and evaluate in one go.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scores: ScoresArg,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config, or a manifest written by a previous run.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated split seeds, e.g. `0,1,2`.
    #[arg(long = "seed-list", value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Args)]
struct ScoresArg {
    /// Precomputed hardness scores; recomputed when absent.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Fraction,
    Score,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seeds) = &self.seed_list {
            config.seeds = seeds.clone();
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(mode) = self.mode {
            config.set_mode(match mode {
                Mode::Fraction => FilterMode::FractionPerClass,
                Mode::Score => FilterMode::ScoreThreshold,
            });
        }
        config.validate()?;
        std::fs::create_dir_all(&config.output_dir)?;
        Ok(config)
    }

    fn manifest(&self) -> Option<RunManifest> {
        RunManifest::load(&self.config).ok()
    }
}

fn scores_for(
    config: &ExperimentConfig,
    train: &hardreject_core::Dataset,
    given: &ScoresArg,
) -> Result<Option<HardnessScores>> {
    let Some(method) = config.filter_method.hardness() else {
        return Ok(None);
    };
    match &given.scores {
        Some(path) => {
            let s = HardnessScores::read_csv(path)?;
            if s.method() != method {
                return Err(Error::Config(format!(
                    "{} holds {} scores but the config filters by {}",
                    path.display(),
                    s.method().as_str(),
                    method.as_str()
                )));
            }
            Ok(Some(s))
        }
        None => hardness_for(config, train),
    }
}

fn out_file(config: &ExperimentConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

fn cmd_hardness(common: &Common, method: Option<&str>) -> Result<()> {
    let config = common.load()?;
    let method = match method {
        Some(m) => HardnessMethod::parse(m)
            .ok_or_else(|| Error::Config(format!("unknown hardness method `{m}`")))?,
        None => config
            .filter_method
            .hardness()
            .ok_or_else(|| Error::Config("filter_method is none; pass --method".into()))?,
    };
    let prepared = prepare(&config)?;
    let scores = pipeline::compute_hardness(&config, &prepared.train, method)?;
    let path = out_file(&config, files::SCORES);
    scores.write_csv(&path)?;
    println!(
        "wrote {} {} scores to {}",
        scores.len(),
        method.as_str(),
        path.display()
    );
    Ok(())
}

fn cmd_search(common: &Common, given: &ScoresArg) -> Result<()> {
    let config = common.load()?;
    let prepared = prepare(&config)?;
    let scores = scores_for(&config, &prepared.train, given)?;
    let start = std::time::Instant::now();
    let selection = select_thresholds(&config, &prepared.train, scores.as_ref())?;
    if let Some(s) = &scores {
        s.write_csv(&out_file(&config, files::SCORES))?;
    }
    write_trace_csv(&selection.trace, &out_file(&config, files::TRACE))?;
    let mut manifest = RunManifest::new(&config, selection, scores.as_ref());
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.save(&out_file(&config, files::MANIFEST))?;
    println!(
        "t_f = {}, t_r = {}{}",
        fmt_opt(manifest.selection.t_f),
        fmt_opt(manifest.selection.t_r),
        manifest
            .selection
            .breakdown
            .as_ref()
            .map_or(String::new(), |b| format!(", cost = {:.4}", b.cost))
    );
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "--".into(), |v| format!("{v:.3}"))
}

fn cmd_train(common: &Common, given: &ScoresArg) -> Result<()> {
    let manifest = common
        .manifest()
        .ok_or_else(|| Error::Config("train needs a manifest written by `search`".into()))?;
    let config = common.load()?;
    let prepared = prepare(&config)?;
    let sel = &manifest.selection;
    let scores = if sel.t_f.is_some() {
        let sibling = common.config.with_file_name(files::SCORES);
        let given = match &given.scores {
            Some(_) => given,
            None if sibling.exists() => &ScoresArg {
                scores: Some(sibling),
            },
            None => given,
        };
        scores_for(&config, &prepared.train, given)?
    } else {
        None
    };
    let mut bundle = finalize(&config, &prepared, scores.as_ref(), sel.t_f, sel.t_r)?;
    bundle.annotation = degeneracy_note(&config, sel);
    let path = out_file(&config, files::MODEL);
    bundle.save(&path)?;
    println!(
        "trained on {} rows; wrote {}",
        bundle.train_size,
        path.display()
    );
    Ok(())
}

fn cmd_evaluate(common: &Common, model: &Path, test: Option<&Path>) -> Result<()> {
    let config = common.load()?;
    let bundle = ModelBundle::load(model)?;
    let mut config = config;
    if let Some(t) = test {
        config.test_path = Some(t.to_path_buf());
    }
    let test = match &config.test_path {
        Some(_) => prepare(&config)?.test.expect("test path set"),
        None => return Err(Error::Config("evaluate needs test_path or --test".into())),
    };
    let (metrics, batch) = bundle.evaluate(&test)?;
    write_predictions_csv(
        &batch.predictions(bundle.t_r.unwrap_or(ACCEPT_ALL)),
        &out_file(&config, files::PREDICTIONS),
    )?;
    let row = bundle.table_row(metrics);
    write_table_csv(
        std::slice::from_ref(&row),
        &out_file(&config, files::RESULTS),
    )?;
    println!("{}", row.record().join(","));
    Ok(())
}

fn cmd_curve(common: &Common, given: &ScoresArg, t_f: Option<f64>) -> Result<()> {
    let config = common.load()?;
    let prepared = prepare(&config)?;
    let t_f = t_f
        .or_else(|| common.manifest().and_then(|m| m.selection.t_f))
        .unwrap_or_else(|| config.no_filter_t_f());
    let filtering = t_f != config.no_filter_t_f() && Setup::of(&config).filters();
    let scores = if filtering {
        scores_for(&config, &prepared.train, given)?
    } else {
        None
    };
    let t_f = if scores.is_some() { t_f } else { 0.0 };
    let curve = split_curve(
        &config,
        &prepared.train,
        scores.as_ref(),
        t_f,
        &rejection_grid(),
    )?;
    let path = out_file(&config, "curve.csv");
    curve.write_csv(&path)?;
    println!(
        "wrote {} points at t_f = {t_f} to {}",
        curve.points.len(),
        path.display()
    );
    Ok(())
}

fn cmd_compare(common: &Common) -> Result<()> {
    let config = common.load()?;
    let prepared = prepare(&config)?;
    let table = pipeline::run_comparison(&config, &prepared, &config.output_dir)?;
    for row in &table.rows {
        println!("{}", row.record().join(","));
    }
    Ok(())
}

fn cmd_run(common: &Common, given: &ScoresArg) -> Result<()> {
    let config = common.load()?;
    let prepared = prepare(&config)?;
    let scores = scores_for(&config, &prepared.train, given)?;
    let out = pipeline::run_in(&config, &prepared, scores.as_ref(), &config.output_dir)?;
    println!("{}", out.row.record().join(","));
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Hardness { common, method } => cmd_hardness(common, method.as_deref()),
        Command::Search { common, scores } => cmd_search(common, scores),
        Command::Train { common, scores } => cmd_train(common, scores),
        Command::Evaluate {
            common,
            model,
            test,
        } => cmd_evaluate(common, model, test.as_deref()),
        Command::Curve {
            common,
            scores,
            t_f,
        } => cmd_curve(common, scores, *t_f),
        Command::Compare { common } => cmd_compare(common),
        Command::Run { common, scores } => cmd_run(common, scores),
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
