//! End-to-end runs: load and preprocess, score hardness, pick thresholds on
//! seeded splits, refit on the full training set and evaluate on the test set.

mod compare;
mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{
    filter_by_hardness, impute_knn, impute_knn_from, load_csv, maybe_undersample, Dataset,
    OneHotEncoder,
};
use crate::error::{Error, Result, ResultExt};
use crate::evaluation::{
    metrics_at, write_table_csv, SelectiveMetrics, TableRow, TradeoffCurve, TradeoffPoint,
};
use crate::hardness::{compute_ih, compute_influence, HardnessMethod, HardnessScores};
use crate::search::{
    brute_force, heuristic_search, simulated_annealing, write_trace_csv, CostBreakdown,
    SearchResult, SplitEvaluator, SplitOutcome, TraceRow, ACCEPT_ALL,
};
use crate::seeds::{derive_seed, Stream};
use crate::selective::{write_predictions_csv, ScoreKind, ScoredBatch, SelectiveModel};

pub use compare::{comparison_configs, run_comparison, ComparisonRow, ComparisonTable};
pub use config::{
    score_filter_grid, BruteForceConfig, ExperimentConfig, FilterMethod, RejectMethod,
    SearchStrategy, SCHEMA_VERSION,
};

/// Sub-seed index of the final refit, kept clear of the per-split indices.
const FINAL_INDEX: u64 = 1 << 32;

/// Which thresholds a configuration searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    FilterOnly,
    RejectOnly,
    Both,
    Standard,
}

impl Setup {
    pub fn of(config: &ExperimentConfig) -> Self {
        match (config.filter_method.hardness(), config.reject_method.kind()) {
            (Some(_), Some(_)) => Setup::Both,
            (Some(_), None) => Setup::FilterOnly,
            (None, Some(_)) => Setup::RejectOnly,
            (None, None) => Setup::Standard,
        }
    }

    pub fn filters(self) -> bool {
        matches!(self, Setup::FilterOnly | Setup::Both)
    }

    pub fn rejects(self) -> bool {
        matches!(self, Setup::RejectOnly | Setup::Both)
    }
}

/// Training (and optionally test) data after imputation and encoding.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub encoder: OneHotEncoder,
}

/// Imputes and encodes the training set; the test set borrows training
/// donors and the training encoding.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let raw = load_csv(&config.train_path, &config.csv)
        .context_with(|| format!("{}", config.train_path.display()))?;
    let imputed = if raw.has_missing() {
        impute_knn(&raw, config.impute_k)?
    } else {
        raw
    };
    let encoder = OneHotEncoder::fit(&imputed, &config.csv.categorical_columns)?;
    let train = encoder.transform(&imputed)?;
    let test = match &config.test_path {
        Some(path) => {
            let raw_test =
                load_csv(path, &config.csv).context_with(|| format!("{}", path.display()))?;
            if raw_test.feature_names() != imputed.feature_names() {
                return Err(Error::Data(format!(
                    "test columns {:?} differ from training columns {:?}",
                    raw_test.feature_names(),
                    imputed.feature_names()
                )));
            }
            let raw_test = if raw_test.has_missing() {
                impute_knn_from(&raw_test, &imputed, config.impute_k)?
            } else {
                raw_test
            };
            Some(encoder.transform(&raw_test)?)
        }
        None => None,
    };
    Ok(Prepared {
        train,
        test,
        encoder,
    })
}

pub fn compute_hardness(
    config: &ExperimentConfig,
    train: &Dataset,
    method: HardnessMethod,
) -> Result<HardnessScores> {
    match method {
        HardnessMethod::InstanceHardness => {
            compute_ih(train, &config.learner_pool(), &config.cv_protocol())
        }
        HardnessMethod::Influence => {
            compute_influence(train, &config.cv_protocol(), config.influence_l2)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub seed: u64,
    pub train_size: usize,
    pub metrics: SelectiveMetrics,
    /// Entropy range used to normalise certainty on this split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certainty_range: Option<(f64, f64)>,
}

fn summarise(outcomes: &[SplitOutcome], t_r: f64) -> Vec<SplitSummary> {
    outcomes
        .iter()
        .map(|o| SplitSummary {
            seed: o.seed,
            train_size: o.train_size,
            metrics: o.metrics_at(t_r),
            certainty_range: o.batch.certainty_range,
        })
        .collect()
}

/// Thresholds chosen on the validation splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub setup: Setup,
    /// `None` when no filtering is applied.
    pub t_f: Option<f64>,
    /// `None` when every prediction is accepted.
    pub t_r: Option<f64>,
    pub breakdown: Option<CostBreakdown>,
    pub per_split: Vec<SplitSummary>,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_temperature: Option<f64>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl Selection {
    pub fn t_f_or_identity(&self, config: &ExperimentConfig) -> f64 {
        self.t_f.unwrap_or_else(|| config.no_filter_t_f())
    }

    pub fn t_r_or_accept_all(&self) -> f64 {
        self.t_r.unwrap_or(ACCEPT_ALL)
    }
}

fn evaluator<'a>(
    config: &ExperimentConfig,
    train: &'a Dataset,
    scores: Option<&'a HardnessScores>,
) -> SplitEvaluator<'a> {
    let mut ev = SplitEvaluator::new(
        train,
        config.main_model.clone(),
        config.split_protocol(),
        config.weights,
    );
    ev.ensemble = config.ensemble.clone();
    if let Some(s) = scores {
        ev = ev.with_filter(s, config.t_f_mode);
    }
    match config.reject_method.kind() {
        Some(kind) => ev.with_rejector(kind),
        None => ev.with_score_kind(config.effective_score_kind()),
    }
}

fn run_search(config: &ExperimentConfig, ev: &SplitEvaluator<'_>) -> Result<SearchResult> {
    let objective = ev.objective();
    match &config.search {
        SearchStrategy::GridHeuristic(c) => heuristic_search(c, objective),
        SearchStrategy::Annealing(c) => {
            if c.bounds != [0.0, 0.5] {
                log::info!("annealing bounds overridden to {:?}", c.bounds);
            }
            simulated_annealing(c, objective)
        }
        SearchStrategy::BruteForce(c) => brute_force(c.step, c.bounds, objective),
    }
}

/// Chooses `(t_f, t_r)` by averaging the cost over the configured splits.
/// `scores` must be given whenever the config filters.
pub fn select_thresholds(
    config: &ExperimentConfig,
    train: &Dataset,
    scores: Option<&HardnessScores>,
) -> Result<Selection> {
    config.validate()?;
    let setup = Setup::of(config);
    if setup.filters() && scores.is_none() {
        return Err(Error::Config("filtering needs hardness scores".into()));
    }
    let scores = if setup.filters() { scores } else { None };
    let ev = evaluator(config, train, scores);
    match setup {
        Setup::Standard => Ok(Selection {
            setup,
            t_f: None,
            t_r: None,
            breakdown: None,
            per_split: Vec::new(),
            evaluations: 0,
            final_temperature: None,
            trace: Vec::new(),
        }),
        Setup::RejectOnly => {
            let outcomes = ev.outcomes(0.0)?;
            let best = ev.best_for_outcomes(&outcomes, 0.0)?;
            Ok(Selection {
                setup,
                t_f: None,
                t_r: Some(best.t_r),
                per_split: summarise(&outcomes, best.t_r),
                trace: vec![TraceRow::new("reject", 0, &best)],
                breakdown: Some(best),
                evaluations: 1,
                final_temperature: None,
            })
        }
        Setup::FilterOnly | Setup::Both => {
            let result = run_search(config, &ev)?;
            let best = result.best.clone();
            let outcomes = ev.outcomes(best.t_f)?;
            Ok(Selection {
                setup,
                t_f: Some(best.t_f),
                t_r: setup.rejects().then_some(best.t_r),
                per_split: summarise(&outcomes, best.t_r),
                breakdown: Some(best),
                evaluations: result.evaluations,
                final_temperature: result.final_temperature,
                trace: result.trace,
            })
        }
    }
}

/// Fitted model bundle with everything needed to score raw test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub filter_method: FilterMethod,
    pub reject_method: RejectMethod,
    pub score_kind: ScoreKind,
    pub t_f: Option<f64>,
    pub t_r: Option<f64>,
    pub train_size: usize,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub annotation: String,
    pub encoder: OneHotEncoder,
    pub model: SelectiveModel,
}

impl ModelBundle {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bundle: ModelBundle = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if bundle.format_version != 1 {
            return Err(Error::Config(format!(
                "unsupported model format {}",
                bundle.format_version
            )));
        }
        Ok(bundle)
    }

    /// Scores an encoded dataset.
    pub fn score(&self, data: &Dataset) -> Result<ScoredBatch> {
        if data.feature_names() != self.feature_names.as_slice() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_names.len(),
                got: data.n_features(),
            });
        }
        self.model.score(data, self.score_kind)
    }

    pub fn evaluate(&self, test: &Dataset) -> Result<(SelectiveMetrics, ScoredBatch)> {
        let batch = self.score(test)?;
        let metrics = metrics_at(&batch, test.labels(), self.t_r.unwrap_or(ACCEPT_ALL));
        Ok((metrics, batch))
    }

    pub fn table_row(&self, metrics: SelectiveMetrics) -> TableRow {
        TableRow {
            filter: row_filter_label(self.filter_method),
            reject: row_reject_label(self.reject_method, self.score_kind, self.filter_method),
            t_f: self.t_f,
            t_r: self.t_r,
            metrics,
            annotation: self.annotation.clone(),
        }
    }
}

fn row_filter_label(f: FilterMethod) -> String {
    f.hardness()
        .map_or("--", HardnessMethod::as_str)
        .to_string()
}

fn row_reject_label(r: RejectMethod, kind: ScoreKind, f: FilterMethod) -> String {
    let label = |k: ScoreKind| match k {
        ScoreKind::Confidence => "C",
        ScoreKind::Certainty => "U",
    };
    match (r.kind(), f) {
        (Some(k), _) => label(k).to_string(),
        (None, FilterMethod::None) => "--".to_string(),
        (None, _) => label(kind).to_string(),
    }
}

/// Refits on the full training set at the chosen thresholds.
pub fn finalize(
    config: &ExperimentConfig,
    prepared: &Prepared,
    scores: Option<&HardnessScores>,
    t_f: Option<f64>,
    t_r: Option<f64>,
) -> Result<ModelBundle> {
    let train = &prepared.train;
    let filtered = match (t_f, scores) {
        (Some(t), Some(s)) => filter_by_hardness(train, s, t, config.t_f_mode)?,
        (Some(_), None) => return Err(Error::Config("filtering needs hardness scores".into())),
        (None, _) => train.clone(),
    };
    if filtered.is_empty() {
        return Err(Error::Data("filtering left no training data".into()));
    }
    if !filtered.has_both_classes() {
        return Err(Error::SingleClass("filtered training data".into()));
    }
    let fit_on = maybe_undersample(
        &filtered,
        config.trigger_ratio,
        derive_seed(config.seeds[0], Stream::Undersample, FINAL_INDEX),
    )?;
    let kind = config.effective_score_kind();
    let ensemble = (kind == ScoreKind::Certainty).then_some(&config.ensemble);
    let model = SelectiveModel::fit(
        &fit_on,
        &config.main_model,
        config.calibration_folds,
        ensemble,
    )
    .context_with(|| "final refit".into())?;
    Ok(ModelBundle {
        format_version: 1,
        filter_method: if t_f.is_some() {
            config.filter_method
        } else {
            FilterMethod::None
        },
        reject_method: if t_r.is_some() {
            config.reject_method
        } else {
            RejectMethod::None
        },
        score_kind: kind,
        t_f,
        t_r,
        train_size: fit_on.len(),
        feature_names: train.feature_names().to_vec(),
        annotation: String::new(),
        encoder: prepared.encoder.clone(),
        model,
    })
}

/// Annotation for searches that settled on a no-op threshold.
pub fn degeneracy_note(config: &ExperimentConfig, selection: &Selection) -> String {
    let mut notes = Vec::new();
    if selection.setup.filters() && selection.t_f == Some(config.no_filter_t_f()) {
        notes.push("no filtering chosen");
    }
    if selection.setup.rejects() && selection.t_r == Some(ACCEPT_ALL) {
        notes.push("no rejection chosen");
    }
    notes.join("; ")
}

/// Split-averaged trade-off curve at one `t_f`.
pub fn split_curve(
    config: &ExperimentConfig,
    train: &Dataset,
    scores: Option<&HardnessScores>,
    t_f: f64,
    t_r_grid: &[f64],
) -> Result<TradeoffCurve> {
    let ev = evaluator(config, train, scores);
    let outcomes = ev.outcomes(t_f)?;
    curve_over_outcomes(&outcomes, t_r_grid, t_f)
}

pub fn curve_over_outcomes(
    outcomes: &[SplitOutcome],
    t_r_grid: &[f64],
    t_f: f64,
) -> Result<TradeoffCurve> {
    if outcomes.is_empty() {
        return Err(Error::Config("no split outcomes".into()));
    }
    if t_r_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(
            "rejection grid must be strictly increasing".into(),
        ));
    }
    let n = outcomes.len() as f64;
    let points = t_r_grid
        .iter()
        .map(|&t_r| {
            let (mut f1, mut acc, mut score) = (0.0, 0.0, 0.0);
            for o in outcomes {
                let m = o.metrics_at(t_r);
                f1 += m.macro_f1;
                acc += m.acceptance_rate();
                score += m.mean_score;
            }
            TradeoffPoint {
                t_r,
                macro_f1: f1 / n,
                acceptance_rate: acc / n,
                mean_score: score / n,
            }
        })
        .collect();
    Ok(TradeoffCurve { t_f, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessSummary {
    pub method: HardnessMethod,
    pub n_scored: usize,
    pub mean: f64,
    pub coverage_rounds: usize,
}

impl HardnessSummary {
    fn of(scores: &HardnessScores) -> Self {
        let n = scores.len();
        HardnessSummary {
            method: scores.method(),
            n_scored: n,
            mean: scores.values().iter().sum::<f64>() / n.max(1) as f64,
            coverage_rounds: scores.provenance().map_or(0, |p| p.coverage_rounds),
        }
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub software_version: String,
    pub config: ExperimentConfig,
    pub selection: Selection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hardness: Option<HardnessSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_metrics: Option<SelectiveMetrics>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub annotation: String,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(
        config: &ExperimentConfig,
        selection: Selection,
        scores: Option<&HardnessScores>,
    ) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            annotation: degeneracy_note(config, &selection),
            config: config.resolved(),
            selection,
            hardness: scores.map(HardnessSummary::of),
            test_metrics: None,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported manifest schema {}",
                m.schema_version
            )));
        }
        Ok(m)
    }
}

/// Output file names inside a run directory.
pub mod files {
    pub const SCORES: &str = "scores.csv";
    pub const TRACE: &str = "trace.csv";
    pub const MANIFEST: &str = "manifest.json";
    pub const MODEL: &str = "model.json";
    pub const RESULTS: &str = "results.csv";
    pub const PREDICTIONS: &str = "predictions.csv";
    pub const COMPARE: &str = "compare.csv";
}

/// Artifacts of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub row: TableRow,
    pub bundle: ModelBundle,
    pub dir: PathBuf,
}

/// Hardness scores for `config`, or `None` when it does not filter.
pub fn hardness_for(config: &ExperimentConfig, train: &Dataset) -> Result<Option<HardnessScores>> {
    if !Setup::of(config).filters() {
        return Ok(None);
    }
    let method = config.filter_method.hardness().expect("filtering setup");
    compute_hardness(config, train, method).map(Some)
}

/// Search, refit and evaluate, writing every artifact to `dir`.
pub fn run_in(
    config: &ExperimentConfig,
    prepared: &Prepared,
    scores: Option<&HardnessScores>,
    dir: &Path,
) -> Result<RunOutput> {
    let start = Instant::now();
    let test = prepared
        .test
        .as_ref()
        .ok_or_else(|| Error::Config("run needs test_path".into()))?;
    std::fs::create_dir_all(dir)?;
    let selection = select_thresholds(config, &prepared.train, scores)?;
    if let Some(s) = scores.filter(|_| selection.setup.filters()) {
        s.write_csv(&dir.join(files::SCORES))?;
    }
    write_trace_csv(&selection.trace, &dir.join(files::TRACE))?;
    let mut bundle = finalize(config, prepared, scores, selection.t_f, selection.t_r)?;
    bundle.annotation = degeneracy_note(config, &selection);
    bundle.save(&dir.join(files::MODEL))?;
    let (metrics, batch) = bundle.evaluate(test)?;
    write_predictions_csv(
        &batch.predictions(bundle.t_r.unwrap_or(ACCEPT_ALL)),
        &dir.join(files::PREDICTIONS),
    )?;
    let mut manifest = RunManifest::new(config, selection, scores.filter(|_| bundle.t_f.is_some()));
    manifest.test_metrics = Some(metrics.clone());
    let row = bundle.table_row(metrics);
    write_table_csv(std::slice::from_ref(&row), &dir.join(files::RESULTS))?;
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.save(&dir.join(files::MANIFEST))?;
    Ok(RunOutput {
        manifest,
        row,
        bundle,
        dir: dir.to_path_buf(),
    })
}

/// `run_in` on freshly loaded data, writing to `config.output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let prepared = prepare(config)?;
    let scores = hardness_for(config, &prepared.train)?;
    run_in(config, &prepared, scores.as_ref(), &config.output_dir)
}
