use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CsvOptions, FilterMode, DEFAULT_TRIGGER_RATIO};
use crate::error::{Error, Result};
use crate::hardness::{CvProtocol, HardnessMethod, DEFAULT_INFLUENCE_L2};
use crate::learners::{default_pool, LearnerSpec, MainModelConfig};
use crate::search::{
    default_filter_grid, AnnealConfig, CostWeights, HeuristicConfig, SplitProtocol,
};
use crate::selective::{ScoreKind, UncertaintyEnsembleSpec, DEFAULT_CALIBRATION_FOLDS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterMethod {
    #[serde(rename = "IH", alias = "ih")]
    InstanceHardness,
    #[serde(rename = "IF", alias = "if")]
    Influence,
    #[serde(rename = "none")]
    None,
}

impl FilterMethod {
    pub fn hardness(self) -> Option<HardnessMethod> {
        match self {
            FilterMethod::InstanceHardness => Some(HardnessMethod::InstanceHardness),
            FilterMethod::Influence => Some(HardnessMethod::Influence),
            FilterMethod::None => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(FilterMethod::None),
            other => HardnessMethod::parse(other).map(Self::from),
        }
    }
}

impl From<HardnessMethod> for FilterMethod {
    fn from(m: HardnessMethod) -> Self {
        match m {
            HardnessMethod::InstanceHardness => FilterMethod::InstanceHardness,
            HardnessMethod::Influence => FilterMethod::Influence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectMethod {
    Confidence,
    Certainty,
    None,
}

impl RejectMethod {
    pub fn kind(self) -> Option<ScoreKind> {
        match self {
            RejectMethod::Confidence => Some(ScoreKind::Confidence),
            RejectMethod::Certainty => Some(ScoreKind::Certainty),
            RejectMethod::None => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "confidence" | "C" => Some(RejectMethod::Confidence),
            "certainty" | "U" => Some(RejectMethod::Certainty),
            "none" => Some(RejectMethod::None),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BruteForceConfig {
    pub step: f64,
    pub bounds: [f64; 2],
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        BruteForceConfig {
            step: 0.01,
            bounds: [0.0, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SearchStrategy {
    GridHeuristic(HeuristicConfig),
    Annealing(AnnealConfig),
    BruteForce(BruteForceConfig),
}

impl Default for SearchStrategy {
    fn default() -> Self {
        SearchStrategy::GridHeuristic(HeuristicConfig::default())
    }
}

impl SearchStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SearchStrategy::GridHeuristic(_) => "grid_heuristic",
            SearchStrategy::Annealing(_) => "annealing",
            SearchStrategy::BruteForce(_) => "brute_force",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SearchStrategy::GridHeuristic(c) => c.validate(),
            SearchStrategy::Annealing(c) => c.validate(),
            SearchStrategy::BruteForce(c) => {
                if !(c.step > 0.0) || !(c.bounds[0] <= c.bounds[1]) {
                    return Err(Error::Config(
                        "brute force needs step > 0 and ordered bounds".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn candidate_range(&self) -> (f64, f64) {
        let fold = |v: &[f64]| {
            v.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
                    (lo.min(t), hi.max(t))
                })
        };
        match self {
            SearchStrategy::GridHeuristic(c) => fold(&c.grid),
            SearchStrategy::Annealing(c) => fold(&[c.bounds[0], c.bounds[1], c.initial_t_f]),
            SearchStrategy::BruteForce(c) => (c.bounds[0], c.bounds[1]),
        }
    }
}

/// Filtering grid for score-threshold mode.
pub fn score_filter_grid() -> Vec<f64> {
    (5..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub train_path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_path: Option<PathBuf>,
    #[serde(flatten)]
    pub csv: CsvOptions,
    /// Neighbours used to impute missing numeric cells.
    pub impute_k: usize,
    pub filter_method: FilterMethod,
    pub reject_method: RejectMethod,
    /// Score averaged into the cost when `reject_method` is `none`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_kind: Option<ScoreKind>,
    pub weights: CostWeights,
    pub search: SearchStrategy,
    pub t_f_mode: FilterMode,
    pub seeds: Vec<u64>,
    pub split_ratio: f64,
    pub trigger_ratio: f64,
    pub calibration_folds: usize,
    /// Cross-validation for hardness scores; derived from `seeds[0]` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hardness_cv: Option<CvProtocol>,
    /// Instance-hardness pool; the default six learners when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool: Option<Vec<LearnerSpec>>,
    pub influence_l2: f64,
    pub main_model: MainModelConfig,
    pub ensemble: UncertaintyEnsembleSpec,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            train_path: PathBuf::new(),
            test_path: None,
            csv: CsvOptions::default(),
            impute_k: 3,
            filter_method: FilterMethod::InstanceHardness,
            reject_method: RejectMethod::Confidence,
            score_kind: None,
            weights: CostWeights::default(),
            search: SearchStrategy::default(),
            t_f_mode: FilterMode::FractionPerClass,
            seeds: (0..5).collect(),
            split_ratio: 0.7,
            trigger_ratio: DEFAULT_TRIGGER_RATIO,
            calibration_folds: DEFAULT_CALIBRATION_FOLDS,
            hardness_cv: None,
            pool: None,
            influence_l2: DEFAULT_INFLUENCE_L2,
            main_model: MainModelConfig::default(),
            ensemble: UncertaintyEnsembleSpec::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Reads a config, or the config snapshot inside a run manifest.
    /// Relative data paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(inner) = value.get_mut("config").map(serde_json::Value::take) {
            value = inner;
        }
        let mut config: ExperimentConfig = serde_json::from_value(value)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.train_path);
        if let Some(p) = config.test_path.as_mut() {
            resolve(p);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.impute_k == 0 {
            return Err(Error::Config("impute_k must be at least 1".into()));
        }
        self.weights.validate()?;
        self.search.validate()?;
        self.main_model.validate()?;
        self.split_protocol().validate()?;
        self.ensemble.validate()?;
        if let Some(cv) = &self.hardness_cv {
            cv.validate()?;
        }
        if let Some(pool) = &self.pool {
            if pool.is_empty() {
                return Err(Error::Config("learner pool is empty".into()));
            }
            for spec in pool {
                spec.kind.validate()?;
            }
        }
        if !(self.influence_l2 > 0.0) {
            return Err(Error::Config("influence_l2 must be > 0".into()));
        }
        let (lo, hi) = self.search.candidate_range();
        let max = match self.t_f_mode {
            FilterMode::FractionPerClass => 0.5,
            FilterMode::ScoreThreshold => 1.0,
        };
        if self.filter_method != FilterMethod::None && (lo < 0.0 || hi > max) {
            return Err(Error::Config(format!(
                "search candidates [{lo}, {hi}] outside [0, {max}] for {:?} filtering",
                self.t_f_mode
            )));
        }
        Ok(())
    }

    /// Switches the filtering mode, moving default search ranges along with it.
    pub fn set_mode(&mut self, mode: FilterMode) {
        if mode == self.t_f_mode {
            return;
        }
        let (from, to): ([f64; 2], [f64; 2]) = match mode {
            FilterMode::ScoreThreshold => ([0.0, 0.5], [0.5, 1.0]),
            FilterMode::FractionPerClass => ([0.5, 1.0], [0.0, 0.5]),
        };
        match &mut self.search {
            SearchStrategy::GridHeuristic(c) => {
                let (from_grid, to_grid) = match mode {
                    FilterMode::ScoreThreshold => (default_filter_grid(), score_filter_grid()),
                    FilterMode::FractionPerClass => (score_filter_grid(), default_filter_grid()),
                };
                if c.grid == from_grid {
                    c.grid = to_grid;
                }
            }
            SearchStrategy::Annealing(c) => {
                if c.bounds == from {
                    c.bounds = to;
                    c.initial_t_f = 0.5 * (to[0] + to[1]);
                }
            }
            SearchStrategy::BruteForce(c) => {
                if c.bounds == from {
                    c.bounds = to;
                }
            }
        }
        self.t_f_mode = mode;
    }

    pub fn split_protocol(&self) -> SplitProtocol {
        SplitProtocol {
            seeds: self.seeds.clone(),
            ratio: self.split_ratio,
            trigger_ratio: self.trigger_ratio,
            calibration_folds: self.calibration_folds,
        }
    }

    pub fn cv_protocol(&self) -> CvProtocol {
        self.hardness_cv
            .clone()
            .unwrap_or_else(|| CvProtocol::from_base_seed(self.seeds[0]))
    }

    pub fn learner_pool(&self) -> Vec<LearnerSpec> {
        self.pool
            .clone()
            .unwrap_or_else(|| default_pool(self.seeds[0]))
    }

    /// Score fed to the cost and reported in the table.
    pub fn effective_score_kind(&self) -> ScoreKind {
        self.reject_method
            .kind()
            .or(self.score_kind)
            .unwrap_or(ScoreKind::Confidence)
    }

    /// `t_f` at which nothing is removed.
    pub fn no_filter_t_f(&self) -> f64 {
        match self.t_f_mode {
            FilterMode::FractionPerClass => 0.0,
            FilterMode::ScoreThreshold => 1.0,
        }
    }

    /// The same config with every defaulted component written out.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.hardness_cv = Some(self.cv_protocol());
        out.pool = Some(self.learner_pool());
        out
    }
}
