//! Base learners behind one fit / predict-probability contract.

pub mod boosting;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod naive_bayes;
pub mod tree;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use boosting::{BoostedTrees, BoostingParams};
pub use forest::{Forest, ForestParams, TreeParams};
pub use knn::{Knn, KnnParams};
pub use logistic::{
    fit_logistic_weights, instance_gradient, logistic_gradient, logistic_hessian, logistic_loss,
    mean_loss, LogisticFit, LogisticModel, LogisticParams,
};
pub use naive_bayes::{GaussianNb, NaiveBayesParams};
pub use tree::Tree;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    Logistic(LogisticParams),
    Tree(TreeParams),
    RandomForest(ForestParams),
    GradientBoosting(BoostingParams),
    Knn(KnnParams),
    NaiveBayes(NaiveBayesParams),
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Logistic(_) => "logistic",
            LearnerKind::Tree(_) => "tree",
            LearnerKind::RandomForest(_) => "random_forest",
            LearnerKind::GradientBoosting(_) => "gradient_boosting",
            LearnerKind::Knn(_) => "knn",
            LearnerKind::NaiveBayes(_) => "naive_bayes",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerKind::Logistic(p) => p.validate(),
            LearnerKind::Tree(p) => p.validate(),
            LearnerKind::RandomForest(p) => p.validate(),
            LearnerKind::GradientBoosting(p) => p.validate(),
            LearnerKind::Knn(p) => p.validate(),
            LearnerKind::NaiveBayes(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    #[serde(flatten)]
    pub kind: LearnerKind,
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, seed: u64) -> Result<Self> {
        kind.validate()?;
        Ok(LearnerSpec { kind, seed })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        LearnerSpec {
            kind: self.kind.clone(),
            seed,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

/// Logistic regression, CART, random forest, gradient boosting, k-NN (k = 5)
/// and Gaussian naive Bayes, all at their defaults.
pub fn default_pool(seed: u64) -> Vec<LearnerSpec> {
    [
        LearnerKind::Logistic(LogisticParams::default()),
        LearnerKind::Tree(TreeParams::default()),
        LearnerKind::RandomForest(ForestParams::default()),
        LearnerKind::GradientBoosting(BoostingParams::default()),
        LearnerKind::Knn(KnnParams::default()),
        LearnerKind::NaiveBayes(NaiveBayesParams::default()),
    ]
    .into_iter()
    .map(|kind| LearnerSpec { kind, seed })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ModelState {
    Logistic(LogisticModel),
    Tree(Tree),
    Forest(Forest),
    Boosted(BoostedTrees),
    Knn(Knn),
    NaiveBayes(GaussianNb),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    spec: LearnerSpec,
    state: ModelState,
    feature_count: usize,
}

pub fn fit(spec: &LearnerSpec, data: &Dataset) -> Result<TrainedModel> {
    spec.kind.validate()?;
    if data.is_empty() {
        return Err(Error::Data(format!("{}: empty training set", spec.name())));
    }
    if !data.has_both_classes() {
        return Err(Error::SingleClass(format!("{} training set", spec.name())));
    }
    data.ensure_finite()?;
    let state = match &spec.kind {
        LearnerKind::Logistic(p) => ModelState::Logistic(LogisticModel::fit(p, data)?),
        LearnerKind::Tree(p) => ModelState::Tree(forest::fit_tree(p, data, spec.seed)?),
        LearnerKind::RandomForest(p) => ModelState::Forest(Forest::fit(p, data, spec.seed)?),
        LearnerKind::GradientBoosting(p) => {
            ModelState::Boosted(BoostedTrees::fit(p, data, spec.seed)?)
        }
        LearnerKind::Knn(p) => ModelState::Knn(Knn::fit(p, data)?),
        LearnerKind::NaiveBayes(p) => ModelState::NaiveBayes(GaussianNb::fit(p, data)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        state,
        feature_count: data.n_features(),
    })
}

impl TrainedModel {
    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    /// Number of trees for tree ensembles, 1 for a single tree, 0 otherwise.
    pub fn n_trees(&self) -> usize {
        match &self.state {
            ModelState::Boosted(b) => b.n_trees(),
            ModelState::Forest(f) => f.trees().len(),
            ModelState::Tree(_) => 1,
            _ => 0,
        }
    }

    pub fn boosted(&self) -> Option<&BoostedTrees> {
        match &self.state {
            ModelState::Boosted(b) => Some(b),
            _ => None,
        }
    }

    fn positive_unchecked(&self, row: &[f64]) -> f64 {
        let p = match &self.state {
            ModelState::Logistic(m) => m.predict_positive(row),
            ModelState::Tree(t) => t.predict(row),
            ModelState::Forest(f) => f.predict_positive(row),
            ModelState::Boosted(b) => b.predict_positive(row),
            ModelState::Knn(k) => k.predict_positive(row),
            ModelState::NaiveBayes(nb) => nb.predict_positive(row),
        };
        p.clamp(0.0, 1.0)
    }

    /// Raw probability of the positive class for one feature vector.
    pub fn predict_positive(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                got: row.len(),
            });
        }
        Ok(self.positive_unchecked(row))
    }

    pub fn predict_positive_batch(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.n_features() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                got: data.n_features(),
            });
        }
        Ok((0..data.len())
            .map(|i| self.positive_unchecked(data.row(i)))
            .collect())
    }

    /// `[p(0|x), p(1|x)]` per row.
    pub fn predict_proba(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                got: features.ncols(),
            });
        }
        let mut out = Array2::<f64>::zeros((features.nrows(), 2));
        for (i, row) in features.rows().into_iter().enumerate() {
            let p = match row.as_slice() {
                Some(s) => self.positive_unchecked(s),
                None => self.positive_unchecked(&row.to_vec()),
            };
            out[[i, 0]] = 1.0 - p;
            out[[i, 1]] = p;
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "model format version {} not supported (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    BinaryLogLoss,
}

/// Hyperparameters of the main boosted-tree model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MainModelConfig {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub gamma: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub objective: Objective,
    pub seed: u64,
}

impl Default for MainModelConfig {
    fn default() -> Self {
        MainModelConfig {
            learning_rate: 0.01,
            n_estimators: 1000,
            max_depth: 8,
            min_child_weight: 1.0,
            gamma: 0.0,
            subsample: 0.8,
            colsample_bytree: 0.8,
            lambda: 1.0,
            objective: Objective::BinaryLogLoss,
            seed: 27,
        }
    }
}

impl MainModelConfig {
    /// Defaults with 200 trees.
    pub fn desk() -> Self {
        MainModelConfig {
            n_estimators: 200,
            ..Default::default()
        }
    }

    pub fn boosting_params(&self) -> BoostingParams {
        BoostingParams {
            n_estimators: self.n_estimators,
            learning_rate: self.learning_rate,
            max_depth: self.max_depth,
            min_child_weight: self.min_child_weight,
            gamma: self.gamma,
            subsample: self.subsample,
            colsample_bytree: self.colsample_bytree,
            lambda: self.lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.boosting_params().validate()
    }

    pub fn spec(&self) -> LearnerSpec {
        LearnerSpec {
            kind: LearnerKind::GradientBoosting(self.boosting_params()),
            seed: self.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        MainModelConfig {
            seed,
            ..self.clone()
        }
    }
}

pub fn fit_main_model(data: &Dataset, config: &MainModelConfig) -> Result<TrainedModel> {
    fit(&config.spec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                vec![
                    (i as f64 * 0.7).sin() + if i % 2 == 0 { 1.0 } else { -1.0 },
                    (i as f64 * 0.3).cos(),
                ]
            })
            .collect();
        let labels = (0..30).map(|i| u8::from(i % 2 == 0)).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn every_pool_member_is_deterministic_and_normalized() {
        let ds = toy();
        for spec in default_pool(3) {
            let a = fit(&spec, &ds).unwrap();
            let b = fit(&spec, &ds).unwrap();
            let pa = a.predict_proba(ds.features()).unwrap();
            assert_eq!(
                pa,
                b.predict_proba(ds.features()).unwrap(),
                "{}",
                spec.name()
            );
            for r in pa.rows() {
                assert!((r[0] + r[1] - 1.0).abs() < 1e-9);
                assert!(r[1] >= 0.0 && r[1] <= 1.0);
            }
        }
    }

    #[test]
    fn dimension_is_checked() {
        let m = fit(&default_pool(0)[0], &toy()).unwrap();
        assert!(matches!(
            m.predict_positive(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![1, 1]).unwrap();
        assert!(matches!(
            fit(&default_pool(0)[1], &ds),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn main_model_defaults() {
        let c = MainModelConfig::default();
        assert_eq!(
            (
                c.learning_rate,
                c.n_estimators,
                c.max_depth,
                c.min_child_weight,
                c.gamma,
                c.subsample,
                c.colsample_bytree,
                c.seed
            ),
            (0.01, 1000, 8, 1.0, 0.0, 0.8, 0.8, 27)
        );
        assert!(c.validate().is_ok());
        let m = fit_main_model(
            &toy(),
            &MainModelConfig {
                n_estimators: 7,
                ..c
            },
        )
        .unwrap();
        assert_eq!(m.n_trees(), 7);
    }

    #[test]
    fn spec_json_round_trip() {
        for spec in default_pool(5) {
            let s = serde_json::to_string(&spec).unwrap();
            let back: LearnerSpec = serde_json::from_str(&s).unwrap();
            assert_eq!(back, spec);
        }
        let knn: LearnerSpec = serde_json::from_str(r#"{"kind":"knn","k":3,"seed":1}"#).unwrap();
        assert_eq!(
            knn.kind,
            LearnerKind::Knn(KnnParams {
                k: 3,
                standardize: true
            })
        );
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = fit(&default_pool(1)[3], &toy()).unwrap();
        m.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(
            back.predict_positive_batch(&toy()).unwrap(),
            m.predict_positive_batch(&toy()).unwrap()
        );
    }
}
