//! Tabular binary-classification datasets and the preprocessing steps applied
//! before hardness estimation and model fitting.
//!
//! Missing numeric entries are stored as `NaN`. Categorical columns are kept
//! as raw strings until [`one_hot_encode`] turns them into indicator columns.

mod csv_io;
mod encode;
mod filter;
mod impute;
mod sampling;

pub use csv_io::{load_csv, write_csv, CsvOptions};
pub use encode::{one_hot_encode, OneHotEncoder};
pub use filter::{filter_by_hardness, removed_count, FilterMode};
pub use impute::{impute_knn, impute_knn_from};
pub(crate) use sampling::undersample_indices;
pub use sampling::{
    maybe_undersample, stratified_folds, stratified_split, undersample, SplitPair,
    DEFAULT_TRIGGER_RATIO,
};

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A string-valued column awaiting one-hot encoding. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    pub values: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    features: Array2<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    categorical: Vec<CategoricalColumn>,
}

impl Dataset {
    pub fn new(
        ids: Vec<String>,
        features: Array2<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        Self::with_categorical(ids, features, labels, feature_names, Vec::new())
    }

    pub fn with_categorical(
        ids: Vec<String>,
        features: Array2<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        categorical: Vec<CategoricalColumn>,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n || ids.len() != n {
            return Err(Error::Data(format!(
                "row count mismatch: {} feature rows, {} labels, {} ids",
                n,
                labels.len(),
                ids.len()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::Data(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Data(format!("label {bad} outside {{0, 1}}")));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate instance id `{id}`")));
            }
        }
        for col in &categorical {
            if col.values.len() != n {
                return Err(Error::Data(format!(
                    "categorical column `{}` has {} values for {} rows",
                    col.name,
                    col.values.len(),
                    n
                )));
            }
        }
        Ok(Dataset {
            ids,
            features,
            labels,
            feature_names,
            categorical,
        })
    }

    /// Builds a dataset with ids `0..n` and names `x0..x{d-1}`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Data("ragged feature rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::Data(e.to_string()))?;
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        let names = (0..d).map(|j| format!("x{j}")).collect();
        Dataset::new(ids, features, labels, names)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn categorical(&self) -> &[CategoricalColumn] {
        &self.categorical
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.features.ncols();
        // Standard-layout invariant is maintained by every constructor path.
        &self
            .features
            .as_slice()
            .expect("features stored in standard layout")[i * d..(i + 1) * d]
    }

    /// Instance counts per class, `[n_0, n_1]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let n1 = self.labels.iter().filter(|&&y| y == 1).count();
        [self.labels.len() - n1, n1]
    }

    pub fn has_both_classes(&self) -> bool {
        let [n0, n1] = self.class_counts();
        n0 > 0 && n1 > 0
    }

    pub fn has_missing(&self) -> bool {
        self.features.iter().any(|v| v.is_nan())
    }

    /// Row indices grouped by class.
    pub fn indices_by_class(&self) -> [Vec<usize>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y as usize].push(i);
        }
        out
    }

    /// New dataset with the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let features = self.features.select(Axis(0), rows);
        let features = if features.is_standard_layout() {
            features
        } else {
            features.as_standard_layout().to_owned()
        };
        Dataset {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            features,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            categorical: self
                .categorical
                .iter()
                .map(|c| CategoricalColumn {
                    name: c.name.clone(),
                    values: rows.iter().map(|&i| c.values[i].clone()).collect(),
                })
                .collect(),
        }
    }

    /// Rows of `self` followed by rows of `other`. Schemas must match.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.feature_names != other.feature_names {
            return Err(Error::Data(
                "cannot concatenate datasets with different columns".into(),
            ));
        }
        let features =
            ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
                .map_err(|e| Error::Data(e.to_string()))?;
        let mut ids = self.ids.clone();
        ids.extend(other.ids.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let categorical = self
            .categorical
            .iter()
            .zip(&other.categorical)
            .map(|(a, b)| {
                let mut values = a.values.clone();
                values.extend(b.values.iter().cloned());
                CategoricalColumn {
                    name: a.name.clone(),
                    values,
                }
            })
            .collect();
        Dataset::with_categorical(
            ids,
            features,
            labels,
            self.feature_names.clone(),
            categorical,
        )
    }

    pub(crate) fn replace_features(
        &self,
        features: Array2<f64>,
        names: Vec<String>,
    ) -> Result<Dataset> {
        Dataset::new(self.ids.clone(), features, self.labels.clone(), names)
    }

    pub(crate) fn with_new_features(&self, features: Array2<f64>) -> Dataset {
        Dataset {
            features,
            ..self.clone()
        }
    }

    pub(crate) fn categorical_mut(&mut self) -> &mut Vec<CategoricalColumn> {
        &mut self.categorical
    }

    /// Fails with [`Error::NonFinite`] if any feature is `NaN` or infinite.
    pub fn ensure_finite(&self) -> Result<()> {
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            let d = self.n_features().max(1);
            return Err(Error::NonFinite(format!(
                "feature `{}` of instance `{}`",
                self.feature_names[pos % d],
                self.ids[pos / d]
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_ids() {
        let f = Array2::zeros((2, 1));
        let err = Dataset::new(
            vec!["a".into(), "a".into()],
            f,
            vec![0, 1],
            vec!["x".into()],
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_non_binary_labels() {
        let f = Array2::zeros((2, 1));
        let err = Dataset::new(
            vec!["a".into(), "b".into()],
            f,
            vec![0, 2],
            vec!["x".into()],
        );
        assert!(err.is_err());
    }

    #[test]
    fn select_keeps_given_order() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 0]).unwrap();
        let sub = ds.select(&[2, 0]);
        assert_eq!(sub.ids(), &["2".to_string(), "0".to_string()]);
        assert_eq!(sub.row(0), &[2.0]);
        assert_eq!(sub.labels(), &[0, 0]);
    }
}
