use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

const MISSING_LEVEL: &str = "<missing>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EncodedColumn {
    name: String,
    /// Observed levels, lexicographic.
    levels: Vec<String>,
}

/// One-hot encoder whose levels are learned on one dataset and applied to
/// others (train levels reused on the test set). Unseen levels encode as
/// all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    columns: Vec<EncodedColumn>,
}

fn column_values(ds: &Dataset, name: &str) -> Result<Vec<String>> {
    if let Some(col) = ds.categorical().iter().find(|c| c.name == name) {
        return Ok(col
            .values
            .iter()
            .map(|v| v.clone().unwrap_or_else(|| MISSING_LEVEL.to_string()))
            .collect());
    }
    if let Some(j) = ds.feature_names().iter().position(|n| n == name) {
        return Ok(ds
            .features()
            .column(j)
            .iter()
            .map(|v| {
                if v.is_nan() {
                    MISSING_LEVEL.to_string()
                } else {
                    v.to_string()
                }
            })
            .collect());
    }
    Err(Error::MissingColumn(name.to_string()))
}

impl OneHotEncoder {
    pub fn fit(ds: &Dataset, columns: &[String]) -> Result<Self> {
        let mut out = Vec::with_capacity(columns.len());
        for name in columns {
            let levels: BTreeSet<String> = column_values(ds, name)?.into_iter().collect();
            if levels.len() == 1 {
                log::warn!(
                    "categorical column `{name}` has a single level; emitting a constant column"
                );
            }
            out.push(EncodedColumn {
                name: name.clone(),
                levels: levels.into_iter().collect(),
            });
        }
        Ok(OneHotEncoder { columns: out })
    }

    pub fn output_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .flat_map(|c| c.levels.iter().map(move |l| format!("{}={}", c.name, l)))
            .collect()
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if self.columns.is_empty() {
            return Ok(ds.clone());
        }
        let encoded_names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        let keep: Vec<usize> = (0..ds.n_features())
            .filter(|&j| !encoded_names.contains(&ds.feature_names()[j].as_str()))
            .collect();
        let n_new: usize = self.columns.iter().map(|c| c.levels.len()).sum();
        let width = keep.len() + n_new;
        let mut feats = Array2::<f64>::zeros((ds.len(), width));
        for (out_j, &j) in keep.iter().enumerate() {
            feats.column_mut(out_j).assign(&ds.features().column(j));
        }
        let mut offset = keep.len();
        for col in &self.columns {
            let values = column_values(ds, &col.name)?;
            for (i, v) in values.iter().enumerate() {
                if let Ok(k) = col.levels.binary_search(v) {
                    feats[[i, offset + k]] = 1.0;
                }
            }
            offset += col.levels.len();
        }
        let mut names: Vec<String> = keep
            .iter()
            .map(|&j| ds.feature_names()[j].clone())
            .collect();
        names.extend(self.output_names());
        let mut out = ds.replace_features(feats, names)?;
        let remaining: Vec<_> = ds
            .categorical()
            .iter()
            .filter(|c| !encoded_names.contains(&c.name.as_str()))
            .cloned()
            .collect();
        *out.categorical_mut() = remaining;
        Ok(out)
    }
}

/// Replaces each named column with one indicator column per observed level.
pub fn one_hot_encode(ds: &Dataset, categorical_columns: &[String]) -> Result<Dataset> {
    OneHotEncoder::fit(ds, categorical_columns)?.transform(ds)
}
