//! Per-instance hardness: consensus instance hardness over a learner pool and
//! influence-based hardness from logistic-regression influence functions.

mod ih;
mod influence;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::seeds::{derive_seed, Stream};

pub use ih::{compute_ih, instance_hardness};
pub use influence::{compute_influence, influence_values, DEFAULT_INFLUENCE_L2};

/// Solves `H v = rhs` for a symmetric positive-definite Hessian.
pub use crate::linalg::spd_solve as hessian_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HardnessMethod {
    #[serde(rename = "IH")]
    InstanceHardness,
    #[serde(rename = "IF")]
    Influence,
}

impl HardnessMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            HardnessMethod::InstanceHardness => "IH",
            HardnessMethod::Influence => "IF",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "IH" | "ih" => Some(HardnessMethod::InstanceHardness),
            "IF" | "if" => Some(HardnessMethod::Influence),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvProtocol {
    pub folds: usize,
    pub repeats: usize,
    pub seeds: Vec<u64>,
    pub balance_within_fold: bool,
}

impl Default for CvProtocol {
    fn default() -> Self {
        CvProtocol::from_base_seed(0)
    }
}

impl CvProtocol {
    /// 5 × 5-fold with repeat seeds derived from `base`.
    pub fn from_base_seed(base: u64) -> Self {
        CvProtocol {
            folds: 5,
            repeats: 5,
            seeds: (0..5)
                .map(|r| derive_seed(base, Stream::Folds, r))
                .collect(),
            balance_within_fold: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "cv folds must be >= 2, got {}",
                self.folds
            )));
        }
        if self.repeats < 1 {
            return Err(Error::Config("cv repeats must be >= 1".into()));
        }
        if self.seeds.len() != self.repeats {
            return Err(Error::Config(format!(
                "cv protocol has {} seeds for {} repeats",
                self.seeds.len(),
                self.repeats
            )));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(Error::Config("cv seeds must be distinct".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: HardnessMethod,
    pub protocol: CvProtocol,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool: Option<Vec<LearnerSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    /// Extra balanced rounds run so that every instance gets a score.
    #[serde(default)]
    pub coverage_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardnessScores {
    method: HardnessMethod,
    ids: Vec<String>,
    scores: Vec<f64>,
    rounds: Vec<usize>,
    index: HashMap<String, usize>,
    provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    instance_id: String,
    score: f64,
    method: HardnessMethod,
    n_rounds: usize,
}

impl HardnessScores {
    pub fn from_pairs(
        method: HardnessMethod,
        pairs: impl IntoIterator<Item = (String, f64)>,
    ) -> Self {
        Self::from_rows(method, pairs.into_iter().map(|(id, s)| (id, s, 1)), None)
    }

    pub(crate) fn from_rows(
        method: HardnessMethod,
        rows: impl IntoIterator<Item = (String, f64, usize)>,
        provenance: Option<Provenance>,
    ) -> Self {
        let mut out = HardnessScores {
            method,
            ids: Vec::new(),
            scores: Vec::new(),
            rounds: Vec::new(),
            index: HashMap::new(),
            provenance,
        };
        for (id, s, r) in rows {
            if let Some(&i) = out.index.get(&id) {
                out.scores[i] = s;
                out.rounds[i] = r;
                continue;
            }
            out.index.insert(id.clone(), out.ids.len());
            out.ids.push(id);
            out.scores.push(s);
            out.rounds.push(r);
        }
        out
    }

    pub fn method(&self) -> HardnessMethod {
        self.method
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.index.get(id).map(|&i| self.scores[i])
    }

    pub fn n_rounds(&self, id: &str) -> Option<usize> {
        self.index.get(id).map(|&i| self.rounds[i])
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.scores
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.scores.iter().copied())
    }

    /// Sidecar path holding the provenance next to a scores CSV.
    pub fn provenance_path(csv_path: &Path) -> PathBuf {
        let mut name = csv_path
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_default();
        name.push(".provenance.json");
        csv_path.with_file_name(name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for i in 0..self.len() {
            w.serialize(ScoreRow {
                instance_id: self.ids[i].clone(),
                score: self.scores[i],
                method: self.method,
                n_rounds: self.rounds[i],
            })?;
        }
        w.flush()?;
        if let Some(p) = &self.provenance {
            std::fs::write(
                Self::provenance_path(path),
                serde_json::to_string_pretty(p)?,
            )?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        let mut method = None;
        for rec in r.deserialize() {
            let row: ScoreRow = rec?;
            if !(0.0..=1.0).contains(&row.score) {
                return Err(Error::Data(format!(
                    "hardness score {} for `{}` outside [0, 1]",
                    row.score, row.instance_id
                )));
            }
            match method {
                None => method = Some(row.method),
                Some(m) if m != row.method => {
                    return Err(Error::Data("scores file mixes hardness methods".into()));
                }
                _ => {}
            }
            rows.push((row.instance_id, row.score, row.n_rounds));
        }
        let method = method.ok_or_else(|| Error::EmptyFile(path.display().to_string()))?;
        let side = Self::provenance_path(path);
        let provenance = if side.exists() {
            Some(serde_json::from_str(&std::fs::read_to_string(side)?)?)
        } else {
            None
        };
        Ok(Self::from_rows(method, rows, provenance))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let s = HardnessScores::from_rows(
            HardnessMethod::Influence,
            [("a".to_string(), 0.25, 5), ("b".to_string(), 1.0, 6)],
            Some(Provenance {
                method: HardnessMethod::Influence,
                protocol: CvProtocol::default(),
                pool: None,
                l2: Some(1e-4),
                coverage_rounds: 2,
            }),
        );
        s.write_csv(&path).unwrap();
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("instance_id,score,method,n_rounds\n"));
        let back = HardnessScores::read_csv(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.n_rounds("b"), Some(6));
    }

    #[test]
    fn protocol_validation() {
        assert!(CvProtocol::default().validate().is_ok());
        let mut p = CvProtocol::default();
        p.seeds[1] = p.seeds[0];
        assert!(p.validate().is_err());
        p.folds = 1;
        assert!(p.validate().is_err());
    }
}
