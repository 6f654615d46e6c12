use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_in, ExperimentConfig, FilterMethod, Prepared, RejectMethod, Setup};
use crate::error::{Error, Result};
use crate::evaluation::{write_table_csv, SelectiveMetrics, TableRow};
use crate::hardness::{HardnessMethod, HardnessScores};
use crate::selective::ScoreKind;

/// One configuration of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Filtering measure of the row's group (`None` for the standard row).
    pub filter: Option<HardnessMethod>,
    /// Rejection criterion of the row's group.
    pub criterion: Option<ScoreKind>,
    pub setup: Setup,
    /// Run directory name, shared by rows that run the same configuration.
    pub key: String,
    #[serde(skip)]
    pub config: ExperimentConfig,
}

fn kind_label(k: ScoreKind) -> &'static str {
    match k {
        ScoreKind::Confidence => "C",
        ScoreKind::Certainty => "U",
    }
}

fn reject_method(k: ScoreKind) -> RejectMethod {
    match k {
        ScoreKind::Confidence => RejectMethod::Confidence,
        ScoreKind::Certainty => RejectMethod::Certainty,
    }
}

/// The 13 configurations: for each (measure, criterion) pair reject-only,
/// both and filter-only, then the standard model.
pub fn comparison_configs(base: &ExperimentConfig) -> Vec<ComparisonRow> {
    let mut rows = Vec::with_capacity(13);
    let variant =
        |filter: FilterMethod, reject: RejectMethod, score: Option<ScoreKind>| ExperimentConfig {
            filter_method: filter,
            reject_method: reject,
            score_kind: score,
            ..base.clone()
        };
    for method in [HardnessMethod::InstanceHardness, HardnessMethod::Influence] {
        for kind in [ScoreKind::Confidence, ScoreKind::Certainty] {
            let (m, k) = (
                method.as_str().to_lowercase(),
                kind_label(kind).to_lowercase(),
            );
            let setups = [
                (
                    Setup::RejectOnly,
                    format!("reject_{k}"),
                    variant(FilterMethod::None, reject_method(kind), None),
                ),
                (
                    Setup::Both,
                    format!("{m}_{k}"),
                    variant(method.into(), reject_method(kind), None),
                ),
                (
                    Setup::FilterOnly,
                    format!("{m}_filter_{k}"),
                    variant(method.into(), RejectMethod::None, Some(kind)),
                ),
            ];
            for (setup, key, config) in setups {
                rows.push(ComparisonRow {
                    filter: Some(method),
                    criterion: Some(kind),
                    setup,
                    key,
                    config,
                });
            }
        }
    }
    rows.push(ComparisonRow {
        filter: None,
        criterion: None,
        setup: Setup::Standard,
        key: "standard".into(),
        config: variant(FilterMethod::None, RejectMethod::None, None),
    });
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
    pub keys: Vec<String>,
}

impl ComparisonTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_table_csv(&self.rows, path)
    }

    /// Row for a group and setup, if present.
    pub fn find(
        &self,
        filter: &str,
        reject: &str,
        has_t_f: bool,
        has_t_r: bool,
    ) -> Option<&TableRow> {
        self.rows.iter().find(|r| {
            r.filter == filter
                && r.reject == reject
                && r.t_f.is_some() == has_t_f
                && r.t_r.is_some() == has_t_r
        })
    }

    pub fn standard(&self) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.filter == "--" && r.reject == "--")
    }
}

type RunResult = std::result::Result<TableRow, String>;

/// Runs every configuration and writes `compare.csv` plus one run
/// directory per distinct configuration under `out`. A failing
/// configuration yields a row annotated with its error.
pub fn run_comparison(
    config: &ExperimentConfig,
    prepared: &Prepared,
    out: &Path,
) -> Result<ComparisonTable> {
    config.validate()?;
    if prepared.test.is_none() {
        return Err(Error::Config("compare needs test_path".into()));
    }
    std::fs::create_dir_all(out)?;
    let rows = comparison_configs(config);

    let scores: HashMap<HardnessMethod, std::result::Result<HardnessScores, String>> =
        [HardnessMethod::InstanceHardness, HardnessMethod::Influence]
            .into_par_iter()
            .map(|m| {
                let s =
                    super::compute_hardness(config, &prepared.train, m).map_err(|e| e.to_string());
                if let Err(e) = &s {
                    log::warn!("{} scores failed: {e}", m.as_str());
                }
                (m, s)
            })
            .collect();

    let mut distinct: Vec<&ComparisonRow> = Vec::new();
    for r in &rows {
        if !distinct.iter().any(|d| d.key == r.key) {
            distinct.push(r);
        }
    }
    let results: HashMap<String, RunResult> = distinct
        .par_iter()
        .map(|r| {
            let scores = match r.config.filter_method.hardness() {
                Some(m) => match &scores[&m] {
                    Ok(s) => Some(s),
                    Err(e) => return (r.key.clone(), Err(format!("{} scores: {e}", m.as_str()))),
                },
                None => None,
            };
            let res = run_in(&r.config, prepared, scores, &out.join(&r.key))
                .map(|o| o.row)
                .map_err(|e| e.to_string());
            if let Err(e) = &res {
                log::warn!("configuration {} failed: {e}", r.key);
            }
            (r.key.clone(), res)
        })
        .collect();

    let table_rows = rows
        .iter()
        .map(|r| {
            let filter = r.filter.map_or("--", HardnessMethod::as_str).to_string();
            let reject = r.criterion.map_or("--", kind_label).to_string();
            match &results[&r.key] {
                Ok(run_row) => TableRow {
                    filter,
                    reject,
                    ..run_row.clone()
                },
                Err(e) => TableRow {
                    filter,
                    reject,
                    t_f: None,
                    t_r: None,
                    metrics: SelectiveMetrics::default(),
                    annotation: format!("error: {e}"),
                },
            }
        })
        .collect();
    let table = ComparisonTable {
        rows: table_rows,
        keys: rows.iter().map(|r| r.key.clone()).collect(),
    };
    table.write_csv(&out.join(super::files::COMPARE))?;
    Ok(table)
}
