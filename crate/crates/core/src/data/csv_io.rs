use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{CategoricalColumn, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub label_column: String,
    pub id_column: Option<String>,
    /// Label value mapped to class 1. When absent, `"0"/"1"` map to
    /// themselves and any other pair maps lexicographically (first → 0).
    pub positive_value: Option<String>,
    /// Columns kept as strings for later one-hot encoding.
    pub categorical_columns: Vec<String>,
    /// Cell values treated as missing (after trimming).
    pub missing_values: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            label_column: "label".into(),
            id_column: None,
            positive_value: None,
            categorical_columns: Vec::new(),
            missing_values: vec![String::new()],
        }
    }
}

impl CsvOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        CsvOptions {
            label_column: label_column.into(),
            ..Default::default()
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyFile(path.display().to_string()));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let label_idx = find(&opts.label_column)?;
    let id_idx = opts.id_column.as_deref().map(find).transpose()?;
    let cat_idx = opts
        .categorical_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let numeric_idx: Vec<usize> = (0..header.len())
        .filter(|&j| j != label_idx && Some(j) != id_idx && !cat_idx.contains(&j))
        .collect();

    let is_missing = |cell: &str| opts.missing_values.iter().any(|m| m == cell);

    let mut raw_labels = Vec::new();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut cats: Vec<Vec<Option<String>>> = vec![Vec::new(); cat_idx.len()];
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |j: usize| record.get(j).unwrap_or("").trim();
        raw_labels.push(cell(label_idx).to_string());
        ids.push(match id_idx {
            Some(j) => cell(j).to_string(),
            None => row_no.to_string(),
        });
        for &j in &numeric_idx {
            let c = cell(j);
            let v = if is_missing(c) {
                f64::NAN
            } else {
                c.parse::<f64>().unwrap_or(f64::NAN)
            };
            values.push(v);
        }
        for (k, &j) in cat_idx.iter().enumerate() {
            let c = cell(j);
            cats[k].push((!is_missing(c)).then(|| c.to_string()));
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyFile(path.display().to_string()));
    }

    let labels = map_labels(&raw_labels, opts.positive_value.as_deref())?;
    let features = Array2::from_shape_vec((labels.len(), numeric_idx.len()), values)
        .map_err(|e| Error::Data(e.to_string()))?;
    let names = numeric_idx.iter().map(|&j| header[j].clone()).collect();
    let categorical = opts
        .categorical_columns
        .iter()
        .cloned()
        .zip(cats)
        .map(|(name, values)| CategoricalColumn { name, values })
        .collect();
    Dataset::with_categorical(ids, features, labels, names, categorical)
}

fn map_labels(raw: &[String], positive: Option<&str>) -> Result<Vec<u8>> {
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    if distinct.len() != 2 {
        return Err(Error::LabelCardinality(distinct.len()));
    }
    let positive = match positive {
        Some(p) => {
            if !distinct.contains(p) {
                return Err(Error::Config(format!(
                    "positive label `{p}` not among observed labels {distinct:?}"
                )));
            }
            p
        }
        // BTreeSet iterates in lexicographic order, so "1" follows "0".
        None => *distinct.iter().nth(1).expect("two labels"),
    };
    Ok(raw.iter().map(|v| u8::from(v == positive)).collect())
}

/// Writes `id, <features>, <categorical>, <label_column>`; missing cells are empty.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend(dataset.feature_names().iter().cloned());
    header.extend(dataset.categorical().iter().map(|c| c.name.clone()));
    header.push(label_column.to_string());
    w.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut rec = vec![dataset.ids()[i].clone()];
        rec.extend(dataset.row(i).iter().map(|v| {
            if v.is_nan() {
                String::new()
            } else {
                v.to_string()
            }
        }));
        rec.extend(
            dataset
                .categorical()
                .iter()
                .map(|c| c.values[i].clone().unwrap_or_default()),
        );
        rec.push(dataset.labels()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn maps_two_string_labels() {
        let f = tmp_csv("x,y,label\n1,2,a\n3,4,b\n5,6,a\n");
        let ds = load_csv(f.path(), &CsvOptions::new("label")).unwrap();
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.feature_names(), &["x".to_string(), "y".to_string()]);
        assert_eq!(
            ds.ids(),
            &["0".to_string(), "1".to_string(), "2".to_string()]
        );
    }

    #[test]
    fn explicit_positive_value() {
        let f = tmp_csv("x,label\n1,a\n3,b\n");
        let mut opts = CsvOptions::new("label");
        opts.positive_value = Some("a".into());
        let ds = load_csv(f.path(), &opts).unwrap();
        assert_eq!(ds.labels(), &[1, 0]);
    }

    #[test]
    fn empty_cell_is_missing() {
        let f = tmp_csv("x,y,label\n1,,0\n3,4,1\n");
        let ds = load_csv(f.path(), &CsvOptions::new("label")).unwrap();
        assert!(ds.row(0)[1].is_nan());
        assert_eq!(ds.features().iter().filter(|v| v.is_nan()).count(), 1);
    }

    #[test]
    fn three_labels_is_an_error() {
        let f = tmp_csv("x,label\n1,a\n2,b\n3,c\n");
        let err = load_csv(f.path(), &CsvOptions::new("label")).unwrap_err();
        assert!(err.to_string().contains("label cardinality"));
    }

    #[test]
    fn missing_label_column() {
        let f = tmp_csv("x,y\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), &CsvOptions::new("label")),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn header_only_is_empty() {
        let f = tmp_csv("x,label\n");
        assert!(matches!(
            load_csv(f.path(), &CsvOptions::new("label")),
            Err(Error::EmptyFile(_))
        ));
    }

    #[test]
    fn id_and_categorical_columns() {
        let f = tmp_csv("pid,color,x,label\np1,red,1,0\np2,,2,1\n");
        let mut opts = CsvOptions::new("label");
        opts.id_column = Some("pid".into());
        opts.categorical_columns = vec!["color".into()];
        let ds = load_csv(f.path(), &opts).unwrap();
        assert_eq!(ds.ids(), &["p1".to_string(), "p2".to_string()]);
        assert_eq!(ds.n_features(), 1);
        assert_eq!(
            ds.categorical()[0].values,
            vec![Some("red".to_string()), None]
        );
    }

    #[test]
    fn write_then_load_preserves_values() {
        let ds = Dataset::from_rows(&[vec![1.5, f64::NAN], vec![-2.0, 3.0]], vec![1, 0]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, f.path(), "label").unwrap();
        let mut opts = CsvOptions::new("label");
        opts.id_column = Some("id".into());
        let back = load_csv(f.path(), &opts).unwrap();
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(back.ids(), ds.ids());
        assert_eq!(back.row(0)[0], 1.5);
        assert!(back.row(0)[1].is_nan());
    }
}
