//! CSV datasets, model files and train/validation splitting.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Label, LabeledDataset, LabeledExample, ThresholdedScorer};

pub const LABEL_COLUMN: &str = "label";

/// How the label column is turned into binary labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum LabelMapping {
    /// `1`/`+1` positive, `0`/`-1` negative.
    #[default]
    Binary,
    /// One-vs-all: this class value is positive, every other value negative.
    PositiveClass(String),
}

/// Reads a headered CSV whose `label` column holds the class and whose
/// remaining columns, in order, are numeric features.
pub fn read_csv<R: Read>(reader: R, mapping: &LabelMapping) -> Result<LabeledDataset> {
    let (features, raw_labels) = read_raw(reader)?;
    let labels = raw_labels
        .iter()
        .map(|raw| match mapping {
            LabelMapping::Binary => Label::parse(raw),
            LabelMapping::PositiveClass(class) => Ok(if raw.trim() == class.as_str() {
                Label::Positive
            } else {
                Label::Negative
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(
        features
            .into_iter()
            .zip(labels)
            .map(|(x, y)| LabeledExample::new(x, y))
            .collect(),
    )
}

pub fn load_csv(path: &Path, mapping: &LabelMapping) -> Result<LabeledDataset> {
    read_csv(BufReader::new(File::open(path)?), mapping)
}

/// Distinct raw label values of a CSV, sorted, for one-vs-all loops.
pub fn label_values(path: &Path) -> Result<Vec<String>> {
    let (_, labels) = read_raw(BufReader::new(File::open(path)?))?;
    let mut values: Vec<String> = labels.into_iter().map(|l| l.trim().to_string()).collect();
    values.sort();
    values.dedup();
    Ok(values)
}

fn read_raw<R: Read>(reader: R) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| Error::MissingColumn(LABEL_COLUMN.into()))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let mut x = Vec::with_capacity(headers.len().saturating_sub(1));
        for (col, field) in record.iter().enumerate() {
            if col == label_col {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidArgument(format!(
                    "row {row}, column `{}`: cannot parse {field:?} as a number",
                    &headers[col]
                ))
            })?;
            x.push(v);
        }
        features.push(x);
        labels.push(record[label_col].to_string());
    }
    Ok((features, labels))
}

/// Writes `f0,...,f{d-1},label` with labels as `1` / `-1`.
pub fn write_csv<W: Write>(data: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.dim()).map(|k| format!("f{k}")).collect();
    header.push(LABEL_COLUMN.into());
    w.write_record(&header)?;
    for e in data.examples() {
        let mut row: Vec<String> = e.features.iter().map(f64::to_string).collect();
        row.push(if e.label.is_positive() { "1" } else { "-1" }.into());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &LabeledDataset, path: &Path) -> Result<()> {
    write_csv(data, BufWriter::new(File::create(path)?))
}

pub fn save_model(scorer: &ThresholdedScorer, path: &Path) -> Result<()> {
    save_json(scorer, path)
}

pub fn load_model(path: &Path) -> Result<ThresholdedScorer> {
    let raw: ThresholdedScorer = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    ThresholdedScorer::new(raw.weights, raw.bias, raw.thresholds)
}

/// Pretty-printed JSON with a trailing newline.
pub fn save_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Seeded split keeping the class proportions: each class contributes
/// `round(val_fraction * count)` examples to validation, clamped so both
/// sides keep at least one example of every class.
pub fn stratified_split(
    data: &LabeledDataset,
    val_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {val_fraction} must lie in (0, 1)"
        )));
    }
    if data.n_pos() < 2 || data.n_neg() < 2 {
        return Err(Error::InvalidArgument(
            "splitting needs at least two examples of each class".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for positive in [true, false] {
        let mut idx: Vec<usize> = data
            .examples()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label.is_positive() == positive)
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(&mut rng);
        let k = ((val_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        val_idx.extend_from_slice(&idx[..k]);
        train_idx.extend_from_slice(&idx[k..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok((data.subset(&train_idx)?, data.subset(&val_idx)?))
}
