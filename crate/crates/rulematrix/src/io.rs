//! Dataset file pairs (`<name>.csv` + `<name>.schema.json`) and JSON helpers.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rulematrix_core::{DataTable, DatasetSchema, FeatureKind, FeatureSpec, Instances};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do with rows that have an empty (or `?` / `NA`) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Fail with [`Error::MissingValue`] naming the first offending row.
    #[default]
    Reject,
    /// Skip the row.
    Drop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    pub missing: MissingPolicy,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA")
}

enum Column {
    Feature(usize),
    Label,
}

pub fn read_schema(path: &Path) -> Result<DatasetSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema: DatasetSchema = serde_json::from_str(&text)?;
    schema.validate()?;
    Ok(schema)
}

pub fn write_schema(path: &Path, schema: &DatasetSchema) -> Result<()> {
    write_json(path, schema)
}

/// Parses CSV with a header naming every feature and the label, in any order.
/// Row numbers in errors count data rows from 1.
pub fn read_csv(source: impl Read, schema: &DatasetSchema, options: LoadOptions) -> Result<DataTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = reader.headers()?.clone();
    let mut columns = Vec::with_capacity(header.len());
    let mut seen = vec![false; schema.width() + 1];
    for name in header.iter() {
        let col = if name == schema.label.name {
            seen[schema.width()] = true;
            Column::Label
        } else {
            let j = schema.feature_index(name).ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            seen[j] = true;
            Column::Feature(j)
        };
        columns.push(col);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let spec = schema.features.get(missing).unwrap_or(&schema.label);
        return Err(Error::MissingColumn(spec.name.clone()));
    }

    let mut instances = Instances::new(schema.width());
    let mut labels = Vec::new();
    let mut row = vec![0.0; schema.width()];
    let mut dropped = 0;
    'rows: for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1;
        let mut label = 0;
        for (cell, col) in record.iter().zip(&columns) {
            let spec = match col {
                Column::Feature(j) => &schema.features[*j],
                Column::Label => &schema.label,
            };
            if is_missing(cell) {
                match options.missing {
                    MissingPolicy::Reject => {
                        return Err(Error::MissingValue { row: line, column: spec.name.clone() });
                    }
                    MissingPolicy::Drop => {
                        dropped += 1;
                        continue 'rows;
                    }
                }
            }
            let value = parse_cell(spec, cell, line)?;
            match col {
                Column::Feature(j) => row[*j] = value,
                Column::Label => label = value as usize,
            }
        }
        instances.push(&row)?;
        labels.push(label);
    }
    if dropped > 0 {
        tracing::warn!(dropped, "rows with missing values skipped");
    }
    Ok(DataTable::new(schema.clone(), instances, labels)?)
}

fn parse_cell(spec: &FeatureSpec, cell: &str, row: usize) -> Result<f64> {
    match spec.kind {
        FeatureKind::Categorical => spec.category_index(cell).map(|k| k as f64).ok_or_else(|| {
            Error::UnknownCategory { row, column: spec.name.clone(), value: cell.to_string() }
        }),
        FeatureKind::Continuous => match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::NonNumeric { row, column: spec.name.clone(), value: cell.to_string() }),
        },
    }
}

/// Writes features in schema order followed by the label column.
pub fn write_csv(sink: impl Write, table: &DataTable) -> Result<()> {
    let schema = &table.schema;
    let mut writer = csv::Writer::from_writer(sink);
    let header = schema.features.iter().chain([&schema.label]).map(|f| f.name.as_str());
    writer.write_record(header)?;
    let mut record = Vec::with_capacity(schema.width() + 1);
    for (x, &y) in table.instances().rows().zip(table.labels()) {
        record.clear();
        for (v, f) in x.iter().zip(&schema.features) {
            record.push(match f.kind {
                FeatureKind::Categorical => f.categories[*v as usize].clone(),
                FeatureKind::Continuous => format!("{v}"),
            });
        }
        record.push(schema.label.categories[y].clone());
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads a dataset file pair from `dir`, filling absent display ranges from
/// the data.
pub fn load_dataset(dir: &Path, name: &str, options: LoadOptions) -> Result<DataTable> {
    let valid = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    let (csv_path, schema_path) = dataset_paths(dir, name);
    if !valid || !csv_path.is_file() || !schema_path.is_file() {
        return Err(Error::UnknownDataset(name.to_string()));
    }
    let schema = read_schema(&schema_path)?;
    let file = File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut table = read_csv(file, &schema, options)?;
    table.fill_display_ranges();
    Ok(table)
}

pub fn dataset_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.csv")), dir.join(format!("{name}.schema.json")))
}

/// Names of the complete dataset pairs in `dir`, sorted.
pub fn list_datasets(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str()?.strip_suffix(".schema.json").map(str::to_string))
        .filter(|n| dataset_paths(dir, n).0.is_file())
        .collect();
    names.sort();
    Ok(names)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
