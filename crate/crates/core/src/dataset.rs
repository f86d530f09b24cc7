//! Typed tabular data: schema, instance matrix, labelled tables, splitting.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::hash::Hasher;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Category labels in index order (categorical only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Axis range for display (continuous only).
    #[serde(default, rename = "range", skip_serializing_if = "Option::is_none")]
    pub display_range: Option<(f64, f64)>,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        FeatureSpec { name: name.into(), kind: FeatureKind::Continuous, categories: Vec::new(), display_range: None }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            display_range: None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == FeatureKind::Categorical
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            FeatureKind::Categorical => {
                if self.categories.len() < 2 {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature `{}` needs at least two categories",
                        self.name
                    )));
                }
                let distinct: BTreeSet<&String> = self.categories.iter().collect();
                if distinct.len() != self.categories.len() {
                    return Err(Error::InvalidSchema(format!("feature `{}` has duplicate categories", self.name)));
                }
            }
            FeatureKind::Continuous => {
                if let Some((lo, hi)) = self.display_range {
                    if lo.partial_cmp(&hi) != Some(core::cmp::Ordering::Less) {
                        return Err(Error::InvalidSchema(format!("feature `{}` has an empty range", self.name)));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub features: Vec<FeatureSpec>,
    pub label: FeatureSpec,
}

impl DatasetSchema {
    pub fn new(features: Vec<FeatureSpec>, label: FeatureSpec) -> Result<Self> {
        let schema = DatasetSchema { features, label };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for f in &self.features {
            f.validate()?;
            if !names.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate feature name `{}`", f.name)));
            }
        }
        if self.label.kind != FeatureKind::Categorical {
            return Err(Error::InvalidSchema("label must be categorical".into()));
        }
        self.label.validate()?;
        if names.contains(self.label.name.as_str()) {
            return Err(Error::InvalidSchema(format!("label `{}` is also a feature", self.label.name)));
        }
        Ok(())
    }

    /// Number of features (k).
    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn class_count(&self) -> usize {
        self.label.categories.len()
    }

    pub fn discrete_features(&self) -> Vec<usize> {
        (0..self.width()).filter(|&j| self.features[j].is_categorical()).collect()
    }

    pub fn continuous_features(&self) -> Vec<usize> {
        (0..self.width()).filter(|&j| !self.features[j].is_categorical()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Stable 64-bit fingerprint of names, kinds and categories.
    pub fn fingerprint(&self) -> u64 {
        let mut h = fnv::FnvHasher::default();
        for f in self.features.iter().chain(core::iter::once(&self.label)) {
            h.write(f.name.as_bytes());
            h.write_u8(0xff);
            h.write_u8(f.is_categorical() as u8);
            for c in &f.categories {
                h.write(c.as_bytes());
                h.write_u8(0xfe);
            }
        }
        h.finish()
    }

    /// Checks one raw instance against the schema.
    pub fn check_instance(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.width() {
            return Err(Error::SchemaMismatch { expected: self.width(), found: x.len() });
        }
        for (j, (&v, f)) in x.iter().zip(&self.features).enumerate() {
            let ok = match f.kind {
                FeatureKind::Continuous => v.is_finite(),
                FeatureKind::Categorical => v >= 0.0 && math::floor(v) == v && (v as usize) < f.categories.len(),
            };
            if !ok {
                return Err(Error::InvalidValue { row: 0, feature: self.features[j].name.clone() });
            }
        }
        Ok(())
    }
}

/// Row-major matrix of raw instance values. Categorical values are stored as
/// their category index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Instances {
    width: usize,
    values: Vec<f64>,
}

impl Instances {
    pub fn new(width: usize) -> Self {
        Instances { width, values: Vec::new() }
    }

    pub fn from_flat(width: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 && !values.is_empty() || width > 0 && !values.len().is_multiple_of(width) {
            return Err(Error::InvalidArgument(format!("{} values do not fill rows of width {width}", values.len())));
        }
        Ok(Instances { width, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(width: usize, rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut out = Instances::new(width);
        for r in rows {
            out.push(r.as_ref())?;
        }
        Ok(out)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.width {
            return Err(Error::SchemaMismatch { expected: self.width, found: row.len() });
        }
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on width 0
        self.values.chunks_exact(self.width.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn select(&self, indices: &[usize]) -> Instances {
        let mut values = Vec::with_capacity(indices.len() * self.width);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Instances { width: self.width, values }
    }
}

/// Labelled, schema-validated table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    pub schema: DatasetSchema,
    instances: Instances,
    labels: Vec<usize>,
}

impl DataTable {
    pub fn new(schema: DatasetSchema, instances: Instances, labels: Vec<usize>) -> Result<Self> {
        schema.validate()?;
        if instances.width() != schema.width() {
            return Err(Error::SchemaMismatch { expected: schema.width(), found: instances.width() });
        }
        if instances.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                instances.len(),
                labels.len()
            )));
        }
        let classes = schema.class_count();
        for (i, (row, &y)) in instances.rows().zip(&labels).enumerate() {
            schema.check_instance(row).map_err(|e| match e {
                Error::InvalidValue { feature, .. } => Error::InvalidValue { row: i, feature },
                other => other,
            })?;
            if y >= classes {
                return Err(Error::InvalidValue { row: i, feature: schema.label.name.clone() });
            }
        }
        Ok(DataTable { schema, instances, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn instances(&self) -> &Instances {
        &self.instances
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.instances.row(i)
    }

    pub fn class_count(&self) -> usize {
        self.schema.class_count()
    }

    pub fn subset(&self, indices: &[usize]) -> DataTable {
        DataTable {
            schema: self.schema.clone(),
            instances: self.instances.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Appends the rows of `other`, which must share this table's schema.
    pub fn concat(&self, other: &DataTable) -> Result<DataTable> {
        if other.schema.fingerprint() != self.schema.fingerprint() {
            return Err(Error::InvalidArgument("tables have different schemas".into()));
        }
        let mut instances = self.instances.clone();
        for r in other.instances.rows() {
            instances.push(r)?;
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(DataTable { schema: self.schema.clone(), instances, labels })
    }

    /// Observed (min, max) of a continuous column, `None` when empty.
    pub fn observed_range(&self, feature: usize) -> Option<(f64, f64)> {
        self.instances.rows().map(|r| r[feature]).fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Fills absent continuous display ranges with the observed range widened
    /// by 5% on each side.
    pub fn fill_display_ranges(&mut self) {
        for j in 0..self.schema.width() {
            if self.schema.features[j].is_categorical() || self.schema.features[j].display_range.is_some() {
                continue;
            }
            let (lo, hi) = self.observed_range(j).unwrap_or((0.0, 1.0));
            let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5f64.max(0.05 * math::abs(lo)) };
            self.schema.features[j].display_range = Some((lo - pad, hi + pad));
        }
    }
}

/// Random train/test partition. `|test| = round(n * test_fraction)`; both
/// parts keep the original relative row order.
pub fn split_train_test(table: &DataTable, test_fraction: f64, seed: u64) -> Result<(DataTable, DataTable)> {
    let (train_idx, test_idx) = split_indices(table.len(), test_fraction, seed)?;
    Ok((table.subset(&train_idx), table.subset(&test_idx)))
}

pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test_fraction {test_fraction} not in (0, 1)")));
    }
    let n_test = math::round(n as f64 * test_fraction) as usize;
    if n < 2 || n_test == 0 || n_test >= n {
        return Err(Error::DegenerateSplit { n, fraction: test_fraction });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}
