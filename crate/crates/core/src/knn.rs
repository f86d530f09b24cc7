//! 1-nearest-neighbour baseline teacher.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{DataTable, FeatureKind, Instances};
use crate::error::{Error, Result};
use crate::math;
use crate::oracle::Oracle;

/// Memorizes the training table. Continuous distances are measured in
/// z-score units; a categorical mismatch costs 1. Distance ties go to the
/// earliest training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestNeighbor {
    rows: Instances,
    labels: Vec<usize>,
    scales: Vec<Option<f64>>,
    classes: usize,
}

impl NearestNeighbor {
    pub fn fit(train: &DataTable) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::NoData);
        }
        let scales = train
            .schema
            .features
            .iter()
            .enumerate()
            .map(|(j, f)| match f.kind {
                FeatureKind::Categorical => None,
                FeatureKind::Continuous => {
                    let sd = math::sample_std(&train.instances().column(j));
                    Some(if sd > 1e-12 { sd } else { 1.0 })
                }
            })
            .collect();
        Ok(NearestNeighbor {
            rows: train.instances().clone(),
            labels: train.labels().to_vec(),
            scales,
            classes: train.class_count(),
        })
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.scales)
            .map(|((x, y), s)| match s {
                Some(s) => {
                    let d = (x - y) / s;
                    d * d
                }
                None => (x != y) as u8 as f64,
            })
            .sum()
    }

    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, r) in self.rows.rows().enumerate() {
            let d = self.distance(x, r);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

impl Oracle for NearestNeighbor {
    fn class_count(&self) -> usize {
        self.classes
    }

    fn feature_count(&self) -> usize {
        self.rows.width()
    }

    fn predict_proba(&self, rows: &Instances) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .predict(rows)?
            .into_iter()
            .map(|y| {
                let mut p = alloc::vec![0.0; self.classes];
                p[y] = 1.0;
                p
            })
            .collect())
    }

    fn predict(&self, rows: &Instances) -> Result<Vec<usize>> {
        if rows.width() != self.feature_count() {
            return Err(Error::SchemaMismatch { expected: self.feature_count(), found: rows.width() });
        }
        Ok(rows.rows().map(|r| self.labels[self.nearest(r)]).collect())
    }

    fn describe(&self) -> String {
        "knn".into()
    }
}
