//! The classifier being explained, seen only through label queries.

use alloc::vec::Vec;

use crate::dataset::Instances;
use crate::error::{Error, Result};
use crate::math;

/// A frozen classifier answering batch queries.
///
/// `predict` must agree with the argmax of `predict_proba` (ties to the lowest
/// class index) and repeated calls must return identical answers.
pub trait Oracle: Send + Sync {
    fn class_count(&self) -> usize;

    /// Number of values per instance the oracle expects.
    fn feature_count(&self) -> usize;

    fn predict_proba(&self, rows: &Instances) -> Result<Vec<Vec<f64>>>;

    fn predict(&self, rows: &Instances) -> Result<Vec<usize>> {
        Ok(self.predict_proba(rows)?.iter().map(|p| math::argmax(p)).collect())
    }

    /// Short human-readable description, e.g. `mlp:20,20`.
    fn describe(&self) -> alloc::string::String {
        alloc::string::String::from("oracle")
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn class_count(&self) -> usize {
        (**self).class_count()
    }
    fn feature_count(&self) -> usize {
        (**self).feature_count()
    }
    fn predict_proba(&self, rows: &Instances) -> Result<Vec<Vec<f64>>> {
        (**self).predict_proba(rows)
    }
    fn predict(&self, rows: &Instances) -> Result<Vec<usize>> {
        (**self).predict(rows)
    }
    fn describe(&self) -> alloc::string::String {
        (**self).describe()
    }
}

impl<O: Oracle + ?Sized> Oracle for alloc::boxed::Box<O> {
    fn class_count(&self) -> usize {
        (**self).class_count()
    }
    fn feature_count(&self) -> usize {
        (**self).feature_count()
    }
    fn predict_proba(&self, rows: &Instances) -> Result<Vec<Vec<f64>>> {
        (**self).predict_proba(rows)
    }
    fn predict(&self, rows: &Instances) -> Result<Vec<usize>> {
        (**self).predict(rows)
    }
    fn describe(&self) -> alloc::string::String {
        (**self).describe()
    }
}

/// Labels a batch, checking the batch width against the oracle first.
pub fn predict_batch(oracle: &dyn Oracle, rows: &Instances) -> Result<Vec<usize>> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    if rows.width() != oracle.feature_count() {
        return Err(Error::SchemaMismatch { expected: oracle.feature_count(), found: rows.width() });
    }
    let labels = oracle.predict(rows)?;
    debug_assert_eq!(labels.len(), rows.len());
    Ok(labels)
}

/// Oracle that answers the same class for every input.
#[derive(Debug, Clone)]
pub struct ConstantOracle {
    pub class: usize,
    pub classes: usize,
    pub features: usize,
}

impl Oracle for ConstantOracle {
    fn class_count(&self) -> usize {
        self.classes
    }
    fn feature_count(&self) -> usize {
        self.features
    }
    fn predict_proba(&self, rows: &Instances) -> Result<Vec<Vec<f64>>> {
        let mut p = alloc::vec![0.0; self.classes];
        p[self.class] = 1.0;
        Ok(alloc::vec![p; rows.len()])
    }
    fn describe(&self) -> alloc::string::String {
        alloc::format!("constant:{}", self.class)
    }
}

/// Wraps a plain function of one instance as an oracle.
pub struct FnOracle<F> {
    pub classes: usize,
    pub features: usize,
    pub f: F,
}

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&[f64]) -> usize + Send + Sync,
{
    fn class_count(&self) -> usize {
        self.classes
    }
    fn feature_count(&self) -> usize {
        self.features
    }
    fn predict_proba(&self, rows: &Instances) -> Result<Vec<Vec<f64>>> {
        Ok(rows
            .rows()
            .map(|r| {
                let mut p = alloc::vec![0.0; self.classes];
                p[(self.f)(r)] = 1.0;
                p
            })
            .collect())
    }
    fn predict(&self, rows: &Instances) -> Result<Vec<usize>> {
        Ok(rows.rows().map(|r| (self.f)(r)).collect())
    }
    fn describe(&self) -> alloc::string::String {
        "function".into()
    }
}
