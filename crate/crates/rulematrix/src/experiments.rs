//! Repeated-seed evaluation shared by the CLI, the examples and the
//! acceptance suite.

use std::time::Duration;

use rulematrix_core::dataset::split_train_test;
use rulematrix_core::induce::{induce, DatasetRef, ExplanationBundle, InduceConfig};
use rulematrix_core::{math, DataTable, Oracle};
use serde::Serialize;

use crate::teacher::TeacherSpec;
use crate::Result;

pub const DEFAULT_TEST_FRACTION: f64 = 0.25;

/// A train/test split with the teacher trained on the training part.
pub struct Prepared {
    pub train: DataTable,
    pub test: DataTable,
    pub teacher: Box<dyn Oracle>,
}

pub fn prepare(table: &DataTable, spec: &TeacherSpec, split_seed: u64, test_fraction: f64, timeout: Duration) -> Result<Prepared> {
    let (train, test) = split_train_test(table, test_fraction, split_seed)?;
    let teacher = spec.build(&train, timeout)?;
    Ok(Prepared { train, test, teacher })
}

/// Runs the pipeline on a prepared split and stamps the bundle with where
/// the data and the teacher came from.
pub fn induce_prepared(
    prepared: &Prepared,
    dataset: &str,
    spec: &TeacherSpec,
    split_seed: u64,
    test_fraction: f64,
    config: &InduceConfig,
) -> Result<ExplanationBundle> {
    let mut bundle = induce(&prepared.train, Some(&prepared.test), &*prepared.teacher, config)?;
    bundle.dataset = Some(DatasetRef { name: dataset.to_string(), test_fraction, split_seed });
    bundle.teacher.description = spec.to_string();
    Ok(bundle)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub dataset: String,
    pub runs: usize,
    pub mean_fidelity: f64,
    pub sd_fidelity: f64,
    /// Rule count, default rule included.
    pub mean_length: f64,
    pub sd_length: f64,
    pub mean_teacher_accuracy: f64,
}

impl EvalRow {
    pub fn table_line(&self) -> String {
        format!(
            "{:<16} fidelity {:.3} ({:.3})  length {:.1} ({:.1})  teacher accuracy {:.3}  runs {}",
            self.dataset, self.mean_fidelity, self.sd_fidelity, self.mean_length, self.sd_length, self.mean_teacher_accuracy, self.runs
        )
    }
}

/// For each seed `s`: split with seed `s`, train the teacher with seed `s`,
/// induce with seed `s`, and measure fidelity on the test split.
pub fn evaluate(
    table: &DataTable,
    dataset: &str,
    spec: &TeacherSpec,
    seeds: &[u64],
    test_fraction: f64,
    base: &InduceConfig,
    timeout: Duration,
) -> Result<EvalRow> {
    evaluate_observed(table, dataset, spec, seeds, test_fraction, base, timeout, &mut |_| {})
}

/// As [`evaluate`], handing every induced bundle to `observe`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_observed(
    table: &DataTable,
    dataset: &str,
    spec: &TeacherSpec,
    seeds: &[u64],
    test_fraction: f64,
    base: &InduceConfig,
    timeout: Duration,
    observe: &mut dyn FnMut(&ExplanationBundle),
) -> Result<EvalRow> {
    let mut fidelity = Vec::with_capacity(seeds.len());
    let mut length = Vec::with_capacity(seeds.len());
    let mut accuracy = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let spec = spec.with_seed(seed);
        let prepared = prepare(table, &spec, seed, test_fraction, timeout)?;
        let config = InduceConfig { seed, ..base.clone() };
        let bundle = induce_prepared(&prepared, dataset, &spec, seed, test_fraction, &config)?;
        observe(&bundle);
        tracing::debug!(dataset, seed, fidelity = ?bundle.overall.fidelity_test, length = bundle.rule_list.len(), "evaluated");
        fidelity.push(bundle.overall.fidelity_test.unwrap_or(bundle.overall.fidelity_train));
        length.push(bundle.rule_list.len() as f64);
        accuracy.push(bundle.overall.teacher_accuracy_test.unwrap_or(bundle.overall.teacher_accuracy_train));
    }
    Ok(EvalRow {
        dataset: dataset.to_string(),
        runs: seeds.len(),
        mean_fidelity: math::mean(&fidelity),
        sd_fidelity: math::sample_std(&fidelity),
        mean_length: math::mean(&length),
        sd_length: math::sample_std(&length),
        mean_teacher_accuracy: math::mean(&accuracy),
    })
}

/// Test-set accuracy of `oracle`.
pub fn accuracy(oracle: &dyn Oracle, data: &DataTable) -> Result<f64> {
    let predicted = rulematrix_core::oracle::predict_batch(oracle, data.instances())?;
    let hits = predicted.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / data.len().max(1) as f64)
}

/// `train` with every `stride`-th row of `indices` appended once more.
pub fn oversample(train: &DataTable, indices: &[usize], stride: usize) -> Result<DataTable> {
    let extra: Vec<usize> = indices.iter().copied().step_by(stride.max(1)).collect();
    Ok(train.concat(&train.subset(&extra))?)
}
