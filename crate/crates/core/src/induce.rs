//! The end-to-end induction pipeline: estimate the data distribution, sample
//! and label synthetic instances, discretize, mine candidate antecedents,
//! train the rule list and compute display metrics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{DataTable, DatasetSchema, Instances};
use crate::density::estimate_distribution;
use crate::discretize::{mdl_discretize, Discretization, FeatureBins};
use crate::error::{Error, Result};
use crate::fpgrowth::fp_growth;
use crate::math;
use crate::metrics::{compute_metrics, RuleMetrics};
use crate::oracle::{predict_batch, Oracle};
use crate::rulelist::{CandidateAntecedent, Clause, Priors, Rule, RuleList};
use crate::sbrl::{train_rule_list_with_progress, McmcConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    pub min_support: f64,
    pub max_cardinality: usize,
    /// Keep at most this many itemsets, in mining order.
    pub max_candidates: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig { min_support: 0.02, max_cardinality: 3, max_candidates: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InduceConfig {
    /// Synthetic samples per training instance.
    pub sampling_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub miner: MinerConfig,
    #[serde(default)]
    pub priors: Priors,
    /// Its `seed` field is replaced by one derived from `seed`.
    #[serde(default)]
    pub mcmc: McmcConfig,
    /// Lists longer than this raise [`Warning::RuleListTooLong`].
    #[serde(default = "default_length_warning")]
    pub length_warning: usize,
}

fn default_length_warning() -> usize {
    60
}

impl Default for InduceConfig {
    fn default() -> Self {
        InduceConfig {
            sampling_rate: 4.0,
            seed: 0,
            miner: MinerConfig::default(),
            priors: Priors::default(),
            mcmc: McmcConfig::default(),
            length_warning: default_length_warning(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Warning {
    RuleListTooLong { length: usize, threshold: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherRef {
    pub description: String,
    pub classes: usize,
}

/// Where the training data came from, for tools that rebuild the teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: String,
    pub test_fraction: f64,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleOverall {
    pub fidelity_train: f64,
    pub fidelity_test: Option<f64>,
    pub teacher_accuracy_train: f64,
    pub teacher_accuracy_test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetRef>,
    pub schema: DatasetSchema,
    pub teacher: TeacherRef,
    pub sampling_rate: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub candidate_count: usize,
    pub discretization: Discretization,
    pub rule_list: RuleList,
    /// Metrics on the training data.
    pub per_rule: Vec<RuleMetrics>,
    pub overall: BundleOverall,
    #[serde(default)]
    pub warnings: Vec<Warning>,
}

/// Pipeline stage reported through the progress callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Estimating,
    Sampling,
    Labeling,
    Discretizing,
    Mining,
    Training,
    Evaluating,
    Done,
}

impl Stage {
    fn start(self) -> f64 {
        match self {
            Stage::Estimating => 0.0,
            Stage::Sampling => 0.02,
            Stage::Labeling => 0.05,
            Stage::Discretizing => 0.1,
            Stage::Mining => 0.15,
            Stage::Training => 0.2,
            Stage::Evaluating => 0.95,
            Stage::Done => 1.0,
        }
    }
}

/// Seed of the MCMC stage, decorrelated from the sampling seed.
pub fn mcmc_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1)
}

/// Turns sampled rows into transactions (one item per feature bin, features
/// with a single bin skipped), mines frequent itemsets and maps them back to
/// clauses.
pub fn mine_candidates(
    discretization: &Discretization,
    rows: &Instances,
    config: &MinerConfig,
) -> Result<Vec<CandidateAntecedent>> {
    let width = discretization.features.len();
    let mut offsets = Vec::with_capacity(width + 1);
    let mut next = 0u32;
    for j in 0..width {
        offsets.push(next);
        let bins = discretization.bin_count(j);
        if bins > 1 {
            next += bins as u32;
        }
    }
    offsets.push(next);
    if next == 0 {
        return Ok(Vec::new());
    }
    let transactions: Vec<Vec<u32>> = rows
        .rows()
        .map(|x| {
            (0..width)
                .filter(|&j| discretization.bin_count(j) > 1)
                .map(|j| offsets[j] + discretization.bin(j, x[j]) as u32)
                .collect()
        })
        .collect();
    let itemsets = fp_growth(&transactions, config.min_support, config.max_cardinality)?;
    let to_clause = |item: u32| {
        let j = offsets.partition_point(|&o| o <= item) - 1;
        let bin = (item - offsets[j]) as usize;
        match discretization.features[j] {
            FeatureBins::Continuous { .. } => {
                let (lo, hi) = discretization.interval(j, bin);
                Clause::interval(j, lo, hi)
            }
            FeatureBins::Categorical { .. } => Clause::category(j, bin),
        }
    };
    Ok(itemsets
        .into_iter()
        .take(config.max_candidates)
        .map(|s| CandidateAntecedent {
            clauses: s.items.iter().map(|&it| to_clause(it)).collect(),
            support_count: s.support_count,
        })
        .collect())
}

fn default_only(labels: &[usize], classes: usize, priors: &Priors) -> Result<RuleList> {
    let mut counts = vec![0usize; classes];
    for &y in labels {
        counts[y] += 1;
    }
    let n = labels.len() as f64;
    let output = counts.iter().map(|&k| (k as f64 + priors.alpha) / (n + classes as f64 * priors.alpha)).collect();
    RuleList::new(vec![Rule { clauses: Vec::new(), output, capture_count: labels.len() }], priors.clone(), 0.0)
}

/// Runs the whole pipeline. `test`, when given, adds held-out fidelity and
/// accuracy to the bundle.
pub fn induce(
    train: &DataTable,
    test: Option<&DataTable>,
    oracle: &dyn Oracle,
    config: &InduceConfig,
) -> Result<ExplanationBundle> {
    induce_with_progress(train, test, oracle, config, &mut |_, _| {})
}

/// As [`induce`], reporting `(stage, overall fraction in [0, 1])`.
pub fn induce_with_progress(
    train: &DataTable,
    test: Option<&DataTable>,
    oracle: &dyn Oracle,
    config: &InduceConfig,
    progress: &mut dyn FnMut(Stage, f64),
) -> Result<ExplanationBundle> {
    if train.is_empty() {
        return Err(Error::NoData);
    }
    if !(config.sampling_rate > 0.0 && config.sampling_rate.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("sampling rate {} must be > 0", config.sampling_rate)));
    }
    let classes = train.class_count();
    if oracle.class_count() != classes {
        return Err(Error::SchemaMismatch { expected: classes, found: oracle.class_count() });
    }
    let mut report = |s: Stage| progress(s, s.start());

    report(Stage::Estimating);
    let model = estimate_distribution(train)?;
    report(Stage::Sampling);
    let n_samples = (math::round(config.sampling_rate * train.len() as f64) as usize).max(1);
    let samples = model.sample(n_samples, config.seed)?;
    report(Stage::Labeling);
    let labels = predict_batch(oracle, &samples)?;
    report(Stage::Discretizing);
    let discretization = mdl_discretize(&train.schema, &samples, &labels);
    report(Stage::Mining);
    let pool = mine_candidates(&discretization, &samples, &config.miner)?;

    report(Stage::Training);
    let single_class = labels.iter().all(|&y| y == labels[0]);
    let rule_list = if pool.is_empty() || single_class {
        default_only(&labels, classes, &config.priors)?
    } else {
        let mcmc = McmcConfig { seed: mcmc_seed(config.seed), ..config.mcmc.clone() };
        let (lo, hi) = (Stage::Training.start(), Stage::Evaluating.start());
        train_rule_list_with_progress(&samples, &labels, classes, &pool, &config.priors, &mcmc, &mut |f| {
            progress(Stage::Training, lo + (hi - lo) * f)
        })?
    };

    progress(Stage::Evaluating, Stage::Evaluating.start());
    let train_metrics = compute_metrics(&rule_list, train, oracle)?;
    let test_metrics = match test {
        Some(t) if !t.is_empty() => Some(compute_metrics(&rule_list, t, oracle)?),
        _ => None,
    };
    let mut warnings = Vec::new();
    if rule_list.len() > config.length_warning {
        warnings.push(Warning::RuleListTooLong { length: rule_list.len(), threshold: config.length_warning });
    }
    progress(Stage::Done, 1.0);
    Ok(ExplanationBundle {
        v: crate::PAYLOAD_VERSION,
        dataset: None,
        schema: train.schema.clone(),
        teacher: TeacherRef { description: oracle.describe(), classes },
        sampling_rate: config.sampling_rate,
        seed: config.seed,
        n_samples,
        candidate_count: pool.len(),
        discretization,
        rule_list,
        overall: BundleOverall {
            fidelity_train: train_metrics.overall.fidelity,
            fidelity_test: test_metrics.as_ref().map(|m| m.overall.fidelity),
            teacher_accuracy_train: train_metrics.overall.teacher_accuracy,
            teacher_accuracy_test: test_metrics.as_ref().map(|m| m.overall.teacher_accuracy),
        },
        per_rule: train_metrics.per_rule,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub mean_fidelity: f64,
    pub sd_fidelity: f64,
    pub mean_length: f64,
    pub sd_length: f64,
}

/// Repeats induction `repeats` times per rate (seeds `seed`, `seed + 1`, ...)
/// and aggregates fidelity on `test` (on `train` when `test` is `None`) and
/// list length (default rule included) as mean and sample standard deviation.
pub fn sampling_rate_sweep(
    train: &DataTable,
    test: Option<&DataTable>,
    oracle: &dyn Oracle,
    rates: &[f64],
    repeats: usize,
    base: &InduceConfig,
) -> Result<Vec<SweepRow>> {
    sampling_rate_sweep_observed(train, test, oracle, rates, repeats, base, &mut |_| {})
}

/// As [`sampling_rate_sweep`], handing every induced bundle to `observe`.
pub fn sampling_rate_sweep_observed(
    train: &DataTable,
    test: Option<&DataTable>,
    oracle: &dyn Oracle,
    rates: &[f64],
    repeats: usize,
    base: &InduceConfig,
    observe: &mut dyn FnMut(&ExplanationBundle),
) -> Result<Vec<SweepRow>> {
    if rates.is_empty() || repeats == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one rate and one repeat".into()));
    }
    let mut rows = Vec::with_capacity(rates.len());
    for &rate in rates {
        let mut fidelity = Vec::with_capacity(repeats);
        let mut length = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let config = InduceConfig { sampling_rate: rate, seed: base.seed.wrapping_add(r as u64), ..base.clone() };
            let bundle = induce(train, test, oracle, &config)?;
            observe(&bundle);
            fidelity.push(bundle.overall.fidelity_test.unwrap_or(bundle.overall.fidelity_train));
            length.push(bundle.rule_list.len() as f64);
        }
        rows.push(SweepRow {
            rate,
            mean_fidelity: math::mean(&fidelity),
            sd_fidelity: math::sample_std(&fidelity),
            mean_length: math::mean(&length),
            sd_length: math::sample_std(&length),
        });
    }
    Ok(rows)
}
