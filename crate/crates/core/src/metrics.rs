//! Per-rule quantities shown next to a rule list: support, confidence,
//! fidelity, evidence and data flow. Also rule/data filtering, feature
//! importance and single-instance probing.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{DataTable, DatasetSchema, Instances};
use crate::error::{Error, Result};
use crate::oracle::{predict_batch, Oracle};
use crate::rulelist::RuleList;

/// Teacher predictions of one class on captured real data, split by whether
/// they match the true label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub correct: usize,
    pub wrong: usize,
}

/// Per-class (true label) counts reaching a rule and captured by it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleFlow {
    pub inflow: Vec<usize>,
    pub captured: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleMetrics {
    pub support_count: usize,
    pub support_fraction: f64,
    pub confidence: f64,
    /// Agreement of the rule's class with the teacher on the captured subset;
    /// 1.0 (with `empty` set) when nothing is captured.
    pub rule_fidelity: f64,
    pub empty: bool,
    /// Indexed by the teacher's predicted class.
    pub evidence: Vec<Evidence>,
    pub flow: RuleFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallMetrics {
    pub n: usize,
    pub fidelity: f64,
    pub teacher_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_rule: Vec<RuleMetrics>,
    pub overall: OverallMetrics,
    /// Fired rule per instance.
    pub fired: Vec<usize>,
    /// Teacher prediction per instance.
    pub teacher: Vec<usize>,
}

/// Routes every instance through the list and aggregates per-rule metrics.
pub fn compute_metrics(list: &RuleList, data: &DataTable, oracle: &dyn Oracle) -> Result<MetricsReport> {
    let teacher = predict_batch(oracle, data.instances())?;
    metrics_from_predictions(list, data, teacher)
}

/// As [`compute_metrics`] with the teacher's predictions supplied.
pub fn metrics_from_predictions(list: &RuleList, data: &DataTable, teacher: Vec<usize>) -> Result<MetricsReport> {
    if data.is_empty() {
        return Err(Error::NoData);
    }
    if teacher.len() != data.len() {
        return Err(Error::InvalidArgument(format!("{} predictions for {} rows", teacher.len(), data.len())));
    }
    let classes = data.class_count();
    if list.class_count() != classes {
        return Err(Error::SchemaMismatch { expected: classes, found: list.class_count() });
    }
    let n_rules = list.len();
    let fired: Vec<usize> = data.instances().rows().map(|x| list.fire(x)).collect();

    let mut captured = vec![vec![0usize; classes]; n_rules];
    let mut agree = vec![0usize; n_rules];
    let mut evidence = vec![vec![Evidence::default(); classes]; n_rules];
    let mut teacher_correct = 0;
    let mut total_agree = 0;
    for i in 0..data.len() {
        let (r, y, t) = (fired[i], data.labels()[i], teacher[i]);
        captured[r][y] += 1;
        if list.rules[r].class() == t {
            agree[r] += 1;
            total_agree += 1;
        }
        if t == y {
            evidence[r][t].correct += 1;
            teacher_correct += 1;
        } else {
            evidence[r][t].wrong += 1;
        }
    }

    let n = data.len();
    let mut inflow: Vec<usize> = vec![0; classes];
    for &y in data.labels() {
        inflow[y] += 1;
    }
    let mut per_rule = Vec::with_capacity(n_rules);
    for r in 0..n_rules {
        let support: usize = captured[r].iter().sum();
        per_rule.push(RuleMetrics {
            support_count: support,
            support_fraction: support as f64 / n as f64,
            confidence: list.rules[r].confidence(),
            rule_fidelity: if support == 0 { 1.0 } else { agree[r] as f64 / support as f64 },
            empty: support == 0,
            evidence: core::mem::take(&mut evidence[r]),
            flow: RuleFlow { inflow: inflow.clone(), captured: captured[r].clone() },
        });
        for (f, c) in inflow.iter_mut().zip(&captured[r]) {
            *f -= c;
        }
    }
    Ok(MetricsReport {
        per_rule,
        overall: OverallMetrics {
            n,
            fidelity: total_agree as f64 / n as f64,
            teacher_accuracy: teacher_correct as f64 / n as f64,
        },
        fired,
        teacher,
    })
}

/// Metrics over an empty selection: every rule empty, all counts zero.
pub fn empty_report(list: &RuleList) -> MetricsReport {
    let classes = list.class_count();
    let per_rule = list
        .rules
        .iter()
        .map(|r| RuleMetrics {
            support_count: 0,
            support_fraction: 0.0,
            confidence: r.confidence(),
            rule_fidelity: 1.0,
            empty: true,
            evidence: vec![Evidence::default(); classes],
            flow: RuleFlow { inflow: vec![0; classes], captured: vec![0; classes] },
        })
        .collect();
    MetricsReport {
        per_rule,
        overall: OverallMetrics { n: 0, fidelity: 0.0, teacher_accuracy: 0.0 },
        fired: Vec::new(),
        teacher: Vec::new(),
    }
}

/// One row of a filtered rule view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ViewRow {
    Rule { index: usize },
    /// Consecutive rules `start..=end` that failed a threshold.
    Collapsed { start: usize, end: usize, support_count: usize, class_counts: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFilterView {
    pub min_support: f64,
    pub min_confidence: f64,
    pub kept: Vec<usize>,
    pub rows: Vec<ViewRow>,
}

impl RuleFilterView {
    pub fn collapsed_groups(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().filter_map(|r| match *r {
            ViewRow::Collapsed { start, end, .. } => Some((start, end)),
            ViewRow::Rule { .. } => None,
        })
    }
}

/// Collapses runs of consecutive rules whose support fraction or confidence
/// falls below the thresholds. The default rule is always kept.
pub fn filter_rules(per_rule: &[RuleMetrics], min_support: f64, min_confidence: f64) -> RuleFilterView {
    let n = per_rule.len();
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    let mut run: Option<usize> = None;
    let close = |rows: &mut Vec<ViewRow>, start: usize, end: usize| {
        let classes = per_rule[start].flow.captured.len();
        let mut class_counts = vec![0; classes];
        for m in &per_rule[start..=end] {
            for (a, b) in class_counts.iter_mut().zip(&m.flow.captured) {
                *a += b;
            }
        }
        rows.push(ViewRow::Collapsed {
            start,
            end,
            support_count: class_counts.iter().sum(),
            class_counts,
        });
    };
    for (i, m) in per_rule.iter().enumerate() {
        let is_default = i + 1 == n;
        let pass = m.support_fraction >= min_support && m.confidence >= min_confidence;
        if pass || is_default {
            if let Some(start) = run.take() {
                close(&mut rows, start, i - 1);
            }
            kept.push(i);
            rows.push(ViewRow::Rule { index: i });
        } else if run.is_none() {
            run = Some(i);
        }
    }
    if let Some(start) = run {
        close(&mut rows, start, n - 1);
    }
    RuleFilterView { min_support, min_confidence, kept, rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Predicate {
    /// Closed interval; a missing bound is unbounded.
    Range { lo: Option<f64>, hi: Option<f64> },
    Categories { categories: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    #[serde(flatten)]
    pub predicate: Predicate,
}

/// Conjunction of per-feature predicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataFilter {
    pub conditions: Vec<Condition>,
}

impl DataFilter {
    pub fn range(mut self, feature: usize, lo: Option<f64>, hi: Option<f64>) -> Self {
        self.conditions.push(Condition { feature, predicate: Predicate::Range { lo, hi } });
        self
    }

    pub fn categories(mut self, feature: usize, categories: Vec<usize>) -> Self {
        self.conditions.push(Condition { feature, predicate: Predicate::Categories { categories } });
        self
    }

    pub fn validate(&self, schema: &DatasetSchema) -> Result<()> {
        for c in &self.conditions {
            let Some(f) = schema.features.get(c.feature) else {
                return Err(Error::InvalidArgument(format!("filter on unknown feature {}", c.feature)));
            };
            match &c.predicate {
                Predicate::Range { lo: Some(lo), hi: Some(hi) } if lo > hi => {
                    return Err(Error::InvalidArgument(format!("empty range on `{}`", f.name)));
                }
                Predicate::Range { .. } if f.is_categorical() => {
                    return Err(Error::InvalidArgument(format!("range filter on categorical `{}`", f.name)));
                }
                Predicate::Categories { categories } => {
                    if categories.is_empty() || categories.iter().any(|&k| k >= f.categories.len()) {
                        return Err(Error::InvalidArgument(format!("bad category set on `{}`", f.name)));
                    }
                }
                Predicate::Range { .. } => {}
            }
        }
        Ok(())
    }

    pub fn matches(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| {
            let v = x[c.feature];
            match &c.predicate {
                Predicate::Range { lo, hi } => lo.is_none_or(|lo| v >= lo) && hi.is_none_or(|hi| v <= hi),
                Predicate::Categories { categories } => categories.contains(&(v as usize)),
            }
        })
    }

    pub fn select(&self, rows: &Instances) -> Vec<usize> {
        rows.rows().enumerate().filter(|(_, x)| self.matches(x)).map(|(i, _)| i).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredMetrics {
    /// Row indices of `data` that pass the filter.
    pub indices: Vec<usize>,
    pub report: MetricsReport,
}

/// Recomputes metrics on the rows passing `filter`.
pub fn filter_data(list: &RuleList, filter: &DataFilter, data: &DataTable, oracle: &dyn Oracle) -> Result<FilteredMetrics> {
    filter.validate(&data.schema)?;
    let indices = filter.select(data.instances());
    if indices.is_empty() {
        return Err(Error::EmptySelection);
    }
    let subset = data.subset(&indices);
    let report = compute_metrics(list, &subset, oracle)?;
    Ok(FilteredMetrics { indices, report })
}

/// Score per feature: summed support of the rules whose antecedent uses it.
/// Sorted by descending score, ties in schema order.
pub fn feature_importance(list: &RuleList, per_rule: &[RuleMetrics], features: usize) -> Vec<(usize, usize)> {
    let mut scores = vec![0usize; features];
    for (rule, m) in list.rules.iter().zip(per_rule) {
        let mut used = vec![false; features];
        for c in &rule.clauses {
            used[c.feature] = true;
        }
        for (s, u) in scores.iter_mut().zip(used) {
            if u {
                *s += m.support_count;
            }
        }
    }
    let mut ranked: Vec<(usize, usize)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub teacher_class: usize,
    pub teacher_proba: Vec<f64>,
    pub rule_class: usize,
    pub fired_rule: usize,
    /// Per rule, whether `x` satisfies each of its clauses.
    pub satisfied_clauses: Vec<Vec<bool>>,
}

pub fn probe(list: &RuleList, oracle: &dyn Oracle, schema: &DatasetSchema, x: &[f64]) -> Result<ProbeResult> {
    schema.check_instance(x)?;
    let rows = Instances::from_rows(x.len(), [x])?;
    let teacher_proba = oracle.predict_proba(&rows)?.pop().ok_or(Error::NoData)?;
    let teacher_class = oracle.predict(&rows)?[0];
    let (rule_class, fired_rule) = list.predict(x);
    let satisfied_clauses = list.rules.iter().map(|r| r.clauses.iter().map(|c| c.matches(x)).collect()).collect();
    Ok(ProbeResult { teacher_class, teacher_proba, rule_class, fired_rule, satisfied_clauses })
}
