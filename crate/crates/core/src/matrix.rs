//! The payload behind the rule-matrix view: rules as rows, features as
//! columns ordered by importance, per-cell class histograms, evidence boxes,
//! fidelity levels and the collapsed-row layout.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{DataTable, DatasetSchema, FeatureKind};
use crate::error::{Error, Result};
use crate::metrics::{
    empty_report, feature_importance, filter_rules, metrics_from_predictions, DataFilter, MetricsReport,
    OverallMetrics, RuleMetrics, ViewRow,
};
use crate::oracle::{predict_batch, Oracle};
use crate::rulelist::{Clause, RuleList};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixOptions {
    /// Histograms over the data reaching each rule instead of all data.
    pub conditional: bool,
    /// Split evidence into correct and striped wrong boxes.
    pub show_error_stripes: bool,
    pub bins: usize,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions { conditional: false, show_error_stripes: true, bins: DEFAULT_BINS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleThresholds {
    pub min_support: f64,
    pub min_confidence: f64,
}

impl Default for RuleThresholds {
    fn default() -> Self {
        RuleThresholds { min_support: 0.0, min_confidence: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub index: usize,
    pub name: String,
    pub kind: FeatureKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    pub importance: usize,
}

/// Class counts per bin. Continuous features have `bins + 1` edges;
/// categorical features one bin per category and no edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<f64>,
    /// `[bin][class]`
    pub counts: Vec<Vec<usize>>,
    /// `[bin][class]`, restricted to instances satisfying the clause.
    pub satisfied: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseCell {
    pub feature: usize,
    pub text: String,
    pub clause: Clause,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityLevel {
    High,
    Medium,
    Low,
}

impl FidelityLevel {
    /// Above 0.8 is high, below 0.5 low.
    pub fn of(fidelity: f64) -> Self {
        if fidelity > 0.8 {
            FidelityLevel::High
        } else if fidelity >= 0.5 {
            FidelityLevel::Medium
        } else {
            FidelityLevel::Low
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceBox {
    /// Class predicted by the teacher.
    pub class: usize,
    pub count: usize,
    pub striped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRow {
    pub index: usize,
    pub text: String,
    pub is_default: bool,
    pub clauses: Vec<ClauseCell>,
    pub output: Vec<f64>,
    pub class: usize,
    pub confidence: f64,
    pub fidelity_level: FidelityLevel,
    pub evidence_boxes: Vec<EvidenceBox>,
    pub metrics: RuleMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPayload {
    pub v: u32,
    pub dataset: String,
    pub options: MatrixOptions,
    pub rule_filter: RuleThresholds,
    pub data_filter: DataFilter,
    pub empty_selection: bool,
    pub n: usize,
    pub classes: Vec<String>,
    /// In descending importance.
    pub features: Vec<FeatureColumn>,
    pub rules: Vec<RuleRow>,
    /// Kept rules and collapsed groups, in list order.
    pub rows: Vec<ViewRow>,
    pub overall: OverallMetrics,
}

/// Builds the payload for `data` restricted to `data_filter`.
#[allow(clippy::too_many_arguments)]
pub fn build_matrix(
    list: &RuleList,
    data: &DataTable,
    oracle: &dyn Oracle,
    dataset: &str,
    thresholds: RuleThresholds,
    data_filter: &DataFilter,
    options: MatrixOptions,
) -> Result<MatrixPayload> {
    if options.bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    if !(thresholds.min_support >= 0.0 && thresholds.min_confidence >= 0.0) {
        return Err(Error::InvalidArgument("thresholds must be non-negative".into()));
    }
    data_filter.validate(&data.schema)?;
    let selected = data.subset(&data_filter.select(data.instances()));
    let report = if selected.is_empty() {
        empty_report(list)
    } else {
        let teacher = predict_batch(oracle, selected.instances())?;
        metrics_from_predictions(list, &selected, teacher)?
    };
    Ok(assemble(list, &selected, &report, dataset, thresholds, data_filter, options))
}

fn assemble(
    list: &RuleList,
    data: &DataTable,
    report: &MetricsReport,
    dataset: &str,
    thresholds: RuleThresholds,
    data_filter: &DataFilter,
    options: MatrixOptions,
) -> MatrixPayload {
    let schema = &data.schema;
    let importance = feature_importance(list, &report.per_rule, schema.width());
    let features = importance
        .iter()
        .map(|&(j, score)| {
            let f = &schema.features[j];
            FeatureColumn {
                index: j,
                name: f.name.clone(),
                kind: f.kind,
                range: f.display_range,
                categories: f.categories.clone(),
                importance: score,
            }
        })
        .collect();

    let rules = list
        .rules
        .iter()
        .zip(&report.per_rule)
        .enumerate()
        .map(|(i, (rule, m))| {
            let population: Vec<usize> = (0..data.len()).filter(|&r| !options.conditional || report.fired[r] >= i).collect();
            let clauses = rule
                .clauses
                .iter()
                .map(|c| ClauseCell {
                    feature: c.feature,
                    text: c.describe(schema),
                    clause: c.clone(),
                    histogram: histogram(schema, data, &population, c, options.bins),
                })
                .collect();
            let mut boxes = Vec::new();
            for (class, e) in m.evidence.iter().enumerate() {
                if options.show_error_stripes {
                    boxes.push(EvidenceBox { class, count: e.correct, striped: false });
                    boxes.push(EvidenceBox { class, count: e.wrong, striped: true });
                } else {
                    boxes.push(EvidenceBox { class, count: e.correct + e.wrong, striped: false });
                }
            }
            RuleRow {
                index: i,
                text: rule.describe(schema),
                is_default: rule.is_default(),
                clauses,
                output: rule.output.clone(),
                class: rule.class(),
                confidence: rule.confidence(),
                fidelity_level: FidelityLevel::of(m.rule_fidelity),
                evidence_boxes: boxes,
                metrics: m.clone(),
            }
        })
        .collect();

    let view = filter_rules(&report.per_rule, thresholds.min_support, thresholds.min_confidence);
    MatrixPayload {
        v: crate::PAYLOAD_VERSION,
        dataset: dataset.into(),
        options,
        rule_filter: thresholds,
        data_filter: data_filter.clone(),
        empty_selection: data.is_empty(),
        n: data.len(),
        classes: schema.label.categories.clone(),
        features,
        rules,
        rows: view.rows,
        overall: report.overall.clone(),
    }
}

fn histogram(schema: &DatasetSchema, data: &DataTable, population: &[usize], clause: &Clause, bins: usize) -> Histogram {
    let j = clause.feature;
    let f = &schema.features[j];
    let classes = schema.class_count();
    let (edges, n_bins) = match f.kind {
        FeatureKind::Categorical => (Vec::new(), f.categories.len()),
        FeatureKind::Continuous => {
            let (lo, hi) = f.display_range.or_else(|| data.observed_range(j)).unwrap_or((0.0, 1.0));
            let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
            let width = (hi - lo) / bins as f64;
            ((0..=bins).map(|b| lo + width * b as f64).collect(), bins)
        }
    };
    let mut counts = vec![vec![0usize; classes]; n_bins];
    let mut satisfied = vec![vec![0usize; classes]; n_bins];
    for &r in population {
        let x = data.row(r);
        let v = x[j];
        let bin = match f.kind {
            FeatureKind::Categorical => v as usize,
            FeatureKind::Continuous => {
                let (lo, hi) = (edges[0], edges[n_bins]);
                let t = ((v - lo) / (hi - lo) * n_bins as f64) as isize;
                t.clamp(0, n_bins as isize - 1) as usize
            }
        };
        let y = data.labels()[r];
        counts[bin][y] += 1;
        if clause.matches(x) {
            satisfied[bin][y] += 1;
        }
    }
    Histogram { edges, counts, satisfied }
}
