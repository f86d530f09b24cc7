//! Ordered lists of inclusive IF-THEN rules with first-match semantics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSchema, Instances};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClauseTest {
    /// `lo <= x < hi`; a missing bound is infinite.
    Interval { lo: Option<f64>, hi: Option<f64> },
    Category { index: usize },
}

/// A condition on one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub feature: usize,
    #[serde(flatten)]
    pub test: ClauseTest,
}

impl Clause {
    pub fn interval(feature: usize, lo: Option<f64>, hi: Option<f64>) -> Self {
        Clause { feature, test: ClauseTest::Interval { lo, hi } }
    }

    pub fn category(feature: usize, index: usize) -> Self {
        Clause { feature, test: ClauseTest::Category { index } }
    }

    pub fn matches(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        match self.test {
            ClauseTest::Interval { lo, hi } => lo.is_none_or(|lo| v >= lo) && hi.is_none_or(|hi| v < hi),
            ClauseTest::Category { index } => v as usize == index,
        }
    }

    /// Text such as `3.5 <= petal_length < 4.9` or `color = red`.
    pub fn describe(&self, schema: &DatasetSchema) -> String {
        let f = &schema.features[self.feature];
        match self.test {
            ClauseTest::Interval { lo: Some(lo), hi: Some(hi) } => format!("{} <= {} < {}", fmt_num(lo), f.name, fmt_num(hi)),
            ClauseTest::Interval { lo: Some(lo), hi: None } => format!("{} >= {}", f.name, fmt_num(lo)),
            ClauseTest::Interval { lo: None, hi: Some(hi) } => format!("{} < {}", f.name, fmt_num(hi)),
            ClauseTest::Interval { lo: None, hi: None } => format!("{} is any", f.name),
            ClauseTest::Category { index } => {
                let label = f.categories.get(index).map(String::as_str).unwrap_or("?");
                format!("{} = {}", f.name, label)
            }
        }
    }
}

fn fmt_num(v: f64) -> String {
    let r = math::round(v * 1e4) / 1e4;
    format!("{r}")
}

/// A conjunction of clauses (at most one per feature) mined as a rule
/// candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateAntecedent {
    pub clauses: Vec<Clause>,
    pub support_count: usize,
}

impl CandidateAntecedent {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.clauses.iter().all(|c| c.matches(x))
    }

    pub fn cardinality(&self) -> usize {
        self.clauses.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    /// Empty for the default rule.
    pub clauses: Vec<Clause>,
    /// Smoothed class distribution of the training instances it captures.
    pub output: Vec<f64>,
    pub capture_count: usize,
}

impl Rule {
    pub fn is_default(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn matches(&self, x: &[f64]) -> bool {
        self.clauses.iter().all(|c| c.matches(x))
    }

    pub fn class(&self) -> usize {
        math::argmax(&self.output)
    }

    /// Probability of the rule's majority class.
    pub fn confidence(&self) -> f64 {
        self.output.iter().copied().fold(0.0, f64::max)
    }

    pub fn describe(&self, schema: &DatasetSchema) -> String {
        if self.is_default() {
            return "OTHERWISE".into();
        }
        let parts: Vec<String> = self.clauses.iter().map(|c| c.describe(schema)).collect();
        format!("IF {}", parts.join(" AND "))
    }
}

/// Prior and likelihood hyperparameters of the rule-list posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    /// Expected number of rules (excluding the default rule).
    pub lambda: f64,
    /// Expected clauses per rule.
    pub eta: f64,
    /// Dirichlet pseudo-count per class.
    pub alpha: f64,
    /// Hard cap on the number of non-default rules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_length: Option<usize>,
}

impl Default for Priors {
    fn default() -> Self {
        Priors { lambda: 20.0, eta: 2.0, alpha: 1.0, max_length: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleList {
    pub v: u32,
    /// Ordered rules; the last one is the default rule.
    pub rules: Vec<Rule>,
    pub priors: Priors,
    pub log_posterior: f64,
}

impl RuleList {
    /// Validates the single trailing default rule.
    pub fn new(rules: Vec<Rule>, priors: Priors, log_posterior: f64) -> Result<Self> {
        let defaults = rules.iter().filter(|r| r.is_default()).count();
        if defaults != 1 || !rules.last().is_some_and(Rule::is_default) {
            return Err(Error::InvalidArgument("rule list needs exactly one default rule, in last position".into()));
        }
        Ok(RuleList { v: crate::PAYLOAD_VERSION, rules, priors, log_posterior })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.rules.first().map_or(0, |r| r.output.len())
    }

    /// Index of the first rule whose antecedent `x` satisfies.
    pub fn fire(&self, x: &[f64]) -> usize {
        self.rules.iter().position(|r| r.matches(x)).unwrap_or(self.rules.len() - 1)
    }

    /// `(class, fired rule index)`.
    pub fn predict(&self, x: &[f64]) -> (usize, usize) {
        let i = self.fire(x);
        (self.rules[i].class(), i)
    }

    pub fn predict_batch(&self, rows: &Instances) -> Vec<usize> {
        rows.rows().map(|r| self.predict(r).0).collect()
    }
}

/// Fraction of instances on which the rule list agrees with the oracle.
pub fn evaluate_fidelity(list: &RuleList, oracle_labels: &[usize], rows: &Instances) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::NoData);
    }
    if oracle_labels.len() != rows.len() {
        return Err(Error::InvalidArgument(format!("{} labels for {} rows", oracle_labels.len(), rows.len())));
    }
    let agree = rows.rows().zip(oracle_labels).filter(|(x, &y)| list.predict(x).0 == y).count();
    Ok(agree as f64 / rows.len() as f64)
}
