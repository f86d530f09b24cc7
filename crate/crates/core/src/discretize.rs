//! Supervised entropy/MDL discretization of continuous features
//! (Fayyad–Irani recursive binary splitting with the MDLP stopping rule).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSchema, FeatureKind, Instances};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureBins {
    /// Strictly increasing cut points; `cuts.len() + 1` bins.
    Continuous { cuts: Vec<f64> },
    /// Identity mapping: one bin per category.
    Categorical { categories: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub features: Vec<FeatureBins>,
}

impl Discretization {
    pub fn bin_count(&self, feature: usize) -> usize {
        match &self.features[feature] {
            FeatureBins::Continuous { cuts } => cuts.len() + 1,
            FeatureBins::Categorical { categories } => *categories,
        }
    }

    /// Bin index of a raw value. Continuous bins are half-open `[lo, hi)`.
    pub fn bin(&self, feature: usize, value: f64) -> usize {
        match &self.features[feature] {
            FeatureBins::Continuous { cuts } => cuts.partition_point(|&c| c <= value),
            FeatureBins::Categorical { .. } => value as usize,
        }
    }

    /// Bounds of a continuous bin; `None` stands for an infinite side.
    pub fn interval(&self, feature: usize, bin: usize) -> (Option<f64>, Option<f64>) {
        match &self.features[feature] {
            FeatureBins::Continuous { cuts } => {
                let lo = if bin == 0 { None } else { Some(cuts[bin - 1]) };
                let hi = cuts.get(bin).copied();
                (lo, hi)
            }
            FeatureBins::Categorical { .. } => (None, None),
        }
    }

    pub fn discretize_row(&self, row: &[f64]) -> Vec<usize> {
        row.iter().enumerate().map(|(j, &v)| self.bin(j, v)).collect()
    }
}

/// MDLP-accepted cut points for one continuous column.
pub fn mdl_cuts(values: &[f64], labels: &[usize], classes: usize) -> Vec<f64> {
    debug_assert_eq!(values.len(), labels.len());
    let mut pairs: Vec<(f64, usize)> = values.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut cuts = Vec::new();
    let mut stack = vec![(0usize, pairs.len())];
    while let Some((lo, hi)) = stack.pop() {
        if let Some(split) = best_accepted_split(&pairs[lo..hi], classes) {
            let at = lo + split;
            cuts.push(0.5 * (pairs[at - 1].0 + pairs[at].0));
            stack.push((lo, at));
            stack.push((at, hi));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts
}

/// The position of the entropy-minimizing boundary within a sorted slice, if
/// its information gain passes the MDLP criterion.
fn best_accepted_split(slice: &[(f64, usize)], classes: usize) -> Option<usize> {
    let n = slice.len();
    if n < 2 {
        return None;
    }
    let mut total = vec![0usize; classes];
    for &(_, y) in slice {
        total[y] += 1;
    }
    let mut left = vec![0usize; classes];
    let mut right = total.clone();
    let mut best: Option<(usize, f64)> = None;
    for i in 1..n {
        let y = slice[i - 1].1;
        left[y] += 1;
        right[y] -= 1;
        if slice[i - 1].0 == slice[i].0 {
            continue;
        }
        let w = (i as f64 * math::entropy(&left) + (n - i) as f64 * math::entropy(&right)) / n as f64;
        if best.is_none_or(|(_, bw)| w < bw) {
            best = Some((i, w));
        }
    }
    let (at, weighted) = best?;
    let mut l = vec![0usize; classes];
    for &(_, y) in &slice[..at] {
        l[y] += 1;
    }
    let r: Vec<usize> = total.iter().zip(&l).map(|(t, a)| t - a).collect();
    let ent = math::entropy(&total);
    let gain = ent - weighted;
    (gain > mdlp_threshold(&total, &l, &r)).then_some(at)
}

/// `[log2(N-1) + log2(3^k - 2) - (k Ent(S) - k1 Ent(S1) - k2 Ent(S2))] / N`
/// where `k*` count the classes present in each part.
pub fn mdlp_threshold(total: &[usize], left: &[usize], right: &[usize]) -> f64 {
    let n: usize = total.iter().sum();
    let present = |c: &[usize]| c.iter().filter(|&&v| v > 0).count() as f64;
    let (k, k1, k2) = (present(total), present(left), present(right));
    let delta = math::log2(math::pow(3.0, k) - 2.0)
        - (k * math::entropy(total) - k1 * math::entropy(left) - k2 * math::entropy(right));
    (math::log2(n as f64 - 1.0) + delta) / n as f64
}

/// Discretizes every continuous feature of `rows` against `labels`;
/// categorical features map to themselves.
pub fn mdl_discretize(schema: &DatasetSchema, rows: &Instances, labels: &[usize]) -> Discretization {
    let classes = schema.class_count();
    let features = schema
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| match f.kind {
            FeatureKind::Categorical => FeatureBins::Categorical { categories: f.categories.len() },
            FeatureKind::Continuous => FeatureBins::Continuous { cuts: mdl_cuts(&rows.column(j), labels, classes) },
        })
        .collect();
    Discretization { features }
}
