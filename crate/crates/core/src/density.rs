//! Joint density of mixed discrete/continuous features.
//!
//! The discrete part is the empirical PMF over observed category tuples. The
//! continuous part, conditioned on a tuple, is a Gaussian KDE over the
//! training rows sharing that tuple. One diagonal bandwidth matrix `H` is
//! estimated from all rows with Silverman's rule of thumb and shared by every
//! tuple. `H` is the kernel covariance; [`DensityModel::kernel_sd`] holds its
//! square roots.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataTable, Instances};
use crate::error::{Error, Result};
use crate::math;

/// One observed discrete tuple with its kernel centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combo {
    /// Category indices of the discrete features, in schema order.
    pub key: Vec<usize>,
    pub count: usize,
    /// Continuous sub-vectors of the rows with this tuple, row-major.
    pub centers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub v: u32,
    pub schema_fingerprint: u64,
    pub width: usize,
    pub discrete: Vec<usize>,
    pub continuous: Vec<usize>,
    pub total: usize,
    /// Sorted by key.
    pub combos: Vec<Combo>,
    /// Diagonal of `H` (kernel variances), one per continuous feature.
    pub bandwidth: Vec<f64>,
    /// Observed (min, max) per continuous feature.
    pub ranges: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOptions {
    /// Clamp sampled continuous values to the observed training range.
    pub clamp_to_range: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { clamp_to_range: true }
    }
}

/// Silverman's rule of thumb for one feature: the kernel standard deviation.
pub fn silverman_sd(sigma: f64, n: usize, c: usize) -> f64 {
    let c = c as f64;
    math::pow((c + 2.0) / 4.0 * n as f64, -1.0 / (c + 4.0)) * sigma
}

pub fn estimate_distribution(train: &DataTable) -> Result<DensityModel> {
    if train.is_empty() {
        return Err(Error::NoData);
    }
    let schema = &train.schema;
    let discrete = schema.discrete_features();
    let continuous = schema.continuous_features();
    let c = continuous.len();
    let n = train.len();

    let mut groups: BTreeMap<Vec<usize>, Combo> = BTreeMap::new();
    for row in train.instances().rows() {
        let key: Vec<usize> = discrete.iter().map(|&j| row[j] as usize).collect();
        let combo = groups.entry(key.clone()).or_insert_with(|| Combo { key, count: 0, centers: Vec::new() });
        combo.count += 1;
        combo.centers.extend(continuous.iter().map(|&j| row[j]));
    }

    let mut bandwidth = Vec::with_capacity(c);
    let mut ranges = Vec::with_capacity(c);
    for &j in &continuous {
        let col = train.instances().column(j);
        let sigma = math::sample_std(&col);
        let sd = if sigma > 0.0 {
            silverman_sd(sigma, n, c)
        } else {
            let width = match schema.features[j].display_range {
                Some((lo, hi)) if hi > lo => hi - lo,
                _ => 1.0,
            };
            1e-6 * width
        };
        bandwidth.push(sd * sd);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ranges.push((lo, hi));
    }

    Ok(DensityModel {
        v: crate::PAYLOAD_VERSION,
        schema_fingerprint: schema.fingerprint(),
        width: schema.width(),
        discrete,
        continuous,
        total: n,
        combos: groups.into_values().collect(),
        bandwidth,
        ranges,
    })
}

impl DensityModel {
    pub fn continuous_count(&self) -> usize {
        self.continuous.len()
    }

    pub fn kernel_sd(&self) -> Vec<f64> {
        self.bandwidth.iter().map(|h| math::sqrt(*h)).collect()
    }

    /// Empirical probability of a combo.
    pub fn probability(&self, combo: &Combo) -> f64 {
        combo.count as f64 / self.total as f64
    }

    pub fn find_combo(&self, key: &[usize]) -> Option<&Combo> {
        self.combos.binary_search_by(|c| c.key.as_slice().cmp(key)).ok().map(|i| &self.combos[i])
    }

    /// Conditional KDE `f(x_con | x_disc)` for a combo.
    pub fn conditional_density(&self, combo: &Combo, x_con: &[f64]) -> f64 {
        let c = self.continuous_count();
        if c == 0 {
            return 1.0;
        }
        let log_norm = 0.5 * c as f64 * math::LN_2PI + 0.5 * self.bandwidth.iter().map(|h| math::ln(*h)).sum::<f64>();
        let sum: f64 = combo
            .centers
            .chunks_exact(c)
            .map(|center| {
                let q: f64 = center
                    .iter()
                    .zip(x_con)
                    .zip(&self.bandwidth)
                    .map(|((m, x), h)| (x - m) * (x - m) / h)
                    .sum();
                math::exp(-0.5 * q - log_norm)
            })
            .sum();
        sum / combo.count as f64
    }

    /// Joint density `p(x_disc) * f(x_con | x_disc)`; zero for unseen tuples.
    pub fn density_at(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.width {
            return Err(Error::SchemaMismatch { expected: self.width, found: x.len() });
        }
        let key: Vec<usize> = self.discrete.iter().map(|&j| x[j] as usize).collect();
        let Some(combo) = self.find_combo(&key) else {
            return Ok(0.0);
        };
        let x_con: Vec<f64> = self.continuous.iter().map(|&j| x[j]).collect();
        Ok(self.probability(combo) * self.conditional_density(combo, &x_con))
    }

    pub fn sample(&self, n_samples: usize, seed: u64) -> Result<Instances> {
        self.sample_with(n_samples, seed, SampleOptions::default())
    }

    /// Draws a combo by its probability, a kernel centre uniformly within it,
    /// then perturbs the centre with `N(0, H)`.
    pub fn sample_with(&self, n_samples: usize, seed: u64, options: SampleOptions) -> Result<Instances> {
        if n_samples == 0 || self.total == 0 {
            return Err(Error::NoData);
        }
        let c = self.continuous_count();
        let sd = self.kernel_sd();
        let mut cumulative = Vec::with_capacity(self.combos.len());
        let mut acc = 0;
        for combo in &self.combos {
            acc += combo.count;
            cumulative.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n_samples * self.width);
        let mut row = alloc::vec![0.0; self.width];
        for _ in 0..n_samples {
            let ticket = rng.random_range(0..self.total);
            let ci = cumulative.partition_point(|&cum| cum <= ticket);
            let combo = &self.combos[ci];
            for (&j, &v) in self.discrete.iter().zip(&combo.key) {
                row[j] = v as f64;
            }
            if c > 0 {
                let center = rng.random_range(0..combo.count);
                let base = &combo.centers[center * c..(center + 1) * c];
                for (i, &j) in self.continuous.iter().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    let mut v = base[i] + sd[i] * z;
                    if options.clamp_to_range {
                        let (lo, hi) = self.ranges[i];
                        v = v.clamp(lo, hi);
                    }
                    row[j] = v;
                }
            }
            out.extend_from_slice(&row);
        }
        Instances::from_flat(self.width, out)
    }
}
