use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rulematrix_core::density::{estimate_distribution, Combo, DensityModel, SampleOptions};
use rulematrix_core::{DataTable, DatasetSchema, FeatureSpec, Instances};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{close, Check};

pub fn table(features: Vec<FeatureSpec>, rows: Vec<Vec<f64>>) -> DataTable {
    let width = features.len();
    let schema = DatasetSchema::new(features, FeatureSpec::categorical("y", ["n", "p"])).unwrap();
    let labels = (0..rows.len()).map(|i| i % 2).collect();
    DataTable::new(schema, Instances::from_rows(width, &rows).unwrap(), labels).unwrap()
}

pub fn gaussian_table(n: usize, c: usize, seed: u64) -> DataTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let features = (0..c).map(|j| FeatureSpec::continuous(format!("x{j}"))).collect();
    let rows = (0..n).map(|_| (0..c).map(|j| normal.sample(&mut rng) * (1.0 + j as f64)).collect()).collect();
    table(features, rows)
}

/// Categorical features with the given category counts plus `c` continuous
/// ones; combo frequencies are deliberately uneven.
pub fn mixed_table(categories: &[usize], c: usize, n: usize, seed: u64) -> DataTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features: Vec<FeatureSpec> = categories
        .iter()
        .enumerate()
        .map(|(j, &k)| FeatureSpec::categorical(format!("c{j}"), (0..k).map(|v| format!("v{v}"))))
        .collect();
    features.extend((0..c).map(|j| FeatureSpec::continuous(format!("x{j}"))));
    let rows = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = categories
                .iter()
                .map(|&k| {
                    // skewed: category v has weight v + 1
                    let total = k * (k + 1) / 2;
                    let mut t = rng.random_range(0..total);
                    let mut v = 0;
                    while t > v {
                        t -= v + 1;
                        v += 1;
                    }
                    v as f64
                })
                .collect();
            let shift = row.iter().sum::<f64>();
            row.extend((0..c).map(|_| shift + rng.random_range(-1.0..1.0)));
            row
        })
        .collect();
    table(features, rows)
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Kernel standard deviation against `((c+2)/4 * N)^(-1/(c+4)) * sigma`.
pub fn silverman_closed_form() -> Check {
    let t = gaussian_table(100, 2, 11);
    let model = estimate_distribution(&t).map_err(|e| e.to_string())?;
    let (c, n) = (2.0_f64, 100.0);
    let factor = ((c + 2.0) / 4.0 * n).powf(-1.0 / (c + 4.0));
    ensure!(close(factor, 0.464_158_883_361_277_9, 1e-12), "closed form factor {factor}");
    for (j, sd) in model.kernel_sd().iter().enumerate() {
        let expected = factor * sample_sd(&t.instances().column(j));
        ensure!(close(*sd, expected, 1e-12 * expected), "feature {j}: kernel sd {sd}, closed form {expected}");
    }
    Ok(())
}

pub fn pmf_is_exact() -> Check {
    for (cats, seed) in [(vec![2, 3], 1), (vec![4], 2), (vec![2, 2, 2], 3)] {
        let t = mixed_table(&cats, 1, 97, seed);
        let model = estimate_distribution(&t).map_err(|e| e.to_string())?;
        let total: f64 = model.combos.iter().map(|c| model.probability(c)).sum();
        ensure!(close(total, 1.0, 1e-9), "probabilities sum to {total}");
        let counted: usize = model.combos.iter().map(|c| c.count).sum();
        ensure!(counted == t.len(), "combo counts sum to {counted}, N = {}", t.len());
        for combo in &model.combos {
            let observed = t
                .instances()
                .rows()
                .filter(|r| model.discrete.iter().zip(&combo.key).all(|(&j, &k)| r[j] as usize == k))
                .count();
            ensure!(observed == combo.count, "combo {:?}: count {} but {observed} rows", combo.key, combo.count);
            ensure!(model.probability(combo) == observed as f64 / t.len() as f64, "p-hat is not count / N");
        }
    }
    Ok(())
}

pub fn pure_categorical_pmf() -> Check {
    let rows = (0..10).map(|i| vec![if i < 6 { 0.0 } else { 1.0 }]).collect();
    let t = table(vec![FeatureSpec::categorical("c", ["A", "B"])], rows);
    let model = estimate_distribution(&t).map_err(|e| e.to_string())?;
    ensure!(model.bandwidth.is_empty(), "bandwidth present without continuous features");
    let a = model.find_combo(&[0]).ok_or("missing combo A")?;
    let b = model.find_combo(&[1]).ok_or("missing combo B")?;
    ensure!(model.probability(a) == 0.6 && model.probability(b) == 0.4, "p-hat ({}, {})", model.probability(a), model.probability(b));
    Ok(())
}

/// A hand-built model with one kernel centre: density at the centre is
/// `p * (2 pi H)^(-1/2)`.
pub fn single_kernel_density() -> Check {
    let h = 0.25;
    let model = DensityModel {
        v: 1,
        schema_fingerprint: 0,
        width: 2,
        discrete: vec![0],
        continuous: vec![1],
        total: 4,
        combos: vec![
            Combo { key: vec![0], count: 1, centers: vec![2.0] },
            Combo { key: vec![1], count: 3, centers: vec![0.0, 1.0, 5.0] },
        ],
        bandwidth: vec![h],
        ranges: vec![(0.0, 5.0)],
    };
    let got = model.density_at(&[0.0, 2.0]).map_err(|e| e.to_string())?;
    let expected = 0.25 * (2.0 * std::f64::consts::PI * h).powf(-0.5);
    ensure!(close(got, expected, 1e-12), "density {got}, expected {expected}");

    let t = table(vec![FeatureSpec::continuous("x")], vec![vec![3.5]]);
    let model = estimate_distribution(&t).map_err(|e| e.to_string())?;
    let got = model.density_at(&[3.5]).map_err(|e| e.to_string())?;
    let expected = (2.0 * std::f64::consts::PI * model.bandwidth[0]).powf(-0.5);
    ensure!(close(got, expected, 1e-9 * expected), "single-row density {got}, expected {expected}");
    ensure!(model.density_at(&[3.5 + 1.0]).unwrap() < 1e-100, "mass away from the single point");
    Ok(())
}

fn grid(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let step = (hi - lo) / n as f64;
    ((0..n).map(|i| lo + (i as f64 + 0.5) * step).collect(), step)
}

/// Midpoint-rule integral of each conditional density over a wide box.
pub fn kde_integrates_to_one() -> Check {
    for (cats, c, n) in [(vec![], 1usize, 40usize), (vec![2], 1, 60), (vec![], 2, 25), (vec![3], 2, 45)] {
        let t = mixed_table(&cats, c, n, 5 + c as u64);
        let model = estimate_distribution(&t).map_err(|e| e.to_string())?;
        let sd = model.kernel_sd();
        for combo in &model.combos {
            let axes: Vec<(Vec<f64>, f64)> = (0..c)
                .map(|j| {
                    let vals: Vec<f64> = combo.centers.chunks(c).map(|x| x[j]).collect();
                    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min) - 9.0 * sd[j];
                    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 9.0 * sd[j];
                    grid(lo, hi, if c == 1 { 20_000 } else { 500 })
                })
                .collect();
            let integral = if c == 1 {
                axes[0].0.iter().map(|&x| model.conditional_density(combo, &[x])).sum::<f64>() * axes[0].1
            } else {
                let mut s = 0.0;
                for &x in &axes[0].0 {
                    for &y in &axes[1].0 {
                        s += model.conditional_density(combo, &[x, y]);
                    }
                }
                s * axes[0].1 * axes[1].1
            };
            ensure!(close(integral, 1.0, 1e-3), "combo {:?} (c={c}) integrates to {integral}", combo.key);
        }
    }
    Ok(())
}

fn chi_square_p(model: &DensityModel, samples: &Instances) -> f64 {
    let mut observed = vec![0usize; model.combos.len()];
    for row in samples.rows() {
        let key: Vec<usize> = model.discrete.iter().map(|&j| row[j] as usize).collect();
        let i = model.combos.iter().position(|c| c.key == key).expect("sampled tuple was observed");
        observed[i] += 1;
    }
    let n = samples.len() as f64;
    let stat: f64 = model
        .combos
        .iter()
        .zip(&observed)
        .map(|(c, &o)| {
            let e = n * model.probability(c);
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let df = (model.combos.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Goodness of fit of sampled discrete tuples at alpha = 0.01.
pub fn sampling_chi_square() -> Check {
    for (cats, seed) in [(vec![2, 4], 21u64), (vec![3], 22), (vec![8], 23), (vec![2, 2], 24)] {
        let t = mixed_table(&cats, 1, 300, seed);
        let model = estimate_distribution(&t).map_err(|e| e.to_string())?;
        ensure!(model.combos.len() <= 8 && model.combos.len() >= 2, "fixture has {} combos", model.combos.len());
        let samples = model.sample(50_000, seed).map_err(|e| e.to_string())?;
        let p = chi_square_p(&model, &samples);
        ensure!(p >= 0.01, "fixture {cats:?}: chi-square p = {p:.4}");
    }
    Ok(())
}

pub fn categorical_frequencies() -> Check {
    let rows = (0..10).map(|i| vec![if i < 6 { 0.0 } else { 1.0 }]).collect();
    let t = table(vec![FeatureSpec::categorical("c", ["A", "B"])], rows);
    let model = estimate_distribution(&t).map_err(|e| e.to_string())?;
    let samples = model.sample(50_000, 9).map_err(|e| e.to_string())?;
    let a = samples.rows().filter(|r| r[0] == 0.0).count() as f64 / 50_000.0;
    ensure!(close(a, 0.6, 0.01) && close(1.0 - a, 0.4, 0.01), "frequencies ({a}, {})", 1.0 - a);
    Ok(())
}

/// Mean and variance of unclamped samples against the KDE's closed-form
/// moments: data mean, and population variance plus H.
pub fn kde_moments() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let normal = Normal::new(3.0, 2.0).unwrap();
    let rows = (0..200).map(|_| vec![normal.sample(&mut rng)]).collect();
    let t = table(vec![FeatureSpec::continuous("x")], rows);
    let model = estimate_distribution(&t).map_err(|e| e.to_string())?;
    let data = t.instances().column(0);
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let kde_var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n + model.bandwidth[0];

    let samples = model.sample_with(50_000, 4, SampleOptions { clamp_to_range: false }).map_err(|e| e.to_string())?;
    let xs = samples.column(0);
    let m = xs.len() as f64;
    let s_mean = xs.iter().sum::<f64>() / m;
    let s_var = xs.iter().map(|v| (v - s_mean).powi(2)).sum::<f64>() / (m - 1.0);
    let se = (kde_var / m).sqrt();
    ensure!((s_mean - mean).abs() <= 3.0 * se, "sample mean {s_mean}, KDE mean {mean}, 3 SE = {}", 3.0 * se);
    ensure!((s_var - kde_var).abs() <= 0.05 * kde_var, "sample variance {s_var}, KDE variance {kde_var}");
    Ok(())
}

pub fn clamped_samples_stay_in_range() -> Check {
    let t = mixed_table(&[2], 2, 50, 8);
    let model = estimate_distribution(&t).map_err(|e| e.to_string())?;
    let samples = model.sample(5_000, 1).map_err(|e| e.to_string())?;
    for (k, &j) in model.continuous.iter().enumerate() {
        let (lo, hi) = model.ranges[k];
        ensure!(samples.rows().all(|r| r[j] >= lo && r[j] <= hi), "feature {j} left [{lo}, {hi}]");
    }
    ensure!(samples == model.sample(5_000, 1).unwrap(), "sampling is not deterministic per seed");
    Ok(())
}

pub fn suite() -> Check {
    super::all(&[
        ("sum of p-hat", pmf_is_exact),
        ("pure categorical", pure_categorical_pmf),
        ("Silverman bandwidth", silverman_closed_form),
        ("single kernel", single_kernel_density),
        ("KDE integral", kde_integrates_to_one),
        ("chi-square", sampling_chi_square),
        ("frequencies", categorical_frequencies),
        ("moments", kde_moments),
        ("clamping", clamped_samples_stay_in_range),
    ])
}
