use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rulematrix_core::discretize::{mdl_cuts, mdl_discretize, FeatureBins};
use rulematrix_core::fpgrowth::{fp_growth, Itemset};
use rulematrix_core::{DatasetSchema, FeatureSpec, Instances};

use super::Check;

pub fn random_transactions(n: usize, items: u32, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..items).filter(|&i| rng.random_bool(0.15 + 0.05 * (i % 10) as f64)).collect())
        .collect()
}

/// Every subset of the item universe, counted directly.
pub fn power_set_itemsets(transactions: &[Vec<u32>], items: u32, min_support: f64, max_card: usize) -> BTreeMap<Vec<u32>, usize> {
    let masks: Vec<u32> = transactions.iter().map(|t| t.iter().fold(0, |m, &i| m | (1 << i))).collect();
    let need = (min_support * transactions.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    let mut out = BTreeMap::new();
    for set in 1u32..(1 << items) {
        if set.count_ones() as usize > max_card {
            continue;
        }
        let support = masks.iter().filter(|&&m| m & set == set).count();
        if support >= need {
            out.insert((0..items).filter(|i| set & (1 << i) != 0).collect(), support);
        }
    }
    out
}

fn as_map(sets: &[Itemset]) -> BTreeMap<Vec<u32>, usize> {
    sets.iter().map(|s| (s.items.clone(), s.support_count)).collect()
}

pub fn downward_closed(sets: &[Itemset]) -> Check {
    let map = as_map(sets);
    ensure!(map.len() == sets.len(), "duplicate itemsets in output");
    for s in sets {
        for skip in 0..s.items.len() {
            if s.items.len() == 1 {
                break;
            }
            let sub: Vec<u32> = s.items.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect();
            match map.get(&sub) {
                Some(&c) => ensure!(c >= s.support_count, "{sub:?} has support {c} < superset {:?}", s.items),
                None => return Err(format!("subset {sub:?} of {:?} missing", s.items)),
            }
        }
    }
    Ok(())
}

fn sorted(sets: &[Itemset]) -> bool {
    sets.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        (b.support_count, a.items.len(), &a.items) <= (a.support_count, b.items.len(), &b.items)
    })
}

/// FP-Growth output equals power-set enumeration on five random 12-item
/// fixtures, for bounded and unbounded cardinality.
pub fn fp_growth_matches_power_set() -> Check {
    for seed in 0..5 {
        let tx = random_transactions(300, 12, seed);
        for max_card in [3, 12] {
            let mined = fp_growth(&tx, 0.1, max_card).map_err(|e| e.to_string())?;
            let oracle = power_set_itemsets(&tx, 12, 0.1, max_card);
            ensure!(as_map(&mined) == oracle, "seed {seed}, max_card {max_card}: {} mined vs {} enumerated", mined.len(), oracle.len());
            ensure!(sorted(&mined), "seed {seed}: output not in (support desc, size asc, lexicographic) order");
            downward_closed(&mined)?;
        }
    }
    Ok(())
}

pub fn hand_example() -> Check {
    let tx = vec![vec![0, 1], vec![0, 1], vec![0, 2]];
    let got: Vec<(Vec<u32>, usize)> =
        fp_growth(&tx, 0.5, 2).map_err(|e| e.to_string())?.into_iter().map(|s| (s.items, s.support_count)).collect();
    let want = vec![(vec![0], 3), (vec![1], 2), (vec![0, 1], 2)];
    ensure!(got == want, "got {got:?}");
    Ok(())
}

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

fn counts(labels: &[usize]) -> Vec<usize> {
    let mut c = vec![0; 2];
    for &y in labels {
        c[y] += 1;
    }
    c
}

pub struct SplitScan {
    pub cut: f64,
    pub gain: f64,
    pub bound: f64,
}

/// Scans every boundary between distinct sorted values for the
/// entropy-minimizing binary split and recomputes the MDLP bound.
pub fn brute_force_split(values: &[f64], labels: &[usize]) -> SplitScan {
    let mut pairs: Vec<(f64, usize)> = values.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ys: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let n = pairs.len() as f64;
    let all = counts(&ys);
    let mut best = (f64::INFINITY, 0);
    for i in 1..pairs.len() {
        if pairs[i - 1].0 == pairs[i].0 {
            continue;
        }
        let (l, r) = (counts(&ys[..i]), counts(&ys[i..]));
        let w = (i as f64 * entropy(&l) + (n - i as f64) * entropy(&r)) / n;
        if w < best.0 {
            best = (w, i);
        }
    }
    let i = best.1;
    let (l, r) = (counts(&ys[..i]), counts(&ys[i..]));
    let k = |c: &[usize]| c.iter().filter(|&&v| v > 0).count() as f64;
    let delta = (3f64.powf(k(&all)) - 2.0).log2() - (k(&all) * entropy(&all) - k(&l) * entropy(&l) - k(&r) * entropy(&r));
    SplitScan {
        cut: 0.5 * (pairs[i - 1].0 + pairs[i].0),
        gain: entropy(&all) - best.0,
        bound: ((n - 1.0).log2() + delta) / n,
    }
}

pub fn two_gaussians(seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (Normal::new(0.0, 1.0).unwrap(), Normal::new(4.0, 1.0).unwrap());
    let mut values = Vec::with_capacity(200);
    let mut labels = Vec::with_capacity(200);
    for i in 0..200 {
        values.push(if i < 100 { a.sample(&mut rng) } else { b.sample(&mut rng) });
        labels.push(usize::from(i >= 100));
    }
    (values, labels)
}

pub fn mdlp_two_gaussians() -> Check {
    for seed in 0..3 {
        let (values, labels) = two_gaussians(seed);
        let scan = brute_force_split(&values, &labels);
        ensure!(scan.gain > scan.bound, "gain {} does not pass bound {}", scan.gain, scan.bound);
        ensure!((1.2..=2.8).contains(&scan.cut), "top-level cut {} outside [1.2, 2.8]", scan.cut);
        let cuts = mdl_cuts(&values, &labels, 2);
        ensure!(cuts.contains(&scan.cut), "seed {seed}: cuts {cuts:?} lack the brute-force split {}", scan.cut);
    }
    Ok(())
}

/// Re-running the discretizer on the values inside any final bin finds no
/// further cut.
pub fn mdlp_idempotent() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..4 {
        let (values, labels) = if seed == 0 {
            two_gaussians(9)
        } else {
            let v: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..10.0)).collect();
            let y = v.iter().map(|&x| usize::from((x > 3.0 && x < 6.5) ^ rng.random_bool(0.1))).collect();
            (v, y)
        };
        let cuts = mdl_cuts(&values, &labels, 2);
        let bins = cuts.len() + 1;
        for b in 0..bins {
            let (sub_v, sub_y): (Vec<f64>, Vec<usize>) = values
                .iter()
                .zip(&labels)
                .filter(|(v, _)| cuts.partition_point(|c| c <= v) == b)
                .map(|(&v, &y)| (v, y))
                .unzip();
            let again = mdl_cuts(&sub_v, &sub_y, 2);
            ensure!(again.is_empty(), "bin {b} of {cuts:?} splits again at {again:?}");
        }
    }
    Ok(())
}

/// Cuts are strictly increasing and strictly inside the observed range;
/// every value lands in exactly one half-open bin.
pub fn binning_is_total() -> Check {
    let schema = DatasetSchema::new(
        vec![FeatureSpec::continuous("x"), FeatureSpec::categorical("c", ["a", "b", "c"])],
        FeatureSpec::categorical("y", ["n", "p"]),
    )
    .unwrap();
    let (values, labels) = two_gaussians(4);
    let rows = Instances::from_rows(2, values.iter().enumerate().map(|(i, &v)| [v, (i % 3) as f64])).unwrap();
    let disc = mdl_discretize(&schema, &rows, &labels);
    let FeatureBins::Continuous { cuts } = &disc.features[0] else { return Err("feature 0 not continuous".into()) };
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    ensure!(cuts.windows(2).all(|w| w[0] < w[1]), "cuts not increasing: {cuts:?}");
    ensure!(cuts.iter().all(|&c| c > lo && c < hi), "cut outside ({lo}, {hi})");
    ensure!(disc.features[1] == FeatureBins::Categorical { categories: 3 }, "categorical feature not identity");
    let mut probes: Vec<f64> = cuts.clone();
    probes.extend([f64::MIN, -1e300, lo, hi, 1e300, f64::MAX]);
    probes.extend(cuts.iter().map(|c| c - 1e-9));
    for v in probes {
        let b = disc.bin(0, v);
        let hits = (0..disc.bin_count(0))
            .filter(|&k| {
                let (l, h) = disc.interval(0, k);
                l.is_none_or(|l| v >= l) && h.is_none_or(|h| v < h)
            })
            .count();
        ensure!(hits == 1, "{v} falls in {hits} intervals");
        let (l, h) = disc.interval(0, b);
        ensure!(l.is_none_or(|l| v >= l) && h.is_none_or(|h| v < h), "{v} not inside its bin {b}");
    }
    Ok(())
}

pub fn suite() -> Check {
    super::all(&[
        ("FP-Growth hand example", hand_example),
        ("FP-Growth vs power set", fp_growth_matches_power_set),
        ("MDLP two Gaussians", mdlp_two_gaussians),
        ("MDLP idempotence", mdlp_idempotent),
        ("binning totality", binning_is_total),
    ])
}
