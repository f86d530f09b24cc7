use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulematrix_core::mlp::{train_mlp, MlpConfig, MlpTeacher};
use rulematrix_core::{DataTable, DatasetSchema, FeatureSpec, Instances, Oracle};

use super::{close, Check};

/// Two continuous features and one 3-way categorical; 3 classes.
pub fn mixed_fixture(n: usize, seed: u64) -> DataTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = DatasetSchema::new(
        vec![FeatureSpec::continuous("a"), FeatureSpec::continuous("b"), FeatureSpec::categorical("c", ["r", "g", "b"])],
        FeatureSpec::categorical("y", ["k0", "k1", "k2"]),
    )
    .unwrap();
    let rows: Vec<[f64; 3]> =
        (0..n).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(0.0..50.0), rng.random_range(0..3) as f64]).collect();
    let labels = rows.iter().map(|r| if r[0] > 0.5 { 0 } else if r[1] > 25.0 || r[2] == 1.0 { 1 } else { 2 }).collect();
    DataTable::new(schema, Instances::from_rows(3, &rows).unwrap(), labels).unwrap()
}

fn quick(l2: f64, seed: u64) -> MlpConfig {
    MlpConfig { hidden: vec![6, 5], l2_penalty: l2, epochs: 3, seed, ..MlpConfig::default() }
}

/// Analytic gradient of the penalized loss against central differences on
/// every parameter, 1e-4 relative.
pub fn gradient_matches_finite_differences() -> Check {
    for seed in 0..3 {
        let t = mixed_fixture(10, seed);
        let mut model = train_mlp(&t, &quick(0.5, seed)).map_err(|e| e.to_string())?;
        let (_, grad) = model.loss_and_gradient(t.instances(), t.labels());
        let params = model.parameters();
        ensure!(grad.len() == params.len(), "gradient has {} entries for {} parameters", grad.len(), params.len());
        let h = 1e-6;
        for k in 0..params.len() {
            let mut p = params.clone();
            p[k] = params[k] + h;
            model.set_parameters(&p);
            let up = model.loss_and_gradient(t.instances(), t.labels()).0;
            p[k] = params[k] - h;
            model.set_parameters(&p);
            let down = model.loss_and_gradient(t.instances(), t.labels()).0;
            let fd = (up - down) / (2.0 * h);
            let scale = grad[k].abs().max(fd.abs());
            ensure!(scale < 1e-7 || (grad[k] - fd).abs() <= 1e-4 * scale, "seed {seed}, parameter {k}: analytic {} vs numeric {fd}", grad[k]);
        }
        model.set_parameters(&params);
    }
    Ok(())
}

/// Straight-line forward pass over the model's layers.
pub fn hand_forward(model: &MlpTeacher, x: &[f64]) -> Vec<f64> {
    let layers = model.layers();
    let mut h = model.encode(x);
    for (li, layer) in layers.iter().enumerate() {
        let mut next = vec![0.0; layer.outputs];
        for (o, v) in next.iter_mut().enumerate() {
            let mut s = layer.bias[o];
            for i in 0..layer.inputs {
                s += layer.weights[o * layer.inputs + i] * h[i];
            }
            *v = if li + 1 < layers.len() { s.max(0.0) } else { s };
        }
        h = next;
    }
    let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = h.iter().map(|v| (v - max).exp()).sum();
    h.iter().map(|v| (v - max).exp() / z).collect()
}

fn first_argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn forward_pass_matches_hand_computation() -> Check {
    let train = mixed_fixture(120, 3);
    let model = train_mlp(&train, &MlpConfig { hidden: vec![8, 8], epochs: 30, seed: 3, ..MlpConfig::default() }).map_err(|e| e.to_string())?;
    let probe = mixed_fixture(20, 99);
    let labels = model.predict(probe.instances()).map_err(|e| e.to_string())?;
    let proba = model.predict_proba(probe.instances()).map_err(|e| e.to_string())?;
    for (i, x) in probe.instances().rows().enumerate() {
        let p = hand_forward(&model, x);
        ensure!(labels[i] == first_argmax(&p), "row {i}: label {} vs hand argmax {}", labels[i], first_argmax(&p));
        ensure!(p.iter().zip(&proba[i]).all(|(a, b)| close(*a, *b, 1e-12)), "row {i}: probabilities differ");
    }
    Ok(())
}

pub fn huge_l2_shrinks_weights() -> Check {
    let t = mixed_fixture(200, 4);
    let model = train_mlp(&t, &MlpConfig { hidden: vec![20, 20], l2_penalty: 1e6, seed: 4, ..MlpConfig::default() }).map_err(|e| e.to_string())?;
    let norm = model.weight_norm_sq().sqrt();
    ensure!(norm < 1e-2, "weight norm {norm} with l2 = 1e6");
    Ok(())
}

/// argmax(proba) = predict, rows are distributions, and repeated calls agree.
pub fn oracle_consistency(oracle: &dyn Oracle, rows: &Instances) -> Check {
    let labels = oracle.predict(rows).map_err(|e| e.to_string())?;
    let proba = oracle.predict_proba(rows).map_err(|e| e.to_string())?;
    ensure!(labels.len() == rows.len() && proba.len() == rows.len(), "output length mismatch");
    for (i, (y, p)) in labels.iter().zip(&proba).enumerate() {
        ensure!(p.len() == oracle.class_count(), "row {i}: {} probabilities", p.len());
        ensure!(p.iter().all(|v| *v >= 0.0) && close(p.iter().sum(), 1.0, 1e-6), "row {i}: {p:?} is not a distribution");
        ensure!(*y == first_argmax(p), "row {i}: label {y} but argmax {}", first_argmax(p));
    }
    ensure!(oracle.predict(rows).map_err(|e| e.to_string())? == labels, "second call disagrees");
    Ok(())
}

pub fn suite() -> Check {
    super::all(&[
        ("finite differences", gradient_matches_finite_differences),
        ("hand forward pass", forward_pass_matches_hand_computation),
        ("L2 = 1e6", huge_l2_shrinks_weights),
    ])
}
