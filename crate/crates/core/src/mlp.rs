//! Multilayer perceptron teacher: ReLU hidden layers, softmax output,
//! cross-entropy loss with an L2 weight penalty, trained by mini-batch SGD
//! with momentum.
//!
//! Continuous inputs are z-scored with training statistics and categorical
//! inputs are one-hot encoded; both transforms are stored in the model, so
//! callers always pass raw feature values.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataTable, DatasetSchema, FeatureKind, Instances};
use crate::error::{Error, Result};
use crate::math;
use crate::oracle::Oracle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden layer widths, e.g. `[20, 20]`.
    pub hidden: Vec<usize>,
    pub l2_penalty: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![20, 20],
            l2_penalty: 1.0,
            epochs: 200,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum InputColumn {
    Continuous { mean: f64, scale: f64 },
    Categorical { categories: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InputEncoder {
    columns: Vec<InputColumn>,
    width: usize,
}

impl InputEncoder {
    fn fit(table: &DataTable) -> Self {
        let mut width = 0;
        let columns = table
            .schema
            .features
            .iter()
            .enumerate()
            .map(|(j, f)| match f.kind {
                FeatureKind::Continuous => {
                    width += 1;
                    let col = table.instances().column(j);
                    let mean = math::mean(&col);
                    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len().max(1) as f64;
                    let sd = math::sqrt(var);
                    InputColumn::Continuous { mean, scale: if sd > 1e-12 { sd } else { 1.0 } }
                }
                FeatureKind::Categorical => {
                    width += f.categories.len();
                    InputColumn::Categorical { categories: f.categories.len() }
                }
            })
            .collect();
        InputEncoder { columns, width }
    }

    fn encode(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (col, &v) in self.columns.iter().zip(x) {
            match *col {
                InputColumn::Continuous { mean, scale } => out.push((v - mean) / scale),
                InputColumn::Categorical { categories } => {
                    let idx = v as usize;
                    out.extend((0..categories).map(|c| if c == idx { 1.0 } else { 0.0 }));
                }
            }
        }
    }
}

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTeacher {
    encoder: InputEncoder,
    layers: Vec<DenseLayer>,
    pub hidden: Vec<usize>,
    pub l2_penalty: f64,
    pub classes: usize,
    pub features: usize,
    pub train_accuracy: f64,
}

/// Per-sample activations kept for backpropagation.
struct Trace {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Softmax output.
    proba: Vec<f64>,
}

impl MlpTeacher {
    fn init(schema: &DatasetSchema, encoder: InputEncoder, config: &MlpConfig, rng: &mut ChaCha8Rng) -> Self {
        let classes = schema.class_count();
        let mut sizes = vec![encoder.width];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(classes);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = math::sqrt(6.0 / (fan_in + fan_out) as f64);
                DenseLayer {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect(),
                    bias: (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect(),
                }
            })
            .collect();
        MlpTeacher {
            encoder,
            layers,
            hidden: config.hidden.clone(),
            l2_penalty: config.l2_penalty,
            classes,
            features: schema.width(),
            train_accuracy: 0.0,
        }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Raw instance mapped to the network's input vector.
    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encoder.width);
        self.encoder.encode(x, &mut out);
        out
    }

    fn trace(&self, encoded: &[f64]) -> Trace {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = encoded.to_vec();
        let mut next = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            layer.forward(&current, &mut next);
            inputs.push(core::mem::take(&mut current));
            if li + 1 < self.layers.len() {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            core::mem::swap(&mut current, &mut next);
        }
        Trace { inputs, proba: softmax(&current) }
    }

    pub fn proba_one(&self, x: &[f64]) -> Vec<f64> {
        self.trace(&self.encode(x)).proba
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All weights then biases, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count());
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
    }

    /// Squared L2 norm of all weight matrices (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.weights.iter()).map(|w| w * w).sum()
    }

    /// Mean cross-entropy over the batch plus `l2 / (2 |batch|) * ||W||^2`,
    /// with its gradient in [`MlpTeacher::parameters`] order.
    pub fn loss_and_gradient(&self, rows: &Instances, labels: &[usize]) -> (f64, Vec<f64>) {
        let encoded: Vec<Vec<f64>> = rows.rows().map(|r| self.encode(r)).collect();
        let refs: Vec<(&[f64], usize)> = encoded.iter().map(|e| e.as_slice()).zip(labels.iter().copied()).collect();
        self.batch_loss_and_gradient(&refs)
    }

    fn batch_loss_and_gradient(&self, batch: &[(&[f64], usize)]) -> (f64, Vec<f64>) {
        let n = batch.len() as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect();
        let mut loss = 0.0;
        for &(x, y) in batch {
            let trace = self.trace(x);
            loss -= math::ln(trace.proba[y].max(1e-300));
            // d(CE)/d(logits) = p - onehot(y)
            let mut delta: Vec<f64> = trace.proba.clone();
            delta[y] -= 1.0;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &trace.inputs[li];
                let (gw, gb) = &mut grads[li];
                for (o, (&d, b)) in delta.iter().zip(gb.iter_mut()).enumerate() {
                    *b += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                if li > 0 {
                    let mut prev = vec![0.0; layer.inputs];
                    for (&d, w) in delta.iter().zip(layer.weights.chunks_exact(layer.inputs)) {
                        for (p, wv) in prev.iter_mut().zip(w) {
                            *p += d * wv;
                        }
                    }
                    // ReLU derivative: the layer input is the activation itself
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        let mut flat = Vec::with_capacity(self.parameter_count());
        for (layer, (gw, gb)) in self.layers.iter().zip(&grads) {
            flat.extend(gw.iter().zip(&layer.weights).map(|(g, w)| g / n + self.l2_penalty / n * w));
            flat.extend(gb.iter().map(|g| g / n));
        }
        loss = loss / n + self.l2_penalty / (2.0 * n) * self.weight_norm_sq();
        (loss, flat)
    }

    pub fn accuracy(&self, table: &DataTable) -> f64 {
        if table.is_empty() {
            return 0.0;
        }
        let correct = table
            .instances()
            .rows()
            .zip(table.labels())
            .filter(|(x, &y)| math::argmax(&self.proba_one(x)) == y)
            .count();
        correct as f64 / table.len() as f64
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| math::exp(v - max)).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Trains an MLP teacher. Deterministic for a fixed `config.seed`.
pub fn train_mlp(train: &DataTable, config: &MlpConfig) -> Result<MlpTeacher> {
    if train.is_empty() {
        return Err(Error::NoData);
    }
    if config.batch_size == 0 || config.hidden.contains(&0) {
        return Err(Error::InvalidArgument(format!("bad MLP configuration {:?}", config.hidden)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let encoder = InputEncoder::fit(train);
    let mut model = MlpTeacher::init(&train.schema, encoder, config, &mut rng);

    let first = train.labels()[0];
    if train.labels().iter().all(|&y| y == first) {
        // Degenerate labels: answer the only observed class everywhere.
        let out = model.layers.last_mut().expect("network has an output layer");
        out.weights.iter_mut().for_each(|w| *w = 0.0);
        out.bias.iter_mut().enumerate().for_each(|(c, b)| *b = if c == first { 10.0 } else { 0.0 });
        model.train_accuracy = 1.0;
        return Ok(model);
    }

    let encoded: Vec<Vec<f64>> = train.instances().rows().map(|r| model.encode(r)).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut velocity = vec![0.0; model.parameter_count()];
    let mut params = model.parameters();
    let weight_mask = weight_mask(&model);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|&i| (encoded[i].as_slice(), train.labels()[i])).collect();
            // L2 as a proximal shrink after the data step, scaled by the
            // momentum step size lr / (1 - momentum) so the stationary point
            // is that of the penalized loss. Stable for any penalty.
            let penalty = model.l2_penalty;
            model.l2_penalty = 0.0;
            let (loss, grad) = model.batch_loss_and_gradient(&batch);
            model.l2_penalty = penalty;
            let step = config.learning_rate / (1.0 - config.momentum).max(1e-3);
            let shrink = 1.0 / (1.0 + step * penalty / batch.len() as f64);
            for ((p, v), (g, &is_weight)) in params.iter_mut().zip(velocity.iter_mut()).zip(grad.iter().zip(&weight_mask)) {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
                if is_weight {
                    *p *= shrink;
                }
            }
            model.set_parameters(&params);
            epoch_loss += loss * batch.len() as f64;
        }
        if !epoch_loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
    }
    model.train_accuracy = model.accuracy(train);
    Ok(model)
}

fn weight_mask(model: &MlpTeacher) -> Vec<bool> {
    let mut mask = Vec::with_capacity(model.parameter_count());
    for l in &model.layers {
        mask.extend(core::iter::repeat_n(true, l.weights.len()));
        mask.extend(core::iter::repeat_n(false, l.bias.len()));
    }
    mask
}

impl Oracle for MlpTeacher {
    fn class_count(&self) -> usize {
        self.classes
    }

    fn feature_count(&self) -> usize {
        self.features
    }

    fn predict_proba(&self, rows: &Instances) -> Result<Vec<Vec<f64>>> {
        if rows.width() != self.features {
            return Err(Error::SchemaMismatch { expected: self.features, found: rows.width() });
        }
        Ok(rows.rows().map(|r| self.proba_one(r)).collect())
    }

    fn describe(&self) -> String {
        let widths: Vec<String> = self.hidden.iter().map(|h| format!("{h}")).collect();
        format!("mlp:{}", widths.join(","))
    }
}
