//! Desk-scale MLP training harness with manual backpropagation, penalty
//! plans, norm-threshold pruning and the two-phase schedule.
//!
//! Phase 1 trains with the penalty and prunes after every epoch, stopping
//! once neither the neuron count nor the best validation accuracy has
//! improved within the patience window (one shared window). Phase 2 freezes
//! the masks, drops the penalty, and decays the learning rate on each
//! stagnation until the decay budget is exhausted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambda_planner::{plan as make_plan, ArchitectureSpec, LambdaPlan, Scheme};
use crate::penalty::PenaltyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `n_l x P_l` incoming weights, row per neuron.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLPModel {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    /// Per-layer neuron liveness; pruned neurons never come back.
    pub alive_masks: Vec<Vec<bool>>,
}

impl MLPModel {
    /// Glorot-uniform initialization, deterministic in the seed.
    /// `sizes` lists input dimension followed by each layer's neuron count.
    pub fn new(sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter(format!(
                "need at least input and output sizes, all positive, got {sizes:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut alive_masks = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_out)
                .map(|_| {
                    (0..fan_in)
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect()
                })
                .collect();
            layers.push(Layer {
                weights,
                bias: vec![0.0; fan_out],
            });
            alive_masks.push(vec![true; fan_out]);
        }
        Ok(Self {
            layers,
            activation,
            alive_masks,
        })
    }

    fn activate(&self, z: f64) -> f64 {
        match self.activation {
            Activation::ReLU => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn activate_grad(&self, z: f64) -> f64 {
        match self.activation {
            Activation::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh() * z.tanh(),
        }
    }

    /// Logits for one input.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z: Vec<f64> = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .zip(&self.alive_masks[l])
                .map(|((row, b), &alive)| {
                    if alive {
                        row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b
                    } else {
                        0.0
                    }
                })
                .collect();
            if l != last {
                for v in &mut z {
                    *v = self.activate(*v);
                }
            }
            h = z;
        }
        h
    }

    /// Alive neurons in all layers except the output layer.
    pub fn alive_hidden_neurons(&self) -> usize {
        self.alive_masks[..self.alive_masks.len() - 1]
            .iter()
            .map(|m| m.iter().filter(|&&a| a).count())
            .sum()
    }

    pub fn total_hidden_neurons(&self) -> usize {
        self.alive_masks[..self.alive_masks.len() - 1]
            .iter()
            .map(|m| m.len())
            .sum()
    }

    /// Weights and biases attached to alive neurons (and alive inputs).
    pub fn alive_param_count(&self) -> usize {
        let mut count = 0;
        for (l, layer) in self.layers.iter().enumerate() {
            let in_alive: Vec<bool> = if l == 0 {
                vec![true; layer.weights.first().map_or(0, Vec::len)]
            } else {
                self.alive_masks[l - 1].clone()
            };
            for (i, row) in layer.weights.iter().enumerate() {
                if self.alive_masks[l][i] {
                    count += 1; // bias
                    count += row
                        .iter()
                        .zip(&in_alive)
                        .filter(|(_, &alive)| alive)
                        .count();
                }
            }
        }
        count
    }

    pub fn per_layer_alive(&self) -> Vec<usize> {
        self.alive_masks
            .iter()
            .map(|m| m.iter().filter(|&&a| a).count())
            .collect()
    }
}

/// Gradient holder mirroring the model's weight/bias layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MLPModel) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| l.weights.iter().map(|r| vec![0.0; r.len()]).collect())
                .collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

/// Mean cross-entropy over the batch and its exact gradients.
/// Pruned neurons contribute nothing and receive zero gradient.
pub fn forward_backward(
    model: &MLPModel,
    xs: &[Vec<f64>],
    ys: &[usize],
) -> Result<(f64, Gradients)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidParameter(
            "batch features and labels must be non-empty and aligned".into(),
        ));
    }
    let n_layers = model.layers.len();
    let n_out = model.layers[n_layers - 1].bias.len();
    let mut grads = Gradients::zeros_like(model);
    let mut total_loss = 0.0;
    let inv_b = 1.0 / xs.len() as f64;

    for (x, &y) in xs.iter().zip(ys) {
        if x.len() != model.layers[0].weights[0].len() {
            return Err(Error::InvalidParameter(format!(
                "feature dimension {} does not match model fan-in {}",
                x.len(),
                model.layers[0].weights[0].len()
            )));
        }
        if y >= n_out {
            return Err(Error::InvalidParameter(format!(
                "label {y} outside the {n_out}-class output"
            )));
        }
        // Forward pass, keeping pre-activations and layer inputs.
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut h = x.clone();
        for (l, layer) in model.layers.iter().enumerate() {
            inputs.push(h.clone());
            let z: Vec<f64> = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .zip(&model.alive_masks[l])
                .map(|((row, b), &alive)| {
                    if alive {
                        row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b
                    } else {
                        0.0
                    }
                })
                .collect();
            pre.push(z.clone());
            h = if l == n_layers - 1 {
                z
            } else {
                z.into_iter().map(|v| model.activate(v)).collect()
            };
        }
        // Softmax cross-entropy.
        let logits = &h;
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total_loss += (lse - logits[y]) * inv_b;

        let mut delta: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(k, v)| ((v - lse).exp() - if k == y { 1.0 } else { 0.0 }) * inv_b)
            .collect();
        // Backward pass.
        for l in (0..n_layers).rev() {
            for (d, &alive) in delta.iter_mut().zip(&model.alive_masks[l]) {
                if !alive {
                    *d = 0.0;
                }
            }
            for (i, &d) in delta.iter().enumerate() {
                grads.bias[l][i] += d;
                for (j, v) in inputs[l].iter().enumerate() {
                    grads.weights[l][i][j] += d * v;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; inputs[l].len()];
                for (i, &d) in delta.iter().enumerate() {
                    for (j, w) in model.layers[l].weights[i].iter().enumerate() {
                        prev[j] += d * w;
                    }
                }
                for (j, p) in prev.iter_mut().enumerate() {
                    *p *= model.activate_grad(pre[l - 1][j]);
                }
                delta = prev;
            }
        }
    }
    if !total_loss.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "non-finite batch loss {total_loss}"
        )));
    }
    Ok((total_loss, grads))
}

fn plan_factor(plan: &LambdaPlan, layer_index: usize) -> Result<f64> {
    plan.per_layer
        .get(&(layer_index + 1))
        .copied()
        .ok_or_else(|| {
            Error::Configuration(format!(
                "plan has no factor for layer {}",
                layer_index + 1
            ))
        })
}

/// Penalty value and subgradient at the per-batch weight
/// `global_lambda * lambda_l * batch_scale`, with `batch_scale` the actual
/// batch size over the dataset size. Subgradients of `|.|` and `||.||_2`
/// are 0 at their kinks; biases are never penalized.
pub fn penalty_value_and_subgradient(
    model: &MLPModel,
    plan: &LambdaPlan,
    batch_scale: f64,
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(model);
    let mut value = 0.0;
    let mixing = plan.mixing_gamma.unwrap_or(if plan.penalty_kind == PenaltyKind::L1 {
        1.0
    } else {
        0.0
    });

    for (l, layer) in model.layers.iter().enumerate() {
        let base = plan.global_lambda * batch_scale;
        match plan.penalty_kind {
            PenaltyKind::L2 => {
                let f = base * plan_factor(plan, l)?;
                for (i, row) in layer.weights.iter().enumerate() {
                    for (j, &w) in row.iter().enumerate() {
                        value += f * w * w;
                        grads.weights[l][i][j] += 2.0 * f * w;
                    }
                }
            }
            PenaltyKind::L1 => {
                let f = base * plan_factor(plan, l)?;
                for (i, row) in layer.weights.iter().enumerate() {
                    for (j, &w) in row.iter().enumerate() {
                        value += f * w.abs();
                        grads.weights[l][i][j] += f * w.signum() * f64::from(w != 0.0);
                    }
                }
            }
            PenaltyKind::GroupLasso => {
                let f_group = base * plan_factor(plan, l)? * (1.0 - mixing);
                for (i, row) in layer.weights.iter().enumerate() {
                    let norm = row.iter().map(|w| w * w).sum::<f64>().sqrt();
                    value += f_group * norm;
                    if norm > 0.0 {
                        for (j, &w) in row.iter().enumerate() {
                            grads.weights[l][i][j] += f_group * w / norm;
                        }
                    }
                }
                if mixing > 0.0 {
                    let l1 = plan
                        .per_layer_l1
                        .as_ref()
                        .and_then(|m| m.get(&(l + 1)))
                        .copied()
                        .ok_or_else(|| {
                            Error::Configuration("sparse mixture plan is missing L1 factors".into())
                        })?;
                    let f_l1 = base * l1 * mixing;
                    for (i, row) in layer.weights.iter().enumerate() {
                        for (j, &w) in row.iter().enumerate() {
                            value += f_l1 * w.abs();
                            grads.weights[l][i][j] += f_l1 * w.signum() * f64::from(w != 0.0);
                        }
                    }
                }
            }
            PenaltyKind::ReversedGroupLasso => {
                let f = base * plan_factor(plan, l)?;
                let fan_in = layer.weights.first().map_or(0, Vec::len);
                for j in 0..fan_in {
                    let norm = layer
                        .weights
                        .iter()
                        .map(|row| row[j] * row[j])
                        .sum::<f64>()
                        .sqrt();
                    value += f * norm;
                    if norm > 0.0 {
                        for (i, row) in layer.weights.iter().enumerate() {
                            grads.weights[l][i][j] += f * row[j] / norm;
                        }
                    }
                }
            }
            other => {
                return Err(Error::UnsupportedPenalty(format!(
                    "no network penalty for {other:?}"
                )))
            }
        }
    }
    Ok((value, grads))
}

/// Applies the norm-threshold pruning rule (inclusive comparison) and
/// returns how many neurons were pruned. Row-grouped penalties prune a
/// neuron when its incoming-weight norm is at or below the threshold;
/// the reversed rule prunes the upstream neuron when its outgoing column
/// is. The output layer is never pruned.
pub fn prune_step(model: &mut MLPModel, kind: PenaltyKind, threshold: f64) -> usize {
    let n_layers = model.layers.len();
    let mut pruned = Vec::new();
    match kind {
        PenaltyKind::ReversedGroupLasso => {
            for l in 1..n_layers {
                let fan_in = model.layers[l].weights.first().map_or(0, Vec::len);
                for j in 0..fan_in {
                    if !model.alive_masks[l - 1][j] {
                        continue;
                    }
                    let norm = model.layers[l]
                        .weights
                        .iter()
                        .map(|row| row[j] * row[j])
                        .sum::<f64>()
                        .sqrt();
                    if norm <= threshold {
                        pruned.push((l - 1, j));
                    }
                }
            }
        }
        _ => {
            for l in 0..n_layers - 1 {
                for (i, row) in model.layers[l].weights.iter().enumerate() {
                    if !model.alive_masks[l][i] {
                        continue;
                    }
                    let norm = row.iter().map(|w| w * w).sum::<f64>().sqrt();
                    if norm <= threshold {
                        pruned.push((l, i));
                    }
                }
            }
        }
    }
    for &(l, i) in &pruned {
        model.alive_masks[l][i] = false;
        for w in &mut model.layers[l].weights[i] {
            *w = 0.0;
        }
        model.layers[l].bias[i] = 0.0;
        // Zero the outgoing references so downstream gradients vanish too.
        if l + 1 < n_layers {
            for row in &mut model.layers[l + 1].weights {
                row[i] = 0.0;
            }
        }
    }
    pruned.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rates: Vec<f64>,
    pub patience: usize,
    pub lr_decay_factor: f64,
    pub max_decays: usize,
    pub prune_threshold: f64,
    pub seed: u64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// SGD momentum; plain SGD by default.
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rates: vec![1e-2, 1e-3, 1e-4],
            patience: 50,
            lr_decay_factor: 10.0,
            max_decays: 2,
            prune_threshold: 0.001,
            seed: 0,
            max_epochs: 2000,
            batch_size: 32,
            momentum: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 || !(self.prune_threshold > 0.0) {
            return Err(Error::InvalidParameter(
                "patience must be >= 1 and the prune threshold positive".into(),
            ));
        }
        if self.learning_rates.is_empty() || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidParameter(
                "need at least one learning rate, a positive batch size and epoch cap".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Parses CSV with a header row; the last column is the integer label.
    /// The split is a seed-deterministic 70/15/15 shuffle.
    pub fn from_csv(text: &str, seed: u64) -> Result<Self> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() < 2 {
                return Err(Error::InvalidParameter(format!(
                    "line {}: need at least one feature and a label",
                    line_no + 1
                )));
            }
            let mut row = Vec::with_capacity(cells.len() - 1);
            for c in &cells[..cells.len() - 1] {
                row.push(c.trim().parse::<f64>().map_err(|e| {
                    Error::InvalidParameter(format!("line {}: {e}", line_no + 1))
                })?);
            }
            let label = cells[cells.len() - 1]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::InvalidParameter(format!("line {}: {e}", line_no + 1)))?;
            features.push(row);
            labels.push(label);
        }
        if features.is_empty() {
            return Err(Error::InvalidParameter("no data rows in CSV".into()));
        }
        let n_classes = labels.iter().max().unwrap() + 1;
        let (train_idx, val_idx, test_idx) = split_indices(features.len(), seed);
        Ok(Self {
            features,
            labels,
            train_idx,
            val_idx,
            test_idx,
            n_classes,
        })
    }
}

/// 70/15/15 split: floor for validation and test, remainder to train.
fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5157)); // split stream
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let n_val = (n as f64 * 0.15).floor() as usize;
    let n_test = (n as f64 * 0.15).floor() as usize;
    let test = idx.split_off(n - n_test);
    let val = idx.split_off(n - n_test - n_val);
    (idx, val, test)
}

/// Gaussian-cluster classification data, balanced across classes, with a
/// seed-deterministic 70/15/15 split.
pub fn make_synthetic_dataset(
    n_samples: usize,
    n_features: usize,
    n_classes: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_classes < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    if n_samples < n_classes || n_features == 0 {
        return Err(Error::InvalidParameter(format!(
            "degenerate dataset shape: {n_samples} samples, {n_features} features"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Distinct class centers at radius 3 from the origin.
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| {
            let g: Vec<f64> = (0..n_features).map(|_| rng.sample(StandardNormal)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            g.iter().map(|v| 3.0 * v / norm).collect()
        })
        .collect();
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let c = i % n_classes;
        let x: Vec<f64> = centers[c]
            .iter()
            .map(|&m| m + noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        features.push(x);
        labels.push(c);
    }
    let (train_idx, val_idx, test_idx) = split_indices(n_samples, seed);
    Ok(Dataset {
        features,
        labels,
        train_idx,
        val_idx,
        test_idx,
        n_classes,
    })
}

pub fn accuracy(model: &MLPModel, data: &Dataset, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let correct = idx
        .iter()
        .filter(|&&i| {
            let logits = model.forward(&data.features[i]);
            let pred = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .unwrap_or(0);
            pred == data.labels[i]
        })
        .count();
    correct as f64 / idx.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub phase: u8,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub alive: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub phase_log: Vec<EpochLog>,
    pub final_test_acc: f64,
    pub final_val_acc: f64,
    pub final_param_count: usize,
    pub plan_used: LambdaPlan,
}

/// Two-phase training loop; fully deterministic in the seed. Uses the first
/// configured learning rate (sweeps iterate over the rest).
pub fn train_two_phase(
    model: &mut MLPModel,
    data: &Dataset,
    plan: &LambdaPlan,
    cfg: &TrainConfig,
) -> Result<PruneReport> {
    cfg.validate()?;
    if data.train_idx.is_empty() || data.val_idx.is_empty() {
        return Err(Error::InvalidParameter(
            "dataset needs non-empty train and validation splits".into(),
        ));
    }
    let n_train = data.train_idx.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x7261)); // shuffle stream
    let mut lr = cfg.learning_rates[0];
    let mut velocity = Gradients::zeros_like(model);
    let mut log = Vec::new();

    let run_epoch = |model: &mut MLPModel,
                         rng: &mut ChaCha8Rng,
                         velocity: &mut Gradients,
                         lr: f64,
                         with_penalty: bool|
     -> Result<f64> {
        let mut order = data.train_idx.clone();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut epoch_penalty = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| data.features[i].clone()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let (loss, mut grads) = forward_backward(model, &xs, &ys)?;
            epoch_loss += loss;
            n_batches += 1;
            if with_penalty {
                let scale = chunk.len() as f64 / n_train as f64;
                let (pv, pg) = penalty_value_and_subgradient(model, plan, scale)?;
                epoch_penalty += pv;
                for l in 0..grads.weights.len() {
                    for i in 0..grads.weights[l].len() {
                        for j in 0..grads.weights[l][i].len() {
                            grads.weights[l][i][j] += pg.weights[l][i][j];
                        }
                    }
                }
            }
            for l in 0..model.layers.len() {
                for i in 0..model.layers[l].weights.len() {
                    if !model.alive_masks[l][i] {
                        continue;
                    }
                    for j in 0..model.layers[l].weights[i].len() {
                        let g = grads.weights[l][i][j];
                        let v = cfg.momentum * velocity.weights[l][i][j] + g;
                        velocity.weights[l][i][j] = v;
                        model.layers[l].weights[i][j] -= lr * v;
                    }
                    let g = grads.bias[l][i];
                    let v = cfg.momentum * velocity.bias[l][i] + g;
                    velocity.bias[l][i] = v;
                    model.layers[l].bias[i] -= lr * v;
                }
            }
        }
        let loss = epoch_loss / n_batches as f64 + epoch_penalty;
        if !loss.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "training diverged: epoch loss {loss}"
            )));
        }
        Ok(loss)
    };

    // Phase 1: penalty on, prune each epoch, shared stagnation window over
    // the neuron count and the best validation accuracy.
    let mut best_val = f64::NEG_INFINITY;
    let mut best_neurons = model.alive_hidden_neurons();
    let mut stale = 0usize;
    let mut epoch = 0usize;
    while epoch < cfg.max_epochs {
        epoch += 1;
        let train_loss = run_epoch(model, &mut rng, &mut velocity, lr, true)?;
        prune_step(model, plan.penalty_kind, cfg.prune_threshold);
        let val_acc = accuracy(model, data, &data.val_idx);
        log.push(EpochLog {
            phase: 1,
            epoch,
            train_loss,
            val_acc,
            alive: model.per_layer_alive(),
        });
        let neurons = model.alive_hidden_neurons();
        // Ties break toward the earlier epoch: only strict improvement resets.
        let improved = val_acc > best_val || neurons < best_neurons;
        if val_acc > best_val {
            best_val = val_acc;
        }
        if neurons < best_neurons {
            best_neurons = neurons;
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    // Phase 2: penalty off, masks frozen, learning-rate decays on stagnation.
    let mut decays = 0usize;
    let mut best_val2 = best_val;
    stale = 0;
    lr /= cfg.lr_decay_factor; // fine-tune below the phase-1 rate
    let mut epoch2 = 0usize;
    while epoch2 < cfg.max_epochs {
        epoch2 += 1;
        let train_loss = run_epoch(model, &mut rng, &mut velocity, lr, false)?;
        let val_acc = accuracy(model, data, &data.val_idx);
        log.push(EpochLog {
            phase: 2,
            epoch: epoch2,
            train_loss,
            val_acc,
            alive: model.per_layer_alive(),
        });
        if val_acc > best_val2 {
            best_val2 = val_acc;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                if decays >= cfg.max_decays {
                    break;
                }
                lr /= cfg.lr_decay_factor;
                decays += 1;
                stale = 0;
            }
        }
    }

    Ok(PruneReport {
        final_test_acc: accuracy(model, data, &data.test_idx),
        final_val_acc: accuracy(model, data, &data.val_idx),
        final_param_count: model.alive_param_count(),
        plan_used: plan.clone(),
        phase_log: log,
    })
}

fn model_sizes(arch: &ArchitectureSpec) -> Vec<usize> {
    let mut sizes = vec![arch.layers[0].p_l];
    sizes.extend(arch.layers.iter().map(|l| l.n_l));
    sizes
}

/// Runs the global-factor sweep: for each value, selects the best learning
/// rate by validation accuracy, reruns with two extra seeds, and reports the
/// averaged accuracy and parameter count.
pub fn lambda_sweep(
    data: &Dataset,
    arch: &ArchitectureSpec,
    kind: PenaltyKind,
    scheme: Scheme,
    sweep: &[f64],
    cfg: &TrainConfig,
) -> Result<Vec<PruneReport>> {
    if sweep.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    cfg.validate()?;
    let sizes = model_sizes(arch);
    let mut reports = Vec::with_capacity(sweep.len());
    for &global in sweep {
        let plan = make_plan(arch, kind, scheme, Some(global), None)?;
        // Learning-rate selection at the base seed.
        let mut best: Option<(f64, PruneReport)> = None;
        for &lr in &cfg.learning_rates {
            let mut run_cfg = cfg.clone();
            run_cfg.learning_rates = vec![lr];
            let mut model = MLPModel::new(&sizes, Activation::ReLU, cfg.seed)?;
            let report = train_two_phase(&mut model, data, &plan, &run_cfg)?;
            let better = match &best {
                Some((_, b)) => report.final_val_acc > b.final_val_acc,
                None => true,
            };
            if better {
                best = Some((lr, report));
            }
        }
        let (best_lr, mut report) = best.expect("non-empty learning-rate list");
        // Average over two more seeds at the chosen rate.
        let mut accs = vec![report.final_test_acc];
        let mut params = vec![report.final_param_count as f64];
        for extra in 1..=2u64 {
            let mut run_cfg = cfg.clone();
            run_cfg.learning_rates = vec![best_lr];
            run_cfg.seed = cfg.seed.wrapping_add(extra);
            let mut model = MLPModel::new(&sizes, Activation::ReLU, run_cfg.seed)?;
            let r = train_two_phase(&mut model, data, &plan, &run_cfg)?;
            accs.push(r.final_test_acc);
            params.push(r.final_param_count as f64);
        }
        report.final_test_acc = accs.iter().sum::<f64>() / accs.len() as f64;
        report.final_param_count =
            (params.iter().sum::<f64>() / params.len() as f64).round() as usize;
        reports.push(report);
    }
    Ok(reports)
}
