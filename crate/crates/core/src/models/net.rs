//! Layered feed-forward network: dense layers with optional batch
//! normalisation, trained with mini-batch Adam and early stopping.
//!
//! Each layer computes `act(bn(x W + b))`. The input width is not part of
//! the spec; it is taken from the data at fit time, which lets the same
//! spec be refitted on shrinking feature sets.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::{Fitted, FittedModel, TrainParams, TrainingMeta};
use crate::error::{Error, Result};

const BN_EPS: f64 = 1e-3;
const BN_MOMENTUM: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, u: f64) -> f64 {
        match self {
            Activation::Linear => u,
            Activation::Relu => u.max(0.0),
            Activation::Sigmoid => sigmoid(u),
        }
    }

    /// Derivative expressed through the pre-activation `u` and output `a`.
    fn derivative(self, u: f64, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => f64::from(u8::from(u > 0.0)),
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
    #[serde(default)]
    pub batch_norm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// Binary classification, trained on cross-entropy.
    Sigmoid,
    /// Regression, trained on mean squared error.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredNetSpec {
    /// All layers in order, including the single-unit output layer.
    pub layers: Vec<LayerSpec>,
    #[serde(default = "default_output")]
    pub output: OutputKind,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
}

fn default_output() -> OutputKind {
    OutputKind::Sigmoid
}

fn default_learning_rate() -> f64 {
    0.001
}

impl Default for LayeredNetSpec {
    /// 128 linear units, 64 linear units, one sigmoid output.
    fn default() -> Self {
        Self {
            layers: vec![
                LayerSpec { units: 128, activation: Activation::Linear, batch_norm: false },
                LayerSpec { units: 64, activation: Activation::Linear, batch_norm: false },
                LayerSpec { units: 1, activation: Activation::Sigmoid, batch_norm: false },
            ],
            output: OutputKind::Sigmoid,
            learning_rate: default_learning_rate(),
        }
    }
}

impl LayeredNetSpec {
    pub fn validate(&self) -> Result<()> {
        let last = self
            .layers
            .last()
            .ok_or_else(|| Error::InvalidParameter("a layered net needs at least one layer".into()))?;
        if self.layers.iter().any(|l| l.units == 0) {
            return Err(Error::InvalidParameter("layer units must be positive".into()));
        }
        let head = match self.output {
            OutputKind::Sigmoid => Activation::Sigmoid,
            OutputKind::Linear => Activation::Linear,
        };
        if last.units != 1 || last.activation != head {
            return Err(Error::InvalidParameter(format!(
                "the last layer must be a single {:?} unit for {:?} output",
                head, self.output
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(units: usize) -> Self {
        Self {
            gamma: Array1::ones(units),
            beta: Array1::zeros(units),
            running_mean: Array1::zeros(units),
            running_var: Array1::ones(units),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `inputs x units`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub batch_norm: Option<BatchNorm>,
    pub activation: Activation,
}

impl Layer {
    pub fn dense(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Self {
        Self { weights, bias, batch_norm: None, activation }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub output: OutputKind,
}

struct LayerCache {
    input: Array2<f64>,
    xhat: Option<Array2<f64>>,
    inv_std: Option<Array1<f64>>,
    batch_mean: Option<Array1<f64>>,
    batch_var: Option<Array1<f64>>,
    pre_activation: Array2<f64>,
    output: Array2<f64>,
}

#[derive(Debug, Clone)]
struct LayerGrad {
    weights: Array2<f64>,
    bias: Array1<f64>,
    gamma: Option<Array1<f64>>,
    beta: Option<Array1<f64>>,
}

impl Network {
    /// Glorot-uniform weights, zero biases, identity batch-norm.
    pub fn init(spec: &LayeredNetSpec, n_inputs: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if n_inputs == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = n_inputs;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            let limit = (6.0 / (fan_in + l.units) as f64).sqrt();
            let weights = Array2::from_shape_fn((fan_in, l.units), |_| rng.random_range(-limit..limit));
            layers.push(Layer {
                weights,
                bias: Array1::zeros(l.units),
                batch_norm: l.batch_norm.then(|| BatchNorm::new(l.units)),
                activation: l.activation,
            });
            fan_in = l.units;
        }
        Ok(Self { layers, output: spec.output })
    }

    pub fn from_layers(layers: Vec<Layer>, output: OutputKind) -> Self {
        Self { layers, output }
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    /// Inference-mode forward pass (batch-norm uses running statistics).
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut a = x.to_owned();
        for layer in &self.layers {
            let mut u = a.dot(&layer.weights) + &layer.bias;
            if let Some(bn) = &layer.batch_norm {
                let scale = &bn.gamma / &bn.running_var.mapv(|v| (v + BN_EPS).sqrt());
                u = (u - &bn.running_mean) * &scale + &bn.beta;
            }
            a = u.mapv(|v| layer.activation.apply(v));
        }
        a.column(0).to_owned()
    }

    fn forward_train(&self, x: ArrayView2<f64>) -> Vec<LayerCache> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for layer in &self.layers {
            let z = a.dot(&layer.weights) + &layer.bias;
            let (u, xhat, inv_std, mean, var) = match &layer.batch_norm {
                Some(bn) => {
                    let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                    let centred = &z - &mean;
                    let var = centred.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty batch");
                    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                    let xhat = centred * &inv_std;
                    let u = &xhat * &bn.gamma + &bn.beta;
                    (u, Some(xhat), Some(inv_std), Some(mean), Some(var))
                }
                None => (z, None, None, None, None),
            };
            let out = u.mapv(|v| layer.activation.apply(v));
            caches.push(LayerCache {
                input: a,
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
                pre_activation: u,
                output: out.clone(),
            });
            a = out;
        }
        caches
    }

    /// Mean loss of outputs given the final layer's pre-activation `u` and
    /// output `a`. Cross-entropy is evaluated from `u` for stability.
    fn loss(&self, u: ArrayView1<f64>, a: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        let m = y.len() as f64;
        match self.output {
            OutputKind::Sigmoid => {
                u.iter()
                    .zip(y.iter())
                    .map(|(&u, &t)| {
                        let softplus = if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() };
                        softplus - t * u
                    })
                    .sum::<f64>()
                    / m
            }
            OutputKind::Linear => a.iter().zip(y.iter()).map(|(a, t)| (a - t) * (a - t)).sum::<f64>() / m,
        }
    }

    fn backward(&self, caches: &[LayerCache], y: ArrayView1<f64>) -> Vec<LayerGrad> {
        let m = y.len() as f64;
        let last = caches.last().expect("at least one layer");
        let out = last.output.column(0);
        // gradient wrt the final pre-activation
        let du_last: Array1<f64> = match self.output {
            OutputKind::Sigmoid => (&out - &y) / m,
            OutputKind::Linear => (&out - &y) * (2.0 / m),
        };
        let mut du = du_last.insert_axis(Axis(1));
        let mut grads = Vec::with_capacity(self.layers.len());
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            if i + 1 != self.layers.len() {
                let deriv = ndarray::Zip::from(&cache.pre_activation)
                    .and(&cache.output)
                    .map_collect(|&u, &a| layer.activation.derivative(u, a));
                du *= &deriv;
            }
            let (dz, dgamma, dbeta) = match (&layer.batch_norm, &cache.xhat, &cache.inv_std) {
                (Some(bn), Some(xhat), Some(inv_std)) => {
                    let dgamma = (&du * xhat).sum_axis(Axis(0));
                    let dbeta = du.sum_axis(Axis(0));
                    let dxhat = &du * &bn.gamma;
                    let sum_dxhat = dxhat.sum_axis(Axis(0));
                    let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                    let dz = ((&dxhat * m - &sum_dxhat) - xhat * &sum_dxhat_xhat) * &(inv_std / m);
                    (dz, Some(dgamma), Some(dbeta))
                }
                _ => (du.clone(), None, None),
            };
            grads.push(LayerGrad {
                weights: cache.input.t().dot(&dz),
                bias: dz.sum_axis(Axis(0)),
                gamma: dgamma,
                beta: dbeta,
            });
            du = dz.dot(&layer.weights.t());
        }
        grads.reverse();
        grads
    }

    /// Training-mode loss on one batch and its gradient with respect to
    /// [`Network::flat_params`]. Batch-norm uses the batch's own statistics
    /// and running statistics are left untouched.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> (f64, Vec<f64>) {
        let caches = self.forward_train(x);
        let last = caches.last().expect("at least one layer");
        let loss = self.loss(last.pre_activation.column(0), last.output.column(0), y);
        let grads = self.backward(&caches, y);
        let mut flat = Vec::new();
        for g in &grads {
            flat.extend(g.weights.iter());
            flat.extend(g.bias.iter());
            if let (Some(dg), Some(db)) = (&g.gamma, &g.beta) {
                flat.extend(dg.iter());
                flat.extend(db.iter());
            }
        }
        (loss, flat)
    }

    /// Trainable parameters in a fixed order: per layer weights (row-major),
    /// bias, then batch-norm gamma and beta.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for l in &self.layers {
            flat.extend(l.weights.iter());
            flat.extend(l.bias.iter());
            if let Some(bn) = &l.batch_norm {
                flat.extend(bn.gamma.iter());
                flat.extend(bn.beta.iter());
            }
        }
        flat
    }

    pub fn set_flat_params(&mut self, values: &[f64]) {
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            let bn = l.batch_norm.as_mut().map(|bn| (&mut bn.gamma, &mut bn.beta));
            let mut targets: Vec<&mut f64> = l.weights.iter_mut().chain(l.bias.iter_mut()).collect();
            if let Some((g, b)) = bn {
                targets.extend(g.iter_mut().chain(b.iter_mut()));
            }
            for t in targets {
                *t = it.next().expect("parameter vector too short");
            }
        }
        assert!(it.next().is_none(), "parameter vector too long");
    }

    fn update_running_stats(&mut self, caches: &[LayerCache]) {
        for (layer, cache) in self.layers.iter_mut().zip(caches) {
            if let (Some(bn), Some(mean), Some(var)) = (&mut layer.batch_norm, &cache.batch_mean, &cache.batch_var) {
                bn.running_mean = &bn.running_mean * BN_MOMENTUM + mean * (1.0 - BN_MOMENTUM);
                bn.running_var = &bn.running_var * BN_MOMENTUM + var * (1.0 - BN_MOMENTUM);
            }
        }
    }

    fn eval_loss(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
        let p = self.predict(x);
        let m = y.len() as f64;
        match self.output {
            OutputKind::Sigmoid => {
                p.iter()
                    .zip(y.iter())
                    .map(|(&p, &t)| {
                        let p = p.clamp(1e-15, 1.0 - 1e-15);
                        -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                    })
                    .sum::<f64>()
                    / m
            }
            OutputKind::Linear => p.iter().zip(y.iter()).map(|(a, t)| (a - t) * (a - t)).sum::<f64>() / m,
        }
    }
}

struct Adam {
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(lr: f64, n: usize) -> Self {
        Self { lr, step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

pub(crate) fn fit(
    spec: &LayeredNetSpec,
    params: &TrainParams,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    seed: u64,
) -> Result<FittedModel> {
    let n = x.nrows();
    // held-out rows come from the end, unshuffled
    let n_train = if params.validation_split > 0.0 {
        (n as f64 * (1.0 - params.validation_split)).floor() as usize
    } else {
        n
    };
    if n_train == 0 {
        return Err(Error::InvalidParameter("no training rows left after validation split".into()));
    }
    if params.batch_size > n_train {
        return Err(Error::InvalidParameter(format!(
            "batch_size {} exceeds the {} training rows",
            params.batch_size, n_train
        )));
    }
    let (x_tr, x_val) = x.split_at(Axis(0), n_train);
    let (y_tr, y_val) = y.split_at(Axis(0), n_train);
    let has_val = x_val.nrows() > 0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::init(spec, x.ncols(), rng.random())?;
    let mut flat = net.flat_params();
    let mut adam = Adam::new(spec.learning_rate, flat.len());
    let mut order: Vec<usize> = (0..n_train).collect();

    let mut best: Option<(f64, usize, Network)> = None;
    let mut wait = 0;
    let mut meta = TrainingMeta::default();
    for epoch in 1..=params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(params.batch_size) {
            let xb = x_tr.select(Axis(0), batch);
            let yb = y_tr.select(Axis(0), batch);
            let caches = net.forward_train(xb.view());
            let last = caches.last().expect("at least one layer");
            let loss = net.loss(last.pre_activation.column(0), last.output.column(0), yb.view());
            let grads = net.backward(&caches, yb.view());
            let grad: Vec<f64> = grads
                .iter()
                .flat_map(|g| {
                    g.weights
                        .iter()
                        .chain(g.bias.iter())
                        .chain(g.gamma.iter().flatten())
                        .chain(g.beta.iter().flatten())
                        .copied()
                        .collect::<Vec<_>>()
                })
                .collect();
            net.update_running_stats(&caches);
            adam.update(&mut flat, &grad);
            net.set_flat_params(&flat);
            epoch_loss += loss * batch.len() as f64;
        }
        epoch_loss /= n_train as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let val_loss = has_val.then(|| net.eval_loss(x_val, y_val));
        if val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if params.verbose {
            match val_loss {
                Some(v) => eprintln!("epoch {epoch}: loss {epoch_loss:.6}, val_loss {v:.6}"),
                None => eprintln!("epoch {epoch}: loss {epoch_loss:.6}"),
            }
        }
        meta.iterations = epoch;
        meta.final_loss = Some(epoch_loss);
        meta.final_val_loss = val_loss;

        let monitored = val_loss.unwrap_or(epoch_loss);
        // ties keep the earlier epoch
        if best.as_ref().is_none_or(|b| monitored < b.0) {
            best = Some((monitored, epoch, net.clone()));
            wait = 0;
        } else {
            wait += 1;
            if params.patience > 0 && wait >= params.patience {
                break;
            }
        }
    }
    if let Some((_, epoch, best_net)) = best {
        meta.best_epoch = Some(epoch);
        if params.restore_best {
            net = best_net;
        }
    }
    Ok(FittedModel { model: Fitted::LayeredNet(net), meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit as fit_model, predict, ModelSpec};
    use ndarray::array;

    #[test]
    fn single_linear_unit() {
        let net = Network::from_layers(
            vec![Layer::dense(array![[2.0]], array![1.0], Activation::Linear)],
            OutputKind::Linear,
        );
        assert_eq!(net.predict(array![[3.0]].view()), array![7.0]);
    }

    #[test]
    fn spec_validation() {
        LayeredNetSpec::default().validate().unwrap();
        let mut bad = LayeredNetSpec::default();
        bad.layers.pop();
        assert!(bad.validate().is_err());
        bad.layers.clear();
        assert!(bad.validate().is_err());
        let reg = LayeredNetSpec {
            layers: vec![LayerSpec { units: 1, activation: Activation::Sigmoid, batch_norm: false }],
            output: OutputKind::Linear,
            learning_rate: 0.01,
        };
        assert!(reg.validate().is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let spec = LayeredNetSpec {
            layers: vec![
                LayerSpec { units: 3, activation: Activation::Relu, batch_norm: true },
                LayerSpec { units: 1, activation: Activation::Sigmoid, batch_norm: false },
            ],
            output: OutputKind::Sigmoid,
            learning_rate: 0.01,
        };
        let mut net = Network::init(&spec, 2, 1).unwrap();
        let p = net.flat_params();
        assert_eq!(p.len(), 2 * 3 + 3 + 3 + 3 + 3 + 1);
        let shifted: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
        net.set_flat_params(&shifted);
        assert_eq!(net.flat_params(), shifted);
    }

    fn toy_classification() -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((200, 3), |_| rng.random_range(-1.0..1.0));
        let y = x.rows().into_iter().map(|r| f64::from(u8::from(r[0] + 0.5 * r[1] > 0.0))).collect();
        (x, y)
    }

    #[test]
    fn learns_and_is_reproducible() {
        let (x, y) = toy_classification();
        let spec = ModelSpec::layered_net(
            LayeredNetSpec {
                layers: vec![
                    LayerSpec { units: 8, activation: Activation::Relu, batch_norm: true },
                    LayerSpec { units: 1, activation: Activation::Sigmoid, batch_norm: false },
                ],
                output: OutputKind::Sigmoid,
                learning_rate: 0.01,
            },
            11,
        );
        let params = TrainParams { epochs: 40, batch_size: 16, ..TrainParams::default() };
        let a = fit_model(&spec, x.view(), y.view(), Some(&params)).unwrap();
        let b = fit_model(&spec, x.view(), y.view(), Some(&params)).unwrap();
        assert_eq!(a, b);
        let p = predict(&a, x.view()).unwrap();
        let acc = p.iter().zip(y.iter()).filter(|(p, t)| f64::from(u8::from(**p >= 0.5)) == **t).count();
        assert!(acc as f64 / 200.0 > 0.85, "accuracy {acc}/200");
        assert!(a.meta.best_epoch.is_some());
    }

    #[test]
    fn early_stopping_halts() {
        let (x, y) = toy_classification();
        let spec = ModelSpec::layered_net(LayeredNetSpec { learning_rate: 0.05, ..LayeredNetSpec::default() }, 2);
        let params = TrainParams { epochs: 500, patience: 2, ..TrainParams::default() };
        let m = fit_model(&spec, x.view(), y.view(), Some(&params)).unwrap();
        assert!(m.meta.iterations < 500);
        assert!(m.meta.iterations >= m.meta.best_epoch.unwrap() + 2);
    }

    #[test]
    fn batch_larger_than_training_rows() {
        let (x, y) = toy_classification();
        let spec = ModelSpec::layered_net(LayeredNetSpec::default(), 0);
        let params = TrainParams { batch_size: 190, ..TrainParams::default() };
        assert!(matches!(
            fit_model(&spec, x.view(), y.view(), Some(&params)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64 * 1e200);
        let y = Array1::from_shape_fn(40, |i| i as f64 * 1e200);
        let spec = ModelSpec::layered_net(
            LayeredNetSpec {
                layers: vec![LayerSpec { units: 1, activation: Activation::Linear, batch_norm: false }],
                output: OutputKind::Linear,
                learning_rate: 1.0,
            },
            0,
        );
        let params = TrainParams { epochs: 5, batch_size: 8, validation_split: 0.0, ..TrainParams::default() };
        assert!(matches!(
            fit_model(&spec, x.view(), y.view(), Some(&params)),
            Err(Error::NonFiniteLoss { epoch: 1 })
        ));
    }
}
