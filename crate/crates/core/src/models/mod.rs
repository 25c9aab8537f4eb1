//! Fit/predict contract shared by every model, and the four built-in model
//! families. All randomness comes from the spec's seed, so a fit is
//! bitwise-reproducible for fixed inputs.

mod forest;
mod linear;
mod logistic;
pub mod net;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};

pub use forest::{Forest, ForestParams, Tree};
pub use linear::{Linear, LinearParams};
pub use logistic::{Logistic, LogisticParams};
pub use net::{Activation, LayerSpec, LayeredNetSpec, Network, OutputKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Logistic(LogisticParams),
    Forest(ForestParams),
    LayeredNet(LayeredNetSpec),
    Linear(LinearParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Result<Self> {
        let spec = Self { kind, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn logistic() -> Self {
        Self {
            kind: ModelKind::Logistic(LogisticParams::default()),
            seed: 0,
        }
    }

    pub fn forest(n_trees: usize, seed: u64) -> Self {
        Self {
            kind: ModelKind::Forest(ForestParams {
                n_trees,
                ..ForestParams::default()
            }),
            seed,
        }
    }

    pub fn linear() -> Self {
        Self {
            kind: ModelKind::Linear(LinearParams::default()),
            seed: 0,
        }
    }

    pub fn layered_net(spec: LayeredNetSpec, seed: u64) -> Self {
        Self {
            kind: ModelKind::LayeredNet(spec),
            seed,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ModelKind::Logistic(_) => "logistic",
            ModelKind::Forest(_) => "forest",
            ModelKind::LayeredNet(_) => "layered_net",
            ModelKind::Linear(_) => "linear",
        }
    }

    /// Task the model's output is suited to.
    pub fn task(&self) -> Task {
        match &self.kind {
            ModelKind::Logistic(_) | ModelKind::Forest(_) => Task::Classification,
            ModelKind::Linear(_) => Task::Regression,
            ModelKind::LayeredNet(n) => match n.output {
                OutputKind::Sigmoid => Task::Classification,
                OutputKind::Linear => Task::Regression,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ModelKind::Logistic(p) => p.validate(),
            ModelKind::Forest(p) => p.validate(),
            ModelKind::LayeredNet(n) => n.validate(),
            ModelKind::Linear(p) => p.validate(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            kind: self.kind.clone(),
            seed,
        }
    }
}

/// Mini-batch training controls for layered networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of rows (taken from the end) held out to monitor validation loss.
    pub validation_split: f64,
    /// Epochs without improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub restore_best: bool,
    pub verbose: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 100,
            validation_split: 0.2,
            patience: 3,
            restore_best: true,
            verbose: false,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_split) {
            return Err(Error::InvalidParameter(format!(
                "validation_split must lie in [0, 1), got {}",
                self.validation_split
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Iterations for gradient-descent fits, epochs for networks.
    pub iterations: usize,
    pub final_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Logistic(Logistic),
    Forest(Forest),
    LayeredNet(Network),
    Linear(Linear),
}

/// Immutable result of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub model: Fitted,
    pub meta: TrainingMeta,
}

impl FittedModel {
    pub fn new(model: Fitted) -> Self {
        Self {
            model,
            meta: TrainingMeta::default(),
        }
    }

    pub fn n_features(&self) -> usize {
        match &self.model {
            Fitted::Logistic(m) => m.weights.len(),
            Fitted::Forest(m) => m.n_features,
            Fitted::LayeredNet(m) => m.n_inputs(),
            Fitted::Linear(m) => m.coefficients.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.model {
            Fitted::Logistic(_) => "logistic",
            Fitted::Forest(_) => "forest",
            Fitted::LayeredNet(_) => "layered_net",
            Fitted::Linear(_) => "linear",
        }
    }
}

fn check_xy(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows in X but {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyDataset);
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn check_binary_target(y: ArrayView1<f64>) -> Result<()> {
    match y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        Some(&v) => Err(Error::NonBinaryValue(v)),
        None => Ok(()),
    }
}

/// Fits a model. `params` is required for layered networks and ignored by
/// the other kinds.
pub fn fit(
    spec: &ModelSpec,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    params: Option<&TrainParams>,
) -> Result<FittedModel> {
    spec.validate()?;
    check_xy(x, y)?;
    if spec.task() == Task::Classification {
        check_binary_target(y)?;
    }
    match &spec.kind {
        ModelKind::Logistic(p) => logistic::fit(p, x, y),
        ModelKind::Forest(p) => forest::fit(p, x, y, spec.seed),
        ModelKind::Linear(p) => linear::fit(p, x, y),
        ModelKind::LayeredNet(n) => {
            let params = params.ok_or_else(|| {
                Error::InvalidParameter("layered_net models require training parameters".into())
            })?;
            params.validate()?;
            net::fit(n, params, x, y, spec.seed)
        }
    }
}

/// Raw outputs: probabilities for classifiers, real values for regressors.
pub fn predict(m: &FittedModel, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    let expected = m.n_features();
    if x.ncols() != expected {
        return Err(Error::WidthMismatch {
            expected,
            actual: x.ncols(),
        });
    }
    Ok(match &m.model {
        Fitted::Logistic(l) => l.predict(x),
        Fitted::Forest(f) => f.predict(x),
        Fitted::LayeredNet(n) => n.predict(x),
        Fitted::Linear(l) => l.predict(x),
    })
}

/// `1` where the probability reaches `tau`, else `0`.
pub fn apply_threshold(probs: &[f64], tau: f64) -> Result<Vec<f64>> {
    probs
        .iter()
        .map(|&p| {
            if (0.0..=1.0).contains(&p) {
                Ok(if p >= tau { 1.0 } else { 0.0 })
            } else {
                Err(Error::ProbabilityOutOfRange(p))
            }
        })
        .collect()
}
