use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{Fitted, FittedModel, TrainingMeta};
use crate::error::{Error, Result};

/// L2-penalised logistic regression trained by full-batch gradient descent
/// from a zero start.
///
/// The objective is `sum(BCE) + (lambda / 2) * ||w||^2` (intercept not
/// penalised), minimised on internally standardised columns and divided by
/// the row count for the step size. `lambda` plays the role of an inverse
/// regularisation strength `1 / C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            learning_rate: 0.1,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter("lambda must be a finite value >= 0".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        Ok(())
    }
}

/// Coefficients in the original (unstandardised) column space.
#[derive(Debug, Clone, PartialEq)]
pub struct Logistic {
    pub weights: Array1<f64>,
    pub intercept: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    pub fn from_parameters(weights: Vec<f64>, intercept: f64) -> Self {
        Self {
            weights: Array1::from(weights),
            intercept,
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.weights).mapv(|z| sigmoid(z + self.intercept))
    }
}

/// Column means and scales; constant columns keep scale 1 so they stay put.
fn standardisation(x: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
    (mean, scale)
}

/// Mean penalised loss at the given standardised-space parameters.
fn objective(xs: &Array2<f64>, y: ArrayView1<f64>, w: &Array1<f64>, b: f64, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let z = xs.dot(w);
    let bce: f64 = z
        .iter()
        .zip(y.iter())
        .map(|(&z, &t)| {
            let z = z + b;
            // log(1 + e^z) - t z, computed stably
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - t * z
        })
        .sum();
    (bce + 0.5 * lambda * w.dot(w)) / n
}

pub(crate) fn train(
    p: &LogisticParams,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    mut on_iteration: Option<&mut dyn FnMut(f64)>,
) -> Result<FittedModel> {
    let n = y.len() as f64;
    let (mean, scale) = standardisation(x);
    let xs = (&x - &mean) / &scale;
    let xs_t = xs.t().as_standard_layout().into_owned();
    let mut w = Array1::<f64>::zeros(x.ncols());
    let mut b = 0.0;
    let mut iterations = 0;
    for it in 1..=p.max_iter {
        iterations = it;
        let residual = xs.dot(&w).mapv(|z| sigmoid(z + b)) - &y;
        let grad_w = (xs_t.dot(&residual) + &(&w * p.lambda)) / n;
        let grad_b = residual.sum() / n;
        let step_w = grad_w * p.learning_rate;
        let step_b = grad_b * p.learning_rate;
        w -= &step_w;
        b -= step_b;
        let max_step = step_w.iter().fold(step_b.abs(), |m, s| m.max(s.abs()));
        if !max_step.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: it });
        }
        if let Some(f) = on_iteration.as_mut() {
            f(objective(&xs, y, &w, b, p.lambda));
        }
        if max_step < p.tol {
            break;
        }
    }
    let final_loss = objective(&xs, y, &w, b, p.lambda);
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: iterations });
    }
    let weights = &w / &scale;
    let intercept = b - weights.dot(&mean);
    Ok(FittedModel {
        model: Fitted::Logistic(Logistic { weights, intercept }),
        meta: TrainingMeta {
            iterations,
            final_loss: Some(final_loss),
            ..TrainingMeta::default()
        },
    })
}

pub(crate) fn fit(p: &LogisticParams, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<FittedModel> {
    train(p, x, y, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{apply_threshold, fit as fit_model, predict, ModelKind, ModelSpec};
    use ndarray::{array, Array2};

    #[test]
    fn zero_parameters_give_half() {
        let m = Logistic::from_parameters(vec![0.0, 0.0], 0.0);
        let p = m.predict(array![[1.0, -3.0], [100.0, 2.0]].view());
        assert_eq!(p, array![0.5, 0.5]);
    }

    #[test]
    fn separable_1d_fits_perfectly() {
        let xs: Vec<f64> = (-20..=20).filter(|v| *v != 0).map(|v| f64::from(v) / 4.0).collect();
        let x = Array2::from_shape_vec((xs.len(), 1), xs.clone()).unwrap();
        let y = Array1::from_iter(xs.iter().map(|v| f64::from(u8::from(*v > 0.0))));
        let spec = ModelSpec {
            kind: ModelKind::Logistic(LogisticParams {
                lambda: 1e-2,
                ..LogisticParams::default()
            }),
            seed: 0,
        };
        let m = fit_model(&spec, x.view(), y.view(), None).unwrap();
        let labels = apply_threshold(predict(&m, x.view()).unwrap().as_slice().unwrap(), 0.5).unwrap();
        // closed-form sign predictor
        let sign: Vec<f64> = xs.iter().map(|v| f64::from(u8::from(*v >= 0.0))).collect();
        assert_eq!(labels, sign);
    }

    #[test]
    fn loss_non_increasing() {
        let x = array![[0.5, 1.0], [1.5, -0.5], [-1.0, 0.3], [2.0, 2.0], [-0.7, -1.2], [0.1, 0.9]];
        let y = array![1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let p = LogisticParams {
            learning_rate: 0.05,
            max_iter: 2000,
            ..LogisticParams::default()
        };
        let mut history = Vec::new();
        train(&p, x.view(), y.view(), Some(&mut |l| history.push(l))).unwrap();
        assert!(history.len() > 10);
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn zero_column_is_inert() {
        let x = array![[0.5, 0.0], [1.5, 0.0], [-1.0, 0.0], [2.0, 0.0], [-0.7, 0.0]];
        let y = array![1.0, 0.0, 0.0, 1.0, 0.0];
        let with = fit(&LogisticParams::default(), x.view(), y.view()).unwrap();
        let without = fit(&LogisticParams::default(), x.slice(ndarray::s![.., 0..1]), y.view()).unwrap();
        let (Fitted::Logistic(a), Fitted::Logistic(b)) = (&with.model, &without.model) else {
            unreachable!()
        };
        assert_eq!(a.weights[0], b.weights[0]);
        assert_eq!(a.weights[1], 0.0);
        assert_eq!(a.intercept, b.intercept);
    }
}
