use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{Fitted, FittedModel, TrainingMeta};
use crate::error::{Error, Result};

/// Ordinary least squares with an intercept, solved from the normal
/// equations. A small ridge term is added only when the Gram matrix is not
/// positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    /// Relative size of the ridge jitter (scaled by the mean Gram diagonal).
    pub jitter: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self { jitter: 1e-10 }
    }
}

impl LinearParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter > 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidParameter("jitter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub coefficients: Array1<f64>,
    pub intercept: f64,
}

impl Linear {
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.dot(&self.coefficients) + self.intercept
    }
}

/// Cholesky solve of `a z = b`; `None` if `a` is not positive definite.
fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let d = a[(i, i)] - s;
                if !(d > 1e-12 * a[(i, i)].abs().max(1e-300)) {
                    return None;
                }
                l[(i, j)] = d.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    let mut z = Array1::<f64>::zeros(n);
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * z[k]).sum();
        z[i] = (b[i] - s) / l[(i, i)];
    }
    let mut out = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * out[k]).sum();
        out[i] = (z[i] - s) / l[(i, i)];
    }
    Some(out)
}

pub(crate) fn fit(p: &LinearParams, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<FittedModel> {
    let (n, k) = x.dim();
    // augmented design [X | 1]
    let mut design = Array2::<f64>::ones((n, k + 1));
    design.slice_mut(ndarray::s![.., ..k]).assign(&x);
    let gram = design.t().dot(&design);
    let rhs = design.t().dot(&y);
    let scale = (0..=k).map(|i| gram[(i, i)]).sum::<f64>() / (k + 1) as f64;
    let mut ridge = 0.0;
    let beta = loop {
        let mut g = gram.clone();
        for i in 0..k {
            g[(i, i)] += ridge;
        }
        if let Some(beta) = cholesky_solve(&g, &rhs) {
            break beta;
        }
        ridge = if ridge == 0.0 { p.jitter * scale.max(1.0) } else { ridge * 10.0 };
        if !ridge.is_finite() || ridge > scale.max(1.0) {
            return Err(Error::DegenerateSample("normal equations could not be solved".into()));
        }
    };
    let coefficients = beta.slice(ndarray::s![..k]).to_owned();
    let intercept = beta[k];
    let residual = &design.dot(&beta) - &y;
    Ok(FittedModel {
        model: Fitted::Linear(Linear { coefficients, intercept }),
        meta: TrainingMeta {
            iterations: 1,
            final_loss: Some(residual.dot(&residual) / n as f64),
            ..TrainingMeta::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit as fit_model, predict, ModelSpec};
    use ndarray::array;

    #[test]
    fn exact_line() {
        let x = array![[0.0], [1.0], [2.0], [3.5], [-4.0]];
        let y = x.column(0).mapv(|v| 2.0 * v + 1.0);
        let m = fit_model(&ModelSpec::linear(), x.view(), y.view(), None).unwrap();
        let Fitted::Linear(l) = &m.model else { unreachable!() };
        assert!((l.coefficients[0] - 2.0).abs() < 1e-6);
        assert!((l.intercept - 1.0).abs() < 1e-6);
        assert!((predict(&m, array![[10.0]].view()).unwrap()[0] - 21.0).abs() < 1e-6);
    }

    #[test]
    fn duplicated_column_uses_jitter() {
        let x = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]];
        let y = array![3.0, 5.0, 7.0, 9.0];
        let m = fit_model(&ModelSpec::linear(), x.view(), y.view(), None).unwrap();
        let p = predict(&m, x.view()).unwrap();
        for (a, b) in p.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
