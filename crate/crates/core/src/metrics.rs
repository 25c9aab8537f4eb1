//! Scoring criteria used both to evaluate fitted models and to choose which
//! feature group to eliminate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Accuracy,
    Precision,
    Recall,
    F1,
    Mse,
    Rmse,
    Mae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    ABetter,
    BBetter,
    Tie,
}

impl Criterion {
    pub const ALL: [Criterion; 7] = [
        Criterion::Mse,
        Criterion::Rmse,
        Criterion::Mae,
        Criterion::Accuracy,
        Criterion::Precision,
        Criterion::Recall,
        Criterion::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Accuracy => "accuracy",
            Criterion::Precision => "precision",
            Criterion::Recall => "recall",
            Criterion::F1 => "f1",
            Criterion::Mse => "mse",
            Criterion::Rmse => "rmse",
            Criterion::Mae => "mae",
        }
    }

    pub fn task(self) -> Task {
        match self {
            Criterion::Accuracy | Criterion::Precision | Criterion::Recall | Criterion::F1 => {
                Task::Classification
            }
            Criterion::Mse | Criterion::Rmse | Criterion::Mae => Task::Regression,
        }
    }

    pub fn direction(self) -> Direction {
        match self.task() {
            Task::Classification => Direction::Maximize,
            Task::Regression => Direction::Minimize,
        }
    }

    pub fn check_task(self, task: Task) -> Result<()> {
        if self.task() == task {
            Ok(())
        } else {
            Err(Error::TaskMismatch(
                format!("criterion `{}`", self.name()),
                task.name().into(),
            ))
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let options: Vec<_> = Criterion::ALL.iter().map(|c| format!("\"{}\"", c.name())).collect();
                Error::InvalidParameter(format!(
                    "unknown criterion `{s}`; valid options: {}",
                    options.join(", ")
                ))
            })
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
    tn: usize,
}

fn confusion(y_true: &[f64], y_pred: &[f64]) -> Result<Confusion> {
    let mut m = Confusion::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for v in [t, p] {
            if v != 0.0 && v != 1.0 {
                return Err(Error::NonBinaryValue(v));
            }
        }
        match (t == 1.0, p == 1.0) {
            (true, true) => m.tp += 1,
            (false, true) => m.fp += 1,
            (true, false) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores `y_pred` against `y_true`. Classification criteria expect 0/1
/// labels; precision, recall and F1 are 0 when their denominator is 0.
pub fn score(c: Criterion, y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::ShapeMismatch(format!(
            "y_true has {} values, y_pred has {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = y_true.len() as f64;
    let residuals = || y_true.iter().zip(y_pred).map(|(t, p)| t - p);
    let value = match c {
        Criterion::Accuracy => {
            let m = confusion(y_true, y_pred)?;
            ratio(m.tp + m.tn, y_true.len())
        }
        Criterion::Precision => {
            let m = confusion(y_true, y_pred)?;
            ratio(m.tp, m.tp + m.fp)
        }
        Criterion::Recall => {
            let m = confusion(y_true, y_pred)?;
            ratio(m.tp, m.tp + m.fn_)
        }
        Criterion::F1 => {
            let m = confusion(y_true, y_pred)?;
            ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn_)
        }
        Criterion::Mse => residuals().map(|r| r * r).sum::<f64>() / n,
        Criterion::Rmse => (residuals().map(|r| r * r).sum::<f64>() / n).sqrt(),
        Criterion::Mae => residuals().map(f64::abs).sum::<f64>() / n,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite)
    }
}

/// Direction-aware comparison; exact equality is a tie.
pub fn better(c: Criterion, a: f64, b: f64) -> Result<Comparison> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::NonFinite);
    }
    let (first, second) = match c.direction() {
        Direction::Maximize => (a, b),
        Direction::Minimize => (b, a),
    };
    Ok(if first > second {
        Comparison::ABetter
    } else if first < second {
        Comparison::BBetter
    } else {
        Comparison::Tie
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f1_cases() {
        let y = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(score(Criterion::F1, &y, &y).unwrap(), 1.0);
        // TP=1, FP=1, FN=1
        let f1 = score(Criterion::F1, &[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((f1 - 0.5).abs() < 1e-12);
        // TP=0 with errors present
        assert_eq!(score(Criterion::F1, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(score(Criterion::Precision, &[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(score(Criterion::Recall, &[0.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn regression_cases() {
        let t = [0.0, 0.0];
        let p = [3.0, 4.0];
        assert!((score(Criterion::Rmse, &t, &p).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(score(Criterion::Mse, &t, &p).unwrap(), 12.5);
        assert_eq!(score(Criterion::Mae, &t, &p).unwrap(), 3.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(score(Criterion::F1, &[1.0], &[1.0, 0.0]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(score(Criterion::Mse, &[], &[]), Err(Error::EmptyDataset)));
        assert!(matches!(score(Criterion::F1, &[0.5], &[1.0]), Err(Error::NonBinaryValue(_))));
        assert!(better(Criterion::F1, f64::NAN, 0.0).is_err());
        let err = "auc".parse::<Criterion>().unwrap_err().to_string();
        assert!(err.contains("auc") && err.contains("\"f1\""));
    }

    #[test]
    fn comparison_direction() {
        assert_eq!(better(Criterion::F1, 0.64, 0.62).unwrap(), Comparison::ABetter);
        assert_eq!(better(Criterion::Mse, 0.64, 0.62).unwrap(), Comparison::BBetter);
        assert_eq!(better(Criterion::F1, 0.5, 0.5).unwrap(), Comparison::Tie);
    }

    #[test]
    fn names_round_trip() {
        for c in Criterion::ALL {
            assert_eq!(c.name().parse::<Criterion>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.name()));
        }
    }

    proptest! {
        #[test]
        fn classification_metrics_permutation_invariant(
            pairs in prop::collection::vec((0u8..2, 0u8..2), 1..60),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let t: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let p: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let ts: Vec<f64> = shuffled.iter().map(|p| f64::from(p.0)).collect();
            let ps: Vec<f64> = shuffled.iter().map(|p| f64::from(p.1)).collect();
            for c in [Criterion::Precision, Criterion::Recall, Criterion::F1, Criterion::Accuracy] {
                let a = score(c, &t, &p).unwrap();
                prop_assert_eq!(a, score(c, &ts, &ps).unwrap());
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }

        #[test]
        fn rmse_is_root_mse(v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let t: Vec<f64> = v.iter().map(|p| p.0).collect();
            let p: Vec<f64> = v.iter().map(|p| p.1).collect();
            let mse = score(Criterion::Mse, &t, &p).unwrap();
            prop_assert_eq!(score(Criterion::Rmse, &t, &p).unwrap(), mse.sqrt());
        }
    }
}
