//! Agreement between two raters' predictions: Cohen's kappa on binary
//! labels, Pearson's correlation on real-valued outputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};

/// 2x2 table of paired binary ratings.
///
/// `a`: both rate 1, `b`: first 1 / second 0, `c`: first 0 / second 1,
/// `d`: both rate 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl AgreementTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Swaps the roles of the two raters.
    pub fn transposed(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub p_o: f64,
    pub p_e: f64,
    pub kappa: f64,
}

fn check_binary(v: f64) -> Result<bool> {
    if v == 1.0 {
        Ok(true)
    } else if v == 0.0 {
        Ok(false)
    } else {
        Err(Error::NonBinaryValue(v))
    }
}

pub fn agreement_table(pred_a: &[f64], pred_b: &[f64]) -> Result<AgreementTable> {
    if pred_a.len() != pred_b.len() {
        return Err(Error::ShapeMismatch(format!(
            "rater vectors differ in length ({} vs {})",
            pred_a.len(),
            pred_b.len()
        )));
    }
    if pred_a.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut t = AgreementTable::new(0, 0, 0, 0);
    for (&x, &y) in pred_a.iter().zip(pred_b) {
        match (check_binary(x)?, check_binary(y)?) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    Ok(t)
}

/// Cohen's kappa from the observed (`p_o`) and chance (`p_e`) agreement.
/// When `p_e == 1` both raters used one identical label throughout, and
/// kappa is defined as 1.
pub fn cohen_kappa(t: &AgreementTable) -> Result<KappaResult> {
    let n = t.n();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = n as f64;
    let (a, b, c, d) = (t.a as f64, t.b as f64, t.c as f64, t.d as f64);
    let p_o = (a + d) / n;
    let p_e = ((a + c) * (a + b) + (b + d) * (c + d)) / (n * n);
    let kappa = if p_e >= 1.0 { 1.0 } else { (p_o - p_e) / (1.0 - p_e) };
    Ok(KappaResult { p_o, p_e, kappa })
}

/// Sample Pearson correlation. Constant inputs are an error, never NaN.
pub fn pearson_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "vectors differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantVector);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Qualitative kappa bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaBand {
    None,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl fmt::Display for KappaBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KappaBand::None => "no agreement",
            KappaBand::Slight => "slight agreement",
            KappaBand::Fair => "fair agreement",
            KappaBand::Moderate => "moderate agreement",
            KappaBand::Substantial => "substantial agreement",
            KappaBand::AlmostPerfect => "almost perfect agreement",
        })
    }
}

/// Band lookup on kappa rounded to two decimals (half away from zero), so
/// the published cut-points 0.20/0.21, 0.40/0.41, ... leave no gaps.
pub fn interpret_kappa(k: f64) -> Result<KappaBand> {
    if !k.is_finite() {
        return Err(Error::NonFinite);
    }
    let hundredths = (k * 100.0).round() as i64;
    Ok(match hundredths {
        h if h > 100 => return Err(Error::KappaOutOfRange(k)),
        h if h < 0 => KappaBand::None,
        0..=20 => KappaBand::Slight,
        21..=40 => KappaBand::Fair,
        41..=60 => KappaBand::Moderate,
        61..=80 => KappaBand::Substantial,
        _ => KappaBand::AlmostPerfect,
    })
}

/// Agreement statistic used between the two models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreeMetric {
    CohenKappa,
    Pearson,
}

impl AgreeMetric {
    pub fn name(self) -> &'static str {
        match self {
            AgreeMetric::CohenKappa => "cohen_kappa",
            AgreeMetric::Pearson => "pearson",
        }
    }

    pub fn task(self) -> Task {
        match self {
            AgreeMetric::CohenKappa => Task::Classification,
            AgreeMetric::Pearson => Task::Regression,
        }
    }

    pub fn check_task(self, task: Task) -> Result<()> {
        if self.task() == task {
            Ok(())
        } else {
            Err(Error::TaskMismatch(
                format!("agreeability `{}`", self.name()),
                task.name().into(),
            ))
        }
    }

    pub fn agreement(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            AgreeMetric::CohenKappa => Ok(cohen_kappa(&agreement_table(a, b)?)?.kappa),
            AgreeMetric::Pearson => pearson_rho(a, b),
        }
    }
}

impl fmt::Display for AgreeMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgreeMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cohen_kappa" => Ok(AgreeMetric::CohenKappa),
            "pearson" => Ok(AgreeMetric::Pearson),
            other => Err(Error::InvalidParameter(format!(
                "unknown agreeability `{other}`; valid options: \"pearson\", \"cohen_kappa\""
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Rater vectors realising the given table, rows grouped by cell.
    fn vectors(t: AgreementTable) -> (Vec<f64>, Vec<f64>) {
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        for (count, x, y) in [(t.a, 1.0, 1.0), (t.b, 1.0, 0.0), (t.c, 0.0, 1.0), (t.d, 0.0, 0.0)] {
            for _ in 0..count {
                r1.push(x);
                r2.push(y);
            }
        }
        (r1, r2)
    }

    #[test]
    fn table_construction() {
        let v = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(agreement_table(&v, &v).unwrap(), AgreementTable::new(2, 0, 0, 2));
        let w: Vec<f64> = v.iter().map(|x| 1.0 - x).collect();
        let t = agreement_table(&v, &w).unwrap();
        assert_eq!((t.a, t.d), (0, 0));

        let worked = AgreementTable::new(22, 2, 4, 11);
        let (r1, r2) = vectors(worked);
        let t = agreement_table(&r1, &r2).unwrap();
        assert_eq!(t, worked);
        assert_eq!(t.n(), 39);
    }

    #[test]
    fn table_errors() {
        assert!(matches!(agreement_table(&[1.0], &[1.0, 0.0]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(agreement_table(&[0.3], &[1.0]), Err(Error::NonBinaryValue(_))));
        assert!(agreement_table(&[], &[]).is_err());
    }

    #[test]
    fn worked_kappa() {
        let r = cohen_kappa(&AgreementTable::new(22, 2, 4, 11)).unwrap();
        assert!((r.p_o - 0.8462).abs() < 5e-5);
        assert!((r.p_e - 0.5385).abs() < 5e-5);
        assert!((r.kappa - 0.67).abs() < 0.005);
        assert_eq!(interpret_kappa(r.kappa).unwrap(), KappaBand::Substantial);
    }

    #[test]
    fn kappa_extremes() {
        assert_eq!(cohen_kappa(&AgreementTable::new(3, 0, 0, 5)).unwrap().kappa, 1.0);
        assert_eq!(cohen_kappa(&AgreementTable::new(0, 5, 5, 0)).unwrap().kappa, -1.0);
        // both raters constant and identical
        assert_eq!(cohen_kappa(&AgreementTable::new(0, 0, 0, 7)).unwrap().kappa, 1.0);
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson_rho(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_rho(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        // direct formula: sxy = 4.5 / sqrt(2 * 4.6667)
        let r = pearson_rho(&x, &[2.0, 4.0, 5.0]).unwrap();
        assert!((r - 0.9820).abs() < 1e-4);
        assert!(matches!(pearson_rho(&x, &[1.0, 1.0, 1.0]), Err(Error::ConstantVector)));
        assert!(pearson_rho(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn bands() {
        assert_eq!(interpret_kappa(-0.1).unwrap(), KappaBand::None);
        assert_eq!(interpret_kappa(0.205).unwrap(), KappaBand::Fair);
        assert_eq!(interpret_kappa(0.0).unwrap(), KappaBand::Slight);
        assert_eq!(interpret_kappa(1.0).unwrap(), KappaBand::AlmostPerfect);
        assert!(interpret_kappa(1.2).is_err());
        assert!(interpret_kappa(f64::NAN).is_err());
    }

    fn table() -> impl Strategy<Value = AgreementTable> {
        (0u64..50, 0u64..50, 0u64..50, 0u64..50)
            .prop_filter("non-empty", |(a, b, c, d)| a + b + c + d > 0)
            .prop_map(|(a, b, c, d)| AgreementTable::new(a, b, c, d))
    }

    proptest! {
        #[test]
        fn kappa_symmetric_and_bounded(t in table()) {
            let k = cohen_kappa(&t).unwrap().kappa;
            let kt = cohen_kappa(&t.transposed()).unwrap().kappa;
            prop_assert!((k - kt).abs() < 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
            let r = cohen_kappa(&t).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.p_o) && (0.0..=1.0).contains(&r.p_e));
        }

        #[test]
        fn kappa_one_iff_no_disagreement(t in table()) {
            let k = cohen_kappa(&t).unwrap().kappa;
            prop_assert_eq!(k == 1.0, t.b == 0 && t.c == 0);
        }

        #[test]
        fn self_agreement(v in prop::collection::vec(0u8..2, 1..80)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            prop_assert_eq!(AgreeMetric::CohenKappa.agreement(&v, &v).unwrap(), 1.0);
        }

        #[test]
        fn pearson_affine_invariant(
            xy in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            alpha in 0.01f64..50.0,
            beta in -100.0f64..100.0,
        ) {
            let x: Vec<f64> = xy.iter().map(|p| p.0).collect();
            let y: Vec<f64> = xy.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson_rho(&x, &y) {
                let xs: Vec<f64> = x.iter().map(|v| alpha * v + beta).collect();
                let rs = pearson_rho(&xs, &y).unwrap();
                prop_assert!((r - rs).abs() < 1e-9);
            }
        }
    }
}
