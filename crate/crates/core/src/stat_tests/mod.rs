//! Within-model significance tests: McNemar (exact binomial or chi-squared)
//! for paired binary predictions, and a two-sample t-test that picks
//! Student's or Welch's form from a median-centred Levene test.

pub mod distributions;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agreeability::{agreement_table, AgreementTable};
use crate::data::Task;
use crate::error::{Error, Result};

use distributions::{binomial_half_cdf, chi_squared_sf, f_sf, student_t_two_sided};

/// Significance level used to route between Student's and Welch's t-test.
pub const LEVENE_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TVariant {
    Student,
    Welch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    /// Chi-squared, F or t value; absent for the exact binomial test.
    pub statistic: Option<f64>,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_chosen: Option<TVariant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McNemarVariant {
    Binomial,
    ChiSquare { continuity_correction: bool },
}

/// Test selectable for n-best comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    McnemarBinomial,
    McnemarChisquare,
    TTest,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::McnemarBinomial => "mcnemar_binomial",
            TestKind::McnemarChisquare => "mcnemar_chisquare",
            TestKind::TTest => "t_test",
        }
    }

    pub fn task(self) -> Task {
        match self {
            TestKind::TTest => Task::Regression,
            _ => Task::Classification,
        }
    }

    /// Runs the test on two prediction vectors from the same model.
    pub fn run(self, a: &[f64], b: &[f64]) -> Result<TestResult> {
        match self {
            TestKind::McnemarBinomial => mcnemar_test(&mcnemar_table(a, b)?, McNemarVariant::Binomial),
            TestKind::McnemarChisquare => mcnemar_test(
                &mcnemar_table(a, b)?,
                McNemarVariant::ChiSquare {
                    continuity_correction: true,
                },
            ),
            TestKind::TTest => two_sample_t(a, b, LEVENE_ALPHA),
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcnemar_binomial" => Ok(TestKind::McnemarBinomial),
            "mcnemar_chisquare" => Ok(TestKind::McnemarChisquare),
            "t_test" => Ok(TestKind::TTest),
            other => Err(Error::InvalidParameter(format!(
                "unknown test `{other}`; valid options: \"mcnemar_binomial\", \"mcnemar_chisquare\", \"t_test\""
            ))),
        }
    }
}

/// Contingency table of two paired binary prediction vectors.
pub fn mcnemar_table(pred_a: &[f64], pred_b: &[f64]) -> Result<AgreementTable> {
    agreement_table(pred_a, pred_b)
}

/// McNemar's test of marginal homogeneity on the discordant cells `b`, `c`.
///
/// The chi-squared form uses `(|b - c| - 1)^2 / (b + c)` with continuity
/// correction, `(b - c)^2 / (b + c)` without, against chi-squared(1). The
/// binomial form is exact and two-sided: `min(1, 2 P(X <= min(b, c)))` for
/// `X ~ Binomial(b + c, 1/2)`.
pub fn mcnemar_test(t: &AgreementTable, variant: McNemarVariant) -> Result<TestResult> {
    let discordant = t.b + t.c;
    if discordant == 0 {
        return Err(Error::NoDiscordantPairs);
    }
    match variant {
        McNemarVariant::Binomial => {
            let p = (2.0 * binomial_half_cdf(t.b.min(t.c), discordant)).min(1.0);
            Ok(TestResult {
                test_name: TestKind::McnemarBinomial.name().into(),
                statistic: None,
                p_value: p,
                df: None,
                variant_chosen: None,
            })
        }
        McNemarVariant::ChiSquare {
            continuity_correction,
        } => {
            let diff = t.b.abs_diff(t.c) as f64;
            let diff = if continuity_correction {
                (diff - 1.0).max(0.0)
            } else {
                diff
            };
            let stat = diff * diff / discordant as f64;
            Ok(TestResult {
                test_name: TestKind::McnemarChisquare.name().into(),
                statistic: Some(stat),
                p_value: chi_squared_sf(stat, 1.0).clamp(0.0, 1.0),
                df: Some(1.0),
                variant_chosen: None,
            })
        }
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 0 {
        (s[m - 1] + s[m]) / 2.0
    } else {
        s[m]
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(Error::SampleTooSmall { needed: 2, got: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(())
}

/// Brown-Forsythe variant of Levene's test: one-way ANOVA on absolute
/// deviations from each group's median, p from F(1, n_x + n_y - 2).
pub fn levene_test(x: &[f64], y: &[f64]) -> Result<TestResult> {
    check_samples(x, y)?;
    let dev = |s: &[f64]| {
        let m = median(s);
        s.iter().map(|v| (v - m).abs()).collect::<Vec<_>>()
    };
    let (zx, zy) = (dev(x), dev(y));
    if zx.iter().chain(&zy).all(|v| *v == 0.0) {
        return Err(Error::DegenerateSample(
            "all absolute deviations from the median are zero".into(),
        ));
    }
    let n_total = (zx.len() + zy.len()) as f64;
    let (mx, my) = (mean(&zx), mean(&zy));
    let grand = (zx.iter().sum::<f64>() + zy.iter().sum::<f64>()) / n_total;
    let between = zx.len() as f64 * (mx - grand).powi(2) + zy.len() as f64 * (my - grand).powi(2);
    let within = zx.iter().map(|z| (z - mx).powi(2)).sum::<f64>()
        + zy.iter().map(|z| (z - my).powi(2)).sum::<f64>();
    let df2 = n_total - 2.0;
    let stat = if within == 0.0 {
        if between == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        df2 * between / within
    };
    Ok(TestResult {
        test_name: "levene".into(),
        statistic: Some(stat),
        p_value: f_sf(stat, 1.0, df2).clamp(0.0, 1.0),
        df: Some(df2),
        variant_chosen: None,
    })
}

/// Independent two-sample t-test. Levene's test (p >= `alpha`) selects the
/// pooled-variance Student form, otherwise Welch's form with
/// Welch-Satterthwaite degrees of freedom. If both samples are constant the
/// variances are trivially equal and the Student branch is taken.
pub fn two_sample_t(x: &[f64], y: &[f64], alpha: f64) -> Result<TestResult> {
    check_samples(x, y)?;
    let variant = match levene_test(x, y) {
        Ok(l) if l.p_value < alpha => TVariant::Welch,
        Ok(_) | Err(Error::DegenerateSample(_)) => TVariant::Student,
        Err(e) => return Err(e),
    };
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mx, my) = (mean(x), mean(y));
    let (vx, vy) = (sample_var(x), sample_var(y));
    let (se, df) = match variant {
        TVariant::Student => {
            let df = nx + ny - 2.0;
            let pooled = ((nx - 1.0) * vx + (ny - 1.0) * vy) / df;
            ((pooled * (1.0 / nx + 1.0 / ny)).sqrt(), df)
        }
        TVariant::Welch => {
            let (ax, ay) = (vx / nx, vy / ny);
            let df = (ax + ay).powi(2) / (ax * ax / (nx - 1.0) + ay * ay / (ny - 1.0));
            ((ax + ay).sqrt(), df)
        }
    };
    let diff = mx - my;
    let t = if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            return Err(Error::DegenerateSample(
                "zero variance in both samples with unequal means".into(),
            ));
        }
    } else {
        diff / se
    };
    Ok(TestResult {
        test_name: TestKind::TTest.name().into(),
        statistic: Some(t),
        p_value: student_t_two_sided(t, df).clamp(0.0, 1.0),
        df: Some(df),
        variant_chosen: Some(variant),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    include!("../../tests/fixtures/variance_samples.rs");

    fn chi(b: u64, c: u64, correction: bool) -> TestResult {
        mcnemar_test(
            &AgreementTable::new(0, b, c, 0),
            McNemarVariant::ChiSquare {
                continuity_correction: correction,
            },
        )
        .unwrap()
    }

    fn binom(b: u64, c: u64) -> f64 {
        mcnemar_test(&AgreementTable::new(0, b, c, 0), McNemarVariant::Binomial)
            .unwrap()
            .p_value
    }

    #[test]
    fn mcnemar_statistics() {
        assert!((chi(5, 15, false).statistic.unwrap() - 5.0).abs() < 1e-12);
        assert!((chi(5, 15, true).statistic.unwrap() - 4.05).abs() < 1e-12);
        // 2 * (C(10,0) + C(10,1) + C(10,2)) / 2^10
        assert!((binom(2, 8) - 0.109375).abs() < 1e-12);
        assert_eq!(binom(5, 5), 1.0);
        assert!(binom(2, 8) > 0.0 && chi(5, 15, true).p_value < 0.05);
    }

    #[test]
    fn mcnemar_table_from_vectors() {
        let v = [1.0, 0.0, 0.0, 1.0];
        let t = mcnemar_table(&v, &v).unwrap();
        assert_eq!((t.b, t.c), (0, 0));
        assert!(matches!(
            mcnemar_test(&t, McNemarVariant::Binomial),
            Err(Error::NoDiscordantPairs)
        ));
    }

    #[test]
    fn levene_identical_patterns() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let y = [8.0, 5.0, 1.0, 2.0, 4.0];
        let r = levene_test(&x, &y).unwrap();
        assert_eq!(r.statistic, Some(0.0));
        assert_eq!(r.p_value, 1.0);
        assert!(levene_test(&[1.0], &x).is_err());
        assert!(matches!(
            levene_test(&[2.0, 2.0], &[3.0, 3.0]),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn levene_against_reference() {
        let r = levene_test(&SPREAD_1, &SPREAD_4).unwrap();
        assert!((r.statistic.unwrap() - LEVENE_SPREAD.0).abs() < 1e-9 * LEVENE_SPREAD.0);
        assert!((r.p_value - LEVENE_SPREAD.1).abs() < 1e-6 * LEVENE_SPREAD.1);
        assert!(r.p_value < 0.05);
        let r = levene_test(&EQUAL_A, &EQUAL_B).unwrap();
        assert!((r.statistic.unwrap() - LEVENE_EQUAL.0).abs() < 1e-9);
        assert!((r.p_value - LEVENE_EQUAL.1).abs() < 1e-9);
        assert!(r.p_value > 0.05);
    }

    #[test]
    fn t_test_routing_against_reference() {
        let r = two_sample_t(&SPREAD_1, &SPREAD_4, LEVENE_ALPHA).unwrap();
        assert_eq!(r.variant_chosen, Some(TVariant::Welch));
        assert!((r.statistic.unwrap() - WELCH_SPREAD.0).abs() < 1e-9);
        assert!((r.p_value - WELCH_SPREAD.1).abs() < 1e-9);
        assert!((r.df.unwrap() - WELCH_SPREAD.2).abs() < 1e-9);

        let r = two_sample_t(&EQUAL_A, &EQUAL_B, LEVENE_ALPHA).unwrap();
        assert_eq!(r.variant_chosen, Some(TVariant::Student));
        assert!((r.statistic.unwrap() - STUDENT_EQUAL.0).abs() < 1e-9);
        assert!((r.p_value - STUDENT_EQUAL.1).abs() < 1e-9);
    }

    #[test]
    fn t_test_edge_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = two_sample_t(&x, &x, LEVENE_ALPHA).unwrap();
        assert_eq!((r.statistic, r.p_value), (Some(0.0), 1.0));
        assert_eq!(r.variant_chosen, Some(TVariant::Student));

        // pooled t closed form: diff -10, pooled var 5/3, se sqrt(5/3 * 1/2)
        let y: Vec<f64> = x.iter().map(|v| v + 10.0).collect();
        let r = two_sample_t(&x, &y, LEVENE_ALPHA).unwrap();
        let expected = -10.0 / (5.0f64 / 3.0 * 0.5).sqrt();
        assert!((r.statistic.unwrap() - expected).abs() < 1e-12);
        assert!(r.p_value < 0.01);

        assert!(two_sample_t(&[1.0, 1.0], &[1.0, 1.0], 0.05).unwrap().p_value == 1.0);
        assert!(matches!(
            two_sample_t(&[1.0, 1.0], &[2.0, 2.0], 0.05),
            Err(Error::DegenerateSample(_))
        ));
    }

    proptest! {
        #[test]
        fn mcnemar_symmetric(b in 0u64..60, c in 0u64..60) {
            prop_assume!(b + c > 0);
            let t = AgreementTable::new(3, b, c, 4);
            for v in [McNemarVariant::Binomial, McNemarVariant::ChiSquare { continuity_correction: true }] {
                let p1 = mcnemar_test(&t, v).unwrap().p_value;
                let p2 = mcnemar_test(&t.transposed(), v).unwrap().p_value;
                prop_assert_eq!(p1, p2);
            }
        }

        #[test]
        fn binomial_monotone_in_imbalance(total in 1u64..80) {
            let mut last = f64::INFINITY;
            // |b - c| grows as b shrinks from total/2 to 0
            for b in (0..=total / 2).rev() {
                let p = binom(b, total - b);
                prop_assert!(p <= last + 1e-15);
                last = p;
            }
        }

        #[test]
        fn chi_and_binomial_agree_for_large_tables(b in 0u64..200, c in 0u64..200) {
            prop_assume!(b + c >= 40);
            let pc = chi(b, c, true).p_value;
            prop_assert!((pc - binom(b, c)).abs() < 0.02, "b={} c={} chi={} binom={}", b, c, pc, binom(b, c));
        }

        #[test]
        fn t_antisymmetric(
            x in prop::collection::vec(-50.0f64..50.0, 3..20),
            y in prop::collection::vec(-50.0f64..50.0, 3..20),
        ) {
            if let (Ok(a), Ok(b)) = (two_sample_t(&x, &y, 0.05), two_sample_t(&y, &x, 0.05)) {
                prop_assert!((a.statistic.unwrap() + b.statistic.unwrap()).abs() < 1e-9);
                prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
            }
        }
    }
}
