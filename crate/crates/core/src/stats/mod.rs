//! Human-study statistics: one-sample t-tests against chance, one-way
//! ANOVA, Tukey–Kramer HSD, and per-condition summary rows.

mod tukey;

pub use tukey::{tukey_hsd, TukeyPair, TukeyResult, DEFAULT_TUKEY_DRAWS};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{f_sf, student_t_sf_two_sided};

/// Significance thresholds reported in [`TestResult::significant_at`].
pub const THRESHOLDS: [f64; 3] = [0.05, 0.01, 0.001];
pub const CHANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleSet {
    /// At least two finite values.
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if values.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "sample `{label}` needs n ≥ 2, has {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "sample `{label}` has a non-finite value"
            )));
        }
        Ok(Self { label, values })
    }

    /// Per-participant accuracies; every value must lie in `[0, 1]`.
    pub fn accuracies(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let s = Self::new(label, values)?;
        if s.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!(
                "sample `{}` has an accuracy outside [0, 1]",
                s.label
            )));
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    /// Sample standard deviation (n − 1 denominator).
    pub fn sd(&self) -> f64 {
        let m = self.mean();
        (self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (self.n() - 1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Df {
    One(f64),
    Two(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: Df,
    pub p_value: f64,
    pub significant_at: Vec<f64>,
}

impl TestResult {
    fn new(statistic: f64, df: Df, p_value: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        let significant_at = THRESHOLDS.into_iter().filter(|&a| p_value < a).collect();
        Self {
            statistic,
            df,
            p_value,
            significant_at,
        }
    }
}

/// Two-sided one-sample t-test of `sample` against `mu0`.
pub fn one_sample_t(sample: &SampleSet, mu0: f64) -> Result<TestResult> {
    one_sample_t_from_summary(sample.mean(), sample.sd(), sample.n(), mu0)
}

/// The same test from a published (mean, sd, n) summary.
pub fn one_sample_t_from_summary(mean: f64, sd: f64, n: usize, mu0: f64) -> Result<TestResult> {
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs n ≥ 2, got {n}"
        )));
    }
    if !(sd > 0.0 && sd.is_finite()) || !mean.is_finite() || !mu0.is_finite() {
        return Err(Error::Domain(format!(
            "t-test needs a finite mean and positive sd, got sd = {sd}"
        )));
    }
    let t = (mean - mu0) / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    Ok(TestResult::new(
        t,
        Df::One(df),
        student_t_sf_two_sided(t, df)?,
    ))
}

fn check_groups(groups: &[SampleSet]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need ≥2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(g) = groups.iter().find(|g| g.n() < 2) {
        return Err(Error::InsufficientData(format!(
            "group `{}` needs n ≥ 2",
            g.label
        )));
    }
    Ok(())
}

/// Pooled within-group mean square and its degrees of freedom.
pub(crate) fn within_mean_square(groups: &[SampleSet]) -> (f64, f64) {
    let ssw: f64 = groups
        .iter()
        .map(|g| {
            let m = g.mean();
            g.values.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum();
    let n: usize = groups.iter().map(SampleSet::n).sum();
    let df = (n - groups.len()) as f64;
    (ssw / df, df)
}

/// One-way ANOVA. With zero within-group variance, F is 0 when the group
/// means agree and infinite otherwise.
pub fn anova_oneway(groups: &[SampleSet]) -> Result<TestResult> {
    check_groups(groups)?;
    let n: usize = groups.iter().map(SampleSet::n).sum();
    let grand = groups.iter().flat_map(|g| g.values.iter()).sum::<f64>() / n as f64;
    let ssb: f64 = groups
        .iter()
        .map(|g| g.n() as f64 * (g.mean() - grand).powi(2))
        .sum();
    let df1 = (groups.len() - 1) as f64;
    let (msw, df2) = within_mean_square(groups);
    let msb = ssb / df1;
    let scale = groups
        .iter()
        .flat_map(|g| g.values.iter())
        .map(|v| v.abs())
        .fold(1.0, f64::max);
    let negligible = |x: f64| x <= 1e-24 * scale * scale;
    let (f, p) = match (negligible(msb), negligible(msw)) {
        (true, _) => (0.0, 1.0),
        (false, true) => (f64::INFINITY, 0.0),
        (false, false) => {
            let f = msb / msw;
            (f, f_sf(f, df1, df2)?)
        }
    };
    Ok(TestResult::new(f, Df::Two(df1, df2), p))
}

/// Scored (non-control) outcomes of one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantOutcomes {
    pub participant: String,
    pub correct: Vec<bool>,
}

/// Summary row of one experimental condition: participant-level mean and
/// sd of accuracy with a one-sample t-test against chance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub mean: f64,
    /// `None` for a single participant.
    pub sd: Option<f64>,
    pub t: Option<f64>,
    pub n: usize,
    pub p_value: Option<f64>,
}

pub fn participant_accuracies(participants: &[ParticipantOutcomes]) -> Vec<f64> {
    participants
        .iter()
        .filter(|p| !p.correct.is_empty())
        .map(|p| p.correct.iter().filter(|&&c| c).count() as f64 / p.correct.len() as f64)
        .collect()
}

pub fn summarize_experiment(
    label: &str,
    participants: &[ParticipantOutcomes],
) -> Result<SummaryRow> {
    summarize_accuracies(label, &participant_accuracies(participants))
}

/// Summary of ready-made accuracies. Zero spread yields `t = ±∞, p = 0`
/// off chance and `t = 0, p = 1` at chance.
pub fn summarize_accuracies(label: &str, accuracies: &[f64]) -> Result<SummaryRow> {
    let n = accuracies.len();
    if n == 0 {
        return Err(Error::InsufficientData(format!(
            "`{label}`: no eligible participants"
        )));
    }
    let mean = accuracies.iter().sum::<f64>() / n as f64;
    let mut row = SummaryRow {
        label: label.to_string(),
        mean,
        sd: None,
        t: None,
        n,
        p_value: None,
    };
    if n < 2 {
        return Ok(row);
    }
    let sample = SampleSet::new(label, accuracies.to_vec())?;
    let sd = sample.sd();
    row.sd = Some(sd);
    if sd > 0.0 {
        let r = one_sample_t(&sample, CHANCE)?;
        row.t = Some(r.statistic);
        row.p_value = Some(r.p_value);
    } else if mean == CHANCE {
        row.t = Some(0.0);
        row.p_value = Some(1.0);
    } else {
        row.t = Some(f64::INFINITY.copysign(mean - CHANCE));
        row.p_value = Some(0.0);
    }
    Ok(row)
}

impl fmt::Display for SummaryRow {
    /// `label  mean%  sd%  t (n)  p`, mirroring the published table layout.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.1}%", 100.0 * v));
        let t = self.t.map_or("-".to_string(), |t| format!("{t:.2}"));
        let p = match self.p_value {
            None => "-".to_string(),
            Some(p) if p < 0.001 => "p < 0.001".to_string(),
            Some(p) => format!("p = {p:.3}"),
        };
        write!(
            f,
            "{}\t{}\t{}\t{} ({})\t{}",
            self.label,
            pct(Some(self.mean)),
            pct(self.sd),
            t,
            self.n,
            p
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_rows() {
        for (mean, sd, n, t) in [
            (0.714, 0.136, 70, 13.17),
            (0.650, 0.130, 70, 9.65),
            (0.584, 0.138, 73, 5.20),
            (0.552, 0.122, 75, 3.69),
        ] {
            let r = one_sample_t_from_summary(mean, sd, n, 0.5).unwrap();
            assert!((r.statistic - t).abs() <= 0.02, "{} vs {t}", r.statistic);
            assert!(r.p_value < 0.001);
            assert_eq!(r.significant_at, THRESHOLDS.to_vec());
        }
    }

    #[test]
    fn mean_at_mu0_gives_t_zero() {
        let s = SampleSet::new("x", vec![0.4, 0.6, 0.5, 0.3, 0.7]).unwrap();
        let r = one_sample_t(&s, 0.5).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!(r.significant_at.is_empty());
    }

    #[test]
    fn zero_variance_errors() {
        let s = SampleSet::new("x", vec![0.7; 5]).unwrap();
        assert!(one_sample_t(&s, 0.5).is_err());
    }

    #[test]
    fn sample_set_validation() {
        assert!(SampleSet::new("x", vec![1.0]).is_err());
        assert!(SampleSet::new("x", vec![1.0, f64::NAN]).is_err());
        assert!(SampleSet::accuracies("x", vec![0.5, 1.2]).is_err());
        assert!(SampleSet::accuracies("x", vec![0.5, 1.0]).is_ok());
    }

    #[test]
    fn anova_equal_means_gives_zero() {
        let g = |l: &str| SampleSet::new(l, vec![0.4, 0.6, 0.5]).unwrap();
        let r = anova_oneway(&[g("a"), g("b"), g("c")]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.df, Df::Two(2.0, 6.0));
        let flat = |l: &str| SampleSet::new(l, vec![0.5; 4]).unwrap();
        assert_eq!(
            anova_oneway(&[flat("a"), flat("b")]).unwrap().statistic,
            0.0
        );
    }

    #[test]
    fn anova_degenerate_groups_error() {
        let g = SampleSet::new("a", vec![0.4, 0.6]).unwrap();
        assert!(anova_oneway(std::slice::from_ref(&g)).is_err());
        let tiny = SampleSet {
            label: "b".into(),
            values: vec![0.5],
        };
        assert!(anova_oneway(&[g, tiny]).is_err());
    }

    #[test]
    fn summary_examples() {
        let p = |id: &str, c: &[bool]| ParticipantOutcomes {
            participant: id.into(),
            correct: c.to_vec(),
        };
        let one = summarize_experiment("e", &[p("a", &[true; 16])]).unwrap();
        assert_eq!((one.mean, one.n, one.t), (1.0, 1, None));

        let two = summarize_experiment(
            "e",
            &[
                p("a", &[true, true, true, false]),
                p("b", &[true, false, false, false]),
            ],
        )
        .unwrap();
        assert_eq!(two.mean, 0.5);
        assert_eq!(two.t, Some(0.0));

        assert!(summarize_experiment("e", &[p("a", &[])]).is_err());
        let flat = summarize_accuracies("e", &[0.75, 0.75]).unwrap();
        assert_eq!((flat.t, flat.p_value), (Some(f64::INFINITY), Some(0.0)));
    }

    #[test]
    fn summary_row_display() {
        let row = SummaryRow {
            label: "G".into(),
            mean: 0.714,
            sd: Some(0.136),
            t: Some(13.166),
            n: 70,
            p_value: Some(1e-9),
        };
        assert_eq!(row.to_string(), "G\t71.4%\t13.6%\t13.17 (70)\tp < 0.001");
    }
}
