use serde::{Deserialize, Serialize};

use super::{check_groups, within_mean_square, SampleSet};
use crate::error::{Error, Result};
use crate::numerics::Rng;

pub const DEFAULT_TUKEY_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub a: usize,
    pub b: usize,
    pub mean_diff: f64,
    /// Studentized range statistic.
    pub q: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub labels: Vec<String>,
    pub alpha: f64,
    pub draws: usize,
    pub seed: u64,
    pub pairs: Vec<TukeyPair>,
}

impl TukeyResult {
    /// Symmetric `k × k` significance matrix with a false diagonal.
    pub fn matrix(&self) -> Vec<Vec<bool>> {
        let k = self.labels.len();
        let mut m = vec![vec![false; k]; k];
        for p in &self.pairs {
            m[p.a][p.b] = p.significant;
            m[p.b][p.a] = p.significant;
        }
        m
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<&TukeyPair> {
        let (a, b) = (a.min(b), a.max(b));
        self.pairs.iter().find(|p| p.a == a && p.b == b)
    }
}

/// Sorted Monte Carlo draws of the studentized range `Q(k, df)`:
/// `(max Z − min Z) / sqrt(χ²_df / df)` over `k` standard normals.
fn studentized_range_draws(k: usize, df: f64, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    let mut out: Vec<f64> = (0..draws)
        .map(|_| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for _ in 0..k {
                let z = rng.normal();
                lo = lo.min(z);
                hi = hi.max(z);
            }
            (hi - lo) / (rng.chi_square(df) / df).sqrt()
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Tukey–Kramer pairwise comparisons. p-values are the fraction of one
/// shared set of seeded studentized-range draws at or above each `q`.
pub fn tukey_hsd(groups: &[SampleSet], alpha: f64, draws: usize, seed: u64) -> Result<TukeyResult> {
    check_groups(groups)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if draws == 0 {
        return Err(Error::Config("tukey_hsd needs at least one draw".into()));
    }
    let (msw, df) = within_mean_square(groups);
    let sample = studentized_range_draws(groups.len(), df, draws, seed);
    let means: Vec<f64> = groups.iter().map(SampleSet::mean).collect();
    let mut pairs = Vec::new();
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let diff = means[a] - means[b];
            let se = (msw / 2.0 * (1.0 / groups[a].n() as f64 + 1.0 / groups[b].n() as f64)).sqrt();
            let q = if diff == 0.0 { 0.0 } else { diff.abs() / se };
            let at_or_above = sample.len() - sample.partition_point(|&x| x < q);
            let p_value = at_or_above as f64 / draws as f64;
            pairs.push(TukeyPair {
                a,
                b,
                mean_diff: diff,
                q,
                p_value,
                significant: p_value < alpha,
            });
        }
    }
    Ok(TukeyResult {
        labels: groups.iter().map(|g| g.label.clone()).collect(),
        alpha,
        draws,
        seed,
        pairs,
    })
}
