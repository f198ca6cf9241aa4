//! Linear one-vs-all attribute probes over learned embeddings.
//!
//! Each probe repeats an identity-level holdout split `n_trials` times,
//! trains a linear max-margin classifier (L2-regularized hinge loss,
//! full-batch subgradient descent) on a class-balanced training set, and
//! scores the class-balanced holdout by average precision, whose chance
//! level is then 50%. The trial APs give the mean
//! (mAP) and a 99% Student-t confidence interval; a result whose interval
//! touches 50 ± 5% is flagged as indistinguishable from chance.

mod attributes;
mod svm;

pub use attributes::{binarize_continuous, probe_data, AgeBucket, Attribute, BinarizeStrategy};
pub use svm::{LinearSvm, SvmParams};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::datamodel::Modality;
use crate::error::{Error, Result};
use crate::numerics::{student_t_quantile, Rng};

/// Chance band: a CI intersecting `[0.45, 0.55]` is flagged.
pub const CHANCE_BAND: (f64, f64) = (0.45, 0.55);
pub const MIN_PER_CLASS: usize = 10;

/// Embeddings with binary labels and the identity of each sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeData {
    pub identities: Vec<String>,
    pub embeddings: Vec<Vec<f32>>,
    pub labels: Vec<bool>,
}

impl ProbeData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub attribute: String,
    pub modality: Modality,
    pub n_trials: usize,
    pub holdout_fraction: f64,
    pub svm: SvmParams,
    pub seed: u64,
}

impl ProbeSpec {
    pub fn new(attribute: impl Into<String>, modality: Modality, seed: u64) -> Self {
        Self {
            attribute: attribute.into(),
            modality,
            n_trials: 20,
            holdout_fraction: 0.2,
            svm: SvmParams::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub attribute: String,
    pub modality: Modality,
    pub map_mean: f64,
    /// Half-width of the 99% t interval over the trial APs.
    pub ci_halfwidth: f64,
    pub per_trial_aps: Vec<f64>,
    pub chance_flagged: bool,
    pub svm: SvmParams,
    pub seed: u64,
}

/// Average precision of a ranking by decreasing `scores`: the mean, over
/// positives, of the precision at each positive's rank. Equal scores keep
/// input order. `None` when there are no positives.
pub fn average_precision(scores: &[f32], labels: &[bool]) -> Option<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

/// 99% t-interval half-width of a sample mean.
pub fn ci99_halfwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "confidence interval needs ≥2 values".into(),
        ));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(student_t_quantile(0.995, (n - 1) as f64)? * (var / n as f64).sqrt())
}

pub fn overlaps_chance(mean: f64, halfwidth: f64) -> bool {
    mean - halfwidth <= CHANCE_BAND.1 && mean + halfwidth >= CHANCE_BAND.0
}

/// Splits identities into (train, holdout); holdout gets
/// `ceil(fraction · n)` identities, at least one and at most `n − 1`.
fn identity_holdout(
    ids: &[&str],
    fraction: f64,
    rng: &mut Rng,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut shuffled: Vec<&str> = ids.to_vec();
    rng.shuffle(&mut shuffled);
    let n_hold = ((fraction * ids.len() as f64).ceil() as usize).clamp(1, ids.len() - 1);
    let hold = shuffled[..n_hold].iter().map(|s| s.to_string()).collect();
    let train = shuffled[n_hold..].iter().map(|s| s.to_string()).collect();
    (train, hold)
}

pub fn run_probe(data: &ProbeData, spec: &ProbeSpec) -> Result<ProbeResult> {
    let n_pos = data.labels.iter().filter(|&&l| l).count();
    let n_neg = data.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InsufficientData(format!(
            "probe `{}`: labels are single-class ({n_pos} positive, {n_neg} negative)",
            spec.attribute
        )));
    }
    if n_pos < MIN_PER_CLASS || n_neg < MIN_PER_CLASS {
        return Err(Error::InsufficientData(format!(
            "probe `{}`: need ≥{MIN_PER_CLASS} samples per class ({n_pos} positive, {n_neg} negative)",
            spec.attribute
        )));
    }
    if spec.n_trials < 2 {
        return Err(Error::Config("probes need at least 2 trials".into()));
    }
    if !(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0) {
        return Err(Error::Config("holdout_fraction must lie in (0, 1)".into()));
    }
    let ids: Vec<&str> = data
        .identities
        .iter()
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ids.len() < 2 {
        return Err(Error::InsufficientData(
            "probes need at least 2 identities".into(),
        ));
    }

    let mut rng = Rng::new(spec.seed);
    let mut aps = Vec::with_capacity(spec.n_trials);
    for _ in 0..spec.n_trials {
        let mut trial_rng = rng.fork();
        let (train_idx, hold_idx) = split_samples(data, &ids, spec, &mut trial_rng)?;
        let balanced = balance(&train_idx, &data.labels, &mut trial_rng);
        let hold_idx = balance(&hold_idx, &data.labels, &mut trial_rng);
        let xs: Vec<&[f32]> = balanced
            .iter()
            .map(|&i| data.embeddings[i].as_slice())
            .collect();
        let ys: Vec<bool> = balanced.iter().map(|&i| data.labels[i]).collect();
        let svm = LinearSvm::train(&xs, &ys, &spec.svm)?;
        let scores: Vec<f32> = hold_idx
            .iter()
            .map(|&i| svm.decision(&data.embeddings[i]))
            .collect();
        let labels: Vec<bool> = hold_idx.iter().map(|&i| data.labels[i]).collect();
        aps.push(average_precision(&scores, &labels).expect("holdout has a positive"));
    }
    let map_mean = aps.iter().sum::<f64>() / aps.len() as f64;
    let ci_halfwidth = ci99_halfwidth(&aps)?;
    Ok(ProbeResult {
        attribute: spec.attribute.clone(),
        modality: spec.modality,
        map_mean,
        ci_halfwidth,
        chance_flagged: overlaps_chance(map_mean, ci_halfwidth),
        per_trial_aps: aps,
        svm: spec.svm.clone(),
        seed: spec.seed,
    })
}

/// Identity-level holdout split with both classes on both sides.
fn split_samples(
    data: &ProbeData,
    ids: &[&str],
    spec: &ProbeSpec,
    rng: &mut Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    const ATTEMPTS: usize = 100;
    for _ in 0..ATTEMPTS {
        let (train_ids, hold_ids) = identity_holdout(ids, spec.holdout_fraction, rng);
        let mut train = Vec::new();
        let mut hold = Vec::new();
        for (i, id) in data.identities.iter().enumerate() {
            if hold_ids.contains(id) {
                hold.push(i);
            } else if train_ids.contains(id) {
                train.push(i);
            }
        }
        let has = |idx: &[usize], want: bool| idx.iter().any(|&i| data.labels[i] == want);
        if has(&hold, true) && has(&hold, false) && has(&train, true) && has(&train, false) {
            return Ok((train, hold));
        }
    }
    Err(Error::InsufficientData(format!(
        "probe `{}`: no identity split with both classes on both sides after {ATTEMPTS} attempts",
        spec.attribute
    )))
}

/// Downsamples the majority class to the minority size.
fn balance(indices: &[usize], labels: &[bool], rng: &mut Rng) -> Vec<usize> {
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = indices.iter().partition(|&&i| labels[i]);
    let n = pos.len().min(neg.len());
    rng.shuffle(&mut pos);
    rng.shuffle(&mut neg);
    pos.truncate(n);
    neg.truncate(n);
    let mut out: Vec<usize> = pos.into_iter().chain(neg).collect();
    out.sort_unstable();
    out
}

/// Table-style row: attribute, modality, mAP and CI in percent, chance flag.
pub fn table_row(result: &ProbeResult) -> BTreeMap<&'static str, serde_json::Value> {
    BTreeMap::from([
        ("attribute", result.attribute.clone().into()),
        ("modality", result.modality.as_str().into()),
        ("map_pct", (100.0 * result.map_mean).into()),
        ("ci_pct", (100.0 * result.ci_halfwidth).into()),
        ("chance_flagged", result.chance_flagged.into()),
    ])
}
