use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{GroupKey, Grouping, Scorer};
use crate::datamodel::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::model::Direction;
use crate::numerics::Rng;

/// Trials per probe clip by default: each probe is paired against eight
/// different candidates.
pub const DEFAULT_TRIALS_PER_PROBE: usize = 8;

/// One 2-way forced matching trial over record indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchTrial {
    pub probe: usize,
    pub candidate_true: usize,
    pub candidate_false: usize,
    pub true_identity: String,
    pub false_identity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub direction: Direction,
    pub grouping: Grouping,
    pub seed: u64,
    pub trials: Vec<MatchTrial>,
}

impl TrialSet {
    pub fn probe_modality(&self) -> Modality {
        self.direction.anchor()
    }

    pub fn candidate_modality(&self) -> Modality {
        self.direction.candidate()
    }
}

/// Builds forced-matching trials over the test identities.
///
/// For each probe clip (anchor modality) `trials_per_probe` trials are drawn:
/// the true candidate is a random clip of the probe's identity, the false
/// candidate a uniformly random clip of a different identity sharing the
/// true candidate's constrained attributes.
pub fn make_match_trials(
    dataset: &Dataset,
    test_identities: &BTreeSet<String>,
    grouping: Grouping,
    direction: Direction,
    trials_per_probe: usize,
    seed: u64,
) -> Result<TrialSet> {
    let probe_mod = direction.anchor();
    let cand_mod = direction.candidate();
    let admitted: BTreeSet<String> = test_identities
        .iter()
        .filter(|id| {
            dataset
                .manifest
                .records
                .iter()
                .any(|r| &r.identity_id == *id && grouping.admits(r))
        })
        .cloned()
        .collect();
    let candidates = dataset.clips_by_identity(&admitted, cand_mod);
    let mut probes: Vec<usize> = dataset
        .clips_by_identity(&admitted, probe_mod)
        .into_iter()
        .filter(|(id, _)| candidates.contains_key(id))
        .flat_map(|(_, clips)| clips)
        .filter(|&i| grouping.admits(dataset.record(i)))
        .collect();
    probes.sort_unstable();

    let mut by_key: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for &i in candidates.values().flatten() {
        let rec = dataset.record(i);
        if grouping.admits(rec) {
            by_key.entry(grouping.key(rec)).or_default().push(i);
        }
    }
    for clips in by_key.values_mut() {
        clips.sort_unstable();
    }
    let identities_in = |clips: &[usize]| {
        clips
            .iter()
            .map(|&i| dataset.record(i).identity_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    };

    if probes.is_empty() || candidates.len() < 2 {
        return Err(Error::Unsatisfiable(format!(
            "{grouping}: need at least 2 test identities with both modalities, found {}",
            candidates.len()
        )));
    }
    let degenerate: Vec<String> = by_key
        .iter()
        .filter(|(_, clips)| identities_in(clips) < 2)
        .map(|(k, clips)| format!("{k} ({} identity)", identities_in(clips)))
        .collect();
    if !degenerate.is_empty() {
        return Err(Error::Unsatisfiable(format!(
            "{grouping}: groups with fewer than 2 identities: {}",
            degenerate.join(", ")
        )));
    }

    let mut rng = Rng::new(seed);
    let mut trials = Vec::with_capacity(probes.len() * trials_per_probe);
    for &probe in &probes {
        let identity = &dataset.record(probe).identity_id;
        let own: Vec<usize> = candidates[identity]
            .iter()
            .copied()
            .filter(|&i| grouping.admits(dataset.record(i)))
            .collect();
        for _ in 0..trials_per_probe {
            let candidate_true = own[rng.below(own.len())];
            let pool = &by_key[&grouping.key(dataset.record(candidate_true))];
            let candidate_false = loop {
                let c = pool[rng.below(pool.len())];
                if &dataset.record(c).identity_id != identity {
                    break c;
                }
            };
            trials.push(MatchTrial {
                probe,
                candidate_true,
                candidate_false,
                true_identity: identity.clone(),
                false_identity: dataset.record(candidate_false).identity_id.clone(),
            });
        }
    }
    Ok(TrialSet {
        direction,
        grouping,
        seed,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub direction: Direction,
    pub grouping: String,
    pub accuracy: f64,
    pub n_trials: usize,
    /// Trials whose two scores were exactly equal; each counts as half
    /// correct.
    pub n_ties: usize,
    /// For each identity, the mean outcome over trials where it was either
    /// the true or the false candidate.
    pub per_identity_difficulty: BTreeMap<String, f64>,
    pub seed: u64,
}

/// Scores every trial: correct iff the true candidate outscores the false
/// one, exact ties count one half.
pub fn run_matching<S: Scorer>(
    scorer: &mut S,
    trials: &TrialSet,
    dataset: &Dataset,
) -> Result<EvalReport> {
    let probe_mod = trials.probe_modality();
    let cand_mod = trials.candidate_modality();
    let mut cache: HashMap<(usize, Modality), S::Code> = HashMap::new();
    let mut code = |i: usize, m: Modality, scorer: &S| -> Result<S::Code> {
        if let Some(c) = cache.get(&(i, m)) {
            return Ok(c.clone());
        }
        let x = dataset.feature(i, m).ok_or_else(|| {
            Error::InsufficientData(format!(
                "record `{}` lacks {} features",
                dataset.record(i).clip_id,
                m.as_str()
            ))
        })?;
        let c = scorer.encode(m, x)?;
        cache.insert((i, m), c.clone());
        Ok(c)
    };

    let mut total = 0.0;
    let mut ties = 0;
    let mut per_identity: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for t in &trials.trials {
        let p = code(t.probe, probe_mod, scorer)?;
        let ct = code(t.candidate_true, cand_mod, scorer)?;
        let cf = code(t.candidate_false, cand_mod, scorer)?;
        let (s_true, s_false) = match probe_mod {
            Modality::Voice => (scorer.compare(&ct, &p)?, scorer.compare(&cf, &p)?),
            Modality::Face => (scorer.compare(&p, &ct)?, scorer.compare(&p, &cf)?),
        };
        let outcome = if s_true > s_false {
            1.0
        } else if s_true == s_false {
            ties += 1;
            0.5
        } else {
            0.0
        };
        total += outcome;
        for id in [&t.true_identity, &t.false_identity] {
            let e = per_identity.entry(id.clone()).or_default();
            e.0 += outcome;
            e.1 += 1;
        }
    }
    let n = trials.trials.len();
    Ok(EvalReport {
        direction: trials.direction,
        grouping: trials.grouping.to_string(),
        accuracy: if n == 0 { 0.0 } else { total / n as f64 },
        n_trials: n,
        n_ties: ties,
        per_identity_difficulty: per_identity
            .into_iter()
            .map(|(id, (s, c))| (id, s / c as f64))
            .collect(),
        seed: trials.seed,
    })
}
