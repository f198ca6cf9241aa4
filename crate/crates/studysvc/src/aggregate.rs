use std::collections::BTreeMap;

use fvlab_core::stats::{summarize_experiment, ParticipantOutcomes, SummaryRow, THRESHOLDS};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StudyError};
use crate::experiment::ExperimentId;
use crate::session::{StudySession, TrialKind};

/// Sessions with this many failed controls are discarded.
pub const MAX_CONTROL_FAILURES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlFailures {
    /// Duplicate trials answered differently from their originals.
    pub consistency: usize,
    /// Cross-gender trials answered wrongly.
    pub correctness: usize,
}

impl ControlFailures {
    pub fn total(&self) -> usize {
        self.consistency + self.correctness
    }
}

pub fn control_failures(session: &StudySession) -> ControlFailures {
    let mut f = ControlFailures::default();
    for (i, trial) in session.header.trials.iter().enumerate() {
        let Some(resp) = session.responses.get(i) else {
            continue;
        };
        match trial.kind {
            TrialKind::Correctness if resp.choice != trial.correct => f.correctness += 1,
            TrialKind::Consistency { original }
                if session
                    .responses
                    .get(original)
                    .is_some_and(|o| o.choice != resp.choice) =>
            {
                f.consistency += 1;
            }
            _ => {}
        }
    }
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub session_id: String,
    pub failures: ControlFailures,
    pub contributed_stimuli: bool,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: ExperimentId,
    pub n_completed: usize,
    pub included: Vec<String>,
    pub excluded: Vec<Exclusion>,
    pub row: SummaryRow,
    pub significant_at: Vec<f64>,
    /// Per stimulus identity: fraction of included scored trials answered
    /// correctly where it was the target or the foil.
    pub per_model_difficulty: BTreeMap<String, f64>,
}

fn exclusion(session: &StudySession) -> Option<Exclusion> {
    let failures = control_failures(session);
    let mut reasons = Vec::new();
    if failures.total() >= MAX_CONTROL_FAILURES {
        reasons.push(format!(
            "{} failed controls ({} consistency, {} correctness)",
            failures.total(),
            failures.consistency,
            failures.correctness
        ));
    }
    if session.header.contributed_stimuli {
        reasons.push("participant contributed stimuli".to_string());
    }
    (!reasons.is_empty()).then(|| Exclusion {
        session_id: session.id().to_string(),
        failures,
        contributed_stimuli: session.header.contributed_stimuli,
        reasons,
    })
}

/// Summarizes the completed sessions of one experiment, in the given order.
pub fn aggregate<'a>(
    experiment: ExperimentId,
    sessions: impl IntoIterator<Item = &'a StudySession>,
) -> Result<ExperimentSummary> {
    let completed: Vec<&StudySession> = sessions.into_iter().filter(|s| s.completed()).collect();
    if completed.is_empty() {
        return Err(StudyError::NoCompletedSessions(experiment.to_string()));
    }
    let mut included = Vec::new();
    let mut excluded = Vec::new();
    let mut outcomes = Vec::new();
    let mut per_model: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for s in &completed {
        if let Some(e) = exclusion(s) {
            log::info!(
                "{experiment}: excluding session {}: {}",
                e.session_id,
                e.reasons.join("; ")
            );
            excluded.push(e);
            continue;
        }
        let mut correct = Vec::new();
        for (trial, resp) in s.header.trials.iter().zip(&s.responses) {
            if trial.kind != TrialKind::Scored {
                continue;
            }
            let ok = resp.choice == trial.correct;
            correct.push(ok);
            for person in [trial.target(), trial.foil()] {
                let e = per_model.entry(person.to_string()).or_default();
                e.0 += usize::from(ok);
                e.1 += 1;
            }
        }
        included.push(s.id().to_string());
        outcomes.push(ParticipantOutcomes {
            participant: s.id().to_string(),
            correct,
        });
    }
    if outcomes.is_empty() {
        return Err(StudyError::NoCompletedSessions(format!(
            "{experiment} after excluding all {} completed sessions",
            completed.len()
        )));
    }
    let row = summarize_experiment(experiment.as_str(), &outcomes)?;
    let significant_at = row.p_value.map_or(Vec::new(), |p| {
        THRESHOLDS.into_iter().filter(|&a| p < a).collect()
    });
    Ok(ExperimentSummary {
        experiment,
        n_completed: completed.len(),
        included,
        excluded,
        row,
        significant_at,
        per_model_difficulty: per_model
            .into_iter()
            .map(|(k, (c, n))| (k, c as f64 / n as f64))
            .collect(),
    })
}
