use std::collections::BTreeMap;
use std::path::Path;

use fvlab_core::datamodel::Demographics;
use fvlab_core::numerics::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate, ExperimentSummary};
use crate::error::{Result, StudyError};
use crate::experiment::{ExperimentId, N_TRIALS};
use crate::log::{LogEntry, StudyLog};
use crate::session::{new_session, Choice, NextTrial, StudySession, SubmitAck};
use crate::stimuli::{MediaIndex, PairingPool, StimulusPool};

/// URL prefix under which stimulus media are served by token.
pub const MEDIA_PREFIX: &str = "/media";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub experiment: ExperimentId,
    pub n_trials: usize,
}

struct ExperimentState {
    pool: PairingPool,
    sessions: BTreeMap<String, StudySession>,
    order: Vec<String>,
    log: StudyLog,
}

/// All study state: one record log and pairing pool per experiment.
pub struct StudyStore {
    stimuli: StimulusPool,
    media: MediaIndex,
    seed: u64,
    experiments: BTreeMap<ExperimentId, ExperimentState>,
    session_index: BTreeMap<String, ExperimentId>,
}

fn derived_seed(seed: u64, salt: u64) -> u64 {
    Rng::new(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)).next_u64()
}

impl StudyStore {
    /// Opens (or creates) `<data_dir>/<experiment>.jsonl` for every
    /// experiment and replays it.
    pub fn open(stimuli: StimulusPool, data_dir: impl AsRef<Path>, seed: u64) -> Result<Self> {
        let data_dir = data_dir.as_ref();
        std::fs::create_dir_all(data_dir)?;
        let media = MediaIndex::build(&stimuli, derived_seed(seed, 0xFFFF));
        let mut store = Self {
            stimuli,
            media,
            seed,
            experiments: BTreeMap::new(),
            session_index: BTreeMap::new(),
        };
        for (k, exp) in ExperimentId::ALL.into_iter().enumerate() {
            let (mut log, entries) = StudyLog::open(data_dir.join(format!("{exp}.jsonl")))?;
            let corrupt = |line: usize, message: String| StudyError::CorruptLog {
                path: log_path(data_dir, exp),
                line,
                message,
            };
            let mut entries = entries.into_iter().enumerate();
            let pool = match entries.next() {
                Some((_, LogEntry::Pool(p))) => p,
                Some(_) => return Err(corrupt(1, "log does not start with a pairing pool".into())),
                None => {
                    let p = PairingPool::build(
                        &store.stimuli,
                        exp.spec().constraint,
                        derived_seed(seed, k as u64 + 1),
                    );
                    log.append(&LogEntry::Pool(p.clone()))?;
                    p
                }
            };
            let mut state = ExperimentState {
                pool,
                sessions: BTreeMap::new(),
                order: Vec::new(),
                log,
            };
            for (i, entry) in entries {
                match entry {
                    LogEntry::Pool(_) => return Err(corrupt(i + 1, "second pairing pool".into())),
                    LogEntry::Session(h) => {
                        if store.session_index.contains_key(&h.session_id) || h.experiment != exp {
                            return Err(corrupt(
                                i + 1,
                                format!("unexpected session `{}`", h.session_id),
                            ));
                        }
                        store.session_index.insert(h.session_id.clone(), exp);
                        state.order.push(h.session_id.clone());
                        state
                            .sessions
                            .insert(h.session_id.clone(), StudySession::new(*h));
                    }
                    LogEntry::Response(r) => {
                        let s = state.sessions.get_mut(&r.session_id).ok_or_else(|| {
                            corrupt(
                                i + 1,
                                format!("response for unknown session `{}`", r.session_id),
                            )
                        })?;
                        s.apply(r).map_err(|e| corrupt(i + 1, e.to_string()))?;
                    }
                }
            }
            store.experiments.insert(exp, state);
        }
        Ok(store)
    }

    pub fn stimuli(&self) -> &StimulusPool {
        &self.stimuli
    }

    pub fn media_asset(&self, token: &str) -> Option<&str> {
        self.media.asset(token)
    }

    pub fn pairing_pool(&self, experiment: ExperimentId) -> &PairingPool {
        &self.experiments[&experiment].pool
    }

    pub fn session(&self, session_id: &str) -> Option<&StudySession> {
        let exp = self.session_index.get(session_id)?;
        self.experiments[exp].sessions.get(session_id)
    }

    /// Sessions of one experiment in creation order.
    pub fn sessions(&self, experiment: ExperimentId) -> Vec<&StudySession> {
        let state = &self.experiments[&experiment];
        state.order.iter().map(|id| &state.sessions[id]).collect()
    }

    pub fn create_session(
        &mut self,
        experiment: ExperimentId,
        demographics: Demographics,
        contributed_stimuli: bool,
        now_ms: u64,
    ) -> Result<SessionCreated> {
        let state = self
            .experiments
            .get_mut(&experiment)
            .expect("every experiment is open");
        let ordinal = state.order.len() as u64;
        let mut salt = ((experiment as u64 + 1) << 40) | ordinal;
        let session = loop {
            let s = new_session(
                &self.stimuli,
                &state.pool,
                experiment,
                derived_seed(self.seed, salt),
                demographics,
                contributed_stimuli,
                now_ms,
            )?;
            if !self.session_index.contains_key(s.id()) {
                break s;
            }
            salt = salt.wrapping_add(1 << 32);
        };
        state
            .log
            .append(&LogEntry::Session(Box::new(session.header.clone())))?;
        let id = session.id().to_string();
        self.session_index.insert(id.clone(), experiment);
        state.order.push(id.clone());
        state.sessions.insert(id.clone(), session);
        Ok(SessionCreated {
            session_id: id,
            experiment,
            n_trials: N_TRIALS,
        })
    }

    pub fn next_trial(&self, session_id: &str) -> Result<NextTrial> {
        let s = self
            .session(session_id)
            .ok_or_else(|| StudyError::NotFound(session_id.to_string()))?;
        let url = |asset: &str| match self.media.token(asset) {
            Some(t) => format!("{MEDIA_PREFIX}/{t}"),
            None => format!("{MEDIA_PREFIX}/unknown"),
        };
        Ok(s.payload(&url))
    }

    pub fn submit_response(
        &mut self,
        session_id: &str,
        trial_index: usize,
        choice: Choice,
        response_ms: u64,
        now_ms: u64,
    ) -> Result<SubmitAck> {
        let exp = *self
            .session_index
            .get(session_id)
            .ok_or_else(|| StudyError::NotFound(session_id.to_string()))?;
        let state = self.experiments.get_mut(&exp).expect("indexed experiment");
        let session = state.sessions.get_mut(session_id).expect("indexed session");
        match session.check_submission(trial_index, choice, response_ms, now_ms)? {
            None => Ok(session.ack(true)),
            Some(record) => {
                state.log.append(&LogEntry::Response(record.clone()))?;
                session.apply(record)
            }
        }
    }

    pub fn aggregate(&self, experiment: ExperimentId) -> Result<ExperimentSummary> {
        aggregate(experiment, self.sessions(experiment))
    }
}

fn log_path(dir: &Path, exp: ExperimentId) -> String {
    dir.join(format!("{exp}.jsonl")).display().to_string()
}
