use fvlab_core::datamodel::{Demographics, Gender, Modality};
use fvlab_core::model::Direction;
use fvlab_core::numerics::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StudyError};
use crate::experiment::{
    ExperimentId, ExperimentSpec, MIN_DUPLICATE_GAP, N_CONSISTENCY, N_CORRECTNESS, N_SCORED,
    N_TRIALS,
};
use crate::stimuli::{Pair, PairingPool, Person, StimulusPool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialKind {
    Scored,
    /// Repeats the stimuli of the scored trial at index `original`.
    Consistency {
        original: usize,
    },
    /// Pairs a male and a female candidate.
    Correctness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub person: String,
    pub modality: Modality,
    pub asset: String,
}

/// Server-side trial, including the answer key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    #[serde(flatten)]
    pub kind: TrialKind,
    pub probe: Stimulus,
    pub a: Stimulus,
    pub b: Stimulus,
    pub correct: Choice,
}

impl Trial {
    pub fn target(&self) -> &str {
        &self.probe.person
    }

    pub fn foil(&self) -> &str {
        match self.correct {
            Choice::A => &self.b.person,
            Choice::B => &self.a.person,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub session_id: String,
    pub trial_index: usize,
    pub choice: Choice,
    pub response_ms: u64,
    pub timestamp_ms: u64,
}

/// Immutable part of a session, written once to the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session_id: String,
    pub experiment: ExperimentId,
    pub seed: u64,
    pub demographics: Demographics,
    /// Self-reported participation in stimulus collection.
    pub contributed_stimuli: bool,
    pub created_ms: u64,
    pub completion_code: String,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudySession {
    pub header: SessionHeader,
    pub responses: Vec<ResponseRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitAck {
    pub duplicate: bool,
    pub next_index: usize,
    pub completed: bool,
}

impl StudySession {
    pub fn new(header: SessionHeader) -> Self {
        Self {
            header,
            responses: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.header.session_id
    }

    pub fn cursor(&self) -> usize {
        self.responses.len()
    }

    pub fn completed(&self) -> bool {
        self.responses.len() == self.header.trials.len()
    }

    /// Validates a submission against the cursor. `Ok(None)` is an exact
    /// duplicate of a stored response; `Ok(Some(record))` must be persisted
    /// and then applied with [`apply`](Self::apply).
    pub fn check_submission(
        &self,
        trial_index: usize,
        choice: Choice,
        response_ms: u64,
        timestamp_ms: u64,
    ) -> Result<Option<ResponseRecord>> {
        if let Some(prev) = self.responses.get(trial_index) {
            return if prev.choice == choice && prev.response_ms == response_ms {
                Ok(None)
            } else {
                Err(StudyError::ConflictingDuplicate(trial_index))
            };
        }
        if self.completed() {
            return Err(StudyError::Completed(self.id().to_string()));
        }
        if trial_index != self.cursor() {
            return Err(StudyError::OutOfOrder {
                expected: self.cursor(),
                got: trial_index,
            });
        }
        Ok(Some(ResponseRecord {
            session_id: self.id().to_string(),
            trial_index,
            choice,
            response_ms,
            timestamp_ms,
        }))
    }

    pub fn apply(&mut self, record: ResponseRecord) -> Result<SubmitAck> {
        if record.session_id != self.id() || record.trial_index != self.cursor() || self.completed()
        {
            return Err(StudyError::OutOfOrder {
                expected: self.cursor(),
                got: record.trial_index,
            });
        }
        self.responses.push(record);
        Ok(self.ack(false))
    }

    pub fn ack(&self, duplicate: bool) -> SubmitAck {
        SubmitAck {
            duplicate,
            next_index: self.cursor(),
            completed: self.completed(),
        }
    }

    /// The trial at the cursor, or the done-marker. `media_url` maps an
    /// asset reference to the URL the browser fetches.
    pub fn payload(&self, media_url: &dyn Fn(&str) -> String) -> NextTrial {
        match self.header.trials.get(self.cursor()) {
            None => NextTrial {
                done: true,
                trial: None,
                completion_code: Some(self.header.completion_code.clone()),
            },
            Some(t) => {
                let media = |s: &Stimulus| MediaRef {
                    modality: s.modality,
                    url: media_url(&s.asset),
                };
                NextTrial {
                    done: false,
                    trial: Some(TrialPayload {
                        session_id: self.id().to_string(),
                        trial_index: self.cursor(),
                        n_trials: self.header.trials.len(),
                        probe: media(&t.probe),
                        options: [
                            OptionRef {
                                slot: Choice::A,
                                media: media(&t.a),
                            },
                            OptionRef {
                                slot: Choice::B,
                                media: media(&t.b),
                            },
                        ],
                    }),
                    completion_code: None,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaRef {
    pub modality: Modality,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionRef {
    pub slot: Choice,
    #[serde(flatten)]
    pub media: MediaRef,
}

/// What a participant's browser sees: stimuli only, no identities and no
/// answer key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPayload {
    pub session_id: String,
    pub trial_index: usize,
    pub n_trials: usize,
    pub probe: MediaRef,
    pub options: [OptionRef; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextTrial {
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<TrialPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_code: Option<String>,
}

fn pick(person: &Person, modality: Modality, rng: &mut Rng) -> Stimulus {
    Stimulus {
        person: person.id.clone(),
        modality,
        asset: rng
            .choose(person.assets(modality))
            .expect("persons carry both modalities")
            .clone(),
    }
}

fn make_trial(
    kind: TrialKind,
    target: &Person,
    foil: &Person,
    direction: Direction,
    rng: &mut Rng,
) -> Trial {
    let probe = pick(target, direction.anchor(), rng);
    let t = pick(target, direction.candidate(), rng);
    let f = pick(foil, direction.candidate(), rng);
    if rng.bernoulli(0.5) {
        Trial {
            kind,
            probe,
            a: t,
            b: f,
            correct: Choice::A,
        }
    } else {
        Trial {
            kind,
            probe,
            a: f,
            b: t,
            correct: Choice::B,
        }
    }
}

/// Draws 8 male-target and 8 female-target pairs from the pool, topping up
/// from the other gender when one side runs short.
fn draw_scored_pairs<'a>(pool: &'a PairingPool, rng: &mut Rng) -> Result<Vec<&'a Pair>> {
    let half = N_SCORED / 2;
    let mut male = pool.by_gender(Gender::Male);
    let mut female = pool.by_gender(Gender::Female);
    rng.shuffle(&mut male);
    rng.shuffle(&mut female);
    if male.len() + female.len() < N_SCORED {
        return Err(StudyError::PoolExhausted(format!(
            "pairing pool holds {} pairs, a session needs {N_SCORED}",
            male.len() + female.len()
        )));
    }
    let n_male = male
        .len()
        .min(half)
        .max(N_SCORED - female.len().min(N_SCORED));
    let n_male = n_male.min(male.len());
    let n_female = N_SCORED - n_male;
    if n_male != half {
        log::warn!("pairing pool cannot balance genders: {n_male} male-target and {n_female} female-target pairs");
    }
    Ok(male
        .into_iter()
        .take(n_male)
        .chain(female.into_iter().take(n_female))
        .collect())
}

/// Control positions: a random 4-subset of the 20 slots, two of them
/// consistency duplicates, each at least [`MIN_DUPLICATE_GAP`] slots after
/// a distinct scored original.
fn layout(rng: &mut Rng) -> Vec<TrialKind> {
    loop {
        let mut slots: Vec<usize> = (0..N_TRIALS).collect();
        rng.shuffle(&mut slots);
        let controls = &slots[..N_CONSISTENCY + N_CORRECTNESS];
        let consistency = &controls[..N_CONSISTENCY];
        let mut kinds = vec![TrialKind::Scored; N_TRIALS];
        for &c in &controls[N_CONSISTENCY..] {
            kinds[c] = TrialKind::Correctness;
        }
        let mut used = Vec::new();
        let mut ok = true;
        let mut ordered = consistency.to_vec();
        ordered.sort_unstable();
        for c in ordered {
            let eligible: Vec<usize> = (0..c.saturating_sub(MIN_DUPLICATE_GAP - 1))
                .filter(|&i| {
                    i + MIN_DUPLICATE_GAP <= c && !controls.contains(&i) && !used.contains(&i)
                })
                .collect();
            match rng.choose(&eligible) {
                Some(&orig) => {
                    used.push(orig);
                    kinds[c] = TrialKind::Consistency { original: orig };
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return kinds;
        }
    }
}

/// Builds the 20-trial sequence of one session.
pub fn generate_trials(
    stimuli: &StimulusPool,
    pool: &PairingPool,
    spec: &ExperimentSpec,
    rng: &mut Rng,
) -> Result<Vec<Trial>> {
    let person = |id: &str| {
        stimuli.get(id).ok_or_else(|| {
            StudyError::PoolExhausted(format!("pairing pool names unknown person `{id}`"))
        })
    };
    let males: Vec<&Person> = stimuli
        .persons()
        .iter()
        .filter(|p| p.demographics.gender == Gender::Male)
        .collect();
    let females: Vec<&Person> = stimuli
        .persons()
        .iter()
        .filter(|p| p.demographics.gender == Gender::Female)
        .collect();
    if males.is_empty() || females.is_empty() {
        return Err(StudyError::PoolExhausted(
            "correctness controls need both genders".into(),
        ));
    }

    let scored = draw_scored_pairs(pool, rng)?;
    let kinds = layout(rng);
    let mut trials: Vec<Option<Trial>> = vec![None; N_TRIALS];
    let mut scored_iter = scored.into_iter();
    for (i, kind) in kinds.iter().enumerate() {
        trials[i] = match kind {
            TrialKind::Scored => {
                let pair = scored_iter.next().expect("16 scored slots");
                Some(make_trial(
                    TrialKind::Scored,
                    person(&pair.target)?,
                    person(&pair.foil)?,
                    spec.direction,
                    rng,
                ))
            }
            TrialKind::Correctness => {
                let (t, f) = if rng.bernoulli(0.5) {
                    (&males, &females)
                } else {
                    (&females, &males)
                };
                let (t, f) = (*rng.choose(t).unwrap(), *rng.choose(f).unwrap());
                Some(make_trial(
                    TrialKind::Correctness,
                    t,
                    f,
                    spec.direction,
                    rng,
                ))
            }
            TrialKind::Consistency { .. } => None,
        };
    }
    for (i, kind) in kinds.iter().enumerate() {
        if let TrialKind::Consistency { original } = *kind {
            let mut dup = trials[original].clone().expect("original is scored");
            dup.kind = *kind;
            trials[i] = Some(dup);
        }
    }
    Ok(trials
        .into_iter()
        .map(|t| t.expect("every slot filled"))
        .collect())
}

/// Session header from a session seed: the id and completion code come
/// from the first two draws.
pub fn new_session(
    stimuli: &StimulusPool,
    pool: &PairingPool,
    experiment: ExperimentId,
    seed: u64,
    demographics: Demographics,
    contributed_stimuli: bool,
    created_ms: u64,
) -> Result<StudySession> {
    let mut rng = Rng::new(seed);
    let session_id = format!("{:016x}", rng.next_u64());
    let completion_code = format!("FV-{:08X}", rng.next_u64() >> 32);
    let trials = generate_trials(stimuli, pool, &experiment.spec(), &mut rng)?;
    Ok(StudySession::new(SessionHeader {
        session_id,
        experiment,
        seed,
        demographics,
        contributed_stimuli,
        created_ms,
        completion_code,
        trials,
    }))
}
