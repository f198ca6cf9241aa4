#![allow(dead_code)]

use std::path::{Path, PathBuf};

use fvlab_core::datamodel::{write_feature_file, ClipRecord, Demographics, Manifest};
use fvlab_studysvc::session::{Choice, TrialKind};
use fvlab_studysvc::stimuli::Person;
use fvlab_studysvc::{StimulusPool, StudyStore};

pub fn participant() -> Demographics {
    "f/5/Y/20s".parse().unwrap()
}

fn person_ids(n: usize) -> Vec<(String, Demographics)> {
    let mut out = Vec::new();
    for g in ["m", "f"] {
        for e in [2, 5] {
            for i in 0..n {
                out.push((
                    format!("{g}{e}_{i:02}"),
                    format!("{g}/{e}/Y/30s").parse().unwrap(),
                ));
            }
        }
    }
    out
}

/// `n` persons per (gender, ethnicity) cell with two assets per modality.
pub fn stimuli(n: usize) -> StimulusPool {
    StimulusPool::new(
        person_ids(n)
            .into_iter()
            .map(|(id, demographics)| Person {
                demographics,
                faces: (0..2).map(|k| format!("faces/{id}_{k}.jpg")).collect(),
                voices: (0..2).map(|k| format!("voices/{id}_{k}.wav")).collect(),
                id,
            })
            .collect(),
    )
}

/// Writes a manifest of the same persons plus small asset files whose bytes
/// name the asset. Returns the manifest path.
pub fn write_fixture(dir: &Path, n: usize) -> PathBuf {
    let mut records = Vec::new();
    for (id, d) in person_ids(n) {
        for k in 0..2 {
            let face = format!("faces/{id}_{k}.jpg");
            let voice = format!("voices/{id}_{k}.wav");
            for a in [&face, &voice] {
                let p = dir.join(a);
                std::fs::create_dir_all(p.parent().unwrap()).unwrap();
                std::fs::write(&p, a.as_bytes()).unwrap();
            }
            let features = PathBuf::from(format!("features/{id}_c{k}.f32"));
            std::fs::create_dir_all(dir.join("features")).unwrap();
            write_feature_file(&dir.join(&features), &[0.0, 1.0]).unwrap();
            records.push(ClipRecord {
                identity_id: id.clone(),
                clip_id: format!("{id}_c{k}"),
                face_feature_ref: Some(features.clone()),
                voice_feature_ref: Some(features),
                face_asset_ref: Some(face),
                voice_asset_ref: Some(voice),
                gender: d.gender,
                ethnicity: d.ethnicity,
                fluency: d.fluency,
                age_group: d.age_group,
                pitch_hz: None,
                loudness: None,
                facial_attrs: Default::default(),
            });
        }
    }
    let manifest = Manifest {
        records,
        feature_dim: 2,
        root: dir.to_path_buf(),
    };
    let path = dir.join("manifest.jsonl");
    manifest.write(&path).unwrap();
    path
}

fn flip(c: Choice) -> Choice {
    match c {
        Choice::A => Choice::B,
        Choice::B => Choice::A,
    }
}

/// Scripted participant behaviour for one session.
#[derive(Debug, Clone, Copy)]
pub struct Script {
    pub consistency_failures: usize,
    pub correctness_failures: usize,
    /// Scored trial `j` (in order) is answered correctly unless `j % wrong_every == 0`.
    pub wrong_every: usize,
}

impl Script {
    pub fn clean(wrong_every: usize) -> Self {
        Self {
            consistency_failures: 0,
            correctness_failures: 0,
            wrong_every,
        }
    }
}

/// The choices `script` makes on the session's trials.
pub fn scripted_choices(store: &StudyStore, session_id: &str, script: Script) -> Vec<Choice> {
    let trials = &store.session(session_id).unwrap().header.trials;
    let mut choices: Vec<Choice> = Vec::with_capacity(trials.len());
    let (mut scored, mut cons, mut corr) = (0, 0, 0);
    for t in trials {
        let c = match t.kind {
            TrialKind::Scored => {
                scored += 1;
                if (scored - 1) % script.wrong_every == 0 {
                    flip(t.correct)
                } else {
                    t.correct
                }
            }
            TrialKind::Correctness => {
                corr += 1;
                if corr <= script.correctness_failures {
                    flip(t.correct)
                } else {
                    t.correct
                }
            }
            TrialKind::Consistency { original } => {
                cons += 1;
                let o = choices[original];
                if cons <= script.consistency_failures {
                    flip(o)
                } else {
                    o
                }
            }
        };
        choices.push(c);
    }
    choices
}

/// Runs a full session through the store.
pub fn run_session(
    store: &mut StudyStore,
    exp: fvlab_studysvc::ExperimentId,
    contributed: bool,
    script: Script,
) -> String {
    let id = store
        .create_session(exp, participant(), contributed, 1_000)
        .unwrap()
        .session_id;
    for (i, c) in scripted_choices(store, &id, script).into_iter().enumerate() {
        store
            .submit_response(&id, i, c, 900 + i as u64, 2_000 + i as u64)
            .unwrap();
    }
    id
}
