use std::collections::BTreeMap;

use fvlab_core::datamodel::{Demographics, Gender, Manifest, Modality};
use fvlab_core::numerics::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StudyError};
use crate::experiment::{PairConstraint, PAIRS_PER_PERSON};

/// A stimulus identity with its face images and voice recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Person {
    pub id: String,
    pub demographics: Demographics,
    pub faces: Vec<String>,
    pub voices: Vec<String>,
}

impl Person {
    pub fn assets(&self, modality: Modality) -> &[String] {
        match modality {
            Modality::Face => &self.faces,
            Modality::Voice => &self.voices,
        }
    }
}

/// Persons with at least one face asset and one voice asset, sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StimulusPool {
    persons: Vec<Person>,
}

impl StimulusPool {
    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        let mut by_id: BTreeMap<&str, Person> = BTreeMap::new();
        for r in &manifest.records {
            let p = by_id.entry(&r.identity_id).or_insert_with(|| Person {
                id: r.identity_id.clone(),
                demographics: r.demographics(),
                faces: Vec::new(),
                voices: Vec::new(),
            });
            if p.demographics != r.demographics() {
                return Err(StudyError::BadRequest(format!(
                    "identity `{}` has inconsistent demographics across clips",
                    r.identity_id
                )));
            }
            if let Some(a) = &r.face_asset_ref {
                p.faces.push(a.clone());
            }
            if let Some(a) = &r.voice_asset_ref {
                p.voices.push(a.clone());
            }
        }
        Ok(Self::new(by_id.into_values().collect()))
    }

    pub fn new(mut persons: Vec<Person>) -> Self {
        persons.retain(|p| !p.faces.is_empty() && !p.voices.is_empty());
        persons.sort_by(|a, b| a.id.cmp(&b.id));
        Self { persons }
    }

    pub fn persons(&self) -> &[Person] {
        &self.persons
    }

    pub fn get(&self, id: &str) -> Option<&Person> {
        self.persons
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.persons[i])
    }

    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }
}

/// Opaque names for stimulus assets, so media URLs reveal nothing about
/// identities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MediaIndex {
    by_token: BTreeMap<String, String>,
    by_asset: BTreeMap<String, String>,
}

impl MediaIndex {
    pub fn build(stimuli: &StimulusPool, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut index = Self::default();
        for p in stimuli.persons() {
            for asset in p.faces.iter().chain(&p.voices) {
                if index.by_asset.contains_key(asset) {
                    continue;
                }
                let token = loop {
                    let t = format!("{:016x}", rng.next_u64());
                    if !index.by_token.contains_key(&t) {
                        break t;
                    }
                };
                index.by_token.insert(token.clone(), asset.clone());
                index.by_asset.insert(asset.clone(), token);
            }
        }
        index
    }

    pub fn token(&self, asset: &str) -> Option<&str> {
        self.by_asset.get(asset).map(String::as_str)
    }

    pub fn asset(&self, token: &str) -> Option<&str> {
        self.by_token.get(token).map(String::as_str)
    }
}

/// A scored pairing: the target is the true identity, the foil the
/// distractor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub target: String,
    pub foil: String,
    pub gender: Gender,
}

/// Every person paired with up to [`PAIRS_PER_PERSON`] others drawn at
/// random within the constraint; shared by all sessions of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingPool {
    pub seed: u64,
    pub pairs: Vec<Pair>,
}

impl PairingPool {
    pub fn build(stimuli: &StimulusPool, constraint: PairConstraint, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut groups: BTreeMap<_, Vec<&Person>> = BTreeMap::new();
        for p in stimuli.persons() {
            groups
                .entry(constraint.key(&p.demographics))
                .or_default()
                .push(p);
        }
        let mut pairs = Vec::new();
        for p in stimuli.persons() {
            let mut others: Vec<&Person> = groups[&constraint.key(&p.demographics)]
                .iter()
                .copied()
                .filter(|q| q.id != p.id)
                .collect();
            rng.shuffle(&mut others);
            for q in others.into_iter().take(PAIRS_PER_PERSON) {
                pairs.push(Pair {
                    target: p.id.clone(),
                    foil: q.id.clone(),
                    gender: p.demographics.gender,
                });
            }
        }
        Self { seed, pairs }
    }

    pub fn by_gender(&self, gender: Gender) -> Vec<&Pair> {
        self.pairs.iter().filter(|p| p.gender == gender).collect()
    }
}
