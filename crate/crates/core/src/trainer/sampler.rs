use std::collections::BTreeSet;

use crate::datamodel::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::model::{Direction, TripletTuple};
use crate::numerics::Rng;

/// Record indices of one training tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledTuple {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Draws training tuples from the training identities: a uniformly random
/// anchor clip, a distinct clip of the same identity from the other
/// modality, and a uniformly random other-modality clip of a different
/// identity.
#[derive(Debug)]
pub struct TupleSampler<'a> {
    dataset: &'a Dataset,
    direction: Direction,
    anchors: Vec<usize>,
    candidates: Vec<usize>,
    by_identity: std::collections::BTreeMap<String, Vec<usize>>,
    fallbacks: usize,
}

impl<'a> TupleSampler<'a> {
    pub fn new(
        dataset: &'a Dataset,
        train: &BTreeSet<String>,
        direction: Direction,
    ) -> Result<Self> {
        let anchor_mod = direction.anchor();
        let cand_mod = direction.candidate();
        let by_identity = dataset.clips_by_identity(train, cand_mod);
        if by_identity.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "tuple sampling needs at least 2 training identities with {} features, found {}",
                cand_mod.as_str(),
                by_identity.len()
            )));
        }
        let anchors: Vec<usize> = dataset
            .clips_by_identity(train, anchor_mod)
            .into_iter()
            .filter(|(id, _)| by_identity.contains_key(id))
            .flat_map(|(_, clips)| clips)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if anchors.is_empty() {
            return Err(Error::InsufficientData(
                "no anchor clips in the training split".into(),
            ));
        }
        let candidates = by_identity
            .values()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Self {
            dataset,
            direction,
            anchors,
            candidates,
            by_identity,
            fallbacks: 0,
        })
    }

    /// Number of tuples whose positive had to reuse the anchor's own clip
    /// because the identity has a single other-modality clip.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn sample(&mut self, rng: &mut Rng) -> Result<SampledTuple> {
        let anchor = self.anchors[rng.below(self.anchors.len())];
        let identity = &self.dataset.record(anchor).identity_id;
        let own = &self.by_identity[identity];
        let others = own.iter().filter(|&&i| i != anchor).count();
        let positive = if others == 0 {
            self.fallbacks += 1;
            log::warn!(
                "identity `{identity}` has a single {} clip; positive reuses the anchor clip",
                self.direction.candidate().as_str()
            );
            own[0]
        } else {
            let k = rng.below(others);
            *own.iter()
                .filter(|&&i| i != anchor)
                .nth(k)
                .expect("k < others")
        };
        let negative = loop {
            let c = self.candidates[rng.below(self.candidates.len())];
            if &self.dataset.record(c).identity_id != identity {
                break c;
            }
        };
        Ok(SampledTuple {
            anchor,
            positive,
            negative,
        })
    }

    /// Borrows the features of a sampled tuple.
    pub fn resolve(&self, t: &SampledTuple) -> Result<TripletTuple<'a>> {
        let ds = self.dataset;
        let get = |i: usize, m: Modality| {
            ds.feature(i, m).ok_or_else(|| {
                Error::InsufficientData(format!(
                    "record `{}` lacks {} features",
                    ds.record(i).clip_id,
                    m.as_str()
                ))
            })
        };
        TripletTuple::new(
            get(t.anchor, self.direction.anchor())?,
            get(t.positive, self.direction.candidate())?,
            get(t.negative, self.direction.candidate())?,
            &ds.record(t.anchor).identity_id,
            &ds.record(t.negative).identity_id,
        )
    }
}
