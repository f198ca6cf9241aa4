use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Scorer;
use crate::datamodel::{Dataset, Modality};
use crate::error::{Error, Result};
use crate::model::Direction;
use crate::numerics::Rng;

pub const DEFAULT_RECALL_KS: [usize; 5] = [1, 5, 10, 50, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallTable {
    pub direction: Direction,
    pub set_size: usize,
    pub repeats: usize,
    pub ks: Vec<usize>,
    /// Fraction of queries whose true identity ranked within the top K, one
    /// entry per `ks` element.
    pub recalls: Vec<f64>,
    pub n_queries: usize,
    pub seed: u64,
}

/// Cross-modal retrieval recall@K.
///
/// Each repeat shuffles the test identities and cuts them into disjoint
/// galleries of `set_size` identities; every gallery holds one random clip
/// per identity per modality. Each anchor-modality item queries the
/// gallery's other-modality items. The true item's rank counts every other
/// item scoring at least as high (ties rank pessimistically).
pub fn recall_at_k<S: Scorer>(
    scorer: &mut S,
    dataset: &Dataset,
    test_identities: &BTreeSet<String>,
    direction: Direction,
    set_size: usize,
    ks: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<RecallTable> {
    let query_mod = direction.anchor();
    let gallery_mod = direction.candidate();
    let queries_by_id = dataset.clips_by_identity(test_identities, query_mod);
    let gallery_by_id = dataset.clips_by_identity(test_identities, gallery_mod);
    let ids: Vec<&String> = queries_by_id
        .keys()
        .filter(|id| gallery_by_id.contains_key(*id))
        .collect();
    if set_size == 0 || set_size > ids.len() {
        return Err(Error::InsufficientData(format!(
            "set size {set_size} needs that many test identities with both modalities; {} available",
            ids.len()
        )));
    }
    if repeats == 0 || ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config(
            "recall needs repeats ≥ 1 and positive K values".into(),
        ));
    }

    let mut rng = Rng::new(seed);
    let mut hits = vec![0usize; ks.len()];
    let mut n_queries = 0usize;
    let mut scores = vec![0.0f32; set_size];
    for _ in 0..repeats {
        let mut order = ids.clone();
        rng.shuffle(&mut order);
        for gallery_ids in order.chunks_exact(set_size) {
            let mut query_codes = Vec::with_capacity(set_size);
            let mut gallery_codes = Vec::with_capacity(set_size);
            for id in gallery_ids {
                let q = *rng.choose(&queries_by_id[*id]).expect("non-empty");
                let g = *rng.choose(&gallery_by_id[*id]).expect("non-empty");
                query_codes.push(scorer.encode(query_mod, feature(dataset, q, query_mod)?)?);
                gallery_codes.push(scorer.encode(gallery_mod, feature(dataset, g, gallery_mod)?)?);
            }
            for (qi, q) in query_codes.iter().enumerate() {
                for (gi, g) in gallery_codes.iter().enumerate() {
                    scores[gi] = match query_mod {
                        Modality::Voice => scorer.compare(g, q)?,
                        Modality::Face => scorer.compare(q, g)?,
                    };
                }
                let truth = scores[qi];
                let rank = 1 + scores
                    .iter()
                    .enumerate()
                    .filter(|&(gi, &s)| gi != qi && s >= truth)
                    .count();
                for (h, &k) in hits.iter_mut().zip(ks) {
                    if rank <= k {
                        *h += 1;
                    }
                }
                n_queries += 1;
            }
        }
    }
    Ok(RecallTable {
        direction,
        set_size,
        repeats,
        ks: ks.to_vec(),
        recalls: hits.iter().map(|&h| h as f64 / n_queries as f64).collect(),
        n_queries,
        seed,
    })
}

fn feature(dataset: &Dataset, i: usize, m: Modality) -> Result<&[f32]> {
    dataset.feature(i, m).ok_or_else(|| {
        Error::InsufficientData(format!(
            "record `{}` lacks {} features",
            dataset.record(i).clip_id,
            m.as_str()
        ))
    })
}
