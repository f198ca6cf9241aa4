//! Forced matching under demographic grouping, cross-modal recall@K and
//! embedding export.

mod grouping;
mod matching;
mod recall;
mod scorer;

pub use grouping::{GroupKey, Grouping, GroupingMode};
pub use matching::{
    make_match_trials, run_matching, EvalReport, MatchTrial, TrialSet, DEFAULT_TRIALS_PER_PROBE,
};
pub use recall::{recall_at_k, RecallTable, DEFAULT_RECALL_KS};
pub use scorer::{ModelScorer, RandomScorer, Scorer, Transformed};

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{AgeGroup, Dataset, Ethnicity, Fluency, Gender, Modality};
use crate::error::Result;
use crate::model::ModelParams;

/// One row of an embedding export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub clip_id: String,
    pub identity_id: String,
    pub modality: Modality,
    pub embedding: Vec<f32>,
    pub gender: Gender,
    pub ethnicity: Ethnicity,
    pub fluency: Fluency,
    pub age_group: AgeGroup,
    pub pitch_hz: Option<f64>,
    pub loudness: Option<f64>,
}

/// Writes one JSON line per (clip, modality) holding the embedding and the
/// clip's annotations, for external projection and plotting tools.
pub fn export_embeddings(
    params: &ModelParams,
    dataset: &Dataset,
    out: impl Write,
) -> Result<usize> {
    let mut out = BufWriter::new(out);
    let mut rows = 0;
    for (i, rec) in dataset.manifest.records.iter().enumerate() {
        for modality in [Modality::Face, Modality::Voice] {
            let Some(x) = dataset.feature(i, modality) else {
                continue;
            };
            let row = EmbeddingRow {
                clip_id: rec.clip_id.clone(),
                identity_id: rec.identity_id.clone(),
                modality,
                embedding: params.embed(modality, x)?,
                gender: rec.gender,
                ethnicity: rec.ethnicity,
                fluency: rec.fluency,
                age_group: rec.age_group,
                pitch_hz: rec.pitch_hz,
                loudness: rec.loudness,
            };
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
            rows += 1;
        }
    }
    out.flush()?;
    Ok(rows)
}

pub fn export_embeddings_to_file(
    params: &ModelParams,
    dataset: &Dataset,
    path: impl AsRef<Path>,
) -> Result<usize> {
    export_embeddings(params, dataset, std::fs::File::create(path)?)
}

/// Serializes any report as a single JSON line.
pub fn write_jsonl_row<T: Serialize>(mut out: impl Write, row: &T) -> Result<()> {
    serde_json::to_writer(&mut out, row)?;
    out.write_all(b"\n")?;
    Ok(())
}
