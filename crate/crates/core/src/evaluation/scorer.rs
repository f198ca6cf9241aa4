use crate::datamodel::Modality;
use crate::error::Result;
use crate::model::{ModelParams, Objective};
use crate::numerics::{l2_distance, Rng};

/// Scores face/voice pairs. Items are encoded once per modality and then
/// compared pairwise, so galleries need one encoding per item rather than
/// one forward pass per pair.
pub trait Scorer {
    type Code: Clone;

    fn encode(&self, modality: Modality, features: &[f32]) -> Result<Self::Code>;

    /// Similarity of an encoded face and an encoded voice; higher means
    /// more likely the same identity.
    fn compare(&mut self, face: &Self::Code, voice: &Self::Code) -> Result<f32>;
}

/// Scores with a trained model: negative embedding distance for the
/// distance objectives, match probability for the classifier.
#[derive(Debug, Clone, Copy)]
pub struct ModelScorer<'a>(pub &'a ModelParams);

impl Scorer for ModelScorer<'_> {
    type Code = Vec<f32>;

    fn encode(&self, modality: Modality, features: &[f32]) -> Result<Vec<f32>> {
        match self.0.objective {
            Objective::Classifier => self
                .0
                .classifier_head()?
                .first_layer_partial(modality == Modality::Face, features),
            Objective::Triplet | Objective::Contrastive => self.0.embed(modality, features),
        }
    }

    fn compare(&mut self, face: &Vec<f32>, voice: &Vec<f32>) -> Result<f32> {
        match self.0.objective {
            Objective::Classifier => self.0.classifier_match_from_partials(face, voice),
            Objective::Triplet | Objective::Contrastive => Ok(-l2_distance(face, voice)?),
        }
    }
}

/// Ignores its inputs and returns independent uniform scores: the chance
/// baseline.
#[derive(Debug, Clone)]
pub struct RandomScorer(pub Rng);

impl Scorer for RandomScorer {
    type Code = ();

    fn encode(&self, _: Modality, _: &[f32]) -> Result<()> {
        Ok(())
    }

    fn compare(&mut self, _: &(), _: &()) -> Result<f32> {
        Ok(self.0.uniform() as f32)
    }
}

/// Applies a transform to another scorer's output.
pub struct Transformed<S, F> {
    pub inner: S,
    pub transform: F,
}

impl<S: Scorer, F: FnMut(f32) -> f32> Scorer for Transformed<S, F> {
    type Code = S::Code;

    fn encode(&self, modality: Modality, features: &[f32]) -> Result<S::Code> {
        self.inner.encode(modality, features)
    }

    fn compare(&mut self, face: &S::Code, voice: &S::Code) -> Result<f32> {
        let s = self.inner.compare(face, voice)?;
        Ok((self.transform)(s))
    }
}
