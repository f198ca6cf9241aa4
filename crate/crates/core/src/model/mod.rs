//! Face and voice projection heads, the softmax-over-distances triplet
//! objective, and the two comparison objectives (contrastive Siamese pairs
//! and a binary match classifier over concatenated features).
//!
//! Each head is `affine → ReLU → affine`. With voice as the reference
//! modality (V→F) the voice head embeds the anchor while the face head
//! embeds both the positive and the negative, so the face head's weight
//! gradient is the sum over the two branches (and symmetrically for F→V).

mod checkpoint;
mod heads;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use heads::{ClassifierHead, Head};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datamodel::Modality;
use crate::error::{check_dim, Error, Result};
use crate::numerics::{l2_distance, l2_distance_f64, l2_distance_grad, logistic, softmax2, Rng};

/// Head widths supported by the dimension sweep.
pub const SWEEP_DIMS: [usize; 5] = [128, 512, 1024, 2048, 4096];
pub const DEFAULT_HIDDEN_DIM: usize = 128;
pub const DEFAULT_EMBED_DIM: usize = 128;
pub const DEFAULT_CONTRASTIVE_MARGIN: f32 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Triplet,
    Contrastive,
    Classifier,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Triplet => "triplet",
            Objective::Contrastive => "contrastive",
            Objective::Classifier => "classifier",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triplet" => Ok(Objective::Triplet),
            "contrastive" => Ok(Objective::Contrastive),
            "classifier" => Ok(Objective::Classifier),
            other => Err(Error::Config(format!("unknown objective `{other}`"))),
        }
    }
}

/// Which modality anchors a training tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Voice anchor, face positive/negative.
    V2F,
    /// Face anchor, voice positive/negative.
    F2V,
}

impl Direction {
    pub fn anchor(self) -> Modality {
        match self {
            Direction::V2F => Modality::Voice,
            Direction::F2V => Modality::Face,
        }
    }

    pub fn candidate(self) -> Modality {
        self.anchor().other()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::V2F => "V2F",
            Direction::F2V => "F2V",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V2F" | "v2f" => Ok(Direction::V2F),
            "F2V" | "f2v" => Ok(Direction::F2V),
            other => Err(Error::Config(format!("unknown direction `{other}`"))),
        }
    }
}

/// Weights of both heads and, for the classifier objective, the match
/// classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub face: Head,
    pub voice: Head,
    pub classifier: Option<ClassifierHead>,
    pub objective: Objective,
    pub direction: Direction,
}

impl ModelParams {
    /// Glorot-uniform weights (`±√(6/(fan_in+fan_out))`), zero biases.
    pub fn init(
        feature_dim: usize,
        hidden_dim: usize,
        embed_dim: usize,
        objective: Objective,
        direction: Direction,
        seed: u64,
    ) -> Result<ModelParams> {
        if feature_dim == 0 || hidden_dim == 0 || embed_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        let mut rng = Rng::new(seed);
        let face = Head::glorot(feature_dim, hidden_dim, embed_dim, &mut rng);
        let voice = Head::glorot(feature_dim, hidden_dim, embed_dim, &mut rng);
        let classifier = (objective == Objective::Classifier)
            .then(|| ClassifierHead::glorot(2 * feature_dim, hidden_dim, &mut rng));
        Ok(ModelParams {
            face,
            voice,
            classifier,
            objective,
            direction,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.face.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.face.hidden_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.face.output_dim()
    }

    pub fn head(&self, modality: Modality) -> &Head {
        match modality {
            Modality::Face => &self.face,
            Modality::Voice => &self.voice,
        }
    }

    fn head_mut(&mut self, modality: Modality) -> &mut Head {
        match modality {
            Modality::Face => &mut self.face,
            Modality::Voice => &mut self.voice,
        }
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        for (_, block) in z.blocks_mut() {
            block.fill(0.0);
        }
        z
    }

    /// Every parameter block in checkpoint order, with a stable name.
    pub fn blocks(&self) -> Vec<(&'static str, &[f32])> {
        let mut out = Vec::with_capacity(14);
        self.face.push_blocks("face", &mut out);
        self.voice.push_blocks("voice", &mut out);
        if let Some(c) = &self.classifier {
            c.push_blocks(&mut out);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f32])> {
        let mut out = Vec::with_capacity(14);
        self.face.push_blocks_mut("face", &mut out);
        self.voice.push_blocks_mut("voice", &mut out);
        if let Some(c) = &mut self.classifier {
            c.push_blocks_mut(&mut out);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    /// Forward pass through the modality's head.
    pub fn embed(&self, modality: Modality, x: &[f32]) -> Result<Vec<f32>> {
        self.head(modality).forward(x)
    }

    /// Similarity of a face and a voice; higher means more likely the same
    /// identity. Distance objectives return `−‖f_F(face) − f_V(voice)‖₂`,
    /// the classifier returns its match probability.
    pub fn score(&self, face: &[f32], voice: &[f32]) -> Result<f32> {
        match self.objective {
            Objective::Classifier => Ok(self.classifier_forward(face, voice)?.0),
            Objective::Triplet | Objective::Contrastive => {
                let ef = self.embed(Modality::Face, face)?;
                let ev = self.embed(Modality::Voice, voice)?;
                Ok(-l2_distance(&ef, &ev)?)
            }
        }
    }

    pub fn classifier_head(&self) -> Result<&ClassifierHead> {
        match (&self.classifier, self.objective) {
            (Some(c), Objective::Classifier) => Ok(c),
            _ => Err(Error::WrongObjective {
                expected: Objective::Classifier.as_str(),
                found: self.objective.as_str(),
            }),
        }
    }

    /// `(p_match, p_nonmatch)` for a face/voice pair.
    pub fn classifier_forward(&self, face: &[f32], voice: &[f32]) -> Result<(f32, f32)> {
        let head = self.classifier_head()?;
        Ok(head.forward(face, voice)?.probs())
    }

    /// Match probability from precomputed first-layer partials (see
    /// [`ClassifierHead::first_layer_partial`]). Equals the first entry of
    /// [`classifier_forward`](Self::classifier_forward) on the same pair.
    pub fn classifier_match_from_partials(
        &self,
        face_partial: &[f32],
        voice_partial: &[f32],
    ) -> Result<f32> {
        let head = self.classifier_head()?;
        Ok(head
            .forward_from_partials(face_partial, voice_partial)?
            .probs()
            .0)
    }

    /// Cross-entropy of the classifier on one labelled pair, accumulating
    /// gradients into `grads`.
    pub fn classifier_backward(
        &self,
        face: &[f32],
        voice: &[f32],
        is_match: bool,
        scale: f32,
        grads: &mut ModelParams,
    ) -> Result<f32> {
        let head = self.classifier_head()?;
        let input = concat(face, voice, self.feature_dim())?;
        let trace = head.forward(face, voice)?;
        let (p_match, p_non) = trace.probs();
        let target = if is_match { 0 } else { 1 };
        let p = if is_match { p_match } else { p_non };
        let loss = -(p.max(f32::MIN_POSITIVE)).ln();
        let mut grad_logits = [p_match * scale, p_non * scale];
        grad_logits[target] -= scale;
        let g = grads
            .classifier
            .as_mut()
            .ok_or_else(|| Error::Config("gradient buffer lacks a classifier head".into()))?;
        head.backward(&input, &trace, &grad_logits, g)?;
        Ok(loss)
    }

    /// Loss of one training tuple under this model's objective.
    pub fn tuple_loss(&self, tuple: &TripletTuple<'_>, margin: f32) -> Result<f32> {
        let mut scratch = None;
        self.tuple_loss_impl(tuple, margin, 1.0, &mut scratch)
    }

    /// Loss of one training tuple, adding `scale ×` its parameter gradient
    /// into `grads`.
    pub fn tuple_backward(
        &self,
        tuple: &TripletTuple<'_>,
        margin: f32,
        scale: f32,
        grads: &mut ModelParams,
    ) -> Result<f32> {
        let mut g = Some(grads);
        self.tuple_loss_impl(tuple, margin, scale, &mut g)
    }

    fn tuple_loss_impl(
        &self,
        tuple: &TripletTuple<'_>,
        margin: f32,
        scale: f32,
        grads: &mut Option<&mut ModelParams>,
    ) -> Result<f32> {
        let anchor_mod = self.direction.anchor();
        let cand_mod = self.direction.candidate();
        if self.objective == Objective::Classifier {
            let (face_a, voice_a, face_n, voice_n) = match self.direction {
                Direction::V2F => (tuple.positive, tuple.anchor, tuple.negative, tuple.anchor),
                Direction::F2V => (tuple.anchor, tuple.positive, tuple.anchor, tuple.negative),
            };
            return match grads {
                Some(g) => {
                    let l1 = self.classifier_backward(face_a, voice_a, true, 0.5 * scale, g)?;
                    let l2 = self.classifier_backward(face_n, voice_n, false, 0.5 * scale, g)?;
                    Ok(0.5 * (l1 + l2))
                }
                None => {
                    let ce = |f: &[f32], v: &[f32], m: bool| -> Result<f32> {
                        let (pm, pn) = self.classifier_forward(f, v)?;
                        Ok(-(if m { pm } else { pn }).max(f32::MIN_POSITIVE).ln())
                    };
                    Ok(0.5 * (ce(face_a, voice_a, true)? + ce(face_n, voice_n, false)?))
                }
            };
        }

        let anchor_head = self.head(anchor_mod);
        let cand_head = self.head(cand_mod);
        let ta = anchor_head.trace(tuple.anchor)?;
        let tp = cand_head.trace(tuple.positive)?;
        let tn = cand_head.trace(tuple.negative)?;
        let (ea, ep, en) = (ta.output(), tp.output(), tn.output());
        let d_pos = l2_distance(ea, ep)?;
        let d_neg = l2_distance(ea, en)?;

        let (loss, dl_dpos, dl_dneg) = match self.objective {
            Objective::Triplet => {
                let loss = triplet_loss_from_distances(d_pos, d_neg);
                let g = triplet_distance_grad(d_pos, d_neg);
                (loss, g, -g)
            }
            Objective::Contrastive => {
                let lp = contrastive_from_distance(d_pos, true, margin);
                let ln = contrastive_from_distance(d_neg, false, margin);
                let gp = contrastive_distance_grad(d_pos, true, margin);
                let gn = contrastive_distance_grad(d_neg, false, margin);
                (0.5 * (lp + ln), 0.5 * gp, 0.5 * gn)
            }
            Objective::Classifier => unreachable!(),
        };

        if let Some(grads) = grads {
            let up = l2_distance_grad(ea, ep, d_pos);
            let un = l2_distance_grad(ea, en, d_neg);
            let (sp, sn) = (scale * dl_dpos, scale * dl_dneg);
            let g_anchor: Vec<f32> = up.iter().zip(&un).map(|(a, b)| sp * a + sn * b).collect();
            let g_pos: Vec<f32> = up.iter().map(|a| -sp * a).collect();
            let g_neg: Vec<f32> = un.iter().map(|a| -sn * a).collect();
            anchor_head.backward(tuple.anchor, &ta, &g_anchor, grads.head_mut(anchor_mod))?;
            cand_head.backward(tuple.positive, &tp, &g_pos, grads.head_mut(cand_mod))?;
            cand_head.backward(tuple.negative, &tn, &g_neg, grads.head_mut(cand_mod))?;
        }
        Ok(loss)
    }
}

fn concat(face: &[f32], voice: &[f32], dim: usize) -> Result<Vec<f32>> {
    check_dim("classifier face input", dim, face.len())?;
    check_dim("classifier voice input", dim, voice.len())?;
    let mut v = Vec::with_capacity(2 * dim);
    v.extend_from_slice(face);
    v.extend_from_slice(voice);
    Ok(v)
}

/// One anchor with a positive and a negative from the other modality.
#[derive(Debug, Clone, Copy)]
pub struct TripletTuple<'a> {
    pub anchor: &'a [f32],
    pub positive: &'a [f32],
    pub negative: &'a [f32],
    pub anchor_identity: &'a str,
    pub negative_identity: &'a str,
}

impl<'a> TripletTuple<'a> {
    pub fn new(
        anchor: &'a [f32],
        positive: &'a [f32],
        negative: &'a [f32],
        anchor_identity: &'a str,
        negative_identity: &'a str,
    ) -> Result<Self> {
        if anchor_identity == negative_identity {
            return Err(Error::Domain(format!(
                "negative shares the anchor identity `{anchor_identity}`"
            )));
        }
        Ok(Self {
            anchor,
            positive,
            negative,
            anchor_identity,
            negative_identity,
        })
    }
}

/// `‖softmax([d⁺, d⁻]) − [0, 1]‖₂²` for two distances.
pub fn triplet_loss_from_distances(d_pos: f32, d_neg: f32) -> f32 {
    triplet_loss_f64(d_pos as f64, d_neg as f64) as f32
}

fn triplet_loss_f64(d_pos: f64, d_neg: f64) -> f64 {
    let (s_pos, s_neg) = softmax2(d_pos, d_neg);
    s_pos * s_pos + (s_neg - 1.0) * (s_neg - 1.0)
}

/// `∂L/∂d⁺` of the triplet loss; `∂L/∂d⁻` is its negation. Since
/// `L = 2σ(d⁺ − d⁻)²`, this is `4σ²(1 − σ)`.
pub fn triplet_distance_grad(d_pos: f32, d_neg: f32) -> f32 {
    let s = logistic(d_pos as f64 - d_neg as f64);
    (4.0 * s * s * (1.0 - s)) as f32
}

/// Triplet loss of three embeddings: anchor, positive, negative.
pub fn triplet_loss(e_anchor: &[f32], e_pos: &[f32], e_neg: &[f32]) -> Result<f32> {
    let d_pos = l2_distance_f64(e_anchor, e_pos)?;
    let d_neg = l2_distance_f64(e_anchor, e_neg)?;
    Ok(triplet_loss_f64(d_pos, d_neg) as f32)
}

fn contrastive_from_distance(d: f32, same_identity: bool, margin: f32) -> f32 {
    if same_identity {
        d * d
    } else {
        let h = (margin - d).max(0.0);
        h * h
    }
}

fn contrastive_distance_grad(d: f32, same_identity: bool, margin: f32) -> f32 {
    if same_identity {
        2.0 * d
    } else if d < margin {
        -2.0 * (margin - d)
    } else {
        0.0
    }
}

/// Chopra-style contrastive loss: `d²` for a matching pair,
/// `max(0, margin − d)²` otherwise.
pub fn contrastive_loss(e1: &[f32], e2: &[f32], same_identity: bool, margin: f32) -> Result<f32> {
    if !(margin > 0.0) {
        return Err(Error::Domain(format!(
            "margin must be positive, got {margin}"
        )));
    }
    let d = l2_distance(e1, e2)?;
    Ok(contrastive_from_distance(d, same_identity, margin))
}
