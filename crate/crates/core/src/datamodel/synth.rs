use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{
    AgeGroup, ClipFeatures, ClipRecord, Dataset, Ethnicity, FeatureStore, Fluency, Gender, Manifest,
};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Name of the per-identity binary label drawn independently of the latent
/// identity vector. It is stored in `facial_attrs` and serves as the probe
/// negative control.
pub const RANDOM_ATTR: &str = "random_attr";

/// Configuration of the paired face/voice feature generator.
///
/// Each identity gets a latent `z ~ N(0, I)`. A clip's face feature is
/// `A·[√r·z ; √(1−r)·u] + ε` and its voice feature `B·[√r·z ; √(1−r)·w] + ε`,
/// where `r` is `shared_ratio`, `u` and `w` are per-clip private vectors,
/// `A` and `B` are fixed random maps and `ε ~ N(0, noise_sigma²)`.
///
/// Annotations are read off the latent: gender from the sign of `z[0]`, age
/// group from the standard-normal quartiles of `z[1]`, ethnicity (codes 5/2)
/// from the sign of `z[2]` and fluency from the sign of `z[3]`. Coordinates
/// beyond `latent_dim` are replaced by independent draws. Pitch follows
/// `z[0]`; loudness is independent noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_identities: usize,
    pub clips_per_identity: usize,
    pub latent_dim: usize,
    pub shared_ratio: f64,
    pub noise_sigma: f64,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_identities: 200,
            clips_per_identity: 10,
            latent_dim: 16,
            shared_ratio: 0.9,
            noise_sigma: 0.1,
            feature_dim: super::DEFAULT_FEATURE_DIM,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Desk-scale learnability preset: 250 identities (200 train + 50 test)
    /// of 10 clips with a 4-d latent buried in heavy noise, so matching is
    /// learnable but far from saturated.
    pub fn desk() -> Self {
        Self {
            n_identities: 250,
            clips_per_identity: 10,
            latent_dim: 4,
            shared_ratio: 0.9,
            noise_sigma: 2.0,
            feature_dim: 128,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_identities == 0 || self.clips_per_identity == 0 {
            return Err(Error::Config(
                "identity and clip counts must be positive".into(),
            ));
        }
        if self.latent_dim == 0 || self.feature_dim == 0 {
            return Err(Error::Config(
                "latent_dim and feature_dim must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.shared_ratio) {
            return Err(Error::Config(format!(
                "shared_ratio must lie in [0, 1], got {}",
                self.shared_ratio
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be nonnegative".into()));
        }
        Ok(())
    }
}

struct MixingMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl MixingMap {
    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let scale = 1.0 / (cols as f64).sqrt();
        let values = (0..rows * cols).map(|_| rng.normal() * scale).collect();
        Self { rows, cols, values }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                self.values[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

fn age_from_latent(v: f64) -> AgeGroup {
    const Q1: f64 = 0.674_489_750_196_082;
    if v < -Q1 {
        AgeGroup::Twenties
    } else if v < 0.0 {
        AgeGroup::Thirties
    } else if v < Q1 {
        AgeGroup::Forties
    } else {
        AgeGroup::Fifties
    }
}

/// Generates a synthetic dataset. Feature references point at
/// `features/<clip_id>.<modality>.f32`, the layout [`Dataset::write`] uses.
pub fn synth_generate(config: &SynthConfig) -> Result<Dataset> {
    Ok(synth_generate_with_latents(config)?.0)
}

/// [`synth_generate`] that also returns each identity's shared latent
/// vector, in identity order.
pub fn synth_generate_with_latents(config: &SynthConfig) -> Result<(Dataset, Vec<Vec<f64>>)> {
    config.validate()?;
    let mut root = Rng::new(config.seed);
    let mut map_rng = root.fork();
    let mut latent_rng = root.fork();
    let mut clip_rng = root.fork();
    let mut label_rng = root.fork();

    let k = config.latent_dim;
    let face_map = MixingMap::random(config.feature_dim, 2 * k, &mut map_rng);
    let voice_map = MixingMap::random(config.feature_dim, 2 * k, &mut map_rng);
    let shared = config.shared_ratio.sqrt();
    let private = (1.0 - config.shared_ratio).sqrt();

    let mut latents = Vec::with_capacity(config.n_identities);
    let mut records = Vec::with_capacity(config.n_identities * config.clips_per_identity);
    let mut clips = Vec::with_capacity(records.capacity());
    for i in 0..config.n_identities {
        let z: Vec<f64> = (0..k).map(|_| latent_rng.normal()).collect();
        let mut coord = |j: usize| if j < k { z[j] } else { label_rng.normal() };
        let (c0, c1, c2, c3) = (coord(0), coord(1), coord(2), coord(3));
        let gender = if c0 >= 0.0 {
            Gender::Male
        } else {
            Gender::Female
        };
        let age_group = age_from_latent(c1);
        let ethnicity = Ethnicity::new(if c2 >= 0.0 { 5 } else { 2 })?;
        let fluency = if c3 >= 0.0 {
            Fluency::Native
        } else {
            Fluency::NonNative
        };
        let random_attr = u8::from(label_rng.bernoulli(0.5));
        let identity_id = format!("id{i:05}");

        for c in 0..config.clips_per_identity {
            let mut input = vec![0.0; 2 * k];
            let mut feature = |map: &MixingMap, rng: &mut Rng| -> Vec<f32> {
                for j in 0..k {
                    input[j] = shared * z[j];
                    input[k + j] = private * rng.normal();
                }
                map.apply(&input)
                    .into_iter()
                    .map(|v| (v + config.noise_sigma * rng.normal()) as f32)
                    .collect()
            };
            let face = feature(&face_map, &mut clip_rng);
            let voice = feature(&voice_map, &mut clip_rng);
            let pitch = (165.0 - 45.0 * c0 + 5.0 * clip_rng.normal()).max(60.0);
            let loudness = -20.0 + 3.0 * clip_rng.normal();

            let clip_id = format!("{identity_id}_c{c:03}");
            records.push(ClipRecord {
                identity_id: identity_id.clone(),
                face_feature_ref: Some(PathBuf::from(format!("features/{clip_id}.face.f32"))),
                voice_feature_ref: Some(PathBuf::from(format!("features/{clip_id}.voice.f32"))),
                clip_id,
                face_asset_ref: None,
                voice_asset_ref: None,
                gender,
                ethnicity,
                fluency,
                age_group,
                pitch_hz: Some(pitch),
                loudness: Some(loudness),
                facial_attrs: BTreeMap::from([(RANDOM_ATTR.to_string(), random_attr)]),
            });
            clips.push(ClipFeatures {
                face: Some(face),
                voice: Some(voice),
            });
        }
        latents.push(z);
    }
    let dataset = Dataset {
        manifest: Manifest {
            records,
            feature_dim: config.feature_dim,
            root: PathBuf::new(),
        },
        features: FeatureStore { clips },
    };
    Ok((dataset, latents))
}
