//! Clip manifests, raw feature files, identity-level splits and the
//! synthetic paired-feature generator.
//!
//! # Manifest format
//!
//! A manifest is UTF-8 JSON Lines. The first non-blank line is a header
//! object `{"fvlab_manifest": 1, "feature_dim": 512}`; every following
//! non-blank line is one [`ClipRecord`]. Feature references are paths
//! relative to the manifest's directory (absolute paths are used as-is).
//!
//! # Feature files
//!
//! One file per clip and modality, exactly `feature_dim` little-endian
//! `f32` values with no header.

mod annotations;
mod synth;

pub use annotations::{AgeGroup, Demographics, Ethnicity, Fluency, Gender};
pub use synth::{synth_generate, synth_generate_with_latents, SynthConfig, RANDOM_ATTR};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

pub const DEFAULT_FEATURE_DIM: usize = 512;
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Face,
    Voice,
}

impl Modality {
    pub fn other(self) -> Modality {
        match self {
            Modality::Face => Modality::Voice,
            Modality::Voice => Modality::Face,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Face => "face",
            Modality::Voice => "voice",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub identity_id: String,
    pub clip_id: String,
    #[serde(default)]
    pub face_feature_ref: Option<PathBuf>,
    #[serde(default)]
    pub voice_feature_ref: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_asset_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voice_asset_ref: Option<String>,
    pub gender: Gender,
    pub ethnicity: Ethnicity,
    pub fluency: Fluency,
    pub age_group: AgeGroup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loudness: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub facial_attrs: BTreeMap<String, u8>,
}

impl ClipRecord {
    pub fn demographics(&self) -> Demographics {
        Demographics {
            gender: self.gender,
            ethnicity: self.ethnicity,
            fluency: self.fluency,
            age_group: self.age_group,
        }
    }

    pub fn feature_ref(&self, modality: Modality) -> Option<&Path> {
        match modality {
            Modality::Face => self.face_feature_ref.as_deref(),
            Modality::Voice => self.voice_feature_ref.as_deref(),
        }
    }

    pub fn asset_ref(&self, modality: Modality) -> Option<&str> {
        match modality {
            Modality::Face => self.face_asset_ref.as_deref(),
            Modality::Voice => self.voice_asset_ref.as_deref(),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.identity_id.is_empty() || self.clip_id.is_empty() {
            return Err("identity_id and clip_id must be non-empty".into());
        }
        if self.face_feature_ref.is_none() && self.voice_feature_ref.is_none() {
            return Err(format!(
                "record `{}` has no feature reference",
                self.clip_id
            ));
        }
        if let Some(p) = self.pitch_hz {
            if !(p > 0.0 && p.is_finite()) {
                return Err(format!(
                    "record `{}`: pitch_hz must be positive",
                    self.clip_id
                ));
            }
        }
        if self.facial_attrs.values().any(|&v| v > 1) {
            return Err(format!(
                "record `{}`: facial attributes must be 0 or 1",
                self.clip_id
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    fvlab_manifest: u32,
    feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<ClipRecord>,
    pub feature_dim: usize,
    /// Directory relative feature references resolve against.
    pub root: PathBuf,
}

impl Manifest {
    /// Parses and validates a manifest, checking that every referenced
    /// feature file exists with exactly `feature_dim × 4` bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let file = fs::File::open(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut header: Option<ManifestHeader> = None;
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |e: serde_json::Error| Error::Parse {
                line: lineno,
                message: e.to_string(),
            };
            if header.is_none() {
                let h: ManifestHeader = serde_json::from_str(&line).map_err(parse_err)?;
                if h.fvlab_manifest != MANIFEST_VERSION || h.feature_dim == 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!(
                            "unsupported header (version {}, feature_dim {})",
                            h.fvlab_manifest, h.feature_dim
                        ),
                    });
                }
                header = Some(h);
                continue;
            }
            let rec: ClipRecord = serde_json::from_str(&line).map_err(parse_err)?;
            rec.validate().map_err(|message| Error::Parse {
                line: lineno,
                message,
            })?;
            if !seen.insert(rec.clip_id.clone()) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("duplicate clip_id `{}`", rec.clip_id),
                });
            }
            records.push(rec);
        }
        let Some(header) = header else {
            return Err(Error::NoRecords);
        };
        if records.is_empty() {
            return Err(Error::NoRecords);
        }
        let manifest = Manifest {
            records,
            feature_dim: header.feature_dim,
            root,
        };
        manifest.check_feature_files()?;
        Ok(manifest)
    }

    pub fn resolve(&self, reference: &Path) -> PathBuf {
        if reference.is_absolute() {
            reference.to_path_buf()
        } else {
            self.root.join(reference)
        }
    }

    fn check_feature_files(&self) -> Result<()> {
        let expected = (self.feature_dim * 4) as u64;
        for rec in &self.records {
            for modality in [Modality::Face, Modality::Voice] {
                let Some(r) = rec.feature_ref(modality) else {
                    continue;
                };
                let path = self.resolve(r);
                let meta = fs::metadata(&path).map_err(|_| Error::MissingFeature {
                    record: rec.clip_id.clone(),
                    path: path.clone(),
                })?;
                if meta.len() != expected {
                    return Err(Error::FeatureLength {
                        record: rec.clip_id.clone(),
                        path,
                        expected,
                        found: meta.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Reads every referenced feature file.
    pub fn load_features(&self) -> Result<FeatureStore> {
        let mut clips = Vec::with_capacity(self.records.len());
        for rec in &self.records {
            let read = |m: Modality| -> Result<Option<Vec<f32>>> {
                rec.feature_ref(m)
                    .map(|r| read_feature_file(&self.resolve(r), self.feature_dim, &rec.clip_id))
                    .transpose()
            };
            clips.push(ClipFeatures {
                face: read(Modality::Face)?,
                voice: read(Modality::Voice)?,
            });
        }
        Ok(FeatureStore { clips })
    }

    /// Sorted, de-duplicated identity list.
    pub fn identities(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| r.identity_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Writes the manifest file (header plus one line per record).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer(
            &mut out,
            &ManifestHeader {
                fvlab_manifest: MANIFEST_VERSION,
                feature_dim: self.feature_dim,
            },
        )?;
        out.write_all(b"\n")?;
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn read_feature_file(path: &Path, dim: usize, record: &str) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|_| Error::MissingFeature {
        record: record.to_string(),
        path: path.to_path_buf(),
    })?;
    if bytes.len() != dim * 4 {
        return Err(Error::FeatureLength {
            record: record.to_string(),
            path: path.to_path_buf(),
            expected: (dim * 4) as u64,
            found: bytes.len() as u64,
        });
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "record `{record}`: feature file {} holds non-finite values",
            path.display()
        )));
    }
    Ok(values)
}

pub fn write_feature_file(path: &Path, values: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClipFeatures {
    pub face: Option<Vec<f32>>,
    pub voice: Option<Vec<f32>>,
}

impl ClipFeatures {
    pub fn get(&self, modality: Modality) -> Option<&[f32]> {
        match modality {
            Modality::Face => self.face.as_deref(),
            Modality::Voice => self.voice.as_deref(),
        }
    }
}

/// In-memory features, parallel to `Manifest::records`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureStore {
    pub clips: Vec<ClipFeatures>,
}

/// A manifest together with its loaded features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub features: FeatureStore,
}

impl Dataset {
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
        let manifest = Manifest::load(manifest_path)?;
        let features = manifest.load_features()?;
        Ok(Dataset { manifest, features })
    }

    pub fn feature_dim(&self) -> usize {
        self.manifest.feature_dim
    }

    pub fn record(&self, index: usize) -> &ClipRecord {
        &self.manifest.records[index]
    }

    pub fn feature(&self, index: usize, modality: Modality) -> Option<&[f32]> {
        self.features.clips.get(index).and_then(|c| c.get(modality))
    }

    /// Record indices carrying `modality`, grouped by identity, restricted
    /// to `identities`. Identity order is sorted; clip order follows the
    /// manifest.
    pub fn clips_by_identity(
        &self,
        identities: &BTreeSet<String>,
        modality: Modality,
    ) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, rec) in self.manifest.records.iter().enumerate() {
            if identities.contains(&rec.identity_id) && self.feature(i, modality).is_some() {
                out.entry(rec.identity_id.clone()).or_default().push(i);
            }
        }
        out
    }

    /// Keeps only records of the given identities.
    pub fn subset(&self, identities: &BTreeSet<String>) -> Dataset {
        let (records, clips) = self
            .manifest
            .records
            .iter()
            .zip(&self.features.clips)
            .filter(|(r, _)| identities.contains(&r.identity_id))
            .map(|(r, c)| (r.clone(), c.clone()))
            .unzip();
        Dataset {
            manifest: Manifest {
                records,
                feature_dim: self.manifest.feature_dim,
                root: self.manifest.root.clone(),
            },
            features: FeatureStore { clips },
        }
    }

    /// Copy with every feature vector scaled to unit L2 norm (zero vectors
    /// are left unchanged).
    pub fn l2_normalized(&self) -> Dataset {
        let norm = |v: &Vec<f32>| {
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            if n > 0.0 {
                v.iter().map(|x| x / n).collect()
            } else {
                v.clone()
            }
        };
        let clips = self
            .features
            .clips
            .iter()
            .map(|c| ClipFeatures {
                face: c.face.as_ref().map(norm),
                voice: c.voice.as_ref().map(norm),
            })
            .collect();
        Dataset {
            manifest: self.manifest.clone(),
            features: FeatureStore { clips },
        }
    }

    /// Writes feature files under `dir/features/` and the manifest to
    /// `dir/<manifest_name>`, rewriting feature references to relative
    /// paths. Returns the manifest path.
    pub fn write(&self, dir: impl AsRef<Path>, manifest_name: &str) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("features"))?;
        let mut records = self.manifest.records.clone();
        for (rec, clip) in records.iter_mut().zip(&self.features.clips) {
            for modality in [Modality::Face, Modality::Voice] {
                let slot = match modality {
                    Modality::Face => &mut rec.face_feature_ref,
                    Modality::Voice => &mut rec.voice_feature_ref,
                };
                match clip.get(modality) {
                    Some(values) => {
                        let rel = PathBuf::from("features").join(format!(
                            "{}.{}.f32",
                            rec.clip_id,
                            modality.as_str()
                        ));
                        write_feature_file(&dir.join(&rel), values)?;
                        *slot = Some(rel);
                    }
                    None => *slot = None,
                }
            }
        }
        let manifest = Manifest {
            records,
            feature_dim: self.manifest.feature_dim,
            root: dir.to_path_buf(),
        };
        let path = dir.join(manifest_name);
        manifest.write(&path)?;
        Ok(path)
    }
}

/// Identity-disjoint train/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_identities: Vec<String>,
    pub test_identities: Vec<String>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn train_set(&self) -> BTreeSet<String> {
        self.train_identities.iter().cloned().collect()
    }

    pub fn test_set(&self) -> BTreeSet<String> {
        self.test_identities.iter().cloned().collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SplitSpec> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// Seeded shuffle of the sorted identity list; the first `n_train` go to
/// training, the rest to test. Splitting at identity level makes clip
/// leakage impossible.
pub fn split_by_identity(manifest: &Manifest, n_train: usize, seed: u64) -> Result<SplitSpec> {
    let mut ids = manifest.identities();
    if n_train == 0 || n_train >= ids.len() {
        return Err(Error::Config(format!(
            "n_train must lie in 1..{} (got {n_train})",
            ids.len()
        )));
    }
    Rng::new(seed).shuffle(&mut ids);
    let test = ids.split_off(n_train);
    Ok(SplitSpec {
        train_identities: ids,
        test_identities: test,
        seed,
    })
}
