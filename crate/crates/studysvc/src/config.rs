use std::path::{Path, PathBuf};

use fvlab_core::config::KvConfig;

use crate::error::{Result, StudyError};

/// Service settings, read from a flat `key = value` file:
///
/// | key | default | meaning |
/// |-----|---------|---------|
/// | `bind` | `127.0.0.1` | listen address |
/// | `port` | `8080` | listen port (0 picks a free one) |
/// | `manifest` | required | stimulus manifest (JSONL) |
/// | `data_dir` | `study-data` | record logs |
/// | `media_dir` | manifest directory | root that asset refs resolve against |
/// | `ui_dir` | unset | static files mounted at `/` |
/// | `seed` | `0` | pairing pools, sessions, media tokens |
///
/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub manifest: PathBuf,
    pub data_dir: PathBuf,
    pub media_dir: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    pub seed: u64,
}

pub const KEYS: [&str; 7] = [
    "bind",
    "port",
    "manifest",
    "data_dir",
    "media_dir",
    "ui_dir",
    "seed",
];

impl ServiceConfig {
    pub fn from_kv(kv: &KvConfig, base_dir: &Path) -> Result<Self> {
        kv.check_known(&KEYS)?;
        let path = |key: &str| kv.get(key).map(|v| base_dir.join(v));
        Ok(Self {
            bind: kv.get("bind").unwrap_or("127.0.0.1").to_string(),
            port: kv.get_parsed("port")?.unwrap_or(8080),
            manifest: path("manifest")
                .ok_or_else(|| StudyError::BadRequest("config needs `manifest`".into()))?,
            data_dir: path("data_dir").unwrap_or_else(|| base_dir.join("study-data")),
            media_dir: path("media_dir"),
            ui_dir: path("ui_dir"),
            seed: kv.get_parsed("seed")?.unwrap_or(0),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_kv(&KvConfig::load(path)?, base)
    }

    pub fn media_root(&self) -> PathBuf {
        self.media_dir.clone().unwrap_or_else(|| {
            self.manifest
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let kv = KvConfig::parse("manifest = stim/manifest.jsonl\nport = 0\n").unwrap();
        let c = ServiceConfig::from_kv(&kv, Path::new("/srv/study")).unwrap();
        assert_eq!(c.manifest, Path::new("/srv/study/stim/manifest.jsonl"));
        assert_eq!(c.data_dir, Path::new("/srv/study/study-data"));
        assert_eq!(c.media_root(), Path::new("/srv/study/stim"));
        assert_eq!((c.port, c.seed, c.bind.as_str()), (0, 0, "127.0.0.1"));
        assert!(
            ServiceConfig::from_kv(&KvConfig::parse("port = 1").unwrap(), Path::new("/")).is_err()
        );
        assert!(ServiceConfig::from_kv(
            &KvConfig::parse("manifest = m\ncolour = red").unwrap(),
            Path::new("/")
        )
        .is_err());
    }
}
