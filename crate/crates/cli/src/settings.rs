use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Result;
use fvlab_core::config::KvConfig;

/// A problem with the invocation rather than the run: bad config values,
/// unknown keys, missing required settings. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Every key the pipeline subcommands read. One file can configure a whole
/// run, so each subcommand accepts (and ignores) the others' keys.
pub const KNOWN_KEYS: &[&str] = &[
    // shared
    "manifest",
    "seed",
    "out",
    "split",
    "checkpoint",
    "normalize_features",
    "direction",
    // synth
    "ids",
    "clips",
    "latent_dim",
    "shared",
    "noise",
    "feature_dim",
    // split
    "n_train",
    // train
    "iterations",
    "batch_size",
    "lr",
    "lr_decay_factor",
    "lr_decay_every",
    "beta1",
    "beta2",
    "epsilon",
    "hard_mining_start",
    "hard_mining_pool",
    "hard_mining_keep",
    "objective",
    "hidden_dim",
    "embed_dim",
    "margin",
    "checkpoint_every",
    // eval-match
    "grouping",
    "gefa_target",
    "trials_per_probe",
    "random_scores",
    // eval-recall
    "set_size",
    "ks",
    "repeats",
    // probe
    "attributes",
    "modality",
    "n_trials",
    "holdout_fraction",
    "svm_epochs",
    "svm_lr",
    "svm_l2",
    "probe_set",
    // export-embeddings
    "embeddings",
    // stats
    "input",
    "alpha",
    "tukey_draws",
    "mu0",
];

const PATH_KEYS: &[&str] = &[
    "manifest",
    "out",
    "split",
    "checkpoint",
    "embeddings",
    "input",
];

/// Layered settings: config file, then command-line flags. Every value a
/// subcommand resolves (defaults included) is recorded, so [`echo`](Self::echo)
/// writes the effective configuration.
#[derive(Debug)]
pub struct Settings {
    kv: KvConfig,
}

impl Settings {
    /// Paths in the file resolve against the file's directory; flags are
    /// taken as given.
    pub fn load(config: Option<&Path>, flags: Vec<(&'static str, Option<String>)>) -> Result<Self> {
        let mut kv = match config {
            Some(path) => {
                let mut kv =
                    KvConfig::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new(""));
                for key in PATH_KEYS {
                    if let Some(v) = kv.get(key) {
                        let joined = base.join(v).display().to_string();
                        kv.set(*key, joined);
                    }
                }
                kv
            }
            None => KvConfig::default(),
        };
        kv.check_known(KNOWN_KEYS)
            .map_err(|e| usage(e.to_string()))?;
        for (key, value) in flags {
            if let Some(v) = value {
                kv.set(key, v);
            }
        }
        Ok(Self { kv })
    }

    /// The value of `key`, or `default` (recorded) when unset.
    pub fn value<T: FromStr>(&mut self, key: &str, default: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        if self.kv.get(key).is_none() {
            self.kv.set(key, default);
        }
        parse(key, self.kv.get(key).expect("just set"))
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.kv.get(key).map(|v| parse(key, v)).transpose()
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.optional(key)?
            .ok_or_else(|| usage(format!("missing required setting `{key}`")))
    }

    pub fn path(&mut self, key: &str, default: impl AsRef<Path>) -> PathBuf {
        if self.kv.get(key).is_none() {
            self.kv.set(key, default.as_ref().display().to_string());
        }
        PathBuf::from(self.kv.get(key).expect("just set"))
    }

    pub fn out_dir(&mut self) -> PathBuf {
        self.path("out", "out")
    }

    /// Writes the effective configuration to `<out>/<command>.cfg`.
    pub fn echo(&mut self, command: &str) -> Result<PathBuf> {
        let out = self.out_dir();
        std::fs::create_dir_all(&out)?;
        let path = out.join(format!("{command}.cfg"));
        std::fs::write(&path, self.kv.render())?;
        Ok(path)
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| usage(format!("`{key} = {value}`: {e}")))
}

/// Comma-separated list.
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = T::Err;

    fn from_str(s: &str) -> Result<Self, T::Err> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(T::from_str)
            .collect::<Result<_, _>>()
            .map(List)
    }
}
