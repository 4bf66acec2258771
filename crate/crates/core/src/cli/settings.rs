use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::corpus::SyntheticConfig;
use crate::error::{Error, Result};
use crate::trainer::{TrainConfig, TRAIN_KEYS};

/// Keys that name files or experiment inputs rather than training settings.
pub const RUN_KEYS: &[&str] = &[
    "train",
    "dev",
    "test",
    "data",
    "embeddings",
    "checkpoint",
    "out",
    "fractions",
    "seeds",
    "variants",
    "n_train",
    "n_dev",
    "n_test",
    "vocab_size",
    "n_triggers",
    "max_len",
    "positive_rate",
];

fn known(key: &str) -> bool {
    TRAIN_KEYS.contains(&key) || RUN_KEYS.contains(&key)
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// unknown and repeated keys are errors.
pub fn parse_config_text(text: &str, source: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("{source}:{}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if !known(k) {
            return Err(Error::config(format!(
                "{source}:{}: unknown key {k:?}",
                i + 1
            )));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::config(format!(
                "{source}:{}: key {k:?} given twice",
                i + 1
            )));
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text, &path.display().to_string())
}

/// Resolved `key = value` settings for one command: built-in defaults,
/// overridden by the config file, overridden by command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(
        file: BTreeMap<String, String>,
        flags: BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut values = file;
        for (k, v) in flags {
            if !known(&k) {
                return Err(Error::config(format!("unknown key {k:?}")));
            }
            values.insert(k, v);
        }
        Ok(Settings { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| Error::config(format!("missing required setting `{key}`")))
    }

    /// Training configuration. Group presets are applied before the
    /// individual keys they cover.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        for group in ["preset", "sizes"] {
            if let Some(v) = self.get(group) {
                cfg.set(group, v)?;
            }
        }
        for &key in TRAIN_KEYS
            .iter()
            .filter(|k| !matches!(**k, "preset" | "sizes"))
        {
            if let Some(v) = self.get(key) {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synthetic_config(&self) -> Result<SyntheticConfig> {
        let mut c = SyntheticConfig::default();
        let num = |key: &str, target: &mut usize| -> Result<()> {
            if let Some(v) = self.get(key) {
                *target = v
                    .parse()
                    .map_err(|_| Error::config(format!("invalid value {v:?} for {key}")))?;
            }
            Ok(())
        };
        num("n_train", &mut c.n_train)?;
        num("n_dev", &mut c.n_dev)?;
        num("n_test", &mut c.n_test)?;
        num("vocab_size", &mut c.vocab_size)?;
        num("n_triggers", &mut c.n_triggers)?;
        num("max_len", &mut c.max_len)?;
        if let Some(v) = self.get("positive_rate") {
            c.positive_rate = v
                .parse()
                .map_err(|_| Error::config(format!("invalid value {v:?} for positive_rate")))?;
        }
        if let Some(v) = self.get("seed") {
            c.seed = v
                .parse()
                .map_err(|_| Error::config(format!("invalid value {v:?} for seed")))?;
        }
        Ok(c)
    }

    /// Comma-separated list under `key`, or `default` when unset.
    pub fn list<T: std::str::FromStr>(&self, key: &str, default: &str) -> Result<Vec<T>> {
        let raw = self.get(key).unwrap_or(default);
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::config(format!("invalid entry {s:?} in {key}")))
            })
            .collect()
    }

    /// Every setting that was given, followed by the fully resolved training
    /// configuration when one applies.
    pub fn echo(&self, train: Option<&TrainConfig>) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            if RUN_KEYS.contains(&k.as_str()) {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        if let Some(cfg) = train {
            out.push_str(&cfg.to_text());
        } else {
            for (k, v) in &self.values {
                if TRAIN_KEYS.contains(&k.as_str()) {
                    out.push_str(&format!("{k} = {v}\n"));
                }
            }
        }
        out
    }
}
