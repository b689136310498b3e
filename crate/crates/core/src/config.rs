//! Shared run configuration: a flat `key = value` file, overridden by
//! command-line flags.
//!
//! ```text
//! # facetsearch.conf
//! catalog = data/catalog.jsonl
//! index = out/catalog.idx
//! nprobe = 8
//! no_filters = false
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "FACETSEARCH_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: line {line}: {reason}")]
    Invalid { path: String, line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub catalog: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub adapter: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub judgments: Option<PathBuf>,
    pub dim: Option<usize>,
    pub nlist: Option<usize>,
    pub nprobe: Option<usize>,
    pub k: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub no_filters: Option<bool>,
    pub import_embeddings: Option<bool>,
}

fn value<T: FromStr>(raw: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| format!("bad value {raw:?}: {e}"))
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let invalid = |reason: String| ConfigError::Invalid {
                path: origin.to_string(),
                line: idx + 1,
                reason,
            };
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| invalid("expected key = value".into()))?;
            let (key, raw) = (key.trim(), raw.trim());
            let path = || Some(PathBuf::from(raw));
            match key {
                "catalog" => c.catalog = path(),
                "vectors" => c.vectors = path(),
                "index" => c.index = path(),
                "adapter" => c.adapter = path(),
                "thresholds" => c.thresholds = path(),
                "judgments" => c.judgments = path(),
                "dim" => c.dim = Some(value(raw).map_err(invalid)?),
                "nlist" => c.nlist = Some(value(raw).map_err(invalid)?),
                "nprobe" => c.nprobe = Some(value(raw).map_err(invalid)?),
                "k" => c.k = Some(value(raw).map_err(invalid)?),
                "batch_size" => c.batch_size = Some(value(raw).map_err(invalid)?),
                "lr" => c.lr = Some(value(raw).map_err(invalid)?),
                "epochs" => c.epochs = Some(value(raw).map_err(invalid)?),
                "seed" => c.seed = Some(value(raw).map_err(invalid)?),
                "no_filters" => c.no_filters = Some(value(raw).map_err(invalid)?),
                "import_embeddings" => c.import_embeddings = Some(value(raw).map_err(invalid)?),
                other => return Err(invalid(format!("unknown key {other:?}"))),
            }
        }
        c.check(origin)?;
        Ok(c)
    }

    fn check(&self, origin: &str) -> Result<(), ConfigError> {
        let invalid = |reason: &str| {
            Err(ConfigError::Invalid {
                path: origin.to_string(),
                line: 0,
                reason: reason.to_string(),
            })
        };
        if self.dim.is_some_and(|d| d < 8) {
            return invalid("dim must be >= 8");
        }
        if self.nlist == Some(0) || self.nprobe == Some(0) || self.k == Some(0) {
            return invalid("nlist, nprobe and k must be >= 1");
        }
        if self.batch_size.is_some_and(|b| b < 2) {
            return invalid("batch_size must be >= 2");
        }
        if self.lr.is_some_and(|lr| !(lr >= 0.0 && lr.is_finite())) {
            return invalid("lr must be finite and non-negative");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: origin.clone(),
            source,
        })?;
        Self::parse(&text, &origin)
    }

    /// The file named by `FACETSEARCH_CONFIG`, or an empty config when the
    /// variable is unset or empty.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    /// Fields set in `self` win; the rest come from `fallback`.
    pub fn or(self, fallback: RunConfig) -> RunConfig {
        RunConfig {
            catalog: self.catalog.or(fallback.catalog),
            vectors: self.vectors.or(fallback.vectors),
            index: self.index.or(fallback.index),
            adapter: self.adapter.or(fallback.adapter),
            thresholds: self.thresholds.or(fallback.thresholds),
            judgments: self.judgments.or(fallback.judgments),
            dim: self.dim.or(fallback.dim),
            nlist: self.nlist.or(fallback.nlist),
            nprobe: self.nprobe.or(fallback.nprobe),
            k: self.k.or(fallback.k),
            batch_size: self.batch_size.or(fallback.batch_size),
            lr: self.lr.or(fallback.lr),
            epochs: self.epochs.or(fallback.epochs),
            seed: self.seed.or(fallback.seed),
            no_filters: self.no_filters.or(fallback.no_filters),
            import_embeddings: self.import_embeddings.or(fallback.import_embeddings),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let file = RunConfig::parse("# c\ncatalog = a.jsonl\nnprobe=4\nlr = 0.25\nno_filters = true\n", "t").unwrap();
        assert_eq!(file.catalog.as_deref(), Some(Path::new("a.jsonl")));
        assert_eq!(file.nprobe, Some(4));
        assert_eq!(file.no_filters, Some(true));
        let flags = RunConfig {
            nprobe: Some(9),
            ..Default::default()
        };
        let merged = flags.or(file);
        assert_eq!(merged.nprobe, Some(9));
        assert_eq!(merged.lr, Some(0.25));
    }

    #[test]
    fn rejects_bad_input() {
        for text in ["colour = red", "nprobe = many", "just a line", "nprobe = 0", "dim = 4"] {
            assert!(RunConfig::parse(text, "t").is_err(), "{text}");
        }
        let e = RunConfig::parse("k = 3\nwhat = 1", "cfg").unwrap_err();
        assert!(e.to_string().contains("line 2"));
    }
}
