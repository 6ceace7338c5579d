//! Run configuration: paper-default hyperparameters, a flat `key=value`
//! config file, command-line overrides, and the effective-config echo that
//! makes every run reproducible from its output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::attention::Pooling;
use crate::corpus::{DEFAULT_MAX_DOC_LEN, DEFAULT_MIN_COUNT};
use crate::error::{MatanError, Result};
use crate::glove::{
    GloveConfig, DEFAULT_ALPHA, DEFAULT_DIM, DEFAULT_EPOCHS, DEFAULT_GLOVE_LR, DEFAULT_WINDOW,
    DEFAULT_X_MAX,
};
use crate::trainer::{
    PositiveSampling, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_K, DEFAULT_LR, DEFAULT_N_PAIRS,
};

/// Every tunable of the pipeline, fully resolved. Defaults reproduce the
/// reference experimental setup, so an evaluation run needs only paths.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub docs: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub dim: usize,
    pub window: usize,
    pub x_max: f64,
    pub glove_epochs: usize,
    pub glove_lr: f64,
    pub min_count: usize,
    pub max_doc_len: usize,
    pub k: usize,
    pub n_pairs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seeds: Vec<u64>,
    pub full_corpus_embeddings: bool,
    pub pooling: Pooling,
    pub positive_sampling: PositiveSampling,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            docs: None,
            edges: None,
            embeddings: None,
            model: None,
            out: None,
            dim: DEFAULT_DIM,
            window: DEFAULT_WINDOW,
            x_max: DEFAULT_X_MAX,
            glove_epochs: DEFAULT_EPOCHS,
            glove_lr: DEFAULT_GLOVE_LR,
            min_count: DEFAULT_MIN_COUNT,
            max_doc_len: DEFAULT_MAX_DOC_LEN,
            k: DEFAULT_K,
            n_pairs: DEFAULT_N_PAIRS,
            lr: DEFAULT_LR,
            batch_size: DEFAULT_BATCH_SIZE,
            train_fraction: 0.5,
            seeds: vec![0, 1, 2, 3, 4],
            full_corpus_embeddings: false,
            pooling: Pooling::Mean,
            positive_sampling: PositiveSampling::UniformEdges,
        }
    }
}

pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|_| MatanError::Invalid(format!("bad seed {p:?} in list {s:?}")))
        })
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        return Err(MatanError::Invalid("empty seed list".into()));
    }
    Ok(seeds)
}

impl RunConfig {
    /// Apply one `key=value` assignment. Unknown keys are rejected.
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| MatanError::Invalid(format!("bad value {v:?} for key {key:?}")))
        }
        match key {
            "docs" => self.docs = Some(PathBuf::from(value)),
            "edges" => self.edges = Some(PathBuf::from(value)),
            "embeddings" => self.embeddings = Some(PathBuf::from(value)),
            "model" => self.model = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "dim" => self.dim = num(key, value)?,
            "window" => self.window = num(key, value)?,
            "x_max" => self.x_max = num(key, value)?,
            "glove_epochs" => self.glove_epochs = num(key, value)?,
            "glove_lr" => self.glove_lr = num(key, value)?,
            "min_count" => self.min_count = num(key, value)?,
            "max_doc_len" => self.max_doc_len = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "n_pairs" => self.n_pairs = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "train_fraction" => self.train_fraction = num(key, value)?,
            "seeds" => self.seeds = parse_seed_list(value)?,
            "full_corpus_embeddings" => self.full_corpus_embeddings = num(key, value)?,
            "pooling" => self.pooling = Pooling::parse(value)?,
            "positive_sampling" => self.positive_sampling = PositiveSampling::parse(value)?,
            other => {
                return Err(MatanError::Invalid(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Load `key=value` lines (blank lines and `#` comments allowed) on top
    /// of the defaults.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| MatanError::io(path, e))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                MatanError::parse(path, lineno + 1, "expected key=value")
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| MatanError::parse(path, lineno + 1, e.to_string()))?;
        }
        Ok(())
    }

    /// Flat, sorted `key=value` rendering of the effective configuration.
    pub fn render(&self) -> String {
        let path_str = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        };
        let seeds = self
            .seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut kv = BTreeMap::new();
        kv.insert("docs", path_str(&self.docs));
        kv.insert("edges", path_str(&self.edges));
        kv.insert("embeddings", path_str(&self.embeddings));
        kv.insert("model", path_str(&self.model));
        kv.insert("out", path_str(&self.out));
        kv.insert("dim", self.dim.to_string());
        kv.insert("window", self.window.to_string());
        kv.insert("x_max", self.x_max.to_string());
        kv.insert("glove_epochs", self.glove_epochs.to_string());
        kv.insert("glove_lr", self.glove_lr.to_string());
        kv.insert("min_count", self.min_count.to_string());
        kv.insert("max_doc_len", self.max_doc_len.to_string());
        kv.insert("k", self.k.to_string());
        kv.insert("n_pairs", self.n_pairs.to_string());
        kv.insert("lr", self.lr.to_string());
        kv.insert("batch_size", self.batch_size.to_string());
        kv.insert("train_fraction", self.train_fraction.to_string());
        kv.insert("seeds", seeds);
        kv.insert("full_corpus_embeddings", self.full_corpus_embeddings.to_string());
        kv.insert("pooling", self.pooling.as_str().to_string());
        kv.insert("positive_sampling", self.positive_sampling.as_str().to_string());
        let mut out = String::new();
        for (k, v) in kv {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }

    /// Write the effective configuration into the output directory.
    pub fn echo_to(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir).map_err(|e| MatanError::io(out_dir, e))?;
        let path = out_dir.join("effective-config.txt");
        fs::write(&path, self.render()).map_err(|e| MatanError::io(&path, e))
    }

    pub fn glove_config(&self, seed: u64) -> GloveConfig {
        GloveConfig {
            dim: self.dim,
            window: self.window,
            x_max: self.x_max,
            alpha: DEFAULT_ALPHA,
            epochs: self.glove_epochs,
            lr: self.glove_lr,
            seed,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            k: self.k,
            n_pairs: self.n_pairs,
            lr: self.lr,
            batch_size: self.batch_size,
            seed,
            pooling: self.pooling,
            positive_sampling: self.positive_sampling,
            ..TrainConfig::default()
        }
    }
}
