//! Experiment configuration: a TOML file plus flag overrides, resolved once
//! and echoed verbatim into every output manifest.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable prepended to a relative `paths.output_dir`.
pub const OUTPUT_ROOT_ENV: &str = "KGE_OUTPUT_ROOT";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub pmi: PmiConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    /// Textual triples for PMI extraction; optional when only training with
    /// lambda_c = 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub textual: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PmiConfig {
    pub smoothing: f64,
    pub clip_negative: bool,
    /// Count each textual triple (true) or each distinct pair once (false).
    pub count_multiplicity: bool,
}

impl Default for PmiConfig {
    fn default() -> Self {
        PmiConfig {
            smoothing: 0.0,
            clip_negative: false,
            count_multiplicity: true,
        }
    }
}

/// Either a positive batch size or the string "full".
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum BatchSizeField {
    Size(usize),
    Named(String),
}

impl BatchSizeField {
    pub fn to_batch_size(&self) -> Result<kge::BatchSize, CliError> {
        match self {
            BatchSizeField::Size(0) => {
                Err(CliError::Config("batch_size must be positive".to_string()))
            }
            BatchSizeField::Size(n) => Ok(kge::BatchSize::Mini(*n)),
            BatchSizeField::Named(s) if s == "full" => Ok(kge::BatchSize::Full),
            BatchSizeField::Named(s) => Err(CliError::Config(format!(
                "batch_size must be a positive integer or \"full\", got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for BatchSizeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSizeField::Size(n) => write!(f, "{n}"),
            BatchSizeField::Named(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub dim: usize,
    pub lambda_c: f64,
    pub lambda_r: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub grad_tolerance: f64,
    pub init_stddev: f64,
    pub batch_size: BatchSizeField,
    pub zero_pairs_per_entry: usize,
    pub resample_negatives: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = kge::TrainConfig::default();
        TrainSection {
            dim: d.dim,
            lambda_c: d.lambda_c,
            lambda_r: d.lambda_r,
            learning_rate: d.learning_rate,
            max_epochs: d.max_epochs,
            grad_tolerance: d.grad_tolerance,
            init_stddev: d.init_stddev,
            batch_size: BatchSizeField::Named("full".to_string()),
            zero_pairs_per_entry: d.zero_pairs_per_entry,
            resample_negatives: d.resample_negatives,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> Result<kge::TrainConfig, CliError> {
        Ok(kge::TrainConfig {
            dim: self.dim,
            lambda_c: self.lambda_c,
            lambda_r: self.lambda_r,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            grad_tolerance: self.grad_tolerance,
            seed,
            init_stddev: self.init_stddev,
            batch_size: self.batch_size.to_batch_size()?,
            zero_pairs_per_entry: self.zero_pairs_per_entry,
            resample_negatives: self.resample_negatives,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// k for Coherence@k, AutoWI@k, and intrusion tasks.
    pub k: usize,
    /// Dimensions sampled for the word-intrusion export.
    pub intrusion_dims: usize,
    pub filtered_ranking: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            k: 5,
            intrusion_dims: 25,
            filtered_ranking: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub num_seeds: usize,
    pub seed_base: u64,
    /// Parallel worker slots for independent seeds.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            num_seeds: 5,
            seed_base: 42,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub lambda_c: Vec<f64>,
    pub lambda_r: Vec<f64>,
    pub dim: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            lambda_c: vec![10.0, 1.0, 0.1, 0.01],
            lambda_r: vec![10.0, 1.0, 0.1, 0.01],
            dim: vec![50, 100, 200],
        }
    }
}

/// Flag overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lambda_c: Option<f64>,
    pub lambda_r: Option<f64>,
    pub dim: Option<usize>,
    pub filtered_ranking: bool,
}

impl ExperimentConfig {
    /// Load the TOML file, apply flag overrides and the output-root
    /// environment variable, and validate basic shape. Input-path existence
    /// is checked per command.
    pub fn resolve(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;

        if let Some(seed) = overrides.seed {
            config.run.seed_base = seed;
        }
        if let Some(lc) = overrides.lambda_c {
            config.train.lambda_c = lc;
        }
        if let Some(lr) = overrides.lambda_r {
            config.train.lambda_r = lr;
        }
        if let Some(dim) = overrides.dim {
            config.train.dim = dim;
        }
        if overrides.filtered_ranking {
            config.eval.filtered_ranking = true;
        }

        if config.paths.output_dir.is_relative() {
            if let Ok(root) = std::env::var(OUTPUT_ROOT_ENV) {
                config.paths.output_dir = PathBuf::from(root).join(&config.paths.output_dir);
            }
        }

        if config.run.num_seeds == 0 {
            return Err(CliError::Config("run.num_seeds must be positive".to_string()));
        }
        if config.run.workers == 0 {
            return Err(CliError::Config("run.workers must be positive".to_string()));
        }
        if config.eval.k < 2 {
            return Err(CliError::Config("eval.k must be at least 2".to_string()));
        }
        config.train.to_train_config(0)?.validate().map_err(|e| {
            CliError::Config(e.to_string())
        })?;
        Ok(config)
    }

    pub fn require_inputs(&self, with_textual: bool) -> Result<(), CliError> {
        let mut required: Vec<(&str, &PathBuf)> = vec![
            ("paths.train", &self.paths.train),
            ("paths.valid", &self.paths.valid),
            ("paths.test", &self.paths.test),
        ];
        let textual;
        if with_textual {
            textual = self.paths.textual.clone().ok_or_else(|| {
                CliError::Config("paths.textual is required for this command".to_string())
            })?;
            required.push(("paths.textual", &textual));
        }
        for (name, p) in required {
            if !p.exists() {
                return Err(CliError::Config(format!(
                    "{name} = {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn pmi_path(&self) -> PathBuf {
        self.paths.output_dir.join("pmi.bin")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.paths.output_dir.join("manifest.json")
    }

    /// Canonical JSON rendering used for both the manifest echo and hashing.
    pub fn canonical_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.canonical_json()).expect("config serializes");
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.run.num_seeds as u64)
            .map(|i| self.run.seed_base + i)
            .collect()
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
