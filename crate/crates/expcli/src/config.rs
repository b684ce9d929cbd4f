//! Experiment grid configuration, read from TOML.
//!
//! ```toml
//! name = "lava"
//! output_dir = "runs/lava"
//! seeds = [0, 1, 2, 3, 4]
//! variants = ["PPO", "EPPO", { variant = "EPPO", k = 2, label = "EPPO_K2" }]
//! eval_interval = 10000
//! eval_episodes = 20
//!
//! [env]
//! name = "dist-shift"
//!
//! [hyperparams]
//! total_env_steps = 200000
//! ```
//!
//! Omitted keys take the library defaults; `[env]` starts from the named
//! preset and applies any listed overrides.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use eppo_core::envs::{EnvName, EnvSpec};
use eppo_core::losses::Hyperparams;
use eppo_core::trainer::{AlgoConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: EnvName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rooms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_stream: Option<u64>,
}

impl EnvConfig {
    pub fn preset(name: EnvName) -> Self {
        Self {
            name,
            width: None,
            height: None,
            rooms: None,
            room_min: None,
            room_max: None,
            view_size: None,
            max_steps: None,
            layout_stream: None,
        }
    }

    pub fn resolve(&self) -> EnvSpec {
        let mut spec = match self.name {
            EnvName::DistShift => EnvSpec::dist_shift(),
            EnvName::MultiRoom => EnvSpec::multi_room(),
            EnvName::EmptyRoom => EnvSpec::empty_room(3),
        };
        let fields = [
            (self.width, &mut spec.width),
            (self.height, &mut spec.height),
            (self.rooms, &mut spec.rooms),
            (self.room_min, &mut spec.room_min),
            (self.room_max, &mut spec.room_max),
            (self.view_size, &mut spec.view_size),
            (self.max_steps, &mut spec.max_steps),
        ];
        for (value, slot) in fields {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(s) = self.layout_stream {
            spec.layout_stream = s;
        }
        spec
    }
}

/// A grid entry: a bare variant name or a table with per-entry overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VariantEntry {
    Name(String),
    Detailed {
        variant: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub env: EnvConfig,
    pub variants: Vec<VariantEntry>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub greedy_eval: bool,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Parallel runs; 0 means one per available core.
    #[serde(default)]
    pub workers: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_eval_interval() -> usize {
    10_000
}

fn default_eval_episodes() -> usize {
    20
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

/// One cell of the variant × seed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub run_id: String,
    pub label: String,
    pub algo: AlgoConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.grid()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Applies the output-directory environment override.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(dir) = std::env::var("EPPO_OUTPUT_DIR") {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
        self
    }

    /// Worker count: `EPPO_WORKERS`, then the config, then available cores.
    pub fn worker_count(&self) -> usize {
        let from_env = std::env::var("EPPO_WORKERS").ok().and_then(|v| v.parse::<usize>().ok());
        let n = from_env.filter(|&n| n > 0).unwrap_or(self.workers);
        if n > 0 {
            n
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    /// Expands variants × seeds in config order (variants outer).
    pub fn grid(&self) -> CliResult<Vec<RunSpec>> {
        if self.variants.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Config("variants and seeds must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(CliError::Config(format!("seed {dup} listed twice")));
        }
        let env = self.env.resolve();
        let mut labels = HashSet::new();
        let mut out = Vec::new();
        for entry in &self.variants {
            let (variant, label, hp) = self.resolve_entry(entry)?;
            if !labels.insert(label.clone()) {
                return Err(CliError::Config(format!("variant label {label:?} used twice")));
            }
            for &seed in &self.seeds {
                let mut algo = AlgoConfig::new(variant, env.clone(), seed);
                algo.hyperparams = hp.clone();
                algo.eval_interval = self.eval_interval;
                algo.eval_episodes = self.eval_episodes;
                algo.greedy_eval = self.greedy_eval;
                algo.hidden = self.hidden.clone();
                let run_id = format!("{label}-s{seed}");
                algo.checkpoint_dir = Some(self.output_dir.join("checkpoints").join(&run_id));
                algo.validate()?;
                out.push(RunSpec {
                    run_id,
                    label: label.clone(),
                    algo,
                });
            }
        }
        Ok(out)
    }

    fn resolve_entry(&self, entry: &VariantEntry) -> CliResult<(Variant, String, Hyperparams)> {
        let mut hp = self.hyperparams.clone();
        match entry {
            VariantEntry::Name(name) => {
                let v: Variant = name.parse()?;
                Ok((v, v.name().to_string(), hp))
            }
            VariantEntry::Detailed {
                variant,
                label,
                k,
                alpha,
                beta,
            } => {
                let v: Variant = variant.parse()?;
                if let Some(k) = k {
                    hp.k = *k;
                }
                if let Some(a) = alpha {
                    hp.alpha = *a;
                }
                if let Some(b) = beta {
                    hp.beta = *b;
                }
                let label = label.clone().unwrap_or_else(|| v.name().to_string());
                if label.is_empty() || label.contains([',', '"', '\n']) {
                    return Err(CliError::Config(format!("invalid label {label:?}")));
                }
                Ok((v, label, hp))
            }
        }
    }
}
