//! Experiment orchestration: config files, deterministic multi-seed
//! training runs, CSV/metadata output.
//!
//! A run is described by a TOML file:
//!
//! ```toml
//! map = "map.txt"
//! prm = "prm.txt"
//! tlcd = "tlcd.txt"            # optional; omit for the plain machine
//! redundant_tlcds = []         # optional extra diagrams, multiplied in order
//! gamma = 0.9
//! alpha = 0.1
//! epsilon = 0.1
//! max_episode_steps = 400
//! total_steps = 150000
//! window = 1000
//! sample_interval = 100
//! seeds = [1, 2, 3]
//! out = "out/coffee"
//! ```
//!
//! Relative paths resolve against the config file's directory. Identical
//! configs produce byte-identical CSV output: seeds run independently (in
//! parallel) from their own deterministically seeded generators, and the
//! averaged curve folds seeds in their listed order.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{EnvError, Gridworld};
use crate::learn::{train_curve, Curve, LearnParams, Task};
use crate::ltlf::{compile_tlcd, CompileError, ParseError, Tlcd, DEFAULT_MAX_STATES};
use crate::machines::{build_causal_prm, MachineError, Prm};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("map: {0}")]
    Env(#[from] EnvError),
    #[error("machine: {0}")]
    Machine(#[from] MachineError),
    #[error("diagram: {0}")]
    Diagram(#[from] ParseError),
    #[error("compile: {0}")]
    Compile(#[from] CompileError),
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub map: String,
    pub prm: String,
    #[serde(default)]
    pub tlcd: Option<String>,
    #[serde(default)]
    pub redundant_tlcds: Vec<String>,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::max_episode_steps")]
    pub max_episode_steps: usize,
    pub total_steps: u64,
    #[serde(default = "defaults::window")]
    pub window: usize,
    #[serde(default = "defaults::sample_interval")]
    pub sample_interval: u64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default = "defaults::expected_update")]
    pub expected_update: bool,
}

mod defaults {
    pub fn gamma() -> f64 {
        0.9
    }
    pub fn alpha() -> f64 {
        0.1
    }
    pub fn epsilon() -> f64 {
        0.1
    }
    pub fn max_episode_steps() -> usize {
        400
    }
    pub fn window() -> usize {
        1000
    }
    pub fn sample_interval() -> u64 {
        100
    }
    pub fn expected_update() -> bool {
        true
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = read(path)?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| HarnessError::Config {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })?;
        cfg.validate().map_err(|msg| HarnessError::Config {
            path: path.to_path_buf(),
            msg,
        })?;
        // Resolve relative paths against the config's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &str| -> String {
            let pb = Path::new(p);
            if pb.is_absolute() {
                p.to_string()
            } else {
                base.join(pb).to_string_lossy().into_owned()
            }
        };
        cfg.map = resolve(&cfg.map);
        cfg.prm = resolve(&cfg.prm);
        cfg.tlcd = cfg.tlcd.as_deref().map(resolve);
        cfg.redundant_tlcds = cfg.redundant_tlcds.iter().map(|p| resolve(p)).collect();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma {} outside (0, 1)", self.gamma));
        }
        if self.seeds.is_empty() {
            return Err("no seeds listed".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err("duplicate seeds".into());
        }
        if self.window == 0 || self.sample_interval == 0 {
            return Err("window and sample_interval must be positive".into());
        }
        if self.total_steps < self.window as u64 {
            return Err("total_steps smaller than the averaging window".into());
        }
        Ok(())
    }

    pub fn params(&self) -> LearnParams {
        LearnParams {
            gamma: self.gamma,
            alpha: self.alpha,
            epsilon: self.epsilon,
            max_episode_steps: self.max_episode_steps,
            expected_update: self.expected_update,
        }
    }
}

/// The loaded pieces of an experiment: environment, task machine, and the
/// machine actually trained on (the causal product when diagrams are given).
pub struct Experiment {
    pub env: Gridworld,
    pub base: Prm,
    pub machine: Prm,
    pub diagrams: Vec<Tlcd>,
}

/// Loads the environment and machine and folds in the causal diagrams:
/// the first diagram builds the causal product of the base machine, and
/// every further diagram multiplies the result again.
pub fn load_experiment(cfg: &ExperimentConfig) -> Result<Experiment, HarnessError> {
    let env = Gridworld::from_text(&read(Path::new(&cfg.map))?)?;
    let base = Prm::from_text(&read(Path::new(&cfg.prm))?)?;
    let mut diagrams = Vec::new();
    if let Some(p) = &cfg.tlcd {
        diagrams.push(Tlcd::parse(&read(Path::new(p))?)?);
    }
    for p in &cfg.redundant_tlcds {
        diagrams.push(Tlcd::parse(&read(Path::new(p))?)?);
    }
    let mut machine = base.clone();
    for cd in &diagrams {
        let dfa = compile_tlcd(cd, DEFAULT_MAX_STATES)?;
        machine = build_causal_prm(&machine, &dfa, cfg.gamma).product.prm;
    }
    Ok(Experiment {
        env,
        base,
        machine,
        diagrams,
    })
}

pub struct TrainOutput {
    pub per_seed: Vec<(u64, Curve)>,
    pub averaged: Curve,
}

/// Runs every seed (in parallel, deterministically) and averages curves
/// pointwise in seed-list order.
pub fn run_training(exp: &Experiment, cfg: &ExperimentConfig) -> TrainOutput {
    let task = Task::new(&exp.env, &exp.machine);
    let params = cfg.params();
    let per_seed: Vec<(u64, Curve)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            (
                seed,
                train_curve(
                    &task,
                    params,
                    cfg.total_steps,
                    cfg.window,
                    cfg.sample_interval,
                    seed,
                ),
            )
        })
        .collect();
    let n_points = per_seed.iter().map(|(_, c)| c.len()).min().unwrap_or(0);
    let averaged = (0..n_points)
        .map(|i| {
            let step = per_seed[0].1[i].0;
            let sum: f64 = per_seed.iter().map(|(_, c)| c[i].1).sum();
            (step, sum / per_seed.len() as f64)
        })
        .collect();
    TrainOutput { per_seed, averaged }
}

pub fn curve_to_csv(curve: &Curve) -> String {
    let mut out = String::from("Step,Value\n");
    for &(step, value) in curve {
        out.push_str(&format!("{step},{value}\n"));
    }
    out
}

/// Writes `<out>_avg.csv`, `<out>_seed<k>.csv`, and `<out>_meta.toml`.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    output: &TrainOutput,
    out_prefix: &str,
) -> Result<Vec<PathBuf>, HarnessError> {
    let prefix = Path::new(out_prefix);
    if let Some(dir) = prefix.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
    }
    let mut written = Vec::new();
    let mut write = |path: PathBuf, contents: String| -> Result<(), HarnessError> {
        fs::write(&path, contents).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
        Ok(())
    };
    write(
        PathBuf::from(format!("{out_prefix}_avg.csv")),
        curve_to_csv(&output.averaged),
    )?;
    for (seed, curve) in &output.per_seed {
        write(
            PathBuf::from(format!("{out_prefix}_seed{seed}.csv")),
            curve_to_csv(curve),
        )?;
    }
    let meta = toml::to_string_pretty(cfg).expect("config serializes");
    write(PathBuf::from(format!("{out_prefix}_meta.toml")), meta)?;
    Ok(written)
}
