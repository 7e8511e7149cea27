use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use scope_lab_core::env::DatasetSpec;
use scope_lab_core::losses::LossKind;
use scope_lab_core::nn::Activation;
use scope_lab_core::trainer::{Algo, LrSchedule, TrainConfig};
use thiserror::Error;

/// Environment variable that replaces the configured seed list.
pub const SEED_ENV: &str = "SCOPE_LAB_SEED";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    MazeImbalance,
    SparseChain,
    Classification,
    IdentitySuite,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MazeImbalance => "maze_imbalance",
            ExperimentKind::SparseChain => "sparse_chain",
            ExperimentKind::Classification => "classification",
            ExperimentKind::IdentitySuite => "identity_suite",
        }
    }

    fn default_algo(self) -> Algo {
        match self {
            ExperimentKind::MazeImbalance => Algo::A2c,
            ExperimentKind::SparseChain => Algo::Ppo,
            ExperimentKind::Classification | ExperimentKind::IdentitySuite => Algo::Supervised,
        }
    }

    fn default_losses(self) -> Vec<LossKind> {
        match self {
            ExperimentKind::MazeImbalance => vec![LossKind::Policy, LossKind::Scope, LossKind::PolicyEntropy],
            ExperimentKind::SparseChain => {
                vec![LossKind::Policy, LossKind::PolicyEntropy, LossKind::Scope, LossKind::Focal]
            }
            ExperimentKind::Classification => vec![
                LossKind::CrossEntropy,
                LossKind::Focal,
                LossKind::PolicyEntropy,
                LossKind::Scope,
            ],
            ExperimentKind::IdentitySuite => LossKind::ALL.to_vec(),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maze_imbalance" => Ok(ExperimentKind::MazeImbalance),
            "sparse_chain" => Ok(ExperimentKind::SparseChain),
            "classification" => Ok(ExperimentKind::Classification),
            "identity_suite" => Ok(ExperimentKind::IdentitySuite),
            _ => Err(format!("unknown experiment `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MazeParams {
    pub reward_cat: f64,
    pub reward_dog: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainParams {
    pub length: usize,
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub max_steps: usize,
}

/// Dataset shape; the generator seed is the trial seed unless `seed` is set.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetParams {
    pub class_counts: Vec<usize>,
    pub feature_dim: usize,
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub seed: Option<u64>,
}

impl DatasetParams {
    pub fn spec(&self, trial_seed: u64) -> DatasetSpec {
        DatasetSpec {
            num_classes: self.class_counts.len(),
            class_counts: self.class_counts.clone(),
            feature_dim: self.feature_dim,
            class_separation: self.class_separation,
            noise_sigma: self.noise_sigma,
            seed: self.seed.unwrap_or(trial_seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub algo: Algo,
    pub losses: Vec<LossKind>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// `(algo filter, key, value)` applied on top of the trainer defaults.
    pub overrides: Vec<(Option<Algo>, String, String)>,
    pub maze: MazeParams,
    pub chain: ChainParams,
    pub dataset: DatasetParams,
    /// Metrics columns to render as SVG after the run.
    pub plots: Vec<String>,
}

const TRAIN_KEYS: &[&str] = &[
    "lr",
    "gamma_discount",
    "lambda_gae",
    "rollout_length",
    "batch_size",
    "total_steps",
    "epochs",
    "epochs_per_update",
    "lr_schedule",
    "hidden",
    "activation",
    "grad_clip",
    "alpha_scope",
    "alpha_entropy",
    "gamma_focal",
    "alpha_focal",
    "epsilon_clip",
    "alpha_value",
];

/// Learning rate used for the maze unless overridden: the generic RL rate
/// is too slow to separate the two paths within a 2000-step budget.
pub const MAZE_LR: f64 = 1e-3;

fn list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_owned(),
        msg: e.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    list(value).into_iter().map(|v| parse_value(key, v)).collect()
}

/// Parses a comma-separated seed list, as used by the config and [`SEED_ENV`].
pub fn parse_seeds(value: &str) -> Result<Vec<u64>, ConfigError> {
    let seeds: Vec<u64> = parse_list("seeds", value)?;
    if seeds.is_empty() {
        return Err(ConfigError::Invalid("seed list is empty".into()));
    }
    Ok(seeds)
}

fn set_train_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    let l = &mut cfg.loss;
    match key {
        "lr" => cfg.lr = parse_value(key, value)?,
        "gamma_discount" => cfg.gamma_discount = parse_value(key, value)?,
        "lambda_gae" => cfg.lambda_gae = parse_value(key, value)?,
        "rollout_length" => cfg.rollout_length = parse_value(key, value)?,
        "batch_size" => cfg.batch_size = parse_value(key, value)?,
        "total_steps" => cfg.total_steps = parse_value(key, value)?,
        "epochs" => cfg.epochs = parse_value(key, value)?,
        "epochs_per_update" => cfg.epochs_per_update = parse_value(key, value)?,
        "lr_schedule" => cfg.lr_schedule = parse_value::<LrSchedule>(key, value)?,
        "hidden" => cfg.hidden = parse_list(key, value)?,
        "activation" => {
            cfg.activation = Activation::parse(value).ok_or_else(|| ConfigError::Value {
                key: key.to_owned(),
                msg: format!("unknown activation `{value}`"),
            })?
        }
        "grad_clip" => cfg.grad_clip = parse_value(key, value)?,
        "alpha_scope" => l.alpha_scope = parse_value(key, value)?,
        "alpha_entropy" => l.alpha_entropy = parse_value(key, value)?,
        "gamma_focal" => l.gamma_focal = parse_value(key, value)?,
        "alpha_focal" => l.alpha_focal = parse_value(key, value)?,
        "epsilon_clip" => l.epsilon_clip = parse_value(key, value)?,
        "alpha_value" => l.alpha_value = parse_value(key, value)?,
        _ => return Err(ConfigError::UnknownKey(key.to_owned())),
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let ds = DatasetSpec::imbalanced_default(0);
        Self {
            experiment,
            algo: experiment.default_algo(),
            losses: experiment.default_losses(),
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: PathBuf::from("results").join(experiment.name()),
            overrides: Vec::new(),
            maze: MazeParams {
                reward_cat: 0.5,
                reward_dog: 1.0,
            },
            chain: ChainParams {
                length: 10,
                step_penalty: -0.01,
                goal_reward: 1.0,
                max_steps: 50,
            },
            dataset: DatasetParams {
                class_counts: ds.class_counts,
                feature_dim: ds.feature_dim,
                class_separation: ds.class_separation,
                noise_sigma: ds.noise_sigma,
                seed: None,
            },
            plots: Vec::new(),
        }
    }

    /// Parses the `key = value` format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: n + 1,
                    msg: "empty key".into(),
                });
            }
            pairs.push((key.to_owned(), value.trim().to_owned()));
        }
        let experiment = pairs
            .iter()
            .find(|(k, _)| k == "experiment")
            .map(|(k, v)| parse_value::<ExperimentKind>(k, v))
            .transpose()?
            .ok_or(ConfigError::Missing("experiment"))?;
        let mut cfg = Self::defaults(experiment);
        for (key, value) in &pairs {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "experiment" => {}
            "algo" => self.algo = parse_value(key, value)?,
            "losses" => self.losses = parse_list(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "plots" => self.plots = list(value).into_iter().map(str::to_owned).collect(),
            "maze.reward_cat" => self.maze.reward_cat = parse_value(key, value)?,
            "maze.reward_dog" => self.maze.reward_dog = parse_value(key, value)?,
            "chain.length" => self.chain.length = parse_value(key, value)?,
            "chain.step_penalty" => self.chain.step_penalty = parse_value(key, value)?,
            "chain.goal_reward" => self.chain.goal_reward = parse_value(key, value)?,
            "chain.max_steps" => self.chain.max_steps = parse_value(key, value)?,
            "dataset.class_counts" => self.dataset.class_counts = parse_list(key, value)?,
            "dataset.feature_dim" => self.dataset.feature_dim = parse_value(key, value)?,
            "dataset.class_separation" => self.dataset.class_separation = parse_value(key, value)?,
            "dataset.noise_sigma" => self.dataset.noise_sigma = parse_value(key, value)?,
            "dataset.seed" => self.dataset.seed = Some(parse_value(key, value)?),
            _ => {
                let (algo, name) = match key.split_once('.') {
                    Some((prefix, name)) => {
                        let algo = prefix
                            .parse::<Algo>()
                            .map_err(|_| ConfigError::UnknownKey(key.to_owned()))?;
                        (Some(algo), name)
                    }
                    None => (None, key),
                };
                if !TRAIN_KEYS.contains(&name) {
                    return Err(ConfigError::UnknownKey(key.to_owned()));
                }
                self.overrides.push((algo, name.to_owned(), value.to_owned()));
            }
        }
        Ok(())
    }

    /// Replaces the seed list from [`SEED_ENV`] when it is set.
    pub fn apply_seed_env(&mut self) -> Result<(), ConfigError> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                self.seeds = parse_seeds(&v).map_err(|e| ConfigError::Value {
                    key: SEED_ENV.into(),
                    msg: e.to_string(),
                })?;
                Ok(())
            }
            Err(std::env::VarError::NotPresent) => Ok(()),
            Err(e) => Err(ConfigError::Value {
                key: SEED_ENV.into(),
                msg: e.to_string(),
            }),
        }
    }

    /// Trainer settings for one `(loss, seed)` trial.
    pub fn train_config(&self, loss: LossKind, seed: u64) -> Result<TrainConfig, ConfigError> {
        let mut cfg = match self.algo {
            Algo::A2c => TrainConfig::a2c(loss, seed),
            Algo::Ppo => TrainConfig::ppo(loss, seed),
            Algo::Supervised => TrainConfig::supervised(loss, seed),
        };
        if self.experiment == ExperimentKind::MazeImbalance {
            cfg.lr = MAZE_LR;
        }
        // Unprefixed keys first, so algo-prefixed ones win.
        for pass_prefixed in [false, true] {
            for (algo, key, value) in &self.overrides {
                if algo.is_some() == pass_prefixed && algo.is_none_or(|a| a == self.algo) {
                    set_train_key(&mut cfg, key, value)?;
                }
            }
        }
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(format!("{loss} seed {seed}: {e}")))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if self.losses.is_empty() {
            return bad("losses must be nonempty".into());
        }
        if self.experiment == ExperimentKind::IdentitySuite {
            return Ok(());
        }
        if self.algo == Algo::Supervised && self.experiment != ExperimentKind::Classification {
            return bad(format!("{} needs an RL algorithm (a2c or ppo)", self.experiment));
        }
        for &loss in &self.losses {
            self.train_config(loss, self.seeds[0])?;
        }
        if self.maze.reward_dog <= self.maze.reward_cat {
            return bad("maze.reward_dog must exceed maze.reward_cat".into());
        }
        if self.experiment == ExperimentKind::Classification {
            if self.dataset.class_counts.len() < 2 {
                return bad("dataset.class_counts needs at least two classes".into());
            }
            self.dataset
                .spec(self.seeds[0])
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}
