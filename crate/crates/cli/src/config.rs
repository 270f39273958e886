//! Flat experiment configuration.
//!
//! Precedence, lowest first: built-in defaults, the dataset manifest
//! (`rho`, `seed`), the `--config` file, command-line flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use pkgc_core::kv;
use pkgc_core::mine::{MiningConfig, NAIVE_GUARD};
use pkgc_core::runner::{LoopConfig, Strategy};
use pkgc_core::train::{Profile, RegKind, TrainConfig, UpdateMode};
use pkgc_core::ModelFamily;

/// A value that may be derived from the model and profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto<T> {
    Auto,
    Set(T),
}

impl<T: FromStr> FromStr for Auto<T> {
    type Err = T::Err;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" { Ok(Auto::Auto) } else { s.parse().map(Auto::Set) }
    }
}

impl<T: fmt::Display> fmt::Display for Auto<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Auto::Auto => f.write_str("auto"),
            Auto::Set(v) => v.fmt(f),
        }
    }
}

/// Where the class dictionary for the semantic filter comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SvfSource {
    /// The manifest's `classes_path`, if any.
    Manifest,
    Off,
    File(PathBuf),
}

impl fmt::Display for SvfSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SvfSource::Manifest => f.write_str("manifest"),
            SvfSource::Off => f.write_str("off"),
            SvfSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifierKind {
    Oracle,
    Session,
}

impl fmt::Display for VerifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerifierKind::Oracle => "oracle",
            VerifierKind::Session => "session",
        })
    }
}

impl FromStr for VerifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(VerifierKind::Oracle),
            "session" => Ok(VerifierKind::Session),
            _ => Err(format!("expected oracle or session, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    pub model: ModelFamily,
    pub dim: usize,
    pub rho: f64,
    pub seed: u64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub update_epochs: usize,
    pub reg: Auto<RegKind>,
    pub reg_weight: Auto<f64>,
    pub drift_weight: f64,
    pub rel_norm: bool,
    pub nc: usize,
    pub ns: usize,
    pub update: UpdateMode,
    pub delta_s: usize,
    pub k: Auto<usize>,
    pub bm_max: usize,
    pub warm_up: bool,
    pub root_filter: bool,
    pub svf: SvfSource,
    pub svf_tails: bool,
    pub verifier: VerifierKind,
    pub serve: Option<String>,
    pub session_timeout: f64,
    pub checkpoint: Option<PathBuf>,
    pub pretrain: bool,
    pub resume: bool,
    pub profile: Profile,
    pub strategy: Strategy,
    pub naive_guard: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        ExperimentConfig {
            dataset: None,
            out: PathBuf::from("out"),
            model: ModelFamily::ComplEx,
            dim: t.dim,
            rho: 0.7,
            seed: 0,
            lr: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.max_epochs,
            update_epochs: t.incremental_epochs,
            reg: Auto::Auto,
            reg_weight: Auto::Auto,
            drift_weight: t.mu,
            rel_norm: false,
            nc: 1000,
            ns: 50,
            update: UpdateMode::None,
            delta_s: 5,
            k: Auto::Auto,
            bm_max: 10_000,
            warm_up: true,
            root_filter: true,
            svf: SvfSource::Manifest,
            svf_tails: true,
            verifier: VerifierKind::Oracle,
            serve: None,
            session_timeout: 600.0,
            checkpoint: None,
            pretrain: false,
            resume: false,
            profile: Profile::Wn18,
            strategy: Strategy::Model,
            naive_guard: NAIVE_GUARD,
        }
    }
}

/// A configuration key: name, whether it is boolean, help text.
pub struct Key {
    pub name: &'static str,
    pub boolean: bool,
    pub help: &'static str,
}

const fn key(name: &'static str, help: &'static str) -> Key {
    Key { name, boolean: false, help }
}

const fn flag(name: &'static str, help: &'static str) -> Key {
    Key { name, boolean: true, help }
}

/// Every key, in echo order.
pub const KEYS: &[Key] = &[
    key("dataset", "Manifest file, directory holding manifest.conf, or a bare triples .tsv"),
    key("out", "Output directory [default: out]"),
    key("model", "Model family: transe, cp, complex, rescal, rotate, rote, quate, unibi-o2, unibi-o3"),
    key("dim", "Embedding dimension [default: 500]"),
    key("rho", "Fraction of facts initially known [default: 0.7]"),
    key("seed", "Seed for partitioning, initialization and shuffling [default: 0]"),
    key("lr", "Adagrad learning rate [default: 0.001]"),
    key("batch_size", "Training batch size [default: 1000]"),
    key("epochs", "Pretraining epochs [default: 100]"),
    key("update_epochs", "Epochs per incremental update [default: 20]"),
    key("reg", "Regularizer: f2, dura or auto (tuned per model) [default: auto]"),
    key("reg_weight", "Regularizer weight or auto [default: auto]"),
    key("drift_weight", "Drift penalty weight during updates [default: 0.001]"),
    flag("rel_norm", "Normalize relation vectors when mining (CP, ComplEx)"),
    key("nc", "Candidates per step [default: 1000]"),
    key("ns", "Number of steps [default: 50]"),
    key("update", "Model update: none, retrain or finetune [default: none]"),
    key("delta_s", "Steps between updates [default: 5]"),
    key("k", "Step at which CR@k is reported, or auto [default: auto]"),
    key("bm_max", "Largest mining batch, in queries [default: 10000]"),
    flag("warm_up", "Grow mining batches from 1 [default: true]"),
    flag("root_filter", "Skip candidates below the heap root [default: true]"),
    key("svf", "Class file for the semantic filter, `manifest` or `off` [default: manifest]"),
    flag("svf_tails", "Also filter tails by class [default: true]"),
    key("verifier", "oracle or session [default: oracle]"),
    key("serve", "Address for the verification API, e.g. 127.0.0.1:8080"),
    key("session_timeout", "Seconds a verification step waits [default: 600]"),
    key("checkpoint", "Pretrained model to load [default: <out>/model.ckpt]"),
    flag("pretrain", "Pretrain before running instead of loading a checkpoint"),
    flag("resume", "Resume from <out>/checkpoint"),
    key("profile", "Hyperparameter profile: wn18 or fb15k [default: wn18]"),
    key("strategy", "Candidate strategy: model or random [default: model]"),
    key("naive_guard", "Largest candidate space the brute-force check enumerates [default: 1e8]"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| format!("{key}: cannot parse `{value}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got `{value}`")),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = opt_path(v),
            "out" => self.out = PathBuf::from(v),
            "model" => self.model = parse(key, v)?,
            "dim" => self.dim = parse(key, v)?,
            "rho" => self.rho = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "update_epochs" => self.update_epochs = parse(key, v)?,
            "reg" => self.reg = parse(key, v)?,
            "reg_weight" => self.reg_weight = parse(key, v)?,
            "drift_weight" => self.drift_weight = parse(key, v)?,
            "rel_norm" => self.rel_norm = parse_bool(key, v)?,
            "nc" => self.nc = parse(key, v)?,
            "ns" => self.ns = parse(key, v)?,
            "update" => self.update = parse(key, v)?,
            "delta_s" => self.delta_s = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "bm_max" => self.bm_max = parse(key, v)?,
            "warm_up" => self.warm_up = parse_bool(key, v)?,
            "root_filter" => self.root_filter = parse_bool(key, v)?,
            "svf" => {
                self.svf = match v {
                    "off" => SvfSource::Off,
                    "manifest" | "" => SvfSource::Manifest,
                    p => SvfSource::File(PathBuf::from(p)),
                }
            }
            "svf_tails" => self.svf_tails = parse_bool(key, v)?,
            "verifier" => self.verifier = parse(key, v)?,
            "serve" => self.serve = (!v.is_empty() && v != "none").then(|| v.to_owned()),
            "session_timeout" => self.session_timeout = parse(key, v)?,
            "checkpoint" => self.checkpoint = opt_path(v),
            "pretrain" => self.pretrain = parse_bool(key, v)?,
            "resume" => self.resume = parse_bool(key, v)?,
            "profile" => self.profile = parse(key, v)?,
            "strategy" => self.strategy = parse(key, v)?,
            "naive_guard" => self.naive_guard = parse::<f64>(key, v).map(|g| g as u64)?,
            _ => return Err(format!("unknown config key `{key}`")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or_else(|| "none".to_owned(), |p| p.display().to_string());
        match key {
            "dataset" => path(&self.dataset),
            "out" => self.out.display().to_string(),
            "model" => self.model.to_string(),
            "dim" => self.dim.to_string(),
            "rho" => self.rho.to_string(),
            "seed" => self.seed.to_string(),
            "lr" => self.lr.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "update_epochs" => self.update_epochs.to_string(),
            "reg" => self.reg.to_string(),
            "reg_weight" => self.reg_weight.to_string(),
            "drift_weight" => self.drift_weight.to_string(),
            "rel_norm" => self.rel_norm.to_string(),
            "nc" => self.nc.to_string(),
            "ns" => self.ns.to_string(),
            "update" => self.update.to_string(),
            "delta_s" => self.delta_s.to_string(),
            "k" => self.k.to_string(),
            "bm_max" => self.bm_max.to_string(),
            "warm_up" => self.warm_up.to_string(),
            "root_filter" => self.root_filter.to_string(),
            "svf" => self.svf.to_string(),
            "svf_tails" => self.svf_tails.to_string(),
            "verifier" => self.verifier.to_string(),
            "serve" => self.serve.clone().unwrap_or_else(|| "none".into()),
            "session_timeout" => self.session_timeout.to_string(),
            "checkpoint" => path(&self.checkpoint),
            "pretrain" => self.pretrain.to_string(),
            "resume" => self.resume.to_string(),
            "profile" => self.profile.to_string(),
            "strategy" => self.strategy.to_string(),
            "naive_guard" => self.naive_guard.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// The effective configuration as a loadable `key=value` file.
    pub fn render(&self) -> String {
        kv::render(KEYS.iter().map(|k| (k.name, self.get(k.name))))
    }

    pub fn train_config(&self) -> TrainConfig {
        let (tuned_kind, tuned_weight) = self.profile.regularization(self.model);
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            incremental_epochs: self.update_epochs,
            reg_kind: match self.reg {
                Auto::Auto => tuned_kind,
                Auto::Set(k) => k,
            },
            lambda: match self.reg_weight {
                Auto::Auto => tuned_weight,
                Auto::Set(w) => w,
            },
            mu: self.drift_weight,
            dim: self.dim,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn mining_config(&self) -> MiningConfig {
        MiningConfig {
            n_c: self.nc,
            b_m_max: self.bm_max,
            warm_up: self.warm_up,
            root_filter: self.root_filter,
            svf: self.svf != SvfSource::Off,
            svf_tails: self.svf_tails,
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            n_s: self.ns,
            n_c: self.nc,
            update_mode: self.update,
            delta_s: self.delta_s,
            k_report: match self.k {
                Auto::Auto => self.profile.k_report(),
                Auto::Set(k) => k,
            },
            strategy: self.strategy,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(format!("rho must lie in (0, 1], got {}", self.rho));
        }
        if self.bm_max == 0 {
            return Err("bm_max must be positive".into());
        }
        if self.rel_norm && !self.model.supports_relation_normalization() {
            return Err(format!("rel_norm applies to CP and ComplEx, not {}", self.model));
        }
        if self.verifier == VerifierKind::Session && self.serve.is_none() {
            return Err("verifier=session needs serve=<addr>".into());
        }
        if !(self.session_timeout > 0.0) {
            return Err("session_timeout must be positive".into());
        }
        self.train_config().validate()?;
        self.loop_config().validate()
    }
}
