//! Run configuration: a line-oriented `key = value` file plus `--key value`
//! command-line overrides. Every key has a default; unknown keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::coritivity::MmasParams;
use crate::error::{Error, Result};
use crate::ingest::SynthConfig;
use crate::model::{LossConfig, ModelConfig};
use crate::nn::Activation;
use crate::pipeline::ExperimentConfig;
use crate::skipgram::SkipGramConfig;
use crate::train::OptimizerConfig;
use crate::walks::{WalkConfig, WalkStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassWeights {
    Uniform,
    Inverse,
}

impl FromStr for ClassWeights {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(ClassWeights::Uniform),
            "inverse" => Ok(ClassWeights::Inverse),
            _ => Err(format!("expected 'uniform' or 'inverse', got '{s}'")),
        }
    }
}

impl std::fmt::Display for ClassWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassWeights::Uniform => "uniform",
            ClassWeights::Inverse => "inverse",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub work_dir: PathBuf,
    pub seed: u64,

    pub users: usize,
    pub news: usize,
    pub topics: usize,
    pub tags: usize,
    pub cat1: usize,
    pub cat2: usize,
    pub posters: usize,
    pub logs_per_user: usize,
    pub affinity_sharpness: f64,

    pub walk_strategy: WalkStrategy,
    pub walk_length: usize,
    pub walks_per_node: usize,

    pub dim: usize,
    pub word_dim: usize,
    pub window: usize,
    pub skipgram_epochs: usize,
    pub skipgram_lr: f64,

    pub mmas_ants: usize,
    pub mmas_iters: usize,
    pub mmas_rho: f64,
    pub mmas_tau_min: f64,
    pub mmas_tau_max: f64,
    pub mmas_alpha: f64,
    pub mmas_beta: f64,

    pub max_words: usize,
    pub filters: usize,
    pub width: usize,
    pub hidden: usize,
    pub attn_dim: usize,
    pub fc_hidden: usize,
    pub fc1_activation: Activation,
    pub ensi_depth: usize,
    pub attention: bool,
    pub gf: bool,

    pub mr: bool,
    pub c1: f64,
    pub c2: f64,
    pub class_weights: ClassWeights,

    pub batch_size: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let walks = WalkConfig::default();
        let sg = SkipGramConfig::default();
        let mmas = MmasParams::default();
        let model = ModelConfig::desk();
        let loss = LossConfig::default();
        let opt = OptimizerConfig::default();
        RunConfig {
            data_dir: PathBuf::from("data"),
            work_dir: PathBuf::from("work"),
            seed: 0,
            users: synth.n_users,
            news: synth.n_news,
            topics: synth.n_topics,
            tags: synth.n_tags,
            cat1: synth.n_cat1,
            cat2: synth.n_cat2,
            posters: synth.n_posters,
            logs_per_user: synth.logs_per_user,
            affinity_sharpness: synth.affinity_sharpness,
            walk_strategy: walks.strategy,
            walk_length: walks.walk_length,
            walks_per_node: walks.walks_per_node,
            dim: model.dim,
            word_dim: model.word_dim,
            window: sg.window,
            skipgram_epochs: sg.epochs,
            skipgram_lr: sg.lr,
            mmas_ants: mmas.n_ants,
            mmas_iters: mmas.max_iters,
            mmas_rho: mmas.rho,
            mmas_tau_min: mmas.tau_min,
            mmas_tau_max: mmas.tau_max,
            mmas_alpha: mmas.alpha,
            mmas_beta: mmas.beta,
            max_words: model.max_words,
            filters: model.filters,
            width: model.width,
            hidden: model.hidden,
            attn_dim: model.attn_dim,
            fc_hidden: model.fc_hidden,
            fc1_activation: model.fc1_activation,
            ensi_depth: model.ensi_depth,
            attention: model.attention,
            gf: model.concentration,
            mr: true,
            c1: loss.c1,
            c2: loss.c2,
            class_weights: ClassWeights::Uniform,
            batch_size: opt.batch_size,
            lr: opt.lr,
            adam_beta1: opt.beta1,
            adam_beta2: opt.beta2,
            adam_eps: opt.eps,
            epochs: opt.epochs,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Config {
        key: key.to_string(),
        msg: format!("cannot parse '{value}': {e}"),
    })
}

/// Generates the key table: `set`, `get` and the key list stay in sync.
macro_rules! keys {
    ($($key:ident),* $(,)?) => {
        pub const KEYS: &[&str] = &[$(stringify!($key)),*];

        impl RunConfig {
            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($key) => self.$key = parse_value(key, value)?,)*
                    _ => {
                        return Err(Error::Config {
                            key: key.to_string(),
                            msg: "unknown key".into(),
                        })
                    }
                }
                Ok(())
            }

            /// Textual value of `key`, in a form [`RunConfig::set`] accepts.
            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $(stringify!($key) => Some(display(&self.$key)),)*
                    _ => None,
                }
            }
        }
    };
}

trait ConfigValue {
    fn render(&self) -> String;
}

impl ConfigValue for PathBuf {
    fn render(&self) -> String {
        self.display().to_string()
    }
}

impl ConfigValue for WalkStrategy {
    fn render(&self) -> String {
        match self {
            WalkStrategy::Node2vec { p, q } => format!("node2vec:{p}:{q}"),
            other => other.to_string(),
        }
    }
}

macro_rules! display_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_value!(u64, usize, f64, bool, Activation, ClassWeights);

fn display<T: ConfigValue>(v: &T) -> String {
    v.render()
}

keys!(
    data_dir,
    work_dir,
    seed,
    users,
    news,
    topics,
    tags,
    cat1,
    cat2,
    posters,
    logs_per_user,
    affinity_sharpness,
    walk_strategy,
    walk_length,
    walks_per_node,
    dim,
    word_dim,
    window,
    skipgram_epochs,
    skipgram_lr,
    mmas_ants,
    mmas_iters,
    mmas_rho,
    mmas_tau_min,
    mmas_tau_max,
    mmas_alpha,
    mmas_beta,
    max_words,
    filters,
    width,
    hidden,
    attn_dim,
    fc_hidden,
    fc1_activation,
    ensi_depth,
    attention,
    gf,
    mr,
    c1,
    c2,
    class_weights,
    batch_size,
    lr,
    adam_beta1,
    adam_beta2,
    adam_eps,
    epochs,
);

impl RunConfig {
    /// Applies a config file's `key = value` lines over `self`. `#` starts a
    /// comment; blank lines are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                msg: format!("line {}: expected 'key = value'", n + 1),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: "config".into(),
            msg: format!("{}: {e}", path.display()),
        })?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Every key with its current value, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("listed key"));
        }
        out
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            n_users: self.users,
            n_news: self.news,
            n_topics: self.topics,
            n_tags: self.tags,
            n_cat1: self.cat1,
            n_cat2: self.cat2,
            n_posters: self.posters,
            logs_per_user: self.logs_per_user,
            affinity_sharpness: self.affinity_sharpness,
            seed: self.seed,
        }
    }

    pub fn walks(&self) -> WalkConfig {
        WalkConfig {
            strategy: self.walk_strategy,
            walk_length: self.walk_length,
            walks_per_node: self.walks_per_node,
            seed: self.seed,
        }
    }

    pub fn mmas(&self) -> MmasParams {
        MmasParams {
            n_ants: self.mmas_ants,
            max_iters: self.mmas_iters,
            rho: self.mmas_rho,
            tau_min: self.mmas_tau_min,
            tau_max: self.mmas_tau_max,
            alpha: self.mmas_alpha,
            beta: self.mmas_beta,
            seed: self.seed,
        }
    }

    pub fn skipgram(&self, dim: usize) -> SkipGramConfig {
        SkipGramConfig {
            dim,
            window: self.window,
            epochs: self.skipgram_epochs,
            lr: self.skipgram_lr,
            seed: self.seed,
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            word_dim: self.word_dim,
            max_words: self.max_words,
            filters: self.filters,
            width: self.width,
            hidden: self.hidden,
            attn_dim: self.attn_dim,
            fc_hidden: self.fc_hidden,
            ensi_depth: self.ensi_depth,
            attention: self.attention,
            concentration: self.gf,
            fc1_activation: self.fc1_activation,
            seed: self.seed,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            batch_size: self.batch_size,
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            model: self.model(),
            walks: self.walks(),
            node_skipgram: self.skipgram(self.dim),
            word_skipgram: self.skipgram(self.word_dim),
            mmas: self.mmas(),
            loss: LossConfig {
                c1: self.c1,
                c2: self.c2,
                ..LossConfig::default()
            },
            manifold: self.mr,
            class_weighting: self.class_weights == ClassWeights::Inverse,
            optimizer: self.optimizer(),
        }
    }

    /// Checks every derived component configuration.
    pub fn validate(&self) -> Result<()> {
        let tag = |key: &'static str| {
            move |e: Error| match e {
                Error::Config { .. } => e,
                other => Error::Config {
                    key: key.into(),
                    msg: other.to_string(),
                },
            }
        };
        self.synth().validate().map_err(tag("users"))?;
        self.walks().validate().map_err(tag("walk_strategy"))?;
        self.mmas().validate().map_err(tag("mmas_ants"))?;
        self.model().validate().map_err(tag("dim"))?;
        self.optimizer().validate()?;
        LossConfig {
            c1: self.c1,
            c2: self.c2,
            ..LossConfig::default()
        }
        .validate()
        .map_err(tag("c1"))?;
        for (key, v) in [("skipgram_epochs", self.skipgram_epochs), ("window", self.window)] {
            if v == 0 {
                return Err(Error::Config {
                    key: key.into(),
                    msg: "must be at least 1".into(),
                });
            }
        }
        if !(self.skipgram_lr > 0.0) {
            return Err(Error::Config {
                key: "skipgram_lr".into(),
                msg: "must be positive".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let mut cfg = RunConfig::default();
        cfg.set("walk_strategy", "node2vec:0.5:2").unwrap();
        cfg.set("ensi_depth", "9").unwrap();
        cfg.set("fc1_activation", "relu").unwrap();
        cfg.set("class_weights", "inverse").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.model().channels(), 10);
    }

    #[test]
    fn every_key_has_a_default() {
        let cfg = RunConfig::default();
        for k in KEYS {
            assert!(cfg.get(k).is_some(), "{k}");
        }
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::default().apply_text("epochs = 3\nbatchsize = 10\n").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "batchsize"), "{err}");
    }

    #[test]
    fn bad_value_is_named() {
        let err = RunConfig::default().apply_text("lr = fast").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "lr"));
        let err = RunConfig::default().apply_text("just words").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn comments_and_blanks() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# header\n\n  epochs = 2   # short run\nattention = false\n").unwrap();
        assert_eq!(cfg.epochs, 2);
        assert!(!cfg.attention);
    }

    #[test]
    fn validation_names_the_key() {
        let mut cfg = RunConfig::default();
        cfg.batch_size = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "batch_size"));
    }
}
