//! Stage driver behind the `gbban` binary. Each stage reads the files of the
//! stages before it, writes its own artifact and appends a manifest line.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::coritivity::{all_concentration_features, read_concentration, write_concentration, CONCENTRATION_FILE};
use crate::error::{Error, Result};
use crate::eval::{evaluate, CONFUSION_FILE, METRICS_FILE};
use crate::graph::{build_graph, BehaviorGraph, EDGES_FILE, NODES_FILE};
use crate::ingest::{
    generate_synthetic, read_news_index, Behavior, Dataset, BEHAVIOR_LOGS_FILE, NEWS_INDEX_FILE, TOPIC_INDEX_FILE,
    USER_PROFILES_FILE,
};
use crate::model::ModelParams;
use crate::nn::Checkpoint;
use crate::pipeline::{self, Artifacts};
use crate::skipgram::{EmbeddingTable, NODE_EMBEDDINGS_FILE, WORD_EMBEDDINGS_FILE};
use crate::train::{label_counts, train};
use crate::walks::{read_walks, sample_walks, write_walks, WALKS_FILE};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const GRAPH_DIR: &str = "graph";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSS_CURVE_FILE: &str = "loss_curve.tsv";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";

const DATASET_FILES: [&str; 4] = [BEHAVIOR_LOGS_FILE, USER_PROFILES_FILE, NEWS_INDEX_FILE, TOPIC_INDEX_FILE];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    /// write a synthetic dataset to data_dir
    Synth,
    BuildGraph,
    Concentration,
    Walks,
    Embed,
    Train,
    Evaluate,
    Predict,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::BuildGraph => "build-graph",
            Stage::Concentration => "concentration",
            Stage::Walks => "walks",
            Stage::Embed => "embed",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Predict => "predict",
        }
    }

    fn needs_seed(self) -> bool {
        matches!(self, Stage::Walks | Stage::Embed | Stage::Train)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gbban",
    about = "Behavior-graph news recommendation pipeline",
    after_help = "Settings: `--config FILE` (key = value lines), then `--key value` overrides.\n\
                  Dashes in keys map to underscores. `--seed` is required for walks, embed and train."
)]
pub struct Cli {
    #[arg(value_enum)]
    pub stage: Stage,
    /// `--config FILE` and `--key value` settings
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "SETTINGS")]
    pub settings: Vec<String>,
}

/// Process exit status for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingArtifact { .. } => 2,
        Error::Config { .. } => 3,
        _ => 1,
    }
}

/// Resolves defaults, the optional config file and overrides, in that order.
/// Also reports whether `--seed` was given explicitly.
pub fn resolve_settings(settings: &[String]) -> Result<(RunConfig, bool)> {
    let mut config_file = None;
    let mut pairs = Vec::new();
    let mut it = settings.iter();
    while let Some(arg) = it.next() {
        let flag = arg.strip_prefix("--").ok_or_else(|| Error::Config {
            key: arg.clone(),
            msg: "expected a `--key value` setting".into(),
        })?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Error::Config {
                    key: flag.replace('-', "_"),
                    msg: "missing value".into(),
                })?;
                (flag.to_string(), v.clone())
            }
        };
        let key = key.replace('-', "_");
        if key == "config" {
            config_file = Some(PathBuf::from(value));
        } else {
            pairs.push((key, value));
        }
    }
    let mut cfg = match config_file {
        Some(path) => RunConfig::from_file(&path)?,
        None => RunConfig::default(),
    };
    let mut seed_given = false;
    for (k, v) in &pairs {
        cfg.set(k, v)?;
        seed_given |= k == "seed";
    }
    Ok((cfg, seed_given))
}

/// Parses `args` (program name first) and runs one stage. Progress goes to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => {
            return Err(Error::Config {
                key: "arguments".into(),
                msg: e.render().to_string().trim_end().to_string(),
            })
        }
    };
    let (cfg, seed_given) = resolve_settings(&cli.settings)?;
    if cli.stage.needs_seed() && !seed_given {
        return Err(Error::Config {
            key: "seed".into(),
            msg: format!("`{}` requires an explicit --seed", cli.stage.name()),
        });
    }
    cfg.validate()?;
    run_stage(cli.stage, &cfg, out)
}

pub fn run_stage(stage: Stage, cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    std::fs::create_dir_all(&cfg.work_dir)?;
    let mut s = StageRun {
        cfg,
        out,
        inputs: Vec::new(),
        outputs: Vec::new(),
        seed: cfg.seed,
    };
    match stage {
        Stage::Synth => s.synth()?,
        Stage::BuildGraph => s.build_graph()?,
        Stage::Concentration => s.concentration()?,
        Stage::Walks => s.walks()?,
        Stage::Embed => s.embed()?,
        Stage::Train => s.train()?,
        Stage::Evaluate => s.evaluate()?,
        Stage::Predict => s.predict()?,
    }
    s.record(stage)
}

/// Hex SHA-256 of a file.
pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Dataset plus the upstream artifacts the model stages read from `work_dir`.
pub fn load_artifacts(cfg: &RunConfig, with_concentration: bool) -> Result<(Dataset, Artifacts)> {
    let mut s = StageRun {
        cfg,
        out: &mut std::io::sink(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        seed: cfg.seed,
    };
    s.load_model_inputs(with_concentration)
}

struct StageRun<'a> {
    cfg: &'a RunConfig,
    out: &'a mut dyn Write,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: u64,
}

impl StageRun<'_> {
    fn work(&self, name: &str) -> PathBuf {
        self.cfg.work_dir.join(name)
    }

    fn graph_dir(&self) -> PathBuf {
        self.work(GRAPH_DIR)
    }

    /// Marks `path` as an input, failing if the producing stage has not run.
    fn require(&mut self, path: PathBuf, stage: Stage) -> Result<PathBuf> {
        if !path.is_file() {
            return Err(Error::MissingArtifact {
                stage: stage.name(),
                path,
            });
        }
        self.inputs.push(path.clone());
        Ok(path)
    }

    fn write(&mut self, path: PathBuf, contents: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, contents)?;
        self.outputs.push(path);
        Ok(())
    }

    fn read_dataset(&mut self) -> Result<Dataset> {
        for f in DATASET_FILES {
            self.require(self.cfg.data_dir.join(f), Stage::Synth)?;
        }
        Dataset::read_dir(&self.cfg.data_dir)
    }

    fn read_graph(&mut self) -> Result<BehaviorGraph> {
        for f in [NODES_FILE, EDGES_FILE] {
            self.require(self.graph_dir().join(f), Stage::BuildGraph)?;
        }
        BehaviorGraph::read_dir(&self.graph_dir())
    }

    fn load_model_inputs(&mut self, with_concentration: bool) -> Result<(Dataset, Artifacts)> {
        let ds = self.read_dataset()?;
        let graph = self.read_graph()?;
        let concentration = if with_concentration {
            read_concentration(&self.require(self.work(CONCENTRATION_FILE), Stage::Concentration)?)?
        } else {
            Vec::new()
        };
        let nodes = EmbeddingTable::read(&self.require(self.work(NODE_EMBEDDINGS_FILE), Stage::Embed)?)?;
        let words = EmbeddingTable::read(&self.require(self.work(WORD_EMBEDDINGS_FILE), Stage::Embed)?)?;
        Ok((
            ds,
            Artifacts {
                graph,
                concentration,
                nodes,
                words,
            },
        ))
    }

    fn load_checkpoint(&mut self) -> Result<ModelParams> {
        let path = self.require(self.work(CHECKPOINT_FILE), Stage::Train)?;
        let params = ModelParams::from_checkpoint(&Checkpoint::read(&path)?)?;
        self.seed = params.cfg.seed;
        Ok(params)
    }

    fn synth(&mut self) -> Result<()> {
        let ds = generate_synthetic(&self.cfg.synth())?;
        ds.write_dir(&self.cfg.data_dir)?;
        self.outputs
            .extend(DATASET_FILES.iter().map(|f| self.cfg.data_dir.join(f)));
        writeln!(
            self.out,
            "synth: {} users, {} news, {} logs -> {}",
            ds.profiles.len(),
            ds.news.len(),
            ds.logs.len(),
            self.cfg.data_dir.display()
        )?;
        Ok(())
    }

    fn build_graph(&mut self) -> Result<()> {
        let g = build_graph(&self.read_dataset()?)?;
        self.write(self.graph_dir().join(NODES_FILE), g.export_nodes().as_bytes())?;
        self.write(self.graph_dir().join(EDGES_FILE), g.export_edges().as_bytes())?;
        writeln!(self.out, "build-graph: {} nodes, {} edges", g.node_count(), g.edge_count())?;
        Ok(())
    }

    fn concentration(&mut self) -> Result<()> {
        let g = self.read_graph()?;
        let features = all_concentration_features(&g, &self.cfg.mmas())?;
        self.write(self.work(CONCENTRATION_FILE), write_concentration(&features).as_bytes())?;
        writeln!(self.out, "concentration: {} users", features.len())?;
        Ok(())
    }

    fn walks(&mut self) -> Result<()> {
        let g = self.read_graph()?;
        let walks = sample_walks(&g, &self.cfg.walks())?;
        self.write(self.work(WALKS_FILE), write_walks(&walks).as_bytes())?;
        writeln!(self.out, "walks: {} walks ({})", walks.len(), self.cfg.walk_strategy)?;
        Ok(())
    }

    fn embed(&mut self) -> Result<()> {
        let g = self.read_graph()?;
        let walks = read_walks(&self.require(self.work(WALKS_FILE), Stage::Walks)?)?;
        let news = read_news_index(&self.require(self.cfg.data_dir.join(NEWS_INDEX_FILE), Stage::Synth)?)?;
        let nodes = pipeline::node_embeddings(&g, &walks, &self.cfg.skipgram(self.cfg.dim))?;
        let words = pipeline::word_embeddings(&news, &self.cfg.skipgram(self.cfg.word_dim))?;
        self.write(self.work(NODE_EMBEDDINGS_FILE), nodes.to_tsv().as_bytes())?;
        self.write(self.work(WORD_EMBEDDINGS_FILE), words.to_tsv().as_bytes())?;
        writeln!(self.out, "embed: {} nodes, {} words", nodes.len(), words.len())?;
        Ok(())
    }

    fn train(&mut self) -> Result<()> {
        let exp = self.cfg.experiment();
        let (ds, art) = self.load_model_inputs(exp.model.concentration)?;
        let prepared = pipeline::prepare(&ds, &art, &exp.model)?;
        let mut params = ModelParams::new(exp.model.clone())?;
        let loss = exp.effective_loss(&label_counts(&prepared.train));
        writeln!(
            self.out,
            "train: {} samples, {} conv channels",
            prepared.train.len(),
            exp.model.channels()
        )?;
        let out = &mut *self.out;
        let curve = train(&mut params, &prepared.bank, &prepared.train, &loss, &exp.optimizer, |e, l| {
            let _ = writeln!(out, "epoch {e}: mean loss {l:.6}");
        })?;
        let mut tsv = String::from("epoch\tmean_loss\n");
        for (e, l) in curve.iter().enumerate() {
            let _ = writeln!(tsv, "{e}\t{l}");
        }
        self.write(self.work(CHECKPOINT_FILE), &params.to_checkpoint().to_bytes())?;
        self.write(self.work(LOSS_CURVE_FILE), tsv.as_bytes())?;
        Ok(())
    }

    fn evaluate(&mut self) -> Result<()> {
        let params = self.load_checkpoint()?;
        let (ds, art) = self.load_model_inputs(params.cfg.concentration)?;
        let prepared = pipeline::prepare_test(&ds, &art, &params.cfg)?;
        let (report, _) = evaluate(&params, &prepared.bank, &prepared.test)?;
        let mut metrics = report.to_json_line();
        metrics.push('\n');
        self.write(self.work(METRICS_FILE), metrics.as_bytes())?;
        self.write(self.work(CONFUSION_FILE), report.confusion_tsv().as_bytes())?;
        writeln!(
            self.out,
            "evaluate: auc {:.4}, precision {:.4}{} over {} test samples",
            report.auc,
            report.precision,
            if report.precision_warning { " (no positive predictions)" } else { "" },
            report.samples
        )?;
        Ok(())
    }

    fn predict(&mut self) -> Result<()> {
        let params = self.load_checkpoint()?;
        let (ds, art) = self.load_model_inputs(params.cfg.concentration)?;
        let prepared = pipeline::prepare_test(&ds, &art, &params.cfg)?;
        let mut tsv = String::from("user_id\tnews_id");
        for b in Behavior::ALL {
            let _ = write!(tsv, "\tp_{}", b.as_str());
        }
        tsv.push('\n');
        for (s, (user, news)) in prepared.test.iter().zip(&prepared.test_keys) {
            tsv.push_str(user);
            tsv.push('\t');
            tsv.push_str(news);
            for p in params.predict(&prepared.bank, s)? {
                let _ = write!(tsv, "\t{p}");
            }
            tsv.push('\n');
        }
        self.write(self.work(PREDICTIONS_FILE), tsv.as_bytes())?;
        writeln!(self.out, "predict: {} rows", prepared.test.len())?;
        Ok(())
    }

    fn label(&self, path: &Path) -> String {
        path.strip_prefix(&self.cfg.work_dir)
            .or_else(|_| path.strip_prefix(&self.cfg.data_dir))
            .unwrap_or(path)
            .display()
            .to_string()
    }

    fn digests(&self, paths: &[PathBuf]) -> Result<String> {
        if paths.is_empty() {
            return Ok("-".into());
        }
        let mut parts = Vec::with_capacity(paths.len());
        for p in paths {
            parts.push(format!("{}={}", self.label(p), file_digest(p)?));
        }
        Ok(parts.join(","))
    }

    /// Appends `stage  seed  inputs  outputs` to the manifest.
    fn record(&mut self, stage: Stage) -> Result<()> {
        let line = format!(
            "{}\t{}\t{}\t{}\n",
            stage.name(),
            self.seed,
            self.digests(&self.inputs)?,
            self.digests(&self.outputs)?
        );
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.work(MANIFEST_FILE))?;
        f.write_all(line.as_bytes())?;
        Ok(())
    }
}
