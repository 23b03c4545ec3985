//! The `lsgcl` command-line driver.
//!
//! Every subcommand resolves one [`RunConfig`] from, in increasing priority:
//! built-in defaults, the `--dataset` preset, a `key = value` config file and
//! `--key value` flags. Outputs land under `out_dir` next to a JSON
//! [`RunManifest`] that records the resolved config, its hash and every
//! artifact path.
//!
//! Exit codes: 0 on success, 2 for bad input, 3 for a numeric failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contrastive::LossMode;
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::eval::{evaluate_lp, evaluate_nc, write_reports, MetricReport, MetricSummary, ProbeConfig};
use crate::graph::{load_edge_list, Graph};
use crate::sampler::{precompute_subgraphs, SamplerKind, SamplerLabel, SubgraphSet};
use crate::trainer::{
    export_embeddings, train_from, write_embeddings, write_loss_trace, EmbeddingView, TrainConfig,
};

pub const CACHE_FILE: &str = "subgraphs.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const LOSS_FILE: &str = "loss.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const NC_REPORT_FILE: &str = "report_nc.csv";
pub const LP_REPORT_FILE: &str = "report_lp.csv";

#[derive(Parser, Debug)]
#[command(name = "lsgcl", version, about = "Local semantic subgraph contrastive learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract and cache the semantic subgraph of every node.
    Preprocess(CommonArgs),
    /// Train the encoder; writes a checkpoint and the per-epoch loss.
    Train(CommonArgs),
    /// Export node embeddings from the checkpoint.
    Embed(CommonArgs),
    /// Node classification with a linear probe over several seeds.
    EvalNc(CommonArgs),
    /// Link prediction, retraining on every edge split.
    EvalLp(CommonArgs),
    /// Sweep subgraph size, sampler or loss mode.
    Ablate(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Preprocess(_) => "preprocess",
            Command::Train(_) => "train",
            Command::Embed(_) => "embed",
            Command::EvalNc(_) => "eval-nc",
            Command::EvalLp(_) => "eval-lp",
            Command::Ablate(_) => "ablate",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Preprocess(a)
            | Command::Train(a)
            | Command::Embed(a)
            | Command::EvalNc(a)
            | Command::EvalLp(a)
            | Command::Ablate(a) => a,
        }
    }
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Rebuild the subgraph cache even when it matches the config.
    #[arg(long)]
    force: bool,
    /// Hyperparameter preset: cora, citeseer, pubmed or custom.
    #[arg(long)]
    dataset: Option<String>,
    /// Any other config key, as `--key value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

/// Which axis `ablate` sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    SubgraphSize,
    Sampler,
    LossMode,
}

impl Sweep {
    pub fn as_str(self) -> &'static str {
        match self {
            Sweep::SubgraphSize => "subgraph-size",
            Sweep::Sampler => "sampler",
            Sweep::LossMode => "loss-mode",
        }
    }
}

impl std::str::FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subgraph-size" | "size" => Ok(Sweep::SubgraphSize),
            "sampler" => Ok(Sweep::Sampler),
            "loss-mode" | "loss" => Ok(Sweep::LossMode),
            _ => Err(Error::Argument(format!(
                "unknown sweep {s:?} (expected subgraph-size, sampler or loss-mode)"
            ))),
        }
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: String,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// `train.seed` doubles as the run seed.
    pub train: TrainConfig,
    pub sampler: SamplerLabel,
    pub hops: usize,
    pub walk_len: usize,
    pub view: EmbeddingView,
    pub per_class: usize,
    pub seeds: usize,
    pub test_frac: f64,
    pub probe: ProbeConfig,
    pub sweep: Sweep,
    pub sweep_sizes: Vec<usize>,
    pub log_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: "custom".into(),
            edges: None,
            features: None,
            labels: None,
            out_dir: PathBuf::from("runs"),
            train: TrainConfig::default(),
            sampler: SamplerLabel::Rank,
            hops: 2,
            walk_len: 100,
            view: EmbeddingView::Global,
            per_class: 20,
            seeds: 10,
            test_frac: 0.4,
            probe: ProbeConfig::default(),
            sweep: Sweep::SubgraphSize,
            sweep_sizes: vec![2, 5, 10, 15, 20, 25, 30],
            log_every: 10,
        }
    }
}

/// Keys that select inputs or affect subgraph extraction; they make up the cache key.
const CACHE_KEYS: [&str; 9] = [
    "edges",
    "features",
    "labels",
    "restart_prob",
    "subgraph_size",
    "ppr_max_iters",
    "ppr_tol",
    "sampler",
    "hops",
];

fn canonical_key(raw: &str) -> String {
    let key = raw.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase();
    match key.as_str() {
        "alpha" => "margin".into(),
        "k" => "subgraph_size".into(),
        "p" => "restart_prob".into(),
        "learning_rate" => "lr".into(),
        "loss" => "loss_mode".into(),
        _ => key,
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Argument(format!("config key {key}: cannot parse {value:?}")))
}

/// An empty value clears the path.
fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn parse_optional_count(key: &str, value: &str, none_word: &str) -> Result<Option<usize>> {
    if value.eq_ignore_ascii_case(none_word) {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

impl RunConfig {
    /// Defaults with a named preset applied. Pubmed switches the margin and
    /// the embedding width; other names keep the defaults.
    pub fn preset(dataset: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        match dataset.to_ascii_lowercase().as_str() {
            "pubmed" => {
                cfg.train.loss.margin = 0.35;
                cfg.train.embedding_dim = 450;
            }
            "cora" | "citeseer" | "custom" => {}
            other => {
                return Err(Error::Argument(format!(
                    "unknown dataset preset {other:?} (expected cora, citeseer, pubmed or custom)"
                )))
            }
        }
        cfg.dataset = dataset.to_ascii_lowercase();
        Ok(cfg)
    }

    /// Sets one key; unknown keys are an error.
    pub fn set(&mut self, raw_key: &str, value: &str) -> Result<()> {
        let key = canonical_key(raw_key);
        let value = value.trim();
        let k = key.as_str();
        let t = &mut self.train;
        match k {
            "dataset" => {
                return Err(Error::Argument(
                    "dataset selects a preset and must be set before other keys".into(),
                ))
            }
            "edges" => self.edges = optional_path(value),
            "features" => self.features = optional_path(value),
            "labels" => self.labels = optional_path(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => t.seed = parse_num(k, value)?,
            "restart_prob" => t.ppr.restart_prob = parse_num(k, value)?,
            "subgraph_size" => t.ppr.subgraph_size = parse_num(k, value)?,
            "ppr_max_iters" => t.ppr.max_iters = parse_num(k, value)?,
            "ppr_tol" => t.ppr.tol = parse_num(k, value)?,
            "sampler" => self.sampler = value.parse()?,
            "hops" => self.hops = parse_num(k, value)?,
            "walk_len" => self.walk_len = parse_num(k, value)?,
            "margin" => t.loss.margin = parse_num(k, value)?,
            "loss_mode" => t.loss.mode = value.parse()?,
            "literal_sign" => t.loss.literal_sign = parse_num(k, value)?,
            "embedding_dim" => t.embedding_dim = parse_num(k, value)?,
            "lr" => t.learning_rate = parse_num(k, value)?,
            "epochs" => t.epochs = parse_num(k, value)?,
            "batch_size" => t.batch_size = parse_optional_count(k, value, "auto")?,
            "patience" => t.patience = parse_optional_count(k, value, "none")?,
            "adam_beta1" => t.adam_beta1 = parse_num(k, value)?,
            "adam_beta2" => t.adam_beta2 = parse_num(k, value)?,
            "adam_eps" => t.adam_eps = parse_num(k, value)?,
            "view" => self.view = value.parse()?,
            "per_class" => self.per_class = parse_num(k, value)?,
            "seeds" => self.seeds = parse_num(k, value)?,
            "test_frac" => self.test_frac = parse_num(k, value)?,
            "probe_lr" => self.probe.learning_rate = parse_num(k, value)?,
            "probe_iters" => self.probe.iterations = parse_num(k, value)?,
            "probe_l2" => self.probe.weight_decay = parse_num(k, value)?,
            "sweep" => self.sweep = value.parse()?,
            "sweep_sizes" => {
                self.sweep_sizes = value
                    .split(',')
                    .map(|s| parse_num(k, s.trim()))
                    .collect::<Result<_>>()?
            }
            "log_every" => self.log_every = parse_num(k, value)?,
            _ => return Err(Error::Argument(format!("unknown config key {raw_key:?}"))),
        }
        Ok(())
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let t = &self.train;
        vec![
            ("dataset", self.dataset.clone()),
            ("edges", path(&self.edges)),
            ("features", path(&self.features)),
            ("labels", path(&self.labels)),
            ("out_dir", self.out_dir.display().to_string()),
            ("seed", t.seed.to_string()),
            ("restart_prob", t.ppr.restart_prob.to_string()),
            ("subgraph_size", t.ppr.subgraph_size.to_string()),
            ("ppr_max_iters", t.ppr.max_iters.to_string()),
            ("ppr_tol", t.ppr.tol.to_string()),
            ("sampler", self.sampler.to_string()),
            ("hops", self.hops.to_string()),
            ("walk_len", self.walk_len.to_string()),
            ("margin", t.loss.margin.to_string()),
            ("loss_mode", t.loss.mode.to_string()),
            ("literal_sign", t.loss.literal_sign.to_string()),
            ("embedding_dim", t.embedding_dim.to_string()),
            ("lr", t.learning_rate.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.map_or("auto".into(), |b| b.to_string())),
            ("patience", t.patience.map_or("none".into(), |p| p.to_string())),
            ("adam_beta1", t.adam_beta1.to_string()),
            ("adam_beta2", t.adam_beta2.to_string()),
            ("adam_eps", t.adam_eps.to_string()),
            ("view", self.view.to_string()),
            ("per_class", self.per_class.to_string()),
            ("seeds", self.seeds.to_string()),
            ("test_frac", self.test_frac.to_string()),
            ("probe_lr", self.probe.learning_rate.to_string()),
            ("probe_iters", self.probe.iterations.to_string()),
            ("probe_l2", self.probe.weight_decay.to_string()),
            ("sweep", self.sweep.as_str().to_string()),
            (
                "sweep_sizes",
                self.sweep_sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            ),
            ("log_every", self.log_every.to_string()),
        ]
    }

    /// The sampler with its parameters; random walks are seeded by the run seed.
    pub fn sampler_kind(&self) -> SamplerKind {
        match self.sampler {
            SamplerLabel::Rank => SamplerKind::Rank,
            SamplerLabel::KHop => SamplerKind::KHop { hops: self.hops },
            SamplerLabel::RandomWalk => SamplerKind::RandomWalk {
                walk_len: self.walk_len,
                seed: self.train.seed,
            },
        }
    }

    /// Training settings with the sampler filled in.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            sampler: self.sampler_kind(),
            ..self.train.clone()
        }
    }

    /// Evaluation seeds `seed, seed + 1, …`.
    pub fn eval_seeds(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.train.seed.wrapping_add(i)).collect()
    }

    /// SHA-256 over the full resolved config.
    pub fn hash(&self) -> String {
        hash_lines(self.entries().iter().map(|(k, v)| format!("{k} = {v}")))
    }

    pub fn load_graph(&self) -> Result<Graph> {
        let need = |p: &Option<PathBuf>, key: &str| {
            p.clone()
                .ok_or_else(|| Error::Argument(format!("config key {key} is not set")))
        };
        let edges = need(&self.edges, "edges")?;
        let features = need(&self.features, "features")?;
        load_edge_list(&edges, &features, self.labels.as_deref())
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `key = value`"))?;
        out.push((canonical_key(k), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits trailing `--key value` / `--key=value` words into pairs. `--force`
/// takes no value.
fn parse_overrides(words: &[String]) -> Result<(Vec<(String, String)>, bool)> {
    let mut pairs = Vec::new();
    let mut force = false;
    let mut it = words.iter();
    while let Some(w) = it.next() {
        let Some(flag) = w.strip_prefix("--") else {
            return Err(Error::Argument(format!("unexpected argument {w:?}")));
        };
        if flag == "force" {
            force = true;
            continue;
        }
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Argument(format!("flag --{flag} needs a value")))?;
                (flag.to_string(), v.clone())
            }
        };
        pairs.push((canonical_key(&key), value));
    }
    Ok((pairs, force))
}

struct Resolved {
    cfg: RunConfig,
    force: bool,
    config_file: Option<PathBuf>,
}

fn resolve(args: &CommonArgs) -> Result<Resolved> {
    let (mut flags, force_late) = parse_overrides(&args.overrides)?;
    let mut config_file = args.config.clone();
    if let Some(pos) = flags.iter().position(|(k, _)| k == "config") {
        config_file = Some(PathBuf::from(flags.remove(pos).1));
    }
    if let Some(seed) = args.seed {
        flags.push(("seed".into(), seed.to_string()));
    }
    if let Some(dir) = &args.out_dir {
        flags.push(("out_dir".into(), dir.display().to_string()));
    }
    let mut file_pairs = Vec::new();
    if let Some(path) = &config_file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        file_pairs = parse_config_text(&text, path)?;
    }
    let take_dataset = |pairs: &mut Vec<(String, String)>| {
        let found = pairs.iter().rposition(|(k, _)| k == "dataset");
        found.map(|i| pairs.remove(i).1)
    };
    let dataset = args
        .dataset
        .clone()
        .or(take_dataset(&mut flags))
        .or(take_dataset(&mut file_pairs))
        .unwrap_or_else(|| "custom".into());
    flags.retain(|(k, _)| k != "dataset");
    file_pairs.retain(|(k, _)| k != "dataset");
    let mut cfg = RunConfig::preset(&dataset)?;
    for (k, v) in file_pairs.iter().chain(flags.iter()) {
        cfg.set(k, v)?;
    }
    Ok(Resolved {
        cfg,
        force: args.force || force_late,
        config_file,
    })
}

fn hash_lines<I: IntoIterator<Item = String>>(lines: I) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Hash of everything the subgraph cache depends on, including the input
/// file contents.
fn cache_key(cfg: &RunConfig) -> Result<String> {
    let mut lines: Vec<String> = cfg
        .entries()
        .into_iter()
        .filter(|(k, _)| CACHE_KEYS.contains(k))
        .map(|(k, v)| format!("{k} = {v}"))
        .collect();
    if cfg.sampler == SamplerLabel::RandomWalk {
        lines.push(format!("walk_len = {}", cfg.walk_len));
        lines.push(format!("seed = {}", cfg.train.seed));
    }
    for p in [&cfg.edges, &cfg.features, &cfg.labels].into_iter().flatten() {
        lines.push(format!("digest {}", file_digest(p)?));
    }
    Ok(hash_lines(lines))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Record of one command invocation, written as `<command>.json` in the
/// output directory before any artifact is produced and updated at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: String,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub config_file: Option<PathBuf>,
    pub seed: u64,
    pub dataset: BTreeMap<String, PathBuf>,
    pub artifacts: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_key: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

impl RunManifest {
    fn new(command: &str, r: &Resolved) -> Self {
        let cfg = &r.cfg;
        let dataset = [("edges", &cfg.edges), ("features", &cfg.features), ("labels", &cfg.labels)]
            .into_iter()
            .filter_map(|(k, p)| p.clone().map(|p| (k.to_string(), p)))
            .collect();
        Self {
            command: command.into(),
            status: "running".into(),
            config: cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            config_hash: cfg.hash(),
            config_file: r.config_file.clone(),
            seed: cfg.train.seed,
            dataset,
            artifacts: BTreeMap::new(),
            cache_key: None,
            notes: BTreeMap::new(),
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    pub fn path(out_dir: &Path, command: &str) -> PathBuf {
        out_dir.join(format!("{command}.json"))
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        let path = Self::path(out_dir, &self.command);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    fn finish(&mut self, out_dir: &Path, outcome: &Result<()>) -> Result<()> {
        self.status = match outcome {
            Ok(()) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        };
        self.finished_unix = Some(unix_now());
        self.write(out_dir)
    }
}

/// Runs `body` between a "running" and a final manifest write.
fn with_manifest<F>(command: &str, r: &Resolved, artifacts: &[(&str, &str)], body: F) -> Result<()>
where
    F: FnOnce(&mut RunManifest) -> Result<()>,
{
    let out_dir = &r.cfg.out_dir;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut m = RunManifest::new(command, r);
    for (name, file) in artifacts {
        m.artifacts.insert(name.to_string(), out_dir.join(file));
    }
    m.write(out_dir)?;
    let outcome = body(&mut m);
    m.finish(out_dir, &outcome)?;
    outcome
}

/// Loads the cached subgraphs when the preprocess manifest matches the
/// current cache key, else extracts and writes them.
fn ensure_cache(r: &Resolved, g: &Graph, m: &mut RunManifest) -> Result<SubgraphSet> {
    let out_dir = &r.cfg.out_dir;
    let cache_path = out_dir.join(CACHE_FILE);
    let key = cache_key(&r.cfg)?;
    m.cache_key = Some(key.clone());
    m.artifacts.insert("subgraph_cache".into(), cache_path.clone());
    let manifest_path = RunManifest::path(out_dir, "preprocess");
    let reusable = !r.force
        && cache_path.exists()
        && RunManifest::read(&manifest_path)
            .map(|pm| pm.status == "ok" && pm.cache_key.as_deref() == Some(key.as_str()))
            .unwrap_or(false);
    if reusable {
        if let Ok(set) = SubgraphSet::read_cache(&cache_path, g) {
            println!("cache reused: {}", cache_path.display());
            return Ok(set);
        }
    }
    let set = precompute_subgraphs(g, &r.cfg.train.ppr, r.cfg.sampler_kind())?;
    set.write_cache(&cache_path)?;
    let mut pm = RunManifest::new("preprocess", r);
    pm.cache_key = Some(key);
    pm.artifacts.insert("subgraph_cache".into(), cache_path.clone());
    pm.finish(out_dir, &Ok(()))?;
    println!("cache written: {}", cache_path.display());
    Ok(set)
}

fn cmd_preprocess(r: &Resolved) -> Result<()> {
    let out_dir = r.cfg.out_dir.clone();
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let g = r.cfg.load_graph()?;
    // ensure_cache owns the preprocess manifest.
    let mut scratch = RunManifest::new("preprocess", r);
    ensure_cache(r, &g, &mut scratch).map(|_| ())
}

fn cmd_train(r: &Resolved) -> Result<()> {
    let out_dir = r.cfg.out_dir.clone();
    let ckpt = out_dir.join(CHECKPOINT_FILE);
    let loss = out_dir.join(LOSS_FILE);
    let result = with_manifest(
        "train",
        r,
        &[("checkpoint", CHECKPOINT_FILE), ("loss_trace", LOSS_FILE)],
        |m| {
            let g = r.cfg.load_graph()?;
            let subs = ensure_cache(r, &g, m)?;
            let cfg = r.cfg.train_config();
            cfg.validate()?;
            let init = crate::encoder::init_params(g.num_features(), cfg.embedding_dim, cfg.seed)?;
            let every = r.cfg.log_every;
            let out = train_from(&g, &subs, &cfg, init, |epoch, loss| {
                if every > 0 && (epoch + 1) % every == 0 {
                    eprintln!("epoch {:>4}  loss {loss:.6}", epoch + 1);
                }
            })?;
            out.params.write_checkpoint(&ckpt)?;
            write_loss_trace(&loss, &out.loss_trace)?;
            m.notes.insert("epochs_run".into(), out.loss_trace.len().to_string());
            println!(
                "trained {} epochs, final loss {:.6}",
                out.loss_trace.len(),
                out.loss_trace.last().copied().unwrap_or(f64::NAN)
            );
            Ok(())
        },
    );
    if result.is_err() {
        for p in [&ckpt, &ckpt.with_extension("tmp"), &loss] {
            let _ = fs::remove_file(p);
        }
    }
    result
}

/// Graph, subgraphs and trained parameters for the commands that consume a checkpoint.
fn load_trained(r: &Resolved, m: &mut RunManifest) -> Result<(Graph, SubgraphSet, EncoderParams)> {
    let g = r.cfg.load_graph()?;
    let ckpt = r.cfg.out_dir.join(CHECKPOINT_FILE);
    if !ckpt.exists() {
        return Err(Error::State(format!(
            "no checkpoint at {}; run `lsgcl train` first",
            ckpt.display()
        )));
    }
    m.artifacts.insert("checkpoint".into(), ckpt.clone());
    let params = EncoderParams::read_checkpoint(&ckpt)?;
    params.validate()?;
    if params.input_dim() != g.num_features() {
        return Err(Error::Argument(format!(
            "checkpoint expects {} features, graph has {}",
            params.input_dim(),
            g.num_features()
        )));
    }
    let subs = ensure_cache(r, &g, m)?;
    Ok((g, subs, params))
}

fn cmd_embed(r: &Resolved) -> Result<()> {
    with_manifest("embed", r, &[("embeddings", EMBEDDINGS_FILE)], |m| {
        let (g, subs, params) = load_trained(r, m)?;
        let emb = export_embeddings(&g, &subs, &params, r.cfg.view)?;
        let path = r.cfg.out_dir.join(EMBEDDINGS_FILE);
        write_embeddings(&path, &emb)?;
        println!("wrote {}x{} {} embeddings to {}", emb.rows(), emb.cols(), r.cfg.view, path.display());
        Ok(())
    })
}

fn print_report(path: &Path, reports: &[MetricReport]) {
    for rep in reports {
        for row in &rep.rows {
            println!(
                "{:<20} {:<10} {:.4} ± {:.4} ({} seeds)",
                rep.task,
                row.metric,
                row.mean,
                row.std,
                row.values.len()
            );
        }
    }
    println!("report: {}", path.display());
}

fn require_seeds(cfg: &RunConfig) -> Result<()> {
    if cfg.seeds == 0 {
        return Err(Error::Argument("seeds must be at least 1".into()));
    }
    Ok(())
}

fn cmd_eval_nc(r: &Resolved) -> Result<()> {
    with_manifest("eval-nc", r, &[("report", NC_REPORT_FILE)], |m| {
        require_seeds(&r.cfg)?;
        if r.cfg.labels.is_none() {
            return Err(Error::State("node classification needs labels (config key labels)".into()));
        }
        let (g, subs, params) = load_trained(r, m)?;
        g.require_labels()?;
        let emb = export_embeddings(&g, &subs, &params, r.cfg.view)?;
        let report = evaluate_nc(&emb, &g, r.cfg.per_class, &r.cfg.eval_seeds(), &r.cfg.probe)?;
        let path = r.cfg.out_dir.join(NC_REPORT_FILE);
        write_reports(&path, std::slice::from_ref(&report))?;
        print_report(&path, &[report]);
        Ok(())
    })
}

fn cmd_eval_lp(r: &Resolved) -> Result<()> {
    with_manifest("eval-lp", r, &[("report", LP_REPORT_FILE)], |_| {
        require_seeds(&r.cfg)?;
        let g = r.cfg.load_graph()?;
        let report = evaluate_lp(
            &g,
            &r.cfg.train_config(),
            r.cfg.view,
            r.cfg.test_frac,
            &r.cfg.eval_seeds(),
            &r.cfg.probe,
        )?;
        let path = r.cfg.out_dir.join(LP_REPORT_FILE);
        write_reports(&path, std::slice::from_ref(&report))?;
        print_report(&path, &[report]);
        Ok(())
    })
}

/// Sweep points as (row label, config for that point).
pub fn sweep_points(cfg: &RunConfig) -> Vec<(String, RunConfig)> {
    let with = |f: &dyn Fn(&mut RunConfig)| {
        let mut c = cfg.clone();
        f(&mut c);
        c
    };
    match cfg.sweep {
        Sweep::SubgraphSize => cfg
            .sweep_sizes
            .iter()
            .map(|&k| (format!("size:{k}"), with(&|c| c.train.ppr.subgraph_size = k)))
            .collect(),
        Sweep::Sampler => [SamplerLabel::Rank, SamplerLabel::KHop, SamplerLabel::RandomWalk]
            .into_iter()
            .map(|s| (format!("sampler:{s}"), with(&|c| c.sampler = s)))
            .collect(),
        Sweep::LossMode => [LossMode::Full, LossMode::NsOnly, LossMode::NgOnly]
            .into_iter()
            .map(|mode| (format!("loss:{mode}"), with(&|c| c.train.loss.mode = mode)))
            .collect(),
    }
}

/// Full pipeline for one sweep point: subgraphs, training, node classification.
pub fn run_nc_point(g: &Graph, cfg: &RunConfig) -> Result<MetricSummary> {
    let train_cfg = cfg.train_config();
    let subs = precompute_subgraphs(g, &train_cfg.ppr, train_cfg.sampler)?;
    let init = crate::encoder::init_params(g.num_features(), train_cfg.embedding_dim, train_cfg.seed)?;
    let out = train_from(g, &subs, &train_cfg, init, |_, _| {})?;
    let emb = export_embeddings(g, &subs, &out.params, cfg.view)?;
    let report = evaluate_nc(&emb, g, cfg.per_class, &cfg.eval_seeds(), &cfg.probe)?;
    Ok(report.rows.into_iter().next().expect("one accuracy row"))
}

fn cmd_ablate(r: &Resolved) -> Result<()> {
    let file = format!("ablate_{}.csv", r.cfg.sweep.as_str());
    with_manifest("ablate", r, &[("report", file.as_str())], |m| {
        require_seeds(&r.cfg)?;
        let g = r.cfg.load_graph()?;
        g.require_labels()?;
        let mut reports = Vec::new();
        for (label, point) in sweep_points(&r.cfg) {
            let row = match run_nc_point(&g, &point) {
                Ok(row) => {
                    m.notes.insert(label.clone(), "ok".into());
                    row
                }
                Err(e) => {
                    eprintln!("{label}: failed: {e}");
                    m.notes.insert(label.clone(), format!("failed: {e}"));
                    MetricSummary {
                        metric: "accuracy".into(),
                        mean: f64::NAN,
                        std: f64::NAN,
                        values: Vec::new(),
                    }
                }
            };
            reports.push(MetricReport {
                task: label,
                rows: vec![row],
            });
        }
        let path = r.cfg.out_dir.join(&file);
        write_reports(&path, &reports)?;
        print_report(&path, &reports);
        Ok(())
    })
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = resolve(cli.command.args()).and_then(|r| match &cli.command {
        Command::Preprocess(_) => cmd_preprocess(&r),
        Command::Train(_) => cmd_train(&r),
        Command::Embed(_) => cmd_embed(&r),
        Command::EvalNc(_) => cmd_eval_nc(&r),
        Command::EvalLp(_) => cmd_eval_lp(&r),
        Command::Ablate(_) => cmd_ablate(&r),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lsgcl {}: error: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
