//! Adam and the self-supervised training loop.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::contrastive::{multi_level_loss, sample_negatives, LossConfig};
use crate::encoder::{backward, init_params, EncoderParams, ParamGrads, ViewEncoder};
use crate::error::{Error, Result};
use crate::graph::{write_row, Graph};
use crate::linalg::Dense;
use crate::sampler::{PprConfig, SamplerKind, SubgraphSet};

/// Graphs up to this size train with one full-node batch by default.
pub const FULL_BATCH_LIMIT: usize = 5000;
pub const LARGE_GRAPH_BATCH: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// `None` picks full-batch for small graphs and 2000 otherwise.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub embedding_dim: usize,
    /// Stop after this many epochs without a new best mean loss.
    pub patience: Option<usize>,
    pub loss: LossConfig,
    pub ppr: PprConfig,
    pub sampler: SamplerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            batch_size: None,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            embedding_dim: 1000,
            patience: Some(50),
            loss: LossConfig::default(),
            ppr: PprConfig::default(),
            sampler: SamplerKind::Rank,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if let Some(b) = self.batch_size {
            if b < 2 {
                return Err(Error::Argument("batch size must be at least 2".into()));
            }
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Argument(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Argument("embedding dim must be at least 1".into()));
        }
        self.loss.validate()?;
        self.ppr.validate()
    }

    pub fn effective_batch_size(&self, n: usize) -> usize {
        self.batch_size.unwrap_or(if n <= FULL_BATCH_LIMIT {
            n
        } else {
            LARGE_GRAPH_BATCH
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: ParamGrads,
    pub second: ParamGrads,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &EncoderParams, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

fn grad_blocks_mut(g: &mut ParamGrads) -> [&mut [f64]; 4] {
    [
        g.gcn_weight.as_mut_slice(),
        std::slice::from_mut(&mut g.prelu_slope),
        g.mlp_weight.as_mut_slice(),
        &mut g.mlp_bias,
    ]
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut EncoderParams,
    grads: &ParamGrads,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    for (name, g) in grads.blocks() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric { block: name });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let grad_blocks = grads.blocks();
    let m_blocks = grad_blocks_mut(&mut state.first);
    let v_blocks = grad_blocks_mut(&mut state.second);
    for ((((_, theta), (_, g)), m), v) in params
        .blocks_mut()
        .into_iter()
        .zip(grad_blocks)
        .zip(m_blocks)
        .zip(v_blocks)
    {
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    /// Mean loss of each completed epoch.
    pub loss_trace: Vec<f64>,
}

/// Epoch batches: a seeded shuffle cut into `batch_size` chunks, with a
/// trailing singleton folded into the previous batch.
fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        let tail = batches.pop().unwrap();
        batches.last_mut().unwrap().extend(tail);
    }
    batches
}

/// Trains from a fresh initialization seeded by `cfg.seed`.
pub fn train(g: &Graph, subs: &SubgraphSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if g.num_nodes() < 2 {
        return Err(Error::Argument(format!(
            "training needs at least 2 nodes, graph has {}",
            g.num_nodes()
        )));
    }
    let params = init_params(g.num_features(), cfg.embedding_dim, cfg.seed)?;
    train_from(g, subs, cfg, params, |_, _| {})
}

/// Trains starting from `params`, calling `on_epoch(epoch, mean_loss)` after each epoch.
pub fn train_from<F>(
    g: &Graph,
    subs: &SubgraphSet,
    cfg: &TrainConfig,
    mut params: EncoderParams,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(usize, f64),
{
    cfg.validate()?;
    let n = g.num_nodes();
    if n < 2 {
        return Err(Error::Argument("training needs at least 2 nodes".into()));
    }
    let encoder = ViewEncoder::new(g, subs)?;
    let batch_size = cfg.effective_batch_size(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(&params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for epoch in 0..cfg.epochs {
        let mut weighted = 0.0;
        for batch in epoch_batches(n, batch_size, &mut rng) {
            let views = encoder.forward(&batch, &params)?;
            let neg = sample_negatives(batch.len(), &mut rng)?;
            let out = multi_level_loss(&views, &neg, &cfg.loss)?;
            if !out.loss.is_finite() {
                return Err(Error::Numeric { block: "loss" });
            }
            let grads = backward(&views, &out.grads, &params)?;
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate)?;
            weighted += out.loss * batch.len() as f64;
        }
        let mean = weighted / n as f64;
        trace.push(mean);
        on_epoch(epoch, mean);
        if mean < best {
            best = mean;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params,
        loss_trace: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingView {
    #[default]
    Global,
    Subgraph,
    Concat,
}

impl fmt::Display for EmbeddingView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingView::Global => "global",
            EmbeddingView::Subgraph => "subgraph",
            EmbeddingView::Concat => "concat",
        })
    }
}

impl FromStr for EmbeddingView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "global" => Ok(EmbeddingView::Global),
            "subgraph" => Ok(EmbeddingView::Subgraph),
            "concat" => Ok(EmbeddingView::Concat),
            _ => Err(Error::Argument(format!(
                "unknown embedding view {s:?} (expected global, subgraph or concat)"
            ))),
        }
    }
}

/// Per-node embeddings from trained parameters.
pub fn export_embeddings(
    g: &Graph,
    subs: &SubgraphSet,
    params: &EncoderParams,
    view: EmbeddingView,
) -> Result<Dense> {
    let enc = ViewEncoder::new(g, subs)?;
    let subgraph_rows = || -> Result<Dense> {
        let all: Vec<usize> = (0..g.num_nodes()).collect();
        Ok(enc.forward(&all, params)?.h_sub)
    };
    match view {
        EmbeddingView::Global => enc.global_embeddings(params),
        EmbeddingView::Subgraph => subgraph_rows(),
        EmbeddingView::Concat => enc.global_embeddings(params)?.hconcat(&subgraph_rows()?),
    }
}

/// `N D'` header, then `node_id v_1 … v_D'` per line.
pub fn write_embeddings(path: &Path, emb: &Dense) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{} {}", emb.rows(), emb.cols()).map_err(io)?;
    for (i, r) in emb.iter_rows().enumerate() {
        write!(w, "{i} ").map_err(io)?;
        write_row(&mut w, r).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_embeddings(path: &Path) -> Result<Dense> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::parse(path, 1, "bad header")))
        .collect::<Result<_>>()?;
    let [n, d] = dims[..] else {
        return Err(Error::parse(path, 1, "header must be \"N D\""));
    };
    let mut emb = Dense::zeros(n, d);
    let mut seen = 0;
    for (ln, line) in lines {
        let mut toks = line.split_whitespace();
        let Some(id) = toks.next() else { continue };
        let id: usize = id.parse().map_err(|_| Error::parse(path, ln, "bad node id"))?;
        if id >= n {
            return Err(Error::Range { id, n });
        }
        let vals: Vec<f64> = toks
            .map(|t| t.parse().map_err(|_| Error::parse(path, ln, format!("bad value {t:?}"))))
            .collect::<Result<_>>()?;
        if vals.len() != d {
            return Err(Error::parse(path, ln, format!("expected {d} values")));
        }
        emb.row_mut(id).copy_from_slice(&vals);
        seen += 1;
    }
    if seen != n {
        return Err(Error::parse(path, 1, format!("expected {n} rows, found {seen}")));
    }
    Ok(emb)
}

/// CSV `epoch,mean_loss`.
pub fn write_loss_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,mean_loss\n");
    for (e, l) in trace.iter().enumerate() {
        out.push_str(&format!("{e},{l}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
