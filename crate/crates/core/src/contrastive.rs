//! Margin-triplet contrastive objective over the three embedding views.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::encoder::{EmbeddingViews, ViewGrads};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Dense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossMode {
    /// Mean of the node/subgraph, node/global and global/subgraph terms.
    Full,
    /// Node/subgraph term alone.
    NsOnly,
    /// Node/global term alone.
    NgOnly,
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::Full => "FULL",
            LossMode::NsOnly => "NS_ONLY",
            LossMode::NgOnly => "NG_ONLY",
        })
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "FULL" => Ok(LossMode::Full),
            "NS_ONLY" | "NS" => Ok(LossMode::NsOnly),
            "NG_ONLY" | "NG" => Ok(LossMode::NgOnly),
            _ => Err(Error::Argument(format!(
                "unknown loss mode {s:?} (expected FULL, NS_ONLY or NG_ONLY)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Margin `α`.
    pub margin: f64,
    pub mode: LossMode,
    /// Use `max(σ(a·p) − σ(a·n) + α, 0)` instead of the standard
    /// `max(σ(a·n) − σ(a·p) + α, 0)`. For comparison runs only.
    pub literal_sign: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            margin: 0.5,
            mode: LossMode::Full,
            literal_sign: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(Error::Argument(format!(
                "margin must be finite and non-negative, got {}",
                self.margin
            )));
        }
        Ok(())
    }
}

/// Negative index for each batch position: `(b + r) mod B` for one shift
/// `r` drawn uniformly from `1..B`.
pub fn sample_negatives<R: Rng + ?Sized>(batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
    if batch_size < 2 {
        return Err(Error::Argument(format!(
            "negative sampling needs a batch of at least 2, got {batch_size}"
        )));
    }
    let shift = rng.gen_range(1..batch_size);
    Ok((0..batch_size).map(|b| (b + shift) % batch_size).collect())
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletTerm {
    pub loss: f64,
    pub d_anchor: Vec<f64>,
    pub d_positive: Vec<f64>,
    pub d_negative: Vec<f64>,
}

/// `max(σ(a·n) − σ(a·p) + α, 0)` and its subgradient (zero at the kink).
pub fn triplet_term(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> TripletTerm {
    triplet_term_signed(anchor, positive, negative, margin, false)
}

fn triplet_term_signed(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
    literal_sign: bool,
) -> TripletTerm {
    let d = anchor.len();
    let s_pos = logistic(dot(anchor, positive));
    let s_neg = logistic(dot(anchor, negative));
    // sign flips which similarity the hinge pushes up
    let sign = if literal_sign { -1.0 } else { 1.0 };
    let raw = sign * (s_neg - s_pos) + margin;
    let mut term = TripletTerm {
        loss: 0.0,
        d_anchor: vec![0.0; d],
        d_positive: vec![0.0; d],
        d_negative: vec![0.0; d],
    };
    if raw > 0.0 {
        term.loss = raw;
        let gp = -sign * s_pos * (1.0 - s_pos);
        let gn = sign * s_neg * (1.0 - s_neg);
        axpy(gp, positive, &mut term.d_anchor);
        axpy(gn, negative, &mut term.d_anchor);
        axpy(gp, anchor, &mut term.d_positive);
        axpy(gn, anchor, &mut term.d_negative);
    }
    term
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Table {
    HSub,
    GSub,
    HGlob,
}

fn table(v: &EmbeddingViews, t: Table) -> &Dense {
    match t {
        Table::HSub => &v.h_sub,
        Table::GSub => &v.g_sub,
        Table::HGlob => &v.h_glob,
    }
}

fn table_mut(g: &mut ViewGrads, t: Table) -> &mut Dense {
    match t {
        Table::HSub => &mut g.h_sub,
        Table::GSub => &mut g.g_sub,
        Table::HGlob => &mut g.h_glob,
    }
}

/// Individual pairwise losses of one evaluation, before mode weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub node_subgraph: f64,
    pub node_global: f64,
    pub global_subgraph: f64,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub terms: LossBreakdown,
    pub grads: ViewGrads,
}

/// Multi-level loss and its gradient with respect to every view entry.
pub fn multi_level_loss(views: &EmbeddingViews, neg: &[usize], cfg: &LossConfig) -> Result<LossOutput> {
    cfg.validate()?;
    let (b, d) = views.h_sub.shape();
    if views.g_sub.shape() != (b, d) || views.h_glob.shape() != (b, d) {
        return Err(Error::Argument("view tables are not aligned".into()));
    }
    if neg.len() != b || b == 0 {
        return Err(Error::Argument(format!(
            "negative index has length {}, batch is {b}",
            neg.len()
        )));
    }
    if let Some((i, _)) = neg.iter().enumerate().find(|&(i, &j)| j >= b || j == i) {
        return Err(Error::Argument(format!("invalid negative for position {i}")));
    }

    // (anchor table, positive/negative table)
    let pairs = [
        (Table::HSub, Table::GSub),
        (Table::HSub, Table::HGlob),
        (Table::HGlob, Table::GSub),
    ];
    let weights = match cfg.mode {
        LossMode::Full => [1.0 / 3.0; 3],
        LossMode::NsOnly => [1.0, 0.0, 0.0],
        LossMode::NgOnly => [0.0, 1.0, 0.0],
    };

    // Scalar averages are running means so that equal terms average to
    // exactly their common value.
    let mut grads = ViewGrads::zeros(b, d);
    let mut term_losses = [0.0; 3];
    for (pi, &(anchor_t, other_t)) in pairs.iter().enumerate() {
        let anchors = table(views, anchor_t);
        let others = table(views, other_t);
        let scale = weights[pi] / b as f64;
        let mut mean = 0.0;
        for i in 0..b {
            let t = triplet_term_signed(
                anchors.row(i),
                others.row(i),
                others.row(neg[i]),
                cfg.margin,
                cfg.literal_sign,
            );
            mean += (t.loss - mean) / (i + 1) as f64;
            if scale != 0.0 && t.loss > 0.0 {
                axpy(scale, &t.d_anchor, table_mut(&mut grads, anchor_t).row_mut(i));
                axpy(scale, &t.d_positive, table_mut(&mut grads, other_t).row_mut(i));
                axpy(scale, &t.d_negative, table_mut(&mut grads, other_t).row_mut(neg[i]));
            }
        }
        term_losses[pi] = mean;
    }
    let terms = LossBreakdown {
        node_subgraph: term_losses[0],
        node_global: term_losses[1],
        global_subgraph: term_losses[2],
    };
    let loss = match cfg.mode {
        LossMode::Full => term_losses
            .iter()
            .enumerate()
            .fold(0.0, |m, (k, &t)| m + (t - m) / (k + 1) as f64),
        LossMode::NsOnly => term_losses[0],
        LossMode::NgOnly => term_losses[1],
    };
    Ok(LossOutput { loss, terms, grads })
}
