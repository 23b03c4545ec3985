//! One-layer GCN encoder with a shared PReLU slope and an affine head:
//! `H = PReLU(Â·X·W)·M + b`, where `Â` is the symmetric self-loop
//! normalization of whichever graph (global or subgraph) is being encoded.
//!
//! [`ViewEncoder`] evaluates the three views used for training in one pass
//! and keeps what [`backward`] needs. The head is affine, so the mean-pooled
//! subgraph embedding is computed as `mean(PReLU rows)·M + b` and only two
//! head evaluations are spent per subgraph.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, write_row, Graph, NormalizedAdjacency};
use crate::linalg::{accumulate_row_times, axpy, matmul, Dense};
use crate::sampler::{SubgraphSet, SubgraphSpec};

pub const DEFAULT_PRELU_SLOPE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// `F × D` graph-convolution weight.
    pub gcn_weight: Dense,
    pub prelu_slope: f64,
    /// `D × D` head weight.
    pub mlp_weight: Dense,
    pub mlp_bias: Vec<f64>,
}

/// Gradient of a scalar loss with respect to every [`EncoderParams`] block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub gcn_weight: Dense,
    pub prelu_slope: f64,
    pub mlp_weight: Dense,
    pub mlp_bias: Vec<f64>,
}

pub const BLOCK_NAMES: [&str; 4] = ["gcn_weight", "prelu_slope", "mlp_weight", "mlp_bias"];

impl EncoderParams {
    pub fn input_dim(&self) -> usize {
        self.gcn_weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.gcn_weight.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.output_dim();
        if self.mlp_weight.shape() != (d, d) || self.mlp_bias.len() != d {
            return Err(Error::Argument(format!(
                "head is {:?} with bias {}, expected {d}x{d}",
                self.mlp_weight.shape(),
                self.mlp_bias.len()
            )));
        }
        Ok(())
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); 4] {
        [
            (BLOCK_NAMES[0], self.gcn_weight.as_slice()),
            (BLOCK_NAMES[1], std::slice::from_ref(&self.prelu_slope)),
            (BLOCK_NAMES[2], self.mlp_weight.as_slice()),
            (BLOCK_NAMES[3], &self.mlp_bias),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 4] {
        [
            (BLOCK_NAMES[0], self.gcn_weight.as_mut_slice()),
            (BLOCK_NAMES[1], std::slice::from_mut(&mut self.prelu_slope)),
            (BLOCK_NAMES[2], self.mlp_weight.as_mut_slice()),
            (BLOCK_NAMES[3], &mut self.mlp_bias),
        ]
    }

    pub fn zeros_like(&self) -> ParamGrads {
        ParamGrads {
            gcn_weight: Dense::zeros(self.input_dim(), self.output_dim()),
            prelu_slope: 0.0,
            mlp_weight: Dense::zeros(self.output_dim(), self.output_dim()),
            mlp_bias: vec![0.0; self.output_dim()],
        }
    }

    /// Text checkpoint: `F D`, then each block's name on its own line
    /// followed by its values row by row. Written to a temp file and renamed.
    pub fn write_checkpoint(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let io = |e| Error::io(path, e);
        {
            let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut w = BufWriter::new(file);
            writeln!(w, "{} {}", self.input_dim(), self.output_dim()).map_err(io)?;
            writeln!(w, "{}", BLOCK_NAMES[0]).map_err(io)?;
            for r in self.gcn_weight.iter_rows() {
                write_row(&mut w, r).map_err(io)?;
            }
            writeln!(w, "{}", BLOCK_NAMES[1]).map_err(io)?;
            writeln!(w, "{}", self.prelu_slope).map_err(io)?;
            writeln!(w, "{}", BLOCK_NAMES[2]).map_err(io)?;
            for r in self.mlp_weight.iter_rows() {
                write_row(&mut w, r).map_err(io)?;
            }
            writeln!(w, "{}", BLOCK_NAMES[3]).map_err(io)?;
            write_row(&mut w, &self.mlp_bias).map_err(io)?;
            w.flush().map_err(io)?;
        }
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn read_checkpoint(path: &Path) -> Result<EncoderParams> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("unexpected end of file, expected {what}")))
        };
        let (ln, header) = next("header")?;
        let dims = parse_reals(header, path, ln)?;
        if dims.len() != 2 {
            return Err(Error::parse(path, ln, "header must be \"F D\""));
        }
        let (f, d) = (dims[0] as usize, dims[1] as usize);
        let mut read_block = |name: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
            let (ln, tag) = next(name)?;
            if tag != name {
                return Err(Error::parse(path, ln, format!("expected section {name}, got {tag:?}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, line) = next(name)?;
                let row = parse_reals(line, path, ln)?;
                if row.len() != cols {
                    return Err(Error::parse(path, ln, format!("expected {cols} values")));
                }
                data.extend(row);
            }
            Ok(data)
        };
        let w = read_block(BLOCK_NAMES[0], f, d)?;
        let slope = read_block(BLOCK_NAMES[1], 1, 1)?;
        let m = read_block(BLOCK_NAMES[2], d, d)?;
        let b = read_block(BLOCK_NAMES[3], 1, d)?;
        Ok(EncoderParams {
            gcn_weight: Dense::from_vec(f, d, w)?,
            prelu_slope: slope[0],
            mlp_weight: Dense::from_vec(d, d, m)?,
            mlp_bias: b,
        })
    }
}

fn parse_reals(line: &str, path: &Path, ln: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse(path, ln, format!("bad number {t:?}")))
        })
        .collect()
}

impl ParamGrads {
    pub fn blocks(&self) -> [(&'static str, &[f64]); 4] {
        [
            (BLOCK_NAMES[0], self.gcn_weight.as_slice()),
            (BLOCK_NAMES[1], std::slice::from_ref(&self.prelu_slope)),
            (BLOCK_NAMES[2], self.mlp_weight.as_slice()),
            (BLOCK_NAMES[3], &self.mlp_bias),
        ]
    }
}

/// Glorot-uniform weights, zero bias, slope 0.25.
pub fn init_params(f: usize, d: usize, seed: u64) -> Result<EncoderParams> {
    if f == 0 || d == 0 {
        return Err(Error::Argument(format!("encoder dims must be positive, got {f}x{d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut glorot = |rows: usize, cols: usize| {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let data = (0..rows * cols).map(|_| dist.sample(&mut rng)).collect();
        Dense::from_vec(rows, cols, data).expect("shape matches")
    };
    let gcn_weight = glorot(f, d);
    let mlp_weight = glorot(d, d);
    Ok(EncoderParams {
        gcn_weight,
        prelu_slope: DEFAULT_PRELU_SLOPE,
        mlp_weight,
        mlp_bias: vec![0.0; d],
    })
}

#[inline]
fn prelu(z: f64, slope: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        slope * z
    }
}

fn prelu_table(z: &Dense, slope: f64) -> Dense {
    let data = z.as_slice().iter().map(|&v| prelu(v, slope)).collect();
    Dense::from_vec(z.rows(), z.cols(), data).expect("same shape")
}

/// `acts · M + b`, row by row.
fn head(acts: &Dense, params: &EncoderParams) -> Dense {
    let mut h = matmul(acts, false, &params.mlp_weight, false);
    for i in 0..h.rows() {
        axpy(1.0, &params.mlp_bias, h.row_mut(i));
    }
    h
}

/// Output of [`encode`] with the intermediates of the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub h: Dense,
    /// `Â·X·W` before the activation.
    pub pre_activation: Dense,
    pub activation: Dense,
}

/// Full encoder pass over one graph.
pub fn encode(adj: &NormalizedAdjacency, feats: &Dense, params: &EncoderParams) -> Result<Encoded> {
    params.validate()?;
    if feats.cols() != params.input_dim() || feats.rows() != adj.n() {
        return Err(Error::Argument(format!(
            "features are {:?}, adjacency is {n}x{n}, encoder expects {} input columns",
            feats.shape(),
            params.input_dim(),
            n = adj.n()
        )));
    }
    let d = params.output_dim();
    let mut xw = Dense::zeros(feats.rows(), d);
    for i in 0..feats.rows() {
        accumulate_row_times(feats.row(i), &params.gcn_weight, xw.row_mut(i));
    }
    let pre_activation = adj.matrix().matmul_dense(&xw)?;
    let activation = prelu_table(&pre_activation, params.prelu_slope);
    let h = head(&activation, params);
    Ok(Encoded {
        h,
        pre_activation,
        activation,
    })
}

/// Nonzeros of the feature table, by row and by column.
#[derive(Debug)]
struct SparseFeatures {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl SparseFeatures {
    fn new(x: &Dense) -> Self {
        let mut rows = Vec::with_capacity(x.rows());
        let mut cols = vec![Vec::new(); x.cols()];
        for (i, r) in x.iter_rows().enumerate() {
            let nz: Vec<(usize, f64)> = r
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect();
            for &(j, v) in &nz {
                cols[j].push((i, v));
            }
            rows.push(nz);
        }
        Self {
            n_cols: x.cols(),
            rows,
            cols,
        }
    }

    /// `X · W` for all rows, same accumulation order as [`accumulate_row_times`].
    fn times(&self, w: &Dense) -> Dense {
        let d = w.cols();
        let mut out = Dense::zeros(self.rows.len(), d);
        if d == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(d)
            .zip(self.rows.par_iter())
            .for_each(|(o, nz)| {
                for &(j, v) in nz {
                    axpy(v, w.row(j), o);
                }
            });
        out
    }

    /// `Xᵀ · G`.
    fn transpose_times(&self, g: &Dense) -> Dense {
        let d = g.cols();
        let mut out = Dense::zeros(self.n_cols, d);
        if d == 0 {
            return out;
        }
        out.as_mut_slice()
            .par_chunks_mut(d)
            .zip(self.cols.par_iter())
            .for_each(|(o, nz)| {
                for &(i, v) in nz {
                    axpy(v, g.row(i), o);
                }
            });
        out
    }
}

/// Three aligned embedding tables for a batch of targets.
#[derive(Debug, Clone)]
pub struct EmbeddingViews {
    pub targets: Vec<usize>,
    /// Target row of the encoded subgraph.
    pub h_sub: Dense,
    /// Mean of all rows of the encoded subgraph.
    pub g_sub: Dense,
    /// Target row of the encoded global graph.
    pub h_glob: Dense,
    cache: Option<ForwardCache>,
}

impl EmbeddingViews {
    pub fn batch_size(&self) -> usize {
        self.targets.len()
    }

    pub fn dim(&self) -> usize {
        self.h_sub.cols()
    }

    /// The same tables without the backward cache.
    pub fn detached(&self) -> EmbeddingViews {
        EmbeddingViews {
            cache: None,
            ..self.clone()
        }
    }

    pub fn from_tables(h_sub: Dense, g_sub: Dense, h_glob: Dense) -> Result<Self> {
        if h_sub.shape() != g_sub.shape() || h_sub.shape() != h_glob.shape() {
            return Err(Error::Argument("view tables must share a shape".into()));
        }
        Ok(Self {
            targets: (0..h_sub.rows()).collect(),
            h_sub,
            g_sub,
            h_glob,
            cache: None,
        })
    }
}

/// Gradients of a scalar with respect to each view table.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewGrads {
    pub h_sub: Dense,
    pub g_sub: Dense,
    pub h_glob: Dense,
}

impl ViewGrads {
    pub fn zeros(batch: usize, dim: usize) -> Self {
        Self {
            h_sub: Dense::zeros(batch, dim),
            g_sub: Dense::zeros(batch, dim),
            h_glob: Dense::zeros(batch, dim),
        }
    }
}

#[derive(Debug, Clone)]
struct SubgraphCache {
    members: Vec<usize>,
    target_pos: usize,
    adj: Arc<NormalizedAdjacency>,
    pre: Dense,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    features: Arc<SparseFeatures>,
    global_adj: Arc<NormalizedAdjacency>,
    subgraphs: Vec<SubgraphCache>,
    /// `3B × D`: target, pooled and global activations, in that order.
    head_inputs: Dense,
    glob_pre: Dense,
}

/// Encoder bound to one graph and (optionally) its subgraph set, with the
/// normalized adjacencies and sparse feature views computed once.
pub struct ViewEncoder<'a> {
    graph: &'a Graph,
    features: Arc<SparseFeatures>,
    global_adj: Arc<NormalizedAdjacency>,
    subgraphs: Vec<(&'a SubgraphSpec, Arc<NormalizedAdjacency>)>,
}

impl<'a> ViewEncoder<'a> {
    pub fn new(graph: &'a Graph, subs: &'a SubgraphSet) -> Result<Self> {
        if subs.len() != graph.num_nodes() {
            return Err(Error::Argument(format!(
                "{} subgraphs for {} nodes",
                subs.len(),
                graph.num_nodes()
            )));
        }
        Ok(Self::with_subgraphs(graph, subs.iter()))
    }

    fn with_subgraphs(graph: &'a Graph, subs: impl Iterator<Item = &'a SubgraphSpec>) -> Self {
        Self {
            graph,
            features: Arc::new(SparseFeatures::new(graph.features())),
            global_adj: Arc::new(normalize_adjacency(graph)),
            subgraphs: subs
                .map(|s| (s, Arc::new(s.normalized_adjacency())))
                .collect(),
        }
    }

    fn check(&self, params: &EncoderParams) -> Result<()> {
        params.validate()?;
        if params.input_dim() != self.graph.num_features() {
            return Err(Error::Argument(format!(
                "encoder expects {} input features, graph has {}",
                params.input_dim(),
                self.graph.num_features()
            )));
        }
        Ok(())
    }

    /// Global-view embeddings `H` for every node.
    pub fn global_embeddings(&self, params: &EncoderParams) -> Result<Dense> {
        self.check(params)?;
        let xw = self.features.times(&params.gcn_weight);
        let n = self.graph.num_nodes();
        let d = params.output_dim();
        let mut acts = Dense::zeros(n, d);
        let adj = self.global_adj.matrix();
        acts.as_mut_slice()
            .par_chunks_mut(d.max(1))
            .enumerate()
            .for_each(|(i, out)| {
                adj.row_times(i, &xw, out);
                out.iter_mut().for_each(|v| *v = prelu(*v, params.prelu_slope));
            });
        Ok(head(&acts, params))
    }

    /// Forward pass of all three views for the subgraphs at `batch` (indices
    /// into the subgraph list; equal to node ids for a full [`SubgraphSet`]).
    pub fn forward(&self, batch: &[usize], params: &EncoderParams) -> Result<EmbeddingViews> {
        self.check(params)?;
        if batch.is_empty() {
            return Err(Error::Argument("empty batch".into()));
        }
        if let Some(&bad) = batch.iter().find(|&&b| b >= self.subgraphs.len()) {
            return Err(Error::Range {
                id: bad,
                n: self.subgraphs.len(),
            });
        }
        let d = params.output_dim();
        let slope = params.prelu_slope;
        let xw = self.features.times(&params.gcn_weight);
        let global = self.global_adj.matrix();

        struct Row {
            sub: SubgraphCache,
            target_act: Vec<f64>,
            mean_act: Vec<f64>,
            glob_pre: Vec<f64>,
            glob_act: Vec<f64>,
        }

        let rows: Vec<Row> = batch
            .par_iter()
            .map(|&b| {
                let (spec, adj) = &self.subgraphs[b];
                let local_xw = xw.gather_rows(spec.members());
                let pre = adj
                    .matrix()
                    .matmul_dense(&local_xw)
                    .expect("subgraph adjacency matches member count");
                let k = spec.len();
                let mut mean_act = vec![0.0; d];
                let mut target_act = vec![0.0; d];
                for r in 0..k {
                    for ((m, &z), t) in mean_act.iter_mut().zip(pre.row(r)).zip(target_act.iter_mut()) {
                        let a = prelu(z, slope);
                        *m += a;
                        if r == spec.target_pos() {
                            *t = a;
                        }
                    }
                }
                mean_act.iter_mut().for_each(|m| *m /= k as f64);

                let mut glob_pre = vec![0.0; d];
                global.row_times(spec.target(), &xw, &mut glob_pre);
                let glob_act: Vec<f64> = glob_pre.iter().map(|&z| prelu(z, slope)).collect();
                Row {
                    sub: SubgraphCache {
                        members: spec.members().to_vec(),
                        target_pos: spec.target_pos(),
                        adj: Arc::clone(adj),
                        pre,
                    },
                    target_act,
                    mean_act,
                    glob_pre,
                    glob_act,
                }
            })
            .collect();

        // Head inputs stacked as [target rows; pooled rows; global rows].
        let b = rows.len();
        let mut head_inputs = Dense::zeros(3 * b, d);
        let mut glob_pre = Dense::zeros(b, d);
        for (i, r) in rows.iter().enumerate() {
            head_inputs.row_mut(i).copy_from_slice(&r.target_act);
            head_inputs.row_mut(b + i).copy_from_slice(&r.mean_act);
            head_inputs.row_mut(2 * b + i).copy_from_slice(&r.glob_act);
            glob_pre.row_mut(i).copy_from_slice(&r.glob_pre);
        }
        let out = head(&head_inputs, params);
        let block = |start: usize| Dense::from_vec(b, d, out.as_slice()[start * b * d..(start + 1) * b * d].to_vec())
            .expect("block shape");
        let (h_sub, g_sub, h_glob) = (block(0), block(1), block(2));
        let targets = rows.iter().map(|r| r.sub.members[r.sub.target_pos]).collect();
        let subgraphs = rows.into_iter().map(|r| r.sub).collect();
        Ok(EmbeddingViews {
            targets,
            h_sub,
            g_sub,
            h_glob,
            cache: Some(ForwardCache {
                features: Arc::clone(&self.features),
                global_adj: Arc::clone(&self.global_adj),
                subgraphs,
                head_inputs,
                glob_pre,
            }),
        })
    }
}

/// Encodes the three views for a batch of subgraphs of `g`.
pub fn encode_views(
    g: &Graph,
    batch: &[&SubgraphSpec],
    params: &EncoderParams,
) -> Result<EmbeddingViews> {
    let enc = ViewEncoder::with_subgraphs(g, batch.iter().copied());
    let idx: Vec<usize> = (0..batch.len()).collect();
    enc.forward(&idx, params)
}

/// Exact parameter gradients given the gradient of the loss with respect
/// to each view table. Contributions of the three views are summed, since
/// they share every parameter.
pub fn backward(
    views: &EmbeddingViews,
    grads: &ViewGrads,
    params: &EncoderParams,
) -> Result<ParamGrads> {
    let cache = views
        .cache
        .as_ref()
        .ok_or_else(|| Error::State("views carry no forward cache".into()))?;
    let (b, d) = views.h_sub.shape();
    for t in [&grads.h_sub, &grads.g_sub, &grads.h_glob] {
        if t.shape() != (b, d) {
            return Err(Error::Argument(format!(
                "view gradient is {:?}, views are {b}x{d}",
                t.shape()
            )));
        }
    }
    if params.output_dim() != d {
        return Err(Error::Argument("params do not match view width".into()));
    }
    let slope = params.prelu_slope;
    let mut out = params.zeros_like();

    for i in 0..b {
        for t in [&grads.h_sub, &grads.g_sub, &grads.h_glob] {
            axpy(1.0, t.row(i), &mut out.mlp_bias);
        }
    }

    let mut upstream = Dense::zeros(3 * b, d);
    for (blk, t) in [&grads.h_sub, &grads.g_sub, &grads.h_glob].into_iter().enumerate() {
        upstream.as_mut_slice()[blk * b * d..(blk + 1) * b * d].copy_from_slice(t.as_slice());
    }
    out.mlp_weight = matmul(&cache.head_inputs, true, &upstream, false);
    // Back through the head: upstream · Mᵀ, rows stacked like head_inputs.
    let d_act = matmul(&upstream, false, &params.mlp_weight, true);
    let d_target_act = |i: usize, j: usize| d_act.get(i, j);
    let d_mean_act = |i: usize, j: usize| d_act.get(b + i, j);
    let d_glob_act = |i: usize, j: usize| d_act.get(2 * b + i, j);

    // Per subgraph: gradient w.r.t. its gathered X·W rows, and slope part.
    let local: Vec<(Dense, f64)> = cache
        .subgraphs
        .par_iter()
        .enumerate()
        .map(|(i, sc)| {
            let k = sc.members.len();
            let share = 1.0 / k as f64;
            let mut d_pre = Dense::zeros(k, d);
            let mut d_slope = 0.0;
            for r in 0..k {
                let z_row = sc.pre.row(r);
                let dst = d_pre.row_mut(r);
                for j in 0..d {
                    let mut da = d_mean_act(i, j) * share;
                    if r == sc.target_pos {
                        da += d_target_act(i, j);
                    }
                    let z = z_row[j];
                    if z > 0.0 {
                        dst[j] = da;
                    } else {
                        dst[j] = da * slope;
                        d_slope += da * z;
                    }
                }
            }
            // Â is symmetric, so Âᵀ·dZ = Â·dZ.
            let d_xw = sc.adj.matrix().matmul_dense(&d_pre).expect("square adjacency");
            (d_xw, d_slope)
        })
        .collect();

    let n = cache.features.rows.len();
    let mut d_xw = Dense::zeros(n, d);
    for (sc, (lg, ds)) in cache.subgraphs.iter().zip(&local) {
        out.prelu_slope += ds;
        for (c, &m) in sc.members.iter().enumerate() {
            axpy(1.0, lg.row(c), d_xw.row_mut(m));
        }
    }
    let global = cache.global_adj.matrix();
    let mut d_z = vec![0.0; d];
    for (i, &t) in views.targets.iter().enumerate() {
        for j in 0..d {
            let da = d_glob_act(i, j);
            let z = cache.glob_pre.get(i, j);
            if z > 0.0 {
                d_z[j] = da;
            } else {
                d_z[j] = da * slope;
                out.prelu_slope += da * z;
            }
        }
        let (cols, vals) = global.row(t);
        for (&c, &w) in cols.iter().zip(vals) {
            axpy(w, &d_z, d_xw.row_mut(c));
        }
    }

    out.gcn_weight = cache.features.transpose_times(&d_xw);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::extract_subgraph;

    fn scalar_params(w: f64, slope: f64, m: f64, b: f64) -> EncoderParams {
        EncoderParams {
            gcn_weight: Dense::from_rows(&[vec![w]]).unwrap(),
            prelu_slope: slope,
            mlp_weight: Dense::from_rows(&[vec![m]]).unwrap(),
            mlp_bias: vec![b],
        }
    }

    fn one_node() -> Graph {
        Graph::from_edges(Dense::from_rows(&[vec![1.0]]).unwrap(), []).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_params(7, 5, 3).unwrap();
        assert_eq!(a, init_params(7, 5, 3).unwrap());
        assert_ne!(a, init_params(7, 5, 4).unwrap());
        let bound = (6.0f64 / 12.0).sqrt();
        assert!(a.gcn_weight.as_slice().iter().all(|v| v.abs() <= bound));
        assert!(a.mlp_bias.iter().all(|&v| v == 0.0));
        assert_eq!(a.prelu_slope, 0.25);
        assert!(init_params(0, 3, 1).is_err());
    }

    #[test]
    fn single_node_hand_values() {
        let g = one_node();
        let adj = normalize_adjacency(&g);
        let h = encode(&adj, g.features(), &scalar_params(1.0, 0.25, 1.0, 0.0)).unwrap();
        assert_eq!(h.h.as_slice(), &[1.0]);
        let h = encode(&adj, g.features(), &scalar_params(-1.0, 0.25, 1.0, 0.0)).unwrap();
        assert_eq!(h.h.as_slice(), &[-0.25]);
    }

    #[test]
    fn zero_features_give_bias_rows() {
        let g = Graph::from_edges(Dense::zeros(3, 2), [(0, 1)]).unwrap();
        let mut p = init_params(2, 4, 9).unwrap();
        p.mlp_bias = vec![0.1, -0.2, 0.3, 0.4];
        let h = encode(&normalize_adjacency(&g), g.features(), &p).unwrap().h;
        for r in h.iter_rows() {
            assert_eq!(r, p.mlp_bias.as_slice());
        }
    }

    #[test]
    fn encode_rejects_dimension_mismatch() {
        let g = one_node();
        let p = init_params(2, 2, 0).unwrap();
        assert!(matches!(
            encode(&normalize_adjacency(&g), g.features(), &p),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn one_node_subgraph_pools_to_its_own_row() {
        let g = one_node();
        let s = extract_subgraph(&g, &[0]).unwrap();
        let v = encode_views(&g, &[&s], &init_params(1, 3, 1).unwrap()).unwrap();
        assert_eq!(v.h_sub, v.g_sub);
        assert_eq!(v.h_sub, v.h_glob);
    }

    #[test]
    fn backward_hand_chain_rule() {
        // loss = H[0][0] through the global view only
        let g = one_node();
        let s = extract_subgraph(&g, &[0]).unwrap();
        let p = scalar_params(1.0, 0.25, 1.0, 0.0);
        let v = encode_views(&g, &[&s], &p).unwrap();
        let mut gv = ViewGrads::zeros(1, 1);
        gv.h_glob.set(0, 0, 1.0);
        let grads = backward(&v, &gv, &p).unwrap();
        assert_eq!(grads.gcn_weight.as_slice(), &[1.0]);
        assert_eq!(grads.mlp_weight.as_slice(), &[1.0]);
        assert_eq!(grads.mlp_bias, vec![1.0]);
        assert_eq!(grads.prelu_slope, 0.0);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let f = Dense::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.0], vec![0.0, 3.0]]).unwrap();
        let g = Graph::from_edges(f, [(0, 1), (1, 2)]).unwrap();
        let s0 = extract_subgraph(&g, &[0, 1, 2]).unwrap();
        let s1 = extract_subgraph(&g, &[2, 1]).unwrap();
        let p = init_params(2, 3, 5).unwrap();
        let v = encode_views(&g, &[&s0, &s1], &p).unwrap();
        let grads = backward(&v, &ViewGrads::zeros(2, 3), &p).unwrap();
        for (_, blk) in grads.blocks() {
            assert!(blk.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn detached_views_cannot_backprop() {
        let g = one_node();
        let s = extract_subgraph(&g, &[0]).unwrap();
        let p = init_params(1, 1, 0).unwrap();
        let v = encode_views(&g, &[&s], &p).unwrap().detached();
        assert!(matches!(
            backward(&v, &ViewGrads::zeros(1, 1), &p),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.txt");
        let p = init_params(4, 3, 11).unwrap();
        p.write_checkpoint(&path).unwrap();
        assert_eq!(EncoderParams::read_checkpoint(&path).unwrap(), p);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("4 3\ngcn_weight\n"));
    }
}
