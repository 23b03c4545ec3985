//! Semantic-subgraph construction.
//!
//! The default sampler ranks nodes by personalized PageRank relative to each
//! target and keeps the top `K` (target first). K-hop BFS and a single random
//! walk are provided as alternative samplers.

use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{column_normalized_adjacency, normalize_rows, Graph, NormalizedAdjacency};
use crate::linalg::{CsrMatrix, Dense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PprConfig {
    /// Restart probability `p`.
    pub restart_prob: f64,
    /// Subgraph size `K`.
    pub subgraph_size: usize,
    pub max_iters: usize,
    /// L1 change between iterates at which power iteration stops.
    pub tol: f64,
}

impl Default for PprConfig {
    fn default() -> Self {
        Self {
            restart_prob: 0.15,
            subgraph_size: 20,
            max_iters: 100,
            tol: 1e-9,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.restart_prob > 0.0 && self.restart_prob < 1.0) {
            return Err(Error::Argument(format!(
                "restart probability must lie in (0, 1), got {}",
                self.restart_prob
            )));
        }
        if self.subgraph_size == 0 {
            return Err(Error::Argument("subgraph size must be at least 1".into()));
        }
        if self.max_iters == 0 || !(self.tol > 0.0) {
            return Err(Error::Argument("max_iters and tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PprRun {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Personalized PageRank from `target`: the fixed point of
/// `π = p·e_target + (1 − p)·Â·π` with `Â` column-normalized.
pub fn ppr_scores(g: &Graph, target: usize, cfg: &PprConfig) -> Result<PprRun> {
    let n = g.num_nodes();
    if target >= n {
        return Err(Error::Range { id: target, n });
    }
    let a_hat = column_normalized_adjacency(g);
    Ok(power_iterate(&a_hat, target, cfg))
}

fn power_iterate(a_hat: &CsrMatrix, target: usize, cfg: &PprConfig) -> PprRun {
    let n = a_hat.n_rows();
    let p = cfg.restart_prob;
    let mut cur = vec![0.0; n];
    cur[target] = 1.0;
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        a_hat.matvec(&cur, &mut next);
        for v in next.iter_mut() {
            *v *= 1.0 - p;
        }
        next[target] += p;
        let change: f64 = cur.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut cur, &mut next);
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }
    PprRun {
        scores: cur,
        iterations,
        converged,
    }
}

/// Row `target` of the importance matrix exactly as `p·[I − (1 − p)·Â]`,
/// with no inverse. Kept for comparison against [`ppr_scores`]; most
/// off-diagonal entries come out negative.
pub fn literal_importance_row(g: &Graph, target: usize, restart_prob: f64) -> Result<Vec<f64>> {
    let n = g.num_nodes();
    if target >= n {
        return Err(Error::Range { id: target, n });
    }
    let a_hat = column_normalized_adjacency(g);
    let mut row = vec![0.0; n];
    row[target] = restart_prob;
    let (cols, vals) = a_hat.row(target);
    for (&j, &v) in cols.iter().zip(vals) {
        row[j] -= restart_prob * (1.0 - restart_prob) * v;
    }
    Ok(row)
}

/// Up to `k` node ids by descending score, ties by ascending id. The target
/// always comes first; nodes with non-positive score are never selected.
pub fn rank_top_k(scores: &[f64], target: usize, k: usize) -> Vec<usize> {
    let mut ranked: Vec<usize> = (0..scores.len())
        .filter(|&i| i != target && scores[i] > 0.0)
        .collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out = Vec::with_capacity(k.min(ranked.len() + 1));
    out.push(target);
    out.extend(ranked.into_iter().take(k.saturating_sub(1)));
    out
}

/// Induced subgraph over an ordered member list.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphSpec {
    target: usize,
    /// Global node ids; `members[target_pos] == target`.
    members: Vec<usize>,
    target_pos: usize,
    /// Neighbor lists in local (member-position) indices, sorted.
    adjacency: Vec<Vec<usize>>,
    features: Dense,
}

impl SubgraphSpec {
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn target_pos(&self) -> usize {
        self.target_pos
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn neighbors(&self, local: usize) -> &[usize] {
        &self.adjacency[local]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn features(&self) -> &Dense {
        &self.features
    }

    pub fn normalized_adjacency(&self) -> NormalizedAdjacency {
        normalize_rows(self.len(), |i| &self.adjacency[i])
    }
}

/// Induced adjacency and feature rows over `members`; the first member is the target.
pub fn extract_subgraph(g: &Graph, members: &[usize]) -> Result<SubgraphSpec> {
    let Some(&target) = members.first() else {
        return Err(Error::Argument("subgraph needs at least one member".into()));
    };
    extract_subgraph_around(g, members, target)
}

/// Like [`extract_subgraph`], but `target` may sit anywhere in `members`.
pub fn extract_subgraph_around(g: &Graph, members: &[usize], target: usize) -> Result<SubgraphSpec> {
    let n = g.num_nodes();
    let target_pos = members
        .iter()
        .position(|&m| m == target)
        .ok_or_else(|| Error::Argument(format!("target {target} is not a subgraph member")))?;
    let mut local = std::collections::HashMap::with_capacity(members.len());
    for (pos, &id) in members.iter().enumerate() {
        if id >= n {
            return Err(Error::Range { id, n });
        }
        if local.insert(id, pos).is_some() {
            return Err(Error::Argument(format!("duplicate subgraph member {id}")));
        }
    }
    let adjacency = members
        .iter()
        .map(|&u| {
            let mut row: Vec<usize> = g
                .neighbors(u)
                .iter()
                .filter_map(|v| local.get(v).copied())
                .collect();
            row.sort_unstable();
            row
        })
        .collect();
    Ok(SubgraphSpec {
        target,
        members: members.to_vec(),
        target_pos,
        adjacency,
        features: g.features().gather_rows(members),
    })
}

/// Breadth-first members within `hops` of `target`, target first, truncated to `cap`.
pub fn sample_khop(g: &Graph, target: usize, hops: usize, cap: usize) -> Vec<usize> {
    let mut dist = std::collections::HashMap::new();
    dist.insert(target, 0usize);
    let mut order = vec![target];
    let mut queue = VecDeque::from([target]);
    while let Some(u) = queue.pop_front() {
        if order.len() >= cap {
            break;
        }
        let d = dist[&u];
        if d == hops {
            continue;
        }
        for &v in g.neighbors(u) {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(v) {
                e.insert(d + 1);
                order.push(v);
                queue.push_back(v);
            }
        }
    }
    order.truncate(cap);
    order
}

/// One uniform random walk of `walk_len` steps; distinct visited nodes in
/// first-visit order, target first. Stops early at an isolated node.
pub fn sample_random_walk(g: &Graph, target: usize, walk_len: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visited = vec![target];
    let mut cur = target;
    for _ in 0..walk_len {
        let Some(&next) = g.neighbors(cur).choose(&mut rng) else {
            break;
        };
        if !visited.contains(&next) {
            visited.push(next);
        }
        cur = next;
    }
    visited
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Top-K by personalized PageRank.
    Rank,
    /// BFS ball of the given radius, capped at K.
    KHop { hops: usize },
    /// Distinct nodes of one random walk, capped at K.
    RandomWalk { walk_len: usize, seed: u64 },
}

impl SamplerKind {
    pub fn label(&self) -> SamplerLabel {
        match self {
            SamplerKind::Rank => SamplerLabel::Rank,
            SamplerKind::KHop { .. } => SamplerLabel::KHop,
            SamplerKind::RandomWalk { .. } => SamplerLabel::RandomWalk,
        }
    }
}

/// Sampler identity as recorded in the subgraph cache header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerLabel {
    Rank,
    KHop,
    RandomWalk,
}

impl fmt::Display for SamplerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerLabel::Rank => "k-rank",
            SamplerLabel::KHop => "k-hop",
            SamplerLabel::RandomWalk => "k-rw",
        })
    }
}

impl FromStr for SamplerLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k-rank" => Ok(SamplerLabel::Rank),
            "k-hop" => Ok(SamplerLabel::KHop),
            "k-rw" => Ok(SamplerLabel::RandomWalk),
            other => Err(Error::Argument(format!(
                "unknown sampler {other:?} (expected k-rank, k-hop or k-rw)"
            ))),
        }
    }
}

/// One subgraph per node, indexed by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphSet {
    pub subgraph_size: usize,
    pub restart_prob: f64,
    pub sampler: SamplerLabel,
    subgraphs: Vec<SubgraphSpec>,
}

impl SubgraphSet {
    pub fn len(&self) -> usize {
        self.subgraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgraphs.is_empty()
    }

    pub fn get(&self, node: usize) -> &SubgraphSpec {
        &self.subgraphs[node]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SubgraphSpec> {
        self.subgraphs.iter()
    }

    /// Writes the `N K p sampler` header and one `target k' ids…` line per node.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        let io = |e| Error::io(path, e);
        writeln!(
            out,
            "{} {} {} {}",
            self.len(),
            self.subgraph_size,
            self.restart_prob,
            self.sampler
        )
        .map_err(io)?;
        for s in &self.subgraphs {
            write!(out, "{} {}", s.target(), s.len()).map_err(io)?;
            for id in s.members() {
                write!(out, " {id}").map_err(io)?;
            }
            out.push(b'\n');
        }
        fs::write(path, out).map_err(io)
    }

    /// Reads member lists back and rebuilds induced subgraphs from `g`.
    pub fn read_cache(path: &Path, g: &Graph) -> Result<SubgraphSet> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty subgraph cache"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(Error::parse(path, 1, "header must be \"N K p sampler\""));
        }
        let bad = |msg: &str| Error::parse(path, 1, msg.to_string());
        let n: usize = h[0].parse().map_err(|_| bad("bad N"))?;
        let k: usize = h[1].parse().map_err(|_| bad("bad K"))?;
        let p: f64 = h[2].parse().map_err(|_| bad("bad p"))?;
        let sampler: SamplerLabel = h[3].parse()?;
        if n != g.num_nodes() {
            return Err(Error::Argument(format!(
                "cache covers {n} nodes but graph has {}",
                g.num_nodes()
            )));
        }
        let mut subgraphs = Vec::with_capacity(n);
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let ids = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::parse(path, lineno, format!("bad id {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if ids.len() < 2 || ids[1] + 2 != ids.len() {
                return Err(Error::parse(path, lineno, "member count does not match line"));
            }
            if ids[2] != ids[0] || ids[0] != subgraphs.len() {
                return Err(Error::parse(path, lineno, "target must be the node id and first member"));
            }
            subgraphs.push(extract_subgraph(g, &ids[2..])?);
        }
        if subgraphs.len() != n {
            return Err(Error::parse(
                path,
                1,
                format!("header declares {n} subgraphs, found {}", subgraphs.len()),
            ));
        }
        Ok(SubgraphSet {
            subgraph_size: k,
            restart_prob: p,
            sampler,
            subgraphs,
        })
    }
}

/// Member list for one target under the given sampler.
pub fn sample_members(
    g: &Graph,
    a_hat: &CsrMatrix,
    target: usize,
    cfg: &PprConfig,
    sampler: SamplerKind,
) -> Vec<usize> {
    let k = cfg.subgraph_size;
    match sampler {
        SamplerKind::Rank => {
            let run = power_iterate(a_hat, target, cfg);
            rank_top_k(&run.scores, target, k)
        }
        SamplerKind::KHop { hops } => sample_khop(g, target, hops, k),
        SamplerKind::RandomWalk { walk_len, seed } => {
            let node_seed = seed ^ (target as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut m = sample_random_walk(g, target, walk_len, node_seed);
            m.truncate(k);
            m
        }
    }
}

/// Builds one subgraph per node. Work is spread over the rayon pool; output
/// order and content do not depend on scheduling.
pub fn precompute_subgraphs(
    g: &Graph,
    cfg: &PprConfig,
    sampler: SamplerKind,
) -> Result<SubgraphSet> {
    cfg.validate()?;
    if let SamplerKind::KHop { hops: 0 } = sampler {
        return Err(Error::Argument("k-hop sampler needs hops >= 1".into()));
    }
    if let SamplerKind::RandomWalk { walk_len: 0, .. } = sampler {
        return Err(Error::Argument("random-walk sampler needs walk_len >= 1".into()));
    }
    let a_hat = column_normalized_adjacency(g);
    let subgraphs = (0..g.num_nodes())
        .into_par_iter()
        .map(|t| extract_subgraph(g, &sample_members(g, &a_hat, t, cfg, sampler)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SubgraphSet {
        subgraph_size: cfg.subgraph_size,
        restart_prob: cfg.restart_prob,
        sampler: sampler.label(),
        subgraphs,
    })
}
