//! Downstream evaluation on frozen embeddings: node classification with a
//! linear probe and link prediction on concatenated pair embeddings.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{dot, Dense};
use crate::sampler::precompute_subgraphs;
use crate::trainer::{export_embeddings, train, EmbeddingView, TrainConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Up to `per_class` training nodes sampled from every class; every other
/// labeled node is a test node.
pub fn split_nodes(g: &Graph, per_class: usize, seed: u64) -> Result<NodeSplit> {
    let labels = g.require_labels()?;
    let classes = g.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            by_class[*c].push(i);
        }
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::Argument(format!("class {empty} has no nodes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut nodes in by_class {
        nodes.shuffle(&mut rng);
        let k = per_class.min(nodes.len());
        train.extend_from_slice(&nodes[..k]);
        test.extend_from_slice(&nodes[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(NodeSplit { train, test })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

/// Holds out `max(1, ⌊test_frac·E⌋)` edges and samples as many non-edges for
/// each side. Returns the split and the graph with test edges removed.
pub fn split_edges(g: &Graph, test_frac: f64, seed: u64) -> Result<(EdgeSplit, Graph)> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::Argument(format!("test fraction must lie in (0, 1), got {test_frac}")));
    }
    let e = g.num_edges();
    if e < 5 {
        return Err(Error::Argument(format!("link prediction needs at least 5 edges, graph has {e}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    edges.shuffle(&mut rng);
    let n_test = ((test_frac * e as f64).floor() as usize).max(1);
    let test_pos = edges[..n_test].to_vec();
    let train_pos = edges[n_test..].to_vec();

    let n = g.num_nodes();
    let needed = e;
    let non_edges = n * n.saturating_sub(1) / 2 - e;
    if non_edges < needed {
        return Err(Error::Sampling(format!(
            "need {needed} non-edges but the graph only has {non_edges}"
        )));
    }
    let max_attempts = 100 * needed + 10_000;
    let mut seen = HashSet::with_capacity(needed);
    let mut negatives = Vec::with_capacity(needed);
    let mut attempts = 0;
    while negatives.len() < needed {
        if attempts == max_attempts {
            return Err(Error::Sampling(format!(
                "found {} of {needed} non-edges after {max_attempts} draws",
                negatives.len()
            )));
        }
        attempts += 1;
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v || g.has_edge(u, v) {
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if seen.insert(pair) {
            negatives.push(pair);
        }
    }
    let train_neg = negatives.split_off(n_test);
    let reduced = g.without_edges(&test_pos)?;
    Ok((
        EdgeSplit {
            train_pos,
            test_pos,
            train_neg,
            test_neg: negatives,
        },
        reduced,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub weight_decay: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            iterations: 300,
            weight_decay: 1e-4,
        }
    }
}

/// Multinomial logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    /// `C × D`.
    pub weights: Dense,
    pub bias: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

impl LinearProbe {
    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self
            .weights
            .iter_rows()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect();
        softmax_in_place(&mut z);
        z
    }

    /// Most probable class; ties resolve to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> usize {
        let p = self.predict_proba(x);
        let mut best = 0;
        for (c, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = c;
            }
        }
        best
    }

    pub fn accuracy(&self, x: &Dense, y: &[usize]) -> f64 {
        let hits = x
            .iter_rows()
            .zip(y)
            .filter(|(r, &l)| self.predict(r) == l)
            .count();
        hits as f64 / y.len().max(1) as f64
    }
}

/// Full-batch gradient descent on softmax cross-entropy with L2 on the weights.
/// Starts from zero weights, so the result is fully determined by the data.
pub fn train_linear_probe(x: &Dense, y: &[usize], classes: usize, cfg: &ProbeConfig) -> Result<LinearProbe> {
    if x.rows() != y.len() || y.is_empty() {
        return Err(Error::Argument(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::Argument(format!("label {bad} outside {classes} classes")));
    }
    let distinct: HashSet<usize> = y.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Argument("probe needs at least two classes in the training rows".into()));
    }
    let d = x.cols();
    let n = y.len() as f64;
    let mut probe = LinearProbe {
        weights: Dense::zeros(classes, d),
        bias: vec![0.0; classes],
    };
    let mut gw = Dense::zeros(classes, d);
    let mut gb = vec![0.0; classes];
    for _ in 0..cfg.iterations {
        gw.as_mut_slice().fill(0.0);
        gb.fill(0.0);
        for (row, &label) in x.iter_rows().zip(y) {
            let mut p = probe.predict_proba(row);
            p[label] -= 1.0;
            for (c, &err) in p.iter().enumerate() {
                gb[c] += err;
                for (g, &xv) in gw.row_mut(c).iter_mut().zip(row) {
                    *g += err * xv;
                }
            }
        }
        for c in 0..classes {
            let w = probe.weights.row_mut(c);
            for (wv, &g) in w.iter_mut().zip(gw.row(c)) {
                *wv -= cfg.learning_rate * (g / n + cfg.weight_decay * *wv);
            }
            probe.bias[c] -= cfg.learning_rate * gb[c] / n;
        }
    }
    Ok(probe)
}

/// `[emb[u] ‖ emb[v]]`.
pub fn link_features(emb: &Dense, u: usize, v: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * emb.cols());
    out.extend_from_slice(emb.row(u));
    out.extend_from_slice(emb.row(v));
    out
}

fn pair_table(emb: &Dense, pairs: &[(usize, usize)]) -> Dense {
    let mut t = Dense::zeros(pairs.len(), 2 * emb.cols());
    for (i, &(u, v)) in pairs.iter().enumerate() {
        let (a, b) = (u.min(v), u.max(v));
        t.row_mut(i).copy_from_slice(&link_features(emb, a, b));
    }
    t
}

/// Area under the ROC curve via the Mann–Whitney rank statistic, with tied
/// scores sharing their average rank.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Argument("AUC needs at least one positive and one negative".into()));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks are 1-based
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * all[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// Positive prediction when `score >= threshold`.
    pub fn from_scores(pos: &[f64], neg: &[f64], threshold: f64) -> Self {
        let tp = pos.iter().filter(|&&s| s >= threshold).count();
        let fp = neg.iter().filter(|&&s| s >= threshold).count();
        Self {
            tp,
            fp,
            tn: neg.len() - fp,
            fn_: pos.len() - tp,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl MetricSummary {
    /// Mean and population standard deviation.
    pub fn from_values(metric: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            metric: metric.into(),
            mean,
            std: var.sqrt(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub task: String,
    pub rows: Vec<MetricSummary>,
}

impl MetricReport {
    pub fn get(&self, metric: &str) -> Option<&MetricSummary> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn csv_rows(&self) -> String {
        self.rows
            .iter()
            .map(|r| format!("{},{},{},{},{}\n", self.task, r.metric, r.mean, r.std, r.values.len()))
            .collect()
    }
}

pub const REPORT_HEADER: &str = "task,metric,mean,std,seeds\n";

pub fn write_reports(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut out = String::from(REPORT_HEADER);
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Test accuracy of a probe trained on one seeded node split.
pub fn node_classification_accuracy(
    emb: &Dense,
    g: &Graph,
    per_class: usize,
    seed: u64,
    probe: &ProbeConfig,
) -> Result<f64> {
    let labels = g.require_labels()?;
    if emb.rows() != g.num_nodes() {
        return Err(Error::Argument(format!(
            "{} embedding rows for {} nodes",
            emb.rows(),
            g.num_nodes()
        )));
    }
    let split = split_nodes(g, per_class, seed)?;
    if split.test.is_empty() {
        return Err(Error::Argument("node split left no test nodes".into()));
    }
    let y = |ids: &[usize]| -> Vec<usize> { ids.iter().map(|&i| labels[i].expect("labeled")).collect() };
    let model = train_linear_probe(&emb.gather_rows(&split.train), &y(&split.train), g.num_classes(), probe)?;
    Ok(model.accuracy(&emb.gather_rows(&split.test), &y(&split.test)))
}

/// Node-classification accuracy aggregated over seeds.
pub fn evaluate_nc(
    emb: &Dense,
    g: &Graph,
    per_class: usize,
    seeds: &[u64],
    probe: &ProbeConfig,
) -> Result<MetricReport> {
    let acc = seeds
        .iter()
        .map(|&s| node_classification_accuracy(emb, g, per_class, s, probe))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        task: "nc".into(),
        rows: vec![MetricSummary::from_values("accuracy", acc)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkScores {
    pub auc: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// Fits a probe on training pairs and scores the test pairs.
pub fn score_link_split(emb: &Dense, split: &EdgeSplit, probe: &ProbeConfig) -> Result<LinkScores> {
    let mut train_pairs = split.train_pos.clone();
    train_pairs.extend_from_slice(&split.train_neg);
    let mut y = vec![1; split.train_pos.len()];
    y.extend(std::iter::repeat_n(0, split.train_neg.len()));
    let model = train_linear_probe(&pair_table(emb, &train_pairs), &y, 2, probe)?;
    let score = |pairs: &[(usize, usize)]| -> Vec<f64> {
        pair_table(emb, pairs)
            .iter_rows()
            .map(|r| model.predict_proba(r)[1])
            .collect()
    };
    let pos = score(&split.test_pos);
    let neg = score(&split.test_neg);
    let c = Confusion::from_scores(&pos, &neg, 0.5);
    Ok(LinkScores {
        auc: auc(&pos, &neg)?,
        recall: c.recall(),
        precision: c.precision(),
        f1: c.f1(),
    })
}

/// Link prediction over seeds. `embed` receives the graph with the seed's
/// test edges removed (and the split, for inspection) and returns one
/// embedding row per node.
pub fn evaluate_lp_with<F>(
    g: &Graph,
    test_frac: f64,
    seeds: &[u64],
    probe: &ProbeConfig,
    mut embed: F,
) -> Result<MetricReport>
where
    F: FnMut(&Graph, &EdgeSplit, u64) -> Result<Dense>,
{
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (split, reduced) = split_edges(g, test_frac, seed)?;
        let emb = embed(&reduced, &split, seed)?;
        if emb.rows() != g.num_nodes() {
            return Err(Error::Argument("embedding table does not cover every node".into()));
        }
        runs.push(score_link_split(&emb, &split, probe)?);
    }
    let col = |f: fn(&LinkScores) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    Ok(MetricReport {
        task: "lp".into(),
        rows: vec![
            MetricSummary::from_values("auc", col(|r| r.auc)),
            MetricSummary::from_values("recall", col(|r| r.recall)),
            MetricSummary::from_values("precision", col(|r| r.precision)),
            MetricSummary::from_values("f1", col(|r| r.f1)),
        ],
    })
}

/// Leakage-safe link prediction: for every seed, split the edges, rebuild
/// subgraphs on the reduced graph and train a fresh encoder there (seeded by
/// the split seed), then probe the pair embeddings.
pub fn evaluate_lp(
    g: &Graph,
    cfg: &TrainConfig,
    view: EmbeddingView,
    test_frac: f64,
    seeds: &[u64],
    probe: &ProbeConfig,
) -> Result<MetricReport> {
    evaluate_lp_with(g, test_frac, seeds, probe, |reduced, _, seed| {
        let subs = precompute_subgraphs(reduced, &cfg.ppr, cfg.sampler)?;
        let run_cfg = TrainConfig { seed, ..cfg.clone() };
        let out = train(reduced, &subs, &run_cfg)?;
        export_embeddings(reduced, &subs, &out.params, view)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(sizes: &[usize]) -> Graph {
        let n: usize = sizes.iter().sum();
        let mut labels = Vec::new();
        for (c, &s) in sizes.iter().enumerate() {
            labels.extend(std::iter::repeat(Some(c)).take(s));
        }
        Graph::from_edges(Dense::zeros(n, 1), [])
            .unwrap()
            .with_labels(labels)
            .unwrap()
    }

    fn ring(n: usize) -> Graph {
        Graph::from_edges(Dense::zeros(n, 1), (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn node_split_counts() {
        let s = split_nodes(&labeled(&[30, 30, 30]), 20, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (60, 30));
        let s = split_nodes(&labeled(&[5, 30]), 20, 1).unwrap();
        assert_eq!(s.train.len(), 25);
        assert!((0..5).all(|i| s.train.contains(&i)));
        let a = split_nodes(&labeled(&[30, 30]), 20, 1).unwrap();
        let b = split_nodes(&labeled(&[30, 30]), 20, 2).unwrap();
        assert_ne!(a.train, b.train);
        assert_eq!(a.train.len(), b.train.len());
    }

    #[test]
    fn node_split_errors() {
        let unlabeled = Graph::from_edges(Dense::zeros(2, 1), []).unwrap();
        assert!(matches!(split_nodes(&unlabeled, 20, 0), Err(Error::State(_))));
        let gap = Graph::from_edges(Dense::zeros(2, 1), [])
            .unwrap()
            .with_labels(vec![Some(0), Some(2)])
            .unwrap();
        assert!(matches!(split_nodes(&gap, 20, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn edge_split_counts() {
        let g = ring(10);
        let (s, reduced) = split_edges(&g, 0.4, 3).unwrap();
        assert_eq!((s.test_pos.len(), s.train_pos.len()), (4, 6));
        assert_eq!(reduced.num_edges(), 6);
        assert_eq!((s.test_neg.len(), s.train_neg.len()), (4, 6));
        for &(u, v) in &s.test_pos {
            assert!(!reduced.has_edge(u, v));
        }
        let (s, _) = split_edges(&g, 0.01, 3).unwrap();
        assert_eq!(s.test_pos.len(), 1);
    }

    #[test]
    fn complete_graph_has_no_negatives() {
        let k4 = Graph::from_edges(
            Dense::zeros(4, 1),
            [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        )
        .unwrap();
        assert!(matches!(split_edges(&k4, 0.4, 0), Err(Error::Sampling(_))));
        assert!(split_edges(&ring(4), 0.4, 0).is_err());
    }

    #[test]
    fn separable_probe() {
        let x = Dense::from_rows(&[vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]]).unwrap();
        let y = [0, 0, 1, 1];
        let p = train_linear_probe(&x, &y, 2, &ProbeConfig::default()).unwrap();
        assert_eq!(p.accuracy(&x, &y), 1.0);
        assert!(train_linear_probe(&x, &[1, 1, 1, 1], 2, &ProbeConfig::default()).is_err());
    }

    #[test]
    fn uninformative_probe_predicts_majority() {
        let x = Dense::from_rows(&vec![vec![0.3, 0.3]; 5]).unwrap();
        let y = [0, 1, 1, 1, 0];
        let p = train_linear_probe(&x, &y, 2, &ProbeConfig::default()).unwrap();
        assert!((p.accuracy(&x, &y) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn link_feature_layout() {
        let emb = Dense::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(link_features(&emb, 0, 1), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(link_features(&emb, 1, 0), vec![3.0, 4.0, 1.0, 2.0]);
        assert_eq!(link_features(&emb, 0, 0), vec![1.0, 2.0, 1.0, 2.0]);
        assert_eq!(pair_table(&emb, &[(1, 0)]).row(0), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5], &[0.5, 0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.4], &[0.6, 0.1]).unwrap(), 0.75);
        assert!(auc(&[], &[0.1]).is_err());
    }

    #[test]
    fn perfect_scores_give_unit_f1() {
        let c = Confusion::from_scores(&[0.9, 0.8], &[0.1, 0.2], 0.5);
        assert_eq!((c.precision(), c.recall(), c.f1()), (1.0, 1.0, 1.0));
        let none = Confusion::from_scores(&[0.1], &[0.2], 0.5);
        assert_eq!(none.f1(), 0.0);
    }

    #[test]
    fn single_seed_std_is_zero() {
        let s = MetricSummary::from_values("accuracy", vec![0.8]);
        assert_eq!((s.mean, s.std), (0.8, 0.0));
        let s = MetricSummary::from_values("accuracy", vec![1.0, 0.0]);
        assert_eq!((s.mean, s.std), (0.5, 0.5));
    }
}
