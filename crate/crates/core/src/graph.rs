//! Undirected attributed graphs in CSR form, their text formats, and the two
//! adjacency normalizations the pipeline needs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Dense};

/// Sparse undirected graph with a dense feature table.
///
/// Each undirected edge is stored in both directions; rows have strictly
/// increasing neighbor ids and never contain the row's own id.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    features: Dense,
    labels: Option<Vec<Option<usize>>>,
}

impl Graph {
    /// Builds a graph from an edge iterator. Self-loops and repeated edges
    /// (in either orientation) are dropped.
    pub fn from_edges<I>(features: Dense, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = features.rows();
        if !features.all_finite() {
            return Err(Error::Value("feature table contains non-finite entries".into()));
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::Range { id, n });
                }
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut row in adj {
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(&row);
            indptr.push(indices.len());
        }
        Ok(Self {
            indptr,
            indices,
            features,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != self.num_nodes() {
            return Err(Error::Argument(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.num_nodes()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.indices.len() / 2
    }

    /// Number of stored (directed) CSR entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.indices[self.indptr[u]..self.indptr[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.indptr[u + 1] - self.indptr[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges as `(u, v)` with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn features(&self) -> &Dense {
        &self.features
    }

    pub fn labels(&self) -> Option<&[Option<usize>]> {
        self.labels.as_deref()
    }

    /// Labels, or a state error when the graph was loaded without them.
    pub fn require_labels(&self) -> Result<&[Option<usize>]> {
        self.labels()
            .ok_or_else(|| Error::State("graph has no labels".into()))
    }

    pub fn num_classes(&self) -> usize {
        self.labels()
            .and_then(|l| l.iter().flatten().max().map(|m| m + 1))
            .unwrap_or(0)
    }

    /// Copy of this graph with the given undirected edges deleted.
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> Result<Graph> {
        let mut drop = std::collections::HashSet::with_capacity(removed.len());
        for &(u, v) in removed {
            drop.insert((u.min(v), u.max(v)));
        }
        let kept: Vec<_> = self.edges().filter(|e| !drop.contains(e)).collect();
        let mut g = Graph::from_edges(self.features.clone(), kept)?;
        g.labels = self.labels.clone();
        Ok(g)
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_features(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
            writeln!(w, "{} {}", self.num_nodes(), self.num_features())?;
            for row in self.features.iter_rows() {
                write_row(w, row)?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn write_labels(&self, path: &Path) -> Result<()> {
        let labels = self.require_labels()?;
        let mut out = String::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                out.push_str(&format!("{i} {l}\n"));
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn write_row<W: Write>(w: &mut W, row: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            w.write_all(b" ")?;
        }
        write!(w, "{v}")?;
        first = false;
    }
    w.write_all(b"\n")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_usize(tok: &str, path: &Path, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::parse(path, line, format!("expected a non-negative integer, got {tok:?}")))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Reads the `N F` header plus `N` feature rows.
pub fn load_features(path: &Path) -> Result<Dense> {
    let text = read_text(path)?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing \"N F\" header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::parse(path, hline, "header must be \"N F\""));
    }
    let n = parse_usize(dims[0], path, hline)?;
    let f = parse_usize(dims[1], path, hline)?;
    let mut data = Vec::with_capacity(n * f);
    let mut rows = 0;
    for (lineno, line) in lines {
        if rows == n {
            return Err(Error::parse(path, lineno, format!("more than {n} feature rows")));
        }
        let start = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad real {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::Value(format!(
                    "{}:{lineno}: feature value {tok}",
                    path.display()
                )));
            }
            data.push(v);
        }
        if data.len() - start != f {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {f} columns, got {}", data.len() - start),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::parse(path, hline, format!("header declares {n} rows, found {rows}")));
    }
    Dense::from_vec(n, f, data)
}

pub fn load_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 2 columns, got {}", toks.len()),
            ));
        }
        let u = parse_usize(toks[0], path, lineno)?;
        let v = parse_usize(toks[1], path, lineno)?;
        for id in [u, v] {
            if id >= n {
                return Err(Error::Range { id, n });
            }
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn load_labels(path: &Path, n: usize) -> Result<Vec<Option<usize>>> {
    let text = read_text(path)?;
    let mut labels = vec![None; n];
    for (lineno, line) in content_lines(&text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected \"node_id label_id\", got {} columns", toks.len()),
            ));
        }
        let id = parse_usize(toks[0], path, lineno)?;
        if id >= n {
            return Err(Error::Range { id, n });
        }
        labels[id] = Some(parse_usize(toks[1], path, lineno)?);
    }
    Ok(labels)
}

/// Loads a graph from an edge list, a feature table and optional labels.
pub fn load_edge_list(
    edge_path: &Path,
    feature_path: &Path,
    label_path: Option<&Path>,
) -> Result<Graph> {
    let features = load_features(feature_path)?;
    let n = features.rows();
    let edges = load_edges(edge_path, n)?;
    let g = Graph::from_edges(features, edges)?;
    match label_path {
        Some(p) => {
            let labels = load_labels(p, n)?;
            g.with_labels(labels)
        }
        None => Ok(g),
    }
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` with `d̃ = degree + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(CsrMatrix);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n_rows()
    }
}

/// Symmetric GCN normalization of an adjacency given as sorted neighbor rows.
pub(crate) fn normalize_rows<'a, F>(n: usize, neighbors: F) -> NormalizedAdjacency
where
    F: Fn(usize) -> &'a [usize],
{
    let deg: Vec<f64> = (0..n).map(|i| (neighbors(i).len() + 1) as f64).collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for i in 0..n {
        let mut self_done = false;
        for &j in neighbors(i) {
            if !self_done && j > i {
                indices.push(i);
                values.push(1.0 / (deg[i] * deg[i]).sqrt());
                self_done = true;
            }
            indices.push(j);
            values.push(1.0 / (deg[i] * deg[j]).sqrt());
        }
        if !self_done {
            indices.push(i);
            values.push(1.0 / (deg[i] * deg[i]).sqrt());
        }
        indptr.push(indices.len());
    }
    NormalizedAdjacency(CsrMatrix::from_parts(n, n, indptr, indices, values))
}

pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    normalize_rows(g.num_nodes(), |i| g.neighbors(i))
}

/// `A D^{-1}`: column `j` scaled by `1 / degree(j)`; isolated columns stay zero.
pub fn column_normalized_adjacency(g: &Graph) -> CsrMatrix {
    let n = g.num_nodes();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(g.nnz());
    let mut values = Vec::with_capacity(g.nnz());
    indptr.push(0);
    for i in 0..n {
        for &j in g.neighbors(i) {
            indices.push(j);
            values.push(1.0 / g.degree(j) as f64);
        }
        indptr.push(indices.len());
    }
    CsrMatrix::from_parts(n, n, indptr, indices, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(Dense::zeros(n, 1), edges.iter().copied()).unwrap()
    }

    #[test]
    fn both_orientations_collapse_to_one_edge() {
        let g = graph(2, &[(0, 1), (1, 0)]);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.nnz(), 2);
    }

    #[test]
    fn self_loops_dropped() {
        let g = graph(3, &[(0, 0), (1, 2), (2, 2)]);
        assert_eq!(g.num_edges(), 1);
        assert!(!g.has_edge(0, 0));
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let err = Graph::from_edges(Dense::zeros(2, 1), [(0, 2)]).unwrap_err();
        assert!(matches!(err, Error::Range { id: 2, n: 2 }));
    }

    #[test]
    fn non_finite_features_rejected() {
        let f = Dense::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(matches!(
            Graph::from_edges(f, []).unwrap_err(),
            Error::Value(_)
        ));
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        let a = normalize_adjacency(&graph(1, &[])).matrix().to_dense();
        assert_eq!(a.as_slice(), &[1.0]);
    }

    #[test]
    fn single_edge_normalizes_to_halves() {
        let a = normalize_adjacency(&graph(2, &[(0, 1)])).matrix().to_dense();
        assert_eq!(a.as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn path_normalization_entries() {
        let a = normalize_adjacency(&graph(3, &[(0, 1), (1, 2)])).matrix().to_dense();
        assert!((a.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 0.0);
    }

    #[test]
    fn column_normalization_examples() {
        let a = column_normalized_adjacency(&graph(2, &[(0, 1)])).to_dense();
        assert_eq!(a.as_slice(), &[0.0, 1.0, 1.0, 0.0]);

        let star = column_normalized_adjacency(&graph(4, &[(0, 1), (0, 2)])).to_dense();
        assert_eq!(star.get(1, 0), 0.5);
        assert_eq!(star.get(2, 0), 0.5);
        // node 3 is isolated
        assert!((0..4).all(|i| star.get(i, 3) == 0.0));
    }

    #[test]
    fn without_edges_removes_either_orientation() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let h = g.without_edges(&[(1, 0)]).unwrap();
        assert_eq!(h.num_edges(), 1);
        assert!(h.has_edge(1, 2));
    }

    #[test]
    fn missing_labels_is_state_error() {
        assert!(matches!(graph(1, &[]).require_labels(), Err(Error::State(_))));
    }
}
