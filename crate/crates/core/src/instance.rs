//! Weighted graphs, the Max-Cut objective in the lifted ±1 model, and
//! reduced subproblems produced by fixing vertices during branching.
//!
//! Vertices are 0-indexed in memory and 1-indexed in instance files. The last
//! vertex of every graph plays the role of the homogenization coordinate: it
//! is pinned to side 0 and occupies the last row/column of the objective
//! matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// An undirected weighted graph with edges stored once, `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    integer_weights: bool,
}

impl Graph {
    /// Builds a graph from 0-indexed edges, normalizing each pair to `i < j`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Degenerate(
                "graph must have at least one vertex".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for (a, b, w) in edges {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, n });
            }
            if i == j {
                return Err(Error::Degenerate(format!("self loop on vertex {}", i + 1)));
            }
            if !w.is_finite() {
                return Err(Error::NumericInput);
            }
            if !seen.insert((i, j)) {
                return Err(Error::Degenerate(format!(
                    "duplicate edge ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            out.push(Edge { i, j, w });
        }
        Ok(Self::from_parts(n, out))
    }

    fn from_parts(n: usize, edges: Vec<Edge>) -> Self {
        let integer_weights = edges.iter().all(|e| e.w.fract() == 0.0);
        Graph {
            n,
            edges,
            integer_weights,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn integer_weights(&self) -> bool {
        self.integer_weights
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    /// Dense weighted adjacency matrix.
    pub fn adjacency(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for e in &self.edges {
            a[e.i][e.j] += e.w;
            a[e.j][e.i] += e.w;
        }
        a
    }

    /// Total weight of edges whose endpoints lie on different sides.
    pub fn cut_value(&self, side: &[u8]) -> f64 {
        debug_assert_eq!(side.len(), self.n);
        self.edges
            .iter()
            .filter(|e| side[e.i] != side[e.j])
            .map(|e| e.w)
            .sum()
    }
}

impl fmt::Display for Graph {
    /// Writes the graph in the instance file format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n, self.edges.len())?;
        for e in &self.edges {
            writeln!(f, "{} {} {}", e.i + 1, e.j + 1, e.w)?;
        }
        Ok(())
    }
}

/// Parses the `n m` / `i j w` instance format. Lines starting with `#` and
/// blank lines are skipped.
pub fn parse_instance(text: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header \"n m\"".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(parse_err(header_line, "header must be \"n m\""));
    }
    let n: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(header_line, "invalid vertex count"))?;
    let m: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(header_line, "invalid edge count"))?;
    if n == 0 {
        return Err(parse_err(header_line, "vertex count must be positive"));
    }

    let mut seen = std::collections::HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    for (line, l) in lines {
        if edges.len() == m {
            return Err(parse_err(line, &format!("more than m={m} edge lines")));
        }
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(line, "edge line must be \"i j w\""));
        }
        let mut idx = [0usize; 2];
        for (slot, s) in idx.iter_mut().zip(&fields[..2]) {
            let v: usize = s
                .parse()
                .map_err(|_| parse_err(line, &format!("invalid vertex index {s:?}")))?;
            if v == 0 || v > n {
                return Err(parse_err(line, &format!("vertex index {v} exceeds n={n}")));
            }
            *slot = v - 1;
        }
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(line, &format!("invalid weight {:?}", fields[2])))?;
        if !w.is_finite() {
            return Err(parse_err(line, "weight must be finite"));
        }
        let (i, j) = (idx[0].min(idx[1]), idx[0].max(idx[1]));
        if i == j {
            return Err(parse_err(line, &format!("self loop on vertex {}", i + 1)));
        }
        if !seen.insert((i, j)) {
            return Err(parse_err(
                line,
                &format!("duplicate edge ({}, {})", i + 1, j + 1),
            ));
        }
        edges.push(Edge { i, j, w });
    }
    if edges.len() != m {
        return Err(Error::Parse {
            line: header_line,
            message: format!("header declares m={m} edges but {} were given", edges.len()),
        });
    }
    Ok(Graph::from_parts(n, edges))
}

/// Reads and parses an instance from any byte source.
pub fn read_instance<R: Read>(mut reader: R) -> Result<Graph> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    parse_instance(&text)
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

/// `diag(Ae) - A`.
pub fn laplacian(g: &Graph) -> SymMatrix {
    let mut l = SymMatrix::zeros(g.n);
    for e in &g.edges {
        l.add(e.i, e.i, e.w);
        l.add(e.j, e.j, e.w);
        l.add(e.i, e.j, -e.w);
    }
    l
}

/// The `n x n` matrix `L` with `<L, X> = cut value` for `X = [x;1][x;1]^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveMatrix(SymMatrix);

impl ObjectiveMatrix {
    pub fn matrix(&self) -> &SymMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }
}

pub fn objective_matrix(g: &Graph) -> Result<ObjectiveMatrix> {
    let n = g.n;
    if n < 2 {
        return Err(Error::Degenerate("objective matrix needs n >= 2".into()));
    }
    let l0 = laplacian(g);
    let k = n - 1;
    // Row sums of the leading (n-1)x(n-1) block.
    let row_sums: Vec<f64> = (0..k).map(|i| (0..k).map(|j| l0.get(i, j)).sum()).collect();
    let total: f64 = row_sums.iter().sum();
    let mut l = SymMatrix::zeros(n);
    for i in 0..k {
        for j in i..k {
            l.set(i, j, 0.25 * l0.get(i, j));
        }
        l.set(i, k, 0.25 * row_sums[i]);
    }
    l.set(k, k, 0.25 * total);
    Ok(ObjectiveMatrix(l))
}

/// A branch-and-bound subproblem: the parent instance with some vertices
/// fixed, contracted into a smaller Max-Cut instance.
///
/// The reduced graph lists the free vertices in ascending original order and
/// ends with the representative, which absorbs the original last vertex and
/// every fixed vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    parent_n: usize,
    fixed: BTreeMap<usize, u8>,
    free: Vec<usize>,
    reduced: Graph,
    offset: f64,
}

impl Subproblem {
    pub fn root(g: &Graph) -> Self {
        Subproblem {
            parent_n: g.n,
            fixed: BTreeMap::new(),
            free: (0..g.n - 1).collect(),
            reduced: g.clone(),
            offset: 0.0,
        }
    }

    /// Rebuilds a subproblem from its fixings alone, applying them in
    /// ascending vertex order.
    pub fn from_fixings(g: &Graph, fixed: &BTreeMap<usize, u8>) -> Result<Self> {
        let mut sub = Subproblem::root(g);
        for (&v, &val) in fixed {
            sub = reduce_subproblem(&sub, v, val)?;
        }
        Ok(sub)
    }

    pub fn parent_n(&self) -> usize {
        self.parent_n
    }

    pub fn fixed(&self) -> &BTreeMap<usize, u8> {
        &self.fixed
    }

    /// Original vertex for each non-representative reduced index.
    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    pub fn reduced(&self) -> &Graph {
        &self.reduced
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Maps a side assignment of the reduced graph to the original graph,
    /// normalized so the original last vertex sits on side 0.
    pub fn lift(&self, reduced_side: &[u8]) -> Vec<u8> {
        debug_assert_eq!(reduced_side.len(), self.reduced.n);
        let flip = reduced_side[self.reduced.n - 1];
        let mut side = vec![0u8; self.parent_n];
        for (k, &v) in self.free.iter().enumerate() {
            side[v] = reduced_side[k] ^ flip;
        }
        for (&v, &val) in &self.fixed {
            side[v] = val;
        }
        side
    }
}

/// Fixes original vertex `vertex` to side `value` (side 0 is the side of the
/// original last vertex) and contracts it into the representative.
pub fn reduce_subproblem(parent: &Subproblem, vertex: usize, value: u8) -> Result<Subproblem> {
    assert!(value <= 1, "side must be 0 or 1");
    if vertex + 1 == parent.parent_n || parent.fixed.contains_key(&vertex) {
        return Err(Error::AlreadyFixed(vertex));
    }
    if vertex >= parent.parent_n {
        return Err(Error::IndexOutOfRange {
            index: vertex,
            n: parent.parent_n,
        });
    }
    let r = parent
        .free
        .iter()
        .position(|&v| v == vertex)
        .expect("unfixed vertex must be free");

    let n = parent.reduced.n;
    let rep = n - 1;
    let mut w = parent.reduced.adjacency();
    let mut offset = parent.offset;
    for j in 0..n {
        let wj = w[r][j];
        if j == r || wj == 0.0 {
            continue;
        }
        if j == rep {
            if value == 1 {
                offset += wj;
            }
        } else if value == 0 {
            w[rep][j] += wj;
            w[j][rep] += wj;
        } else {
            offset += wj;
            w[rep][j] -= wj;
            w[j][rep] -= wj;
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&k| k != r).collect();
    let mut edges = Vec::new();
    for (a, &ka) in keep.iter().enumerate() {
        for (b, &kb) in keep.iter().enumerate().skip(a + 1) {
            if w[ka][kb] != 0.0 {
                edges.push(Edge {
                    i: a,
                    j: b,
                    w: w[ka][kb],
                });
            }
        }
    }
    let mut reduced = Graph::from_parts(n - 1, edges);
    reduced.integer_weights = parent.reduced.integer_weights;

    let mut fixed = parent.fixed.clone();
    fixed.insert(vertex, value);
    let mut free = parent.free.clone();
    free.remove(r);
    Ok(Subproblem {
        parent_n: parent.parent_n,
        fixed,
        free,
        reduced,
        offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> Graph {
        parse_instance("3 3\n1 2 1\n1 3 1\n2 3 1").unwrap()
    }

    fn brute_max_cut(g: &Graph) -> f64 {
        let n = g.n();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << (n - 1)) {
            let side: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
            best = best.max(g.cut_value(&side));
        }
        best
    }

    #[test]
    fn parses_single_edge() {
        let g = parse_instance("2 1\n1 2 1").unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edges(), &[Edge { i: 0, j: 1, w: 1.0 }]);
        assert!(g.integer_weights());
    }

    #[test]
    fn parses_k3_with_comments() {
        let g = parse_instance("# triangle\n3 3\n1 2 1\n\n1 3 1\n2 3 1\n").unwrap();
        assert_eq!(g, k3());
    }

    #[test]
    fn detects_fractional_weights_and_keeps_zero_edges() {
        let g = parse_instance("3 2\n1 2 0.5\n2 3 0").unwrap();
        assert!(!g.integer_weights());
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = parse_instance("2 1\n1 3 1").unwrap_err();
        assert_eq!(err.to_string(), "vertex index 3 exceeds n=2 at line 2");
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(
            parse_instance("2 1\n1 2"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_instance("3 2\n1 2 1\n2 1 4"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_instance("3 2\n1 2 1"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_instance("3 1\n1 2 1\n2 3 1"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_instance("2 1\n1 2 x"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_instance("").is_err());
    }

    #[test]
    fn laplacian_examples() {
        let k2 = parse_instance("2 1\n1 2 1").unwrap();
        let l = laplacian(&k2);
        assert_eq!(l.to_rows(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);

        let l = laplacian(&k3());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l.get(i, j), if i == j { 2.0 } else { -1.0 });
            }
        }

        let path = parse_instance("3 2\n1 2 2\n2 3 5").unwrap();
        let l = laplacian(&path);
        assert_eq!(l.diag(), vec![2.0, 7.0, 5.0]);
        assert_eq!(l.get(0, 1), -2.0);
        assert_eq!(l.get(1, 2), -5.0);
        assert_eq!(l.get(0, 2), 0.0);
    }

    #[test]
    fn objective_matrix_examples() {
        let k2 = parse_instance("2 1\n1 2 1").unwrap();
        let l = objective_matrix(&k2).unwrap();
        assert_eq!(
            l.matrix().to_rows(),
            vec![vec![0.25, 0.25], vec![0.25, 0.25]]
        );
        let x = SymMatrix::from_fn(2, |_, _| 1.0);
        assert_eq!(l.matrix().inner(&x), 1.0);

        let l = objective_matrix(&k3()).unwrap();
        let expected = [[2.0, -1.0, 1.0], [-1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l.matrix().get(i, j), 0.25 * expected[i][j]);
            }
        }

        let empty = Graph::new(3, []).unwrap();
        let l = objective_matrix(&empty).unwrap();
        assert_eq!(l.matrix().norm_fro(), 0.0);

        let single = Graph::new(1, []).unwrap();
        assert!(matches!(
            objective_matrix(&single),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn reduce_k2() {
        let g = parse_instance("2 1\n1 2 1").unwrap();
        let root = Subproblem::root(&g);
        let same = reduce_subproblem(&root, 0, 0).unwrap();
        assert_eq!(same.reduced().n(), 1);
        assert_eq!(same.offset(), 0.0);
        let opp = reduce_subproblem(&root, 0, 1).unwrap();
        assert_eq!(opp.reduced().n(), 1);
        assert_eq!(opp.offset(), 1.0);
        assert_eq!(opp.lift(&[0]), vec![1, 0]);
    }

    #[test]
    fn reduce_k3_fix_one() {
        let g = k3();
        let child = reduce_subproblem(&Subproblem::root(&g), 0, 1).unwrap();
        assert_eq!(child.reduced().n(), 2);
        assert_eq!(brute_max_cut(child.reduced()) + child.offset(), 2.0);
    }

    #[test]
    fn reduce_rejects_fixed_vertices() {
        let g = k3();
        let root = Subproblem::root(&g);
        assert_eq!(reduce_subproblem(&root, 2, 0), Err(Error::AlreadyFixed(2)));
        let child = reduce_subproblem(&root, 1, 0).unwrap();
        assert_eq!(reduce_subproblem(&child, 1, 1), Err(Error::AlreadyFixed(1)));
    }
}
