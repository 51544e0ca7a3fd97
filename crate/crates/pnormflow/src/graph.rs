//! Weighted-graph data model, incidence bookkeeping, and edge-list I/O.
//!
//! Orientation is fixed by construction order: the first listed endpoint of
//! an edge is its tail. Sign conventions built on that choice (and used
//! consistently by the solvers):
//!
//! * [`WeightedGraph::divergence`] of an edge vector `f` puts `+f(e)` at the
//!   head of `e` and `-f(e)` at the tail;
//! * [`WeightedGraph::potential_edge_costs`] of a vertex vector `phi` is
//!   `w(e) * (phi[tail] - phi[head])` per edge.
//!
//! Parallel edges are kept as distinct entries (the parallel-merge transform
//! needs to see them); self-loops are rejected.

use std::fmt;

use serde::{Serialize, Serializer};

/// Errors from graph construction, validation, parsing, and parameter
/// checking.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    /// A graph must have at least one vertex.
    NoVertices,
    /// An edge endpoint lies outside `0..n`.
    VertexOutOfRange { edge: usize, vertex: usize, n: usize },
    /// Self-loops never carry flow in any optimum and break the incidence
    /// conventions, so they are rejected outright.
    SelfLoop { edge: usize },
    /// Edge weights must be strictly positive and finite.
    BadWeight { edge: usize, weight: f64 },
    /// Every graph in scope must be connected; `vertex` is the smallest
    /// vertex unreachable from vertex 0.
    Disconnected { vertex: usize },
    /// A per-edge or per-vertex vector argument has the wrong length.
    LengthMismatch { expected: usize, got: usize },
    /// Malformed edge-list text; `line` is 1-based.
    Parse { line: usize, message: String },
    /// The exponent of a flow metric must lie in [1, ∞].
    InvalidP { p: f64 },
    /// A demand pair must consist of two distinct in-range vertices.
    BadDemand { source: usize, target: usize },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::NoVertices => write!(f, "graph must have at least one vertex"),
            GraphError::VertexOutOfRange { edge, vertex, n } => {
                write!(f, "edge {edge}: vertex {vertex} out of range (n = {n})")
            }
            GraphError::SelfLoop { edge } => write!(f, "edge {edge}: self-loops are not allowed"),
            GraphError::BadWeight { edge, weight } => {
                write!(f, "edge {edge}: weight {weight} is not a positive finite number")
            }
            GraphError::Disconnected { vertex } => {
                write!(f, "graph is not connected: vertex {vertex} is unreachable")
            }
            GraphError::LengthMismatch { expected, got } => {
                write!(f, "vector length {got} does not match expected {expected}")
            }
            GraphError::Parse { line, message } => write!(f, "line {line}: {message}"),
            GraphError::InvalidP { p } => write!(f, "p = {p} is outside [1, inf]"),
            GraphError::BadDemand { source, target } => {
                write!(f, "demand pair ({source}, {target}) is not two distinct vertices")
            }
        }
    }
}

impl std::error::Error for GraphError {}

/// The exponent p of a flow metric together with its Hölder conjugate.
///
/// p lies in [1, ∞], with 1 and ∞ conjugate to each other. Finite values
/// above [`PNormParam::INFINITY_THRESHOLD`] are normalized to ∞ at
/// construction: past that point p and ∞ are indistinguishable in double
/// precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PNormParam {
    p: f64,
}

impl PNormParam {
    /// Finite p above this value is treated as ∞ exactly.
    pub const INFINITY_THRESHOLD: f64 = 1e6;

    /// Validates p ∈ [1, ∞]; NaN and p < 1 are rejected.
    pub fn new(p: f64) -> Result<Self, GraphError> {
        if !(p >= 1.0) {
            // The negated comparison also catches NaN.
            return Err(GraphError::InvalidP { p });
        }
        let p = if p > Self::INFINITY_THRESHOLD { f64::INFINITY } else { p };
        Ok(PNormParam { p })
    }

    pub fn one() -> Self {
        PNormParam { p: 1.0 }
    }

    pub fn two() -> Self {
        PNormParam { p: 2.0 }
    }

    pub fn infinity() -> Self {
        PNormParam { p: f64::INFINITY }
    }

    pub fn p(self) -> f64 {
        self.p
    }

    /// Hölder conjugate q = p/(p−1), with q(1) = ∞ and q(∞) = 1.
    pub fn q(self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else if self.p.is_infinite() {
            1.0
        } else {
            self.p / (self.p - 1.0)
        }
    }

    /// The conjugate parameter as its own `PNormParam`.
    pub fn conjugate(self) -> PNormParam {
        PNormParam { p: self.q() }
    }

    pub fn is_one(self) -> bool {
        self.p == 1.0
    }

    pub fn is_two(self) -> bool {
        self.p == 2.0
    }

    pub fn is_infinite(self) -> bool {
        self.p.is_infinite()
    }
}

impl fmt::Display for PNormParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.p)
        }
    }
}

impl Serialize for PNormParam {
    /// Finite p serializes as a JSON number, ∞ as the string `"inf"`
    /// (JSON has no infinity literal).
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.p.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.p)
        }
    }
}

/// One oriented weighted edge. The orientation (tail → head) is fixed by
/// file/construction order and only fixes signs; the graph is undirected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(tail: usize, head: usize, weight: f64) -> Self {
        Edge { tail, head, weight }
    }

    /// The endpoint that is not `v`; caller must ensure `v` is an endpoint.
    pub fn other(&self, v: usize) -> usize {
        if v == self.tail {
            self.head
        } else {
            self.tail
        }
    }

    /// Whether both edges connect the same unordered vertex pair.
    pub fn is_parallel_to(&self, other: &Edge) -> bool {
        (self.tail == other.tail && self.head == other.head)
            || (self.tail == other.head && self.head == other.tail)
    }
}

/// A source/target pair for a unit flow demand χ_s − χ_t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DemandPair {
    pub source: usize,
    pub target: usize,
}

impl DemandPair {
    /// Rejects degenerate demands (source = target). Range validation
    /// against a concrete graph happens in the operations that take one.
    pub fn new(source: usize, target: usize) -> Result<Self, GraphError> {
        if source == target {
            return Err(GraphError::BadDemand { source, target });
        }
        Ok(DemandPair { source, target })
    }

    /// The same pair with the roles swapped.
    pub fn reversed(self) -> DemandPair {
        DemandPair { source: self.target, target: self.source }
    }
}

/// A connected undirected graph with positive edge weights and a fixed
/// edge orientation. Immutable after construction; all invariants
/// (connectivity, positive finite weights, no self-loops) are checked in
/// [`WeightedGraph::new`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoVertices);
        }
        for (i, e) in edges.iter().enumerate() {
            if e.tail >= n {
                return Err(GraphError::VertexOutOfRange { edge: i, vertex: e.tail, n });
            }
            if e.head >= n {
                return Err(GraphError::VertexOutOfRange { edge: i, vertex: e.head, n });
            }
            if e.tail == e.head {
                return Err(GraphError::SelfLoop { edge: i });
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(GraphError::BadWeight { edge: i, weight: e.weight });
            }
        }
        if let Some(vertex) = first_unreachable(n, &edges) {
            return Err(GraphError::Disconnected { vertex });
        }
        Ok(WeightedGraph { n, edges })
    }

    /// Convenience constructor from `(tail, head, weight)` triples.
    pub fn from_triples(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let edges = triples.iter().map(|&(t, h, w)| Edge::new(t, h, w)).collect();
        WeightedGraph::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges (parallel edges counted individually).
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> Edge {
        self.edges[i]
    }

    /// Total edge weight w(E).
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Number of edge endpoints at `v` (a parallel pair counts twice).
    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.tail == v || e.head == v).count()
    }

    /// Weighted degree deg_w(v) = Σ over incident edges of w(e).
    pub fn weighted_degree(&self, v: usize) -> f64 {
        self.edges
            .iter()
            .filter(|e| e.tail == v || e.head == v)
            .map(|e| e.weight)
            .sum()
    }

    /// Per-vertex incidence lists of `(edge index, other endpoint)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.tail].push((i, e.head));
            adj[e.head].push((i, e.tail));
        }
        adj
    }

    /// Checks that both endpoints of the pair are vertices of this graph.
    pub fn validate_pair(&self, d: DemandPair) -> Result<(), GraphError> {
        if d.source >= self.n || d.target >= self.n {
            return Err(GraphError::BadDemand { source: d.source, target: d.target });
        }
        Ok(())
    }

    /// B^T f: entry at vertex x is Σ over edges with head x of f(e) minus
    /// Σ over edges with tail x of f(e). Entries always sum to zero.
    pub fn divergence(&self, f: &[f64]) -> Result<Vec<f64>, GraphError> {
        if f.len() != self.edges.len() {
            return Err(GraphError::LengthMismatch { expected: self.edges.len(), got: f.len() });
        }
        let mut div = vec![0.0; self.n];
        for (e, &fe) in self.edges.iter().zip(f) {
            div[e.head] += fe;
            div[e.tail] -= fe;
        }
        Ok(div)
    }

    /// Entries w(e)·(φ_tail − φ_head) per edge; their q-norm is ||WBφ||_q.
    /// Vanishes exactly on constant φ (ker B = span{1} for connected g).
    pub fn potential_edge_costs(&self, phi: &[f64]) -> Result<Vec<f64>, GraphError> {
        if phi.len() != self.n {
            return Err(GraphError::LengthMismatch { expected: self.n, got: phi.len() });
        }
        Ok(self
            .edges
            .iter()
            .map(|e| e.weight * (phi[e.tail] - phi[e.head]))
            .collect())
    }

    /// A copy with every weight passed through `f`; re-validates, so `f`
    /// must keep weights positive and finite.
    pub fn map_weights<F: Fn(f64) -> f64>(&self, f: F) -> Result<WeightedGraph, GraphError> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(e.tail, e.head, f(e.weight)))
            .collect();
        WeightedGraph::new(self.n, edges)
    }

    /// A copy with every weight multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<WeightedGraph, GraphError> {
        self.map_weights(|w| c * w)
    }
}

/// Smallest vertex unreachable from vertex 0, or None if connected.
/// n = 1 with no edges counts as connected.
fn first_unreachable(n: usize, edges: &[Edge]) -> Option<usize> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.tail].push(e.head);
        adj[e.head].push(e.tail);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.iter().position(|&s| !s)
}

/// Parses the edge-list format: optional `#` comment lines, a `n m` header,
/// then m lines `u v w` with 0-indexed vertices and decimal weight w > 0.
/// Errors name the offending 1-based line.
pub fn parse_graph(text: &str) -> Result<WeightedGraph, GraphError> {
    let mut data_lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = data_lines
        .next()
        .ok_or_else(|| GraphError::Parse { line: 1, message: "empty input".to_string() })?;
    let mut header_tokens = header.split_whitespace();
    let n = parse_token::<usize>(header_tokens.next(), header_line, "vertex count")?;
    let m = parse_token::<usize>(header_tokens.next(), header_line, "edge count")?;
    if header_tokens.next().is_some() {
        return Err(GraphError::Parse {
            line: header_line,
            message: "header must be exactly 'n m'".to_string(),
        });
    }

    let mut edges = Vec::with_capacity(m);
    let mut last_line = header_line;
    for (line, l) in data_lines {
        if edges.len() == m {
            return Err(GraphError::Parse {
                line,
                message: format!("unexpected extra line after {m} edges"),
            });
        }
        let mut tokens = l.split_whitespace();
        let tail = parse_token::<usize>(tokens.next(), line, "tail vertex")?;
        let head = parse_token::<usize>(tokens.next(), line, "head vertex")?;
        let weight = parse_token::<f64>(tokens.next(), line, "weight")?;
        if tokens.next().is_some() {
            return Err(GraphError::Parse {
                line,
                message: "edge line must be exactly 'u v w'".to_string(),
            });
        }
        let edge_index = edges.len();
        if tail >= n || head >= n {
            return Err(GraphError::Parse {
                line,
                message: format!("vertex index out of range (n = {n})"),
            });
        }
        if tail == head {
            return Err(GraphError::Parse {
                line,
                message: format!("self-loop at vertex {tail} is not allowed"),
            });
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(GraphError::Parse {
                line,
                message: format!("weight {weight} is not a positive finite number"),
            });
        }
        edges.push(Edge::new(tail, head, weight));
        let _ = edge_index;
        last_line = line;
    }
    if edges.len() < m {
        return Err(GraphError::Parse {
            line: last_line,
            message: format!("expected {m} edge lines, found {}", edges.len()),
        });
    }
    WeightedGraph::new(n, edges)
}

fn parse_token<T: std::str::FromStr>(
    token: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, GraphError> {
    let token = token.ok_or_else(|| GraphError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    token.parse::<T>().map_err(|_| GraphError::Parse {
        line,
        message: format!("cannot parse {what} from '{token}'"),
    })
}

/// Canonical edge-list text: `n m` header, one `tail head weight` line per
/// edge in order, weights at 17 significant digits so that
/// `parse_graph(serialize_graph(g)) == g` bit-exactly.
pub fn serialize_graph(g: &WeightedGraph) -> String {
    let mut out = format!("{} {}\n", g.n(), g.m());
    for e in g.edges() {
        out.push_str(&format!("{} {} {:.16e}\n", e.tail, e.head, e.weight));
    }
    out
}
