//! Local graph rewrites that preserve d_p, and two demonstrations that
//! the list of such rewrites is genuinely short.
//!
//! Three reductions rewrite a graph without changing d_p between the
//! surviving vertices:
//!
//! * [`reduce_degree2`] — a degree-2 vertex x with leg weights α, β
//!   collapses into a single edge between its neighbors of weight
//!   γ = (α^{−p} + β^{−p})^{−1/p}. At p = 1 this is the harmonic rule
//!   1/γ = 1/α + 1/β; as p → ∞ it degenerates to γ = min{α, β}
//!   (series bottleneck), which is what the p = ∞ call computes.
//! * [`merge_parallel`] — two parallel edges α, β combine into one of
//!   weight γ = (α^q + β^q)^{1/q}, where q = p/(p−1). At p = ∞
//!   (q = 1) this is the conductance-style sum α + β; at p = 1
//!   (q = ∞) it degenerates to max{α, β}.
//! * [`wye_delta_p2`] — for p = 2 only, a degree-3 vertex r with leg
//!   weights w_a, w_b, w_c to neighbors a, b, c becomes a triangle on
//!   {a, b, c} with w{b,c} = w_b·w_c/√(w_a² + w_b² + w_c²) and
//!   cyclically. Since d_2 is the square root of effective resistance
//!   taken at squared weights, this is the classical electrical Y-Δ
//!   rule transported through that change of variables.
//!
//! The Y-Δ rule does **not** extend to any other exponent, and
//! [`wye_delta_obstruction`] computes the two-gadget demonstration:
//! replacing the unit 3-star by a triangle forces a symmetric triangle
//! weight, but the bare star forces α₁ = (1 + 2^{q−1})^{−1/q} while a
//! star whose b and c terminals are clamped together through an
//! auxiliary heavy vertex forces α₂ = (2^{1/(q−1)} + 1)^{−1/p}. The
//! two prescriptions coincide exactly at p = 2 (both equal 1/√3) and
//! disagree for every other p in (1, ∞), so no single triangle can be
//! correct in all surrounding graphs. Both values are additionally
//! cross-checked against direct dual solves on the two gadgets.
//!
//! For p = ∞ the analogous question is whether a degree-k vertex can
//! be replaced by a mesh over its neighborhood while preserving all
//! min-cuts. [`star_mesh_cut_system`] builds the linear system a
//! replacement clique for the unit k-star would have to satisfy — one
//! equation per bipartition S of the leaves, crossing weight equal to
//! min(|S|, k−|S|) — and reports either a feasible weighting (k ≤ 3)
//! or an infeasibility certificate (every k ≥ 4).
//!
//! All rewrites are pure: the input graph is never mutated, and the
//! result carries the rebuilt graph plus enough bookkeeping
//! ([`TransformResult::vertex_map`]) to relate old labels to new ones.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::graph::{DemandPair, Edge, GraphError, PNormParam, WeightedGraph};
use crate::solve::{self, SolveError, SolveOptions};

/// Weight standing in for the "infinite" clamp edges of the second
/// obstruction gadget. Doubling it moves the reported values by less
/// than 1e-6 (see the sensitivity test), so the finite stand-in does
/// not affect any digit we report.
pub const OBSTRUCTION_CLAMP_WEIGHT: f64 = 1e9;

/// Largest star the cut system is built for; the constraint count is
/// 2^{k−1} − 1, so the enumeration is exponential in k.
pub const STAR_MESH_MAX_K: usize = 20;

/// Tolerance for the obstruction gadget solves.
const OBSTRUCTION_SOLVE_TOL: f64 = 1e-10;

/// A cut-system residual below this counts as feasible. The system
/// has small-integer data, so genuine infeasibilities show up at unit
/// scale (2/7 already for k = 4) while feasible systems solve to
/// machine precision.
const STAR_MESH_FEASIBLE_TOL: f64 = 1e-8;

/// Errors from the local rewrites.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformError {
    /// Invalid input graph data (propagated from reconstruction).
    Graph(GraphError),
    /// An obstruction gadget solve failed to certify.
    Solve(SolveError),
    /// The targeted vertex does not have the degree the rule needs.
    WrongDegree { vertex: usize, expected: usize, got: usize },
    /// The site involves a parallel pair where distinct neighbors are
    /// required; merge the parallel edges first.
    CoincidentNeighbors { vertex: usize, neighbor: usize },
    /// An edge index past the end of the edge list.
    EdgeOutOfRange { index: usize, m: usize },
    /// A vertex index past the end of the vertex range.
    VertexOutOfRange { vertex: usize, n: usize },
    /// The two edges handed to `merge_parallel` do not share both
    /// endpoints (or are the same edge).
    NotParallel { e1: usize, e2: usize },
    /// `star_mesh_cut_system` size outside 2..=STAR_MESH_MAX_K.
    StarSize { k: usize },
}

impl fmt::Display for TransformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformError::Graph(e) => write!(f, "{e}"),
            TransformError::Solve(e) => write!(f, "{e}"),
            TransformError::WrongDegree { vertex, expected, got } => {
                write!(f, "vertex {vertex} has degree {got}, rule needs degree {expected}")
            }
            TransformError::CoincidentNeighbors { vertex, neighbor } => {
                write!(
                    f,
                    "vertex {vertex} reaches neighbor {neighbor} along parallel edges; \
                     apply merge_parallel before this rule"
                )
            }
            TransformError::EdgeOutOfRange { index, m } => {
                write!(f, "edge index {index} out of range for {m} edges")
            }
            TransformError::VertexOutOfRange { vertex, n } => {
                write!(f, "vertex {vertex} out of range for {n} vertices")
            }
            TransformError::NotParallel { e1, e2 } => {
                if e1 == e2 {
                    write!(f, "edge {e1} cannot be merged with itself")
                } else {
                    write!(f, "edges {e1} and {e2} do not share both endpoints")
                }
            }
            TransformError::StarSize { k } => {
                write!(f, "star-mesh size must be between 2 and {STAR_MESH_MAX_K}, got {k}")
            }
        }
    }
}

impl std::error::Error for TransformError {}

impl From<GraphError> for TransformError {
    fn from(e: GraphError) -> Self {
        TransformError::Graph(e)
    }
}

impl From<SolveError> for TransformError {
    fn from(e: SolveError) -> Self {
        TransformError::Solve(e)
    }
}

/// Which rewrite produced a [`TransformResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformRule {
    Degree2,
    Parallel,
    WyeDeltaP2,
}

impl fmt::Display for TransformRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformRule::Degree2 => write!(f, "degree2"),
            TransformRule::Parallel => write!(f, "parallel"),
            TransformRule::WyeDeltaP2 => write!(f, "wye-delta-p2"),
        }
    }
}

/// Outcome of one local rewrite.
///
/// Labels in `removed_vertices` / `removed_edges` refer to the input
/// graph; labels in `created` refer to `graph_after`. When a vertex
/// was deleted, every survivor above it shifts down by one, and
/// `vertex_map[v]` records where input vertex v ended up (`None` for
/// the deleted vertex). Created edges sit at the tail of
/// `graph_after.edges()`, in the order listed in `created`.
#[derive(Debug, Clone, Serialize)]
pub struct TransformResult {
    pub rule: TransformRule,
    /// Exponent the replacement weights were computed for.
    pub p: PNormParam,
    pub graph_after: WeightedGraph,
    pub removed_vertices: Vec<usize>,
    pub removed_edges: Vec<Edge>,
    pub created: Vec<Edge>,
    pub vertex_map: Vec<Option<usize>>,
}

/// γ = (α^{−p} + β^{−p})^{−1/p}, computed min-factored so that large
/// finite p cannot overflow; p = ∞ returns min{α, β} directly.
fn series_weight(alpha: f64, beta: f64, p: PNormParam) -> f64 {
    if p.is_infinite() {
        return alpha.min(beta);
    }
    let pv = p.p();
    let m = alpha.min(beta);
    m * ((m / alpha).powf(pv) + (m / beta).powf(pv)).powf(-1.0 / pv)
}

/// γ = (α^q + β^q)^{1/q}, computed max-factored; p = 1 (q = ∞)
/// returns max{α, β} directly.
fn parallel_weight(alpha: f64, beta: f64, p: PNormParam) -> f64 {
    if p.is_one() {
        return alpha.max(beta);
    }
    let q = p.q();
    let mx = alpha.max(beta);
    mx * ((alpha / mx).powf(q) + (beta / mx).powf(q)).powf(1.0 / q)
}

/// vertex_map for deleting `x` from an n-vertex graph: survivors keep
/// their order, everything above x shifts down by one.
fn removal_map(n: usize, x: usize) -> Vec<Option<usize>> {
    (0..n)
        .map(|v| match v.cmp(&x) {
            Ordering::Less => Some(v),
            Ordering::Equal => None,
            Ordering::Greater => Some(v - 1),
        })
        .collect()
}

/// Eliminates a degree-2 vertex, replacing its two legs by one edge.
///
/// With legs α = w{a,x} and β = w{x,b}, the replacement edge {a,b}
/// has weight γ = (α^{−p} + β^{−p})^{−1/p}: the series rule for d_p.
/// Every distance between surviving vertices is unchanged, at the p
/// the rule was computed for.
///
/// The rule needs two *distinct* neighbors; a vertex whose two edges
/// run to the same neighbor is a parallel pair in disguise and is
/// rejected with [`TransformError::CoincidentNeighbors`] — merge it
/// with [`merge_parallel`] instead. If {a,b} already carried an edge,
/// the new edge is simply added alongside it (the graph is a
/// multigraph); no further merging is implied.
pub fn reduce_degree2(
    g: &WeightedGraph,
    x: usize,
    p: PNormParam,
) -> Result<TransformResult, TransformError> {
    if x >= g.n() {
        return Err(TransformError::VertexOutOfRange { vertex: x, n: g.n() });
    }
    let incident: Vec<(usize, Edge)> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.tail == x || e.head == x)
        .map(|(i, e)| (i, *e))
        .collect();
    if incident.len() != 2 {
        return Err(TransformError::WrongDegree { vertex: x, expected: 2, got: incident.len() });
    }
    let (i1, leg1) = incident[0];
    let (i2, leg2) = incident[1];
    let a = leg1.other(x);
    let b = leg2.other(x);
    if a == b {
        return Err(TransformError::CoincidentNeighbors { vertex: x, neighbor: a });
    }
    let gamma = series_weight(leg1.weight, leg2.weight, p);
    let map = removal_map(g.n(), x);

    let mut triples: Vec<(usize, usize, f64)> = Vec::with_capacity(g.m() - 1);
    for (i, e) in g.edges().iter().enumerate() {
        if i == i1 || i == i2 {
            continue;
        }
        triples.push((map[e.tail].unwrap(), map[e.head].unwrap(), e.weight));
    }
    let created = Edge::new(map[a].unwrap(), map[b].unwrap(), gamma);
    triples.push((created.tail, created.head, created.weight));
    let graph_after = WeightedGraph::from_triples(g.n() - 1, &triples)?;

    Ok(TransformResult {
        rule: TransformRule::Degree2,
        p,
        graph_after,
        removed_vertices: vec![x],
        removed_edges: vec![leg1, leg2],
        created: vec![created],
        vertex_map: map,
    })
}

/// Merges two parallel edges into one.
///
/// With weights α, β and conjugate exponent q = p/(p−1), the merged
/// edge has weight γ = (α^q + β^q)^{1/q}; distances at that p are
/// unchanged. Only the two named edges are merged — further parallel
/// copies between the same endpoints are left alone.
pub fn merge_parallel(
    g: &WeightedGraph,
    e1: usize,
    e2: usize,
    p: PNormParam,
) -> Result<TransformResult, TransformError> {
    for index in [e1, e2] {
        if index >= g.m() {
            return Err(TransformError::EdgeOutOfRange { index, m: g.m() });
        }
    }
    let first = g.edge(e1);
    let second = g.edge(e2);
    if e1 == e2 || !first.is_parallel_to(&second) {
        return Err(TransformError::NotParallel { e1, e2 });
    }
    let gamma = parallel_weight(first.weight, second.weight, p);
    let created = Edge::new(first.tail, first.head, gamma);

    let mut triples: Vec<(usize, usize, f64)> = Vec::with_capacity(g.m() - 1);
    for (i, e) in g.edges().iter().enumerate() {
        if i == e1 || i == e2 {
            continue;
        }
        triples.push((e.tail, e.head, e.weight));
    }
    triples.push((created.tail, created.head, created.weight));
    let graph_after = WeightedGraph::from_triples(g.n(), &triples)?;

    Ok(TransformResult {
        rule: TransformRule::Parallel,
        p,
        graph_after,
        removed_vertices: Vec::new(),
        removed_edges: vec![first, second],
        created: vec![created],
        vertex_map: (0..g.n()).map(Some).collect(),
    })
}

/// Replaces a degree-3 vertex by a triangle over its neighbors,
/// preserving d_2.
///
/// With legs w_a, w_b, w_c to distinct neighbors a, b, c, the
/// triangle edge opposite each leg gets
///
/// ```text
/// w{b,c} = w_b·w_c / sqrt(w_a² + w_b² + w_c²)      (and cyclically)
/// ```
///
/// — the electrical Y-Δ rule at squared weights, since d_2 is the
/// square root of effective resistance under w ↦ w². If a triangle
/// edge lands parallel to pre-existing edges, they are folded in
/// immediately by the p = 2 parallel rule (root-sum-square), so
/// `graph_after` never gains a parallel pair at the rewrite site;
/// the absorbed edges are listed in `removed_edges` and the folded
/// weights in `created`.
pub fn wye_delta_p2(g: &WeightedGraph, r: usize) -> Result<TransformResult, TransformError> {
    let p = PNormParam::two();
    if r >= g.n() {
        return Err(TransformError::VertexOutOfRange { vertex: r, n: g.n() });
    }
    let incident: Vec<(usize, Edge)> = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.tail == r || e.head == r)
        .map(|(i, e)| (i, *e))
        .collect();
    if incident.len() != 3 {
        return Err(TransformError::WrongDegree { vertex: r, expected: 3, got: incident.len() });
    }
    let neighbors: Vec<usize> = incident.iter().map(|(_, e)| e.other(r)).collect();
    for i in 0..3 {
        for j in (i + 1)..3 {
            if neighbors[i] == neighbors[j] {
                return Err(TransformError::CoincidentNeighbors {
                    vertex: r,
                    neighbor: neighbors[i],
                });
            }
        }
    }
    let (a, b, c) = (neighbors[0], neighbors[1], neighbors[2]);
    let (wa, wb, wc) = (incident[0].1.weight, incident[1].1.weight, incident[2].1.weight);
    let root = (wa * wa + wb * wb + wc * wc).sqrt();
    // Triangle edge opposite each leg, in leg order.
    let delta = [(b, c, wb * wc / root), (a, c, wa * wc / root), (a, b, wa * wb / root)];

    let map = removal_map(g.n(), r);
    let leg_indices: Vec<usize> = incident.iter().map(|(i, _)| *i).collect();
    let mut removed_edges: Vec<Edge> = incident.iter().map(|(_, e)| *e).collect();

    // Survivors that do not run parallel to a new triangle edge keep
    // their place; parallel ones are absorbed into the triangle edge.
    let mut survivors: Vec<Edge> = Vec::with_capacity(g.m() - 3);
    let mut folded = [delta[0].2, delta[1].2, delta[2].2];
    for (i, e) in g.edges().iter().enumerate() {
        if leg_indices.contains(&i) {
            continue;
        }
        let mut absorbed = false;
        for (d, &(u, v, _)) in delta.iter().enumerate() {
            let same_pair = (e.tail == u && e.head == v) || (e.tail == v && e.head == u);
            if same_pair {
                folded[d] = parallel_weight(folded[d], e.weight, p);
                removed_edges.push(*e);
                absorbed = true;
                break;
            }
        }
        if !absorbed {
            survivors.push(*e);
        }
    }

    let mut triples: Vec<(usize, usize, f64)> = survivors
        .iter()
        .map(|e| (map[e.tail].unwrap(), map[e.head].unwrap(), e.weight))
        .collect();
    let mut created = Vec::with_capacity(3);
    for (d, &(u, v, _)) in delta.iter().enumerate() {
        let edge = Edge::new(map[u].unwrap(), map[v].unwrap(), folded[d]);
        triples.push((edge.tail, edge.head, edge.weight));
        created.push(edge);
    }
    let graph_after = WeightedGraph::from_triples(g.n() - 1, &triples)?;

    Ok(TransformResult {
        rule: TransformRule::WyeDeltaP2,
        p,
        graph_after,
        removed_vertices: vec![r],
        removed_edges,
        created,
        vertex_map: map,
    })
}

/// The two mutually incompatible symmetric triangle weights that a
/// Y-Δ rule for exponent p would have to produce. See the module
/// docs: `alpha1` is forced by the bare unit 3-star, `alpha2` by the
/// clamped star, and a rule consistent with both exists only when the
/// two coincide.
#[derive(Debug, Clone, Serialize)]
pub struct ObstructionReport {
    pub p: PNormParam,
    pub q: f64,
    /// (1 + 2^{q−1})^{−1/q} — forced by the bare star.
    pub alpha1: f64,
    /// (2^{1/(q−1)} + 1)^{−1/p} — forced by the clamped star.
    pub alpha2: f64,
    /// |alpha1 − alpha2|.
    pub gap: f64,
    /// alpha1 recovered from a dual solve on the bare star gadget.
    pub alpha1_solver: f64,
    /// alpha2 recovered from a dual solve on the clamped star gadget.
    pub alpha2_solver: f64,
    /// Whether the two prescriptions agree to 1e-9 — true exactly at
    /// p = 2.
    pub transform_exists: bool,
}

/// The bare gadget: a unit 3-star with terminals a = 0, b = 1, c = 2
/// and center r = 3.
fn star_gadget() -> WeightedGraph {
    WeightedGraph::from_triples(4, &[(0, 3, 1.0), (1, 3, 1.0), (2, 3, 1.0)])
        .expect("unit 3-star is a valid graph")
}

/// The clamping gadget: the unit 3-star plus an auxiliary vertex
/// v = 4 tied to b and c by edges of weight `clamp`, which forces
/// φ_b ≈ φ_c in any near-optimal potential.
fn clamped_star_gadget(clamp: f64) -> WeightedGraph {
    WeightedGraph::from_triples(
        5,
        &[(0, 3, 1.0), (1, 3, 1.0), (2, 3, 1.0), (4, 1, clamp), (4, 2, clamp)],
    )
    .expect("clamped 3-star is a valid graph")
}

/// Computes the Y-Δ obstruction for exponent p ∈ (1, ∞).
///
/// Any triangle replacing the unit 3-star must be symmetric, with one
/// weight α. Requiring correctness inside the bare gadget forces
/// α₁ = (1 + 2^{q−1})^{−1/q}; requiring it inside the clamped gadget
/// forces α₂ = (2^{1/(q−1)} + 1)^{−1/p}. Both are evaluated in
/// closed form *and* recovered from direct dual solves on the two
/// gadgets (the clamp edges realized at weight
/// [`OBSTRUCTION_CLAMP_WEIGHT`]), and the report records the gap
/// |α₁ − α₂|, which vanishes exactly at p = 2 where both equal 1/√3.
pub fn wye_delta_obstruction(p: PNormParam) -> Result<ObstructionReport, TransformError> {
    if p.is_one() || p.is_infinite() {
        return Err(TransformError::Graph(GraphError::InvalidP { p: p.p() }));
    }
    let q = p.q();
    // Factored forms of the two closed-form weights; these cannot
    // overflow even as q → ∞ (p → 1) or p → ∞.
    let alpha1 = 2f64.powf(-(q - 1.0) / q) * (1.0 + 2f64.powf(1.0 - q)).powf(-1.0 / q);
    let alpha2 = 2f64.powf(-1.0 / q) * (1.0 + 2f64.powf(-p.p() / q)).powf(-1.0 / p.p());
    let gap = (alpha1 - alpha2).abs();

    let opts = SolveOptions { tol: OBSTRUCTION_SOLVE_TOL, ..SolveOptions::default() };
    let pair = DemandPair::new(0, 1).expect("0 != 1");

    // Bare star: d̄^q(a,b) = α₁^q·(1 + 2^{1−q}), so a measured d̄
    // pins down α₁.
    let (_, bare) = solve::solve_dual(&star_gadget(), pair, p, opts)?;
    let dbar1 = 1.0 / bare.value();
    let alpha1_solver = dbar1 * (1.0 + 2f64.powf(1.0 - q)).powf(-1.0 / q);

    // Clamped star: the triangle sees b and c identified, so
    // d̄^q(a,b) = 2·α₂^q.
    let (_, clamped) =
        solve::solve_dual(&clamped_star_gadget(OBSTRUCTION_CLAMP_WEIGHT), pair, p, opts)?;
    let dbar2 = 1.0 / clamped.value();
    let alpha2_solver = dbar2 * 2f64.powf(-1.0 / q);

    Ok(ObstructionReport {
        p,
        q,
        alpha1,
        alpha2,
        gap,
        alpha1_solver,
        alpha2_solver,
        transform_exists: gap <= 1e-9,
    })
}

/// Feasibility report for the k-star-mesh cut system.
///
/// The unit k-star has min-cut min(|S|, k−|S|) between any bipartition
/// (S, rest) of its leaves. A replacement mesh on the leaves whose
/// crossing weights satisfy all those equations simultaneously would
/// preserve every such cut; this report says whether the linear system
/// admits a solution (it does only for k ≤ 3).
#[derive(Debug, Clone, Serialize)]
pub struct StarMeshReport {
    pub k: usize,
    /// k(k−1)/2 clique weights.
    pub unknowns: usize,
    /// 2^{k−1} − 1 bipartitions (complements identified).
    pub constraints: usize,
    pub feasible: bool,
    /// Least-squares clique weights, pairs in lexicographic order
    /// (0,1), (0,2), …, (k−2, k−1).
    pub weights: Vec<f64>,
    /// max over bipartitions of |crossing(S) − min(|S|, k−|S|)|.
    pub max_violation: f64,
    /// ℓ₂ norm of the full residual vector.
    pub residual_norm: f64,
    /// Leaves on one side of the worst-violated bipartition; `None`
    /// when the system is feasible.
    pub violated_bipartition: Option<Vec<usize>>,
}

/// Index of pair (i, j), i < j, in lexicographic order over k leaves.
fn pair_index(k: usize, i: usize, j: usize) -> usize {
    i * k - i * (i + 1) / 2 + (j - i - 1)
}

/// Builds and solves (in least squares) the cut-preservation system
/// for a mesh replacing the unit k-star, for 2 ≤ k ≤ 20.
///
/// One equation per bipartition S of the k leaves with
/// 0 ∈ S ⊊ leaves: the clique weight crossing (S, rest) must equal
/// min(|S|, k−|S|), the min-cut of the star. The normal equations are
/// accumulated in one streaming pass over all 2^{k−1} − 1
/// bipartitions and solved through an eigendecomposition
/// pseudoinverse; a second pass measures the worst violation, which
/// doubles as the infeasibility certificate.
pub fn star_mesh_cut_system(k: usize) -> Result<StarMeshReport, TransformError> {
    if !(2..=STAR_MESH_MAX_K).contains(&k) {
        return Err(TransformError::StarSize { k });
    }
    let unknowns = k * (k - 1) / 2;
    let full: u32 = (1u32 << k) - 1;

    // Crossing pairs of the bipartition encoded by `s_mask`.
    let crossing_indices = |s_mask: u32| -> Vec<usize> {
        let mut idx = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                if ((s_mask >> i) & 1) != ((s_mask >> j) & 1) {
                    idx.push(pair_index(k, i, j));
                }
            }
        }
        idx
    };

    let mut ata = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut atb = DVector::<f64>::zeros(unknowns);
    let mut constraints = 0usize;
    for low_mask in 0..(1u32 << (k - 1)) {
        let s_mask = (low_mask << 1) | 1;
        if s_mask == full {
            continue;
        }
        constraints += 1;
        let size = s_mask.count_ones() as usize;
        let target = size.min(k - size) as f64;
        let idx = crossing_indices(s_mask);
        for &i in &idx {
            atb[i] += target;
            for &j in &idx {
                ata[(i, j)] += 1.0;
            }
        }
    }

    // Least-squares weights via pseudoinverse of AᵀA.
    let eig = ata.symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let threshold = max_eig * 1e-12;
    let mut weights = DVector::<f64>::zeros(unknowns);
    for (col, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > threshold {
            let v = eig.eigenvectors.column(col);
            weights += v * (v.dot(&atb) / lambda);
        }
    }

    // Second pass: residuals against the exact targets.
    let mut max_violation = 0.0f64;
    let mut worst_mask = 0u32;
    let mut residual_sq = 0.0f64;
    for low_mask in 0..(1u32 << (k - 1)) {
        let s_mask = (low_mask << 1) | 1;
        if s_mask == full {
            continue;
        }
        let size = s_mask.count_ones() as usize;
        let target = size.min(k - size) as f64;
        let crossing: f64 = crossing_indices(s_mask).iter().map(|&i| weights[i]).sum();
        let violation = (crossing - target).abs();
        residual_sq += violation * violation;
        if violation > max_violation {
            max_violation = violation;
            worst_mask = s_mask;
        }
    }

    let feasible = max_violation <= STAR_MESH_FEASIBLE_TOL;
    let violated_bipartition = if feasible {
        None
    } else {
        Some((0..k).filter(|&i| (worst_mask >> i) & 1 == 1).collect())
    };

    Ok(StarMeshReport {
        k,
        unknowns,
        constraints,
        feasible,
        weights: weights.iter().cloned().collect(),
        max_violation,
        residual_norm: residual_sq.sqrt(),
        violated_bipartition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn pnorm(p: f64) -> PNormParam {
        PNormParam::new(p).unwrap()
    }

    /// Random connected multigraph: spanning tree plus `extra`
    /// random chords, weights in [0.5, 2].
    fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> WeightedGraph {
        let mut triples = Vec::new();
        for v in 1..n {
            let parent = rng.gen_range(0..v);
            triples.push((parent, v, rng.gen_range(0.5..2.0)));
        }
        for _ in 0..extra {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                triples.push((u, v, rng.gen_range(0.5..2.0)));
            }
        }
        WeightedGraph::from_triples(n, &triples).unwrap()
    }

    /// Asserts d_p between every surviving pair is unchanged.
    fn assert_preserved(
        before: &WeightedGraph,
        after: &WeightedGraph,
        map: &[Option<usize>],
        p: PNormParam,
        tol: f64,
    ) {
        let da = metrics::all_pairs(before, p, 1e-10).unwrap();
        let db = metrics::all_pairs(after, p, 1e-10).unwrap();
        for u in 0..before.n() {
            for v in (u + 1)..before.n() {
                if let (Some(mu), Some(mv)) = (map[u], map[v]) {
                    let lhs = da.value(u, v);
                    let rhs = db.value(mu, mv);
                    assert!(
                        close(lhs, rhs, tol),
                        "pair ({u},{v}) changed at p={p}: {lhs} -> {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn series_rule_examples() {
        // Path a - x - b, legs (alpha, beta).
        let path = |alpha: f64, beta: f64| {
            WeightedGraph::from_triples(3, &[(0, 1, alpha), (1, 2, beta)]).unwrap()
        };
        let weight = |alpha: f64, beta: f64, p: PNormParam| {
            reduce_degree2(&path(alpha, beta), 1, p).unwrap().created[0].weight
        };
        assert!(close(weight(1.0, 1.0, PNormParam::one()), 0.5, 1e-15));
        assert!(close(weight(1.0, 1.0, pnorm(3.0)), 2f64.powf(-1.0 / 3.0), 1e-15));
        assert!(close(weight(1.0, 1.0, PNormParam::two()), 2f64.powf(-0.5), 1e-15));
        assert!(close(weight(1.0, 4.0, PNormParam::infinity()), 1.0, 0.0));
    }

    #[test]
    fn parallel_rule_examples() {
        let doubled = |alpha: f64, beta: f64| {
            WeightedGraph::from_triples(2, &[(0, 1, alpha), (0, 1, beta)]).unwrap()
        };
        let weight = |alpha: f64, beta: f64, p: PNormParam| {
            merge_parallel(&doubled(alpha, beta), 0, 1, p).unwrap().created[0].weight
        };
        assert!(close(weight(1.0, 1.0, PNormParam::infinity()), 2.0, 1e-15));
        assert!(close(weight(1.0, 1.0, PNormParam::two()), 2f64.sqrt(), 1e-15));
        assert!(close(weight(3.0, 4.0, PNormParam::one()), 4.0, 0.0));
    }

    #[test]
    fn wye_rule_examples() {
        let star = |w: f64| {
            WeightedGraph::from_triples(4, &[(0, 3, w), (1, 3, w), (2, 3, w)]).unwrap()
        };
        let unit = wye_delta_p2(&star(1.0), 3).unwrap();
        for e in &unit.created {
            assert!(close(e.weight, 1.0 / 3f64.sqrt(), 1e-15));
        }
        let doubled = wye_delta_p2(&star(2.0), 3).unwrap();
        for e in &doubled.created {
            assert!(close(e.weight, 2.0 / 3f64.sqrt(), 1e-15));
        }
    }

    #[test]
    fn series_bookkeeping() {
        let path =
            WeightedGraph::from_triples(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let result = reduce_degree2(&path, 1, pnorm(3.0)).unwrap();
        assert_eq!(result.rule, TransformRule::Degree2);
        assert_eq!(result.graph_after.n(), 2);
        assert_eq!(result.graph_after.m(), 1);
        assert_eq!(result.removed_vertices, vec![1]);
        assert_eq!(result.removed_edges.len(), 2);
        assert_eq!(result.vertex_map, vec![Some(0), None, Some(1)]);
        // Created edges sit at the tail of the new edge list.
        assert_eq!(result.graph_after.edge(0), result.created[0]);
    }

    #[test]
    fn series_rejects_bad_sites() {
        let star =
            WeightedGraph::from_triples(4, &[(0, 3, 1.0), (1, 3, 1.0), (2, 3, 1.0)]).unwrap();
        match reduce_degree2(&star, 3, PNormParam::two()) {
            Err(TransformError::WrongDegree { vertex: 3, expected: 2, got: 3 }) => {}
            other => panic!("expected WrongDegree, got {other:?}"),
        }
        let doubled = WeightedGraph::from_triples(2, &[(0, 1, 1.0), (0, 1, 2.0)]).unwrap();
        match reduce_degree2(&doubled, 1, PNormParam::two()) {
            Err(TransformError::CoincidentNeighbors { vertex: 1, neighbor: 0 }) => {}
            other => panic!("expected CoincidentNeighbors, got {other:?}"),
        }
        match reduce_degree2(&doubled, 5, PNormParam::two()) {
            Err(TransformError::VertexOutOfRange { vertex: 5, n: 2 }) => {}
            other => panic!("expected VertexOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn parallel_rejects_bad_sites() {
        let path =
            WeightedGraph::from_triples(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        match merge_parallel(&path, 0, 1, PNormParam::two()) {
            Err(TransformError::NotParallel { e1: 0, e2: 1 }) => {}
            other => panic!("expected NotParallel, got {other:?}"),
        }
        match merge_parallel(&path, 0, 0, PNormParam::two()) {
            Err(TransformError::NotParallel { e1: 0, e2: 0 }) => {}
            other => panic!("expected NotParallel on same edge, got {other:?}"),
        }
        match merge_parallel(&path, 0, 7, PNormParam::two()) {
            Err(TransformError::EdgeOutOfRange { index: 7, m: 2 }) => {}
            other => panic!("expected EdgeOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn wye_rejects_bad_sites() {
        let path =
            WeightedGraph::from_triples(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        match wye_delta_p2(&path, 1) {
            Err(TransformError::WrongDegree { vertex: 1, expected: 3, got: 2 }) => {}
            other => panic!("expected WrongDegree, got {other:?}"),
        }
        // Degree 3 but through a parallel pair to one neighbor.
        let pinched =
            WeightedGraph::from_triples(3, &[(0, 2, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        match wye_delta_p2(&pinched, 2) {
            Err(TransformError::CoincidentNeighbors { vertex: 2, neighbor: 0 }) => {}
            other => panic!("expected CoincidentNeighbors, got {other:?}"),
        }
    }

    #[test]
    fn series_preserves_distances() {
        let exponents =
            [PNormParam::one(), pnorm(1.7), PNormParam::two(), pnorm(3.0), PNormParam::infinity()];
        let mut rng = ChaCha8Rng::seed_from_u64(411);
        for trial in 0..4 {
            let base_n = 4 + trial % 3;
            let base = random_graph(&mut rng, base_n, 2);
            // Subdivision vertex: attach x = base_n to two distinct
            // vertices, so deg(x) = 2 with distinct neighbors.
            let a = rng.gen_range(0..base_n);
            let mut b = rng.gen_range(0..base_n);
            while b == a {
                b = rng.gen_range(0..base_n);
            }
            let mut triples: Vec<(usize, usize, f64)> =
                base.edges().iter().map(|e| (e.tail, e.head, e.weight)).collect();
            triples.push((a, base_n, rng.gen_range(0.5..2.0)));
            triples.push((base_n, b, rng.gen_range(0.5..2.0)));
            let g = WeightedGraph::from_triples(base_n + 1, &triples).unwrap();
            for &p in &exponents {
                let result = reduce_degree2(&g, base_n, p).unwrap();
                assert!(result.created[0].weight > 0.0);
                assert_preserved(&g, &result.graph_after, &result.vertex_map, p, 1e-6);
            }
        }
    }

    #[test]
    fn parallel_preserves_distances() {
        let exponents =
            [PNormParam::one(), pnorm(1.6), PNormParam::two(), pnorm(4.0), PNormParam::infinity()];
        let mut rng = ChaCha8Rng::seed_from_u64(412);
        for trial in 0..4 {
            let n = 4 + trial % 3;
            let base = random_graph(&mut rng, n, 2);
            // Duplicate a random edge to guarantee a parallel pair.
            let dup = rng.gen_range(0..base.m());
            let e = base.edge(dup);
            let mut triples: Vec<(usize, usize, f64)> =
                base.edges().iter().map(|e| (e.tail, e.head, e.weight)).collect();
            triples.push((e.tail, e.head, rng.gen_range(0.5..2.0)));
            let g = WeightedGraph::from_triples(n, &triples).unwrap();
            for &p in &exponents {
                let result = merge_parallel(&g, dup, g.m() - 1, p).unwrap();
                assert!(result.created[0].weight > 0.0);
                assert_preserved(&g, &result.graph_after, &result.vertex_map, p, 1e-6);
            }
        }
    }

    #[test]
    fn wye_preserves_d2() {
        let mut rng = ChaCha8Rng::seed_from_u64(413);
        for trial in 0..4 {
            let base_n = 4 + trial % 3;
            let base = random_graph(&mut rng, base_n, 2);
            let r = base_n;
            // Three distinct attachment points.
            let mut attach = vec![0usize, 1, 2];
            attach[trial % 3] = rng.gen_range(0..base_n.min(3));
            attach.sort_unstable();
            attach.dedup();
            while attach.len() < 3 {
                let v = rng.gen_range(0..base_n);
                if !attach.contains(&v) {
                    attach.push(v);
                }
            }
            let mut triples: Vec<(usize, usize, f64)> =
                base.edges().iter().map(|e| (e.tail, e.head, e.weight)).collect();
            for &v in &attach {
                triples.push((v, r, rng.gen_range(0.5..2.0)));
            }
            let g = WeightedGraph::from_triples(base_n + 1, &triples).unwrap();
            let result = wye_delta_p2(&g, r).unwrap();
            for e in &result.created {
                assert!(e.weight > 0.0);
            }
            assert_preserved(&g, &result.graph_after, &result.vertex_map, PNormParam::two(), 1e-8);
        }
    }

    #[test]
    fn wye_folds_existing_parallel_edge() {
        // Square 0-1-2-3 plus center 4 wired to 0, 1, 2; the triangle
        // edge {0,1} lands parallel to the square edge {0,1}.
        let g = WeightedGraph::from_triples(
            5,
            &[
                (0, 1, 1.5),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (3, 0, 1.0),
                (0, 4, 1.0),
                (1, 4, 1.0),
                (2, 4, 1.0),
            ],
        )
        .unwrap();
        let result = wye_delta_p2(&g, 4).unwrap();
        // Legs are unit, so each triangle edge is 1/sqrt(3); the {0,1}
        // one absorbs the existing weight-1.5 edge by root-sum-square.
        let alpha = 1.0 / 3f64.sqrt();
        let folded = (alpha * alpha + 1.5 * 1.5).sqrt();
        let created_01 = result
            .created
            .iter()
            .find(|e| (e.tail, e.head) == (0, 1) || (e.tail, e.head) == (1, 0))
            .unwrap();
        assert!(close(created_01.weight, folded, 1e-12));
        // The square edge {1,2} is absorbed too: 3 legs + 2 edges.
        let created_12 = result
            .created
            .iter()
            .find(|e| (e.tail, e.head) == (1, 2) || (e.tail, e.head) == (2, 1))
            .unwrap();
        assert!(close(created_12.weight, (alpha * alpha + 1.0).sqrt(), 1e-12));
        assert_eq!(result.removed_edges.len(), 5);
        // No parallel pair remains at the rewrite site.
        for pair in [(0, 1), (1, 2), (0, 2)] {
            let copies = result
                .graph_after
                .edges()
                .iter()
                .filter(|e| (e.tail.min(e.head), e.tail.max(e.head)) == pair)
                .count();
            assert_eq!(copies, 1, "parallel pair left at {pair:?}");
        }
        assert_preserved(&g, &result.graph_after, &result.vertex_map, PNormParam::two(), 1e-8);
    }

    #[test]
    fn limit_consistency_series() {
        let pairs = [(1.3, 0.9), (1.0, 4.0), (0.6, 0.6)];
        for &(alpha, beta) in &pairs {
            let near = series_weight(alpha, beta, pnorm(1000.0));
            let limit = series_weight(alpha, beta, PNormParam::infinity());
            assert!((near - limit).abs() / limit <= 1e-2, "{near} vs {limit}");
        }
    }

    #[test]
    fn limit_consistency_parallel() {
        let pairs = [(1.3, 0.9), (1.0, 4.0), (0.6, 0.6)];
        for &(alpha, beta) in &pairs {
            let near = parallel_weight(alpha, beta, pnorm(1000.0));
            let limit = parallel_weight(alpha, beta, PNormParam::infinity());
            assert!((near - limit).abs() / limit <= 1e-2, "{near} vs {limit}");
            // And the other end: p slightly above 1 approaches the max rule.
            let near_one = parallel_weight(alpha, beta, pnorm(1.001));
            let max_rule = parallel_weight(alpha, beta, PNormParam::one());
            assert!((near_one - max_rule).abs() / max_rule <= 1e-2, "{near_one} vs {max_rule}");
        }
    }

    #[test]
    fn obstruction_at_p2_agrees() {
        let report = wye_delta_obstruction(PNormParam::two()).unwrap();
        let third = 1.0 / 3f64.sqrt();
        assert!(close(report.alpha1, third, 1e-15));
        assert!(close(report.alpha2, third, 1e-15));
        assert!(report.gap <= 1e-15);
        assert!(report.transform_exists);
        assert!(close(report.alpha1_solver, third, 1e-7), "{}", report.alpha1_solver);
        assert!(close(report.alpha2_solver, third, 1e-7), "{}", report.alpha2_solver);
    }

    #[test]
    fn obstruction_at_p3() {
        let report = wye_delta_obstruction(pnorm(3.0)).unwrap();
        // q = 3/2: alpha1 = (1 + sqrt 2)^{-2/3}, alpha2 = 5^{-1/3}.
        let alpha1 = (1.0 + 2f64.sqrt()).powf(-2.0 / 3.0);
        let alpha2 = 5f64.powf(-1.0 / 3.0);
        assert!(close(report.alpha1, alpha1, 1e-14));
        assert!(close(report.alpha2, alpha2, 1e-14));
        assert!(close(report.alpha1, 0.5556, 5e-4));
        assert!(close(report.alpha2, 0.5848, 5e-4));
        assert!(close(report.gap, 0.029, 5e-4));
        assert!(!report.transform_exists);
        assert!(close(report.alpha1_solver, alpha1, 1e-7), "{}", report.alpha1_solver);
        assert!(close(report.alpha2_solver, alpha2, 1e-7), "{}", report.alpha2_solver);
    }

    #[test]
    fn obstruction_at_p15_mirrors_p3() {
        let at_15 = wye_delta_obstruction(pnorm(1.5)).unwrap();
        let at_3 = wye_delta_obstruction(pnorm(3.0)).unwrap();
        // Conjugate exponents swap the two gadgets' prescriptions.
        assert!(close(at_15.alpha1, at_3.alpha2, 1e-12));
        assert!(close(at_15.alpha2, at_3.alpha1, 1e-12));
        assert!(close(at_15.gap, at_3.gap, 1e-12));
        assert!(!at_15.transform_exists);
        assert!(close(at_15.alpha1_solver, at_15.alpha1, 1e-7));
        assert!(close(at_15.alpha2_solver, at_15.alpha2, 1e-7));
    }

    #[test]
    fn obstruction_rejects_endpoint_exponents() {
        assert!(matches!(
            wye_delta_obstruction(PNormParam::one()),
            Err(TransformError::Graph(GraphError::InvalidP { .. }))
        ));
        assert!(matches!(
            wye_delta_obstruction(PNormParam::infinity()),
            Err(TransformError::Graph(GraphError::InvalidP { .. }))
        ));
    }

    #[test]
    fn obstruction_clamp_weight_is_saturated() {
        // The finite stand-in for the clamp weight is already in the
        // asymptotic regime: doubling it moves d_p by < 1e-6 relative.
        let opts = SolveOptions { tol: 1e-10, ..SolveOptions::default() };
        let pair = DemandPair::new(0, 1).unwrap();
        for &p in &[pnorm(1.5), pnorm(3.0)] {
            let at_1e9 =
                solve::solve_dual(&clamped_star_gadget(1e9), pair, p, opts).unwrap().1.value();
            let at_2e9 =
                solve::solve_dual(&clamped_star_gadget(2e9), pair, p, opts).unwrap().1.value();
            assert!(
                (at_1e9 - at_2e9).abs() / at_1e9 < 1e-6,
                "clamp sensitivity at p={p}: {at_1e9} vs {at_2e9}"
            );
        }
    }

    #[test]
    fn p2_rule_applied_at_p3_breaks_distances() {
        // On the clamping gadget the p=2 triangle is measurably wrong
        // at p=3: d_3(a, b) moves by more than 1e-3.
        let g = clamped_star_gadget(OBSTRUCTION_CLAMP_WEIGHT);
        let pair = DemandPair::new(0, 1).unwrap();
        let p = pnorm(3.0);
        let opts = SolveOptions { tol: 1e-10, ..SolveOptions::default() };
        let before = solve::d_p(&g, pair, p, opts).unwrap().value();

        let result = wye_delta_p2(&g, 3).unwrap();
        // Survivors a, b, c keep their labels (r = 3 was last-but-one).
        assert_eq!(result.vertex_map[0], Some(0));
        assert_eq!(result.vertex_map[1], Some(1));
        let after = solve::d_p(&result.graph_after, pair, p, opts).unwrap().value();

        // Frozen from the closed forms: d̄^{3/2} = 2/√5 before and
        // 2·3^{-3/4} after.
        assert!(close(before, 1.0772174, 1e-5), "{before}");
        assert!(close(after, 1.0911156, 1e-5), "{after}");
        assert!((before - after).abs() > 1e-3);
    }

    #[test]
    fn star_mesh_k2_and_k3_are_feasible() {
        let two = star_mesh_cut_system(2).unwrap();
        assert!(two.feasible);
        assert_eq!(two.constraints, 1);
        assert_eq!(two.unknowns, 1);
        assert!(close(two.weights[0], 1.0, 1e-12));
        assert!(two.violated_bipartition.is_none());

        let three = star_mesh_cut_system(3).unwrap();
        assert!(three.feasible);
        assert_eq!(three.constraints, 3);
        assert_eq!(three.unknowns, 3);
        for &w in &three.weights {
            assert!(close(w, 0.5, 1e-12));
        }
        assert!(three.residual_norm <= 1e-10);
    }

    #[test]
    fn star_mesh_k4_certificate() {
        let four = star_mesh_cut_system(4).unwrap();
        assert!(!four.feasible);
        assert_eq!(four.constraints, 7);
        assert_eq!(four.unknowns, 6);
        // The least-squares compromise is symmetric with weight 3/7,
        // leaving every constraint short or long by exactly 2/7.
        for &w in &four.weights {
            assert!(close(w, 3.0 / 7.0, 1e-10), "{w}");
        }
        assert!(close(four.max_violation, 2.0 / 7.0, 1e-10));
        let bipartition = four.violated_bipartition.unwrap();
        assert!(!bipartition.is_empty() && bipartition.len() < 4);
        assert!(bipartition.contains(&0));
    }

    #[test]
    fn star_mesh_infeasible_through_k8() {
        for k in 4..=8 {
            let report = star_mesh_cut_system(k).unwrap();
            assert!(!report.feasible, "k={k} unexpectedly feasible");
            assert!(report.max_violation > 1e-3, "k={k}: {}", report.max_violation);
            assert_eq!(report.constraints, (1usize << (k - 1)) - 1);
            assert!(report.violated_bipartition.is_some());
        }
    }

    #[test]
    fn star_mesh_rejects_bad_sizes() {
        assert!(matches!(star_mesh_cut_system(1), Err(TransformError::StarSize { k: 1 })));
        assert!(matches!(star_mesh_cut_system(21), Err(TransformError::StarSize { k: 21 })));
    }

    #[test]
    fn transform_result_serializes_rule_and_weights() {
        let star =
            WeightedGraph::from_triples(4, &[(0, 3, 1.0), (1, 3, 1.0), (2, 3, 1.0)]).unwrap();
        let result = wye_delta_p2(&star, 3).unwrap();
        let json = serde_json::to_string(&result).unwrap();
        assert!(json.contains("\"rule\":\"wye-delta-p2\""), "{json}");
        assert!(json.contains("\"created\""), "{json}");
        assert!(json.contains("\"vertex_map\""), "{json}");

        let merged = merge_parallel(
            &WeightedGraph::from_triples(2, &[(0, 1, 1.0), (0, 1, 1.0)]).unwrap(),
            0,
            1,
            PNormParam::two(),
        )
        .unwrap();
        let json = serde_json::to_string(&merged).unwrap();
        assert!(json.contains("\"rule\":\"parallel\""), "{json}");
    }

    #[test]
    fn rule_display_matches_serde() {
        assert_eq!(TransformRule::Degree2.to_string(), "degree2");
        assert_eq!(TransformRule::Parallel.to_string(), "parallel");
        assert_eq!(TransformRule::WyeDeltaP2.to_string(), "wye-delta-p2");
    }

    #[test]
    fn error_display_is_actionable() {
        let err = TransformError::CoincidentNeighbors { vertex: 4, neighbor: 2 };
        assert!(err.to_string().contains("merge_parallel"));
        let err = TransformError::NotParallel { e1: 3, e2: 3 };
        assert!(err.to_string().contains("itself"));
    }
}
