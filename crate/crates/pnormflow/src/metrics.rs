//! All-pairs distance tables and numerical verification of the structural
//! laws the flow-metric family obeys.
//!
//! The checks in this module are the laws themselves, restated as code:
//!
//! * **Foster-type sums** ([`foster_sum`]): Σ_{xy∈E} (w(xy)·d_p(x,y))^q lies
//!   in [n/2, n−1] for p ≥ 2 and in [n−1, m] for p ≤ 2, equals n−1 exactly
//!   at p = 2 (Foster's Theorem on the weight-squared graph) and on every
//!   tree, and degenerates to max_{xy∈E} w·d_1 = 1 in the limit p → 1.
//!   Each individual term satisfies (w·d_p)^q ≤ 1.
//! * **p-strong triangle inequality** ([`check_p_strong`]): d_p(x,y)^p ≤
//!   d_p(x,z)^p + d_p(z,y)^p for every triple; the ultrametric inequality
//!   at p = ∞. The exponent is tight: checking the same matrix at any
//!   larger exponent finds a violation already on the unit two-edge path.
//! * **Monotonicity** ([`check_monotonicity`]): for p ≤ p′, d_{p′} ≤ d_p ≤
//!   |E|^{1/p−1/p′}·d_{p′}, and the sharper reweighting law d_{p,G}^q ≥
//!   d_{p′,G′}^{q′} on G′ with w′ = w^{q/q′}.
//! * **Spectral bound** ([`lambda_bound_report`]): d_p(s,t) ≤
//!   (2/λ_q^{(2)})^{1/q}, where λ_q^{(2)} is the second eigenvalue of the
//!   nonlinear q-Laplacian. For q = 2 the eigenvalue is computed exactly
//!   and the bound asserted; for q ≠ 2 certifying λ_q^{(2)} from below
//!   would require global minimization of a nonconvex Rayleigh quotient,
//!   so the sampled quotient is reported without asserting the bound.
//! * **Commute times** ([`commute_check`]): C(u,v) = 2·w(E)·R_eff(u,v),
//!   cross-checking an exact hitting-time linear solve against effective
//!   resistances computed from the (unsquared) weights.
//!
//! Everything is deterministic: where a check samples (large triple
//! enumerations, Rayleigh quotients), the generator seed is a fixed
//! constant, so repeated runs agree bit for bit.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{DemandPair, GraphError, PNormParam, WeightedGraph};
use crate::linalg;
use crate::solve::{self, SolveError, SolveOptions, SolveReport};

/// Solver tolerance used internally by the verification passes. Two orders
/// tighter than the loosest verdict tolerance in use, so solver error never
/// masquerades as a structural violation.
const VERIFY_SOLVE_TOL: f64 = 1e-10;

/// Seed for the sampled triple enumeration in [`check_p_strong`].
const TRIPLE_SAMPLE_SEED: u64 = 1729;

/// Number of random triples drawn when a matrix is too large to enumerate.
const TRIPLE_SAMPLE_COUNT: usize = 100_000;

/// Largest n for which triples are enumerated exhaustively (O(n³)).
const TRIPLE_EXHAUSTIVE_LIMIT: usize = 60;

/// Seed for the Rayleigh-quotient sampling in [`lambda_bound_report`].
const RAYLEIGH_SAMPLE_SEED: u64 = 40961;

/// Number of random mean-centered directions sampled per Rayleigh report.
const RAYLEIGH_SAMPLE_COUNT: usize = 256;

fn verify_options(tol: f64) -> SolveOptions {
    SolveOptions { tol, ..SolveOptions::default() }
}

// ---------------------------------------------------------------------------
// Distance matrices
// ---------------------------------------------------------------------------

/// The full map (s, t) ↦ d_p(s, t) of a graph.
///
/// Invariants: `values` is n×n, symmetric, has a zero diagonal, and (for
/// any connected graph, which construction of [`WeightedGraph`] enforces)
/// strictly positive off-diagonal entries. `gap_bound` is the worst
/// relative duality gap among the entries — zero when p ∈ {1, 2, ∞},
/// where the dedicated exact routes apply.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceMatrix {
    pub n: usize,
    pub p: PNormParam,
    pub values: Vec<Vec<f64>>,
    pub gap_bound: f64,
}

impl DistanceMatrix {
    /// The entry d_p(u, v).
    pub fn value(&self, u: usize, v: usize) -> f64 {
        self.values[u][v]
    }

    /// One comma-separated row per vertex, in vertex order. Values use the
    /// shortest decimal form that round-trips, so the output is stable
    /// across runs.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.values {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Computes d_p between every pair of vertices.
///
/// Pairs are solved independently (p = 1 reuses one shortest-path tree per
/// source, p = 2 one Laplacian pseudoinverse; general p runs the certified
/// solver per pair, in parallel). `tol` is the per-pair relative duality
/// gap target for the general route; the returned `gap_bound` reports the
/// worst gap actually achieved.
pub fn all_pairs(g: &WeightedGraph, p: PNormParam, tol: f64) -> Result<DistanceMatrix, SolveError> {
    let n = g.n();
    let mut values = vec![vec![0.0; n]; n];
    let mut gap_bound = 0.0_f64;

    if p.is_one() {
        for u in 0..n {
            let row = solve::dijkstra(g, u);
            for (v, val) in row.iter().enumerate().skip(u + 1) {
                values[u][v] = *val;
            }
        }
    } else if p.is_two() {
        let cond: Vec<f64> = g.edges().iter().map(|e| e.weight * e.weight).collect();
        let r = linalg::resistance_matrix(g, &cond);
        for u in 0..n {
            for v in (u + 1)..n {
                // Pseudoinverse rounding can leave a resistance a few ulps
                // below zero for near-identified vertices; clamp before the
                // square root.
                values[u][v] = r[(u, v)].max(0.0).sqrt();
            }
        }
    } else if p.is_infinite() {
        for u in 0..n {
            for v in (u + 1)..n {
                values[u][v] = solve::mincut_dinf(g, DemandPair::new(u, v)?)?;
            }
        }
    } else {
        let opts = verify_options(tol);
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
        let solved: Result<Vec<(usize, usize, SolveReport)>, SolveError> = pairs
            .par_iter()
            .map(|&(u, v)| {
                let d = DemandPair::new(u, v)?;
                Ok((u, v, solve::d_p(g, d, p, opts)?))
            })
            .collect();
        for (u, v, report) in solved? {
            values[u][v] = report.value();
            gap_bound = gap_bound.max(report.rel_gap);
        }
    }

    // Mirror the upper triangle so symmetry holds exactly, not merely up to
    // the solver's reproducibility.
    for u in 0..n {
        for v in 0..u {
            values[u][v] = values[v][u];
        }
    }
    Ok(DistanceMatrix { n, p, values, gap_bound })
}

// ---------------------------------------------------------------------------
// p-strong triangle inequality
// ---------------------------------------------------------------------------

/// One triple that violates the p-strong triangle inequality.
///
/// `lhs` and `rhs` are the two sides of d(x,y)^π ≤ d(x,z)^π + d(z,y)^π
/// after dividing the three distances by their maximum (which keeps the
/// powers in [0, 1] for any exponent); `excess` = lhs − rhs > tol.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TriangleViolation {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub excess: f64,
}

/// Checks the p-strong triangle inequality at `exponent` over the triples
/// of `m`.
///
/// The exponent need not equal `m.p`: a metric that is p-strong is also
/// p′-strong for every p′ ≤ p, while checking at an exponent above `m.p`
/// is expected to surface violations. At `exponent` = ∞ the inequality
/// becomes the ultrametric one, d(x,y) ≤ max{d(x,z), d(z,y)}.
///
/// Each triple is normalized by the largest of its three distances before
/// the powers are taken, which makes the test scale-free and immune to
/// overflow at large exponents; a triple violates when the normalized
/// excess lhs − rhs exceeds `tol`. Enumeration is exhaustive up to
/// n = 60 and falls back to 10⁵ deterministically seeded samples above.
pub fn check_p_strong(m: &DistanceMatrix, exponent: PNormParam, tol: f64) -> Vec<TriangleViolation> {
    let n = m.n;
    let mut violations = Vec::new();
    if n < 3 {
        return violations;
    }

    let check = |x: usize, y: usize, z: usize, out: &mut Vec<TriangleViolation>| {
        let dxy = m.values[x][y];
        let dxz = m.values[x][z];
        let dzy = m.values[z][y];
        let scale = dxy.max(dxz).max(dzy);
        if scale <= 0.0 {
            return;
        }
        let (lhs, rhs) = if exponent.is_infinite() {
            (dxy / scale, (dxz / scale).max(dzy / scale))
        } else {
            let pi = exponent.p();
            ((dxy / scale).powf(pi), (dxz / scale).powf(pi) + (dzy / scale).powf(pi))
        };
        let excess = lhs - rhs;
        if excess > tol {
            out.push(TriangleViolation { x, y, z, lhs, rhs, excess });
        }
    };

    if n <= TRIPLE_EXHAUSTIVE_LIMIT {
        for x in 0..n {
            for y in (x + 1)..n {
                for z in 0..n {
                    if z != x && z != y {
                        check(x, y, z, &mut violations);
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(TRIPLE_SAMPLE_SEED);
        let mut drawn = 0;
        while drawn < TRIPLE_SAMPLE_COUNT {
            let x = rng.gen_range(0..n);
            let y = rng.gen_range(0..n);
            let z = rng.gen_range(0..n);
            if x == y || y == z || x == z {
                continue;
            }
            drawn += 1;
            check(x, y, z, &mut violations);
        }
    }
    violations
}

// ---------------------------------------------------------------------------
// Foster-type sums
// ---------------------------------------------------------------------------

/// The Foster-type edge sum Σ_{xy∈E} (w(xy)·d_p(x,y))^q with its
/// applicable bracket.
///
/// For p ≥ 2 the bracket is [n/2, n−1]; for 1 < p ≤ 2 it is [n−1, m]; at
/// p = 2 both apply and the sum equals n−1 exactly. In the limit p → 1
/// the q-th root of the sum turns into max_{xy∈E} w·d_1, which equals 1,
/// so for p = 1 `sum` holds that max and the bracket collapses to
/// [1, 1]. `max_edge_term` is the largest single term, which satisfies
/// (w·d_p)^q ≤ 1 on every edge; `verdict` is the bracket check alone.
#[derive(Debug, Clone, Serialize)]
pub struct FosterReport {
    pub p: PNormParam,
    pub q: f64,
    pub sum: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub max_edge_term: f64,
    pub edge_bound_ok: bool,
    pub verdict: bool,
}

/// Evaluates the Foster-type sum of `g` at exponent `p` and checks it
/// against the applicable bracket (within additive `tol`).
///
/// Distances are needed only between edge endpoints; parallel edges share
/// one solve. On trees the sum is n−1 for every p ∈ (1, ∞] because each
/// edge is its endpoints' unique path, making every term exactly 1.
pub fn foster_sum(g: &WeightedGraph, p: PNormParam, tol: f64) -> Result<FosterReport, SolveError> {
    let n = g.n();
    let q = p.q();

    // d_p between the endpoints of every edge, deduplicated across
    // parallel edges. Each exponent class reuses whatever factorization
    // or search tree it can.
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut sp_rows: HashMap<usize, Vec<f64>> = HashMap::new();
    let resistances = if p.is_two() && g.m() > 0 {
        let cond: Vec<f64> = g.edges().iter().map(|e| e.weight * e.weight).collect();
        Some(linalg::resistance_matrix(g, &cond))
    } else {
        None
    };
    let opts = verify_options(VERIFY_SOLVE_TOL);
    for e in g.edges() {
        let key = (e.tail.min(e.head), e.tail.max(e.head));
        if cache.contains_key(&key) {
            continue;
        }
        let d = DemandPair::new(key.0, key.1)?;
        let value = if p.is_one() {
            let row = sp_rows.entry(key.0).or_insert_with(|| solve::dijkstra(g, key.0));
            row[key.1]
        } else if let Some(r) = &resistances {
            r[(key.0, key.1)].max(0.0).sqrt()
        } else if p.is_infinite() {
            solve::mincut_dinf(g, d)?
        } else {
            solve::d_p(g, d, p, opts)?.value()
        };
        cache.insert(key, value);
    }

    let mut sum = 0.0_f64;
    let mut max_edge_term = 0.0_f64;
    for e in g.edges() {
        let key = (e.tail.min(e.head), e.tail.max(e.head));
        let wd = e.weight * cache[&key];
        let term = if p.is_one() { wd } else { wd.powf(q) };
        max_edge_term = max_edge_term.max(term);
        if p.is_one() {
            sum = sum.max(wd);
        } else {
            sum += term;
        }
    }

    let nf = n as f64;
    let (lower_bound, upper_bound) = if n == 1 {
        (0.0, 0.0)
    } else if p.is_one() {
        (1.0, 1.0)
    } else if p.is_two() {
        (nf - 1.0, nf - 1.0)
    } else if p.p() > 2.0 {
        (nf / 2.0, nf - 1.0)
    } else {
        (nf - 1.0, g.m() as f64)
    };
    let verdict = sum >= lower_bound - tol && sum <= upper_bound + tol;
    let edge_bound_ok = max_edge_term <= 1.0 + tol;
    Ok(FosterReport { p, q, sum, lower_bound, upper_bound, max_edge_term, edge_bound_ok, verdict })
}

// ---------------------------------------------------------------------------
// Monotonicity in p
// ---------------------------------------------------------------------------

/// Outcome of the three monotonicity checks for one demand pair across a
/// list of exponents.
///
/// `exponents` and `values` are in ascending p order (the input list is
/// sorted before evaluation). `max_violation` is the worst relative excess
/// observed across all three checks — at most `tol` when all pass, and a
/// measure of how badly a law failed otherwise.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub demand: DemandPair,
    pub exponents: Vec<PNormParam>,
    pub values: Vec<f64>,
    pub nonincreasing: bool,
    pub sandwich: bool,
    pub reweighted: bool,
    pub max_violation: f64,
}

impl MonotonicityReport {
    /// True when all three checks passed.
    pub fn passed(&self) -> bool {
        self.nonincreasing && self.sandwich && self.reweighted
    }
}

/// Verifies, for one pair and every p ≤ p′ drawn from `ps`:
///
/// (a) d_{p′}(s,t) ≤ d_p(s,t) — the metric shrinks as p grows;
/// (b) d_p(s,t) ≤ |E|^{1/p−1/p′}·d_{p′}(s,t) — the matching sandwich;
/// (c) d_{p,G}(s,t)^q ≥ d_{p′,G′}(s,t)^{q′} where G′ carries the
///     reweighting w′ = w^{q/q′} — the sharper law behind the Foster
///     bracket. Checked for consecutive exponents (it composes), in log
///     space so large conjugates cannot overflow, and skipped when the
///     smaller exponent is 1: q = ∞ is not usable as a reweighting power,
///     and (a)–(b) already cover p = 1.
///
/// All comparisons allow relative slack `tol`.
pub fn check_monotonicity(
    g: &WeightedGraph,
    d: DemandPair,
    ps: &[PNormParam],
    tol: f64,
) -> Result<MonotonicityReport, SolveError> {
    g.validate_pair(d)?;
    let mut exponents = ps.to_vec();
    exponents.sort_by(|a, b| a.p().total_cmp(&b.p()));
    let opts = verify_options(VERIFY_SOLVE_TOL);
    let values: Vec<f64> = exponents
        .iter()
        .map(|&p| solve::d_p(g, d, p, opts).map(|r| r.value()))
        .collect::<Result<_, _>>()?;

    let m = g.m() as f64;
    let mut nonincreasing = true;
    let mut sandwich = true;
    let mut reweighted = true;
    let mut max_violation = 0.0_f64;

    for i in 0..exponents.len() {
        for j in (i + 1)..exponents.len() {
            // (a): the value at the larger exponent must not exceed the
            // value at the smaller one.
            let excess_a = (values[j] - values[i]) / values[i].max(f64::MIN_POSITIVE);
            if excess_a > tol {
                nonincreasing = false;
            }
            max_violation = max_violation.max(excess_a);

            // (b): nor may the smaller-exponent value exceed the
            // |E|-factor blowup of the larger-exponent one.
            let factor = m.powf(1.0 / exponents[i].p() - 1.0 / exponents[j].p());
            let bound = factor * values[j];
            let excess_b = (values[i] - bound) / bound.max(f64::MIN_POSITIVE);
            if excess_b > tol {
                sandwich = false;
            }
            max_violation = max_violation.max(excess_b);
        }
    }

    for i in 0..exponents.len().saturating_sub(1) {
        let (pl, ph) = (exponents[i], exponents[i + 1]);
        if pl.is_one() || pl.p() == ph.p() {
            continue;
        }
        let (ql, qh) = (pl.q(), ph.q());
        let reweighted_graph = g.map_weights(|w| w.powf(ql / qh))?;
        let d_high = solve::d_p(&reweighted_graph, d, ph, opts)?.value();
        // d_{p,G}^{q} ≥ d_{p′,G′}^{q′}, compared as q·ln d ≥ q′·ln d′ so
        // conjugates near p = 1 cannot overflow the powers. The log-space
        // excess is exactly the relative excess of the powered inequality.
        let excess_c = qh * d_high.ln() - ql * values[i].ln();
        if excess_c > tol {
            reweighted = false;
        }
        max_violation = max_violation.max(excess_c);
    }

    Ok(MonotonicityReport {
        demand: d,
        exponents,
        values,
        nonincreasing,
        sandwich,
        reweighted,
        max_violation,
    })
}

// ---------------------------------------------------------------------------
// q-Laplacian spectral bound
// ---------------------------------------------------------------------------

/// Applies the nonlinear q-Laplacian: (L_q φ)_x = Σ_y w(xy)^q
/// (φ_x − φ_y)|φ_x − φ_y|^{q−2}, summed over edges at x.
///
/// Defined for p ∈ (1, ∞), i.e. finite q > 1. At q = 2 this is the
/// ordinary Laplacian of the weight-squared graph. Satisfies
/// ⟨φ, L_q φ⟩ = ||WBφ||_q^q and vanishes exactly on constant φ.
pub fn q_laplacian_apply(
    g: &WeightedGraph,
    phi: &[f64],
    p: PNormParam,
) -> Result<Vec<f64>, GraphError> {
    if p.is_one() || p.is_infinite() {
        return Err(GraphError::InvalidP { p: p.p() });
    }
    if phi.len() != g.n() {
        return Err(GraphError::LengthMismatch { expected: g.n(), got: phi.len() });
    }
    let q = p.q();
    let mut out = vec![0.0; g.n()];
    for e in g.edges() {
        let delta = phi[e.tail] - phi[e.head];
        let value = e.weight.powf(q) * solve::signed_pow(delta, q - 1.0);
        out[e.tail] += value;
        out[e.head] -= value;
    }
    Ok(out)
}

/// The spectral upper bound d_p ≤ (2/λ_q^{(2)})^{1/q} and what could be
/// established about it.
///
/// When `exact` is true (q = 2), `lambda_estimate` is the second
/// eigenvalue of the weight-squared Laplacian computed by a dense
/// eigensolve, `max_distance` is the largest d_2 over all pairs, and
/// `certified` records whether the bound held. Otherwise
/// `lambda_estimate` is the smallest sampled Rayleigh quotient
/// ⟨φ, L_q φ⟩ / ||φ||₂² over φ ⊥ 1 — an upper estimate of λ_q^{(2)}, so
/// the derived `distance_bound` is reported without being asserted and
/// `certified` stays false.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaBoundReport {
    pub p: PNormParam,
    pub q: f64,
    pub lambda_estimate: f64,
    pub exact: bool,
    pub distance_bound: f64,
    pub max_distance: Option<f64>,
    pub certified: bool,
}

/// Computes the q-Laplacian spectral report for `g` at exponent `p`
/// (finite p > 1 only).
///
/// The q = 2 route is exact and tight on cliques: λ_2^{(2)}(K_n) = n with
/// eigenvector χ_s − χ_t, and (2/n)^{1/2} is precisely d_2(s,t) there.
pub fn lambda_bound_report(g: &WeightedGraph, p: PNormParam) -> Result<LambdaBoundReport, SolveError> {
    if p.is_one() || p.is_infinite() {
        return Err(SolveError::Graph(GraphError::InvalidP { p: p.p() }));
    }
    let q = p.q();

    if p.is_two() {
        let cond: Vec<f64> = g.edges().iter().map(|e| e.weight * e.weight).collect();
        let lambda = linalg::lambda2(&linalg::laplacian(g, &cond));
        let distance_bound = (2.0 / lambda).sqrt();
        let matrix = all_pairs(g, p, VERIFY_SOLVE_TOL)?;
        let mut max_distance = 0.0_f64;
        for u in 0..g.n() {
            for v in (u + 1)..g.n() {
                max_distance = max_distance.max(matrix.values[u][v]);
            }
        }
        // Slack covers eigensolver rounding; both sides are exact linear
        // algebra, so a relative 1e-9 is generous.
        let certified = max_distance <= distance_bound * (1.0 + 1e-9) + 1e-12;
        return Ok(LambdaBoundReport {
            p,
            q,
            lambda_estimate: lambda,
            exact: true,
            distance_bound,
            max_distance: Some(max_distance),
            certified,
        });
    }

    let lambda = sampled_rayleigh_minimum(g, q);
    Ok(LambdaBoundReport {
        p,
        q,
        lambda_estimate: lambda,
        exact: false,
        distance_bound: (2.0 / lambda).powf(1.0 / q),
        max_distance: None,
        certified: false,
    })
}

/// Smallest Rayleigh quotient ⟨φ, L_q φ⟩ / ||φ||₂² seen over the
/// coordinate-difference directions χ_u − χ_v (exact minimizers on
/// cliques at q = 2) plus a fixed batch of seeded random mean-centered
/// directions. Always an upper estimate of λ_q^{(2)}.
fn sampled_rayleigh_minimum(g: &WeightedGraph, q: f64) -> f64 {
    let n = g.n();
    let quotient = |phi: &[f64]| -> f64 {
        let norm_sq: f64 = phi.iter().map(|x| x * x).sum();
        if norm_sq <= 1e-300 {
            return f64::INFINITY;
        }
        let costs = g.potential_edge_costs(phi).expect("vector built to length n");
        let mut scale = 0.0_f64;
        for c in &costs {
            scale = scale.max(c.abs());
        }
        if scale == 0.0 {
            return 0.0;
        }
        // Max-factored q-th power sum, so large q cannot overflow.
        let energy =
            scale.powf(q) * costs.iter().map(|c| (c.abs() / scale).powf(q)).sum::<f64>();
        energy / norm_sq
    };

    let mut best = f64::INFINITY;
    for u in 0..n {
        for v in (u + 1)..n {
            let mut phi = vec![0.0; n];
            phi[u] = 1.0;
            phi[v] = -1.0;
            best = best.min(quotient(&phi));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RAYLEIGH_SAMPLE_SEED);
    for _ in 0..RAYLEIGH_SAMPLE_COUNT {
        let mut phi: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mean = phi.iter().sum::<f64>() / n as f64;
        for x in phi.iter_mut() {
            *x -= mean;
        }
        best = best.min(quotient(&phi));
    }
    best
}

// ---------------------------------------------------------------------------
// Commute times
// ---------------------------------------------------------------------------

/// Hitting times, commute times, and effective resistances of the weighted
/// random walk, with the worst mismatch of C(u,v) against 2·w(E)·R_eff(u,v).
///
/// The walk steps from u to a neighbor with probability proportional to
/// the connecting weight (parallel edges accumulate), and the resistances
/// use the weights directly as conductances — this identity lives in the
/// classical electrical correspondence, not the squared-weight one behind
/// d_2. `max_mismatch` is relative (normalized by max(1, C)); `passed`
/// records whether it stayed within the tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct CommuteReport {
    pub hitting: Vec<Vec<f64>>,
    pub commute: Vec<Vec<f64>>,
    pub resistance: Vec<Vec<f64>>,
    pub total_weight: f64,
    pub max_mismatch: f64,
    pub passed: bool,
}

/// Solves the hitting-time linear systems of `g` exactly and cross-checks
/// commute times against effective resistances.
///
/// For each target v the system h(u,v) = 1 + Σ_y P(u→y)·h(y,v) over
/// u ≠ v (with h(v,v) = 0) is solved by dense LU; connectivity makes it
/// nonsingular. Deterministic by construction — no walks are simulated.
pub fn commute_check(g: &WeightedGraph, tol: f64) -> Result<CommuteReport, GraphError> {
    let n = g.n();

    // Aggregated neighbor weights: the walk does not distinguish parallel
    // edges, only total weight between vertex pairs.
    let mut neighbor_weight = vec![vec![0.0_f64; n]; n];
    for e in g.edges() {
        neighbor_weight[e.tail][e.head] += e.weight;
        neighbor_weight[e.head][e.tail] += e.weight;
    }
    let weighted_degree: Vec<f64> =
        neighbor_weight.iter().map(|row| row.iter().sum()).collect();

    let mut hitting = vec![vec![0.0_f64; n]; n];
    for target in 0..n {
        if n == 1 {
            break;
        }
        let idx = |u: usize| if u < target { u } else { u - 1 };
        let mut a = DMatrix::<f64>::identity(n - 1, n - 1);
        let b = DVector::<f64>::from_element(n - 1, 1.0);
        for u in 0..n {
            if u == target {
                continue;
            }
            for y in 0..n {
                if y == target || neighbor_weight[u][y] == 0.0 {
                    continue;
                }
                a[(idx(u), idx(y))] -= neighbor_weight[u][y] / weighted_degree[u];
            }
        }
        let h = a
            .lu()
            .solve(&b)
            .expect("hitting-time system of a connected graph is nonsingular");
        for u in 0..n {
            if u != target {
                hitting[u][target] = h[idx(u)];
            }
        }
    }

    let cond: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
    let r = linalg::resistance_matrix(g, &cond);
    let total_weight = g.total_weight();

    let mut commute = vec![vec![0.0_f64; n]; n];
    let mut resistance = vec![vec![0.0_f64; n]; n];
    let mut max_mismatch = 0.0_f64;
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            commute[u][v] = hitting[u][v] + hitting[v][u];
            resistance[u][v] = r[(u, v)];
            let expected = 2.0 * total_weight * r[(u, v)];
            let mismatch = (commute[u][v] - expected).abs() / commute[u][v].abs().max(1.0);
            max_mismatch = max_mismatch.max(mismatch);
        }
    }

    let passed = max_mismatch <= tol;
    Ok(CommuteReport { hitting, commute, resistance, total_weight, max_mismatch, passed })
}
