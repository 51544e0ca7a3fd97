//! Dense Laplacian linear algebra shared by the solvers and experiments.
//!
//! Everything here is exact up to floating point on the desk-scale graphs
//! this crate targets (dense Cholesky / eigendecompositions, no iterative
//! linear solvers). Two conductance conventions appear in the crate:
//! d_2 computations square the edge weights, while the resistance-ratio
//! experiments use the weights directly; callers pass the conductances they
//! mean, this module never squares on its own.

use nalgebra::{DMatrix, DVector};

use crate::graph::WeightedGraph;

/// Weighted Laplacian L = Σ_e cond_e (χ_tail − χ_head)(χ_tail − χ_head)^T.
pub(crate) fn laplacian(g: &WeightedGraph, cond: &[f64]) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for (e, &c) in g.edges().iter().zip(cond) {
        l[(e.tail, e.tail)] += c;
        l[(e.head, e.head)] += c;
        l[(e.tail, e.head)] -= c;
        l[(e.head, e.tail)] -= c;
    }
    l
}

/// Cholesky factorization of a Laplacian with one vertex grounded
/// (pinned to 0), giving solves of L x = b on the remaining coordinates.
/// Positive definite for every connected graph with positive conductances.
pub(crate) struct GroundedLaplacian {
    ground: usize,
    n: usize,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl GroundedLaplacian {
    pub fn new(g: &WeightedGraph, cond: &[f64], ground: usize) -> Option<Self> {
        let n = g.n();
        let full = laplacian(g, cond);
        let mut reduced = DMatrix::<f64>::zeros(n - 1, n - 1);
        for i in 0..n - 1 {
            let fi = if i < ground { i } else { i + 1 };
            for j in 0..n - 1 {
                let fj = if j < ground { j } else { j + 1 };
                reduced[(i, j)] = full[(fi, fj)];
            }
        }
        let chol = nalgebra::Cholesky::new(reduced)?;
        Some(GroundedLaplacian { ground, n, chol })
    }

    /// Solves L x = b with x[ground] = 0; `b` is a full-length vector whose
    /// entries must sum to 0 for the solution to be meaningful (the entry at
    /// the grounded vertex is implied and ignored).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = DVector::<f64>::zeros(self.n - 1);
        for i in 0..self.n - 1 {
            let fi = if i < self.ground { i } else { i + 1 };
            rhs[i] = b[fi];
        }
        let x = self.chol.solve(&rhs);
        let mut full = vec![0.0; self.n];
        for i in 0..self.n - 1 {
            let fi = if i < self.ground { i } else { i + 1 };
            full[fi] = x[i];
        }
        full
    }
}

/// Moore–Penrose pseudoinverse of a Laplacian via (L + J/n)⁻¹ − J/n,
/// valid because ker L = span{1} on connected graphs.
pub(crate) fn laplacian_pinv(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let jn = 1.0 / n as f64;
    let shifted = l.map(|v| v) + DMatrix::from_element(n, n, jn);
    let inv = shifted
        .try_inverse()
        .expect("Laplacian + J/n of a connected graph is invertible");
    inv - DMatrix::from_element(n, n, jn)
}

/// All-pairs effective resistances R(u,v) = L⁺_uu + L⁺_vv − 2 L⁺_uv
/// under the given per-edge conductances.
pub(crate) fn resistance_matrix(g: &WeightedGraph, cond: &[f64]) -> DMatrix<f64> {
    let pinv = laplacian_pinv(&laplacian(g, cond));
    let n = g.n();
    let mut r = DMatrix::<f64>::zeros(n, n);
    for u in 0..n {
        for v in 0..n {
            r[(u, v)] = pinv[(u, u)] + pinv[(v, v)] - 2.0 * pinv[(u, v)];
        }
    }
    r
}

/// Effective resistance of a single pair via one grounded solve.
pub(crate) fn resistance_pair(g: &WeightedGraph, cond: &[f64], s: usize, t: usize) -> f64 {
    let fact = GroundedLaplacian::new(g, cond, t)
        .expect("connected graph with positive conductances yields an SPD system");
    let mut b = vec![0.0; g.n()];
    b[s] = 1.0;
    b[t] = -1.0;
    let x = fact.solve(&b);
    x[s]
}

/// Second-smallest eigenvalue of a symmetric PSD matrix (λ₂ of a
/// Laplacian; the smallest is 0 on connected graphs).
pub(crate) fn lambda2(l: &DMatrix<f64>) -> f64 {
    let eig = l.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals[1]
}
