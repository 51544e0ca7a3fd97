//! p-norm flow metrics on weighted graphs.
//!
//! For 1 ≤ p ≤ ∞, the flow metric d_p(s, t) is the minimum ℓ_p cost
//! ||W⁻¹f||_p over unit s–t flows f. The family interpolates three
//! classical graph distances: shortest path (p = 1), the square root of
//! effective resistance with squared weights (p = 2), and inverse minimum
//! cut (p = ∞). This crate computes d_p with optimality certificates,
//! verifies the structural laws the family satisfies (duality, KKT,
//! monotonicity, Foster-type sums, the p-strong triangle inequality),
//! applies metric-preserving reductions, and builds d_p sparsifiers.

pub mod graph;
mod linalg;
mod maxflow;
pub mod metrics;
pub mod solve;
pub mod sparsify;
pub mod transform;

pub use graph::{parse_graph, serialize_graph, DemandPair, Edge, GraphError, PNormParam, WeightedGraph};
pub use metrics::{
    all_pairs, check_monotonicity, check_p_strong, commute_check, foster_sum,
    lambda_bound_report, q_laplacian_apply, CommuteReport, DistanceMatrix, FosterReport,
    LambdaBoundReport, MonotonicityReport, TriangleViolation,
};
pub use solve::{
    d_p, dual_cost, flow_cost, kkt_check, kkt_flow_from_potentials, mincut_dinf, resistance_d2,
    shortest_path_d1, solve_dual, solve_primal, FlowAssignment, KktReport, PotentialAssignment,
    SolveError, SolveOptions, SolveReport,
};
pub use sparsify::{
    build_sparsifier, build_sparsifier_with, degree_condition_check, expander_clique_sparsifier,
    gomory_hu, lower_bound_union, oversampling_factor, resistance_ratio, sampling_scores,
    symmetric_family, verify_sparsifier, DegreeConditionReport, ExpanderReport, LowerBoundReport,
    PairSample, RatioReport, SamplingScores, ScoreMode, SparsifierResult, SparsifierRoute,
    SparsifyError, SymmetricFamilyReport,
};
pub use transform::{
    merge_parallel, reduce_degree2, star_mesh_cut_system, wye_delta_obstruction, wye_delta_p2,
    ObstructionReport, StarMeshReport, TransformError, TransformResult, TransformRule,
};

/// The user guide, compiled straight from the book sources so the two
/// can never drift: every code block on these pages runs as a doc-test.
/// Each submodule mirrors one chapter of `book/`.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/flow-metrics.md")]
    pub mod flow_metrics {}
    #[doc = include_str!("../../../book/src/duality.md")]
    pub mod duality {}
    #[doc = include_str!("../../../book/src/structure.md")]
    pub mod structure {}
    #[doc = include_str!("../../../book/src/reductions.md")]
    pub mod reductions {}
    #[doc = include_str!("../../../book/src/sparsification.md")]
    pub mod sparsification {}
}
