//! Command-line front end for the p-norm flow metric library.
//!
//! Every operation of the library is reachable as a subcommand, with
//! machine-readable JSON output (`--json` or `--format json`), seeded
//! determinism (same config + same seed produces byte-identical JSON),
//! and verdict-aware exit codes:
//!
//! * 0 — success, or the checked property held;
//! * 1 — the command ran but its verdict was false (a violated bound, an
//!   infeasible system, a sparsifier outside its ε);
//! * 2 — usage error: bad flags, unreadable or malformed input;
//! * 3 — solver failure (iteration budget exhausted, numerical breakdown,
//!   a randomized construction out of retries).
//!
//! JSON reports carry a top-level `"schema"` field of the form
//! `pnormflow/<subcommand>/v1` (each subcommand's long help names its
//! schema), and every floating-point value is rounded to 12 significant
//! digits so equal runs are byte-equal.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Number, Value};

use pnormflow::{
    all_pairs, build_sparsifier_with, check_monotonicity, check_p_strong, commute_check, d_p,
    degree_condition_check, expander_clique_sparsifier, foster_sum, lower_bound_union,
    merge_parallel, parse_graph, reduce_degree2, resistance_ratio, serialize_graph,
    star_mesh_cut_system, symmetric_family, verify_sparsifier, wye_delta_obstruction,
    wye_delta_p2, DemandPair, PairSample, PNormParam, SolveError, SolveOptions, SparsifyError,
    TransformError, WeightedGraph,
};

// ---------------------------------------------------------------------------
// Argument plumbing
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "pnormflow",
    version,
    about = "p-norm flow metrics on weighted graphs",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    output: OutputOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct OutputOpts {
    /// Output format; csv is available for matrix-valued output only.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Shorthand for --format json.
    #[arg(long, global = true)]
    json: bool,
}

impl OutputOpts {
    fn effective(&self) -> Format {
        if self.json {
            Format::Json
        } else {
            self.format
        }
    }
}

/// Accepts a finite number or the literal `inf`; finite values above
/// 1e6 are coerced to ∞ with a warning on standard error.
fn parse_p(s: &str) -> Result<PNormParam, String> {
    let lowered = s.trim().to_ascii_lowercase();
    let raw = if lowered == "inf" || lowered == "infinity" {
        f64::INFINITY
    } else {
        lowered.parse::<f64>().map_err(|_| format!("'{s}' is not a number or 'inf'"))?
    };
    if raw.is_finite() && raw > PNormParam::INFINITY_THRESHOLD {
        eprintln!(
            "warning: p = {raw} exceeds {}; treating it as infinity",
            PNormParam::INFINITY_THRESHOLD
        );
    }
    PNormParam::new(raw).map_err(|e| e.to_string())
}

/// Comma-separated exponent list, each entry per [`parse_p`].
/// Comma-separated exponent list, kept as one clap value.
#[derive(Clone)]
struct PList(Vec<PNormParam>);

fn parse_p_list(s: &str) -> Result<PList, String> {
    s.split(',').map(parse_p).collect::<Result<_, _>>().map(PList)
}

/// Solver tolerance in (0, 1e−2].
fn parse_tol(s: &str) -> Result<f64, String> {
    let tol: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if tol > 0.0 && tol <= 1e-2 {
        Ok(tol)
    } else {
        Err(format!("tolerance {tol} outside (0, 1e-2]"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Single-pair d_p with its optimality certificate.
    ///
    /// Prints the primal (flow) value, the dual (potential) value, the
    /// relative duality gap, and the KKT residual. JSON schema:
    /// pnormflow/dist/v1.
    Dist(DistArgs),
    /// Distance matrix at one exponent over all vertex pairs.
    ///
    /// JSON schema: pnormflow/all-pairs/v1; --format csv emits one
    /// comma-separated row per vertex.
    AllPairs(AllPairsArgs),
    /// Foster-type edge sum Σ w(e)^q·d_p(e)^q against its bracket.
    ///
    /// Exit 1 when the sum leaves [n−1−cyc_q, n−1]. JSON schema:
    /// pnormflow/foster/v1.
    Foster(FosterArgs),
    /// Scan the distance matrix for p-strong triangle violations.
    ///
    /// d_p is p-strong (d(s,t)^p ≤ d(s,u)^p + d(u,t)^p); checking at a
    /// larger exponent is expected to fail. Exit 1 on any violation.
    /// JSON schema: pnormflow/p-strong/v1.
    PStrong(PStrongArgs),
    /// Monotonicity laws across an exponent list for one pair.
    ///
    /// Checks that d_p shrinks as p grows, the |E|^{1/p−1/p'} sandwich,
    /// and the reweighted q-power law. Exit 1 on violation. JSON schema:
    /// pnormflow/monotonicity/v1.
    Monotonicity(MonotonicityArgs),
    /// Commute-time identity C(u,v) = 2·w(E)·R_eff(u,v).
    ///
    /// Hitting times come from exact linear solves, resistances from the
    /// Laplacian pseudoinverse (weights unsquared). Exit 1 on mismatch
    /// beyond tolerance. JSON schema: pnormflow/commute/v1.
    Commute(CommuteArgs),
    /// Apply one metric-preserving local rewrite.
    ///
    /// deg2 eliminates a degree-2 vertex (series rule at the given p),
    /// parallel merges two parallel edges (q-norm rule), wye-delta
    /// rewrites a degree-3 star into a triangle (p = 2 only). JSON
    /// schema: pnormflow/reduce/v1.
    Reduce(ReduceArgs),
    /// The Y-Δ obstruction gap |α₁ − α₂| at an exponent.
    ///
    /// The two gadget-forced triangle weights agree exactly at p = 2 and
    /// at no other exponent; exit 0 iff they agree. JSON schema:
    /// pnormflow/obstruction/v1.
    Obstruction(ObstructionArgs),
    /// Cut-preservation system for replacing the unit k-star by a mesh.
    ///
    /// Exit 0 when a feasible clique weighting exists (k ≤ 3), 1 with a
    /// least-squares certificate otherwise. JSON schema:
    /// pnormflow/star-mesh/v1.
    StarMesh(StarMeshArgs),
    /// Build a d_p sparsifier on the same vertex set.
    ///
    /// Large p takes the Gomory–Hu tree; otherwise the dual ℓ_q system is
    /// row-sampled by importance scores. JSON schema:
    /// pnormflow/sparsify/v1.
    Sparsify(SparsifyArgs),
    /// Measure the worst relative d_p error between a graph and a
    /// claimed sparsifier.
    ///
    /// With --eps the exit code reflects whether the error stays within
    /// it. JSON schema: pnormflow/verify/v1.
    Verify(VerifyArgs),
    /// Structural experiments around resistance sparsification.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Args)]
struct DistArgs {
    /// Edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Exponent p in [1, inf]; accepts "inf".
    #[arg(long, value_parser = parse_p)]
    p: PNormParam,
    /// Source and target vertices.
    #[arg(long, required = true, num_args = 2, value_names = ["S", "T"])]
    pair: Vec<usize>,
    /// Relative duality-gap target.
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    tol: f64,
}

#[derive(Args)]
struct AllPairsArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_p)]
    p: PNormParam,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    tol: f64,
}

#[derive(Args)]
struct FosterArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_p)]
    p: PNormParam,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    tol: f64,
}

#[derive(Args)]
struct PStrongArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Exponent the metric is computed at.
    #[arg(long, value_parser = parse_p)]
    p: PNormParam,
    /// Exponent the triangle inequality is tested at (defaults to p).
    #[arg(long, value_parser = parse_p)]
    exponent: Option<PNormParam>,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    tol: f64,
}

#[derive(Args)]
struct MonotonicityArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, required = true, num_args = 2, value_names = ["S", "T"])]
    pair: Vec<usize>,
    /// Comma-separated exponent list.
    #[arg(long, value_parser = parse_p_list, default_value = "1,1.5,2,3,5,inf")]
    ps: PList,
    #[arg(long, value_parser = parse_tol, default_value = "1e-6")]
    tol: f64,
}

#[derive(Args)]
struct CommuteArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReduceRule {
    Deg2,
    Parallel,
    WyeDelta,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Which rewrite to apply.
    #[arg(long, value_enum)]
    rule: ReduceRule,
    /// Exponent the replacement weights are computed for.
    #[arg(long, value_parser = parse_p, default_value = "2")]
    p: PNormParam,
    /// Rewrite site for deg2 (the degree-2 vertex) and wye-delta (the
    /// degree-3 center).
    #[arg(long)]
    vertex: Option<usize>,
    /// Rewrite site for parallel: two edge indices.
    #[arg(long, num_args = 2, value_names = ["E1", "E2"])]
    edges: Vec<usize>,
    /// Also write the rewritten graph as an edge-list file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ObstructionArgs {
    #[arg(long, value_parser = parse_p)]
    p: PNormParam,
}

#[derive(Args)]
struct StarMeshArgs {
    /// Star size (number of leaves), 2 ≤ k ≤ 20.
    #[arg(long)]
    k: usize,
}

#[derive(Args)]
struct SparsifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_parser = parse_p)]
    p: PNormParam,
    /// Target relative error in (0, 1).
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplier on the oversampling factor g(n, ε, q).
    #[arg(long, default_value_t = 1.0)]
    oversample: f64,
    /// Also write the sparsifier as an edge-list file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// The original graph.
    #[arg(long)]
    graph: PathBuf,
    /// The claimed sparsifier (same vertex set).
    #[arg(long)]
    sparsifier: PathBuf,
    #[arg(long, value_parser = parse_p)]
    p: PNormParam,
    /// Verdict threshold: exit 1 if the error exceeds it.
    #[arg(long)]
    eps: Option<f64>,
    /// Sample this many random pairs instead of all (graphs with at most
    /// 30 vertices are always checked exhaustively).
    #[arg(long)]
    pairs: Option<usize>,
    /// Seed for the pair sample.
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    tol: f64,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Max/min effective-resistance ratio plus the degree conditions.
    ///
    /// Exit 1 if the graph violates a bound its structure implies. JSON
    /// schema: pnormflow/experiment-clique-ratio/v1.
    CliqueRatio(CliqueRatioArgs),
    /// The complete-graph-minus-an-edge two-weight family in closed form.
    ///
    /// Exit 0 iff the max/min ratio exceeds 1 + 1/(10n). JSON schema:
    /// pnormflow/experiment-symmetric-family/v1.
    SymmetricFamily(SymmetricFamilyArgs),
    /// Random regular expander measured against the clique's uniform
    /// resistance 2/n.
    ///
    /// Exit 0 iff the worst relative deviation stays within ε. JSON
    /// schema: pnormflow/experiment-expander-sparsifier/v1.
    ExpanderSparsifier(ExpanderArgs),
    /// Removal sensitivity of the clique-union lower-bound construction.
    ///
    /// Exit 0 iff every intra-clique removal moves some resistance by
    /// more than ε/4. JSON schema:
    /// pnormflow/experiment-lower-bound-union/v1.
    LowerBoundUnion(LowerBoundArgs),
}

#[derive(Args)]
struct CliqueRatioArgs {
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args)]
struct SymmetricFamilyArgs {
    /// Number of vertices, n ≥ 5.
    #[arg(long)]
    n: usize,
    /// Weight of edges touching the missing pair.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Weight of the remaining (bulk) edges.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Args)]
struct ExpanderArgs {
    /// Number of vertices (even).
    #[arg(long)]
    n: usize,
    /// Target relative resistance error; the degree is ⌈8/ε⌉.
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LowerBoundArgs {
    /// Scale parameter: ⌈√ε·n⌉ cliques of ⌈ε^{−1/2}⌉ vertices.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    eps: f64,
}

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

enum CliError {
    /// Bad input: flags, files, graph data, parameter ranges. Exit 2.
    Usage(String),
    /// The computation itself failed. Exit 3.
    Solver(String),
}

impl From<pnormflow::GraphError> for CliError {
    fn from(e: pnormflow::GraphError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Graph(g) => g.into(),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> Self {
        match e {
            TransformError::Graph(g) => g.into(),
            TransformError::Solve(s) => s.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<SparsifyError> for CliError {
    fn from(e: SparsifyError) -> Self {
        match e {
            SparsifyError::Graph(g) => g.into(),
            SparsifyError::Solve(s) => s.into(),
            SparsifyError::LewisDivergence { .. }
            | SparsifyError::RetriesExhausted { .. }
            | SparsifyError::ClosedFormMismatch { .. } => CliError::Solver(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// A command's rendered output plus its verdict (false → exit 1).
struct Outcome {
    output: String,
    verdict: bool,
}

impl Outcome {
    fn ok(output: String) -> Outcome {
        Outcome { output, verdict: true }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.output.effective();
    match run(cli.command, format) {
        Ok(outcome) => {
            print!("{}", outcome.output);
            if outcome.verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(3)
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Rounds every float in the tree to 12 significant digits, so that
/// numerically equal runs serialize byte-identically.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().expect("checked is_f64");
                let rounded: f64 = if f == 0.0 {
                    0.0
                } else {
                    format!("{f:.11e}").parse().expect("formatted float reparses")
                };
                *n = Number::from_f64(rounded).expect("rounded float is finite");
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with the versioned schema tag and 12-significant-digit
/// floats; keys are emitted in sorted order, so output is deterministic.
fn render_json<T: serde::Serialize>(schema: &str, report: &T, extra: &[(&str, Value)]) -> String {
    let value = serde_json::to_value(report).expect("reports serialize");
    let mut map = match value {
        Value::Object(map) => map,
        other => {
            let mut map = Map::new();
            map.insert("result".to_string(), other);
            map
        }
    };
    for (key, val) in extra {
        map.insert((*key).to_string(), val.clone());
    }
    map.insert("schema".to_string(), Value::String(format!("pnormflow/{schema}/v1")));
    let mut value = Value::Object(map);
    round_floats(&mut value);
    let mut out = serde_json::to_string_pretty(&value).expect("json renders");
    out.push('\n');
    out
}

fn reject_csv(format: Format) -> Result<(), CliError> {
    if format == Format::Csv {
        Err(CliError::Usage(
            "csv output is available for matrix-valued subcommands only (all-pairs)".to_string(),
        ))
    } else {
        Ok(())
    }
}

fn load_graph(path: &Path) -> Result<WeightedGraph, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_graph(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_graph(path: &Path, g: &WeightedGraph) -> Result<(), CliError> {
    std::fs::write(path, serialize_graph(g))
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn demand_from(pair: &[usize]) -> Result<DemandPair, CliError> {
    Ok(DemandPair::new(pair[0], pair[1])?)
}

fn opts(tol: f64) -> SolveOptions {
    SolveOptions { tol, ..SolveOptions::default() }
}

fn verdict_line(out: &mut String, verdict: bool) {
    writeln!(out, "verdict: {}", if verdict { "pass" } else { "FAIL" }).expect("string write");
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

fn run(command: Command, format: Format) -> Result<Outcome, CliError> {
    match command {
        Command::Dist(a) => cmd_dist(a, format),
        Command::AllPairs(a) => cmd_all_pairs(a, format),
        Command::Foster(a) => cmd_foster(a, format),
        Command::PStrong(a) => cmd_p_strong(a, format),
        Command::Monotonicity(a) => cmd_monotonicity(a, format),
        Command::Commute(a) => cmd_commute(a, format),
        Command::Reduce(a) => cmd_reduce(a, format),
        Command::Obstruction(a) => cmd_obstruction(a, format),
        Command::StarMesh(a) => cmd_star_mesh(a, format),
        Command::Sparsify(a) => cmd_sparsify(a, format),
        Command::Verify(a) => cmd_verify(a, format),
        Command::Experiment(e) => match e {
            ExperimentCommand::CliqueRatio(a) => cmd_clique_ratio(a, format),
            ExperimentCommand::SymmetricFamily(a) => cmd_symmetric_family(a, format),
            ExperimentCommand::ExpanderSparsifier(a) => cmd_expander(a, format),
            ExperimentCommand::LowerBoundUnion(a) => cmd_lower_bound(a, format),
        },
    }
}

fn cmd_dist(a: DistArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let g = load_graph(&a.graph)?;
    let d = demand_from(&a.pair)?;
    let report = d_p(&g, d, a.p, opts(a.tol))?;
    let output = match format {
        Format::Json => render_json(
            "dist",
            &report,
            &[("pair", Value::Array(vec![a.pair[0].into(), a.pair[1].into()]))],
        ),
        _ => {
            let mut out = String::new();
            writeln!(out, "d_{}({}, {}) = {}", a.p, a.pair[0], a.pair[1], report.value()).unwrap();
            writeln!(
                out,
                "  primal {}  dual {}  rel_gap {:.3e}  kkt {:.3e}  iterations {}",
                report.primal_value,
                report.dual_value,
                report.rel_gap,
                report.kkt_residual,
                report.iterations
            )
            .unwrap();
            out
        }
    };
    Ok(Outcome::ok(output))
}

fn cmd_all_pairs(a: AllPairsArgs, format: Format) -> Result<Outcome, CliError> {
    let g = load_graph(&a.graph)?;
    let matrix = all_pairs(&g, a.p, a.tol)?;
    let output = match format {
        Format::Json => render_json("all-pairs", &matrix, &[]),
        Format::Csv => matrix.to_csv(),
        Format::Text => {
            let mut out = String::new();
            writeln!(out, "d_{} on {} vertices (gap bound {:.3e})", a.p, matrix.n, matrix.gap_bound)
                .unwrap();
            for row in &matrix.values {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
                writeln!(out, "  {}", cells.join(" ")).unwrap();
            }
            out
        }
    };
    Ok(Outcome::ok(output))
}

fn cmd_foster(a: FosterArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let g = load_graph(&a.graph)?;
    let report = foster_sum(&g, a.p, a.tol)?;
    let verdict = report.verdict;
    let output = match format {
        Format::Json => render_json("foster", &report, &[]),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "foster sum at p = {}: {} (bracket [{}, {}])",
                a.p, report.sum, report.lower_bound, report.upper_bound
            )
            .unwrap();
            verdict_line(&mut out, verdict);
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_p_strong(a: PStrongArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let g = load_graph(&a.graph)?;
    let exponent = a.exponent.unwrap_or(a.p);
    let matrix = all_pairs(&g, a.p, a.tol)?;
    let violations = check_p_strong(&matrix, exponent, a.tol);
    let verdict = violations.is_empty();
    let output = match format {
        Format::Json => render_json(
            "p-strong",
            &violations,
            &[
                ("p", serde_json::to_value(a.p).unwrap()),
                ("exponent", serde_json::to_value(exponent).unwrap()),
                ("violation_count", Value::from(violations.len())),
                ("passed", Value::Bool(verdict)),
            ],
        ),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "{}-strong check of d_{}: {} violation(s)",
                exponent,
                a.p,
                violations.len()
            )
            .unwrap();
            for v in violations.iter().take(10) {
                writeln!(
                    out,
                    "  ({}, {}) via {}: excess {:.3e}",
                    v.x, v.z, v.y, v.excess
                )
                .unwrap();
            }
            verdict_line(&mut out, verdict);
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_monotonicity(a: MonotonicityArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let g = load_graph(&a.graph)?;
    let d = demand_from(&a.pair)?;
    let report = check_monotonicity(&g, d, &a.ps.0, a.tol)?;
    let verdict = report.passed();
    let output = match format {
        Format::Json => render_json("monotonicity", &report, &[("passed", Value::Bool(verdict))]),
        _ => {
            let mut out = String::new();
            writeln!(out, "monotonicity of d_p({}, {}):", a.pair[0], a.pair[1]).unwrap();
            for (p, v) in report.exponents.iter().zip(&report.values) {
                writeln!(out, "  p = {p}: {v}").unwrap();
            }
            writeln!(
                out,
                "  nonincreasing {}  sandwich {}  reweighted {}  max violation {:.3e}",
                report.nonincreasing, report.sandwich, report.reweighted, report.max_violation
            )
            .unwrap();
            verdict_line(&mut out, verdict);
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_commute(a: CommuteArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let g = load_graph(&a.graph)?;
    let report = commute_check(&g, a.tol)?;
    let verdict = report.passed;
    let output = match format {
        Format::Json => render_json("commute", &report, &[]),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "commute-time identity: max mismatch {:.3e} (total weight {})",
                report.max_mismatch, report.total_weight
            )
            .unwrap();
            verdict_line(&mut out, verdict);
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_reduce(a: ReduceArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let g = load_graph(&a.graph)?;
    let result = match a.rule {
        ReduceRule::Deg2 => {
            let v = a.vertex.ok_or_else(|| {
                CliError::Usage("--rule deg2 needs --vertex (the degree-2 vertex)".to_string())
            })?;
            reduce_degree2(&g, v, a.p)?
        }
        ReduceRule::Parallel => {
            if a.edges.len() != 2 {
                return Err(CliError::Usage(
                    "--rule parallel needs --edges E1 E2 (two edge indices)".to_string(),
                ));
            }
            merge_parallel(&g, a.edges[0], a.edges[1], a.p)?
        }
        ReduceRule::WyeDelta => {
            let v = a.vertex.ok_or_else(|| {
                CliError::Usage("--rule wye-delta needs --vertex (the degree-3 center)".to_string())
            })?;
            if !a.p.is_two() {
                return Err(CliError::Usage(format!(
                    "the Y-Δ rewrite preserves d_2 only (no such rewrite exists at p = {}); \
                     use --p 2",
                    a.p
                )));
            }
            wye_delta_p2(&g, v)?
        }
    };
    if let Some(path) = &a.out {
        write_graph(path, &result.graph_after)?;
    }
    let output = match format {
        Format::Json => render_json("reduce", &result, &[]),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "{}: {} -> {} vertices, {} -> {} edges",
                result.rule,
                g.n(),
                result.graph_after.n(),
                g.m(),
                result.graph_after.m()
            )
            .unwrap();
            for e in &result.created {
                writeln!(out, "  created ({}, {}) weight {}", e.tail, e.head, e.weight).unwrap();
            }
            out
        }
    };
    Ok(Outcome::ok(output))
}

fn cmd_obstruction(a: ObstructionArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let report = wye_delta_obstruction(a.p)?;
    let verdict = report.transform_exists;
    let output = match format {
        Format::Json => render_json("obstruction", &report, &[]),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "Y-Δ obstruction at p = {}: alpha1 = {}, alpha2 = {}, gap = {:.6}",
                a.p, report.alpha1, report.alpha2, report.gap
            )
            .unwrap();
            writeln!(
                out,
                "  transform {}",
                if verdict { "exists (the prescriptions agree)" } else { "does not exist" }
            )
            .unwrap();
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_star_mesh(a: StarMeshArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let report = star_mesh_cut_system(a.k)?;
    let verdict = report.feasible;
    let output = match format {
        Format::Json => render_json("star-mesh", &report, &[]),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "k = {}: {} unknowns, {} cut constraints, max violation {:.6}",
                report.k, report.unknowns, report.constraints, report.max_violation
            )
            .unwrap();
            writeln!(out, "  {}", if verdict { "feasible" } else { "infeasible" }).unwrap();
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_sparsify(a: SparsifyArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let g = load_graph(&a.graph)?;
    let result = build_sparsifier_with(&g, a.p, a.eps, a.seed, a.oversample)?;
    if let Some(path) = &a.out {
        write_graph(path, &result.graph_after)?;
    }
    let output = match format {
        Format::Json => render_json("sparsify", &result, &[("edges_before", Value::from(g.m()))]),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "route {}: {} -> {} edges (p = {}, eps = {}, seed = {})",
                result.route, g.m(), result.edge_count, a.p, a.eps, a.seed
            )
            .unwrap();
            if let Some(rows) = result.rows_drawn {
                writeln!(
                    out,
                    "  rows drawn {}  oversampling factor {:.3}  retries {}",
                    rows,
                    result.oversampling_factor.unwrap_or(f64::NAN),
                    result.retries
                )
                .unwrap();
            }
            out
        }
    };
    Ok(Outcome::ok(output))
}

fn cmd_verify(a: VerifyArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let g = load_graph(&a.graph)?;
    let h = load_graph(&a.sparsifier)?;
    let pairs = match a.pairs {
        Some(count) => PairSample::Random { count, seed: a.sample_seed },
        None => PairSample::All,
    };
    let error = verify_sparsifier(&g, &h, a.p, pairs, a.tol)?;
    let verdict = a.eps.map_or(true, |eps| error <= eps);
    let output = match format {
        Format::Json => {
            let mut extra = vec![
                ("p", serde_json::to_value(a.p).unwrap()),
                ("max_relative_error", Value::from(error)),
                ("pairs", serde_json::to_value(pairs).unwrap()),
            ];
            if let Some(eps) = a.eps {
                extra.push(("eps", Value::from(eps)));
                extra.push(("within_eps", Value::Bool(verdict)));
            }
            render_json("verify", &Map::new(), &extra)
        }
        _ => {
            let mut out = String::new();
            writeln!(out, "max relative d_{} error: {:.6e}", a.p, error).unwrap();
            if let Some(eps) = a.eps {
                writeln!(out, "  eps = {eps}").unwrap();
                verdict_line(&mut out, verdict);
            }
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_clique_ratio(a: CliqueRatioArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let g = load_graph(&a.graph)?;
    let ratio = resistance_ratio(&g)?;
    let degree = degree_condition_check(&g)?;
    let verdict = ratio.bound_satisfied && degree.bound_satisfied != Some(false);
    let output = match format {
        Format::Json => render_json(
            "experiment-clique-ratio",
            &Map::new(),
            &[
                ("ratio", serde_json::to_value(&ratio).unwrap()),
                ("degree_conditions", serde_json::to_value(&degree).unwrap()),
                ("passed", Value::Bool(verdict)),
            ],
        ),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "resistance ratio: {} (bound {}, {})",
                ratio.ratio,
                ratio.bound,
                if ratio.complete { "complete graph" } else { "incomplete graph" }
            )
            .unwrap();
            writeln!(
                out,
                "  degree conditions: applicable {}, bound {} satisfied {:?}",
                degree.any_condition, degree.bound, degree.bound_satisfied
            )
            .unwrap();
            verdict_line(&mut out, verdict);
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_symmetric_family(a: SymmetricFamilyArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let report = symmetric_family(a.n, a.alpha, a.beta)?;
    let verdict = report.ratio_exceeds_bound;
    let output = match format {
        Format::Json => render_json("experiment-symmetric-family", &report, &[]),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "n = {}, alpha = {}, beta = {}: R_st = {}, R_A = {}, R_B = {}",
                a.n, a.alpha, a.beta, report.r_st, report.r_a, report.r_b
            )
            .unwrap();
            writeln!(out, "  ratio {} vs bound {}", report.ratio, report.bound).unwrap();
            verdict_line(&mut out, verdict);
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_expander(a: ExpanderArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let report = expander_clique_sparsifier(a.n, a.eps, a.seed)?;
    let verdict = report.within_target;
    let output = match format {
        Format::Json => render_json("experiment-expander-sparsifier", &report, &[]),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "{}-regular expander on {} vertices ({} edges, weight {}):",
                report.degree, a.n, report.sparsifier.edge_count, report.weight
            )
            .unwrap();
            writeln!(
                out,
                "  max relative resistance error {:.6} (target {})",
                report.max_rel_error, a.eps
            )
            .unwrap();
            verdict_line(&mut out, verdict);
            out
        }
    };
    Ok(Outcome { output, verdict })
}

fn cmd_lower_bound(a: LowerBoundArgs, format: Format) -> Result<Outcome, CliError> {
    reject_csv(format)?;
    let report = lower_bound_union(a.n, a.eps)?;
    let verdict = report.passed;
    let output = match format {
        Format::Json => render_json("experiment-lower-bound-union", &report, &[]),
        _ => {
            let mut out = String::new();
            writeln!(
                out,
                "{} cliques of {} vertices ({} intra-clique edges):",
                report.cliques, report.clique_size, report.intra_edges
            )
            .unwrap();
            writeln!(
                out,
                "  disconnecting removals {}, min relative change {:?}, threshold {}",
                report.disconnecting_removals, report.min_relative_change, report.threshold
            )
            .unwrap();
            verdict_line(&mut out, verdict);
            out
        }
    };
    Ok(Outcome { output, verdict })
}
