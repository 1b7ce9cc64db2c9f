//! Exact optimization of the auxiliary problem.
//!
//! After aliasing the replica copies of each point (they are forced equal),
//! the auxiliary problem lives on `2n` integer variables: the count `w_i`
//! and the binary support indicator `s_i` of every source point. A
//! best-bound branch-and-bound drives the search; node bounds come from a
//! conditional-gradient relaxation of `log det M(w)` over the node's
//! polytope ([`relax`]), whose linear subproblems are solved by a
//! bounded-variable simplex ([`lp`]). A rounding heuristic supplies
//! incumbents ([`rounding`]) and a brute-force enumerator provides ground
//! truth on small instances ([`brute`]).

pub mod brute;
pub mod lp;
pub mod relax;
pub mod rounding;

pub use brute::{brute_force, brute_force_auxiliary};
pub use relax::{solve_relaxation, RelaxOutcome, RelaxationResult};
pub use rounding::rounding_incumbent;

use crate::decompose::FactorRoute;
use crate::design::ExactDesign;
use crate::error::Error;
use crate::linalg::SymMatrix;
use crate::problem::{criterion_d, InformationMatrix, LasProblem};
use crate::reduce::{build_auxiliary, AuxPointKind, AuxSense, AuxiliaryDesign, AuxiliaryProblem};
use lp::{LpRow, LpSense};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

/// Knobs for the branch-and-bound solver.
#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Terminate once `(bound - incumbent) / incumbent` falls to this level.
    pub relative_gap: f64,
    /// A relaxation value within this distance of an integer counts as one.
    pub integrality_tol: f64,
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Serial node processing with a reproducible node sequence.
    pub deterministic: bool,
    /// Wave width for parallel node processing (1 = serial). Results are
    /// reproducible for a fixed thread count either way.
    pub threads: usize,
    /// Frank-Wolfe iteration cap per node; the root gets four times this.
    pub relaxation_iter_cap: usize,
    /// Relative duality-gap target for the relaxation.
    pub relaxation_gap_tol: f64,
    /// Candidate cap for brute-force enumeration.
    pub enumeration_cap: u64,
    /// Which factorization builds the auxiliary regressors.
    pub factor_route: FactorRoute,
    /// Seed for the randomized relaxation starting point.
    pub seed: u64,
    /// Record one trace entry per processed node (for determinism checks).
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            relative_gap: 1e-6,
            integrality_tol: 1e-6,
            node_limit: None,
            time_limit: None,
            deterministic: true,
            threads: 1,
            relaxation_iter_cap: 600,
            relaxation_gap_tol: 1e-7,
            enumeration_cap: 10_000_000,
            factor_route: FactorRoute::Eigen,
            seed: 0xD05E,
            record_trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverStatus {
    /// Search tree exhausted; the incumbent is proven optimal.
    Optimal,
    /// Stopped because the relative gap reached the requested tolerance.
    GapLimit,
    NodeLimit,
    TimeLimit,
    Infeasible,
}

/// What happened at one processed node (recorded when tracing).
#[derive(Clone, Debug, PartialEq)]
pub enum TraceAction {
    Pruned,
    Infeasible,
    Integral,
    Branched { var: usize },
    Evaluated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub node: u64,
    pub bound_phi: f64,
    pub incumbent_phi: f64,
    pub action: TraceAction,
}

/// Outcome of a solve: the best design mapped back to the source space, its
/// criterion value, the proven bound and gap, and search statistics.
#[derive(Clone, Debug)]
pub struct SolverResult {
    pub design: Option<ExactDesign>,
    pub phi: f64,
    pub upper_bound: f64,
    pub relative_gap: f64,
    pub status: SolverStatus,
    pub nodes: u64,
    pub wall_time: Duration,
    /// Equally good optima (populated by the brute-force oracle only).
    pub ties: Vec<ExactDesign>,
    pub trace: Vec<TraceEntry>,
}

impl SolverResult {
    fn infeasible(nodes: u64, wall_time: Duration) -> Self {
        SolverResult {
            design: None,
            phi: 0.0,
            upper_bound: 0.0,
            relative_gap: 0.0,
            status: SolverStatus::Infeasible,
            nodes,
            wall_time,
            ties: Vec::new(),
            trace: Vec::new(),
        }
    }
}

/// Bound tightening triggered by fixing an indicator: a two-variable row
/// `alpha w + gamma s <= rhs` pins `w` once `s` is constant.
#[derive(Clone, Debug)]
struct ImpliedBound {
    w: usize,
    alpha: f64,
    gamma: f64,
    rhs: f64,
}

/// The auxiliary problem after presolve: replicas aliased onto one count
/// variable per point, single-variable rows folded into the boxes, and
/// trivial rows dropped. Variables `0..n` are counts, `n..2n` indicators.
#[derive(Clone, Debug)]
pub struct PresolvedProblem {
    n: usize,
    m: usize,
    size: u32,
    /// Rank-one factors per point (the aliased replica regressors).
    factors: Vec<Vec<Vec<f64>>>,
    /// `H_i = Σ_j f_ij f_ijᵀ` rebuilt from the factors.
    elementary: Vec<SymMatrix>,
    /// General rows over the `2n` variables; the size equality is separate.
    rows: Vec<LpRow>,
    root_lower: Vec<u32>,
    root_upper: Vec<u32>,
    /// Implied bounds grouped by indicator (offset into `n..2n`).
    implied: Vec<Vec<ImpliedBound>>,
    /// Root polytope proven empty during presolve.
    infeasible: bool,
}

impl PresolvedProblem {
    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn num_vars(&self) -> usize {
        2 * self.n
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    pub fn factors(&self) -> &[Vec<Vec<f64>>] {
        &self.factors
    }

    pub fn elementary(&self, i: usize) -> &SymMatrix {
        &self.elementary[i]
    }

    pub fn root_bounds(&self) -> (Vec<u32>, Vec<u32>) {
        (self.root_lower.clone(), self.root_upper.clone())
    }

    /// The size equality as an LP row.
    pub fn size_row(&self) -> LpRow {
        LpRow {
            coeffs: (0..self.n).map(|i| (i, 1.0)).collect(),
            rhs: self.size as f64,
            sense: LpSense::Eq,
        }
    }

    /// `M(w) = Σ w_i H_i` for fractional counts.
    pub fn information_matrix(&self, counts: &[f64]) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.m);
        for (i, &w) in counts.iter().enumerate() {
            if w != 0.0 {
                m.add_scaled(&self.elementary[i], w);
            }
        }
        m
    }

    /// Exact row activities for an integer point; `true` when all rows hold.
    pub fn integer_point_feasible(&self, counts: &[u32]) -> bool {
        let total: u64 = counts[..self.n].iter().map(|&c| c as u64).sum();
        if total != self.size as u64 {
            return false;
        }
        // Presolve folds single-variable rows into these boxes, so they are
        // part of feasibility, not just search bounds.
        for j in 0..counts.len() {
            if counts[j] < self.root_lower[j] || counts[j] > self.root_upper[j] {
                return false;
            }
        }
        for row in &self.rows {
            let act: f64 = row
                .coeffs
                .iter()
                .map(|&(j, a)| a * counts[j] as f64)
                .sum();
            let ok = match row.sense {
                LpSense::Le => act <= row.rhs + 1e-9,
                LpSense::Eq => (act - row.rhs).abs() <= 1e-9,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// `log det M(w)` of an integer point, `None` when singular.
    pub fn integer_point_logdet(&self, counts: &[u32]) -> Option<f64> {
        let fractional: Vec<f64> = counts[..self.n].iter().map(|&c| c as f64).collect();
        crate::problem::log_det_psd(&self.information_matrix(&fractional))
    }
}

/// Aliases replicas, folds single-variable rows into bounds, and drops rows
/// made trivial by the aliasing.
pub fn presolve(aux: &AuxiliaryProblem) -> Result<PresolvedProblem, Error> {
    let n = aux.source_len();
    let r = aux.rank_bound();
    let m = aux.dim();
    let size = aux.size();
    let nvars = 2 * n;

    let mut factors = Vec::with_capacity(n);
    let mut elementary = Vec::with_capacity(n);
    for point in 0..n {
        let vectors: Vec<Vec<f64>> = (0..r)
            .map(|copy| aux.regressor(aux.replica_index(point, copy)).to_vec())
            .collect();
        let mut h = SymMatrix::zeros(m);
        for f in &vectors {
            h.add_scaled_outer(f, 1.0);
        }
        factors.push(vectors);
        elementary.push(h);
    }

    let var_of = |aux_index: usize| -> usize {
        match aux.kinds()[aux_index] {
            AuxPointKind::Replica { point, .. } => point,
            AuxPointKind::Label { point } => n + point,
        }
    };

    let mut root_lower = vec![0u32; nvars];
    let mut root_upper = vec![0u32; nvars];
    for i in 0..n {
        root_upper[i] = size;
        root_upper[n + i] = 1;
    }

    let mut rows: Vec<LpRow> = Vec::new();
    let mut infeasible = false;
    for aux_row in aux.rows() {
        let mut dense = vec![0.0; nvars];
        for &(idx, a) in &aux_row.coeffs {
            dense[var_of(idx)] += a;
        }
        let coeffs: Vec<(usize, f64)> = dense
            .iter()
            .enumerate()
            .filter(|&(_, &a)| a != 0.0)
            .map(|(j, &a)| (j, a))
            .collect();
        let sense = match aux_row.sense {
            AuxSense::Le => LpSense::Le,
            AuxSense::Eq => LpSense::Eq,
        };
        match coeffs.len() {
            0 => {
                // Aliasing cancelled the row; it must be trivially true.
                let broken = match sense {
                    LpSense::Le => aux_row.rhs < -1e-9,
                    LpSense::Eq => aux_row.rhs.abs() > 1e-9,
                };
                if broken {
                    infeasible = true;
                }
            }
            1 => {
                // Fold into the integer box.
                let (j, a) = coeffs[0];
                let bound = aux_row.rhs / a;
                let tighten_upper = |ub: &mut u32, b: f64| {
                    let v = (b + 1e-9).floor();
                    if v < *ub as f64 {
                        *ub = if v < 0.0 { 0 } else { v as u32 };
                        // A negative upper bound empties the box.
                        if v < -0.5 {
                            return false;
                        }
                    }
                    true
                };
                let tighten_lower = |lb: &mut u32, b: f64| {
                    let v = (b - 1e-9).ceil().max(0.0);
                    if v > *lb as f64 {
                        *lb = v as u32;
                    }
                };
                match sense {
                    LpSense::Le => {
                        if a > 0.0 {
                            if !tighten_upper(&mut root_upper[j], bound) && aux_row.rhs < -1e-9 {
                                infeasible = true;
                            }
                        } else {
                            tighten_lower(&mut root_lower[j], bound);
                        }
                    }
                    LpSense::Eq => {
                        tighten_upper(&mut root_upper[j], bound);
                        tighten_lower(&mut root_lower[j], bound);
                    }
                }
            }
            _ => rows.push(LpRow {
                coeffs,
                rhs: aux_row.rhs,
                sense,
            }),
        }
    }
    for j in 0..nvars {
        if root_lower[j] > root_upper[j] {
            infeasible = true;
        }
    }

    // Implied bounds: rows coupling exactly one count and one indicator.
    let mut implied = vec![Vec::new(); n];
    for row in &rows {
        if row.sense != LpSense::Le || row.coeffs.len() != 2 {
            continue;
        }
        let (a_var, a_coef) = row.coeffs[0];
        let (b_var, b_coef) = row.coeffs[1];
        let (w, alpha, s, gamma) = if a_var < n && b_var >= n {
            (a_var, a_coef, b_var, b_coef)
        } else if b_var < n && a_var >= n {
            (b_var, b_coef, a_var, a_coef)
        } else {
            continue;
        };
        implied[s - n].push(ImpliedBound {
            w,
            alpha,
            gamma,
            rhs: row.rhs,
        });
    }

    Ok(PresolvedProblem {
        n,
        m,
        size,
        factors,
        elementary,
        rows,
        root_lower,
        root_upper,
        implied,
        infeasible,
    })
}

/// Tightens the count boxes implied by a freshly fixed indicator variable.
fn apply_implied_bounds(
    problem: &PresolvedProblem,
    lower: &mut [u32],
    upper: &mut [u32],
    indicator_offset: usize,
) {
    let s_value = lower[problem.n + indicator_offset];
    debug_assert_eq!(s_value, upper[problem.n + indicator_offset]);
    for ib in &problem.implied[indicator_offset] {
        let rhs = ib.rhs - ib.gamma * s_value as f64;
        if ib.alpha > 0.0 {
            let v = (rhs / ib.alpha + 1e-9).floor();
            let cap = if v < 0.0 { 0 } else { v as u32 };
            if cap < upper[ib.w] {
                upper[ib.w] = cap;
            }
        } else if ib.alpha < 0.0 {
            let v = (rhs / ib.alpha - 1e-9).ceil().max(0.0) as u32;
            if v > lower[ib.w] {
                lower[ib.w] = v;
            }
        }
    }
}

/// Compiles and solves a problem end to end: factorize, reduce, presolve,
/// branch and bound.
pub fn solve_problem(problem: &LasProblem, options: &SolverOptions) -> Result<SolverResult, Error> {
    let aux = build_auxiliary(problem, options.factor_route)?;
    branch_and_bound(&aux, options)
}

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Node {
    id: u64,
    lower: Vec<u32>,
    upper: Vec<u32>,
    /// Valid bound on log det over this node's box (inherited estimate).
    bound_log: f64,
    depth: u32,
}

struct HeapEntry {
    bound_log: f64,
    depth: u32,
    id: u64,
    node: Node,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Best bound first, then deeper, then older.
        match self.bound_log.partial_cmp(&other.bound_log) {
            Some(Ordering::Equal) | None => {}
            Some(ord) => return ord,
        }
        match self.depth.cmp(&other.depth) {
            Ordering::Equal => {}
            ord => return ord,
        }
        other.id.cmp(&self.id)
    }
}

struct Incumbent {
    counts: Option<Vec<u32>>,
    log_det: f64, // -inf when none or singular
    phi: f64,
}

/// What a node produced, computed in parallel and merged in order.
enum NodeVerdict {
    Infeasible,
    /// Fully fixed box evaluated exactly.
    Leaf {
        counts: Option<Vec<u32>>,
        value_log: f64,
    },
    Expanded {
        bound_log: f64,
        relaxation: Box<RelaxationResult>,
        incumbent_candidate: Option<(Vec<u32>, f64)>,
    },
}

fn phi_of_log(log_det: f64, m: usize) -> f64 {
    if log_det.is_finite() {
        (log_det / m as f64).exp()
    } else {
        0.0
    }
}

/// Branch-and-bound over the presolved auxiliary problem. Returns the best
/// design in source coordinates together with the proven bound and gap.
pub fn branch_and_bound(
    aux: &AuxiliaryProblem,
    options: &SolverOptions,
) -> Result<SolverResult, Error> {
    let start = Instant::now();
    let problem = presolve(aux)?;
    let m = problem.m;
    if problem.infeasible {
        return Ok(SolverResult::infeasible(0, start.elapsed()));
    }

    let wave_width = if options.deterministic {
        1
    } else {
        options.threads.max(1)
    };
    let pool = if wave_width > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(wave_width)
                .build()
                .map_err(|e| Error::LpFailure(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut queue: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut next_id: u64 = 0;
    let mut nodes_explored: u64 = 0;
    let mut incumbent = Incumbent {
        counts: None,
        log_det: f64::NEG_INFINITY,
        phi: 0.0,
    };
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut root_infeasible = false;

    {
        let node = Node {
            id: next_id,
            lower: problem.root_lower.clone(),
            upper: problem.root_upper.clone(),
            bound_log: f64::INFINITY,
            depth: 0,
        };
        next_id += 1;
        queue.push(HeapEntry {
            bound_log: node.bound_log,
            depth: node.depth,
            id: node.id,
            node,
        });
    }

    // Nodes are discarded either because they provably cannot beat the
    // incumbent (float margin only) or because they cannot beat it by more
    // than the gap tolerance. The best bound among the latter is kept so the
    // reported bound and status never overstate the proof.
    let prune_margin = 1e-12;
    let gap_margin_log = (m as f64) * options.relative_gap.ln_1p();
    let mut gap_pruned_bound_log = f64::NEG_INFINITY;

    let mut status = SolverStatus::Optimal;

    'main: while let Some(top) = queue.peek() {
        // Global bound = best of incumbent and open-node estimates.
        let global_bound_log = top.bound_log.max(incumbent.log_det);
        if incumbent.counts.is_some() {
            let bound_phi = phi_of_log(global_bound_log, m);
            let gap = relative_gap(bound_phi, incumbent.phi);
            // A gap of exactly zero means the open nodes are dominated;
            // exhaustion handles that and reports a proven optimum.
            if gap > 0.0 && gap <= options.relative_gap && global_bound_log.is_finite() {
                status = SolverStatus::GapLimit;
                break 'main;
            }
        }
        if let Some(limit) = options.node_limit {
            if nodes_explored >= limit {
                status = SolverStatus::NodeLimit;
                break 'main;
            }
        }
        if let Some(limit) = options.time_limit {
            if start.elapsed() >= limit {
                status = SolverStatus::TimeLimit;
                break 'main;
            }
        }

        // Pop a wave of nodes worth processing.
        let mut wave: Vec<Node> = Vec::with_capacity(wave_width);
        while wave.len() < wave_width {
            match queue.pop() {
                Some(entry) => {
                    if entry.bound_log <= incumbent.log_det + gap_margin_log + prune_margin {
                        // Dominated while queued; the whole remaining queue
                        // is dominated too (heap order), so drop it.
                        if entry.bound_log > incumbent.log_det + prune_margin {
                            gap_pruned_bound_log = gap_pruned_bound_log.max(entry.bound_log);
                        }
                        queue.clear();
                        break;
                    }
                    wave.push(entry.node);
                }
                None => break,
            }
        }
        if wave.is_empty() {
            break;
        }

        let root_cap_boost = if wave[0].depth == 0 { 4 } else { 1 };
        let iter_cap = options.relaxation_iter_cap * root_cap_boost;
        let process = |node: &Node| -> Result<NodeVerdict, Error> {
            process_node(&problem, node, options, iter_cap)
        };
        let verdicts: Vec<Result<NodeVerdict, Error>> = match &pool {
            Some(pool) => pool.install(|| {
                use rayon::prelude::*;
                wave.par_iter().map(process).collect()
            }),
            None => wave.iter().map(process).collect(),
        };

        for (node, verdict) in wave.into_iter().zip(verdicts) {
            nodes_explored += 1;
            let verdict = verdict?;
            match verdict {
                NodeVerdict::Infeasible => {
                    if node.depth == 0 {
                        root_infeasible = true;
                    }
                    if options.record_trace {
                        trace.push(TraceEntry {
                            node: node.id,
                            bound_phi: 0.0,
                            incumbent_phi: incumbent.phi,
                            action: TraceAction::Infeasible,
                        });
                    }
                }
                NodeVerdict::Leaf { counts, value_log } => {
                    if let Some(counts) = counts {
                        try_update_incumbent(&mut incumbent, counts, value_log, m);
                    }
                    if options.record_trace {
                        trace.push(TraceEntry {
                            node: node.id,
                            bound_phi: phi_of_log(value_log, m),
                            incumbent_phi: incumbent.phi,
                            action: TraceAction::Evaluated,
                        });
                    }
                }
                NodeVerdict::Expanded {
                    bound_log,
                    relaxation,
                    incumbent_candidate,
                } => {
                    if let Some((counts, value_log)) = incumbent_candidate {
                        try_update_incumbent(&mut incumbent, counts, value_log, m);
                    }
                    let bound_log = bound_log.min(node.bound_log);
                    if bound_log <= incumbent.log_det + gap_margin_log + prune_margin {
                        if bound_log > incumbent.log_det + prune_margin {
                            gap_pruned_bound_log = gap_pruned_bound_log.max(bound_log);
                        }
                        if options.record_trace {
                            trace.push(TraceEntry {
                                node: node.id,
                                bound_phi: phi_of_log(bound_log, m),
                                incumbent_phi: incumbent.phi,
                                action: TraceAction::Pruned,
                            });
                        }
                        continue;
                    }
                    // Integral relaxations were already absorbed as
                    // incumbents; branch to shrink the box either way.
                    let branch_var = select_branch_variable(&problem, &node, &relaxation, options);
                    match branch_var {
                        Some(var) => {
                            if options.record_trace {
                                trace.push(TraceEntry {
                                    node: node.id,
                                    bound_phi: phi_of_log(bound_log, m),
                                    incumbent_phi: incumbent.phi,
                                    action: TraceAction::Branched { var },
                                });
                            }
                            let value = if var < problem.n {
                                relaxation.counts[var]
                            } else {
                                relaxation.indicators[var - problem.n]
                            };
                            for child in
                                make_children(&problem, &node, var, value, bound_log, &mut next_id)
                            {
                                queue.push(HeapEntry {
                                    bound_log: child.bound_log,
                                    depth: child.depth,
                                    id: child.id,
                                    node: child,
                                });
                            }
                        }
                        None => {
                            // Box fully fixed but flagged fractional only by
                            // round-off; treat as evaluated leaf.
                            if options.record_trace {
                                trace.push(TraceEntry {
                                    node: node.id,
                                    bound_phi: phi_of_log(bound_log, m),
                                    incumbent_phi: incumbent.phi,
                                    action: TraceAction::Integral,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    let wall_time = start.elapsed();
    if incumbent.counts.is_none() {
        let status = if root_infeasible || queue.is_empty() {
            SolverStatus::Infeasible
        } else {
            status // hit a limit before finding anything
        };
        let mut result = SolverResult::infeasible(nodes_explored, wall_time);
        result.status = status;
        result.trace = trace;
        return Ok(result);
    }

    let counts = incumbent.counts.expect("incumbent present");
    let design = ExactDesign::new(counts.clone());
    verify_result_feasible(aux, &problem, &counts)?;

    // The proven bound covers open nodes and anything pruned only within
    // the gap tolerance.
    let open_bound = queue
        .iter()
        .map(|e| e.bound_log)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound_log = open_bound
        .max(gap_pruned_bound_log)
        .max(incumbent.log_det);
    if status == SolverStatus::Optimal && gap_pruned_bound_log > incumbent.log_det {
        // The tree is exhausted but some nodes were discarded only because
        // they fell inside the tolerance: optimal within the gap, not proven.
        status = SolverStatus::GapLimit;
    }
    let upper_bound = phi_of_log(bound_log, m);
    let gap = relative_gap(upper_bound, incumbent.phi);

    Ok(SolverResult {
        design: Some(design),
        phi: incumbent.phi,
        upper_bound,
        relative_gap: gap,
        status,
        nodes: nodes_explored,
        wall_time,
        ties: Vec::new(),
        trace,
    })
}

fn relative_gap(bound_phi: f64, phi: f64) -> f64 {
    if phi > 0.0 {
        ((bound_phi - phi) / phi).max(0.0)
    } else if bound_phi <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn try_update_incumbent(incumbent: &mut Incumbent, counts: Vec<u32>, value_log: f64, m: usize) {
    let improves = match incumbent.counts {
        None => true,
        Some(_) => value_log > incumbent.log_det,
    };
    if improves {
        incumbent.phi = phi_of_log(value_log, m);
        incumbent.log_det = value_log;
        incumbent.counts = Some(counts);
    }
}

/// Solves one node: exact evaluation for point boxes, otherwise relaxation
/// plus rounding.
fn process_node(
    problem: &PresolvedProblem,
    node: &Node,
    options: &SolverOptions,
    iter_cap: usize,
) -> Result<NodeVerdict, Error> {
    let fully_fixed = node
        .lower
        .iter()
        .zip(&node.upper)
        .all(|(lo, up)| lo == up);
    if fully_fixed {
        if !problem.integer_point_feasible(&node.lower) {
            return Ok(NodeVerdict::Infeasible);
        }
        let value_log = problem
            .integer_point_logdet(&node.lower)
            .unwrap_or(f64::NEG_INFINITY);
        return Ok(NodeVerdict::Leaf {
            counts: Some(node.lower[..problem.n].to_vec()),
            value_log,
        });
    }

    let relaxation = match solve_relaxation(
        problem,
        &node.lower,
        &node.upper,
        iter_cap,
        options.relaxation_gap_tol,
        options.seed,
    )? {
        RelaxOutcome::Infeasible => return Ok(NodeVerdict::Infeasible),
        RelaxOutcome::Feasible(r) => r,
    };

    // Incumbent candidates: the relaxation itself when integral, otherwise
    // the apportionment-and-repair heuristic. Both are re-verified exactly.
    let mut candidate: Option<(Vec<u32>, f64)> = None;
    let integral = relaxation
        .counts
        .iter()
        .chain(&relaxation.indicators)
        .all(|&v| (v - v.round()).abs() <= options.integrality_tol);
    if integral {
        let counts: Vec<u32> = relaxation
            .counts
            .iter()
            .chain(&relaxation.indicators)
            .map(|&v| v.round().max(0.0) as u32)
            .collect();
        if problem.integer_point_feasible(&counts) {
            let value_log = problem
                .integer_point_logdet(&counts)
                .unwrap_or(f64::NEG_INFINITY);
            candidate = Some((counts[..problem.n].to_vec(), value_log));
        }
    }
    if candidate.is_none() {
        if let Some((counts, value_log)) = rounding_incumbent(&relaxation, problem, 4 * problem.n)
        {
            candidate = Some((counts, value_log));
        }
    }

    Ok(NodeVerdict::Expanded {
        bound_log: relaxation.bound_log,
        relaxation,
        incumbent_candidate: candidate,
    })
}

/// Most fractional indicator first, then most fractional count, ties to the
/// lowest index; `None` when everything is integral within tolerance and the
/// box admits no further split.
fn select_branch_variable(
    problem: &PresolvedProblem,
    node: &Node,
    relaxation: &RelaxationResult,
    options: &SolverOptions,
) -> Option<usize> {
    let n = problem.n;
    let fractionality = |v: f64| -> f64 {
        let f = v - v.floor();
        f.min(1.0 - f)
    };
    let mut best: Option<(usize, f64)> = None;
    for (offset, &v) in relaxation.indicators.iter().enumerate() {
        let var = n + offset;
        if node.lower[var] == node.upper[var] {
            continue;
        }
        let f = fractionality(v);
        if f > options.integrality_tol {
            match best {
                Some((_, bf)) if bf >= f => {}
                _ => best = Some((var, f)),
            }
        }
    }
    if best.is_none() {
        for (var, &v) in relaxation.counts.iter().enumerate() {
            if node.lower[var] == node.upper[var] {
                continue;
            }
            let f = fractionality(v);
            if f > options.integrality_tol {
                match best {
                    Some((_, bf)) if bf >= f => {}
                    _ => best = Some((var, f)),
                }
            }
        }
    }
    if let Some((var, _)) = best {
        return Some(var);
    }
    // Integral relaxation that did not close the node: split the widest
    // unfixed variable so the search still makes progress.
    let mut widest: Option<(usize, u32)> = None;
    for var in (n..2 * n).chain(0..n) {
        let width = node.upper[var] - node.lower[var];
        if width > 0 {
            match widest {
                Some((_, w)) if w >= width => {}
                _ => widest = Some((var, width)),
            }
        }
    }
    widest.map(|(var, _)| var)
}

/// Two children splitting the box at the relaxation value. Indicator
/// children additionally tighten the linked count boxes.
fn make_children(
    problem: &PresolvedProblem,
    node: &Node,
    var: usize,
    value: f64,
    bound_log: f64,
    next_id: &mut u64,
) -> Vec<Node> {
    let n = problem.n;
    let lo = node.lower[var];
    let up = node.upper[var];
    // Split point: fractional values split at the floor; integral values
    // (forced splits) at the box midpoint.
    let split = if (value - value.round()).abs() > 1e-9 {
        value.floor().clamp(lo as f64, up as f64 - 1.0) as u32
    } else {
        lo + (up - lo) / 2
    };
    let mut children = Vec::with_capacity(2);
    for (child_lo, child_up) in [(lo, split), (split + 1, up)] {
        if child_lo > child_up {
            continue;
        }
        let mut lower = node.lower.clone();
        let mut upper = node.upper.clone();
        lower[var] = child_lo;
        upper[var] = child_up;
        if var >= n && child_lo == child_up {
            apply_implied_bounds(problem, &mut lower, &mut upper, var - n);
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            continue;
        }
        children.push(Node {
            id: {
                let id = *next_id;
                *next_id += 1;
                id
            },
            lower,
            upper,
            bound_log,
            depth: node.depth + 1,
        });
    }
    children
}

/// The returned design must satisfy the source problem (when known) and the
/// auxiliary rows; a failure here is an internal soundness bug.
fn verify_result_feasible(
    aux: &AuxiliaryProblem,
    problem: &PresolvedProblem,
    counts: &[u32],
) -> Result<(), Error> {
    if let Some(origin) = aux.origin() {
        let report = origin.check_feasible(&ExactDesign::new(counts.to_vec()))?;
        if !report.feasible() {
            return Err(Error::InfeasibleDesign(format!(
                "solver produced an infeasible design: size deviation {}, {} violated rows",
                report.size_deviation,
                report.violations.len()
            )));
        }
    } else {
        let mut aux_counts = vec![0u32; aux.len()];
        for point in 0..problem.n {
            for copy in 0..aux.rank_bound() {
                aux_counts[aux.replica_index(point, copy)] = counts[point];
            }
            aux_counts[aux.label_index(point)] = u32::from(counts[point] > 0);
        }
        let verdict = aux.check_design(&AuxiliaryDesign::new(aux_counts))?;
        if !verdict.feasible() {
            return Err(Error::InfeasibleDesign(
                "solver produced a design violating the auxiliary rows".into(),
            ));
        }
    }
    Ok(())
}

/// Criterion value of integer counts through the presolved factors;
/// used by tests comparing solver routes.
pub fn counts_phi(problem: &PresolvedProblem, counts: &[u32]) -> f64 {
    let fractional: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    criterion_d(&InformationMatrix::new_unchecked(
        problem.information_matrix(&fractional),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{ConstraintSense, LinearSparsityConstraint};
    use crate::models::{InformationModel, RawMatrixModel};
    use crate::space::{DesignPoint, DesignSpace};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn univariate_problem(
        xs: &[f64],
        size: u32,
        rows: Vec<LinearSparsityConstraint>,
    ) -> LasProblem {
        let mats = xs
            .iter()
            .map(|&x| {
                let mut m = SymMatrix::zeros(2);
                m.add_scaled_outer(&[1.0, x], 1.0);
                m
            })
            .collect();
        let model = InformationModel::RawMatrices(RawMatrixModel::new(mats, 1).unwrap());
        let points = xs.iter().map(|&x| DesignPoint::scalar(x)).collect();
        LasProblem::new(DesignSpace::new(points).unwrap(), model, rows, size).unwrap()
    }

    /// Random small instance mirroring the oracle-equivalence battery:
    /// n <= 6, N <= 5, m <= 3, r <= 2, up to 3 random rows.
    fn random_instance(seed: u64) -> LasProblem {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=3usize);
        let r = rng.gen_range(1..=2usize.min(m));
        let size = rng.gen_range(1..=5u32);
        let mats: Vec<SymMatrix> = (0..n)
            .map(|_| {
                let mut h = SymMatrix::zeros(m);
                for _ in 0..r {
                    if rng.gen_bool(0.9) {
                        let g: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect();
                        h.add_scaled_outer(&g, rng.gen_range(0.1..2.0));
                    }
                }
                h
            })
            .collect();
        let model = InformationModel::RawMatrices(RawMatrixModel::new(mats, r).unwrap());
        let mut rows = Vec::new();
        for _ in 0..rng.gen_range(0..=3) {
            let a: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.6) {
                        rng.gen_range(-2.0..2.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let c: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        rng.gen_range(-2.0..2.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            // Bias right-hand sides toward feasibility without forcing it.
            let b = rng.gen_range(-1.0..(1.5 * size as f64 + 1.0));
            if let Ok(row) = LinearSparsityConstraint::new(a, c, b, ConstraintSense::Le) {
                rows.push(row);
            }
        }
        let points = (0..n).map(|i| DesignPoint::scalar(i as f64)).collect();
        LasProblem::new(DesignSpace::new(points).unwrap(), model, rows, size).unwrap()
    }

    fn exact_options() -> SolverOptions {
        SolverOptions {
            relative_gap: 0.0,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn three_point_symmetric_toy() {
        // X = {-1, 0, 1}, f = (1, x), N = 2: optimum (1, 0, 1) with M =
        // diag(2, 2), phi = 2; verified by enumerating all 6 designs.
        let problem = univariate_problem(&[-1.0, 0.0, 1.0], 2, vec![]);
        let result = solve_problem(&problem, &exact_options()).unwrap();
        assert_eq!(result.status, SolverStatus::Optimal);
        assert!((result.phi - 2.0).abs() <= 1e-9, "phi = {}", result.phi);
        assert_eq!(result.design.unwrap().counts(), &[1, 0, 1]);
        let oracle = brute_force(&problem, &exact_options()).unwrap();
        assert!((oracle.phi - 2.0).abs() <= 1e-12);
        assert_eq!(oracle.design.unwrap().counts(), &[1, 0, 1]);
    }

    #[test]
    fn two_point_toy() {
        // X = {0, 1}, N = 2: designs (2,0) and (0,2) are singular, (1,1)
        // gives det 1.
        let problem = univariate_problem(&[0.0, 1.0], 2, vec![]);
        let result = solve_problem(&problem, &exact_options()).unwrap();
        assert!((result.phi - 1.0).abs() <= 1e-9);
        assert_eq!(result.design.unwrap().counts(), &[1, 1]);
    }

    #[test]
    fn relaxation_two_point_symmetric() {
        // Continuous optimum of the size-only two-point problem splits the
        // mass evenly: log det = log 4.
        let problem = univariate_problem(&[-1.0, 1.0], 2, vec![]);
        let aux = build_auxiliary(&problem, FactorRoute::Eigen).unwrap();
        let presolved = presolve(&aux).unwrap();
        let (lower, upper) = presolved.root_bounds();
        let outcome =
            solve_relaxation(&presolved, &lower, &upper, 500, 1e-9, 7).unwrap();
        let relax = match outcome {
            RelaxOutcome::Feasible(r) => r,
            RelaxOutcome::Infeasible => panic!("feasible box"),
        };
        assert!((relax.counts[0] - 1.0).abs() <= 1e-5, "{:?}", relax.counts);
        assert!((relax.counts[1] - 1.0).abs() <= 1e-5);
        assert!((relax.log_det - 4.0_f64.ln()).abs() <= 1e-8);
        assert!(relax.bound_log >= relax.log_det - 1e-12);
        // The iterate satisfies the rows.
        let total: f64 = relax.counts.iter().sum();
        assert!((total - 2.0).abs() <= 1e-8);
    }

    #[test]
    fn relaxation_dominates_integer_designs() {
        let mut rng = StdRng::seed_from_u64(5);
        for seed in 0..20 {
            let problem = random_instance(7000 + seed);
            let aux = build_auxiliary(&problem, FactorRoute::Eigen).unwrap();
            let presolved = presolve(&aux).unwrap();
            if presolved.infeasible {
                continue;
            }
            let (lower, upper) = presolved.root_bounds();
            let outcome = solve_relaxation(&presolved, &lower, &upper, 400, 1e-8, 3).unwrap();
            let relax = match outcome {
                RelaxOutcome::Feasible(r) => r,
                RelaxOutcome::Infeasible => continue,
            };
            // Random feasible integer designs never beat the bound.
            for _ in 0..50 {
                let mut counts = vec![0u32; problem.num_points()];
                for _ in 0..problem.size() {
                    let i = rng.gen_range(0..problem.num_points());
                    counts[i] += 1;
                }
                let design = ExactDesign::new(counts);
                if !problem.check_feasible(&design).unwrap().feasible() {
                    continue;
                }
                let phi = problem.criterion_value(&design).unwrap();
                let bound_phi = phi_of_log(relax.bound_log, problem.dim());
                assert!(
                    phi <= bound_phi + 1e-8 * (1.0 + bound_phi),
                    "seed {seed}: phi {phi} beats bound {bound_phi}"
                );
            }
        }
    }

    #[test]
    fn relaxation_reports_infeasible_polytope() {
        // Force at least 3 trials at the first point while N = 2.
        let row = LinearSparsityConstraint::new(
            vec![-1.0, 0.0],
            vec![0.0, 0.0],
            -3.0,
            ConstraintSense::Le,
        )
        .unwrap();
        let problem = univariate_problem(&[0.0, 1.0], 2, vec![row]);
        let aux = build_auxiliary(&problem, FactorRoute::Eigen).unwrap();
        let presolved = presolve(&aux).unwrap();
        let (lower, upper) = presolved.root_bounds();
        if presolved.infeasible {
            return; // folded into the boxes already
        }
        match solve_relaxation(&presolved, &lower, &upper, 100, 1e-8, 3).unwrap() {
            RelaxOutcome::Infeasible => {}
            RelaxOutcome::Feasible(r) => panic!("expected infeasible, got {r:?}"),
        }
    }

    #[test]
    fn solver_reports_infeasible_problem() {
        let row = LinearSparsityConstraint::new(
            vec![-1.0, -1.0],
            vec![0.0, 0.0],
            -9.0,
            ConstraintSense::Le,
        )
        .unwrap();
        let problem = univariate_problem(&[0.0, 1.0], 2, vec![row]);
        let result = solve_problem(&problem, &exact_options()).unwrap();
        assert_eq!(result.status, SolverStatus::Infeasible);
        assert!(result.design.is_none());
        let oracle = brute_force(&problem, &exact_options()).unwrap();
        assert_eq!(oracle.status, SolverStatus::Infeasible);
    }

    #[test]
    fn brute_force_empty_design_edge() {
        let problem = univariate_problem(&[0.0, 1.0], 0, vec![]);
        let result = brute_force(&problem, &exact_options()).unwrap();
        assert_eq!(result.status, SolverStatus::Optimal);
        assert_eq!(result.phi, 0.0);
        assert_eq!(result.design.unwrap().counts(), &[0, 0]);
    }

    #[test]
    fn brute_force_refuses_huge_spaces() {
        let problem = univariate_problem(
            &(0..40).map(|i| i as f64).collect::<Vec<_>>(),
            30,
            vec![],
        );
        let err = brute_force(&problem, &exact_options());
        assert!(matches!(err, Err(Error::EnumerationTooLarge { .. })));
    }

    #[test]
    fn brute_force_reports_ties() {
        // Symmetric instance: (1,0,1) mirrored designs tie.
        let problem = univariate_problem(&[-1.0, 0.0, 1.0], 3, vec![]);
        let result = brute_force(&problem, &exact_options()).unwrap();
        assert!(
            result.ties.len() >= 2,
            "expected symmetric ties, got {:?}",
            result.ties
        );
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut solved = 0;
        for seed in 0..40 {
            let problem = random_instance(seed);
            let oracle = brute_force(&problem, &exact_options()).unwrap();
            let result = solve_problem(&problem, &exact_options()).unwrap();
            match oracle.status {
                SolverStatus::Infeasible => {
                    assert_eq!(
                        result.status,
                        SolverStatus::Infeasible,
                        "seed {seed}: solver disagrees on feasibility"
                    );
                }
                _ => {
                    assert_eq!(result.status, SolverStatus::Optimal, "seed {seed}");
                    assert!(
                        (result.phi - oracle.phi).abs() <= 1e-9 * (1.0 + oracle.phi),
                        "seed {seed}: bb {} vs oracle {}",
                        result.phi,
                        oracle.phi
                    );
                    let design = result.design.unwrap();
                    assert!(problem.check_feasible(&design).unwrap().feasible());
                    solved += 1;
                }
            }
        }
        assert!(solved >= 20, "only {solved} feasible instances");
    }

    #[test]
    fn deterministic_runs_are_identical() {
        let problem = random_instance(123);
        let options = SolverOptions {
            relative_gap: 0.0,
            record_trace: true,
            ..SolverOptions::default()
        };
        let a = solve_problem(&problem, &options).unwrap();
        let b = solve_problem(&problem, &options).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.phi, b.phi);
        assert_eq!(
            a.design.map(|d| d.counts().to_vec()),
            b.design.map(|d| d.counts().to_vec())
        );
    }

    #[test]
    fn incumbent_is_monotone() {
        for seed in [11, 77, 301] {
            let problem = random_instance(seed);
            let options = SolverOptions {
                relative_gap: 0.0,
                record_trace: true,
                ..SolverOptions::default()
            };
            let result = solve_problem(&problem, &options).unwrap();
            let mut last = 0.0;
            for entry in &result.trace {
                assert!(
                    entry.incumbent_phi >= last - 1e-15,
                    "seed {seed}: incumbent regressed"
                );
                last = entry.incumbent_phi;
            }
        }
    }

    #[test]
    fn parallel_wave_matches_serial() {
        for seed in [4, 9] {
            let problem = random_instance(seed);
            let serial = solve_problem(&problem, &exact_options()).unwrap();
            let parallel = solve_problem(
                &problem,
                &SolverOptions {
                    relative_gap: 0.0,
                    deterministic: false,
                    threads: 4,
                    ..SolverOptions::default()
                },
            )
            .unwrap();
            assert_eq!(serial.status, parallel.status, "seed {seed}");
            if serial.status == SolverStatus::Optimal {
                assert!(
                    (serial.phi - parallel.phi).abs() <= 1e-9 * (1.0 + serial.phi),
                    "seed {seed}: serial {} parallel {}",
                    serial.phi,
                    parallel.phi
                );
            }
        }
    }

    #[test]
    fn rounding_incumbent_never_beats_oracle() {
        for seed in 200..260 {
            let problem = random_instance(seed);
            let aux = build_auxiliary(&problem, FactorRoute::Eigen).unwrap();
            let presolved = presolve(&aux).unwrap();
            if presolved.infeasible {
                continue;
            }
            let (lower, upper) = presolved.root_bounds();
            let relax = match solve_relaxation(&presolved, &lower, &upper, 200, 1e-7, 3).unwrap() {
                RelaxOutcome::Feasible(r) => r,
                RelaxOutcome::Infeasible => continue,
            };
            if let Some((counts, _)) =
                rounding_incumbent(&relax, &presolved, 4 * presolved.num_points())
            {
                let design = ExactDesign::new(counts);
                assert!(
                    problem.check_feasible(&design).unwrap().feasible(),
                    "seed {seed}: rounding produced infeasible design"
                );
                let phi = problem.criterion_value(&design).unwrap();
                let oracle = brute_force(&problem, &exact_options()).unwrap();
                assert!(
                    phi <= oracle.phi + 1e-9 * (1.0 + oracle.phi),
                    "seed {seed}: incumbent {phi} beats oracle {}",
                    oracle.phi
                );
            }
        }
    }
}

