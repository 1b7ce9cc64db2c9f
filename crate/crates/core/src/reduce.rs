//! Compilation of a constrained multiresponse design problem into an
//! equivalent univariate-response problem under purely linear constraints.
//!
//! Every design point `x_i` is expanded into `r` replica points carrying the
//! rank-one factors of `H(x_i)` plus one zero-regressor label point `z_i`
//! whose 0/1 count tracks whether `x_i` is in the support. Structural rows
//! tie the pieces together:
//!
//! * replica equality: `w'(x_i,1) = ... = w'(x_i,r)`,
//! * label cap: `w'(z_i) <= 1`,
//! * big-M linking with `M = N`: `w'(z_i) <= w'(x_i,1) <= N w'(z_i)`,
//! * each original row with the count coefficients moved onto the first
//!   replica and the support coefficients onto the label,
//! * the size equality `Σ_i w'(x_i,1) = N`.
//!
//! Feasible auxiliary designs are in bijection with feasible designs of the
//! source problem via [`kappa`] (read off the first replica counts), and the
//! objectives agree, so solving the auxiliary problem solves the original.

use crate::decompose::{factors, FactorRoute};
use crate::design::ExactDesign;
use crate::error::Error;
use crate::linalg::SymMatrix;
use crate::problem::{criterion_d, InformationMatrix, LasProblem};

/// Role of an auxiliary design point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuxPointKind {
    /// Replica `(x_i, j)`; `point` and `copy` are 0-based (`copy = 0` is the
    /// distinguished first replica).
    Replica { point: usize, copy: usize },
    /// Label `z_i` with an all-zero regressor.
    Label { point: usize },
}

/// Role of an auxiliary constraint row, in emission order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuxRowKind {
    /// `w'(x_i,1) - w'(x_i,j) = 0`.
    ReplicaEquality { point: usize, copy: usize },
    /// `w'(z_i) <= 1`.
    LabelCap { point: usize },
    /// `w'(z_i) - w'(x_i,1) <= 0`.
    LinkLower { point: usize },
    /// `w'(x_i,1) - N w'(z_i) <= 0`.
    LinkUpper { point: usize },
    /// Mapped source row `k` (index into [`LasProblem::rows`]).
    Las { index: usize },
    /// The dedicated size equality.
    Size,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuxSense {
    Le,
    Eq,
}

/// One linear row over the auxiliary points, sparse `(index, coefficient)`
/// pairs sorted by index.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub sense: AuxSense,
    pub kind: AuxRowKind,
}

impl AuxRow {
    pub fn activity(&self, counts: &[u32]) -> f64 {
        self.coeffs
            .iter()
            .map(|&(i, a)| a * counts[i] as f64)
            .sum()
    }

    pub fn satisfied(&self, counts: &[u32]) -> bool {
        let act = self.activity(counts);
        match self.sense {
            AuxSense::Le => act <= self.rhs + 1e-9,
            AuxSense::Eq => (act - self.rhs).abs() <= 1e-9,
        }
    }
}

/// The compiled auxiliary problem. Points are ordered replicas-first
/// (lexicographic in `(point, copy)`), then labels.
#[derive(Clone, Debug)]
pub struct AuxiliaryProblem {
    n: usize,
    r: usize,
    m: usize,
    size: u32,
    kinds: Vec<AuxPointKind>,
    regressors: Vec<Vec<f64>>,
    rows: Vec<AuxRow>,
    origin: Option<LasProblem>,
}

impl AuxiliaryProblem {
    /// Number of source points.
    pub fn source_len(&self) -> usize {
        self.n
    }

    /// Shared rank bound `r`.
    pub fn rank_bound(&self) -> usize {
        self.r
    }

    /// Parameter dimension `m`.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Design size `N`.
    pub fn size(&self) -> u32 {
        self.size
    }

    /// Total number of auxiliary points `n' = n r + n`.
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[AuxPointKind] {
        &self.kinds
    }

    pub fn regressor(&self, i: usize) -> &[f64] {
        &self.regressors[i]
    }

    pub fn regressors(&self) -> &[Vec<f64>] {
        &self.regressors
    }

    /// Structural and mapped rows, excluding the size equality.
    pub fn rows(&self) -> &[AuxRow] {
        &self.rows
    }

    /// The source problem, when this instance was compiled in-process.
    pub fn origin(&self) -> Option<&LasProblem> {
        self.origin.as_ref()
    }

    /// Index of replica `(point, copy)`, 0-based.
    pub fn replica_index(&self, point: usize, copy: usize) -> usize {
        point * self.r + copy
    }

    /// Index of label `z_point`.
    pub fn label_index(&self, point: usize) -> usize {
        self.n * self.r + point
    }

    /// The dedicated size equality `Σ_i w'(x_i,1) = N`.
    pub fn size_row(&self) -> AuxRow {
        AuxRow {
            coeffs: (0..self.n)
                .map(|i| (self.replica_index(i, 0), 1.0))
                .collect(),
            rhs: self.size as f64,
            sense: AuxSense::Eq,
            kind: AuxRowKind::Size,
        }
    }

    /// Upper bound on each auxiliary count implied by the structure:
    /// `N` for replicas, 1 for labels.
    pub fn count_bound(&self, i: usize) -> u32 {
        match self.kinds[i] {
            AuxPointKind::Replica { .. } => self.size,
            AuxPointKind::Label { .. } => 1,
        }
    }

    /// Checks an auxiliary design against every row and the size equality.
    pub fn check_design(&self, design: &AuxiliaryDesign) -> Result<AuxFeasibility, Error> {
        if design.counts.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "auxiliary design counts",
                expected: self.len(),
                got: design.counts.len(),
            });
        }
        let violated: Vec<usize> = self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, row)| !row.satisfied(&design.counts))
            .map(|(k, _)| k)
            .collect();
        let size_total: u64 = (0..self.n)
            .map(|i| design.counts[self.replica_index(i, 0)] as u64)
            .sum();
        Ok(AuxFeasibility {
            size_ok: size_total == self.size as u64,
            violated_rows: violated,
        })
    }

    /// Objective of an auxiliary design: the criterion of
    /// `Σ_{i'} w'(x'_{i'}) f'(x'_{i'}) f'ᵀ(x'_{i'})`. Label points carry zero
    /// regressors and contribute nothing regardless of their counts.
    pub fn objective(&self, design: &AuxiliaryDesign) -> Result<f64, Error> {
        if design.counts.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "auxiliary design counts",
                expected: self.len(),
                got: design.counts.len(),
            });
        }
        let mut m = SymMatrix::zeros(self.m);
        for (i, &count) in design.counts.iter().enumerate() {
            if count > 0 {
                m.add_scaled_outer(&self.regressors[i], count as f64);
            }
        }
        Ok(criterion_d(&InformationMatrix::new_unchecked(m)))
    }
}

/// Feasibility verdict for an auxiliary design.
#[derive(Clone, Debug)]
pub struct AuxFeasibility {
    pub size_ok: bool,
    pub violated_rows: Vec<usize>,
}

impl AuxFeasibility {
    pub fn feasible(&self) -> bool {
        self.size_ok && self.violated_rows.is_empty()
    }
}

/// Counts over the auxiliary points.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AuxiliaryDesign {
    counts: Vec<u32>,
}

impl AuxiliaryDesign {
    pub fn new(counts: Vec<u32>) -> Self {
        AuxiliaryDesign { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
}

/// Compiles the problem into its auxiliary form, factoring every elementary
/// matrix through the chosen route.
pub fn build_auxiliary(
    problem: &LasProblem,
    route: FactorRoute,
) -> Result<AuxiliaryProblem, Error> {
    let n = problem.num_points();
    let r = problem.rank_bound();
    let m = problem.dim();
    let size = problem.size();

    let mut kinds = Vec::with_capacity(n * r + n);
    let mut regressors = Vec::with_capacity(n * r + n);
    for point in 0..n {
        let f = factors(problem.elementary(point), r, route)?;
        for (copy, vector) in f.vectors().iter().enumerate() {
            kinds.push(AuxPointKind::Replica { point, copy });
            regressors.push(vector.clone());
        }
    }
    for point in 0..n {
        kinds.push(AuxPointKind::Label { point });
        regressors.push(vec![0.0; m]);
    }

    let replica = |point: usize, copy: usize| point * r + copy;
    let label = |point: usize| n * r + point;

    let mut rows = Vec::new();
    // Replica equalities.
    for point in 0..n {
        for copy in 1..r {
            rows.push(AuxRow {
                coeffs: vec![(replica(point, 0), 1.0), (replica(point, copy), -1.0)],
                rhs: 0.0,
                sense: AuxSense::Eq,
                kind: AuxRowKind::ReplicaEquality { point, copy },
            });
        }
    }
    // Label caps.
    for point in 0..n {
        rows.push(AuxRow {
            coeffs: vec![(label(point), 1.0)],
            rhs: 1.0,
            sense: AuxSense::Le,
            kind: AuxRowKind::LabelCap { point },
        });
    }
    // Big-M linking, M = N.
    for point in 0..n {
        let mut lower = vec![(replica(point, 0), -1.0), (label(point), 1.0)];
        lower.sort_by_key(|&(i, _)| i);
        rows.push(AuxRow {
            coeffs: lower,
            rhs: 0.0,
            sense: AuxSense::Le,
            kind: AuxRowKind::LinkLower { point },
        });
        let mut upper = vec![(replica(point, 0), 1.0), (label(point), -(size as f64))];
        upper.sort_by_key(|&(i, _)| i);
        rows.push(AuxRow {
            coeffs: upper,
            rhs: 0.0,
            sense: AuxSense::Le,
            kind: AuxRowKind::LinkUpper { point },
        });
    }
    // Mapped source rows: counts ride on the first replicas, support
    // indicators on the labels.
    for (k, row) in problem.rows().iter().enumerate() {
        let mut coeffs = Vec::new();
        for point in 0..n {
            let a = row.count_coeffs[point];
            if a != 0.0 {
                coeffs.push((replica(point, 0), a));
            }
        }
        for point in 0..n {
            let c = row.support_coeffs[point];
            if c != 0.0 {
                coeffs.push((label(point), c));
            }
        }
        coeffs.sort_by_key(|&(i, _)| i);
        rows.push(AuxRow {
            coeffs,
            rhs: row.rhs,
            sense: AuxSense::Le,
            kind: AuxRowKind::Las { index: k },
        });
    }

    Ok(AuxiliaryProblem {
        n,
        r,
        m,
        size,
        kinds,
        regressors,
        rows,
        origin: Some(problem.clone()),
    })
}

/// Assembles an auxiliary problem from parsed parts (no source back-reference).
pub(crate) fn assemble_auxiliary(
    n: usize,
    r: usize,
    m: usize,
    size: u32,
    kinds: Vec<AuxPointKind>,
    regressors: Vec<Vec<f64>>,
    rows: Vec<AuxRow>,
) -> AuxiliaryProblem {
    AuxiliaryProblem {
        n,
        r,
        m,
        size,
        kinds,
        regressors,
        rows,
        origin: None,
    }
}

/// Maps a feasible auxiliary design back to the source space by reading off
/// the first-replica counts. Rejects infeasible input.
pub fn kappa(design: &AuxiliaryDesign, aux: &AuxiliaryProblem) -> Result<ExactDesign, Error> {
    let verdict = aux.check_design(design)?;
    if !verdict.feasible() {
        return Err(Error::InfeasibleDesign(format!(
            "auxiliary design violates rows {:?} (size ok: {})",
            verdict.violated_rows, verdict.size_ok
        )));
    }
    Ok(ExactDesign::new(
        (0..aux.n)
            .map(|i| design.counts[aux.replica_index(i, 0)])
            .collect(),
    ))
}

/// Lifts a feasible source design into the auxiliary space: all replicas of
/// a point carry its count, the label carries its support indicator.
pub fn lift(design: &ExactDesign, aux: &AuxiliaryProblem) -> Result<AuxiliaryDesign, Error> {
    let origin = aux
        .origin
        .as_ref()
        .ok_or_else(|| Error::InvalidAuxiliary("cannot lift without the source problem".into()))?;
    let report = origin.check_feasible(design)?;
    if !report.feasible() {
        return Err(Error::InfeasibleDesign(format!(
            "size deviation {}, {} violated rows",
            report.size_deviation,
            report.violations.len()
        )));
    }
    let mut counts = vec![0u32; aux.len()];
    for point in 0..aux.n {
        let w = design.count(point);
        for copy in 0..aux.r {
            counts[aux.replica_index(point, copy)] = w;
        }
        counts[aux.label_index(point)] = u32::from(w > 0);
    }
    let lifted = AuxiliaryDesign::new(counts);
    debug_assert!(aux.check_design(&lifted)?.feasible());
    Ok(lifted)
}

/// Exhaustively enumerates the feasible auxiliary designs by depth-first
/// assignment with per-row interval pruning. `cap` bounds the number of
/// visited partial assignments; exceeding it aborts with an error.
pub fn enumerate_feasible(aux: &AuxiliaryProblem, cap: u64) -> Result<Vec<AuxiliaryDesign>, Error> {
    let nvars = aux.len();
    let bounds: Vec<u32> = (0..nvars).map(|i| aux.count_bound(i)).collect();

    // All rows including the size equality, densified for suffix bounds.
    let mut dense_rows: Vec<(Vec<f64>, f64, AuxSense)> = Vec::with_capacity(aux.rows.len() + 1);
    let size_row = aux.size_row();
    for row in aux.rows.iter().chain(std::iter::once(&size_row)) {
        let mut dense = vec![0.0; nvars];
        for &(i, a) in &row.coeffs {
            dense[i] += a;
        }
        dense_rows.push((dense, row.rhs, row.sense));
    }
    // Least/greatest possible contribution of the still-unassigned suffix.
    let mut suffix_min = vec![vec![0.0; nvars + 1]; dense_rows.len()];
    let mut suffix_max = vec![vec![0.0; nvars + 1]; dense_rows.len()];
    for (k, (dense, _, _)) in dense_rows.iter().enumerate() {
        for t in (0..nvars).rev() {
            let reach = dense[t] * bounds[t] as f64;
            suffix_min[k][t] = suffix_min[k][t + 1] + reach.min(0.0);
            suffix_max[k][t] = suffix_max[k][t + 1] + reach.max(0.0);
        }
    }

    struct Ctx<'a> {
        nvars: usize,
        bounds: &'a [u32],
        rows: &'a [(Vec<f64>, f64, AuxSense)],
        suffix_min: &'a [Vec<f64>],
        suffix_max: &'a [Vec<f64>],
        counts: Vec<u32>,
        activities: Vec<f64>,
        out: Vec<AuxiliaryDesign>,
        visited: u64,
        cap: u64,
    }

    fn dfs(ctx: &mut Ctx, t: usize) -> Result<(), Error> {
        ctx.visited += 1;
        if ctx.visited > ctx.cap {
            return Err(Error::EnumerationTooLarge {
                estimate: ctx.visited as f64,
                cap: ctx.cap,
            });
        }
        for (k, (_, rhs, sense)) in ctx.rows.iter().enumerate() {
            let lo = ctx.activities[k] + ctx.suffix_min[k][t];
            let hi = ctx.activities[k] + ctx.suffix_max[k][t];
            let dead = match sense {
                AuxSense::Le => lo > rhs + 1e-9,
                AuxSense::Eq => lo > rhs + 1e-9 || hi < rhs - 1e-9,
            };
            if dead {
                return Ok(());
            }
        }
        if t == ctx.nvars {
            let design = AuxiliaryDesign::new(ctx.counts.clone());
            ctx.out.push(design);
            return Ok(());
        }
        for v in 0..=ctx.bounds[t] {
            ctx.counts[t] = v;
            for k in 0..ctx.rows.len() {
                ctx.activities[k] += ctx.rows[k].0[t] * v as f64;
            }
            dfs(ctx, t + 1)?;
            for k in 0..ctx.rows.len() {
                ctx.activities[k] -= ctx.rows[k].0[t] * v as f64;
            }
            ctx.counts[t] = 0;
        }
        Ok(())
    }

    let mut ctx = Ctx {
        nvars,
        bounds: &bounds,
        rows: &dense_rows,
        suffix_min: &suffix_min,
        suffix_max: &suffix_max,
        counts: vec![0; nvars],
        activities: vec![0.0; dense_rows.len()],
        out: Vec::new(),
        visited: 0,
        cap,
    };
    dfs(&mut ctx, 0)?;
    Ok(ctx.out)
}
