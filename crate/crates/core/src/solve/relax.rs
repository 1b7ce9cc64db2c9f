//! Continuous relaxation of a node: maximize `log det M(w)` over the node's
//! polytope by conditional-gradient (Frank-Wolfe) iterations.
//!
//! Each iteration linearizes the objective at the current point — the
//! gradient with respect to a count is `tr(M⁻¹ H_i) = Σ_j ‖L⁻¹ f_ij‖²`
//! through the rank-one factors — and maximizes that linear function over
//! the polytope with the simplex, yielding a vertex `v`. The duality gap
//! `∇f · (v - x)` bounds how far the current value can be from the
//! continuous optimum, so `f(x) + gap` is a valid node bound at every
//! iteration, converged or not. The step size along `v - x` is an exact
//! line search: with `μ_k` the eigenvalues of `L⁻¹ ΔM L⁻ᵀ`, the objective
//! along the segment is `Σ log(1 + t μ_k)` up to a constant, and its
//! derivative is monotone, so a bisection pins the maximizer.
//!
//! When the starting matrix is singular the node switches to the ridged
//! objective `log det(M + εI)` with `ε = 1e-10` on the trace scale, used for
//! gradients and steps. Since `log det M <= log det(M + εI)` pointwise, a
//! bound proved for the ridged objective is one-sidedly valid for the true
//! one; the reported objective value stays the true (possibly `-inf`) one.

use super::lp::{solve_lp, LinearProgram, LpOutcome};
use super::PresolvedProblem;
use crate::error::Error;
use crate::linalg::{dot, Cholesky, SymMatrix};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fractional solution of a node relaxation.
#[derive(Clone, Debug)]
pub struct RelaxationResult {
    pub counts: Vec<f64>,
    pub indicators: Vec<f64>,
    /// True `log det M` at the final iterate; `-inf` when singular.
    pub log_det: f64,
    /// Criterion scale of `log_det`.
    pub phi: f64,
    /// Remaining duality gap of the (possibly ridged) objective.
    pub fw_gap: f64,
    /// Valid upper bound on `log det M` over the whole node polytope.
    pub bound_log: f64,
    pub iterations: usize,
    /// Ridge actually applied, 0 when the plain objective was usable.
    pub ridge: f64,
}

#[derive(Clone, Debug)]
pub enum RelaxOutcome {
    Feasible(Box<RelaxationResult>),
    Infeasible,
}

/// Builds the node LP skeleton: presolved rows plus the size equality over
/// boxes `[lower, upper]`.
fn node_lp(problem: &PresolvedProblem, lower: &[u32], upper: &[u32]) -> LinearProgram {
    let nvars = problem.num_vars();
    let mut rows = problem.rows().to_vec();
    rows.push(problem.size_row());
    LinearProgram {
        objective: vec![0.0; nvars],
        rows,
        lower: lower.iter().map(|&v| v as f64).collect(),
        upper: upper.iter().map(|&v| v as f64).collect(),
    }
}

fn information_with_ridge(problem: &PresolvedProblem, counts: &[f64], ridge: f64) -> SymMatrix {
    let mut m = problem.information_matrix(counts);
    if ridge > 0.0 {
        for i in 0..m.dim() {
            let v = m.get(i, i) + ridge;
            m.set(i, i, v);
        }
    }
    m
}

/// Gradient of `log det` with respect to the counts, pushed through the
/// rank-one factors; indicator components are zero.
fn gradient(problem: &PresolvedProblem, chol: &Cholesky) -> Vec<f64> {
    let n = problem.num_points();
    let mut g = vec![0.0; 2 * n];
    for (i, factors) in problem.factors().iter().enumerate() {
        let mut total = 0.0;
        for f in factors {
            if f.iter().any(|&v| v != 0.0) {
                total += chol.quad_form_inv(f);
            }
        }
        g[i] = total;
    }
    g
}

/// Exact line search for `t ↦ Σ log(1 + t μ_k)` on `[0, 1]`.
fn line_search(mu: &[f64]) -> f64 {
    let mut t_upper = 1.0_f64;
    for &m in mu {
        if m < 0.0 {
            // Stay strictly inside the pole at -1/μ.
            t_upper = t_upper.min(-(1.0 - 1e-9) / m);
        }
    }
    if t_upper <= 0.0 {
        return 0.0;
    }
    let slope = |t: f64| -> f64 { mu.iter().map(|&m| m / (1.0 + t * m)).sum() };
    if slope(t_upper) >= 0.0 {
        return t_upper;
    }
    if slope(0.0) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, t_upper);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Solves the node relaxation. Returns `Infeasible` when the polytope is
/// empty; otherwise iterates until the relative duality gap reaches
/// `gap_tol` or `iter_cap` iterations, whichever comes first. The returned
/// bound is valid in either case.
pub fn solve_relaxation(
    problem: &PresolvedProblem,
    lower: &[u32],
    upper: &[u32],
    iter_cap: usize,
    gap_tol: f64,
    seed: u64,
) -> Result<RelaxOutcome, Error> {
    let n = problem.num_points();
    let nvars = problem.num_vars();
    let mut lp = node_lp(problem, lower, upper);

    // Starting point: average a few vertices with randomized objectives —
    // cheap stand-in for an analytic center, deterministic via the seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; nvars];
    let mut vertices = 0usize;
    for round in 0..5 {
        for c in lp.objective.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        match solve_lp(&lp)? {
            LpOutcome::Optimal(sol) => {
                for (acc, v) in x.iter_mut().zip(&sol.x) {
                    *acc += v;
                }
                vertices += 1;
            }
            LpOutcome::Infeasible(_) => return Ok(RelaxOutcome::Infeasible),
        }
        // Three vertices usually give a nonsingular average; take two more
        // only if needed.
        if round == 2 && vertices == 3 {
            let probe: Vec<f64> = x[..n].iter().map(|v| v / 3.0).collect();
            if problem.information_matrix(&probe).cholesky().is_some() {
                break;
            }
        }
    }
    for v in x.iter_mut() {
        *v /= vertices as f64;
    }

    // Ridge only when the start is singular; `log det(M + εI)` then stands
    // in for the objective and its bound dominates the true one.
    let mut ridge = 0.0;
    if information_with_ridge(problem, &x[..n], 0.0)
        .cholesky()
        .is_none()
    {
        let trace = problem.information_matrix(&x[..n]).trace();
        ridge = 1e-10 * (trace / problem.dim() as f64).max(1.0);
    }

    let mut best_bound = f64::INFINITY;
    let mut last_gap = f64::INFINITY;
    let mut iterations = 0;
    for iter in 0..iter_cap.max(1) {
        iterations = iter + 1;
        let m_mat = information_with_ridge(problem, &x[..n], ridge);
        let chol = match m_mat.cholesky() {
            Some(c) => c,
            None => {
                // Ascent should keep the iterate nonsingular; if round-off
                // still breaks the factorization, enlarge the ridge.
                ridge = (ridge * 10.0).max(1e-10);
                continue;
            }
        };
        let objective = chol.log_det();
        let g = gradient(problem, &chol);
        lp.objective.copy_from_slice(&g);
        let vertex = match solve_lp(&lp)? {
            LpOutcome::Optimal(sol) => sol.x,
            LpOutcome::Infeasible(_) => {
                return Err(Error::LpFailure(
                    "polytope lost feasibility mid-relaxation".into(),
                ))
            }
        };
        let direction: Vec<f64> = vertex.iter().zip(&x).map(|(v, xi)| v - xi).collect();
        let gap = dot(&g, &direction).max(0.0);
        last_gap = gap;
        best_bound = best_bound.min(objective + gap);
        if gap <= gap_tol * (1.0 + objective.abs()) {
            break;
        }

        let mut delta = SymMatrix::zeros(problem.dim());
        for (i, d) in direction[..n].iter().enumerate() {
            if *d != 0.0 {
                delta.add_scaled(problem.elementary(i), *d);
            }
        }
        let mu = chol.whiten(&delta).eigh().values;
        let t = line_search(&mu);
        if t <= 0.0 {
            break;
        }
        for (xi, d) in x.iter_mut().zip(&direction) {
            *xi += t * d;
        }
        // Guard against drift outside the box.
        for j in 0..nvars {
            x[j] = x[j].clamp(lp.lower[j], lp.upper[j]);
        }
    }

    let counts = x[..n].to_vec();
    let indicators = x[n..].to_vec();
    let log_det = crate::problem::log_det_psd(&problem.information_matrix(&counts))
        .unwrap_or(f64::NEG_INFINITY);
    let phi = super::phi_of_log(log_det, problem.dim());
    Ok(RelaxOutcome::Feasible(Box::new(RelaxationResult {
        counts,
        indicators,
        log_det,
        phi,
        fw_gap: last_gap,
        bound_log: best_bound,
        iterations,
        ridge,
    })))
}
