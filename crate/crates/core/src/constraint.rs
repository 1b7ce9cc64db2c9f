//! Linear and sparsity constraint rows and their named builders.
//!
//! A row couples the counts `w` and the support indicator `s_w`:
//!
//! ```text
//! Σ_i a(x_i) w(x_i) + Σ_i c(x_i) s_w(x_i)  ≤/=  b
//! ```
//!
//! `a` carries per-trial coefficients, `c` per-distinct-point coefficients.
//! Builders produce rows already normalized to `≤` form; lower bounds are
//! negated on the way in.

use crate::error::Error;

/// Absolute tolerance for inequality feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintSense {
    Le,
    Eq,
}

/// One linear-and-sparsity row.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSparsityConstraint {
    /// Coefficients on the counts, one per design point.
    pub count_coeffs: Vec<f64>,
    /// Coefficients on the support indicators, one per design point.
    pub support_coeffs: Vec<f64>,
    pub rhs: f64,
    pub sense: ConstraintSense,
}

impl LinearSparsityConstraint {
    pub fn new(
        count_coeffs: Vec<f64>,
        support_coeffs: Vec<f64>,
        rhs: f64,
        sense: ConstraintSense,
    ) -> Result<Self, Error> {
        if count_coeffs.len() != support_coeffs.len() {
            return Err(Error::LengthMismatch {
                what: "constraint coefficients",
                expected: count_coeffs.len(),
                got: support_coeffs.len(),
            });
        }
        if count_coeffs
            .iter()
            .chain(&support_coeffs)
            .any(|v| !v.is_finite())
            || !rhs.is_finite()
        {
            return Err(Error::NonFiniteCoefficient);
        }
        if count_coeffs
            .iter()
            .chain(&support_coeffs)
            .all(|&v| v == 0.0)
        {
            return Err(Error::ZeroConstraint);
        }
        Ok(LinearSparsityConstraint {
            count_coeffs,
            support_coeffs,
            rhs,
            sense,
        })
    }

    /// `≤` row touching only the counts.
    pub fn linear(count_coeffs: Vec<f64>, rhs: f64) -> Result<Self, Error> {
        let n = count_coeffs.len();
        Self::new(count_coeffs, vec![0.0; n], rhs, ConstraintSense::Le)
    }

    pub fn dim(&self) -> usize {
        self.count_coeffs.len()
    }

    /// Left-hand side value at the given counts and support indicator.
    pub fn activity(&self, counts: &[u32], indicator: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.count_coeffs.len() {
            total += self.count_coeffs[i] * counts[i] as f64;
            total += self.support_coeffs[i] * indicator[i];
        }
        total
    }

    /// `rhs - activity`; negative means violated for a `≤` row.
    pub fn slack(&self, counts: &[u32], indicator: &[f64]) -> f64 {
        self.rhs - self.activity(counts, indicator)
    }

    /// Whether the row holds within [`FEASIBILITY_TOL`].
    pub fn satisfied(&self, counts: &[u32], indicator: &[f64]) -> bool {
        let slack = self.slack(counts, indicator);
        match self.sense {
            ConstraintSense::Le => slack >= -FEASIBILITY_TOL,
            ConstraintSense::Eq => slack.abs() <= FEASIBILITY_TOL,
        }
    }
}

/// A violated row in a [`FeasibilityReport`]: which row, its left-hand side,
/// and the (negative) slack.
#[derive(Clone, Debug)]
pub struct RowViolation {
    pub row: usize,
    pub activity: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Outcome of checking a design against a problem. Infeasibility is data,
/// not an error.
#[derive(Clone, Debug)]
pub struct FeasibilityReport {
    /// Difference `total - N`; the size equality is checked exactly.
    pub size_deviation: i64,
    pub violations: Vec<RowViolation>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.size_deviation == 0 && self.violations.is_empty()
    }
}

fn check_finite(what: &'static str, coeffs: &[f64]) -> Result<(), Error> {
    if coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCoefficient);
    }
    let _ = what;
    Ok(())
}

/// Exclusion (resource) row: non-negative per-trial coefficients, positive
/// bound. Limits trials in the weighted region.
pub fn exclusion(count_coeffs: Vec<f64>, bound: f64) -> Result<LinearSparsityConstraint, Error> {
    check_finite("exclusion", &count_coeffs)?;
    if count_coeffs.iter().any(|&v| v < 0.0) || bound <= 0.0 {
        return Err(Error::InvalidConstraint(
            "exclusion requires coefficients >= 0 and bound > 0".into(),
        ));
    }
    LinearSparsityConstraint::linear(count_coeffs, bound)
}

/// Inclusion row: non-positive coefficients, negative bound. Forces trials
/// into the weighted region (e.g. `w(x_i) >= k` as `-w(x_i) <= -k`).
pub fn inclusion(count_coeffs: Vec<f64>, bound: f64) -> Result<LinearSparsityConstraint, Error> {
    check_finite("inclusion", &count_coeffs)?;
    if count_coeffs.iter().any(|&v| v > 0.0) || bound >= 0.0 {
        return Err(Error::InvalidConstraint(
            "inclusion requires coefficients <= 0 and bound < 0".into(),
        ));
    }
    LinearSparsityConstraint::linear(count_coeffs, bound)
}

/// Mixed row: coefficients of both signs, typically balancing subgroups.
pub fn mixed(
    count_coeffs: Vec<f64>,
    rhs: f64,
    sense: ConstraintSense,
) -> Result<LinearSparsityConstraint, Error> {
    check_finite("mixed", &count_coeffs)?;
    let any_pos = count_coeffs.iter().any(|&v| v > 0.0);
    let any_neg = count_coeffs.iter().any(|&v| v < 0.0);
    if !any_pos || !any_neg {
        return Err(Error::InvalidConstraint(
            "mixed requires coefficients of both signs".into(),
        ));
    }
    let n = count_coeffs.len();
    LinearSparsityConstraint::new(count_coeffs, vec![0.0; n], rhs, sense)
}

/// At most `max_size` distinct support points: `Σ s_w(x_i) <= S`.
pub fn max_support_size(
    n: usize,
    max_size: u32,
    design_size: u32,
) -> Result<LinearSparsityConstraint, Error> {
    if max_size == 0 || max_size > design_size {
        return Err(Error::InvalidConstraint(format!(
            "support size bound {max_size} must lie in 1..={design_size}"
        )));
    }
    LinearSparsityConstraint::new(
        vec![0.0; n],
        vec![1.0; n],
        max_size as f64,
        ConstraintSense::Le,
    )
}

/// At least `min_size` distinct support points, as `-Σ s_w(x_i) <= -S`.
pub fn min_support_size(
    n: usize,
    min_size: u32,
    design_size: u32,
) -> Result<LinearSparsityConstraint, Error> {
    if min_size == 0 || min_size > design_size {
        return Err(Error::InvalidConstraint(format!(
            "support size bound {min_size} must lie in 1..={design_size}"
        )));
    }
    LinearSparsityConstraint::new(
        vec![0.0; n],
        vec![-1.0; n],
        -(min_size as f64),
        ConstraintSense::Le,
    )
}

/// Budget row with per-trial costs and once-per-support-point overheads:
/// `Σ γ(x_i) w(x_i) + Σ γ'(x_i) s_w(x_i) <= B`.
pub fn budget(
    per_trial: Vec<f64>,
    overhead: Vec<f64>,
    limit: f64,
) -> Result<LinearSparsityConstraint, Error> {
    check_finite("budget", &per_trial)?;
    check_finite("budget", &overhead)?;
    LinearSparsityConstraint::new(per_trial, overhead, limit, ConstraintSense::Le)
}

/// Space-filling separation: one row per window of `window` consecutive
/// points, each allowing at most one support point, so that any two support
/// points are at least `window` positions apart. Produces `n - window + 1`
/// rows.
pub fn separation_windows(
    n: usize,
    window: usize,
) -> Result<Vec<LinearSparsityConstraint>, Error> {
    if window < 2 || window > n {
        return Err(Error::InvalidConstraint(format!(
            "separation window {window} must lie in 2..={n}"
        )));
    }
    let mut rows = Vec::with_capacity(n - window + 1);
    for start in 0..=(n - window) {
        let mut support = vec![0.0; n];
        for s in &mut support[start..start + window] {
            *s = 1.0;
        }
        rows.push(LinearSparsityConstraint::new(
            vec![0.0; n],
            support,
            1.0,
            ConstraintSense::Le,
        )?);
    }
    Ok(rows)
}

/// Bounded replication at support points: each count is 0 or within
/// `[lower_i, upper_i]`. Emits for every point
/// `-w(x_i) + L(x_i) s_w(x_i) <= 0` and `w(x_i) - U(x_i) s_w(x_i) <= 0`,
/// so `2n` rows in total.
pub fn support_replication_bounds(
    lower: &[u32],
    upper: &[u32],
    design_size: u32,
) -> Result<Vec<LinearSparsityConstraint>, Error> {
    let n = lower.len();
    if upper.len() != n {
        return Err(Error::LengthMismatch {
            what: "replication bounds",
            expected: n,
            got: upper.len(),
        });
    }
    for i in 0..n {
        if lower[i] > upper[i] || upper[i] > design_size {
            return Err(Error::InvalidConstraint(format!(
                "replication bounds at point {}: need L <= U <= {design_size}, got [{}, {}]",
                i + 1,
                lower[i],
                upper[i]
            )));
        }
    }
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut a = vec![0.0; n];
        let mut c = vec![0.0; n];
        a[i] = -1.0;
        c[i] = lower[i] as f64;
        rows.push(LinearSparsityConstraint::new(a, c, 0.0, ConstraintSense::Le)?);
        let mut a = vec![0.0; n];
        let mut c = vec![0.0; n];
        a[i] = 1.0;
        c[i] = -(upper[i] as f64);
        rows.push(LinearSparsityConstraint::new(a, c, 0.0, ConstraintSense::Le)?);
    }
    Ok(rows)
}
