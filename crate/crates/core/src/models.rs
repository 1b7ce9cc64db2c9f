//! Information models: per-point elementary information matrices and, for
//! dose-response work, the trinomial continuation-ratio model.
//!
//! The continuation-ratio model describes a trial at dose `x` with three
//! mutually exclusive outcomes — no reaction, success (efficacy without
//! toxicity), and toxicity — through two logistic links:
//!
//! ```text
//! logit p_T(x)            = a1 + b1 x        (toxicity)
//! log [p_S(x) / p_0(x)]   = a2 + b2 x        (success vs no reaction)
//! ```
//!
//! All quantities are localized at a nominal parameter vector, the usual
//! local-optimality treatment for nonlinear models: elementary information
//! matrices and any response-dependent constraint coefficients (expected
//! failures, misdosing costs) are evaluated at `theta0`.

use crate::error::Error;
use crate::linalg::SymMatrix;
use crate::problem::InformationMatrix;
use crate::space::DesignSpace;

/// Numerically stable logistic function `1 / (1 + e^{-t})`.
///
/// Only ever exponentiates non-positive arguments, so it is overflow-free
/// for the extreme linear predictors (|a + bx| in the hundreds) that large
/// dose grids produce.
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Parameters of the continuation-ratio model. Slopes must be positive:
/// toxicity and efficacy odds both increase with dose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrParameters {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl CrParameters {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<Self, Error> {
        if !(a1.is_finite() && a2.is_finite() && b1.is_finite() && b2.is_finite()) {
            return Err(Error::InvalidModelParameter(
                "continuation-ratio parameters must be finite".into(),
            ));
        }
        if b1 <= 0.0 || b2 <= 0.0 {
            return Err(Error::InvalidModelParameter(format!(
                "slopes must be positive, got b1 = {b1}, b2 = {b2}"
            )));
        }
        Ok(CrParameters { a1, a2, b1, b2 })
    }
}

/// Continuation-ratio model localized at a nominal parameter value.
/// Parameter dimension is fixed at 4, elementary matrices have rank 2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrModel {
    pub theta0: CrParameters,
}

impl CrModel {
    pub fn new(theta0: CrParameters) -> Self {
        CrModel { theta0 }
    }

    pub const DIM: usize = 4;
    pub const RANK: usize = 2;
}

/// Outcome probabilities `(p_0, p_S, p_T)` at dose `x`: no reaction,
/// success, toxicity. Always in `[0, 1]` and summing to 1.
pub fn cr_probabilities(x: f64, theta: &CrParameters) -> (f64, f64, f64) {
    let tox = logistic(theta.a1 + theta.b1 * x);
    let eff = logistic(theta.a2 + theta.b2 * x);
    let p0 = (1.0 - tox) * (1.0 - eff);
    let p_s = (1.0 - tox) * eff;
    (p0, p_s, tox)
}

/// Failure probability `p_f = 1 - p_S = p_0 + p_T`: the trial was either
/// ineffective or toxic.
pub fn cr_failure_prob(x: f64, theta: &CrParameters) -> f64 {
    let (p0, _, tox) = cr_probabilities(x, theta);
    p0 + tox
}

/// Per-trial elementary information matrix of the continuation-ratio model
/// at dose `x`:
///
/// ```text
/// H(x) = u1(x) f1 f1ᵀ + u2(x) f2 f2ᵀ,   f1 = (1, x, 0, 0)ᵀ, f2 = (0, 0, 1, x)ᵀ
/// ```
///
/// with weights `u1 = σ2 (1 - σ2)(1 - σ1)` and `u2 = σ1 (1 - σ1)` where
/// `σ1, σ2` are the two logistic links. Block-diagonal, PSD, rank 2 whenever
/// both weights are positive.
pub fn cr_elementary_info(x: f64, theta: &CrParameters) -> InformationMatrix {
    let (u1, u2) = cr_info_weights(x, theta);
    let mut h = SymMatrix::zeros(CrModel::DIM);
    h.add_scaled_outer(&[1.0, x, 0.0, 0.0], u1);
    h.add_scaled_outer(&[0.0, 0.0, 1.0, x], u2);
    InformationMatrix::new_unchecked(h)
}

/// The two rank-one weights of [`cr_elementary_info`].
pub fn cr_info_weights(x: f64, theta: &CrParameters) -> (f64, f64) {
    let s1 = logistic(theta.a1 + theta.b1 * x);
    let s2 = logistic(theta.a2 + theta.b2 * x);
    let u1 = s2 * (1.0 - s2) * (1.0 - s1);
    let u2 = s1 * (1.0 - s1);
    (u1, u2)
}

/// Cost of treating an under-dosed (ineffective) patient with another drug.
pub const UNDERDOSE_COST: f64 = 5.0;
/// Cost of treating the adverse effects of an over-dosed patient.
pub const OVERDOSE_COST: f64 = 20.0;
/// Manufacturing and distribution cost per dose unit, charged once for each
/// distinct dose that is actually prepared.
pub const DOSE_UNIT_COST: f64 = 0.4;

/// Dose-response cost model: returns `(per_trial, overhead)` coefficient
/// vectors over the space. The per-trial cost at dose `x` is the expected
/// misdosing cost `5 p_0(x) + 20 p_T(x)`; the overhead `0.4 x` is paid once
/// per distinct dose in the support. Feed these to [`crate::constraint::budget`].
pub fn cr_cost_coefficients(space: &DesignSpace, theta: &CrParameters) -> (Vec<f64>, Vec<f64>) {
    let mut per_trial = Vec::with_capacity(space.len());
    let mut overhead = Vec::with_capacity(space.len());
    for i in 0..space.len() {
        let x = space.coord(i);
        let (p0, _, tox) = cr_probabilities(x, theta);
        per_trial.push(UNDERDOSE_COST * p0 + OVERDOSE_COST * tox);
        overhead.push(DOSE_UNIT_COST * x);
    }
    (per_trial, overhead)
}

/// Expected-failure coefficients `p_f(x_i, theta0)` over the space, for an
/// exclusion row capping the expected number of failed trials.
pub fn cr_failure_coefficients(space: &DesignSpace, theta: &CrParameters) -> Vec<f64> {
    (0..space.len())
        .map(|i| cr_failure_prob(space.coord(i), theta))
        .collect()
}

/// Explicitly supplied elementary information matrices, one per design
/// point, with a declared common rank bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMatrixModel {
    matrices: Vec<InformationMatrix>,
    rank_bound: usize,
}

impl RawMatrixModel {
    /// Validates that every matrix is PSD and has numerical rank at most
    /// `rank_bound` (eigenvalues beyond the bound below `1e-9 * ‖H‖`).
    pub fn new(matrices: Vec<SymMatrix>, rank_bound: usize) -> Result<Self, Error> {
        if matrices.is_empty() {
            return Err(Error::EmptySpace);
        }
        let dim = matrices[0].dim();
        let mut validated = Vec::with_capacity(matrices.len());
        for (i, m) in matrices.into_iter().enumerate() {
            if m.dim() != dim {
                return Err(Error::LengthMismatch {
                    what: "matrix dimension",
                    expected: dim,
                    got: m.dim(),
                });
            }
            let info = InformationMatrix::new(m)?;
            let eig = info.as_sym().eigh();
            let scale = eig.values[0].abs().max(f64::MIN_POSITIVE);
            if let Some(&excess) = eig.values.get(rank_bound) {
                if excess > 1e-9 * scale {
                    return Err(Error::RankExceeded {
                        bound: rank_bound,
                        detail: format!(
                            "matrix {} has eigenvalue {excess:.6e} past position {rank_bound}",
                            i + 1
                        ),
                    });
                }
            }
            validated.push(info);
        }
        Ok(RawMatrixModel {
            matrices: validated,
            rank_bound,
        })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrix(&self, i: usize) -> &InformationMatrix {
        &self.matrices[i]
    }
}

/// The information model of a problem: how each design point contributes
/// Fisher information.
#[derive(Clone, Debug, PartialEq)]
pub enum InformationModel {
    ContinuationRatio(CrModel),
    RawMatrices(RawMatrixModel),
}

impl InformationModel {
    /// Parameter dimension `m`.
    pub fn dim(&self) -> usize {
        match self {
            InformationModel::ContinuationRatio(_) => CrModel::DIM,
            InformationModel::RawMatrices(raw) => raw.matrix(0).dim(),
        }
    }

    /// Common rank bound `r` on the elementary matrices.
    pub fn rank_bound(&self) -> usize {
        match self {
            InformationModel::ContinuationRatio(_) => CrModel::RANK,
            InformationModel::RawMatrices(raw) => raw.rank_bound,
        }
    }

    /// Elementary information matrix of point `i`.
    pub fn elementary(&self, space: &DesignSpace, i: usize) -> InformationMatrix {
        match self {
            InformationModel::ContinuationRatio(cr) => {
                cr_elementary_info(space.coord(i), &cr.theta0)
            }
            InformationModel::RawMatrices(raw) => raw.matrix(i).clone(),
        }
    }

    /// Number of points the model is defined for, when fixed by the model
    /// itself (raw matrices); `None` when it adapts to any space.
    pub fn fixed_len(&self) -> Option<usize> {
        match self {
            InformationModel::ContinuationRatio(_) => None,
            InformationModel::RawMatrices(raw) => Some(raw.len()),
        }
    }

    pub fn continuation_ratio(&self) -> Option<&CrModel> {
        match self {
            InformationModel::ContinuationRatio(cr) => Some(cr),
            InformationModel::RawMatrices(_) => None,
        }
    }
}

/// The nominal parameter value used throughout the bundled dose-response
/// scenarios.
pub fn example_theta() -> CrParameters {
    CrParameters::new(-9.5, -9.1, 0.12, 0.33).expect("valid nominal parameters")
}
