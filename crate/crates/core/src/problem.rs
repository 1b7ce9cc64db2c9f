//! Design problems: information matrices, the D-criterion, efficiency, and
//! feasibility checking.

use crate::constraint::{ConstraintSense, FeasibilityReport, LinearSparsityConstraint, RowViolation};
use crate::design::ExactDesign;
use crate::error::Error;
use crate::linalg::SymMatrix;
use crate::models::InformationModel;
use crate::space::DesignSpace;

/// Eigenvalues below `1e-12 * max|λ|` count as zero when evaluating
/// determinant-based criteria.
const EIGENVALUE_CLAMP: f64 = 1e-12;

/// Determinants at or below this floor are treated as exactly singular.
const DET_FLOOR: f64 = 1e-300;

/// A symmetric positive-semidefinite information matrix.
///
/// Construction through [`InformationMatrix::new`] validates semidefiniteness
/// (smallest eigenvalue at least `-1e-9 * max|λ|`); sums of PSD matrices with
/// non-negative weights are built internally without re-validation.
#[derive(Clone, Debug, PartialEq)]
pub struct InformationMatrix {
    mat: SymMatrix,
}

impl InformationMatrix {
    pub fn new(mat: SymMatrix) -> Result<Self, Error> {
        let eig = mat.eigh();
        let scale = eig.values[0].abs().max(f64::MIN_POSITIVE);
        let min = *eig.values.last().expect("non-empty spectrum");
        if min < -1e-9 * scale {
            return Err(Error::NotPositiveSemidefinite { value: min });
        }
        Ok(InformationMatrix { mat })
    }

    pub(crate) fn new_unchecked(mat: SymMatrix) -> Self {
        InformationMatrix { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.mat
    }

    pub fn into_sym(self) -> SymMatrix {
        self.mat
    }
}

/// Design optimality criterion. Only the determinant criterion is
/// implemented; the enum keeps the criterion an explicit part of problem
/// descriptions and file formats.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Criterion {
    #[default]
    D,
}

impl Criterion {
    pub fn evaluate(&self, m: &InformationMatrix) -> f64 {
        match self {
            Criterion::D => criterion_d(m),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::D => "D",
        }
    }
}

/// D-criterion `Φ_D(M) = (det M)^(1/m)`.
///
/// Evaluated through the symmetric eigendecomposition with small eigenvalues
/// clamped to zero, so singular matrices yield exactly 0 rather than noise
/// of either sign.
pub fn criterion_d(m: &InformationMatrix) -> f64 {
    let eig = m.as_sym().eigh();
    let scale = eig.values[0].abs().max(f64::MIN_POSITIVE);
    let mut det = 1.0;
    for &lambda in &eig.values {
        let clamped = if lambda < EIGENVALUE_CLAMP * scale {
            0.0
        } else {
            lambda
        };
        det *= clamped;
    }
    if det <= DET_FLOOR {
        0.0
    } else {
        det.powf(1.0 / m.dim() as f64)
    }
}

/// `log det M` with the same clamping as [`criterion_d`]; `None` when
/// singular. The branch-and-bound solver optimizes on this scale.
pub fn log_det_psd(m: &SymMatrix) -> Option<f64> {
    let eig = m.eigh();
    let scale = eig.values[0].abs().max(f64::MIN_POSITIVE);
    let mut logdet = 0.0;
    for &lambda in &eig.values {
        if lambda < EIGENVALUE_CLAMP * scale {
            return None;
        }
        logdet += lambda.ln();
    }
    Some(logdet)
}

/// An exact design problem: finite space, information model, constraint
/// rows, required size `N`, and criterion.
///
/// Rows are normalized at construction: user-facing equality rows are stored
/// as two `≤` rows; the size equality `Σ w(x_i) = N` is implicit, always
/// enforced, and never part of [`LasProblem::rows`].
#[derive(Clone, Debug)]
pub struct LasProblem {
    space: DesignSpace,
    model: InformationModel,
    rows: Vec<LinearSparsityConstraint>,
    size: u32,
    criterion: Criterion,
    elementaries: Vec<InformationMatrix>,
}

impl LasProblem {
    pub fn new(
        space: DesignSpace,
        model: InformationModel,
        constraints: Vec<LinearSparsityConstraint>,
        size: u32,
    ) -> Result<Self, Error> {
        let n = space.len();
        if let Some(expected) = model.fixed_len() {
            if expected != n {
                return Err(Error::LengthMismatch {
                    what: "model matrices",
                    expected: n,
                    got: expected,
                });
            }
        }
        let mut rows = Vec::with_capacity(constraints.len());
        for c in constraints {
            if c.dim() != n {
                return Err(Error::LengthMismatch {
                    what: "constraint coefficients",
                    expected: n,
                    got: c.dim(),
                });
            }
            match c.sense {
                ConstraintSense::Le => rows.push(c),
                ConstraintSense::Eq => {
                    let flipped = LinearSparsityConstraint::new(
                        c.count_coeffs.iter().map(|v| -v).collect(),
                        c.support_coeffs.iter().map(|v| -v).collect(),
                        -c.rhs,
                        ConstraintSense::Le,
                    )?;
                    rows.push(LinearSparsityConstraint {
                        sense: ConstraintSense::Le,
                        ..c
                    });
                    rows.push(flipped);
                }
            }
        }
        let elementaries = (0..n).map(|i| model.elementary(&space, i)).collect();
        Ok(LasProblem {
            space,
            model,
            rows,
            size,
            criterion: Criterion::D,
            elementaries,
        })
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn model(&self) -> &InformationModel {
        &self.model
    }

    /// Normalized `≤` rows (the size equality is held separately).
    pub fn rows(&self) -> &[LinearSparsityConstraint] {
        &self.rows
    }

    /// Required design size `N`.
    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    /// Parameter dimension `m`.
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn rank_bound(&self) -> usize {
        self.model.rank_bound()
    }

    pub fn num_points(&self) -> usize {
        self.space.len()
    }

    /// Cached elementary matrix `H(x_i)`.
    pub fn elementary(&self, i: usize) -> &InformationMatrix {
        &self.elementaries[i]
    }

    /// `M(w) = Σ w(x_i) H(x_i)`.
    pub fn information_matrix(&self, design: &ExactDesign) -> Result<InformationMatrix, Error> {
        design.check_len(self.space.len())?;
        let mut m = SymMatrix::zeros(self.dim());
        for (i, &count) in design.counts().iter().enumerate() {
            if count > 0 {
                m.add_scaled(self.elementaries[i].as_sym(), count as f64);
            }
        }
        Ok(InformationMatrix::new_unchecked(m))
    }

    /// Criterion value `Φ(M(w))` of a design.
    pub fn criterion_value(&self, design: &ExactDesign) -> Result<f64, Error> {
        Ok(self.criterion.evaluate(&self.information_matrix(design)?))
    }

    /// Checks a design against the size equality (exactly) and every
    /// normalized row (within the absolute feasibility tolerance).
    /// Infeasibility is reported, not an error.
    pub fn check_feasible(&self, design: &ExactDesign) -> Result<FeasibilityReport, Error> {
        design.check_len(self.space.len())?;
        let indicator = design.support_indicator();
        let size_deviation = design.total() as i64 - self.size as i64;
        let mut violations = Vec::new();
        for (k, row) in self.rows.iter().enumerate() {
            if !row.satisfied(design.counts(), &indicator) {
                violations.push(RowViolation {
                    row: k,
                    activity: row.activity(design.counts(), &indicator),
                    rhs: row.rhs,
                    slack: row.slack(design.counts(), &indicator),
                });
            }
        }
        Ok(FeasibilityReport {
            size_deviation,
            violations,
        })
    }
}

/// D-efficiency of `w1` relative to `w2`:
/// `[det M(w1) / det M(w2)]^(1/m)`, the factor by which the sample size of
/// `w2` could shrink while matching the information of `w1`.
pub fn d_efficiency(
    w1: &ExactDesign,
    w2: &ExactDesign,
    problem: &LasProblem,
) -> Result<f64, Error> {
    let phi_ref = problem.criterion_value(w2)?;
    if phi_ref == 0.0 {
        return Err(Error::SingularReference);
    }
    Ok(problem.criterion_value(w1)? / phi_ref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{budget, exclusion, support_replication_bounds};
    use crate::models::{
        cr_cost_coefficients, cr_failure_coefficients, example_theta, CrModel, InformationModel,
        RawMatrixModel,
    };
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn univariate_model(xs: &[f64]) -> InformationModel {
        let mats = xs
            .iter()
            .map(|&x| {
                let mut m = SymMatrix::zeros(2);
                m.add_scaled_outer(&[1.0, x], 1.0);
                m
            })
            .collect();
        InformationModel::RawMatrices(RawMatrixModel::new(mats, 1).unwrap())
    }

    fn dose_problem(constraints: Vec<LinearSparsityConstraint>) -> LasProblem {
        let space = DesignSpace::grid(0.0, 100.0, 101).unwrap();
        let model = InformationModel::ContinuationRatio(CrModel::new(example_theta()));
        LasProblem::new(space, model, constraints, 100).unwrap()
    }

    fn design_at(doses: &[usize], counts: &[u32], n: usize) -> ExactDesign {
        let mut w = vec![0u32; n];
        for (&d, &c) in doses.iter().zip(counts) {
            w[d] = c;
        }
        ExactDesign::new(w)
    }

    // Optimal 100-trial dose allocation used across the regression tests.
    const W0_DOSES: [usize; 6] = [23, 32, 33, 67, 68, 91];
    const W0_COUNTS: [u32; 6] = [27, 8, 22, 10, 10, 23];

    #[test]
    fn zero_design_gives_zero_matrix() {
        let space = DesignSpace::grid(0.0, 1.0, 2).unwrap();
        let problem =
            LasProblem::new(space, univariate_model(&[0.0, 1.0]), vec![], 2).unwrap();
        let m = problem
            .information_matrix(&ExactDesign::zeros(2))
            .unwrap();
        assert_eq!(m.as_sym().max_abs(), 0.0);
        assert_eq!(criterion_d(&m), 0.0);
    }

    #[test]
    fn two_point_univariate_sum() {
        let space = DesignSpace::grid(0.0, 1.0, 2).unwrap();
        let problem =
            LasProblem::new(space, univariate_model(&[0.0, 1.0]), vec![], 2).unwrap();
        let m = problem
            .information_matrix(&ExactDesign::new(vec![1, 1]))
            .unwrap();
        let expected = [[2.0, 1.0], [1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.as_sym().get(i, j), expected[i][j]);
            }
        }
    }

    #[test]
    fn dose_design_criterion_regression() {
        let problem = dose_problem(vec![]);
        let w0 = design_at(&W0_DOSES, &W0_COUNTS, 101);
        let phi = problem.criterion_value(&w0).unwrap();
        assert!((phi - 60.11).abs() <= 0.02, "phi = {phi}");
    }

    #[test]
    fn criterion_basics() {
        let identity = InformationMatrix::new(SymMatrix::identity(3)).unwrap();
        assert_eq!(criterion_d(&identity), 1.0);
        let d = InformationMatrix::new(SymMatrix::diag(&[4.0, 1.0])).unwrap();
        assert!((criterion_d(&d) - 2.0).abs() <= 1e-14);
        let mut rank_one = SymMatrix::zeros(3);
        rank_one.add_scaled_outer(&[1.0, 2.0, 3.0], 1.5);
        assert_eq!(criterion_d(&InformationMatrix::new(rank_one).unwrap()), 0.0);
    }

    #[test]
    fn criterion_rejects_bad_input() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        let indefinite = SymMatrix::diag(&[1.0, -2.0]);
        assert!(matches!(
            InformationMatrix::new(indefinite),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn efficiency_regression() {
        let problem = dose_problem(vec![]);
        let w0 = design_at(&W0_DOSES, &W0_COUNTS, 101);
        let w1 = design_at(&[24, 33, 34, 65, 66, 89], &[23, 7, 30, 5, 16, 19], 101);
        let w5 = design_at(&[23, 33, 43, 55, 65, 86], &[25, 25, 10, 11, 15, 14], 101);
        assert_eq!(d_efficiency(&w0, &w0, &problem).unwrap(), 1.0);
        let e1 = d_efficiency(&w1, &w0, &problem).unwrap();
        assert!((e1 - 0.98).abs() <= 0.005, "eff(w1) = {e1}");
        let e5 = d_efficiency(&w5, &w0, &problem).unwrap();
        assert!((e5 - 0.89).abs() <= 0.005, "eff(w5) = {e5}");
    }

    #[test]
    fn efficiency_rejects_singular_reference() {
        let space = DesignSpace::grid(0.0, 1.0, 2).unwrap();
        let problem =
            LasProblem::new(space, univariate_model(&[0.0, 1.0]), vec![], 2).unwrap();
        let singular = ExactDesign::new(vec![2, 0]);
        let good = ExactDesign::new(vec![1, 1]);
        assert!(matches!(
            d_efficiency(&good, &singular, &problem),
            Err(Error::SingularReference)
        ));
    }

    #[test]
    fn feasibility_of_cost_constrained_design() {
        let space = DesignSpace::grid(0.0, 100.0, 101).unwrap();
        let theta = example_theta();
        let fail = exclusion(cr_failure_coefficients(&space, &theta), 40.0).unwrap();
        let (per_trial, overhead) = cr_cost_coefficients(&space, &theta);
        let cost = budget(per_trial, overhead, 500.0).unwrap();
        let problem = dose_problem(vec![fail, cost.clone()]);
        let w2 = design_at(&[24, 33, 64, 87], &[26, 38, 20, 16], 101);
        let report = problem.check_feasible(&w2).unwrap();
        assert!(report.feasible(), "violations: {:?}", report.violations);
        let spent = cost.activity(w2.counts(), &w2.support_indicator());
        assert!((spent - 499.14).abs() <= 0.02, "cost = {spent}");
    }

    #[test]
    fn size_mismatch_is_reported_not_erred() {
        let problem = dose_problem(vec![]);
        let mut counts = vec![0u32; 101];
        counts[50] = 99;
        let report = problem.check_feasible(&ExactDesign::new(counts)).unwrap();
        assert!(!report.feasible());
        assert_eq!(report.size_deviation, -1);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn replication_bounds_accept_w5() {
        let rows = support_replication_bounds(&[10; 101], &[25; 101], 100).unwrap();
        let problem = dose_problem(rows);
        let w5 = design_at(&[23, 33, 43, 55, 65, 86], &[25, 25, 10, 11, 15, 14], 101);
        let report = problem.check_feasible(&w5).unwrap();
        assert!(report.feasible(), "violations: {:?}", report.violations);
    }

    #[test]
    fn equality_rows_are_split() {
        let space = DesignSpace::grid(0.0, 2.0, 3).unwrap();
        let row = LinearSparsityConstraint::new(
            vec![1.0, -1.0, 0.0],
            vec![0.0; 3],
            0.0,
            ConstraintSense::Eq,
        )
        .unwrap();
        let problem =
            LasProblem::new(space, univariate_model(&[0.0, 1.0, 2.0]), vec![row], 4).unwrap();
        assert_eq!(problem.rows().len(), 2);
        assert!(problem
            .rows()
            .iter()
            .all(|r| r.sense == ConstraintSense::Le));
        let balanced = ExactDesign::new(vec![2, 2, 0]);
        let lopsided = ExactDesign::new(vec![3, 1, 0]);
        assert!(problem.check_feasible(&balanced).unwrap().feasible());
        assert!(!problem.check_feasible(&lopsided).unwrap().feasible());
    }

    fn random_psd(rng: &mut StdRng, dim: usize, rank: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(dim);
        for _ in 0..rank {
            let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            m.add_scaled_outer(&g, rng.gen_range(0.1..2.0));
        }
        m
    }

    #[test]
    fn criterion_positive_homogeneity() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let dim = rng.gen_range(1..=5);
            let m = random_psd(&mut rng, dim, dim);
            let alpha: f64 = rng.gen_range(0.0..3.0);
            let mut scaled = m.clone();
            scaled.scale(alpha);
            let phi = criterion_d(&InformationMatrix::new_unchecked(m));
            let phi_scaled = criterion_d(&InformationMatrix::new_unchecked(scaled));
            assert!(
                (phi_scaled - alpha * phi).abs() <= 1e-10 * (1.0 + alpha * phi),
                "homogeneity broke: {phi_scaled} vs {}",
                alpha * phi
            );
        }
    }

    #[test]
    fn criterion_monotone_and_concave() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..100 {
            let dim = rng.gen_range(1..=5);
            let m1 = random_psd(&mut rng, dim, dim);
            let m2 = random_psd(&mut rng, dim, dim);
            let phi1 = criterion_d(&InformationMatrix::new_unchecked(m1.clone()));
            let phi2 = criterion_d(&InformationMatrix::new_unchecked(m2.clone()));
            let mut sum = m1.clone();
            sum.add_scaled(&m2, 1.0);
            let phi_sum = criterion_d(&InformationMatrix::new_unchecked(sum));
            assert!(phi_sum >= phi1 - 1e-12, "monotonicity: {phi_sum} < {phi1}");
            let t: f64 = rng.gen_range(0.0..=1.0);
            let mut mix = m1.clone();
            mix.scale(t);
            mix.add_scaled(&m2, 1.0 - t);
            let phi_mix = criterion_d(&InformationMatrix::new_unchecked(mix));
            assert!(
                phi_mix >= t * phi1 + (1.0 - t) * phi2 - 1e-10,
                "concavity: {phi_mix} vs {}",
                t * phi1 + (1.0 - t) * phi2
            );
        }
    }

    #[test]
    fn feasibility_matches_direct_recomputation() {
        let mut rng = StdRng::seed_from_u64(13);
        let space = DesignSpace::grid(0.0, 4.0, 5).unwrap();
        let model = univariate_model(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        for _ in 0..200 {
            let mut constraints = Vec::new();
            for _ in 0..rng.gen_range(1..=3) {
                let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let c: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let b = rng.gen_range(-4.0..8.0);
                if let Ok(row) = LinearSparsityConstraint::new(a, c, b, ConstraintSense::Le) {
                    constraints.push(row);
                }
            }
            let problem =
                LasProblem::new(space.clone(), model.clone(), constraints.clone(), 5).unwrap();
            let counts: Vec<u32> = (0..5).map(|_| rng.gen_range(0..=3)).collect();
            let design = ExactDesign::new(counts.clone());
            let report = problem.check_feasible(&design).unwrap();
            // Independent recomputation straight from the definition.
            let total: u32 = counts.iter().sum();
            let mut expect_feasible = total == 5;
            for row in &constraints {
                let mut lhs = 0.0;
                for i in 0..5 {
                    lhs += row.count_coeffs[i] * counts[i] as f64;
                    if counts[i] > 0 {
                        lhs += row.support_coeffs[i];
                    }
                }
                if lhs > row.rhs + 1e-9 {
                    expect_feasible = false;
                }
            }
            assert_eq!(report.feasible(), expect_feasible);
        }
    }

    #[test]
    fn builder_semantics_match_enumeration() {
        // Enumerate every design with n = 4, N = 4 and compare each builder's
        // verdict with the prose definition.
        let space = DesignSpace::grid(0.0, 3.0, 4).unwrap();
        let model = univariate_model(&[0.0, 1.0, 2.0, 3.0]);
        let max_supp =
            LasProblem::new(space.clone(), model.clone(), vec![crate::constraint::max_support_size(4, 2, 4).unwrap()], 4)
                .unwrap();
        let windows = LasProblem::new(
            space.clone(),
            model.clone(),
            crate::constraint::separation_windows(4, 2).unwrap(),
            4,
        )
        .unwrap();
        let repl = LasProblem::new(
            space.clone(),
            model.clone(),
            support_replication_bounds(&[2; 4], &[3; 4], 4).unwrap(),
            4,
        )
        .unwrap();
        let mut visited = 0;
        for a in 0..=4u32 {
            for b in 0..=4u32 {
                for c in 0..=4u32 {
                    for d in 0..=4u32 {
                        if a + b + c + d != 4 {
                            continue;
                        }
                        visited += 1;
                        let w = ExactDesign::new(vec![a, b, c, d]);
                        let supp = w.support_size();
                        assert_eq!(
                            max_supp.check_feasible(&w).unwrap().feasible(),
                            supp <= 2
                        );
                        let adjacent_support = w
                            .counts()
                            .windows(2)
                            .any(|pair| pair[0] > 0 && pair[1] > 0);
                        assert_eq!(
                            windows.check_feasible(&w).unwrap().feasible(),
                            !adjacent_support
                        );
                        let in_bounds = w
                            .counts()
                            .iter()
                            .all(|&v| v == 0 || (2..=3).contains(&v));
                        assert_eq!(repl.check_feasible(&w).unwrap().feasible(), in_bounds);
                    }
                }
            }
        }
        assert_eq!(visited, 35); // C(7,3) compositions of 4 into 4 parts
    }
}
