//! Rank-one factorization of elementary information matrices.
//!
//! The reduction to a univariate-response problem needs every elementary
//! matrix written as `H = Σ_{j=1..r} f'_j f'_jᵀ`. Two routes are provided:
//! the symmetric eigendecomposition (`f'_j = √λ_j u_j`, the default) and a
//! greedy diagonally-pivoted Cholesky. Both pad with zero vectors up to the
//! shared rank bound `r` so downstream consumers see a uniform shape.

use crate::error::Error;
use crate::linalg::SymMatrix;
use crate::problem::InformationMatrix;

/// Relative threshold below which an eigenvalue or pivot counts as zero rank.
pub const RANK_TOL: f64 = 1e-9;

/// Which factorization route to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FactorRoute {
    #[default]
    Eigen,
    PivotedCholesky,
}

/// At most `r` rank-one factors of a PSD matrix; zero vectors pad unused
/// slots. `Σ_j f'_j f'_jᵀ` reconstructs the source matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RankFactors {
    vectors: Vec<Vec<f64>>,
}

impl RankFactors {
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// The rank bound `r` the factors were built for.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `Σ_j f'_j f'_jᵀ`.
    pub fn reconstruct(&self, dim: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(dim);
        for f in &self.vectors {
            m.add_scaled_outer(f, 1.0);
        }
        m
    }
}

/// Flips each factor so its first nonzero component is non-negative, for
/// reproducible output across runs and platforms.
fn normalize_signs(vectors: &mut [Vec<f64>]) {
    for v in vectors {
        let scale = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if scale == 0.0 {
            continue;
        }
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-14 * scale) {
            if *first < 0.0 {
                for x in v.iter_mut() {
                    *x = -*x;
                }
            }
        }
    }
}

/// Eigendecomposition route: `f'_j = √λ_j u_j` for the top `r` eigenpairs.
///
/// Fails when any eigenvalue beyond the `r`-th exceeds `RANK_TOL` relative to
/// the largest one — the matrix then genuinely has rank above `r`.
pub fn eigen_factors(h: &InformationMatrix, r: usize) -> Result<RankFactors, Error> {
    let dim = h.dim();
    let eig = h.as_sym().eigh();
    let scale = eig.values[0].abs().max(f64::MIN_POSITIVE);
    for (j, &lambda) in eig.values.iter().enumerate().skip(r) {
        if lambda > RANK_TOL * scale {
            return Err(Error::RankExceeded {
                bound: r,
                detail: format!("eigenvalue {lambda:.6e} at position {}", j + 1),
            });
        }
    }
    let mut vectors = Vec::with_capacity(r);
    for j in 0..r {
        match eig.values.get(j) {
            Some(&lambda) if lambda > RANK_TOL * RANK_TOL * scale => {
                let root = lambda.sqrt();
                vectors.push(eig.vectors[j].iter().map(|&u| root * u).collect());
            }
            _ => vectors.push(vec![0.0; dim]),
        }
    }
    normalize_signs(&mut vectors);
    Ok(RankFactors { vectors })
}

/// Greedy pivoted-Cholesky route: repeatedly peels the rank-one term of the
/// largest remaining diagonal entry. While factor slots remain, mass is
/// peeled all the way down to round-off so the reconstruction stays at
/// machine precision even for badly conditioned inputs; the error fires only
/// when a diagonal above `tol * initial max` is left after `r` pivots.
pub fn pivoted_cholesky_factors(
    h: &InformationMatrix,
    r: usize,
    tol: f64,
) -> Result<RankFactors, Error> {
    let dim = h.dim();
    let mut residual = h.as_sym().clone();
    let initial_max = (0..dim)
        .map(|i| residual.get(i, i))
        .fold(0.0_f64, f64::max);
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    if initial_max > 0.0 {
        while vectors.len() < r {
            let (pivot, diag) = (0..dim)
                .map(|i| (i, residual.get(i, i)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .expect("non-empty diagonal");
            if diag <= 1e-15 * initial_max {
                break;
            }
            let root = diag.sqrt();
            let f: Vec<f64> = (0..dim).map(|i| residual.get(i, pivot) / root).collect();
            residual.add_scaled_outer(&f, -1.0);
            vectors.push(f);
        }
        let leftover = (0..dim)
            .map(|i| residual.get(i, i))
            .fold(0.0_f64, f64::max);
        if leftover > tol * initial_max {
            return Err(Error::RankExceeded {
                bound: r,
                detail: format!("pivot {leftover:.6e} remains after {r} factors"),
            });
        }
    }
    while vectors.len() < r {
        vectors.push(vec![0.0; dim]);
    }
    normalize_signs(&mut vectors);
    Ok(RankFactors { vectors })
}

/// Dispatches on the configured route. The Cholesky route uses [`RANK_TOL`].
pub fn factors(h: &InformationMatrix, r: usize, route: FactorRoute) -> Result<RankFactors, Error> {
    match route {
        FactorRoute::Eigen => eigen_factors(h, r),
        FactorRoute::PivotedCholesky => pivoted_cholesky_factors(h, r, RANK_TOL),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn info(m: SymMatrix) -> InformationMatrix {
        InformationMatrix::new(m).unwrap()
    }

    fn reconstruction_error(h: &SymMatrix, f: &RankFactors) -> f64 {
        let rec = f.reconstruct(h.dim());
        let mut err = 0.0_f64;
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                err = err.max((rec.get(i, j) - h.get(i, j)).abs());
            }
        }
        err
    }

    #[test]
    fn rank_one_recovers_vector() {
        let f = [0.5, -1.5, 2.0];
        let mut h = SymMatrix::zeros(3);
        h.add_scaled_outer(&f, 1.0);
        let factors = eigen_factors(&info(h.clone()), 1).unwrap();
        assert_eq!(factors.len(), 1);
        for (a, b) in factors.vectors()[0].iter().zip(&f) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
        let chol = pivoted_cholesky_factors(&info(h), 1, RANK_TOL).unwrap();
        for (a, b) in chol.vectors()[0].iter().zip(&f) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn identity_two_orthonormal_factors() {
        let factors = eigen_factors(&info(SymMatrix::identity(2)), 2).unwrap();
        let err = reconstruction_error(&SymMatrix::identity(2), &factors);
        assert!(err <= 1e-12);
        for v in factors.vectors() {
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn diagonal_pivot_case() {
        let h = SymMatrix::diag(&[4.0, 0.0]);
        let factors = pivoted_cholesky_factors(&info(h), 1, RANK_TOL).unwrap();
        assert_eq!(factors.vectors()[0], vec![2.0, 0.0]);
    }

    #[test]
    fn rank_excess_is_detected() {
        let h = info(SymMatrix::identity(3));
        let err = eigen_factors(&h, 2);
        assert!(matches!(err, Err(Error::RankExceeded { bound: 2, .. })));
        let err = pivoted_cholesky_factors(&h, 2, RANK_TOL);
        assert!(matches!(err, Err(Error::RankExceeded { bound: 2, .. })));
    }

    #[test]
    fn zero_matrix_pads_with_zeros() {
        let h = info(SymMatrix::zeros(4));
        for route in [FactorRoute::Eigen, FactorRoute::PivotedCholesky] {
            let f = factors(&h, 2, route).unwrap();
            assert_eq!(f.len(), 2);
            assert!(f.vectors().iter().all(|v| v.iter().all(|&x| x == 0.0)));
        }
    }

    proptest! {
        #[test]
        fn reconstruction_both_routes(
            dim in 1usize..=8,
            seed_rank in 1usize..=4,
            raw in proptest::collection::vec(-2.0f64..2.0, 32),
            scales in proptest::collection::vec(0.05f64..4.0, 4),
        ) {
            let rank = seed_rank.min(dim);
            let mut h = SymMatrix::zeros(dim);
            for k in 0..rank {
                let g: Vec<f64> = (0..dim).map(|i| raw[(k * dim + i) % raw.len()]).collect();
                h.add_scaled_outer(&g, scales[k % scales.len()]);
            }
            let bound = rank.max(1);
            let hinf = h.max_abs();
            let matrix = info(h.clone());
            for route in [FactorRoute::Eigen, FactorRoute::PivotedCholesky] {
                let f = factors(&matrix, bound, route).unwrap();
                prop_assert_eq!(f.len(), bound);
                let err = reconstruction_error(&h, &f);
                prop_assert!(err <= 1e-10 * (1.0 + hinf), "route {:?}: err {}", route, err);
            }
        }

        #[test]
        fn criterion_invariant_across_routes(
            raw in proptest::collection::vec(-2.0f64..2.0, 12),
            weights in proptest::collection::vec(0u32..4, 3),
        ) {
            // Three points, m = 3, rank <= 2; compare Σ w_i Σ_j f'_ij f'_ijᵀ
            // built from either route.
            let dim = 3;
            let mut mats = Vec::new();
            for p in 0..3 {
                let mut h = SymMatrix::zeros(dim);
                for k in 0..2 {
                    let g: Vec<f64> = (0..dim).map(|i| raw[(p * 4 + k * 2 + i) % raw.len()]).collect();
                    h.add_scaled_outer(&g, 0.5 + k as f64);
                }
                mats.push(info(h));
            }
            let mut m_eigen = SymMatrix::zeros(dim);
            let mut m_chol = SymMatrix::zeros(dim);
            for (p, h) in mats.iter().enumerate() {
                let fe = factors(h, 2, FactorRoute::Eigen).unwrap();
                let fc = factors(h, 2, FactorRoute::PivotedCholesky).unwrap();
                m_eigen.add_scaled(&fe.reconstruct(dim), weights[p] as f64);
                m_chol.add_scaled(&fc.reconstruct(dim), weights[p] as f64);
            }
            let scale = 1.0 + m_eigen.max_abs();
            for i in 0..dim {
                for j in 0..dim {
                    prop_assert!((m_eigen.get(i, j) - m_chol.get(i, j)).abs() <= 1e-10 * scale);
                }
            }
        }
    }
}
