//! Small dense symmetric-matrix kernels.
//!
//! Information matrices in this crate are tiny (parameter dimension rarely
//! above 8), so everything here is plain `Vec<f64>` with cyclic Jacobi for
//! eigendecompositions and an unpivoted Cholesky for positive-definite
//! solves. No external linear-algebra backend is involved.

use crate::error::Error;

/// Dense symmetric matrix, full row-major storage.
///
/// All mutating operations preserve symmetry; constructors that take raw
/// entries validate it.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.data[i * entries.len() + i] = v;
        }
        m
    }

    /// Builds from row data, validating squareness and symmetry
    /// (`|a_ij - a_ji| <= 1e-12 * max(1, max|a|)`). Stores the symmetrized
    /// average so downstream arithmetic sees exact symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, Error> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::NotSquare {
                    rows: dim,
                    cols: row.len(),
                });
            }
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(1.0_f64, |acc, &v| acc.max(v.abs()));
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let diff = (rows[i][j] - rows[j][i]).abs();
                if diff > 1e-12 * scale {
                    return Err(Error::NotSymmetric { i, j, diff });
                }
                data[i * dim + j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        Ok(SymMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets entry (i, j) and its mirror (j, i).
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    /// `self += coeff * v vᵀ`.
    pub fn add_scaled_outer(&mut self, v: &[f64], coeff: f64) {
        debug_assert_eq!(v.len(), self.dim);
        if coeff == 0.0 {
            return;
        }
        for i in 0..self.dim {
            let ci = coeff * v[i];
            if ci == 0.0 {
                continue;
            }
            for j in 0..self.dim {
                self.data[i * self.dim + j] += ci * v[j];
            }
        }
    }

    /// `self += t * other`.
    pub fn add_scaled(&mut self, other: &SymMatrix, t: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += t * b;
        }
    }

    pub fn scale(&mut self, t: f64) {
        for a in &mut self.data {
            *a *= t;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Entrywise max-absolute-value norm.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()))
    }

    /// `vᵀ self v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in 0..self.dim {
                row += self.get(i, j) * v[j];
            }
            total += v[i] * row;
        }
        total
    }

    /// Eigenvalues and orthonormal eigenvectors, sorted by descending
    /// eigenvalue. Cyclic Jacobi; quadratic convergence makes a handful of
    /// sweeps enough at these dimensions.
    pub fn eigh(&self) -> Eigen {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for _sweep in 0..100 {
            let mut off = 0.0_f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off.max(a[i * n + j].abs());
                }
            }
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for r in (p + 1)..n {
                    let apr = a[p * n + r];
                    if apr.abs() <= 1e-18 * scale {
                        continue;
                    }
                    let app = a[p * n + p];
                    let arr = a[r * n + r];
                    let theta = (arr - app) / (2.0 * apr);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akr = a[k * n + r];
                        a[k * n + p] = c * akp - s * akr;
                        a[k * n + r] = s * akp + c * akr;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let ark = a[r * n + k];
                        a[p * n + k] = c * apk - s * ark;
                        a[r * n + k] = s * apk + c * ark;
                    }
                    for k in 0..n {
                        let qkp = q[k * n + p];
                        let qkr = q[k * n + r];
                        q[k * n + p] = c * qkp - s * qkr;
                        q[k * n + r] = s * qkp + c * qkr;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[j * n + j]
                .partial_cmp(&a[i * n + i])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| a[i * n + i]).collect();
        let vectors = order
            .iter()
            .map(|&col| (0..n).map(|row| q[row * n + col]).collect())
            .collect();
        Eigen { values, vectors }
    }

    /// Lower-triangular Cholesky factor with `self = L Lᵀ`, or `None` when a
    /// pivot drops below `1e-13 * max(1, trace)` (not positive definite).
    pub fn cholesky(&self) -> Option<Cholesky> {
        let n = self.dim;
        let floor = 1e-13 * self.trace().abs().max(1.0);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= floor {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut v = self.get(i, j);
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / djj;
            }
        }
        Some(Cholesky { dim: n, l })
    }
}

/// Sorted symmetric eigendecomposition.
pub struct Eigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Lower-triangular Cholesky factor of a positive-definite matrix.
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// `L⁻¹ v` (forward substitution), so that `‖L⁻¹v‖² = vᵀ M⁻¹ v`.
    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = v.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// `M⁻¹ v` via forward then backward substitution.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = self.forward(v);
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// `vᵀ M⁻¹ v`.
    pub fn quad_form_inv(&self, v: &[f64]) -> f64 {
        self.forward(v).iter().map(|x| x * x).sum()
    }

    pub fn log_det(&self) -> f64 {
        let n = self.dim;
        2.0 * (0..n).map(|i| self.l[i * n + i].ln()).sum::<f64>()
    }

    /// Congruence transform `L⁻¹ A L⁻ᵀ` of a symmetric matrix.
    pub fn whiten(&self, a: &SymMatrix) -> SymMatrix {
        let n = self.dim;
        // Columns of L⁻¹ A: forward-solve each column, then forward-solve the
        // transpose of the result.
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|i| a.get(i, j)).collect();
            cols.push(self.forward(&col));
        }
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            let row: Vec<f64> = (0..n).map(|j| cols[j][i]).collect();
            let w = self.forward(&row);
            for j in 0..n {
                out.data[i * n + j] = w[j];
            }
        }
        // Symmetrize away round-off.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (out.data[i * n + j] + out.data[j * n + i]);
                out.data[i * n + j] = v;
                out.data[j * n + i] = v;
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn eigh_diagonal() {
        let m = SymMatrix::diag(&[3.0, -1.0, 7.0]);
        let e = m.eigh();
        assert_close(e.values[0], 7.0, 1e-12);
        assert_close(e.values[1], 3.0, 1e-12);
        assert_close(e.values[2], -1.0, 1e-12);
    }

    #[test]
    fn eigh_reconstructs() {
        let m = SymMatrix::from_rows(&[
            vec![4.0, 1.0, -2.0],
            vec![1.0, 3.0, 0.5],
            vec![-2.0, 0.5, 5.0],
        ])
        .unwrap();
        let e = m.eigh();
        let mut rec = SymMatrix::zeros(3);
        for (lam, v) in e.values.iter().zip(&e.vectors) {
            rec.add_scaled_outer(v, *lam);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_close(rec.get(i, j), m.get(i, j), 1e-12);
            }
        }
        // Orthonormality.
        for a in 0..3 {
            for b in 0..3 {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert_close(dot(&e.vectors[a], &e.vectors[b]), expected, 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_solves() {
        let m = SymMatrix::from_rows(&[
            vec![25.0, 15.0, -5.0],
            vec![15.0, 18.0, 0.0],
            vec![-5.0, 0.0, 11.0],
        ])
        .unwrap();
        let ch = m.cholesky().expect("positive definite");
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        // Check M x = rhs.
        for i in 0..3 {
            let mut v = 0.0;
            for j in 0..3 {
                v += m.get(i, j) * x[j];
            }
            assert_close(v, [1.0, 2.0, 3.0][i], 1e-10);
        }
        let det: f64 = m.eigh().values.iter().product();
        assert_close(ch.log_det(), det.ln(), 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(m.cholesky().is_none());
    }

    #[test]
    fn whiten_identity_when_same() {
        let m = SymMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let ch = m.cholesky().unwrap();
        let w = ch.whiten(&m);
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_close(w.get(i, j), expected, 1e-12);
            }
        }
    }

    #[test]
    fn from_rows_rejects_asymmetry() {
        let err = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]);
        assert!(matches!(err, Err(Error::NotSymmetric { .. })));
    }
}
