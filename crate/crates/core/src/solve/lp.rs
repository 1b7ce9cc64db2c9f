//! Bounded-variable primal simplex.
//!
//! Solves `maximize cᵀx` subject to general `≤`/`=` rows and finite box
//! bounds on every structural variable. Two phases: phase 1 drives artificial
//! variables to zero (or proves infeasibility and extracts a Farkas-style
//! certificate from the duals), phase 2 optimizes the real objective.
//!
//! Pricing uses the largest reduced cost by default and falls back to
//! Bland's rule after a run of degenerate steps, which precludes cycling
//! while keeping the usual pivot counts low. All tie-breaks are by lowest
//! index, so solves are bit-reproducible.

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpSense {
    Le,
    Eq,
}

/// One constraint row, sparse `(column, coefficient)` pairs.
#[derive(Clone, Debug)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub sense: LpSense,
}

/// `maximize objective · x` over `rows` and `lower <= x <= upper`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// An optimal vertex (basic solution) of the program.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Row multipliers `y` proving infeasibility: `y >= 0` on `≤` rows and the
/// best possible left-hand side over the boxes still exceeds `yᵀb`.
#[derive(Clone, Debug)]
pub struct InfeasibilityCertificate {
    pub row_multipliers: Vec<f64>,
    /// `min_box Σ y_i (A_i x) - yᵀ b`, positive when the certificate is valid.
    pub infeasibility: f64,
}

impl InfeasibilityCertificate {
    /// Recomputes the certificate inequality from scratch.
    pub fn verify(&self, lp: &LinearProgram) -> bool {
        let n = lp.objective.len();
        let y = &self.row_multipliers;
        for (row, &yi) in lp.rows.iter().zip(y) {
            if row.sense == LpSense::Le && yi < -1e-7 {
                return false;
            }
        }
        let mut combined = vec![0.0; n];
        let mut rhs = 0.0;
        for (row, &yi) in lp.rows.iter().zip(y) {
            for &(j, a) in &row.coeffs {
                combined[j] += yi * a;
            }
            rhs += yi * row.rhs;
        }
        let mut lo = 0.0;
        for j in 0..n {
            lo += if combined[j] >= 0.0 {
                combined[j] * lp.lower[j]
            } else {
                combined[j] * lp.upper[j]
            };
        }
        lo - rhs > 1e-9 * (1.0 + rhs.abs())
    }
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible(InfeasibilityCertificate),
}

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const SNAP_TOL: f64 = 5e-12;
/// Consecutive degenerate steps before switching to Bland pricing.
const STALL_LIMIT: usize = 25;

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, Error> {
    let nstruct = lp.objective.len();
    if lp.lower.len() != nstruct || lp.upper.len() != nstruct {
        return Err(Error::LpFailure("bound vectors mismatch objective".into()));
    }
    for j in 0..nstruct {
        if !lp.lower[j].is_finite() || !lp.upper[j].is_finite() || lp.lower[j] > lp.upper[j] {
            return Err(Error::LpFailure(format!(
                "variable {j} needs finite ordered bounds, got [{}, {}]",
                lp.lower[j], lp.upper[j]
            )));
        }
    }
    let mut simplex = Simplex::build(lp);
    simplex.run_phase(true)?;
    let infeas = -simplex.objective_value();
    if infeas > 1e-7 * (1.0 + simplex.rhs_scale) {
        let y = simplex.slack_duals();
        let cert = InfeasibilityCertificate {
            infeasibility: infeas,
            row_multipliers: y,
        };
        return Ok(LpOutcome::Infeasible(cert));
    }
    simplex.enter_phase_two(&lp.objective);
    simplex.run_phase(false)?;
    let x = simplex.structural_solution();
    let objective = lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    Ok(LpOutcome::Optimal(LpSolution { x, objective }))
}

struct Simplex {
    nrows: usize,
    nstruct: usize,
    ncols: usize,
    /// Dense `B⁻¹ A`, row-major, with one extra column for `B⁻¹ b`.
    tab: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    at_upper: Vec<bool>,
    /// Current values of the basic variables, one per row.
    xb: Vec<f64>,
    phase_one: bool,
    rhs_scale: f64,
    pivots_since_refresh: usize,
}

impl Simplex {
    fn build(lp: &LinearProgram) -> Simplex {
        let nrows = lp.rows.len();
        let nstruct = lp.objective.len();
        let nslack = nrows;
        // Worst case one artificial per row; unused ones are never created.
        let mut art_cols: Vec<Option<usize>> = vec![None; nrows];
        let mut residual = vec![0.0; nrows];
        for (i, row) in lp.rows.iter().enumerate() {
            let mut act = 0.0;
            for &(j, a) in &row.coeffs {
                act += a * lp.lower[j];
            }
            residual[i] = row.rhs - act;
        }
        let mut nart = 0;
        for (i, row) in lp.rows.iter().enumerate() {
            let needs_artificial = match row.sense {
                LpSense::Le => residual[i] < 0.0,
                LpSense::Eq => true,
            };
            if needs_artificial {
                art_cols[i] = Some(nstruct + nslack + nart);
                nart += 1;
            }
        }
        let ncols = nstruct + nslack + nart;

        let width = ncols + 1; // trailing B⁻¹b column
        let mut tab = vec![0.0; nrows * width];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                tab[i * width + j] += a;
            }
            tab[i * width + nstruct + i] = 1.0; // slack
            tab[i * width + ncols] = row.rhs;
            if let Some(col) = art_cols[i] {
                tab[i * width + col] = 1.0;
                if residual[i] < 0.0 {
                    // The artificial enters with coefficient -1; negating the
                    // whole row keeps the tableau equal to B⁻¹[A | I | b]
                    // with a +1 basic column.
                    for c in 0..width {
                        tab[i * width + c] = -tab[i * width + c];
                    }
                    tab[i * width + col] = 1.0;
                }
            }
        }

        let mut lower = Vec::with_capacity(ncols);
        let mut upper = Vec::with_capacity(ncols);
        lower.extend_from_slice(&lp.lower);
        upper.extend_from_slice(&lp.upper);
        for row in &lp.rows {
            match row.sense {
                LpSense::Le => {
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                }
                LpSense::Eq => {
                    lower.push(0.0);
                    upper.push(0.0);
                }
            }
        }
        for _ in 0..nart {
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }

        let mut cost = vec![0.0; ncols];
        for col in (nstruct + nslack)..ncols {
            cost[col] = -1.0; // phase 1: maximize -Σ artificials
        }

        let mut basis = Vec::with_capacity(nrows);
        let mut in_basis = vec![false; ncols];
        let mut xb = Vec::with_capacity(nrows);
        for i in 0..nrows {
            match art_cols[i] {
                Some(col) => {
                    basis.push(col);
                    in_basis[col] = true;
                    xb.push(residual[i].abs());
                }
                None => {
                    let col = nstruct + i;
                    basis.push(col);
                    in_basis[col] = true;
                    xb.push(residual[i]);
                }
            }
        }

        let rhs_scale = lp
            .rows
            .iter()
            .fold(1.0_f64, |acc, row| acc.max(row.rhs.abs()));

        Simplex {
            nrows,
            nstruct,
            ncols,
            tab,
            lower,
            upper,
            cost,
            basis,
            in_basis,
            at_upper: vec![false; ncols],
            xb,
            phase_one: true,
            rhs_scale,
            pivots_since_refresh: 0,
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.ncols + 1
    }

    #[inline]
    fn t(&self, row: usize, col: usize) -> f64 {
        self.tab[row * self.width() + col]
    }

    fn nonbasic_value(&self, col: usize) -> f64 {
        if self.at_upper[col] {
            self.upper[col]
        } else {
            self.lower[col]
        }
    }

    fn objective_value(&self) -> f64 {
        let mut total = 0.0;
        for (i, &col) in self.basis.iter().enumerate() {
            total += self.cost[col] * self.xb[i];
        }
        for col in 0..self.ncols {
            if !self.in_basis[col] && self.cost[col] != 0.0 {
                total += self.cost[col] * self.nonbasic_value(col);
            }
        }
        total
    }

    /// Dual multipliers read off the slack columns: `y_i = c_B · B⁻¹ e_i`.
    fn slack_duals(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let col = self.nstruct + i;
            let mut v = 0.0;
            for (row, &b) in self.basis.iter().enumerate() {
                let c = self.cost[b];
                if c != 0.0 {
                    v += c * self.t(row, col);
                }
            }
            y[i] = v;
        }
        y
    }

    fn enter_phase_two(&mut self, objective: &[f64]) {
        self.phase_one = false;
        self.cost = vec![0.0; self.ncols];
        self.cost[..self.nstruct].copy_from_slice(objective);
        // Artificials are done: lock them at zero. Basic ones that sit at
        // zero leave the basis through degenerate ratio-test steps; the
        // span-zero rule below keeps all of them from ever entering.
        for col in (self.nstruct + self.nrows)..self.ncols {
            self.upper[col] = 0.0;
            self.at_upper[col] = false;
        }
    }

    /// Recomputes basic values from the tableau to wash out drift:
    /// `x_B = B⁻¹b - Σ_nonbasic (B⁻¹A_j) x_j`.
    fn refresh_basic_values(&mut self) {
        for i in 0..self.nrows {
            let mut v = self.t(i, self.ncols);
            for col in 0..self.ncols {
                if !self.in_basis[col] {
                    let x = self.nonbasic_value(col);
                    if x != 0.0 {
                        v -= self.t(i, col) * x;
                    }
                }
            }
            self.xb[i] = v;
        }
        self.pivots_since_refresh = 0;
    }

    fn run_phase(&mut self, phase_one: bool) -> Result<(), Error> {
        debug_assert_eq!(self.phase_one, phase_one);
        let max_iters = 200 * (self.nrows + self.ncols) + 1000;
        let mut stall = 0usize;
        for _ in 0..max_iters {
            let bland = stall >= STALL_LIMIT;
            let entering = match self.price(bland) {
                Some(col) => col,
                None => return Ok(()), // optimal for this phase
            };
            let progress = self.step(entering)?;
            if progress > 1e-10 {
                stall = 0;
            } else {
                stall += 1;
            }
        }
        Err(Error::LpFailure(format!(
            "simplex exceeded {max_iters} iterations (rows {}, cols {})",
            self.nrows, self.ncols
        )))
    }

    /// Entering-column selection. Returns `None` at phase optimality.
    fn price(&self, bland: bool) -> Option<usize> {
        // y = c_B B⁻¹ via the basic costs, then d_j = c_j - y A_j computed
        // column-wise against the current tableau.
        let mut best: Option<(usize, f64)> = None;
        for col in 0..self.ncols {
            if self.in_basis[col] {
                continue;
            }
            // Variables with no room to move can never make progress.
            if self.upper[col] - self.lower[col] <= 0.0 {
                continue;
            }
            let mut d = self.cost[col];
            for (row, &b) in self.basis.iter().enumerate() {
                let c = self.cost[b];
                if c != 0.0 {
                    d -= c * self.t(row, col);
                }
            }
            let improving = if self.at_upper[col] {
                d < -COST_TOL
            } else {
                d > COST_TOL
            };
            if !improving {
                continue;
            }
            if bland {
                return Some(col);
            }
            let magnitude = d.abs();
            match best {
                Some((_, m)) if m >= magnitude => {}
                _ => best = Some((col, magnitude)),
            }
        }
        best.map(|(col, _)| col)
    }

    /// One simplex step on the entering column: bound flip or pivot.
    /// Returns the step length actually taken.
    fn step(&mut self, entering: usize) -> Result<f64, Error> {
        let dir = if self.at_upper[entering] { -1.0 } else { 1.0 };
        let span = self.upper[entering] - self.lower[entering];

        // Ratio test: the entering variable moves by t >= 0, basic values
        // move by -dir * t * column.
        let mut t_max = span;
        let mut leaving: Option<(usize, bool)> = None; // (row, leaves at upper)
        for i in 0..self.nrows {
            let a = self.t(i, entering);
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let delta = -dir * a;
            let (limit, hits_upper) = if delta > 0.0 {
                (self.upper[self.basis[i]], true)
            } else {
                (self.lower[self.basis[i]], false)
            };
            if limit.is_infinite() {
                continue;
            }
            let ratio = ((limit - self.xb[i]) / delta).max(0.0);
            let tie_margin = 1e-12 * (1.0 + ratio.abs());
            if ratio < t_max - tie_margin {
                t_max = ratio;
                leaving = Some((i, hits_upper));
            } else if ratio <= t_max + tie_margin {
                // Tie: keep the blocking basic variable with the lowest
                // column index (Bland-compatible).
                if let Some((row, _)) = leaving {
                    if self.basis[i] < self.basis[row] {
                        t_max = t_max.min(ratio);
                        leaving = Some((i, hits_upper));
                    }
                } else if ratio <= span {
                    t_max = ratio;
                    leaving = Some((i, hits_upper));
                }
            }
        }

        if t_max.is_infinite() {
            return Err(Error::LpFailure(
                "unbounded direction in a box-bounded program".into(),
            ));
        }

        // Move the iterate.
        let t = t_max.max(0.0);
        for i in 0..self.nrows {
            let a = self.t(i, entering);
            if a != 0.0 {
                self.xb[i] += -dir * t * a;
            }
        }

        match leaving {
            None => {
                // Bound flip: the entering variable crosses to its other bound.
                self.at_upper[entering] = !self.at_upper[entering];
            }
            Some((row, hits_upper)) => {
                let new_value = if dir > 0.0 {
                    self.lower[entering] + t
                } else {
                    self.upper[entering] - t
                };
                let old_basic = self.basis[row];
                self.in_basis[old_basic] = false;
                self.at_upper[old_basic] = hits_upper;
                // Snap the leaving value exactly onto its bound.
                self.basis[row] = entering;
                self.in_basis[entering] = true;
                self.xb[row] = new_value;
                self.eliminate(row, entering)?;
                self.pivots_since_refresh += 1;
                if self.pivots_since_refresh >= 128 {
                    self.refresh_basic_values();
                }
            }
        }
        Ok(t)
    }

    /// Gauss-Jordan elimination making `entering` a unit column at `row`.
    fn eliminate(&mut self, row: usize, entering: usize) -> Result<(), Error> {
        let width = self.width();
        let pivot = self.t(row, entering);
        if pivot.abs() <= PIVOT_TOL {
            return Err(Error::LpFailure(format!(
                "pivot {pivot:.3e} below tolerance"
            )));
        }
        let inv = 1.0 / pivot;
        for c in 0..width {
            self.tab[row * width + c] *= inv;
        }
        self.tab[row * width + entering] = 1.0;
        for i in 0..self.nrows {
            if i == row {
                continue;
            }
            let factor = self.t(i, entering);
            if factor == 0.0 {
                continue;
            }
            for c in 0..width {
                let v = self.tab[i * width + c] - factor * self.tab[row * width + c];
                self.tab[i * width + c] = if v.abs() < SNAP_TOL { 0.0 } else { v };
            }
            self.tab[i * width + entering] = 0.0;
        }
        Ok(())
    }

    fn structural_solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.nstruct];
        for col in 0..self.nstruct {
            if !self.in_basis[col] {
                x[col] = self.nonbasic_value(col);
            }
        }
        for (i, &col) in self.basis.iter().enumerate() {
            if col < self.nstruct {
                // Clamp round-off outside the box.
                x[col] = self.xb[i].clamp(self.lower[col], self.upper[col]);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: Vec<(usize, f64)>, rhs: f64, sense: LpSense) -> LpRow {
        LpRow { coeffs, rhs, sense }
    }

    #[test]
    fn two_variable_equality() {
        // maximize w1 s.t. w1 + w2 = 2, 0 <= w <= 2 -> (2, 0).
        let lp = LinearProgram {
            objective: vec![1.0, 0.0],
            rows: vec![row(vec![(0, 1.0), (1, 1.0)], 2.0, LpSense::Eq)],
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 2.0],
        };
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal(sol) => {
                assert!((sol.x[0] - 2.0).abs() <= 1e-9);
                assert!(sol.x[1].abs() <= 1e-9);
                assert!((sol.objective - 2.0).abs() <= 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn contradictory_rows_certify_infeasibility() {
        // w1 + w2 <= 1 and w1 + w2 >= 3 (as -w1 - w2 <= -3).
        let lp = LinearProgram {
            objective: vec![0.0, 0.0],
            rows: vec![
                row(vec![(0, 1.0), (1, 1.0)], 1.0, LpSense::Le),
                row(vec![(0, -1.0), (1, -1.0)], -3.0, LpSense::Le),
            ],
            lower: vec![0.0, 0.0],
            upper: vec![10.0, 10.0],
        };
        match solve_lp(&lp).unwrap() {
            LpOutcome::Infeasible(cert) => {
                assert!(cert.verify(&lp), "certificate failed: {cert:?}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infeasible_by_boxes() {
        // Σw = 5 but upper bounds only allow 3.
        let lp = LinearProgram {
            objective: vec![1.0, 1.0, 1.0],
            rows: vec![row(
                vec![(0, 1.0), (1, 1.0), (2, 1.0)],
                5.0,
                LpSense::Eq,
            )],
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
        };
        match solve_lp(&lp).unwrap() {
            LpOutcome::Infeasible(cert) => assert!(cert.verify(&lp)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn respects_nonzero_lower_bounds() {
        // maximize -x1 with x1 >= 2 forced by its box.
        let lp = LinearProgram {
            objective: vec![-1.0, 0.0],
            rows: vec![row(vec![(0, 1.0), (1, 1.0)], 6.0, LpSense::Le)],
            lower: vec![2.0, 0.0],
            upper: vec![6.0, 6.0],
        };
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal(sol) => assert!((sol.x[0] - 2.0).abs() <= 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_rows_terminate() {
        // Heavily degenerate: several identical rows through the optimum.
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            rows: vec![
                row(vec![(0, 1.0), (1, 1.0)], 1.0, LpSense::Le),
                row(vec![(0, 1.0), (1, 1.0)], 1.0, LpSense::Le),
                row(vec![(0, 2.0), (1, 2.0)], 2.0, LpSense::Le),
                row(vec![(0, 1.0)], 1.0, LpSense::Le),
                row(vec![(1, 1.0)], 1.0, LpSense::Le),
            ],
            lower: vec![0.0, 0.0],
            upper: vec![5.0, 5.0],
        };
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal(sol) => assert!((sol.objective - 1.0).abs() <= 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Enumerates candidate vertices of a small LP by intersecting all
    /// triples drawn from {row hyperplanes, box faces} and filtering
    /// feasibility. Slow and only for 3 variables, but independent.
    fn enumerate_optimum(lp: &LinearProgram) -> Option<f64> {
        let n = 3usize;
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for row in &lp.rows {
            let mut a = vec![0.0; n];
            for &(j, v) in &row.coeffs {
                a[j] += v;
            }
            planes.push((a, row.rhs));
        }
        for j in 0..n {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push((a.clone(), lp.lower[j]));
            planes.push((a, lp.upper[j]));
        }
        let feasible = |x: &[f64]| -> bool {
            for j in 0..n {
                if x[j] < lp.lower[j] - 1e-7 || x[j] > lp.upper[j] + 1e-7 {
                    return false;
                }
            }
            for row in &lp.rows {
                let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
                match row.sense {
                    LpSense::Le => {
                        if act > row.rhs + 1e-7 {
                            return false;
                        }
                    }
                    LpSense::Eq => {
                        if (act - row.rhs).abs() > 1e-7 {
                            return false;
                        }
                    }
                }
            }
            true
        };
        let mut best: Option<f64> = None;
        let k = planes.len();
        for a in 0..k {
            for b in (a + 1)..k {
                for c in (b + 1)..k {
                    // Solve the 3x3 system by Cramer's rule.
                    let rows = [&planes[a], &planes[b], &planes[c]];
                    let m = [
                        [rows[0].0[0], rows[0].0[1], rows[0].0[2]],
                        [rows[1].0[0], rows[1].0[1], rows[1].0[2]],
                        [rows[2].0[0], rows[2].0[1], rows[2].0[2]],
                    ];
                    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                    if det.abs() < 1e-9 {
                        continue;
                    }
                    let rhs = [rows[0].1, rows[1].1, rows[2].1];
                    let mut x = [0.0; 3];
                    for col in 0..3 {
                        let mut mm = m;
                        for r in 0..3 {
                            mm[r][col] = rhs[r];
                        }
                        let d = mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1])
                            - mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0])
                            + mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0]);
                        x[col] = d / det;
                    }
                    if feasible(&x) {
                        let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                        best = Some(best.map_or(obj, |b: f64| b.max(obj)));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(42);
        let mut solved = 0;
        for case in 0..300 {
            let objective: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let nrows = rng.gen_range(1..=4);
            let rows: Vec<LpRow> = (0..nrows)
                .map(|_| {
                    let coeffs: Vec<(usize, f64)> = (0..3)
                        .map(|j| (j, rng.gen_range(-2.0_f64..2.0)))
                        .filter(|&(_, v)| v.abs() > 0.05)
                        .collect();
                    let sense = if rng.gen_bool(0.25) {
                        LpSense::Eq
                    } else {
                        LpSense::Le
                    };
                    LpRow {
                        coeffs,
                        rhs: rng.gen_range(-1.0..4.0),
                        sense,
                    }
                })
                .filter(|r| !r.coeffs.is_empty())
                .collect();
            if rows.is_empty() {
                continue;
            }
            let lp = LinearProgram {
                objective,
                rows,
                lower: vec![0.0; 3],
                upper: vec![rng.gen_range(1.0..5.0); 3],
            };
            let oracle = enumerate_optimum(&lp);
            match solve_lp(&lp).unwrap() {
                LpOutcome::Optimal(sol) => {
                    let expected =
                        oracle.unwrap_or_else(|| panic!("case {case}: oracle says infeasible"));
                    assert!(
                        (sol.objective - expected).abs() <= 1e-6 * (1.0 + expected.abs()),
                        "case {case}: {} vs oracle {expected}",
                        sol.objective
                    );
                    solved += 1;
                }
                LpOutcome::Infeasible(cert) => {
                    assert!(oracle.is_none(), "case {case}: oracle found a vertex");
                    assert!(cert.verify(&lp), "case {case}: bad certificate");
                }
            }
        }
        assert!(solved > 100, "too few feasible cases: {solved}");
    }
}
