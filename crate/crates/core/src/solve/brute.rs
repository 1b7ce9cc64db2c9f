//! Exhaustive enumeration: the ground-truth oracle for small instances.

use super::{SolverOptions, SolverResult, SolverStatus};
use crate::design::ExactDesign;
use crate::error::Error;
use crate::linalg::SymMatrix;
use crate::problem::{criterion_d, InformationMatrix, LasProblem};
use crate::reduce::{enumerate_feasible, kappa, AuxiliaryProblem};
use std::time::Instant;

/// Two criterion values within this relative distance count as tied optima.
const TIE_TOL: f64 = 1e-12;
/// Ties are truncated here to bound memory on degenerate instances.
const MAX_TIES: usize = 10_000;

/// Number of compositions of `total` over `parts` bins, saturating in f64.
fn composition_count(parts: usize, total: u32) -> f64 {
    // C(total + parts - 1, parts - 1)
    let mut value = 1.0_f64;
    for k in 1..parts {
        value *= (total as f64 + k as f64) / k as f64;
        if !value.is_finite() {
            return f64::INFINITY;
        }
    }
    value
}

/// Enumerates every feasible design of the problem and returns the exact
/// argmax, with ties listed. Refuses with a size estimate when the
/// composition count exceeds the configured cap.
pub fn brute_force(problem: &LasProblem, options: &SolverOptions) -> Result<SolverResult, Error> {
    let start = Instant::now();
    let n = problem.num_points();
    let size = problem.size();
    let estimate = composition_count(n, size);
    if estimate > options.enumeration_cap as f64 {
        return Err(Error::EnumerationTooLarge {
            estimate,
            cap: options.enumeration_cap,
        });
    }

    struct Search<'a> {
        problem: &'a LasProblem,
        counts: Vec<u32>,
        best: f64,
        best_counts: Option<Vec<u32>>,
        ties: Vec<Vec<u32>>,
        explored: u64,
    }

    impl Search<'_> {
        fn leaf(&mut self) {
            self.explored += 1;
            let design = ExactDesign::new(self.counts.clone());
            if !self
                .problem
                .check_feasible(&design)
                .expect("dimensions fixed")
                .feasible()
            {
                return;
            }
            let phi = self
                .problem
                .criterion_value(&design)
                .expect("dimensions fixed");
            let scale = self.best.abs().max(1.0);
            if self.best_counts.is_none() || phi > self.best + TIE_TOL * scale {
                self.best = phi;
                self.best_counts = Some(self.counts.clone());
                self.ties.clear();
                self.ties.push(self.counts.clone());
            } else if (phi - self.best).abs() <= TIE_TOL * scale && self.ties.len() < MAX_TIES {
                self.ties.push(self.counts.clone());
            }
        }

        fn descend(&mut self, point: usize, left: u32) {
            if point + 1 == self.counts.len() {
                self.counts[point] = left;
                self.leaf();
                self.counts[point] = 0;
                return;
            }
            for v in 0..=left {
                self.counts[point] = v;
                self.descend(point + 1, left - v);
            }
            self.counts[point] = 0;
        }
    }

    let mut search = Search {
        problem,
        counts: vec![0; n],
        best: 0.0,
        best_counts: None,
        ties: Vec::new(),
        explored: 0,
    };
    if n == 1 {
        search.counts[0] = size;
        search.leaf();
    } else {
        search.descend(0, size);
    }

    let wall_time = start.elapsed();
    match search.best_counts {
        Some(counts) => {
            let design = ExactDesign::new(counts);
            let ties = if search.ties.len() > 1 {
                search.ties.into_iter().map(ExactDesign::new).collect()
            } else {
                Vec::new()
            };
            Ok(SolverResult {
                design: Some(design),
                phi: search.best,
                upper_bound: search.best,
                relative_gap: 0.0,
                status: SolverStatus::Optimal,
                nodes: search.explored,
                wall_time,
                ties,
                trace: Vec::new(),
            })
        }
        None => {
            let mut result = SolverResult::infeasible(search.explored, wall_time);
            result.status = SolverStatus::Infeasible;
            Ok(result)
        }
    }
}

/// Brute force directly on an auxiliary problem (e.g. one read back from a
/// portable file, with no source back-reference): enumerates the auxiliary
/// feasible set and maximizes the auxiliary objective.
pub fn brute_force_auxiliary(
    aux: &AuxiliaryProblem,
    options: &SolverOptions,
) -> Result<SolverResult, Error> {
    let start = Instant::now();
    let designs = enumerate_feasible(aux, options.enumeration_cap)?;
    let mut best: Option<(f64, usize)> = None;
    for (k, design) in designs.iter().enumerate() {
        let mut m = SymMatrix::zeros(aux.dim());
        for (i, &count) in design.counts().iter().enumerate() {
            if count > 0 {
                m.add_scaled_outer(aux.regressor(i), count as f64);
            }
        }
        let phi = criterion_d(&InformationMatrix::new_unchecked(m));
        match best {
            Some((bp, _)) if bp >= phi => {}
            _ => best = Some((phi, k)),
        }
    }
    let wall_time = start.elapsed();
    match best {
        Some((phi, k)) => {
            let design = kappa(&designs[k], aux)?;
            Ok(SolverResult {
                design: Some(design),
                phi,
                upper_bound: phi,
                relative_gap: 0.0,
                status: SolverStatus::Optimal,
                nodes: designs.len() as u64,
                wall_time,
                ties: Vec::new(),
                trace: Vec::new(),
            })
        }
        None => {
            let mut result = SolverResult::infeasible(designs.len() as u64, wall_time);
            result.status = SolverStatus::Infeasible;
            Ok(result)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts() {
        assert_eq!(composition_count(3, 2), 6.0);
        assert_eq!(composition_count(4, 4), 35.0);
        assert_eq!(composition_count(1, 5), 1.0);
    }
}
