//! Incumbent heuristic: largest-remainder apportionment of the fractional
//! relaxation counts, greedy repair toward feasibility, then unit-move
//! improvement. Never returns an infeasible design — failure is `None`.

use super::relax::RelaxationResult;
use super::PresolvedProblem;

/// Rounds fractional counts to integers summing exactly to the design size
/// by largest remainder; ties go to the lowest index.
pub fn apportion(fractional: &[f64], total: u32) -> Vec<u32> {
    let n = fractional.len();
    let mut counts: Vec<u32> = fractional
        .iter()
        .map(|&v| v.max(0.0).floor() as u32)
        .collect();
    let mut assigned: i64 = counts.iter().map(|&c| c as i64).sum();
    let mut order: Vec<usize> = (0..n).collect();
    // Descending remainder, index breaking ties.
    order.sort_by(|&a, &b| {
        let ra = fractional[a].max(0.0) - fractional[a].max(0.0).floor();
        let rb = fractional[b].max(0.0) - fractional[b].max(0.0).floor();
        rb.partial_cmp(&ra)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut cursor = 0;
    while assigned < total as i64 {
        counts[order[cursor % n]] += 1;
        assigned += 1;
        cursor += 1;
    }
    // Float drift can overshoot; take units back from the smallest
    // remainders without emptying points.
    let mut back = order.len();
    while assigned > total as i64 {
        back = if back == 0 { order.len() - 1 } else { back - 1 };
        let i = order[back];
        if counts[i] > 0 {
            counts[i] -= 1;
            assigned -= 1;
        }
    }
    counts
}

/// Total violation of the general rows at integer counts, with the support
/// indicator derived from the counts.
fn violation(problem: &PresolvedProblem, counts: &[u32]) -> f64 {
    let full = with_indicators(problem, counts);
    let mut total = 0.0;
    for row in problem.rows() {
        let act: f64 = row.coeffs.iter().map(|&(j, a)| a * full[j] as f64).sum();
        match row.sense {
            super::lp::LpSense::Le => total += (act - row.rhs).max(0.0),
            super::lp::LpSense::Eq => total += (act - row.rhs).abs(),
        }
    }
    total
}

fn with_indicators(problem: &PresolvedProblem, counts: &[u32]) -> Vec<u32> {
    let n = problem.num_points();
    let mut full = vec![0u32; 2 * n];
    full[..n].copy_from_slice(counts);
    for i in 0..n {
        full[n + i] = u32::from(counts[i] > 0);
    }
    full
}

fn feasible(problem: &PresolvedProblem, counts: &[u32]) -> bool {
    problem.integer_point_feasible(&with_indicators(problem, counts))
}

fn logdet(problem: &PresolvedProblem, counts: &[u32]) -> f64 {
    problem
        .integer_point_logdet(&with_indicators(problem, counts))
        .unwrap_or(f64::NEG_INFINITY)
}

/// Builds an integer incumbent from a relaxation solution. Returns the
/// counts and their `log det` when a feasible design is reached within the
/// move budget.
pub fn rounding_incumbent(
    relaxation: &RelaxationResult,
    problem: &PresolvedProblem,
    move_budget: usize,
) -> Option<(Vec<u32>, f64)> {
    let n = problem.num_points();
    let mut counts = apportion(&relaxation.counts, problem.size());
    debug_assert_eq!(
        counts.iter().map(|&c| c as u64).sum::<u64>(),
        problem.size() as u64
    );

    // Repair: greedy single-unit moves that reduce the violation the most.
    let mut budget = move_budget;
    let mut current = violation(problem, &counts);
    while current > 1e-9 && budget > 0 {
        let mut best: Option<(usize, usize, f64)> = None;
        for from in 0..n {
            if counts[from] == 0 {
                continue;
            }
            for to in 0..n {
                if to == from {
                    continue;
                }
                counts[from] -= 1;
                counts[to] += 1;
                let v = violation(problem, &counts);
                counts[from] += 1;
                counts[to] -= 1;
                match best {
                    Some((_, _, bv)) if bv <= v => {}
                    _ => best = Some((from, to, v)),
                }
            }
        }
        match best {
            Some((from, to, v)) if v < current - 1e-12 => {
                counts[from] -= 1;
                counts[to] += 1;
                current = v;
                budget -= 1;
            }
            _ => break, // no improving move
        }
    }
    if !feasible(problem, &counts) {
        return None;
    }

    // Improvement: first-improvement unit moves that stay feasible.
    let mut value = logdet(problem, &counts);
    let mut sweeps = 3;
    while sweeps > 0 {
        sweeps -= 1;
        let mut improved = false;
        for from in 0..n {
            for to in 0..n {
                if to == from || counts[from] == 0 {
                    continue;
                }
                counts[from] -= 1;
                counts[to] += 1;
                if feasible(problem, &counts) {
                    let v = logdet(problem, &counts);
                    if v > value + 1e-12 {
                        value = v;
                        improved = true;
                        continue;
                    }
                }
                counts[from] += 1;
                counts[to] -= 1;
            }
        }
        if !improved {
            break;
        }
    }

    Some((counts, value))
}
