use lasdesign::models::{example_theta, CrModel, InformationModel};
use lasdesign::solve::{solve_problem, SolverOptions};
use lasdesign::{DesignSpace, LasProblem};
use std::time::Duration;

fn main() {
    let space = DesignSpace::grid(0.0, 100.0, 101).unwrap();
    let model = InformationModel::ContinuationRatio(CrModel::new(example_theta()));
    let problem = LasProblem::new(space, model, vec![], 100).unwrap();
    let options = SolverOptions {
        relative_gap: 0.01,
        time_limit: Some(Duration::from_secs(1800)),
        relaxation_iter_cap: 600,
        ..SolverOptions::default()
    };
    let start = std::time::Instant::now();
    let result = solve_problem(&problem, &options).unwrap();
    println!(
        "status {:?} phi {:.6} bound {:.6} gap {:.6} nodes {} wall {:?} total {:?}",
        result.status, result.phi, result.upper_bound, result.relative_gap,
        result.nodes, result.wall_time, start.elapsed()
    );
    if let Some(d) = result.design {
        let support: Vec<(usize, u32)> = d
            .counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
            .collect();
        println!("design: {support:?}");
    }
}
