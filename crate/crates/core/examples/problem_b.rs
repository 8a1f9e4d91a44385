//! Averaged control of a nine-member ensemble of oscillators: one control,
//! nine trajectories.
//!
//! ```bash
//! cargo run --example problem_b
//! ```

use averaged_lqr::averaged::{averaged_cost, solve_problem_b, AveragedLqrProblem};
use averaged_lqr::experiment::ExperimentConfig;

fn main() -> averaged_lqr::Result<()> {
    let config = ExperimentConfig::default();
    let base = config.problem.build()?;
    // N = 0: all mass on the eight perturbed matrices
    let measure = config.family.measure(base.a(), 0)?;
    let prob = AveragedLqrProblem::from_lqr(&base, measure)?;

    let x0 = [1.0, 0.0];
    let sol = solve_problem_b(&prob, 0.0, &x0, 2000)?;
    println!("averaged value = {:.6}", sol.value);
    println!("averaged cost  = {:.6}", averaged_cost(&prob, &sol.u, 0.0, &x0)?);

    for (i, (a, x)) in prob.measure().supports().iter().zip(&sol.trajectories).enumerate() {
        let end = x.last();
        println!("support {}: A = {:?}  x(T) = ({:+.4}, {:+.4})", i + 1, a.to_rows(), end[0], end[1]);
    }
    Ok(())
}
