//! Optimality conditions: costates, the stationarity residual, and the
//! forward-backward sweep as an independent route to the same control.

use averaged_lqr::averaged::{forward_backward_sweep, pmp_residual, solve_problem_b, AveragedLqrProblem, SweepOptions};
use averaged_lqr::experiment::ExperimentConfig;
use averaged_lqr::linalg::Mat;
use averaged_lqr::lqr::LqrProblem;
use averaged_lqr::metrics::sup_norm_control_error;

fn main() -> averaged_lqr::Result<()> {
    let config = ExperimentConfig::default();
    let base = config.problem.build()?;
    let x0 = [1.0, 0.0];
    for steps in [500, 1000, 2000, 4000] {
        let prob = AveragedLqrProblem::from_lqr(&base, config.family.measure(base.a(), 2)?)?;
        let sol = solve_problem_b(&prob, 0.0, &x0, steps)?;
        println!("steps {steps:5}: PMP residual {:.3e}", pmp_residual(&prob, &sol)?);
    }

    // the sweep needs a milder problem: shorter horizon, heavier control cost
    let mild = LqrProblem::new(base.a().clone(), base.b().clone(), Mat::identity(2), Mat::diag(&[1.0]), Mat::identity(2), 2.0)?;
    let prob = AveragedLqrProblem::from_lqr(&mild, config.family.measure(mild.a(), 1)?)?;
    let riccati = solve_problem_b(&prob, 0.0, &x0, 1000)?;
    let sweep = forward_backward_sweep(&prob, 0.0, &x0, 1000, &SweepOptions::default())?;
    println!(
        "sweep: {} iterations at relaxation {}, |u_sweep - u_riccati|_inf = {:.3e}",
        sweep.iterations,
        sweep.relaxation,
        sup_norm_control_error(&sweep.u, &riccati.u)?
    );
    Ok(())
}
