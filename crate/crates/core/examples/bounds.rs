//! A-priori bounds next to the solved quantities they control.

use averaged_lqr::averaged::{bound_constants, control_l2_norm, max_euclidean, solve_problem_b, AveragedLqrProblem};
use averaged_lqr::experiment::ExperimentConfig;

fn main() -> averaged_lqr::Result<()> {
    let config = ExperimentConfig::default();
    let base = config.problem.build()?;
    let x0 = [1.0, 0.0];
    let prob = AveragedLqrProblem::from_lqr(&base, config.family.measure(base.a(), 0)?)?;
    let c = bound_constants(&prob, &x0, config.k_box.radius())?;
    let sol = solve_problem_b(&prob, 0.0, &x0, 2000)?;

    println!("C_A = {}, r1 = {}", c.c_a, c.r1);
    println!("|u|_L2        {:.4}  <= {:.4e}", control_l2_norm(&sol.u), c.c_u);
    println!("max |x_i(t)|  {:.4}  <= {:.4e}", max_euclidean(&sol.trajectories), c.c_x);
    println!("max |p_i(t)|  {:.4}  <= {:.4e}", max_euclidean(&sol.costates), c.c_p);
    println!("value Lipschitz constant on |x0| <= {:.3}: C_K = {:.4e}", c.k_radius, c.c_k);
    Ok(())
}
