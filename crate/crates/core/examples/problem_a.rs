//! Known dynamics: Riccati solve, value, and the closed-loop trajectory of the
//! controlled oscillator.
//!
//! ```bash
//! cargo run --example problem_a
//! ```

use averaged_lqr::linalg::Mat;
use averaged_lqr::lqr::{cost_open_loop, riccati_solve_direct, simulate_closed_loop, value, LqrProblem, COST_PER_VALUE};

fn main() -> averaged_lqr::Result<()> {
    let prob = LqrProblem::new(
        Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]])?,
        Mat::from_rows(&[[0.0], [1.0]])?,
        Mat::identity(2),
        Mat::diag(&[0.1]),
        Mat::zeros(2, 2),
        5.0,
    )?;
    let x0 = [1.0, 0.0];
    let sol = riccati_solve_direct(&prob, 0.0, 2000)?;
    let traj = simulate_closed_loop(&prob, &sol, 0.0, &x0)?;

    println!("P(0) = {:?}", sol.at(0).to_rows());
    let v = value(&sol, 0, &x0)?;
    println!("value x0'P(0)x0  = {v:.6}");
    println!("optimal cost     = {:.6}", COST_PER_VALUE * v);
    println!("simulated cost   = {:.6}", cost_open_loop(&prob, &traj)?);

    for k in (0..=2000).step_by(250) {
        let x = traj.x.at(k);
        println!("t={:4.2}  x=({:+.4}, {:+.4})  u={:+.4}", traj.grid().node(k), x[0], x[1], traj.u.at(k)[0]);
    }
    Ok(())
}
