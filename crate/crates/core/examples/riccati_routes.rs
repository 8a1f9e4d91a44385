//! Direct RK4 on the Riccati equation versus the linear Hamiltonian system,
//! on the 18-dimensional block system of a nine-atom ensemble.

use averaged_lqr::averaged::{assemble_augmented, augmented_problem, AveragedLqrProblem};
use averaged_lqr::experiment::ExperimentConfig;
use averaged_lqr::lqr::{hamiltonian_matrix, riccati_solve_direct, riccati_solve_hamiltonian};

fn main() -> averaged_lqr::Result<()> {
    let config = ExperimentConfig::default();
    let base = config.problem.build()?;
    let prob = AveragedLqrProblem::from_lqr(&base, config.family.measure(base.a(), 3)?)?;
    let block = augmented_problem(&prob, &assemble_augmented(&prob)?);
    println!("block system order {}, Hamiltonian order {}", block.state_dim(), hamiltonian_matrix(&block).rows());

    for steps in [250, 500, 1000, 2000] {
        let direct = riccati_solve_direct(&block, 0.0, steps)?;
        let ham = riccati_solve_hamiltonian(&block, 0.0, steps)?;
        let gap = (0..direct.grid().len())
            .map(|k| (direct.at(k) - ham.at(k)).spectral_norm())
            .fold(0.0, f64::max);
        println!("steps {steps:5}: max_t |P_direct - P_hamiltonian|_2 = {gap:.3e}");
    }
    Ok(())
}
