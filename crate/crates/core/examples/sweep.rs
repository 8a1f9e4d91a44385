//! Table plus a steps-versus-doubled-steps study and seeded Lipschitz spot checks.

use averaged_lqr::experiment::{run_sweep, ExperimentConfig};

fn main() -> averaged_lqr::Result<()> {
    let config = ExperimentConfig {
        steps: 1000,
        ..ExperimentConfig::default()
    };
    let report = run_sweep(&config, Some(7))?;
    for d in report.discretization.as_deref().unwrap_or_default() {
        println!(
            "N={}  value err {:.4e} -> {:.4e} (rel {:.1e})  control err {:.4e} -> {:.4e} (rel {:.1e})",
            d.n, d.value_error, d.value_error_refined, d.value_rel_diff, d.control_error, d.control_error_refined, d.control_rel_diff
        );
    }
    for s in &report.lipschitz_spot_checks {
        println!("random problem {}: {} supports, error {:.3e} <= C_K W1 = {:.3e}: {}", s.index, s.supports, s.value_error, s.c_k * s.w1, s.holds);
    }
    Ok(())
}
