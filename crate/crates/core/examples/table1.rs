//! Convergence of the averaged value and control as the measure concentrates
//! on the true matrix. Writes CSV and JSON artifacts to `out/table1`.
//!
//! ```bash
//! cargo run --release --example table1
//! ```

use std::path::Path;

use averaged_lqr::experiment::{reference, run_table1, write_report, ExperimentConfig};

fn main() -> averaged_lqr::Result<()> {
    let report = run_table1(&ExperimentConfig::default())?;
    println!(" N   value err  order  control err  order       W1");
    for r in &report.rows {
        let order = |o: Option<f64>| o.map_or("   -".to_string(), |v| format!("{v:.2}"));
        println!(
            "{:2}  {:10.3e}  {}  {:11.3e}  {}  {:.3e}",
            r.n,
            r.value_error,
            order(r.value_order),
            r.control_error,
            order(r.control_order),
            r.w1
        );
    }
    let checks = reference::check_report(&report);
    println!("{} of {} reference checks pass", checks.iter().filter(|c| c.passed).count(), checks.len());
    for path in write_report(&report, Path::new("out/table1"))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
