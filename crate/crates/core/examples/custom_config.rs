//! Building a config in code with an explicit measure family, saving it as
//! JSON, and running it. The saved file works with `averaged-lqr table1 --config`.

use averaged_lqr::experiment::{run_table1, ExperimentConfig, FamilySpec, LevelSpec};
use averaged_lqr::linalg::Mat;

fn main() -> averaged_lqr::Result<()> {
    let a_hat = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]])?;
    let damped = Mat::from_rows(&[[0.0, 1.0], [-1.0, -0.4]])?;
    // two-atom measures sliding toward the undamped oscillator
    let levels = (0..6)
        .map(|n| {
            let w = 0.5_f64.powi(n as i32);
            LevelSpec {
                n,
                supports: vec![a_hat.clone(), damped.clone()],
                weights: vec![1.0 - w, w],
            }
        })
        .collect();
    let config = ExperimentConfig {
        family: FamilySpec::Explicit { levels },
        n_range: (0..6).collect(),
        steps: 1000,
        space_grid_per_axis: 21,
        ..ExperimentConfig::default()
    };
    std::fs::create_dir_all("out")?;
    std::fs::write("out/custom_config.json", config.to_json_string())?;

    for r in run_table1(&config)?.rows {
        println!("N={}  W1={:.4}  value err={:.4e}  order={:?}", r.n, r.w1, r.value_error, r.value_order);
    }
    Ok(())
}
