//! Convergence experiments: JSON configuration, per-level solves, reports
//! and CSV/JSON artifacts.
//!
//! A run solves the known-dynamics problem once, then the averaged problem
//! for every level `N` of a measure family, and tabulates value and control
//! errors against W₁ to the true matrix.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::averaged::{
    assemble_augmented, augmented_problem, bound_constants, control_l2_norm, max_euclidean, pmp_residual,
    solve_problem_b, AveragedLqrProblem, BoundConstants, DiscreteMatrixMeasure,
};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::lqr::{riccati_solve_direct, simulate_closed_loop, LqrProblem, RiccatiSolution, Trajectory};
use crate::metrics::{
    convergence_order, riccati_block_deviation, sup_norm_control_error, sup_norm_value_error, w1_to_dirac,
    BoxDomain, ConvergenceRow,
};
use crate::ode::VectorPath;
use crate::random;

pub mod reference;

/// Dense problem data; matrices are row-major arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub a: Mat,
    pub b: Mat,
    pub q: Mat,
    pub r: Mat,
    pub qf: Mat,
    pub horizon: f64,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<LqrProblem> {
        LqrProblem::new(
            self.a.clone(),
            self.b.clone(),
            self.q.clone(),
            self.r.clone(),
            self.qf.clone(),
            self.horizon,
        )
        .map_err(|e| e.within("problem"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    #[serde(rename = "N")]
    pub n: u32,
    pub supports: Vec<Mat>,
    pub weights: Vec<f64>,
}

/// How the measure at level `N` is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    /// Supports `Â` and `Â ± radius·E_j` for every canonical basis matrix
    /// `E_j` (row-major order, `+` before `−`). Level `N` puts mass
    /// `1 − 2^{−N}` on `Â` and splits `2^{−N}` evenly over the perturbations.
    Perturbation { radius: f64 },
    /// Explicit supports and weights per level.
    Explicit { levels: Vec<LevelSpec> },
}

impl FamilySpec {
    pub fn measure(&self, a_hat: &Mat, level: u32) -> Result<DiscreteMatrixMeasure> {
        match self {
            FamilySpec::Perturbation { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("family.radius", "must be positive"));
                }
                let supports = perturbation_supports(a_hat, *radius);
                let spread = 0.5_f64.powi(level as i32);
                let each = spread / (supports.len() - 1) as f64;
                let mut weights = vec![each; supports.len()];
                weights[0] = 1.0 - spread;
                DiscreteMatrixMeasure::new(supports, weights).map_err(|e| e.within("family"))
            }
            FamilySpec::Explicit { levels } => {
                let (i, spec) = levels
                    .iter()
                    .enumerate()
                    .find(|(_, l)| l.n == level)
                    .ok_or_else(|| Error::invalid("family.levels", format!("no level with N={level}")))?;
                DiscreteMatrixMeasure::new(spec.supports.clone(), spec.weights.clone())
                    .map_err(|e| e.within(&format!("family.levels[{i}]")))
            }
        }
    }
}

/// `[Â, Â + rE₁, Â − rE₁, Â + rE₂, …]`.
pub fn perturbation_supports(a_hat: &Mat, radius: f64) -> Vec<Mat> {
    let mut out = vec![a_hat.clone()];
    for j in 0..a_hat.as_slice().len() {
        for sign in [1.0, -1.0] {
            let mut a = a_hat.clone();
            a.as_mut_slice()[j] += sign * radius;
            out.push(a);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub family: FamilySpec,
    /// Initial state for trajectories, costates and bounds.
    pub x0: Vec<f64>,
    /// Initial state for the control-error column; defaults to `x0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_x0: Option<Vec<f64>>,
    #[serde(default)]
    pub s: f64,
    pub k_box: BoxDomain,
    pub steps: usize,
    pub space_grid_per_axis: usize,
    #[serde(rename = "N_range")]
    pub n_range: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// Controlled harmonic oscillator with a nine-atom perturbation family.
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemSpec {
                a: Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap(),
                b: Mat::from_rows(&[[0.0], [1.0]]).unwrap(),
                q: Mat::identity(2),
                r: Mat::diag(&[0.1]),
                qf: Mat::zeros(2, 2),
                horizon: 5.0,
            },
            family: FamilySpec::Perturbation { radius: 0.5 },
            x0: vec![1.0, 0.0],
            control_x0: Some(vec![0.0, 1.0]),
            s: 0.0,
            k_box: BoxDomain::symmetric(2, 2.0),
            steps: 2000,
            space_grid_per_axis: 41,
            n_range: (0..=9).collect(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        ExperimentConfig::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn control_x0(&self) -> &[f64] {
        self.control_x0.as_deref().unwrap_or(&self.x0)
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    /// Checks every field against the solver invariants before anything runs.
    pub fn validate(&self) -> Result<ValidatedConfig> {
        let base = self.problem.build()?;
        let n = base.state_dim();
        if self.x0.len() != n || self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("x0", format!("expected {n} finite entries")));
        }
        if let Some(c) = &self.control_x0 {
            if c.len() != n || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("control_x0", format!("expected {n} finite entries")));
            }
        }
        if !(self.s >= 0.0 && self.s < base.horizon()) {
            return Err(Error::invalid("s", "need 0 <= s < horizon"));
        }
        BoxDomain::new(self.k_box.lower.clone(), self.k_box.upper.clone())?;
        if self.k_box.dim() != n {
            return Err(Error::invalid("k_box", format!("expected dimension {n}")));
        }
        if self.steps < 2 {
            return Err(Error::invalid("steps", "need at least 2 steps"));
        }
        if self.space_grid_per_axis == 0 {
            return Err(Error::invalid("space_grid_per_axis", "must be positive"));
        }
        if self.n_range.is_empty() {
            return Err(Error::invalid("N_range", "must not be empty"));
        }
        let mut seen = self.n_range.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.n_range.len() {
            return Err(Error::invalid("N_range", "duplicate levels"));
        }
        let mut problems = Vec::with_capacity(self.n_range.len());
        for &level in &self.n_range {
            let measure = self.family.measure(base.a(), level)?;
            let prob = AveragedLqrProblem::from_lqr(&base, measure).map_err(|e| e.within("family"))?;
            problems.push((level, prob));
        }
        Ok(ValidatedConfig { base, problems })
    }
}

/// Problems built from a config that passed validation.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub base: LqrProblem,
    pub problems: Vec<(u32, AveragedLqrProblem)>,
}

impl ValidatedConfig {
    /// Uniform measure over every support that appears in any level plus `Â`;
    /// its `C_A` bounds all levels at once.
    fn hull(&self) -> Result<AveragedLqrProblem> {
        let mut atoms = vec![self.base.a().clone()];
        for (_, p) in &self.problems {
            for a in p.measure().supports() {
                if !atoms.contains(a) {
                    atoms.push(a.clone());
                }
            }
        }
        let w = 1.0 / atoms.len() as f64;
        let mut weights = vec![w; atoms.len()];
        weights[0] = 1.0 - w * (atoms.len() - 1) as f64;
        AveragedLqrProblem::from_lqr(&self.base, DiscreteMatrixMeasure::new(atoms, weights)?)
    }
}

/// Per-level quantities beyond the table columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    #[serde(rename = "N")]
    pub n: u32,
    pub value_error_at_start: f64,
    pub pmp_residual: f64,
    pub block_deviation: f64,
    /// `C_K · W₁`, the a-priori bound on the value error.
    pub lipschitz_bound: f64,
    pub averaged_value: f64,
    pub control_l2: f64,
    pub max_state: f64,
    pub max_costate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationEntry {
    #[serde(rename = "N")]
    pub n: u32,
    pub value_error: f64,
    pub value_error_refined: f64,
    pub value_rel_diff: f64,
    pub control_error: f64,
    pub control_error_refined: f64,
    pub control_rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSpotCheck {
    pub index: usize,
    pub supports: usize,
    pub value_error: f64,
    pub w1: f64,
    pub c_k: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub steps: usize,
    pub space_grid_per_axis: usize,
    pub s: f64,
    pub x0: Vec<f64>,
    pub control_x0: Vec<f64>,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Controls of the known-dynamics problem and of every level, from `control_x0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlSeries {
    pub t: Vec<f64>,
    pub reference: Vec<Vec<f64>>,
    pub levels: Vec<(u32, Vec<Vec<f64>>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ConvergenceRow>,
    pub bounds: BoundConstants,
    pub levels: Vec<LevelDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretization: Option<Vec<DiscretizationEntry>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lipschitz_spot_checks: Vec<LipschitzSpotCheck>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub controls: ControlSeries,
}

struct LevelOutcome {
    n: u32,
    alpha1: f64,
    w1: f64,
    value_error: f64,
    control_error: f64,
    diagnostics: LevelDiagnostics,
    control: Vec<Vec<f64>>,
}

struct BaseSolution {
    riccati: RiccatiSolution,
    control: Trajectory,
}

fn solve_base(base: &LqrProblem, s: f64, steps: usize, control_x0: &[f64]) -> Result<BaseSolution> {
    let riccati = riccati_solve_direct(base, s, steps)?;
    let control = simulate_closed_loop(base, &riccati, s, control_x0)?;
    Ok(BaseSolution { riccati, control })
}

fn solve_level(
    config: &ExperimentConfig,
    base: &LqrProblem,
    base_sol: &BaseSolution,
    bounds: &BoundConstants,
    level: u32,
    prob: &AveragedLqrProblem,
    steps: usize,
) -> Result<LevelOutcome> {
    let sol = solve_problem_b(prob, config.s, &config.x0, steps)?;
    let value = sup_norm_value_error(&sol.riccati, &base_sol.riccati, &config.k_box, config.space_grid_per_axis)?;
    let control_u: VectorPath = if config.control_x0() == config.x0.as_slice() {
        sol.u.clone()
    } else {
        let aug = assemble_augmented(prob)?;
        let lqr = augmented_problem(prob, &aug);
        simulate_closed_loop(&lqr, &sol.riccati, config.s, &aug.stack(config.control_x0()))?.u
    };
    let control_error = sup_norm_control_error(&control_u, &base_sol.control.u)?;
    let w1 = w1_to_dirac(prob.measure(), base.a())?;
    let diagnostics = LevelDiagnostics {
        n: level,
        value_error_at_start: value.at_start,
        pmp_residual: pmp_residual(prob, &sol)?,
        block_deviation: riccati_block_deviation(&sol.riccati, &base_sol.riccati)?,
        lipschitz_bound: bounds.c_k * w1,
        averaged_value: sol.value,
        control_l2: control_l2_norm(&sol.u),
        max_state: max_euclidean(&sol.trajectories),
        max_costate: max_euclidean(&sol.costates),
    };
    Ok(LevelOutcome {
        n: level,
        alpha1: prob.measure().weights()[0],
        w1,
        value_error: value.sup,
        control_error,
        diagnostics,
        control: control_u.values,
    })
}

fn orders(errors: &[f64]) -> Vec<Option<f64>> {
    std::iter::once(None)
        .chain(convergence_order(errors).into_iter().map(|r| r.ok()))
        .collect()
}

fn run_levels(config: &ExperimentConfig, validated: &ValidatedConfig, steps: usize) -> Result<(Vec<LevelOutcome>, BaseSolution, BoundConstants)> {
    let base = &validated.base;
    let base_sol = solve_base(base, config.s, steps, config.control_x0())?;
    let bounds = bound_constants(&validated.hull()?, &config.x0, config.k_box.radius())?;
    let outcomes = validated
        .problems
        .par_iter()
        .map(|(level, prob)| {
            solve_level(config, base, &base_sol, &bounds, *level, prob, steps).map_err(|e| Error::AtLevel {
                level: *level,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((outcomes, base_sol, bounds))
}

fn build_report(config: &ExperimentConfig, outcomes: Vec<LevelOutcome>, base_sol: BaseSolution, bounds: BoundConstants) -> ExperimentReport {
    let value_errors: Vec<f64> = outcomes.iter().map(|o| o.value_error).collect();
    let control_errors: Vec<f64> = outcomes.iter().map(|o| o.control_error).collect();
    let value_orders = orders(&value_errors);
    let control_orders = orders(&control_errors);
    let rows = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| ConvergenceRow {
            n: o.n,
            alpha1: o.alpha1,
            value_error: o.value_error,
            value_order: value_orders[i],
            control_error: o.control_error,
            control_order: control_orders[i],
            w1: o.w1,
        })
        .collect();
    let grid = base_sol.control.u.grid;
    let controls = ControlSeries {
        t: grid.nodes().collect(),
        reference: base_sol.control.u.values,
        levels: outcomes.iter().map(|o| (o.n, o.control.clone())).collect(),
    };
    ExperimentReport {
        rows,
        bounds,
        levels: outcomes.into_iter().map(|o| o.diagnostics).collect(),
        discretization: None,
        lipschitz_spot_checks: Vec::new(),
        provenance: Provenance {
            config_hash: config.hash(),
            steps: config.steps,
            space_grid_per_axis: config.space_grid_per_axis,
            s: config.s,
            x0: config.x0.clone(),
            control_x0: config.control_x0().to_vec(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
        },
        controls,
    }
}

/// Solves the known-dynamics problem once and the averaged problem for every
/// level, producing the convergence table.
pub fn run_table1(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let validated = config.validate()?;
    let (outcomes, base_sol, bounds) = run_levels(config, &validated, config.steps)?;
    Ok(build_report(config, outcomes, base_sol, bounds))
}

/// [`run_table1`] plus a steps-vs-2·steps study and, when `seed` is given,
/// Lipschitz-bound spot checks on ten seeded random problems.
pub fn run_sweep(config: &ExperimentConfig, seed: Option<u64>) -> Result<ExperimentReport> {
    let validated = config.validate()?;
    let (outcomes, base_sol, bounds) = run_levels(config, &validated, config.steps)?;
    let (refined, _, _) = run_levels(config, &validated, 2 * config.steps)?;
    let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
    let discretization = outcomes
        .iter()
        .zip(&refined)
        .map(|(c, f)| DiscretizationEntry {
            n: c.n,
            value_error: c.value_error,
            value_error_refined: f.value_error,
            value_rel_diff: rel(c.value_error, f.value_error),
            control_error: c.control_error,
            control_error_refined: f.control_error,
            control_rel_diff: rel(c.control_error, f.control_error),
        })
        .collect();
    let mut report = build_report(config, outcomes, base_sol, bounds);
    report.discretization = Some(discretization);
    if let Some(seed) = seed {
        report.lipschitz_spot_checks = lipschitz_spot_checks(seed, 10)?;
        report.provenance.seed = Some(seed);
    }
    Ok(report)
}

/// Value error against `C_K · W₁` on random two-dimensional problems with up to four supports.
pub fn lipschitz_spot_checks(seed: u64, count: usize) -> Result<Vec<LipschitzSpotCheck>> {
    use rand::Rng;
    let mut rng = random::rng_from_seed(seed);
    let k_box = BoxDomain::symmetric(2, 1.0);
    (0..count)
        .map(|index| {
            let supports = rng.gen_range(2..=4);
            let horizon = rng.gen_range(0.5..2.0);
            let (base, averaged) = random::averaged_problem(&mut rng, 2, 1, supports, horizon, 0.5);
            let steps = 400;
            let base_sol = riccati_solve_direct(&base, 0.0, steps)?;
            let sol = solve_problem_b(&averaged, 0.0, &[1.0, 0.0], steps)?;
            let err = sup_norm_value_error(&sol.riccati, &base_sol, &k_box, 11)?.sup;
            let w1 = w1_to_dirac(averaged.measure(), base.a())?;
            let c_k = bound_constants(&averaged, &[1.0, 0.0], k_box.radius())?.c_k;
            Ok(LipschitzSpotCheck {
                index,
                supports,
                value_error: err,
                w1,
                c_k,
                holds: err <= c_k * w1,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Known dynamics: one `(t, x…, u…)` file.
    KnownDynamics,
    /// Averaged problem at one level: a trajectory file per support plus the shared control.
    Averaged { level: u32 },
}

/// Writes trajectory and control CSVs; returns the paths written.
pub fn run_solve(config: &ExperimentConfig, mode: SolveMode, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let validated = config.validate()?;
    fs::create_dir_all(out_dir)?;
    match mode {
        SolveMode::KnownDynamics => {
            let base = &validated.base;
            let sol = riccati_solve_direct(base, config.s, config.steps)?;
            let traj = simulate_closed_loop(base, &sol, config.s, &config.x0)?;
            let mut header = state_columns("x", base.state_dim());
            header.extend(state_columns("u", base.control_dim()));
            let rows: Vec<Vec<f64>> = traj
                .x
                .values
                .iter()
                .zip(&traj.u.values)
                .map(|(x, u)| x.iter().chain(u).copied().collect())
                .collect();
            let path = out_dir.join("problem_a.csv");
            write_atomic(&path, &time_series_csv(&traj.x.grid.nodes().collect::<Vec<_>>(), &header, &rows))?;
            Ok(vec![path])
        }
        SolveMode::Averaged { level } => {
            let prob = match validated.problems.iter().find(|(n, _)| *n == level) {
                Some((_, p)) => p.clone(),
                None => AveragedLqrProblem::from_lqr(&validated.base, config.family.measure(validated.base.a(), level)?)?,
            };
            let sol = solve_problem_b(&prob, config.s, &config.x0, config.steps)?;
            let t: Vec<f64> = sol.u.grid.nodes().collect();
            let mut written = Vec::new();
            for (i, tr) in sol.trajectories.iter().enumerate() {
                let path = out_dir.join(format!("problem_b_N{level}_support{}.csv", i + 1));
                write_atomic(&path, &time_series_csv(&t, &state_columns("x", prob.state_dim()), &tr.values))?;
                written.push(path);
            }
            let path = out_dir.join(format!("problem_b_N{level}_control.csv"));
            write_atomic(&path, &time_series_csv(&t, &state_columns("u", prob.control_dim()), &sol.u.values))?;
            written.push(path);
            Ok(written)
        }
    }
}

fn state_columns(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect()
}

/// C `%.12e` formatting: `-1.234567890123e-05`.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_sci).unwrap_or_default()
}

fn time_series_csv(t: &[f64], header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = String::from("t");
    for h in header {
        out.push(',');
        out.push_str(h);
    }
    out.push('\n');
    for (tk, row) in t.iter().zip(rows) {
        out.push_str(&format_sci(*tk));
        for v in row {
            out.push(',');
            out.push_str(&format_sci(*v));
        }
        out.push('\n');
    }
    out
}

/// Table CSV: `N,alpha1,value_error,value_order,control_error,control_order,w1`.
pub fn table_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("N,alpha1,value_error,value_order,control_error,control_order,w1\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            format_sci(r.alpha1),
            format_sci(r.value_error),
            format_opt(r.value_order),
            format_sci(r.control_error),
            format_opt(r.control_order),
            format_sci(r.w1)
        ));
    }
    out
}

/// Per-level diagnostics CSV.
pub fn diagnostics_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "N,value_error_at_start,pmp_residual,block_deviation,lipschitz_bound,averaged_value,control_l2,max_state,max_costate\n",
    );
    for d in &report.levels {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            d.n,
            format_sci(d.value_error_at_start),
            format_sci(d.pmp_residual),
            format_sci(d.block_deviation),
            format_sci(d.lipschitz_bound),
            format_sci(d.averaged_value),
            format_sci(d.control_l2),
            format_sci(d.max_state),
            format_sci(d.max_costate)
        ));
    }
    out
}

/// Known-dynamics control next to the control of every level.
pub fn controls_csv(report: &ExperimentReport) -> String {
    let c = &report.controls;
    let m = c.reference.first().map(Vec::len).unwrap_or(0);
    let mut header: Vec<String> = (1..=m).map(|j| format!("u{j}_true")).collect();
    for (n, _) in &c.levels {
        header.extend((1..=m).map(|j| format!("u{j}_N{n}")));
    }
    let rows: Vec<Vec<f64>> = (0..c.t.len())
        .map(|k| {
            let mut row = c.reference[k].clone();
            for (_, u) in &c.levels {
                row.extend_from_slice(&u[k]);
            }
            row
        })
        .collect();
    time_series_csv(&c.t, &header, &rows)
}

pub fn discretization_csv(entries: &[DiscretizationEntry]) -> String {
    let mut out = String::from(
        "N,value_error,value_error_refined,value_rel_diff,control_error,control_error_refined,control_rel_diff\n",
    );
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.n,
            format_sci(e.value_error),
            format_sci(e.value_error_refined),
            format_sci(e.value_rel_diff),
            format_sci(e.control_error),
            format_sci(e.control_error_refined),
            format_sci(e.control_rel_diff)
        ));
    }
    out
}

/// Writes `table.csv`, `diagnostics.csv`, `controls.csv`, `report.json`
/// (and `discretization.csv` for sweeps); returns the paths written.
pub fn write_report(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut files = vec![
        ("table.csv", table_csv(report)),
        ("diagnostics.csv", diagnostics_csv(report)),
        ("controls.csv", controls_csv(report)),
        ("report.json", serde_json::to_string_pretty(report)? + "\n"),
    ];
    if let Some(d) = &report.discretization {
        files.push(("discretization.csv", discretization_csv(d)));
    }
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = out_dir.join(name);
        write_atomic(&path, &contents)?;
        written.push(path);
    }
    Ok(written)
}

/// Write to a sibling temporary file, then rename over the target.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid("output path", format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_format_matches_c() {
        assert_eq!(format_sci(6.08), "6.080000000000e+00");
        assert_eq!(format_sci(-0.000123), "-1.230000000000e-04");
        assert_eq!(format_sci(0.0), "0.000000000000e+00");
        assert_eq!(format_sci(1.5e120), "1.500000000000e+120");
    }

    #[test]
    fn perturbation_family_weights() {
        let a = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let fam = FamilySpec::Perturbation { radius: 0.5 };
        let m0 = fam.measure(&a, 0).unwrap();
        assert_eq!(m0.len(), 9);
        assert_eq!(m0.weights()[0], 0.0);
        assert!(m0.weights()[1..].iter().all(|&w| w == 0.125));
        let m3 = fam.measure(&a, 3).unwrap();
        assert_eq!(m3.weights()[0], 0.875);
        assert_eq!(m3.supports()[3].as_slice(), &[0.0, 1.5, -1.0, 0.0]);
        assert_eq!(m3.supports()[4].as_slice(), &[0.0, 0.5, -1.0, 0.0]);
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut c = ExperimentConfig::default();
        c.problem.q = Mat::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        match c.validate() {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "problem.q"),
            other => panic!("{other:?}"),
        }
        let mut c = ExperimentConfig::default();
        c.x0 = vec![1.0];
        assert!(matches!(c.validate(), Err(Error::Invalid { field, .. }) if field == "x0"));
        let mut c = ExperimentConfig::default();
        c.family = FamilySpec::Explicit {
            levels: vec![LevelSpec {
                n: 0,
                supports: vec![Mat::identity(2)],
                weights: vec![0.5],
            }],
        };
        c.n_range = vec![0];
        assert!(matches!(c.validate(), Err(Error::Invalid { field, .. }) if field == "family.levels[0].weights"));
        c.n_range = vec![1];
        assert!(matches!(c.validate(), Err(Error::Invalid { field, .. }) if field == "family.levels"));
    }

    #[test]
    fn config_round_trip() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }
}
