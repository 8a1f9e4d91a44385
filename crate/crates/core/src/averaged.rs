//! Averaged LQR over a finite ensemble of state matrices.
//!
//! One control `u` drives every system `ẋᵢ = Aᵢxᵢ + Bu` from the same
//! initial state, and the cost is the `αᵢ`-weighted mean of the individual
//! Bolza costs. For finite support this is an ordinary LQR on the stacked
//! state `X = (x₁, …, x_M)` of dimension `nM`.
//!
//! Costates follow the sign convention `−ṗᵢ = Aᵢᵀpᵢ − Q x̄ᵢ`,
//! `−pᵢ(T) = Q_f x̄ᵢ(T)`, under which stationarity reads
//! `ū = +R⁻¹Bᵀ Σ αᵢ pᵢ`. Along the optimum `Σ αᵢ pᵢ = −Σ (P̃X)ᵢ`, i.e. the
//! costates are the negated gradient blocks of the Riccati value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, Mat};
use crate::lqr::{
    bolza_cost, l2_norm_squared, riccati_solve_direct, simulate_closed_loop, CostData, LqrProblem, RiccatiSolution,
};
use crate::ode::{integrate_ode, Direction, TimeGrid, VectorPath};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// `π = Σ αᵢ δ_{Aᵢ}` on square matrices of a common order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMatrixMeasure {
    supports: Vec<Mat>,
    weights: Vec<f64>,
    c_a: f64,
}

impl DiscreteMatrixMeasure {
    pub fn new(supports: Vec<Mat>, weights: Vec<f64>) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::invalid("supports", "need at least one support matrix"));
        }
        if supports.len() != weights.len() {
            return Err(Error::invalid(
                "weights",
                format!("{} weights for {} supports", weights.len(), supports.len()),
            ));
        }
        let n = supports[0].rows();
        for (i, a) in supports.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::invalid(format!("supports[{i}]"), format!("expected {n}x{n}, got {:?}", a.shape())));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!("weights[{i}]"), format!("must be nonnegative, got {w}")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid("weights", format!("must sum to 1, got {total}")));
        }
        let c_a = supports.iter().map(Mat::spectral_norm).fold(0.0, f64::max);
        Ok(DiscreteMatrixMeasure {
            supports,
            weights,
            c_a,
        })
    }

    pub fn dirac(a: Mat) -> Result<Self> {
        DiscreteMatrixMeasure::new(vec![a], vec![1.0])
    }

    pub fn supports(&self) -> &[Mat] {
        &self.supports
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    /// Order `n` of the support matrices.
    pub fn dim(&self) -> usize {
        self.supports[0].rows()
    }

    /// `C_A = maxᵢ ‖Aᵢ‖₂`.
    pub fn c_a(&self) -> f64 {
        self.c_a
    }

    /// Expectation of a per-support quantity, summed in support order.
    pub fn expect(&self, f: impl Fn(usize, &Mat) -> f64) -> f64 {
        self.supports
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(i, (a, w))| w * f(i, a))
            .sum()
    }
}

/// Averaged problem: a measure over state matrices plus shared `B, Q, R, Q_f, T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedLqrProblem {
    measure: DiscreteMatrixMeasure,
    cost: CostData,
}

impl AveragedLqrProblem {
    pub fn new(measure: DiscreteMatrixMeasure, b: Mat, q: Mat, r: Mat, qf: Mat, horizon: f64) -> Result<Self> {
        let cost = CostData::new(measure.dim(), b, q, r, qf, horizon)?;
        Ok(AveragedLqrProblem { measure, cost })
    }

    /// Same `B, Q, R, Q_f, T` as a known-dynamics problem, with a measure over `A`.
    pub fn from_lqr(prob: &LqrProblem, measure: DiscreteMatrixMeasure) -> Result<Self> {
        if measure.dim() != prob.state_dim() {
            return Err(Error::invalid(
                "measure",
                format!("support order {} differs from state dimension {}", measure.dim(), prob.state_dim()),
            ));
        }
        Ok(AveragedLqrProblem {
            measure,
            cost: CostData {
                b: prob.b().clone(),
                q: prob.q().clone(),
                r: prob.r().clone(),
                qf: prob.qf().clone(),
                horizon: prob.horizon(),
                r_inv: prob.r_inv().clone(),
                r_min: prob.r_min(),
            },
        })
    }

    pub fn measure(&self) -> &DiscreteMatrixMeasure {
        &self.measure
    }
    pub fn b(&self) -> &Mat {
        &self.cost.b
    }
    pub fn q(&self) -> &Mat {
        &self.cost.q
    }
    pub fn r(&self) -> &Mat {
        &self.cost.r
    }
    pub fn qf(&self) -> &Mat {
        &self.cost.qf
    }
    pub fn horizon(&self) -> f64 {
        self.cost.horizon
    }
    pub fn r_min(&self) -> f64 {
        self.cost.r_min
    }
    pub fn state_dim(&self) -> usize {
        self.measure.dim()
    }
    pub fn control_dim(&self) -> usize {
        self.cost.b.cols()
    }

    /// Known-dynamics problem for state matrix `a` with this problem's costs.
    pub fn with_state_matrix(&self, a: Mat) -> Result<LqrProblem> {
        if a.shape() != (self.state_dim(), self.state_dim()) {
            return Err(Error::shape("with_state_matrix", format!("{:?}", a.shape())));
        }
        Ok(LqrProblem::from_parts(a, self.cost.clone()))
    }

    fn grid(&self, s: f64, steps: usize) -> Result<TimeGrid> {
        if !(s >= 0.0 && s < self.horizon()) {
            return Err(Error::invalid("s", format!("need 0 <= s < T, got s={s}")));
        }
        TimeGrid::new(s, self.horizon(), steps)
    }

    fn check_x0(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.state_dim() {
            return Err(Error::shape(
                "initial state",
                format!("expected dimension {}, got {}", self.state_dim(), x0.len()),
            ));
        }
        Ok(())
    }

    fn check_control(&self, u: &VectorPath) -> Result<()> {
        if u.dim() != self.control_dim() {
            return Err(Error::shape(
                "control",
                format!("expected dimension {}, got {}", self.control_dim(), u.dim()),
            ));
        }
        if (u.grid.t_end() - self.horizon()).abs() > 1e-12 * self.horizon() {
            return Err(Error::GridMismatch("control does not end at the horizon".into()));
        }
        Ok(())
    }
}

/// Block system on the stacked state `X = (x₁, …, x_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedLqr {
    /// `diag(A₁, …, A_M)`
    pub a: Mat,
    /// `(B; …; B)`
    pub b: Mat,
    /// `diag(α₁Q, …, α_M Q)`
    pub q: Mat,
    /// `diag(α₁Q_f, …, α_M Q_f)`
    pub qf: Mat,
    pub n: usize,
    pub supports: usize,
}

impl AugmentedLqr {
    pub fn dim(&self) -> usize {
        self.n * self.supports
    }

    /// `(x₀, …, x₀)`.
    pub fn stack(&self, x0: &[f64]) -> Vec<f64> {
        x0.repeat(self.supports)
    }

    /// Splits a stacked vector into its per-support blocks.
    pub fn split<'a>(&self, stacked: &'a [f64]) -> impl Iterator<Item = &'a [f64]> {
        stacked.chunks(self.n)
    }
}

pub fn assemble_augmented(prob: &AveragedLqrProblem) -> Result<AugmentedLqr> {
    let measure = prob.measure();
    let n = measure.dim();
    if prob.b().rows() != n || prob.q().shape() != (n, n) || prob.qf().shape() != (n, n) {
        return Err(Error::shape("assemble_augmented", "cost matrices do not match the support order"));
    }
    let weighted = |m: &Mat| -> Vec<Mat> { measure.weights().iter().map(|&w| m.scale(w)).collect() };
    Ok(AugmentedLqr {
        a: Mat::block_diag(measure.supports()),
        b: Mat::vstack(&vec![prob.b().clone(); measure.len()])?,
        q: Mat::block_diag(&weighted(prob.q())),
        qf: Mat::block_diag(&weighted(prob.qf())),
        n,
        supports: measure.len(),
    })
}

/// The augmented system as a known-dynamics LQR with the shared `R` and `T`.
pub fn augmented_problem(prob: &AveragedLqrProblem, aug: &AugmentedLqr) -> LqrProblem {
    LqrProblem::from_parts(
        aug.a.clone(),
        CostData {
            b: aug.b.clone(),
            q: aug.q.clone(),
            r: prob.cost.r.clone(),
            qf: aug.qf.clone(),
            horizon: prob.cost.horizon,
            r_inv: prob.cost.r_inv.clone(),
            r_min: prob.cost.r_min,
        },
    )
}

#[derive(Debug, Clone)]
pub struct ProblemBSolution {
    /// Riccati solution of the `nM`-dimensional block system.
    pub riccati: RiccatiSolution,
    /// Optimal control realized along the block closed loop from `(x₀, …, x₀)`.
    pub u: VectorPath,
    pub trajectories: Vec<VectorPath>,
    pub costates: Vec<VectorPath>,
    /// `X₀ᵀ P̃(s) X₀`.
    pub value: f64,
}

pub fn solve_problem_b(prob: &AveragedLqrProblem, s: f64, x0: &[f64], steps: usize) -> Result<ProblemBSolution> {
    prob.check_x0(x0)?;
    prob.grid(s, steps)?;
    let aug = assemble_augmented(prob)?;
    let lqr = augmented_problem(prob, &aug);
    let riccati = riccati_solve_direct(&lqr, s, steps)?;
    let big_x0 = aug.stack(x0);
    let closed = simulate_closed_loop(&lqr, &riccati, s, &big_x0)?;
    let grid = closed.x.grid;
    let trajectories = (0..aug.supports)
        .map(|i| VectorPath::new(grid, closed.x.values.iter().map(|v| v[i * aug.n..(i + 1) * aug.n].to_vec()).collect()))
        .collect::<Result<Vec<_>>>()?;
    let costates = costate_solve(prob, &trajectories)?;
    let value = riccati.at(0).quadratic_form(&big_x0);
    Ok(ProblemBSolution {
        riccati,
        u: closed.u,
        trajectories,
        costates,
        value,
    })
}

/// Forward RK4 of every `ẋᵢ = Aᵢxᵢ + B u(t)`, `u` interpolated linearly.
pub fn simulate_ensemble(prob: &AveragedLqrProblem, u: &VectorPath, x0: &[f64]) -> Result<Vec<VectorPath>> {
    prob.check_x0(x0)?;
    prob.check_control(u)?;
    let b = prob.b();
    prob.measure()
        .supports()
        .iter()
        .map(|a| {
            integrate_ode(
                |t, x| {
                    let bu = b.matvec(&u.interpolate(t));
                    a.matvec(x).iter().zip(bu).map(|(ax, bu)| ax + bu).collect()
                },
                x0,
                &u.grid,
                Direction::Forward,
            )
        })
        .collect()
}

/// `Σ αᵢ Jᵢ[u]`, each `Jᵢ` the Bolza cost along the trajectory of `Aᵢ`.
pub fn averaged_cost(prob: &AveragedLqrProblem, u: &VectorPath, s: f64, x0: &[f64]) -> Result<f64> {
    if (u.grid.t_start() - s).abs() > 1e-12 * prob.horizon() {
        return Err(Error::GridMismatch(format!("control starts at {}, expected {s}", u.grid.t_start())));
    }
    let trajectories = simulate_ensemble(prob, u, x0)?;
    Ok(prob
        .measure()
        .expect(|i, _| bolza_cost(prob.q(), prob.r(), prob.qf(), &trajectories[i], u)))
}

/// Backward RK4 of `−ṗᵢ = Aᵢᵀpᵢ − Q x̄ᵢ` from `pᵢ(T) = −Q_f x̄ᵢ(T)` for every support.
pub fn costate_solve(prob: &AveragedLqrProblem, trajectories: &[VectorPath]) -> Result<Vec<VectorPath>> {
    if trajectories.len() != prob.measure().len() {
        return Err(Error::shape(
            "costate_solve",
            format!("{} trajectories for {} supports", trajectories.len(), prob.measure().len()),
        ));
    }
    let grid = trajectories[0].grid;
    for tr in trajectories {
        grid.ensure_same(&tr.grid, "costate trajectories")?;
        if tr.dim() != prob.state_dim() {
            return Err(Error::shape("costate_solve", "trajectory dimension differs from state dimension"));
        }
    }
    let q = prob.q();
    prob.measure()
        .supports()
        .iter()
        .zip(trajectories)
        .map(|(a, xbar)| {
            let at = a.transpose();
            let terminal: Vec<f64> = prob.qf().matvec(xbar.last()).into_iter().map(|v| -v).collect();
            // ṗ = −Aᵀp + Q x̄
            integrate_ode(
                |t, p| {
                    let qx = q.matvec(&xbar.interpolate(t));
                    at.matvec(p).iter().zip(qx).map(|(atp, qx)| qx - atp).collect()
                },
                &terminal,
                &grid,
                Direction::Backward,
            )
        })
        .collect()
}

/// `R⁻¹Bᵀ Σ αᵢ pᵢ(t_k)` at every node.
pub fn stationary_control(prob: &AveragedLqrProblem, costates: &[VectorPath]) -> Result<VectorPath> {
    let grid = costates[0].grid;
    let gain = prob.cost.r_inv.matmul(&prob.b().transpose());
    let n = prob.state_dim();
    let values = (0..grid.len())
        .map(|k| {
            let mut mean = vec![0.0; n];
            for (p, &w) in costates.iter().zip(prob.measure().weights()) {
                for (m, v) in mean.iter_mut().zip(p.at(k)) {
                    *m += w * v;
                }
            }
            gain.matvec(&mean)
        })
        .collect();
    VectorPath::new(grid, values)
}

fn sup_distance(a: &VectorPath, b: &VectorPath) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| norm(&x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>()))
        .fold(0.0, f64::max)
}

/// `sup_k |u(t_k) − R⁻¹Bᵀ Σ αᵢ pᵢ(t_k)|` for a solved problem.
pub fn pmp_residual(prob: &AveragedLqrProblem, sol: &ProblemBSolution) -> Result<f64> {
    if sol.costates.len() != prob.measure().len() {
        return Err(Error::shape("pmp_residual", "costate count differs from support count"));
    }
    sol.u.grid.ensure_same(&sol.costates[0].grid, "control vs costates")?;
    Ok(sup_distance(&sol.u, &stationary_control(prob, &sol.costates)?))
}

/// Stationarity defect of an arbitrary control: trajectories and costates
/// are recomputed from `u` before measuring the residual.
pub fn pmp_residual_of_control(prob: &AveragedLqrProblem, u: &VectorPath, x0: &[f64]) -> Result<f64> {
    let trajectories = simulate_ensemble(prob, u, x0)?;
    let costates = costate_solve(prob, &trajectories)?;
    Ok(sup_distance(u, &stationary_control(prob, &costates)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Weight of the fresh stationarity update in `u ← (1−ω)u + ω·R⁻¹BᵀΣαp`.
    pub relaxation: f64,
    /// Stop when successive controls differ by at most this in sup norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Halve the relaxation whenever the stationarity defect `|R⁻¹BᵀΣαp − u|`
    /// grows between iterations. The relaxed map contracts only while
    /// `ω(1 + λ) < 2` for every eigenvalue `λ` of the state-to-costate operator,
    /// so strongly coupled problems need a smaller `ω` than the default.
    pub adaptive: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            relaxation: 0.5,
            tolerance: 1e-8,
            max_iterations: 500,
            adaptive: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSolution {
    pub u: VectorPath,
    pub trajectories: Vec<VectorPath>,
    pub costates: Vec<VectorPath>,
    pub iterations: usize,
    /// Relaxation in effect at convergence.
    pub relaxation: f64,
}

/// Forward-backward sweep on the optimality system, starting from `u ≡ 0`.
///
/// Each iteration integrates the states forward under the current control,
/// the costates backward, and relaxes the control toward the stationarity
/// condition. An independent route to the open-loop optimum.
pub fn forward_backward_sweep(
    prob: &AveragedLqrProblem,
    s: f64,
    x0: &[f64],
    steps: usize,
    options: &SweepOptions,
) -> Result<SweepSolution> {
    prob.check_x0(x0)?;
    let grid = prob.grid(s, steps)?;
    if !(options.relaxation > 0.0 && options.relaxation <= 1.0) {
        return Err(Error::invalid("relaxation", "must lie in (0, 1]"));
    }
    let mut omega = options.relaxation;
    let mut u = VectorPath::constant(grid, &vec![0.0; prob.control_dim()]);
    let mut last_update = f64::INFINITY;
    let mut last_defect = f64::INFINITY;
    for iteration in 1..=options.max_iterations {
        let trajectories = simulate_ensemble(prob, &u, x0)?;
        let costates = costate_solve(prob, &trajectories)?;
        let target = stationary_control(prob, &costates)?;
        let defect = sup_distance(&target, &u);
        if options.adaptive && defect > last_defect {
            omega *= 0.5;
        }
        last_defect = defect;
        let next = VectorPath::new(
            grid,
            u.values
                .iter()
                .zip(&target.values)
                .map(|(old, new)| old.iter().zip(new).map(|(o, n)| (1.0 - omega) * o + omega * n).collect())
                .collect(),
        )?;
        last_update = sup_distance(&next, &u);
        u = next;
        if !last_update.is_finite() {
            break;
        }
        if last_update <= options.tolerance {
            let trajectories = simulate_ensemble(prob, &u, x0)?;
            let costates = costate_solve(prob, &trajectories)?;
            return Ok(SweepSolution {
                u,
                trajectories,
                costates,
                iterations: iteration,
                relaxation: omega,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: options.max_iterations,
        last_update,
    })
}

/// Explicit a-priori bounds for the averaged problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `maxᵢ ‖Aᵢ‖₂`
    pub c_a: f64,
    /// smallest eigenvalue of `R`
    pub r1: f64,
    /// L² bound on the optimal control
    pub c_u: f64,
    /// uniform bound on optimal trajectories
    pub c_x: f64,
    /// uniform bound on costates
    pub c_p: f64,
    /// Lipschitz constant of the value function with respect to W₁ on a ball of radius `k_radius`
    pub c_k: f64,
    pub k_radius: f64,
}

pub fn bound_constants(prob: &AveragedLqrProblem, x0: &[f64], k_radius: f64) -> Result<BoundConstants> {
    prob.check_x0(x0)?;
    let t = prob.horizon();
    let c_a = prob.measure().c_a();
    let r1 = prob.r_min();
    let q_norm = prob.q().spectral_norm();
    let qf_norm = prob.qf().spectral_norm();
    let b_norm = prob.b().spectral_norm();
    let growth = (c_a * t).exp();

    let c_u_at = |radius: f64| ((t * q_norm + qf_norm) * radius * radius * growth * growth / r1).sqrt();
    let c_x_at = |radius: f64| (radius + t.sqrt() * b_norm * c_u_at(radius)) * growth;

    let x0_norm = norm(x0);
    let c_u = c_u_at(x0_norm);
    let c_x = c_x_at(x0_norm);
    let c_p = (qf_norm + t * q_norm) * c_x * growth;

    let c_x_k = c_x_at(k_radius.max(0.0));
    let l_running = q_norm * c_x_k;
    let l_terminal = qf_norm * c_x_k;
    let c_k = (t * l_running + l_terminal) * c_x_k * t * growth;

    Ok(BoundConstants {
        c_a,
        r1,
        c_u,
        c_x,
        c_p,
        c_k,
        k_radius,
    })
}

/// Quadrature estimate of `‖u‖_{L²}`.
pub fn control_l2_norm(u: &VectorPath) -> f64 {
    l2_norm_squared(u).sqrt()
}

/// `maxᵢ maxₖ |pathᵢ(t_k)|`.
pub fn max_euclidean(paths: &[VectorPath]) -> f64 {
    paths
        .iter()
        .flat_map(|p| p.values.iter())
        .map(|v| norm(v))
        .fold(0.0, f64::max)
}
