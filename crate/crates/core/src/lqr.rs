//! Finite-horizon LQR with a known state matrix.
//!
//! Dynamics `ẋ = A x + B u`, cost
//! `½∫ (xᵀQx + uᵀRu) dt + ½ x(T)ᵀ Q_f x(T)`. The Riccati matrix `P(t)`
//! solves `−Ṗ = AᵀP + PA − P B R⁻¹ Bᵀ P + Q`, `P(T) = Q_f`, and is
//! obtained either by integrating that equation directly or through the
//! linear Hamiltonian system and `P = Y X⁻¹`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, linear_solve, min_eigenvalue, Lu, Mat};
use crate::ode::{integrate_ode, integrate_ode_with, Direction, MatrixPath, TimeGrid, VectorPath};

/// Optimal cost of the ½-weighted functional per unit of `x₀ᵀP(s)x₀`.
///
/// [`value`] returns `x₀ᵀP(s)x₀`; the minimum of [`cost_open_loop`]
/// is `COST_PER_VALUE` times that.
pub const COST_PER_VALUE: f64 = 0.5;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Hamiltonian route gives up when `X(t)` is this badly conditioned.
pub const HAMILTONIAN_SINGULAR_RCOND: f64 = 1e-12;
/// Below this reciprocal condition `(X, Y)` is rescaled to `(I, Y X⁻¹)`.
const HAMILTONIAN_RENORMALIZE_RCOND: f64 = 1e-8;

/// Validated cost data shared by the known-dynamics and averaged problems.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CostData {
    pub b: Mat,
    pub q: Mat,
    pub r: Mat,
    pub qf: Mat,
    pub horizon: f64,
    pub r_inv: Mat,
    pub r_min: f64,
}

impl CostData {
    pub fn new(n: usize, b: Mat, q: Mat, r: Mat, qf: Mat, horizon: f64) -> Result<Self> {
        if b.rows() != n {
            return Err(Error::invalid("b", format!("expected {n} rows, got {}", b.rows())));
        }
        let m = b.cols();
        check_psd("q", &q, n)?;
        check_psd("qf", &qf, n)?;
        if r.shape() != (m, m) {
            return Err(Error::invalid("r", format!("expected {m}x{m}, got {:?}", r.shape())));
        }
        check_symmetric("r", &r)?;
        let r_min = min_eigenvalue(&r);
        if !(r_min > 0.0) {
            return Err(Error::invalid("r", format!("must be positive definite (min eigenvalue {r_min:e})")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("horizon", format!("must be positive, got {horizon}")));
        }
        let r_inv = linear_solve(&r, &Mat::identity(m)).map_err(|e| Error::invalid("r", e.to_string()))?.x;
        Ok(CostData {
            b,
            q,
            r,
            qf,
            horizon,
            r_inv: r_inv.symmetrized(),
            r_min,
        })
    }
}

fn check_symmetric(field: &str, m: &Mat) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid(field, "must be square"));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL * m.spectral_norm() {
        return Err(Error::invalid(field, format!("not symmetric (asymmetry {asym:e})")));
    }
    Ok(())
}

fn check_psd(field: &str, m: &Mat, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::invalid(field, format!("expected {n}x{n}, got {:?}", m.shape())));
    }
    check_symmetric(field, m)?;
    let min = min_eigenvalue(m);
    if min < -PSD_TOL {
        return Err(Error::invalid(field, format!("not positive semidefinite (min eigenvalue {min:e})")));
    }
    Ok(())
}

/// Known-dynamics LQR data.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrProblem {
    a: Mat,
    cost: CostData,
}

impl LqrProblem {
    pub fn new(a: Mat, b: Mat, q: Mat, r: Mat, qf: Mat, horizon: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::invalid("a", "must be square"));
        }
        let cost = CostData::new(a.rows(), b, q, r, qf, horizon)?;
        Ok(LqrProblem { a, cost })
    }

    pub(crate) fn from_parts(a: Mat, cost: CostData) -> Self {
        LqrProblem { a, cost }
    }

    pub fn a(&self) -> &Mat {
        &self.a
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
    /// Smallest eigenvalue of `R`.
    pub fn r_min(&self) -> f64 {
        self.cost.r_min
    }
    pub fn r_inv(&self) -> &Mat {
        &self.cost.r_inv
    }
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }
    pub fn control_dim(&self) -> usize {
        self.cost.b.cols()
    }

    /// `B R⁻¹ Bᵀ`.
    pub fn control_weight(&self) -> Mat {
        self.cost.b.matmul(&self.cost.r_inv).matmul(&self.cost.b.transpose())
    }

    /// `R⁻¹ Bᵀ`.
    pub fn gain_factor(&self) -> Mat {
        self.cost.r_inv.matmul(&self.cost.b.transpose())
    }

    fn grid_from(&self, s: f64, steps: usize) -> Result<TimeGrid> {
        if !(s >= 0.0 && s < self.horizon()) {
            return Err(Error::invalid("s", format!("need 0 <= s < T, got s={s}")));
        }
        TimeGrid::new(s, self.horizon(), steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiccatiRoute {
    Direct,
    Hamiltonian,
}

/// Riccati matrices on a uniform grid over `[s, T]`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: MatrixPath,
    pub route: RiccatiRoute,
    gain: Mat,
}

impl RiccatiSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.p.grid
    }

    pub fn at(&self, k: usize) -> &Mat {
        self.p.at(k)
    }

    pub fn dim(&self) -> usize {
        self.p.shape().0
    }

    /// `R⁻¹ Bᵀ` of the problem this was solved for.
    pub fn gain_factor(&self) -> &Mat {
        &self.gain
    }
}

/// Backward RK4 on the Riccati equation, symmetrizing after every step.
pub fn riccati_solve_direct(prob: &LqrProblem, s: f64, steps: usize) -> Result<RiccatiSolution> {
    let grid = prob.grid_from(s, steps)?;
    let n = prob.state_dim();
    let a = prob.a().clone();
    let at = a.transpose();
    let weight = prob.control_weight();
    let q = prob.q().clone();

    // dP/dt = −(AᵀP + PA − P S P + Q)
    let rhs = |_t: f64, y: &[f64]| -> Vec<f64> {
        let p = Mat::from_state(n, n, y.to_vec());
        let ps = p.matmul(&weight);
        let mut d = &(&at.matmul(&p) + &p.matmul(&a)) - &ps.matmul(&p);
        d = &d + &q;
        d.scale(-1.0).into_vec()
    };
    let path = integrate_ode_with(rhs, prob.qf().as_slice(), &grid, Direction::Backward, |_, y| {
        let mut p = Mat::from_vec(n, n, std::mem::take(y))?;
        p.symmetrize();
        *y = p.into_vec();
        Ok(())
    })?;
    let values = path
        .values
        .into_iter()
        .map(|v| Mat::from_vec(n, n, v))
        .collect::<Result<Vec<_>>>()?;
    let mut p = MatrixPath::new(grid, values)?;
    p.values[grid.steps()] = prob.qf().clone();
    Ok(RiccatiSolution {
        p,
        route: RiccatiRoute::Direct,
        gain: prob.gain_factor(),
    })
}

/// Hamiltonian matrix `[[A, −B R⁻¹ Bᵀ], [−Q, −Aᵀ]]`.
pub fn hamiltonian_matrix(prob: &LqrProblem) -> Mat {
    let n = prob.state_dim();
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.set_block(0, 0, prob.a());
    h.set_block(0, n, &prob.control_weight().scale(-1.0));
    h.set_block(n, 0, &prob.q().scale(-1.0));
    h.set_block(n, n, &prob.a().transpose().scale(-1.0));
    h
}

/// Integrates `d/dt [X; Y] = H [X; Y]` backward from `(I, Q_f)` and returns
/// `P = Y X⁻¹` at every node.
///
/// `(X, Y)` may be right-multiplied by a constant matrix without changing
/// `Y X⁻¹`; this is used to reset `X` to the identity when it grows
/// ill-conditioned.
pub fn riccati_solve_hamiltonian(prob: &LqrProblem, s: f64, steps: usize) -> Result<RiccatiSolution> {
    let grid = prob.grid_from(s, steps)?;
    let n = prob.state_dim();
    let h = hamiltonian_matrix(prob);
    let mut start = Mat::zeros(2 * n, n);
    start.set_block(0, 0, &Mat::identity(n));
    start.set_block(n, 0, prob.qf());

    let rhs = |_t: f64, y: &[f64]| -> Vec<f64> {
        let z = Mat::from_state(2 * n, n, y.to_vec());
        h.matmul(&z).into_vec()
    };
    let renormalize = |node: usize, y: &mut Vec<f64>| -> Result<()> {
        let z = Mat::from_vec(2 * n, n, y.clone())?;
        let (x, yy) = (z.block(0, 0, n, n), z.block(n, 0, n, n));
        let lu = Lu::factor(&x.transpose()).map_err(|_| Error::SingularAtNode { node, rcond: 0.0 })?;
        let rcond = lu.rcond();
        if rcond < HAMILTONIAN_SINGULAR_RCOND {
            return Err(Error::SingularAtNode { node, rcond });
        }
        if rcond < HAMILTONIAN_RENORMALIZE_RCOND {
            let p = lu.solve(&yy.transpose())?.transpose();
            let mut reset = Mat::zeros(2 * n, n);
            reset.set_block(0, 0, &Mat::identity(n));
            reset.set_block(n, 0, &p);
            *y = reset.into_vec();
        }
        Ok(())
    };
    let path = integrate_ode_with(rhs, start.as_slice(), &grid, Direction::Backward, renormalize)?;

    let mut values = Vec::with_capacity(grid.len());
    for (node, z) in path.values.into_iter().enumerate() {
        let z = Mat::from_vec(2 * n, n, z)?;
        let (x, y) = (z.block(0, 0, n, n), z.block(n, 0, n, n));
        // P X = Y  ⇔  Xᵀ Pᵀ = Yᵀ
        let sol = linear_solve(&x.transpose(), &y.transpose()).map_err(|_| Error::SingularAtNode { node, rcond: 0.0 })?;
        if sol.rcond < HAMILTONIAN_SINGULAR_RCOND {
            return Err(Error::SingularAtNode { node, rcond: sol.rcond });
        }
        values.push(sol.x.transpose().symmetrized());
    }
    let mut p = MatrixPath::new(grid, values)?;
    p.values[grid.steps()] = prob.qf().clone();
    Ok(RiccatiSolution {
        p,
        route: RiccatiRoute::Hamiltonian,
        gain: prob.gain_factor(),
    })
}

/// `x₀ᵀ P(t_k) x₀`.
pub fn value(sol: &RiccatiSolution, node: usize, x0: &[f64]) -> Result<f64> {
    check_node(sol, node)?;
    check_dim("value", sol.dim(), x0.len())?;
    Ok(sol.at(node).quadratic_form(x0))
}

/// `−R⁻¹ Bᵀ P(t_k) x`.
pub fn feedback_control(sol: &RiccatiSolution, node: usize, x: &[f64]) -> Result<Vec<f64>> {
    check_node(sol, node)?;
    check_dim("feedback_control", sol.dim(), x.len())?;
    let px = sol.at(node).matvec(x);
    Ok(sol.gain.matvec(&px).into_iter().map(|v| -v).collect())
}

fn check_node(sol: &RiccatiSolution, node: usize) -> Result<()> {
    if node >= sol.grid().len() {
        return Err(Error::shape(
            "grid node",
            format!("node {node} outside grid of {} nodes", sol.grid().len()),
        ));
    }
    Ok(())
}

fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::shape(context, format!("expected dimension {expected}, got {got}")));
    }
    Ok(())
}

/// State and control sampled on a common grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub x: VectorPath,
    pub u: VectorPath,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.x.grid
    }
}

/// Forward RK4 of `ẋ = (A − B R⁻¹ Bᵀ P(t)) x` from `x(s) = x₀`.
///
/// `P` between nodes is interpolated linearly; the control is recorded at
/// the nodes as `u = −R⁻¹ Bᵀ P x`.
pub fn simulate_closed_loop(prob: &LqrProblem, sol: &RiccatiSolution, s: f64, x0: &[f64]) -> Result<Trajectory> {
    let grid = *sol.grid();
    grid.ensure_same(&prob.grid_from(s, grid.steps())?, "closed-loop simulation")?;
    check_dim("simulate_closed_loop", prob.state_dim(), x0.len())?;
    if sol.dim() != prob.state_dim() {
        return Err(Error::shape("simulate_closed_loop", "Riccati dimension differs from the problem"));
    }
    let weight = prob.control_weight();
    let closed = MatrixPath::new(grid, sol.p.values.iter().map(|p| prob.a() - &weight.matmul(p)).collect())?;
    let x = integrate_ode(|t, x| closed.interpolate(t).matvec(x), x0, &grid, Direction::Forward)?;
    let u = (0..grid.len())
        .map(|k| feedback_control(sol, k, x.at(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        u: VectorPath::new(grid, u)?,
        x,
    })
}

/// Composite Simpson weights on a uniform grid, with a trapezoid on the
/// last interval when the step count is odd.
pub fn quadrature_weights(grid: &TimeGrid) -> Vec<f64> {
    let steps = grid.steps();
    let h = grid.step();
    let mut w = vec![0.0; steps + 1];
    let simpson_steps = if steps % 2 == 0 { steps } else { steps - 1 };
    for k in (0..simpson_steps).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if simpson_steps < steps {
        w[steps - 1] += h / 2.0;
        w[steps] += h / 2.0;
    }
    w
}

pub(crate) fn bolza_cost(q: &Mat, r: &Mat, qf: &Mat, x: &VectorPath, u: &VectorPath) -> f64 {
    let w = quadrature_weights(&x.grid);
    let running: f64 = w
        .iter()
        .enumerate()
        .map(|(k, wk)| wk * 0.5 * (q.quadratic_form(x.at(k)) + r.quadratic_form(u.at(k))))
        .sum();
    running + 0.5 * qf.quadratic_form(x.last())
}

/// `½∫ (xᵀQx + uᵀRu) dt + ½ x(T)ᵀ Q_f x(T)` along a sampled trajectory.
pub fn cost_open_loop(prob: &LqrProblem, traj: &Trajectory) -> Result<f64> {
    traj.x.grid.ensure_same(&traj.u.grid, "state vs control")?;
    check_dim("cost_open_loop state", prob.state_dim(), traj.x.dim())?;
    check_dim("cost_open_loop control", prob.control_dim(), traj.u.dim())?;
    if (traj.grid().t_end() - prob.horizon()).abs() > 1e-12 * prob.horizon() {
        return Err(Error::GridMismatch("trajectory does not end at the horizon".into()));
    }
    Ok(bolza_cost(prob.q(), prob.r(), prob.qf(), &traj.x, &traj.u))
}

/// `∫|u|² dt` by the same quadrature as the cost.
pub fn l2_norm_squared(u: &VectorPath) -> f64 {
    quadrature_weights(&u.grid)
        .iter()
        .zip(&u.values)
        .map(|(w, v)| w * dot(v, v))
        .sum()
}
