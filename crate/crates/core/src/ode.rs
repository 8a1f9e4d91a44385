//! Uniform time grids, sampled paths, and a fixed-step RK4 integrator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Uniform partition of `[t_start, t_end]` into `steps` subintervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_start >= t_end {
            return Err(Error::invalid(
                "time grid",
                format!("need t_start < t_end, got [{t_start}, {t_end}]"),
            ));
        }
        if steps == 0 {
            return Err(Error::invalid("time grid", "steps must be at least 1"));
        }
        Ok(TimeGrid {
            t_start,
            t_end,
            steps,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn step(&self) -> f64 {
        self.span() / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.node(k))
    }

    /// Interval index and fractional offset in `[0, 1]` for linear interpolation at `t`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let x = ((t - self.t_start) / self.step()).clamp(0.0, self.steps as f64);
        let k = (x.floor() as usize).min(self.steps - 1);
        (k, x - k as f64)
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.steps == other.steps
            && (self.t_start - other.t_start).abs() <= 1e-12 * self.span()
            && (self.t_end - other.t_end).abs() <= 1e-12 * self.span()
    }

    pub(crate) fn ensure_same(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: [{}, {}]/{} vs [{}, {}]/{}",
                self.t_start, self.t_end, self.steps, other.t_start, other.t_end, other.steps
            )))
        }
    }
}

/// One vector per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorPath {
    pub grid: TimeGrid,
    pub values: Vec<Vec<f64>>,
}

impl VectorPath {
    pub fn new(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape(
                "VectorPath::new",
                format!("{} values for {} grid nodes", values.len(), grid.len()),
            ));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::shape("VectorPath::new", "non-uniform dimensions"));
        }
        Ok(VectorPath { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: &[f64]) -> Self {
        VectorPath {
            grid,
            values: vec![value.to_vec(); grid.len()],
        }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        VectorPath::new(grid, grid.nodes().map(f).collect())
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn first(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }

    /// Linear interpolation between the stored nodes.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let (k, w) = self.grid.locate(t);
        lerp(&self.values[k], &self.values[k + 1], w)
    }

    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> VectorPath {
        VectorPath {
            grid: self.grid,
            values: self.values.iter().map(|v| f(v)).collect(),
        }
    }
}

/// One matrix per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPath {
    pub grid: TimeGrid,
    pub values: Vec<Mat>,
}

impl MatrixPath {
    pub fn new(grid: TimeGrid, values: Vec<Mat>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape(
                "MatrixPath::new",
                format!("{} values for {} grid nodes", values.len(), grid.len()),
            ));
        }
        let shape = values[0].shape();
        if values.iter().any(|m| m.shape() != shape) {
            return Err(Error::shape("MatrixPath::new", "non-uniform shapes"));
        }
        Ok(MatrixPath { grid, values })
    }

    pub fn at(&self, k: usize) -> &Mat {
        &self.values[k]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    pub fn interpolate(&self, t: f64) -> Mat {
        let (k, w) = self.grid.locate(t);
        let a = &self.values[k];
        if w == 0.0 {
            return a.clone();
        }
        let b = &self.values[k + 1];
        let data = lerp(a.as_slice(), b.as_slice(), w);
        Mat::from_vec(a.rows(), a.cols(), data).expect("interpolated matrix keeps its shape")
    }
}

fn lerp(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From `t_start` with initial state `state0`.
    Forward,
    /// From `t_end` with terminal state `state0`.
    Backward,
}

/// Classical RK4 with fixed step `span/steps`.
///
/// Backward integration runs forward in reversed time `τ = t_end − t`,
/// so both directions share one stepping loop. The returned path is
/// indexed by grid node regardless of direction.
pub fn integrate_ode<F>(f: F, state0: &[f64], grid: &TimeGrid, direction: Direction) -> Result<VectorPath>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    integrate_ode_with(f, state0, grid, direction, |_, _| Ok(()))
}

/// [`integrate_ode`] with a hook run on the state after every step.
///
/// The hook receives the grid node just reached and may project or
/// rescale the state in place (symmetrization, renormalization).
pub fn integrate_ode_with<F, H>(
    f: F,
    state0: &[f64],
    grid: &TimeGrid,
    direction: Direction,
    mut after_step: H,
) -> Result<VectorPath>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    H: FnMut(usize, &mut Vec<f64>) -> Result<()>,
{
    let steps = grid.steps();
    let h = grid.step();
    let dim = state0.len();

    // Reversed-time right-hand side: dy/dτ = −f(t_end − τ, y).
    let rhs = |tau: f64, y: &[f64]| -> Vec<f64> {
        match direction {
            Direction::Forward => f(grid.t_start() + tau, y),
            Direction::Backward => {
                let mut d = f(grid.t_end() - tau, y);
                d.iter_mut().for_each(|v| *v = -*v);
                d
            }
        }
    };
    let node_of = |k: usize| match direction {
        Direction::Forward => k,
        Direction::Backward => steps - k,
    };

    let mut values = vec![Vec::new(); steps + 1];
    let mut y = state0.to_vec();
    values[node_of(0)] = y.clone();
    let mut tmp = vec![0.0; dim];
    for k in 0..steps {
        let tau = k as f64 * h;
        let k1 = rhs(tau, &y);
        axpy_into(&mut tmp, &y, 0.5 * h, &k1);
        let k2 = rhs(tau + 0.5 * h, &tmp);
        axpy_into(&mut tmp, &y, 0.5 * h, &k2);
        let k3 = rhs(tau + 0.5 * h, &tmp);
        axpy_into(&mut tmp, &y, h, &k3);
        let k4 = rhs(tau + h, &tmp);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let node = node_of(k + 1);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { node });
        }
        after_step(node, &mut y)?;
        values[node] = y.clone();
    }
    Ok(VectorPath {
        grid: *grid,
        values,
    })
}

fn axpy_into(out: &mut [f64], y: &[f64], a: f64, x: &[f64]) {
    for ((o, yi), xi) in out.iter_mut().zip(y).zip(x) {
        *o = yi + a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn grid_nodes_and_validation() {
        let g = TimeGrid::new(1.0, 3.0, 4).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.node(2), 2.0);
        assert_eq!(g.node(4), 3.0);
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert_eq!(g.locate(3.0), (3, 1.0));
        assert_eq!(g.locate(1.0), (0, 0.0));
    }

    #[test]
    fn zero_field_keeps_state() {
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let p = integrate_ode(|_, y| vec![0.0; y.len()], &[1.5, -2.0], &g, Direction::Forward).unwrap();
        assert!(p.values.iter().all(|v| v == &[1.5, -2.0]));
    }

    #[test]
    fn exponential_growth() {
        let g = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let p = integrate_ode(|_, y| y.to_vec(), &[1.0], &g, Direction::Forward).unwrap();
        assert!((p.last()[0] - E).abs() < 1e-8);
    }

    #[test]
    fn rotation_half_turn() {
        let g = TimeGrid::new(0.0, PI, 1000).unwrap();
        let p = integrate_ode(|_, y| vec![y[1], -y[0]], &[1.0, 0.0], &g, Direction::Forward).unwrap();
        assert!((p.last()[0] + 1.0).abs() < 1e-6);
        assert!(p.last()[1].abs() < 1e-6);
    }

    #[test]
    fn backward_matches_closed_form() {
        // ẋ = −x with x(T) = 1 gives x(t) = e^{T−t}.
        let g = TimeGrid::new(0.0, 2.0, 200).unwrap();
        let p = integrate_ode(|_, y| vec![-y[0]], &[1.0], &g, Direction::Backward).unwrap();
        assert_eq!(p.last()[0], 1.0);
        assert!((p.first()[0] - 2.0_f64.exp()).abs() < 1e-8);
        // time-dependent field: ẋ = t, x(2) = 0 → x(0) = −2
        let p = integrate_ode(|t, _| vec![t], &[0.0], &g, Direction::Backward).unwrap();
        assert!((p.first()[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_reported() {
        let g = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let err = integrate_ode(|_, y| vec![y[0] * 1e308], &[1e10], &g, Direction::Forward).unwrap_err();
        assert!(matches!(err, Error::Divergence { node: 1 }));
    }

    #[test]
    fn fourth_order_on_rotation() {
        let err_at = |steps| {
            let g = TimeGrid::new(0.0, PI, steps).unwrap();
            let p = integrate_ode(|_, y| vec![y[1], -y[0]], &[1.0, 0.0], &g, Direction::Forward).unwrap();
            ((p.last()[0] + 1.0).powi(2) + p.last()[1].powi(2)).sqrt()
        };
        let ratio = err_at(50) / err_at(100);
        assert!(ratio >= 12.0, "ratio {ratio}");
    }
}
