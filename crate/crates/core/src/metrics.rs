//! Distances between measures and convergence diagnostics.

use serde::{Deserialize, Serialize};

use crate::averaged::DiscreteMatrixMeasure;
use crate::error::{Error, Result};
use crate::linalg::{matrix_distance, norm, Mat};
use crate::lqr::RiccatiSolution;
use crate::ode::VectorPath;

/// One line of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: u32,
    pub alpha1: f64,
    pub value_error: f64,
    pub value_order: Option<f64>,
    pub control_error: f64,
    pub control_order: Option<f64>,
    pub w1: f64,
}

/// `W₁(π, δ_Â) = Σ αᵢ ‖Aᵢ − Â‖₂`.
///
/// With a Dirac marginal the only coupling is the product one, so the
/// transport cost is the weighted mean distance to the atom.
pub fn w1_to_dirac(measure: &DiscreteMatrixMeasure, a_hat: &Mat) -> Result<f64> {
    let mut total = 0.0;
    for (a, w) in measure.supports().iter().zip(measure.weights()) {
        total += w * matrix_distance(a, a_hat)?;
    }
    Ok(total)
}

/// Axis-aligned box `Π [lowerᵢ, upperᵢ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid("k_box", "lower and upper must have the same positive length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
            return Err(Error::invalid("k_box", "need finite lower <= upper on every axis"));
        }
        Ok(BoxDomain { lower, upper })
    }

    /// `[−r, r]ⁿ`.
    pub fn symmetric(dim: usize, r: f64) -> Self {
        BoxDomain {
            lower: vec![-r; dim],
            upper: vec![r; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Largest Euclidean norm of a point in the box.
    pub fn radius(&self) -> f64 {
        norm(&self.lower.iter().zip(&self.upper).map(|(l, u)| l.abs().max(u.abs())).collect::<Vec<_>>())
    }

    /// Tensor lattice with `per_axis` uniformly spaced points on every axis (endpoints included).
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| {
                if per_axis <= 1 {
                    vec![0.5 * (l + u)]
                } else {
                    (0..per_axis)
                        .map(|i| l + (u - l) * i as f64 / (per_axis - 1) as f64)
                        .collect()
                }
            })
            .collect();
        let mut points = vec![Vec::with_capacity(self.dim())];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&c| {
                        let mut q = p.clone();
                        q.push(c);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueError {
    /// max over all time nodes and lattice points
    pub sup: f64,
    /// max over lattice points at the first time node
    pub at_start: f64,
}

/// Sup-norm gap between the averaged value `X₀ᵀP̃(t)X₀`, `X₀ = (x₀,…,x₀)`,
/// and the known-dynamics value `x₀ᵀP(t)x₀` over time nodes × lattice of `k_box`.
///
/// Both quadratic forms are evaluated from the stored Riccati paths:
/// `X₀ᵀP̃X₀ = x₀ᵀ(Σᵢⱼ P̃ᵢⱼ)x₀`, so the lattice sweep works on `n×n` differences.
pub fn sup_norm_value_error(
    averaged: &RiccatiSolution,
    base: &RiccatiSolution,
    k_box: &BoxDomain,
    per_axis: usize,
) -> Result<ValueError> {
    averaged.grid().ensure_same(base.grid(), "value error")?;
    let n = base.dim();
    if k_box.dim() != n {
        return Err(Error::shape("sup_norm_value_error", "box dimension differs from state dimension"));
    }
    if averaged.dim() % n != 0 {
        return Err(Error::shape("sup_norm_value_error", "block system order is not a multiple of n"));
    }
    let blocks = averaged.dim() / n;
    let lattice = k_box.lattice(per_axis);
    let mut result = ValueError { sup: 0.0, at_start: 0.0 };
    for k in 0..base.grid().len() {
        let big = averaged.at(k);
        let mut reduced = Mat::zeros(n, n);
        for i in 0..blocks {
            for j in 0..blocks {
                reduced = &reduced + &big.block(i * n, j * n, n, n);
            }
        }
        let diff = &reduced - base.at(k);
        let worst = lattice
            .iter()
            .map(|x| diff.quadratic_form(x).abs())
            .fold(0.0, f64::max);
        if k == 0 {
            result.at_start = worst;
        }
        result.sup = result.sup.max(worst);
    }
    Ok(result)
}

/// `maxₖ |u_N(t_k) − u(t_k)|`.
pub fn sup_norm_control_error(u_n: &VectorPath, u_a: &VectorPath) -> Result<f64> {
    u_n.grid.ensure_same(&u_a.grid, "control error")?;
    if u_n.dim() != u_a.dim() {
        return Err(Error::shape("sup_norm_control_error", "control dimensions differ"));
    }
    Ok(u_n
        .values
        .iter()
        .zip(&u_a.values)
        .map(|(a, b)| norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()))
        .fold(0.0, f64::max))
}

/// `log₂(e_{k−1}/e_k)` for consecutive entries; one result per entry after the first.
pub fn convergence_order(errors: &[f64]) -> Vec<Result<f64>> {
    errors
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            if !(w[0] > 0.0) {
                Err(Error::UndefinedOrder { index: i })
            } else if !(w[1] > 0.0) {
                Err(Error::UndefinedOrder { index: i + 1 })
            } else {
                Ok((w[0] / w[1]).log2())
            }
        })
        .collect()
}

/// `supₜ ‖P̃(t) − diag(P(t), 0, …, 0)‖₂`.
pub fn riccati_block_deviation(p_aug: &RiccatiSolution, p_base: &RiccatiSolution) -> Result<f64> {
    p_aug.grid().ensure_same(p_base.grid(), "block deviation")?;
    let n = p_base.dim();
    let big = p_aug.dim();
    if big % n != 0 {
        return Err(Error::shape("riccati_block_deviation", "block system order is not a multiple of n"));
    }
    let mut worst: f64 = 0.0;
    for k in 0..p_base.grid().len() {
        let mut limit = Mat::zeros(big, big);
        limit.set_block(0, 0, p_base.at(k));
        worst = worst.max((p_aug.at(k) - &limit).spectral_norm());
    }
    Ok(worst)
}
