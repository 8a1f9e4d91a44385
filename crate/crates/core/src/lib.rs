//! Finite-horizon LQR and averaged LQR over finite ensembles of state matrices.
//!
//! The averaged problem drives every system `ẋᵢ = Aᵢxᵢ + Bu` of an ensemble
//! with one shared control and minimizes the probability-weighted cost.
//! As the measure over `A` concentrates on the true matrix, the averaged
//! value function and control converge to the classical ones; the
//! [`experiment`] module measures that convergence.
//!
//! Module map:
//! - [`linalg`], [`ode`]: dense matrices, 2-norm, LU, Jacobi eigenvalues, RK4.
//! - [`lqr`]: Riccati solution by two routes, value, feedback, closed loop, cost.
//! - [`averaged`]: measures, block system, averaged cost, costates, stationarity, bounds.
//! - [`metrics`]: W₁ to a Dirac, sup-norm errors, convergence orders, block deviation.
//! - [`experiment`]: JSON configs, convergence tables, CSV/JSON artifacts.

pub mod averaged;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod lqr;
pub mod metrics;
pub mod ode;
pub mod random;

pub use error::{Error, Result};
pub use linalg::Mat;
