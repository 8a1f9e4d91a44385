//! Seeded generators of random valid problems, for property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::averaged::{AveragedLqrProblem, DiscreteMatrixMeasure};
use crate::linalg::Mat;
use crate::lqr::LqrProblem;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with independent entries uniform in `[−scale, scale]`.
pub fn uniform_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Mat {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
    Mat::from_vec(rows, cols, data).expect("finite entries")
}

/// `G Gᵀ / k` for a uniform `G`, positive semidefinite.
pub fn psd_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Mat {
    let g = uniform_matrix(rng, n, n, scale);
    g.matmul(&g.transpose()).scale(1.0 / n as f64).symmetrized()
}

/// Random known-dynamics problem: `A`, `B` entries in `[−2, 2]`, PSD `Q`, `Q_f`,
/// and `R` with eigenvalues at least `r_floor`.
pub fn lqr_problem<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, horizon: f64, r_floor: f64) -> LqrProblem {
    let a = uniform_matrix(rng, n, n, 2.0);
    let b = uniform_matrix(rng, n, m, 2.0);
    let q = psd_matrix(rng, n, 2.0);
    let qf = if rng.gen_bool(0.5) { psd_matrix(rng, n, 1.0) } else { Mat::zeros(n, n) };
    let r = &psd_matrix(rng, m, 1.0) + &Mat::identity(m).scale(r_floor);
    LqrProblem::new(a, b, q, r.symmetrized(), qf, horizon).expect("generated problem is valid")
}

/// Random measure with `supports` atoms: the first is `a_hat`, the rest are
/// perturbations of entry size at most `spread`; weights are random and normalized.
pub fn measure_around<R: Rng + ?Sized>(rng: &mut R, a_hat: &Mat, supports: usize, spread: f64) -> DiscreteMatrixMeasure {
    let n = a_hat.rows();
    let mut atoms = vec![a_hat.clone()];
    for _ in 1..supports {
        atoms.push(a_hat + &uniform_matrix(rng, n, n, spread));
    }
    let raw: Vec<f64> = (0..supports).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // force an exact unit sum
    let rest: f64 = weights[1..].iter().sum();
    weights[0] = 1.0 - rest;
    DiscreteMatrixMeasure::new(atoms, weights).expect("generated measure is valid")
}

/// Averaged problem sharing the costs of a random known-dynamics problem.
pub fn averaged_problem<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    supports: usize,
    horizon: f64,
    r_floor: f64,
) -> (LqrProblem, AveragedLqrProblem) {
    let base = lqr_problem(rng, n, m, horizon, r_floor);
    let measure = measure_around(rng, base.a(), supports, 0.5);
    let averaged = AveragedLqrProblem::from_lqr(&base, measure).expect("dimensions agree");
    (base, averaged)
}
