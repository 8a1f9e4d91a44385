//! Test oracles that do not go through the Riccati machinery.

#![allow(dead_code)]

use averaged_lqr::linalg::{linear_solve, Mat};

/// Solution of the forward-Euler discretized LQR as a dense quadratic program.
pub struct QpSolution {
    pub controls: Vec<Vec<f64>>,
    pub cost: f64,
    pub step: f64,
}

/// Discretizes `ẋ = Ax + Bu` by forward Euler with `intervals` equal steps,
/// keeps the cost `½ Σ h (x_kᵀQx_k + u_kᵀRu_k) + ½ x_NᵀQ_f x_N`, and solves
/// the normal equations over the stacked controls `u_0 … u_{N−1}`.
pub fn euler_qp(a: &Mat, b: &Mat, q: &Mat, r: &Mat, qf: &Mat, horizon: f64, x0: &[f64], intervals: usize) -> QpSolution {
    let n = a.rows();
    let m = b.cols();
    let h = horizon / intervals as f64;
    let phi = &Mat::identity(n) + &a.scale(h);
    let hb = b.scale(h);
    let vars = m * intervals;

    // x_k = c_k + G_k u, built by the recursion x_{k+1} = Φ x_k + hB u_k
    let mut c = vec![x0.to_vec()];
    let mut g = vec![Mat::zeros(n, vars)];
    for k in 0..intervals {
        c.push(phi.matvec(&c[k]));
        let mut next = phi.matmul(&g[k]);
        for i in 0..n {
            for j in 0..m {
                next[(i, k * m + j)] += hb[(i, j)];
            }
        }
        g.push(next);
    }

    let mut hess = Mat::zeros(vars, vars);
    let mut grad = vec![0.0; vars];
    let mut accumulate = |gk: &Mat, ck: &[f64], weight: &Mat| {
        let wg = weight.matmul(gk);
        hess = &hess + &gk.transpose().matmul(&wg);
        let wc = weight.matvec(ck);
        for (gi, v) in grad.iter_mut().zip(gk.transpose().matvec(&wc)) {
            *gi += v;
        }
    };
    let hq = q.scale(h);
    for k in 0..intervals {
        accumulate(&g[k], &c[k], &hq);
    }
    accumulate(&g[intervals], &c[intervals], qf);
    for k in 0..intervals {
        for i in 0..m {
            for j in 0..m {
                hess[(k * m + i, k * m + j)] += h * r[(i, j)];
            }
        }
    }
    let rhs = Mat::column(&grad.iter().map(|v| -v).collect::<Vec<_>>());
    let u = linear_solve(&hess, &rhs).expect("QP Hessian is positive definite").x.into_vec();

    let mut cost = 0.0;
    for k in 0..=intervals {
        let xk: Vec<f64> = c[k].iter().zip(g[k].matvec(&u)).map(|(a, b)| a + b).collect();
        if k < intervals {
            let uk = &u[k * m..(k + 1) * m];
            cost += 0.5 * h * (q.quadratic_form(&xk) + r.quadratic_form(uk));
        } else {
            cost += 0.5 * qf.quadratic_form(&xk);
        }
    }
    QpSolution {
        controls: u.chunks(m).map(<[f64]>::to_vec).collect(),
        cost,
        step: h,
    }
}

/// One line of a pass/fail report.
#[derive(Default)]
pub struct Ledger {
    failures: usize,
}

impl Ledger {
    pub fn record(&mut self, id: &str, name: &str, passed: bool, detail: impl AsRef<str>) {
        println!("{} [{id}] {name}: {}", if passed { "PASS" } else { "FAIL" }, detail.as_ref());
        if !passed {
            self.failures += 1;
        }
    }

    pub fn failures(&self) -> usize {
        self.failures
    }
}
