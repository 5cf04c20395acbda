//! Damped Gauss-Newton minimizer for small weighted least-squares problems.
//!
//! Levenberg-style damping: the normal equations are regularized by an
//! adaptive multiple of their diagonal, blending Newton steps (small damping)
//! with scaled gradient steps (large damping). The problems here have at most
//! seven parameters, so dense elimination is all the linear algebra needed.

pub struct LmOptions {
    pub max_iterations: usize,
    pub rel_chi2_tol: f64,
    pub step_norm_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 500,
            rel_chi2_tol: 1e-12,
            step_norm_tol: 1e-10,
        }
    }
}

pub struct LmResult {
    pub theta: Vec<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inverse curvature (J^T J)^-1 at the optimum, row-major n x n.
    pub covariance: Option<Vec<f64>>,
}

/// Minimizes |r(theta)|^2 for residuals `r` of length `m` with analytic
/// Jacobian `jac` (row-major m x n).
pub fn minimize<R, J>(
    residuals: R,
    jacobian: J,
    theta0: &[f64],
    m: usize,
    opts: &LmOptions,
) -> LmResult
where
    R: Fn(&[f64], &mut [f64]),
    J: Fn(&[f64], &mut [f64]),
{
    let n = theta0.len();
    let mut theta = theta0.to_vec();
    let mut r = vec![0.0; m];
    let mut jac_buf = vec![0.0; m * n];
    residuals(&theta, &mut r);
    let mut chi2: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        jacobian(&theta, &mut jac_buf);
        // normal equations: a = J^T J, g = J^T r
        let mut a = vec![0.0; n * n];
        let mut g = vec![0.0; n];
        for i in 0..m {
            let row = &jac_buf[i * n..(i + 1) * n];
            for (jj, &rj) in row.iter().enumerate() {
                g[jj] += rj * r[i];
                for (kk, &rk) in row.iter().enumerate().skip(jj) {
                    a[jj * n + kk] += rj * rk;
                }
            }
        }
        for jj in 0..n {
            for kk in 0..jj {
                a[jj * n + kk] = a[kk * n + jj];
            }
        }
        let mut improved = false;
        // inner damping loop: retry with stronger damping until the step
        // shrinks chi2 or damping saturates
        while lambda <= 1e12 {
            let mut damped = a.clone();
            for jj in 0..n {
                let d = a[jj * n + jj];
                damped[jj * n + jj] = d + lambda * d.max(1e-30);
            }
            let mut rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            if !solve_in_place(&mut damped, &mut rhs, n) {
                lambda *= 10.0;
                continue;
            }
            let step_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let trial: Vec<f64> = theta.iter().zip(&rhs).map(|(t, s)| t + s).collect();
            let mut r_trial = vec![0.0; m];
            residuals(&trial, &mut r_trial);
            let chi2_trial: f64 = r_trial.iter().map(|v| v * v).sum();
            if chi2_trial.is_finite() && chi2_trial <= chi2 {
                let rel_drop = (chi2 - chi2_trial) / chi2.max(f64::MIN_POSITIVE);
                theta = trial;
                r = r_trial;
                chi2 = chi2_trial;
                lambda = (lambda / 10.0).max(1e-14);
                improved = true;
                if rel_drop < opts.rel_chi2_tol || step_norm < opts.step_norm_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !improved {
            // saturated damping with no improvement means a (local) optimum
            // to within the achievable precision
            converged = converged || !improved;
            break;
        }
    }

    // curvature at the optimum, without damping
    jacobian(&theta, &mut jac_buf);
    let mut a = vec![0.0; n * n];
    for i in 0..m {
        let row = &jac_buf[i * n..(i + 1) * n];
        for jj in 0..n {
            for kk in 0..n {
                a[jj * n + kk] += row[jj] * row[kk];
            }
        }
    }
    let covariance = invert(&a, n);

    LmResult {
        theta,
        chi2,
        iterations,
        converged,
        covariance,
    }
}

/// Gaussian elimination with partial pivoting; overwrites its inputs.
/// Returns false for a numerically singular system.
pub fn solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * b[k];
        }
        b[col] = acc / a[col * n + col];
    }
    true
}

/// Dense inverse via column-by-column solves.
pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut out = vec![0.0; n * n];
    for col in 0..n {
        let mut rhs = vec![0.0; n];
        rhs[col] = 1.0;
        let mut work = a.to_vec();
        if !solve_in_place(&mut work, &mut rhs, n) {
            return None;
        }
        for row in 0..n {
            out[row * n + col] = rhs[row];
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_systems() {
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![5.0, 10.0];
        assert!(solve_in_place(&mut a, &mut b, 2));
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!((b[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inverts_and_detects_singular() {
        let a = vec![4.0, 7.0, 2.0, 6.0];
        let inv = invert(&a, 2).unwrap();
        // a * inv = I
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    acc += a[i * 2 + k] * inv[k * 2 + j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12);
            }
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn fits_exponential_decay() {
        // y = a * exp(-k t), fit (a, k) from exact data
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let truth = [2.5, 0.7];
        let ys: Vec<f64> = ts.iter().map(|t| truth[0] * (-truth[1] * t).exp()).collect();
        let res = |theta: &[f64], out: &mut [f64]| {
            for (i, (&t, &y)) in ts.iter().zip(&ys).enumerate() {
                out[i] = theta[0] * (-theta[1] * t).exp() - y;
            }
        };
        let jac = |theta: &[f64], out: &mut [f64]| {
            for (i, &t) in ts.iter().enumerate() {
                let e = (-theta[1] * t).exp();
                out[i * 2] = e;
                out[i * 2 + 1] = -theta[0] * t * e;
            }
        };
        let fit = minimize(res, jac, &[1.0, 0.2], ts.len(), &LmOptions::default());
        assert!(fit.converged);
        assert!((fit.theta[0] - truth[0]).abs() < 1e-8, "a = {}", fit.theta[0]);
        assert!((fit.theta[1] - truth[1]).abs() < 1e-8, "k = {}", fit.theta[1]);
        assert!(fit.chi2 < 1e-16);
        assert!(fit.covariance.is_some());
    }
}
