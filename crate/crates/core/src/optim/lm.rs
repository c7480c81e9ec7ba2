use nalgebra::{DMatrix, DVector};

/// Settings for [`levenberg_marquardt`].
#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop once an accepted step changes the cost by less than this fraction.
    pub rel_cost_tol: f64,
    /// Relative finite-difference step for the Jacobian.
    pub fd_step: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            rel_cost_tol: 1e-9,
            fd_step: 1e-6,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub jacobian: DMatrix<f64>,
}

impl LmResult {
    /// Residual variance `cost / (n - p)`.
    pub fn residual_variance(&self) -> f64 {
        let dof = self
            .residuals
            .len()
            .saturating_sub(self.params.len())
            .max(1);
        self.cost / dof as f64
    }

    /// `s^2 (J^T J)^-1`, or `None` when the normal matrix is singular.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let inv = jtj.try_inverse()?;
        if inv.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(inv * self.residual_variance())
    }

    /// One-sigma parameter uncertainties; infinite where undetermined.
    pub fn uncertainties(&self) -> Vec<f64> {
        match self.covariance() {
            Some(c) => (0..self.params.len())
                .map(|i| {
                    let v = c[(i, i)];
                    if v >= 0.0 {
                        v.sqrt()
                    } else {
                        f64::INFINITY
                    }
                })
                .collect(),
            None => vec![f64::INFINITY; self.params.len()],
        }
    }
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian<F>(residual: &mut F, x: &[f64], r0: &[f64], step: f64) -> DMatrix<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let m = r0.len();
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = step * x[k].abs().max(1e-3);
        xp[k] = x[k] + h;
        let rp = residual(&xp);
        xp[k] = x[k] - h;
        let rm = residual(&xp);
        xp[k] = x[k];
        for i in 0..m {
            j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    j
}

/// Damped least squares with a central-difference Jacobian.
///
/// `residual` maps a parameter vector to the residual vector; its length must
/// not depend on the parameters.
pub fn levenberg_marquardt<F>(mut residual: F, x0: &[f64], opts: &LmOptions) -> LmResult
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut cost = cost_of(&r);
    let mut lambda = opts.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;
    let mut j = jacobian(&mut residual, &x, &r, opts.fd_step);

    while iterations < opts.max_iter {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let rt = residual(&trial);
            let ct = cost_of(&rt);
            if ct.is_finite() && ct <= cost {
                let rel = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < opts.rel_cost_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: stationary point
            converged = true;
        }
        j = jacobian(&mut residual, &x, &r, opts.fd_step);
        if converged {
            break;
        }
    }

    LmResult {
        params: x,
        residuals: r,
        cost,
        iterations,
        converged,
        jacobian: j,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-1.7 * t).exp() + 0.5).collect();
        let res = levenberg_marquardt(
            |p| {
                t.iter()
                    .zip(&y)
                    .map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y)
                    .collect()
            },
            &[1.0, 0.5, 0.0],
            &LmOptions::default(),
        );
        assert!(res.converged);
        assert!((res.params[0] - 3.0).abs() < 1e-6);
        assert!((res.params[1] - 1.7).abs() < 1e-6);
        assert!((res.params[2] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn covariance_matches_linear_regression() {
        // y = a + b x with known residuals; compare against closed form
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [1.1, 2.9, 5.2, 6.8, 9.1];
        let res = levenberg_marquardt(
            |p| x.iter().zip(&y).map(|(x, y)| p[0] + p[1] * x - y).collect(),
            &[0.0, 0.0],
            &LmOptions::default(),
        );
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let det = n * sxx - sx * sx;
        let s2 = res.cost / (n - 2.0);
        let var_b = s2 * n / det;
        let unc = res.uncertainties();
        assert!((unc[1] - var_b.sqrt()).abs() < 1e-6);
    }
}
