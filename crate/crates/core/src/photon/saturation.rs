use crate::error::{invalid, Error, Result};
use crate::optim::{levenberg_marquardt, LmOptions};

/// Fit of `f = A · I · I_sat / (I + I_sat)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationFit {
    pub a: f64,
    pub i_sat: f64,
    /// `A · I_sat`, the count rate at infinite power.
    pub f_sat: f64,
    pub sigma_a: f64,
    pub sigma_i_sat: f64,
    pub sigma_f_sat: f64,
    /// False when the data show no curvature, i.e. `σ(I_sat) > I_sat`.
    pub saturating: bool,
}

pub fn saturation_curve(power: f64, a: f64, i_sat: f64) -> f64 {
    a * power * i_sat / (power + i_sat)
}

/// Least squares in `(ln A, ln I_sat)`.
pub fn fit_saturation(points: &[(f64, f64)]) -> Result<SaturationFit> {
    if points.len() < 3 {
        return Err(invalid(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|(p, r)| !(p.is_finite() && r.is_finite() && *p > 0.0))
    {
        return Err(invalid("powers must be positive and rates finite"));
    }
    let mut powers: Vec<f64> = points.iter().map(|p| p.0).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    if powers.len() < 3 {
        return Err(invalid("need at least 3 distinct powers"));
    }
    let p_max = powers[powers.len() - 1];
    let r_max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !(r_max > 0.0) {
        return Err(invalid("rates must include a positive value"));
    }
    let i0 = powers[powers.len() / 2];
    let a0 = r_max / saturation_curve(p_max, 1.0, i0);
    let r = levenberg_marquardt(
        |x| {
            let (a, i) = (x[0].exp(), x[1].exp());
            points
                .iter()
                .map(|&(p, f)| (saturation_curve(p, a, i) - f) / r_max)
                .collect()
        },
        &[a0.ln(), i0.ln()],
        &LmOptions::default(),
    );
    let (a, i_sat) = (r.params[0].exp(), r.params[1].exp());
    if !(a.is_finite() && i_sat.is_finite()) {
        return Err(Error::NonConvergence("saturation fit diverged".into()));
    }
    let (sigma_a, sigma_i_sat, sigma_f_sat) = match r.covariance() {
        Some(c) => {
            let var_ln_f = c[(0, 0)] + c[(1, 1)] + 2.0 * c[(0, 1)];
            (
                a * c[(0, 0)].sqrt(),
                i_sat * c[(1, 1)].sqrt(),
                a * i_sat * var_ln_f.max(0.0).sqrt(),
            )
        }
        None => (f64::INFINITY, f64::INFINITY, f64::INFINITY),
    };
    Ok(SaturationFit {
        a,
        i_sat,
        f_sat: a * i_sat,
        sigma_a,
        sigma_i_sat,
        sigma_f_sat,
        saturating: sigma_i_sat.is_finite() && sigma_i_sat < i_sat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_curve_recovered() {
        let (a, i) = (63e3 / 0.51, 0.51);
        let pts: Vec<(f64, f64)> = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2]
            .iter()
            .map(|&p| (p, saturation_curve(p, a, i)))
            .collect();
        let f = fit_saturation(&pts).unwrap();
        assert!((f.f_sat / 63e3 - 1.0).abs() < 1e-6);
        assert!((f.i_sat / 0.51 - 1.0).abs() < 1e-6);
        assert!(f.saturating);
    }

    #[test]
    fn linear_data_flagged() {
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|k| {
                let p = k as f64 * 0.1;
                // tiny scatter so the residual variance is nonzero
                (
                    p,
                    1e4 * p * (1.0 + 0.01 * if k % 2 == 0 { 1.0 } else { -1.0 }),
                )
            })
            .collect();
        let f = fit_saturation(&pts).unwrap();
        assert!(!f.saturating, "{f:?}");
    }

    #[test]
    fn two_points_rejected() {
        assert!(fit_saturation(&[(0.1, 1.0), (0.2, 2.0)]).is_err());
        assert!(fit_saturation(&[(0.1, 1.0), (0.1, 1.1), (0.2, 2.0)]).is_err());
    }
}
