use crate::error::{invalid, Error, Result};

/// Initialization and MW part of the error budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolInit {
    /// NV⁰ population left after (post-selected) charge initialization.
    pub e_nv0: f64,
    pub p_plus1: f64,
    pub p_minus1: f64,
    /// Probability that a π-pulse fails to flip.
    pub e_mw: f64,
}

impl ProtocolInit {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("E_NV0", self.e_nv0),
            ("P_+1", self.p_plus1),
            ("P_-1", self.p_minus1),
            ("E_MW", self.e_mw),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.p_plus1 + self.p_minus1 > 1.0 + 1e-12 {
            return Err(invalid("P_+1 + P_-1 exceeds 1"));
        }
        Ok(())
    }

    pub fn p_zero(&self) -> f64 {
        (1.0 - self.p_plus1 - self.p_minus1).max(0.0)
    }
}

/// Full budget: initialization plus the intrinsic readout errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolErrorBudget {
    pub init: ProtocolInit,
    /// Probability that spin |0⟩ is not ionized.
    pub e0: f64,
    /// Probability that spin |±1⟩ is ionized.
    pub e1: f64,
}

impl ProtocolErrorBudget {
    pub fn validate(&self) -> Result<()> {
        self.init.validate()?;
        for (name, v) in [("E0", self.e0), ("E1", self.e1)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredErrors {
    /// High counts although |0⟩ was prepared (π-pulse applied).
    pub e0_meas: f64,
    /// Low counts although |+1⟩ was prepared (no pulse).
    pub e1_meas: f64,
}

impl MeasuredErrors {
    pub fn fidelity(&self) -> f64 {
        1.0 - (self.e0_meas + self.e1_meas) / 2.0
    }
}

/// Coefficients of `E0_meas = c(α(1 − E1) + β E0)` for flip probability `q`.
fn alpha_beta(init: &ProtocolInit, q: f64) -> (f64, f64) {
    let (pm, pp, p0) = (init.p_minus1, init.p_plus1, init.p_zero());
    let miss = 1.0 - q;
    (pm + pp * miss + p0 * q, pp * q + p0 * miss)
}

/// Sum over protocol paths. `q` is the flip probability of the MW pulse used
/// to prepare |0⟩ (defaults to `1 − E_MW`).
pub fn forward_error_model(budget: &ProtocolErrorBudget, q: Option<f64>) -> Result<MeasuredErrors> {
    budget.validate()?;
    let init = &budget.init;
    let q = q.unwrap_or(1.0 - init.e_mw);
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!(
            "flip probability must lie in [0, 1], got {q}"
        )));
    }
    let c = 1.0 - init.e_nv0;
    let (a, b) = alpha_beta(init, q);
    let e0_meas = c * (a * (1.0 - budget.e1) + b * budget.e0);
    let e1_meas = c
        * ((init.p_minus1 + init.p_plus1) * budget.e1 + init.p_zero() * (1.0 - budget.e0))
        + init.e_nv0;
    Ok(MeasuredErrors { e0_meas, e1_meas })
}

/// Fraction of high-count outcomes after a pulse of rotation angle `theta`
/// (radians) on the |+1⟩ transition.
pub fn rabi_contrast(budget: &ProtocolErrorBudget, theta: f64) -> Result<f64> {
    let q = (theta / 2.0).sin().powi(2);
    Ok(forward_error_model(budget, Some(q))?.e0_meas)
}

/// Solve the path sums for the intrinsic errors `(E0, E1)`.
pub fn invert_error_model(measured: &MeasuredErrors, init: &ProtocolInit) -> Result<(f64, f64)> {
    init.validate()?;
    let c = 1.0 - init.e_nv0;
    let (a, b) = alpha_beta(init, 1.0 - init.e_mw);
    let (p0, pflip) = (init.p_zero(), init.p_minus1 + init.p_plus1);
    // [b  -a] [E0]   [E0m/c - a      ]
    // [-p0 s] [E1] = [(E1m-Env0)/c-p0]
    let det = b * pflip - a * p0;
    if c.abs() < 1e-12 || det.abs() < 1e-12 {
        return Err(Error::Singular(format!(
            "error model cannot be inverted (determinant {det:e}, charge factor {c:e})"
        )));
    }
    let r0 = measured.e0_meas / c - a;
    let r1 = (measured.e1_meas - init.e_nv0) / c - p0;
    let e0 = (r0 * pflip + a * r1) / det;
    let e1 = (b * r1 + p0 * r0) / det;
    Ok((e0, e1))
}
