use super::{prob_below, CountModel};
use crate::error::{invalid, Result};

/// Counts at or above `threshold` are assigned to NV⁻.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChargeDiscriminator {
    pub threshold: usize,
}

impl ChargeDiscriminator {
    pub fn is_negative(&self, counts: u64) -> bool {
        counts as usize >= self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub discriminator: ChargeDiscriminator,
    /// `P(k < t | NV⁻)`.
    pub error_minus: f64,
    /// `P(k ≥ t | NV⁰)`.
    pub error_zero: f64,
}

impl ThresholdResult {
    pub fn total_error(&self) -> f64 {
        self.error_minus + self.error_zero
    }
}

/// Summed misassignment of both charge states at threshold `t`.
pub fn errors_at(minus: &[f64], zero: &[f64], t: usize) -> (f64, f64) {
    (prob_below(minus, t), 1.0 - prob_below(zero, t))
}

/// Exhaustive search over `t ∈ [0, k_max + 1]`; the smallest optimal `t` wins.
pub fn optimize_threshold(model_minus: &CountModel, model_zero: &CountModel) -> ThresholdResult {
    let minus = model_minus.pmf_table();
    let zero = model_zero.pmf_table();
    let k_max = minus.len().max(zero.len());
    let mut best = ThresholdResult {
        discriminator: ChargeDiscriminator { threshold: 0 },
        error_minus: 0.0,
        error_zero: 1.0,
    };
    let (mut below_minus, mut below_zero) = (0.0, 0.0);
    for t in 0..=k_max {
        if t > 0 {
            below_minus += minus.get(t - 1).copied().unwrap_or(0.0);
            below_zero += zero.get(t - 1).copied().unwrap_or(0.0);
        }
        let cand = ThresholdResult {
            discriminator: ChargeDiscriminator { threshold: t },
            error_minus: below_minus,
            error_zero: (1.0 - below_zero).max(0.0),
        };
        if cand.total_error() < best.total_error() - 1e-12 {
            best = cand;
        }
    }
    best
}

/// `F = 1 − (ε₋ + ε₀)/2`.
pub fn charge_fidelity(error_minus: f64, error_zero: f64) -> Result<f64> {
    for e in [error_minus, error_zero] {
        if !(0.0..=1.0).contains(&e) {
            return Err(invalid(format!(
                "error probability must lie in [0, 1], got {e}"
            )));
        }
    }
    Ok(1.0 - (error_minus + error_zero) / 2.0)
}
