use super::speedup::SensingTimingModel;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityReport {
    pub e0_meas: f64,
    pub e1_meas: f64,
    pub f_meas: f64,
    pub e0: f64,
    pub e1: f64,
    pub f_corrected: f64,
    /// `f64::INFINITY` when both errors vanish.
    pub snr_single_shot: f64,
}

/// `F = 1 − (E0 + E1)/2` and the thresholded single-shot SNR.
pub fn fidelity_and_snr(e0: f64, e1: f64) -> Result<(f64, f64)> {
    for e in [e0, e1] {
        if !(0.0..=1.0).contains(&e) {
            return Err(invalid(format!(
                "error probability must lie in [0, 1], got {e}"
            )));
        }
    }
    let f = 1.0 - (e0 + e1) / 2.0;
    let noise = ((1.0 - e1) * e1 + (1.0 - e0) * e0).sqrt();
    let signal = 1.0 - e1 - e0;
    // negative when the assignment is anti-correlated (F < 50 %)
    let snr = if noise == 0.0 {
        if signal == 0.0 {
            0.0
        } else {
            signal.signum() * f64::INFINITY
        }
    } else {
        signal / noise
    };
    Ok((f, snr))
}

/// Per-repetition SNR of fluorescence readout with `#ph = f_sat · window`
/// photons for the bright state and `(1 − contrast) · #ph` for the dark one.
pub fn conventional_snr(timing: &SensingTimingModel) -> Result<f64> {
    timing.validate()?;
    let n = timing.f_sat_cps * timing.readout_window_s;
    let dark = (1.0 - timing.contrast) * n;
    Ok((n - dark) / (n + dark).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indistinguishable() {
        let (f, s) = fidelity_and_snr(0.5, 0.5).unwrap();
        assert_eq!((f, s), (0.5, 0.0));
    }

    #[test]
    fn perfect_is_infinite() {
        let (f, s) = fidelity_and_snr(0.0, 0.0).unwrap();
        assert_eq!(f, 1.0);
        assert!(s.is_infinite());
    }

    #[test]
    fn fully_inverted_is_negative_infinity() {
        let (_, s) = fidelity_and_snr(1.0, 1.0).unwrap();
        assert_eq!(s, f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(fidelity_and_snr(-0.1, 0.0).is_err());
    }
}
