use crate::error::{invalid, Result};

use super::snr::conventional_snr;

/// Timing of the two readout methods being compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingTimingModel {
    /// Length of one single-shot repetition excluding the sensing sequence.
    pub single_shot_overhead_s: f64,
    /// Per-repetition overhead of conventional readout.
    pub conventional_rep_overhead_s: f64,
    pub readout_window_s: f64,
    /// Fluorescence contrast between bright and dark spin states.
    pub contrast: f64,
    pub f_sat_cps: f64,
    /// Divide the single-shot time by the post-selection acceptance rate.
    pub include_postselection: bool,
    pub acceptance_rate: f64,
}

impl SensingTimingModel {
    /// Default overhead per single-shot repetition.
    pub const OVERHEAD_850_US: f64 = 850e-6;
    /// Alternative overhead preset, the sum of the sequence steps.
    pub const OVERHEAD_730_US: f64 = 730e-6;

    pub fn with_f_sat(f_sat_cps: f64) -> Self {
        Self {
            single_shot_overhead_s: Self::OVERHEAD_850_US,
            conventional_rep_overhead_s: 1.5e-6,
            readout_window_s: 250e-9,
            contrast: 0.3,
            f_sat_cps,
            include_postselection: false,
            acceptance_rate: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("single_shot_overhead_s", self.single_shot_overhead_s),
            (
                "conventional_rep_overhead_s",
                self.conventional_rep_overhead_s,
            ),
            ("readout_window_s", self.readout_window_s),
            ("f_sat_cps", self.f_sat_cps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(invalid(format!(
                "contrast must lie in (0, 1], got {}",
                self.contrast
            )));
        }
        if !(self.acceptance_rate > 0.0 && self.acceptance_rate <= 1.0) {
            return Err(invalid(format!(
                "acceptance rate must lie in (0, 1], got {}",
                self.acceptance_rate
            )));
        }
        Ok(())
    }
}

/// Repetitions needed to reach an averaged SNR of one: `max(1, ⌈1/SNR²⌉)`.
pub fn repetitions_for_unit_snr(snr: f64) -> Result<u64> {
    if !(snr > 0.0) {
        return Err(invalid(format!("SNR must be > 0, got {snr}")));
    }
    if snr >= 1.0 {
        return Ok(1);
    }
    Ok((1.0 / (snr * snr)).ceil() as u64)
}

/// A readout method: per-repetition overhead and single-repetition SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodTiming {
    pub overhead_s: f64,
    pub snr: f64,
}

impl MethodTiming {
    pub fn time_to_unit_snr(&self, t_seq_s: f64) -> Result<f64> {
        Ok(repetitions_for_unit_snr(self.snr)? as f64 * (self.overhead_s + t_seq_s))
    }
}

/// Ratio of the time `reference` needs to the time `candidate` needs.
pub fn speedup_between(
    reference: &MethodTiming,
    candidate: &MethodTiming,
    t_seq_s: f64,
) -> Result<f64> {
    if !(t_seq_s.is_finite() && t_seq_s >= 0.0) {
        return Err(invalid(format!("sensing time must be >= 0, got {t_seq_s}")));
    }
    Ok(reference.time_to_unit_snr(t_seq_s)? / candidate.time_to_unit_snr(t_seq_s)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupPoint {
    pub t_seq_s: f64,
    pub speedup: f64,
}

/// Speed-up of single-shot readout over conventional readout per sensing time.
pub fn speedup_curve(
    t_seq_s: &[f64],
    timing: &SensingTimingModel,
    single_shot_snr: f64,
) -> Result<Vec<SpeedupPoint>> {
    let conventional = MethodTiming {
        overhead_s: timing.conventional_rep_overhead_s,
        snr: conventional_snr(timing)?,
    };
    let single = MethodTiming {
        overhead_s: timing.single_shot_overhead_s,
        snr: single_shot_snr,
    };
    let accept = if timing.include_postselection {
        timing.acceptance_rate
    } else {
        1.0
    };
    t_seq_s
        .iter()
        .map(|&t| {
            Ok(SpeedupPoint {
                t_seq_s: t,
                speedup: speedup_between(&conventional, &single, t)? * accept,
            })
        })
        .collect()
}
