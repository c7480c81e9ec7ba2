use rand::Rng;
use rayon::prelude::*;

use super::error_model::{forward_error_model, MeasuredErrors, ProtocolErrorBudget};
use crate::error::{invalid, Result};
use crate::photon::sampling::{chunk_rng, InverseCdf, CHUNK_SIZE};
use crate::photon::threshold::errors_at;
use crate::photon::{CountHistogram, CountModel};

/// Result of [`end_to_end_mc`].
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    /// Counts after preparing |0⟩ (π-pulse applied).
    pub hist_zero: CountHistogram,
    /// Counts after preparing |+1⟩ (no pulse).
    pub hist_one: CountHistogram,
    pub measured: MeasuredErrors,
    pub f_meas: f64,
    /// Binomial standard error of `f_meas`.
    pub sigma_f: f64,
    pub analytic: MeasuredErrors,
    /// Intrinsic ionization errors after removing charge-readout confusion.
    pub ionization_e0: f64,
    pub ionization_e1: f64,
}

#[derive(Clone, Copy)]
enum Spin {
    Zero,
    Plus,
    Minus,
}

/// Simulate the readout protocol repetition by repetition.
///
/// The budget's `E0`/`E1` include charge-readout errors at `threshold`; they
/// are split into an ionization step and the count models so that the
/// simulated fractions reproduce the path sums. Each arm runs `repetitions`
/// times. Chunks follow the seed-splitting rule of the photon sampler; the
/// |+1⟩ arm uses streams offset by `2³²`.
pub fn end_to_end_mc(
    budget: &ProtocolErrorBudget,
    model_minus: &CountModel,
    model_zero: &CountModel,
    threshold: usize,
    repetitions: u64,
    seed: u64,
) -> Result<McReport> {
    budget.validate()?;
    if repetitions == 0 {
        return Err(invalid("need at least one repetition"));
    }
    let minus = model_minus.pmf_table();
    let zero = model_zero.pmf_table();
    let (eps_minus, eps_zero) = errors_at(&minus, &zero, threshold);
    let denom = 1.0 - eps_minus - eps_zero;
    if denom <= 0.0 {
        return Err(invalid("count models are not separable at this threshold"));
    }
    let ion_e0 = (budget.e0 - eps_zero) / denom;
    let ion_e1 = (budget.e1 - eps_minus) / denom;
    if !((0.0..=1.0).contains(&ion_e0) && (0.0..=1.0).contains(&ion_e1)) {
        return Err(invalid(format!(
            "readout errors ({:.4}, {:.4}) are smaller than the charge-readout confusion ({eps_zero:.4}, {eps_minus:.4})",
            budget.e0, budget.e1
        )));
    }
    let init = budget.init;
    let q = 1.0 - init.e_mw;
    let sample_minus = InverseCdf::new(&minus);
    let sample_zero = InverseCdf::new(&zero);
    let len = minus.len().max(zero.len());

    let run_arm = |with_pulse: bool, stream_base: u64| -> Vec<u64> {
        let chunks = repetitions.div_ceil(CHUNK_SIZE);
        let parts: Vec<Vec<u64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = chunk_rng(seed, stream_base + c);
                let n = CHUNK_SIZE.min(repetitions - c * CHUNK_SIZE);
                let mut h = vec![0u64; len];
                for _ in 0..n {
                    let negative = if rng.random::<f64>() < init.e_nv0 {
                        false
                    } else {
                        let u: f64 = rng.random();
                        let mut spin = if u < init.p_minus1 {
                            Spin::Minus
                        } else if u < init.p_minus1 + init.p_plus1 {
                            Spin::Plus
                        } else {
                            Spin::Zero
                        };
                        if with_pulse && rng.random::<f64>() < q {
                            spin = match spin {
                                Spin::Zero => Spin::Plus,
                                Spin::Plus => Spin::Zero,
                                Spin::Minus => Spin::Minus,
                            };
                        }
                        let u: f64 = rng.random();
                        match spin {
                            Spin::Zero => u < ion_e0,
                            Spin::Plus | Spin::Minus => u >= ion_e1,
                        }
                    };
                    let k = if negative {
                        sample_minus.sample(&mut rng)
                    } else {
                        sample_zero.sample(&mut rng)
                    };
                    h[k] += 1;
                }
                h
            })
            .collect();
        let mut out = vec![0u64; len];
        for p in parts {
            for (o, x) in out.iter_mut().zip(p) {
                *o += x;
            }
        }
        out
    };

    let hist_zero = CountHistogram::new(run_arm(true, 0), None)?;
    let hist_one = CountHistogram::new(run_arm(false, 1 << 32), None)?;
    let e0_meas = hist_zero.fraction_at_least(threshold);
    let e1_meas = 1.0 - hist_one.fraction_at_least(threshold);
    let n = repetitions as f64;
    let sigma_f = 0.5 * (e0_meas * (1.0 - e0_meas) / n + e1_meas * (1.0 - e1_meas) / n).sqrt();
    let measured = MeasuredErrors { e0_meas, e1_meas };
    Ok(McReport {
        hist_zero,
        hist_one,
        f_meas: measured.fidelity(),
        measured,
        sigma_f,
        analytic: forward_error_model(budget, None)?,
        ionization_e0: ion_e0,
        ionization_e1: ion_e1,
    })
}
