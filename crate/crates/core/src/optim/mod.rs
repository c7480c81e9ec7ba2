//! Small local optimizers used by the fitting routines.

mod lm;
mod nelder_mead;

pub use lm::{levenberg_marquardt, LmOptions, LmResult};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

/// Coefficient of determination. `NaN` when the data have zero variance.
pub fn r_squared(data: &[f64], model: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let ss_tot: f64 = data.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = data.iter().zip(model).map(|(y, m)| (y - m).powi(2)).sum();
    if ss_tot <= 0.0 {
        return f64::NAN;
    }
    1.0 - ss_res / ss_tot
}
