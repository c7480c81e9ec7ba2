use crate::error::{invalid, Result};
use crate::optim::{levenberg_marquardt, r_squared, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFit {
    pub amplitude: f64,
    pub centre: f64,
    pub fwhm: f64,
    pub baseline: f64,
    pub r_squared: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineshapeFits {
    pub gaussian: ShapeFit,
    pub lorentzian: ShapeFit,
}

impl LineshapeFits {
    /// FWHM of the Gaussian fit.
    pub fn fwhm(&self) -> f64 {
        self.gaussian.fwhm
    }
}

pub fn gaussian(x: f64, amplitude: f64, centre: f64, fwhm: f64, baseline: f64) -> f64 {
    baseline
        + amplitude * (-4.0 * std::f64::consts::LN_2 * (x - centre).powi(2) / (fwhm * fwhm)).exp()
}

pub fn lorentzian(x: f64, amplitude: f64, centre: f64, fwhm: f64, baseline: f64) -> f64 {
    baseline + amplitude / (1.0 + 4.0 * (x - centre).powi(2) / (fwhm * fwhm))
}

type Shape = fn(f64, f64, f64, f64, f64) -> f64;

fn fit_one(x: &[f64], y: &[f64], shape: Shape, start: [f64; 4]) -> ShapeFit {
    let scale = y
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let eval = |p: &[f64], xi: f64| shape(xi, p[0], p[1], p[2].exp(), p[3]);
    let r = levenberg_marquardt(
        |p| {
            x.iter()
                .zip(y)
                .map(|(&xi, &yi)| (eval(p, xi) - yi) / scale)
                .collect()
        },
        &[start[0], start[1], start[2].ln(), start[3]],
        &LmOptions::default(),
    );
    let model: Vec<f64> = x.iter().map(|&xi| eval(&r.params, xi)).collect();
    let r2 = r_squared(y, &model);
    ShapeFit {
        amplitude: r.params[0],
        centre: r.params[1],
        fwhm: r.params[2].exp(),
        baseline: r.params[3],
        r_squared: r2,
        converged: r.converged && r2.is_finite(),
    }
}

/// Fit a Gaussian and a Lorentzian, each on a constant baseline.
///
/// A flat segment has no variance to explain; both fits then report NaN R²
/// and `converged = false`.
pub fn fit_lineshape(x: &[f64], y: &[f64]) -> Result<LineshapeFits> {
    if x.len() != y.len() {
        return Err(invalid("detuning and intensity lengths differ"));
    }
    if x.len() < 10 {
        return Err(invalid(format!(
            "need at least 10 samples, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("spectrum contains non-finite values"));
    }
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = ymin + (ymax - ymin) / 2.0;
    let above: Vec<f64> = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v >= half)
        .map(|(&xi, _)| xi)
        .collect();
    let span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - x.iter().cloned().fold(f64::INFINITY, f64::min);
    let w0 = {
        let lo = above.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = above.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = hi - lo;
        if w > 0.0 {
            w
        } else {
            (span / 10.0).max(f64::MIN_POSITIVE)
        }
    };
    let start = [ymax - ymin, x[imax], w0, ymin];
    Ok(LineshapeFits {
        gaussian: fit_one(x, y, gaussian, start),
        lorentzian: fit_one(x, y, lorentzian, start),
    })
}
