//! Photon-count statistics: histograms, count models, charge-state
//! thresholds, sampling, and saturation / lineshape fits.

pub mod fit;
pub mod lineshape;
pub mod sampling;
pub mod saturation;
pub mod threshold;

pub use fit::{fit_count_model, CountFit, FitKind};
pub use lineshape::{fit_lineshape, LineshapeFits, ShapeFit};
pub use sampling::{sample_counts_table, sample_histogram, CHUNK_SIZE};
pub use saturation::{fit_saturation, SaturationFit};
pub use threshold::{charge_fidelity, optimize_threshold, ChargeDiscriminator, ThresholdResult};

use crate::error::{invalid, Result};

/// Occurrences per exact photon number (index = photon count).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountHistogram {
    pub counts: Vec<u64>,
    /// Acquisition window in seconds, if known.
    pub window_s: Option<f64>,
}

impl CountHistogram {
    pub fn new(counts: Vec<u64>, window_s: Option<f64>) -> Result<Self> {
        if let Some(w) = window_s {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid(format!("acquisition window must be > 0, got {w}")));
            }
        }
        Ok(Self { counts, window_s })
    }

    /// Build from `(photon_count, occurrences)` pairs; repeated counts add up.
    pub fn from_pairs(pairs: &[(u64, u64)], window_s: Option<f64>) -> Result<Self> {
        let len = pairs.iter().map(|p| p.0 as usize + 1).max().unwrap_or(0);
        let mut counts = vec![0; len];
        for &(k, n) in pairs {
            counts[k as usize] += n;
        }
        Self::new(counts, window_s)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn fractions(&self) -> Vec<f64> {
        let t = self.total() as f64;
        self.counts
            .iter()
            .map(|&c| if t > 0.0 { c as f64 / t } else { 0.0 })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        let t = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| k as f64 * c as f64)
            .sum::<f64>()
            / t
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let t = self.total() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| (k as f64 - m).powi(2) * c as f64)
            .sum::<f64>()
            / t
    }

    /// Largest photon number with a nonzero occurrence.
    pub fn max_count(&self) -> Option<usize> {
        self.counts.iter().rposition(|&c| c > 0)
    }

    /// Fraction of events with at least `t` photons.
    pub fn fraction_at_least(&self, t: usize) -> f64 {
        let above: u64 = self.counts.iter().skip(t).sum();
        above as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonModel {
    pub lambda: f64,
}

impl PoissonModel {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(invalid(format!("Poisson mean must be >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }
}

/// One Gaussian component; `amplitude` is its peak height as a fraction of events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub amplitude: f64,
    pub mean: f64,
    pub sd: f64,
}

impl GaussianComponent {
    pub fn height_at(&self, k: f64) -> f64 {
        self.amplitude * (-(k - self.mean).powi(2) / (2.0 * self.sd * self.sd)).exp()
    }
}

/// Sum of Gaussians evaluated on the non-negative integers and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureModel {
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixtureModel {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("mixture needs at least one component"));
        }
        for c in &components {
            if !(c.amplitude.is_finite() && c.amplitude >= 0.0) {
                return Err(invalid(format!(
                    "mixture amplitude must be >= 0, got {}",
                    c.amplitude
                )));
            }
            if !(c.sd.is_finite() && c.sd > 0.0) || !c.mean.is_finite() {
                return Err(invalid(format!(
                    "mixture component needs finite mean and sd > 0, got {c:?}"
                )));
            }
        }
        let m = Self { components };
        if m.raw_heights().iter().sum::<f64>() <= 0.0 {
            return Err(invalid("mixture has no mass on the non-negative integers"));
        }
        Ok(m)
    }

    fn support_max(&self) -> usize {
        let hi = self
            .components
            .iter()
            .map(|c| c.mean + 12.0 * c.sd)
            .fold(0.0, f64::max);
        hi.ceil() as usize
    }

    /// Unnormalized sum of component heights on `0..=support_max`.
    pub fn raw_heights(&self) -> Vec<f64> {
        (0..=self.support_max())
            .map(|k| self.components.iter().map(|c| c.height_at(k as f64)).sum())
            .collect()
    }
}

/// A photon-count distribution on the non-negative integers.
#[derive(Debug, Clone, PartialEq)]
pub enum CountModel {
    Poisson(PoissonModel),
    Mixture(GaussianMixtureModel),
    /// Explicit probabilities, e.g. a measured histogram.
    Table(Vec<f64>),
}

impl CountModel {
    pub fn poisson(lambda: f64) -> Result<Self> {
        Ok(CountModel::Poisson(PoissonModel::new(lambda)?))
    }

    pub fn mixture(components: Vec<GaussianComponent>) -> Result<Self> {
        Ok(CountModel::Mixture(GaussianMixtureModel::new(components)?))
    }

    pub fn from_histogram(h: &CountHistogram) -> Result<Self> {
        if h.total() == 0 {
            return Err(invalid("histogram is empty"));
        }
        Ok(CountModel::Table(h.fractions()))
    }

    /// Probabilities on `0..=k_max`, summing to one.
    pub fn pmf_table(&self) -> Vec<f64> {
        let mut p = match self {
            CountModel::Poisson(m) => poisson_table(m.lambda),
            CountModel::Mixture(m) => m.raw_heights(),
            CountModel::Table(t) => t.clone(),
        };
        let s: f64 = p.iter().sum();
        for x in &mut p {
            *x /= s;
        }
        p
    }

    pub fn mean(&self) -> f64 {
        self.pmf_table()
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }
}

fn poisson_table(lambda: f64) -> Vec<f64> {
    if lambda == 0.0 {
        return vec![1.0];
    }
    let k_max = (lambda + 12.0 * lambda.sqrt() + 20.0).ceil() as usize;
    let ln_l = lambda.ln();
    let mut ln_fact = 0.0;
    (0..=k_max)
        .map(|k| {
            if k > 0 {
                ln_fact += (k as f64).ln();
            }
            (k as f64 * ln_l - lambda - ln_fact).exp()
        })
        .collect()
}

/// `P(k < t)` for a probability table.
pub fn prob_below(table: &[f64], t: usize) -> f64 {
    table.iter().take(t).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_table_matches_closed_form() {
        let t = CountModel::poisson(0.766).unwrap().pmf_table();
        let l: f64 = 0.766;
        assert!((t[0] - (-l).exp()).abs() < 1e-15);
        assert!((t[3] - l.powi(3) / 6.0 * (-l).exp()).abs() < 1e-15);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn large_poisson_mean_stays_finite() {
        let t = CountModel::poisson(2000.0).unwrap().pmf_table();
        let m: f64 = t.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert!((m - 2000.0).abs() < 1e-6);
    }

    #[test]
    fn zero_mean_poisson_is_point_mass() {
        assert_eq!(CountModel::poisson(0.0).unwrap().pmf_table(), vec![1.0]);
    }

    #[test]
    fn truncated_mixture_is_normalized() {
        let m = CountModel::mixture(vec![
            GaussianComponent {
                amplitude: 0.011,
                mean: -46.0,
                sd: 65.0,
            },
            GaussianComponent {
                amplitude: 0.015,
                mean: 7.6,
                sd: 5.0,
            },
        ])
        .unwrap();
        let t = m.pmf_table();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(t.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn mixture_validation() {
        assert!(GaussianMixtureModel::new(vec![]).is_err());
        assert!(GaussianMixtureModel::new(vec![GaussianComponent {
            amplitude: 1.0,
            mean: 0.0,
            sd: 0.0
        }])
        .is_err());
        assert!(GaussianMixtureModel::new(vec![GaussianComponent {
            amplitude: -1.0,
            mean: 0.0,
            sd: 1.0
        }])
        .is_err());
    }

    #[test]
    fn histogram_statistics() {
        let h = CountHistogram::from_pairs(&[(0, 2), (2, 2), (2, 1)], None).unwrap();
        assert_eq!(h.counts, vec![2, 0, 3]);
        assert_eq!(h.total(), 5);
        assert!((h.mean() - 1.2).abs() < 1e-15);
        assert_eq!(h.max_count(), Some(2));
        assert!((h.fraction_at_least(1) - 0.6).abs() < 1e-15);
    }
}
