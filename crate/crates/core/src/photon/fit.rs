use super::{CountHistogram, CountModel, GaussianComponent, GaussianMixtureModel};
use crate::error::{invalid, Error, Result};
use crate::optim::{levenberg_marquardt, r_squared, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Poisson,
    GaussianMixture(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountFit {
    pub model: CountModel,
    pub r_squared: f64,
    /// Components whose weight fell below 0.1 % of the events.
    pub degenerate_components: Vec<usize>,
}

const MIN_REPETITIONS: u64 = 100;

/// Fit a histogram: Poisson by its maximum-likelihood mean, mixtures by least
/// squares on the fraction-of-events histogram (three starting points).
pub fn fit_count_model(hist: &CountHistogram, kind: FitKind) -> Result<CountFit> {
    if hist.total() < MIN_REPETITIONS {
        return Err(invalid(format!(
            "need at least {MIN_REPETITIONS} repetitions, got {}",
            hist.total()
        )));
    }
    let frac = hist.fractions();
    match kind {
        FitKind::Poisson => {
            let model = CountModel::poisson(hist.mean())?;
            let pmf = model.pmf_table();
            let pred: Vec<f64> = (0..frac.len())
                .map(|k| pmf.get(k).copied().unwrap_or(0.0))
                .collect();
            Ok(CountFit {
                r_squared: r_squared(&frac, &pred),
                model,
                degenerate_components: vec![],
            })
        }
        FitKind::GaussianMixture(k) => fit_mixture(hist, &frac, k),
    }
}

fn heights(x: &[f64], k: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let (a, mu, s) = (x[3 * j].abs(), x[3 * j + 1], x[3 * j + 2].exp());
                    a * (-((i as f64) - mu).powi(2) / (2.0 * s * s)).exp()
                })
                .sum()
        })
        .collect()
}

fn starts(hist: &CountHistogram, frac: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mean = hist.mean();
    let sd = hist.variance().sqrt().max(0.5);
    let peak = frac.iter().cloned().fold(0.0, f64::max);
    let mode = frac
        .iter()
        .enumerate()
        .fold(0, |b, (i, &p)| if p > frac[b] { i } else { b }) as f64;
    let quantile = |q: f64| {
        let mut acc = 0.0;
        for (i, p) in frac.iter().enumerate() {
            acc += p;
            if acc >= q {
                return i as f64;
            }
        }
        (frac.len() - 1) as f64
    };
    let build = |f: &dyn Fn(usize) -> (f64, f64, f64)| -> Vec<f64> {
        (0..k)
            .flat_map(|j| {
                let (a, mu, s) = f(j);
                [a, mu, s.max(0.3).ln()]
            })
            .collect()
    };
    let kf = k as f64;
    vec![
        build(&|j| (peak, quantile((j as f64 + 0.5) / kf), sd / kf)),
        build(&|j| (peak / (j as f64 + 1.0), mode + j as f64 * sd, sd / kf)),
        build(&|j| (peak / kf, mean * (j as f64 + 1.0) / kf, sd)),
    ]
}

fn fit_mixture(hist: &CountHistogram, frac: &[f64], k: usize) -> Result<CountFit> {
    if k == 0 {
        return Err(invalid("mixture needs at least one component"));
    }
    let n = frac.len();
    let opts = LmOptions::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for x0 in starts(hist, frac, k) {
        let r = levenberg_marquardt(
            |x| {
                heights(x, k, n)
                    .iter()
                    .zip(frac)
                    .map(|(m, d)| m - d)
                    .collect()
            },
            &x0,
            &opts,
        );
        if r.cost.is_finite() && best.as_ref().is_none_or(|b| r.cost < b.0) {
            best = Some((r.cost, r.params));
        }
    }
    let (_, x) =
        best.ok_or_else(|| Error::NonConvergence("mixture fit failed from every start".into()))?;
    let components: Vec<GaussianComponent> = (0..k)
        .map(|j| GaussianComponent {
            amplitude: x[3 * j].abs(),
            mean: x[3 * j + 1],
            sd: x[3 * j + 2].exp(),
        })
        .collect();
    let r2 = r_squared(frac, &heights(&x, k, n));
    let degenerate_components = components
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let w: f64 = (0..n.max(1)).map(|i| c.height_at(i as f64)).sum();
            w < 1e-3
        })
        .map(|(j, _)| j)
        .collect::<Vec<_>>();
    if !degenerate_components.is_empty() {
        log::warn!("mixture components {degenerate_components:?} carry almost no weight");
    }
    let model = CountModel::Mixture(GaussianMixtureModel::new(components)?);
    Ok(CountFit {
        model,
        r_squared: r2,
        degenerate_components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_mass_at_zero() {
        let h = CountHistogram::new(vec![500], None).unwrap();
        let f = fit_count_model(&h, FitKind::Poisson).unwrap();
        assert_eq!(f.model, CountModel::poisson(0.0).unwrap());
    }

    #[test]
    fn too_few_repetitions() {
        let h = CountHistogram::new(vec![10, 5], None).unwrap();
        assert!(fit_count_model(&h, FitKind::Poisson).is_err());
    }

    #[test]
    fn single_gaussian_recovered_from_exact_heights() {
        let c = GaussianComponent {
            amplitude: 0.08,
            mean: 12.0,
            sd: 4.0,
        };
        let counts: Vec<u64> = (0..40)
            .map(|k| (c.height_at(k as f64) * 1e7).round() as u64)
            .collect();
        let h = CountHistogram::new(counts, None).unwrap();
        let f = fit_count_model(&h, FitKind::GaussianMixture(1)).unwrap();
        let CountModel::Mixture(m) = &f.model else {
            panic!()
        };
        assert!((m.components[0].mean - 12.0).abs() < 0.01);
        assert!((m.components[0].sd - 4.0).abs() < 0.01);
        assert!(f.r_squared > 0.9999);
    }
}
