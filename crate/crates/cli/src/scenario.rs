//! Typed model parameters built from a [`ScenarioConfig`].

use nvscc_core::excited_state::{ExcitedStateParams, StrainField};
use nvscc_core::optim::LmOptions;
use nvscc_core::photon::{CountModel, GaussianComponent};
use nvscc_core::protocol::{MeasuredErrors, ProtocolInit, SensingTimingModel};
use nvscc_core::rate::{
    FamilyPopulations, FluorescenceParams, GlobalFitOptions, GlobalParams, OpticalPumpParams,
    Weighting,
};
use nvscc_core::spin_hamiltonian::{FieldInferenceOptions, FieldVector, GroundSpinParams};

use crate::config::{ConfigError, ScenarioConfig};
use crate::CliError;

type R<T> = Result<T, CliError>;

fn cfg<T>(r: Result<T, ConfigError>) -> R<T> {
    r.map_err(CliError::Config)
}

pub fn ground_params(c: &ScenarioConfig) -> R<GroundSpinParams> {
    let p = GroundSpinParams {
        d_hz: cfg(c.f64("d_ground_hz"))?,
        gamma_e_hz_per_mt: cfg(c.f64("gamma_e_hz_per_mt"))?,
        gamma_n_hz_per_mt: cfg(c.f64("gamma_n_hz_per_mt"))?,
        q_hz: cfg(c.f64("quadrupole_hz"))?,
        a_par_hz: cfg(c.f64("a_par_hz"))?,
        a_perp_hz: cfg(c.f64("a_perp_hz"))?,
    };
    p.validate()?;
    Ok(p)
}

pub fn field(c: &ScenarioConfig) -> R<FieldVector> {
    Ok(FieldVector::new(
        cfg(c.f64("field_mt"))?,
        cfg(c.f64("field_theta_deg"))?,
    )?)
}

pub fn inference_options(c: &ScenarioConfig) -> R<FieldInferenceOptions> {
    Ok(FieldInferenceOptions {
        b_max_mt: cfg(c.f64("odmr_b_max_mt"))?,
        b_step_mt: cfg(c.f64("odmr_b_step_mt"))?,
        theta_step_deg: cfg(c.f64("odmr_theta_step_deg"))?,
        rms_tolerance_hz: cfg(c.f64("odmr_rms_tol_hz"))?,
    })
}

pub fn excited_params(c: &ScenarioConfig) -> R<ExcitedStateParams> {
    let p = ExcitedStateParams {
        lambda_par_ghz: cfg(c.f64("lambda_par_ghz"))?,
        lambda_perp_ghz: cfg(c.f64("lambda_perp_ghz"))?,
        d_par_ghz: cfg(c.f64("d_par_ghz"))?,
        d_perp_ghz: cfg(c.f64("d_perp_ghz"))?,
        d_ground_ghz: cfg(c.f64("excited_d_ground_ghz"))?,
        gamma_e_ghz_per_mt: cfg(c.f64("excited_gamma_ghz_per_mt"))?,
        ..ExcitedStateParams::default()
    }
    .with_excited_offset(cfg(c.f64("excited_offset_ghz"))?);
    p.validate()?;
    Ok(p)
}

pub fn strain(c: &ScenarioConfig, key: &str) -> R<StrainField> {
    Ok(StrainField::new(cfg(c.f64(key))?)?)
}

pub fn global_params(c: &ScenarioConfig) -> R<GlobalParams> {
    let mut pump = OpticalPumpParams::from_lifetimes(
        cfg(c.f64("t_st0_s"))?,
        cfg(c.f64("t_st1_s"))?,
        cfg(c.f64("t_ts_s"))?,
        cfg(c.f64("t_ion_s"))?,
        cfg(c.f64("binwidth_s"))?,
    )?;
    pump.p_rec = cfg(c.f64("p_rec"))?;
    pump.validate()?;
    let fl = FluorescenceParams {
        f0_cps: cfg(c.f64("f0_cps"))?,
        f1_cps: cfg(c.f64("f1_cps"))?,
        loss1: cfg(c.f64("fluor_loss1"))?,
        loss6: cfg(c.f64("fluor_loss6"))?,
    };
    fl.validate()?;
    let fam = |f: &str| -> R<FamilyPopulations> {
        let p = FamilyPopulations {
            n0: cfg(c.f64(&format!("init_{f}_n0")))?,
            n_plus: cfg(c.f64(&format!("init_{f}_nplus")))?,
        };
        if p.n0 < 0.0 || p.n_plus < 0.0 || p.n_minus() < -1e-9 {
            return Err(CliError::Config(ConfigError(format!(
                "init_{f}: populations must be non-negative and sum to at most 1"
            ))));
        }
        Ok(p)
    };
    let e_mw = cfg(c.f64("e_mw"))?;
    if !(0.0..=1.0).contains(&e_mw) {
        return Err(CliError::Config(ConfigError(format!(
            "e_mw must lie in [0, 1], got {e_mw}"
        ))));
    }
    Ok(GlobalParams {
        pump,
        fl,
        e_mw,
        families: [fam("a")?, fam("b")?, fam("c")?],
    })
}

pub fn pump_bins(c: &ScenarioConfig) -> R<usize> {
    let d = cfg(c.f64("pump_duration_s"))?;
    let bw = cfg(c.f64("binwidth_s"))?;
    let n = (d / bw).round();
    if !(n >= 1.0 && n.is_finite()) {
        return Err(CliError::Config(ConfigError(format!(
            "pump_duration_s must cover at least one bin, got {d}"
        ))));
    }
    Ok(n as usize)
}

pub fn fit_options(c: &ScenarioConfig, initial: GlobalParams) -> R<GlobalFitOptions> {
    let weighting = match c.raw("fit_weighting") {
        "uniform" => Weighting::Uniform,
        "relative" => Weighting::Relative { floor_cps: 1.0 },
        s => {
            return Err(CliError::Config(ConfigError(format!(
                "fit_weighting: expected uniform or relative, got '{s}'"
            ))))
        }
    };
    Ok(GlobalFitOptions {
        initial,
        fit_p_ion: cfg(c.bool("fit_p_ion"))?,
        weighting,
        lm: LmOptions {
            max_iter: cfg(c.usize("fit_max_iter"))?,
            ..LmOptions::default()
        },
    })
}

pub fn readout_window(c: &ScenarioConfig) -> R<f64> {
    cfg(c.f64("readout_duration_s"))
}

pub fn nv0_model(c: &ScenarioConfig) -> R<CountModel> {
    Ok(CountModel::poisson(cfg(c.f64("nv0_lambda"))?)?)
}

fn parse_components(s: &str) -> Result<Vec<GaussianComponent>, ConfigError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v: Vec<f64> = t
                .split(':')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| ConfigError(format!("nvm_mix_components: cannot parse '{t}'")))?;
            match v[..] {
                [amplitude, mean, sd] => Ok(GaussianComponent {
                    amplitude,
                    mean,
                    sd,
                }),
                _ => Err(ConfigError(format!(
                    "nvm_mix_components: expected amp:mean:sd, got '{t}'"
                ))),
            }
        })
        .collect()
}

pub fn nvm_model(c: &ScenarioConfig) -> R<CountModel> {
    match c.raw("nvm_model") {
        "poisson" => Ok(CountModel::poisson(cfg(c.f64("nvm_lambda"))?)?),
        "mixture" => {
            let comps = cfg(parse_components(c.raw("nvm_mix_components")))?;
            Ok(CountModel::mixture(comps)?)
        }
        s => Err(CliError::Config(ConfigError(format!(
            "nvm_model: expected poisson or mixture, got '{s}'"
        )))),
    }
}

/// `None` selects the optimal threshold.
pub fn fixed_threshold(c: &ScenarioConfig) -> R<Option<usize>> {
    match c.raw("threshold") {
        "auto" => Ok(None),
        _ => Ok(Some(cfg(c.usize("threshold"))?)),
    }
}

pub fn protocol_init(c: &ScenarioConfig) -> R<ProtocolInit> {
    let p = ProtocolInit {
        e_nv0: cfg(c.f64("e_nv0"))?,
        p_plus1: cfg(c.f64("p_plus1"))?,
        p_minus1: cfg(c.f64("p_minus1"))?,
        e_mw: cfg(c.f64("e_mw"))?,
    };
    p.validate()?;
    Ok(p)
}

pub fn measured(c: &ScenarioConfig) -> R<MeasuredErrors> {
    let m = MeasuredErrors {
        e0_meas: cfg(c.f64("e0_meas"))?,
        e1_meas: cfg(c.f64("e1_meas"))?,
    };
    for (k, v) in [("e0_meas", m.e0_meas), ("e1_meas", m.e1_meas)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Config(ConfigError(format!(
                "{k} must lie in [0, 1], got {v}"
            ))));
        }
    }
    Ok(m)
}

pub fn timing(c: &ScenarioConfig) -> R<SensingTimingModel> {
    let t = SensingTimingModel {
        single_shot_overhead_s: cfg(c.f64("single_shot_overhead_s"))?,
        conventional_rep_overhead_s: cfg(c.f64("conventional_rep_overhead_s"))?,
        readout_window_s: cfg(c.f64("conventional_window_s"))?,
        contrast: cfg(c.f64("contrast"))?,
        f_sat_cps: cfg(c.f64("f_sat_cps"))?,
        include_postselection: cfg(c.bool("include_postselection"))?,
        acceptance_rate: cfg(c.f64("acceptance_rate"))?,
    };
    t.validate()?;
    Ok(t)
}

pub fn f64_key(c: &ScenarioConfig, key: &str) -> R<f64> {
    cfg(c.f64(key))
}

pub fn usize_key(c: &ScenarioConfig, key: &str) -> R<usize> {
    cfg(c.usize(key))
}

/// Evenly spaced grid of `n` points from `a` to `b`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
