//! Subcommand implementations.
//!
//! | file | contents |
//! |------|----------|
//! | `overview.csv` | overview of initialization and readout metrics |
//! | `fidelity_report.csv` | readout error budget: measured and corrected errors, F, SNR |
//! | `fit_params.csv` | rate-model parameters with one-sigma errors |
//! | `threshold.csv` | charge-state readout errors and fidelity |

use std::path::Path;

use nvscc_core::excited_state::{
    field_strain_map, synth_ple_spectrum, transitions_at, TransitionTable,
};
use nvscc_core::io;
use nvscc_core::photon::fit::{fit_count_model, FitKind};
use nvscc_core::photon::sampling::sample_histogram;
use nvscc_core::photon::threshold::{charge_fidelity, errors_at, optimize_threshold};
use nvscc_core::photon::{CountHistogram, CountModel};
use nvscc_core::protocol::{
    conventional_snr, end_to_end_mc, fidelity_and_snr, forward_error_model, invert_error_model,
    speedup_curve, ProtocolErrorBudget,
};
use nvscc_core::rate::{
    add_relative_noise, global_fit, lifetime_from_probability, synthesize_bundle, GlobalParams,
    LabeledTrace, TraceFamily,
};
use nvscc_core::spin_hamiltonian::{infer_field, odmr_transitions};

use crate::config::ScenarioConfig;
use crate::report::{pct, Outputs};
use crate::scenario as sc;
use crate::{CliError, Command};

type R<T = ()> = Result<T, CliError>;

pub fn dispatch(cmd: &Command, c: &ScenarioConfig, seed: u64, out: &mut Outputs) -> R {
    match cmd {
        Command::Ple => ple(c, out),
        Command::OdmrInfer { csv } => odmr_infer(c, csv.as_deref(), out),
        Command::PumpSim => pump_sim(c, seed, out),
        Command::PumpFit { csv } => pump_fit(c, csv.as_deref(), seed, out),
        Command::HistFit { csv } => hist_fit(c, csv.as_deref(), seed, out),
        Command::Threshold { csv, csv_zero } => {
            threshold(c, csv.as_deref(), csv_zero.as_deref(), out)
        }
        Command::Protocol => protocol(c, out),
        Command::Speedup => speedup(c, out),
        Command::Mc => mc(c, seed, out),
    }
}

fn transition_rows(t: &TransitionTable) -> Vec<Vec<String>> {
    t.rows
        .iter()
        .map(|r| {
            vec![
                r.ground.to_string(),
                r.excited.to_string(),
                r.energy_ghz.to_string(),
                r.strength.to_string(),
                r.ground_ms.to_string(),
                r.excited_ms.to_string(),
            ]
        })
        .collect()
}

fn ple(c: &ScenarioConfig, out: &mut Outputs) -> R {
    let params = sc::excited_params(c)?;
    let strain = sc::strain(c, "strain_ghz")?;
    let field = sc::field(c)?;
    let table = transitions_at(&params, &strain, &field);
    let n = sc::usize_key(c, "ple_points")?;
    let grid = sc::linspace(
        sc::f64_key(c, "ple_min_ghz")?,
        sc::f64_key(c, "ple_max_ghz")?,
        n,
    );
    let ple = synth_ple_spectrum(&table, &grid)?;
    out.xy(
        "ple_spectrum.csv",
        ["detuning_ghz", "intensity"],
        ple.detuning_ghz
            .iter()
            .copied()
            .zip(ple.intensity.iter().copied()),
    )?;
    out.table(
        "ple_transitions.csv",
        &[
            "ground",
            "excited",
            "detuning_ghz",
            "strength",
            "ground_ms",
            "excited_ms",
        ],
        &transition_rows(&table),
    )?;

    let map_n = sc::usize_key(c, "map_points")?;
    let b = sc::linspace(
        sc::f64_key(c, "map_b_min_mt")?,
        sc::f64_key(c, "map_b_max_mt")?,
        map_n,
    );
    let map_rows = if b.is_empty() {
        vec![]
    } else {
        field_strain_map(
            &params,
            &sc::strain(c, "map_strain_ghz")?,
            &b,
            sc::f64_key(c, "map_theta_deg")?,
        )?
        .rows()
    };
    out.xyz(
        "field_map.csv",
        ["b_mt", "detuning_ghz", "strength"],
        map_rows,
    )?;

    out.say(format!(
        "PLE at strain {} GHz, B = {} mT, theta = {} deg",
        strain.xi_perp_ghz, field.b_mt, field.theta_deg
    ));
    out.say(format!(
        "{} transitions, {} spectral peaks",
        table.rows.len(),
        ple.peak_indices().len()
    ));
    for r in table.strongest_with_character(0).iter().take(2) {
        out.say(format!(
            "spin-0 line at {:.3} GHz, strength {:.3}",
            r.energy_ghz, r.strength
        ));
    }
    Ok(())
}

fn odmr_infer(c: &ScenarioConfig, csv: Option<&Path>, out: &mut Outputs) -> R {
    let params = sc::ground_params(c)?;
    let lines = match csv {
        Some(p) => {
            let l = io::read_odmr_lines(p)?;
            let f = l.frequencies();
            let (lo, hi) = f
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                    (a.min(x), b.max(x))
                });
            out.diag(format!(
                "{}: {} lines, {lo} to {hi} Hz",
                p.display(),
                l.len()
            ));
            l
        }
        None => odmr_transitions(&params, &sc::field(c)?),
    };
    out.with("odmr_lines.csv", |p| io::write_odmr_lines(p, &lines))?;
    let est = infer_field(&lines, &params, &sc::inference_options(c)?)?;
    out.table(
        "field_fit.csv",
        &[
            "b_mt",
            "sigma_b_mt",
            "theta_deg",
            "sigma_theta_deg",
            "rms_residual_hz",
            "theta_defined",
        ],
        &[vec![
            est.field.b_mt.to_string(),
            est.sigma_b_mt.to_string(),
            est.field.theta_deg.to_string(),
            est.sigma_theta_deg.to_string(),
            est.rms_residual_hz.to_string(),
            est.theta_defined.to_string(),
        ]],
    )?;
    out.say(format!("lines: {}", lines.len()));
    out.say(format!(
        "B = {:.4} +/- {:.4} mT",
        est.field.b_mt, est.sigma_b_mt
    ));
    if est.theta_defined {
        out.say(format!(
            "theta = {:.2} +/- {:.2} deg",
            est.field.theta_deg, est.sigma_theta_deg
        ));
    } else {
        out.say("theta undefined at this field");
    }
    out.say(format!("rms residual = {:.1} Hz", est.rms_residual_hz));
    Ok(())
}

fn simulated_bundle(
    c: &ScenarioConfig,
    seed: u64,
) -> R<(GlobalParams, Vec<LabeledTrace>, Vec<LabeledTrace>)> {
    let g = sc::global_params(c)?;
    let clean = synthesize_bundle(&g, sc::pump_bins(c)?)?;
    let noisy = add_relative_noise(&clean, sc::f64_key(c, "trace_noise_rel")?, seed)?;
    Ok((g, clean, noisy))
}

fn pump_sim(c: &ScenarioConfig, seed: u64, out: &mut Outputs) -> R {
    let (_, clean, noisy) = simulated_bundle(c, seed)?;
    out.with("pump_bundle.csv", |p| io::write_bundle(p, &noisy))?;
    let rows: Vec<Vec<String>> = clean
        .iter()
        .map(|l| {
            vec![
                l.family.label().into(),
                l.variant.label().into(),
                l.trace.expected_photons().to_string(),
            ]
        })
        .collect();
    out.table(
        "expected_photons.csv",
        &["family", "variant", "expected_photons"],
        &rows,
    )?;
    out.say("expected photons per trace (noise-free):");
    for l in &clean {
        out.say(format!(
            "  {} {:<7} {:.4}",
            l.family.label(),
            l.variant.label(),
            l.trace.expected_photons()
        ));
    }
    Ok(())
}

fn lifetime_sigma(p: f64, sigma_p: f64, bw: f64) -> f64 {
    // |dT/dp| with T = -bw / ln(1 - p)
    let l = (-p).ln_1p();
    sigma_p * bw / (l * l * (1.0 - p))
}

fn pump_fit(c: &ScenarioConfig, csv: Option<&Path>, seed: u64, out: &mut Outputs) -> R {
    let traces = match csv {
        Some(p) => {
            let t = io::read_bundle(p)?;
            let samples: usize = t.iter().map(|l| l.trace.rate_cps.len()).sum();
            out.diag(format!(
                "{}: {} traces, {samples} samples",
                p.display(),
                t.len()
            ));
            t
        }
        None => simulated_bundle(c, seed)?.2,
    };
    let mut initial = sc::global_params(c)?;
    if let Some(first) = traces.first() {
        initial.pump.binwidth_s = first.trace.binwidth_s;
    }
    let opts = sc::fit_options(c, initial)?;
    let fit = global_fit(&traces, &opts)?;
    let (p, s) = (&fit.params, &fit.sigma);
    let bw = p.pump.binwidth_s;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut row =
        |name: &str, v: f64, e: f64| rows.push(vec![name.into(), v.to_string(), e.to_string()]);
    for (name, pv, sv) in [
        ("st0", p.pump.p_st0, s.pump.p_st0),
        ("st1", p.pump.p_st1, s.pump.p_st1),
        ("ts", p.pump.p_ts, s.pump.p_ts),
        ("ion", p.pump.p_ion, s.pump.p_ion),
    ] {
        row(&format!("p_{name}"), pv, sv);
        row(
            &format!("t_{name}_s"),
            lifetime_from_probability(pv, bw)?,
            lifetime_sigma(pv, sv, bw),
        );
    }
    row("f0_cps", p.fl.f0_cps, s.fl.f0_cps);
    row("f1_cps", p.fl.f1_cps, s.fl.f1_cps);
    row("loss1", p.fl.loss1, s.fl.loss1);
    row("loss6", p.fl.loss6, s.fl.loss6);
    row("e_mw", p.e_mw, s.e_mw);
    for f in TraceFamily::ALL {
        let (fp, fs) = (&p.families[f.index()], &s.families[f.index()]);
        row(&format!("n0_{}", f.label()), fp.n0, fs.n0);
        row(&format!("nplus_{}", f.label()), fp.n_plus, fs.n_plus);
        row(
            &format!("nminus_{}", f.label()),
            fp.n_minus(),
            (fs.n0.powi(2) + fs.n_plus.powi(2)).sqrt(),
        );
        row(
            &format!("spin_fidelity_{}", f.label()),
            fp.spin_fidelity(),
            f64::NAN,
        );
    }
    row("r_squared", fit.r_squared, f64::NAN);
    out.table("fit_params.csv", &["parameter", "value", "sigma"], &rows)?;
    let model = synthesize_bundle(
        p,
        traces
            .iter()
            .map(|l| l.trace.rate_cps.len())
            .max()
            .unwrap_or(0),
    )?;
    out.with("pump_fit_model.csv", |path| io::write_bundle(path, &model))?;

    out.say(format!(
        "global fit of {} traces, {} iterations, R^2 = {:.4}",
        traces.len(),
        fit.iterations,
        fit.r_squared
    ));
    for (name, pv, sv) in [
        ("T_st0", p.pump.p_st0, s.pump.p_st0),
        ("T_st1", p.pump.p_st1, s.pump.p_st1),
        ("T_ts", p.pump.p_ts, s.pump.p_ts),
        ("T_ion", p.pump.p_ion, s.pump.p_ion),
    ] {
        out.say(format!(
            "{name} = {:.4e} +/- {:.1e} s",
            lifetime_from_probability(pv, bw)?,
            lifetime_sigma(pv, sv, bw)
        ));
    }
    out.say(format!(
        "f0 = {:.0} cps, f1 = {:.0} cps, E_MW = {}%",
        p.fl.f0_cps,
        p.fl.f1_cps,
        pct(p.e_mw)
    ));
    for f in TraceFamily::ALL {
        let fp = &p.families[f.index()];
        out.say(format!(
            "family {}: n0 {}%, n+1 {}%, n-1 {}%, spin fidelity {}%",
            f.label(),
            pct(fp.n0),
            pct(fp.n_plus),
            pct(fp.n_minus()),
            pct(fp.spin_fidelity())
        ));
    }
    Ok(())
}

fn histogram_diag(path: &Path, h: &CountHistogram) -> String {
    format!(
        "{}: {} bins, {} repetitions, mean {:.3}",
        path.display(),
        h.counts.len(),
        h.total(),
        h.mean()
    )
}

fn hist_fit(c: &ScenarioConfig, csv: Option<&Path>, seed: u64, out: &mut Outputs) -> R {
    let hist = match csv {
        Some(p) => {
            let h = io::read_histogram(p)?;
            out.diag(histogram_diag(p, &h));
            h
        }
        None => {
            let reps = sc::usize_key(c, "hist_repetitions")? as u64;
            let h = sample_histogram(&sc::nvm_model(c)?, reps, seed, Some(sc::readout_window(c)?))?;
            out.with("histogram.csv", |p| io::write_histogram(p, &h))?;
            h
        }
    };
    let k = sc::usize_key(c, "hist_components")?;
    let poisson = fit_count_model(&hist, FitKind::Poisson)?;
    let mixture = fit_count_model(&hist, FitKind::GaussianMixture(k))?;

    let mut rows = Vec::new();
    for (name, fit) in [("poisson", &poisson), ("mixture", &mixture)] {
        match &fit.model {
            CountModel::Poisson(m) => rows.push(vec![
                name.into(),
                "0".into(),
                "1".into(),
                m.lambda.to_string(),
                m.lambda.sqrt().to_string(),
                fit.r_squared.to_string(),
            ]),
            CountModel::Mixture(m) => {
                for (i, g) in m.components.iter().enumerate() {
                    rows.push(vec![
                        name.into(),
                        i.to_string(),
                        g.amplitude.to_string(),
                        g.mean.to_string(),
                        g.sd.to_string(),
                        fit.r_squared.to_string(),
                    ]);
                }
            }
            CountModel::Table(_) => {}
        }
    }
    out.table(
        "hist_fit.csv",
        &["model", "component", "amplitude", "mean", "sd", "r_squared"],
        &rows,
    )?;

    let frac = hist.fractions();
    let pp = poisson.model.pmf_table();
    let pm = mixture.model.pmf_table();
    let at = |t: &[f64], k: usize| t.get(k).copied().unwrap_or(0.0);
    let curve: Vec<Vec<String>> = (0..frac.len())
        .map(|k| {
            vec![
                k.to_string(),
                frac[k].to_string(),
                at(&pp, k).to_string(),
                at(&pm, k).to_string(),
            ]
        })
        .collect();
    out.table(
        "hist_model.csv",
        &["photon_count", "fraction", "poisson", "mixture"],
        &curve,
    )?;

    out.say(format!(
        "{} repetitions, mean {:.3} counts",
        hist.total(),
        hist.mean()
    ));
    out.say(format!("Poisson: R^2 = {:.4}", poisson.r_squared));
    out.say(format!(
        "{k}-component mixture: R^2 = {:.4}",
        mixture.r_squared
    ));
    if !mixture.degenerate_components.is_empty() {
        out.say(format!(
            "degenerate mixture components: {:?}",
            mixture.degenerate_components
        ));
    }
    Ok(())
}

fn count_models(
    c: &ScenarioConfig,
    csv: Option<&Path>,
    csv_zero: Option<&Path>,
    out: &mut Outputs,
) -> R<(CountModel, CountModel)> {
    let mut load = |p: Option<&Path>, fallback: CountModel| -> R<CountModel> {
        match p {
            Some(p) => {
                let h = io::read_histogram(p)?;
                out.diag(histogram_diag(p, &h));
                Ok(CountModel::from_histogram(&h)?)
            }
            None => Ok(fallback),
        }
    };
    let minus = load(csv, sc::nvm_model(c)?)?;
    let zero = load(csv_zero, sc::nv0_model(c)?)?;
    Ok((minus, zero))
}

fn threshold(
    c: &ScenarioConfig,
    csv: Option<&Path>,
    csv_zero: Option<&Path>,
    out: &mut Outputs,
) -> R {
    let (minus, zero) = count_models(c, csv, csv_zero, out)?;
    let (m, z) = (minus.pmf_table(), zero.pmf_table());
    let (t, em, ez) = match sc::fixed_threshold(c)? {
        Some(t) => {
            let (em, ez) = errors_at(&m, &z, t);
            (t, em, ez)
        }
        None => {
            let r = optimize_threshold(&minus, &zero);
            (r.discriminator.threshold, r.error_minus, r.error_zero)
        }
    };
    let f = charge_fidelity(em, ez)?;
    let window = sc::readout_window(c)?;
    out.table(
        "threshold.csv",
        &[
            "readout_duration_s",
            "threshold",
            "E_NV-",
            "E_NV0",
            "F_charge",
        ],
        &[vec![
            window.to_string(),
            t.to_string(),
            em.to_string(),
            ez.to_string(),
            f.to_string(),
        ]],
    )?;
    let k_max = m.len().max(z.len());
    let scan: Vec<Vec<String>> = (0..=k_max)
        .map(|k| {
            let (a, b) = errors_at(&m, &z, k);
            vec![
                k.to_string(),
                a.to_string(),
                b.to_string(),
                (a + b).to_string(),
            ]
        })
        .collect();
    out.table(
        "threshold_scan.csv",
        &["threshold", "E_NV-", "E_NV0", "total"],
        &scan,
    )?;
    out.say(format!("readout duration {window} s"));
    out.say(format!("threshold: >= {t} counts assigned NV-"));
    out.say(format!("E_NV- = {}%, E_NV0 = {}%", pct(em), pct(ez)));
    out.say(format!("F_charge = {}%", pct(f)));
    Ok(())
}

/// Intrinsic readout errors and the fidelity report for the configured NV.
fn budget(c: &ScenarioConfig) -> R<(ProtocolErrorBudget, f64, f64, f64)> {
    let init = sc::protocol_init(c)?;
    let measured = sc::measured(c)?;
    let (e0, e1) = invert_error_model(&measured, &init)?;
    let (e0, e1) = (e0.clamp(0.0, 1.0), e1.clamp(0.0, 1.0));
    let (f, snr) = fidelity_and_snr(e0, e1)?;
    Ok((
        ProtocolErrorBudget { init, e0, e1 },
        measured.fidelity(),
        f,
        snr,
    ))
}

fn protocol(c: &ScenarioConfig, out: &mut Outputs) -> R {
    let (b, f_meas, f, snr) = budget(c)?;
    let m = sc::measured(c)?;
    let check = forward_error_model(&b, None)?;
    out.table(
        "fidelity_report.csv",
        &[
            "E0_meas", "E1_meas", "F_meas", "P_+1", "P_-1", "E_MW", "E0", "E1", "F", "SNR",
        ],
        &[vec![
            pct(m.e0_meas),
            pct(m.e1_meas),
            pct(f_meas),
            pct(b.init.p_plus1),
            pct(b.init.p_minus1),
            pct(b.init.e_mw),
            pct(b.e0),
            pct(b.e1),
            pct(f),
            format!("{snr:.2}"),
        ]],
    )?;
    let nvm = sc::f64_key(c, "nvm_fraction")?;
    out.table(
        "overview.csv",
        &["metric", "value"],
        &[
            vec!["NV- fraction (%)".into(), pct(nvm)],
            vec!["spin init. |+1> fraction (%)".into(), pct(b.init.p_plus1)],
            vec!["MW error (%)".into(), pct(b.init.e_mw)],
            vec!["end-to-end fidelity (%)".into(), pct(f_meas)],
            vec!["readout fidelity (%)".into(), pct(f)],
        ],
    )?;
    out.say(format!(
        "E0_meas = {}%, E1_meas = {}%",
        pct(m.e0_meas),
        pct(m.e1_meas)
    ));
    out.say(format!("F_meas = {}%", pct(f_meas)));
    out.say(format!("E0 = {}%, E1 = {}%", pct(b.e0), pct(b.e1)));
    out.say(format!("F = {}%", pct(f)));
    out.say(format!("SNR = {snr:.2}"));
    out.say(format!(
        "forward check: E0_meas = {}%, E1_meas = {}%",
        pct(check.e0_meas),
        pct(check.e1_meas)
    ));
    Ok(())
}

fn speedup(c: &ScenarioConfig, out: &mut Outputs) -> R {
    let timing = sc::timing(c)?;
    let (_, _, _, snr) = budget(c)?;
    let n = sc::usize_key(c, "speedup_points")?;
    let grid = sc::linspace(0.0, sc::f64_key(c, "speedup_t_max_s")?, n);
    let curve = speedup_curve(&grid, &timing, snr)?;
    out.xy(
        "speedup.csv",
        ["t_seq_s", "speedup"],
        curve.iter().map(|p| (p.t_seq_s, p.speedup)),
    )?;
    out.say(format!("single-shot SNR = {snr:.2}"));
    out.say(format!(
        "conventional SNR per repetition = {:.4}",
        conventional_snr(&timing)?
    ));
    if let (Some(a), Some(b)) = (curve.first(), curve.last()) {
        out.say(format!(
            "speed-up {:.2} at t_seq = {} s",
            a.speedup, a.t_seq_s
        ));
        out.say(format!(
            "speed-up {:.1} at t_seq = {} s",
            b.speedup, b.t_seq_s
        ));
    } else {
        out.say("empty sensing-time grid");
    }
    Ok(())
}

fn mc(c: &ScenarioConfig, seed: u64, out: &mut Outputs) -> R {
    let (b, _, _, _) = budget(c)?;
    let minus = sc::nvm_model(c)?;
    let zero = sc::nv0_model(c)?;
    let t = match sc::fixed_threshold(c)? {
        Some(t) => t,
        None => optimize_threshold(&minus, &zero).discriminator.threshold,
    };
    let reps = sc::usize_key(c, "mc_repetitions")? as u64;
    let r = end_to_end_mc(&b, &minus, &zero, t, reps, seed)?;
    out.with("mc_hist_zero.csv", |p| io::write_histogram(p, &r.hist_zero))?;
    out.with("mc_hist_one.csv", |p| io::write_histogram(p, &r.hist_one))?;
    let rows = [
        ("threshold", t as f64),
        ("repetitions", reps as f64),
        ("E0_meas", r.measured.e0_meas),
        ("E1_meas", r.measured.e1_meas),
        ("F_meas", r.f_meas),
        ("sigma_F_meas", r.sigma_f),
        ("E0_meas_analytic", r.analytic.e0_meas),
        ("E1_meas_analytic", r.analytic.e1_meas),
        ("F_meas_analytic", r.analytic.fidelity()),
        ("ionization_E0", r.ionization_e0),
        ("ionization_E1", r.ionization_e1),
    ];
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(k, v)| vec![k.to_string(), v.to_string()])
        .collect();
    out.table("mc_report.csv", &["quantity", "value"], &rows)?;
    out.say(format!(
        "{reps} repetitions per arm, threshold {t}, seed {seed}"
    ));
    out.say(format!(
        "F_meas = {:.2} +/- {:.2}% (analytic {:.2}%)",
        100.0 * r.f_meas,
        100.0 * r.sigma_f,
        100.0 * r.analytic.fidelity()
    ));
    out.say(format!(
        "E0_meas = {}%, E1_meas = {}%",
        pct(r.measured.e0_meas),
        pct(r.measured.e1_meas)
    ));
    Ok(())
}
