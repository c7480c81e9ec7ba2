use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nvscc_cli::config::{Preset, ScenarioConfig, KEYS};
use nvscc_cli::run;
use proptest::prelude::*;

fn nvscc(args: &[&str], out: &Path) -> i32 {
    let mut v = vec!["nvscc"];
    v.extend_from_slice(args);
    v.extend_from_slice(&["--out", out.to_str().unwrap()]);
    run(v)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn small_mc_config(dir: &Path) -> PathBuf {
    write(dir, "small.cfg", "mc_repetitions = 20000\n")
}

#[test]
fn protocol_deep_summary() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(nvscc(&["protocol", "--preset", "deep"], t.path()), 0);
    let s = fs::read_to_string(t.path().join("summary.txt")).unwrap();
    assert!(s.contains("F_meas = 88.5%"), "{s}");
    assert!(s.contains("F = 96.4%"), "{s}");
    assert!(s.contains("SNR = 3.5"), "{s}");
    let t1 = fs::read_to_string(t.path().join("overview.csv")).unwrap();
    assert!(t1.contains("end-to-end fidelity (%),88.5"), "{t1}");
    assert!(t1.contains("readout fidelity (%),96.4"), "{t1}");
}

#[test]
fn mc_is_deterministic_per_seed() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_mc_config(t.path());
    let cfg = cfg.to_str().unwrap();
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    assert_eq!(nvscc(&["mc", "--config", cfg, "--seed", "1"], &a), 0);
    assert_eq!(nvscc(&["mc", "--config", cfg, "--seed", "1"], &b), 0);
    assert_eq!(nvscc(&["mc", "--config", cfg, "--seed", "2"], &c), 0);
    for f in [
        "mc_hist_zero.csv",
        "mc_hist_one.csv",
        "mc_report.csv",
        "summary.txt",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_ne!(
        fs::read(a.join("mc_hist_zero.csv")).unwrap(),
        fs::read(c.join("mc_hist_zero.csv")).unwrap()
    );
}

#[test]
fn unknown_config_key_exits_2() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "bad.cfg", "f0_cps = 1e4\nnot_a_key = 3\n");
    assert_eq!(
        nvscc(&["protocol", "--config", cfg.to_str().unwrap()], t.path()),
        2
    );
}

#[test]
fn invalid_parameter_exits_2() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "bad.cfg", "p_plus1 = 1.5\n");
    assert_eq!(
        nvscc(&["protocol", "--config", cfg.to_str().unwrap()], t.path()),
        2
    );
    let cfg = write(t.path(), "bad2.cfg", "f0_cps = fast\n");
    assert_eq!(
        nvscc(&["pump-sim", "--config", cfg.to_str().unwrap()], t.path()),
        2
    );
}

#[test]
fn bad_flags_exit_2() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(nvscc(&["protocol", "--preset", "medium"], t.path()), 2);
    assert_eq!(nvscc(&["frobnicate"], t.path()), 2);
}

#[test]
fn negative_histogram_exits_4() {
    let t = tempfile::tempdir().unwrap();
    let h = write(t.path(), "h.csv", "photon_count,occurrences\n0,10\n1,-3\n");
    assert_eq!(
        nvscc(&["hist-fit", "--csv", h.to_str().unwrap()], t.path()),
        4
    );
}

#[test]
fn missing_column_exits_4() {
    let t = tempfile::tempdir().unwrap();
    let h = write(t.path(), "h.csv", "photon_count\n0\n1\n");
    assert_eq!(
        nvscc(&["threshold", "--csv", h.to_str().unwrap()], t.path()),
        4
    );
    let b = write(t.path(), "b.csv", "family,variant,time_s\na,none,0\n");
    assert_eq!(
        nvscc(&["pump-fit", "--csv", b.to_str().unwrap()], t.path()),
        4
    );
}

#[test]
fn non_monotone_trace_exits_4() {
    let t = tempfile::tempdir().unwrap();
    let b = write(
        t.path(),
        "b.csv",
        "family,variant,time_s,rate_cps\na,none,0,100\na,none,2e-8,90\na,none,1e-8,80\n",
    );
    assert_eq!(
        nvscc(&["pump-fit", "--csv", b.to_str().unwrap()], t.path()),
        4
    );
}

#[test]
fn missing_input_file_exits_4() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path().join("nope.csv");
    assert_eq!(
        nvscc(&["hist-fit", "--csv", p.to_str().unwrap()], t.path()),
        4
    );
}

#[test]
fn unfittable_lines_exit_3() {
    let t = tempfile::tempdir().unwrap();
    let l = write(
        t.path(),
        "l.csv",
        "frequency_hz,label\n1.0e9,+1\n2.2e9,-1\n4.1e9,mixed\n",
    );
    assert_eq!(
        nvscc(&["odmr-infer", "--csv", l.to_str().unwrap()], t.path()),
        3
    );
    let one = write(t.path(), "one.csv", "frequency_hz,label\n2.87e9,+1\n");
    assert_eq!(
        nvscc(&["odmr-infer", "--csv", one.to_str().unwrap()], t.path()),
        3
    );
}

#[test]
fn odmr_roundtrip_through_files() {
    let t = tempfile::tempdir().unwrap();
    let a = t.path().join("a");
    assert_eq!(nvscc(&["odmr-infer"], &a), 0);
    let lines = a.join("odmr_lines.csv");
    let b = t.path().join("b");
    assert_eq!(
        nvscc(&["odmr-infer", "--csv", lines.to_str().unwrap()], &b),
        0
    );
    let fit = fs::read_to_string(b.join("field_fit.csv")).unwrap();
    let row: Vec<f64> = fit
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .take(4)
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((row[0] - 0.7).abs() < 1e-4, "{fit}");
    assert!((row[2] - 39.0).abs() < 1e-2, "{fit}");
}

#[test]
fn pump_sim_bundle_feeds_pump_fit() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    assert_eq!(nvscc(&["pump-sim", "--seed", "4"], &sim), 0);
    let bundle = sim.join("pump_bundle.csv");
    let text = fs::read_to_string(&bundle).unwrap();
    assert!(text.starts_with("family,variant,time_s,rate_cps"));
    let fit = t.path().join("fit");
    assert_eq!(
        nvscc(&["pump-fit", "--csv", bundle.to_str().unwrap()], &fit),
        0
    );
    let params = fs::read_to_string(fit.join("fit_params.csv")).unwrap();
    let value = |name: &str| -> f64 {
        params
            .lines()
            .find(|l| l.starts_with(&format!("{name},")))
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("t_st0_s") / 4.1e-6 - 1.0).abs() < 0.05);
    assert!((value("t_ts_s") / 1.33e-6 - 1.0).abs() < 0.05);
    assert!((value("nplus_c") - 0.879).abs() < 0.02);
}

#[test]
fn empty_grid_gives_header_only_csv() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(t.path(), "e.cfg", "speedup_points = 0\n");
    assert_eq!(
        nvscc(&["speedup", "--config", cfg.to_str().unwrap()], t.path()),
        0
    );
    assert_eq!(
        fs::read_to_string(t.path().join("speedup.csv")).unwrap(),
        "t_seq_s,speedup\n"
    );
}

#[test]
fn speedup_curve_file() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(nvscc(&["speedup", "--preset", "deep"], t.path()), 0);
    let text = fs::read_to_string(t.path().join("speedup.csv")).unwrap();
    let s: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(s.len(), 100);
    assert!(s.windows(2).all(|w| w[1] >= w[0]));
    assert!((1.8..=2.8).contains(&s[0]));
}

#[test]
fn every_command_runs_on_both_presets() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write(
        t.path(),
        "fast.cfg",
        "mc_repetitions = 5000\nhist_repetitions = 5000\nmap_points = 5\n",
    );
    let cfg = cfg.to_str().unwrap();
    for preset in ["deep", "shallow"] {
        for cmd in [
            "ple",
            "pump-sim",
            "hist-fit",
            "threshold",
            "protocol",
            "speedup",
            "mc",
        ] {
            let out = t.path().join(format!("{preset}-{cmd}"));
            assert_eq!(
                nvscc(&[cmd, "--preset", preset, "--config", cfg], &out),
                0,
                "{cmd} {preset}"
            );
            assert!(out.join("summary.txt").exists());
        }
    }
}

#[test]
fn out_dir_from_environment() {
    let t = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_nvscc"))
        .arg("protocol")
        .env("NVSCC_OUT_DIR", t.path())
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(t.path().join("fidelity_report.csv").exists());
    assert!(String::from_utf8_lossy(&status.stderr).contains("input digest"));
}

#[test]
fn binary_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let h = write(t.path(), "h.csv", "photon_count,occurrences\n0,x\n");
    let out = Command::new(env!("CARGO_BIN_EXE_nvscc"))
        .args([
            "hist-fit",
            "--csv",
            h.to_str().unwrap(),
            "--out",
            t.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data row 1"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unknown_keys_always_rejected(key in "[a-z_]{1,24}") {
        prop_assume!(!KEYS.iter().any(|k| k.0 == key));
        let mut c = ScenarioConfig::preset(Preset::Deep);
        let text = format!("{key} = 1\n");
        prop_assert!(c.apply_text(&text, "p").is_err());
    }

    #[test]
    fn known_keys_override(idx in 0..KEYS.len(), v in -1e6f64..1e6) {
        let key = KEYS[idx].0;
        let mut c = ScenarioConfig::preset(Preset::Shallow);
        c.apply_text(&format!("  {key}={v} # note\n"), "p").unwrap();
        prop_assert_eq!(c.raw(key), v.to_string());
    }
}
