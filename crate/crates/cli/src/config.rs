//! Flat `key = value` scenario configuration with the two built-in presets.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// Every accepted key with its deep-NV and shallow-NV preset values.
pub const KEYS: &[(&str, &str, &str)] = &[
    // ground-state spin Hamiltonian
    ("d_ground_hz", "2.87e9", "2.87e9"),
    ("gamma_e_hz_per_mt", "28e6", "28e6"),
    ("gamma_n_hz_per_mt", "-3.08e3", "-3.08e3"),
    ("quadrupole_hz", "-4.945e6", "-4.945e6"),
    ("a_par_hz", "-2.16e6", "-2.16e6"),
    ("a_perp_hz", "-2.62e6", "-2.62e6"),
    ("field_mt", "0.7", "0.7"),
    ("field_theta_deg", "39", "39"),
    ("odmr_b_max_mt", "6", "6"),
    ("odmr_b_step_mt", "0.05", "0.05"),
    ("odmr_theta_step_deg", "1", "1"),
    ("odmr_rms_tol_hz", "1e5", "1e5"),
    // excited-state model
    ("strain_ghz", "1.7", "12.6"),
    ("excited_offset_ghz", "4.32", "4.32"),
    ("lambda_par_ghz", "5.33", "5.33"),
    ("lambda_perp_ghz", "0.2", "0.2"),
    ("d_par_ghz", "1.42", "1.42"),
    ("d_perp_ghz", "0.775", "0.775"),
    ("excited_d_ground_ghz", "2.87", "2.87"),
    ("excited_gamma_ghz_per_mt", "0.028", "0.028"),
    ("ple_min_ghz", "-4", "-15"),
    ("ple_max_ghz", "10", "25"),
    ("ple_points", "2801", "4001"),
    ("map_strain_ghz", "20", "20"),
    ("map_theta_deg", "20", "20"),
    ("map_b_min_mt", "0", "0"),
    ("map_b_max_mt", "50", "50"),
    ("map_points", "101", "101"),
    // rate model
    ("binwidth_s", "10e-9", "10e-9"),
    ("t_st0_s", "4.1e-6", "7.0e-6"),
    ("t_st1_s", "0.4e-3", "1.0e-3"),
    ("t_ts_s", "1.33e-6", "11.3e-6"),
    ("t_ion_s", "inf", "0.2e-3"),
    ("p_rec", "0", "0"),
    ("f0_cps", "31.7e3", "17.5e3"),
    ("f1_cps", "0.2e3", "3.6e3"),
    ("fluor_loss1", "0.205", "0.151"),
    ("fluor_loss6", "0.219", "0.300"),
    ("e_mw", "0.056", "0.051"),
    ("pump_duration_s", "20e-6", "20e-6"),
    ("init_a_n0", "0.704", "0.704"),
    ("init_a_nplus", "0.134", "0.097"),
    ("init_b_n0", "0.148", "0.189"),
    ("init_b_nplus", "0.451", "0.421"),
    ("init_c_n0", "0.0", "0.069"),
    ("init_c_nplus", "0.879", "0.700"),
    ("trace_noise_rel", "0.02", "0.02"),
    ("fit_p_ion", "false", "true"),
    ("fit_weighting", "relative", "relative"),
    ("fit_max_iter", "500", "500"),
    // photon statistics
    ("readout_duration_s", "1e-3", "10e-3"),
    ("nv0_lambda", "0.09424", "0.766"),
    ("nvm_model", "poisson", "mixture"),
    ("nvm_lambda", "9.5494", "9.5494"),
    ("nvm_mix_components", "", "0.011:-46:65, 0.015:7.6:5.0"),
    ("threshold", "auto", "auto"),
    ("hist_components", "2", "2"),
    ("hist_repetitions", "100000", "100000"),
    // protocol
    ("e_nv0", "0", "0"),
    ("nvm_fraction", "0.997", "0.929"),
    ("p_plus1", "0.879", "0.700"),
    ("p_minus1", "0.121", "0.231"),
    ("e0_meas", "0.176", "0.443"),
    ("e1_meas", "0.054", "0.214"),
    ("f_sat_cps", "50e3", "44e3"),
    ("single_shot_overhead_s", "850e-6", "850e-6"),
    ("conventional_rep_overhead_s", "1.5e-6", "1.5e-6"),
    ("conventional_window_s", "250e-9", "250e-9"),
    ("contrast", "0.3", "0.3"),
    ("include_postselection", "false", "false"),
    ("acceptance_rate", "0.37", "0.22"),
    ("speedup_t_max_s", "10e-3", "10e-3"),
    ("speedup_points", "100", "100"),
    ("mc_repetitions", "100000", "100000"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Preset {
    #[default]
    Deep,
    Shallow,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Deep => "deep",
            Preset::Shallow => "shallow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = Result<T, ConfigError>;

/// Resolved key–value configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    values: BTreeMap<&'static str, String>,
}

impl ScenarioConfig {
    pub fn preset(p: Preset) -> Self {
        let values = KEYS
            .iter()
            .map(|(k, deep, shallow)| {
                (
                    *k,
                    if p == Preset::Deep { *deep } else { *shallow }.to_string(),
                )
            })
            .collect();
        Self { values }
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> CResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("{origin}:{}: expected 'key = value'", n + 1))
            })?;
            let k = k.trim();
            let key = KEYS
                .iter()
                .find(|e| e.0 == k)
                .map(|e| e.0)
                .ok_or_else(|| ConfigError(format!("{origin}:{}: unknown key '{k}'", n + 1)))?;
            self.values.insert(key, v.trim().to_string());
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CResult<String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())?;
        Ok(text)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key '{key}' missing from the key table"))
    }

    pub fn f64(&self, key: &str) -> CResult<f64> {
        let s = self.raw(key);
        let v: f64 = s
            .parse()
            .map_err(|_| ConfigError(format!("{key}: expected a number, got '{s}'")))?;
        if v.is_nan() {
            return Err(ConfigError(format!("{key}: NaN is not allowed")));
        }
        Ok(v)
    }

    pub fn usize(&self, key: &str) -> CResult<usize> {
        let s = self.raw(key);
        s.parse()
            .map_err(|_| ConfigError(format!("{key}: expected a non-negative integer, got '{s}'")))
    }

    pub fn bool(&self, key: &str) -> CResult<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            s => Err(ConfigError(format!(
                "{key}: expected true or false, got '{s}'"
            ))),
        }
    }

    /// Canonical `key = value` listing, used for the input digest.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_rejected() {
        let mut c = ScenarioConfig::preset(Preset::Deep);
        let e = c.apply_text("f0_cps = 1\nbogus = 2\n", "t").unwrap_err();
        assert!(e.0.contains("unknown key 'bogus'"));
    }

    #[test]
    fn comments_and_overrides() {
        let mut c = ScenarioConfig::preset(Preset::Shallow);
        c.apply_text("# header\n f0_cps = 12e3  # trailing\n\n", "t")
            .unwrap();
        assert_eq!(c.f64("f0_cps").unwrap(), 12e3);
        assert_eq!(c.f64("strain_ghz").unwrap(), 12.6);
        assert_eq!(c.f64("t_ion_s").unwrap(), 2e-4);
        assert!(ScenarioConfig::preset(Preset::Deep)
            .f64("t_ion_s")
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn malformed_line() {
        let mut c = ScenarioConfig::preset(Preset::Deep);
        assert!(c.apply_text("f0_cps 12\n", "t").is_err());
    }

    #[test]
    fn keys_unique() {
        let mut k: Vec<&str> = KEYS.iter().map(|e| e.0).collect();
        k.sort_unstable();
        let n = k.len();
        k.dedup();
        assert_eq!(n, k.len());
    }
}
