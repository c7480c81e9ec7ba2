use std::f64::consts::PI;

use super::TransitionTable;
use crate::error::{invalid, Result};

/// Strengths below this are treated as forbidden lines.
const ZERO_STRENGTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PleSpectrum {
    pub detuning_ghz: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Lines left out because their strength (and hence width) vanishes.
    pub skipped_lines: usize,
}

/// Width parameter of a line of strength `m`.
pub fn line_width(m: f64) -> f64 {
    m / 10.0
}

/// One normalized Lorentzian term with amplitude `m` and width `m / 10`.
pub fn lorentzian_term(e: f64, centre: f64, m: f64) -> f64 {
    let g = line_width(m);
    m / (PI.sqrt() * g) * g * g / (g * g + (e - centre).powi(2))
}

/// Sum of Lorentzians, one per transition, sampled on `grid`.
///
/// Amplitude and width both scale with the transition strength, so every line
/// peaks at `10/√π`.
pub fn synth_ple_spectrum(table: &TransitionTable, grid: &[f64]) -> Result<PleSpectrum> {
    if table.rows.is_empty() {
        return Err(invalid("transition table is empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(invalid("energy grid must be finite"));
    }
    let lines: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.strength > ZERO_STRENGTH)
        .map(|r| (r.energy_ghz, r.strength))
        .collect();
    let skipped_lines = table.rows.len() - lines.len();
    if skipped_lines > 0 {
        log::warn!("{skipped_lines} zero-strength lines skipped in PLE synthesis");
    }
    let intensity = grid
        .iter()
        .map(|&e| lines.iter().map(|&(c, m)| lorentzian_term(e, c, m)).sum())
        .collect();
    Ok(PleSpectrum {
        detuning_ghz: grid.to_vec(),
        intensity,
        skipped_lines,
    })
}

impl PleSpectrum {
    /// Indices of strict local maxima.
    pub fn peak_indices(&self) -> Vec<usize> {
        let y = &self.intensity;
        (1..y.len().saturating_sub(1))
            .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
            .collect()
    }
}
