use rayon::prelude::*;

use super::{transitions_at, ExcitedStateParams, StrainField, TransitionRow, TransitionTable};
use crate::error::{invalid, Result};
use crate::spin_hamiltonian::FieldVector;

#[derive(Debug, Clone, PartialEq)]
pub struct MapSlice {
    /// Swept coordinate: field in mT or strain in GHz.
    pub x: f64,
    pub table: TransitionTable,
    /// The two strongest spin-|0⟩ lines at this point.
    pub pronounced_zero: Vec<TransitionRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldStrainMap {
    pub slices: Vec<MapSlice>,
}

impl FieldStrainMap {
    /// Flattened `(x, detuning_ghz, strength)` triples.
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        self.slices
            .iter()
            .flat_map(|s| {
                s.table
                    .rows
                    .iter()
                    .map(move |r| (s.x, r.energy_ghz, r.strength))
            })
            .collect()
    }
}

fn check_monotone(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(invalid("sweep is empty"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(invalid("sweep values must be finite"));
    }
    let up = xs.windows(2).all(|w| w[1] > w[0]);
    let down = xs.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(invalid("sweep must be strictly monotone"));
    }
    Ok(())
}

fn slice(x: f64, table: TransitionTable) -> MapSlice {
    let pronounced_zero = table
        .strongest_with_character(0)
        .into_iter()
        .take(2)
        .collect();
    MapSlice {
        x,
        table,
        pronounced_zero,
    }
}

/// Transition tables along a field-magnitude sweep at fixed strain and angle.
pub fn field_strain_map(
    params: &ExcitedStateParams,
    strain: &StrainField,
    b_mt: &[f64],
    theta_deg: f64,
) -> Result<FieldStrainMap> {
    params.validate()?;
    check_monotone(b_mt)?;
    let fields = b_mt
        .iter()
        .map(|&b| FieldVector::new(b, theta_deg))
        .collect::<Result<Vec<_>>>()?;
    let slices = b_mt
        .par_iter()
        .zip(fields.par_iter())
        .map(|(&b, f)| slice(b, transitions_at(params, strain, f)))
        .collect();
    Ok(FieldStrainMap { slices })
}

/// Transition tables along a strain sweep at fixed field.
pub fn strain_sweep(
    params: &ExcitedStateParams,
    xi_ghz: &[f64],
    field: &FieldVector,
) -> Result<FieldStrainMap> {
    params.validate()?;
    check_monotone(xi_ghz)?;
    let strains = xi_ghz
        .iter()
        .map(|&x| StrainField::new(x))
        .collect::<Result<Vec<_>>>()?;
    let slices = xi_ghz
        .par_iter()
        .zip(strains.par_iter())
        .map(|(&x, s)| slice(x, transitions_at(params, s, field)))
        .collect();
    Ok(FieldStrainMap { slices })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_matches_direct_table() {
        let p = ExcitedStateParams::default();
        let s = StrainField::new(20.0).unwrap();
        let m = field_strain_map(&p, &s, &[3.0], 20.0).unwrap();
        let direct = transitions_at(&p, &s, &FieldVector::new(3.0, 20.0).unwrap());
        assert_eq!(m.slices.len(), 1);
        assert_eq!(m.slices[0].table, direct);
    }

    #[test]
    fn rejects_non_monotone() {
        let p = ExcitedStateParams::default();
        let s = StrainField::new(1.0).unwrap();
        assert!(field_strain_map(&p, &s, &[1.0, 0.5, 2.0], 0.0).is_err());
        assert!(field_strain_map(&p, &s, &[], 0.0).is_err());
    }

    #[test]
    fn zero_branches_separate_with_strain() {
        let p = ExcitedStateParams::default();
        let xi: Vec<f64> = (0..=20).map(|i| i as f64).collect();
        let m = strain_sweep(&p, &xi, &FieldVector::new(0.1, 0.0).unwrap()).unwrap();
        let sep: Vec<f64> = m
            .slices
            .iter()
            .map(|s| {
                let z = s.table.strongest_with_character(0);
                (z[0].energy_ghz - z[1].energy_ghz).abs()
            })
            .collect();
        for w in sep.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{sep:?}");
        }
        assert!(sep[20] > 35.0);
    }
}
