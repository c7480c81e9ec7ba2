//! Low-temperature optical fine structure of NV⁻: a 14-level Hamiltonian
//! (ground triplet, excited triplet, singlet placeholders), optical transition
//! strengths, synthetic PLE spectra and field/strain sweeps.
//!
//! Energies are in GHz. Optical energies are detunings from the zero-phonon
//! reference, set by the diagonal offsets in [`ExcitedStateParams::v_opt`].

pub mod map;
pub mod spectrum;
pub mod templates;

pub use map::{field_strain_map, strain_sweep, FieldStrainMap, MapSlice};
pub use spectrum::{synth_ple_spectrum, PleSpectrum};
pub use templates::Templates;

use crate::error::{invalid, Result};
use crate::linalg::{eigh_resolved, matrix_element, CMatrix, CVector, Eigensystem};
use crate::spin_hamiltonian::FieldVector;

use templates::{ms_of, DIM, EXCITED, GROUND};

/// Default offset of the ³E block that places the deep-NV E_x line at +7 GHz.
pub const DEFAULT_EXCITED_OFFSET_GHZ: f64 = 4.32;

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitedStateParams {
    /// Diagonal offsets per level (GHz).
    pub v_opt: [f64; DIM],
    pub lambda_par_ghz: f64,
    pub lambda_perp_ghz: f64,
    pub d_par_ghz: f64,
    pub d_perp_ghz: f64,
    /// Ground-state zero-field splitting.
    pub d_ground_ghz: f64,
    pub gamma_e_ghz_per_mt: f64,
    pub templates: Templates,
}

impl Default for ExcitedStateParams {
    fn default() -> Self {
        let mut v_opt = [0.0; DIM];
        for k in EXCITED {
            v_opt[k] = DEFAULT_EXCITED_OFFSET_GHZ;
        }
        // Singlets: uncoupled, parked far outside the optical window.
        v_opt[9] = -1.0e5;
        v_opt[10] = -1.9e5;
        v_opt[11] = -1.9e5;
        v_opt[12] = -1.5e5;
        v_opt[13] = -1.5e5;
        Self {
            v_opt,
            lambda_par_ghz: 5.33,
            lambda_perp_ghz: 0.2,
            d_par_ghz: 1.42,
            d_perp_ghz: 0.775,
            d_ground_ghz: 2.87,
            gamma_e_ghz_per_mt: 0.028,
            templates: Templates::standard(),
        }
    }
}

impl ExcitedStateParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            self.lambda_par_ghz,
            self.lambda_perp_ghz,
            self.d_par_ghz,
            self.d_perp_ghz,
            self.d_ground_ghz,
            self.gamma_e_ghz_per_mt,
        ];
        if scalars
            .iter()
            .chain(self.v_opt.iter())
            .any(|x| !x.is_finite())
        {
            return Err(invalid("excited-state parameters must be finite"));
        }
        Ok(())
    }

    /// Shift of the whole ³E block (the detuning reference).
    pub fn excited_offset_ghz(&self) -> f64 {
        self.v_opt[EXCITED.start]
    }

    pub fn with_excited_offset(mut self, offset_ghz: f64) -> Self {
        for k in EXCITED {
            self.v_opt[k] = offset_ghz;
        }
        self
    }
}

/// Non-axial strain splitting E_x from E_y by `2 ξ⊥`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainField {
    pub xi_perp_ghz: f64,
}

impl StrainField {
    pub fn new(xi_perp_ghz: f64) -> Result<Self> {
        if !(xi_perp_ghz.is_finite() && xi_perp_ghz >= 0.0) {
            return Err(invalid(format!("strain must be >= 0, got {xi_perp_ghz}")));
        }
        Ok(Self { xi_perp_ghz })
    }
}

fn add_scaled(h: &mut CMatrix, m: &CMatrix, s: f64) {
    if s != 0.0 {
        h.zip_apply(m, |a, b| *a += b * s);
    }
}

pub fn build_excited_hamiltonian(
    params: &ExcitedStateParams,
    strain: &StrainField,
    field: &FieldVector,
) -> CMatrix {
    let t = &params.templates;
    let [bx, by, bz] = field.components();
    let g = params.gamma_e_ghz_per_mt;
    let mut h = CMatrix::zeros(DIM, DIM);
    for (k, v) in params.v_opt.iter().enumerate() {
        h[(k, k)].re = *v;
    }
    add_scaled(&mut h, &t.ss_ground, params.d_ground_ghz);
    add_scaled(&mut h, &t.ss_par, params.d_par_ghz);
    add_scaled(&mut h, &t.ss_perp, params.d_perp_ghz);
    add_scaled(&mut h, &t.so_par, params.lambda_par_ghz);
    add_scaled(&mut h, &t.so_perp, params.lambda_perp_ghz);
    add_scaled(&mut h, &t.sx, g * bx);
    add_scaled(&mut h, &t.sy, g * by);
    add_scaled(&mut h, &t.sz, g * bz);
    add_scaled(&mut h, &t.o_ex_b, strain.xi_perp_ghz);
    h
}

/// Diagonalize with degenerate subspaces split along `S_z` and then the
/// E_x/E_y orbital axis, so the basis is reproducible.
pub fn diagonalize(params: &ExcitedStateParams, h: &CMatrix) -> Eigensystem {
    let t = &params.templates;
    let resolver = &t.sz + t.o_ex_b.map(|x| x * 0.1);
    eigh_resolved(h, &resolver, 1e-9)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionRow {
    /// Eigenstate indices (ascending energy order of the eigensystem).
    pub ground: usize,
    pub excited: usize,
    pub energy_ghz: f64,
    pub strength: f64,
    pub ground_ms: i8,
    pub excited_ms: i8,
}

impl TransitionRow {
    /// Spin character of the line, that of its ground state.
    pub fn spin_character(&self) -> i8 {
        self.ground_ms
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionTable {
    pub rows: Vec<TransitionRow>,
}

impl TransitionTable {
    /// Rows of a given spin character sorted by decreasing strength.
    pub fn strongest_with_character(&self, ms: i8) -> Vec<TransitionRow> {
        let mut v: Vec<TransitionRow> = self
            .rows
            .iter()
            .copied()
            .filter(|r| r.spin_character() == ms)
            .collect();
        v.sort_by(|a, b| {
            b.strength
                .total_cmp(&a.strength)
                .then(a.energy_ghz.total_cmp(&b.energy_ghz))
        });
        v
    }
}

fn block_weight(v: &CVector, range: std::ops::Range<usize>) -> f64 {
    range.map(|k| v[k].norm_sqr()).sum()
}

fn dominant_ms(v: &CVector, range: std::ops::Range<usize>) -> i8 {
    let mut w = [0.0f64; 3];
    for k in range {
        w[k % 3] += v[k].norm_sqr();
    }
    let best = (0..3).fold(0, |b, i| if w[i] > w[b] { i } else { b });
    ms_of(best)
}

/// Optical transitions from every ³A₂ eigenstate to every ³E eigenstate with
/// `M = |⟨f|O_x + O_y|i⟩|²` using the optical parts of the orbital operators.
pub fn transition_table(sys: &Eigensystem, templates: &Templates) -> TransitionTable {
    let dipole = &templates.o_ex_a + &templates.o_ey_a;
    let vecs: Vec<CVector> = (0..sys.dim()).map(|k| sys.vector(k)).collect();
    let ground: Vec<usize> = (0..sys.dim())
        .filter(|&k| block_weight(&vecs[k], GROUND) > 0.5)
        .collect();
    let excited: Vec<usize> = (0..sys.dim())
        .filter(|&k| block_weight(&vecs[k], EXCITED) > 0.5)
        .collect();
    let mut rows = Vec::with_capacity(ground.len() * excited.len());
    for &i in &ground {
        let gms = dominant_ms(&vecs[i], GROUND);
        for &f in &excited {
            rows.push(TransitionRow {
                ground: i,
                excited: f,
                energy_ghz: sys.values[f] - sys.values[i],
                strength: matrix_element(&vecs[f], &dipole, &vecs[i]).norm_sqr(),
                ground_ms: gms,
                excited_ms: dominant_ms(&vecs[f], EXCITED),
            });
        }
    }
    TransitionTable { rows }
}

/// Build, diagonalize and tabulate in one call.
pub fn transitions_at(
    params: &ExcitedStateParams,
    strain: &StrainField,
    field: &FieldVector,
) -> TransitionTable {
    let h = build_excited_hamiltonian(params, strain, field);
    transition_table(&diagonalize(params, &h), &params.templates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, hermiticity_defect};

    fn zero_strain() -> StrainField {
        StrainField::new(0.0).unwrap()
    }

    #[test]
    fn hermitian() {
        let p = ExcitedStateParams::default();
        let h = build_excited_hamiltonian(
            &p,
            &StrainField::new(3.0).unwrap(),
            &FieldVector::new(5.0, 33.0).unwrap(),
        );
        assert!(hermiticity_defect(&h) < 1e-15);
    }

    #[test]
    fn zero_strain_fine_structure() {
        // without transverse spin-orbit the ³E levels have closed forms
        let mut p = ExcitedStateParams::default().with_excited_offset(0.0);
        p.lambda_perp_ghz = 0.0;
        let h = build_excited_hamiltonian(&p, &zero_strain(), &FieldVector::zero());
        let sys = eigh(&h);
        let e: Vec<f64> = (0..DIM)
            .filter(|&k| block_weight(&sys.vector(k), EXCITED) > 0.5)
            .map(|k| sys.values[k])
            .collect();
        let (l, dpar, dperp) = (5.33, 1.42, 0.775);
        let want = [
            dpar / 3.0 - l,
            dpar / 3.0 - l,
            -2.0 * dpar / 3.0,
            -2.0 * dpar / 3.0,
            dpar / 3.0 + l - 2.0 * dperp,
            dpar / 3.0 + l + 2.0 * dperp,
        ];
        for (got, want) in e.iter().zip(want) {
            assert!((got - want).abs() < 1e-9, "{e:?}");
        }
    }

    #[test]
    fn strain_splits_ex_ey_by_twice_xi() {
        let p = ExcitedStateParams::default();
        let t = transitions_at(&p, &StrainField::new(10.0).unwrap(), &FieldVector::zero());
        let zero = t.strongest_with_character(0);
        let (a, b) = (zero[0].energy_ghz, zero[1].energy_ghz);
        assert!(((a - b).abs() - 20.0).abs() < 0.5, "{a} {b}");
    }

    #[test]
    fn row_count_and_zeros_kept() {
        let p = ExcitedStateParams::default();
        let t = transitions_at(&p, &zero_strain(), &FieldVector::zero());
        assert_eq!(t.rows.len(), 18);
        // sum rule: each ground state couples with total weight 2 into ³E
        for g in 0..3 {
            let gi = t.rows[g * 6].ground;
            let total: f64 = t
                .rows
                .iter()
                .filter(|r| r.ground == gi)
                .map(|r| r.strength)
                .sum();
            assert!((total - 2.0).abs() < 1e-9, "{total}");
        }
        for r in &t.rows {
            assert!(r.strength >= 0.0 && r.energy_ghz.is_finite());
            if r.strength > 0.1 {
                assert_eq!(r.ground_ms.abs(), r.excited_ms.abs());
            }
        }
    }

    #[test]
    fn zeroed_operators_give_zero_strength() {
        let mut p = ExcitedStateParams::default();
        p.templates = p.templates.without_optical_operators();
        let t = transitions_at(
            &p,
            &StrainField::new(2.0).unwrap(),
            &FieldVector::new(1.0, 20.0).unwrap(),
        );
        assert!(t.rows.iter().all(|r| r.strength == 0.0));
    }

    #[test]
    fn deep_configuration_has_two_strong_zero_lines() {
        let p = ExcitedStateParams::default();
        let t = transitions_at(
            &p,
            &StrainField::new(1.7).unwrap(),
            &FieldVector::new(0.7, 39.0).unwrap(),
        );
        let zero = t.strongest_with_character(0);
        assert!(zero[0].strength > 0.9 && zero[1].strength > 0.9);
        assert!(zero[2].strength < 0.1);
        let ex = zero[0].energy_ghz.max(zero[1].energy_ghz);
        assert!((ex - 7.0).abs() < 1e-3, "{ex}");
    }

    #[test]
    fn negative_strain_rejected() {
        assert!(StrainField::new(-0.1).is_err());
    }
}
