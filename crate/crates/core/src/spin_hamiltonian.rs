//! Ground-state electron/nuclear spin Hamiltonian of the NV centre with a
//! ¹⁴N nucleus, its ODMR hyperfine lines, and inversion of measured lines
//! into a magnetic-field magnitude and polar angle.
//!
//! Basis: `|m_s⟩ ⊗ |m_I⟩`, electron spin outer, each ordered `+1, 0, -1`.
//! Index of `(m_s, m_I)` is `3 * i(m_s) + i(m_I)` with `i(+1)=0, i(0)=1, i(-1)=2`.
//! All energies are in Hz. The field lies in the x–z plane (azimuth 0).

use std::fmt;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, eigh_resolved, expectation, kron, matrix_element, real, CMatrix};
use crate::optim::{levenberg_marquardt, nelder_mead, LmOptions, NelderMeadOptions};

/// Physical constants of the ground-state spin Hamiltonian (frequency units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundSpinParams {
    pub d_hz: f64,
    pub gamma_e_hz_per_mt: f64,
    pub gamma_n_hz_per_mt: f64,
    pub q_hz: f64,
    pub a_par_hz: f64,
    pub a_perp_hz: f64,
}

impl Default for GroundSpinParams {
    fn default() -> Self {
        Self {
            d_hz: 2.87e9,
            gamma_e_hz_per_mt: 28.0e6,
            gamma_n_hz_per_mt: -3.08e3,
            q_hz: -4.945e6,
            a_par_hz: -2.16e6,
            a_perp_hz: -2.62e6,
        }
    }
}

impl GroundSpinParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.d_hz,
            self.gamma_e_hz_per_mt,
            self.gamma_n_hz_per_mt,
            self.q_hz,
            self.a_par_hz,
            self.a_perp_hz,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid("ground spin parameters must be finite"));
        }
        if self.d_hz <= 0.0 {
            return Err(invalid("zero-field splitting must be positive"));
        }
        Ok(())
    }
}

/// Static magnetic field: magnitude in mT and polar angle from the NV axis in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector {
    pub b_mt: f64,
    pub theta_deg: f64,
}

impl FieldVector {
    pub fn new(b_mt: f64, theta_deg: f64) -> Result<Self> {
        let f = Self { b_mt, theta_deg };
        f.validate()?;
        Ok(f)
    }

    pub fn zero() -> Self {
        Self {
            b_mt: 0.0,
            theta_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_mt.is_finite() && self.b_mt >= 0.0) {
            return Err(invalid(format!(
                "field magnitude must be >= 0, got {}",
                self.b_mt
            )));
        }
        if !(0.0..=180.0).contains(&self.theta_deg) {
            return Err(invalid(format!(
                "polar angle must lie in [0, 180], got {}",
                self.theta_deg
            )));
        }
        Ok(())
    }

    /// `(B_x, B_y, B_z)` in mT.
    pub fn components(&self) -> [f64; 3] {
        let t = self.theta_deg.to_radians();
        [self.b_mt * t.sin(), 0.0, self.b_mt * t.cos()]
    }
}

/// Electron-spin branch a transition ends in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinBranch {
    Plus,
    Minus,
    /// `⟨S_z⟩` too close to zero to assign.
    Mixed,
}

impl SpinBranch {
    pub fn label(&self) -> &'static str {
        match self {
            SpinBranch::Plus => "+1",
            SpinBranch::Minus => "-1",
            SpinBranch::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "+1" | "1" | "plus" => Some(SpinBranch::Plus),
            "-1" | "minus" => Some(SpinBranch::Minus),
            "mixed" | "?" | "" => Some(SpinBranch::Mixed),
            _ => None,
        }
    }
}

impl fmt::Display for SpinBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdmrLine {
    pub frequency_hz: f64,
    pub branch: SpinBranch,
    /// `|⟨f|S_x|i⟩|²`; informational only.
    pub weight: f64,
}

/// ODMR lines sorted by ascending frequency.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OdmrLineSet {
    lines: Vec<OdmrLine>,
}

impl OdmrLineSet {
    pub fn new(mut lines: Vec<OdmrLine>) -> Result<Self> {
        if lines
            .iter()
            .any(|l| !(l.frequency_hz.is_finite() && l.frequency_hz > 0.0))
        {
            return Err(invalid("ODMR line frequencies must be positive"));
        }
        lines.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
        Ok(Self { lines })
    }

    pub fn lines(&self) -> &[OdmrLine] {
        &self.lines
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.frequency_hz).collect()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

struct Operators {
    sx: CMatrix,
    sy: CMatrix,
    sz: CMatrix,
    ix: CMatrix,
    iy: CMatrix,
    iz: CMatrix,
}

fn operators() -> Operators {
    let [sx, sy, sz] = linalg::spin1();
    let id = linalg::identity(3);
    Operators {
        sx: kron(&sx, &id),
        sy: kron(&sy, &id),
        sz: kron(&sz, &id),
        ix: kron(&id, &sx),
        iy: kron(&id, &sy),
        iz: kron(&id, &sz),
    }
}

fn scaled(m: &CMatrix, s: f64) -> CMatrix {
    m.map(|x| x * s)
}

/// Ground-state Hamiltonian (9×9, Hz).
pub fn build_ground_hamiltonian(params: &GroundSpinParams, field: &FieldVector) -> CMatrix {
    build_ground_hamiltonian_cartesian(params, field.components())
}

/// Same as [`build_ground_hamiltonian`] for an arbitrary field `(B_x, B_y, B_z)` in mT.
pub fn build_ground_hamiltonian_cartesian(params: &GroundSpinParams, b: [f64; 3]) -> CMatrix {
    let o = operators();
    let [bx, by, bz] = b;
    let mut h = scaled(&(&o.sz * &o.sz), params.d_hz);
    h += scaled(
        &(scaled(&o.sx, bx) + scaled(&o.sy, by) + scaled(&o.sz, bz)),
        params.gamma_e_hz_per_mt,
    );
    h += scaled(&(&o.sz * &o.iz), params.a_par_hz);
    h += scaled(&(&o.sx * &o.ix + &o.sy * &o.iy), params.a_perp_hz);
    h += scaled(&(&o.iz * &o.iz), params.q_hz);
    h += scaled(
        &(scaled(&o.ix, bx) + scaled(&o.iy, by) + scaled(&o.iz, bz)),
        params.gamma_n_hz_per_mt,
    );
    h
}

const MIN_LINE_WEIGHT: f64 = 0.05;
const DEGENERACY_TOL_HZ: f64 = 1e-3;

/// Allowed `Δm_s = ±1` transitions out of the `m_s = 0` manifold.
///
/// Degenerate eigenspaces are split along `S_z + 0.1 I_z` so that zero-field
/// states keep pure `(m_s, m_I)` character.
pub fn odmr_transitions(params: &GroundSpinParams, field: &FieldVector) -> OdmrLineSet {
    let o = operators();
    let h = build_ground_hamiltonian(params, field);
    let resolver = &o.sz + scaled(&o.iz, 0.1);
    let sys = eigh_resolved(&h, &resolver, DEGENERACY_TOL_HZ);

    let p0 = {
        let mut p = CMatrix::zeros(9, 9);
        for mi in 0..3 {
            p[(3 + mi, 3 + mi)] = real(1.0);
        }
        p
    };
    let mut by_zero_weight: Vec<(usize, f64)> = (0..9)
        .map(|k| (k, expectation(&sys.vector(k), &p0)))
        .collect();
    by_zero_weight.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let initial: Vec<usize> = by_zero_weight[..3].iter().map(|p| p.0).collect();
    let mut finals: Vec<usize> = by_zero_weight[3..].iter().map(|p| p.0).collect();
    finals.sort_unstable();

    let mut lines = Vec::new();
    for &i in &initial {
        let vi = sys.vector(i);
        for &f in &finals {
            let vf = sys.vector(f);
            let w = matrix_element(&vf, &o.sx, &vi).norm_sqr();
            if w < MIN_LINE_WEIGHT {
                continue;
            }
            let sz = expectation(&vf, &o.sz);
            let branch = if sz > 0.5 {
                SpinBranch::Plus
            } else if sz < -0.5 {
                SpinBranch::Minus
            } else {
                SpinBranch::Mixed
            };
            lines.push(OdmrLine {
                frequency_hz: (sys.values[f] - sys.values[i]).abs(),
                branch,
                weight: w,
            });
        }
    }
    OdmrLineSet::new(lines).expect("eigenvalue differences are finite")
}

/// Result of [`infer_field`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldEstimate {
    pub field: FieldVector,
    pub sigma_b_mt: f64,
    pub sigma_theta_deg: f64,
    pub rms_residual_hz: f64,
    /// False when the field is too small for the angle to be meaningful.
    pub theta_defined: bool,
}

/// Settings for [`infer_field`]. Defaults: 0.05 mT × 1° grid up to 6 mT,
/// acceptance at 0.1 MHz RMS residual.
#[derive(Debug, Clone)]
pub struct FieldInferenceOptions {
    pub b_max_mt: f64,
    pub b_step_mt: f64,
    pub theta_step_deg: f64,
    pub rms_tolerance_hz: f64,
}

impl Default for FieldInferenceOptions {
    fn default() -> Self {
        Self {
            b_max_mt: 6.0,
            b_step_mt: 0.05,
            theta_step_deg: 1.0,
            rms_tolerance_hz: 0.1e6,
        }
    }
}

/// Map an unconstrained `(B, θ)` onto the fundamental domain `B ≥ 0`,
/// `θ ∈ [0°, 90°]`. The line set is invariant under `B → -B` and `θ → 180° - θ`.
fn fold(b: f64, theta: f64) -> FieldVector {
    let b = b.abs();
    let mut t = theta.rem_euclid(180.0);
    if t > 90.0 {
        t = 180.0 - t;
    }
    FieldVector {
        b_mt: b,
        theta_deg: t,
    }
}

fn nearest(x: f64, set: &[f64]) -> f64 {
    set.iter().map(|y| x - y).fold(
        f64::INFINITY,
        |best, d| if d.abs() < best.abs() { d } else { best },
    )
}

// residuals in MHz
fn measured_residuals(measured: &[f64], model: &[f64]) -> Vec<f64> {
    measured.iter().map(|&m| nearest(m, model) * 1e-6).collect()
}

fn symmetric_cost(measured: &[f64], model: &[f64]) -> f64 {
    if model.is_empty() {
        return f64::INFINITY;
    }
    let a: f64 = measured
        .iter()
        .map(|&m| (nearest(m, model) * 1e-6).powi(2))
        .sum::<f64>()
        / measured.len() as f64;
    let b: f64 = model
        .iter()
        .map(|&g| (nearest(g, measured) * 1e-6).powi(2))
        .sum::<f64>()
        / model.len() as f64;
    a + b
}

/// Fit `(B, θ)` to measured ODMR line frequencies.
///
/// Coarse grid search followed by simplex refinement and a Gauss–Newton
/// polish. Each measured line is matched to its nearest model line and vice
/// versa, so the measured set may omit lines. One-sigma uncertainties come
/// from the Jacobian of the measured-line residuals at the optimum.
pub fn infer_field(
    measured: &OdmrLineSet,
    params: &GroundSpinParams,
    opts: &FieldInferenceOptions,
) -> Result<FieldEstimate> {
    params.validate()?;
    if measured.len() < 2 {
        return Err(Error::UnderDetermined(format!(
            "need at least 2 ODMR lines, got {}",
            measured.len()
        )));
    }
    let meas = measured.frequencies();
    let model_lines = |b: f64, t: f64| odmr_transitions(params, &fold(b, t)).frequencies();

    let nb = (opts.b_max_mt / opts.b_step_mt).round() as usize;
    let nt = (90.0 / opts.theta_step_deg).round() as usize;
    let grid: Vec<(f64, f64)> = (0..=nb)
        .flat_map(|i| {
            (0..=nt).map(move |j| (i as f64 * opts.b_step_mt, j as f64 * opts.theta_step_deg))
        })
        .collect();
    let (b0, t0, _) = grid
        .par_iter()
        .map(|&(b, t)| (b, t, symmetric_cost(&meas, &model_lines(b, t))))
        .reduce(
            || (0.0, 0.0, f64::INFINITY),
            |x, y| {
                if y.2 < x.2 || (y.2 == x.2 && (y.0, y.1) < (x.0, x.1)) {
                    y
                } else {
                    x
                }
            },
        );

    let nm = nelder_mead(
        |x| symmetric_cost(&meas, &model_lines(x[0], x[1])),
        &[b0, t0],
        &NelderMeadOptions {
            max_evals: 4000,
            f_tol: 1e-24,
            x_tol: 1e-10,
            initial_step: vec![opts.b_step_mt, opts.theta_step_deg],
        },
    );
    let start = fold(nm.x[0], nm.x[1]);

    let lm = levenberg_marquardt(
        |x| measured_residuals(&meas, &model_lines(x[0], x[1])),
        &[start.b_mt, start.theta_deg],
        &LmOptions {
            rel_cost_tol: 1e-14,
            fd_step: 1e-7,
            ..LmOptions::default()
        },
    );
    let nm_cost: f64 = measured_residuals(&meas, &model_lines(start.b_mt, start.theta_deg))
        .iter()
        .map(|r| r * r)
        .sum();
    let (best, jac_result) = if lm.cost <= nm_cost {
        (fold(lm.params[0], lm.params[1]), lm)
    } else {
        (start, lm)
    };

    let rms_mhz = (measured_residuals(&meas, &model_lines(best.b_mt, best.theta_deg))
        .iter()
        .map(|r| r * r)
        .sum::<f64>()
        / meas.len() as f64)
        .sqrt();
    let rms_residual_hz = rms_mhz * 1e6;
    if rms_residual_hz > opts.rms_tolerance_hz {
        return Err(Error::NonConvergence(format!(
            "best RMS residual {:.3} MHz exceeds tolerance {:.3} MHz",
            rms_mhz,
            opts.rms_tolerance_hz * 1e-6
        )));
    }

    let unc = jac_result.uncertainties();
    let (sigma_b_mt, sigma_theta_deg) = (unc[0], unc[1]);
    let theta_defined = best.b_mt > 1e-3 && sigma_theta_deg.is_finite() && sigma_theta_deg < 45.0;
    Ok(FieldEstimate {
        field: best,
        sigma_b_mt,
        sigma_theta_deg,
        rms_residual_hz,
        theta_defined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, hermiticity_defect};

    #[test]
    fn zero_field_splitting_only() {
        let p = GroundSpinParams {
            gamma_e_hz_per_mt: 0.0,
            gamma_n_hz_per_mt: 0.0,
            q_hz: 0.0,
            a_par_hz: 0.0,
            a_perp_hz: 0.0,
            ..GroundSpinParams::default()
        };
        let h = build_ground_hamiltonian(&p, &FieldVector::new(1.0, 30.0).unwrap());
        let e = eigh(&h).values;
        for v in &e[..3] {
            assert!(v.abs() < 1e-3);
        }
        for v in &e[3..] {
            assert!((v - 2.87e9).abs() < 1e-3);
        }
    }

    #[test]
    fn hermitian_and_trace_invariant() {
        let p = GroundSpinParams::default();
        let tr0 = build_ground_hamiltonian(&p, &FieldVector::new(2.0, 0.0).unwrap()).trace();
        for theta in [0.0, 17.0, 45.0, 90.0, 133.0, 180.0] {
            let h = build_ground_hamiltonian(&p, &FieldVector::new(2.0, theta).unwrap());
            assert_eq!(hermiticity_defect(&h), 0.0);
            assert!((h.trace() - tr0).norm() < 1e-3);
        }
    }

    #[test]
    fn zero_field_lines_form_three_clusters() {
        let lines = odmr_transitions(&GroundSpinParams::default(), &FieldVector::zero());
        let mut clusters: Vec<Vec<f64>> = Vec::new();
        for f in lines.frequencies() {
            match clusters.last_mut() {
                Some(c) if f - c[c.len() - 1] < 50e3 => c.push(f),
                _ => clusters.push(vec![f]),
            }
        }
        assert_eq!(clusters.len(), 3);
        let centre: Vec<f64> = clusters
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        // spacing |A_par| up to second-order transverse hyperfine shifts (kHz)
        assert!(((centre[1] - centre[0]) - 2.16e6).abs() < 20e3);
        assert!(((centre[2] - centre[1]) - 2.16e6).abs() < 20e3);
        assert!((centre[1] - 2.87e9).abs() < 20e3);
    }

    #[test]
    fn axial_field_splits_branches_by_twice_zeeman() {
        let lines = odmr_transitions(
            &GroundSpinParams::default(),
            &FieldVector::new(1.0, 0.0).unwrap(),
        );
        let mean = |b: SpinBranch| {
            let v: Vec<f64> = lines
                .lines()
                .iter()
                .filter(|l| l.branch == b)
                .map(|l| l.frequency_hz)
                .collect();
            assert_eq!(v.len(), 3);
            v.iter().sum::<f64>() / 3.0
        };
        let split = mean(SpinBranch::Plus) - mean(SpinBranch::Minus);
        assert!((split - 56.0e6).abs() < 0.05e6, "{split}");
    }

    #[test]
    fn rejects_invalid_field() {
        assert!(FieldVector::new(-0.1, 0.0).is_err());
        assert!(FieldVector::new(0.1, 181.0).is_err());
    }

    #[test]
    fn inference_needs_two_lines() {
        let one = OdmrLineSet::new(vec![OdmrLine {
            frequency_hz: 2.87e9,
            branch: SpinBranch::Plus,
            weight: 0.5,
        }])
        .unwrap();
        let err = infer_field(
            &one,
            &GroundSpinParams::default(),
            &FieldInferenceOptions::default(),
        );
        assert!(matches!(err, Err(Error::UnderDetermined(_))));
    }

    #[test]
    fn inference_rejects_unphysical_lines() {
        let lines = OdmrLineSet::new(vec![
            OdmrLine {
                frequency_hz: 1.0e9,
                branch: SpinBranch::Mixed,
                weight: 0.5,
            },
            OdmrLine {
                frequency_hz: 1.3e9,
                branch: SpinBranch::Mixed,
                weight: 0.5,
            },
        ])
        .unwrap();
        let err = infer_field(
            &lines,
            &GroundSpinParams::default(),
            &FieldInferenceOptions::default(),
        );
        assert!(matches!(err, Err(Error::NonConvergence(_))));
    }
}
