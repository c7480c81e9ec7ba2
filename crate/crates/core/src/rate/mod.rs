//! Five-state classical rate model of optical pumping, MW π-pulses and
//! ionization, propagated in fixed time bins.
//!
//! State order: `|0⟩, |+1⟩, |−1⟩, singlet, NV⁰`.

pub mod fit;

pub use fit::{
    add_relative_noise, global_fit, synthesize_bundle, FamilyPopulations, GlobalFitOptions,
    GlobalFitResult, GlobalParams, LabeledTrace, MwVariant, TraceFamily, Weighting,
};

use nalgebra::{Matrix5, Vector5};

use crate::error::{invalid, Result};

pub const N_STATES: usize = 5;
pub const ZERO: usize = 0;
pub const PLUS: usize = 1;
pub const MINUS: usize = 2;
pub const SINGLET: usize = 3;
pub const NV0: usize = 4;

pub const DEFAULT_BINWIDTH_S: f64 = 10e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationState {
    pub n: [f64; N_STATES],
}

impl PopulationState {
    pub fn new(n: [f64; N_STATES]) -> Result<Self> {
        if n.iter()
            .any(|x| !(x.is_finite() && (-1e-12..=1.0 + 1e-12).contains(x)))
        {
            return Err(invalid(format!(
                "populations must lie in [0, 1], got {n:?}"
            )));
        }
        let s: f64 = n.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("populations must sum to 1, got {s}")));
        }
        Ok(Self { n })
    }

    /// Spin mixture with empty singlet and NV⁰.
    pub fn spin(n0: f64, n_plus: f64, n_minus: f64) -> Result<Self> {
        Self::new([n0, n_plus, n_minus, 0.0, 0.0])
    }

    pub fn pure_zero() -> Self {
        Self {
            n: [1.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn total(&self) -> f64 {
        self.n.iter().sum()
    }

    fn as_vector(&self) -> Vector5<f64> {
        Vector5::from_column_slice(&self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalPumpParams {
    pub p_st0: f64,
    pub p_st1: f64,
    pub p_ts: f64,
    pub p_ion: f64,
    /// NV⁰ → |0⟩ recombination per bin; not part of the reference model, default 0.
    pub p_rec: f64,
    pub binwidth_s: f64,
}

impl Default for OpticalPumpParams {
    fn default() -> Self {
        Self {
            p_st0: 0.0,
            p_st1: 0.0,
            p_ts: 0.0,
            p_ion: 0.0,
            p_rec: 0.0,
            binwidth_s: DEFAULT_BINWIDTH_S,
        }
    }
}

impl OpticalPumpParams {
    /// Build from 1/e lifetimes (seconds, `f64::INFINITY` for "never").
    pub fn from_lifetimes(
        t_st0: f64,
        t_st1: f64,
        t_ts: f64,
        t_ion: f64,
        binwidth_s: f64,
    ) -> Result<Self> {
        Ok(Self {
            p_st0: probability_from_lifetime(t_st0, binwidth_s)?,
            p_st1: probability_from_lifetime(t_st1, binwidth_s)?,
            p_ts: probability_from_lifetime(t_ts, binwidth_s)?,
            p_ion: probability_from_lifetime(t_ion, binwidth_s)?,
            p_rec: 0.0,
            binwidth_s,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.binwidth_s.is_finite() && self.binwidth_s > 0.0) {
            return Err(invalid("binwidth must be positive"));
        }
        for (name, p) in [
            ("p_st0", self.p_st0),
            ("p_st1", self.p_st1),
            ("p_ts", self.p_ts),
            ("p_ion", self.p_ion),
            ("p_rec", self.p_rec),
        ] {
            if !(p.is_finite() && (0.0..1.0).contains(&p)) {
                return Err(invalid(format!("{name} must lie in [0, 1), got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluorescenceParams {
    pub f0_cps: f64,
    pub f1_cps: f64,
    pub loss1: f64,
    pub loss6: f64,
}

impl FluorescenceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0_cps >= 0.0
            && self.f1_cps >= 0.0
            && self.f0_cps.is_finite()
            && self.f1_cps.is_finite())
        {
            return Err(invalid("fluorescence rates must be finite and >= 0"));
        }
        if !((0.0..=1.0).contains(&self.loss1) && (0.0..=1.0).contains(&self.loss6)) {
            return Err(invalid("fluorescence losses must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Multiplicative factor for a trace group.
    pub fn scale(&self, group: LossGroup) -> f64 {
        match group {
            LossGroup::None => 1.0,
            LossGroup::Loss1 => 1.0 - self.loss1,
            LossGroup::Loss6 => 1.0 - self.loss6,
        }
    }
}

/// Which fluorescence-loss factor applies to a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossGroup {
    #[default]
    None,
    Loss1,
    Loss6,
}

/// Column-stochastic 5×5 transfer matrix: `n(t+1) = T n(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix(pub Matrix5<f64>);

impl TransferMatrix {
    pub fn identity() -> Self {
        Self(Matrix5::identity())
    }

    pub fn column_sums(&self) -> [f64; N_STATES] {
        std::array::from_fn(|j| self.0.column(j).sum())
    }

    pub fn apply(&self, n: &PopulationState) -> PopulationState {
        let mut v = self.0 * n.as_vector();
        let mut out = [0.0; N_STATES];
        for (k, x) in v.iter_mut().enumerate() {
            if *x < 0.0 {
                if *x < -1e-12 {
                    log::warn!("population {k} went negative ({x:e}); clamped");
                }
                *x = 0.0;
            }
            out[k] = *x;
        }
        let s: f64 = out.iter().sum();
        for x in &mut out {
            *x /= s;
        }
        PopulationState { n: out }
    }
}

fn complete_diagonal(mut m: Matrix5<f64>) -> Result<TransferMatrix> {
    for j in 0..N_STATES {
        let off: f64 = (0..N_STATES).filter(|&i| i != j).map(|i| m[(i, j)]).sum();
        if off > 1.0 {
            return Err(invalid(format!("column {j} leaks {off} > 1 per bin")));
        }
        m[(j, j)] = 1.0 - off;
    }
    Ok(TransferMatrix(m))
}

/// Transfer matrix for one bin of resonant pumping on a spin-|0⟩ transition.
pub fn build_transfer_optical(p: &OpticalPumpParams) -> Result<TransferMatrix> {
    p.validate()?;
    let mut m = Matrix5::zeros();
    m[(ZERO, SINGLET)] = p.p_ts / 2.0;
    m[(PLUS, SINGLET)] = p.p_ts / 4.0;
    m[(MINUS, SINGLET)] = p.p_ts / 4.0;
    m[(SINGLET, ZERO)] = p.p_st0;
    m[(SINGLET, PLUS)] = p.p_st1;
    m[(SINGLET, MINUS)] = p.p_st1;
    for j in [ZERO, PLUS, MINUS] {
        m[(NV0, j)] = p.p_ion;
    }
    m[(ZERO, NV0)] = p.p_rec;
    complete_diagonal(m)
}

/// Transfer matrix for one bin without light: the singlet still decays.
pub fn build_transfer_dark(p: &OpticalPumpParams) -> Result<TransferMatrix> {
    build_transfer_optical(&OpticalPumpParams {
        p_st0: 0.0,
        p_st1: 0.0,
        p_ion: 0.0,
        p_rec: 0.0,
        ..*p
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwTarget {
    Plus,
    Minus,
}

impl MwTarget {
    fn index(self) -> usize {
        match self {
            MwTarget::Plus => PLUS,
            MwTarget::Minus => MINUS,
        }
    }
}

/// Mix `|0⟩` with `|target⟩`, moving a fraction `q` of each into the other.
/// `q = 1` is an ideal swap, `q = 0` the identity; a Rabi pulse of area `θ`
/// has `q = sin²(θ/2)`.
pub fn apply_mw_flip(n: &PopulationState, target: MwTarget, q: f64) -> PopulationState {
    let t = target.index();
    let mut out = *n;
    out.n[ZERO] = (1.0 - q) * n.n[ZERO] + q * n.n[t];
    out.n[t] = q * n.n[ZERO] + (1.0 - q) * n.n[t];
    out
}

/// π-pulse failing with probability `e_mw`.
pub fn apply_mw_pi(n: &PopulationState, target: MwTarget, e_mw: f64) -> PopulationState {
    apply_mw_flip(n, target, 1.0 - e_mw)
}

/// Flip probability of a resonant pulse of rotation angle `theta` (radians).
pub fn rabi_flip_probability(theta: f64) -> f64 {
    (theta / 2.0).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Resonant pumping; emits one fluorescence sample per bin.
    OpticalPump {
        duration_s: f64,
    },
    MwPi {
        target: MwTarget,
        e_mw: f64,
    },
    /// Off-resonant (green) reset to a fixed mixture.
    GreenInit(PopulationState),
    /// Dark interval; only the singlet relaxes.
    Wait {
        duration_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseTimeline {
    segments: Vec<Segment>,
}

impl PulseTimeline {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("timeline needs at least one segment"));
        }
        for s in &segments {
            match s {
                Segment::OpticalPump { duration_s } | Segment::Wait { duration_s } => {
                    if !(duration_s.is_finite() && *duration_s > 0.0) {
                        return Err(invalid(format!(
                            "segment duration must be > 0, got {duration_s}"
                        )));
                    }
                }
                Segment::MwPi { e_mw, .. } => {
                    if !(0.0..=1.0).contains(e_mw) {
                        return Err(invalid(format!("E_MW must lie in [0, 1], got {e_mw}")));
                    }
                }
                Segment::GreenInit(_) => {}
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Spin initialization by repeated `|0⟩` depletion and a π-pulse on `|−1⟩`.
    pub fn spin_init(repeats: usize, pump_s: f64, e_mw: f64) -> Result<Self> {
        let mut segs = Vec::with_capacity(2 * repeats);
        for _ in 0..repeats {
            segs.push(Segment::OpticalPump { duration_s: pump_s });
            segs.push(Segment::MwPi {
                target: MwTarget::Minus,
                e_mw,
            });
        }
        Self::new(segs)
    }
}

/// Per-bin fluorescence of the optical segments.
#[derive(Debug, Clone, PartialEq)]
pub struct FluorescenceTrace {
    pub binwidth_s: f64,
    pub rate_cps: Vec<f64>,
}

impl FluorescenceTrace {
    pub fn times_s(&self) -> Vec<f64> {
        (0..self.rate_cps.len())
            .map(|i| i as f64 * self.binwidth_s)
            .collect()
    }

    pub fn expected_photons(&self) -> f64 {
        self.rate_cps.iter().sum::<f64>() * self.binwidth_s
    }
}

/// Output of [`simulate_timeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub trace: FluorescenceTrace,
    pub final_state: PopulationState,
}

fn bins(duration_s: f64, binwidth_s: f64) -> Result<usize> {
    let n = duration_s / binwidth_s;
    let r = n.round();
    if r < 1.0 || (n - r).abs() > 1e-6 * r.max(1.0) {
        return Err(invalid(format!(
            "segment of {duration_s} s is not a whole number of {binwidth_s} s bins"
        )));
    }
    Ok(r as usize)
}

/// Propagate populations through a timeline, emitting `n₀f₀ + (n₊ + n₋)f₁`
/// (times the loss factor of `group`) at the start of every optical bin.
pub fn simulate_timeline(
    timeline: &PulseTimeline,
    pump: &OpticalPumpParams,
    fl: &FluorescenceParams,
    group: LossGroup,
    init: &PopulationState,
) -> Result<SimulationOutput> {
    fl.validate()?;
    let t_opt = build_transfer_optical(pump)?;
    let t_dark = build_transfer_dark(pump)?;
    let scale = fl.scale(group);
    let (f0, f1) = (fl.f0_cps * scale, fl.f1_cps * scale);
    let mut n = *init;
    let mut rate = Vec::new();
    for seg in timeline.segments() {
        match *seg {
            Segment::OpticalPump { duration_s } => {
                let k = bins(duration_s, pump.binwidth_s)?;
                rate.reserve(k);
                for _ in 0..k {
                    rate.push(n.n[ZERO] * f0 + (n.n[PLUS] + n.n[MINUS]) * f1);
                    n = t_opt.apply(&n);
                }
            }
            Segment::Wait { duration_s } => {
                for _ in 0..bins(duration_s, pump.binwidth_s)? {
                    n = t_dark.apply(&n);
                }
            }
            Segment::MwPi { target, e_mw } => n = apply_mw_pi(&n, target, e_mw),
            Segment::GreenInit(s) => n = s,
        }
    }
    Ok(SimulationOutput {
        trace: FluorescenceTrace {
            binwidth_s: pump.binwidth_s,
            rate_cps: rate,
        },
        final_state: n,
    })
}

/// 1/e lifetime of a per-bin probability: `T = −binwidth / ln(1 − p)`.
/// Returns `f64::INFINITY` for `p = 0`.
pub fn lifetime_from_probability(p: f64, binwidth_s: f64) -> Result<f64> {
    if !(p.is_finite() && (0.0..1.0).contains(&p)) {
        return Err(invalid(format!("probability must lie in [0, 1), got {p}")));
    }
    if !(binwidth_s > 0.0) {
        return Err(invalid("binwidth must be positive"));
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-binwidth_s / (-p).ln_1p())
}

/// Per-bin probability of a 1/e lifetime: `p = 1 − exp(−binwidth / T)`.
pub fn probability_from_lifetime(t_s: f64, binwidth_s: f64) -> Result<f64> {
    if !(t_s > 0.0) {
        return Err(invalid(format!("lifetime must be > 0, got {t_s}")));
    }
    if !(binwidth_s > 0.0) {
        return Err(invalid("binwidth must be positive"));
    }
    Ok(-(-binwidth_s / t_s).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rates_give_identity() {
        let t = build_transfer_optical(&OpticalPumpParams::default()).unwrap();
        assert_eq!(t, TransferMatrix::identity());
    }

    #[test]
    fn ionization_only() {
        let p = OpticalPumpParams {
            p_ion: 0.01,
            ..Default::default()
        };
        let t = build_transfer_optical(&p).unwrap();
        assert_eq!(t.column_sums(), [1.0; 5]);
        let n = t.apply(&PopulationState::spin(0.5, 0.3, 0.2).unwrap());
        assert!((n.n[NV0] - 0.01).abs() < 1e-15);
        assert!((n.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singlet_branching() {
        let p = OpticalPumpParams {
            p_ts: 0.2,
            ..Default::default()
        };
        let t = build_transfer_optical(&p).unwrap();
        let n = t.apply(&PopulationState::new([0.0, 0.0, 0.0, 1.0, 0.0]).unwrap());
        assert!((n.n[ZERO] - 0.1).abs() < 1e-15);
        assert!((n.n[PLUS] - 0.05).abs() < 1e-15);
        assert!((n.n[MINUS] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn leaking_column_rejected() {
        let p = OpticalPumpParams {
            p_st0: 0.6,
            p_ion: 0.6,
            ..Default::default()
        };
        assert!(build_transfer_optical(&p).is_err());
    }

    #[test]
    fn mw_pi_cases() {
        let n = PopulationState::pure_zero();
        assert_eq!(
            apply_mw_pi(&n, MwTarget::Plus, 0.0).n,
            [0.0, 1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(apply_mw_pi(&n, MwTarget::Plus, 1.0).n, n.n);
        let m = PopulationState::spin(0.704, 0.134, 0.162).unwrap();
        let out = apply_mw_pi(&m, MwTarget::Plus, 0.056);
        // 0.056·0.704 + 0.944·0.134 and 0.944·0.704 + 0.056·0.134
        assert!((out.n[ZERO] - 0.165920).abs() < 1e-12);
        assert!((out.n[PLUS] - 0.672080).abs() < 1e-12);
        assert_eq!(out.n[MINUS], 0.162);
    }

    #[test]
    fn rabi_flip_endpoints() {
        assert_eq!(rabi_flip_probability(0.0), 0.0);
        assert!((rabi_flip_probability(std::f64::consts::PI) - 1.0).abs() < 1e-15);
        assert!((rabi_flip_probability(std::f64::consts::FRAC_PI_2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lifetime_oracles() {
        let bw = 10e-9;
        assert_eq!(lifetime_from_probability(0.0, bw).unwrap(), f64::INFINITY);
        assert_eq!(probability_from_lifetime(f64::INFINITY, bw).unwrap(), 0.0);
        let p = probability_from_lifetime(4.1e-6, bw).unwrap();
        assert!((p - 2.436052e-3).abs() < 1e-9, "{p}");
        let p = probability_from_lifetime(1.33e-6, bw).unwrap();
        assert!((p - 7.490602e-3).abs() < 1e-9, "{p}");
        assert!(lifetime_from_probability(1.0, bw).is_err());
        assert!(probability_from_lifetime(0.0, bw).is_err());
    }

    #[test]
    fn constant_trace_without_rates() {
        let tl = PulseTimeline::new(vec![Segment::OpticalPump { duration_s: 1e-6 }]).unwrap();
        let fl = FluorescenceParams {
            f0_cps: 30e3,
            f1_cps: 1e3,
            loss1: 0.0,
            loss6: 0.0,
        };
        let out = simulate_timeline(
            &tl,
            &OpticalPumpParams::default(),
            &fl,
            LossGroup::None,
            &PopulationState::pure_zero(),
        )
        .unwrap();
        assert_eq!(out.trace.rate_cps.len(), 100);
        assert!(out.trace.rate_cps.iter().all(|&r| r == 30e3));
    }

    #[test]
    fn loss_group_scales_trace() {
        let tl = PulseTimeline::new(vec![Segment::OpticalPump { duration_s: 1e-7 }]).unwrap();
        let fl = FluorescenceParams {
            f0_cps: 10e3,
            f1_cps: 0.0,
            loss1: 0.2,
            loss6: 0.5,
        };
        let run = |g| {
            simulate_timeline(
                &tl,
                &OpticalPumpParams::default(),
                &fl,
                g,
                &PopulationState::pure_zero(),
            )
            .unwrap()
            .trace
            .rate_cps[0]
        };
        assert_eq!(run(LossGroup::None), 10e3);
        assert!((run(LossGroup::Loss1) - 8e3).abs() < 1e-9);
        assert!((run(LossGroup::Loss6) - 5e3).abs() < 1e-9);
    }

    #[test]
    fn mw_and_wait_emit_nothing() {
        let tl = PulseTimeline::new(vec![
            Segment::MwPi {
                target: MwTarget::Minus,
                e_mw: 0.0,
            },
            Segment::Wait { duration_s: 1e-6 },
        ])
        .unwrap();
        let fl = FluorescenceParams {
            f0_cps: 1.0,
            f1_cps: 1.0,
            loss1: 0.0,
            loss6: 0.0,
        };
        let out = simulate_timeline(
            &tl,
            &OpticalPumpParams::default(),
            &fl,
            LossGroup::None,
            &PopulationState::pure_zero(),
        )
        .unwrap();
        assert!(out.trace.rate_cps.is_empty());
        assert_eq!(out.final_state.n[MINUS], 1.0);
    }

    #[test]
    fn wait_relaxes_singlet_only() {
        let p = OpticalPumpParams {
            p_st0: 0.5,
            p_ts: 0.1,
            p_ion: 0.1,
            ..Default::default()
        };
        let tl = PulseTimeline::new(vec![Segment::Wait { duration_s: 1e-6 }]).unwrap();
        let fl = FluorescenceParams {
            f0_cps: 1.0,
            f1_cps: 1.0,
            loss1: 0.0,
            loss6: 0.0,
        };
        let init = PopulationState::new([0.5, 0.0, 0.0, 0.5, 0.0]).unwrap();
        let out = simulate_timeline(&tl, &p, &fl, LossGroup::None, &init)
            .unwrap()
            .final_state;
        assert!(out.n[SINGLET] < 1e-4);
        assert_eq!(out.n[NV0], 0.0);
        assert!((out.n[ZERO] - 0.75).abs() < 1e-4);
    }

    #[test]
    fn invalid_timelines() {
        assert!(PulseTimeline::new(vec![]).is_err());
        assert!(PulseTimeline::new(vec![Segment::OpticalPump { duration_s: 0.0 }]).is_err());
        assert!(PulseTimeline::new(vec![Segment::Wait { duration_s: -1.0 }]).is_err());
    }

    #[test]
    fn spin_init_improves_plus_population() {
        let p = OpticalPumpParams::from_lifetimes(4.1e-6, 0.4e-3, 1.33e-6, f64::INFINITY, 10e-9)
            .unwrap();
        let fl = FluorescenceParams {
            f0_cps: 31.7e3,
            f1_cps: 0.2e3,
            loss1: 0.0,
            loss6: 0.0,
        };
        let tl = PulseTimeline::spin_init(3, 20e-6, 0.056).unwrap();
        let init = PopulationState::spin(0.704, 0.134, 0.162).unwrap();
        let out = simulate_timeline(&tl, &p, &fl, LossGroup::None, &init).unwrap();
        assert!(out.final_state.n[PLUS] > 0.7, "{:?}", out.final_state);
    }
}
