//! Simultaneous fit of twelve pumping traces: three initialization families,
//! four MW variants each.

use nalgebra::{Matrix5, Vector5};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    build_transfer_optical, FluorescenceParams, FluorescenceTrace, LossGroup, OpticalPumpParams,
    MINUS, PLUS, ZERO,
};
use crate::error::{invalid, Error, Result};
use crate::optim::{levenberg_marquardt, r_squared, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceFamily {
    /// Green initialization only.
    A,
    /// Green plus one resonant pulse; scaled by `1 − loss1`.
    B,
    /// Full spin initialization; scaled by `1 − loss6`.
    C,
}

impl TraceFamily {
    pub const ALL: [TraceFamily; 3] = [TraceFamily::A, TraceFamily::B, TraceFamily::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn loss_group(self) -> LossGroup {
        match self {
            TraceFamily::A => LossGroup::None,
            TraceFamily::B => LossGroup::Loss1,
            TraceFamily::C => LossGroup::Loss6,
        }
    }

    pub fn label(self) -> &'static str {
        ["a", "b", "c"][self.index()]
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "d" => Some(TraceFamily::A),
            "b" | "e" => Some(TraceFamily::B),
            "c" | "f" => Some(TraceFamily::C),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MwVariant {
    None,
    PiPlus,
    PiMinus,
    PiPlusPiPlus,
}

impl MwVariant {
    pub const ALL: [MwVariant; 4] = [
        MwVariant::None,
        MwVariant::PiPlus,
        MwVariant::PiMinus,
        MwVariant::PiPlusPiPlus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        ["none", "pi+", "pi-", "pi+pi+"][self.index()]
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "none" => Some(MwVariant::None),
            "pi+" => Some(MwVariant::PiPlus),
            "pi-" => Some(MwVariant::PiMinus),
            "pi+pi+" => Some(MwVariant::PiPlusPiPlus),
            _ => None,
        }
    }

    /// Populations after the MW part of the sequence, with flip `q = 1 − E_MW`.
    fn apply(self, n: &mut Vector5<f64>, q: f64) {
        let flip = |n: &mut Vector5<f64>, t: usize| {
            let (a, b) = (n[ZERO], n[t]);
            n[ZERO] = (1.0 - q) * a + q * b;
            n[t] = q * a + (1.0 - q) * b;
        };
        match self {
            MwVariant::None => {}
            MwVariant::PiPlus => flip(n, PLUS),
            MwVariant::PiMinus => flip(n, MINUS),
            MwVariant::PiPlusPiPlus => {
                flip(n, PLUS);
                flip(n, PLUS);
            }
        }
    }
}

/// Initial spin populations of one family; `n₋ = 1 − n₀ − n₊`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyPopulations {
    pub n0: f64,
    pub n_plus: f64,
}

impl FamilyPopulations {
    pub fn n_minus(&self) -> f64 {
        1.0 - self.n0 - self.n_plus
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.n0, self.n_plus, self.n_minus()]
    }

    /// Spin fidelity of the dominant state: `(1 + max n) / 2`.
    pub fn spin_fidelity(&self) -> f64 {
        let m = self
            .as_array()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        (1.0 + m) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalParams {
    pub pump: OpticalPumpParams,
    pub fl: FluorescenceParams,
    pub e_mw: f64,
    pub families: [FamilyPopulations; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub family: TraceFamily,
    pub variant: MwVariant,
    pub trace: FluorescenceTrace,
}

fn model_trace(
    g: &GlobalParams,
    t: &Matrix5<f64>,
    family: TraceFamily,
    variant: MwVariant,
    bins: usize,
    out: &mut Vec<f64>,
) {
    let pop = g.families[family.index()];
    let mut n = Vector5::new(pop.n0, pop.n_plus, pop.n_minus(), 0.0, 0.0);
    variant.apply(&mut n, 1.0 - g.e_mw);
    let s = g.fl.scale(family.loss_group());
    let (f0, f1) = (g.fl.f0_cps * s, g.fl.f1_cps * s);
    for _ in 0..bins {
        out.push(n[ZERO] * f0 + (n[PLUS] + n[MINUS]) * f1);
        n = t * n;
    }
}

/// Noise-free traces for all twelve (family, variant) pairs.
pub fn synthesize_bundle(g: &GlobalParams, bins: usize) -> Result<Vec<LabeledTrace>> {
    g.fl.validate()?;
    let t = build_transfer_optical(&g.pump)?.0;
    let mut out = Vec::with_capacity(12);
    for family in TraceFamily::ALL {
        for variant in MwVariant::ALL {
            let mut rate = Vec::with_capacity(bins);
            model_trace(g, &t, family, variant, bins, &mut rate);
            out.push(LabeledTrace {
                family,
                variant,
                trace: FluorescenceTrace {
                    binwidth_s: g.pump.binwidth_s,
                    rate_cps: rate,
                },
            });
        }
    }
    Ok(out)
}

/// Add zero-mean Gaussian noise with standard deviation `rel · rate` to every
/// sample. Each trace draws from its own stream of `seed`.
pub fn add_relative_noise(
    traces: &[LabeledTrace],
    rel: f64,
    seed: u64,
) -> Result<Vec<LabeledTrace>> {
    if !(rel.is_finite() && rel >= 0.0) {
        return Err(invalid(format!("relative noise must be >= 0, got {rel}")));
    }
    Ok(traces
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut l = l.clone();
            for r in &mut l.trace.rate_cps {
                let z: f64 = StandardNormal.sample(&mut rng);
                *r += rel * *r * z;
            }
            l
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct GlobalFitOptions {
    /// Starting point; its binwidth must match the data.
    pub initial: GlobalParams,
    /// Fit the ionization probability; otherwise it stays at its initial value.
    pub fit_p_ion: bool,
    pub weighting: Weighting,
    pub lm: LmOptions,
}

/// Residual weighting of the trace samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Weighting {
    /// Plain least squares on count rates.
    #[default]
    Uniform,
    /// Residuals divided by the measured rate (noise proportional to signal),
    /// with rates below `floor_cps` treated as `floor_cps`.
    Relative { floor_cps: f64 },
}

#[derive(Debug, Clone)]
pub struct GlobalFitResult {
    pub params: GlobalParams,
    /// One-sigma uncertainties laid out like `params` (binwidth and p_rec unused).
    pub sigma: GlobalParams,
    pub r_squared: f64,
    pub iterations: usize,
    pub cost: f64,
}

impl GlobalFitResult {
    pub fn spin_fidelity(&self, family: TraceFamily) -> f64 {
        self.params.families[family.index()].spin_fidelity()
    }
}

const RATE_SCALE: f64 = 1e4;

struct Layout {
    fit_p_ion: bool,
}

impl Layout {
    fn len(&self) -> usize {
        if self.fit_p_ion {
            15
        } else {
            14
        }
    }

    fn pack(&self, g: &GlobalParams) -> Vec<f64> {
        let mut x = vec![g.pump.p_st0.ln(), g.pump.p_st1.ln(), g.pump.p_ts.ln()];
        if self.fit_p_ion {
            x.push(g.pump.p_ion.ln());
        }
        x.extend([
            g.fl.f0_cps / RATE_SCALE,
            g.fl.f1_cps / RATE_SCALE,
            g.e_mw,
            g.fl.loss1,
            g.fl.loss6,
        ]);
        for f in &g.families {
            x.extend([f.n0, f.n_plus]);
        }
        x
    }

    fn unpack(&self, x: &[f64], base: &GlobalParams) -> GlobalParams {
        let p = |v: f64| v.exp().min(0.5);
        let mut g = *base;
        g.pump.p_st0 = p(x[0]);
        g.pump.p_st1 = p(x[1]);
        g.pump.p_ts = p(x[2]);
        let mut k = 3;
        if self.fit_p_ion {
            g.pump.p_ion = p(x[3]);
            k = 4;
        }
        g.fl.f0_cps = x[k] * RATE_SCALE;
        g.fl.f1_cps = x[k + 1] * RATE_SCALE;
        g.e_mw = x[k + 2];
        g.fl.loss1 = x[k + 3];
        g.fl.loss6 = x[k + 4];
        for (i, f) in g.families.iter_mut().enumerate() {
            f.n0 = x[k + 5 + 2 * i];
            f.n_plus = x[k + 6 + 2 * i];
        }
        g
    }

    fn sigma(&self, s: &[f64], g: &GlobalParams) -> GlobalParams {
        let mut out = *g;
        out.pump.p_st0 = g.pump.p_st0 * s[0];
        out.pump.p_st1 = g.pump.p_st1 * s[1];
        out.pump.p_ts = g.pump.p_ts * s[2];
        let mut k = 3;
        if self.fit_p_ion {
            out.pump.p_ion = g.pump.p_ion * s[3];
            k = 4;
        } else {
            out.pump.p_ion = 0.0;
        }
        out.pump.p_rec = 0.0;
        out.fl.f0_cps = s[k] * RATE_SCALE;
        out.fl.f1_cps = s[k + 1] * RATE_SCALE;
        out.e_mw = s[k + 2];
        out.fl.loss1 = s[k + 3];
        out.fl.loss6 = s[k + 4];
        for (i, f) in out.families.iter_mut().enumerate() {
            f.n0 = s[k + 5 + 2 * i];
            f.n_plus = s[k + 6 + 2 * i];
        }
        out
    }
}

/// Least-squares fit of shared rates, fluorescence levels, MW error, losses
/// and per-family initial populations to a complete trace bundle.
///
/// Rates are fitted in log space; the Jacobian is taken by central differences.
pub fn global_fit(traces: &[LabeledTrace], opts: &GlobalFitOptions) -> Result<GlobalFitResult> {
    let mut slots: [[Option<&LabeledTrace>; 4]; 3] = Default::default();
    for t in traces {
        let slot = &mut slots[t.family.index()][t.variant.index()];
        if slot.is_some() {
            return Err(invalid(format!(
                "duplicate trace for family {} variant {}",
                t.family.label(),
                t.variant.label()
            )));
        }
        *slot = Some(t);
    }
    let mut ordered = Vec::with_capacity(12);
    for family in TraceFamily::ALL {
        for variant in MwVariant::ALL {
            match slots[family.index()][variant.index()] {
                Some(t) => ordered.push(t),
                None => {
                    return Err(Error::RankDeficient(format!(
                        "missing trace for family {} variant {}",
                        family.label(),
                        variant.label()
                    )))
                }
            }
        }
    }
    let bw = opts.initial.pump.binwidth_s;
    if ordered
        .iter()
        .any(|t| (t.trace.binwidth_s - bw).abs() > 1e-9 * bw)
    {
        return Err(invalid("trace binwidth differs from model binwidth"));
    }
    if ordered.iter().any(|t| t.trace.rate_cps.is_empty()) {
        return Err(invalid("empty trace"));
    }
    let init = &opts.initial;
    let rates = [init.pump.p_st0, init.pump.p_st1, init.pump.p_ts];
    if rates.iter().any(|p| !(*p > 0.0 && *p < 1.0)) || (opts.fit_p_ion && !(init.pump.p_ion > 0.0))
    {
        return Err(invalid("fitted rates need a starting value in (0, 1)"));
    }

    let data: Vec<f64> = ordered
        .iter()
        .flat_map(|t| t.trace.rate_cps.iter().copied())
        .collect();
    let layout = Layout {
        fit_p_ion: opts.fit_p_ion,
    };
    debug_assert_eq!(layout.pack(init).len(), layout.len());

    let model = |g: &GlobalParams| -> Vec<f64> {
        let t = match build_transfer_optical(&g.pump) {
            Ok(t) => t.0,
            Err(_) => return vec![f64::NAN; data.len()],
        };
        let mut out = Vec::with_capacity(data.len());
        for tr in &ordered {
            model_trace(
                g,
                &t,
                tr.family,
                tr.variant,
                tr.trace.rate_cps.len(),
                &mut out,
            );
        }
        out
    };
    let scale: Vec<f64> = match opts.weighting {
        Weighting::Uniform => vec![RATE_SCALE; data.len()],
        Weighting::Relative { floor_cps } => data.iter().map(|d| d.abs().max(floor_cps)).collect(),
    };
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Err(invalid("relative weighting needs a positive floor"));
    }
    let residual = |x: &[f64]| -> Vec<f64> {
        let m = model(&layout.unpack(x, init));
        m.iter()
            .zip(&data)
            .zip(&scale)
            .map(|((m, d), s)| (m - d) / s)
            .collect()
    };

    let lm = levenberg_marquardt(residual, &layout.pack(init), &opts.lm);
    if !lm.converged {
        return Err(Error::NonConvergence(format!(
            "global fit did not converge in {} iterations",
            lm.iterations
        )));
    }
    let params = layout.unpack(&lm.params, init);
    let sigma = layout.sigma(&lm.uncertainties(), &params);
    let r2 = r_squared(&data, &model(&params));
    Ok(GlobalFitResult {
        params,
        sigma,
        r_squared: r2,
        iterations: lm.iterations,
        cost: lm.cost,
    })
}
