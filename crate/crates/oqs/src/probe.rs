//! Qubit probes of a bosonic pure-dephasing environment.
//!
//! Two probe schemes share one bath: a single qubit, and the first of two
//! qubits that see the bath through the common coupling (σz⁽¹⁾ + σz⁽²⁾)E.
//! Both start in |+⟩ (|+,+⟩), either as a product with the bath Gibbs state
//! or prepared by projecting the joint Gibbs state. The probe state is
//!
//!   ρ = ½ [[1, F e^{−iξ}], [F e^{iξ}, 1]],  F = e^{−Γ} cos Δ,  ξ = ω₀t + χ
//!
//! with Γ = Γ_un + Γ_corr. The two-qubit scheme adds the induced
//! qubit–qubit phase Δ(t); preparation correlations add Γ_corr and χ.

use rayon::prelude::*;

use crate::bath::{self, BathKind, BathSpec, Influence};
use crate::error::{Error, Result};
use crate::{CMat, DensityMatrix, C64};

/// Default optimization horizon and grid.
pub const DEFAULT_HORIZON: f64 = 20.0;
pub const DEFAULT_GRID_POINTS: usize = 1001;
pub const MIN_GRID_POINTS: usize = 500;
const GOLDEN_TOL: f64 = 1e-10;
/// A maximum in the final tenth of the window is taken as unfinished
/// growth (the oscillating super-Ohmic envelope peaks just short of the
/// endpoint rather than at it).
pub const GROWTH_TAIL_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    SingleQubit,
    TwoQubit,
}

/// Parameter to be estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Param {
    OmegaC,
    Coupling,
    Temperature,
}

impl Param {
    pub fn name(&self) -> &'static str {
        match self {
            Param::OmegaC => "omega_c",
            Param::Coupling => "G",
            Param::Temperature => "T",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeModel {
    pub omega0: f64,
    pub bath: BathSpec,
    pub correlated: bool,
    pub scheme: Scheme,
}

impl ProbeModel {
    pub fn new(omega0: f64, bath: BathSpec, correlated: bool, scheme: Scheme) -> Result<Self> {
        let m = Self { omega0, bath, correlated, scheme };
        m.validate()?;
        Ok(m)
    }

    pub fn two_qubit(omega0: f64, bath: BathSpec, correlated: bool) -> Result<Self> {
        Self::new(omega0, bath, correlated, Scheme::TwoQubit)
    }

    pub fn single_qubit(omega0: f64, bath: BathSpec, correlated: bool) -> Result<Self> {
        Self::new(omega0, bath, correlated, Scheme::SingleQubit)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega0.is_finite() {
            return Err(Error::InvalidParameter(format!("probe splitting must be finite, got {}", self.omega0)));
        }
        if self.bath.kind != BathKind::Bosonic {
            return Err(Error::Unsupported("probe dephasing model needs a bosonic bath".into()));
        }
        self.bath.validate()
    }

    /// The model with parameter `x` set to `value`.
    pub fn with_param(&self, x: Param, value: f64) -> Result<Self> {
        let mut m = *self;
        match x {
            Param::OmegaC => m.bath.omega_c = value,
            Param::Coupling => m.bath.coupling = value,
            Param::Temperature => {
                if !(value > 0.0) {
                    return Err(Error::InvalidParameter(format!("temperature must be > 0, got {value}")));
                }
                m.bath.beta = 1.0 / value;
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn param(&self, x: Param) -> f64 {
        match x {
            Param::OmegaC => self.bath.omega_c,
            Param::Coupling => self.bath.coupling,
            Param::Temperature => self.bath.temperature(),
        }
    }

    // Configurations (m, multiplicity) of the prepared qubits: m = p for one
    // qubit, m = p + q for two, with p, q = ±1.
    fn configurations(&self) -> &'static [(f64, f64)] {
        match self.scheme {
            Scheme::SingleQubit => &[(1.0, 1.0), (-1.0, 1.0)],
            Scheme::TwoQubit => &[(2.0, 1.0), (0.0, 2.0), (-2.0, 1.0)],
        }
    }
}

/// Influence factors of the probe coherence at one time, with their
/// derivatives with respect to the estimated parameter.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProbeFactors {
    pub gamma_un: f64,
    pub gamma_corr: f64,
    pub delta_ind: f64,
    pub chi: f64,
    pub d_gamma_un: f64,
    pub d_gamma_corr: f64,
    pub d_delta_ind: f64,
    pub d_chi: f64,
}

impl ProbeFactors {
    pub fn gamma(&self) -> f64 {
        self.gamma_un + self.gamma_corr
    }

    pub fn d_gamma(&self) -> f64 {
        self.d_gamma_un + self.d_gamma_corr
    }
}

// Preparation-correlation factor X = Σ w_k e^{i m_k φ} / Σ w_k with
// w_k = mult_k e^{β(−ω₀m_k/2 + m_k²C/4)}; the probe coherence ρ_01 carries
// e^{−iω₀t}·X, so Γ_corr = −ln|X| and χ = −arg X.
#[derive(Clone, Copy, Debug)]
struct CorrFactor {
    gamma_corr: f64,
    chi: f64,
    // ∂/∂φ, ∂/∂C, ∂/∂β of (Γ_corr, χ)
    d_phi: (f64, f64),
    d_c: (f64, f64),
    d_beta: (f64, f64),
}

fn corr_factor(model: &ProbeModel, phi: f64, c: f64) -> CorrFactor {
    let beta = model.bath.beta;
    let w0 = model.omega0;
    let cfg = model.configurations();
    let a: Vec<f64> = cfg.iter().map(|&(m, _)| -0.5 * w0 * m + 0.25 * m * m * c).collect();
    let amax = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = a.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let w: Vec<f64> = cfg
        .iter()
        .zip(&a)
        .map(|(&(_, mult), &ak)| {
            if beta.is_infinite() {
                if amax - ak <= 1e-12 * scale { mult } else { 0.0 }
            } else {
                mult * (beta * (ak - amax)).exp()
            }
        })
        .collect();
    let d: f64 = w.iter().sum();
    let mut n = C64::new(0.0, 0.0);
    let (mut n_m, mut n_m2, mut n_a) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let (mut d_m2, mut d_a) = (0.0, 0.0);
    for ((&(m, _), &wk), &ak) in cfg.iter().zip(&w).zip(&a) {
        let e = C64::from_polar(wk, m * phi);
        n += e;
        n_m += e * m;
        n_m2 += e * (m * m);
        n_a += e * ak;
        d_m2 += wk * m * m;
        d_a += wk * ak;
    }
    let x = n / d;
    // ∂ ln X for each underlying variable
    let dl_phi = C64::new(0.0, 1.0) * n_m / n;
    let (dl_c, dl_beta) = if beta.is_infinite() {
        (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    } else {
        (0.25 * beta * (n_m2 / n - d_m2 / d), n_a / n - d_a / d)
    };
    // Γ_corr and its partials come from 1 − |X|² written as a sum of
    // non-negative terms; −ln|X| and Re ∂ln X cancel badly when φ is small.
    let g = magnitude_loss(cfg, &w, phi, beta, &a);
    let chi = (-x.arg(), -dl_phi.im, -dl_c.im, -dl_beta.im);
    CorrFactor { gamma_corr: g.0, chi: chi.0, d_phi: (g.1, chi.1), d_c: (g.2, chi.2), d_beta: (g.3, chi.3) }
}

// (Γ, ∂Γ/∂φ, ∂Γ/∂C, ∂Γ/∂β) with Γ = −½ ln(1 − Q) and
// Q = 1 − |X|² = Σ_jk w_j w_k·2 sin²((m_j − m_k)φ/2) / (Σ w)².
fn magnitude_loss(cfg: &[(f64, f64)], w: &[f64], phi: f64, beta: f64, a: &[f64]) -> (f64, f64, f64, f64) {
    let d: f64 = w.iter().sum();
    let finite = beta.is_finite();
    // ∂ ln w_k / ∂C and ∂ ln w_k / ∂β
    let u_c: Vec<f64> = cfg.iter().map(|&(m, _)| if finite { 0.25 * beta * m * m } else { 0.0 }).collect();
    let u_b: Vec<f64> = if finite { a.to_vec() } else { vec![0.0; a.len()] };
    let mean = |u: &[f64]| u.iter().zip(w).map(|(u, w)| u * w).sum::<f64>() / d;
    let (ub_c, ub_b) = (mean(&u_c), mean(&u_b));
    let (mut q, mut q_phi, mut q_c, mut q_b) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..cfg.len() {
        for k in 0..cfg.len() {
            let dm = cfg[j].0 - cfg[k].0;
            let ww = w[j] * w[k];
            let sq = (0.5 * dm * phi).sin();
            let s = 2.0 * sq * sq;
            q += ww * s;
            q_phi += ww * dm * (dm * phi).sin();
            q_c += ww * (u_c[j] + u_c[k] - 2.0 * ub_c) * s;
            q_b += ww * (u_b[j] + u_b[k] - 2.0 * ub_b) * s;
        }
    }
    let d2 = d * d;
    let (q, q_phi, q_c, q_b) = (q / d2, q_phi / d2, q_c / d2, q_b / d2);
    let r = 0.5 / (1.0 - q);
    (-0.5 * (-q).ln_1p(), r * q_phi, r * q_c, r * q_b)
}

/// Γ_un, Δ, φ, C and their x-derivatives.
fn influence_with_derivative(model: &ProbeModel, x: Param, t: f64) -> Result<(Influence, Influence)> {
    let spec = &model.bath;
    let val = bath::influence(spec, t)?;
    let der = match x {
        Param::OmegaC => bath::influence_d_omega_c(spec, t)?,
        Param::Coupling => bath::influence_d_coupling(spec, t)?,
        Param::Temperature => {
            if spec.beta.is_infinite() {
                return Err(Error::InvalidParameter("temperature estimation needs T > 0".into()));
            }
            Influence { gamma: d_gamma_d_temperature(spec, t, temperature_step(spec.temperature()))?, delta: 0.0, phi: 0.0, c: 0.0 }
        }
    };
    Ok((val, der))
}

/// Central-difference step for T-derivatives.
pub fn temperature_step(temp: f64) -> f64 {
    (1e-4 * temp).max(1e-6)
}

/// ∂Γ_un/∂T by central differences with step h.
pub fn d_gamma_d_temperature(spec: &BathSpec, t: f64, h: f64) -> Result<f64> {
    let temp = spec.temperature();
    if !(temp > h) {
        return Err(Error::Domain(format!("temperature {temp} too small for step {h}")));
    }
    let up = bath::gamma_decoherence(&spec.with_beta(1.0 / (temp + h)), t)?;
    let dn = bath::gamma_decoherence(&spec.with_beta(1.0 / (temp - h)), t)?;
    Ok((up - dn) / (2.0 * h))
}

/// Factors and x-derivatives at time t.
pub fn probe_factors(model: &ProbeModel, x: Param, t: f64) -> Result<ProbeFactors> {
    model.validate()?;
    check_time(t)?;
    let (val, der) = influence_with_derivative(model, x, t)?;
    Ok(factors_from(model, x, &val, &der))
}

fn factors_from(model: &ProbeModel, x: Param, val: &Influence, der: &Influence) -> ProbeFactors {
    let mut f = ProbeFactors { gamma_un: val.gamma, d_gamma_un: der.gamma, ..Default::default() };
    if model.scheme == Scheme::TwoQubit {
        f.delta_ind = val.delta;
        f.d_delta_ind = der.delta;
    }
    if model.correlated {
        let cf = corr_factor(model, val.phi, val.c);
        let d_beta = if x == Param::Temperature { -model.bath.beta * model.bath.beta } else { 0.0 };
        f.gamma_corr = cf.gamma_corr;
        f.chi = cf.chi;
        f.d_gamma_corr = cf.d_phi.0 * der.phi + cf.d_c.0 * der.c + cf.d_beta.0 * d_beta;
        f.d_chi = cf.d_phi.1 * der.phi + cf.d_c.1 * der.c + cf.d_beta.1 * d_beta;
    }
    f
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Reduced state of the probe qubit, basis (|0⟩, |1⟩) with σz|n⟩ = (−1)ⁿ|n⟩.
pub fn probe_state(model: &ProbeModel, t: f64) -> Result<DensityMatrix> {
    model.validate()?;
    check_time(t)?;
    let val = bath::influence(&model.bath, t)?;
    let mut gamma = val.gamma;
    let mut xi = model.omega0 * t;
    if model.correlated {
        let cf = corr_factor(model, val.phi, val.c);
        gamma += cf.gamma_corr;
        xi += cf.chi;
    }
    let cos_d = if model.scheme == Scheme::TwoQubit { val.delta.cos() } else { 1.0 };
    let off = C64::from_polar(0.5 * (-gamma).exp() * cos_d, -xi);
    let m = CMat::from_row_slice(2, 2, &[C64::new(0.5, 0.0), off, off.conj(), C64::new(0.5, 0.0)]);
    DensityMatrix::new(m)
}

/// (∂_xΔ sinΔ + ∂_xΓ cosΔ)²/(e^{2Γ} − cos²Δ) + (∂_xχ)² cos²Δ / e^{2Γ}
pub fn qfi_from_factors(f: &ProbeFactors) -> f64 {
    let (s, c) = f.delta_ind.sin_cos();
    let e2g = (2.0 * f.gamma()).exp();
    let a = f.d_delta_ind * s + f.d_gamma() * c;
    let den = e2g - c * c;
    let first = if den > 0.0 { a * a / den } else { 0.0 };
    first + f.d_chi * f.d_chi * c * c / e2g
}

/// Dephasing-only qubit: (∂_xΓ)²/(e^{2Γ} − 1) + (∂_xχ)²/e^{2Γ}.
pub fn single_qubit_qfi(gamma: f64, d_gamma: f64, d_chi: f64) -> f64 {
    let e2g = (2.0 * gamma).exp();
    let den = e2g - 1.0;
    let first = if den > 0.0 { d_gamma * d_gamma / den } else { 0.0 };
    first + d_chi * d_chi / e2g
}

/// Quantum Fisher information of the probe state about x at time t;
/// zero at t = 0, where neither source of information has developed.
pub fn qfi(model: &ProbeModel, x: Param, t: f64) -> Result<f64> {
    if t == 0.0 {
        model.validate()?;
        return Ok(0.0);
    }
    Ok(qfi_of(model, &probe_factors(model, x, t)?))
}

fn qfi_of(model: &ProbeModel, f: &ProbeFactors) -> f64 {
    match model.scheme {
        Scheme::TwoQubit => qfi_from_factors(f),
        Scheme::SingleQubit => single_qubit_qfi(f.gamma(), f.d_gamma(), f.d_chi),
    }
}

/// Classical Fisher information of the projective measurement onto
/// (|0⟩ ± e^{iϕ}|1⟩)/√2, with Θ = ω₀t + χ − ϕ:
///
///   [(∂_xΔ sinΔ + ∂_xΓ cosΔ) cosΘ + ∂_xχ cosΔ sinΘ]² / (e^{2Γ} − cos²Δ cos²Θ)
pub fn cfi(model: &ProbeModel, x: Param, t: f64, varphi: f64) -> Result<f64> {
    if !varphi.is_finite() {
        return Err(Error::InvalidParameter(format!("measurement angle must be finite, got {varphi}")));
    }
    if t == 0.0 {
        model.validate()?;
        return Ok(0.0);
    }
    let f = probe_factors(model, x, t)?;
    Ok(cfi_from_factors(&f, model.omega0 * t + f.chi - varphi))
}

pub fn cfi_from_factors(f: &ProbeFactors, theta: f64) -> f64 {
    let (s, c) = f.delta_ind.sin_cos();
    let (st, ct) = theta.sin_cos();
    let num = (f.d_delta_ind * s + f.d_gamma() * c) * ct + f.d_chi * c * st;
    let den = (2.0 * f.gamma()).exp() - c * c * ct * ct;
    if den > 0.0 { num * num / den } else { 0.0 }
}

/// Measurement angle at which the CFI equals the QFI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalAngle {
    pub varphi: f64,
    /// ∂Γ and ∂Δ carry no information (0/0 in the arctangent); the angle
    /// then defaults to ω₀t + χ.
    pub degenerate: bool,
}

/// ϕ = ω₀t + χ − tan⁻¹[∂_xχ cosΔ (e^{2Γ} − cos²Δ) / (e^{2Γ}(∂_xΔ sinΔ + ∂_xΓ cosΔ))]
pub fn optimal_angle(model: &ProbeModel, x: Param, t: f64) -> Result<OptimalAngle> {
    if t == 0.0 {
        model.validate()?;
        return Ok(OptimalAngle { varphi: 0.0, degenerate: false });
    }
    let f = probe_factors(model, x, t)?;
    let (s, c) = f.delta_ind.sin_cos();
    // divided through by e^{2Γ}, which may overflow
    let num = f.d_chi * c * (1.0 - c * c * (-2.0 * f.gamma()).exp());
    let den = f.d_delta_ind * s + f.d_gamma() * c;
    let base = model.omega0 * t + f.chi;
    if num == 0.0 && den == 0.0 {
        return Ok(OptimalAngle { varphi: base, degenerate: true });
    }
    Ok(OptimalAngle { varphi: base - (num / den).atan(), degenerate: false })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FisherResult {
    pub x: Param,
    pub t_opt: f64,
    pub qfi_max: f64,
    /// False when the maximum sits in the tail of the time window, i.e. the
    /// QFI was still growing.
    pub converged: bool,
    pub curve: Vec<(f64, f64)>,
}

/// Uniform grid of `points` times on [0, horizon].
pub fn time_grid(horizon: f64, points: usize) -> Result<Vec<f64>> {
    if !(horizon > 0.0) || !horizon.is_finite() || points < 2 {
        return Err(Error::InvalidParameter(format!("need horizon > 0 and >= 2 points, got {horizon}, {points}")));
    }
    Ok((0..points).map(|k| horizon * k as f64 / (points - 1) as f64).collect())
}

/// Maximizes the QFI over t: grid argmax (first one on ties), refined by
/// golden-section search on the bracketing grid interval.
pub fn optimize_over_time(model: &ProbeModel, x: Param, t_grid: &[f64]) -> Result<FisherResult> {
    check_grid(t_grid)?;
    model.validate()?;
    let curve: Vec<(f64, f64)> = t_grid.iter().map(|&t| Ok((t, qfi(model, x, t)?))).collect::<Result<_>>()?;
    refine(model, x, curve)
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < MIN_GRID_POINTS {
        return Err(Error::InvalidParameter(format!("time grid needs at least {MIN_GRID_POINTS} points, got {}", t_grid.len())));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] >= 0.0) {
        return Err(Error::InvalidParameter("time grid must be non-negative and strictly increasing".into()));
    }
    Ok(())
}

fn refine(model: &ProbeModel, x: Param, curve: Vec<(f64, f64)>) -> Result<FisherResult> {
    let mut k = 0;
    for (i, &(_, q)) in curve.iter().enumerate() {
        if q > curve[k].1 {
            k = i;
        }
    }
    let last = curve.len() - 1;
    if curve[k].1 == 0.0 {
        return Ok(FisherResult { x, t_opt: curve[0].0, qfi_max: 0.0, converged: true, curve });
    }
    if k == last {
        return Ok(FisherResult { x, t_opt: curve[k].0, qfi_max: curve[k].1, converged: false, curve });
    }
    let lo = curve[k.saturating_sub(1)].0;
    let hi = curve[k + 1].0;
    let (t_ref, q_ref) = golden_max(|t| qfi(model, x, t), lo, hi)?;
    let (t_opt, qfi_max) = if q_ref > curve[k].1 { (t_ref, q_ref) } else { curve[k] };
    let (t0, t1) = (curve[0].0, curve[last].0);
    let converged = t_opt < t1 - GROWTH_TAIL_FRACTION * (t1 - t0);
    Ok(FisherResult { x, t_opt, qfi_max, converged, curve })
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > GOLDEN_TOL * (1.0 + a.abs() + b.abs()) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// The four probe variants, in output order.
pub const VARIANTS: [(Scheme, bool); 4] =
    [(Scheme::SingleQubit, false), (Scheme::SingleQubit, true), (Scheme::TwoQubit, false), (Scheme::TwoQubit, true)];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub t_opt: f64,
    pub qfi_max: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// One entry per element of [`VARIANTS`].
    pub points: [SweepPoint; 4],
}

/// Optimized QFI about x for each value of x on `values`, for all four
/// probe variants. Other parameters are taken from `base`.
pub fn sweep(base: &ProbeModel, x: Param, values: &[f64], t_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one parameter value".into()));
    }
    check_grid(t_grid)?;
    values
        .par_iter()
        .map(|&v| {
            let at = base.with_param(x, v)?;
            // the bath quantities are shared by all four variants
            let table: Vec<(Influence, Influence)> = t_grid
                .iter()
                .map(|&t| if t == 0.0 { Ok(Default::default()) } else { influence_with_derivative(&at, x, t) })
                .collect::<Result<_>>()?;
            let mut points = [SweepPoint { t_opt: 0.0, qfi_max: 0.0, converged: true }; 4];
            for (p, &(scheme, correlated)) in points.iter_mut().zip(VARIANTS.iter()) {
                let m = ProbeModel { scheme, correlated, ..at };
                let curve = t_grid
                    .iter()
                    .zip(&table)
                    .map(|(&t, (val, der))| (t, if t == 0.0 { 0.0 } else { qfi_of(&m, &factors_from(&m, x, val, der)) }))
                    .collect();
                let r = refine(&m, x, curve)?;
                *p = SweepPoint { t_opt: r.t_opt, qfi_max: r.qfi_max, converged: r.converged };
            }
            Ok(SweepRow { value: v, points })
        })
        .collect()
}
