//! Environments: spectral densities, pure-dephasing influence functions
//! and equilibrium correlation functions.
//!
//! The continuum spectral density is J(ω) = G ω^s ω_c^{1-s} e^{-ω/ω_c}.
//! Vacuum parts have closed forms; anything involving the thermal
//! occupation is integrated numerically.

mod modes;
mod quad;

pub use modes::ModeBath;

use crate::error::{Error, Result};
use crate::C64;

/// Statistics of the environment's elementary excitations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BathKind {
    /// Harmonic modes coupled linearly through their displacement.
    Bosonic,
    /// Two-level systems, H_E = Σ ω_k/2 σx^k, coupled through σz^k.
    Spin,
}

/// Power-law spectral density with exponential cutoff at inverse
/// temperature `beta` (`f64::INFINITY` is zero temperature).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathSpec {
    pub kind: BathKind,
    /// Overall strength G.
    pub coupling: f64,
    /// Ohmicity: s < 1 sub-Ohmic, s = 1 Ohmic, s > 1 super-Ohmic.
    pub s: f64,
    pub omega_c: f64,
    pub beta: f64,
}

impl BathSpec {
    pub fn new(kind: BathKind, coupling: f64, s: f64, omega_c: f64, beta: f64) -> Result<Self> {
        let b = Self { kind, coupling, s, omega_c, beta };
        b.validate()?;
        Ok(b)
    }

    pub fn ohmic(coupling: f64, omega_c: f64, beta: f64) -> Result<Self> {
        Self::new(BathKind::Bosonic, coupling, 1.0, omega_c, beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling G must be finite and >= 0, got {}", self.coupling)));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidParameter(format!("ohmicity s must be finite and > 0, got {}", self.s)));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::InvalidParameter(format!("cutoff must be finite and > 0, got {}", self.omega_c)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("inverse temperature must be > 0, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.coupling = g;
        self
    }

    pub fn with_omega_c(mut self, wc: f64) -> Self {
        self.omega_c = wc;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    #[inline]
    pub(crate) fn j(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        self.coupling * (self.s * w.ln() + (1.0 - self.s) * self.omega_c.ln() - w / self.omega_c).exp()
    }
}

/// Controls for the numerical integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    /// Upper integration limit in units of ω_c.
    pub omega_max_factor: f64,
    /// Half-width of the excluded principal-value window, relative to the pole.
    pub pv_window: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-8, omega_max_factor: 50.0, pv_window: 0.02 }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-4) {
            return Err(Error::InvalidParameter(format!("rel_tol must be in (0, 1e-4], got {}", self.rel_tol)));
        }
        if !(self.omega_max_factor >= 20.0 && self.omega_max_factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega_max_factor must be >= 20, got {}", self.omega_max_factor)));
        }
        if !(self.pv_window > 0.0 && self.pv_window < 0.5) {
            return Err(Error::InvalidParameter(format!("pv_window must be in (0, 0.5), got {}", self.pv_window)));
        }
        Ok(())
    }
}

pub(crate) fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Bose occupation 1/(e^{βω} - 1).
pub fn bose(beta: f64, w: f64) -> f64 {
    if beta.is_infinite() {
        0.0
    } else {
        1.0 / (beta * w).exp_m1()
    }
}

/// Thermal weights (A, B) such that the mixed correlation kernel of a
/// single mode is A e^{iωt} + B e^{-iωt} at imaginary-time offset λ:
/// A = a e^{-ωλ}, B = b e^{ωλ}, with (a, b) = (1+n, n) for oscillators and
/// (1, e^{-βω})/(1 + e^{-βω}) for two-level modes.
#[inline]
pub(crate) fn mixed_weights(kind: BathKind, beta: f64, w: f64, lam: f64) -> (f64, f64) {
    if beta.is_infinite() {
        return ((-w * lam).exp(), 0.0);
    }
    let emb = (-beta * w).exp();
    let norm = match kind {
        BathKind::Bosonic => 1.0 / -(-beta * w).exp_m1(),
        BathKind::Spin => 1.0 / (1.0 + emb),
    };
    ((-w * lam).exp() * norm, (w * (lam - beta)).exp() * norm)
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("time must be finite, got {t}")));
    }
    Ok(())
}

pub fn spectral_density(spec: &BathSpec, omega: f64) -> Result<f64> {
    spec.validate()?;
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("frequency must be finite and >= 0, got {omega}")));
    }
    Ok(spec.j(omega))
}

/// C = ∫ J(ω)/ω dω = G ω_c Γ(s).
pub fn c_factor(spec: &BathSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.coupling * spec.omega_c * gamma_fn(spec.s))
}

/// ∫ J(ω) dω = G ω_c² Γ(s+1).
pub fn integral_j(spec: &BathSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.coupling * spec.omega_c * spec.omega_c * gamma_fn(spec.s + 1.0))
}

// (e^{uL} cos uA - 1)/u and e^{uL} sin(uA)/u with u = 1 - s, written so the
// s → 1 limit is continuous.
fn vac_shapes(s: f64, x: f64) -> (f64, f64) {
    let l = 0.5 * (x * x).ln_1p();
    let a = x.atan();
    let u = 1.0 - s;
    if u == 0.0 {
        return (l, a);
    }
    let half = (0.5 * u * a).sin();
    let g = ((u * l).exp_m1() * (u * a).cos() - 2.0 * half * half) / u;
    let p = (u * l).exp() * (u * a).sin() / u;
    (g, p)
}

/// Vacuum decoherence function ∫ J/ω² (1 - cos ωt) dω.
pub fn gamma_vac(spec: &BathSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    let (g, _) = vac_shapes(spec.s, spec.omega_c * t.abs());
    Ok(spec.coupling * gamma_fn(spec.s) * g)
}

/// Thermal decoherence function ∫ J/ω² (1 - cos ωt) 2n(ω) dω.
pub fn gamma_th(spec: &BathSpec, t: f64) -> Result<f64> {
    gamma_th_with(spec, t, &QuadratureSettings::default())
}

pub fn gamma_th_with(spec: &BathSpec, t: f64, q: &QuadratureSettings) -> Result<f64> {
    spec.validate()?;
    q.validate()?;
    check_time(t)?;
    if spec.beta.is_infinite() || spec.coupling == 0.0 || t == 0.0 {
        return Ok(0.0);
    }
    let beta = spec.beta;
    let f = |w: f64| {
        let sh = (0.5 * w * t).sin();
        spec.j(w) / (w * w) * 4.0 * sh * sh * bose(beta, w)
    };
    spectral_integral(spec, q, t, beta, &f)
}

/// Γ(t) = Γ_vac(t) + Γ_th(t).
pub fn gamma_decoherence(spec: &BathSpec, t: f64) -> Result<f64> {
    Ok(gamma_vac(spec, t)? + gamma_th(spec, t)?)
}

/// Correlation phase φ(t) = ∫ J/ω² sin ωt dω.
pub fn phi(spec: &BathSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    let (_, p) = vac_shapes(spec.s, spec.omega_c * t.abs());
    Ok(t.signum() * spec.coupling * gamma_fn(spec.s) * p)
}

/// Δ(t) = ∫ J/ω² (sin ωt - ωt) dω = φ(t) - C t.
pub fn delta(spec: &BathSpec, t: f64) -> Result<f64> {
    Ok(phi(spec, t)? - c_factor(spec)? * t)
}

// ---- quadrature cross-checks of the closed forms ----

pub fn gamma_vac_quad(spec: &BathSpec, t: f64, q: &QuadratureSettings) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    let f = |w: f64| {
        let sh = (0.5 * w * t).sin();
        spec.j(w) / (w * w) * 2.0 * sh * sh
    };
    spectral_integral(spec, q, t, 0.0, &f)
}

pub fn phi_quad(spec: &BathSpec, t: f64, q: &QuadratureSettings) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    let f = |w: f64| spec.j(w) / (w * w) * (w * t).sin();
    spectral_integral(spec, q, t, 0.0, &f)
}

pub fn delta_quad(spec: &BathSpec, t: f64, q: &QuadratureSettings) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    let f = |w: f64| spec.j(w) / (w * w) * sin_minus_x(w * t);
    spectral_integral(spec, q, t, 0.0, &f)
}

pub fn c_factor_quad(spec: &BathSpec, q: &QuadratureSettings) -> Result<f64> {
    spec.validate()?;
    let f = |w: f64| spec.j(w) / w;
    spectral_integral(spec, q, 0.0, 0.0, &f)
}

// sin x - x without cancellation for small x.
fn sin_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x.sin() - x
    }
}

/// ∫_0^{ω_max} f with panels adapted to an oscillation frequency `osc`
/// and an extra exponential decay rate `extra_decay` on top of the cutoff.
fn spectral_integral<F: Fn(f64) -> f64>(spec: &BathSpec, q: &QuadratureSettings, osc: f64, extra_decay: f64, f: &F) -> Result<f64> {
    let kappa = 1.0 / spec.omega_c + extra_decay.max(0.0);
    let upper = (q.omega_max_factor * spec.omega_c).min((60.0 + 3.0 * spec.s) / kappa);
    let mut width = spec.omega_c.min(upper / 8.0);
    if osc != 0.0 {
        width = width.min(std::f64::consts::PI / osc.abs());
    }
    let p = (2.0 / spec.s).ceil().max(1.0);
    quad::integrate_graded(f, 0.0, upper, width, p, q.rel_tol * 1e-2)
}

/// Equilibrium correlation ⟨E(τ)E(0)⟩:
/// bosonic ∫J[coth(βω/2) cos ωτ - i sin ωτ], spin ∫J[cos ωτ - i tanh(βω/2) sin ωτ].
pub fn c_ts(spec: &BathSpec, tau: f64) -> Result<C64> {
    c_ts_with(spec, tau, &QuadratureSettings::default())
}

pub fn c_ts_with(spec: &BathSpec, tau: f64, q: &QuadratureSettings) -> Result<C64> {
    check_time(tau)?;
    kernel(spec, 0.0, -tau, q)
}

/// Mixed imaginary/real-time correlation ⟨E(λ)E(t)⟩ with E(λ) = e^{λH_E} E e^{-λH_E},
/// for 0 ≤ λ ≤ β. E_corr(0, t) = C(t)*.
pub fn e_corr_mixed(spec: &BathSpec, lambda: f64, t: f64) -> Result<C64> {
    e_corr_mixed_with(spec, lambda, t, &QuadratureSettings::default())
}

pub fn e_corr_mixed_with(spec: &BathSpec, lambda: f64, t: f64, q: &QuadratureSettings) -> Result<C64> {
    check_time(t)?;
    if !(lambda >= 0.0 && lambda <= spec.beta) || !lambda.is_finite() {
        return Err(Error::Domain(format!("imaginary time {lambda} outside [0, β = {}]", spec.beta)));
    }
    kernel(spec, lambda, t, q)
}

fn kernel(spec: &BathSpec, lam: f64, t: f64, q: &QuadratureSettings) -> Result<C64> {
    spec.validate()?;
    q.validate()?;
    let (kind, beta) = (spec.kind, spec.beta);
    let decay = if beta.is_infinite() { lam } else { lam.min(beta - lam) };
    let re = |w: f64| {
        let (a, b) = mixed_weights(kind, beta, w, lam);
        spec.j(w) * (a + b) * (w * t).cos()
    };
    let im = |w: f64| {
        let (a, b) = mixed_weights(kind, beta, w, lam);
        spec.j(w) * (a - b) * (w * t).sin()
    };
    Ok(C64::new(spectral_integral(spec, q, t, decay, &re)?, spectral_integral(spec, q, t, decay, &im)?))
}

/// Cauchy principal value of ∫_0^upper f(ω) dω where f has a simple pole at
/// `pole`.
pub fn pv_integral<F: Fn(f64) -> f64>(f: F, pole: f64, upper: f64, q: &QuadratureSettings) -> Result<f64> {
    q.validate()?;
    let width = (0.25 * pole).min(upper / 16.0);
    quad::principal_value(&f, pole, upper, q.pv_window, width, q.rel_tol)
}

/// Values (or derivatives) of the pure-dephasing influence functions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Influence {
    pub gamma: f64,
    pub delta: f64,
    pub phi: f64,
    pub c: f64,
}

pub fn influence(spec: &BathSpec, t: f64) -> Result<Influence> {
    let c = c_factor(spec)?;
    let ph = phi(spec, t)?;
    Ok(Influence { gamma: gamma_decoherence(spec, t)?, delta: ph - c * t, phi: ph, c })
}

/// ∂/∂ω_c of the influence functions. Vacuum parts are analytic; the
/// thermal part of Γ uses ∂J/∂ω_c = J((1-s)/ω_c + ω/ω_c²) under the integral.
pub fn influence_d_omega_c(spec: &BathSpec, t: f64) -> Result<Influence> {
    spec.validate()?;
    check_time(t)?;
    let x = spec.omega_c * t;
    let gs = spec.coupling * gamma_fn(spec.s);
    let zl = -spec.s * 0.5 * (x * x).ln_1p();
    let za = spec.s * x.atan();
    let dgv = gs * t * zl.exp() * za.sin();
    let dphi = gs * t * zl.exp() * za.cos();
    let dth = if spec.beta.is_infinite() || spec.coupling == 0.0 || t == 0.0 {
        0.0
    } else {
        let (s, wc, beta) = (spec.s, spec.omega_c, spec.beta);
        let f = |w: f64| {
            let sh = (0.5 * w * t).sin();
            spec.j(w) * ((1.0 - s) / wc + w / (wc * wc)) / (w * w) * 4.0 * sh * sh * bose(beta, w)
        };
        spectral_integral(spec, &QuadratureSettings::default(), t, beta, &f)?
    };
    Ok(Influence { gamma: dgv + dth, delta: dphi - gs * t, phi: dphi, c: gs })
}

/// ∂/∂G of the influence functions (all are linear in G).
pub fn influence_d_coupling(spec: &BathSpec, t: f64) -> Result<Influence> {
    influence(&spec.with_coupling(1.0), t)
}

/// Pure-dephasing influence functions of a bosonic environment.
pub trait InfluenceFunctions: Send + Sync {
    fn gamma(&self, t: f64) -> Result<f64>;
    fn delta(&self, t: f64) -> Result<f64>;
    fn phi(&self, t: f64) -> Result<f64>;
    fn c_factor(&self) -> Result<f64>;
    fn beta(&self) -> f64;
    fn kind(&self) -> BathKind;
}

impl InfluenceFunctions for BathSpec {
    fn gamma(&self, t: f64) -> Result<f64> {
        gamma_decoherence(self, t)
    }
    fn delta(&self, t: f64) -> Result<f64> {
        delta(self, t)
    }
    fn phi(&self, t: f64) -> Result<f64> {
        phi(self, t)
    }
    fn c_factor(&self) -> Result<f64> {
        c_factor(self)
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn kind(&self) -> BathKind {
        self.kind
    }
}
