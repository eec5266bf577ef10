use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use super::{mixed_weights, sin_minus_x, BathKind, BathSpec, InfluenceFunctions, QuadratureSettings};
use crate::error::{Error, Result};
use crate::C64;

const NODES_PER_PANEL: usize = 12;

/// A finite set of environment modes with frequencies ω_k and spectral
/// weights c_k, i.e. J(ω) = Σ c_k δ(ω - ω_k).
///
/// Besides genuinely discrete environments this is how continuum baths are
/// handed to the propagators: [`ModeBath::from_spec`] builds a graded
/// Gauss–Legendre rule whose weights already contain J(ω_k).
#[derive(Clone, Debug, PartialEq)]
pub struct ModeBath {
    kind: BathKind,
    beta: f64,
    omega: Vec<f64>,
    weight: Vec<f64>,
}

impl ModeBath {
    pub fn new(kind: BathKind, beta: f64, omega: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        if omega.len() != weight.len() {
            return Err(Error::Dimension(format!("{} frequencies but {} weights", omega.len(), weight.len())));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("inverse temperature must be > 0, got {beta}")));
        }
        if let Some(w) = omega.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("mode frequency {w} must be finite and > 0")));
        }
        if let Some(c) = weight.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidParameter(format!("mode weight {c} must be finite and >= 0")));
        }
        Ok(Self { kind, beta, omega, weight })
    }

    /// Discretizes a continuum so that correlation functions are resolved
    /// for time arguments up to `horizon`.
    pub fn from_spec(spec: &BathSpec, horizon: f64, q: &QuadratureSettings) -> Result<Self> {
        spec.validate()?;
        q.validate()?;
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        let wc = spec.omega_c;
        let tau = horizon.max(1.0 / wc);
        let gl = GaussLegendre::new(NonZeroUsize::new(NODES_PER_PANEL).unwrap());
        let rule = gl.as_node_weight_pairs();
        let (mut omega, mut weight) = (Vec::new(), Vec::new());
        let mut push = |w: f64, dw: f64| {
            let c = spec.j(w) * dw;
            if w > 0.0 && c > 0.0 {
                omega.push(w);
                weight.push(c);
            }
        };
        // Low-frequency region through ω = w0 u^p, which turns the ω^{s-1}
        // behaviour of thermal kernels into a smooth power of u.
        let w0 = 0.25 * wc;
        let p = (2.0 / spec.s).ceil().max(1.0);
        let m_low = ((p * w0 * tau / std::f64::consts::PI).ceil() as usize).max(2);
        for k in 0..m_low {
            let (a, b) = (k as f64 / m_low as f64, (k + 1) as f64 / m_low as f64);
            for &(x, wt) in rule {
                let u = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let du = 0.5 * (b - a) * wt;
                push(w0 * u.powf(p), p * w0 * u.powf(p - 1.0) * du);
            }
        }
        let upper = q.omega_max_factor * wc;
        let width = (0.5 * wc).min(std::f64::consts::PI / tau);
        let n = ((upper - w0) / width).ceil() as usize;
        if n > 1_000_000 {
            return Err(Error::Capacity(format!("mode discretization would need {n} panels")));
        }
        let h = (upper - w0) / n as f64;
        for k in 0..n {
            let a = w0 + k as f64 * h;
            for &(x, wt) in rule {
                push(a + 0.5 * h * (1.0 + x), 0.5 * h * wt);
            }
        }
        Self::new(spec.kind, spec.beta, omega, weight)
    }

    pub fn kind(&self) -> BathKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Thermal weights (A_k, B_k) of each mode at imaginary time λ; see
    /// [`ModeBath::e_corr_mixed`].
    pub fn mixed_weights(&self, lambda: f64) -> Vec<(f64, f64)> {
        self.omega.iter().zip(&self.weight).map(|(&w, &c)| {
            let (a, b) = mixed_weights(self.kind, self.beta, w, lambda);
            (c * a, c * b)
        }).collect()
    }

    /// ⟨E(τ)E(0)⟩
    pub fn c_ts(&self, tau: f64) -> C64 {
        self.kernel(0.0, -tau)
    }

    /// ⟨E(λ)E(t)⟩ for 0 ≤ λ ≤ β.
    pub fn e_corr_mixed(&self, lambda: f64, t: f64) -> Result<C64> {
        if !(lambda >= 0.0 && lambda <= self.beta) || !lambda.is_finite() {
            return Err(Error::Domain(format!("imaginary time {lambda} outside [0, β = {}]", self.beta)));
        }
        Ok(self.kernel(lambda, t))
    }

    /// Imaginary-time kernel K(x) = ⟨E(x)E(0)⟩, real for 0 ≤ x ≤ β.
    pub fn imaginary_time_kernel(&self, x: f64) -> Result<f64> {
        Ok(self.e_corr_mixed(x, 0.0)?.re)
    }

    fn kernel(&self, lam: f64, t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (&w, &c) in self.omega.iter().zip(&self.weight) {
            let (a, b) = mixed_weights(self.kind, self.beta, w, lam);
            let (s, co) = (w * t).sin_cos();
            acc += C64::new(c * (a + b) * co, c * (a - b) * s);
        }
        acc
    }

    /// First moment ⟨E⟩ of the coupling operator in the bath's Gibbs state.
    /// Zero for oscillators by symmetry; evaluated mode by mode for spins.
    pub fn coupling_mean(&self) -> f64 {
        match self.kind {
            BathKind::Bosonic => 0.0,
            BathKind::Spin => {
                let sx = &crate::qcore::pauli_dyn::<f64>()[0];
                let sz = &crate::qcore::pauli_dyn::<f64>()[2];
                self.omega.iter().zip(&self.weight).map(|(&w, &c)| {
                    let rho = crate::qcore::gibbs(&sx.scale(0.5 * w), self.beta).expect("positive beta");
                    c.sqrt() * (rho * sz).trace().re
                }).sum()
            }
        }
    }

    fn bosonic(&self) -> Result<()> {
        if self.kind != BathKind::Bosonic {
            return Err(Error::Unsupported("pure-dephasing influence functions need a bosonic environment".into()));
        }
        Ok(())
    }
}

impl InfluenceFunctions for ModeBath {
    fn gamma(&self, t: f64) -> Result<f64> {
        self.bosonic()?;
        Ok(self.omega.iter().zip(&self.weight).map(|(&w, &c)| {
            let sh = (0.5 * w * t).sin();
            let coth = if self.beta.is_infinite() { 1.0 } else { 1.0 / (0.5 * self.beta * w).tanh() };
            c / (w * w) * 2.0 * sh * sh * coth
        }).sum())
    }

    fn delta(&self, t: f64) -> Result<f64> {
        self.bosonic()?;
        Ok(self.omega.iter().zip(&self.weight).map(|(&w, &c)| c / (w * w) * sin_minus_x(w * t)).sum())
    }

    fn phi(&self, t: f64) -> Result<f64> {
        self.bosonic()?;
        Ok(self.omega.iter().zip(&self.weight).map(|(&w, &c)| c / (w * w) * (w * t).sin()).sum())
    }

    fn c_factor(&self) -> Result<f64> {
        self.bosonic()?;
        Ok(self.omega.iter().zip(&self.weight).map(|(&w, &c)| c / w).sum())
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn kind(&self) -> BathKind {
        self.kind
    }
}
