//! Exact pure-dephasing dynamics of N two-level systems sharing a bosonic
//! bath, H = εJz + Σω_k b_k†b_k + 2Jz Σ(g_k* b_k + g_k b_k†).
//!
//! Work in the Jz eigenbasis of the maximal-spin sector (N+1 states,
//! ordered m = j, j-1, …, -j). An element ρ_uv picks up
//!
//!   e^{-iε(u-v)t} e^{-iΔ(t)(u²-v²)} e^{-Γ(t)(u-v)²}
//!
//! and, when the preparation Θ acts on the joint Gibbs state, an extra
//! l-dependent phase e^{2il(u-v)φ(t)} averaged with weights
//! e^{-βε₀l + βl²C}. Γ, Δ, φ and C come from [`InfluenceFunctions`].

use nalgebra::DVector;

use crate::bath::{BathKind, InfluenceFunctions};
use crate::error::{Error, Result};
use crate::qcore::{collective_ops, hermitian_map};
use crate::{CMat, CollectiveSpinOps, DensityMatrix, C64};

/// Smallest |Σ_l ⟨l|Θ†P_uvΘ|l⟩ w_l| accepted when forming μ-normalised
/// correlation factors.
pub const MU_DENOMINATOR_TOL: f64 = 1e-12;

/// State-preparation operation Θ applied to the system in the joint
/// thermal state.
#[derive(Clone, Debug, PartialEq)]
pub enum Preparation {
    /// Selective measurement: with probability weight P_i the projector
    /// |ψ_i⟩⟨ψ_i| is applied.
    Projective { weights: Vec<f64>, states: Vec<DVector<C64>> },
    /// A unitary R.
    Unitary(CMat),
}

impl Preparation {
    /// R = e^{iπJy/2}, taking the Jz ground state to the +x direction.
    pub fn rotation_y(n: usize) -> Result<Self> {
        let ops = collective_ops::<f64>(n)?;
        Ok(Self::Unitary(hermitian_map(&ops.jy, |l| C64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * l))))
    }

    /// Projection onto the Jx eigenstate with the largest eigenvalue.
    pub fn project_plus_x(n: usize) -> Result<Self> {
        let ops = collective_ops::<f64>(n)?;
        let (_, vecs) = crate::qcore::eigh(&ops.jx);
        let top = vecs.column(vecs.ncols() - 1).into_owned();
        Ok(Self::Projective { weights: vec![1.0], states: vec![top] })
    }

    // (P_i, K_i) with ρ ↦ Σ P_i K_i ρ K_i†
    fn kraus(&self, dim: usize) -> Result<Vec<(f64, CMat)>> {
        match self {
            Self::Unitary(r) => {
                if r.nrows() != dim || r.ncols() != dim {
                    return Err(Error::Dimension(format!("preparation unitary must be {dim}x{dim}, got {}x{}", r.nrows(), r.ncols())));
                }
                let dev = (r.adjoint() * r - CMat::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
                if dev > 1e-9 {
                    return Err(Error::InvalidParameter(format!("preparation is not unitary (deviation {dev:e})")));
                }
                Ok(vec![(1.0, r.clone())])
            }
            Self::Projective { weights, states } => {
                if weights.len() != states.len() || weights.is_empty() {
                    return Err(Error::Dimension("projective preparation needs one weight per state".into()));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::InvalidParameter("projector weights must be finite and >= 0".into()));
                }
                states
                    .iter()
                    .zip(weights)
                    .map(|(psi, &w)| {
                        if psi.len() != dim {
                            return Err(Error::Dimension(format!("projector state must have length {dim}, got {}", psi.len())));
                        }
                        let n2 = psi.norm_squared();
                        if !(n2 > 0.0) {
                            return Err(Error::InvalidParameter("zero projector state".into()));
                        }
                        Ok((w, (psi * psi.adjoint()).unscale(n2)))
                    })
                    .collect()
            }
        }
    }
}

/// A pure-dephasing problem. `eps0` is the bias during the thermal
/// preparation, `eps` the bias during the evolution.
#[derive(Clone, Debug)]
pub struct DephasingRun<B: InfluenceFunctions> {
    n: usize,
    eps: f64,
    eps0: f64,
    bath: B,
    ops: CollectiveSpinOps,
    m: Vec<f64>,
    kraus: Vec<(f64, CMat)>,
    // normalised thermal weights over l, without / with the e^{βl²C} shift
    w_uncorr: Vec<f64>,
    w_corr: Vec<f64>,
}

// Normalised weights e^{β·a_l} for exponents a_l, with β = ∞ selecting the
// maximal ones.
fn thermal_weights(beta: f64, a: &[f64]) -> Vec<f64> {
    let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = a.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let w: Vec<f64> = a
        .iter()
        .map(|&x| {
            if beta.is_infinite() {
                if max - x <= 1e-12 * scale { 1.0 } else { 0.0 }
            } else {
                (beta * (x - max)).exp()
            }
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

impl<B: InfluenceFunctions> DephasingRun<B> {
    pub fn new(n: usize, eps: f64, bath: B, prep: Preparation) -> Result<Self> {
        Self::with_prep_bias(n, eps, eps, bath, prep)
    }

    pub fn with_prep_bias(n: usize, eps0: f64, eps: f64, bath: B, prep: Preparation) -> Result<Self> {
        if bath.kind() != BathKind::Bosonic {
            return Err(Error::Unsupported("exact pure dephasing needs a bosonic bath".into()));
        }
        if !(eps.is_finite() && eps0.is_finite()) {
            return Err(Error::InvalidParameter("biases must be finite".into()));
        }
        let ops = collective_ops::<f64>(n)?;
        let kraus = prep.kraus(ops.dim())?;
        let beta = bath.beta();
        let c = bath.c_factor()?;
        let m = ops.m_values();
        let a0: Vec<f64> = m.iter().map(|&l| -eps0 * l).collect();
        let a1: Vec<f64> = m.iter().map(|&l| -eps0 * l + l * l * c).collect();
        let run = Self { n, eps, eps0, bath, m: m.clone(), ops, kraus, w_uncorr: thermal_weights(beta, &a0), w_corr: thermal_weights(beta, &a1) };
        // The preparation must leave a non-zero trace.
        for w in [&run.w_uncorr, &run.w_corr] {
            if !(run.norm(w) > 1e-300) {
                return Err(Error::InvalidParameter("preparation annihilates the thermal state".into()));
            }
        }
        Ok(run)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn bath(&self) -> &B {
        &self.bath
    }

    pub fn ops(&self) -> &CollectiveSpinOps {
        &self.ops
    }

    pub fn m_values(&self) -> &[f64] {
        &self.m
    }

    // Σ_i P_i Σ_l w_l ⟨l|K_i†K_i|l⟩
    fn norm(&self, w: &[f64]) -> f64 {
        let mut z = 0.0;
        for (p, k) in &self.kraus {
            for (l, &wl) in w.iter().enumerate() {
                z += p * wl * k.column(l).norm_squared();
            }
        }
        z
    }

    // Σ_i P_i (K_i|l⟩⟨l|K_i†)_{uv}
    fn prepared_element(&self, a: usize, b: usize, l: usize) -> C64 {
        self.kraus.iter().map(|(p, k)| k[(a, l)] * k[(b, l)].conj() * *p).sum()
    }

    fn index(&self, m: f64) -> Result<usize> {
        let j = self.ops.j;
        let k = j - m;
        let r = k.round();
        if (k - r).abs() > 1e-9 || r < 0.0 || r > 2.0 * j {
            return Err(Error::Domain(format!("{m} is not a Jz eigenvalue for N = {}", self.n)));
        }
        Ok(r as usize)
    }

    /// ρ_S(0) for a product initial state: Θ applied to e^{-βε₀Jz}/Z alone.
    pub fn initial_uncorrelated(&self) -> DensityMatrix {
        self.initial(&self.w_uncorr)
    }

    /// ρ_S(0) from Θ applied to the joint Gibbs state.
    pub fn initial_correlated(&self) -> DensityMatrix {
        self.initial(&self.w_corr)
    }

    fn initial(&self, w: &[f64]) -> DensityMatrix {
        let d = self.ops.dim();
        let z = self.norm(w);
        let m = CMat::from_fn(d, d, |a, b| (0..d).map(|l| self.prepared_element(a, b, l) * w[l]).sum::<C64>() / z);
        DensityMatrix::new_unchecked(crate::qcore::hermitian_part(&m))
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
        }
        Ok(())
    }

    // Influence of the bath on the (u, v) element common to all preparations.
    fn common_factor(&self, u: f64, v: f64, t: f64, gamma: f64, delta: f64) -> C64 {
        let phase = -self.eps * (u - v) * t - delta * (u * u - v * v);
        C64::from_polar((-gamma * (u - v) * (u - v)).exp(), phase)
    }

    /// Element ⟨u|ρ_S(t)|v⟩ for the product initial state.
    pub fn element_uncorrelated(&self, u: f64, v: f64, t: f64) -> Result<C64> {
        Self::check_time(t)?;
        let (a, b) = (self.index(u)?, self.index(v)?);
        let rho0 = self.initial_uncorrelated();
        let (g, d) = (self.bath.gamma(t)?, self.bath.delta(t)?);
        Ok(rho0.matrix()[(a, b)] * self.common_factor(u, v, t, g, d))
    }

    /// Element ⟨u|ρ_S(t)|v⟩ when Θ acts on the joint Gibbs state.
    pub fn element_prepared(&self, u: f64, v: f64, t: f64) -> Result<C64> {
        Self::check_time(t)?;
        let (a, b) = (self.index(u)?, self.index(v)?);
        let (g, d, phi) = (self.bath.gamma(t)?, self.bath.delta(t)?, self.bath.phi(t)?);
        Ok(self.prepared_sum(a, b, u - v, phi) / self.norm(&self.w_corr) * self.common_factor(u, v, t, g, d))
    }

    // Σ_l w_l (Θ|l⟩⟨l|Θ†)_{uv} e^{+2il(u-v)φ}
    fn prepared_sum(&self, a: usize, b: usize, du: f64, phi: f64) -> C64 {
        (0..self.m.len()).map(|l| self.prepared_element(a, b, l) * C64::from_polar(self.w_corr[l], 2.0 * self.m[l] * du * phi)).sum()
    }

    /// Σ_l μ^{(l)}_{uv} e^{-iΦ^{(l)}}: the correlated element divided by its
    /// t = 0 value and the common factor. Fails when the normalising sum is
    /// (numerically) zero, i.e. when ⟨u|ρ_S(0)|v⟩ vanishes.
    pub fn correlation_factor(&self, u: f64, v: f64, t: f64) -> Result<C64> {
        Self::check_time(t)?;
        let (a, b) = (self.index(u)?, self.index(v)?);
        let den = self.prepared_sum(a, b, u - v, 0.0) / self.norm(&self.w_corr);
        if den.norm() < MU_DENOMINATOR_TOL {
            return Err(Error::Numeric(format!("μ normalisation vanishes for (u, v) = ({u}, {v}): |denominator| = {:e}", den.norm())));
        }
        let phi = self.bath.phi(t)?;
        Ok(self.prepared_sum(a, b, u - v, phi) / self.norm(&self.w_corr) / den)
    }

    /// Full reduced state at time t.
    pub fn state(&self, t: f64, correlated: bool) -> Result<DensityMatrix> {
        Self::check_time(t)?;
        let d = self.ops.dim();
        let m = &self.m;
        let (g, dl) = (self.bath.gamma(t)?, self.bath.delta(t)?);
        let out = if correlated {
            let phi = self.bath.phi(t)?;
            let z = self.norm(&self.w_corr);
            CMat::from_fn(d, d, |a, b| self.prepared_sum(a, b, m[a] - m[b], phi) / z * self.common_factor(m[a], m[b], t, g, dl))
        } else {
            let rho0 = self.initial_uncorrelated();
            CMat::from_fn(d, d, |a, b| rho0.matrix()[(a, b)] * self.common_factor(m[a], m[b], t, g, dl))
        };
        Ok(DensityMatrix::new_unchecked(crate::qcore::hermitian_part(&out)))
    }

    /// j_x = 2⟨Jx⟩/N
    pub fn jx(&self, t: f64, correlated: bool) -> Result<f64> {
        let rho = self.state(t, correlated)?;
        Ok(2.0 * rho.expectation(&self.ops.jx)?.re / self.n as f64)
    }

    pub fn jx_curve(&self, t_grid: &[f64], correlated: bool) -> Result<Vec<f64>> {
        t_grid.iter().map(|&t| self.jx(t, correlated)).collect()
    }
}
