//! Second-order time-local master equation for N two-level systems
//! (collective spin j = N/2) that start from the rotated joint thermal
//! state, including the term generated by system–environment correlations
//! in that state:
//!
//!   ρ̇ = i[ρ, H_S] − (i/2)([ρ J_corr, S] − H.c.) + ∫₀^t ([S̄(t,s)ρ, S] C(t−s) + H.c.) ds
//!
//! with S = Jz, H_S0 = ε₀Jz + Δ₀Jx during the preparation, H_S = εJz + ΔJx
//! during the evolution and the preparation pulse R = e^{iπJy/2}.
//!
//! Every operator that appears (S̄, J_corr, the twisted S^R(λ, t)) lies in
//! span{Jx, Jy, Jz}, so all time and λ dependence is carried by 3-vectors
//! obtained from the spin-½ representation; only the final commutators are
//! formed in the (N+1)-dimensional space.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::{Matrix2, Matrix3};
use rayon::prelude::*;

use crate::bath::{BathSpec, ModeBath, QuadratureSettings};
use crate::error::{Error, Result};
use crate::qcore::{collective_ops, eigh, gibbs, hermitian_map, hermitian_part, inspect, pauli, pauli_exponential, StateAudit};
use crate::{CMat, CollectiveSpinOps, DensityMatrix, C64};

pub const DEFAULT_DT: f64 = 0.005;
pub const DEFAULT_LAMBDA_NODES: usize = 64;
/// Largest sub-step of the time-ordered U_S(t), as a fraction of dt.
pub const RAMP_SUBSTEP_FRACTION: f64 = 0.1;
/// |⟨E⟩| above which the bath is rejected; the equation assumes ⟨E⟩ = 0.
pub const COUPLING_MEAN_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Which state multiplies J_corr in the correlation term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CorrForm {
    /// −(i/2)([ρ(t) J_corr, S] − H.c.), the closed master equation.
    #[default]
    Printed,
    /// −(i/2)([ρ̃(t) J_corr, S] − H.c.) with ρ̃(t) = U_S(t) ρ^R_S0 U_S†(t),
    /// i.e. before ρ̃ is replaced by ρ. Same second-order content, but an
    /// inhomogeneous term, so it cannot feed back on the state.
    Unreplaced,
}

/// Exponential bias ramp ε(t) = (ε₀ − ε)e^{−t/t_ε} + ε.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ramp {
    pub t_eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MasterEqSetup {
    pub n: usize,
    pub eps0: f64,
    pub eps: f64,
    pub delta0: f64,
    pub delta: f64,
    pub bath: BathSpec,
    pub include_corr: bool,
    pub ramp: Option<Ramp>,
    pub corr_form: CorrForm,
}

impl MasterEqSetup {
    /// Correlation term switched on, no ramp.
    pub fn new(n: usize, eps0: f64, eps: f64, delta0: f64, delta: f64, bath: BathSpec) -> Result<Self> {
        let s = Self { n, eps0, eps, delta0, delta, bath, include_corr: true, ramp: None, corr_form: CorrForm::Printed };
        s.validate()?;
        Ok(s)
    }

    pub fn with_corr(mut self, include_corr: bool) -> Self {
        self.include_corr = include_corr;
        self
    }

    pub fn with_corr_form(mut self, form: CorrForm) -> Self {
        self.corr_form = form;
        self
    }

    pub fn with_ramp(mut self, t_eps: f64) -> Self {
        self.ramp = Some(Ramp { t_eps });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("need at least one spin".into()));
        }
        for (name, v) in [("eps0", self.eps0), ("eps", self.eps), ("delta0", self.delta0), ("delta", self.delta)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        if let Some(r) = self.ramp {
            if !(r.t_eps > 0.0) || r.t_eps.is_nan() {
                return Err(Error::InvalidParameter(format!("ramp time must be > 0, got {}", r.t_eps)));
            }
        }
        self.bath.validate()
    }

    /// Bias seen by the evolution at time t.
    pub fn bias(&self, t: f64) -> f64 {
        match self.ramp {
            Some(r) if r.t_eps.is_infinite() => self.eps0,
            Some(r) => (self.eps0 - self.eps) * (-t / r.t_eps).exp() + self.eps,
            None => self.eps,
        }
    }

    pub fn beta(&self) -> f64 {
        self.bath.beta
    }
}

/// Coefficients of S^R(λ, t) = U_S(t) R S(λ) R† U_S†(t) = α₁Jx + α₂Jy + α₃Jz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaCoeffs {
    pub a1: C64,
    pub a2: C64,
    pub a3: C64,
}

impl AlphaCoeffs {
    pub fn to_array(&self) -> [C64; 3] {
        [self.a1, self.a2, self.a3]
    }
}

/// J_corr = P Jx + Q Jy + Rc Jz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrOperator {
    pub p: C64,
    pub q: C64,
    pub rc: C64,
}

impl CorrOperator {
    fn from_array(v: [C64; 3]) -> Self {
        Self { p: v[0], q: v[1], rc: v[2] }
    }

    pub fn to_array(&self) -> [C64; 3] {
        [self.p, self.q, self.rc]
    }

    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn operator(&self, ops: &CollectiveSpinOps) -> CMat {
        span_op(ops, &self.to_array())
    }
}

fn span_op(ops: &CollectiveSpinOps, v: &[C64; 3]) -> CMat {
    &ops.jx * v[0] + &ops.jy * v[1] + &ops.jz * v[2]
}

// --- spin-½ representation of su(2) -------------------------------------

// Σ v_i σ_i / 2
fn su2(v: [C64; 3]) -> Matrix2<C64> {
    let s = pauli::<f64>();
    (s[0] * v[0] + s[1] * v[1] + s[2] * v[2]) * C64::new(0.5, 0.0)
}

// inverse of su2 on traceless matrices
fn su2_coeffs(m: &Matrix2<C64>) -> [C64; 3] {
    let s = pauli::<f64>();
    [(s[0] * m).trace(), (s[1] * m).trace(), (s[2] * m).trace()]
}

/// Rotation M with u J_j u† = Σ_i M_ij J_i.
fn adjoint(u: &Matrix2<C64>) -> Matrix3<f64> {
    let s = pauli::<f64>();
    let ud = u.adjoint();
    Matrix3::from_fn(|i, j| 0.5 * (s[i] * u * s[j] * ud).trace().re)
}

fn rotate(m: &Matrix3<f64>, v: &[C64; 3]) -> [C64; 3] {
    let mut out = [ZERO; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = v[0] * m[(i, 0)] + v[1] * m[(i, 1)] + v[2] * m[(i, 2)];
    }
    out
}

/// e^{−it(εσz + Δσx)/2}
fn u_static(eps: f64, delta: f64, t: f64) -> Matrix2<C64> {
    let w = eps.hypot(delta);
    if w == 0.0 {
        return Matrix2::identity();
    }
    pauli_exponential(-0.5 * w * t, [delta / w, 0.0, eps / w]).expect("unit axis")
}

/// R S(λ) R† in the J basis, S(λ) = e^{λH_S0} Jz e^{−λH_S0}.
fn twisted(setup: &MasterEqSetup, lambda: f64) -> [C64; 3] {
    let (e0, d0) = (setup.eps0, setup.delta0);
    let w = e0.hypot(d0);
    let (ch, sh) = ((0.5 * lambda * w).cosh(), (0.5 * lambda * w).sinh());
    let s = pauli::<f64>();
    let gen = if w > 0.0 { s[0] * C64::new(d0 / w, 0.0) + s[2] * C64::new(e0 / w, 0.0) } else { Matrix2::zeros() };
    let fwd = Matrix2::identity() * C64::new(ch, 0.0) + gen * C64::new(sh, 0.0);
    let back = Matrix2::identity() * C64::new(ch, 0.0) - gen * C64::new(sh, 0.0);
    let r = pauli_exponential(std::f64::consts::FRAC_PI_4, [0.0, 1.0, 0.0]).expect("unit axis");
    let x = r * fwd * su2([ZERO, ZERO, C64::new(1.0, 0.0)]) * back * r.adjoint();
    su2_coeffs(&x)
}

/// α(λ, t) from the closed-form ingredient lists
///
///   α₁ = a_x d_x + a_y c_x − a_z b_x
///   α₂ = a_x d_y + a_y c_y − a_z b_y
///   α₃ = a_x d_z + a_y c_z − a_z b_z
///
/// with Δ′² = ε₀² + Δ₀², Δ̃² = ε² + Δ².
pub fn alpha_coeffs(setup: &MasterEqSetup, lambda: f64, t: f64) -> Result<AlphaCoeffs> {
    setup.validate()?;
    check_lambda(setup, lambda)?;
    if !t.is_finite() {
        return Err(Error::Domain(format!("time must be finite, got {t}")));
    }
    if setup.ramp.is_some() {
        return Err(Error::Precondition("closed-form α coefficients assume a constant system Hamiltonian".into()));
    }
    let (e0, d0, e, d) = (setup.eps0, setup.delta0, setup.eps, setup.delta);
    let wp = e0.hypot(d0);
    let wt = e.hypot(d);
    // (cosh λΔ′ − 1)/Δ′², sinh λΔ′/Δ′, (1 − cos Δ̃t)/Δ̃², sin Δ̃t/Δ̃ with their limits
    let (ch1, sh1) = if wp * lambda < 1e-6 {
        (0.5 * lambda * lambda, lambda)
    } else {
        (((lambda * wp).cosh() - 1.0) / (wp * wp), (lambda * wp).sinh() / wp)
    };
    let (c1, s1) = if wt * t.abs() < 1e-6 { (0.5 * t * t, t) } else { ((1.0 - (wt * t).cos()) / (wt * wt), (wt * t).sin() / wt) };
    let cos = (wt * t).cos();
    let re = |x: f64| C64::new(x, 0.0);
    let (ax, ay, az) = (re(-e0 * d0 * ch1), C64::new(0.0, -d0 * sh1), re(1.0 + d0 * d0 * ch1));
    let (bx, by, bz) = (1.0 - e * e * c1, e * s1, e * d * c1);
    let (cx, cy, cz) = (-e * s1, cos, d * s1);
    let (dx, dy, dz) = (e * d * c1, -d * s1, 1.0 - d * d * c1);
    Ok(AlphaCoeffs {
        a1: ax * dx + ay * cx - az * bx,
        a2: ax * dy + ay * cy - az * by,
        a3: ax * dz + ay * cz - az * bz,
    })
}

fn check_lambda(setup: &MasterEqSetup, lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda <= setup.beta()) || !lambda.is_finite() {
        return Err(Error::Domain(format!("λ = {lambda} outside [0, β = {}]", setup.beta())));
    }
    Ok(())
}

fn lambda_rule(beta: f64, nodes: usize) -> Result<Vec<(f64, f64)>> {
    let n = NonZeroUsize::new(nodes).ok_or_else(|| Error::InvalidParameter("need at least one λ node".into()))?;
    let gl = GaussLegendre::new(n);
    Ok(gl.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * beta * (1.0 + x), 0.5 * beta * w)).collect())
}

fn require_finite_beta(setup: &MasterEqSetup) -> Result<()> {
    if setup.beta().is_infinite() {
        return Err(Error::Numeric("the imaginary-time integrals over [0, β] diverge at zero temperature".into()));
    }
    Ok(())
}

fn check_modes(modes: &ModeBath) -> Result<()> {
    let m = modes.coupling_mean();
    if m.abs() > COUPLING_MEAN_TOL {
        return Err(Error::Precondition(format!("bath coupling operator has nonzero mean ⟨E⟩ = {m:e}")));
    }
    Ok(())
}

/// J_corr(t) for a constant H_S, with the continuum E_corr evaluated by
/// quadrature at each of `nodes` Gauss–Legendre λ points.
pub fn j_corr(setup: &MasterEqSetup, t: f64) -> Result<CorrOperator> {
    j_corr_with(setup, t, DEFAULT_LAMBDA_NODES, &QuadratureSettings::default())
}

pub fn j_corr_with(setup: &MasterEqSetup, t: f64, nodes: usize, q: &QuadratureSettings) -> Result<CorrOperator> {
    setup.validate()?;
    if !setup.include_corr {
        return Err(Error::Precondition("correlation term is switched off".into()));
    }
    require_finite_beta(setup)?;
    if setup.ramp.is_some() {
        return Err(Error::Precondition("use a Propagator for ramped Hamiltonians".into()));
    }
    let m = adjoint(&u_static(setup.eps, setup.delta, t));
    let mut acc = [ZERO; 3];
    for (lam, w) in lambda_rule(setup.beta(), nodes)? {
        let e = crate::bath::e_corr_mixed_with(&setup.bath, lam, t, q)?;
        let x = twisted(setup, lam);
        for i in 0..3 {
            acc[i] += x[i] * e * w;
        }
    }
    Ok(CorrOperator::from_array(rotate(&m, &acc)))
}

/// Per-mode λ integrals P_k = ∫ x(λ)A_k(λ)dλ, Q_k = ∫ x(λ)B_k(λ)dλ so that
/// ∫ x(λ) E_corr(λ, t) dλ = Σ_k e^{iω_k t}P_k + e^{−iω_k t}Q_k.
fn mode_lambda_integrals(setup: &MasterEqSetup, modes: &ModeBath, nodes: usize) -> Result<Vec<([C64; 3], [C64; 3])>> {
    let mut pq = vec![([ZERO; 3], [ZERO; 3]); modes.len()];
    for (lam, w) in lambda_rule(setup.beta(), nodes)? {
        let x = twisted(setup, lam);
        for (k, (a, b)) in modes.mixed_weights(lam).into_iter().enumerate() {
            for i in 0..3 {
                pq[k].0[i] += x[i] * (a * w);
                pq[k].1[i] += x[i] * (b * w);
            }
        }
    }
    Ok(pq)
}

/// J_corr(t) for a discrete environment.
pub fn j_corr_modes(setup: &MasterEqSetup, modes: &ModeBath, t: f64, nodes: usize) -> Result<CorrOperator> {
    setup.validate()?;
    require_finite_beta(setup)?;
    if setup.ramp.is_some() {
        return Err(Error::Precondition("use a Propagator for ramped Hamiltonians".into()));
    }
    let pq = mode_lambda_integrals(setup, modes, nodes)?;
    let v = mode_sum(modes.omega(), &pq, t);
    Ok(CorrOperator::from_array(rotate(&adjoint(&u_static(setup.eps, setup.delta, t)), &v)))
}

fn mode_sum(omega: &[f64], pq: &[([C64; 3], [C64; 3])], t: f64) -> [C64; 3] {
    let mut v = [ZERO; 3];
    for (&w, (p, q)) in omega.iter().zip(pq) {
        let (s, c) = (w * t).sin_cos();
        let (ep, em) = (C64::new(c, s), C64::new(c, -s));
        for i in 0..3 {
            v[i] += p[i] * ep + q[i] * em;
        }
    }
    v
}

fn rotation_r(ops: &CollectiveSpinOps) -> CMat {
    hermitian_map(&ops.jy, |l| C64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * l))
}

fn h_s0(setup: &MasterEqSetup, ops: &CollectiveSpinOps) -> CMat {
    &ops.jz * C64::new(setup.eps0, 0.0) + &ops.jx * C64::new(setup.delta0, 0.0)
}

/// R e^{−βH_S0} R† / Z_S0, the state without initial correlations.
pub fn initial_state_uncorrelated(setup: &MasterEqSetup) -> Result<DensityMatrix> {
    setup.validate()?;
    let ops = collective_ops::<f64>(setup.n)?;
    let r = rotation_r(&ops);
    let g = gibbs(&h_s0(setup, &ops), setup.beta())?;
    DensityMatrix::symmetrized(&r * g * r.adjoint())
}

/// The correlated initial state to second order in the coupling, with the
/// continuum discretized into modes.
pub fn initial_state_second_order(setup: &MasterEqSetup) -> Result<DensityMatrix> {
    setup.validate()?;
    require_finite_beta(setup)?;
    let modes = ModeBath::from_spec(&setup.bath, setup.beta(), &QuadratureSettings::default())?;
    initial_state_with_modes(setup, &modes, DEFAULT_LAMBDA_NODES)
}

/// R e^{−βH_S0}[1 + ∫₀^β dλ ∫₀^λ dλ′ S(λ)S(λ′)K(λ−λ′)] R†, Hermitian part,
/// normalized; K(x) = ⟨E(x)E(0)⟩ is the imaginary-time bath kernel.
pub fn initial_state_with_modes(setup: &MasterEqSetup, modes: &ModeBath, nodes: usize) -> Result<DensityMatrix> {
    setup.validate()?;
    require_finite_beta(setup)?;
    check_modes(modes)?;
    let beta = setup.beta();
    let ops = collective_ops::<f64>(setup.n)?;
    let (vals, vecs) = eigh(&h_s0(setup, &ops));
    let e: Vec<f64> = vals.iter().map(|v| v - vals[0]).collect();
    let d = e.len();
    let s = vecs.adjoint() * &ops.jz * &vecs;
    let rule = lambda_rule(1.0, nodes)?;
    // Σ_b S_ab S_bc ∫∫ e^{−(β−λ)E_a − (λ−λ′)E_b − λ′E_c} K(λ−λ′)
    let mut corr = CMat::zeros(d, d);
    for &(u, wu) in &rule {
        let lam = beta * u;
        for &(v, wv) in &rule {
            let lp = lam * v;
            let w = beta * wu * lam * wv * modes.imaginary_time_kernel(lam - lp)?;
            for a in 0..d {
                let fa = (-(beta - lam) * e[a]).exp();
                for b in 0..d {
                    let fb = fa * (-(lam - lp) * e[b]).exp() * w;
                    let sab = s[(a, b)] * fb;
                    for c in 0..d {
                        corr[(a, c)] += sab * s[(b, c)] * (-lp * e[c]).exp();
                    }
                }
            }
        }
    }
    for a in 0..d {
        corr[(a, a)] += C64::new((-beta * e[a]).exp(), 0.0);
    }
    let r = rotation_r(&ops);
    let m = &r * &vecs * corr * vecs.adjoint() * r.adjoint();
    let m = hermitian_part(&m);
    let tr = m.trace().re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Numeric(format!("second-order initial state has trace {tr}")));
    }
    DensityMatrix::new(m.unscale(tr))
}

/// The three pieces of the generator at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct RhsParts {
    pub unitary: CMat,
    pub memory: CMat,
    pub correlation: CMat,
}

impl RhsParts {
    /// (unitary + memory) + correlation
    pub fn total(&self) -> CMat {
        &(&self.unitary + &self.memory) + &self.correlation
    }
}

/// What to do when a propagated state leaves the admissible set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InvariantPolicy {
    /// Abort with [`Error::Propagation`].
    #[default]
    Strict,
    /// Keep going; violations are only recorded in the audit and the
    /// offending matrices are stored as they are.
    Report,
}

/// States on the dt grid plus diagnostics.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Largest max-norm difference between one dt step and two dt/2 steps.
    pub max_step_error: f64,
    pub audit: StateAudit,
    n: usize,
}

impl Trajectory {
    /// j_x = 2⟨Jx⟩/N
    pub fn jx(&self) -> Vec<f64> {
        let ops = collective_ops::<f64>(self.n).expect("validated at setup");
        self.states.iter().map(|r| 2.0 * r.expectation(&ops.jx).expect("dims match").re / self.n as f64).collect()
    }

    /// j_x^(2) = 4⟨Jx²⟩/N²
    pub fn jx2(&self) -> Vec<f64> {
        let ops = collective_ops::<f64>(self.n).expect("validated at setup");
        let jx2 = &ops.jx * &ops.jx;
        let n2 = (self.n * self.n) as f64;
        self.states.iter().map(|r| 4.0 * r.expectation(&jx2).expect("dims match").re / n2).collect()
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Fixed-step RK4 integrator for one setup. All bath-dependent quantities
/// are tabulated on a grid of spacing dt/4, which contains every RK4 stage
/// time of both the dt step and the two dt/2 steps used for error monitoring.
pub struct Propagator {
    setup: MasterEqSetup,
    ops: CollectiveSpinOps,
    modes: ModeBath,
    dt: f64,
    steps: usize,
    h: f64,
    kappa: Vec<[C64; 3]>,
    corr: Vec<[C64; 3]>,
    // ρ̃ on the grid, only for CorrForm::Unreplaced
    reference: Vec<CMat>,
    lambda_nodes: usize,
}

impl Propagator {
    /// Continuum bath discretized for times up to `t_end`.
    pub fn new(setup: &MasterEqSetup, t_end: f64, dt: f64) -> Result<Self> {
        setup.validate()?;
        let modes = ModeBath::from_spec(&setup.bath, t_end, &QuadratureSettings::default())?;
        Self::with_modes(setup, modes, t_end, dt)
    }

    pub fn with_modes(setup: &MasterEqSetup, modes: ModeBath, t_end: f64, dt: f64) -> Result<Self> {
        Self::with_options(setup, modes, t_end, dt, DEFAULT_LAMBDA_NODES)
    }

    pub fn with_options(setup: &MasterEqSetup, modes: ModeBath, t_end: f64, dt: f64, lambda_nodes: usize) -> Result<Self> {
        setup.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be finite and > 0, got {dt}")));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be finite and >= 0, got {t_end}")));
        }
        let steps = (t_end / dt).round();
        if (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
            return Err(Error::InvalidParameter(format!("t_end = {t_end} is not a multiple of dt = {dt}")));
        }
        if modes.kind() != setup.bath.kind || modes.beta() != setup.beta() {
            return Err(Error::InvalidParameter("mode bath does not match the setup's bath kind and temperature".into()));
        }
        check_modes(&modes)?;
        if setup.include_corr {
            require_finite_beta(setup)?;
        }
        let steps = steps as usize;
        let h = 0.25 * dt;
        let len = 4 * steps + 1;
        let rot = rotations(setup, h, len, dt);
        let cts: Vec<C64> = (0..len).into_par_iter().map(|k| modes.c_ts(k as f64 * h)).collect();
        // S̄(t,s) = U(t)U(s)† S U(s)U(t)† has coefficients M(t) M(s)ᵀ e_z.
        let back: Vec<[f64; 3]> = rot.iter().map(|m| [m[(2, 0)], m[(2, 1)], m[(2, 2)]]).collect();
        let kappa: Vec<[C64; 3]> = (0..len)
            .into_par_iter()
            .map(|n| {
                let mut acc = [ZERO; 3];
                for j in 0..=n {
                    let w = if j == 0 || j == n { 0.5 * h } else { h };
                    let c = cts[n - j] * w;
                    for i in 0..3 {
                        acc[i] += c * back[j][i];
                    }
                }
                if n == 0 {
                    acc = [ZERO; 3];
                }
                rotate(&rot[n], &acc)
            })
            .collect();
        let corr = if setup.include_corr {
            let pq = mode_lambda_integrals(setup, &modes, lambda_nodes)?;
            let omega = modes.omega();
            (0..len).into_par_iter().map(|n| rotate(&rot[n], &mode_sum(omega, &pq, n as f64 * h))).collect()
        } else {
            vec![[ZERO; 3]; len]
        };
        let ops = collective_ops(setup.n)?;
        let reference = if setup.include_corr && setup.corr_form == CorrForm::Unreplaced {
            reference_states(setup, &ops, h, len, dt)?
        } else {
            Vec::new()
        };
        Ok(Self { setup: setup.clone(), ops, modes, dt, steps, h, kappa, corr, reference, lambda_nodes })
    }

    pub fn setup(&self) -> &MasterEqSetup {
        &self.setup
    }

    pub fn modes(&self) -> &ModeBath {
        &self.modes
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// J_corr at a grid time.
    pub fn j_corr(&self, t: f64) -> Result<CorrOperator> {
        Ok(CorrOperator::from_array(self.corr[self.grid_index(t)?]))
    }

    fn grid_index(&self, t: f64) -> Result<usize> {
        let k = (t / self.h).round();
        if !(k >= 0.0) || (k * self.h - t).abs() > 1e-9 * t.abs().max(1.0) || k as usize >= self.kappa.len() {
            return Err(Error::Domain(format!("t = {t} is not on the tabulated grid (spacing {}, end {})", self.h, self.t_end())));
        }
        Ok(k as usize)
    }

    pub fn initial_state(&self) -> Result<DensityMatrix> {
        if self.setup.include_corr {
            initial_state_with_modes(&self.setup, &self.modes, self.lambda_nodes)
        } else {
            initial_state_uncorrelated(&self.setup)
        }
    }

    pub fn rhs_parts(&self, t: f64, rho: &CMat) -> Result<RhsParts> {
        let d = self.ops.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::Dimension(format!("state must be {d}x{d}, got {}x{}", rho.nrows(), rho.ncols())));
        }
        Ok(self.parts(self.grid_index(t)?, rho))
    }

    pub fn rhs(&self, t: f64, rho: &CMat) -> Result<CMat> {
        Ok(self.rhs_parts(t, rho)?.total())
    }

    fn parts(&self, k: usize, rho: &CMat) -> RhsParts {
        let ops = &self.ops;
        let t = k as f64 * self.h;
        let hs = &ops.jz * C64::new(self.setup.bias(t), 0.0) + &ops.jx * C64::new(self.setup.delta, 0.0);
        let unitary = (rho * &hs - &hs * rho) * C64::new(0.0, 1.0);
        let s = &ops.jz;
        let a = span_op(ops, &self.kappa[k]) * rho;
        let x = &a * s - s * &a;
        let memory = &x + x.adjoint();
        let correlation = if self.setup.include_corr {
            let state = if self.reference.is_empty() { rho } else { &self.reference[k] };
            let b = state * span_op(ops, &self.corr[k]);
            let y = &b * s - s * &b;
            (&y - y.adjoint()) * C64::new(0.0, -0.5)
        } else {
            CMat::zeros(rho.nrows(), rho.ncols())
        };
        RhsParts { unitary, memory, correlation }
    }

    fn rk4(&self, k: usize, y: &CMat, m: usize, k1: &CMat) -> CMat {
        let dt = m as f64 * self.h;
        let f = |kk: usize, z: &CMat| self.parts(kk, z).total();
        let k2 = f(k + m / 2, &(y + k1 * C64::new(0.5 * dt, 0.0)));
        let k3 = f(k + m / 2, &(y + &k2 * C64::new(0.5 * dt, 0.0)));
        let k4 = f(k + m, &(y + &k3 * C64::new(dt, 0.0)));
        y + (k1 + &k2 * C64::new(2.0, 0.0) + &k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
    }

    pub fn run(&self) -> Result<Trajectory> {
        self.run_with(InvariantPolicy::Strict)
    }

    pub fn run_with(&self, policy: InvariantPolicy) -> Result<Trajectory> {
        let rho0 = self.initial_state()?;
        let mut audit = StateAudit::default();
        audit.record(rho0.matrix());
        let mut y = rho0.matrix().clone();
        let mut times = vec![0.0];
        let mut states = vec![rho0];
        let mut max_err: f64 = 0.0;
        for step in 0..self.steps {
            let k = 4 * step;
            let k1 = self.parts(k, &y).total();
            let full = self.rk4(k, &y, 4, &k1);
            let mid = self.rk4(k, &y, 2, &k1);
            let k1m = self.parts(k + 2, &mid).total();
            let half = self.rk4(k + 2, &mid, 2, &k1m);
            let err = (&full - &half).iter().map(|z| z.norm()).fold(0.0, f64::max);
            max_err = max_err.max(err);
            y = half;
            let t = (step + 1) as f64 * self.dt;
            let r = inspect(&y)?;
            audit.record(&y);
            if !err.is_finite() || (policy == InvariantPolicy::Strict && !r.is_valid()) {
                return Err(Error::Propagation {
                    t,
                    reason: format!(
                        "state left the admissible set (trace error {:e}, hermiticity error {:e}, min eigenvalue {:e})",
                        r.trace_error, r.hermiticity_error, r.min_eigenvalue
                    ),
                });
            }
            times.push(t);
            states.push(DensityMatrix::new_unchecked(y.clone()));
        }
        Ok(Trajectory { times, states, max_step_error: max_err, audit, n: self.setup.n })
    }
}

// Adjoint rotations M(t_k) of U_S(t_k) on the grid t_k = k h.
fn rotations(setup: &MasterEqSetup, h: f64, len: usize, dt: f64) -> Vec<Matrix3<f64>> {
    match setup.ramp {
        None => (0..len).map(|k| adjoint(&u_static(setup.eps, setup.delta, k as f64 * h))).collect(),
        Some(_) => {
            // time-ordered midpoint exponentials, sub-step ≤ RAMP_SUBSTEP_FRACTION·dt
            let sub = (h / (RAMP_SUBSTEP_FRACTION * dt)).ceil().max(1.0) as usize;
            let delta_t = h / sub as f64;
            let mut u: Matrix2<C64> = Matrix2::identity();
            let mut out = Vec::with_capacity(len);
            out.push(adjoint(&u));
            for k in 1..len {
                for j in 0..sub {
                    let tm = (k - 1) as f64 * h + (j as f64 + 0.5) * delta_t;
                    u = u_static(setup.bias(tm), setup.delta, delta_t) * u;
                }
                out.push(adjoint(&u));
            }
            out
        }
    }
}

// U_S(t_k) ρ^R_S0 U_S†(t_k) on the grid.
fn reference_states(setup: &MasterEqSetup, ops: &CollectiveSpinOps, h: f64, len: usize, dt: f64) -> Result<Vec<CMat>> {
    let rho0 = initial_state_uncorrelated(setup)?.into_matrix();
    let hs = |eps: f64| &ops.jz * C64::new(eps, 0.0) + &ops.jx * C64::new(setup.delta, 0.0);
    match setup.ramp {
        None => {
            let (vals, vecs) = eigh(&hs(setup.eps));
            let r = vecs.adjoint() * &rho0 * &vecs;
            Ok((0..len)
                .map(|k| {
                    let t = k as f64 * h;
                    let m = CMat::from_fn(r.nrows(), r.ncols(), |a, b| r[(a, b)] * C64::from_polar(1.0, -(vals[a] - vals[b]) * t));
                    &vecs * m * vecs.adjoint()
                })
                .collect())
        }
        Some(_) => {
            let sub = (h / (RAMP_SUBSTEP_FRACTION * dt)).ceil().max(1.0) as usize;
            let delta_t = h / sub as f64;
            let mut rho = rho0;
            let mut out = Vec::with_capacity(len);
            out.push(rho.clone());
            for k in 1..len {
                for j in 0..sub {
                    let tm = (k - 1) as f64 * h + (j as f64 + 0.5) * delta_t;
                    let u = crate::qcore::unitary(&hs(setup.bias(tm)), delta_t);
                    rho = &u * rho * u.adjoint();
                }
                out.push(rho.clone());
            }
            Ok(out)
        }
    }
}

/// Runs the master equation from t = 0 to `t_end` with step `dt`.
pub fn propagate(setup: &MasterEqSetup, t_end: f64, dt: f64) -> Result<Trajectory> {
    Propagator::new(setup, t_end, dt)?.run()
}

pub fn propagate_with(setup: &MasterEqSetup, t_end: f64, dt: f64, policy: InvariantPolicy) -> Result<Trajectory> {
    Propagator::new(setup, t_end, dt)?.run_with(policy)
}

/// As [`propagate`], for a setup carrying a bias ramp.
pub fn propagate_ramped(setup: &MasterEqSetup, t_end: f64, dt: f64) -> Result<Trajectory> {
    if setup.ramp.is_none() {
        return Err(Error::Precondition("propagate_ramped needs a ramp".into()));
    }
    propagate(setup, t_end, dt)
}

/// max_t |j_x^corr(t) − j_x^nocorr(t)| on a common grid.
pub fn correlation_effect(setup: &MasterEqSetup, t_end: f64, dt: f64, policy: InvariantPolicy) -> Result<f64> {
    let with = propagate_with(&setup.clone().with_corr(true), t_end, dt, policy)?.jx();
    let without = propagate_with(&setup.clone().with_corr(false), t_end, dt, policy)?.jx();
    Ok(with.iter().zip(&without).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}
