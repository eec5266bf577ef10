//! Counting statistics of the energy a driven two-level system exchanges
//! with a bosonic bath.
//!
//! H_S(t) = (ϵ/2)σz + Δ cos(ω_l t) σx, coupled through σz ⊗ Σ g(b† + b).
//! In the frame rotating at ω_l and under the rotating-wave approximation
//! the system sees H' = (ε/2)σz + (Δ/2)σx with ε = ϵ − ω_l. A secular
//! Lindblad equation in the eigenbasis |±⟩ of H', with counting phases
//! e^{±iηζ} on the emission/absorption jumps, propagates ϱ(ζ, t); the
//! characteristic function is Φ(ζ) = Tr{e^{iζH_tr} ϱ(ζ, t)} and the work
//! distribution its inverse Fourier transform on multiples of η.
//!
//! Basis: |e⟩ = (1, 0) and |g⟩ = (0, 1), σz|e⟩ = |e⟩.

use nalgebra::{Matrix2, Matrix4, Vector2};
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::bath::{self, bose, BathKind, BathSpec, QuadratureSettings};
use crate::error::{Error, Result};
use crate::qcore::{self, StateAudit};
use crate::{CMat, DensityMatrix, C64};

type M2 = Matrix2<C64>;

pub const DEFAULT_DT: f64 = 0.005;
pub const DEFAULT_N_MAX: usize = 8;
pub const MIN_N_MAX: usize = 4;
/// Allowed |Σ P(n) − 1| before the distribution is rejected.
pub const NORMALIZATION_TOL: f64 = 1e-6;
/// Negative probabilities down to this are ordinary Fourier leakage.
pub const LEAKAGE_TOL: f64 = 1e-8;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveParams {
    /// Bare bias ϵ.
    pub eps_raw: f64,
    pub omega_l: f64,
    /// Drive amplitude Δ.
    pub delta_drive: f64,
    pub bath: BathSpec,
}

impl DriveParams {
    pub fn new(eps_raw: f64, omega_l: f64, delta_drive: f64, bath: BathSpec) -> Result<Self> {
        let p = Self { eps_raw, omega_l, delta_drive, bath };
        p.validate()?;
        Ok(p)
    }

    /// ε = ϵ − ω_l
    pub fn detuning(&self) -> f64 {
        self.eps_raw - self.omega_l
    }

    pub fn eta(&self) -> f64 {
        self.detuning().hypot(self.delta_drive)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("bias", self.eps_raw), ("drive frequency", self.omega_l), ("drive amplitude", self.delta_drive)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        if self.bath.kind != BathKind::Bosonic {
            return Err(Error::Unsupported("counting statistics need a bosonic bath".into()));
        }
        self.bath.validate()?;
        if !(self.eta() > 0.0) {
            return Err(Error::InvalidParameter("degenerate drive: detuning and drive amplitude both zero".into()));
        }
        Ok(())
    }
}

/// Hamiltonian whose exponential closes the two-point measurement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceFrame {
    /// (ϵ/2)σz + (Δ/2)σx, with the bare bias.
    #[default]
    Rwa,
    /// (ε/2)σz + (Δ/2)σx, with the detuning.
    Detuned,
    /// No system factor: Φ = Tr ϱ(ζ, t) counts only the quanta exchanged
    /// with the bath. With the system factor and a static drive the total
    /// energy is conserved after the quench, so bath exchanges cancel.
    BathOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FcsOptions {
    /// Largest RK4 step; the actual step divides t evenly.
    pub dt: f64,
    pub trace_frame: TraceFrame,
    pub quad: QuadratureSettings,
}

impl Default for FcsOptions {
    fn default() -> Self {
        Self { dt: DEFAULT_DT, trace_frame: TraceFrame::default(), quad: QuadratureSettings::default() }
    }
}

impl FcsOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be > 0, got {}", self.dt)));
        }
        self.quad.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DressedBasis {
    pub eta: f64,
    /// sin θ = Δ/η, cos θ = ε/η.
    pub theta: f64,
    pub plus: Vector2<C64>,
    pub minus: Vector2<C64>,
    /// (ε/η)(|+⟩⟨+| − |−⟩⟨−|)
    pub s0: M2,
    /// (Δ/η)|−⟩⟨+|
    pub s_eta: M2,
}

impl DressedBasis {
    /// (η/2)(|+⟩⟨+| − |−⟩⟨−|)
    pub fn hamiltonian(&self) -> M2 {
        (self.plus * self.plus.adjoint() - self.minus * self.minus.adjoint()) * c(0.5 * self.eta)
    }

    /// (⟨+|ρ|+⟩, ⟨−|ρ|−⟩)
    pub fn populations(&self, rho: &M2) -> (f64, f64) {
        ((self.plus.adjoint() * rho * self.plus)[0].re, (self.minus.adjoint() * rho * self.minus)[0].re)
    }
}

pub fn dressed_basis(params: &DriveParams) -> Result<DressedBasis> {
    params.validate()?;
    let (eps, delta) = (params.detuning(), params.delta_drive);
    let eta = params.eta();
    let theta = delta.atan2(eps);
    let (sh, ch) = (0.5 * theta).sin_cos();
    let plus = Vector2::new(c(ch), c(sh));
    let minus = Vector2::new(c(-sh), c(ch));
    let s0 = (plus * plus.adjoint() - minus * minus.adjoint()) * c(eps / eta);
    let s_eta = minus * plus.adjoint() * c(delta / eta);
    Ok(DressedBasis { eta, theta, plus, minus, s0, s_eta })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RateSet {
    pub gamma0: f64,
    pub gamma_eta: f64,
    pub n_eta: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

pub fn rates(params: &DriveParams) -> Result<RateSet> {
    rates_with(params, &QuadratureSettings::default())
}

/// Γ₀ = 2π lim_{ω→0} J(ω)(1 + 2n(ω)), Γ(η) = 2πJ(η), N(η) = n(η), and the
/// shifts Λ₀ = ∫J/ω, Λ₁ = P∫ηJ(1+2n)/(η²−ω²), Λ₂ = P∫ωJ/(η²−ω²).
pub fn rates_with(params: &DriveParams, q: &QuadratureSettings) -> Result<RateSet> {
    params.validate()?;
    q.validate()?;
    let b = &params.bath;
    let eta = params.eta();
    let tau = 2.0 * std::f64::consts::PI;
    // J(ω)(1+2n) → 2Gω^{s−1}ω_c^{1−s}/β as ω → 0
    let gamma0 = if b.s < 1.0 {
        return Err(Error::Unsupported(format!("dephasing rate diverges for sub-Ohmic s = {}", b.s)));
    } else if b.beta.is_infinite() || b.s > 1.0 {
        0.0
    } else {
        2.0 * tau * b.coupling / b.beta
    };
    if b.coupling == 0.0 {
        return Ok(RateSet { gamma0, n_eta: bose(b.beta, eta), ..Default::default() });
    }
    let upper = q.omega_max_factor * b.omega_c;
    let coth = |w: f64| if b.beta.is_infinite() { 1.0 } else { 1.0 / (0.5 * b.beta * w).tanh() };
    let lambda1 = bath::pv_integral(|w| eta * b.j(w) * coth(w) / ((eta - w) * (eta + w)), eta, upper, q)?;
    let lambda2 = bath::pv_integral(|w| w * b.j(w) / ((eta - w) * (eta + w)), eta, upper, q)?;
    Ok(RateSet {
        gamma0,
        gamma_eta: tau * b.j(eta),
        n_eta: bose(b.beta, eta),
        lambda0: bath::c_factor(b)?,
        lambda1,
        lambda2,
    })
}

/// ζ-dependent secular generator, written as
/// ρ̇ = Kρ + ρK† + Σ_k γ_k e^{iφ_k ζ} L_k ρ L_k†.
#[derive(Clone, Debug)]
pub struct Generator {
    basis: DressedBasis,
    rates: RateSet,
    h_shifted: M2,
    k: M2,
    jumps: [(f64, f64, M2); 3],
}

impl Generator {
    pub fn new(params: &DriveParams, q: &QuadratureSettings) -> Result<Self> {
        let basis = dressed_basis(params)?;
        let r = rates_with(params, q)?;
        let (s0, se) = (basis.s0, basis.s_eta);
        let sd = se.adjoint();
        let (up, down) = (sd * se, se * sd);
        let h_shifted = basis.hamiltonian() - s0 * s0 * c(r.lambda0) + (up - down) * c(r.lambda1) + (up + down) * c(r.lambda2);
        let emit = r.gamma_eta * (1.0 + r.n_eta);
        let absorb = r.gamma_eta * r.n_eta;
        let jumps = [(r.gamma0, 0.0, s0), (emit, basis.eta, se), (absorb, -basis.eta, sd)];
        let mut k = -h_shifted * I;
        for (g, _, l) in &jumps {
            k -= l.adjoint() * l * c(0.5 * g);
        }
        Ok(Self { basis, rates: r, h_shifted, k, jumps })
    }

    pub fn basis(&self) -> &DressedBasis {
        &self.basis
    }

    pub fn rates(&self) -> &RateSet {
        &self.rates
    }

    /// H' − Λ₀S₀² + Λ₁(S†S − SS†) + Λ₂(S†S + SS†)
    pub fn shifted_hamiltonian(&self) -> &M2 {
        &self.h_shifted
    }

    pub fn rhs(&self, zeta: f64, rho: &M2) -> M2 {
        let mut out = self.k * rho + rho * self.k.adjoint();
        for (g, w, l) in &self.jumps {
            if *g != 0.0 {
                out += l * rho * l.adjoint() * C64::from_polar(*g, w * zeta);
            }
        }
        out
    }

    /// Column-stacked superoperator.
    pub fn liouvillian(&self, zeta: f64) -> Matrix4<C64> {
        let mut l = Matrix4::zeros();
        for col in 0..4 {
            let mut e = M2::zeros();
            e[(col % 2, col / 2)] = c(1.0);
            let r = self.rhs(zeta, &e);
            for row in 0..4 {
                l[(row, col)] = r[(row % 2, row / 2)];
            }
        }
        l
    }

    /// Null vector of the ζ = 0 Liouvillian, normalized to unit trace.
    pub fn steady_state(&self) -> Result<DensityMatrix> {
        let svd = self.liouvillian(0.0).svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::Numeric("SVD of the Liouvillian failed".into()))?;
        let (imin, smin) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &s)| if s < a.1 { (i, s) } else { a });
        let scale = svd.singular_values.max().max(1e-300);
        if smin > 1e-8 * scale {
            return Err(Error::Numeric(format!("Liouvillian has no null vector (smallest singular value {smin:e})")));
        }
        let v: Vec<C64> = v_t.row(imin).iter().map(|z| z.conj()).collect();
        let m = CMat::from_fn(2, 2, |i, j| v[i + 2 * j]);
        let tr = m[(0, 0)] + m[(1, 1)];
        if tr.norm() < 1e-12 {
            return Err(Error::Numeric("steady state has vanishing trace".into()));
        }
        DensityMatrix::new(qcore::hermitian_part(&m.map(|z| z / tr)))
    }
}

/// ζ-resolved generator applied to a 2×2 operator.
pub fn cf_rhs(params: &DriveParams, zeta: f64, rho: &CMat) -> Result<CMat> {
    if rho.nrows() != 2 || rho.ncols() != 2 {
        return Err(Error::Dimension(format!("expected a 2x2 operator, got {}x{}", rho.nrows(), rho.ncols())));
    }
    let g = Generator::new(params, &QuadratureSettings::default())?;
    let out = g.rhs(zeta, &to_m2(rho));
    Ok(from_m2(&out))
}

fn to_m2(m: &CMat) -> M2 {
    M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn from_m2(m: &M2) -> CMat {
    CMat::from_fn(2, 2, |i, j| m[(i, j)])
}

// e^{iζ h} for a real-symmetric 2×2 h = a σz + b σx + d·1
fn exp_i(h: &M2, zeta: f64) -> M2 {
    let d = 0.5 * (h[(0, 0)] + h[(1, 1)]).re;
    let a = 0.5 * (h[(0, 0)] - h[(1, 1)]).re;
    let b = h[(0, 1)].re;
    let r = a.hypot(b);
    let (s, co) = (zeta * r).sin_cos();
    let sinc = if r == 0.0 { zeta } else { s / r };
    let n = M2::new(c(a), c(b), c(b), c(-a));
    (M2::identity() * c(co) + n * (I * sinc)) * C64::from_polar(1.0, zeta * d)
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub rho: M2,
    pub max_step_error: f64,
    /// Populated for ζ = 0, where ϱ is a density matrix.
    pub audit: Option<StateAudit>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkDistribution {
    pub n_values: Vec<i64>,
    pub probs: Vec<f64>,
    /// Energy per count, η.
    pub quantum: f64,
    /// Largest |Im P(n)| before real parts were taken.
    pub leakage: f64,
    /// Negative entries set to zero before renormalizing.
    pub clamped: usize,
    /// Most negative Re P(n); below −1e-8 the leakage exceeds the
    /// Fourier tolerance and points at sub-quantum offsets in Φ.
    pub min_raw: f64,
    /// Σ Re P(n) before clamping.
    pub raw_sum: f64,
    pub audit: StateAudit,
}

impl WorkDistribution {
    pub fn within_leakage_tolerance(&self) -> bool {
        self.min_raw >= -LEAKAGE_TOL
    }

    pub fn prob(&self, n: i64) -> f64 {
        self.n_values.iter().position(|&m| m == n).map_or(0.0, |i| self.probs[i])
    }

    /// Mean exchanged energy Σ n η P(n).
    pub fn mean_energy(&self) -> f64 {
        self.n_values.iter().zip(&self.probs).map(|(&n, &p)| n as f64 * self.quantum * p).sum()
    }
}

/// Two-point-measurement run: first measurement of H(0) on ρ₀, secular
/// propagation, closing trace with e^{iζH_tr}.
#[derive(Clone, Debug)]
pub struct CountingRun {
    params: DriveParams,
    options: FcsOptions,
    generator: Generator,
    rho_bar: M2,
    h_s0: M2,
    h_trace: M2,
}

impl CountingRun {
    /// `rho0 = None` starts from the ground state |g⟩⟨g|.
    pub fn new(params: &DriveParams, rho0: Option<&DensityMatrix>, options: FcsOptions) -> Result<Self> {
        options.validate()?;
        let generator = Generator::new(params, &options.quad)?;
        let rho0 = match rho0 {
            Some(r) => {
                if r.dim() != 2 {
                    return Err(Error::Dimension(format!("initial state must be 2x2, got dimension {}", r.dim())));
                }
                to_m2(r.matrix())
            }
            None => M2::new(c(0.0), c(0.0), c(0.0), c(1.0)),
        };
        // first measurement of H_S0 = (ϵ/2)σz dephases in the σz basis
        let rho_bar = if params.eps_raw == 0.0 { rho0 } else { M2::new(rho0[(0, 0)], c(0.0), c(0.0), rho0[(1, 1)]) };
        let sz = M2::new(c(1.0), c(0.0), c(0.0), c(-1.0));
        let sx = M2::new(c(0.0), c(1.0), c(1.0), c(0.0));
        let h_s0 = sz * c(0.5 * params.eps_raw);
        let h_trace = match options.trace_frame {
            TraceFrame::Rwa => sz * c(0.5 * params.eps_raw) + sx * c(0.5 * params.delta_drive),
            TraceFrame::Detuned => sz * c(0.5 * params.detuning()) + sx * c(0.5 * params.delta_drive),
            TraceFrame::BathOnly => M2::zeros(),
        };
        Ok(Self { params: *params, options, generator, rho_bar, h_s0, h_trace })
    }

    pub fn params(&self) -> &DriveParams {
        &self.params
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// e^{−iζH_S0/2} ρ̄₀ e^{−iζH_S0/2}; just ρ̄₀ when counting bath quanta.
    pub fn initial(&self, zeta: f64) -> M2 {
        if self.options.trace_frame == TraceFrame::BathOnly {
            return self.rho_bar;
        }
        let u = exp_i(&self.h_s0, -0.5 * zeta);
        u * self.rho_bar * u
    }

    /// RK4 with uniform steps of at most dt; each step is compared with two
    /// half steps and the half-step result is kept.
    pub fn evolve(&self, zeta: f64, t: f64) -> Result<Evolution> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
        }
        if !zeta.is_finite() {
            return Err(Error::InvalidParameter(format!("counting field must be finite, got {zeta}")));
        }
        let g = &self.generator;
        let steps = (t / self.options.dt).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let rk4 = |y: &M2, h: f64| {
            let k1 = g.rhs(zeta, y);
            let k2 = g.rhs(zeta, &(y + k1 * c(0.5 * h)));
            let k3 = g.rhs(zeta, &(y + k2 * c(0.5 * h)));
            let k4 = g.rhs(zeta, &(y + k3 * c(h)));
            y + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0)
        };
        let mut rho = self.initial(zeta);
        let mut audit = (zeta == 0.0).then(StateAudit::default);
        let mut max_err: f64 = 0.0;
        if let Some(a) = audit.as_mut() {
            self.check(a, &rho, 0.0)?;
        }
        if t > 0.0 {
            for step in 0..steps {
                let full = rk4(&rho, h);
                let half = rk4(&rk4(&rho, 0.5 * h), 0.5 * h);
                max_err = max_err.max((full - half).iter().map(|z| z.norm()).fold(0.0, f64::max));
                rho = half;
                if let Some(a) = audit.as_mut() {
                    self.check(a, &rho, (step + 1) as f64 * h)?;
                }
            }
        }
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric(format!("non-finite state at ζ = {zeta}, t = {t}")));
        }
        Ok(Evolution { rho, max_step_error: max_err, audit })
    }

    fn check(&self, audit: &mut StateAudit, rho: &M2, t: f64) -> Result<()> {
        let m = from_m2(rho);
        audit.record(&m);
        let report = qcore::inspect(&m)?;
        if !report.is_valid() {
            return Err(Error::Propagation { t, reason: format!("state invariants violated: {report:?}") });
        }
        Ok(())
    }

    /// Reduced state at ζ = 0.
    pub fn state(&self, t: f64) -> Result<DensityMatrix> {
        DensityMatrix::new(from_m2(&self.evolve(0.0, t)?.rho))
    }

    pub fn characteristic_function(&self, zeta: f64, t: f64) -> Result<C64> {
        let e = self.evolve(zeta, t)?;
        Ok(self.close(zeta, &e.rho))
    }

    fn close(&self, zeta: f64, rho: &M2) -> C64 {
        (exp_i(&self.h_trace, zeta) * rho).trace()
    }

    pub fn work_distribution(&self, t: f64, n_max: usize) -> Result<WorkDistribution> {
        self.work_distribution_offset(t, n_max, 0.0)
    }

    /// P(n) = (1/M) Σ_j Φ(ζ_j) e^{−inηζ_j} on ζ_j = ζ_off + 2πj/(ηM),
    /// M = 2n_max + 1.
    pub fn work_distribution_offset(&self, t: f64, n_max: usize, zeta_offset: f64) -> Result<WorkDistribution> {
        if n_max < MIN_N_MAX {
            return Err(Error::InvalidParameter(format!("n_max must be >= {MIN_N_MAX}, got {n_max}")));
        }
        if !zeta_offset.is_finite() {
            return Err(Error::InvalidParameter(format!("ζ offset must be finite, got {zeta_offset}")));
        }
        let eta = self.generator.basis.eta;
        let m = 2 * n_max + 1;
        let step = 2.0 * std::f64::consts::PI / (eta * m as f64);
        let zetas: Vec<f64> = (0..m).map(|j| zeta_offset + step * j as f64).collect();
        // the ζ = 0 trajectory carries the state audit; include it even if offset
        let audit_run = if zeta_offset == 0.0 { None } else { Some(self.evolve(0.0, t)?) };
        let runs: Vec<(C64, Option<StateAudit>)> = zetas
            .par_iter()
            .map(|&z| {
                let e = self.evolve(z, t)?;
                Ok((self.close(z, &e.rho), e.audit))
            })
            .collect::<Result<_>>()?;
        let mut audit = StateAudit::default();
        for a in runs.iter().filter_map(|r| r.1.as_ref()).chain(audit_run.iter().filter_map(|e| e.audit.as_ref())) {
            audit.merge(a);
        }
        let mut buf: Vec<C64> = runs.iter().map(|r| r.0).collect();
        FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
        let n_values: Vec<i64> = (-(n_max as i64)..=n_max as i64).collect();
        let raw: Vec<C64> = n_values
            .iter()
            .map(|&n| buf[n.rem_euclid(m as i64) as usize] * C64::from_polar(1.0 / m as f64, -(n as f64) * eta * zeta_offset))
            .collect();
        let leakage = raw.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let raw_sum: f64 = raw.iter().map(|z| z.re).sum();
        if (raw_sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Numeric(format!("work distribution sums to {raw_sum} (leakage {leakage:e})")));
        }
        let min_raw = raw.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let mut clamped = 0;
        let mut probs: Vec<f64> = raw
            .iter()
            .map(|z| {
                if z.re < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    z.re
                }
            })
            .collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(WorkDistribution { n_values, probs, quantum: eta, leakage, clamped, min_raw, raw_sum, audit })
    }
}

pub fn characteristic_function(params: &DriveParams, zeta: f64, t: f64, rho0: Option<&DensityMatrix>) -> Result<C64> {
    CountingRun::new(params, rho0, FcsOptions::default())?.characteristic_function(zeta, t)
}

/// Work distribution from the ground state with default options.
pub fn work_distribution(params: &DriveParams, t: f64, n_max: usize) -> Result<WorkDistribution> {
    CountingRun::new(params, None, FcsOptions::default())?.work_distribution(t, n_max)
}
