//! Exact dynamics of one or two central qubits coupled to a finite
//! environment of Ising spins.
//!
//! The coupling ½σz ⊗ Σ g_i σz^(i) commutes with H_E, so every environment
//! configuration n (a σz bit pattern) acts as a classical bias shift
//! e_n = Σ(-1)^{n_i} g_i on the qubit(s). The reduced dynamics is therefore
//! a weighted sum of closed two-level (or four-level) problems, one per
//! configuration. Configurations can be enumerated exhaustively, collapsed
//! by symmetry when all spins are identical, or sampled.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qcore::{concurrence, gibbs, hermitian_map, kron, pauli_dyn, pauli_exponential, unitary};
use crate::{BlochVector, CMat, DensityMatrix, C64};

/// Largest environment enumerated configuration by configuration.
pub const MAX_EXHAUSTIVE: usize = 24;

/// Boundary condition of the α_i σz^(i) σz^(i+1) chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chain {
    /// i+1 taken mod N.
    Periodic,
    /// Bonds i = 1..N-1 only.
    Open,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinEnvConfig {
    pub g: Vec<f64>,
    pub eps_env: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub chain: Chain,
}

impl SpinEnvConfig {
    pub fn new(g: Vec<f64>, eps_env: Vec<f64>, alpha: Vec<f64>, beta: f64) -> Result<Self> {
        let env = Self { g, eps_env, alpha, beta, chain: Chain::Periodic };
        env.validate()?;
        Ok(env)
    }

    /// N identical spins.
    pub fn identical(n: usize, g: f64, eps_env: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![g; n], vec![eps_env; n], vec![alpha; n], beta)
    }

    pub fn with_chain(mut self, chain: Chain) -> Self {
        self.chain = chain;
        self
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.g.len();
        if n == 0 {
            return Err(Error::InvalidParameter("environment needs at least one spin".into()));
        }
        if self.eps_env.len() != n || self.alpha.len() != n {
            return Err(Error::Dimension(format!(
                "g, eps_env and alpha must have equal length, got {}, {}, {}",
                n,
                self.eps_env.len(),
                self.alpha.len()
            )));
        }
        if self.g.iter().chain(&self.eps_env).chain(&self.alpha).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("environment parameters must be finite".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be finite and > 0, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn is_identical(&self) -> bool {
        let same = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        same(&self.g) && same(&self.eps_env) && same(&self.alpha)
    }

    fn bond(&self, i: usize) -> Option<(usize, usize)> {
        let n = self.n();
        match self.chain {
            Chain::Periodic => Some((i, (i + 1) % n)),
            Chain::Open if i + 1 < n => Some((i, i + 1)),
            Chain::Open => None,
        }
    }

    fn bond_count(&self) -> usize {
        match self.chain {
            Chain::Periodic => self.n(),
            Chain::Open => self.n() - 1,
        }
    }
}

/// Unitary used to prepare the initial state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preparation {
    /// R = e^{iπσy/4} on a single qubit.
    PiHalfY,
    /// exp(iπ/4 (σx⊗1 + 1⊗σx - σx⊗σx)) on two qubits.
    Cz,
}

/// Central-qubit parameters. The preparation uses (ε₀, Δ₀), the evolution
/// (ε, Δ₀); κ couples two qubits through κ σz⊗σz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CentralParams {
    pub eps0: f64,
    pub eps: f64,
    pub delta0: f64,
    pub kappa: f64,
    pub prep: Preparation,
}

impl CentralParams {
    pub fn single(eps0: f64, eps: f64, delta0: f64) -> Self {
        Self { eps0, eps, delta0, kappa: 0.0, prep: Preparation::PiHalfY }
    }

    pub fn two_qubit(eps0: f64, eps: f64, delta0: f64, kappa: f64) -> Self {
        Self { eps0, eps, delta0, kappa, prep: Preparation::Cz }
    }

    fn validate(&self) -> Result<()> {
        if [self.eps0, self.eps, self.delta0, self.kappa].iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("central-qubit parameters must be finite".into()));
        }
        Ok(())
    }
}

/// One environment configuration with its energetics. Weights are kept as
/// logarithms: k_n = e^{log_k}, A_n = e^{log_a}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvConfigTerm {
    /// Bit i set ⇔ n_i = 1 ⇔ spin i points down.
    pub bits: u64,
    pub e_n: f64,
    pub eps_n: f64,
    pub lambda_n: f64,
    pub log_k: f64,
    pub log_a: f64,
}

impl EnvConfigTerm {
    pub fn k_n(&self) -> f64 {
        self.log_k.exp()
    }

    pub fn a_n(&self) -> f64 {
        self.log_a.exp()
    }
}

/// A class of configurations sharing `ones` flipped spins and `walls`
/// unequal neighbour bonds; all members have identical energetics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapsedTerm {
    pub multiplicity: f64,
    pub ones: usize,
    pub walls: usize,
    pub e_n: f64,
    pub eps_n: f64,
    pub lambda_n: f64,
    pub log_k: f64,
    pub log_a: f64,
}

/// How configuration sums are carried out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Enumeration {
    /// Collapsed when all spins are identical, exhaustive otherwise.
    Auto,
    Exhaustive,
    Collapsed,
}

// ½√(ε² + Δ²): half the level splitting.
fn half_splitting(eps: f64, delta: f64) -> f64 {
    0.5 * eps.hypot(delta)
}

// ln(2 cosh x)
fn ln_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

// tanh(βd)/d with its d → 0 limit.
fn tanhc(beta: f64, d: f64) -> f64 {
    if d * beta < 1e-8 {
        beta
    } else {
        (beta * d).tanh() / d
    }
}

fn single_log_a(env: &SpinEnvConfig, central: &CentralParams, e_n: f64, correlated: bool) -> f64 {
    if correlated {
        ln_2cosh(env.beta * half_splitting(central.eps0 + e_n, central.delta0))
    } else {
        0.0
    }
}

fn term_for(env: &SpinEnvConfig, central: &CentralParams, correlated: bool, bits: u64) -> EnvConfigTerm {
    let sign = |i: usize| if bits >> i & 1 == 1 { -1.0 } else { 1.0 };
    let n = env.n();
    let e_n: f64 = (0..n).map(|i| sign(i) * env.g[i]).sum();
    let eps_n: f64 = (0..n).map(|i| sign(i) * env.eps_env[i]).sum();
    let lambda_n: f64 = (0..n).filter_map(|i| env.bond(i).map(|(a, b)| env.alpha[i] * sign(a) * sign(b))).sum();
    EnvConfigTerm {
        bits,
        e_n,
        eps_n,
        lambda_n,
        log_k: -env.beta * (0.5 * eps_n + lambda_n),
        log_a: single_log_a(env, central, e_n, correlated),
    }
}

/// All 2^N configurations. `log_a` is the single-qubit correlation weight
/// ln 2cosh(βΔ̃₀ⁿ) when `correlated`, zero otherwise.
pub fn enumerate_terms<'a>(
    env: &'a SpinEnvConfig,
    central: &'a CentralParams,
    correlated: bool,
) -> Result<impl Iterator<Item = EnvConfigTerm> + 'a> {
    env.validate()?;
    central.validate()?;
    if env.n() > MAX_EXHAUSTIVE {
        return Err(Error::Capacity(format!(
            "exhaustive enumeration is limited to N <= {MAX_EXHAUSTIVE} (got {}); use identical spins (collapsed sums) or sampling",
            env.n()
        )));
    }
    Ok((0..1u64 << env.n()).map(move |bits| term_for(env, central, correlated, bits)))
}

/// Configuration classes of an environment of identical spins.
pub fn collapse_identical(env: &SpinEnvConfig, central: &CentralParams, correlated: bool) -> Result<Vec<CollapsedTerm>> {
    env.validate()?;
    central.validate()?;
    if !env.is_identical() {
        return Err(Error::Precondition("collapsed sums need identical g_i, eps_i and alpha_i".into()));
    }
    let n = env.n();
    let (g, eps, alpha) = (env.g[0], env.eps_env[0], env.alpha[0]);
    let bonds = env.bond_count();
    let mut classes: Vec<(usize, usize, f64)> = Vec::new();
    if alpha == 0.0 {
        let mut c = 1.0f64;
        for m in 0..=n {
            classes.push((m, 0, c));
            c = c * (n - m) as f64 / (m + 1) as f64;
        }
    } else {
        // counts[first][last][ones][walls] built site by site.
        let idx = |f: usize, l: usize, m: usize, w: usize| ((f * 2 + l) * (n + 1) + m) * (n + 1) + w;
        let mut cur = vec![0.0f64; 4 * (n + 1) * (n + 1)];
        cur[idx(0, 0, 0, 0)] = 1.0;
        cur[idx(1, 1, 1, 0)] = 1.0;
        for _ in 1..n {
            let mut nxt = vec![0.0f64; cur.len()];
            for f in 0..2 {
                for l in 0..2 {
                    for m in 0..=n {
                        for w in 0..=n {
                            let c = cur[idx(f, l, m, w)];
                            if c == 0.0 {
                                continue;
                            }
                            for b in 0..2 {
                                let (m2, w2) = (m + b, w + usize::from(b != l));
                                if m2 <= n && w2 <= n {
                                    nxt[idx(f, b, m2, w2)] += c;
                                }
                            }
                        }
                    }
                }
            }
            cur = nxt;
        }
        let mut acc = vec![0.0f64; (n + 1) * (n + 2)];
        for f in 0..2 {
            for l in 0..2 {
                for m in 0..=n {
                    for w in 0..=n {
                        let c = cur[idx(f, l, m, w)];
                        if c == 0.0 {
                            continue;
                        }
                        let w2 = if env.chain == Chain::Periodic { w + usize::from(f != l) } else { w };
                        acc[m * (n + 2) + w2] += c;
                    }
                }
            }
        }
        for m in 0..=n {
            for w in 0..=n + 1 {
                let c = acc[m * (n + 2) + w];
                if c > 0.0 {
                    classes.push((m, w, c));
                }
            }
        }
    }
    Ok(classes
        .into_iter()
        .map(|(m, w, c)| {
            let s = (n as f64) - 2.0 * m as f64;
            let (e_n, eps_n) = (g * s, eps * s);
            let lambda_n = alpha * (bonds as f64 - 2.0 * w as f64);
            CollapsedTerm {
                multiplicity: c,
                ones: m,
                walls: w,
                e_n,
                eps_n,
                lambda_n,
                log_k: -env.beta * (0.5 * eps_n + lambda_n),
                log_a: single_log_a(env, central, e_n, correlated),
            }
        })
        .collect())
}

// (ln multiplicity + ln k_n, e_n) per configuration class.
fn env_classes(env: &SpinEnvConfig, central: &CentralParams, mode: Enumeration) -> Result<Vec<(f64, f64)>> {
    let collapsed = match mode {
        Enumeration::Auto => env.is_identical(),
        Enumeration::Collapsed => true,
        Enumeration::Exhaustive => false,
    };
    if collapsed {
        Ok(collapse_identical(env, central, false)?.iter().map(|c| (c.multiplicity.ln() + c.log_k, c.e_n)).collect())
    } else {
        Ok(enumerate_terms(env, central, false)?.map(|t| (t.log_k, t.e_n)).collect())
    }
}

fn normalize_logs(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

// ---------------------------------------------------------------- one qubit

/// Rotation of p about ω by angle |ω|t, i.e. the solution of dp/dt = ω × p.
fn precess(p: [f64; 3], w: [f64; 3], t: f64) -> [f64; 3] {
    let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    if norm == 0.0 {
        return p;
    }
    let k = [w[0] / norm, w[1] / norm, w[2] / norm];
    let (s, c) = (norm * t).sin_cos();
    let kxp = [k[1] * p[2] - k[2] * p[1], k[2] * p[0] - k[0] * p[2], k[0] * p[1] - k[1] * p[0]];
    let kp = k[0] * p[0] + k[1] * p[1] + k[2] * p[2];
    [0, 1, 2].map(|i| p[i] * c + kxp[i] * s + k[i] * kp * (1.0 - c))
}

/// Precomputed configuration sum for a single central qubit.
#[derive(Clone, Debug)]
pub struct SingleQubitModel {
    delta0: f64,
    eps: f64,
    branches: Vec<(f64, f64, [f64; 3])>,
}

// Bloch vector of R e^{-βH_S0} R†/Z for H_S0 = ε₀/2 σz + Δ₀/2 σx.
fn prepared_bloch(beta: f64, eps0: f64, delta0: f64) -> [f64; 3] {
    let f = 0.5 * tanhc(beta, half_splitting(eps0, delta0));
    [f * eps0, 0.0, -f * delta0]
}

impl SingleQubitModel {
    pub fn new(env: &SpinEnvConfig, central: &CentralParams, correlated: bool, mode: Enumeration) -> Result<Self> {
        if central.prep != Preparation::PiHalfY {
            return Err(Error::Precondition("single-qubit runs use the PiHalfY preparation".into()));
        }
        let classes = env_classes(env, central, mode)?;
        let beta = env.beta;
        let branches = if correlated {
            let logs: Vec<f64> = classes
                .iter()
                .map(|&(lk, e)| lk + ln_2cosh(beta * half_splitting(central.eps0 + e, central.delta0)))
                .collect();
            normalize_logs(&logs)
                .into_iter()
                .zip(&classes)
                .map(|(w, &(_, e))| (w, e, prepared_bloch(beta, central.eps0 + e, central.delta0)))
                .collect()
        } else {
            let p0 = prepared_bloch(beta, central.eps0, central.delta0);
            let logs: Vec<f64> = classes.iter().map(|c| c.0).collect();
            normalize_logs(&logs).into_iter().zip(&classes).map(|(w, &(_, e))| (w, e, p0)).collect()
        };
        Ok(Self { delta0: central.delta0, eps: central.eps, branches })
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn bloch(&self, t: f64) -> BlochVector {
        let mut acc = [0.0; 3];
        for &(w, e, p0) in &self.branches {
            let p = precess(p0, [self.delta0, 0.0, self.eps + e], t);
            for i in 0..3 {
                acc[i] += w * p[i];
            }
        }
        BlochVector::new(acc[0], acc[1], acc[2])
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

pub fn initial_bloch(env: &SpinEnvConfig, central: &CentralParams, correlated: bool) -> Result<BlochVector> {
    Ok(SingleQubitModel::new(env, central, correlated, Enumeration::Auto)?.bloch(0.0))
}

pub fn evolve_bloch(env: &SpinEnvConfig, central: &CentralParams, correlated: bool, t: f64) -> Result<BlochVector> {
    check_time(t)?;
    Ok(SingleQubitModel::new(env, central, correlated, Enumeration::Auto)?.bloch(t))
}

pub fn bloch_curve(env: &SpinEnvConfig, central: &CentralParams, correlated: bool, t_grid: &[f64], mode: Enumeration) -> Result<Vec<BlochVector>> {
    t_grid.iter().try_for_each(|&t| check_time(t))?;
    let model = SingleQubitModel::new(env, central, correlated, mode)?;
    Ok(t_grid.iter().map(|&t| model.bloch(t)).collect())
}

/// Monte Carlo estimate of the Bloch vector with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledBloch {
    pub mean: BlochVector,
    pub std_error: [f64; 3],
    pub samples: usize,
}

/// Samples configurations from k_n/Z_E (independent spins, so α must
/// vanish); correlated runs reweight each sample by A_n.
pub fn evolve_bloch_sampled(env: &SpinEnvConfig, central: &CentralParams, correlated: bool, t: f64, samples: usize, seed: u64) -> Result<SampledBloch> {
    env.validate()?;
    central.validate()?;
    check_time(t)?;
    if env.alpha.iter().any(|&a| a != 0.0) {
        return Err(Error::Unsupported("sampling assumes independent environment spins (alpha = 0)".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // P(n_i = 1) = e^{βε_i/2}/(2cosh(βε_i/2))
    let p_down: Vec<f64> = env.eps_env.iter().map(|&e| 1.0 / (1.0 + (-env.beta * e).exp())).collect();
    let p_uncorr = prepared_bloch(env.beta, central.eps0, central.delta0);
    let mut vals: Vec<(f64, [f64; 3])> = Vec::with_capacity(samples);
    for _ in 0..samples {
        let e: f64 = env.g.iter().zip(&p_down).map(|(&g, &pd)| if rng.random::<f64>() < pd { -g } else { g }).sum();
        let (w, p0) = if correlated {
            (ln_2cosh(env.beta * half_splitting(central.eps0 + e, central.delta0)), prepared_bloch(env.beta, central.eps0 + e, central.delta0))
        } else {
            (0.0, p_uncorr)
        };
        vals.push((w, precess(p0, [central.delta0, 0.0, central.eps + e], t)));
    }
    let logs: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let w = normalize_logs(&logs);
    let mut mean = [0.0; 3];
    for (wi, (_, p)) in w.iter().zip(&vals) {
        for k in 0..3 {
            mean[k] += wi * p[k];
        }
    }
    // Delta-method standard error of the self-normalized estimator.
    let nf = samples as f64;
    let mut se = [0.0; 3];
    for k in 0..3 {
        let v: f64 = w.iter().zip(&vals).map(|(wi, (_, p))| (wi * nf * (p[k] - mean[k])).powi(2)).sum::<f64>() / (nf - 1.0);
        se[k] = (v / nf).sqrt();
    }
    Ok(SampledBloch { mean: BlochVector::new(mean[0], mean[1], mean[2]), std_error: se, samples })
}

// --------------------------------------------------------------- two qubits

/// How the two-qubit propagator is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoQubitPath {
    /// Product of single-qubit Pauli exponentials when κ = 0, dense otherwise.
    Auto,
    /// Product form; requires κ = 0.
    Product,
    /// Dense 4×4 eigen-decomposition.
    Dense,
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// exp(iπ/4 (σx⊗1 + 1⊗σx - σx⊗σx))
pub fn cz_gate() -> CMat {
    let sx = &pauli_dyn::<f64>()[0];
    let id = DMatrix::<C64>::identity(2, 2);
    let gen = kron(sx, &id) + kron(&id, sx) - kron(sx, sx);
    hermitian_map(&gen, |l| C64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * l))
}

fn two_qubit_h(bias: f64, delta: f64, kappa: f64) -> CMat {
    let s = pauli_dyn::<f64>();
    let id = DMatrix::<C64>::identity(2, 2);
    let h1 = s[2].scale(0.5 * bias) + s[0].scale(0.5 * delta);
    kron(&h1, &id) + kron(&id, &h1) + kron(&s[2], &s[2]).scale(kappa)
}

/// Precomputed configuration sum for two central qubits.
#[derive(Clone, Debug)]
pub struct TwoQubitModel {
    central: CentralParams,
    path: TwoQubitPath,
    branches: Vec<(f64, f64, CMat)>,
}

impl TwoQubitModel {
    pub fn new(env: &SpinEnvConfig, central: &CentralParams, correlated: bool, mode: Enumeration, path: TwoQubitPath) -> Result<Self> {
        if central.prep != Preparation::Cz {
            return Err(Error::Precondition("two-qubit runs use the Cz preparation".into()));
        }
        if path == TwoQubitPath::Product && central.kappa != 0.0 {
            return Err(Error::Precondition("product propagator needs kappa = 0".into()));
        }
        let classes = env_classes(env, central, mode)?;
        let cz = cz_gate();
        let prepare = |h: &CMat| -> Result<(f64, CMat)> {
            let (vals, _) = crate::qcore::eigh(h);
            let e0 = vals[0];
            let ln_z = -env.beta * e0 + vals.iter().map(|e| (-env.beta * (e - e0)).exp()).sum::<f64>().ln();
            Ok((ln_z, &cz * gibbs(h, env.beta)? * cz.adjoint()))
        };
        let branches = if correlated {
            let mut logs = Vec::with_capacity(classes.len());
            let mut states = Vec::with_capacity(classes.len());
            for &(lk, e) in &classes {
                let (ln_a, rho) = prepare(&two_qubit_h(central.eps0 + e, central.delta0, central.kappa))?;
                logs.push(lk + ln_a);
                states.push(rho);
            }
            normalize_logs(&logs).into_iter().zip(classes.iter().zip(states)).map(|(w, (&(_, e), r))| (w, e, r)).collect()
        } else {
            let (_, rho) = prepare(&two_qubit_h(central.eps0, central.delta0, central.kappa))?;
            let logs: Vec<f64> = classes.iter().map(|c| c.0).collect();
            normalize_logs(&logs).into_iter().zip(&classes).map(|(w, &(_, e))| (w, e, rho.clone())).collect()
        };
        Ok(Self { central: *central, path, branches })
    }

    fn propagator(&self, e: f64, t: f64) -> CMat {
        let bias = self.central.eps + e;
        let dense = match self.path {
            TwoQubitPath::Dense => true,
            TwoQubitPath::Product => false,
            TwoQubitPath::Auto => self.central.kappa != 0.0,
        };
        if dense {
            return unitary(&two_qubit_h(bias, self.central.delta0, self.central.kappa), t);
        }
        let norm = bias.hypot(self.central.delta0);
        let u = if norm == 0.0 {
            DMatrix::identity(2, 2)
        } else {
            let m = pauli_exponential(-0.5 * norm * t, [self.central.delta0 / norm, 0.0, bias / norm]).expect("unit axis");
            DMatrix::from_iterator(2, 2, m.iter().cloned())
        };
        kron(&u, &u)
    }

    pub fn state(&self, t: f64) -> DensityMatrix {
        let mut acc = DMatrix::<C64>::zeros(4, 4);
        for (w, e, rho) in &self.branches {
            let u = self.propagator(*e, t);
            acc += (&u * rho * u.adjoint()) * c(*w);
        }
        DensityMatrix::new_unchecked(crate::qcore::hermitian_part(&acc))
    }
}

pub fn evolve_two_qubit(env: &SpinEnvConfig, central: &CentralParams, correlated: bool, t: f64) -> Result<DensityMatrix> {
    check_time(t)?;
    Ok(TwoQubitModel::new(env, central, correlated, Enumeration::Auto, TwoQubitPath::Auto)?.state(t))
}

pub fn two_qubit_curve(
    env: &SpinEnvConfig,
    central: &CentralParams,
    correlated: bool,
    t_grid: &[f64],
    mode: Enumeration,
    path: TwoQubitPath,
) -> Result<Vec<DensityMatrix>> {
    t_grid.iter().try_for_each(|&t| check_time(t))?;
    let model = TwoQubitModel::new(env, central, correlated, mode, path)?;
    Ok(t_grid.iter().map(|&t| model.state(t)).collect())
}

pub fn concurrence_curve(env: &SpinEnvConfig, central: &CentralParams, correlated: bool, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let states = two_qubit_curve(env, central, correlated, t_grid, Enumeration::Auto, TwoQubitPath::Auto)?;
    t_grid.iter().zip(&states).map(|(&t, r)| Ok((t, concurrence(r)?))).collect()
}
