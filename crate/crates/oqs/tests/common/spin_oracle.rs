//! Full-Hilbert-space reference for the spin-environment model: build the
//! complete Hamiltonian, prepare the exact Gibbs state, evolve, trace out.
#![allow(dead_code)]

use nalgebra::DMatrix;
use oqs::qcore::{gibbs, kron, partial_trace_matrix, pauli_dyn, unitary, Subsystem};
use oqs::spinspin_exact::{Chain, CentralParams, SpinEnvConfig};
use oqs::{CMat, C64};

fn site_op(op: &CMat, site: usize, sites: usize) -> CMat {
    let id = DMatrix::<C64>::identity(2, 2);
    let mut m = DMatrix::<C64>::identity(1, 1);
    for k in 0..sites {
        m = kron(&m, if k == site { op } else { &id });
    }
    m
}


// (H_E, Σ g_i σz^(i)) on the environment alone.
fn env_ops(env: &SpinEnvConfig) -> (CMat, CMat) {
    let n = env.g.len();
    let sz = &pauli_dyn::<f64>()[2];
    let d = 1 << n;
    let mut he = DMatrix::zeros(d, d);
    let mut b = DMatrix::zeros(d, d);
    let z: Vec<CMat> = (0..n).map(|i| site_op(sz, i, n)).collect();
    for i in 0..n {
        he += z[i].scale(0.5 * env.eps_env[i]);
        b += z[i].scale(env.g[i]);
        let j = match env.chain {
            Chain::Periodic => Some((i + 1) % n),
            Chain::Open => (i + 1 < n).then_some(i + 1),
        };
        if let Some(j) = j {
            he += (&z[i] * &z[j]).scale(env.alpha[i]);
        }
    }
    (he, b)
}

fn sys_h(bias: f64, delta: f64, kappa: f64, qubits: usize) -> CMat {
    let s = pauli_dyn::<f64>();
    let h1 = s[2].scale(0.5 * bias) + s[0].scale(0.5 * delta);
    if qubits == 1 {
        return h1;
    }
    let id = DMatrix::<C64>::identity(2, 2);
    kron(&h1, &id) + kron(&id, &h1) + kron(&s[2], &s[2]).scale(kappa)
}

fn sys_sz(qubits: usize) -> CMat {
    let sz = &pauli_dyn::<f64>()[2];
    if qubits == 1 {
        return sz.clone();
    }
    let id = DMatrix::<C64>::identity(2, 2);
    kron(sz, &id) + kron(&id, sz)
}

fn total_h(env: &SpinEnvConfig, bias: f64, p: &CentralParams, qubits: usize) -> CMat {
    let (he, b) = env_ops(env);
    let ds = 1 << qubits;
    kron(&sys_h(bias, p.delta0, p.kappa, qubits), &DMatrix::identity(he.nrows(), he.nrows()))
        + kron(&DMatrix::identity(ds, ds), &he)
        + kron(&sys_sz(qubits), &b).scale(0.5)
}

fn prep_unitary(qubits: usize) -> CMat {
    let s = pauli_dyn::<f64>();
    let id = DMatrix::<C64>::identity(2, 2);
    if qubits == 1 {
        // e^{iπσy/4} = (1 + iσy)/√2
        (id + s[1].map(|z| z * C64::i())).scale(std::f64::consts::FRAC_1_SQRT_2)
    } else {
        let gen = kron(&s[0], &id) + kron(&id, &s[0]) - kron(&s[0], &s[0]);
        // exp(iπ/4 G) = U(-π/4) with U(t) = e^{-iGt}
        unitary(&gen, -std::f64::consts::FRAC_PI_4)
    }
}

/// Reduced system state at time t (dimension 2^qubits).
pub fn reduced_state(env: &SpinEnvConfig, p: &CentralParams, correlated: bool, t: f64, qubits: usize) -> CMat {
    let n = env.g.len();
    let de = 1usize << n;
    let ds = 1usize << qubits;
    let r = kron(&prep_unitary(qubits), &DMatrix::identity(de, de));
    let rho0 = if correlated {
        let g = gibbs(&total_h(env, p.eps0, p, qubits), env.beta).unwrap();
        &r * g * r.adjoint()
    } else {
        let rs = prep_unitary(qubits);
        let s = &rs * gibbs(&sys_h(p.eps0, p.delta0, p.kappa, qubits), env.beta).unwrap() * rs.adjoint();
        kron(&s, &gibbs(&env_ops(env).0, env.beta).unwrap())
    };
    let u = unitary(&total_h(env, p.eps, p, qubits), t);
    let rho = &u * rho0 * u.adjoint();
    partial_trace_matrix(&rho, Subsystem::A, (ds, de)).unwrap()
}

pub fn bloch(env: &SpinEnvConfig, p: &CentralParams, correlated: bool, t: f64) -> [f64; 3] {
    let r = reduced_state(env, p, correlated, t, 1);
    let r01 = r[(0, 1)];
    [2.0 * r01.re, -2.0 * r01.im, (r[(0, 0)] - r[(1, 1)]).re]
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

