//! Three two-level environment modes coupled to a large spin through Jz:
//! small enough for the joint Gibbs state and propagator to be computed
//! exactly.
#![allow(dead_code)]

use oqs::bath::{BathKind, ModeBath};
use oqs::corrme::MasterEqSetup;
use oqs::qcore::{collective_ops, gibbs, hermitian_map, kron, partial_trace_matrix, pauli_dyn, unitary, Subsystem};
use oqs::{CMat, C64};

/// R = e^{iπJy/2}
pub fn r_op(n: usize) -> CMat {
    let ops = collective_ops::<f64>(n).unwrap();
    hermitian_map(&ops.jy, |l| C64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * l))
}

pub struct Toy {
    pub omega: Vec<f64>,
    pub g: Vec<f64>,
    pub beta: f64,
}

impl Toy {
    pub fn new(scale: f64) -> Self {
        Self { omega: vec![1.3, 2.1, 3.4], g: vec![0.9 * scale, 0.6 * scale, 1.1 * scale], beta: 1.0 }
    }

    pub fn modes(&self) -> ModeBath {
        ModeBath::new(BathKind::Spin, self.beta, self.omega.clone(), self.g.iter().map(|g| g * g).collect()).unwrap()
    }

    // (H_S0 or H_S) ⊗ 1 + 1 ⊗ H_E + Jz ⊗ Σ g σz
    pub fn hamiltonian(&self, hs: &CMat) -> CMat {
        let p = pauli_dyn::<f64>();
        let m = self.omega.len();
        let de = 1 << m;
        let id2 = CMat::identity(2, 2);
        let site = |op: &CMat, k: usize| {
            let mut acc = CMat::identity(1, 1);
            for i in 0..m {
                acc = kron(&acc, if i == k { op } else { &id2 });
            }
            acc
        };
        let mut he = CMat::zeros(de, de);
        let mut e = CMat::zeros(de, de);
        for k in 0..m {
            he += site(&p[0], k) * C64::new(0.5 * self.omega[k], 0.0);
            e += site(&p[2], k) * C64::new(self.g[k], 0.0);
        }
        let ds = hs.nrows();
        let jz = collective_ops::<f64>(ds - 1).unwrap().jz;
        kron(hs, &CMat::identity(de, de)) + kron(&CMat::identity(ds, ds), &he) + kron(&jz, &e)
    }

    pub fn reduced(&self, s: &MasterEqSetup, t: f64) -> CMat {
        let ops = collective_ops::<f64>(s.n).unwrap();
        let h0 = &ops.jz * C64::new(s.eps0, 0.0) + &ops.jx * C64::new(s.delta0, 0.0);
        let hs = &ops.jz * C64::new(s.eps, 0.0) + &ops.jx * C64::new(s.delta, 0.0);
        let de = 1 << self.omega.len();
        let rho = gibbs(&self.hamiltonian(&h0), self.beta).unwrap();
        let r = kron(&r_op(s.n), &CMat::identity(de, de));
        let u = unitary(&self.hamiltonian(&hs), t);
        let full = &u * &r * rho * r.adjoint() * u.adjoint();
        partial_trace_matrix(&full, Subsystem::A, (ops.dim(), de)).unwrap()
    }
}

