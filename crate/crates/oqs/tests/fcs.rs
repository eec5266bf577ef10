use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::Matrix2;
use oqs::bath::{BathKind, BathSpec};
use oqs::fcs::*;
use oqs::{CMat, DensityMatrix, Error, C64};
use proptest::prelude::*;

type M2 = Matrix2<C64>;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn drive(eps: f64, delta: f64, g: f64, beta: f64) -> DriveParams {
    DriveParams::new(eps, 0.0, delta, BathSpec::ohmic(g, 5.0, beta).unwrap()).unwrap()
}

fn weak(g: f64) -> DriveParams {
    drive(5.0, 0.01, g, 1.0)
}

fn bath_only() -> FcsOptions {
    FcsOptions { trace_frame: TraceFrame::BathOnly, ..Default::default() }
}

fn sz() -> M2 {
    M2::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

fn sx() -> M2 {
    M2::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

fn norm<R: nalgebra::Dim, K: nalgebra::Dim, S: nalgebra::RawStorage<C64, R, K>>(m: &nalgebra::Matrix<C64, R, K, S>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn random_state(seed: u64) -> M2 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a = M2::from_fn(|_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let r = a * a.adjoint();
    r / r.trace()
}

// Exponential integrals by their power series.
fn ei(x: f64) -> f64 {
    let (mut sum, mut term) = (0.0, 1.0);
    for k in 1..80 {
        term *= x / k as f64;
        sum += term / k as f64;
    }
    0.577_215_664_901_532_9 + x.ln() + sum
}

fn e1(x: f64) -> f64 {
    let (mut sum, mut term) = (0.0, 1.0);
    for k in 1..80 {
        term *= -x / k as f64;
        sum += term / k as f64;
    }
    -0.577_215_664_901_532_9 - x.ln() - sum
}

#[test]
fn dressed_basis_diagonalizes_the_rotated_hamiltonian() {
    for &(eps, delta) in &[(5.0, 0.01), (1.0, 2.0), (-3.0, 0.7), (0.0, 1.5), (2.0, 0.0), (-1.0, -0.4)] {
        let p = drive(eps, delta, 0.1, 1.0);
        let b = dressed_basis(&p).unwrap();
        let h = sz() * c(0.5 * eps) + sx() * c(0.5 * delta);
        assert!(norm(&(h * b.plus - b.plus * c(0.5 * b.eta))) < 1e-12);
        assert!(norm(&(h * b.minus + b.minus * c(0.5 * b.eta))) < 1e-12);
        assert!((b.theta.sin() - delta / b.eta).abs() < 1e-14 && (b.theta.cos() - eps / b.eta).abs() < 1e-14);
        let (pp, pm) = (b.plus * b.plus.adjoint(), b.minus * b.minus.adjoint());
        let (pm_, mp_) = (b.plus * b.minus.adjoint(), b.minus * b.plus.adjoint());
        let rebuilt = (pp - pm) * c(b.theta.cos()) - (pm_ + mp_) * c(b.theta.sin());
        assert!(norm(&(rebuilt - sz())) < 1e-12, "ε={eps} Δ={delta}");
    }
}

#[test]
fn dressed_basis_limits() {
    let b = dressed_basis(&drive(2.0, 0.0, 0.1, 1.0)).unwrap();
    assert_eq!(b.theta, 0.0);
    assert_eq!(norm(&b.s_eta), 0.0);
    let b = dressed_basis(&drive(0.0, 1.0, 0.1, 1.0)).unwrap();
    assert!((b.theta - 0.5 * PI).abs() < 1e-15);
    assert!(norm(&b.s0) < 1e-16);
    let b = dressed_basis(&weak(0.1)).unwrap();
    assert!((b.eta - 25.0001f64.sqrt()).abs() < 1e-14);
    assert!((b.theta - 0.002).abs() < 1e-8);
    let flat = DriveParams::new(1.0, 1.0, 0.0, BathSpec::ohmic(0.1, 5.0, 1.0).unwrap());
    assert!(matches!(flat, Err(Error::InvalidParameter(_))));
}

#[test]
fn rates_at_reference_points() {
    let r = rates(&drive(5.0, 0.0, 0.1, 1.0)).unwrap();
    assert!((r.gamma0 - 0.4 * PI).abs() < 1e-14);
    assert!((r.gamma_eta - PI * (-1f64).exp()).abs() < 1e-14);
    assert!(rel(r.n_eta, 1.0 / 5f64.exp_m1()) < 1e-14);
    assert!(rel(r.lambda0, 0.5) < 1e-14);
    let zero = rates(&drive(5.0, 0.01, 0.0, 1.0)).unwrap();
    assert_eq!((zero.gamma0, zero.gamma_eta, zero.lambda0, zero.lambda1, zero.lambda2), (0.0, 0.0, 0.0, 0.0, 0.0));
    let cold = rates(&drive(5.0, 0.01, 0.1, f64::INFINITY)).unwrap();
    assert_eq!((cold.gamma0, cold.n_eta), (0.0, 0.0));
    let sup = DriveParams::new(5.0, 0.0, 0.01, BathSpec::new(BathKind::Bosonic, 0.1, 2.0, 5.0, 1.0).unwrap()).unwrap();
    assert_eq!(rates(&sup).unwrap().gamma0, 0.0);
    let sub = DriveParams::new(5.0, 0.0, 0.01, BathSpec::new(BathKind::Bosonic, 0.1, 0.5, 5.0, 1.0).unwrap()).unwrap();
    assert!(matches!(rates(&sub), Err(Error::Unsupported(_))));
}

#[test]
fn zero_temperature_shifts_match_exponential_integrals() {
    // J = Gω e^{−ω/ω_c}: ω/(η²−ω²) and ω²/(η²−ω²) split into simple poles,
    // P∫e^{−aω}/(η−ω) = e^{−aη}Ei(aη), ∫e^{−aω}/(η+ω) = e^{aη}E₁(aη)
    let (g, wc) = (0.3, 5.0);
    for &(eps, delta) in &[(5.0, 0.0), (3.0, 1.0), (1.0, 0.5)] {
        let p = drive(eps, delta, g, f64::INFINITY);
        let r = rates(&p).unwrap();
        let eta = p.eta();
        let x = eta / wc;
        let (pm, pp) = ((-x).exp() * ei(x), x.exp() * e1(x));
        let l1 = 0.5 * g * eta * (pm - pp);
        let l2 = g * (-wc + 0.5 * eta * (pm + pp));
        assert!(rel(r.lambda1, l1) < 1e-7, "{} vs {l1}", r.lambda1);
        assert!(rel(r.lambda2, l2) < 1e-7, "{} vs {l2}", r.lambda2);
    }
}

#[test]
fn thermal_shift_matches_subtracted_quadrature() {
    // P∫₀^U f/(η−ω) = ∫₀^U (f(ω) − f(η))/(η−ω) + f(η) ln(η/(U−η))
    let (g, wc, beta) = (0.2, 5.0, 0.7);
    let p = drive(3.0, 1.0, g, beta);
    let eta = p.eta();
    let upper = 50.0 * wc;
    let f = |w: f64| eta * g * w * (-w / wc).exp() / (0.5 * beta * w).tanh() / (eta + w);
    let gl = GaussLegendre::new(NonZeroUsize::new(40).unwrap());
    let mut reg = 0.0;
    let edges: Vec<f64> = (0..=400).map(|k| upper * k as f64 / 400.0).collect();
    for w in edges.windows(2) {
        reg += gl.integrate(w[0], w[1], |x| if (x - eta).abs() < 1e-12 { 0.0 } else { (f(x) - f(eta)) / (eta - x) });
    }
    let want = reg + f(eta) * (eta / (upper - eta)).ln();
    let got = rates(&p).unwrap().lambda1;
    assert!(rel(got, want) < 1e-7, "{got} vs {want}");
}

#[test]
fn generator_preserves_trace_only_at_zero_counting_field() {
    let g = Generator::new(&drive(3.0, 1.2, 0.3, 0.8), &Default::default()).unwrap();
    for seed in 0..100 {
        let rho = random_state(seed);
        let d = g.rhs(0.0, &rho);
        assert!(d.trace().norm() < 1e-12);
        assert!(norm(&(d - d.adjoint())) < 1e-12);
    }
    assert!(g.rhs(0.7, &random_state(1)).trace().norm() > 1e-6);
}

#[test]
fn generator_is_periodic_in_the_counting_field() {
    let p = drive(3.0, 1.2, 0.3, 0.8);
    let g = Generator::new(&p, &Default::default()).unwrap();
    let rho = random_state(7);
    let d = g.rhs(2.0 * PI / p.eta(), &rho) - g.rhs(0.0, &rho);
    assert!(norm(&d) < 1e-12);
}

#[test]
fn zero_coupling_is_von_neumann_flow() {
    let p = drive(3.0, 1.2, 0.0, 0.8);
    let g = Generator::new(&p, &Default::default()).unwrap();
    let h = sz() * c(1.5) + sx() * c(0.6);
    let rho = random_state(3);
    let want = (h * rho - rho * h) * C64::new(0.0, -1.0);
    assert!(norm(&(g.rhs(1.3, &rho) - want)) < 1e-14);
    let cf = cf_rhs(&p, 1.3, &CMat::from_fn(2, 2, |i, j| rho[(i, j)])).unwrap();
    assert!(cf.iter().zip(want.iter()).all(|(a, b)| (a - b).norm() < 1e-14));
    assert!(matches!(cf_rhs(&p, 0.0, &CMat::zeros(3, 3)), Err(Error::Dimension(_))));
}

#[test]
fn steady_state_obeys_detailed_balance() {
    for beta in [0.5, 1.0, 2.0] {
        let g = Generator::new(&drive(1.0, 2.0, 0.1, beta), &Default::default()).unwrap();
        let ss = g.steady_state().unwrap();
        let m = ss.matrix();
        let (pp, pm) = g.basis().populations(&M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]));
        let n = g.rates().n_eta;
        assert!(rel(pp / pm, n / (n + 1.0)) < 1e-6, "β={beta}: {} vs {}", pp / pm, n / (n + 1.0));
    }
}

#[test]
fn long_propagation_relaxes_to_detailed_balance() {
    let p = drive(1.0, 2.0, 0.1, 1.0);
    let run = CountingRun::new(&p, None, FcsOptions { dt: 0.02, ..Default::default() }).unwrap();
    let rho = run.state(150.0).unwrap();
    let m = rho.matrix();
    let (pp, pm) = run.generator().basis().populations(&M2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]));
    let n = run.generator().rates().n_eta;
    assert!(rel(pp / pm, n / (n + 1.0)) < 1e-6, "{} vs {}", pp / pm, n / (n + 1.0));
}

#[test]
fn characteristic_function_normalized_and_conjugate_symmetric() {
    let p = drive(5.0, 0.3, 0.2, 0.5);
    let run = CountingRun::new(&p, None, Default::default()).unwrap();
    for &t in &[0.0, 0.5, 3.0, 10.0] {
        assert!((run.characteristic_function(0.0, t).unwrap() - c(1.0)).norm() < 1e-9);
        for &z in &[0.1, 0.9, 2.3] {
            let (a, b) = (run.characteristic_function(z, t).unwrap(), run.characteristic_function(-z, t).unwrap());
            assert!((a - b.conj()).norm() < 1e-12, "t={t} ζ={z}");
            assert!(a.norm() <= 1.0 + 1e-9);
        }
    }
}

#[test]
fn closed_system_characteristic_function() {
    // G = 0: Φ(ζ) = e^{iζϵ/2} Σ_± |⟨±|g⟩|² e^{±iζη/2}
    let p = drive(5.0, 0.8, 0.0, 1.0);
    let run = CountingRun::new(&p, None, Default::default()).unwrap();
    let b = run.generator().basis();
    let (wp, wm) = (b.plus[1].norm_sqr(), b.minus[1].norm_sqr());
    for &(z, t) in &[(0.3, 0.0), (1.1, 2.0), (-0.7, 7.5)] {
        let want = C64::from_polar(1.0, 2.5 * z) * (C64::from_polar(wp, 0.5 * z * b.eta) + C64::from_polar(wm, -0.5 * z * b.eta));
        let got = run.characteristic_function(z, t).unwrap();
        assert!((got - want).norm() < 1e-10, "ζ={z} t={t}: {got} vs {want}");
    }
    // no drive either: the phase is deterministic and |Φ| = 1
    let idle = CountingRun::new(&drive(5.0, 0.0, 0.0, 1.0), None, Default::default()).unwrap();
    for z in [0.4, 1.7] {
        assert!((idle.characteristic_function(z, 3.0).unwrap().norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn two_level_rate_equation_oracle() {
    // ϵ = 0: no first-measurement dephasing, |±⟩ = σx eigenstates, S₀ = 0.
    // A dressed-diagonal start evolves by populations only:
    //   ṗ₊ = k↑ e^{−iηζ} p₋ − k↓ p₊,  ṗ₋ = k↓ e^{iηζ} p₊ − k↑ p₋
    let p = drive(0.0, 1.5, 0.3, 0.6);
    let r = rates(&p).unwrap();
    let eta = p.eta();
    let (kd, ku) = (r.gamma_eta * (1.0 + r.n_eta), r.gamma_eta * r.n_eta);
    let (q0p, q0m) = (0.3, 0.7);
    let b = dressed_basis(&p).unwrap();
    let rho0 = b.plus * b.plus.adjoint() * c(q0p) + b.minus * b.minus.adjoint() * c(q0m);
    let rho0 = DensityMatrix::new(CMat::from_fn(2, 2, |i, j| rho0[(i, j)])).unwrap();
    let run = CountingRun::new(&p, Some(&rho0), bath_only()).unwrap();
    let t = 2.0;
    let oracle = |z: f64| {
        let a = M2::new(c(-kd), C64::from_polar(ku, -eta * z), C64::from_polar(kd, eta * z), c(-ku)) * c(t);
        let half_tr = 0.5 * a.trace();
        let s = (((a[(0, 0)] - a[(1, 1)]) * 0.5).powi(2) + a[(0, 1)] * a[(1, 0)]).sqrt();
        let shifted = a - M2::identity() * half_tr;
        let sinh_s = if s.norm() < 1e-300 { c(1.0) } else { s.sinh() / s };
        let e = (M2::identity() * s.cosh() + shifted * sinh_s) * half_tr.exp();
        let v = e * nalgebra::Vector2::new(c(q0p), c(q0m));
        v[0] + v[1]
    };
    for z in [0.0, 0.4, 1.3, -2.2] {
        let got = run.characteristic_function(z, t).unwrap();
        assert!((got - oracle(z)).norm() < 1e-9, "ζ={z}: {got} vs {}", oracle(z));
    }
    let w = run.work_distribution(t, 6).unwrap();
    let m = 13;
    for (&n, &pn) in w.n_values.iter().zip(&w.probs) {
        let want: f64 = (0..m)
            .map(|j| {
                let z = 2.0 * PI * j as f64 / (eta * m as f64);
                (oracle(z) * C64::from_polar(1.0 / m as f64, -(n as f64) * eta * z)).re
            })
            .sum();
        assert!((pn - want.max(0.0)).abs() < 1e-9, "n={n}: {pn} vs {want}");
    }
}

#[test]
fn distribution_normalized_and_audited() {
    for frame in [TraceFrame::Rwa, TraceFrame::Detuned, TraceFrame::BathOnly] {
        let run = CountingRun::new(&drive(2.0, 0.5, 0.3, 0.5), None, FcsOptions { trace_frame: frame, ..Default::default() }).unwrap();
        let w = run.work_distribution(4.0, DEFAULT_N_MAX).unwrap();
        assert!((w.raw_sum - 1.0).abs() < 1e-6);
        assert!((w.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.probs.iter().all(|&p| p >= 0.0));
        assert_eq!(w.n_values.len(), 2 * DEFAULT_N_MAX + 1);
        assert!(w.audit.count > 0 && w.audit.passes());
    }
}

#[test]
fn zero_coupling_counts_nothing() {
    let w = CountingRun::new(&weak(0.0), None, bath_only()).unwrap().work_distribution(100.0, 8).unwrap();
    for (&n, &p) in w.n_values.iter().zip(&w.probs) {
        assert!((p - if n == 0 { 1.0 } else { 0.0 }).abs() < 1e-12, "n={n}: {p}");
    }
    // without a drive the verbatim closing trace is also trivial
    let w = work_distribution(&drive(5.0, 0.0, 0.0, 1.0), 100.0, 8).unwrap();
    assert!((w.prob(0) - 1.0).abs() < 1e-12);
}

#[test]
fn system_phase_cancels_bath_exchange_for_static_drive() {
    // With ω_l = 0 the post-quench Hamiltonian is static, so the closing
    // e^{iζH_S} turns Φ into the statistics of the conserved total energy:
    // a drive-quench distribution that is independent of G and t.
    let a = work_distribution(&weak(0.1), 100.0, 8).unwrap();
    let b = work_distribution(&weak(0.5), 100.0, 8).unwrap();
    let c0 = work_distribution(&weak(0.0), 10.0, 8).unwrap();
    for ((x, y), z) in a.probs.iter().zip(&b.probs).zip(&c0.probs) {
        assert!((x - y).abs() < 1e-9 && (x - z).abs() < 1e-9);
    }
    // quench work: weight sin²(θ/2) ≈ 1e-6 one quantum up, with sub-quantum
    // offsets (ϵ − η)/2 leaking beyond the Fourier tolerance
    assert!((a.prob(1) - 1e-6).abs() < 2e-6);
    assert!(!a.within_leakage_tolerance());
}

#[test]
fn weak_coupling_emission_is_small_early() {
    for frame in [TraceFrame::Rwa, TraceFrame::BathOnly] {
        let run = CountingRun::new(&weak(0.1), None, FcsOptions { trace_frame: frame, ..Default::default() }).unwrap();
        let w = run.work_distribution(0.1 / 0.01, 8).unwrap();
        assert!(w.prob(0) > 0.9);
    }
}

#[test]
fn emission_grows_with_coupling() {
    let p1 = |g| CountingRun::new(&weak(g), None, bath_only()).unwrap().work_distribution(1.0 / 0.01, 8).unwrap().prob(1);
    let (lo, hi) = (p1(0.1), p1(0.5));
    assert!(hi > lo, "{hi} vs {lo}");
}

#[test]
fn distribution_is_window_invariant() {
    let run = CountingRun::new(&drive(2.0, 0.8, 0.4, 0.5), None, bath_only()).unwrap();
    let a = run.work_distribution_offset(6.0, 6, 0.0).unwrap();
    let b = run.work_distribution_offset(6.0, 6, 0.37).unwrap();
    for (x, y) in a.probs.iter().zip(&b.probs) {
        assert!((x - y).abs() < 1e-8);
    }
    assert!(b.audit.count > 0);
}

#[test]
fn mean_work_matches_derivative_of_characteristic_function() {
    let run = CountingRun::new(&drive(5.0, 0.5, 0.1, 0.1), None, bath_only()).unwrap();
    let t = 20.0;
    let w = run.work_distribution(t, 8).unwrap();
    let h = 1e-4;
    let d = (run.characteristic_function(h, t).unwrap() - run.characteristic_function(-h, t).unwrap()) / (2.0 * h);
    let mean = (d * C64::new(0.0, -1.0)).re;
    assert!(w.mean_energy().abs() > 1e-8);
    assert!(rel(w.mean_energy(), mean) < 1e-5, "{} vs {mean}", w.mean_energy());
}

#[test]
fn runs_are_deterministic() {
    let run = CountingRun::new(&drive(2.0, 0.5, 0.3, 0.5), None, Default::default()).unwrap();
    assert_eq!(run.work_distribution(3.0, 5).unwrap(), run.work_distribution(3.0, 5).unwrap());
}

#[test]
fn bad_inputs_rejected() {
    let run = CountingRun::new(&weak(0.1), None, Default::default()).unwrap();
    assert!(matches!(run.work_distribution(1.0, 3), Err(Error::InvalidParameter(_))));
    assert!(matches!(run.evolve(0.0, -1.0), Err(Error::Domain(_))));
    assert!(matches!(run.evolve(f64::NAN, 1.0), Err(Error::InvalidParameter(_))));
    let spin = BathSpec::new(BathKind::Spin, 0.1, 1.0, 5.0, 1.0).unwrap();
    assert!(matches!(DriveParams::new(5.0, 0.0, 0.1, spin), Err(Error::Unsupported(_))));
    let three = DensityMatrix::maximally_mixed(3).unwrap();
    assert!(matches!(CountingRun::new(&weak(0.1), Some(&three), Default::default()), Err(Error::Dimension(_))));
    assert!(CountingRun::new(&weak(0.1), None, FcsOptions { dt: 0.0, ..Default::default() }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_field_propagation_stays_physical(
        g in 0.0f64..1.0, beta in 0.1f64..5.0, eps in -5.0f64..5.0, delta in 0.05f64..3.0,
        s in 1.0f64..3.0, t in 0.0f64..5.0, seed in 0u64..1000,
    ) {
        let b = BathSpec::new(BathKind::Bosonic, g, s, 5.0, beta).unwrap();
        let p = DriveParams::new(eps, 0.0, delta, b).unwrap();
        let r = random_state(seed);
        let rho0 = DensityMatrix::new(CMat::from_fn(2, 2, |i, j| r[(i, j)])).unwrap();
        let run = CountingRun::new(&p, Some(&rho0), FcsOptions { dt: 0.01, ..Default::default() }).unwrap();
        let e = run.evolve(0.0, t).unwrap();
        prop_assert!(e.audit.unwrap().passes());
        prop_assert!((e.rho.trace() - c(1.0)).norm() < 1e-9);
    }
}
