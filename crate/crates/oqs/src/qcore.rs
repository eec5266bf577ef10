//! Dense linear algebra on small Hilbert spaces: density matrices, Bloch
//! vectors, partial traces, entanglement measures and collective spin
//! operators.
//!
//! Everything here is generic over the real scalar. The physics modules
//! instantiate it with `f64`; the aliases at the crate root spell that out.

use nalgebra::{DMatrix, DVector, Matrix2, RealField};
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Real scalar usable by the linear-algebra layer.
pub trait Real: RealField + Float + FloatConst + FromPrimitive + ToPrimitive + Copy {}
impl<T> Real for T where T: RealField + Float + FloatConst + FromPrimitive + ToPrimitive + Copy {}

pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Tolerances a density matrix must satisfy on construction.
pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITICITY_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-7;

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable")
}

#[inline]
fn to_f64<T: Real>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

fn czero<T: Real>() -> Complex<T> {
    cplx(T::zero(), T::zero())
}

/// Pauli matrices (σx, σy, σz).
pub fn pauli<T: Real>() -> [Matrix2<Complex<T>>; 3] {
    let (o, l, i) = (czero::<T>(), cplx(T::one(), T::zero()), cplx(T::zero(), T::one()));
    [
        Matrix2::new(o, l, l, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(l, o, o, -l),
    ]
}

/// Pauli matrices as dynamically sized matrices.
pub fn pauli_dyn<T: Real>() -> [CMatrix<T>; 3] {
    let p = pauli::<T>();
    [0, 1, 2].map(|k| DMatrix::from_iterator(2, 2, p[k].iter().cloned()))
}

pub fn identity<T: Real>(dim: usize) -> CMatrix<T> {
    DMatrix::identity(dim, dim)
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

/// Largest |m_ij - conj(m_ji)|.
pub fn hermiticity_error<T: Real>(m: &CMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// (m + m†)/2
pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()).scale(lit(0.5))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh<T: Real>(m: &CMatrix<T>) -> (DVector<T>, CMatrix<T>) {
    let n = m.nrows();
    let se = hermitian_part(m).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = DVector::from_iterator(n, idx.iter().map(|&k| se.eigenvalues[k]));
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &k) in idx.iter().enumerate() {
        vecs.set_column(c, &se.eigenvectors.column(k));
    }
    (vals, vecs)
}

/// f(H) for Hermitian H, evaluated in its eigenbasis.
pub fn hermitian_map<T: Real, F: Fn(T) -> Complex<T>>(h: &CMatrix<T>, f: F) -> CMatrix<T> {
    let (vals, vecs) = eigh(h);
    let mut scaled = vecs.clone();
    for (c, &v) in vals.iter().enumerate() {
        let fv = f(v);
        scaled.column_mut(c).iter_mut().for_each(|z| *z *= fv);
    }
    scaled * vecs.adjoint()
}

/// e^{-iHt}
pub fn unitary<T: Real>(h: &CMatrix<T>, t: T) -> CMatrix<T> {
    hermitian_map(h, |e| {
        let a = -e * t;
        cplx(Float::cos(a), Float::sin(a))
    })
}

/// Normalized Gibbs state e^{-βH}/Z. `beta = ∞` gives the uniform mixture
/// over the ground space.
pub fn gibbs<T: Real>(h: &CMatrix<T>, beta: T) -> Result<CMatrix<T>> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidParameter(format!("inverse temperature must be positive, got {}", to_f64(beta))));
    }
    let (vals, vecs) = eigh(h);
    let e0 = vals[0];
    let scale = vals.iter().fold(T::one(), |a, &v| Float::max(a, Float::abs(v)));
    let w: Vec<T> = vals
        .iter()
        .map(|&e| {
            if Float::is_infinite(beta) {
                if e - e0 <= lit::<T>(1e-12) * scale { T::one() } else { T::zero() }
            } else {
                Float::exp(-beta * (e - e0))
            }
        })
        .collect();
    let z = w.iter().fold(T::zero(), |a, &b| a + b);
    let mut scaled = vecs.clone();
    for (c, &wc) in w.iter().enumerate() {
        let f = cplx(wc / z, T::zero());
        scaled.column_mut(c).iter_mut().for_each(|x| *x *= f);
    }
    Ok(scaled * vecs.adjoint())
}

/// Diagnostics of how far a matrix is from a valid density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateReport<T> {
    pub trace_error: T,
    pub hermiticity_error: T,
    pub min_eigenvalue: T,
}

impl<T: Real> StateReport<T> {
    pub fn is_valid(&self) -> bool {
        self.trace_error <= lit(TRACE_TOL)
            && self.hermiticity_error <= lit(HERMITICITY_TOL)
            && self.min_eigenvalue >= lit(-POSITIVITY_TOL)
    }
}

pub fn inspect<T: Real>(m: &CMatrix<T>) -> Result<StateReport<T>> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!("density matrix must be square and non-empty, got {}x{}", m.nrows(), m.ncols())));
    }
    let tr = m.trace();
    let trace_error = (tr - cplx(T::one(), T::zero())).norm();
    let hermiticity_error = hermiticity_error(m);
    let (vals, _) = eigh(m);
    Ok(StateReport { trace_error, hermiticity_error, min_eigenvalue: vals[0] })
}

/// A validated density matrix: unit trace, Hermitian, positive semidefinite
/// (each up to the tolerances above).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    data: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(data: CMatrix<T>) -> Result<Self> {
        let r = inspect(&data)?;
        if r.trace_error > lit(TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace deviates from 1 by {:e}", to_f64(r.trace_error))));
        }
        if r.hermiticity_error > lit(HERMITICITY_TOL) {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {:e})", to_f64(r.hermiticity_error))));
        }
        if r.min_eigenvalue < lit(-POSITIVITY_TOL) {
            return Err(Error::InvalidState(format!("negative eigenvalue {:e}", to_f64(r.min_eigenvalue))));
        }
        Ok(Self { data })
    }

    /// Hermitian part of `data`, then validated.
    pub fn symmetrized(data: CMatrix<T>) -> Result<Self> {
        Self::new(hermitian_part(&data))
    }

    pub fn from_pure(psi: &DVector<Complex<T>>) -> Result<Self> {
        let n2 = psi.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        if !(n2 > T::zero()) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let m = psi * psi.adjoint();
        Ok(Self { data: m.unscale(n2) })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        Ok(Self { data: identity::<T>(dim).unscale(lit(dim as f64)) })
    }

    pub(crate) fn new_unchecked(data: CMatrix<T>) -> Self {
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.data
    }

    pub fn report(&self) -> StateReport<T> {
        inspect(&self.data).expect("square by construction")
    }

    /// Tr(ρ A)
    pub fn expectation(&self, op: &CMatrix<T>) -> Result<Complex<T>> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::Dimension(format!("operator is {}x{}, state is {}x{}", op.nrows(), op.ncols(), self.dim(), self.dim())));
        }
        Ok((&self.data * op).trace())
    }
}

/// Running worst-case record of density-matrix invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateAudit {
    pub count: usize,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Default for StateAudit {
    fn default() -> Self {
        Self { count: 0, max_trace_error: 0.0, max_hermiticity_error: 0.0, min_eigenvalue: f64::INFINITY }
    }
}

impl StateAudit {
    pub fn record<T: Real>(&mut self, m: &CMatrix<T>) {
        match inspect(m) {
            Ok(r) => {
                self.count += 1;
                self.max_trace_error = self.max_trace_error.max(to_f64(r.trace_error));
                self.max_hermiticity_error = self.max_hermiticity_error.max(to_f64(r.hermiticity_error));
                self.min_eigenvalue = self.min_eigenvalue.min(to_f64(r.min_eigenvalue));
            }
            Err(_) => {
                self.count += 1;
                self.max_trace_error = f64::INFINITY;
            }
        }
    }

    pub fn merge(&mut self, other: &StateAudit) {
        self.count += other.count;
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }

    pub fn passes(&self) -> bool {
        self.max_trace_error <= TRACE_TOL
            && self.max_hermiticity_error <= HERMITICITY_TOL
            && (self.count == 0 || self.min_eigenvalue >= -POSITIVITY_TOL)
    }
}

/// Bloch vector of a qubit, ρ = (1 + p·σ)/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector<T> {
    pub px: T,
    pub py: T,
    pub pz: T,
}

impl<T: Real> BlochVector<T> {
    pub fn new(px: T, py: T, pz: T) -> Self {
        Self { px, py, pz }
    }

    pub fn norm(&self) -> T {
        Float::sqrt(self.px * self.px + self.py * self.py + self.pz * self.pz)
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.px, self.py, self.pz]
    }
}

pub fn bloch_from_dm<T: Real>(rho: &DensityMatrix<T>) -> Result<BlochVector<T>> {
    if rho.dim() != 2 {
        return Err(Error::Dimension(format!("Bloch vector needs a qubit, got dimension {}", rho.dim())));
    }
    let m = rho.matrix();
    let two: T = lit(2.0);
    Ok(BlochVector::new(two * m[(0, 1)].re, -two * m[(0, 1)].im, m[(0, 0)].re - m[(1, 1)].re))
}

pub fn dm_from_bloch<T: Real>(p: &BlochVector<T>) -> Result<DensityMatrix<T>> {
    let n = p.norm();
    if !(n <= T::one() + lit(1e-12)) {
        return Err(Error::InvalidState(format!("Bloch vector norm {} exceeds 1", to_f64(n))));
    }
    let h: T = lit(0.5);
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            cplx(h * (T::one() + p.pz), T::zero()),
            cplx(h * p.px, -h * p.py),
            cplx(h * p.px, h * p.py),
            cplx(h * (T::one() - p.pz), T::zero()),
        ],
    );
    Ok(DensityMatrix::new_unchecked(m))
}

/// Which factor of a bipartite space to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of an operator on C^da ⊗ C^db (index = a·db + b).
pub fn partial_trace_matrix<T: Real>(m: &CMatrix<T>, keep: Subsystem, dims: (usize, usize)) -> Result<CMatrix<T>> {
    let (da, db) = dims;
    if da == 0 || db == 0 || m.nrows() != da * db || m.ncols() != da * db {
        return Err(Error::Dimension(format!("operator is {}x{}, dims are {}x{}", m.nrows(), m.ncols(), da, db)));
    }
    Ok(match keep {
        Subsystem::A => DMatrix::from_fn(da, da, |i, j| (0..db).fold(czero(), |acc, k| acc + m[(i * db + k, j * db + k)])),
        Subsystem::B => DMatrix::from_fn(db, db, |i, j| (0..da).fold(czero(), |acc, k| acc + m[(k * db + i, k * db + j)])),
    })
}

pub fn partial_trace<T: Real>(rho: &DensityMatrix<T>, keep: Subsystem, dims: (usize, usize)) -> Result<DensityMatrix<T>> {
    partial_trace_matrix(rho.matrix(), keep, dims).map(DensityMatrix::new_unchecked)
}

/// Wootters concurrence of a two-qubit state, from the eigenvalues of
/// √ρ ρ̃ √ρ (which share their spectrum with ρ ρ̃).
pub fn concurrence<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!("concurrence needs a 4x4 state, got {}", rho.dim())));
    }
    // √λ_i are the singular values of τ = Wᵀ(σy⊗σy)W with ρ = W W†,
    // W = [√p_k ψ_k]; this avoids square-rooting near-zero eigenvalues.
    let sy = &pauli_dyn::<T>()[1];
    let yy = kron(sy, sy);
    let (vals, vecs) = eigh(rho.matrix());
    let mut w = vecs.clone();
    for (k, &p) in vals.iter().enumerate() {
        w.column_mut(k).scale_mut(Float::sqrt(Float::max(p, T::zero())));
    }
    let tau = w.transpose() * yy * &w;
    let mut s: Vec<T> = tau.singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let c = s[0] - s[1] - s[2] - s[3];
    Ok(Float::min(Float::max(c, T::zero()), T::one()))
}

/// Tr ρ²
pub fn purity<T: Real>(rho: &DensityMatrix<T>) -> T {
    rho.matrix().iter().fold(T::zero(), |a, z| a + z.norm_sqr())
}

/// -Tr ρ log₂ ρ
pub fn von_neumann_entropy<T: Real>(rho: &DensityMatrix<T>) -> T {
    let (vals, _) = eigh(rho.matrix());
    vals.iter()
        .filter(|&&v| v > T::zero())
        .fold(T::zero(), |a, &v| a - v * Float::log2(v))
}

/// Collective spin operators J = Σσ/2 on the symmetric subspace of n
/// spin-1/2 particles, basis ordered m = j, j-1, ..., -j.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveSpinOps<T: Real> {
    pub n: usize,
    pub j: T,
    pub jx: CMatrix<T>,
    pub jy: CMatrix<T>,
    pub jz: CMatrix<T>,
    pub jplus: CMatrix<T>,
    pub jminus: CMatrix<T>,
}

impl<T: Real> CollectiveSpinOps<T> {
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// Jz eigenvalues in basis order.
    pub fn m_values(&self) -> Vec<T> {
        (0..=self.n).map(|k| self.j - lit(k as f64)).collect()
    }
}

pub fn collective_ops<T: Real>(n: usize) -> Result<CollectiveSpinOps<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("collective operators need n >= 1".into()));
    }
    let d = n + 1;
    let j: T = lit(n as f64 / 2.0);
    let m = |k: usize| j - lit::<T>(k as f64);
    let jz = DMatrix::from_fn(d, d, |r, c| if r == c { cplx(m(r), T::zero()) } else { czero() });
    // <m+1|J+|m> = sqrt(j(j+1) - m(m+1)); row r holds m(r) = m(c) + 1 when r = c - 1.
    let jplus = DMatrix::from_fn(d, d, |r, c| {
        if r + 1 == c {
            let mc = m(c);
            cplx(Float::sqrt(Float::max(j * (j + T::one()) - mc * (mc + T::one()), T::zero())), T::zero())
        } else {
            czero()
        }
    });
    let jminus = jplus.adjoint();
    let half: T = lit(0.5);
    let jx = (&jplus + &jminus).scale(half);
    let jy = (&jplus - &jminus) * cplx(T::zero(), -half);
    Ok(CollectiveSpinOps { n, j, jx, jy, jz, jplus, jminus })
}

/// I cos a + i (n·σ) sin a for a unit axis n.
pub fn pauli_exponential<T: Real>(a: T, n: [T; 3]) -> Result<Matrix2<Complex<T>>> {
    let norm = Float::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if Float::abs(norm - T::one()) > lit(1e-9) {
        return Err(Error::InvalidParameter(format!("rotation axis must be a unit vector, |n| = {}", to_f64(norm))));
    }
    let s = pauli::<T>();
    let (c, sn) = (Float::cos(a), Float::sin(a));
    let gen = s[0] * cplx(n[0], T::zero()) + s[1] * cplx(n[1], T::zero()) + s[2] * cplx(n[2], T::zero());
    Ok(Matrix2::identity() * cplx(c, T::zero()) + gen * cplx(T::zero(), sn))
}
