//! Exact diagonalization of the bosonic Anderson impurity model
//!
//! ```text
//! H = ½ n₀(n₀−1) − μ n₀ + Σ_l ε_l a†_l a_l − Jz φ_C (b₀† + b₀)
//!     + Σ_l [ V_l (a†_l b₀ + a_l b₀†) + W_l (a_l b₀ + a†_l b₀†) ]
//! ```
//!
//! on the product of the impurity basis (any [`TruncationScheme`]) with
//! `L_b` hard-core bath orbitals. The product basis index is
//! `i_imp · 2^L_b + bits`, bath orbital `l` occupying bit `L_b − 1 − l`, which is
//! the Kronecker order `impurity ⊗ a_0 ⊗ … ⊗ a_{L_b−1}`.

use num_complex::Complex;

use crate::basis::{build_operators, OperatorSet, TruncationScheme};
use crate::error::{invalid, Error, Result};
use crate::numerics::{eigh, EigenDecomposition, Matrix, SymmetricMatrix, MAX_DIM};
use crate::Real;

/// Smallest admissible bath energy.
pub const EPS_MIN: f64 = 1e-6;
/// Largest supported number of bath orbitals.
pub const MAX_BATH: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AndersonParams<T> {
    pub j_over_u: T,
    pub mu_over_u: T,
    pub z: usize,
    /// Cavity condensate `⟨b⟩_C`.
    pub phi_c: T,
    pub eps: Vec<T>,
    pub v: Vec<T>,
    pub w: Vec<T>,
}

impl<T: Real> AndersonParams<T> {
    pub fn n_bath(&self) -> usize {
        self.eps.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.eps.len();
        if l == 0 || l > MAX_BATH {
            return invalid(format!("bath size must be within 1..={MAX_BATH}, got {l}"));
        }
        if self.v.len() != l || self.w.len() != l {
            return invalid("eps, v and w must have equal length");
        }
        if self.z == 0 {
            return invalid("coordination number must be >= 1");
        }
        let all = self.eps.iter().chain(&self.v).chain(&self.w);
        if all.into_iter().any(|x| !x.is_finite()) || !self.phi_c.is_finite() {
            return invalid("non-finite Anderson parameter");
        }
        if self.eps.iter().any(|&e| e < T::lit(EPS_MIN)) {
            return invalid("bath energies must be >= EPS_MIN");
        }
        Ok(())
    }

    fn jz(&self) -> T {
        self.j_over_u * T::from_count(self.z)
    }
}

/// Impurity ⊗ hard-core bath product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductSpace {
    pub imp_dim: usize,
    pub n_bath: usize,
}

impl ProductSpace {
    pub fn new(imp_dim: usize, n_bath: usize) -> Result<Self> {
        let space = Self { imp_dim, n_bath };
        if space.dim() > MAX_DIM {
            return Err(Error::Config(format!(
                "product space dimension {} exceeds {MAX_DIM}",
                space.dim()
            )));
        }
        Ok(space)
    }

    #[inline]
    pub fn bath_states(&self) -> usize {
        1 << self.n_bath
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.imp_dim * self.bath_states()
    }

    #[inline]
    pub fn index(&self, imp: usize, bits: usize) -> usize {
        imp * self.bath_states() + bits
    }

    #[inline]
    fn bit(&self, orbital: usize) -> usize {
        1 << (self.n_bath - 1 - orbital)
    }

    /// `(O_imp ⊗ 1) x`
    pub fn apply_impurity<T: Real>(&self, op: &Matrix<T>, x: &[T]) -> Vec<T> {
        let bs = self.bath_states();
        let mut out = vec![T::zero(); self.dim()];
        for (i, j, val) in op.nonzeros() {
            for s in 0..bs {
                out[i * bs + s] += val * x[j * bs + s];
            }
        }
        out
    }

    /// Applies a single hard-core bath operator on orbital `l`.
    pub fn apply_bath<T: Real>(&self, l: usize, op: BathOp, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (k, &val) in x.iter().enumerate() {
            if val.is_zero() {
                continue;
            }
            let bits = k % self.bath_states();
            if let Some(nb) = op.act(bits, self.bit(l)) {
                out[k - bits + nb] += val;
            }
        }
        out
    }
}

/// Single-orbital factor of a Kronecker term; each is a 2×2 hard-core matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BathOp {
    Number,
    Create,
    Annihilate,
}

impl BathOp {
    /// New bit pattern, or `None` when the matrix element vanishes.
    #[inline]
    fn act(self, bits: usize, mask: usize) -> Option<usize> {
        let occupied = bits & mask != 0;
        match self {
            BathOp::Number => occupied.then_some(bits),
            BathOp::Create => (!occupied).then_some(bits | mask),
            BathOp::Annihilate => occupied.then_some(bits & !mask),
        }
    }
}

/// Adds `coeff · O_imp ⊗ (⊗_l B_l)` to the dense row-major matrix `h`;
/// orbitals absent from `bath` carry the identity.
fn add_kron_term<T: Real>(
    h: &mut [T],
    space: &ProductSpace,
    coeff: T,
    imp: &Matrix<T>,
    bath: &[(usize, BathOp)],
) {
    let dim = space.dim();
    let bs = space.bath_states();
    for (i, j, val) in imp.nonzeros() {
        for s_in in 0..bs {
            let mut s_out = Some(s_in);
            for &(l, op) in bath {
                s_out = s_out.and_then(|s| op.act(s, space.bit(l)));
            }
            if let Some(s_out) = s_out {
                h[(i * bs + s_out) * dim + j * bs + s_in] += coeff * val;
            }
        }
    }
}

pub(crate) fn aim_hamiltonian<T: Real>(
    params: &AndersonParams<T>,
    ops: &OperatorSet<T>,
) -> Result<SymmetricMatrix<T>> {
    params.validate()?;
    let space = ProductSpace::new(ops.dim, params.n_bath())?;
    let dim = space.dim();
    let mut h = vec![T::zero(); dim * dim];
    let identity = Matrix::identity(ops.dim);

    let onsite = ops.nn.scaled(T::lit(0.5)).add(&ops.n.scaled(-params.mu_over_u));
    add_kron_term(&mut h, &space, T::one(), &onsite, &[]);
    let drive = -params.jz() * params.phi_c;
    if !drive.is_zero() {
        add_kron_term(&mut h, &space, drive, &ops.b, &[]);
        add_kron_term(&mut h, &space, drive, &ops.b_dag, &[]);
    }
    for l in 0..params.n_bath() {
        add_kron_term(&mut h, &space, params.eps[l], &identity, &[(l, BathOp::Number)]);
        let (v, w) = (params.v[l], params.w[l]);
        if !v.is_zero() {
            add_kron_term(&mut h, &space, v, &ops.b, &[(l, BathOp::Create)]);
            add_kron_term(&mut h, &space, v, &ops.b_dag, &[(l, BathOp::Annihilate)]);
        }
        if !w.is_zero() {
            add_kron_term(&mut h, &space, w, &ops.b, &[(l, BathOp::Annihilate)]);
            add_kron_term(&mut h, &space, w, &ops.b_dag, &[(l, BathOp::Create)]);
        }
    }
    SymmetricMatrix::from_row_major(dim, h)
}

/// Dense impurity Hamiltonian on the product basis.
pub fn build_aim_hamiltonian<T: Real>(
    params: &AndersonParams<T>,
    scheme: &TruncationScheme<T>,
) -> Result<SymmetricMatrix<T>> {
    let ops = build_operators(scheme)?;
    aim_hamiltonian(params, &ops)
}

#[derive(Debug, Clone)]
pub struct EDResult<T> {
    /// Spectrum, ascending.
    pub energies: Vec<T>,
    /// Gauge-fixed `|⟨b₀⟩|`.
    pub phi: T,
    /// `⟨b₀⟩` before gauge fixing.
    pub phi_signed: T,
    pub n_mean: T,
    pub nn_mean: T,
    /// Connected part of the `V/W` coupling energy (bath and impurity
    /// fluctuation operators only).
    pub h_hyb_mean: T,
    /// Full expectation of the `V/W` coupling line.
    pub h_hyb_full: T,
    /// `⟨a†_l a_l⟩`
    pub bath_occupation: Vec<T>,
    /// Ground-state energy `E_AIM`.
    pub e_aim: T,
    pub eigen: EigenDecomposition<T>,
    pub space: ProductSpace,
}

impl<T: Real> EDResult<T> {
    pub fn ground_vector(&self) -> &[T] {
        self.eigen.vector(0)
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Diagonalizes `h` and evaluates ground-state observables.
pub fn ground_observables<T: Real>(
    h: &SymmetricMatrix<T>,
    ops: &OperatorSet<T>,
    params: &AndersonParams<T>,
) -> Result<EDResult<T>> {
    let space = ProductSpace::new(ops.dim, params.n_bath())?;
    if h.dim() != space.dim() {
        return invalid("Hamiltonian does not match the product space");
    }
    let eigen = eigh(h)?;
    let psi = eigen.vector(0);
    let b_psi = space.apply_impurity(&ops.b, psi);
    let phi_signed = dot(psi, &b_psi);
    let n_mean = dot(psi, &space.apply_impurity(&ops.n, psi));
    let nn_mean = dot(psi, &space.apply_impurity(&ops.nn, psi));

    let mut bath_occupation = Vec::with_capacity(params.n_bath());
    let mut h_full = T::zero();
    let mut h_conn = T::zero();
    let two = T::lit(2.0);
    for l in 0..params.n_bath() {
        bath_occupation.push(dot(psi, &space.apply_bath(l, BathOp::Number, psi)));
        let a_mean = dot(psi, &space.apply_bath(l, BathOp::Annihilate, psi));
        // ⟨a†b⟩ = ⟨a ψ | b ψ⟩, ⟨a b⟩ = ⟨a† ψ | b ψ⟩ (real states)
        let a_psi = space.apply_bath(l, BathOp::Annihilate, psi);
        let adag_psi = space.apply_bath(l, BathOp::Create, psi);
        let adag_b = dot(&a_psi, &b_psi);
        let a_b = dot(&adag_psi, &b_psi);
        let disconnected = two * a_mean * phi_signed;
        let normal = two * adag_b;
        let anomalous = two * a_b;
        h_full += params.v[l] * normal + params.w[l] * anomalous;
        h_conn += params.v[l] * (normal - disconnected) + params.w[l] * (anomalous - disconnected);
    }
    Ok(EDResult {
        energies: eigen.values.clone(),
        phi: phi_signed.abs(),
        phi_signed,
        n_mean,
        nn_mean,
        h_hyb_mean: h_conn,
        h_hyb_full: h_full,
        bath_occupation,
        e_aim: eigen.values[0],
        eigen,
        space,
    })
}

/// Builds and solves the impurity problem in one call.
pub fn solve_impurity<T: Real>(
    params: &AndersonParams<T>,
    ops: &OperatorSet<T>,
) -> Result<EDResult<T>> {
    let h = aim_hamiltonian(params, ops)?;
    ground_observables(&h, ops, params)
}

/// Bosonic Matsubara grid `ω_m = 2πm/β`, `m = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatsubaraGrid<T> {
    pub beta: T,
    pub omegas: Vec<T>,
}

impl<T: Real> MatsubaraGrid<T> {
    pub fn new(beta: T, n: usize) -> Result<Self> {
        if !(beta > T::zero()) || n == 0 {
            return invalid("grid needs beta > 0 and at least one frequency");
        }
        let step = T::lit(2.0) * T::PI() / beta;
        Ok(Self { beta, omegas: (1..=n).map(|m| step * T::from_count(m)).collect() })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

/// Normal (`g11`) and anomalous (`g12`) components on the positive
/// Matsubara frequencies; negative frequencies follow by conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct NambuGreen<T> {
    pub beta_fict: T,
    pub omegas: Vec<T>,
    pub g11: Vec<Complex<T>>,
    pub g12: Vec<Complex<T>>,
    /// Set when the ground state is degenerate and couples to its partner.
    pub degenerate_ground: bool,
}

impl<T: Real> NambuGreen<T> {
    pub fn zeros(grid: &MatsubaraGrid<T>) -> Self {
        let n = grid.len();
        Self {
            beta_fict: grid.beta,
            omegas: grid.omegas.clone(),
            g11: vec![Complex::new(T::zero(), T::zero()); n],
            g12: vec![Complex::new(T::zero(), T::zero()); n],
            degenerate_ground: false,
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            g11: self.g11.iter().map(|&g| g * s).collect(),
            g12: self.g12.iter().map(|&g| g * s).collect(),
            ..self.clone()
        }
    }

    /// `(1−m)·self + m·other`
    pub fn mix(&self, other: &Self, m: T) -> Self {
        let keep = T::one() - m;
        Self {
            g11: self.g11.iter().zip(&other.g11).map(|(&a, &b)| a * keep + b * m).collect(),
            g12: self.g12.iter().zip(&other.g12).map(|(&a, &b)| a * keep + b * m).collect(),
            ..self.clone()
        }
    }

    /// `g11` at `−iω_m`.
    pub fn g11_negative(&self, m: usize) -> Complex<T> {
        self.g11[m].conj()
    }

    /// `Σ_m (1/ω_m)(|g11|² + |g12|²)`
    pub fn weighted_norm_sqr(&self) -> T {
        self.omegas
            .iter()
            .zip(self.g11.iter().zip(&self.g12))
            .map(|(&w, (a, b))| (a.norm_sqr() + b.norm_sqr()) / w)
            .sum()
    }

    /// `Σ_m (1/ω_m)(|Δg11|² + |Δg12|²)`
    pub fn weighted_distance_sqr(&self, other: &Self) -> T {
        self.omegas
            .iter()
            .enumerate()
            .map(|(m, &w)| {
                ((self.g11[m] - other.g11[m]).norm_sqr() + (self.g12[m] - other.g12[m]).norm_sqr())
                    / w
            })
            .sum()
    }
}

/// Lehmann amplitudes `A_m = ⟨m|δb†|0⟩`, `B_m = ⟨m|δb|0⟩` with `δb = b₀ − φ`.
pub(crate) fn lehmann_amplitudes<T: Real>(
    eig: &EigenDecomposition<T>,
    ops: &OperatorSet<T>,
    space: &ProductSpace,
    phi: T,
) -> (Vec<T>, Vec<T>) {
    let psi = eig.vector(0);
    let mut u = space.apply_impurity(&ops.b_dag, psi);
    let mut v = space.apply_impurity(&ops.b, psi);
    for ((uk, vk), &p) in u.iter_mut().zip(v.iter_mut()).zip(psi) {
        *uk -= phi * p;
        *vk -= phi * p;
    }
    (eig.project(&u), eig.project(&v))
}

/// Connected zero-temperature Nambu Green's function
///
/// ```text
/// g11(iω) = Σ_m [ A_m²/(iω − ΔE_m) − B_m²/(iω + ΔE_m) ]
/// g12(iω) = Σ_m A_m B_m [ 1/(iω − ΔE_m) − 1/(iω + ΔE_m) ]
/// ```
pub fn lehmann_green<T: Real>(
    eig: &EigenDecomposition<T>,
    ops: &OperatorSet<T>,
    space: &ProductSpace,
    phi: T,
    grid: &MatsubaraGrid<T>,
) -> NambuGreen<T> {
    let (a, b) = lehmann_amplitudes(eig, ops, space, phi);
    let e0 = eig.values[0];
    let gap_floor = T::lit(1e-12);
    let weight_floor = T::lit(1e-30);
    let mut degenerate = false;
    let mut poles = Vec::new();
    for m in 1..eig.dim() {
        let de = eig.values[m] - e0;
        let (am, bm) = (a[m], b[m]);
        if am * am < weight_floor && bm * bm < weight_floor {
            continue;
        }
        if de < T::lit(1e-10) {
            degenerate = true;
        }
        if de < gap_floor {
            continue;
        }
        poles.push((de, am, bm));
    }
    let mut g = NambuGreen::zeros(grid);
    g.degenerate_ground = degenerate;
    let two = T::lit(2.0);
    for (k, &w) in grid.omegas.iter().enumerate() {
        let mut g11 = Complex::new(T::zero(), T::zero());
        let mut g12 = T::zero();
        for &(de, am, bm) in &poles {
            let den = T::one() / (w * w + de * de);
            // 1/(iω − E) = −(E + iω)/(ω² + E²), 1/(iω + E) = (E − iω)/(ω² + E²)
            let (a2, b2) = (am * am, bm * bm);
            g11 += Complex::new(-(a2 + b2) * de * den, -(a2 - b2) * w * den);
            g12 -= two * am * bm * de * den;
        }
        g.g11[k] = g11;
        g.g12[k] = Complex::new(g12, T::zero());
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: Vec<f64>, v: Vec<f64>, w: Vec<f64>, phi_c: f64) -> AndersonParams<f64> {
        AndersonParams { j_over_u: 0.1, mu_over_u: 0.4, z: 6, phi_c, eps, v, w }
    }

    #[test]
    fn decoupled_atomic_limit() {
        let p = params(vec![0.5, 1.0], vec![0.0, 0.0], vec![0.0, 0.0], 0.0);
        let ops = build_operators(&TruncationScheme::fock(5)).unwrap();
        let ed = solve_impurity(&p, &ops).unwrap();
        assert!((ed.e_aim + 0.4).abs() < 1e-12);
        assert!(ed.phi < 1e-12);
        assert!((ed.n_mean - 1.0).abs() < 1e-12);
        assert_eq!(ed.h_hyb_mean, 0.0);
        let psi = ed.ground_vector();
        let idx = ed.space.index(1, 0);
        assert!((psi[idx].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_order_perturbation() {
        let (eps, v, mu) = (0.5f64, 0.05f64, 0.4f64);
        let p = AndersonParams { j_over_u: 0.0, mu_over_u: mu, z: 6, phi_c: 0.0, eps: vec![eps], v: vec![v], w: vec![0.0] };
        let ops = build_operators(&TruncationScheme::fock(6)).unwrap();
        let ed = solve_impurity(&p, &ops).unwrap();
        // virtual states from |1⟩⊗|0⟩ through V(a†b + a b†):
        //   |0⟩⊗|1⟩ with amplitude V·1, energy ε
        //   (a b† needs an occupied bath orbital, absent here)
        let e_ref = -mu;
        let c2 = 1.0 / (eps - e_ref);
        let oracle = e_ref - v * v * c2;
        assert!((ed.e_aim - oracle).abs() < 10.0 * v.powi(4), "{} vs {}", ed.e_aim, oracle);
        assert!(ed.h_hyb_mean < 0.0);
    }

    #[test]
    fn structure_and_symmetry() {
        let p = params(vec![0.3, 0.9, 1.4], vec![0.2, -0.1, 0.05], vec![0.03, 0.02, -0.04], 0.4);
        let ops = build_operators(&TruncationScheme::cts(4, 1.1)).unwrap();
        let h = aim_hamiltonian(&p, &ops).unwrap();
        let dim = h.dim();
        assert_eq!(dim, 5 * 8);
        for i in 0..dim {
            for j in 0..dim {
                assert_eq!(h.get(i, j), h.get(j, i));
            }
        }
        for col in 0..dim {
            let nz = (0..dim).filter(|&r| h.get(r, col) != 0.0).count();
            assert!(nz <= 3 * (1 + 2 * 3), "column {col} has {nz}");
        }
    }

    #[test]
    fn condensate_drive_breaks_symmetry() {
        let p = AndersonParams { j_over_u: 0.5, mu_over_u: 0.4, z: 6, phi_c: 1.0, eps: vec![1.0], v: vec![0.0], w: vec![0.0] };
        let ops = build_operators(&TruncationScheme::fock(10)).unwrap();
        let ed = solve_impurity(&p, &ops).unwrap();
        assert!(ed.phi > 0.1);
    }

    #[test]
    fn dimension_limit() {
        let p = params(vec![1.0; 4], vec![0.1; 4], vec![0.0; 4], 0.0);
        let ops = build_operators(&TruncationScheme::fock(65)).unwrap();
        assert!(matches!(aim_hamiltonian(&p, &ops), Err(Error::Config(_))));
    }

    #[test]
    fn atomic_green_function() {
        let p = params(vec![1.0], vec![0.0], vec![0.0], 0.0);
        let ops = build_operators(&TruncationScheme::fock(6)).unwrap();
        let ed = solve_impurity(&p, &ops).unwrap();
        let grid = MatsubaraGrid::new(40.0, 256).unwrap();
        let g = lehmann_green(&ed.eigen, &ops, &ed.space, ed.phi_signed, &grid);
        for (k, &w) in grid.omegas.iter().enumerate() {
            let iw = Complex::new(0.0, w);
            let oracle = 2.0 / (iw - 0.6) - 1.0 / (iw + 0.4);
            assert!((g.g11[k] - oracle).norm() < 1e-12);
            assert!(g.g12[k].norm() < 1e-12);
        }
        let last = grid.len() - 1;
        let tail = g.g11[last] * Complex::new(0.0, grid.omegas[last]);
        assert!((tail.re - 1.0).abs() < 0.02);
        assert_eq!(g.g11_negative(3), g.g11[3].conj());
    }

    #[test]
    fn lehmann_completeness() {
        let p = params(vec![0.4, 1.2], vec![0.3, 0.1], vec![0.05, 0.12], 0.35);
        let ops = build_operators(&TruncationScheme::fock(8)).unwrap();
        let ed = solve_impurity(&p, &ops).unwrap();
        let (a, b) = lehmann_amplitudes(&ed.eigen, &ops, &ed.space, ed.phi_signed);
        let psi = ed.ground_vector();
        let mut u = ed.space.apply_impurity(&ops.b_dag, psi);
        let mut v = ed.space.apply_impurity(&ops.b, psi);
        for k in 0..u.len() {
            u[k] -= ed.phi_signed * psi[k];
            v[k] -= ed.phi_signed * psi[k];
        }
        let direct_u: f64 = u.iter().map(|x| x * x).sum();
        let direct_v: f64 = v.iter().map(|x| x * x).sum();
        let sum_a: f64 = a.iter().map(|x| x * x).sum();
        let sum_b: f64 = b.iter().map(|x| x * x).sum();
        assert!((direct_u - sum_a).abs() < 1e-10);
        assert!((direct_v - sum_b).abs() < 1e-10);
        assert!(a[0].abs() < 1e-12 && b[0].abs() < 1e-12);
        for occ in &ed.bath_occupation {
            assert!(*occ >= -1e-14 && *occ <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn gauge_flip_of_condensate_drive() {
        let ops = build_operators(&TruncationScheme::fock(8)).unwrap();
        let mut p = params(vec![0.4, 1.2], vec![0.3, 0.1], vec![0.05, 0.12], 0.35);
        let plus = solve_impurity(&p, &ops).unwrap();
        p.phi_c = -0.35;
        let minus = solve_impurity(&p, &ops).unwrap();
        assert!(plus.phi_signed > 0.0 && minus.phi_signed < 0.0);
        assert!((plus.phi - minus.phi).abs() < 1e-12);
        assert!((plus.n_mean - minus.n_mean).abs() < 1e-12);
        assert!((plus.nn_mean - minus.nn_mean).abs() < 1e-12);
        assert!((plus.h_hyb_mean - minus.h_hyb_mean).abs() < 1e-12);
        assert!((plus.e_aim - minus.e_aim).abs() < 1e-12);
    }

    #[test]
    fn symmetric_phase_has_no_anomalous_part() {
        let p = params(vec![0.6, 0.4], vec![0.3, 0.0], vec![0.0, 0.2], 0.0);
        let ops = build_operators(&TruncationScheme::fock(6)).unwrap();
        let ed = solve_impurity(&p, &ops).unwrap();
        let grid = MatsubaraGrid::new(40.0, 64).unwrap();
        let g = lehmann_green(&ed.eigen, &ops, &ed.space, ed.phi_signed, &grid);
        assert!(ed.phi < 1e-12);
        assert!(g.g12.iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn tiny_alpha_matches_next_fock_cutoff() {
        let p = params(vec![0.4, 1.2], vec![0.3, 0.1], vec![0.05, 0.12], 0.2);
        let fock = solve_impurity(&p, &build_operators(&TruncationScheme::fock(6)).unwrap()).unwrap();
        let cts = solve_impurity(&p, &build_operators(&TruncationScheme::cts(5, 1e-12)).unwrap()).unwrap();
        for (a, b) in [
            (fock.phi, cts.phi),
            (fock.n_mean, cts.n_mean),
            (fock.nn_mean, cts.nn_mean),
            (fock.h_hyb_mean, cts.h_hyb_mean),
            (fock.e_aim, cts.e_aim),
        ] {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in fock.energies.iter().zip(&cts.energies) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn bath_validation() {
        let mut p = params(vec![0.5], vec![0.1], vec![0.0], 0.0);
        p.eps[0] = 0.0;
        assert!(p.validate().is_err());
        let p = params(vec![0.5, 0.6], vec![0.1], vec![0.0, 0.0], 0.0);
        assert!(p.validate().is_err());
        let p = params(vec![0.5; 5], vec![0.1; 5], vec![0.0; 5], 0.0);
        assert!(p.validate().is_err());
    }
}
