//! Zero-temperature bosonic DMFT on the Bethe lattice with an exact
//! diagonalization impurity solver.
//!
//! Each iteration solves the Anderson impurity model for the current bath and
//! cavity field, forms the connected Nambu Green's function on a fictitious
//! Matsubara grid, closes the loop with `Δ = zJ²G` and refits the discrete
//! bath. The cavity field follows `φ_C ← ⟨b₀⟩`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex;

use crate::basis::{build_operators, OperatorSet, SchemeKind, TruncationScheme};
use crate::error::{invalid, Error, Result};
use crate::gutzwiller::default_alpha_max;
use crate::impurity::{
    aim_hamiltonian, lehmann_green, solve_impurity, AndersonParams, EDResult, MatsubaraGrid,
    NambuGreen, EPS_MIN, MAX_BATH,
};
use crate::numerics::{lowest_eigenvalue, minimize_multi, minimize_scalar, NelderMeadOptions};
use crate::Real;

/// Relative parameter tolerance of a fully converged bath fit.
const FIT_TOL: f64 = 1e-9;
/// Inner fits inside the loop are solved to this fraction of the last
/// relative hybridization change.
const FIT_FRACTION: f64 = 1e-2;

/// Largest half width of the `α` window searched around the previous iterate.
const ALPHA_WINDOW: f64 = 0.25;

/// How the coherent-tail parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaScheme<T> {
    /// Minimize the impurity ground-state energy inside every iteration.
    MinimizeEAim,
    /// Minimize the converged total energy over full self-consistent runs.
    MinimizeEtot,
    FixedAlpha(T),
}

impl<T: Real> fmt::Display for AlphaScheme<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaScheme::MinimizeEAim => f.write_str("eaim"),
            AlphaScheme::MinimizeEtot => f.write_str("etot"),
            AlphaScheme::FixedAlpha(a) => write!(f, "fixed:{a}"),
        }
    }
}

/// Parses `eaim`, `etot` or `fixed:<alpha>`.
impl<T: Real> FromStr for AlphaScheme<T> {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "eaim" => Ok(AlphaScheme::MinimizeEAim),
            "etot" => Ok(AlphaScheme::MinimizeEtot),
            _ => {
                let value = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown alpha scheme `{s}`")))?;
                Ok(AlphaScheme::FixedAlpha(T::lit(value)))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BdmftConfig<T> {
    pub j_over_u: T,
    pub mu_over_u: T,
    pub z: usize,
    pub scheme: TruncationScheme<T>,
    pub l_b: usize,
    pub beta_fict: T,
    pub n_omega: usize,
    pub mixing_delta: T,
    pub mixing_phi: T,
    pub tol_phi: T,
    /// Relative, grid-weighted change of the fitted hybridization.
    pub tol_delta: T,
    pub max_sc_iter: usize,
    pub alpha_scheme: AlphaScheme<T>,
    pub alpha_max: T,
    pub alpha_tol: T,
}

impl<T: Real> BdmftConfig<T> {
    pub fn new(j_over_u: T, mu_over_u: T, z: usize, scheme: TruncationScheme<T>) -> Self {
        Self {
            j_over_u,
            mu_over_u,
            z,
            scheme,
            l_b: 2,
            beta_fict: T::lit(40.0),
            n_omega: 256,
            mixing_delta: T::lit(0.5),
            mixing_phi: T::lit(0.5),
            tol_phi: T::lit(1e-8),
            tol_delta: T::lit(1e-6),
            max_sc_iter: 300,
            alpha_scheme: AlphaScheme::MinimizeEAim,
            alpha_max: default_alpha_max(scheme.n_c),
            alpha_tol: T::lit(1e-7),
        }
    }

    pub fn with_alpha_scheme(mut self, alpha_scheme: AlphaScheme<T>) -> Self {
        self.alpha_scheme = alpha_scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.z == 0 {
            return invalid("coordination number must be >= 1");
        }
        if !(self.j_over_u >= T::zero()) || !self.mu_over_u.is_finite() {
            return invalid("J/U must be >= 0 and mu/U finite");
        }
        if self.l_b == 0 || self.l_b > MAX_BATH {
            return invalid(format!("bath size must be within 1..={MAX_BATH}"));
        }
        if self.n_omega < 64 {
            return invalid("at least 64 Matsubara frequencies are required");
        }
        if !(self.beta_fict > T::zero()) {
            return invalid("fictitious inverse temperature must be positive");
        }
        for m in [self.mixing_delta, self.mixing_phi] {
            if !(m > T::zero() && m <= T::one()) {
                return invalid("mixing must lie in (0, 1]");
            }
        }
        if !(self.tol_phi > T::zero() && self.tol_delta > T::zero()) {
            return invalid("tolerances must be positive");
        }
        if !(self.alpha_max > T::zero() && self.alpha_tol > T::zero()) {
            return invalid("alpha bracket and tolerance must be positive");
        }
        if let AlphaScheme::FixedAlpha(a) = self.alpha_scheme {
            if !(a >= T::zero()) || !a.is_finite() {
                return invalid("fixed alpha must be finite and >= 0");
            }
        }
        let dim = self.scheme.dim() << self.l_b;
        if dim > crate::numerics::MAX_DIM {
            return Err(Error::Config(format!("impurity dimension {dim} is too large")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<MatsubaraGrid<T>> {
        MatsubaraGrid::new(self.beta_fict, self.n_omega)
    }

    fn jz(&self) -> T {
        self.j_over_u * T::from_count(self.z)
    }

    fn optimizes_alpha_inside(&self) -> bool {
        self.scheme.is_cts() && self.alpha_scheme == AlphaScheme::MinimizeEAim
    }
}

/// Starting point of one self-consistency run.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopStart<T> {
    pub phi_c: T,
    pub eps: Vec<T>,
    pub v: Vec<T>,
    pub w: Vec<T>,
    /// Initial tail parameter for coherent-tail schemes.
    pub alpha: T,
}

impl<T: Real> LoopStart<T> {
    /// Bath `ε = (1, 2, …)`, `V = 0.1`, `W = 0.01`.
    pub fn cold(l_b: usize, phi_c: T) -> Self {
        Self {
            phi_c,
            eps: (1..=l_b).map(T::from_count).collect(),
            v: vec![T::lit(0.1); l_b],
            w: vec![T::lit(0.01); l_b],
            alpha: T::one(),
        }
    }

    pub fn from_result(r: &BdmftResult<T>) -> Self {
        Self {
            phi_c: r.phi_c,
            eps: r.bath.eps.clone(),
            v: r.bath.v.clone(),
            w: r.bath.w.clone(),
            alpha: r.alpha_opt,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BdmftResult<T> {
    pub phi: T,
    pub phi_c: T,
    pub n_mean: T,
    pub nn_mean: T,
    pub alpha_opt: T,
    pub e_tot_site: T,
    pub e_kin_con: T,
    /// Equal-time connected nearest-neighbour Green's function.
    pub g_c0: T,
    pub e_aim: T,
    pub bath: AndersonParams<T>,
    pub iters: usize,
    pub wall_time: Duration,
    pub converged: bool,
    /// `|⟨b₀⟩ − φ_C|` of the reported state.
    pub phi_residual: T,
    /// Relative change of the fitted hybridization in the last iteration.
    pub delta_change: T,
    /// Last bath fit exceeded the quality threshold.
    pub poor_fit: bool,
    /// `d⟨b₀⟩/dφ_C` of the symmetric solution when one was computed.
    pub mott_stability: Option<T>,
}

/// `Δ11 = Σ_l V_l²/(iω−ε_l) − W_l²/(iω+ε_l)`,
/// `Δ12 = Σ_l V_l W_l [1/(iω−ε_l) − 1/(iω+ε_l)]`.
pub fn hybridization_from_bath<T: Real>(
    params: &AndersonParams<T>,
    grid: &MatsubaraGrid<T>,
) -> NambuGreen<T> {
    let mut out = NambuGreen::zeros(grid);
    for (k, &w) in grid.omegas.iter().enumerate() {
        let (re11, im11, re12) = bath_terms(&params.eps, &params.v, &params.w, w);
        out.g11[k] = Complex::new(re11, im11);
        out.g12[k] = Complex::new(re12, T::zero());
    }
    out
}

#[inline]
fn bath_terms<T: Real>(eps: &[T], v: &[T], w: &[T], omega: T) -> (T, T, T) {
    let (mut re11, mut im11, mut re12) = (T::zero(), T::zero(), T::zero());
    let w2 = omega * omega;
    for l in 0..eps.len() {
        let e = eps[l];
        let d = T::one() / (e * e + w2);
        let (v2, ww2) = (v[l] * v[l], w[l] * w[l]);
        re11 -= e * d * (v2 + ww2);
        im11 -= omega * d * (v2 - ww2);
        re12 -= T::lit(2.0) * e * d * v[l] * w[l];
    }
    (re11, im11, re12)
}

/// Bethe-lattice closure `Δ = zJ²G`.
pub fn target_hybridization<T: Real>(g: &NambuGreen<T>, j: T, z: usize) -> NambuGreen<T> {
    let mut out = g.scaled(T::from_count(z) * j * j);
    out.degenerate_ground = false;
    out
}

#[derive(Debug, Clone)]
pub struct BathFit<T> {
    pub params: AndersonParams<T>,
    /// `Σ_m (1/ω_m)(|δΔ11|² + |δΔ12|²)`
    pub chi2: T,
    pub poor: bool,
    pub evals: usize,
}

/// Smooth map of an unbounded fit coordinate `s` onto
/// `ε = ε_min + (ε_max − ε_min)·sin²(s/2)`.
///
/// Without an upper end an unneeded orbital can drift to huge `ε` with
/// `V²/ε` fixed, which mimics a static shift but wrecks the conditioning of
/// the impurity Hamiltonian. The map is periodic rather than asymptotic so
/// an orbital pinned at either end still sits in a quadratic minimum of `s`,
/// which the simplex can contract onto.
#[derive(Debug, Clone, Copy)]
struct EnergyMap<T> {
    min: T,
    max: T,
}

impl<T: Real> EnergyMap<T> {
    /// `ε_max` is twice the highest grid frequency.
    fn for_grid(omegas: &[T]) -> Self {
        let top = omegas.iter().copied().fold(T::zero(), T::max);
        Self { min: T::lit(EPS_MIN), max: T::lit(2.0) * top.max(T::one()) }
    }

    fn eps(&self, s: T) -> T {
        let h = (T::lit(0.5) * s).sin();
        self.min + (self.max - self.min) * h * h
    }

    fn coordinate(&self, eps: T) -> T {
        let r = ((eps - self.min) / (self.max - self.min)).max(T::zero()).min(T::one());
        T::lit(2.0) * r.sqrt().asin()
    }
}

struct FitProblem<'a, T> {
    omegas: &'a [T],
    target: &'a NambuGreen<T>,
    l_b: usize,
    energies: EnergyMap<T>,
    omega_sqr: Vec<T>,
    weights: Vec<T>,
    /// Negated target components `(−ReΔ11, −ImΔ11, −ReΔ12)`.
    neg_target: [Vec<T>; 3],
    /// `Σ_m w_m (ImΔ12)²`, which no real bath can reproduce.
    im12_floor: T,
}

impl<'a, T: Real> FitProblem<'a, T> {
    fn new(target: &'a NambuGreen<T>, l_b: usize) -> Self {
        let omegas = &target.omegas;
        Self {
            omegas,
            target,
            l_b,
            energies: EnergyMap::for_grid(omegas),
            omega_sqr: omegas.iter().map(|&w| w * w).collect(),
            weights: omegas.iter().map(|&w| T::one() / w).collect(),
            neg_target: [
                target.g11.iter().map(|g| -g.re).collect(),
                target.g11.iter().map(|g| -g.im).collect(),
                target.g12.iter().map(|g| -g.re).collect(),
            ],
            im12_floor: omegas.iter().zip(&target.g12).map(|(&w, g)| g.im * g.im / w).sum(),
        }
    }

    fn unpack(&self, x: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let mut eps = Vec::with_capacity(self.l_b);
        let mut v = Vec::with_capacity(self.l_b);
        let mut w = Vec::with_capacity(self.l_b);
        for l in 0..self.l_b {
            eps.push(self.energies.eps(x[3 * l]));
            v.push(x[3 * l + 1]);
            w.push(x[3 * l + 2]);
        }
        (eps, v, w)
    }

    fn pack(&self, eps: &[T], v: &[T], w: &[T]) -> Vec<T> {
        (0..self.l_b)
            .flat_map(|l| [self.energies.coordinate(eps[l]), v[l], w[l]])
            .collect()
    }

    fn chi2(&self, x: &[T]) -> T {
        let [mut r11, mut i11, mut r12] = self.neg_target.clone();
        for l in 0..self.l_b {
            let e = self.energies.eps(x[3 * l]);
            let (v, w) = (x[3 * l + 1], x[3 * l + 2]);
            let (a, b, c) = (e * (v * v + w * w), v * v - w * w, T::lit(2.0) * e * v * w);
            let e2 = e * e;
            for m in 0..self.omegas.len() {
                let d = T::one() / (e2 + self.omega_sqr[m]);
                r11[m] -= a * d;
                i11[m] -= b * self.omegas[m] * d;
                r12[m] -= c * d;
            }
        }
        let mut total = self.im12_floor;
        for m in 0..self.omegas.len() {
            total += (r11[m] * r11[m] + i11[m] * i11[m] + r12[m] * r12[m]) * self.weights[m];
        }
        total
    }

    /// Rough coupling scale `√max_m ω_m|Δ(iω_m)|`.
    fn coupling_scale(&self) -> T {
        self.omegas
            .iter()
            .enumerate()
            .map(|(k, &om)| om * (self.target.g11[k].norm() + self.target.g12[k].norm()))
            .fold(T::zero(), T::max)
            .sqrt()
    }

    fn descend(&self, x0: &[T], step_hint: Option<&[T]>, looseness: T) -> Result<(Vec<T>, T, usize)> {
        let scale = self.coupling_scale();
        let norm = self.target.weighted_norm_sqr();
        let rel = looseness.max(T::lit(FIT_TOL));
        // accuracy of Δ is controlled by tol_f; sloppy directions (a far
        // orbital with only V²/ε resolved) would never meet a tight tol_x
        let tol_x = rel.sqrt() * (T::one() + scale);
        let step: Vec<T> = match step_hint {
            Some(h) => h.iter().map(|&d| T::lit(2.0) * d.abs() + T::lit(100.0) * tol_x).collect(),
            None => x0
                .iter()
                .enumerate()
                .map(|(i, &xi)| {
                    let base = if i % 3 == 0 { T::lit(0.1) } else { T::lit(0.05) * scale };
                    T::lit(0.1) * xi.abs() + base
                })
                .collect(),
        };
        let mut opts = NelderMeadOptions::new(tol_x, 1000 * x0.len());
        // values cannot be resolved much below the rounding level of χ² itself
        let f0 = self.chi2(x0);
        opts.tol_f = (rel * rel * norm * T::lit(1e-2)).max(T::lit(1e-13) * f0).max(T::min_positive_value());
        let first = minimize_multi(|y| self.chi2(y), x0, &opts.clone().with_initial_step(step.clone()))?;
        let (mut x, mut f, mut evals) = (first.x, first.f, first.evals);
        // a collapsed simplex can stall away from the minimum; one restart
        // from the best vertex detects and repairs that
        let small: Vec<T> = step.iter().map(|&s| s * T::lit(0.1)).collect();
        let rounds = if step_hint.is_some() && first.converged { 0 } else { 3 };
        for _ in 0..rounds {
            let r = minimize_multi(|y| self.chi2(y), &x, &opts.clone().with_initial_step(small.clone()))?;
            evals += r.evals;
            let improved = f - r.f;
            if r.f < f {
                x = r.x;
                f = r.f;
            }
            if improved <= T::lit(1e-8) * f + opts.tol_f {
                break;
            }
        }
        Ok((x, f, evals))
    }
}

fn canonicalize<T: Real>(eps: Vec<T>, mut v: Vec<T>, mut w: Vec<T>) -> (Vec<T>, Vec<T>, Vec<T>) {
    // a_l → −a_l flips both couplings; the larger one is made positive
    for l in 0..eps.len() {
        let lead = if w[l].abs() > v[l].abs() { w[l] } else { v[l] };
        if lead < T::zero() {
            v[l] = -v[l];
            w[l] = -w[l];
        }
    }
    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&a, &b| {
        eps[a]
            .partial_cmp(&eps[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal))
    });
    (
        order.iter().map(|&i| eps[i]).collect(),
        order.iter().map(|&i| v[i]).collect(),
        order.iter().map(|&i| w[i]).collect(),
    )
}

fn perturbed_starts<T: Real>(init: &AndersonParams<T>) -> Vec<(Vec<T>, Vec<T>, Vec<T>)> {
    let l_b = init.n_bath();
    let eps_min = T::lit(EPS_MIN);
    let scale = |xs: &[T], s: f64| xs.iter().map(|&x| x * T::lit(s)).collect::<Vec<_>>();
    let floor = |xs: Vec<T>| xs.into_iter().map(|x| x.max(eps_min)).collect::<Vec<_>>();
    vec![
        (init.eps.clone(), init.v.clone(), init.w.clone()),
        (floor(scale(&init.eps, 0.5)), scale(&init.v, 1.2), scale(&init.w, 1.2)),
        (scale(&init.eps, 2.0), scale(&init.v, 0.8), scale(&init.w, 0.8)),
        (
            (0..l_b).map(|l| init.eps[l] + T::lit(0.5) * T::from_count(l + 1)).collect(),
            init.v.clone(),
            init.w.iter().map(|&x| -x).collect(),
        ),
    ]
}

/// Least-squares fit of `l_b` bath orbitals to `delta_target` with
/// weights `1/ω_m`, from `init` plus three fixed perturbations of it.
pub fn fit_bath<T: Real>(
    delta_target: &NambuGreen<T>,
    l_b: usize,
    init: &AndersonParams<T>,
) -> Result<BathFit<T>> {
    fit_bath_from(delta_target, l_b, init, true)
}

/// Same as [`fit_bath`]; `multi_start = false` uses `init` alone.
pub fn fit_bath_from<T: Real>(
    delta_target: &NambuGreen<T>,
    l_b: usize,
    init: &AndersonParams<T>,
    multi_start: bool,
) -> Result<BathFit<T>> {
    fit_bath_impl(delta_target, l_b, init, multi_start, None, T::zero())
}

/// Packed fit coordinates per orbital.
fn pack_bath<T: Real>(p: &AndersonParams<T>, energies: &EnergyMap<T>) -> Vec<T> {
    (0..p.n_bath()).flat_map(|l| [energies.coordinate(p.eps[l]), p.v[l], p.w[l]]).collect()
}

fn fit_bath_impl<T: Real>(
    delta_target: &NambuGreen<T>,
    l_b: usize,
    init: &AndersonParams<T>,
    multi_start: bool,
    step_hint: Option<&[T]>,
    looseness: T,
) -> Result<BathFit<T>> {
    if init.n_bath() != l_b {
        return invalid("initial bath has the wrong size");
    }
    init.validate()?;
    let problem = FitProblem::new(delta_target, l_b);
    let norm = delta_target.weighted_norm_sqr();
    if norm.is_zero() {
        let params = AndersonParams { v: vec![T::zero(); l_b], w: vec![T::zero(); l_b], ..init.clone() };
        return Ok(BathFit { params, chi2: T::zero(), poor: false, evals: 0 });
    }
    let starts = if multi_start { perturbed_starts(init) } else { perturbed_starts(init)[..1].to_vec() };
    let mut best: Option<(Vec<T>, T)> = None;
    let mut evals = 0;
    for (eps, v, w) in starts {
        let (x, f, n) = problem.descend(&problem.pack(&eps, &v, &w), step_hint, looseness)?;
        evals += n;
        if best.as_ref().map_or(true, |(_, bf)| f < *bf) {
            best = Some((x, f));
        }
    }
    let (x, chi2) = best.expect("at least one start");
    let (eps, v, w) = problem.unpack(&x);
    let (eps, v, w) = canonicalize(eps, v, w);
    let params = AndersonParams { eps, v, w, ..init.clone() };
    let poor = chi2 > T::lit(1e-2) * norm;
    Ok(BathFit { params, chi2, poor, evals })
}

/// `(e_tot_site, e_kin_con, g_c0)` from a converged impurity solution.
///
/// Bond energies attached to the impurity are shared by two sites, hence
/// the halves.
pub fn observables<T: Real>(ed: &EDResult<T>, params: &AndersonParams<T>, config: &BdmftConfig<T>) -> (T, T, T) {
    let half = T::lit(0.5);
    let jz = config.jz();
    let e_kin_con = half * ed.h_hyb_mean;
    let g_c0 = if jz.is_zero() { T::zero() } else { ed.h_hyb_mean / (T::lit(2.0) * jz) };
    let e_tot = half * ed.nn_mean - config.mu_over_u * ed.n_mean - jz * ed.phi * params.phi_c + e_kin_con;
    (e_tot, e_kin_con, g_c0)
}

/// `α` minimizing the impurity ground-state energy at fixed bath and field.
///
/// With a previous value the search starts on a window around it and falls
/// back to the full interval when the optimum lands on a window edge.
fn alpha_minimizing_eaim<T: Real>(
    config: &BdmftConfig<T>,
    params: &AndersonParams<T>,
    previous: Option<(T, T)>,
    tol: T,
) -> Result<T> {
    let mut failure = None;
    let mut e_aim = |a: T| {
        let e = build_operators(&config.scheme.with_alpha(a))
            .and_then(|ops| aim_hamiltonian(params, &ops))
            .and_then(|h| lowest_eigenvalue(&h));
        match e {
            Ok(e0) => e0,
            Err(err) => {
                failure.get_or_insert(err);
                T::infinity()
            }
        }
    };
    let full = (T::zero(), config.alpha_max);
    let window = previous.map(|(a, last_step)| {
        let half = (T::lit(4.0) * last_step).max(T::lit(100.0) * tol).min(T::lit(ALPHA_WINDOW));
        ((a - half).max(full.0), (a + half).min(full.1))
    });
    let mut m = None;
    if let Some((lo, hi)) = window.filter(|(lo, hi)| lo < hi) {
        let r = minimize_scalar(&mut e_aim, lo, hi, tol)?;
        let edge = T::lit(10.0) * tol;
        let interior = (r.x - lo > edge || lo == full.0) && (hi - r.x > edge || hi == full.1);
        if interior {
            m = Some(r);
        }
    }
    let m = match m {
        Some(m) => m,
        None => minimize_scalar(&mut e_aim, full.0, full.1, tol)?,
    };
    match failure {
        Some(err) if !m.f.is_finite() => Err(err),
        _ => Ok(m.x),
    }
}

fn relative_change<T: Real>(new: &NambuGreen<T>, old: &NambuGreen<T>) -> T {
    let dist = new.weighted_distance_sqr(old).sqrt();
    let norm = new.weighted_norm_sqr().max(old.weighted_norm_sqr()).sqrt();
    if dist.is_zero() {
        T::zero()
    } else {
        dist / norm
    }
}

fn scheme_at<T: Real>(config: &BdmftConfig<T>, alpha: T) -> TruncationScheme<T> {
    match (config.scheme.kind, config.alpha_scheme) {
        (SchemeKind::Fock, _) => config.scheme,
        (SchemeKind::Cts, AlphaScheme::FixedAlpha(a)) => config.scheme.with_alpha(a),
        (SchemeKind::Cts, _) => config.scheme.with_alpha(alpha),
    }
}

/// One self-consistency run from `start`.
pub fn run_from<T: Real>(config: &BdmftConfig<T>, start: &LoopStart<T>) -> Result<BdmftResult<T>> {
    config.validate()?;
    if config.scheme.is_cts() && config.alpha_scheme == AlphaScheme::MinimizeEtot {
        return invalid("MinimizeEtot runs go through optimize_alpha_outer");
    }
    if start.eps.len() != config.l_b {
        return invalid("starting bath has the wrong size");
    }
    let clock = Instant::now();
    let grid = config.grid()?;
    let mut params = AndersonParams {
        j_over_u: config.j_over_u,
        mu_over_u: config.mu_over_u,
        z: config.z,
        phi_c: start.phi_c.abs(),
        eps: start.eps.iter().map(|&e| e.max(T::lit(EPS_MIN))).collect(),
        v: start.v.clone(),
        w: start.w.clone(),
    };
    let mut alpha = if config.scheme.is_cts() { start.alpha } else { T::zero() };
    let fixed_ops: Option<OperatorSet<T>> = if config.optimizes_alpha_inside() {
        None
    } else {
        let scheme = scheme_at(config, alpha);
        alpha = if scheme.is_cts() { scheme.alpha } else { T::zero() };
        Some(build_operators(&scheme)?)
    };
    let energies = EnergyMap::for_grid(&grid.omegas);
    let mut delta_fit = hybridization_from_bath(&params, &grid);
    let mut poor_fit = false;
    let mut step_hint: Option<Vec<T>> = None;
    let mut alpha_prev: Option<(T, T)> = None;
    let mut last_change = T::one();
    let mut last: Option<(EDResult<T>, AndersonParams<T>, T, T)> = None;

    for iter in 1..=config.max_sc_iter {
        let ops = match &fixed_ops {
            Some(ops) => ops.clone(),
            None => {
                let tol = config.alpha_tol.max(T::lit(FIT_FRACTION) * last_change.min(T::one()));
                let next = alpha_minimizing_eaim(config, &params, alpha_prev, tol)?;
                let step = alpha_prev.map_or(T::lit(ALPHA_WINDOW), |(a, _)| (next - a).abs());
                alpha = next;
                alpha_prev = Some((alpha, step));
                build_operators(&config.scheme.with_alpha(alpha))?
            }
        };
        let ed = solve_impurity(&params, &ops)?;
        let g = lehmann_green(&ed.eigen, &ops, &ed.space, ed.phi_signed, &grid);
        let target = target_hybridization(&g, config.j_over_u, config.z);
        let mixed = if target.weighted_norm_sqr().is_zero() {
            target
        } else {
            delta_fit.mix(&target, config.mixing_delta)
        };
        let multi_start = iter == 1 || poor_fit;
        let hint = if multi_start { None } else { step_hint.as_deref() };
        let looseness = T::lit(FIT_FRACTION) * last_change.min(T::one());
        let fit = fit_bath_impl(&mixed, config.l_b, &params, multi_start, hint, looseness)?;
        poor_fit = fit.poor;
        let (x_old, x_new) = (pack_bath(&params, &energies), pack_bath(&fit.params, &energies));
        step_hint = Some(x_new.iter().zip(&x_old).map(|(&a, &b)| a - b).collect());
        let new_delta = hybridization_from_bath(&fit.params, &grid);
        let change = relative_change(&new_delta, &delta_fit);
        let residual = (ed.phi - params.phi_c).abs();
        let state = params.clone();
        last_change = change;

        if residual < config.tol_phi && change < config.tol_delta {
            return Ok(finish(config, ed, state, alpha, iter, clock, true, residual, change, poor_fit));
        }
        params = AndersonParams {
            phi_c: (T::one() - config.mixing_phi) * params.phi_c + config.mixing_phi * ed.phi,
            ..fit.params
        };
        delta_fit = new_delta;
        last = Some((ed, state, residual, change));
    }
    let (ed, state, residual, change) = last.expect("max_sc_iter >= 1");
    Ok(finish(config, ed, state, alpha, config.max_sc_iter, clock, false, residual, change, poor_fit))
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    config: &BdmftConfig<T>,
    ed: EDResult<T>,
    bath: AndersonParams<T>,
    alpha: T,
    iters: usize,
    clock: Instant,
    converged: bool,
    phi_residual: T,
    delta_change: T,
    poor_fit: bool,
) -> BdmftResult<T> {
    let (e_tot_site, e_kin_con, g_c0) = observables(&ed, &bath, config);
    BdmftResult {
        phi: ed.phi,
        phi_c: bath.phi_c,
        n_mean: ed.n_mean,
        nn_mean: ed.nn_mean,
        alpha_opt: alpha,
        e_tot_site,
        e_kin_con,
        g_c0,
        e_aim: ed.e_aim,
        bath,
        iters,
        wall_time: clock.elapsed(),
        converged,
        phi_residual,
        delta_change,
        poor_fit,
        mott_stability: None,
    }
}

/// Linear response `d⟨b₀⟩/dφ_C` of a symmetric solution at its bath.
/// Values above one mean the symmetric solution is unstable against
/// condensation.
pub fn mott_stability<T: Real>(config: &BdmftConfig<T>, mott: &BdmftResult<T>) -> Result<T> {
    let h = T::lit(1e-6);
    let ops = build_operators(&scheme_at(config, mott.alpha_opt))?;
    let params = AndersonParams { phi_c: h, ..mott.bath.clone() };
    let ed = solve_impurity(&params, &ops)?;
    Ok(ed.phi / h)
}

/// Picks between a condensed and a symmetric candidate.
fn select<T: Real>(
    config: &BdmftConfig<T>,
    sf: BdmftResult<T>,
    mut mott: BdmftResult<T>,
) -> Result<BdmftResult<T>> {
    let stability = if mott.converged && mott.phi < T::lit(1e-6) {
        Some(mott_stability(config, &mott)?)
    } else {
        None
    };
    mott.mott_stability = stability;
    let total = sf.wall_time + mott.wall_time;
    let condensed = sf.phi > T::lit(1e-6);
    let sf_wins = match stability {
        None => sf.converged || !mott.converged,
        Some(s) if s > T::one() => condensed,
        Some(_) => {
            sf.converged && condensed && sf.e_tot_site < mott.e_tot_site - T::lit(1e-10)
        }
    };
    let mut chosen = if sf_wins { BdmftResult { mott_stability: stability, ..sf } } else { mott };
    chosen.wall_time = total;
    Ok(chosen)
}

fn solve_with_starts<T: Real>(
    config: &BdmftConfig<T>,
    condensed: LoopStart<T>,
) -> Result<BdmftResult<T>> {
    if config.scheme.is_cts() && config.alpha_scheme == AlphaScheme::MinimizeEtot {
        return optimize_alpha_outer(config);
    }
    let symmetric = LoopStart { phi_c: T::zero(), ..condensed.clone() };
    let sf = run_from(config, &condensed)?;
    let mott = run_from(config, &symmetric)?;
    select(config, sf, mott)
}

/// Full BDMFT solution from the two cold starts `φ_C = 0.5` and `φ_C = 0`.
pub fn self_consistency_loop<T: Real>(config: &BdmftConfig<T>) -> Result<BdmftResult<T>> {
    config.validate()?;
    solve_with_starts(config, LoopStart::cold(config.l_b, T::lit(0.5)))
}

/// Like [`self_consistency_loop`] with both starts seeded by the bath of a
/// neighbouring solution.
pub fn self_consistency_loop_warm<T: Real>(
    config: &BdmftConfig<T>,
    previous: &BdmftResult<T>,
) -> Result<BdmftResult<T>> {
    config.validate()?;
    if previous.bath.n_bath() != config.l_b {
        return self_consistency_loop(config);
    }
    let mut start = LoopStart::from_result(previous);
    if start.phi_c < T::lit(1e-6) {
        start.phi_c = T::lit(0.5);
    }
    solve_with_starts(config, start)
}

/// Minimizes the converged `e_tot_site` over `α`, each evaluation being a
/// full solution at fixed `α`. Non-converged evaluations count as `+∞`.
pub fn optimize_alpha_outer<T: Real>(config: &BdmftConfig<T>) -> Result<BdmftResult<T>> {
    config.validate()?;
    if !(config.scheme.is_cts() && config.alpha_scheme == AlphaScheme::MinimizeEtot) {
        return invalid("optimize_alpha_outer needs a coherent-tail scheme with MinimizeEtot");
    }
    let clock = Instant::now();
    let mut runs: Vec<(T, BdmftResult<T>)> = Vec::new();
    let mut failure = None;
    let m = minimize_scalar(
        |a| {
            let inner = BdmftConfig { alpha_scheme: AlphaScheme::FixedAlpha(a), ..config.clone() };
            match self_consistency_loop(&inner) {
                Ok(r) => {
                    let e = if r.converged { r.e_tot_site } else { T::infinity() };
                    runs.push((a, r));
                    e
                }
                Err(err) => {
                    failure.get_or_insert(err);
                    T::infinity()
                }
            }
        },
        T::zero(),
        config.alpha_max,
        config.alpha_tol.max(T::lit(1e-5)),
    )?;
    let best = runs.into_iter().find(|(a, _)| *a == m.x).map(|(_, r)| r);
    match (best, failure) {
        (Some(mut r), _) => {
            r.wall_time = clock.elapsed();
            if !m.f.is_finite() {
                r.converged = false;
            }
            Ok(r)
        }
        (None, Some(err)) => Err(err),
        (None, None) => Err(Error::Config("alpha optimization produced no run".into())),
    }
}

/// Dispatches on the `α` scheme.
pub fn solve<T: Real>(config: &BdmftConfig<T>) -> Result<BdmftResult<T>> {
    self_consistency_loop(config)
}
