//! Homogeneous single-site Gutzwiller mean-field solver.
//!
//! The local Hamiltonian `H(φ) = −Jz(b†φ + φb) + ½ n(n−1) − μn` (energies in
//! units of `U`) is solved self-consistently in `φ = ⟨b⟩`. For coherent-tail
//! schemes the tail parameter is chosen by minimizing the per-site energy
//! `−Jz⟨b⟩² + ½⟨n(n−1)⟩ − μ⟨n⟩` over `α` with `φ` re-converged at each `α`.

use std::time::{Duration, Instant};

use crate::basis::{build_operators, OperatorSet, TruncationScheme};
use crate::error::{invalid, Result};
use crate::numerics::{eigh, fixed_point, minimize_scalar, Matrix, SymmetricMatrix};
use crate::Real;

#[derive(Debug, Clone)]
pub struct GutzwillerConfig<T> {
    pub j_over_u: T,
    pub mu_over_u: T,
    pub z: usize,
    pub scheme: TruncationScheme<T>,
    pub mixing: T,
    pub tol_phi: T,
    pub max_iter: usize,
    /// Upper end of the `α` search interval; the lower end is 0.
    pub alpha_max: T,
    /// Absolute tolerance of the `α` search.
    pub alpha_tol: T,
    /// Extra starting field tried next to the two cold seeds (warm start).
    pub warm_phi: Option<T>,
}

impl<T: Real> GutzwillerConfig<T> {
    pub fn new(j_over_u: T, mu_over_u: T, z: usize, scheme: TruncationScheme<T>) -> Self {
        Self {
            j_over_u,
            mu_over_u,
            z,
            scheme,
            mixing: T::lit(0.7),
            tol_phi: T::lit(1e-10),
            max_iter: 2000,
            alpha_max: default_alpha_max(scheme.n_c),
            alpha_tol: T::lit(1e-6),
            warm_phi: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.z == 0 {
            return invalid("coordination number must be >= 1");
        }
        if !(self.j_over_u >= T::zero()) || !self.mu_over_u.is_finite() {
            return invalid("J/U must be >= 0 and mu/U finite");
        }
        if !(self.mixing > T::zero() && self.mixing <= T::one()) {
            return invalid("mixing must lie in (0, 1]");
        }
        if !(self.alpha_max > T::zero()) {
            return invalid("alpha_max must be positive");
        }
        Ok(())
    }

    fn jz(&self) -> T {
        self.j_over_u * T::from_count(self.z)
    }
}

/// Default `α` search interval end, `2√N_c + 3`.
pub fn default_alpha_max<T: Real>(n_c: usize) -> T {
    T::lit(2.0) * T::from_count(n_c).sqrt() + T::lit(3.0)
}

#[derive(Debug, Clone)]
pub struct GutzwillerResult<T> {
    /// Gauge-fixed condensate `|⟨b⟩|`.
    pub phi: T,
    pub n_mean: T,
    /// `⟨H(φ)⟩` with the field at its converged value.
    pub e_paper: T,
    /// Per-site lattice energy `−Jz⟨b⟩² + ½⟨n(n−1)⟩ − μ⟨n⟩`.
    pub e_site: T,
    pub alpha_opt: T,
    pub iters: usize,
    pub wall_time: Duration,
    pub converged: bool,
    /// Ground-state coefficients in the scheme basis.
    pub coefficients: Vec<T>,
}

/// `(e_paper, e_site)` of a normalized local state.
pub fn energy<T: Real>(
    ops: &OperatorSet<T>,
    coefficients: &[T],
    phi: T,
    config: &GutzwillerConfig<T>,
) -> Result<(T, T)> {
    if coefficients.len() != ops.dim {
        return invalid("coefficient vector does not match the basis dimension");
    }
    let norm: T = coefficients.iter().map(|&c| c * c).sum::<T>().sqrt();
    if (norm - T::one()).abs() > T::lit(1e-10).max(T::lit(64.0) * T::epsilon()) {
        return invalid(format!("state is not normalized (norm {norm})"));
    }
    let jz = config.jz();
    let b = ops.b.quad_form(coefficients);
    let onsite = T::lit(0.5) * ops.nn.quad_form(coefficients)
        - config.mu_over_u * ops.n.quad_form(coefficients);
    // ⟨b†⟩ = ⟨b⟩ for real states
    let e_paper = -jz * (b * phi + phi * b) + onsite;
    let e_site = -jz * b * b + onsite;
    Ok((e_paper, e_site))
}

fn local_hamiltonian<T: Real>(
    ops: &OperatorSet<T>,
    jz: T,
    mu: T,
    phi: T,
) -> Result<SymmetricMatrix<T>> {
    let onsite = ops.nn.scaled(T::lit(0.5)).add(&ops.n.scaled(-mu));
    let hop = ops.b.add(&ops.b_dag).scaled(-jz * phi);
    SymmetricMatrix::from_matrix(onsite.add(&hop))
}

fn ground_state<T: Real>(ops: &OperatorSet<T>, jz: T, mu: T, phi: T) -> Result<Vec<T>> {
    let h = local_hamiltonian(ops, jz, mu, phi)?;
    let eig = eigh(&h)?;
    Ok(eig.vector(0).to_vec())
}

fn expectation<T: Real>(m: &Matrix<T>, psi: &[T]) -> T {
    m.quad_form(psi)
}

struct SeedRun<T> {
    field: T,
    psi: Vec<T>,
    b: T,
    e_site: T,
    iters: usize,
    converged: bool,
}

fn run_seed<T: Real>(ops: &OperatorSet<T>, config: &GutzwillerConfig<T>, phi0: T) -> Result<SeedRun<T>> {
    let jz = config.jz();
    let mu = config.mu_over_u;
    let mut failure = None;
    let fp = fixed_point(
        |x| match ground_state(ops, jz, mu, x[0]) {
            Ok(psi) => vec![expectation(&ops.b, &psi)],
            Err(e) => {
                failure.get_or_insert(e);
                vec![T::nan()]
            }
        },
        &[phi0],
        config.mixing,
        config.tol_phi,
        config.max_iter,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let field = fp.x[0];
    let psi = ground_state(ops, jz, mu, field)?;
    let b = expectation(&ops.b, &psi);
    let (_, e_site) = energy(ops, &psi, field, config)?;
    Ok(SeedRun { field, psi, b, e_site, iters: fp.iters, converged: fp.converged })
}

/// Self-consistent solution at the scheme's own `α`.
///
/// Seeds `φ₀ = 0` and `φ₀ = 0.5` (plus the warm start, if any) are iterated
/// and the lowest `e_site` wins; near-ties go to the `φ₀ = 0` branch.
pub fn solve_fixed_alpha<T: Real>(config: &GutzwillerConfig<T>) -> Result<GutzwillerResult<T>> {
    config.validate()?;
    let start = Instant::now();
    let ops = build_operators(&config.scheme)?;
    let mut seeds = vec![T::zero(), T::lit(0.5)];
    if let Some(w) = config.warm_phi {
        seeds.push(w);
    }
    let mut best: Option<SeedRun<T>> = None;
    let mut iters = 0;
    for &seed in &seeds {
        let run = run_seed(&ops, config, seed)?;
        iters += run.iters;
        let better = match &best {
            None => true,
            Some(b) => {
                let tie = T::lit(1e-12) * b.e_site.abs().max(T::one());
                run.e_site < b.e_site - tie
            }
        };
        if better {
            best = Some(run);
        }
    }
    let run = best.expect("at least one seed");
    let (e_paper, e_site) = energy(&ops, &run.psi, run.field, config)?;
    Ok(GutzwillerResult {
        phi: run.b.abs(),
        n_mean: expectation(&ops.n, &run.psi),
        e_paper,
        e_site,
        alpha_opt: if config.scheme.is_cts() { config.scheme.alpha } else { T::zero() },
        iters,
        wall_time: start.elapsed(),
        converged: run.converged,
        coefficients: run.psi,
    })
}

/// Full solve: for coherent-tail schemes `α` is optimized on `[0, alpha_max]`.
pub fn solve<T: Real>(config: &GutzwillerConfig<T>) -> Result<GutzwillerResult<T>> {
    config.validate()?;
    if !config.scheme.is_cts() {
        return solve_fixed_alpha(config);
    }
    let start = Instant::now();
    let mut failure = None;
    let mut total_iters = 0;
    let objective = |alpha: T| {
        let mut cfg = config.clone();
        cfg.scheme = cfg.scheme.with_alpha(alpha);
        match solve_fixed_alpha(&cfg) {
            Ok(r) => {
                total_iters += r.iters;
                r.e_site
            }
            Err(e) => {
                failure.get_or_insert(e);
                T::infinity()
            }
        }
    };
    let best = minimize_scalar(objective, T::zero(), config.alpha_max, config.alpha_tol)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut cfg = config.clone();
    cfg.scheme = cfg.scheme.with_alpha(best.x);
    let mut result = solve_fixed_alpha(&cfg)?;
    result.iters += total_iters;
    result.wall_time = start.elapsed();
    Ok(result)
}

/// Analytic mean-field boundary of the Mott lobe containing `μ/U`:
/// `zJ_c/U = (n − x)(x − n + 1)/(1 + x)` with `x = μ/U`, `n = ⌈x⌉`.
pub fn mean_field_lobe_boundary(mu_over_u: f64, z: usize) -> f64 {
    let x = mu_over_u;
    let n = x.ceil().max(1.0);
    (n - x) * (x - n + 1.0) / (1.0 + x) / z as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(j: f64, mu: f64, scheme: TruncationScheme<f64>) -> GutzwillerConfig<f64> {
        GutzwillerConfig::new(j, mu, 6, scheme)
    }

    #[test]
    fn atomic_limit() {
        for scheme in [TruncationScheme::fock(2), TruncationScheme::fock(5), TruncationScheme::cts(2, 0.7)] {
            let r = solve_fixed_alpha(&cfg(0.0, 0.4, scheme)).unwrap();
            assert!(r.phi.abs() < 1e-14);
            assert!((r.n_mean - 1.0).abs() < 1e-12);
            assert!((r.e_site + 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn deep_superfluid_near_gross_pitaevskii() {
        let r = solve_fixed_alpha(&cfg(0.4, 0.4, TruncationScheme::fock(20))).unwrap();
        assert!(r.converged);
        let gp = (6.0f64 * 0.4 + 0.4).sqrt();
        assert!((r.phi - gp).abs() / gp < 0.05, "phi {}", r.phi);
        // number fluctuations push ⟨n⟩ above the coherent-state value φ²
        assert!(r.n_mean >= r.phi * r.phi);
        assert!((r.n_mean - 2.8).abs() / 2.8 < 0.10, "n {}", r.n_mean);
    }

    #[test]
    fn inside_first_lobe() {
        let jc = mean_field_lobe_boundary(0.4, 6);
        assert!((jc - 0.028_571).abs() < 1e-6);
        let r = solve_fixed_alpha(&cfg(0.028, 0.4, TruncationScheme::fock(20))).unwrap();
        assert!(r.phi < 1e-6);
        assert!((r.n_mean - 1.0).abs() < 1e-8);
    }

    #[test]
    fn energy_identities() {
        let c = cfg(0.1, 0.4, TruncationScheme::fock(4));
        let ops = build_operators(&c.scheme).unwrap();
        let (ep, es) = energy(&ops, &[0.0, 1.0, 0.0, 0.0], 0.0, &c).unwrap();
        assert!((ep + 0.4).abs() < 1e-15 && (es + 0.4).abs() < 1e-15);
        let (ep, es) = energy(&ops, &[1.0, 0.0, 0.0, 0.0], 0.3, &c).unwrap();
        assert_eq!((ep, es), (0.0, 0.0));
        assert!(energy(&ops, &[1.0, 1.0, 0.0, 0.0], 0.0, &c).is_err());

        let r = solve_fixed_alpha(&cfg(0.1, 0.4, TruncationScheme::fock(10))).unwrap();
        let jz = 0.6;
        assert!((r.e_paper - (r.e_site - jz * r.phi * r.phi)).abs() < 1e-9);
    }

    #[test]
    fn cts_never_worse_than_extra_fock_state() {
        let c = cfg(0.4, 0.4, TruncationScheme::cts(4, 0.0));
        let opt = solve(&c).unwrap();
        let mut at_zero = c.clone();
        at_zero.scheme = at_zero.scheme.with_alpha(1e-9);
        let zero = solve_fixed_alpha(&at_zero).unwrap();
        assert!(opt.e_site <= zero.e_site + 1e-12);
        assert!(opt.alpha_opt > 0.0);
    }

    #[test]
    fn gauge_sign_of_seed() {
        let mut c = cfg(0.05, 0.5, TruncationScheme::fock(8));
        c.warm_phi = Some(-0.3);
        let a = solve_fixed_alpha(&c).unwrap();
        c.warm_phi = Some(0.3);
        let b = solve_fixed_alpha(&c).unwrap();
        assert!(a.phi >= 0.0);
        assert!((a.phi - b.phi).abs() < 1e-9);
        assert!((a.e_site - b.e_site).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_consistency() {
        let c = cfg(0.05, 1.5, TruncationScheme::fock(12));
        let r = solve_fixed_alpha(&c).unwrap();
        let ops = build_operators(&c.scheme).unwrap();
        let b = ops.b.quad_form(&r.coefficients);
        assert!(r.converged);
        assert!((b.abs() - r.phi).abs() < 1e-15);
        // the converged field reproduces ⟨b⟩
        let psi = ground_state(&ops, 0.3, 1.5, r.phi).unwrap();
        assert!((ops.b.quad_form(&psi).abs() - r.phi).abs() < 1e-9);
    }

    #[test]
    fn single_precision_solver() {
        let mut c = GutzwillerConfig::new(0.4f32, 0.4, 6, TruncationScheme::fock(12));
        c.tol_phi = 1e-5;
        let r = solve_fixed_alpha(&c).unwrap();
        let reference = solve_fixed_alpha(&cfg(0.4, 0.4, TruncationScheme::fock(12))).unwrap();
        assert!(r.converged);
        assert!((r.n_mean as f64 - reference.n_mean).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = cfg(0.1, 0.4, TruncationScheme::fock(4));
        c.z = 0;
        assert!(solve(&c).is_err());
        let c = cfg(-0.1, 0.4, TruncationScheme::fock(4));
        assert!(solve(&c).is_err());
    }
}
