//! Built-in oracle checks: closed forms against direct series, basis
//! orthonormality in a large Fock space, the leakage invariant with a
//! mutated-operator negative control, Lehmann sum rules, a two-site
//! hybridization oracle and bath-fit round trips.

use std::fmt;

use num_complex::Complex;

use crate::basis::{build_operators, OperatorSet, TruncationScheme};
use crate::bdmft::{fit_bath, hybridization_from_bath};
use crate::impurity::{lehmann_amplitudes, lehmann_green, solve_impurity, AndersonParams, MatsubaraGrid};
use crate::Result;

pub const SERIES_ALPHAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];
pub const SERIES_CUTOFFS: std::ops::RangeInclusive<usize> = 2..=12;
/// Relative tolerance of the series and orthonormality oracles.
pub const SERIES_TOL: f64 = 1e-12;
/// Relative tolerance of the Lehmann sum rules.
pub const SUM_RULE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<28} {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

/// Runs every check.
pub fn run() -> SelfTestReport {
    SelfTestReport {
        checks: vec![
            check("cts-series", series_oracle()),
            check("orthonormality", orthonormality()),
            check("b-leakage", leakage_all()),
            check("b-leakage-negative-control", leakage_negative_control()),
            check("lehmann-sum-rules", lehmann_sum_rules()),
            check("two-site-hybridization", two_site_oracle()),
            check("bath-fit-round-trip", fit_round_trip()),
        ],
    }
}

fn rel_err(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(1.0)
}

/// Coherent-tail quantities summed term by term from
/// `t_n = α^{2n}/n!`, `n ≥ N_c`.
#[derive(Debug, Clone, Copy)]
pub struct SeriesValues {
    pub norm_const: f64,
    pub lower_coupling: f64,
    pub b_diag: f64,
    pub n_mean: f64,
    pub nn_mean: f64,
}

pub fn direct_series(alpha: f64, n_c: usize) -> SeriesValues {
    let a2 = alpha * alpha;
    // α^{N_c}/√((N_c−1)!) and t_{N_c} by explicit products
    let mut lead = alpha;
    for k in 1..n_c {
        lead *= alpha / (k as f64).sqrt();
    }
    let mut t = 1.0;
    for k in 1..=n_c {
        t *= a2 / k as f64;
    }
    let (mut s, mut s_b, mut s_n, mut s_nn) = (0.0, 0.0, 0.0, 0.0);
    let mut n = n_c;
    loop {
        let nf = n as f64;
        s += t;
        s_b += alpha * t;
        s_n += nf * t;
        s_nn += nf * (nf - 1.0) * t;
        t *= a2 / (nf + 1.0);
        n += 1;
        if nf > a2 && t < 1e-20 * s {
            break;
        }
    }
    let c = s.sqrt().recip();
    SeriesValues {
        norm_const: c,
        lower_coupling: c * lead,
        b_diag: s_b / s,
        n_mean: s_n / s,
        nn_mean: s_nn / s,
    }
}

/// Worst relative deviation of the closed forms from [`direct_series`].
pub fn series_worst_error() -> Result<(f64, String)> {
    let mut worst = (0.0, String::new());
    for &alpha in &SERIES_ALPHAS {
        for n_c in SERIES_CUTOFFS {
            let ops = build_operators(&TruncationScheme::cts(n_c, alpha))?;
            let s = direct_series(alpha, n_c);
            let pairs = [
                ("c", ops.norm_const, s.norm_const),
                ("<Nc-1|b|a>", ops.b[(n_c - 1, n_c)], s.lower_coupling),
                ("<a|b|a>", ops.b[(n_c, n_c)], s.b_diag),
                ("<n>", ops.n[(n_c, n_c)], s.n_mean),
                ("<n(n-1)>", ops.nn[(n_c, n_c)], s.nn_mean),
            ];
            for (what, closed, series) in pairs {
                let e = rel_err(closed, series);
                if e > worst.0 {
                    worst = (e, format!("{what} at alpha={alpha}, n_c={n_c}"));
                }
            }
        }
    }
    Ok(worst)
}

fn series_oracle() -> Result<(bool, String)> {
    let (e, at) = series_worst_error()?;
    Ok((e <= SERIES_TOL, format!("max rel err {e:.2e} ({at})")))
}

/// Basis vectors of the scheme written out in the Fock space `{|0⟩..|n_max⟩}`.
fn embed(alpha: f64, n_c: usize, n_max: usize) -> Vec<Vec<f64>> {
    let mut vecs: Vec<Vec<f64>> = (0..n_c)
        .map(|k| {
            let mut v = vec![0.0; n_max + 1];
            v[k] = 1.0;
            v
        })
        .collect();
    // αⁿ/√n! by recursion, then normalized numerically
    let mut tail = vec![0.0; n_max + 1];
    let mut amp = 1.0;
    for (n, slot) in tail.iter_mut().enumerate() {
        if n > 0 {
            amp *= alpha / (n as f64).sqrt();
        }
        if n >= n_c {
            *slot = amp;
        }
    }
    let norm = tail.iter().map(|x| x * x).sum::<f64>().sqrt();
    tail.iter_mut().for_each(|x| *x /= norm);
    vecs.push(tail);
    vecs
}

fn orthonormality() -> Result<(bool, String)> {
    let mut worst = (0.0f64, String::new());
    for &alpha in &SERIES_ALPHAS {
        for n_c in SERIES_CUTOFFS {
            let n_max = n_c + 160;
            let basis = embed(alpha, n_c, n_max);
            let ops = build_operators(&TruncationScheme::cts(n_c, alpha))?;
            let dim = basis.len();
            let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
            // b|v⟩, n|v⟩ and n(n−1)|v⟩ in the big space
            let apply = |v: &[f64], which: u8| -> Vec<f64> {
                (0..=n_max)
                    .map(|m| match which {
                        0 => v.get(m + 1).map_or(0.0, |x| x * ((m + 1) as f64).sqrt()),
                        1 => v[m] * m as f64,
                        _ => v[m] * (m as f64) * (m as f64 - 1.0),
                    })
                    .collect()
            };
            for i in 0..dim {
                for j in 0..dim {
                    let gram = dot(&basis[i], &basis[j]) - if i == j { 1.0 } else { 0.0 };
                    let entries = [
                        ("gram", gram, 0.0),
                        ("b", dot(&basis[i], &apply(&basis[j], 0)), ops.b[(i, j)]),
                        ("n", dot(&basis[i], &apply(&basis[j], 1)), ops.n[(i, j)]),
                        ("nn", dot(&basis[i], &apply(&basis[j], 2)), ops.nn[(i, j)]),
                    ];
                    for (what, big, small) in entries {
                        let e = rel_err(big, small);
                        if e > worst.0 {
                            worst = (e, format!("{what}[{i},{j}] at alpha={alpha}, n_c={n_c}"));
                        }
                    }
                }
            }
        }
    }
    Ok((worst.0 <= SERIES_TOL, format!("max rel err {:.2e} ({})", worst.0, worst.1)))
}

/// `|b_leakage|` relative to `⟨α|n|α⟩`; the invariant holds below `SERIES_TOL`.
pub fn leakage_violation(ops: &OperatorSet<f64>) -> f64 {
    let last = ops.dim - 1;
    ops.b_leakage().abs() / ops.n[(last, last)].max(1.0)
}

fn leakage_all() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for &alpha in &SERIES_ALPHAS {
        for n_c in SERIES_CUTOFFS {
            worst = worst.max(leakage_violation(&build_operators(&TruncationScheme::cts(n_c, alpha))?));
        }
    }
    Ok((worst <= SERIES_TOL, format!("max rel leakage {worst:.2e}")))
}

/// Operator set with the `⟨N_c−1|b|α⟩` coefficient scaled by `1 + rel`.
pub fn mutated_operators(alpha: f64, n_c: usize, rel: f64) -> Result<OperatorSet<f64>> {
    let mut ops = build_operators(&TruncationScheme::cts(n_c, alpha))?;
    ops.b[(n_c - 1, n_c)] *= 1.0 + rel;
    ops.b_dag = ops.b.transpose();
    Ok(ops)
}

fn leakage_negative_control() -> Result<(bool, String)> {
    let v = leakage_violation(&mutated_operators(1.0, 5, 1e-6)?);
    Ok((v > SERIES_TOL, format!("mutated coefficient leaks {v:.2e}")))
}

fn sum_rule_fixture() -> (AndersonParams<f64>, TruncationScheme<f64>) {
    let params = AndersonParams {
        j_over_u: 0.1,
        mu_over_u: 0.4,
        z: 6,
        phi_c: 0.3,
        eps: vec![0.4, 1.3],
        v: vec![0.3, 0.2],
        w: vec![0.05, -0.1],
    };
    (params, TruncationScheme::cts(4, 1.2))
}

fn lehmann_sum_rules() -> Result<(bool, String)> {
    let (params, scheme) = sum_rule_fixture();
    let ops = build_operators(&scheme)?;
    let ed = solve_impurity(&params, &ops)?;
    let (a, b) = lehmann_amplitudes(&ed.eigen, &ops, &ed.space, ed.phi_signed);
    let psi = ed.ground_vector();
    let b_psi = ed.space.apply_impurity(&ops.b, psi);
    let bd_psi = ed.space.apply_impurity(&ops.b_dag, psi);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let phi2 = ed.phi_signed * ed.phi_signed;
    let rules = [
        ("<db db+>", a.iter().map(|x| x * x).sum::<f64>(), dot(&bd_psi, &bd_psi) - phi2),
        ("<db+ db>", b.iter().map(|x| x * x).sum::<f64>(), dot(&b_psi, &b_psi) - phi2),
        ("<db db>", a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>(), dot(&bd_psi, &b_psi) - phi2),
    ];
    let mut worst = (0.0f64, "");
    for (what, lehmann, direct) in rules {
        let e = rel_err(lehmann, direct);
        if e > worst.0 {
            worst = (e, what);
        }
    }
    // high-frequency tail: |iω g11 − Σ(A²−B²)| ≤ Σ(A²+B²)ΔE/ω
    let grid = MatsubaraGrid::new(40.0, 256)?;
    let g = lehmann_green(&ed.eigen, &ops, &ed.space, ed.phi_signed, &grid);
    let e0 = ed.eigen.values[0];
    let moment: f64 = a.iter().zip(&b).map(|(x, y)| x * x - y * y).sum();
    let k = grid.len() - 1;
    let om = grid.omegas[k];
    let bound: f64 = a
        .iter()
        .zip(&b)
        .zip(&ed.eigen.values)
        .map(|((x, y), e)| (x * x + y * y) * (e - e0) / om)
        .sum();
    let tail = (Complex::new(0.0, om) * g.g11[k] - moment).norm();
    let tail_ok = tail <= bound * (1.0 + 1e-9) + 1e-14;
    Ok((
        worst.0 <= SUM_RULE_TOL && tail_ok,
        format!("max rel err {:.2e} ({}), tail {tail:.2e} <= {bound:.2e}", worst.0, worst.1),
    ))
}

/// Non-interacting level at `−μ` coupled to one bath orbital: the ED
/// Green's function must equal `[iω + μ − Δ(iω)]⁻¹`.
fn two_site_oracle() -> Result<(bool, String)> {
    let (eps, v, mu) = (0.5, 0.2, -0.5);
    let p = AndersonParams { j_over_u: 0.0, mu_over_u: mu, z: 6, phi_c: 0.0, eps: vec![eps], v: vec![v], w: vec![0.0] };
    // U drops out: only the vacuum and one-particle states are involved
    let ops = build_operators(&TruncationScheme::fock(12))?;
    let ed = solve_impurity(&p, &ops)?;
    let grid = MatsubaraGrid::new(40.0, 256)?;
    let g = lehmann_green(&ed.eigen, &ops, &ed.space, ed.phi_signed, &grid);
    let delta = hybridization_from_bath(&p, &grid);
    let mut worst = 0.0f64;
    for k in 0..grid.len() {
        let oracle = Complex::new(1.0, 0.0) / (Complex::new(mu, grid.omegas[k]) - delta.g11[k]);
        worst = worst.max((g.g11[k] - oracle).norm() / oracle.norm());
    }
    Ok((worst <= 1e-2, format!("max rel deviation {worst:.2e} (limit 1e-2)")))
}

fn fit_round_trip() -> Result<(bool, String)> {
    let grid = MatsubaraGrid::new(40.0, 256)?;
    let bath = |eps: Vec<f64>, v: Vec<f64>, w: Vec<f64>| AndersonParams {
        j_over_u: 0.1,
        mu_over_u: 0.4,
        z: 6,
        phi_c: 0.0,
        eps,
        v,
        w,
    };
    let truth = bath(vec![0.8], vec![0.2], vec![0.05]);
    let target = hybridization_from_bath(&truth, &grid);
    let fit = fit_bath(&target, 1, &bath(vec![1.0], vec![0.1], vec![0.01]))?;
    let param_err = [
        fit.params.eps[0] - 0.8,
        fit.params.v[0] - 0.2,
        fit.params.w[0] - 0.05,
    ]
    .iter()
    .fold(0.0f64, |m, x| m.max(x.abs()));
    let truth2 = bath(vec![0.3, 1.5], vec![0.25, 0.4], vec![0.05, -0.1]);
    let target2 = hybridization_from_bath(&truth2, &grid);
    let fit2 = fit_bath(&target2, 2, &bath(vec![1.0, 2.0], vec![0.1, 0.1], vec![0.01, 0.01]))?;
    let rel2 = fit2.chi2 / target2.weighted_norm_sqr();
    Ok((
        param_err <= 1e-5 && rel2 <= 1e-10 && !fit.poor && !fit2.poor,
        format!("one orbital: max param err {param_err:.2e}; two orbitals: rel chi2 {rel2:.2e}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let report = run();
        for c in &report.checks {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn series_matches_known_value() {
        let s = direct_series(1.0, 2);
        let e = std::f64::consts::E;
        assert!((s.norm_const - 1.0 / (e - 2.0).sqrt()).abs() < 1e-13);
        assert!((s.b_diag - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mutation_is_detected() {
        assert!(leakage_violation(&mutated_operators(2.0, 3, 1e-6).unwrap()) > SERIES_TOL);
        assert!(leakage_violation(&build_operators(&TruncationScheme::cts(3, 2.0)).unwrap()) <= SERIES_TOL);
    }
}
