//! Truncated local boson basis: the hard Fock cutoff `{|0⟩..|N_c−1⟩}` and the
//! same set extended by one coherent-tail state
//!
//! ```text
//! |α_Nc⟩ = c_Nc · Σ_{n≥N_c} αⁿ/√(n!) |n⟩,   c_Nc = (Σ_{n≥N_c} α²ⁿ/n!)^{-1/2}
//! ```
//!
//! All closed forms are evaluated through the scaled tail sum
//! `R(α, N_c) = Σ_{k≥0} α²ᵏ N_c!/(N_c+k)!`, which is `1` at `α = 0`. This keeps
//! `c_Nc·α^Nc` finite for tiny `α` and makes `α = 0` coincide bit-for-bit
//! with the Fock state `|N_c⟩`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::numerics::Matrix;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Fock,
    Cts,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Fock => "fock",
            SchemeKind::Cts => "cts",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fock" => Ok(SchemeKind::Fock),
            "cts" => Ok(SchemeKind::Cts),
            other => invalid(format!("unknown scheme kind `{other}`")),
        }
    }
}

/// Local basis choice: `n_c` Fock states, optionally followed by the
/// coherent-tail state with parameter `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationScheme<T> {
    pub kind: SchemeKind,
    pub n_c: usize,
    /// Only meaningful for [`SchemeKind::Cts`].
    pub alpha: T,
}

impl<T: Real> TruncationScheme<T> {
    pub fn fock(n_c: usize) -> Self {
        Self { kind: SchemeKind::Fock, n_c, alpha: T::zero() }
    }

    pub fn cts(n_c: usize, alpha: T) -> Self {
        Self { kind: SchemeKind::Cts, n_c, alpha }
    }

    pub fn with_alpha(self, alpha: T) -> Self {
        Self { alpha, ..self }
    }

    pub fn is_cts(&self) -> bool {
        self.kind == SchemeKind::Cts
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SchemeKind::Fock => self.n_c,
            SchemeKind::Cts => self.n_c + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SchemeKind::Fock if self.n_c == 0 => invalid("Fock cutoff must be positive"),
            SchemeKind::Cts if self.n_c < 2 => invalid("coherent-tail scheme needs n_c >= 2"),
            SchemeKind::Cts if !(self.alpha >= T::zero()) || !self.alpha.is_finite() => {
                invalid("coherent-tail parameter must be finite and >= 0")
            }
            _ => Ok(()),
        }
    }
}

impl<T: Real> fmt::Display for TruncationScheme<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.n_c)
    }
}

/// Parses `fock:<Nc>` or `cts:<Nc>` (alpha starts at zero).
impl<T: Real> FromStr for TruncationScheme<T> {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, n) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("scheme `{s}` is not of the form kind:Nc")))?;
        let kind: SchemeKind = kind.parse()?;
        let n_c: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad cutoff in scheme `{s}`")))?;
        let scheme = Self { kind, n_c, alpha: T::zero() };
        scheme.validate()?;
        Ok(scheme)
    }
}

/// `R(α, N_c) = Σ_{k≥0} α²ᵏ N_c!/(N_c+k)!`, summed until the relative term
/// size drops below 1e-17.
pub(crate) fn scaled_tail<T: Real>(alpha: T, n_c: usize) -> T {
    let a2 = alpha * alpha;
    let cap = (T::lit(10.0) * (T::from_count(n_c) + a2 + T::lit(20.0)))
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX);
    let threshold = T::lit(1e-17);
    let mut term = T::one();
    let mut sum = T::one();
    for k in 1..=cap {
        term = term * a2 / T::from_count(n_c + k);
        sum += term;
        if term / sum < threshold {
            break;
        }
    }
    sum
}

/// Normalization constant `c_Nc` of the coherent-tail state.
///
/// Infinite for `α = 0` and `N_c > 0`; the operator construction never
/// needs it there.
pub fn cts_norm_const<T: Real>(alpha: T, n_c: usize) -> Result<T> {
    if !(alpha >= T::zero()) {
        return invalid("alpha must be >= 0");
    }
    if alpha.is_zero() {
        return Ok(if n_c == 0 { T::one() } else { T::infinity() });
    }
    let r = scaled_tail(alpha, n_c);
    // ln c = ½ ln N_c! − N_c ln α − ½ ln R
    let ln_fact: T = (1..=n_c).map(|k| T::from_count(k).ln()).sum();
    let half = T::lit(0.5);
    Ok((half * ln_fact - T::from_count(n_c) * alpha.ln() - half * r.ln()).exp())
}

/// `⟨N_c−1|b|α_Nc⟩ = c_Nc α^Nc / √((N_c−1)!) = √(N_c / R)`.
pub(crate) fn lower_coupling<T: Real>(alpha: T, n_c: usize) -> T {
    (T::from_count(n_c) / scaled_tail(alpha, n_c)).sqrt()
}

/// `(⟨α|n|α⟩, ⟨α|n(n−1)|α⟩)` of the coherent-tail state.
pub fn cts_moments<T: Real>(alpha: T, n_c: usize) -> Result<(T, T)> {
    if n_c < 2 {
        return invalid("coherent-tail moments need n_c >= 2");
    }
    if !(alpha >= T::zero()) {
        return invalid("alpha must be >= 0");
    }
    let r = scaled_tail(alpha, n_c);
    let a2 = alpha * alpha;
    let nc = T::from_count(n_c);
    let n_mean = a2 + nc / r;
    let nn_mean = a2 * a2 + (nc * (nc - T::one()) + a2 * nc) / r;
    Ok((n_mean, nn_mean))
}

/// Dense local operators projected onto a truncation scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet<T> {
    pub dim: usize,
    pub b: Matrix<T>,
    pub b_dag: Matrix<T>,
    pub n: Matrix<T>,
    /// `n(n−1)`
    pub nn: Matrix<T>,
    /// `c_Nc`; `1` for Fock schemes and infinite for a CTS at `α = 0`.
    pub norm_const: T,
}

pub fn build_operators<T: Real>(scheme: &TruncationScheme<T>) -> Result<OperatorSet<T>> {
    scheme.validate()?;
    let dim = scheme.dim();
    let n_c = scheme.n_c;
    let mut b = Matrix::zeros(dim);
    let mut n = Matrix::zeros(dim);
    let mut nn = Matrix::zeros(dim);
    for k in 0..n_c {
        let kf = T::from_count(k);
        if k >= 1 {
            b[(k - 1, k)] = kf.sqrt();
        }
        n[(k, k)] = kf;
        nn[(k, k)] = kf * (kf - T::one());
    }
    let mut norm_const = T::one();
    if scheme.is_cts() {
        let alpha = scheme.alpha;
        b[(n_c - 1, n_c)] = lower_coupling(alpha, n_c);
        b[(n_c, n_c)] = alpha;
        let (n_mean, nn_mean) = cts_moments(alpha, n_c)?;
        n[(n_c, n_c)] = n_mean;
        nn[(n_c, n_c)] = nn_mean;
        norm_const = cts_norm_const(alpha, n_c)?;
    }
    let b_dag = b.transpose();
    Ok(OperatorSet { dim, b, b_dag, n, nn, norm_const })
}

impl<T: Real> OperatorSet<T> {
    /// `‖b|α⟩‖² − Σ_k ⟨k|b|α⟩²` for the last basis state; zero when `b` maps
    /// the coherent-tail state back into the basis exactly.
    pub fn b_leakage(&self) -> T {
        let last = self.dim - 1;
        let inside: T = (0..self.dim).map(|k| self.b[(k, last)].powi(2)).sum();
        self.n[(last, last)] - inside
    }

    /// `⟨α|b b†|α⟩ − Σ_k ⟨k|b†|α⟩²` for the last basis state, i.e. the weight
    /// of `b†|α⟩` outside the basis.
    pub fn b_dag_leakage(&self) -> T {
        let last = self.dim - 1;
        let inside: T = (0..self.dim).map(|k| self.b_dag[(k, last)].powi(2)).sum();
        self.n[(last, last)] + T::one() - inside
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn norm_const_reduces_to_coherent_state() {
        let c = cts_norm_const(0.7f64, 0).unwrap();
        assert!((c - (-0.49f64 / 2.0).exp()).abs() < 1e-14);
        assert!((c - 0.782_705).abs() < 1e-6);
    }

    #[test]
    fn norm_const_series_value() {
        let c = cts_norm_const(1.0f64, 2).unwrap();
        assert!((c - 1.0 / (E - 2.0).sqrt()).abs() < 1e-13);
        assert!((c - 1.179_920).abs() < 1e-6);
    }

    #[test]
    fn norm_const_small_alpha_limit() {
        let a = 1e-6f64;
        let c = cts_norm_const(a, 3).unwrap();
        assert!((c * a.powi(3) / 6f64.sqrt() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn norm_const_rejects_negative() {
        assert!(cts_norm_const(-0.1f64, 2).is_err());
    }

    #[test]
    fn moments_at_unit_alpha() {
        let (n, nn) = cts_moments(1.0f64, 2).unwrap();
        assert!((n - (E - 1.0) / (E - 2.0)).abs() < 1e-13);
        assert!((nn - E / (E - 2.0)).abs() < 1e-13);
        assert!((n - 2.392_211).abs() < 1e-6 && (nn - 3.784_423).abs() < 1e-6);
    }

    #[test]
    fn moments_degenerate_to_fock() {
        let (n, nn) = cts_moments(1e-6f64, 4).unwrap();
        assert!((n - 4.0).abs() < 1e-8 && (nn - 12.0).abs() < 1e-8);
        assert!(cts_moments(0.5f64, 1).is_err());
    }

    #[test]
    fn fock_operator_entries() {
        let ops = build_operators(&TruncationScheme::<f64>::fock(3)).unwrap();
        assert_eq!(ops.dim, 3);
        assert_eq!(ops.b[(1, 2)], 2f64.sqrt());
        assert_eq!(ops.b[(0, 1)], 1.0);
        assert_eq!(ops.b_dag, ops.b.transpose());
        assert_eq!(ops.norm_const, 1.0);
    }

    #[test]
    fn cts_operator_entries() {
        let ops = build_operators(&TruncationScheme::cts(2, 1.0f64)).unwrap();
        let c = cts_norm_const(1.0f64, 2).unwrap();
        assert!((ops.b[(1, 2)] - c).abs() < 1e-14);
        assert!((ops.b[(1, 2)] - 1.179_920).abs() < 1e-6);
        assert_eq!(ops.b[(2, 2)], 1.0);
        assert_eq!(ops.b[(0, 2)], 0.0);
        assert_eq!(ops.n[(0, 2)], 0.0);
        assert_eq!(ops.nn[(1, 2)], 0.0);
    }

    #[test]
    fn zero_alpha_is_exactly_next_fock_state() {
        for n_c in 2..10 {
            let cts = build_operators(&TruncationScheme::cts(n_c, 0.0f64)).unwrap();
            let fock = build_operators(&TruncationScheme::<f64>::fock(n_c + 1)).unwrap();
            assert_eq!(cts.b, fock.b);
            assert_eq!(cts.b_dag, fock.b_dag);
            assert_eq!(cts.n, fock.n);
            assert_eq!(cts.nn, fock.nn);
        }
    }

    #[test]
    fn sparsity_at_most_three_per_column() {
        let ops = build_operators(&TruncationScheme::cts(6, 1.3f64)).unwrap();
        for m in [&ops.b, &ops.b_dag, &ops.n, &ops.nn] {
            for col in 0..ops.dim {
                let nz = (0..ops.dim).filter(|&r| m[(r, col)] != 0.0).count();
                assert!(nz <= 3);
            }
        }
    }

    #[test]
    fn leakage_signatures() {
        for &a in &[0.1f64, 0.5, 1.0, 2.0, 4.0] {
            for n_c in 2..=12 {
                let ops = build_operators(&TruncationScheme::cts(n_c, a)).unwrap();
                assert!(ops.b_leakage().abs() <= 1e-12 * ops.n[(n_c, n_c)].max(1.0));
                assert!(ops.b_dag_leakage() > 0.0);
            }
        }
    }

    #[test]
    fn scheme_validation_and_parsing() {
        assert!(TruncationScheme::<f64>::fock(0).validate().is_err());
        assert!(TruncationScheme::cts(1, 0.5f64).validate().is_err());
        assert!(TruncationScheme::cts(3, -0.5f64).validate().is_err());
        let s: TruncationScheme<f64> = "cts:5".parse().unwrap();
        assert_eq!(s, TruncationScheme::cts(5, 0.0));
        let s: TruncationScheme<f64> = "fock:20".parse().unwrap();
        assert_eq!(s.dim(), 20);
        assert!("cts:1".parse::<TruncationScheme<f64>>().is_err());
        assert!("boson:3".parse::<TruncationScheme<f64>>().is_err());
        assert_eq!(s.to_string(), "fock:20");
    }
}
