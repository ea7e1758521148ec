//! Householder tridiagonalization followed by implicit QL iteration.
//!
//! Port of the EISPACK `tred2`/`tql2` pair. Sweep order is fixed, so
//! identical input yields bit-identical output.

use super::matrix::SymmetricMatrix;
use crate::error::{invalid, Result};
use crate::Real;

/// Full spectrum of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    dim: usize,
    /// Row `k` holds the eigenvector of `values[k]`.
    vectors: Vec<T>,
}

impl<T: Real> EigenDecomposition<T> {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalized eigenvector belonging to `values[k]`.
    #[inline]
    pub fn vector(&self, k: usize) -> &[T] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    /// Projections `⟨v_k|x⟩` for all eigenvectors.
    pub fn project(&self, x: &[T]) -> Vec<T> {
        (0..self.dim).map(|k| dot(self.vector(k), x)).collect()
    }
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Full eigendecomposition, eigenvalues ascending.
pub fn eigh<T: Real>(a: &SymmetricMatrix<T>) -> Result<EigenDecomposition<T>> {
    if !a.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    let n = a.dim();
    let mut v = a.as_matrix().as_slice().to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e, true);
    // QL rotations act on columns of V; work on the transpose so they touch rows.
    let mut w = transpose(n, &v);
    tql2(n, &mut d, &mut e, Some(&mut w))?;
    let order = ascending_order(&d);
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend_from_slice(&w[k * n..(k + 1) * n]);
    }
    Ok(EigenDecomposition { values, dim: n, vectors })
}

/// Eigenvalues only, ascending. Roughly a sixth of the work of [`eigh`].
pub fn eigvalsh<T: Real>(a: &SymmetricMatrix<T>) -> Result<Vec<T>> {
    if !a.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    let n = a.dim();
    let mut v = a.as_matrix().as_slice().to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e, false);
    tql2(n, &mut d, &mut e, None)?;
    let mut values = d;
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(values)
}

/// Smallest eigenvalue by Lanczos with full reorthogonalization.
///
/// Stops once the lowest Ritz value has changed by less than `1e-14·‖A‖∞`
/// on two consecutive steps, or when the Krylov space is exhausted, in
/// which case the value is exact up to rounding.
pub fn lowest_eigenvalue<T: Real>(a: &SymmetricMatrix<T>) -> Result<T> {
    if !a.is_finite() {
        return invalid("matrix has non-finite entries");
    }
    let n = a.dim();
    if n == 0 {
        return invalid("empty matrix");
    }
    let m = a.as_matrix();
    let scale = a.norm_inf();
    if scale.is_zero() {
        return Ok(T::zero());
    }
    let tol = T::lit(1e-14) * scale;
    // Generic start so no symmetry sector is missed.
    let mut q: Vec<T> = (0..n).map(|i| T::one() + T::lit(0.5) * (T::lit(1.3) * T::from_count(i) + T::lit(0.7)).sin()).collect();
    let norm = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= norm);
    let mut basis: Vec<Vec<T>> = Vec::new();
    let (mut diag, mut off) = (Vec::new(), Vec::new());
    let mut theta = T::infinity();
    let mut settled = 0;
    loop {
        let mut w = m.mul_vec(&q);
        diag.push(dot(&q, &w));
        basis.push(q);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                w.iter_mut().zip(v).for_each(|(x, &y)| *x -= c * y);
            }
        }
        let next = lowest_tridiagonal(&diag, &off);
        settled = if (theta - next).abs() <= tol { settled + 1 } else { 0 };
        theta = next;
        let beta = dot(&w, &w).sqrt();
        if settled >= 2 || basis.len() == n || beta <= tol {
            return Ok(theta);
        }
        off.push(beta);
        q = w.into_iter().map(|x| x / beta).collect();
    }
}

/// Lowest eigenvalue of the symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e`, by Sturm-count bisection.
fn lowest_tridiagonal<T: Real>(d: &[T], e: &[T]) -> T {
    let n = d.len();
    let radius = |i: usize| {
        let left = if i > 0 { e[i - 1].abs() } else { T::zero() };
        let right = if i + 1 < n { e[i].abs() } else { T::zero() };
        left + right
    };
    let mut lo = (0..n).map(|i| d[i] - radius(i)).fold(T::infinity(), T::min);
    let mut hi = (0..n).map(|i| d[i] + radius(i)).fold(T::neg_infinity(), T::max);
    // Number of eigenvalues below x.
    let below = |x: T| {
        let tiny = T::min_positive_value();
        let mut count = 0;
        let mut q = T::one();
        for i in 0..n {
            let coupling = if i > 0 { e[i - 1] * e[i - 1] / q } else { T::zero() };
            q = d[i] - x - coupling;
            if q.abs() < tiny {
                q = -tiny;
            }
            if q < T::zero() {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    T::lit(0.5) * (lo + hi)
}

fn transpose<T: Real>(n: usize, v: &[T]) -> Vec<T> {
    let mut w = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            w[j * n + i] = v[i * n + j];
        }
    }
    w
}

fn ascending_order<T: Real>(d: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    // stable, so equal eigenvalues keep the QL output order
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    order
}

/// Householder reduction to tridiagonal form. On exit `d` holds the diagonal,
/// `e[1..]` the sub-diagonal and, if `accumulate`, `v` the orthogonal
/// transformation (row-major, columns are basis vectors).
fn tred2<T: Real>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T], accumulate: bool) {
    let idx = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale.is_zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = T::zero();
                v[idx(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for (i, di) in d.iter_mut().enumerate() {
            *di = v[idx(i, i)];
        }
        e[0] = T::zero();
        return;
    }

    for i in 0..n.saturating_sub(1) {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = T::one();
        let h = d[i + 1];
        if !h.is_zero() {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = T::zero();
    }
    v[idx(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// Implicit QL on the tridiagonal matrix. `w`, when given, holds the
/// transformation transposed (row `k` = basis vector `k`).
fn tql2<T: Real>(n: usize, d: &mut [T], e: &mut [T], mut w: Option<&mut Vec<T>>) -> Result<()> {
    const MAX_SWEEPS: usize = 60;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return invalid("QL iteration failed to converge");
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(w) = w.as_deref_mut() {
                        let (lo, hi) = w.split_at_mut((i + 1) * n);
                        let row_i = &mut lo[i * n..];
                        let row_i1 = &mut hi[..n];
                        for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                            let t = *b;
                            *b = s * *a + c * t;
                            *a = c * *a - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> SymmetricMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SymmetricMatrix::from_row_major(n, data).unwrap()
    }

    #[test]
    fn lanczos_lowest_matches_full_spectrum() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (40, 4), (96, 5)] {
            let a = random_symmetric(n, seed);
            let full = eigvalsh(&a).unwrap()[0];
            let low = lowest_eigenvalue(&a).unwrap();
            assert!((full - low).abs() < 1e-12 * a.norm_inf().max(1.0), "n={n}: {full} vs {low}");
        }
    }

    #[test]
    fn lanczos_degenerate_and_block_diagonal() {
        let a = SymmetricMatrix::from_rows(&[
            vec![2.0f64, 0.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0, 0.0],
            vec![0.0, 0.0, 3.0, 0.0],
            vec![0.0, 0.0, 0.0, -1.0],
        ])
        .unwrap();
        assert!((lowest_eigenvalue(&a).unwrap() + 1.0).abs() < 1e-14);
        assert_eq!(lowest_eigenvalue(&SymmetricMatrix::<f64>::from_row_major(3, vec![0.0; 9]).unwrap()).unwrap(), 0.0);
    }

    fn residual(a: &SymmetricMatrix<f64>, eig: &EigenDecomposition<f64>) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..a.dim() {
            let v = eig.vector(k);
            let av = a.as_matrix().mul_vec(v);
            for (x, y) in av.iter().zip(v) {
                worst = worst.max((x - eig.values[k] * y).abs());
            }
        }
        worst
    }

    #[test]
    fn pauli_x() {
        let a = SymmetricMatrix::from_rows(&[vec![0.0f64, 1.0], vec![1.0, 0.0]]).unwrap();
        let eig = eigh(&a).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_spectrum() {
        let eig = eigh(&SymmetricMatrix::<f64>::identity(5).unwrap()).unwrap();
        assert!(eig.values.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn one_by_one() {
        let a = SymmetricMatrix::from_rows(&[vec![-3.5]]).unwrap();
        let eig = eigh(&a).unwrap();
        assert_eq!(eig.values, vec![-3.5]);
        assert_eq!(eig.vector(0), &[1.0]);
    }

    #[test]
    fn random_50_residual_and_orthonormality() {
        let a = random_symmetric(50, 7);
        let eig = eigh(&a).unwrap();
        let scale = a.norm_inf().max(1.0);
        assert!(residual(&a, &eig) <= 1e-10 * scale);
        for j in 0..50 {
            for k in 0..50 {
                let ip = dot(eig.vector(j), eig.vector(k));
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((ip - target).abs() <= 1e-12, "({j},{k}) {ip}");
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn trace_and_reconstruction() {
        let a = random_symmetric(40, 11);
        let eig = eigh(&a).unwrap();
        let n = a.dim();
        let sum: f64 = eig.values.iter().sum();
        assert!((sum - a.trace()).abs() <= 1e-10 * n as f64 * a.norm_inf());
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| eig.values[k] * eig.vector(k)[i] * eig.vector(k)[j]).sum();
                assert!((r - a.get(i, j)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn values_only_matches_full() {
        let a = random_symmetric(33, 3);
        let full = eigh(&a).unwrap();
        let vals = eigvalsh(&a).unwrap();
        for (x, y) in full.values.iter().zip(&vals) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let a = random_symmetric(20, 5);
        let e1 = eigh(&a).unwrap();
        let e2 = eigh(&a).unwrap();
        assert_eq!(e1.values, e2.values);
        assert_eq!(e1.vectors, e2.vectors);
    }

    #[test]
    fn rejects_non_finite() {
        let a = SymmetricMatrix::from_rows(&[vec![f64::NAN, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(eigh(&a).is_err());
        assert!(eigvalsh(&a).is_err());
    }

    #[test]
    fn single_precision() {
        let a = SymmetricMatrix::from_rows(&[
            vec![2.0f32, 1.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        let eig = eigh(&a).unwrap();
        let exact = [2.0 - 2f32.sqrt(), 2.0, 2.0 + 2f32.sqrt()];
        for (x, y) in eig.values.iter().zip(exact) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn diagonal_input_is_already_converged() {
        let a = SymmetricMatrix::from_rows(&[
            vec![3.0f64, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 2.0],
        ])
        .unwrap();
        let eig = eigh(&a).unwrap();
        assert_eq!(eig.values, vec![-1.0, 2.0, 3.0]);
    }
}
