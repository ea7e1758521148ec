use crate::error::{invalid, Result};
use crate::Real;

#[derive(Debug, Clone)]
pub struct FixedPointResult<T> {
    pub x: Vec<T>,
    pub iters: usize,
    pub converged: bool,
}

/// Damped iteration `x ← (1−m)·x + m·map(x)` until `‖Δx‖∞ < tol`.
///
/// Without convergence the iterate with the smallest step is returned.
pub fn fixed_point<T: Real>(
    mut map: impl FnMut(&[T]) -> Vec<T>,
    x0: &[T],
    mixing: T,
    tol: T,
    max_iter: usize,
) -> Result<FixedPointResult<T>> {
    if !(mixing > T::zero() && mixing <= T::one()) {
        return invalid("mixing must lie in (0, 1]");
    }
    let mut x = x0.to_vec();
    let mut best = (T::infinity(), x.clone());
    for iter in 1..=max_iter {
        let mapped = map(&x);
        if mapped.len() != x.len() {
            return invalid("map changed the vector length");
        }
        let next: Vec<T> = x
            .iter()
            .zip(&mapped)
            .map(|(&a, &b)| (T::one() - mixing) * a + mixing * b)
            .collect();
        let step = x.iter().zip(&next).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        x = next;
        if step < tol {
            return Ok(FixedPointResult { x, iters: iter, converged: true });
        }
        if step < best.0 {
            best = (step, x.clone());
        }
        if !step.is_finite() {
            break;
        }
    }
    Ok(FixedPointResult { x: best.1, iters: max_iter, converged: false })
}
