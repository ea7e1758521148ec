use crate::error::{invalid, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum<T> {
    pub x: T,
    pub f: T,
    pub evals: usize,
}

/// Brent's golden-section/parabolic minimization on `[lo, hi]`.
///
/// Both end points are evaluated as well and win when their value is not
/// larger than the interior optimum, so `f ≤ f(lo)` and `f ≤ f(hi)` always
/// hold. Ties go to the smaller abscissa.
pub fn minimize_scalar<T: Real>(
    mut f: impl FnMut(T) -> T,
    lo: T,
    hi: T,
    tol: T,
) -> Result<ScalarMinimum<T>> {
    if !(tol > T::zero()) {
        return invalid("tolerance must be positive");
    }
    if !(lo < hi) {
        return invalid("interval must satisfy lo < hi");
    }
    let golden = T::lit(1.618_033_988_749_895);
    let steps = ((hi - lo) / tol).ln() / golden.ln();
    let budget = steps.ceil().to_usize().unwrap_or(0) + 20;

    let eps = T::epsilon() * T::lit(4.0);
    let cgold = T::lit(0.381_966_011_250_105_1);
    let half = T::lit(0.5);
    let two = T::lit(2.0);

    let (mut a, mut b) = (lo, hi);
    let mut x = a + cgold * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut evals = 1;
    let mut d = T::zero();
    let mut e = T::zero();

    while evals < budget {
        let xm = half * (a + b);
        let tol1 = eps * x.abs() + tol / T::lit(3.0);
        let tol2 = two * tol1;
        if (x - xm).abs() <= tol2 - half * (b - a) {
            break;
        }
        let mut golden_step = true;
        if e.abs() > tol1 {
            let mut r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = two * (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = d;
            if p.abs() < (half * q * r).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= xm { a - x } else { b - x };
            d = cgold * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    let mut best = ScalarMinimum { x, f: fx, evals };
    let f_hi = f(hi);
    let f_lo = f(lo);
    best.evals += 2;
    if f_hi < best.f {
        best.x = hi;
        best.f = f_hi;
    }
    if f_lo <= best.f {
        best.x = lo;
        best.f = f_lo;
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions<T> {
    /// Simplex diameter (max-norm) below which the search stops.
    pub tol_x: T,
    /// Spread of simplex values below which the search stops.
    pub tol_f: T,
    pub max_evals: usize,
    /// Per-coordinate initial simplex offsets; defaults to 5% of `|x0_i|`
    /// (or 2.5e-4 for zero coordinates).
    pub initial_step: Option<Vec<T>>,
}

impl<T: Real> NelderMeadOptions<T> {
    pub fn new(tol: T, max_evals: usize) -> Self {
        Self { tol_x: tol, tol_f: tol, max_evals, initial_step: None }
    }

    pub fn with_initial_step(mut self, step: Vec<T>) -> Self {
        self.initial_step = Some(step);
        self
    }
}

#[derive(Debug, Clone)]
pub struct MultiMinimum<T> {
    pub x: Vec<T>,
    pub f: T,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex descent with dimension-adapted coefficients.
///
/// Returns the best vertex found; `converged` is false when `max_evals`
/// ran out first.
pub fn minimize_multi<T: Real>(
    mut f: impl FnMut(&[T]) -> T,
    x0: &[T],
    opts: &NelderMeadOptions<T>,
) -> Result<MultiMinimum<T>> {
    let n = x0.len();
    if n == 0 {
        return invalid("empty starting point");
    }
    let f0 = f(x0);
    if !f0.is_finite() {
        return invalid("objective is not finite at the starting point");
    }
    let nf = T::from_count(n);
    let (refl, expand, contract, shrink) = if n >= 2 {
        (
            T::one(),
            T::one() + T::lit(2.0) / nf,
            T::lit(0.75) - T::lit(0.5) / nf,
            T::one() - T::one() / nf,
        )
    } else {
        (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5))
    };

    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let step = match &opts.initial_step {
            Some(s) => s[i],
            None if x0[i].is_zero() => T::lit(2.5e-4),
            None => T::lit(0.05) * x0[i].abs(),
        };
        let mut x = x0.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = n + 1;
    let mut converged = false;

    let eval = |x: &[T], f: &mut dyn FnMut(&[T]) -> T, evals: &mut usize| -> T {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };

    loop {
        // stable sort keeps the older vertex first on ties
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let spread = simplex.iter().fold(T::zero(), |m, (_, v)| m.max((*v - best).abs()));
        let diameter = simplex[1..].iter().fold(T::zero(), |m, (x, _)| {
            x.iter().zip(&simplex[0].0).fold(m, |m, (&a, &b)| m.max((a - b).abs()))
        });
        if diameter <= opts.tol_x && (spread <= opts.tol_f || !spread.is_finite()) {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }

        let mut centroid = vec![T::zero(); n];
        for (x, _) in &simplex[..n] {
            for (c, &xi) in centroid.iter_mut().zip(x) {
                *c += xi;
            }
        }
        for c in &mut centroid {
            *c /= nf;
        }
        let worst = simplex[n].clone();
        let second_worst = simplex[n - 1].1;
        let along = |t: T, from: &[T]| -> Vec<T> {
            centroid.iter().zip(from).map(|(&c, &p)| c + t * (p - c)).collect()
        };

        let xr = along(-refl, &worst.0);
        let fr = eval(&xr, &mut f, &mut evals);
        if fr < best {
            let xe = along(-refl * expand, &worst.0);
            let fe = eval(&xe, &mut f, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[n] = (xr, fr);
            continue;
        }
        let accepted = if fr < worst.1 {
            let xc = along(-refl * contract, &worst.0);
            let fc = eval(&xc, &mut f, &mut evals);
            (fc <= fr).then_some((xc, fc))
        } else {
            let xc = along(contract, &worst.0);
            let fc = eval(&xc, &mut f, &mut evals);
            (fc < worst.1).then_some((xc, fc))
        };
        match accepted {
            Some(v) => simplex[n] = v,
            None => {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<T> = anchor
                        .iter()
                        .zip(&vertex.0)
                        .map(|(&a, &p)| a + shrink * (p - a))
                        .collect();
                    let fx = eval(&x, &mut f, &mut evals);
                    *vertex = (x, fx);
                }
            }
        }
    }

    let (x, fbest) = simplex.swap_remove(0);
    Ok(MultiMinimum { x, f: fbest, evals, converged })
}
