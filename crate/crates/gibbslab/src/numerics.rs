//! Scalar numerical routines shared across the crate: bracketed root
//! finding, golden-section minimization, natural cubic splines, a small
//! Nelder-Mead simplex, and base-2 log-sum-exp.

use crate::{LabError, Result};

/// Default tolerance for scalar roots and 1-D minimizations.
pub const SCALAR_TOL: f64 = 1e-12;
/// Iteration cap for scalar solvers.
pub const SCALAR_MAX_ITER: usize = 200;

/// Bisection on `[a, b]` for a continuous `f` with `f(a)` and `f(b)` of
/// opposite sign (either may be zero). Returns the midpoint of the final
/// bracket, accurate to `tol` in the argument.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(LabError::Numerical(format!(
            "bisection bracket does not straddle a root: f({a})={fa}, f({b})={fb}"
        )));
    }
    for _ in 0..SCALAR_MAX_ITER {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Expands `[a, b]` geometrically until `f` changes sign, then bisects.
pub fn bisect_expanding(
    f: impl Fn(f64) -> f64,
    a0: f64,
    b0: f64,
    limit: f64,
    tol: f64,
) -> Result<f64> {
    let (mut a, mut b) = (a0, b0);
    let mut fa = f(a);
    let mut fb = f(b);
    let mut iter = 0;
    while fa.signum() == fb.signum() && iter < 128 {
        let span = b - a;
        if a - span < -limit && b + span > limit {
            break;
        }
        a = (a - span).max(-limit);
        b = (b + span).min(limit);
        fa = f(a);
        fb = f(b);
        iter += 1;
    }
    bisect(f, a, b, tol)
}

/// Golden-section minimization of `f` on `[a, b]` to argument tolerance `tol`.
/// Returns `(x_min, f_min)`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while (b - a).abs() > tol && iter < SCALAR_MAX_ITER {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        iter += 1;
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() || n < 2 {
            return Err(LabError::invalid("spline needs >= 2 matching knots"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::invalid("spline knots must be strictly increasing"));
        }
        if n == 2 {
            return Ok(CubicSpline { xs: xs.to_vec(), ys: ys.to_vec(), m: vec![0.0; 2] });
        }
        // Thomas solve of the natural-spline tridiagonal system.
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 1.0;
        diag[n - 1] = 1.0;
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            sub[i] = h0;
            diag[i] = 2.0 * (h0 + h1);
            sup[i] = h1;
            rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        Ok(CubicSpline { xs: xs.to_vec(), ys: ys.to_vec(), m })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return self.ys[i.min(n - 1)],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Nelder-Mead simplex minimization in low dimension. `f` may return
/// `f64::INFINITY` outside the feasible region.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    start: &[f64],
    scale: &[f64],
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += scale[i];
        simplex.push(p);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    for _ in 0..max_iter {
        // order best..worst
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        if (fv[worst] - fv[best]).abs() <= tol * (1.0 + fv[best].abs()) {
            break;
        }
        // centroid of all but worst
        let mut centroid = vec![0.0; n];
        for (k, p) in simplex.iter().enumerate() {
            if k == worst {
                continue;
            }
            for i in 0..n {
                centroid[i] += p[i] / n as f64;
            }
        }
        let blend = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + t * (simplex[worst][i] - centroid[i]))
                .collect()
        };
        let refl = blend(-1.0);
        let f_refl = f(&refl);
        if f_refl < fv[best] {
            let exp = blend(-2.0);
            let f_exp = f(&exp);
            if f_exp < f_refl {
                simplex[worst] = exp;
                fv[worst] = f_exp;
            } else {
                simplex[worst] = refl;
                fv[worst] = f_refl;
            }
        } else if f_refl < fv[second_worst] {
            simplex[worst] = refl;
            fv[worst] = f_refl;
        } else {
            let contr = if f_refl < fv[worst] { blend(-0.5) } else { blend(0.5) };
            let f_contr = f(&contr);
            if f_contr < fv[worst].min(f_refl) {
                simplex[worst] = contr;
                fv[worst] = f_contr;
            } else {
                // shrink toward best
                let best_pt = simplex[best].clone();
                for k in 0..=n {
                    if k == best {
                        continue;
                    }
                    for i in 0..n {
                        simplex[k][i] = best_pt[i] + 0.5 * (simplex[k][i] - best_pt[i]);
                    }
                    fv[k] = f(&simplex[k]);
                }
            }
        }
    }
    let mut best = 0;
    for k in 1..=start.len() {
        if fv[k] < fv[best] {
            best = k;
        }
    }
    (simplex[best].clone(), fv[best])
}

/// `log2(sum_i 2^(v_i))` with max shifting; `-inf` entries are skipped.
pub fn log2_sum_exp2(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for v in values.clone() {
        if v > m {
            m = v;
        }
    }
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for v in values {
        if v != f64::NEG_INFINITY {
            acc += (v - m).exp2();
        }
    }
    m + acc.log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn golden_min_quadratic() {
        let (x, _) = golden_min(|x| (x - 0.3).powi(2), -1.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn spline_reproduces_cubicish_function() {
        let xs: Vec<f64> = (0..200).map(|i| -2.0 + 4.0 * i as f64 / 199.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (x * 0.7).sin()).collect();
        let sp = CubicSpline::fit(&xs, &ys).unwrap();
        for i in 0..500 {
            let x = -1.9 + 3.8 * i as f64 / 499.0;
            assert!((sp.eval(x) - (x * 0.7).sin()).abs() < 1e-6);
        }
    }

    #[test]
    fn nelder_mead_rosenbrockish() {
        let f = |p: &[f64]| (1.0 - p[0]).powi(2) + 5.0 * (p[1] - p[0] * p[0]).powi(2);
        let (x, _) = nelder_mead(f, &[-0.5, 0.5], &[0.2, 0.2], 2000, 1e-14);
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn lse2_matches_direct_sum() {
        let vals = [-3.0, -1.0, f64::NEG_INFINITY, 0.5];
        let direct: f64 = vals.iter().filter(|v| v.is_finite()).map(|v| v.exp2()).sum();
        assert!((log2_sum_exp2(vals.iter().copied()) - direct.log2()).abs() < 1e-14);
    }
}
