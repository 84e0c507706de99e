//! Bracketed scalar root finding used across the solvers.

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

/// Brent's method on `[a, b]` with `f(a)` and `f(b)` of opposite sign.
pub(crate) fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    rel_tol: f64,
    what: &'static str,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NonConvergent { what, iterations: 0 });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * rel_tol * b.abs().max(1e-300);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * q0 * (q0 - r) - (b - a) * (r - 1.0));
                q = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1 * xm.signum() };
        fb = f(b);
    }
    Err(Error::NonConvergent {
        what,
        iterations: MAX_ITER,
    })
}

/// Safeguarded Newton for a strictly decreasing `g` with `g(lo) >= 0 >= g(hi)`.
/// Falls back to bisection whenever the Newton step leaves the bracket.
pub(crate) fn newton_decreasing<G, D>(
    mut g: G,
    mut dg: D,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    rel_tol: f64,
    what: &'static str,
) -> Result<f64>
where
    G: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let mut x = x0.clamp(lo, hi);
    for _ in 0..MAX_ITER {
        let gx = g(x);
        if gx == 0.0 {
            return Ok(x);
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = dg(x);
        let mut next = x - gx / d;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= rel_tol * x.abs().max(1e-300) || (hi - lo) <= rel_tol * hi.abs().max(1e-300) {
            return Ok(x);
        }
    }
    Err(Error::NonConvergent {
        what,
        iterations: MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_simple_roots() {
        let f = |x: f64| x * x - 2.0;
        let r = brent(f, 0.0, 2.0, f(0.0), f(2.0), 1e-14, "test").unwrap();
        assert!((r - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn newton_respects_bracket() {
        let g = |x: f64| 1.0 / x - 3.0;
        let dg = |x: f64| -1.0 / (x * x);
        let r = newton_decreasing(g, dg, 1e-9, 10.0, 5.0, 1e-14, "test").unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-12);
    }
}
