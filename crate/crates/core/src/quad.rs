//! Fixed-order Gauss-Legendre panels with adaptive bisection.
//!
//! All expectations in the library are one-dimensional integrals in the
//! standardized Gaussian variable of a lognormal law. Integrands are
//! piecewise smooth with analytically known kink locations, so the engine
//! splits the domain at caller-supplied breakpoints and refines each segment
//! by panel bisection until the whole-panel and split-panel estimates agree.

use once_cell::sync::Lazy;

use crate::error::{Error, Result};

const GL_ORDER: usize = 24;
const MAX_DEPTH: usize = 32;
/// Integrands built from inner root solves carry relative jitter near
/// machine precision; panel agreement below this relative level is accepted
/// as converged regardless of the absolute target.
const REL_NOISE_FLOOR: f64 = 5e-13;

struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on [-1, 1] by Newton iteration on P_n.
    fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }

    fn integrate<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

static RULE: Lazy<GaussLegendre> = Lazy::new(|| GaussLegendre::new(GL_ORDER));

fn adaptive<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let whole = RULE.integrate(f, a, b);
    let mid = 0.5 * (a + b);
    let split = RULE.integrate(f, a, mid) + RULE.integrate(f, mid, b);
    if (whole - split).abs() <= tol.max(REL_NOISE_FLOOR * split.abs().max(whole.abs())) {
        return Ok(split);
    }
    if depth >= MAX_DEPTH {
        log::debug!(
            "adaptive quadrature stalled on [{a}, {b}]: whole={whole:e} split={split:e} diff={:e} tol={tol:e}",
            (whole - split).abs()
        );
        return Err(Error::NonConvergent {
            what: "adaptive quadrature",
            iterations: MAX_DEPTH,
        });
    }
    let left = adaptive(f, a, mid, 0.5 * tol, depth + 1)?;
    let right = adaptive(f, mid, b, 0.5 * tol, depth + 1)?;
    Ok(left + right)
}

/// Integrates `f` over `[lo, hi]`, splitting exactly at the interior
/// `points`, to absolute tolerance `tol`.
pub(crate) fn integrate_split<F: FnMut(f64) -> f64>(
    f: &mut F,
    lo: f64,
    hi: f64,
    points: &[f64],
    tol: f64,
) -> Result<f64> {
    let mut cuts: Vec<f64> = points.iter().copied().filter(|p| *p > lo && *p < hi).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13);
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);
    let total_len = hi - lo;
    let mut acc = 0.0;
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let seg_tol = (tol * (b - a) / total_len).max(f64::MIN_POSITIVE);
        acc += adaptive(f, a, b, seg_tol, 0)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_for_polynomials_up_to_degree_47() {
        let mut f = |x: f64| x.powi(46);
        let got = RULE.integrate(&mut f, 0.0, 1.0);
        assert_abs_diff_eq!(got, 1.0 / 47.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_mild_oscillation() {
        let mut f = |x: f64| (10.0 * x).sin();
        let got = integrate_split(&mut f, 0.0, 1.0, &[], 1e-12).unwrap();
        let exact = (1.0 - (10.0f64).cos()) / 10.0;
        assert_abs_diff_eq!(got, exact, epsilon = 1e-11);
    }

    #[test]
    fn split_points_make_step_functions_exact() {
        let b = 0.3;
        let mut f = |x: f64| if x <= b { 1.0 } else { 0.0 };
        let got = integrate_split(&mut f, 0.0, 1.0, &[b], 1e-12).unwrap();
        assert_abs_diff_eq!(got, b, epsilon = 1e-13);
    }
}
