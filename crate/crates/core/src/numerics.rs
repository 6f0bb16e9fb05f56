//! One-dimensional numerical kernels: adaptive Gauss–Legendre quadrature, bisection and
//! golden-section search. Everything here is deterministic and allocation-light.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Relative tolerance used for every belief expectation.
pub const QUAD_REL_TOL: f64 = 1e-10;

const GL_ORDER: usize = 15;
const MAX_PANELS: usize = 4000;

struct GaussLegendre {
    nodes: [f64; GL_ORDER],
    weights: [f64; GL_ORDER],
}

fn gauss_legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    })
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let rule = gauss_legendre();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.nodes
        .iter()
        .zip(rule.weights.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, coarse: f64) -> Panel {
    let m = 0.5 * (a + b);
    let fine = gl_panel(f, a, m) + gl_panel(f, m, b);
    Panel {
        a,
        b,
        value: fine,
        err: (fine - coarse).abs(),
    }
}

/// Integrates `f` over `[a, b]`, splitting first at every `breaks` abscissa strictly inside the
/// interval, then bisecting the panel with the largest error estimate until the summed estimate
/// is below `rel_tol` times the summed panel magnitudes.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], rel_tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut lo = a;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        let coarse = gl_panel(&f, lo, hi);
        heap.push(refine(&f, lo, hi, coarse));
        lo = hi;
    }

    let mut panels = heap.len();
    loop {
        // Scale by the summed panel magnitudes so integrals that cancel to ~0 still terminate.
        let (total, scale, err) = heap
            .iter()
            .fold((0.0, 0.0, 0.0), |(t, a, e), p| (t + p.value, a + p.value.abs(), e + p.err));
        if err <= rel_tol * scale || err <= 1e-300 || panels >= MAX_PANELS {
            return total;
        }
        let worst = heap.pop().expect("at least one panel");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Interval exhausted at machine precision; accept it.
            heap.push(Panel { err: 0.0, ..worst });
            continue;
        }
        let left_coarse = gl_panel(&f, worst.a, m);
        let right_coarse = gl_panel(&f, m, worst.b);
        heap.push(refine(&f, worst.a, m, left_coarse));
        heap.push(refine(&f, m, worst.b, right_coarse));
        panels += 1;
    }
}

/// Bisection for a root of a continuous `f` with `f(lo)` and `f(hi)` of opposite sign (or zero).
/// Stops once the bracket is narrower than `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NotBracketed { lo, hi });
    }
    for _ in 0..300 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`. Returns the best
/// abscissa seen, including the endpoints, and its value.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let mut best = (x, f(x));
    for cand in [lo, hi] {
        let v = f(cand);
        if v > best.1 {
            best = (cand, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        let rule = gauss_legendre();
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn integrates_polynomials_exactly() {
        // Degree 2n-1 = 29 is exact for a single panel.
        let v = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, &[], 1e-12);
        let exact = 2f64.powi(8) / 8.0 - 8.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn kink_split_recovers_accuracy() {
        let xi = 3.7;
        let f = |l: f64| (xi / l).min(1.0);
        let exact = (xi - 3.4) + xi * (4.0f64 / xi).ln();
        let v = integrate(f, 3.4, 4.0, &[xi], 1e-12);
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn handles_near_singular_integrand() {
        // ∫_0^1 1/(1 + 1e-8 - x) dx
        let eps: f64 = 1e-8;
        let exact = ((1.0 + eps) / eps).ln();
        let v = integrate(|x| 1.0 / (1.0 + eps - x), 0.0, 1.0, &[], 1e-10);
        assert!(((v - exact) / exact).abs() < 1e-9);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_rejects_unbracketed() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-10),
            Err(Error::NotBracketed { .. })
        ));
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn golden_returns_endpoint_for_monotone() {
        let (x, _) = golden_max(|x| x, 0.0, 1.0, 1e-10);
        assert_eq!(x, 1.0);
    }
}
