//! Adaptive quadrature on finite intervals.
//!
//! Wraps the double-exponential rule from the `quadrature` crate with
//! interval bisection, since a single pass is capped at a few hundred
//! evaluations and loses accuracy on integrands with kinks.

const MAX_DEPTH: u32 = 14;

/// Integrates `f` over `[a, b]` to roughly `tol` absolute error.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a, tol);
    }
    adaptive(f, a, b, tol.max(1e-15), 0)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::integrate(f, a, b, tol);
    let floor = 1e-14 * out.integral.abs();
    if out.error_estimate <= tol.max(floor) || depth >= MAX_DEPTH {
        return out.integral;
    }
    let mid = 0.5 * (a + b);
    adaptive(f, a, mid, 0.5 * tol, depth + 1) + adaptive(f, mid, b, 0.5 * tol, depth + 1)
}

/// Integrates `f` over `[a, b]`, splitting at the supplied interior break points
/// (kinks or jumps of the integrand).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut lo = a;
    let pieces = pts.len() + 1;
    for hi in pts.into_iter().chain(std::iter::once(b)) {
        total += integrate(f, lo, hi, tol / pieces as f64);
        lo = hi;
    }
    total
}
