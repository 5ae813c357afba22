//! Shared numerics: FWHM/sigma conversion, Gaussian interval masses (CDF and
//! quadrature routes), and a bracketing bisection helper for the design solvers.

use core::f64::consts::{PI, SQRT_2};

use alloc::vec::Vec;

/// sqrt(8 ln 2), the ratio between the FWHM and sigma of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

pub fn gaussian_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    libm::exp(-0.5 * z * z) / (sigma * libm::sqrt(2.0 * PI))
}

/// Probability mass of N(mean, sigma^2) inside the closed interval [lo, hi].
///
/// sigma == 0 degenerates to a point mass at `mean`.
pub fn gaussian_mass(mean: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(hi >= lo);
    if sigma <= 0.0 {
        return if mean >= lo && mean <= hi { 1.0 } else { 0.0 };
    }
    let a = (lo - mean) / (sigma * SQRT_2);
    let b = (hi - mean) / (sigma * SQRT_2);
    // erfc differencing keeps precision when the whole interval sits in a tail.
    0.5 * (libm::erfc(a) - libm::erfc(b))
}

/// The same interval mass evaluated by adaptive Simpson quadrature.
///
/// Deliberately does not touch erf/erfc so it stays an independent route for
/// cross-checking [`gaussian_mass`].
pub fn gaussian_mass_quadrature(mean: f64, sigma: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    if sigma <= 0.0 {
        return if mean >= lo && mean <= hi { 1.0 } else { 0.0 };
    }
    if hi <= lo {
        return 0.0;
    }
    // Split at peak-centered knots so a narrow peak inside a wide interval
    // cannot be missed by the initial Simpson samples.
    let mut knots: Vec<f64> = Vec::with_capacity(9);
    knots.push(lo);
    for k in [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0] {
        let x = mean + k * sigma;
        if x > lo && x < hi {
            knots.push(x);
        }
    }
    knots.push(hi);
    knots.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    let f = |x: f64| gaussian_pdf(x, mean, sigma);
    let panel_tol = tol / (knots.len() - 1) as f64;
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += adaptive_simpson(&f, w[0], w[1], panel_tol);
    }
    total
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    // The Richardson error estimate is only trustworthy once the panel is
    // small against the integrand's scale; force a few subdivisions first.
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48, 4)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    force: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || (force == 0 && libm::fabs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    let next_force = force.saturating_sub(1);
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, next_force)
        + simpson_step(
            f,
            m,
            b,
            fm,
            frm,
            fb,
            right,
            0.5 * tol,
            depth - 1,
            next_force,
        )
}

/// Largest `x` in `[lo, hi]` with `f(x) <= target`, for nondecreasing `f`.
///
/// The bool is `false` when even `f(hi) <= target` (the search was not
/// actually constrained inside the bracket).
pub fn max_arg_below<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    lo: f64,
    hi: f64,
    xtol: f64,
) -> (f64, bool) {
    if f(hi) <= target {
        return (hi, false);
    }
    if f(lo) > target {
        return (lo, true);
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, true)
}
