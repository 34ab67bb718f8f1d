//! Bessel functions of the first kind (orders 0 and 1) and the semi-infinite
//! Bessel-product integral
//!
//! ```text
//! I(U, N) = ∫₀^∞ J₁(U·r) · J₀(r)^N dr
//! ```
//!
//! whose scaled value `U·I(U, N)` is the distribution function of the
//! distance travelled by an `N`-step planar unit random walk.
//!
//! The integrand is oscillatory and, for `U ∈ {N, N−2, …}`, contains a
//! non-oscillating component that decays only like `r^{-(N+1)/2}`. A plain
//! panel-truncation scheme cannot reach 1e-6 there, so the default policy
//! integrates numerically up to a cutoff `A` and adds the exact integral of the
//! Hankel asymptotic expansion of the integrand beyond `A`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_panels, kronrod21};

/// How the integral beyond the numerically integrated range is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailPolicy {
    /// Integrate numerically to a cutoff, then add the integral of the
    /// asymptotic expansion of the integrand on `[cutoff, ∞)`.
    Asymptotic,
    /// Integrate numerically to the given upper limit and drop the rest.
    FixedUpperLimit(f64),
    /// Integrate half-period panels until three consecutive panel
    /// contributions fall below the absolute tolerance.
    DecayThreshold,
}

/// Tolerances and limits for the oscillatory integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subintervals: usize,
    pub tail: TailPolicy,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-11, rel_tol: 1e-11, max_subintervals: 400_000, tail: TailPolicy::Asymptotic }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if self.max_subintervals == 0 {
            return Err(Error::domain("max_subintervals must be at least 1"));
        }
        if let TailPolicy::FixedUpperLimit(a) = self.tail {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::domain("fixed upper limit must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Value of `I(U, N)` together with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIntegral {
    pub value: f64,
    pub abs_error: f64,
    /// Point where numerical integration stopped.
    pub cutoff: f64,
    pub subintervals: usize,
}

// Below this |x| the power series loses at most ~2 digits to cancellation.
const SERIES_LIMIT: f64 = 8.0;
// Above this |x| the Hankel expansion reaches full double precision.
const HANKEL_LIMIT: f64 = 25.0;

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("Bessel argument must be finite, got {x}")))
    }
}

/// Bessel function of the first kind of order zero.
pub fn bessel_j0(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(j0_j1(x).0)
}

/// Bessel function of the first kind of order one.
pub fn bessel_j1(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(j0_j1(x).1)
}

/// `(J₀(x), J₁(x))` for finite `x`, without argument checks.
pub fn j0_j1(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (j0, j1) = if ax < SERIES_LIMIT {
        series_j0_j1(ax)
    } else if ax < HANKEL_LIMIT {
        miller_j0_j1(ax)
    } else {
        hankel_j0_j1(ax)
    };
    (j0, if x < 0.0 { -j1 } else { j1 })
}

fn series_j0_j1(x: f64) -> (f64, f64) {
    let q = -0.25 * x * x;
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut s0 = 1.0;
    let mut s1 = 1.0;
    for k in 1..60 {
        let k = k as f64;
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        s0 += t0;
        s1 += t1;
        if t0.abs() < 1e-18 && t1.abs() < 1e-18 {
            break;
        }
    }
    (s0, 0.5 * x * s1)
}

/// Miller's backward recurrence normalised by `J₀ + 2ΣJ₂ₖ = 1`.
fn miller_j0_j1(x: f64) -> (f64, f64) {
    let start = 2 * ((x as usize + 30 + (8.0 * x.sqrt()) as usize) / 2);
    let mut above = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 2.0 * cur;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / x * cur - above;
        above = cur;
        cur = below;
        let order = k - 1;
        if order == 0 {
            norm += cur;
        } else if order % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            above *= 1e-200;
            norm *= 1e-200;
        }
    }
    (cur / norm, above / norm)
}

/// Coefficients `a_k(ν) = ∏_{i=1..k} (4ν² − (2i−1)²) / (k!·8^k)` of the Hankel expansion.
pub fn hankel_coefficients(nu: f64, order: usize) -> Vec<f64> {
    let mu = 4.0 * nu * nu;
    let mut a = Vec::with_capacity(order + 1);
    a.push(1.0);
    for k in 1..=order {
        let odd = (2 * k - 1) as f64;
        let prev = a[k - 1];
        a.push(prev * (mu - odd * odd) / (8.0 * k as f64));
    }
    a
}

/// `(P_ν(x), Q_ν(x))` with `J_ν(x) = √(2/(πx))·(P cos χ − Q sin χ)`.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * k as f64 * x);
        let mag = term.abs();
        if mag > last {
            break;
        }
        // i^k pattern: k≡1 → +Q, k≡2 → −P, k≡3 → −Q, k≡0 → +P
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if mag < 1e-17 {
            break;
        }
        last = mag;
    }
    (p, q)
}

fn hankel_j0_j1(x: f64) -> (f64, f64) {
    let (s, c) = x.sin_cos();
    let amp = (2.0 / (PI * x)).sqrt();
    // χ₀ = x − π/4, χ₁ = x − 3π/4
    let (cos0, sin0) = ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2);
    let (cos1, sin1) = ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2);
    let (p0, q0) = hankel_pq(0.0, x);
    let (p1, q1) = hankel_pq(1.0, x);
    (amp * (p0 * cos0 - q0 * sin0), amp * (p1 * cos1 - q1 * sin1))
}

// Cutoff for the asymptotic tail: both r and U·r must be at least this large.
const TAIL_START: f64 = 64.0;
// Degree in 1/r kept in the asymptotic expansion of the integrand.
const TAIL_ORDER: usize = 12;

/// `I(U, N) = ∫₀^∞ J₁(U·r)·J₀(r)^N dr`.
pub fn integrate_bessel_tail(u: f64, n: u32, spec: &QuadratureSpec) -> Result<TailIntegral> {
    spec.validate()?;
    if !(u.is_finite() && u >= 0.0) {
        return Err(Error::domain(format!("U must be finite and nonnegative, got {u}")));
    }
    if n == 0 {
        return Err(Error::domain("number of steps must be at least 1"));
    }
    if u == 0.0 {
        return Ok(TailIntegral { value: 0.0, abs_error: 0.0, cutoff: 0.0, subintervals: 0 });
    }
    let integrand = |r: f64| {
        let (j0, _) = j0_j1(r);
        let j1u = j0_j1(u * r).1;
        j1u * j0.powi(n as i32)
    };
    let nf = n as f64;
    // half of the shortest oscillation period of the integrand
    let panel = (PI / (nf + u)).min(1.0);

    match spec.tail {
        TailPolicy::Asymptotic => {
            let cutoff = TAIL_START.max(TAIL_START / u);
            let breaks = panel_breaks(cutoff, panel);
            if breaks.len() > spec.max_subintervals {
                return Err(Error::Convergence { value: f64::NAN, error: f64::INFINITY });
            }
            let head = integrate_panels(
                &integrand,
                &breaks,
                spec.abs_tol,
                spec.rel_tol,
                spec.max_subintervals,
            )?;
            let (tail, tail_err) = asymptotic_tail(u, n, cutoff)?;
            Ok(TailIntegral {
                value: head.value + tail,
                abs_error: head.abs_error + tail_err,
                cutoff,
                subintervals: head.subintervals,
            })
        }
        TailPolicy::FixedUpperLimit(limit) => {
            let breaks = panel_breaks(limit, panel);
            if breaks.len() > spec.max_subintervals {
                return Err(Error::Convergence { value: f64::NAN, error: f64::INFINITY });
            }
            let head = integrate_panels(
                &integrand,
                &breaks,
                spec.abs_tol,
                spec.rel_tol,
                spec.max_subintervals,
            )?;
            Ok(TailIntegral {
                value: head.value,
                abs_error: head.abs_error,
                cutoff: limit,
                subintervals: head.subintervals,
            })
        }
        TailPolicy::DecayThreshold => {
            let mut total = 0.0;
            let mut err = 0.0;
            let mut quiet = 0;
            let mut k = 0usize;
            while quiet < 3 {
                if k >= spec.max_subintervals {
                    return Err(Error::Convergence { value: total, error: err });
                }
                let a = k as f64 * panel;
                let (v, e) = kronrod21(&integrand, a, a + panel);
                total += v;
                err += e;
                quiet = if v.abs() < spec.abs_tol { quiet + 1 } else { 0 };
                k += 1;
            }
            Ok(TailIntegral { value: total, abs_error: err, cutoff: k as f64 * panel, subintervals: k })
        }
    }
}

fn panel_breaks(limit: f64, panel: f64) -> Vec<f64> {
    let count = (limit / panel).ceil().max(1.0) as usize;
    let step = limit / count as f64;
    (0..=count).map(|i| i as f64 * step).collect()
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let deg = a.len().min(b.len());
    let mut out = vec![Complex64::new(0.0, 0.0); deg];
    for (i, ai) in a.iter().enumerate().take(deg) {
        for (j, bj) in b.iter().enumerate().take(deg - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_pow(base: &[Complex64], exp: u32) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); base.len()];
    out[0] = Complex64::new(1.0, 0.0);
    for _ in 0..exp {
        out = poly_mul(&out, base);
    }
    out
}

fn binomial_f64(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `∫_A^∞ J₁(U·r)·J₀(r)^N dr` from the Hankel expansion of each factor.
///
/// Each Bessel factor is `√(2/(πx))·Re[h_ν(x)·e^{iχ_ν}]` with
/// `h_ν(x) = Σ a_k(ν)·(i/x)^k`. Expanding the product yields terms
/// `c·r^{-s}·e^{i(ωr+φ)}` whose tails are integrated exactly by [`power_exp_tail`].
fn asymptotic_tail(u: f64, n: u32, cutoff: f64) -> Result<(f64, f64)> {
    let a0 = hankel_coefficients(0.0, TAIL_ORDER);
    let a1 = hankel_coefficients(1.0, TAIL_ORDER);
    let ipow = |k: usize| match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    let h0: Vec<Complex64> = a0.iter().enumerate().map(|(k, &a)| ipow(k) * a).collect();
    let h0c: Vec<Complex64> = h0.iter().map(|c| c.conj()).collect();
    let h1: Vec<Complex64> =
        a1.iter().enumerate().map(|(k, &a)| ipow(k) * a / u.powi(k as i32)).collect();

    let nf = n as f64;
    let prefactor = (2.0 / PI).powf((nf + 1.0) / 2.0) / u.sqrt() / 2f64.powi(n as i32 + 1);

    let mut total = Complex64::new(0.0, 0.0);
    let mut last_order = 0.0f64;
    for j in 0..=n {
        let poly = poly_mul(
            &poly_mul(&poly_pow(&h0, n - j), &poly_pow(&h0c, j)),
            &h1,
        );
        let k_steps = nf - 2.0 * j as f64;
        let omega = k_steps + u;
        let phase = -k_steps * FRAC_PI_4 - 3.0 * FRAC_PI_4;
        let rot = Complex64::from_polar(binomial_f64(n, j), phase);
        for (k, c) in poly.iter().enumerate() {
            let coef = rot * c;
            let s = (nf + 1.0) / 2.0 + k as f64;
            let term = match power_exp_tail(s, omega, cutoff)? {
                Some(e) => coef * e,
                None => {
                    // divergent ∫ r^{-s} with s ≤ 1: only its real part would survive,
                    // and that is admissible only if the coefficient is imaginary
                    if coef.re.abs() > 1e-12 * coef.norm().max(1e-300) {
                        return Err(Error::Convergence { value: f64::NAN, error: f64::INFINITY });
                    }
                    Complex64::new(0.0, 0.0)
                }
            };
            total += term;
            if k == poly.len() - 1 {
                last_order += term.norm();
            }
        }
    }
    let value = 2.0 * prefactor * total.re;
    let err = 2.0 * prefactor * last_order + 1e-15 * value.abs();
    Ok((value, err))
}

/// `E(s, ω, A) = ∫_A^∞ r^{-s}·e^{iωr} dr` for `s ≥ 1`, `A > 0`.
///
/// Returns `None` when the integral diverges (`ω = 0`, `s ≤ 1`).
pub fn power_exp_tail(s: f64, omega: f64, a: f64) -> Result<Option<Complex64>> {
    if omega == 0.0 {
        if s <= 1.0 {
            return Ok(None);
        }
        return Ok(Some(Complex64::new(a.powf(1.0 - s) / (s - 1.0), 0.0)));
    }
    if omega < 0.0 {
        return Ok(power_exp_tail(s, -omega, a)?.map(|c| c.conj()));
    }
    // the asymptotic series is accurate once ωA exceeds s by a safe margin
    let switch = s + 45.0;
    if omega * a >= switch {
        return Ok(Some(power_exp_asymptotic(s, omega, a)));
    }
    let b = switch / omega;
    let t_end = (b / a).ln();
    // substitute r = A·e^t; the phase advances by at most `switch` radians
    let scale = a.powf(1.0 - s);
    let re = |t: f64| {
        let r = a * t.exp();
        scale * ((1.0 - s) * t).exp() * (omega * r).cos()
    };
    let im = |t: f64| {
        let r = a * t.exp();
        scale * ((1.0 - s) * t).exp() * (omega * r).sin()
    };
    let mut breaks: Vec<f64> = Vec::new();
    let mut t = 0.0;
    while t < t_end {
        breaks.push(t);
        t += 0.5;
    }
    let mut phase = omega * a;
    while phase < switch {
        breaks.push((phase / (omega * a)).ln());
        phase += 1.0;
    }
    breaks.push(t_end);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let tol = 1e-15 * scale;
    let re_part = integrate_panels(&re, &breaks, tol, 1e-14, 20_000)?;
    let im_part = integrate_panels(&im, &breaks, tol, 1e-14, 20_000)?;
    let rest = power_exp_asymptotic(s, omega, b);
    Ok(Some(Complex64::new(re_part.value, im_part.value) + rest))
}

/// Integration-by-parts series `(i/ω)·e^{iωA}·A^{-s}·Σ (s)_k·(−i/(ωA))^k`.
fn power_exp_asymptotic(s: f64, omega: f64, a: f64) -> Complex64 {
    let w = Complex64::new(0.0, -1.0 / (omega * a));
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 0..400 {
        term *= w * (s + k as f64);
        let mag = term.norm();
        if mag > last {
            break;
        }
        sum += term;
        if mag < 1e-18 * sum.norm() {
            break;
        }
        last = mag;
    }
    Complex64::new(0.0, 1.0 / omega) * Complex64::from_polar(a.powf(-s), omega * a) * sum
}
