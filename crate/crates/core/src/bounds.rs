//! Two-anchor outage analytics.
//!
//! `P(δ)` is the probability that every pairwise included angle at the region
//! centre avoids `[π/2 − δ, π/2 + δ]`, which lower-bounds the two-anchor LOP at
//! threshold `P₀ / cos²δ`. Doubling the bearings turns the condition into "all
//! doubled angles lie within an arc shorter than `π − 2δ`" and gives closed
//! forms for `δ ≥ π/6`, two-sided bounds below, and an exact expression built
//! on the linear coverage distribution.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI, TAU};
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate_panels, CompensatedSum};
use crate::specfun::QuadratureSpec;

const MAX_EXACT_ANCHORS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaQuery {
    pub n_anchors: u32,
    pub delta: f64,
}

impl DeltaQuery {
    pub fn new(n_anchors: u32, delta: f64) -> Result<Self> {
        if n_anchors < 2 {
            return Err(Error::domain("two-anchor analysis needs N ≥ 2"));
        }
        if !(0.0..=FRAC_PI_2).contains(&delta) {
            return Err(Error::domain(format!("delta must lie in [0, π/2], got {delta}")));
        }
        Ok(Self { n_anchors, delta })
    }

    /// Query for threshold `e·P₀`, i.e. `cos²δ = 1/e`; requires `e ≥ 1`.
    pub fn from_threshold_ratio(n_anchors: u32, ratio: f64) -> Result<Self> {
        Self::new(n_anchors, delta_for_threshold_ratio(ratio)?)
    }
}

/// `δ = arccos(1/√e)`.
pub fn delta_for_threshold_ratio(ratio: f64) -> Result<f64> {
    if !(ratio >= 1.0 && ratio.is_finite()) {
        return Err(Error::domain(format!("threshold ratio must be at least 1, got {ratio}")));
    }
    Ok((1.0 / ratio.sqrt()).acos())
}

/// Communication radius `R` and uncertainty radius `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometryRatio {
    pub big_r: f64,
    pub small_r: f64,
}

impl GeometryRatio {
    pub fn new(big_r: f64, small_r: f64) -> Result<Self> {
        if !(small_r > 0.0 && big_r > small_r && big_r.is_finite()) {
            return Err(Error::domain(format!("need R > r > 0, got R={big_r}, r={small_r}")));
        }
        Ok(Self { big_r, small_r })
    }

    pub fn from_ratio(ratio: f64) -> Result<Self> {
        Self::new(ratio, 1.0)
    }

    pub fn ratio(&self) -> f64 {
        self.big_r / self.small_r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<f64>,
    pub method: String,
}

fn closed_form(n: f64, delta: f64) -> f64 {
    n * ((PI - 2.0 * delta) / TAU).powf(n - 1.0)
}

fn upper_branch(n: f64, delta: f64) -> f64 {
    ((PI - 4.0 * delta) / PI).powf(n - 1.0)
        + (n - 1.0) * 4.0 * delta * (PI - 2.0 * delta).powf(n - 2.0) / TAU.powf(n - 1.0)
}

pub fn p_delta(q: &DeltaQuery) -> BoundsReport {
    let n = q.n_anchors as f64;
    let d = q.delta;
    if d >= FRAC_PI_6 {
        let v = closed_form(n, d);
        return BoundsReport { lower: v, upper: v, exact: Some(v), method: "closed form (δ ≥ π/6)".into() };
    }
    let lower = closed_form(n, d) + (n - 2.0) * ((PI - 6.0 * d) / TAU).powf(n - 1.0);
    let upper = upper_branch(n, d);
    BoundsReport { lower, upper, exact: None, method: "two-sided bound (δ < π/6)".into() }
}

/// `P(x)` evaluated so that it never underestimates the true value: the
/// closed form for `x ≥ π/6` and the upper bound below.
pub fn p_delta_conservative(n_anchors: u32, x: f64) -> f64 {
    let n = n_anchors as f64;
    if x >= FRAC_PI_6 {
        closed_form(n, x)
    } else {
        upper_branch(n, x).min(1.0)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

/// A point mass of a mixed distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub at: f64,
    pub mass: f64,
}

fn check_coverage_args(l: f64, d: f64) -> Result<()> {
    if !(l > 0.0 && d > 0.0 && l.is_finite() && d.is_finite()) {
        return Err(Error::domain("coverage segment and interval lengths must be positive"));
    }
    Ok(())
}

/// `Lⁿ` times the continuous part of the coverage density at `y`.
fn coverage_density_scaled(n: u32, l: f64, d: f64, y: f64) -> f64 {
    if n < 2 || y <= d || y >= (l + d).min(n as f64 * d) {
        return 0.0;
    }
    let z = y - d;
    let mut acc = CompensatedSum::default();
    for j in 0..=n - 2 {
        let outer = binomial(n - 1, j) * binomial(n - 1, j + 1) * (l - z).powi(j as i32 + 1);
        for r in 0..=n - 1 - j {
            let base = z - (j + r) as f64 * d;
            if base <= 0.0 {
                break;
            }
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(sign * outer * binomial(n - 1 - j, r) * base.powi((n - j - 2) as i32));
        }
    }
    n as f64 * acc.value()
}

/// Density of the measure `Y` of the union of `n` length-`D` intervals whose
/// centres are uniform on a segment of length `L`. The distribution also has
/// an atom at `nD` (see [`coverage_length_atom`]), which this excludes.
pub fn coverage_length_pdf(n: u32, l: f64, d: f64, y: f64) -> Result<f64> {
    check_coverage_args(l, d)?;
    Ok(coverage_density_scaled(n, l, d, y) / l.powi(n as i32))
}

/// Point mass of the coverage length: all mass at 0 for `n = 0`, at `D` for
/// `n = 1`, and `((L − (n−1)D)/L)ⁿ` at `nD` (no overlaps) when `L > (n−1)D`.
pub fn coverage_length_atom(n: u32, l: f64, d: f64) -> Result<Option<Atom>> {
    check_coverage_args(l, d)?;
    Ok(match n {
        0 => Some(Atom { at: 0.0, mass: 1.0 }),
        _ => {
            let free = l - (n - 1) as f64 * d;
            (free > 0.0).then(|| Atom { at: n as f64 * d, mass: (free / l).powi(n as i32) })
        }
    })
}

/// `P{Y ≤ y}` for the coverage length, atom included.
pub fn coverage_length_cdf(n: u32, l: f64, d: f64, y: f64) -> Result<f64> {
    Ok(coverage_length_cdf_many(n, l, d, &[y])?[0])
}

/// [`coverage_length_cdf`] at several points, sharing the quadrature rule.
pub fn coverage_length_cdf_many(n: u32, l: f64, d: f64, ys: &[f64]) -> Result<Vec<f64>> {
    let atom = coverage_length_atom(n, l, d)?;
    // each piece of the density is a polynomial of degree n − 1
    let gl = gauss_legendre(n as usize / 2 + 2);
    let breaks = coverage_breaks(n, l, d);
    let scale = l.powi(n as i32);
    Ok(ys
        .iter()
        .map(|&y| {
            let mut acc = CompensatedSum::default();
            if let Some(a) = atom {
                if y >= a.at {
                    acc.add(a.mass);
                }
            }
            if n >= 2 {
                for piece in breaks.windows(2) {
                    let (a, b) = (piece[0], piece[1].min(y));
                    if b <= a {
                        break;
                    }
                    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
                    for (x, w) in gl.0.iter().zip(&gl.1) {
                        acc.add(half * w * coverage_density_scaled(n, l, d, mid + half * x) / scale);
                    }
                }
            }
            acc.value().clamp(0.0, 1.0)
        })
        .collect())
}

/// Points where the coverage density changes polynomial piece.
fn coverage_breaks(n: u32, l: f64, d: f64) -> Vec<f64> {
    let hi = (l + d).min(n as f64 * d);
    let mut b = vec![d];
    for k in 2..n {
        let y = k as f64 * d;
        if y < hi {
            b.push(y);
        }
    }
    b.push(hi);
    b
}

/// `Lⁿ · E[(c − Y)^m]` for `m = 0..=max_m`.
fn scaled_coverage_moments(n: u32, l: f64, d: f64, c: f64, max_m: u32, gl: &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
    let len = max_m as usize + 1;
    if n == 0 {
        return (0..len).map(|m| c.powi(m as i32)).collect();
    }
    let mut acc = vec![CompensatedSum::default(); len];
    let free = l - (n - 1) as f64 * d;
    if free > 0.0 {
        let w = free.powi(n as i32);
        let base = c - n as f64 * d;
        for (m, a) in acc.iter_mut().enumerate() {
            a.add(w * base.powi(m as i32));
        }
    }
    if n >= 2 {
        let (xs, ws) = gl;
        for piece in coverage_breaks(n, l, d).windows(2) {
            let (a, b) = (piece[0], piece[1]);
            if b <= a {
                continue;
            }
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (x, w) in xs.iter().zip(ws) {
                let y = mid + half * x;
                let f = half * w * coverage_density_scaled(n, l, d, y);
                let base = c - y;
                let mut p = f;
                for a in acc.iter_mut() {
                    a.add(p);
                    p *= base;
                }
            }
        }
    }
    acc.iter().map(|a| a.value()).collect()
}

/// Exact `P(δ)` from the linear-coverage representation.
pub fn p_delta_exact(q: &DeltaQuery, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let n_anchors = q.n_anchors;
    let delta = q.delta;
    if delta >= FRAC_PI_6 {
        return Ok(closed_form(n_anchors as f64, delta));
    }
    if n_anchors > MAX_EXACT_ANCHORS {
        return Err(Error::domain(format!("exact P(δ) supports N ≤ {MAX_EXACT_ANCHORS}")));
    }
    if delta == 0.0 {
        return Ok(1.0);
    }
    let k = n_anchors - 2;
    let d = 4.0 * delta;
    let lo = 2.0 * delta;
    let hi = PI - 4.0 * delta;
    // the integrand is a polynomial in y of degree < N on each piece
    let gl = gauss_legendre(n_anchors as usize + 2);
    let integrand = |x: f64| {
        let l = (PI - 4.0 * delta - x).max(0.0);
        let c = PI - x;
        let a = x - 2.0 * delta;
        let mut total = CompensatedSum::default();
        for n in 0..=k {
            let moments = scaled_coverage_moments(n, l, d, c, k - n, &gl);
            for (m, mom) in moments.iter().enumerate() {
                let m = m as u32;
                let coef = binomial(k, n) * binomial(k - n, m);
                total.add(coef * a.powi((k - n - m) as i32) * mom);
            }
        }
        total.value()
    };
    // the outer integrand changes piece where L = jD
    let mut breaks = vec![lo];
    for j in (1..=k).rev() {
        let x = hi - j as f64 * d;
        if x > lo {
            breaks.push(x);
        }
    }
    breaks.push(hi);
    let inner = integrate_panels(&integrand, &breaks, spec.abs_tol * TAU.powi(k as i32 + 1), spec.rel_tol, spec.max_subintervals)?;
    let norm = TAU.powi(k as i32 + 1);
    let tail = (PI - 2.0 * delta).powi(k as i32) / norm * ((n_anchors - 1) as f64 * d + PI - 2.0 * delta);
    let v = (n_anchors - 1) as f64 / norm * inner.value + tail;
    Ok(v.clamp(0.0, 1.0))
}

/// Density of the smallest doubled gap on `(2δ, π)`; see [`theta_min_atom`].
pub fn theta_min_pdf(n_anchors: u32, delta: f64, x: f64) -> Result<f64> {
    if n_anchors < 2 {
        return Err(Error::domain("N ≥ 2 required"));
    }
    if x <= 2.0 * delta || x >= PI {
        return Ok(0.0);
    }
    let n = n_anchors as f64;
    Ok((n - 1.0) * (TAU - x).powf(n - 2.0) / TAU.powf(n - 1.0))
}

/// Point mass `(1/2)^{N−1}` at `π`.
pub fn theta_min_atom(n_anchors: u32) -> Result<Atom> {
    if n_anchors < 2 {
        return Err(Error::domain("N ≥ 2 required"));
    }
    Ok(Atom { at: PI, mass: 0.5f64.powi(n_anchors as i32 - 1) })
}

/// `Q` as a function of `μ`, without clamping.
pub fn q_raw(mu: f64) -> f64 {
    let m1 = mu - 1.0;
    let mu4 = mu.powi(4);
    1.0 - 1.0 / (m1 * m1) - 1.0 / (mu * mu) - 1.0 / mu.powi(3) + 2.0 / mu4 - 1.0 / (mu4 * m1)
        + 1.0 / (mu4 * m1 * m1)
        - 12.0 * m1.ln() / mu4
}

/// `dQ/dμ`.
pub fn q_raw_derivative(mu: f64) -> f64 {
    let m1 = mu - 1.0;
    let mu4 = mu.powi(4);
    let mu5 = mu4 * mu;
    2.0 / m1.powi(3) + 2.0 / mu.powi(3) + 3.0 / mu4 - 8.0 / mu5
        + 4.0 / (mu5 * m1)
        + 1.0 / (mu4 * m1 * m1)
        - 4.0 / (mu5 * m1 * m1)
        - 2.0 / (mu4 * m1.powi(3))
        - 12.0 / (mu4 * m1)
        + 48.0 * m1.ln() / mu5
}

/// Largest root of `Q(μ)` on `(1, 20)`.
pub fn q_root() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        let grid: Vec<f64> = (1..=1900).map(|k| 1.0 + 0.01 * k as f64).collect();
        let mut bracket = None;
        for w in grid.windows(2) {
            if q_raw(w[0]) <= 0.0 && q_raw(w[1]) > 0.0 {
                bracket = Some((w[0], w[1]));
            }
        }
        let (mut lo, mut hi) = bracket.expect("Q changes sign on (1, 20)");
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if q_raw(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    })
}

/// `Q` clamped to 0 at or below its largest root and to 1 above.
pub fn q_of_mu(mu: f64) -> f64 {
    if mu <= q_root() {
        return 0.0;
    }
    if mu.is_infinite() {
        return 1.0;
    }
    q_raw(mu).clamp(0.0, 1.0)
}

fn delta_theta(theta: f64, delta: f64) -> f64 {
    (FRAC_PI_2 - delta - theta).abs().min((FRAC_PI_2 + delta - theta).abs())
}

/// `μ = (R/r)·sin(Δθ)` with `Δθ` the distance from `θ` to the nearer edge of
/// `[π/2 − δ, π/2 + δ]`.
pub fn q_mu(theta: f64, delta: f64, geom: &GeometryRatio) -> f64 {
    geom.ratio() * delta_theta(theta, delta).sin()
}

/// Lower bound on the probability that the selected pair's angle stays
/// within `Δθ` of its value at the region centre.
pub fn q_delta(theta: f64, delta: f64, geom: &GeometryRatio) -> f64 {
    q_of_mu(q_mu(theta, delta, geom))
}

/// `d Q_δ / dθ` on `[π/2, π/2 + δ]`; zero where `Q` is clamped.
pub fn q_delta_derivative(theta: f64, delta: f64, geom: &GeometryRatio) -> f64 {
    let arg = FRAC_PI_2 + delta - theta;
    let mu = geom.ratio() * arg.sin();
    if mu <= q_root() || q_raw(mu) >= 1.0 {
        return 0.0;
    }
    -q_raw_derivative(mu) * geom.ratio() * arg.cos()
}

/// Inflation `((R + r)/R)^{2N}` from anchors in the auxiliary region.
pub fn prop1_factor(n_anchors: u32, geom: &GeometryRatio) -> f64 {
    ((geom.big_r + geom.small_r) / geom.big_r).powi(2 * n_anchors as i32)
}

pub fn two_anchor_lop_lower(q: &DeltaQuery) -> f64 {
    p_delta(q).lower
}

/// Upper bound
/// `F · [1 − Q(π/2) − ∫_{π/2}^{π/2+δ} Q′(θ) P(θ − π/2) dθ]`, clamped to `[0, 1]`.
pub fn two_anchor_lop_upper(q: &DeltaQuery, geom: &GeometryRatio, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let delta = q.delta;
    let factor = prop1_factor(q.n_anchors, geom);
    let q_mid = q_delta(FRAC_PI_2, delta, geom);
    let mut integral = 0.0;
    if delta > 0.0 {
        let (lo, hi) = (FRAC_PI_2, FRAC_PI_2 + delta);
        let mut breaks = vec![lo];
        let s = q_root() / geom.ratio();
        if s < 1.0 {
            let t0 = hi - s.asin();
            if t0 > lo && t0 < hi {
                breaks.push(t0);
            }
        }
        if delta > FRAC_PI_6 {
            breaks.push(lo + FRAC_PI_6);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.push(hi);
        let n = q.n_anchors;
        let f = |theta: f64| q_delta_derivative(theta, delta, geom) * p_delta_conservative(n, theta - FRAC_PI_2);
        integral = integrate_panels(&f, &breaks, spec.abs_tol, spec.rel_tol, spec.max_subintervals)?.value;
    }
    Ok((factor * (1.0 - q_mid - integral)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_pcg::Pcg64Mcg;
    use std::f64::consts::FRAC_PI_4;

    fn q(n: u32, d: f64) -> DeltaQuery {
        DeltaQuery::new(n, d).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let r = p_delta(&q(2, FRAC_PI_6));
        assert!((r.exact.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        for n in 2..10 {
            assert_eq!(p_delta(&q(n, FRAC_PI_2)).upper, 0.0);
        }
        let r = p_delta(&q(3, PI / 12.0));
        assert!((r.lower - 0.583_333_333_333_333_3).abs() < 1e-12);
        assert!((r.upper - r.lower).abs() < 1e-12);
        let r = p_delta(&q(4, PI / 12.0));
        assert!((r.lower - 0.320_602).abs() < 1e-6, "{}", r.lower);
        assert!((r.upper - 0.383_102).abs() < 1e-6, "{}", r.upper);
        assert!(r.exact.is_none());
        assert!((p_delta(&q(3, FRAC_PI_4)).lower - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn regimes_meet_at_sixth_pi() {
        for n in 2..=12u32 {
            let nf = n as f64;
            let d = FRAC_PI_6;
            let lower = closed_form(nf, d) + (nf - 2.0) * ((PI - 6.0 * d) / TAU).powf(nf - 1.0);
            assert!((lower - closed_form(nf, d)).abs() < 1e-12);
            assert!((upper_branch(nf, d) - closed_form(nf, d)).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn three_anchor_bounds_coincide() {
        for k in 0..50 {
            let d = FRAC_PI_6 * k as f64 / 50.0;
            let r = p_delta(&q(3, d));
            assert!((r.upper - r.lower).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_are_ordered_and_monotone() {
        for n in 2..=10u32 {
            let mut prev = f64::INFINITY;
            for k in 0..=60 {
                let d = 0.05 + (PI / 3.0 - 0.05) * k as f64 / 60.0;
                let r = p_delta(&q(n, d));
                assert!(r.lower <= r.upper + 1e-12);
                assert!(r.lower <= prev + 1e-12);
                prev = r.lower;
            }
        }
        // eventually decreasing in N for fixed δ
        for d in [0.05, 0.3, FRAC_PI_4, PI / 3.0] {
            let v: Vec<f64> = (2..=40).map(|n| p_delta(&q(n, d)).upper).collect();
            assert!(v.windows(2).rev().take(10).all(|w| w[1] <= w[0]), "δ={d}");
        }
    }

    #[test]
    fn exact_two_anchor_case() {
        let spec = QuadratureSpec::default();
        for d in [0.01, 0.2, 0.4, 0.5] {
            let v = p_delta_exact(&q(2, d), &spec).unwrap();
            assert!((v - (PI - 2.0 * d) / PI).abs() < 1e-12, "δ={d}");
        }
    }

    #[test]
    fn exact_matches_three_anchor_bounds() {
        let spec = QuadratureSpec::default();
        for d in [PI / 24.0, PI / 12.0, PI / 8.0, 0.5] {
            let v = p_delta_exact(&q(3, d), &spec).unwrap();
            assert!((v - p_delta(&q(3, d)).lower).abs() < 1e-9, "δ={d}: {v}");
        }
    }

    #[test]
    fn exact_is_continuous_and_bracketed() {
        let spec = QuadratureSpec::default();
        for n in 2..=9u32 {
            let below = p_delta_exact(&q(n, FRAC_PI_6 - 1e-12), &spec).unwrap();
            assert!((below - closed_form(n as f64, FRAC_PI_6)).abs() < 1e-8, "n={n}");
            for k in 1..12 {
                let d = FRAC_PI_6 * k as f64 / 12.0;
                let v = p_delta_exact(&q(n, d), &spec).unwrap();
                let r = p_delta(&q(n, d));
                assert!(v >= r.lower - 1e-9 && v <= r.upper + 1e-9, "n={n} δ={d}: {v} not in [{}, {}]", r.lower, r.upper);
            }
        }
        assert!(p_delta_exact(&q(31, 0.1), &spec).is_err());
        assert_eq!(p_delta_exact(&q(5, 0.0), &spec).unwrap(), 1.0);
    }

    fn all_avoid(bearings: &[f64], delta: f64) -> bool {
        for i in 0..bearings.len() {
            for j in i + 1..bearings.len() {
                let g = crate::geometry::bearing_gap(bearings[i], bearings[j]);
                if (g - FRAC_PI_2).abs() <= delta {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn exact_matches_simulation() {
        let spec = QuadratureSpec::default();
        let mut rng = Pcg64Mcg::seed_from_u64(11);
        let trials = 400_000;
        for (n, d) in [(4u32, PI / 24.0), (5, PI / 12.0), (6, PI / 8.0)] {
            let exact = p_delta_exact(&q(n, d), &spec).unwrap();
            let mut hits = 0u32;
            let mut b = vec![0.0; n as usize];
            for _ in 0..trials {
                b.iter_mut().for_each(|x| *x = rng.random::<f64>() * TAU);
                hits += all_avoid(&b, d) as u32;
            }
            let p = hits as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((p - exact).abs() < 4.0 * se, "n={n} δ={d}: mc {p} exact {exact}");
        }
    }

    #[test]
    fn coverage_atoms() {
        assert_eq!(coverage_length_atom(0, 1.0, 0.2).unwrap(), Some(Atom { at: 0.0, mass: 1.0 }));
        assert_eq!(coverage_length_atom(1, 1.0, 0.2).unwrap(), Some(Atom { at: 0.2, mass: 1.0 }));
        assert_eq!(coverage_length_pdf(1, 1.0, 0.2, 0.2).unwrap(), 0.0);
        assert!(coverage_length_atom(3, 0.3, 0.2).unwrap().is_none());
        assert!(coverage_length_pdf(2, 0.0, 0.2, 0.1).is_err());
    }

    fn coverage_mass(n: u32, l: f64, d: f64) -> f64 {
        let gl = gauss_legendre(n as usize + 2);
        let moments = scaled_coverage_moments(n, l, d, 0.0, 0, &gl);
        moments[0] / l.powi(n as i32)
    }

    #[test]
    fn coverage_distribution_normalised() {
        for n in 2..=6u32 {
            for d in [0.05, 0.2] {
                for l in [1.0, 0.37, 2.5] {
                    assert!((coverage_mass(n, l, d) - 1.0).abs() < 1e-10, "n={n} D={d} L={l}");
                }
            }
        }
    }

    #[test]
    fn coverage_cdf_consistent_with_density() {
        for n in 1..=6u32 {
            for (l, d) in [(1.0, 0.05), (1.0, 0.2), (0.37, 0.2)] {
                let top = n as f64 * d + l;
                assert_eq!(coverage_length_cdf(n, l, d, 0.5 * d).unwrap(), 0.0);
                assert!((coverage_length_cdf(n, l, d, top).unwrap() - 1.0).abs() < 1e-12);
                let ys = [d, 1.3 * d, 2.5 * d, 0.5 * (d + n as f64 * d)];
                for y in ys {
                    let cdf = coverage_length_cdf(n, l, d, y).unwrap();
                    let quad = crate::quadrature::integrate(|t| coverage_length_pdf(n, l, d, t).unwrap(), d, y.max(d), 1e-14, 1e-13, 400)
                        .unwrap()
                        .value;
                    let atom = coverage_length_atom(n, l, d).unwrap().filter(|a| a.at <= y).map_or(0.0, |a| a.mass);
                    assert!((cdf - quad - atom).abs() < 1e-11, "n={n} L={l} D={d} y={y}");
                }
            }
        }
    }

    #[test]
    fn two_interval_coverage_mean() {
        // E[Y] = D + E[min(|X₁ − X₂|, D)] with |X₁ − X₂| triangular on [0, L]
        let (l, d): (f64, f64) = (1.0, 0.3);
        let want = d + (d - d * d + d.powi(3) / 3.0);
        let gl = gauss_legendre(8);
        let m = scaled_coverage_moments(2, l, d, 0.0, 1, &gl);
        // moment 1 of (0 − Y) is −E[Y]
        assert!((-m[1] / l.powi(2) - want).abs() < 1e-12);
    }

    #[test]
    fn coverage_density_matches_histogram() {
        let (n, l, d) = (3u32, 1.0f64, 0.2f64);
        let mut rng = Pcg64Mcg::seed_from_u64(3);
        let trials = 200_000;
        let bins = 20;
        let hi = (l + d).min(n as f64 * d);
        let width = (hi - d) / bins as f64;
        let mut counts = vec![0u32; bins];
        let mut atom = 0u32;
        for _ in 0..trials {
            let mut c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * l).collect();
            c.sort_by(f64::total_cmp);
            let y = d + c.windows(2).map(|w| (w[1] - w[0]).min(d)).sum::<f64>();
            if (y - n as f64 * d).abs() < 1e-12 {
                atom += 1;
            } else {
                let k = (((y - d) / width) as usize).min(bins - 1);
                counts[k] += 1;
            }
        }
        let m = coverage_length_atom(n, l, d).unwrap().unwrap().mass;
        let p = atom as f64 / trials as f64;
        assert!((p - m).abs() < 4.0 * (m * (1.0 - m) / trials as f64).sqrt());
        let mut chi2 = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            let a = d + k as f64 * width;
            let r = crate::quadrature::integrate(|y| coverage_length_pdf(n, l, d, y).unwrap(), a, a + width, 1e-13, 1e-12, 200)
                .unwrap()
                .value;
            let e = r * trials as f64;
            chi2 += (c as f64 - e).powi(2) / e;
        }
        // χ² with 19 degrees of freedom, 99th percentile
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    #[test]
    fn theta_min_law() {
        for n in 2..=8u32 {
            for d in [0.0, 0.1, FRAC_PI_6, 0.9] {
                let r = crate::quadrature::integrate(|x| theta_min_pdf(n, d, x).unwrap(), 2.0 * d, PI, 1e-14, 1e-14, 100)
                    .unwrap()
                    .value;
                let total = r + theta_min_atom(n).unwrap().mass;
                assert!((total - (1.0 - d / PI).powi(n as i32 - 1)).abs() < 1e-12);
            }
        }
        assert!((theta_min_pdf(2, 0.0, 1.0).unwrap() - 1.0 / TAU).abs() < 1e-15);
        assert_eq!(theta_min_atom(2).unwrap().mass, 0.5);
        assert_eq!(theta_min_pdf(4, 0.3, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn q_expression_values() {
        assert!((q_raw(2.0) + 0.25).abs() < 1e-15);
        let root = q_root();
        assert!(root > 2.0 && root < 3.0);
        assert!(q_raw(root).abs() < 1e-12);
        let g = GeometryRatio::from_ratio(100.0).unwrap();
        assert!((q_delta(FRAC_PI_2, FRAC_PI_6, &g) - 0.999_168).abs() < 1e-6);
        assert_eq!(q_delta(FRAC_PI_2 + FRAC_PI_6, FRAC_PI_6, &g), 0.0);
        assert_eq!(q_of_mu(f64::INFINITY), 1.0);
        assert!(q_of_mu(1e9) > 1.0 - 1e-15);
        assert_eq!(q_of_mu(2.0), 0.0);
    }

    #[test]
    fn q_derivative_matches_finite_difference() {
        for mu in [2.5, 3.0, 5.0, 12.0, 80.0] {
            let h = 1e-6;
            let fd = (q_raw(mu + h) - q_raw(mu - h)) / (2.0 * h);
            assert!((fd - q_raw_derivative(mu)).abs() < 1e-7, "μ={mu}");
        }
        let g = GeometryRatio::from_ratio(40.0).unwrap();
        let d = 0.6;
        for t in [1.6, 1.7, 1.9, 2.0] {
            let h = 1e-6;
            let fd = (q_delta(t + h, d, &g) - q_delta(t - h, d, &g)) / (2.0 * h);
            assert!((fd - q_delta_derivative(t, d, &g)).abs() < 1e-5 * (1.0 + fd.abs()), "θ={t}");
        }
    }

    #[test]
    fn q_nondecreasing_above_root() {
        let root = q_root();
        let mut prev = 0.0;
        for k in 0..=5000 {
            let mu = root + 1e-6 + k as f64 * 0.05;
            assert!(q_raw_derivative(mu) >= 0.0, "μ={mu}");
            let v = q_of_mu(mu);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn q_derivative_nonpositive_on_integration_range() {
        for ratio in [5.0, 100.0, 1e4] {
            let g = GeometryRatio::from_ratio(ratio).unwrap();
            for d in [0.05, FRAC_PI_6, FRAC_PI_4, 1.2] {
                for k in 0..=400 {
                    let t = FRAC_PI_2 + d * k as f64 / 400.0;
                    assert!(q_delta_derivative(t, d, &g) <= 0.0);
                }
            }
        }
    }

    #[test]
    fn region_enlargement_factor() {
        let g = GeometryRatio::from_ratio(100.0).unwrap();
        assert!((prop1_factor(5, &g) - 1.01f64.powi(10)).abs() < 1e-14);
        assert!((prop1_factor(5, &g) - 1.104_622_1).abs() < 1e-7);
        assert!((prop1_factor(10, &g) - 1.220_190).abs() < 1e-6);
        let g = GeometryRatio::new(1.0, 1e-12).unwrap();
        assert!((prop1_factor(7, &g) - 1.0).abs() < 1e-10);
        assert!(GeometryRatio::new(1.0, 1.0).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        assert!((two_anchor_lop_lower(&q(2, FRAC_PI_6)) - 2.0 / 3.0).abs() < 1e-15);
        assert!((two_anchor_lop_lower(&q(3, 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn upper_bound_pinches_for_large_ratio() {
        let spec = QuadratureSpec::default();
        let g = GeometryRatio::from_ratio(1e6).unwrap();
        let qq = q(3, FRAC_PI_6);
        let up = two_anchor_lop_upper(&qq, &g, &spec).unwrap();
        let lo = two_anchor_lop_lower(&qq);
        assert!(up >= lo && up - lo < 1e-3, "{lo} {up}");
    }

    #[test]
    fn upper_bound_dominates_lower() {
        let spec = QuadratureSpec::default();
        for ratio in [10.0, 100.0, 1e3] {
            let g = GeometryRatio::from_ratio(ratio).unwrap();
            for n in 2..=10u32 {
                for d in [1e-9, 0.05, 0.3, FRAC_PI_6, FRAC_PI_4, 1.2] {
                    let qq = q(n, d);
                    let up = two_anchor_lop_upper(&qq, &g, &spec).unwrap();
                    assert!(up >= two_anchor_lop_lower(&qq) - 1e-12 && up <= 1.0, "n={n} δ={d}");
                }
            }
        }
        let g = GeometryRatio::from_ratio(100.0).unwrap();
        assert_eq!(two_anchor_lop_upper(&q(4, 0.0), &g, &spec).unwrap(), 1.0);
    }

    #[test]
    fn threshold_to_delta() {
        assert!((delta_for_threshold_ratio(2.0).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(delta_for_threshold_ratio(1.0).unwrap(), 0.0);
        assert!(delta_for_threshold_ratio(0.9).is_err());
        assert!(DeltaQuery::new(1, 0.1).is_err());
        assert!(DeltaQuery::new(3, 2.0).is_err());
    }

    fn doubled_gap(a: f64, b: f64) -> f64 {
        crate::geometry::bearing_gap(2.0 * a, 2.0 * b)
    }

    proptest! {
        #[test]
        fn avoidance_is_a_doubled_gap_condition(a in 0.0..TAU, b in 0.0..TAU, d in 0.0..FRAC_PI_2) {
            let g = crate::geometry::bearing_gap(a, b);
            let outside = (g - FRAC_PI_2).abs() > d;
            let doubled = doubled_gap(a, b) < PI - 2.0 * d;
            // skip boundary cases where rounding decides
            prop_assume!(((g - FRAC_PI_2).abs() - d).abs() > 1e-9);
            prop_assert_eq!(outside, doubled);
        }

        #[test]
        fn doubled_angles_in_short_arc_add_up(
            start in 0.0..TAU,
            offsets in proptest::collection::vec(0.0..(2.0 * PI / 3.0), 3..8),
            d in FRAC_PI_6..FRAC_PI_2,
        ) {
            // halve so that doubled bearings are start + offset
            let bearings: Vec<f64> = offsets.iter().map(|o| 0.5 * (start + o)).collect();
            let n = bearings.len();
            let mut all_short = true;
            let mut best = (0, 1, -1.0);
            for i in 0..n {
                for j in i + 1..n {
                    let g = doubled_gap(bearings[i], bearings[j]);
                    all_short &= g < PI - 2.0 * d;
                    if g > best.2 {
                        best = (i, j, g);
                    }
                }
            }
            prop_assume!(all_short);
            let (i0, j0, g0) = best;
            for k in 0..n {
                if k == i0 || k == j0 {
                    continue;
                }
                let s = doubled_gap(bearings[i0], bearings[k]) + doubled_gap(bearings[k], bearings[j0]);
                prop_assert!((s - g0).abs() < 1e-9);
            }
        }
    }
}
