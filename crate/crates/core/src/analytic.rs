//! All-anchor outage probability.
//!
//! With equal intensities the SPEB at the agent is `2N·P₀ / (N² − K²)`, where
//! `K` is the length of a planar walk of `N` unit steps with uniform headings
//! (the doubled bearings). Outage at threshold `e·P₀` is therefore the event
//! `K > U` with `U² = N² − 2N/e`, and `P{K ≤ U} = U ∫₀^∞ J₁(Ur) J₀(r)^N dr`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::{integrate_bessel_tail, QuadratureSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllAnchorQuery {
    pub n_anchors: u32,
    /// `ε_th / P₀`.
    pub threshold_ratio: f64,
}

impl AllAnchorQuery {
    pub fn new(n_anchors: u32, threshold_ratio: f64) -> Result<Self> {
        if n_anchors < 1 {
            return Err(Error::domain("at least one anchor is required"));
        }
        if !(threshold_ratio > 0.0 && threshold_ratio.is_finite()) {
            return Err(Error::domain(format!("threshold ratio must be positive, got {threshold_ratio}")));
        }
        Ok(Self { n_anchors, threshold_ratio })
    }

    /// `U² = N² − 2N/e`.
    pub fn walk_radius_sq(&self) -> f64 {
        let n = self.n_anchors as f64;
        n * n - 2.0 * n / self.threshold_ratio
    }
}

/// A probability clamped to `[0, 1]` together with the unclamped quadrature value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clamped {
    pub value: f64,
    pub raw: f64,
}

impl Clamped {
    fn new(raw: f64) -> Self {
        Self { value: raw.clamp(0.0, 1.0), raw }
    }

    fn exact(value: f64) -> Self {
        Self { value, raw: value }
    }
}

/// `P{K ≤ u}` for the distance `K` after `n` unit steps with uniform headings.
pub fn randomwalk_distance_cdf_detailed(n: u32, u: f64, spec: &QuadratureSpec) -> Result<Clamped> {
    if n < 1 {
        return Err(Error::domain("walk needs at least one step"));
    }
    if !(u >= 0.0) || u.is_nan() {
        return Err(Error::domain(format!("distance must be nonnegative, got {u}")));
    }
    let nf = n as f64;
    if u >= nf {
        return Ok(Clamped::exact(1.0));
    }
    if n == 1 {
        // one step has length exactly 1
        return Ok(Clamped::exact(if u >= 1.0 { 1.0 } else { 0.0 }));
    }
    if u == 0.0 {
        return Ok(Clamped::exact(0.0));
    }
    let tail = integrate_bessel_tail(u, n, spec)?;
    Ok(Clamped::new(u * tail.value))
}

pub fn randomwalk_distance_cdf(n: u32, u: f64, spec: &QuadratureSpec) -> Result<f64> {
    randomwalk_distance_cdf_detailed(n, u, spec).map(|c| c.value)
}

pub fn allanchor_lop_detailed(q: &AllAnchorQuery, spec: &QuadratureSpec) -> Result<Clamped> {
    if q.n_anchors == 1 {
        return Ok(Clamped::exact(1.0));
    }
    let u2 = q.walk_radius_sq();
    if u2 <= 0.0 {
        return Ok(Clamped::exact(1.0));
    }
    let cdf = randomwalk_distance_cdf_detailed(q.n_anchors, u2.sqrt(), spec)?;
    Ok(Clamped::new(1.0 - cdf.raw))
}

/// Probability that the all-anchor SPEB at the agent exceeds `e·P₀`.
pub fn allanchor_lop(q: &AllAnchorQuery, spec: &QuadratureSpec) -> Result<f64> {
    allanchor_lop_detailed(q, spec).map(|c| c.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_2_PI;

    fn arcsine_cdf(u: f64) -> f64 {
        FRAC_2_PI * (u / 2.0).asin()
    }

    #[test]
    fn single_anchor_always_outage() {
        let spec = QuadratureSpec::default();
        for e in [0.5, 1.0, 2.0, 100.0] {
            assert_eq!(allanchor_lop(&AllAnchorQuery::new(1, e).unwrap(), &spec).unwrap(), 1.0);
        }
    }

    #[test]
    fn two_anchors_closed_form() {
        let spec = QuadratureSpec::default();
        let v = allanchor_lop(&AllAnchorQuery::new(2, 2.0).unwrap(), &spec).unwrap();
        assert!((v - 0.5).abs() < 1e-6);
        for e in [1.1, 1.5, 3.0, 7.0] {
            let v = allanchor_lop(&AllAnchorQuery::new(2, e).unwrap(), &spec).unwrap();
            // SPEB = P₀ / sin²θ with θ uniform on [0, π]
            let want = 1.0 - FRAC_2_PI * (1.0 / e.sqrt()).acos();
            assert!((v - want).abs() < 1e-6, "e={e}: {v} vs {want}");
        }
    }

    #[test]
    fn threshold_below_floor_is_certain_outage() {
        let spec = QuadratureSpec::default();
        for e in [0.1, 0.3, 0.4] {
            assert_eq!(allanchor_lop(&AllAnchorQuery::new(5, e).unwrap(), &spec).unwrap(), 1.0);
        }
    }

    #[test]
    fn walk_cdf_matches_arcsine_law() {
        let spec = QuadratureSpec::default();
        for k in 0..=20 {
            let u = 0.1 * k as f64;
            let v = randomwalk_distance_cdf(2, u, &spec).unwrap();
            assert!((v - arcsine_cdf(u)).abs() < 1e-6, "u={u}");
        }
        assert!((randomwalk_distance_cdf(2, 1.0, &spec).unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn walk_cdf_edges() {
        let spec = QuadratureSpec::default();
        assert_eq!(randomwalk_distance_cdf(1, 0.5, &spec).unwrap(), 0.0);
        assert_eq!(randomwalk_distance_cdf(1, 1.0, &spec).unwrap(), 1.0);
        for n in 2..8 {
            assert_eq!(randomwalk_distance_cdf(n, 0.0, &spec).unwrap(), 0.0);
            assert_eq!(randomwalk_distance_cdf(n, n as f64, &spec).unwrap(), 1.0);
            assert_eq!(randomwalk_distance_cdf(n, n as f64 + 3.0, &spec).unwrap(), 1.0);
        }
        assert!(randomwalk_distance_cdf(3, -0.1, &spec).is_err());
        assert!(AllAnchorQuery::new(0, 1.0).is_err());
        assert!(AllAnchorQuery::new(3, 0.0).is_err());
    }

    #[test]
    fn three_step_cdf_at_one() {
        // P{K₃ ≤ 1}: triangle-area argument gives 1/4
        let v = randomwalk_distance_cdf(3, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((v - 0.25).abs() < 1e-6, "{v}");
    }

    #[test]
    fn walk_cdf_is_monotone() {
        let spec = QuadratureSpec::default();
        for n in [3u32, 4, 6] {
            let mut prev = 0.0;
            for k in 0..=60 {
                let u = n as f64 * k as f64 / 60.0;
                let v = randomwalk_distance_cdf(n, u, &spec).unwrap();
                assert!(v >= prev - 1e-6, "n={n} u={u}");
                prev = v;
            }
        }
    }

    #[test]
    fn lop_monotone_in_threshold_and_anchor_count() {
        let spec = QuadratureSpec::default();
        for n in 2..=8u32 {
            let mut prev = 1.0;
            for k in 0..30 {
                let e = 1.0 + 0.25 * k as f64;
                let v = allanchor_lop(&AllAnchorQuery::new(n, e).unwrap(), &spec).unwrap();
                assert!(v <= prev + 1e-6);
                prev = v;
            }
        }
        for e in [2.5, 4.0] {
            let mut prev = 1.0;
            for n in 2..=10u32 {
                let v = allanchor_lop(&AllAnchorQuery::new(n, e).unwrap(), &spec).unwrap();
                assert!(v <= prev + 1e-6, "e={e} n={n}");
                prev = v;
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn walk_cdf_nondecreasing(n in 2u32..9, a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let spec = QuadratureSpec::default();
            let (lo, hi) = (a.min(b) * n as f64, a.max(b) * n as f64);
            let f_lo = randomwalk_distance_cdf(n, lo, &spec).unwrap();
            let f_hi = randomwalk_distance_cdf(n, hi, &spec).unwrap();
            proptest::prop_assert!(f_lo <= f_hi + 1e-6);
            proptest::prop_assert!((0.0..=1.0).contains(&f_lo));
        }
    }

    #[test]
    fn lop_is_complement_of_walk_cdf() {
        let spec = QuadratureSpec::default();
        for n in 2..=7u32 {
            for e in [1.2, 2.0, 5.0] {
                let q = AllAnchorQuery::new(n, e).unwrap();
                let u = q.walk_radius_sq().sqrt();
                let lhs = allanchor_lop(&q, &spec).unwrap();
                let rhs = 1.0 - randomwalk_distance_cdf(n, u, &spec).unwrap();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}
