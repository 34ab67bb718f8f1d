//! Ranging noise, equivalent Fisher information and the squared position
//! error bound (SPEB).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Law of the distance-dependent ranging noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DisModel {
    /// `σ_dis = kappa · σ_clk`.
    ConstantRatio(f64),
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangingNoise {
    pub sigma_clk: f64,
    pub dis: DisModel,
}

impl RangingNoise {
    pub fn new(sigma_clk: f64, dis: DisModel) -> Result<Self> {
        if !(sigma_clk > 0.0 && sigma_clk.is_finite()) {
            return Err(Error::domain(format!("sigma_clk must be positive, got {sigma_clk}")));
        }
        if let DisModel::ConstantRatio(k) = dis {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::domain(format!("kappa must be nonnegative, got {k}")));
            }
        }
        Ok(Self { sigma_clk, dis })
    }

    /// Unit clock noise and no distance-dependent term.
    pub fn clock_only() -> Self {
        Self { sigma_clk: 1.0, dis: DisModel::Zero }
    }

    pub fn constant_ratio(kappa: f64) -> Result<Self> {
        Self::new(1.0, DisModel::ConstantRatio(kappa))
    }

    pub fn sigma_dis(&self, _distance: f64) -> f64 {
        match self.dis {
            DisModel::ConstantRatio(k) => k * self.sigma_clk,
            DisModel::Zero => 0.0,
        }
    }

    /// Clock-noise-only intensity `1/σ_clk²`; thresholds are expressed in
    /// multiples of the SPEB unit built on it.
    pub fn reference_intensity(&self) -> f64 {
        1.0 / (self.sigma_clk * self.sigma_clk)
    }

    pub fn speb_unit(&self) -> SpebUnit {
        SpebUnit::from_lambda0(self.reference_intensity()).expect("validated sigma_clk")
    }
}

/// `λ = 1 / (σ_dis² + σ_clk²)` at the given distance.
pub fn ranging_intensity(noise: &RangingNoise, distance: f64) -> Result<f64> {
    if !(distance >= 0.0) {
        return Err(Error::domain("distance must be nonnegative"));
    }
    let sd = noise.sigma_dis(distance);
    Ok(1.0 / (sd * sd + noise.sigma_clk * noise.sigma_clk))
}

/// Symmetric 2×2 equivalent Fisher information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Efim {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Efim {
    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }
}

/// `P₀ = 2/λ₀`, the SPEB of a right-angle anchor pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpebUnit {
    pub p0: f64,
    pub lambda0: f64,
}

impl SpebUnit {
    pub fn from_lambda0(lambda0: f64) -> Result<Self> {
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::domain("lambda0 must be positive"));
        }
        Ok(Self { p0: 2.0 / lambda0, lambda0 })
    }
}

pub fn efim(anchors: &[Point2], agent: Point2, noise: &RangingNoise) -> Result<Efim> {
    let mut j = Efim::default();
    for &a in anchors {
        let d = a - agent;
        let dist = d.norm();
        if dist == 0.0 {
            return Err(Error::domain("anchor coincides with the agent"));
        }
        let lambda = ranging_intensity(noise, dist)?;
        let (c, s) = (d.x / dist, d.y / dist);
        j.xx += lambda * c * c;
        j.xy += lambda * c * s;
        j.yy += lambda * s * s;
    }
    Ok(j)
}

/// `tr(J⁻¹)`, or `+∞` when `det J ≤ 1e-15 · tr(J)²`.
pub fn speb(e: &Efim) -> f64 {
    let tr = e.trace();
    let det = e.det();
    if !(det > 1e-15 * tr * tr) || tr <= 0.0 {
        return f64::INFINITY;
    }
    tr / det
}

/// SPEB `4N / (λ₀ (N² − K²))` with `K = |Σ e^{2iθ}|`, for equal intensities.
pub fn speb_from_angles(angles: &[f64], lambda0: f64) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::domain("at least one angle is required"));
    }
    if !(lambda0 > 0.0) {
        return Err(Error::domain("lambda0 must be positive"));
    }
    let (mut c, mut s) = (0.0, 0.0);
    for &t in angles {
        let (s2, c2) = (2.0 * t).sin_cos();
        c += c2;
        s += s2;
    }
    let n = angles.len() as f64;
    let k2 = c * c + s * s;
    if k2 >= n * n - 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok(4.0 * n / (lambda0 * (n * n - k2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn intensity_examples() {
        let zero = RangingNoise::clock_only();
        assert_eq!(ranging_intensity(&zero, 3.0).unwrap(), 1.0);
        let k04 = RangingNoise::constant_ratio(0.4).unwrap();
        assert!((ranging_intensity(&k04, 10.0).unwrap() - 1.0 / 1.16).abs() < 1e-15);
        let k1 = RangingNoise::new(2.0, DisModel::ConstantRatio(1.0)).unwrap();
        assert_eq!(ranging_intensity(&k1, 1.0).unwrap(), 0.125);
        assert!(ranging_intensity(&k1, -1.0).is_err());
        assert!(RangingNoise::new(0.0, DisModel::Zero).is_err());
        assert!(RangingNoise::new(1.0, DisModel::ConstantRatio(-0.1)).is_err());
    }

    #[test]
    fn efim_examples() {
        let n = RangingNoise::clock_only();
        let j = efim(&[Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)], Point2::ORIGIN, &n).unwrap();
        assert!((j.xx - 1.0).abs() < 1e-15 && j.xy.abs() < 1e-15 && (j.yy - 1.0).abs() < 1e-15);
        assert!((speb(&j) - 2.0).abs() < 1e-15);

        let j = efim(&[Point2::new(1.0, 0.0)], Point2::ORIGIN, &n).unwrap();
        assert_eq!((j.xx, j.xy, j.yy), (1.0, 0.0, 0.0));
        assert!(speb(&j).is_infinite());

        // equiangular directions: Σ u uᵀ = (N/2)·I
        let lam0: f64 = 2.0;
        let noise = RangingNoise::new(1.0 / lam0.sqrt(), DisModel::Zero).unwrap();
        let anchors: Vec<Point2> = (0..3).map(|k| Point2::from_polar(5.0, TAU * k as f64 / 3.0)).collect();
        let j = efim(&anchors, Point2::ORIGIN, &noise).unwrap();
        assert!((j.xx - 1.5 * lam0).abs() < 1e-12 && j.xy.abs() < 1e-12 && (j.yy - 1.5 * lam0).abs() < 1e-12);
        assert!((speb(&j) - 2.0 / 3.0).abs() < 1e-12);

        assert!(efim(&[Point2::ORIGIN], Point2::ORIGIN, &n).is_err());
    }

    #[test]
    fn speb_from_angles_examples() {
        assert!((speb_from_angles(&[0.0, FRAC_PI_2], 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(speb_from_angles(&[0.3, 0.3, 0.3], 1.0).unwrap().is_infinite());
        // opposite bearings are collinear too
        assert!(speb_from_angles(&[0.3, 0.3 + PI], 1.0).unwrap().is_infinite());
        assert!(speb_from_angles(&[], 1.0).is_err());
        let unit = SpebUnit::from_lambda0(4.0).unwrap();
        assert_eq!(unit.p0 * unit.lambda0, 2.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn angle_and_matrix_routes_agree(
            angles in proptest::collection::vec(0.0..TAU, 1..=20),
            lam0 in 0.1..10.0f64,
        ) {
            let noise = RangingNoise::new(1.0 / lam0.sqrt(), DisModel::Zero).unwrap();
            let anchors: Vec<Point2> = angles.iter().map(|&t| Point2::from_polar(1.0, t)).collect();
            let j = efim(&anchors, Point2::ORIGIN, &noise).unwrap();
            let a = speb(&j);
            let b = speb_from_angles(&angles, lam0).unwrap();
            if a.is_finite() && b.is_finite() {
                // det J loses digits to cancellation when the bearings are nearly collinear
                let cond = j.trace().powi(2) / j.det();
                prop_assert!((a - b).abs() <= (1e-9 + 1e-14 * cond) * b, "{} vs {}", a, b);
            } else {
                // both routes must flag near-collinear sets; allow the
                // thresholds to straddle only when the SPEB is huge
                let finite = if a.is_finite() { a } else { b };
                prop_assert!(finite.is_infinite() || finite > 1e5 / lam0);
            }
            let n = angles.len() as f64;
            prop_assert!(b >= 4.0 / (lam0 * n) * (1.0 - 1e-12));
        }

        #[test]
        fn zero_dis_efim_ignores_distance(
            pts in proptest::collection::vec((0.1..50.0f64, 0.0..TAU), 1..8),
            scale in proptest::collection::vec(0.1..10.0f64, 8),
        ) {
            let noise = RangingNoise::clock_only();
            let a: Vec<Point2> = pts.iter().map(|&(r, t)| Point2::from_polar(r, t)).collect();
            let b: Vec<Point2> = pts.iter().zip(&scale).map(|(&(r, t), k)| Point2::from_polar(r * k, t)).collect();
            let ja = efim(&a, Point2::ORIGIN, &noise).unwrap();
            let jb = efim(&b, Point2::ORIGIN, &noise).unwrap();
            prop_assert!((ja.xx - jb.xx).abs() < 1e-12);
            prop_assert!((ja.xy - jb.xy).abs() < 1e-12);
            prop_assert!((ja.yy - jb.yy).abs() < 1e-12);
        }
    }
}
