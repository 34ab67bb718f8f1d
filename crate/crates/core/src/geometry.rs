//! Plane geometry of two-anchor localization.
//!
//! For an anchor pair `(a, b)` whose line misses the uncertainty disk, the
//! included angle `∠a p b` over `p` in the disk is extremal at the two points
//! where a circle through `a` and `b` touches the disk. Circles through `a`
//! and `b` have centres `M + t·n` on the perpendicular bisector, and every
//! point on the disk side of such a circle sees the chord under the angle
//! `atan2(h, t)` (`h` = half chord length). Tangency reduces to a quadratic in
//! `t`, so the extremes are available in closed form.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point (or vector) in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(radius * c, radius * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn bearing(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Closed disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point2, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
            return Err(Error::domain(format!("disk radius must be positive and finite, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, p: Point2) -> bool {
        (p - self.center).norm() <= self.radius
    }

    pub fn boundary_point(&self, angle: f64) -> Point2 {
        self.center + Point2::from_polar(self.radius, angle)
    }
}

/// Range of the included angle over the uncertainty disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleExtremes {
    /// The anchor line crosses (or touches) the disk.
    Degenerate,
    Range { theta_min: f64, theta_max: f64 },
}

impl AngleExtremes {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, AngleExtremes::Degenerate)
    }

    /// The endpoint farther from π/2.
    pub fn worst(&self) -> Option<f64> {
        match *self {
            AngleExtremes::Degenerate => None,
            AngleExtremes::Range { theta_min, theta_max } => {
                if (theta_min - FRAC_PI_2).abs() >= (theta_max - FRAC_PI_2).abs() {
                    Some(theta_min)
                } else {
                    Some(theta_max)
                }
            }
        }
    }
}

/// Angle `∠a·vertex·b` in `[0, π]`.
pub fn included_angle(a: Point2, b: Point2, vertex: Point2) -> Result<f64> {
    let u = a - vertex;
    let v = b - vertex;
    if u.norm_sq() == 0.0 || v.norm_sq() == 0.0 {
        return Err(Error::domain("vertex coincides with an endpoint"));
    }
    Ok(u.cross(v).abs().atan2(u.dot(v)))
}

/// True iff the infinite line through `a` and `b` is within `disk.radius`
/// of the centre (tangency counts).
pub fn line_intersects_disk(a: Point2, b: Point2, disk: &Disk) -> Result<bool> {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 {
        return Err(Error::domain("line endpoints coincide"));
    }
    let dist = d.cross(disk.center - a).abs() / len;
    Ok(dist <= disk.radius)
}

/// Parameters of the two tangent circles: half chord `h` and centre offsets
/// `t_lo ≤ t_hi` along the bisector normal pointing at the disk.
struct TangentCircles {
    half_chord: f64,
    t_lo: f64,
    t_hi: f64,
}

fn check_outside(p: Point2, disk: &Disk) -> Result<()> {
    if disk.contains(p) {
        return Err(Error::domain("anchor lies inside the uncertainty region"));
    }
    Ok(())
}

fn tangent_circles(a: Point2, b: Point2, ur: &Disk) -> Result<Option<TangentCircles>> {
    check_outside(a, ur)?;
    check_outside(b, ur)?;
    if line_intersects_disk(a, b, ur)? {
        return Ok(None);
    }
    let mid = (a + b) * 0.5;
    let chord = b - a;
    let h = 0.5 * chord.norm();
    let e = chord * (0.5 / h);
    let d = ur.center - mid;
    let along = d.dot(e);
    // distance of the centre from the anchor line, measured on its own side
    let off = d.dot(Point2::new(-e.y, e.x)).abs();
    let r = ur.radius;
    let lead = (off - r) * (off + r);
    let scale = h.max(r).max(d.norm());
    if lead < 1e-12 * scale * scale {
        return Ok(Some(boundary_search(a, b, ur, h)));
    }
    // (K − 2·off·t)² = 4r²(h² + t²) with K = along² + off² − h² − r²
    let k = along * along + off * off - h * h - r * r;
    let disc = k * k + 4.0 * h * h * lead;
    let root = r * disc.sqrt();
    let kb = k * off;
    let t1 = if kb >= 0.0 { (kb + root) / (2.0 * lead) } else { (kb - root) / (2.0 * lead) };
    let product = (k * k - 4.0 * r * r * h * h) / (4.0 * lead);
    let t2 = if t1 != 0.0 { product / t1 } else { (kb - root.copysign(kb)) / (2.0 * lead) };
    Ok(Some(TangentCircles { half_chord: h, t_lo: t1.min(t2), t_hi: t1.max(t2) }))
}

/// Boundary scan with golden-section refinement, used when the tangency
/// quadratic is ill-conditioned (the line nearly touches the disk).
fn boundary_search(a: Point2, b: Point2, ur: &Disk, h: f64) -> TangentCircles {
    // t(p) = h·cot θ(p) is monotone in θ, so extremes of θ give those of t
    let theta = |phi: f64| {
        let p = ur.boundary_point(phi);
        let u = a - p;
        let v = b - p;
        u.cross(v).abs().atan2(u.dot(v))
    };
    const GRID: usize = 1024;
    let step = TAU / GRID as f64;
    let samples: Vec<f64> = (0..GRID).map(|i| theta(i as f64 * step)).collect();
    let (imin, _) = samples.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).unwrap();
    let (imax, _) = samples.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap();
    let lo = golden_section(&theta, (imin as f64 - 1.0) * step, (imin as f64 + 1.0) * step);
    let hi = golden_section(|p| -theta(p), (imax as f64 - 1.0) * step, (imax as f64 + 1.0) * step);
    let th_min = theta(lo).min(samples[imin]);
    let th_max = theta(hi).max(samples[imax]);
    let t_of = |th: f64| h / th.tan();
    TangentCircles { half_chord: h, t_lo: t_of(th_max), t_hi: t_of(th_min) }
}

/// Minimiser of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..100 {
        if hi - lo < 1e-13 * (1.0 + lo.abs()) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Minimum and maximum of `∠a p b` over `p` in the uncertainty disk.
pub fn subtended_angle_extremes(a: Point2, b: Point2, ur: &Disk) -> Result<AngleExtremes> {
    Ok(match tangent_circles(a, b, ur)? {
        None => AngleExtremes::Degenerate,
        Some(tc) => AngleExtremes::Range {
            theta_min: tc.half_chord.atan2(tc.t_hi),
            theta_max: tc.half_chord.atan2(tc.t_lo),
        },
    })
}

/// Largest two-anchor SPEB `p0 / sin²θ` over the uncertainty disk; `+∞` when
/// the anchor line crosses the disk.
pub fn worst_case_speb(a: Point2, b: Point2, ur: &Disk, p0: f64) -> Result<f64> {
    if !(p0 > 0.0) {
        return Err(Error::domain("SPEB unit must be positive"));
    }
    Ok(match tangent_circles(a, b, ur)? {
        None => f64::INFINITY,
        // sin²(atan2(h, t)) = h² / (h² + t²)
        Some(tc) => {
            let t = tc.t_lo.abs().max(tc.t_hi.abs());
            let ratio = t / tc.half_chord;
            p0 * (1.0 + ratio * ratio)
        }
    })
}

/// Outcome of a pair selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSelection {
    pub pair: (usize, usize),
    pub worst_speb: f64,
}

/// Pair minimising the worst-case SPEB over the disk; ties go to the
/// lexicographically first pair.
pub fn select_pair_optimal(anchors: &[Point2], ur: &Disk, p0: f64) -> Result<PairSelection> {
    if anchors.len() < 2 {
        return Err(Error::domain("at least two anchors are required"));
    }
    let mut best: Option<PairSelection> = None;
    for i in 0..anchors.len() {
        for j in i + 1..anchors.len() {
            let speb = worst_case_speb(anchors[i], anchors[j], ur, p0)?;
            if best.is_none_or(|b| speb < b.worst_speb) {
                best = Some(PairSelection { pair: (i, j), worst_speb: speb });
            }
        }
    }
    Ok(best.expect("at least one pair"))
}

/// Pair whose included angle at `center` is closest to π/2, i.e. the
/// minimiser of `1/sin²θ*`; ties go to the lexicographically first pair.
pub fn select_pair_suboptimal(anchors: &[Point2], center: Point2) -> Result<(usize, usize)> {
    if anchors.len() < 2 {
        return Err(Error::domain("at least two anchors are required"));
    }
    let rel: Vec<Point2> = anchors.iter().map(|&a| a - center).collect();
    if rel.iter().any(|v| v.norm_sq() == 0.0) {
        return Err(Error::domain("anchor coincides with the region centre"));
    }
    let mut best = (0, 1);
    let mut best_sin2 = -1.0;
    for i in 0..rel.len() {
        for j in i + 1..rel.len() {
            let c = rel[i].cross(rel[j]);
            let sin2 = c * c / (rel[i].norm_sq() * rel[j].norm_sq());
            if sin2 > best_sin2 {
                best_sin2 = sin2;
                best = (i, j);
            }
        }
    }
    Ok(best)
}

/// Included angle of two bearings, in `[0, π]`.
pub fn bearing_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        TAU - d
    } else {
        d
    }
}
