//! Seedable Monte Carlo estimators.
//!
//! Every trial draws from its own generator keyed by `(seed, trial index)`, and
//! trials are reduced by integer counting, so results do not depend on how
//! rayon splits the work.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::GeometryRatio;
use crate::error::{Error, Result};
use crate::fim::{efim, ranging_intensity, speb, RangingNoise};
use crate::geometry::{
    bearing_gap, golden_section, included_angle, select_pair_suboptimal, worst_case_speb, Disk, Point2,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentPolicy {
    AtCenter,
    UniformInUr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpebPolicy {
    AtAgent,
    WorstCaseOverUr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    Optimal,
    Suboptimal,
}

/// Radius of the disk the Q oracle draws anchor distances from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusConvention {
    R,
    RPlusR,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NetworkConfig {
    pub n_anchors: u32,
    /// Communication radius `R`.
    pub big_r: f64,
    /// Uncertainty radius `r`.
    pub small_r: f64,
    pub noise: RangingNoise,
    /// `ε_th / P₀`, with `P₀` built on the clock-noise intensity.
    pub threshold_ratio: f64,
}

impl NetworkConfig {
    /// `R/r` given as a ratio, with `r = 1`.
    pub fn with_ratio(n_anchors: u32, r_over_r: f64, threshold_ratio: f64) -> Self {
        Self { n_anchors, big_r: r_over_r, small_r: 1.0, noise: RangingNoise::clock_only(), threshold_ratio }
    }

    pub fn geometry(&self) -> Result<GeometryRatio> {
        GeometryRatio::new(self.big_r, self.small_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialConfig {
    pub network: NetworkConfig,
    pub trials: u64,
    pub seed: u64,
    pub agent_policy: AgentPolicy,
    pub speb_policy: SpebPolicy,
}

impl TrialConfig {
    pub fn new(network: NetworkConfig, trials: u64, seed: u64) -> Self {
        Self { network, trials, seed, agent_policy: AgentPolicy::AtCenter, speb_policy: SpebPolicy::AtAgent }
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        if self.trials < 1 {
            return Err(Error::domain("trials must be at least 1"));
        }
        if n.n_anchors < 1 {
            return Err(Error::domain("at least one anchor is required"));
        }
        n.geometry()?;
        if !(n.threshold_ratio > 0.0 && n.threshold_ratio.is_finite()) {
            return Err(Error::domain("threshold ratio must be positive"));
        }
        RangingNoise::new(n.noise.sigma_clk, n.noise.dis)?;
        Ok(())
    }
}

/// One network realization; the uncertainty region is centred at `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub center: Point2,
    pub agent: Point2,
    pub anchors: Vec<Point2>,
}

/// Bernoulli-proportion estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub trials: u64,
    pub seed: u64,
}

impl Estimate {
    pub fn from_counts(hits: u64, trials: u64, seed: u64) -> Self {
        let mean = hits as f64 / trials as f64;
        let stderr = (mean * (1.0 - mean) / trials as f64).sqrt();
        let half = 1.96 * stderr;
        Self { mean, stderr, ci95: ((mean - half).max(0.0), (mean + half).min(1.0)), trials, seed }
    }

    /// `|a − b| ≤ k·√(se_a² + se_b²)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.stderr.hypot(other.stderr)
    }

    /// `|mean − v| ≤ k·stderr`.
    pub fn covers(&self, v: f64, k: f64) -> bool {
        (self.mean - v).abs() <= k * self.stderr
    }

    /// Test of `p = v`: like [`Estimate::covers`], but the standard error is
    /// at least the one implied by `v` itself, so a run with no hits is not
    /// judged with a zero-width interval.
    pub fn consistent_with(&self, v: f64, k: f64) -> bool {
        let null = (v * (1.0 - v) / self.trials as f64).max(0.0).sqrt();
        (self.mean - v).abs() <= k * self.stderr.max(null)
    }
}

// Distinct stream tags keep estimators that share a seed independent.
const STREAM_DEPLOYMENT: u64 = 0x6465_706c_6f79;
const STREAM_BEARINGS: u64 = 0x6265_6172_696e;
const STREAM_RADII: u64 = 0x7261_6469_6921;
const STREAM_COVERAGE: u64 = 0x636f_7665_7221;
const STREAM_WALK: u64 = 0x7761_6c6b_2121;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn trial_rng(seed: u64, stream: u64, trial: u64) -> Pcg64Mcg {
    let key = splitmix64(seed ^ splitmix64(stream ^ splitmix64(trial)));
    Pcg64Mcg::seed_from_u64(key)
}

fn uniform_in_disk(rng: &mut Pcg64Mcg, center: Point2, radius: f64) -> Point2 {
    let rho = radius * rng.random::<f64>().sqrt();
    center + Point2::from_polar(rho, TAU * rng.random::<f64>())
}

/// Runs `trials` trials in parallel, each adding into a `width`-long counter vector.
fn parallel_counts<F>(trials: u64, width: usize, body: F) -> Vec<u64>
where
    F: Fn(u64, &mut [u64]) + Sync,
{
    (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; width],
            |mut acc, t| {
                body(t, &mut acc);
                acc
            },
        )
        .reduce(
            || vec![0u64; width],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn count_exceedances(value: f64, thresholds: &[f64], acc: &mut [u64]) {
    for (a, &t) in acc.iter_mut().zip(thresholds) {
        if value > t {
            *a += 1;
        }
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() || thresholds.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::domain("threshold list must be non-empty and positive"));
    }
    Ok(())
}

pub fn sample_deployment(cfg: &TrialConfig, trial: u64) -> Result<Deployment> {
    if trial >= cfg.trials {
        return Err(Error::domain(format!("trial index {trial} out of range")));
    }
    Ok(deploy(cfg, trial))
}

fn deploy(cfg: &TrialConfig, trial: u64) -> Deployment {
    let mut rng = trial_rng(cfg.seed, STREAM_DEPLOYMENT, trial);
    let center = Point2::ORIGIN;
    let agent = match cfg.agent_policy {
        AgentPolicy::AtCenter => center,
        AgentPolicy::UniformInUr => uniform_in_disk(&mut rng, center, cfg.network.small_r),
    };
    let anchors = (0..cfg.network.n_anchors).map(|_| uniform_in_disk(&mut rng, agent, cfg.network.big_r)).collect();
    Deployment { center, agent, anchors }
}

fn speb_at(anchors: &[Point2], p: Point2, noise: &RangingNoise) -> f64 {
    efim(anchors, p, noise).map(|j| speb(&j)).unwrap_or(f64::INFINITY)
}

const BOUNDARY_SAMPLES: usize = 64;

/// All-anchor SPEB per the configured policy, in units of `P₀`.
fn allanchor_ratio(cfg: &TrialConfig, dep: &Deployment) -> f64 {
    let noise = &cfg.network.noise;
    let p0 = noise.speb_unit().p0;
    let s = match cfg.speb_policy {
        SpebPolicy::AtAgent => speb_at(&dep.anchors, dep.agent, noise),
        SpebPolicy::WorstCaseOverUr => {
            let ur = Disk { center: dep.center, radius: cfg.network.small_r };
            let at = |phi: f64| speb_at(&dep.anchors, ur.boundary_point(phi), noise);
            let step = TAU / BOUNDARY_SAMPLES as f64;
            let ring: Vec<f64> = (0..BOUNDARY_SAMPLES).map(|k| at(k as f64 * step)).collect();
            let mut best = ring.iter().copied().fold(speb_at(&dep.anchors, dep.center, noise), f64::max);
            if best.is_finite() {
                // refine every local maximum of the ring
                for k in 0..BOUNDARY_SAMPLES {
                    let prev = ring[(k + BOUNDARY_SAMPLES - 1) % BOUNDARY_SAMPLES];
                    let next = ring[(k + 1) % BOUNDARY_SAMPLES];
                    if ring[k] >= prev && ring[k] >= next {
                        let phi = k as f64 * step;
                        let refined = golden_section(|x| -at(x), phi - step, phi + step);
                        best = best.max(at(refined));
                    }
                }
            }
            best
        }
    };
    s / p0
}

/// Pair SPEB unit `(λᵢ + λⱼ)/(λᵢλⱼ)`; equals `2/λ` for equal intensities.
fn pair_unit(noise: &RangingNoise, agent: Point2, a: Point2, b: Point2) -> f64 {
    let li = ranging_intensity(noise, (a - agent).norm()).expect("nonnegative distance");
    let lj = ranging_intensity(noise, (b - agent).norm()).expect("nonnegative distance");
    (li + lj) / (li * lj)
}

fn pair_speb(cfg: &TrialConfig, dep: &Deployment, ur: &Disk, a: Point2, b: Point2) -> f64 {
    let unit = pair_unit(&cfg.network.noise, dep.agent, a, b);
    match cfg.speb_policy {
        SpebPolicy::WorstCaseOverUr => worst_case_speb(a, b, ur, unit).unwrap_or(f64::INFINITY),
        SpebPolicy::AtAgent => match included_angle(a, b, dep.agent) {
            Ok(theta) => {
                let s = theta.sin();
                if s == 0.0 {
                    f64::INFINITY
                } else {
                    unit / (s * s)
                }
            }
            Err(_) => f64::INFINITY,
        },
    }
}

/// Two-anchor SPEB in units of `P₀` and whether any anchor fell inside the
/// uncertainty region.
fn two_anchor_ratio(cfg: &TrialConfig, dep: &Deployment, selector: Selector) -> (f64, bool) {
    let ur = Disk { center: dep.center, radius: cfg.network.small_r };
    let valid: Vec<Point2> = dep.anchors.iter().copied().filter(|a| !ur.contains(*a)).collect();
    let excluded = valid.len() < dep.anchors.len();
    if valid.len() < 2 {
        return (f64::INFINITY, excluded);
    }
    let s = match selector {
        Selector::Optimal => {
            let mut best = f64::INFINITY;
            for i in 0..valid.len() {
                for j in i + 1..valid.len() {
                    best = best.min(pair_speb(cfg, dep, &ur, valid[i], valid[j]));
                }
            }
            best
        }
        Selector::Suboptimal => match select_pair_suboptimal(&valid, dep.center) {
            Ok((i, j)) => pair_speb(cfg, dep, &ur, valid[i], valid[j]),
            Err(_) => f64::INFINITY,
        },
    };
    (s / cfg.network.noise.speb_unit().p0, excluded)
}

/// All-anchor LOP at each threshold ratio, sharing one set of trials.
pub fn mc_allanchor_curve(cfg: &TrialConfig, thresholds: &[f64]) -> Result<Vec<Estimate>> {
    cfg.validate()?;
    check_thresholds(thresholds)?;
    let counts = parallel_counts(cfg.trials, thresholds.len(), |t, acc| {
        count_exceedances(allanchor_ratio(cfg, &deploy(cfg, t)), thresholds, acc);
    });
    Ok(counts.iter().map(|&c| Estimate::from_counts(c, cfg.trials, cfg.seed)).collect())
}

pub fn mc_allanchor_lop(cfg: &TrialConfig) -> Result<Estimate> {
    Ok(mc_allanchor_curve(cfg, &[cfg.network.threshold_ratio])?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoAnchorRun {
    pub estimates: Vec<Estimate>,
    /// Trials in which at least one anchor fell inside the uncertainty region.
    pub excluded_anchor_trials: u64,
}

pub fn mc_two_anchor_curve(cfg: &TrialConfig, selector: Selector, thresholds: &[f64]) -> Result<TwoAnchorRun> {
    cfg.validate()?;
    check_thresholds(thresholds)?;
    if cfg.network.n_anchors < 2 {
        return Err(Error::domain("two-anchor localization needs N ≥ 2"));
    }
    let width = thresholds.len();
    let counts = parallel_counts(cfg.trials, width + 1, |t, acc| {
        let (ratio, excluded) = two_anchor_ratio(cfg, &deploy(cfg, t), selector);
        count_exceedances(ratio, thresholds, &mut acc[..width]);
        acc[width] += excluded as u64;
    });
    Ok(TwoAnchorRun {
        estimates: counts[..width].iter().map(|&c| Estimate::from_counts(c, cfg.trials, cfg.seed)).collect(),
        excluded_anchor_trials: counts[width],
    })
}

pub fn mc_two_anchor_lop(cfg: &TrialConfig, selector: Selector) -> Result<Estimate> {
    Ok(mc_two_anchor_curve(cfg, selector, &[cfg.network.threshold_ratio])?.estimates[0])
}

/// Smallest `|θᵢⱼ − π/2|` over all pairs of bearings.
fn min_offset_from_right_angle(bearings: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..bearings.len() {
        for j in i + 1..bearings.len() {
            m = m.min((bearing_gap(bearings[i], bearings[j]) - FRAC_PI_2).abs());
        }
    }
    m
}

/// Probability that all pairwise included angles of `n` uniform bearings
/// avoid `[π/2 − δ, π/2 + δ]`, for each `δ`.
pub fn mc_p_delta_curve(n: u32, deltas: &[f64], trials: u64, seed: u64) -> Result<Vec<Estimate>> {
    if n < 2 {
        return Err(Error::domain("N ≥ 2 required"));
    }
    if trials < 1 || deltas.is_empty() || deltas.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::domain("need trials ≥ 1 and nonnegative deltas"));
    }
    let counts = parallel_counts(trials, deltas.len(), |t, acc| {
        let mut rng = trial_rng(seed, STREAM_BEARINGS, t);
        let bearings: Vec<f64> = (0..n).map(|_| TAU * rng.random::<f64>()).collect();
        count_exceedances(min_offset_from_right_angle(&bearings), deltas, acc);
    });
    Ok(counts.iter().map(|&c| Estimate::from_counts(c, trials, seed)).collect())
}

pub fn mc_p_delta(n: u32, delta: f64, trials: u64, seed: u64) -> Result<Estimate> {
    Ok(mc_p_delta_curve(n, &[delta], trials, seed)?[0])
}

/// Probability that the pair chosen by the centre-angle rule has its angle at
/// the region centre outside `[π/2 − δ, π/2 + δ]`, over full deployments.
pub fn mc_selected_angle_outside(cfg: &TrialConfig, delta: f64) -> Result<Estimate> {
    cfg.validate()?;
    if cfg.network.n_anchors < 2 {
        return Err(Error::domain("N ≥ 2 required"));
    }
    let counts = parallel_counts(cfg.trials, 1, |t, acc| {
        let dep = deploy(cfg, t);
        let outside = match select_pair_suboptimal(&dep.anchors, dep.center) {
            Ok((i, j)) => included_angle(dep.anchors[i], dep.anchors[j], dep.center)
                .map(|th| (th - FRAC_PI_2).abs() > delta)
                .unwrap_or(true),
            Err(_) => true,
        };
        acc[0] += outside as u64;
    });
    Ok(Estimate::from_counts(counts[0], cfg.trials, cfg.seed))
}

/// Probability that `r/ρ₁ + r/ρ₂ ≤ sin Δθ` for independent uniform-in-disk
/// distances `ρ₁, ρ₂`.
pub fn mc_q_oracle(
    delta: f64,
    theta: f64,
    geom: &GeometryRatio,
    convention: RadiusConvention,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    if trials < 1 {
        return Err(Error::domain("trials must be at least 1"));
    }
    let r = geom.small_r;
    let r_max = match convention {
        RadiusConvention::R => geom.big_r,
        RadiusConvention::RPlusR => geom.big_r + geom.small_r,
    };
    let dt = (FRAC_PI_2 - delta - theta).abs().min((FRAC_PI_2 + delta - theta).abs());
    let s = dt.sin();
    let counts = parallel_counts(trials, 1, |t, acc| {
        let mut rng = trial_rng(seed, STREAM_RADII, t);
        // 1 − U lies in (0, 1], keeping the distances positive
        let rho1 = r_max * (1.0 - rng.random::<f64>()).sqrt();
        let rho2 = r_max * (1.0 - rng.random::<f64>()).sqrt();
        acc[0] += (r / rho1 + r / rho2 <= s) as u64;
    });
    Ok(Estimate::from_counts(counts[0], trials, seed))
}

/// Simulated coverage lengths, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSample {
    pub samples: Vec<f64>,
}

impl CoverageSample {
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn std_error(&self) -> f64 {
        let m = self.mean();
        let n = self.samples.len() as f64;
        let var = self.samples.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (var / n).sqrt()
    }

    /// Fraction of samples `≤ y`.
    pub fn ecdf(&self, y: f64) -> f64 {
        self.samples.partition_point(|&s| s <= y) as f64 / self.samples.len() as f64
    }

    /// Counts in `bins` equal bins over `[lo, hi]`; values outside are dropped.
    pub fn histogram(&self, lo: f64, hi: f64, bins: usize) -> Vec<u64> {
        let mut h = vec![0u64; bins];
        let w = (hi - lo) / bins as f64;
        for &y in &self.samples {
            if y >= lo && y <= hi {
                h[(((y - lo) / w) as usize).min(bins - 1)] += 1;
            }
        }
        h
    }

    /// Kolmogorov–Smirnov distance to a CDF that may have atoms: `cdf(y)`
    /// must return `(F(y⁻), F(y))`.
    pub fn ks_distance<F: Fn(f64) -> (f64, f64)>(&self, cdf: F) -> f64 {
        let n = self.samples.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.samples.len() {
            let y = self.samples[i];
            let mut k = i;
            while k < self.samples.len() && self.samples[k] == y {
                k += 1;
            }
            let (left, right) = cdf(y);
            d = d.max((i as f64 / n - left).abs()).max((k as f64 / n - right).abs());
            i = k;
        }
        d
    }
}

/// Samples the measure of `∪ (Xᵢ − D/2, Xᵢ + D/2)` with `Xᵢ` uniform on `[0, L]`.
pub fn mc_coverage_length(n: u32, l: f64, d: f64, trials: u64, seed: u64) -> Result<CoverageSample> {
    if !(l > 0.0 && d > 0.0) || trials < 1 {
        return Err(Error::domain("need L > 0, D > 0 and trials ≥ 1"));
    }
    let mut samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            if n == 0 {
                return 0.0;
            }
            let mut rng = trial_rng(seed, STREAM_COVERAGE, t);
            let mut x: Vec<f64> = (0..n).map(|_| l * rng.random::<f64>()).collect();
            x.sort_by(f64::total_cmp);
            let mut overlap = false;
            let mut y = d;
            for w in x.windows(2) {
                let g = w[1] - w[0];
                if g < d {
                    overlap = true;
                    y += g;
                } else {
                    y += d;
                }
            }
            // no overlap: exactly nD, the location of the atom
            if overlap {
                y
            } else {
                n as f64 * d
            }
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    Ok(CoverageSample { samples })
}

/// Empirical `P{K ≤ u}` at each `u` for the length `K` of an `n`-step
/// unit planar walk with uniform headings.
pub fn mc_walk_cdf(n: u32, grid: &[f64], trials: u64, seed: u64) -> Result<Vec<f64>> {
    if trials < 1 || grid.is_empty() {
        return Err(Error::domain("need trials ≥ 1 and a non-empty grid"));
    }
    let counts = parallel_counts(trials, grid.len(), |t, acc| {
        let mut rng = trial_rng(seed, STREAM_WALK, t);
        let (mut x, mut y) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let (s, c) = (TAU * rng.random::<f64>()).sin_cos();
            x += c;
            y += s;
        }
        let k = x.hypot(y);
        for (a, &u) in acc.iter_mut().zip(grid) {
            *a += (k <= u) as u64;
        }
    });
    Ok(counts.iter().map(|&c| c as f64 / trials as f64).collect())
}
