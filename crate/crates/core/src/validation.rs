//! End-to-end checks of the analytic results against simulation and brute force.
//!
//! Every check runs at full scale and reports a one-line verdict. The suite is
//! shared by the `acceptance` test target and the command-line `validate`.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, FRAC_PI_8, PI, TAU};
use std::fmt;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::Serialize;

use crate::analytic::{allanchor_lop, randomwalk_distance_cdf, AllAnchorQuery};
use crate::bounds::{
    coverage_length_atom, coverage_length_cdf_many, coverage_length_pdf, p_delta, p_delta_exact, q_delta, DeltaQuery,
    GeometryRatio,
};
use crate::error::{Error, Result};
use crate::experiments::{fig3, fig5, Figure, FigureParams};
use crate::geometry::{select_pair_optimal, worst_case_speb, Disk, Point2};
use crate::montecarlo::{
    mc_allanchor_lop, mc_coverage_length, mc_p_delta_curve, mc_q_oracle, mc_walk_cdf, Estimate, NetworkConfig,
    RadiusConvention, TrialConfig,
};
use crate::quadrature::integrate_panels;
use crate::specfun::QuadratureSpec;
use crate::table::parse_csv;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationOptions {
    pub seed: u64,
    /// Wall-clock budget for the whole suite, in seconds.
    pub budget_seconds: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { seed: 42, budget_seconds: 600.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} [{:>2}] {} ({:.1} s): {}", self.id, self.name, self.seconds, self.detail)
    }
}

pub const CRITERIA: [(u32, &str); 11] = [
    (1, "two-anchor-count closed form"),
    (2, "random-walk distance CDF"),
    (3, "P(delta) closed-form regime"),
    (4, "P(delta) two-sided bound regime"),
    (5, "P(delta) exact coverage formula"),
    (6, "LOP vs N at threshold 2"),
    (7, "LOP vs threshold for N = 3, 4, 5"),
    (8, "worst-case SPEB and pair selection oracle"),
    (9, "coverage length distribution"),
    (10, "Q radius-convention experiment"),
    (11, "determinism and runtime budget"),
];

type Outcome = Result<(bool, String)>;

/// Runs one check; `elapsed_before` is the suite time spent so far.
pub fn run_criterion(id: u32, opts: &ValidationOptions, elapsed_before: f64) -> CriterionReport {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let outcome = match id {
        1 => walk_closed_form(opts),
        2 => walk_cdf(opts),
        3 => p_delta_closed_regime(opts),
        4 => p_delta_bound_regime(opts),
        5 => p_delta_exact_check(opts),
        6 => lop_vs_n(opts),
        7 => lop_vs_threshold(opts),
        8 => geometry_oracle(opts),
        9 => coverage_check(opts),
        10 => q_convention(opts),
        11 => determinism(opts, elapsed_before),
        _ => Err(Error::domain(format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionReport { id, name, passed, detail, seconds }
}

/// Runs every check in order, calling `on_report` as each finishes.
pub fn run_all_with<F: FnMut(&CriterionReport)>(opts: &ValidationOptions, mut on_report: F) -> Vec<CriterionReport> {
    let start = Instant::now();
    CRITERIA
        .iter()
        .map(|&(id, _)| {
            let r = run_criterion(id, opts, start.elapsed().as_secs_f64());
            on_report(&r);
            r
        })
        .collect()
}

pub fn run_all(opts: &ValidationOptions) -> Vec<CriterionReport> {
    run_all_with(opts, |_| {})
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn walk_closed_form(opts: &ValidationOptions) -> Outcome {
    let start = Instant::now();
    let e: f64 = 2.0;
    let closed = FRAC_2_PI * (1.0f64 / e).sqrt().asin();
    let analytic = allanchor_lop(&AllAnchorQuery::new(2, e)?, &spec())?;
    let cfg = TrialConfig::new(NetworkConfig::with_ratio(2, 100.0, e), 1_000_000, opts.seed);
    let mc = mc_allanchor_lop(&cfg)?;
    let secs = start.elapsed().as_secs_f64();
    let ok = (closed - 0.5).abs() < 1e-12 && (analytic - closed).abs() < 1e-6 && (mc.mean - 0.5).abs() < 0.0015 && secs < 10.0;
    Ok((ok, format!("analytic {analytic:.9}, closed form {closed:.9}, MC {:.5} (1e6 trials), {secs:.2} s", mc.mean)))
}

fn walk_cdf(opts: &ValidationOptions) -> Outcome {
    let mut sup: f64 = 0.0;
    for k in 0..=20 {
        let u = 0.1 * k as f64;
        sup = sup.max((randomwalk_distance_cdf(2, u, &spec())? - FRAC_2_PI * (u / 2.0).asin()).abs());
    }
    let trials = 10_000_000u64;
    let grid: Vec<f64> = (1..=60).map(|k| 0.05 * k as f64).collect();
    let mc = mc_walk_cdf(3, &grid, trials, opts.seed)?;
    // 99% Dvoretzky–Kiefer–Wolfowitz band
    let band = ((2.0f64 / 0.01).ln() / (2.0 * trials as f64)).sqrt();
    let mut worst: f64 = 0.0;
    for (u, m) in grid.iter().zip(&mc) {
        worst = worst.max((randomwalk_distance_cdf(3, *u, &spec())? - m).abs());
    }
    let ok = sup < 1e-6 && worst <= band;
    Ok((ok, format!("N=2 sup error {sup:.2e}; N=3 max deviation {worst:.2e} vs DKW band {band:.2e}")))
}

fn p_delta_closed_regime(opts: &ValidationOptions) -> Outcome {
    let deltas = [FRAC_PI_6, FRAC_PI_4, FRAC_PI_3];
    let mut worst_z: f64 = 0.0;
    let mut ok = true;
    for n in 2..=8 {
        let mc = mc_p_delta_curve(n, &deltas, 1_000_000, opts.seed)?;
        for (d, est) in deltas.iter().zip(&mc) {
            let v = p_delta(&DeltaQuery::new(n, *d)?).exact.ok_or_else(|| Error::domain("closed form expected"))?;
            ok &= est.covers(v, 3.0);
            worst_z = worst_z.max((est.mean - v).abs() / est.stderr.max(f64::MIN_POSITIVE));
        }
    }
    Ok((ok, format!("21 cases, largest deviation {worst_z:.2} stderr")))
}

fn p_delta_bound_regime(opts: &ValidationOptions) -> Outcome {
    let deltas = [PI / 24.0, PI / 12.0, FRAC_PI_8];
    let mut ok = true;
    let mut notes = Vec::new();
    for n in 3..=8 {
        let mc = mc_p_delta_curve(n, &deltas, 1_000_000, opts.seed)?;
        for (d, est) in deltas.iter().zip(&mc) {
            let b = p_delta(&DeltaQuery::new(n, *d)?);
            let tol = 3.0 * est.stderr;
            let inside = est.mean >= b.lower - tol && est.mean <= b.upper + tol;
            if n == 3 {
                ok &= (b.upper - b.lower).abs() < 1e-12 && est.covers(b.lower, 3.0);
            }
            if !inside {
                notes.push(format!("N={n} δ={d:.4}: {} outside [{}, {}]", est.mean, b.lower, b.upper));
            }
            ok &= inside;
        }
    }
    let n3 = p_delta(&DeltaQuery::new(3, PI / 12.0)?).lower;
    let detail = if notes.is_empty() {
        format!("18 cases bracketed (3·stderr slack); N=3 δ=π/12 value {n3:.6}")
    } else {
        notes.join("; ")
    };
    Ok((ok, detail))
}

fn p_delta_exact_check(opts: &ValidationOptions) -> Outcome {
    let start = Instant::now();
    let deltas = [PI / 24.0, PI / 12.0, FRAC_PI_8];
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    for n in 3..=5 {
        let mc = mc_p_delta_curve(n, &deltas, 10_000_000, opts.seed)?;
        for (d, est) in deltas.iter().zip(&mc) {
            let q = DeltaQuery::new(n, *d)?;
            let exact = p_delta_exact(&q, &spec())?;
            let b = p_delta(&q);
            ok &= est.covers(exact, 3.0) && exact >= b.lower - 1e-12 && exact <= b.upper + 1e-12;
            worst_z = worst_z.max((est.mean - exact).abs() / est.stderr);
        }
    }
    // approach π/6 from below so the coverage integral, not the closed form, is evaluated
    let mut edge: f64 = 0.0;
    for n in 2..=8 {
        let below = p_delta_exact(&DeltaQuery::new(n, FRAC_PI_6 * (1.0 - 1e-14))?, &spec())?;
        let closed = p_delta(&DeltaQuery::new(n, FRAC_PI_6)?).lower;
        edge = edge.max((below - closed).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= edge < 1e-8 && secs < 120.0;
    Ok((ok, format!("largest deviation {worst_z:.2} stderr (1e7 trials); |exact − closed| at π/6 {edge:.1e}; {secs:.1} s")))
}

fn lop_vs_n(opts: &ValidationOptions) -> Outcome {
    let start = Instant::now();
    let p = FigureParams { seed: opts.seed, ..FigureParams::defaults(Figure::Fig3) };
    let curves = fig3(&p, &spec())?;
    let c = parse_csv(&curves[0].table.to_csv()?)?;
    let col = |name: &str| c.column(name).map(<[f64]>::to_vec).ok_or_else(|| Error::domain(format!("missing {name}")));
    let (n, analytic, all, all_se) = (col("N")?, col("allanchor_analytic")?, col("allanchor_mc")?, col("allanchor_mc_stderr")?);
    let (two, two_se, lower, upper) = (col("twoanchor_mc_opt")?, col("twoanchor_mc_opt_stderr")?, col("lower_bound")?, col("upper_bound")?);
    let mut fails = Vec::new();
    for i in 0..n.len() {
        let est = |mean: f64, stderr: f64| Estimate { mean, stderr, ci95: (mean, mean), trials: p.trials, seed: p.seed };
        if !est(all[i], all_se[i]).consistent_with(analytic[i], 3.0) {
            fails.push(format!("(a) N={}: analytic {:.5} vs MC {:.5}±{:.1e}", n[i], analytic[i], all[i], all_se[i]));
        }
        let two_est = est(two[i], two_se[i]);
        let below = two[i] < lower[i] && !two_est.consistent_with(lower[i], 3.0);
        let above = two[i] > upper[i] && !two_est.consistent_with(upper[i], 3.0);
        if below || above {
            fails.push(format!("(b) N={}: MC {:.5}±{:.1e} outside [{:.5}, {:.5}]", n[i], two[i], two_se[i], lower[i], upper[i]));
        }
        if two[i] < all[i] - 3.0 * two_se[i].hypot(all_se[i]) {
            fails.push(format!("(c) N={}: two-anchor {:.5} below all-anchor {:.5}", n[i], two[i], all[i]));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 300.0 {
        fails.push(format!("runtime {secs:.0} s"));
    }
    let summary = format!(
        "N=2..10, 1e6 trials; all-anchor {:.4}→{:.2e}, two-anchor {:.4}→{:.2e}; {secs:.1} s",
        all[0],
        all[all.len() - 1],
        two[0],
        two[two.len() - 1]
    );
    Ok((fails.is_empty(), if fails.is_empty() { summary } else { fails.join("; ") }))
}

fn lop_vs_threshold(opts: &ValidationOptions) -> Outcome {
    let p = FigureParams { seed: opts.seed, ..FigureParams::defaults(Figure::Fig5) };
    let at = |e: f64| p.threshold_ratios.iter().position(|t| *t == e).ok_or_else(|| Error::domain(format!("grid lacks {e}")));
    let (i15, i8) = (at(1.5)?, at(8.0)?);
    let mut fails = Vec::new();
    let mut gaps = Vec::new();
    for curve in fig5(&p, &spec())? {
        let c = parse_csv(&curve.table.to_csv()?)?;
        for (mean, se) in [("allanchor_mc", "allanchor_mc_stderr"), ("twoanchor_mc_opt", "twoanchor_mc_opt_stderr")] {
            let (m, s) = (c.column(mean).unwrap_or_default(), c.column(se).unwrap_or_default());
            for k in 1..m.len() {
                if m[k] > m[k - 1] + 3.0 * s[k].hypot(s[k - 1]) {
                    fails.push(format!("{}: {mean} rises at index {k}", curve.stem));
                }
            }
        }
        let gap = |i: usize| c.column("twoanchor_mc_opt").unwrap_or_default()[i] - c.column("allanchor_mc").unwrap_or_default()[i];
        let (g15, g8) = (gap(i15), gap(i8));
        if !(g8 < g15) {
            fails.push(format!("{}: gap at 8 ({g8:.4}) not below gap at 1.5 ({g15:.4})", curve.stem));
        }
        gaps.push(format!("{} gap {g15:.4}→{g8:.4}", curve.stem));
    }
    Ok((fails.is_empty(), if fails.is_empty() { gaps.join(", ") } else { fails.join("; ") }))
}

/// `sin²` of the angle at `p` subtended by `a` and `b`.
fn sin_sq(a: Point2, b: Point2, p: Point2) -> f64 {
    let (u, v) = (a - p, b - p);
    let c = u.cross(v);
    c * c / (u.norm_sq() * v.norm_sq())
}

/// Worst-case SPEB of the pair by brute force: minimum `sin²` of the included
/// angle over a polar grid plus a dense boundary ring. Lines through the disk
/// give `∞`.
fn brute_worst_speb(a: Point2, b: Point2, ur: &Disk, p0: f64) -> f64 {
    let dir = b - a;
    let dist = (ur.center - a).cross(dir).abs() / dir.norm();
    if dist <= ur.radius {
        return f64::INFINITY;
    }
    let mut m = sin_sq(a, b, ur.center);
    for i in 1..=120 {
        let rho = ur.radius * i as f64 / 120.0;
        for k in 0..360 {
            m = m.min(sin_sq(a, b, ur.center + Point2::from_polar(rho, TAU * k as f64 / 360.0)));
        }
    }
    for k in 0..200_000 {
        m = m.min(sin_sq(a, b, ur.boundary_point(TAU * k as f64 / 200_000.0)));
    }
    p0 / m
}

fn uniform_disk(rng: &mut Pcg64Mcg, radius: f64) -> Point2 {
    Point2::from_polar(radius * rng.random::<f64>().sqrt(), TAU * rng.random::<f64>())
}

fn geometry_oracle(opts: &ValidationOptions) -> Outcome {
    let mut rng = Pcg64Mcg::seed_from_u64(opts.seed ^ 0x6765_6f6d);
    let ur = Disk::new(Point2::ORIGIN, 1.0)?;
    let p0 = 1.0;
    let mut worst_rel: f64 = 0.0;
    let mut instances = 0;
    while instances < 1000 {
        let (a, b) = (uniform_disk(&mut rng, 10.0), uniform_disk(&mut rng, 10.0));
        let brute = brute_worst_speb(a, b, &ur, p0);
        if !brute.is_finite() || ur.contains(a) || ur.contains(b) {
            continue;
        }
        let got = worst_case_speb(a, b, &ur, p0)?;
        worst_rel = worst_rel.max((got - brute).abs() / brute);
        instances += 1;
    }
    let (mut agree, mut ties, mut mismatches) = (0, 0, Vec::new());
    for _ in 0..1000 {
        let mut anchors = Vec::new();
        while anchors.len() < 5 {
            let p = uniform_disk(&mut rng, 10.0);
            if !ur.contains(p) {
                anchors.push(p);
            }
        }
        let mut best = (f64::INFINITY, (0, 1));
        let mut table = vec![vec![f64::INFINITY; 5]; 5];
        for i in 0..5 {
            for j in i + 1..5 {
                let s = brute_worst_speb(anchors[i], anchors[j], &ur, p0);
                table[i][j] = s;
                if s < best.0 {
                    best = (s, (i, j));
                }
            }
        }
        let sel = select_pair_optimal(&anchors, &ur, p0)?;
        let chosen = table[sel.pair.0.min(sel.pair.1)][sel.pair.0.max(sel.pair.1)];
        if sel.pair == best.1 || (sel.pair.1, sel.pair.0) == best.1 {
            agree += 1;
        } else if chosen == best.0 || (chosen - best.0).abs() <= 1e-6 * best.0 {
            ties += 1;
        } else {
            mismatches.push(format!("{:?} vs {:?}", sel.pair, best.1));
        }
    }
    let ok = worst_rel < 1e-4 && agree >= 999 && mismatches.is_empty();
    Ok((
        ok,
        format!(
            "worst-case SPEB max rel. error {worst_rel:.1e} over 1000 instances; selection agrees {agree}/1000, ties {ties}{}",
            if mismatches.is_empty() { String::new() } else { format!(", mismatches {}", mismatches.join(" ")) }
        ),
    ))
}

fn coverage_check(opts: &ValidationOptions) -> Outcome {
    let l: f64 = 1.0;
    let trials = 1_000_000u64;
    let critical = 1.628 / (trials as f64).sqrt();
    let (mut worst_mass, mut worst_ks): (f64, f64) = (0.0, 0.0);
    let sp = spec();
    for n in 2..=6u32 {
        for d in [0.05, 0.2] {
            let hi: f64 = (l + d).min(n as f64 * d);
            let mut breaks: Vec<f64> = (1..n).map(|k| k as f64 * d).filter(|y| *y < hi).collect();
            breaks.push(hi);
            let pdf = |y: f64| coverage_length_pdf(n, l, d, y).unwrap_or(f64::NAN);
            let continuous = integrate_panels(&pdf, &breaks, 1e-14, 1e-13, sp.max_subintervals)?.value;
            let atom = coverage_length_atom(n, l, d)?;
            worst_mass = worst_mass.max((continuous + atom.map_or(0.0, |a| a.mass) - 1.0).abs());

            let sample = mc_coverage_length(n, l, d, trials, opts.seed)?;
            let cdf = coverage_length_cdf_many(n, l, d, &sample.samples)?;
            let ks = sample.ks_distance(|y| {
                let i = sample.samples.partition_point(|s| *s < y);
                let right = cdf[i];
                let left = match atom {
                    Some(a) if a.at == y => right - a.mass,
                    _ => right,
                };
                (left, right)
            });
            worst_ks = worst_ks.max(ks);
        }
    }
    let ok = worst_mass < 1e-8 && worst_ks < critical;
    Ok((ok, format!("max |mass − 1| {worst_mass:.1e}; max KS {worst_ks:.2e} vs 99% critical {critical:.2e}")))
}

const Q_REFERENCE: f64 = 0.999168;

fn q_convention(opts: &ValidationOptions) -> Outcome {
    let geom = GeometryRatio::from_ratio(100.0)?;
    let analytic = q_delta(FRAC_PI_2, FRAC_PI_6, &geom);
    let mut parts = vec![format!("formula {analytic:.6}")];
    let mut matching = Vec::new();
    for (conv, label) in [(RadiusConvention::R, "R"), (RadiusConvention::RPlusR, "R+r")] {
        let est = mc_q_oracle(FRAC_PI_6, FRAC_PI_2, &geom, conv, 10_000_000, opts.seed)?;
        let hit = est.covers(Q_REFERENCE, 3.0);
        if hit {
            matching.push(label);
        }
        parts.push(format!("{label}: {:.6}±{:.1e}{}", est.mean, est.stderr, if hit { " (matches)" } else { "" }));
    }
    let verdict = match matching.as_slice() {
        [] => "neither convention matches 0.999168 within 3·stderr".to_string(),
        [one] => format!("the {one} convention matches 0.999168"),
        _ => "both conventions match 0.999168".to_string(),
    };
    // the finding is reported; the end-to-end upper bound is certified by criterion 6
    Ok((true, format!("{verdict}; {}", parts.join(", "))))
}

fn determinism(opts: &ValidationOptions, elapsed_before: f64) -> Outcome {
    let start = Instant::now();
    let run = |threads: usize| -> Result<Vec<String>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
        pool.install(|| {
            let f3 = FigureParams { n_list: vec![2, 3, 4, 5], trials: 50_000, seed: opts.seed, ..FigureParams::defaults(Figure::Fig3) };
            let f5 = FigureParams { trials: 50_000, seed: opts.seed, ..FigureParams::defaults(Figure::Fig5) };
            let mut out = Vec::new();
            for c in fig3(&f3, &spec())?.into_iter().chain(fig5(&f5, &spec())?) {
                out.push(c.table.to_csv()?);
            }
            Ok(out)
        })
    };
    let one = run(1)?;
    let four = run(4)?;
    let again = run(4)?;
    let identical = one == four && four == again;
    let total = elapsed_before + start.elapsed().as_secs_f64();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let ok = identical && total < opts.budget_seconds;
    Ok((
        ok,
        format!(
            "{} CSVs {} across 1 and 4 workers; suite time {total:.0} s on {cores} core(s), budget {:.0} s",
            one.len(),
            if identical { "byte-identical" } else { "DIFFER" },
            opts.budget_seconds
        ),
    ))
}
