//! Figure reproductions: LOP versus anchor count and versus threshold.

use serde::{Deserialize, Serialize};

use crate::analytic::{allanchor_lop, AllAnchorQuery};
use crate::bounds::{p_delta, two_anchor_lop_lower, two_anchor_lop_upper, DeltaQuery, GeometryRatio};
use crate::error::{Error, Result};
use crate::fim::RangingNoise;
use crate::montecarlo::{
    mc_allanchor_curve, mc_two_anchor_curve, AgentPolicy, Estimate, NetworkConfig, Selector, SpebPolicy, TrialConfig,
};
use crate::plot::PlotSpec;
use crate::specfun::QuadratureSpec;
use crate::table::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    /// LOP versus `N` at fixed threshold.
    Fig3,
    /// `P(δ)` versus `N` with a distance-dependent-noise simulation overlay.
    Fig4,
    /// LOP versus threshold at fixed `N`.
    Fig5,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureParams {
    pub n_list: Vec<u32>,
    /// Thresholds in units of `P₀`.
    pub threshold_ratios: Vec<f64>,
    pub r_over_r: f64,
    pub trials: u64,
    pub seed: u64,
    pub agent_policy: AgentPolicy,
    pub allanchor_speb: SpebPolicy,
    pub twoanchor_speb: SpebPolicy,
    pub selector: Selector,
    pub noise: RangingNoise,
}

/// Threshold grid used for the LOP-versus-threshold figure.
pub const FIG5_THRESHOLDS: [f64; 16] =
    [1.05, 1.1, 1.2, 1.3, 1.5, 1.75, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 7.0, 8.0];

impl FigureParams {
    pub fn defaults(fig: Figure) -> Self {
        let base = Self {
            n_list: (2..=10).collect(),
            threshold_ratios: vec![2.0],
            r_over_r: 100.0,
            trials: 1_000_000,
            seed: 42,
            agent_policy: AgentPolicy::AtCenter,
            allanchor_speb: SpebPolicy::AtAgent,
            twoanchor_speb: SpebPolicy::WorstCaseOverUr,
            selector: Selector::Optimal,
            noise: RangingNoise::clock_only(),
        };
        match fig {
            Figure::Fig3 => base,
            Figure::Fig4 => Self {
                threshold_ratios: vec![1.5, 2.0, 3.0, 5.0],
                noise: RangingNoise::constant_ratio(0.4).expect("valid ratio"),
                ..base
            },
            Figure::Fig5 => Self { n_list: vec![3, 4, 5], threshold_ratios: FIG5_THRESHOLDS.to_vec(), ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.threshold_ratios.is_empty() {
            return Err(Error::domain("N and threshold grids must be non-empty"));
        }
        if self.n_list.iter().any(|&n| n < 2) {
            return Err(Error::domain("every N must be at least 2"));
        }
        if self.threshold_ratios.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::domain("threshold ratios must be positive and finite"));
        }
        if self.trials < 1 {
            return Err(Error::domain("trials must be at least 1"));
        }
        GeometryRatio::from_ratio(self.r_over_r)?;
        Ok(())
    }

    fn trial_config(&self, n: u32, speb_policy: SpebPolicy) -> TrialConfig {
        let mut network = NetworkConfig::with_ratio(n, self.r_over_r, self.threshold_ratios[0]);
        network.noise = self.noise;
        TrialConfig { agent_policy: self.agent_policy, speb_policy, ..TrialConfig::new(network, self.trials, self.seed) }
    }

    fn two_anchor_column(&self) -> &'static str {
        match self.selector {
            Selector::Optimal => "twoanchor_mc_opt",
            Selector::Suboptimal => "twoanchor_mc_subopt",
        }
    }
}

/// One CSV-backed curve set and the chart drawn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub stem: String,
    pub table: Table,
    pub plot: PlotSpec,
}

/// Lower and upper two-anchor bounds; a threshold below `P₀` is certain outage.
fn two_anchor_bounds(n: u32, e: f64, geom: &GeometryRatio, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    if e < 1.0 {
        return Ok((1.0, 1.0));
    }
    let q = DeltaQuery::from_threshold_ratio(n, e)?;
    Ok((two_anchor_lop_lower(&q), two_anchor_lop_upper(&q, geom, spec)?))
}

/// Per-`N` MC curves over the whole threshold grid.
struct McCurves {
    allanchor: Vec<Estimate>,
    twoanchor: Vec<Estimate>,
}

fn mc_curves(p: &FigureParams, n: u32, with_allanchor: bool) -> Result<McCurves> {
    let allanchor = if with_allanchor {
        mc_allanchor_curve(&p.trial_config(n, p.allanchor_speb), &p.threshold_ratios)?
    } else {
        Vec::new()
    };
    let twoanchor = mc_two_anchor_curve(&p.trial_config(n, p.twoanchor_speb), p.selector, &p.threshold_ratios)?.estimates;
    Ok(McCurves { allanchor, twoanchor })
}

fn lop_columns(first: &'static str, two: &'static str) -> [&'static str; 8] {
    let two_se = if two == "twoanchor_mc_opt" { "twoanchor_mc_opt_stderr" } else { "twoanchor_mc_subopt_stderr" };
    [first, "allanchor_analytic", "allanchor_mc", "allanchor_mc_stderr", two, two_se, "lower_bound", "upper_bound"]
}

fn threshold_label(e: f64) -> String {
    format!("{e}")
}

pub fn fig3(p: &FigureParams, spec: &QuadratureSpec) -> Result<Vec<Curve>> {
    p.validate()?;
    let geom = GeometryRatio::from_ratio(p.r_over_r)?;
    let two = p.two_anchor_column();
    let headers = lop_columns("N", two);
    let mut tables: Vec<Table> = p.threshold_ratios.iter().map(|_| Table::new(&headers)).collect();
    for &n in &p.n_list {
        let mc = mc_curves(p, n, true)?;
        for (k, &e) in p.threshold_ratios.iter().enumerate() {
            let analytic = allanchor_lop(&AllAnchorQuery::new(n, e)?, spec)?;
            let (lower, upper) = two_anchor_bounds(n, e, &geom, spec)?;
            tables[k].push(vec![
                Cell::Int(n as i64),
                Cell::Real(analytic),
                Cell::Real(mc.allanchor[k].mean),
                Cell::Real(mc.allanchor[k].stderr),
                Cell::Real(mc.twoanchor[k].mean),
                Cell::Real(mc.twoanchor[k].stderr),
                Cell::Real(lower),
                Cell::Real(upper),
            ]);
        }
    }
    let single = p.threshold_ratios.len() == 1;
    Ok(tables
        .into_iter()
        .zip(&p.threshold_ratios)
        .map(|(table, &e)| Curve {
            stem: if single { "fig3".into() } else { format!("fig3_e{}", threshold_label(e)) },
            plot: PlotSpec {
                title: format!("LOP vs N (threshold {}·P0, R/r = {})", threshold_label(e), p.r_over_r),
                x_label: "number of anchors N".into(),
                y_label: "LOP".into(),
                x_column: "N".into(),
                y_columns: headers.iter().filter(|h| !h.ends_with("stderr") && **h != "N").map(|h| h.to_string()).collect(),
                log_y: true,
            },
            table,
        })
        .collect())
}

pub fn fig4(p: &FigureParams) -> Result<Vec<Curve>> {
    p.validate()?;
    if p.threshold_ratios.iter().any(|e| *e < 1.0) {
        return Err(Error::domain("P(δ) curves need threshold ratios of at least 1"));
    }
    let two = p.two_anchor_column();
    let two_se = format!("{two}_stderr");
    let headers = ["N", "p_delta_lower", "p_delta_upper", two, two_se.as_str()];
    let mut tables: Vec<Table> = p.threshold_ratios.iter().map(|_| Table::new(&headers)).collect();
    for &n in &p.n_list {
        let mc = mc_curves(p, n, false)?;
        for (k, &e) in p.threshold_ratios.iter().enumerate() {
            let b = p_delta(&DeltaQuery::from_threshold_ratio(n, e)?);
            tables[k].push(vec![
                Cell::Int(n as i64),
                Cell::Real(b.lower),
                Cell::Real(b.upper),
                Cell::Real(mc.twoanchor[k].mean),
                Cell::Real(mc.twoanchor[k].stderr),
            ]);
        }
    }
    Ok(tables
        .into_iter()
        .zip(&p.threshold_ratios)
        .map(|(table, &e)| Curve {
            stem: format!("fig4_e{}", threshold_label(e)),
            plot: PlotSpec {
                title: format!("P(delta) vs N (threshold {}·P0)", threshold_label(e)),
                x_label: "number of anchors N".into(),
                y_label: "LOP".into(),
                x_column: "N".into(),
                y_columns: vec!["p_delta_lower".into(), "p_delta_upper".into(), two.into()],
                log_y: true,
            },
            table,
        })
        .collect())
}

pub fn fig5(p: &FigureParams, spec: &QuadratureSpec) -> Result<Vec<Curve>> {
    p.validate()?;
    let geom = GeometryRatio::from_ratio(p.r_over_r)?;
    let two = p.two_anchor_column();
    let headers = lop_columns("threshold_ratio", two);
    let mut out = Vec::new();
    for &n in &p.n_list {
        let mc = mc_curves(p, n, true)?;
        let mut table = Table::new(&headers);
        for (k, &e) in p.threshold_ratios.iter().enumerate() {
            let analytic = allanchor_lop(&AllAnchorQuery::new(n, e)?, spec)?;
            let (lower, upper) = two_anchor_bounds(n, e, &geom, spec)?;
            table.push(vec![
                Cell::Real(e),
                Cell::Real(analytic),
                Cell::Real(mc.allanchor[k].mean),
                Cell::Real(mc.allanchor[k].stderr),
                Cell::Real(mc.twoanchor[k].mean),
                Cell::Real(mc.twoanchor[k].stderr),
                Cell::Real(lower),
                Cell::Real(upper),
            ]);
        }
        out.push(Curve {
            stem: format!("fig5_n{n}"),
            plot: PlotSpec {
                title: format!("LOP vs threshold (N = {n})"),
                x_label: "SPEB threshold [P0]".into(),
                y_label: "LOP".into(),
                x_column: "threshold_ratio".into(),
                y_columns: vec!["allanchor_analytic".into(), "allanchor_mc".into(), two.into(), "lower_bound".into(), "upper_bound".into()],
                log_y: true,
            },
            table,
        });
    }
    Ok(out)
}

pub fn run_figure(fig: Figure, p: &FigureParams, spec: &QuadratureSpec) -> Result<Vec<Curve>> {
    match fig {
        Figure::Fig3 => fig3(p, spec),
        Figure::Fig4 => fig4(p),
        Figure::Fig5 => fig5(p, spec),
    }
}
