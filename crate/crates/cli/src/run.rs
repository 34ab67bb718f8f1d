//! Experiment description and execution.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lop_core::analytic::{allanchor_lop_detailed, AllAnchorQuery};
use lop_core::bounds::{p_delta, p_delta_exact, q_delta, two_anchor_lop_upper, DeltaQuery, GeometryRatio};
use lop_core::experiments::{run_figure, Curve, Figure, FigureParams};
use lop_core::montecarlo::{
    mc_allanchor_curve, mc_q_oracle, mc_two_anchor_curve, AgentPolicy, NetworkConfig, RadiusConvention, Selector,
    SpebPolicy, TrialConfig,
};
use lop_core::plot::svg_from_csv;
use lop_core::specfun::QuadratureSpec;
use lop_core::table::{Cell, Table};
use lop_core::validation::{run_all_with, ValidationOptions};
use serde_json::{json, Value};

use crate::grid::{parse_counts, parse_real, parse_reals};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<lop_core::Error> for Failure {
    fn from(e: lop_core::Error) -> Self {
        let code = match e {
            lop_core::Error::Convergence { .. } => EXIT_CONVERGENCE,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("I/O error: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Figure(Figure),
    Analytic,
    Bounds,
    Mc,
    Validate,
    QOracle,
}

impl Kind {
    /// Config-file section holding this kind's overrides.
    pub fn section(self) -> &'static str {
        match self {
            Kind::Figure(_) => "figure",
            Kind::Analytic => "analytic",
            Kind::Bounds => "bounds",
            Kind::Mc => "mc",
            Kind::Validate => "validate",
            Kind::QOracle => "q-oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub n_list: Vec<u32>,
    /// Explicit angular margins; when empty, `threshold_ratios` drive the run.
    pub deltas: Vec<f64>,
    pub threshold_ratios: Vec<f64>,
    pub r_over_r: f64,
    pub trials: u64,
    pub seed: u64,
    pub theta: f64,
    pub agent_policy: AgentPolicy,
    /// Overrides the per-curve default SPEB policy when set.
    pub speb_policy: Option<SpebPolicy>,
    pub selector: Selector,
    pub out_dir: Option<PathBuf>,
    pub formats: Formats,
}

fn parse_agent(s: &str) -> Result<AgentPolicy, String> {
    match s.trim() {
        "at-center" => Ok(AgentPolicy::AtCenter),
        "uniform-in-ur" => Ok(AgentPolicy::UniformInUr),
        o => Err(format!("unknown agent policy {o:?} (at-center, uniform-in-ur)")),
    }
}

fn parse_speb(s: &str) -> Result<SpebPolicy, String> {
    match s.trim() {
        "at-agent" => Ok(SpebPolicy::AtAgent),
        "worst-case-over-ur" | "worst-case" => Ok(SpebPolicy::WorstCaseOverUr),
        o => Err(format!("unknown SPEB policy {o:?} (at-agent, worst-case-over-ur)")),
    }
}

fn parse_selector(s: &str) -> Result<Selector, String> {
    match s.trim() {
        "optimal" => Ok(Selector::Optimal),
        "suboptimal" => Ok(Selector::Suboptimal),
        o => Err(format!("unknown selector {o:?} (optimal, suboptimal)")),
    }
}

fn parse_formats(s: &str) -> Result<Formats, String> {
    let mut f = Formats { csv: false, svg: false };
    for part in s.split(',').map(str::trim) {
        match part {
            "csv" => f.csv = true,
            "svg" => f.svg = true,
            o => return Err(format!("unknown format {o:?} (csv, svg)")),
        }
    }
    Ok(f)
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let t = s.trim().replace('_', "");
    t.parse::<u64>().or_else(|_| {
        // accept 1e6-style counts
        let v: f64 = t.parse().map_err(|_| format!("not a count: {s:?}"))?;
        if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 {
            Ok(v as u64)
        } else {
            Err(format!("not a count: {s:?}"))
        }
    })
}

fn field<T>(lookup: &dyn Fn(&str) -> Option<String>, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, Failure> {
    lookup(key).map(|v| parse(&v).map_err(|e| Failure::usage(format!("--{key}: {e}")))).transpose()
}

impl ExperimentSpec {
    /// Builds a spec from string settings (`lookup(flag-name)`), filling
    /// kind-specific defaults.
    pub fn resolve(kind: Kind, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self, Failure> {
        let fig_defaults = match kind {
            Kind::Figure(f) => Some(FigureParams::defaults(f)),
            _ => None,
        };
        let default_n = match (kind, &fig_defaults) {
            (_, Some(p)) => p.n_list.clone(),
            (Kind::Mc, _) => vec![3],
            _ => (2..=10).collect(),
        };
        let default_e = fig_defaults.as_ref().map_or(vec![2.0], |p| p.threshold_ratios.clone());
        let default_trials = match kind {
            Kind::Mc => 100_000,
            _ => 1_000_000,
        };
        let figure_like = fig_defaults.is_some();
        let deltas = field(lookup, "delta", parse_reals)?;
        let thresholds = field(lookup, "threshold-ratio", parse_reals)?;
        if kind == Kind::Bounds && deltas.is_some() && thresholds.is_some() {
            return Err(Failure::usage("give either --delta or --threshold-ratio, not both"));
        }
        let spec = Self {
            kind,
            n_list: field(lookup, "n", parse_counts)?.unwrap_or(default_n),
            deltas: deltas.unwrap_or_else(|| if kind == Kind::QOracle { vec![FRAC_PI_6] } else { Vec::new() }),
            threshold_ratios: thresholds.unwrap_or(default_e),
            r_over_r: field(lookup, "r-over-r", parse_real)?.unwrap_or(100.0),
            trials: field(lookup, "trials", parse_u64)?.unwrap_or(default_trials),
            seed: field(lookup, "seed", parse_u64)?.unwrap_or(42),
            theta: field(lookup, "theta", parse_real)?.unwrap_or(FRAC_PI_2),
            agent_policy: field(lookup, "agent-policy", parse_agent)?.unwrap_or(AgentPolicy::AtCenter),
            speb_policy: field(lookup, "speb-policy", parse_speb)?,
            selector: field(lookup, "selector", parse_selector)?.unwrap_or(Selector::Optimal),
            out_dir: lookup("out").map(PathBuf::from).or_else(|| figure_like.then(|| PathBuf::from("."))),
            formats: field(lookup, "format", parse_formats)?
                .unwrap_or(Formats { csv: true, svg: figure_like }),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.n_list.is_empty() || self.threshold_ratios.is_empty() {
            return Err(Failure::usage("grids must be non-empty"));
        }
        if self.trials < 1 {
            return Err(Failure::usage("--trials must be at least 1"));
        }
        if self.threshold_ratios.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Failure::usage("threshold ratios must be positive"));
        }
        if !(self.r_over_r > 1.0 && self.r_over_r.is_finite()) {
            return Err(Failure::usage("--r-over-r must exceed 1"));
        }
        Ok(())
    }

    fn figure_params(&self, fig: Figure) -> FigureParams {
        let d = FigureParams::defaults(fig);
        FigureParams {
            n_list: self.n_list.clone(),
            threshold_ratios: self.threshold_ratios.clone(),
            r_over_r: self.r_over_r,
            trials: self.trials,
            seed: self.seed,
            agent_policy: self.agent_policy,
            allanchor_speb: self.speb_policy.unwrap_or(d.allanchor_speb),
            twoanchor_speb: self.speb_policy.unwrap_or(d.twoanchor_speb),
            selector: self.selector,
            ..d
        }
    }
}

/// Writes the selected artifacts of `table` under `stem` and returns their paths.
fn write_artifacts(
    spec: &ExperimentSpec,
    stem: &str,
    table: &Table,
    plot: Option<&lop_core::plot::PlotSpec>,
) -> Result<(Option<PathBuf>, Option<PathBuf>), Failure> {
    let Some(dir) = &spec.out_dir else {
        return Ok((None, None));
    };
    fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
    let csv = table.to_csv()?;
    let write = |path: PathBuf, text: &str| -> Result<PathBuf, Failure> {
        fs::write(&path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    };
    let csv_path = spec.formats.csv.then(|| write(dir.join(format!("{stem}.csv")), &csv)).transpose()?;
    let svg_path = match plot {
        Some(p) if spec.formats.svg => Some(write(dir.join(format!("{stem}.svg")), &svg_from_csv(&csv, p)?)?),
        _ => None,
    };
    Ok((csv_path, svg_path))
}

fn path_value(p: &Option<PathBuf>) -> Value {
    p.as_deref().map_or(Value::Null, |p: &Path| Value::String(p.display().to_string()))
}

fn emit(out: &mut dyn Write, v: Value) -> Result<(), Failure> {
    writeln!(out, "{v}")?;
    Ok(())
}

fn label(x: f64) -> String {
    format!("{x}")
}

pub fn run(spec: &ExperimentSpec, out: &mut dyn Write) -> Result<(), Failure> {
    let quad = QuadratureSpec::default();
    match spec.kind {
        Kind::Figure(fig) => {
            let curves: Vec<Curve> = run_figure(fig, &spec.figure_params(fig), &quad)?;
            for c in &curves {
                let (csv, svg) = write_artifacts(spec, &c.stem, &c.table, Some(&c.plot))?;
                emit(
                    out,
                    json!({
                        "kind": "figure", "figure": fig.name(), "curve": c.stem, "rows": c.table.rows.len(),
                        "columns": c.table.headers, "trials": spec.trials, "seed": spec.seed,
                        "csv": path_value(&csv), "svg": path_value(&svg),
                    }),
                )?;
            }
        }
        Kind::Analytic => {
            for &e in &spec.threshold_ratios {
                let mut table = Table::new(&["N", "allanchor_lop", "raw"]);
                let mut lops = Vec::new();
                for &n in &spec.n_list {
                    let v = allanchor_lop_detailed(&AllAnchorQuery::new(n, e)?, &quad)?;
                    table.push(vec![Cell::Int(n as i64), Cell::Real(v.value), Cell::Real(v.raw)]);
                    lops.push(v.value);
                }
                let (csv, _) = write_artifacts(spec, &format!("analytic_e{}", label(e)), &table, None)?;
                emit(out, json!({"kind": "analytic", "threshold_ratio": e, "n": spec.n_list, "lop": lops, "csv": path_value(&csv)}))?;
            }
        }
        Kind::Bounds => {
            let geom = GeometryRatio::from_ratio(spec.r_over_r)?;
            let cases: Vec<(f64, Option<f64>)> = if spec.deltas.is_empty() {
                spec.threshold_ratios
                    .iter()
                    .map(|&e| Ok((lop_core::bounds::delta_for_threshold_ratio(e)?, Some(e))))
                    .collect::<Result<_, lop_core::Error>>()?
            } else {
                spec.deltas.iter().map(|&d| (d, None)).collect()
            };
            for (delta, e) in cases {
                let mut table = Table::new(&["N", "p_delta_lower", "p_delta_upper", "p_delta_exact", "twoanchor_upper"]);
                let (mut lower, mut upper, mut exact, mut two_upper) = (vec![], vec![], vec![], vec![]);
                for &n in &spec.n_list {
                    let q = DeltaQuery::new(n, delta)?;
                    let b = p_delta(&q);
                    let x = match p_delta_exact(&q, &quad) {
                        Ok(v) => Some(v),
                        Err(lop_core::Error::Domain(_)) => None,
                        Err(e) => return Err(e.into()),
                    };
                    let u = two_anchor_lop_upper(&q, &geom, &quad)?;
                    table.push(vec![
                        Cell::Int(n as i64),
                        Cell::Real(b.lower),
                        Cell::Real(b.upper),
                        Cell::Real(x.unwrap_or(f64::NAN)),
                        Cell::Real(u),
                    ]);
                    lower.push(b.lower);
                    upper.push(b.upper);
                    exact.push(x);
                    two_upper.push(u);
                }
                let stem = match e {
                    Some(e) => format!("bounds_e{}", label(e)),
                    None => format!("bounds_delta{delta:.6}"),
                };
                let (csv, _) = write_artifacts(spec, &stem, &table, None)?;
                emit(
                    out,
                    json!({
                        "kind": "bounds", "delta": delta, "threshold_ratio": e, "r_over_r": spec.r_over_r, "n": spec.n_list,
                        "lower": lower, "upper": upper, "exact": exact, "twoanchor_upper": two_upper, "csv": path_value(&csv),
                    }),
                )?;
            }
        }
        Kind::Mc => {
            let sel = match spec.selector {
                Selector::Optimal => "twoanchor_mc_opt",
                Selector::Suboptimal => "twoanchor_mc_subopt",
            };
            let sel_se = format!("{sel}_stderr");
            for &n in &spec.n_list {
                let network = NetworkConfig::with_ratio(n, spec.r_over_r, spec.threshold_ratios[0]);
                let cfg = |policy: SpebPolicy| TrialConfig {
                    agent_policy: spec.agent_policy,
                    speb_policy: spec.speb_policy.unwrap_or(policy),
                    ..TrialConfig::new(network, spec.trials, spec.seed)
                };
                let all = mc_allanchor_curve(&cfg(SpebPolicy::AtAgent), &spec.threshold_ratios)?;
                let two = if n >= 2 {
                    Some(mc_two_anchor_curve(&cfg(SpebPolicy::WorstCaseOverUr), spec.selector, &spec.threshold_ratios)?)
                } else {
                    None
                };
                let mut table = Table::new(&["threshold_ratio", "allanchor_mc", "allanchor_mc_stderr", sel, &sel_se]);
                for (k, &e) in spec.threshold_ratios.iter().enumerate() {
                    let (m, s) = two.as_ref().map_or((f64::NAN, f64::NAN), |t| (t.estimates[k].mean, t.estimates[k].stderr));
                    table.push(vec![Cell::Real(e), Cell::Real(all[k].mean), Cell::Real(all[k].stderr), Cell::Real(m), Cell::Real(s)]);
                }
                let (csv, _) = write_artifacts(spec, &format!("mc_n{n}"), &table, None)?;
                emit(
                    out,
                    json!({
                        "kind": "mc", "n": n, "trials": spec.trials, "seed": spec.seed, "threshold_ratio": spec.threshold_ratios,
                        "allanchor": all, "twoanchor": two, "csv": path_value(&csv),
                    }),
                )?;
            }
        }
        Kind::QOracle => {
            let geom = GeometryRatio::from_ratio(spec.r_over_r)?;
            let mut table = Table::new(&["delta", "theta", "formula", "mc_r", "mc_r_stderr", "mc_r_plus_r", "mc_r_plus_r_stderr"]);
            let mut rows = Vec::new();
            for &delta in &spec.deltas {
                let formula = q_delta(spec.theta, delta, &geom);
                let r = mc_q_oracle(delta, spec.theta, &geom, RadiusConvention::R, spec.trials, spec.seed)?;
                let rr = mc_q_oracle(delta, spec.theta, &geom, RadiusConvention::RPlusR, spec.trials, spec.seed)?;
                table.push(vec![
                    Cell::Real(delta),
                    Cell::Real(spec.theta),
                    Cell::Real(formula),
                    Cell::Real(r.mean),
                    Cell::Real(r.stderr),
                    Cell::Real(rr.mean),
                    Cell::Real(rr.stderr),
                ]);
                rows.push((delta, formula, r, rr));
            }
            let (csv, _) = write_artifacts(spec, "q_oracle", &table, None)?;
            for (delta, formula, r, rr) in rows {
                emit(
                    out,
                    json!({
                        "kind": "q-oracle", "delta": delta, "theta": spec.theta, "r_over_r": spec.r_over_r,
                        "formula": formula, "mc_r": r, "mc_r_plus_r": rr, "csv": path_value(&csv),
                    }),
                )?;
            }
        }
        Kind::Validate => {
            let opts = ValidationOptions { seed: spec.seed, ..ValidationOptions::default() };
            let mut io_err = None;
            let reports = run_all_with(&opts, |r| {
                eprintln!("{r}");
                if let Err(e) = writeln!(out, "{}", json!({"kind": "validate", "report": r})) {
                    io_err.get_or_insert(e);
                }
            });
            if let Some(e) = io_err {
                return Err(e.into());
            }
            let failed: Vec<u32> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
            if !failed.is_empty() {
                return Err(Failure { code: EXIT_VALIDATION, message: format!("criteria failed: {failed:?}") });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn resolve(kind: Kind, pairs: &[(&str, &str)]) -> Result<ExperimentSpec, Failure> {
        let m: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        ExperimentSpec::resolve(kind, &|k| m.get(k).cloned())
    }

    #[test]
    fn figure_defaults_follow_the_figure() {
        let s = resolve(Kind::Figure(Figure::Fig5), &[]).unwrap();
        assert_eq!(s.n_list, vec![3, 4, 5]);
        assert_eq!(s.threshold_ratios.len(), lop_core::experiments::FIG5_THRESHOLDS.len());
        assert_eq!(s.formats, Formats { csv: true, svg: true });
        assert_eq!(s.out_dir, Some(PathBuf::from(".")));
        let s = resolve(Kind::Mc, &[("trials", "1e4"), ("format", "csv")]).unwrap();
        assert_eq!((s.trials, s.n_list.clone(), s.out_dir.clone()), (10_000, vec![3], None));
    }

    #[test]
    fn bad_settings_are_usage_errors() {
        for pairs in [
            &[("trials", "0")][..],
            &[("n", "x")],
            &[("selector", "best")],
            &[("format", "png")],
            &[("r-over-r", "1")],
            &[("threshold-ratio", "-1")],
        ] {
            assert_eq!(resolve(Kind::Mc, pairs).unwrap_err().code, EXIT_USAGE, "{pairs:?}");
        }
        assert_eq!(resolve(Kind::Bounds, &[("delta", "pi/6"), ("threshold-ratio", "2")]).unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn convergence_errors_map_to_their_code() {
        let f: Failure = lop_core::Error::Convergence { value: 0.0, error: 1.0 }.into();
        assert_eq!(f.code, EXIT_CONVERGENCE);
        let f: Failure = lop_core::Error::Domain("x".into()).into();
        assert_eq!(f.code, EXIT_USAGE);
    }

    #[test]
    fn analytic_run_prints_one_line_per_curve() {
        let s = resolve(Kind::Analytic, &[("n", "2..4"), ("threshold-ratio", "2,3")]).unwrap();
        let mut buf = Vec::new();
        run(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert!((lines[0]["lop"][0].as_f64().unwrap() - 0.5).abs() < 1e-6);
        assert!(lines[0]["csv"].is_null());
    }
}
