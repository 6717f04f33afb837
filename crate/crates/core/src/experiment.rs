//! Parameter sweeps, exponent fits and the lamplighter relaxation table.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{closed_form, resistance_estimate, volume_sum, Direction, EstimateReport};
use crate::exact::{
    effective_resistance, hitting_times, relaxation_time_of, HittingTable, Method, Route, ACCEPT_RELATIVE_RESIDUAL,
};
use crate::families::{generate, lamplighter_kernel, Family, FamilyParams};
use crate::kernel::MarkovKernel;
use crate::simulate::{sample_hitting, DEFAULT_STEP_CAP, RNG_ALGORITHM};

/// Rows above this many vertices use Monte Carlo instead of linear solves.
pub const LINEAR_SOLVE_CAP: usize = 200_000;
/// Local log-log slopes drifting by more than this get a curvature note.
pub const CURVATURE_THRESHOLD: f64 = 0.05;

pub const CSV_COLUMNS: [&str; 19] = [
    "family",
    "params",
    "vertices",
    "diameter",
    "h_xy",
    "h_yx",
    "vsum_y",
    "vsum_x",
    "closed_form",
    "ratio",
    "trel",
    "method",
    "residual",
    "closed_form_yx",
    "resistance",
    "resistance_estimate",
    "mc_mean",
    "mc_half_width",
    "error",
];

fn yes() -> bool {
    true
}

fn default_trials() -> u64 {
    2_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantities {
    #[serde(default = "yes")]
    pub exact: bool,
    #[serde(default = "yes")]
    pub volume_sum: bool,
    #[serde(default = "yes")]
    pub closed_form: bool,
    #[serde(default)]
    pub monte_carlo: bool,
    #[serde(default)]
    pub trel: bool,
    #[serde(default)]
    pub resistance: bool,
}

impl Default for Quantities {
    fn default() -> Self {
        Quantities {
            exact: true,
            volume_sum: true,
            closed_form: true,
            monte_carlo: false,
            trel: false,
            resistance: false,
        }
    }
}

/// A sweep read from TOML:
///
/// ```toml
/// name = "torus3"
/// seed = 7
/// route = "linear_solve"
/// [quantities]
/// trel = true
/// [[grid]]
/// family = "torus"
/// sides = [4, 4, 4]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub name: String,
    pub grid: Vec<FamilyParams>,
    #[serde(default)]
    pub quantities: Quantities,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub mc_trials: u64,
    #[serde(default = "default_route")]
    pub route: Route,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_route() -> Route {
    Route::Auto
}

impl SweepConfig {
    pub fn new(name: impl Into<String>, grid: Vec<FamilyParams>) -> SweepConfig {
        SweepConfig {
            name: name.into(),
            grid,
            quantities: Quantities::default(),
            seed: 0,
            mc_trials: default_trials(),
            route: Route::Auto,
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<SweepConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<SweepConfig> {
        SweepConfig::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config(format!("sweep `{}` has an empty grid", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub family: String,
    pub params: String,
    pub scale: f64,
    pub vertices: Option<usize>,
    pub diameter: Option<usize>,
    pub h_xy: Option<f64>,
    pub h_yx: Option<f64>,
    pub vsum_y: Option<f64>,
    pub vsum_x: Option<f64>,
    pub closed_form: Option<f64>,
    pub closed_form_yx: Option<f64>,
    pub ratio: Option<f64>,
    pub trel: Option<f64>,
    pub method: Option<Method>,
    pub residual: Option<f64>,
    pub resistance: Option<f64>,
    pub resistance_estimate: Option<f64>,
    pub mc_mean: Option<f64>,
    pub mc_half_width: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn empty(index: usize, params: &FamilyParams) -> SweepRow {
        SweepRow {
            index,
            family: params.tag().to_string(),
            params: params.describe(),
            scale: params.scale(),
            vertices: None,
            diameter: None,
            h_xy: None,
            h_yx: None,
            vsum_y: None,
            vsum_x: None,
            closed_form: None,
            closed_form_yx: None,
            ratio: None,
            trel: None,
            method: None,
            residual: None,
            resistance: None,
            resistance_estimate: None,
            mc_mean: None,
            mc_half_width: None,
            error: None,
        }
    }

    fn csv_record(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.family.clone(),
            self.params.clone(),
            u(self.vertices),
            u(self.diameter),
            f(self.h_xy),
            f(self.h_yx),
            f(self.vsum_y),
            f(self.vsum_x),
            f(self.closed_form),
            f(self.ratio),
            f(self.trel),
            self.method.map(|m| m.as_str().to_string()).unwrap_or_default(),
            f(self.residual),
            f(self.closed_form_yx),
            f(self.resistance),
            f(self.resistance_estimate),
            f(self.mc_mean),
            f(self.mc_half_width),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
    pub excluded: usize,
    pub notes: Vec<String>,
}

/// Least-squares slope of `ln value` against `ln size`. Nonpositive values
/// are dropped with a note; fewer than three remaining points is an error.
pub fn fit_exponent(sizes: &[f64], values: &[f64]) -> Result<ExponentFit> {
    if sizes.len() != values.len() {
        return Err(Error::InvalidParameter("sizes and values differ in length".into()));
    }
    let mut notes = Vec::new();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (&s, &v) in sizes.iter().zip(values) {
        if s > 0.0 && v > 0.0 && v.is_finite() {
            pts.push((s.ln(), v.ln()));
        } else {
            notes.push(format!("excluded size {s} with value {v}"));
        }
    }
    let excluded = sizes.len() - pts.len();
    if pts.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "exponent fit needs at least 3 positive points, got {}",
            pts.len()
        )));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("exponent fit needs distinct sizes".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = if pts.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let local: Vec<f64> = pts
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let lo = local.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = local.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > CURVATURE_THRESHOLD {
        notes.push(format!(
            "log-curvature: local slopes range from {lo:.3} to {hi:.3}"
        ));
    }
    Ok(ExponentFit {
        slope,
        stderr,
        intercept,
        points: pts.len(),
        excluded,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFits {
    pub h_xy: Option<ExponentFit>,
    pub h_yx: Option<ExponentFit>,
    pub vsum_y: Option<ExponentFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub seed: u64,
    pub rng: String,
    pub rows: Vec<SweepRow>,
    pub fits: SweepFits,
    /// Smallest and largest `H(o, p)/volume_sum(p)` over the rows.
    pub ratio_window: Option<(f64, f64)>,
    pub failures: usize,
}

impl SweepResult {
    /// `max/min` of `ratio` over rows that have one.
    pub fn ratio_spread(&self) -> Option<f64> {
        self.ratio_window.map(|(lo, hi)| hi / lo)
    }
}

fn compute_row(index: usize, params: &FamilyParams, config: &SweepConfig) -> SweepRow {
    let mut row = SweepRow::empty(index, params);
    if let Err(e) = fill_row(&mut row, params, config) {
        log::warn!("sweep `{}` row {index} ({}) failed: {e}", config.name, row.params);
        row.error = Some(e.to_string());
    }
    row
}

fn fill_row(row: &mut SweepRow, params: &FamilyParams, config: &SweepConfig) -> Result<()> {
    let family = generate(params)?;
    let kernel = &family.kernel;
    let (o, p) = family.spec.canonical_pair;
    let d = family.spec.diameter.hops;
    let theta = family.spec.theta;
    let n = kernel.vertex_count();
    row.vertices = Some(n);
    row.diameter = Some(d);
    let q = &config.quantities;
    if q.volume_sum || q.resistance {
        row.vsum_y = Some(volume_sum(&kernel.metric_profile(p)?, theta, d)?);
        row.vsum_x = Some(volume_sum(&kernel.metric_profile(o)?, theta, d)?);
    }
    if q.closed_form {
        row.closed_form = closed_form(params, Direction::OriginToFar, d);
        row.closed_form_yx = closed_form(params, Direction::FarToOrigin, d);
    }
    if q.exact {
        if n <= LINEAR_SOLVE_CAP {
            let report = hitting_times(kernel, &[(o, p), (p, o)], config.route)?;
            let scale = 1.0 + report.pairs.iter().map(|e| e.value).fold(0.0, f64::max);
            if report.residual > ACCEPT_RELATIVE_RESIDUAL * scale {
                return Err(Error::NonConvergence {
                    residual: report.residual,
                    iterations: 0,
                });
            }
            row.h_xy = Some(report.pairs[0].value);
            row.h_yx = Some(report.pairs[1].value);
            row.method = Some(report.method);
            row.residual = Some(report.residual);
        } else {
            let a = sample_hitting(kernel, o, p, config.mc_trials, config.seed ^ index_seed(row.index, 0), DEFAULT_STEP_CAP)?;
            let b = sample_hitting(kernel, p, o, config.mc_trials, config.seed ^ index_seed(row.index, 1), DEFAULT_STEP_CAP)?;
            row.h_xy = Some(a.mean);
            row.h_yx = Some(b.mean);
            row.method = Some(Method::MonteCarlo);
            row.mc_half_width = Some(a.ci_half_width.max(b.ci_half_width));
        }
    }
    if let (Some(h), Some(v)) = (row.h_xy, row.vsum_y) {
        row.ratio = Some(h / v);
    }
    if q.monte_carlo {
        let s = sample_hitting(kernel, o, p, config.mc_trials, config.seed ^ index_seed(row.index, 2), DEFAULT_STEP_CAP)?;
        row.mc_mean = Some(s.mean);
        row.mc_half_width = Some(s.ci_half_width);
    }
    if q.trel {
        row.trel = Some(relaxation_time_of(&kernel.ensure_lazy()?)?);
    }
    if q.resistance {
        row.resistance = Some(effective_resistance(kernel, o, p)?);
        let x = EstimateReport::new(kernel, o, theta, d)?;
        let y = EstimateReport::new(kernel, p, theta, d)?;
        row.resistance_estimate = Some(resistance_estimate(&x, &y)?);
    }
    Ok(())
}

fn index_seed(index: usize, slot: u64) -> u64 {
    ((index as u64) << 2 | slot).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn fit_column(rows: &[SweepRow], value: impl Fn(&SweepRow) -> Option<f64>) -> Option<ExponentFit> {
    let (sizes, values): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.error.is_none())
        .filter_map(|r| value(r).map(|v| (r.scale, v)))
        .unzip();
    fit_exponent(&sizes, &values).ok()
}

/// Runs every grid point in parallel; rows keep grid order. Failing rows are
/// recorded with their error and the sweep continues.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let rows: Vec<SweepRow> = config
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, params)| compute_row(i, params, config))
        .collect();
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let ratio_window = if ratios.is_empty() {
        None
    } else {
        Some((
            ratios.iter().cloned().fold(f64::INFINITY, f64::min),
            ratios.iter().cloned().fold(0.0, f64::max),
        ))
    };
    Ok(SweepResult {
        name: config.name.clone(),
        seed: config.seed,
        rng: RNG_ALGORITHM.to_string(),
        fits: SweepFits {
            h_xy: fit_column(&rows, |r| r.h_xy),
            h_yx: fit_column(&rows, |r| r.h_yx),
            vsum_y: fit_column(&rows, |r| r.vsum_y),
        },
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        rows,
        ratio_window,
    })
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// CSV with a leading `# generated` comment line and the fixed column order.
pub fn sweep_csv(result: &SweepResult) -> Result<String> {
    let mut out = format!("# generated unix={} sweep={}\n", timestamp(), result.name);
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_COLUMNS)?;
    for row in &result.rows {
        writer.write_record(row.csv_record())?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

#[derive(Serialize)]
struct JsonMirror<'a> {
    generated_unix: u64,
    columns: &'a [&'a str],
    #[serde(flatten)]
    result: &'a SweepResult,
}

pub fn sweep_json(result: &SweepResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(&JsonMirror {
        generated_unix: timestamp(),
        columns: &CSV_COLUMNS,
        result,
    })?)
}

/// Writes `<name>.csv` and `<name>.json` into `dir`, returning both paths.
pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", result.name));
    let json_path = dir.join(format!("{}.json", result.name));
    fs::write(&csv_path, sweep_csv(result)?)?;
    fs::write(&json_path, sweep_json(result)?)?;
    Ok((csv_path, json_path))
}

/// Drops comment lines, for comparing reruns.
pub fn strip_comments(csv: &str) -> String {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LamplighterRow {
    pub base: String,
    pub base_vertices: usize,
    pub states: usize,
    pub max_h: f64,
    pub trel: f64,
    pub ratio: f64,
    /// `max_x Σ 1/V(x, n^{1/θ})` on the base.
    pub max_volume_sum: f64,
    pub vertex_transitive: bool,
}

/// Necessary condition for vertex transitivity: equal `π` and equal sphere
/// counts from every vertex.
pub fn looks_vertex_transitive(kernel: &MarkovKernel) -> bool {
    let n = kernel.vertex_count();
    let profiles = kernel.all_profiles();
    let pi0 = kernel.pi(0);
    (0..n).all(|x| (kernel.pi(x) - pi0).abs() <= 1e-12 * pi0)
        && profiles.iter().all(|p| p.ball_counts == profiles[0].ball_counts)
}

pub fn lamplighter_row(base: &Family) -> Result<LamplighterRow> {
    let kernel = &base.kernel;
    let vertex_transitive = looks_vertex_transitive(kernel);
    if !vertex_transitive {
        log::warn!(
            "lamplighter base {} is not vertex-transitive; the relaxation-time comparison assumes it is",
            base.spec.params.describe()
        );
    }
    let max_h = HittingTable::spectral(kernel)?.max();
    let lamp = lamplighter_kernel(kernel)?;
    let trel = relaxation_time_of(&lamp.ensure_lazy()?)?;
    let d = base.spec.diameter.hops;
    let max_volume_sum = kernel
        .all_profiles()
        .iter()
        .map(|p| volume_sum(p, base.spec.theta, d))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(LamplighterRow {
        base: format!("{}[{}]", base.spec.params.tag(), base.spec.params.describe()),
        base_vertices: kernel.vertex_count(),
        states: lamp.vertex_count(),
        max_h,
        trel,
        ratio: trel / max_h,
        max_volume_sum,
        vertex_transitive,
    })
}

/// `t_rel` of the lamplighter chain against `max H` on each base.
pub fn lamplighter_experiment(bases: &[FamilyParams]) -> Result<Vec<LamplighterRow>> {
    bases
        .par_iter()
        .map(|b| lamplighter_row(&generate(b)?))
        .collect()
}
