//! Experiment configuration, level and viscosity sweeps, and the CSV table.
//!
//! Config files hold one `key = value` per line; `#` starts a comment.
//!
//! | key | value | default |
//! |-----|-------|---------|
//! | `method` | `GD`, `GRADLPS`, `DIVLPS`, `HALFRATE` | required |
//! | `degree` | `2` or `3` | required |
//! | `grid` | `1` (regular) or `2` (irregular) | required |
//! | `levels` | `a-b` or `a` | required |
//! | `nu` | comma separated list | `1e-6` |
//! | `dt`, `tend` | time step, final time | `0.01`, `0.5` |
//! | `scheme` | `crank-nicolson` or `implicit-euler` | `crank-nicolson` |
//! | `tau_p`, `tau_u`, `mu` | coefficient `c` of `c h_K^power` | method defaults |
//! | `tau_p_power`, `tau_u_power`, `mu_power` | integer power | method defaults |
//! | `picard_tol`, `picard_max_iter` | Picard stopping | `1e-13`, `50` |
//! | `lag_fluctuation` | `true` / `false` | `false` |
//! | `freeze_matrix` | `true` / `false`: one factorization per step | `false` |
//! | `output` | CSV path | `results.csv` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::FESpace;
use crate::mesh::GridKind;
use crate::metrics::{composite_error_gd, composite_error_lps, convergence_rates, ErrorRecorder, RunReport};
use crate::mms::ManufacturedSolution;
use crate::solver::{run_with, Discretization, PicardConfig, TimeGrid, TimeScheme};
use crate::stabilization::{Method, ParameterRule, StabilizationConfig};

pub const CSV_HEADER: [&str; 11] = [
    "level",
    "h",
    "nu",
    "err_u_L2_final",
    "err_u_H1_sum",
    "err_div_sum",
    "err_p_fluct_sum",
    "err_u_fluct_sum",
    "composite",
    "p_primitive",
    "picard_iters_max",
];

const KEYS: [&str; 19] = [
    "method",
    "degree",
    "grid",
    "levels",
    "nu",
    "dt",
    "tend",
    "scheme",
    "tau_p",
    "tau_p_power",
    "tau_u",
    "tau_u_power",
    "mu",
    "mu_power",
    "picard_tol",
    "picard_max_iter",
    "lag_fluctuation",
    "freeze_matrix",
    "output",
];

const MAX_LEVEL: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub stabilization: StabilizationConfig,
    pub degree: usize,
    pub grid: GridKind,
    /// inclusive
    pub levels: (usize, usize),
    pub nu: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: TimeScheme,
    pub picard: PicardConfig,
    pub output: PathBuf,
}

/// Splits config text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_pairs(&parse_pairs(text)?)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config_key(key, format!("malformed value `{v}`")))
}

fn parse_levels(v: &str) -> Result<(usize, usize)> {
    let (a, b) = match v.split_once('-') {
        Some((a, b)) => (parse_num("levels", a.trim())?, parse_num("levels", b.trim())?),
        None => {
            let a = parse_num("levels", v)?;
            (a, a)
        }
    };
    if a > b {
        return Err(Error::config_key("levels", format!("empty level range {a}-{b}")));
    }
    if b > MAX_LEVEL {
        return Err(Error::config_key("levels", format!("levels above {MAX_LEVEL} are not supported")));
    }
    Ok((a, b))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config_key(key, format!("expected true or false, got `{v}`"))),
    }
}

impl ExperimentConfig {
    /// Builds a config from `(key, value)` pairs; later pairs override
    /// earlier ones.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::config_key(k, "unknown key"));
            }
            map.insert(k.as_str(), v.as_str());
        }
        let required = |key: &str| map.get(key).copied().ok_or_else(|| Error::config_key(key, "missing required key"));

        let method: Method = required("method")?.parse()?;
        let degree: usize = parse_num("degree", required("degree")?)?;
        if !(2..=3).contains(&degree) {
            return Err(Error::config_key("degree", format!("supported degrees are 2 and 3, got {degree}")));
        }
        let grid_index: u32 = parse_num("grid", required("grid")?)?;
        let grid = GridKind::from_index(grid_index)
            .ok_or_else(|| Error::config_key("grid", format!("grid must be 1 or 2, got {grid_index}")))?;
        let levels = parse_levels(required("levels")?)?;

        let mut nu = match map.get("nu") {
            Some(v) => v.split(',').map(|s| parse_num::<f64>("nu", s.trim())).collect::<Result<Vec<_>>>()?,
            None => vec![1e-6],
        };
        if nu.is_empty() || nu.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config_key("nu", "viscosities must be positive"));
        }
        nu.sort_by(|a, b| b.total_cmp(a));
        nu.dedup();

        let get_f64 = |key: &str, default: f64| map.get(key).map_or(Ok(default), |v| parse_num::<f64>(key, v));
        let get_i32 = |key: &str, default: i32| map.get(key).map_or(Ok(default), |v| parse_num::<i32>(key, v));
        let dt = get_f64("dt", 0.01)?;
        let t_end = get_f64("tend", 0.5)?;
        let scheme = map.get("scheme").map_or(Ok(TimeScheme::CrankNicolson), |v| TimeScheme::parse(v))?;
        TimeGrid::new(dt, t_end, scheme)?;

        let d = StabilizationConfig::defaults(method);
        let rule = |key: &str, pkey: &str, def: ParameterRule| -> Result<ParameterRule> {
            Ok(ParameterRule::new(get_f64(key, def.coeff)?, get_i32(pkey, def.power)?))
        };
        let stabilization = StabilizationConfig {
            method,
            tau_p: rule("tau_p", "tau_p_power", d.tau_p)?,
            tau_u: rule("tau_u", "tau_u_power", d.tau_u)?,
            mu: rule("mu", "mu_power", d.mu)?,
        };
        stabilization.validate()?;

        let picard = PicardConfig {
            tolerance: get_f64("picard_tol", 1e-13)?,
            max_iterations: map.get("picard_max_iter").map_or(Ok(50), |v| parse_num("picard_max_iter", v))?,
            lag_fluctuation_gradient: map
                .get("lag_fluctuation")
                .map_or(Ok(false), |v| parse_bool("lag_fluctuation", v))?,
            convection: true,
            freeze_matrix: map.get("freeze_matrix").map_or(Ok(false), |v| parse_bool("freeze_matrix", v))?,
        };
        picard.validate()?;

        let output = PathBuf::from(map.get("output").copied().unwrap_or("results.csv"));
        let config = ExperimentConfig { stabilization, degree, grid, levels, nu, dt, t_end, scheme, picard, output };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.stabilization.method == Method::HalfRate {
            let h_max = self.grid.nominal_h(self.levels.0);
            if let Some(nu) = self.nu.iter().find(|&&nu| nu > h_max) {
                return Err(Error::config_key("nu", format!("HALFRATE needs nu <= h, but nu = {nu} exceeds h = {h_max}")));
            }
        }
        Ok(())
    }

    pub fn method(&self) -> Method {
        self.stabilization.method
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.dt, self.t_end, self.scheme).expect("validated at parse time")
    }

    /// Canonical text form: every key, fixed order.
    pub fn serialize(&self) -> String {
        let s = &self.stabilization;
        let levels = if self.levels.0 == self.levels.1 {
            self.levels.0.to_string()
        } else {
            format!("{}-{}", self.levels.0, self.levels.1)
        };
        let nu = self.nu.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(", ");
        let values = [
            s.method.name().to_string(),
            self.degree.to_string(),
            self.grid.index().to_string(),
            levels,
            nu,
            self.dt.to_string(),
            self.t_end.to_string(),
            self.scheme.name().to_string(),
            s.tau_p.coeff.to_string(),
            s.tau_p.power.to_string(),
            s.tau_u.coeff.to_string(),
            s.tau_u.power.to_string(),
            s.mu.coeff.to_string(),
            s.mu.power.to_string(),
            format!("{:e}", self.picard.tolerance),
            self.picard.max_iterations.to_string(),
            self.picard.lag_fluctuation_gradient.to_string(),
            self.picard.freeze_matrix.to_string(),
            self.output.display().to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}

/// Runs one `(level, nu)` pair of the experiment.
pub fn run_level(config: &ExperimentConfig, level: usize, nu: f64) -> Result<RunReport> {
    let mesh = Arc::new(config.grid.build(level));
    let space = Arc::new(FESpace::new(&mesh, config.degree)?);
    let disc = Discretization::new(&space, nu, &config.stabilization)?;
    let exact = ManufacturedSolution::new(nu);
    let grid = config.time_grid();
    let mut recorder = ErrorRecorder::new(&disc, &exact, grid.dt());
    run_with(&disc, &exact, grid, config.picard, |_, state, stats| recorder.observe(state, stats))?;
    recorder.finish(level, config.grid.nominal_h(level))
}

/// One data row of the CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub level: usize,
    pub h: f64,
    pub nu: f64,
    pub err_u_l2_final: f64,
    pub err_u_h1_sum: f64,
    pub err_div_sum: f64,
    pub err_p_fluct_sum: f64,
    pub err_u_fluct_sum: f64,
    pub composite: f64,
    pub p_primitive: f64,
    pub picard_iters_max: usize,
}

impl Row {
    pub fn from_report(config: &ExperimentConfig, report: &RunReport) -> Self {
        let s = &config.stabilization;
        let (p_fluct, u_fluct, composite) = match s.method {
            Method::GradDiv => {
                let tau_p = s.tau_p.eval(report.nominal_h);
                let mu = s.mu.eval(report.nominal_h);
                (tau_p * report.p_grad_sum(), 0.0, composite_error_gd(report, tau_p, mu, report.nu))
            }
            _ => (report.p_fluct_sum(), report.u_fluct_sum(), composite_error_lps(report, report.nu)),
        };
        Row {
            level: report.level,
            h: report.h,
            nu: report.nu,
            err_u_l2_final: report.final_u_l2(),
            err_u_h1_sum: report.u_h1_sum(),
            err_div_sum: report.div_sum(),
            err_p_fluct_sum: p_fluct,
            err_u_fluct_sum: u_fluct,
            composite,
            p_primitive: report.p_primitive,
            picard_iters_max: report.picard_iters_max(),
        }
    }

    fn numbers(&self) -> [f64; 8] {
        [
            self.h,
            self.err_u_l2_final,
            self.err_u_h1_sum,
            self.err_div_sum,
            self.err_p_fluct_sum,
            self.err_u_fluct_sum,
            self.composite,
            self.p_primitive,
        ]
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map(fmt_num).unwrap_or_default()
}

/// Data rows grouped by descending `nu`, each group followed by the rates
/// between consecutive levels.
pub fn format_csv(rows: &[Row]) -> String {
    let mut sorted: Vec<&Row> = rows.iter().collect();
    sorted.sort_by(|a, b| b.nu.total_cmp(&a.nu).then(a.level.cmp(&b.level)));
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    let mut start = 0;
    while start < sorted.len() {
        let nu = sorted[start].nu;
        let end = start + sorted[start..].iter().take_while(|r| r.nu == nu).count();
        let group = &sorted[start..end];
        for r in group {
            let nums: Vec<String> = r.numbers().iter().map(|&v| fmt_num(v)).collect();
            writeln!(
                out,
                "{},{},{},{},{}",
                r.level,
                nums[0],
                fmt_num(r.nu),
                nums[1..].join(","),
                r.picard_iters_max
            )
            .unwrap();
        }
        for pair in group.windows(2) {
            if pair[1].level != pair[0].level + 1 {
                continue;
            }
            let (a, b) = (pair[0].numbers(), pair[1].numbers());
            let rates: Vec<String> =
                a.iter().zip(&b).map(|(x, y)| fmt_rate(convergence_rates(&[*x, *y])[0])).collect();
            writeln!(out, "rate_{}_{},{},{},{},", pair[0].level, pair[1].level, rates[0], fmt_num(nu), rates[1..].join(","))
                .unwrap();
        }
        start = end;
    }
    out
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<Row>,
    pub csv: String,
}

/// Runs every `(level, nu)` pair (in parallel), writes the CSV to
/// `config.output` and returns the table. On failure the completed rows are
/// still written and the errors go to `<output>.err.log`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let jobs: Vec<(usize, f64)> =
        (config.levels.0..=config.levels.1).flat_map(|l| config.nu.iter().map(move |&nu| (l, nu))).collect();
    let results: Vec<Result<RunReport>> = jobs.par_iter().map(|&(l, nu)| run_level(config, l, nu)).collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(report) => rows.push(Row::from_report(config, &report)),
            Err(e) => errors.push(e),
        }
    }
    let csv = format_csv(&rows);
    write_file(&config.output, &csv)?;
    if !errors.is_empty() {
        let log: String = errors.iter().map(|e| format!("{e}\n")).collect();
        write_file(&error_log_path(&config.output), &log)?;
        return Err(errors.swap_remove(0));
    }
    Ok(ExperimentOutcome { rows, csv })
}

/// Fixed-level sweep over the configured viscosities.
pub fn run_nu_sweep(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    if config.levels.0 != config.levels.1 {
        return Err(Error::config_key("levels", "a viscosity sweep needs a single level"));
    }
    if config.nu.len() < 2 {
        return Err(Error::config_key("nu", "a viscosity sweep needs at least two values"));
    }
    run_experiment(config)
}

pub fn error_log_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".err.log");
    PathBuf::from(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}
