//! Run configuration: built-in defaults, per-command presets, an optional
//! `key = value` file, and command-line flags, in increasing precedence.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use pdcshape_core::analysis::TauMaxSearch;
use pdcshape_core::oracle::QuadratureSettings;
use pdcshape_core::{CosinePhaseFilter, EvalSettings, Method, PhysicalParams};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Curve,
    SweepBeta,
    TauMax,
    Lobes,
    Validate,
    Fig2,
    Fig3,
    Fig4,
    Params,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Curve => "curve",
            Command::SweepBeta => "sweep-beta",
            Command::TauMax => "tau-max",
            Command::Lobes => "lobes",
            Command::Validate => "validate",
            Command::Fig2 => "fig2",
            Command::Fig3 => "fig3",
            Command::Fig4 => "fig4",
            Command::Params => "params",
        }
    }

    /// Command-specific defaults, applied below the config file and flags.
    fn preset(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::Fig2 => &[
                ("alpha", "2"),
                ("beta_start", "48"),
                ("beta_end", "53"),
                ("beta_step", "0.01"),
            ],
            Command::Fig3 => &[
                ("tau_min", "-1500"),
                ("tau_max", "1500"),
                ("points", "3001"),
            ],
            Command::Fig4 => &[
                ("alpha", "2"),
                ("tau_min", "-3500"),
                ("tau_max", "3500"),
                ("points", "7001"),
            ],
            _ => &[],
        }
    }
}

/// Flags that override configuration keys.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Modulation depth alpha (rad)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Modulation frequency beta (fs)
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "tau-min")]
    pub tau_min: Option<f64>,
    #[arg(long = "tau-max")]
    pub tau_max: Option<f64>,
    /// Number of delay samples
    #[arg(long)]
    pub points: Option<usize>,
    /// series | quadrature
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long = "beta-start")]
    pub beta_start: Option<f64>,
    #[arg(long = "beta-end")]
    pub beta_end: Option<f64>,
    #[arg(long = "beta-step")]
    pub beta_step: Option<f64>,
    /// Pump wavelength (nm)
    #[arg(long = "lambda-nm")]
    pub lambda_nm: Option<f64>,
    /// Group velocity (m/s)
    #[arg(long)]
    pub u: Option<f64>,
    /// Pump transverse parameter (um)
    #[arg(long = "eps-perp-um")]
    pub eps_perp_um: Option<f64>,
    /// Emission angle (degrees)
    #[arg(long = "theta-deg")]
    pub theta_deg: Option<f64>,
    /// Light speed (m/s)
    #[arg(long = "light-speed")]
    pub light_speed: Option<f64>,
}

impl Overrides {
    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |key, v: Option<String>| {
            if let Some(v) = v {
                out.push((key, v));
            }
        };
        let f = |v: Option<f64>| v.map(fmt_exact);
        put("alpha", f(self.alpha));
        put("beta", f(self.beta));
        put("tau_min", f(self.tau_min));
        put("tau_max", f(self.tau_max));
        put("points", self.points.map(|p| p.to_string()));
        put("method", self.method.clone());
        put("beta_start", f(self.beta_start));
        put("beta_end", f(self.beta_end));
        put("beta_step", f(self.beta_step));
        put("lambda_nm", f(self.lambda_nm));
        put("u", f(self.u));
        put("eps_perp_um", f(self.eps_perp_um));
        put("theta_deg", f(self.theta_deg));
        put("light_speed", f(self.light_speed));
        out
    }
}

/// Every accepted configuration key with its built-in default.
const DEFAULTS: [(&str, &str); 24] = [
    ("alpha", "2"),
    ("beta", "50"),
    ("beta_end", "53"),
    ("beta_start", "48"),
    ("beta_step", "0.01"),
    ("eps3_mm", "none"),
    ("eps_perp_um", "100"),
    ("grid_step", "0.5"),
    ("lambda_nm", "350"),
    ("light_speed", "3e8"),
    ("lobe_fraction", "0.01"),
    ("method", "series"),
    ("points", "2401"),
    ("quad_folds", "6"),
    ("quad_initial_points", "1024"),
    ("quad_max_points", "1048576"),
    ("quad_rel_tol", "1e-11"),
    ("refine_tol", "0.01"),
    ("search_halfwidth", "auto"),
    ("tail_tol", "1e-12"),
    ("tau_max", "600"),
    ("tau_min", "-600"),
    ("theta_deg", "15"),
    ("u", "2e8"),
];

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_exact(v: f64) -> String {
    format!("{v:?}")
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: PhysicalParams,
    pub alpha: f64,
    pub beta: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub points: usize,
    pub method: Method,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_step: f64,
    pub eval: EvalSettings,
    pub search: TauMaxSearch,
    pub lobe_fraction: f64,
    pub out: Option<PathBuf>,
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected 'key = value'", no + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !DEFAULTS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::Usage(format!(
                "config line {}: unknown key '{key}'",
                no + 1
            )));
        }
        if value.is_empty() {
            return Err(CliError::Usage(format!(
                "config line {}: missing value for '{key}'",
                no + 1
            )));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Usage(format!(
                "config line {}: duplicate key '{key}'",
                no + 1
            )));
        }
    }
    Ok(map)
}

/// Merges defaults, the command preset, the config file text, and flags.
pub fn resolve_config(
    command: Command,
    overrides: &Overrides,
    config_text: Option<&str>,
    out: Option<PathBuf>,
) -> Result<RunConfig, CliError> {
    let mut map: BTreeMap<String, String> = DEFAULTS
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    for (k, v) in command.preset() {
        map.insert(k.to_string(), v.to_string());
    }
    if let Some(text) = config_text {
        map.extend(parse_config_text(text)?);
    }
    for (k, v) in overrides.entries() {
        map.insert(k.to_string(), v);
    }
    from_map(command, &map, out)
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, CliError> {
    let raw = &map[key];
    raw.parse()
        .map_err(|_| CliError::Usage(format!("malformed value '{raw}' for '{key}'")))
}

fn get_optional(
    map: &BTreeMap<String, String>,
    key: &str,
    absent: &str,
) -> Result<Option<f64>, CliError> {
    if map[key] == absent {
        Ok(None)
    } else {
        get(map, key).map(Some)
    }
}

fn from_map(
    command: Command,
    map: &BTreeMap<String, String>,
    out: Option<PathBuf>,
) -> Result<RunConfig, CliError> {
    let params = PhysicalParams::from_parts(
        get(map, "lambda_nm")?,
        get(map, "u")?,
        get(map, "eps_perp_um")?,
        get(map, "theta_deg")?,
        get(map, "light_speed")?,
        get_optional(map, "eps3_mm", "none")?,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let alpha: f64 = get(map, "alpha")?;
    let beta: f64 = get(map, "beta")?;
    CosinePhaseFilter::new(alpha, beta).map_err(|e| CliError::Usage(e.to_string()))?;

    let method = Method::from_str(&map["method"]).map_err(|e| CliError::Usage(e.to_string()))?;

    let tau_min: f64 = get(map, "tau_min")?;
    let tau_max: f64 = get(map, "tau_max")?;
    let points: usize = get(map, "points")?;
    if !(tau_min.is_finite() && tau_max.is_finite() && tau_min < tau_max) {
        return Err(CliError::Usage(format!(
            "delay window needs finite tau_min < tau_max, got {tau_min}..{tau_max}"
        )));
    }
    if points < 2 {
        return Err(CliError::Usage(format!(
            "points must be >= 2, got {points}"
        )));
    }

    let beta_start: f64 = get(map, "beta_start")?;
    let beta_end: f64 = get(map, "beta_end")?;
    let beta_step: f64 = get(map, "beta_step")?;
    pdcshape_core::analysis::beta_grid(beta_start, beta_end, beta_step)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let quadrature = QuadratureSettings {
        halfwidth_folds: get(map, "quad_folds")?,
        initial_points: get(map, "quad_initial_points")?,
        max_points: get(map, "quad_max_points")?,
        rel_tolerance: get(map, "quad_rel_tol")?,
        global_phases: None,
    };
    quadrature
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let tail_tolerance: f64 = get(map, "tail_tol")?;
    if !(tail_tolerance > 0.0 && tail_tolerance <= 1e-3) {
        return Err(CliError::Usage(format!(
            "tail_tol must lie in (0, 1e-3], got {tail_tolerance}"
        )));
    }

    let search = TauMaxSearch {
        halfwidth: get_optional(map, "search_halfwidth", "auto")?,
        grid_step: get(map, "grid_step")?,
        refine_tol: get(map, "refine_tol")?,
        tail_tolerance,
    };
    if !(search.grid_step > 0.0 && search.grid_step <= 1.0) {
        return Err(CliError::Usage(format!(
            "grid_step must lie in (0, 1] fs, got {}",
            search.grid_step
        )));
    }
    if !(search.refine_tol > 0.0 && search.refine_tol <= 0.01) {
        return Err(CliError::Usage(format!(
            "refine_tol must lie in (0, 0.01] fs, got {}",
            search.refine_tol
        )));
    }

    let lobe_fraction: f64 = get(map, "lobe_fraction")?;
    if !(lobe_fraction > 0.0 && lobe_fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "lobe_fraction must lie in (0, 1), got {lobe_fraction}"
        )));
    }

    Ok(RunConfig {
        command,
        params,
        alpha,
        beta,
        tau_min,
        tau_max,
        points,
        method,
        beta_start,
        beta_end,
        beta_step,
        eval: EvalSettings {
            tail_tolerance,
            quadrature,
        },
        search,
        lobe_fraction,
        out,
    })
}

impl RunConfig {
    pub fn filter(&self) -> Result<CosinePhaseFilter, CliError> {
        CosinePhaseFilter::new(self.alpha, self.beta).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// Every resolved setting keyed as in the config file, in key order.
    /// Feeding these back as a config file reproduces the run.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let p = &self.params;
        let q = &self.eval.quadrature;
        let f = fmt_exact;
        BTreeMap::from([
            ("alpha", f(self.alpha)),
            ("beta", f(self.beta)),
            ("beta_end", f(self.beta_end)),
            ("beta_start", f(self.beta_start)),
            ("beta_step", f(self.beta_step)),
            (
                "eps3_mm",
                p.crystal_half_length_mm().map_or("none".into(), f),
            ),
            ("eps_perp_um", f(p.beam_param_um())),
            ("grid_step", f(self.search.grid_step)),
            ("lambda_nm", f(p.pump_wavelength_nm())),
            ("light_speed", f(p.light_speed())),
            ("lobe_fraction", f(self.lobe_fraction)),
            ("method", self.method.to_string()),
            ("points", self.points.to_string()),
            ("quad_folds", f(q.halfwidth_folds)),
            ("quad_initial_points", q.initial_points.to_string()),
            ("quad_max_points", q.max_points.to_string()),
            ("quad_rel_tol", f(q.rel_tolerance)),
            ("refine_tol", f(self.search.refine_tol)),
            (
                "search_halfwidth",
                self.search.halfwidth.map_or("auto".into(), f),
            ),
            ("tail_tol", f(self.eval.tail_tolerance)),
            ("tau_max", f(self.tau_max)),
            ("tau_min", f(self.tau_min)),
            ("theta_deg", f(p.emission_angle_deg())),
            ("u", f(p.group_velocity())),
        ])
    }
}
