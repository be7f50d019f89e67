//! Run configuration: defaults, config files and flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::Subspace;
use crate::models::{qwz, ConstantFamily, DVectorModel, DoubledFamily, HamiltonianFamily, Qwz, TabulatedDVector, TwoBand};

use super::CliError;

/// Fully resolved configuration, echoed into every JSON summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: String,
    pub m: Vec<f64>,
    pub grid: [usize; 2],
    pub band_range: [usize; 2],
    pub gap_tol: f64,
    pub step: f64,
    pub sweep: Option<[f64; 3]>,
    pub method: String,
    pub out: PathBuf,
    pub format: String,
    pub workers: usize,
    pub center: [f64; 2],
    pub sides: Vec<f64>,
    pub plane: [usize; 2],
    pub segments: usize,
}

/// Every setting optional; layers are merged with later layers winning.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Partial {
    pub model: Option<String>,
    pub m: Option<Vec<f64>>,
    pub grid: Option<[usize; 2]>,
    pub band_range: Option<[usize; 2]>,
    pub gap_tol: Option<f64>,
    pub step: Option<f64>,
    pub sweep: Option<[f64; 3]>,
    pub method: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub workers: Option<usize>,
    pub center: Option<[f64; 2]>,
    pub sides: Option<Vec<f64>>,
    pub plane: Option<[usize; 2]>,
    pub segments: Option<usize>,
}

macro_rules! merge_fields {
    ($base:ident, $over:ident; $($f:ident),*) => {
        Partial { $($f: $over.$f.or($base.$f)),* }
    };
}

impl Partial {
    /// `self` overridden by `over`.
    pub fn merged(self, over: Partial) -> Partial {
        let base = self;
        merge_fields!(base, over; model, m, grid, band_range, gap_tol, step, sweep, method, out, format,
            workers, center, sides, plane, segments)
    }
}

impl From<RunConfig> for Partial {
    fn from(c: RunConfig) -> Self {
        Partial {
            model: Some(c.model),
            m: Some(c.m),
            grid: Some(c.grid),
            band_range: Some(c.band_range),
            gap_tol: Some(c.gap_tol),
            step: Some(c.step),
            sweep: c.sweep,
            method: Some(c.method),
            out: Some(c.out),
            format: Some(c.format),
            workers: Some(c.workers),
            center: Some(c.center),
            sides: Some(c.sides),
            plane: Some(c.plane),
            segments: Some(c.segments),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NumList {
    One(f64),
    Many(Vec<f64>),
    Text(String),
}

impl NumList {
    fn into_vec(self, key: &str) -> Result<Vec<f64>, CliError> {
        match self {
            NumList::One(x) => Ok(vec![x]),
            NumList::Many(v) => Ok(v),
            NumList::Text(s) => parse_list(&s).map_err(|e| CliError::Usage(format!("{key}: {e}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Text<T> {
    Value(T),
    Text(String),
}

/// TOML config file layout. Keys mirror the command-line flags.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    model: Option<String>,
    m: Option<NumList>,
    grid: Option<Text<usize>>,
    #[serde(alias = "band_range")]
    band_range: Option<Text<[usize; 2]>>,
    #[serde(alias = "gap_tol")]
    gap_tol: Option<f64>,
    step: Option<f64>,
    sweep: Option<Text<[f64; 3]>>,
    method: Option<String>,
    out: Option<PathBuf>,
    format: Option<String>,
    workers: Option<usize>,
    center: Option<NumList>,
    sides: Option<NumList>,
    plane: Option<Text<[usize; 2]>>,
    segments: Option<usize>,
}

#[derive(Deserialize)]
struct SummaryConfig {
    config: RunConfig,
}

/// Reads a TOML config, or the `config` object of a JSON run summary.
pub fn load_config_file(path: &Path) -> Result<Partial, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let s: SummaryConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        return Ok(s.config.into());
    }
    let f: FileConfig =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let usage = |key: &str, e: String| CliError::Usage(format!("{key}: {e}"));
    Ok(Partial {
        model: f.model,
        m: f.m.map(|v| v.into_vec("m")).transpose()?,
        grid: f
            .grid
            .map(|g| match g {
                Text::Value(n) => Ok([n, n]),
                Text::Text(s) => parse_grid(&s).map_err(|e| usage("grid", e)),
            })
            .transpose()?,
        band_range: f
            .band_range
            .map(|b| match b {
                Text::Value(v) => Ok(v),
                Text::Text(s) => parse_band_range(&s).map_err(|e| usage("band-range", e)),
            })
            .transpose()?,
        gap_tol: f.gap_tol,
        step: f.step,
        sweep: f
            .sweep
            .map(|s| match s {
                Text::Value(v) => Ok(v),
                Text::Text(s) => parse_sweep(&s).map_err(|e| usage("sweep", e)),
            })
            .transpose()?,
        method: f.method,
        out: f.out,
        format: f.format,
        workers: f.workers,
        center: f
            .center
            .map(|c| c.into_vec("center").and_then(|v| pair(&v).map_err(|e| usage("center", e))))
            .transpose()?,
        sides: f.sides.map(|s| s.into_vec("sides")).transpose()?,
        plane: f
            .plane
            .map(|p| match p {
                Text::Value(v) => Ok(v),
                Text::Text(s) => parse_plane(&s).map_err(|e| usage("plane", e)),
            })
            .transpose()?,
        segments: f.segments,
    })
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(format!("non-finite value in '{s}'"));
    }
    Ok(v)
}

fn pair(v: &[f64]) -> Result<[f64; 2], String> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(format!("expected two values, got {}", v.len())),
    }
}

pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    pair(&parse_list(s)?)
}

/// `NxM` or a single `N`.
pub fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    match parts.as_slice() {
        [n] => Ok([num(n)?, num(n)?]),
        [a, b] => Ok([num(a)?, num(b)?]),
        _ => Err(format!("grid must look like 64x64, got '{s}'")),
    }
}

/// `a..b`, half-open.
pub fn parse_band_range(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("band range must look like 0..2, got '{s}'"))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    Ok([num(a)?, num(b)?])
}

/// `start:stop:step`.
pub fn parse_sweep(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<&str> = s.split(':').collect();
    if v.len() != 3 {
        return Err(format!("sweep must look like -3:3:0.05, got '{s}'"));
    }
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok([num(v[0])?, num(v[1])?, num(v[2])?])
}

/// Two coordinate indices, e.g. `0,1`.
pub fn parse_plane(s: &str) -> Result<[usize; 2], String> {
    let v: Vec<&str> = s.split(',').collect();
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    match v.as_slice() {
        [a, b] => Ok([num(a)?, num(b)?]),
        _ => Err(format!("plane must look like 0,1, got '{s}'")),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelSpec {
    Qwz,
    DoubledQwz,
    Constant,
    Table(PathBuf),
}

impl ModelSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "qwz" => Ok(ModelSpec::Qwz),
            "doubled-qwz" => Ok(ModelSpec::DoubledQwz),
            "constant" => Ok(ModelSpec::Constant),
            _ => match s.strip_prefix("table:") {
                Some(p) if !p.is_empty() => Ok(ModelSpec::Table(PathBuf::from(p))),
                _ => Err(CliError::Usage(format!(
                    "unknown model '{s}'; expected qwz, doubled-qwz, constant or table:<path>"
                ))),
            },
        }
    }
}

/// A model ready for computation.
pub struct LoadedModel {
    pub family: Box<dyn HamiltonianFamily<f64>>,
    /// Present for two-band `d`-vector models, which support the closed form.
    pub analytic: Option<Box<dyn DVectorModel<f64>>>,
}

impl LoadedModel {
    pub fn load(spec: &ModelSpec) -> Result<Self, CliError> {
        Ok(match spec {
            ModelSpec::Qwz => LoadedModel {
                family: Box::new(qwz()),
                analytic: Some(Box::new(Qwz)),
            },
            ModelSpec::DoubledQwz => LoadedModel {
                family: Box::new(DoubledFamily::with_default_mix()),
                analytic: None,
            },
            ModelSpec::Constant => LoadedModel {
                family: Box::new(ConstantFamily::two_level()),
                analytic: None,
            },
            ModelSpec::Table(path) => {
                let table = TabulatedDVector::from_path(path).map_err(|e| CliError::Usage(e.to_string()))?;
                LoadedModel {
                    family: Box::new(TwoBand(table.clone())),
                    analytic: Some(Box::new(table)),
                }
            }
        })
    }

    /// External coordinates for a mass value `m`.
    pub fn external(&self, m: f64) -> Vec<f64> {
        let mut e = vec![0.0; self.family.n_external()];
        if let Some(first) = e.first_mut() {
            *first = m;
        }
        e
    }
}

/// Which subcommand a configuration is resolved for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Field,
    Chern,
    FsSweep,
    Holonomy,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Field => "field",
            CommandKind::Chern => "chern",
            CommandKind::FsSweep => "fs-sweep",
            CommandKind::Holonomy => "holonomy",
        }
    }
}

fn positive(key: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{key} must be positive, got {x}")))
    }
}

impl RunConfig {
    /// Fills defaults and validates everything that can be checked without computing.
    pub fn resolve(p: Partial, command: CommandKind) -> Result<(RunConfig, LoadedModel), CliError> {
        let model_name = p.model.unwrap_or_else(|| "qwz".into());
        let model = LoadedModel::load(&ModelSpec::parse(&model_name)?)?;
        let dim = model.family.dim();

        let band_range = p.band_range.unwrap_or([0, dim / 2]);
        if band_range[0] >= band_range[1] || band_range[1] > dim {
            return Err(CliError::Usage(format!(
                "band range {}..{} is invalid for a {dim}-band model",
                band_range[0], band_range[1]
            )));
        }

        let method = p.method.unwrap_or_else(|| {
            match command {
                CommandKind::Chern => "lattice",
                _ => "projector",
            }
            .into()
        });
        let allowed: &[&str] = match command {
            CommandKind::Field => &["projector", "analytic"],
            CommandKind::Chern => &["lattice", "direct"],
            CommandKind::FsSweep | CommandKind::Holonomy => &["projector"],
        };
        if !allowed.contains(&method.as_str()) {
            return Err(CliError::Usage(format!(
                "method '{method}' is not available for {}; choose one of {}",
                command.name(),
                allowed.join(", ")
            )));
        }
        if method == "analytic" && model.analytic.is_none() {
            return Err(CliError::Usage(format!(
                "the analytic method needs a two-band d-vector model, not '{model_name}'"
            )));
        }

        let grid = p.grid.unwrap_or([64, 64]);
        if grid[0] < 4 || grid[1] < 4 {
            return Err(CliError::Usage(format!("grid {}x{} is too small (minimum 4x4)", grid[0], grid[1])));
        }
        let gap_tol = p.gap_tol.unwrap_or(1e-8);
        positive("gap-tol", gap_tol)?;
        let step = p.step.unwrap_or(1e-4);
        positive("step", step)?;
        if let Some(s) = p.sweep {
            crate::measure::SweepSpec::new(s[0], s[1], s[2]).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        let m = p.m.unwrap_or_else(|| vec![1.0]);
        if m.is_empty() {
            return Err(CliError::Usage("no m values given".into()));
        }
        let format = p.format.unwrap_or_else(|| "csv".into());
        if format != "csv" && format != "json" {
            return Err(CliError::Usage(format!("format must be csv or json, got '{format}'")));
        }
        let workers = p
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        if workers == 0 {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        let sides = p.sides.unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);
        if sides.is_empty() {
            return Err(CliError::Usage("no loop sides given".into()));
        }
        for &s in &sides {
            positive("side", s)?;
        }
        let plane = p.plane.unwrap_or([0, 1]);
        let coords = model.family.n_periodic() + model.family.n_external();
        if plane[0] == plane[1] || plane[0] >= coords || plane[1] >= coords {
            return Err(CliError::Usage(format!(
                "plane {},{} is invalid for {coords} coordinates",
                plane[0], plane[1]
            )));
        }
        let segments = p.segments.unwrap_or(4);
        if segments == 0 {
            return Err(CliError::Usage("segments must be at least 1".into()));
        }
        let config = RunConfig {
            model: model_name,
            m,
            grid,
            band_range,
            gap_tol,
            step,
            sweep: p.sweep,
            method,
            out: p.out.unwrap_or_else(|| PathBuf::from(".")),
            format,
            workers,
            center: p.center.unwrap_or([1.0, 0.5]),
            sides,
            plane,
            segments,
        };
        Ok((config, model))
    }

    pub fn subspace(&self) -> Subspace<f64> {
        Subspace::new(self.band_range[0], self.band_range[1] - self.band_range[0]).with_gap_tol(self.gap_tol)
    }

    /// Sweep values if a sweep is configured, otherwise the `m` list.
    pub fn parameter_values(&self) -> Result<Vec<f64>, CliError> {
        match self.sweep {
            Some([a, b, s]) => crate::measure::SweepSpec::new(a, b, s)
                .and_then(|s| s.values())
                .map_err(|e| CliError::Usage(e.to_string())),
            None => Ok(self.m.clone()),
        }
    }
}
