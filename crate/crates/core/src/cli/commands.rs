//! Subcommand implementations. Each writes its data files and returns the
//! JSON summary describing them.

use serde_json::json;

use super::config::{LoadedModel, RunConfig};
use super::output::{fmt_float, fmt_opt, CriticalPointRecord, Metadata, Summary, Table};
use super::CliError;
use crate::error::Error;
use crate::geometry::{analytic_grid, qgt_grid, qgt_point, GridSpec, QGTensor, QgtOptions};
use crate::measure::{
    chern_sweep, detect_critical_points, integrated_metric_sweep, loglog_slope, plateaus, SweepSpec,
};
use crate::models::ParameterPoint;
use crate::topology::{small_loop_check, ChernMethod};

fn compute(e: Error) -> CliError {
    CliError::Compute(e.to_string())
}

fn options(config: &RunConfig) -> QgtOptions<f64> {
    QgtOptions::default().with_step(config.step)
}

fn grid(config: &RunConfig, model: &LoadedModel, m: f64) -> GridSpec<f64> {
    GridSpec::new(config.grid[0], config.grid[1], model.external(m))
}

fn summary(command: &str, config: &RunConfig, results: serde_json::Value, warnings: Vec<String>) -> Summary {
    Summary {
        schema_version: super::output::SCHEMA_VERSION,
        command: command.into(),
        config: config.clone(),
        metadata: Metadata::now(),
        results,
        critical_points: Vec::new(),
        warnings,
    }
}

/// Sweep range from the configured start:stop:step, if any.
fn sweep_of(config: &RunConfig) -> Result<Option<SweepSpec<f64>>, CliError> {
    config
        .sweep
        .map(|[a, b, s]| SweepSpec::new(a, b, s).map_err(|e| CliError::Usage(e.to_string())))
        .transpose()
}

fn csv_enabled(config: &RunConfig) -> bool {
    config.format == "csv"
}

pub fn field(config: &RunConfig, model: &LoadedModel) -> Result<Summary, CliError> {
    let subspace = config.subspace();
    let opts = options(config);
    let mut fields = Vec::new();
    let mut warnings = Vec::new();
    for m in config.parameter_values()? {
        let spec = grid(config, model, m);
        let mut fallback = 0usize;
        let field = if config.method == "analytic" {
            let analytic = model.analytic.as_deref().expect("checked during resolution");
            let mut f = analytic_grid(analytic, &spec, config.gap_tol).map_err(compute)?;
            // Chart poles have no closed form; those cells use the projector route.
            for (i, v) in f.values.iter_mut().enumerate() {
                if v.is_none() {
                    let p = spec.point(i / spec.ny, i % spec.ny);
                    match qgt_point(&*model.family, &p, &subspace, &opts) {
                        Ok(q) => {
                            *v = Some(q);
                            fallback += 1;
                        }
                        Err(Error::SingularPoint { .. }) | Err(Error::SingularOverlap { .. }) => {}
                        Err(e) => return Err(compute(e)),
                    }
                }
            }
            f
        } else {
            qgt_grid(&*model.family, &spec, &subspace, &opts).map_err(compute)?
        };
        if fallback > 0 {
            warnings.push(format!("m = {m}: {fallback} chart-pole cells evaluated with the projector route"));
        }
        if let Some(w) = field.critical_warning() {
            warnings.push(format!("m = {m}: {w}"));
        }
        let mut table = Table::new(vec!["kx", "ky", "tr_g", "g_xx", "g_xy", "g_yy", "F_xy", "singular_flag"]);
        let mut integrated = 0.0;
        let mut max_tr_g: Option<f64> = None;
        for (ix, iy, cell) in field.cells() {
            let p = spec.point(ix, iy);
            let (kx, ky) = (p.k()[0], p.k()[1]);
            let row = match cell {
                Some(q) => {
                    let (gxx, gxy, gyy, fxy) = components(q);
                    integrated += gxx + gyy;
                    max_tr_g = Some(max_tr_g.map_or(gxx + gyy, |v| v.max(gxx + gyy)));
                    vec![kx, ky, gxx + gyy, gxx, gxy, gyy, fxy, 0.0]
                }
                None => vec![kx, ky, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 1.0],
            };
            let mut cells: Vec<String> = row[..7].iter().map(|&x| fmt_float(x)).collect();
            cells.push(format!("{}", row[7] as u8));
            table.push(cells);
        }
        let mut entry = json!({
            "m": m,
            "cells": field.values.len(),
            "singular_cells": field.singular_count(),
            "integrated_tr_g": integrated * spec.cell_area(),
            "max_tr_g": max_tr_g,
        });
        if csv_enabled(config) {
            let name = format!("field_m{m}.csv");
            table.write(&config.out.join(&name))?;
            entry["file"] = json!(name);
        } else {
            entry["data"] = table.json_rows();
        }
        fields.push(entry);
    }
    Ok(summary("field", config, json!({ "method": config.method, "fields": fields }), warnings))
}

/// `(Tr g_xx, Tr g_xy, Tr g_yy, Tr F_xy)` from the gauge-invariant traces.
fn components(q: &QGTensor<f64>) -> (f64, f64, f64, f64) {
    (q.tr_g(0, 0), q.tr_g(0, 1), q.tr_g(1, 1), q.tr_f(0, 1))
}

pub fn chern(config: &RunConfig, model: &LoadedModel) -> Result<Summary, CliError> {
    let subspace = config.subspace();
    let opts = options(config);
    let params = config.parameter_values()?;
    let spec = grid(config, model, params[0]);
    let run = |method| -> Result<_, CliError> {
        Ok(match sweep_of(config)? {
            Some(s) => chern_sweep(&*model.family, &s, &spec, &subspace, method, &opts).map_err(compute)?,
            None => {
                // Explicit m list: evaluate each value as a one-point sweep.
                let mut acc: Option<crate::measure::SweepResult<f64>> = None;
                for &m in &params {
                    let one = SweepSpec::new(m, m, 1.0).map_err(compute)?;
                    let r = chern_sweep(&*model.family, &one, &spec, &subspace, method, &opts).map_err(compute)?;
                    match acc.as_mut() {
                        None => acc = Some(r),
                        Some(a) => {
                            a.parameters.extend(r.parameters);
                            a.observable.extend(r.observable);
                            a.singular_counts.extend(r.singular_counts);
                            a.warnings.extend(r.warnings);
                        }
                    }
                }
                acc.expect("non-empty m list")
            }
        })
    };
    let lattice = run(ChernMethod::Lattice)?;
    let direct = run(ChernMethod::Direct)?;
    let primary = if config.method == "direct" { &direct } else { &lattice };

    let mut table = Table::new(vec!["m", "c1_lattice", "c1_direct", "singular_cells"]);
    for i in 0..lattice.parameters.len() {
        table.push(vec![
            fmt_float(lattice.parameters[i]),
            lattice.observable[i].map_or("NaN".into(), |v| format!("{}", v as i64)),
            fmt_opt(direct.observable[i]),
            format!("{}", primary.singular_counts[i]),
        ]);
    }
    let mut warnings: Vec<String> = lattice.warnings.iter().map(|w| format!("lattice: {w}")).collect();
    warnings.extend(direct.warnings.iter().map(|w| format!("direct: {w}")));
    let plateau_list: Vec<_> = plateaus(primary)
        .into_iter()
        .map(|(a, b, v)| json!({ "start": a, "stop": b, "value": v + 0.0 }))
        .collect();
    let mut results = json!({ "method": config.method, "plateaus": plateau_list });
    if csv_enabled(config) {
        table.write(&config.out.join("chern.csv"))?;
        results["file"] = json!("chern.csv");
    }
    results["data"] = table.json_rows();
    let mut s = summary("chern", config, results, warnings);
    s.critical_points = detect_critical_points(primary).iter().map(CriticalPointRecord::from).collect();
    Ok(s)
}

pub fn fs_sweep(config: &RunConfig, model: &LoadedModel) -> Result<Summary, CliError> {
    let subspace = config.subspace();
    let opts = options(config);
    let sweep = match sweep_of(config)? {
        Some(s) => s,
        None => {
            return Err(CliError::Usage("fs-sweep needs --sweep start:stop:step".into()));
        }
    };
    let spec = grid(config, model, sweep.start);
    let r = integrated_metric_sweep(&*model.family, &sweep, &spec, &subspace, &opts).map_err(compute)?;
    let mut table = Table::new(vec!["m", "integrated_tr_g", "singular_cells"]);
    for i in 0..r.parameters.len() {
        table.push(vec![
            fmt_float(r.parameters[i]),
            fmt_opt(r.observable[i]),
            format!("{}", r.singular_counts[i]),
        ]);
    }
    let mut results = json!({});
    if csv_enabled(config) {
        table.write(&config.out.join("fs_sweep.csv"))?;
        results["file"] = json!("fs_sweep.csv");
    }
    results["data"] = table.json_rows();
    let mut s = summary("fs-sweep", config, results, r.warnings.clone());
    s.critical_points = detect_critical_points(&r).iter().map(CriticalPointRecord::from).collect();
    Ok(s)
}

pub fn holonomy(config: &RunConfig, model: &LoadedModel) -> Result<Summary, CliError> {
    let subspace = config.subspace();
    let opts = options(config);
    let m = config.m[0];
    let np = model.family.n_periodic();
    if np != 2 {
        return Err(CliError::Usage("holonomy needs a model on the 2-torus".into()));
    }
    let center = ParameterPoint::new(config.center.to_vec(), model.external(m));
    let plane = (config.plane[0], config.plane[1]);
    let mut table = Table::new(vec!["side", "residual", "ratio_to_previous"]);
    let mut sides = Vec::new();
    let mut residuals = Vec::new();
    let mut prev: Option<f64> = None;
    for &side in &config.sides {
        let r = small_loop_check(&*model.family, &center, &subspace, side, plane, config.segments, &opts)
            .map_err(|e| CliError::Compute(format!("loop of side {side} around {:?}: {e}", center.to_f64_vec())))?;
        let ratio = prev.map(|p| p / r.residual);
        table.push(vec![fmt_float(side), fmt_float(r.residual), fmt_opt(ratio)]);
        sides.push(side);
        residuals.push(r.residual);
        prev = Some(r.residual);
    }
    let order = loglog_slope(&sides, &residuals);
    let mut results = json!({
        "center": center.to_f64_vec(),
        "plane": config.plane,
        "order": order,
    });
    if csv_enabled(config) {
        table.write(&config.out.join("holonomy.csv"))?;
        results["file"] = json!("holonomy.csv");
    }
    results["data"] = table.json_rows();
    Ok(summary("holonomy", config, results, Vec::new()))
}
