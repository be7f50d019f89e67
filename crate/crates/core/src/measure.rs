//! Scalar diagnostics: fidelity susceptibility, parameter sweeps and
//! critical-point detection.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{frame_grid, qgt_grid, qgt_point, Directions, GridSpec, QgtOptions, Subspace};
use crate::models::{HamiltonianFamily, ParameterPoint};
use crate::scalar::Real;
use crate::topology::{chern_direct, chern_lattice, ChernMethod};

/// `χ_FS = Σ_μν Tr g_μν u^μ u^ν` along the unit direction `u`.
///
/// `u` covers either the periodic coordinates or all coordinates. For a
/// degenerate subspace the trace makes the result basis independent.
pub fn fidelity_susceptibility<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    point: &ParameterPoint<T>,
    direction: &[T],
    subspace: &Subspace<T>,
    opts: &QgtOptions<T>,
) -> Result<T> {
    let np = family.n_periodic();
    let total = np + family.n_external();
    if direction.len() != np && direction.len() != total {
        return Err(Error::InvalidInput(format!(
            "direction has {} components; expected {np} or {total}",
            direction.len()
        )));
    }
    let norm = direction.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    if !((norm - T::one()).abs() <= T::DEFAULT_TOL.sqrt()) {
        return Err(Error::InvalidInput(format!(
            "direction must be a unit vector (norm {})",
            norm
        )));
    }
    let opts = QgtOptions {
        directions: Directions::Custom((0..direction.len()).collect()),
        ..opts.clone()
    };
    let q = qgt_point(family, point, subspace, &opts)?;
    Ok(q.metric_form(direction))
}

/// `start, start + step, …` up to `stop` inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec<T> {
    pub start: T,
    pub stop: T,
    pub step: T,
}

impl<T: Real> SweepSpec<T> {
    pub fn new(start: T, stop: T, step: T) -> Result<Self> {
        let s = Self { start, stop, step };
        s.values()?;
        Ok(s)
    }

    /// Parameter values `start + i·step`, strictly increasing, non-empty.
    pub fn values(&self) -> Result<Vec<T>> {
        if !(self.step > T::zero()) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sweep {}:{}:{} needs a positive step and finite bounds",
                self.start, self.stop, self.step
            )));
        }
        if self.stop < self.start {
            return Err(Error::InvalidInput(format!(
                "sweep range {}:{} is empty",
                self.start, self.stop
            )));
        }
        let span = (self.stop - self.start) / self.step;
        let count = (span + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
        if count > 1_000_000 {
            return Err(Error::InvalidInput(format!("sweep has {count} points")));
        }
        Ok((0..count)
            .map(|i| self.start + self.step * T::from_usize_lossy(i))
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    /// BZ-integrated `Tr g_xx + Tr g_yy`.
    IntegratedMetric,
    Chern(ChernMethod),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult<T> {
    pub kind: SweepKind,
    pub parameters: Vec<T>,
    /// `None` where the observable is undefined or its evaluation failed.
    pub observable: Vec<Option<T>>,
    pub singular_counts: Vec<usize>,
    /// Grid at the first parameter value.
    pub grid: (usize, usize),
    /// One message per failed or flagged parameter value.
    pub warnings: Vec<String>,
}

fn grid_at<T: Real, F: HamiltonianFamily<T> + ?Sized>(family: &F, grid: &GridSpec<T>, m: T) -> GridSpec<T> {
    let external = if family.n_external() > 0 {
        let mut e = grid.external.clone();
        e.resize(family.n_external(), T::zero());
        e[0] = m;
        e
    } else {
        Vec::new()
    };
    GridSpec { external, ..grid.clone() }
}

/// `∫ (Tr g_xx + Tr g_yy) d²k` over the non-singular cells, per value of the
/// first external parameter.
pub fn integrated_metric_sweep<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    sweep: &SweepSpec<T>,
    grid: &GridSpec<T>,
    subspace: &Subspace<T>,
    opts: &QgtOptions<T>,
) -> Result<SweepResult<T>> {
    let params = sweep.values()?;
    let opts = QgtOptions {
        directions: Directions::Periodic,
        ..opts.clone()
    };
    let rows: Vec<(Option<T>, usize, Option<String>)> = params
        .par_iter()
        .map(|&m| match qgt_grid(family, &grid_at(family, grid, m), subspace, &opts) {
            Ok(field) => {
                let area = field.spec.cell_area();
                let mut sum = T::zero();
                for (_, _, cell) in field.cells() {
                    if let Some(q) = cell {
                        sum += q.tr_g(0, 0) + q.tr_g(1, 1);
                    }
                }
                let warn = field.critical_warning().map(|w| format!("m = {m}: {w}"));
                (Some(sum * area), field.singular_count(), warn)
            }
            Err(e) => (None, 0, Some(format!("m = {m}: {e}"))),
        })
        .collect();
    Ok(collect_sweep(SweepKind::IntegratedMetric, params, rows, grid))
}

/// First Chern number per parameter value; values with any singular cell are
/// undefined.
pub fn chern_sweep<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    sweep: &SweepSpec<T>,
    grid: &GridSpec<T>,
    subspace: &Subspace<T>,
    method: ChernMethod,
    opts: &QgtOptions<T>,
) -> Result<SweepResult<T>> {
    let params = sweep.values()?;
    let rows: Vec<(Option<T>, usize, Option<String>)> = params
        .par_iter()
        .map(|&m| {
            let spec = grid_at(family, grid, m);
            let (value, singular) = match method {
                ChernMethod::Lattice => match frame_grid(family, &spec, subspace) {
                    Ok(frames) => {
                        let s = frames.singular_count();
                        if s > 0 {
                            (Ok(None), s)
                        } else {
                            (chern_lattice(&frames).map(|r| Some(r.value)), 0)
                        }
                    }
                    Err(e) => (Err(e), 0),
                },
                ChernMethod::Direct => match qgt_grid(family, &spec, subspace, opts) {
                    Ok(field) => {
                        let s = field.singular_count();
                        if s > 0 {
                            (Ok(None), s)
                        } else {
                            (chern_direct(&field).map(|r| Some(r.value)), 0)
                        }
                    }
                    Err(e) => (Err(e), 0),
                },
            };
            match value {
                Ok(v) => {
                    let warn = (singular > 0).then(|| format!("m = {m}: {singular} singular cells, C1 undefined"));
                    (v, singular, warn)
                }
                Err(e) => (None, singular, Some(format!("m = {m}: {e}"))),
            }
        })
        .collect();
    Ok(collect_sweep(SweepKind::Chern(method), params, rows, grid))
}

fn collect_sweep<T: Real>(
    kind: SweepKind,
    parameters: Vec<T>,
    rows: Vec<(Option<T>, usize, Option<String>)>,
    grid: &GridSpec<T>,
) -> SweepResult<T> {
    let mut observable = Vec::with_capacity(rows.len());
    let mut singular_counts = Vec::with_capacity(rows.len());
    let mut warnings = Vec::new();
    for (v, s, w) in rows {
        observable.push(v);
        singular_counts.push(s);
        warnings.extend(w);
    }
    SweepResult {
        kind,
        parameters,
        observable,
        singular_counts,
        grid: (grid.nx, grid.ny),
        warnings,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticalKind {
    /// Local maximum standing out from the sweep's baseline.
    Peak,
    /// The gap closes on a grid point: the observable diverges here.
    Divergent,
    /// Chern plateau changes value.
    ChernChange,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPointEstimate<T> {
    pub location: T,
    /// Peak height; `None` for divergent points and plateau changes.
    pub value: Option<T>,
    /// Sweep step.
    pub resolution: T,
    pub kind: CriticalKind,
}

/// Linear-interpolation quantile of sorted data.
fn quantile<T: Real>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Critical points of a sweep.
///
/// Metric sweeps: entries whose grid contains a gap closing are divergent
/// points located exactly at their parameter value (runs of adjacent ones
/// are merged). Among finite entries, local maxima above
/// `median + 3·IQR` (statistics over finite entries) are peaks, refined by a
/// three-point parabola. A maximum must have finite neighbours on both sides.
///
/// Chern sweeps: every change between consecutive defined plateaus; the
/// location is the mean of the undefined entries between them, or the
/// midpoint when there are none.
///
/// Fewer than five points yield no estimates.
pub fn detect_critical_points<T: Real>(sweep: &SweepResult<T>) -> Vec<CriticalPointEstimate<T>> {
    let n = sweep.parameters.len();
    if n < 5 {
        return Vec::new();
    }
    let x = &sweep.parameters;
    let resolution = (x[n - 1] - x[0]) / T::from_usize_lossy(n - 1);
    if let SweepKind::Chern(_) = sweep.kind {
        return chern_changes(sweep, resolution);
    }

    let divergent: Vec<bool> = (0..n).map(|i| sweep.singular_counts[i] > 0).collect();
    let finite: Vec<Option<T>> = (0..n)
        .map(|i| if divergent[i] { None } else { sweep.observable[i] })
        .collect();
    let mut out = Vec::new();

    let mut i = 0;
    while i < n {
        if divergent[i] {
            let start = i;
            while i + 1 < n && divergent[i + 1] {
                i += 1;
            }
            let mid = (x[start] + x[i]) * T::lit(0.5);
            out.push(CriticalPointEstimate {
                location: mid,
                value: None,
                resolution,
                kind: CriticalKind::Divergent,
            });
        }
        i += 1;
    }

    let mut values: Vec<T> = finite.iter().flatten().copied().collect();
    if values.len() >= 5 {
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let median = quantile(&values, 0.5);
        let iqr = quantile(&values, 0.75) - quantile(&values, 0.25);
        let threshold = median + T::lit(3.0) * iqr;
        for i in 1..n - 1 {
            let (Some(l), Some(c), Some(r)) = (finite[i - 1], finite[i], finite[i + 1]) else {
                continue;
            };
            if c > l && c >= r && c > threshold {
                let curvature = l - (c + c) + r;
                let shift = if curvature < T::zero() {
                    (l - r) / (curvature + curvature)
                } else {
                    T::zero()
                };
                let h = x[i + 1] - x[i];
                out.push(CriticalPointEstimate {
                    location: x[i] + shift * h,
                    value: Some(c),
                    resolution,
                    kind: CriticalKind::Peak,
                });
            }
        }
    }
    out.sort_by(|a, b| a.location.partial_cmp(&b.location).expect("finite locations"));
    out
}

fn chern_changes<T: Real>(sweep: &SweepResult<T>, resolution: T) -> Vec<CriticalPointEstimate<T>> {
    let x = &sweep.parameters;
    let defined: Vec<(usize, T)> = sweep
        .observable
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let mut out = Vec::new();
    for w in defined.windows(2) {
        let ((i, a), (j, b)) = (w[0], w[1]);
        if (a - b).abs() < T::lit(0.5) {
            continue;
        }
        let location = if j > i + 1 {
            let gap = &x[i + 1..j];
            gap.iter().fold(T::zero(), |s, &v| s + v) / T::from_usize_lossy(gap.len())
        } else {
            (x[i] + x[j]) * T::lit(0.5)
        };
        out.push(CriticalPointEstimate {
            location,
            value: None,
            resolution,
            kind: CriticalKind::ChernChange,
        });
    }
    out
}

/// Maximal runs of equal defined values: `(first parameter, last parameter, value)`.
pub fn plateaus<T: Real>(sweep: &SweepResult<T>) -> Vec<(T, T, T)> {
    let mut out: Vec<(T, T, T)> = Vec::new();
    let mut prev_defined = false;
    for (x, v) in sweep.parameters.iter().zip(&sweep.observable) {
        match v {
            Some(v) => {
                match out.last_mut() {
                    Some(last) if prev_defined && (last.2 - *v).abs() < T::lit(0.5) => last.1 = *x,
                    _ => out.push((*x, *x, *v)),
                }
                prev_defined = true;
            }
            None => prev_defined = false,
        }
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// positive pairs.
pub fn loglog_slope<T: Real>(xs: &[T], ys: &[T]) -> Option<T> {
    let pts: Vec<(T, T)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > T::zero() && **y > T::zero())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().fold(T::zero(), |s, p| s + p.0) / n;
    let my = pts.iter().fold(T::zero(), |s, p| s + p.1) / n;
    let sxy = pts.iter().fold(T::zero(), |s, p| s + (p.0 - mx) * (p.1 - my));
    let sxx = pts.iter().fold(T::zero(), |s, p| s + (p.0 - mx) * (p.0 - mx));
    (sxx > T::zero()).then(|| sxy / sxx)
}
