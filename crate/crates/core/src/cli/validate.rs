//! Built-in invariant suite behind `qgt validate`.

use num_complex::Complex;

use crate::geometry::{
    eigenframe, frame_grid, projector, qgt_at_frame, qgt_grid, qgt_point, FieldGrid, GridSpec, QGTensor, QgtOptions,
    Subspace,
};
use crate::linalg::{unitary_align, CMatrix};
use crate::models::{qwz, DoubledFamily, ParameterPoint, Qwz};
use crate::topology::{chern_direct, chern_lattice, square_loop, wilson_loop};

/// Deliberate corruption used to confirm that the suite can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Replaces every `Q_μν` by `Q_μν†`, flipping the sign of the curvature matrices.
    FlipCurvature,
}

impl Mutation {
    pub fn parse(s: &str) -> Option<Self> {
        (s == "flip-curvature").then_some(Mutation::FlipCurvature)
    }

    fn apply(self, q: &mut QGTensor<f64>) {
        match self {
            Mutation::FlipCurvature => {
                for m in &mut q.q {
                    *m = m.adjoint();
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct Suite {
    mutation: Option<Mutation>,
}

impl Suite {
    fn tensor(&self, mut q: QGTensor<f64>) -> QGTensor<f64> {
        if let Some(m) = self.mutation {
            m.apply(&mut q);
        }
        q
    }

    fn field(&self, mut f: FieldGrid<f64, QGTensor<f64>>) -> FieldGrid<f64, QGTensor<f64>> {
        for q in f.values.iter_mut().flatten() {
            *q = self.tensor(q.clone());
        }
        f
    }
}

fn pt(kx: f64, ky: f64, m: f64) -> ParameterPoint<f64> {
    ParameterPoint::momentum(kx, ky, &[m])
}

fn sample_points() -> Vec<ParameterPoint<f64>> {
    let mut v = Vec::new();
    for (i, m) in [-1.0, 1.0, 3.0].into_iter().enumerate() {
        for j in 0..6 {
            let t = (i * 6 + j) as f64;
            v.push(pt(0.37 + 1.13 * t, 2.9 - 0.71 * t, m));
        }
    }
    v
}

fn fixed_unitary(seed: f64) -> CMatrix<f64> {
    let m = CMatrix::from_rows(&[
        vec![Complex::new(1.0 + 0.3 * seed.sin(), 0.7 * seed.cos()), Complex::new(-0.4, 0.9 * seed)],
        vec![Complex::new(0.2 * seed, -0.5), Complex::new(0.8, 1.1 * seed.sin())],
    ]);
    unitary_align(&m, 1e-8).expect("well conditioned")
}

fn verdict(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

type Res<T> = Result<T, String>;

fn hermiticity(s: &Suite) -> Res<Check> {
    let mut worst = 0.0f64;
    let doubled = DoubledFamily::with_default_mix();
    let opts = QgtOptions::default();
    for p in sample_points() {
        let a = s.tensor(qgt_point(&qwz(), &p, &Subspace::lowest(1), &opts).map_err(|e| e.to_string())?);
        let b = s.tensor(qgt_point(&doubled, &p, &Subspace::lowest(2), &opts).map_err(|e| e.to_string())?);
        worst = worst.max(a.hermiticity_residual()).max(b.hermiticity_residual());
    }
    Ok(verdict("hermiticity", worst < 1e-8, format!("max |Q_nm - Q_mn^+| = {worst:.3e}")))
}

fn metric_psd(s: &Suite) -> Res<Check> {
    let mut lowest = f64::INFINITY;
    for m in [-1.0, 1.0, 3.0] {
        let f = s.field(
            qgt_grid(&qwz(), &GridSpec::square(16, &[m]), &Subspace::lowest(1), &QgtOptions::default())
                .map_err(|e| e.to_string())?,
        );
        for q in f.values.iter().flatten() {
            let (a, b, c) = (q.g(0, 0)[(0, 0)].re, q.g(0, 1)[(0, 0)].re, q.g(1, 1)[(0, 0)].re);
            let mean = 0.5 * (a + c);
            let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            lowest = lowest.min(mean - radius);
        }
    }
    Ok(verdict("metric_psd", lowest >= -1e-10, format!("smallest metric eigenvalue = {lowest:.3e}")))
}

fn curvature_antisymmetry(s: &Suite) -> Res<Check> {
    let mut worst = 0.0f64;
    let doubled = DoubledFamily::with_default_mix();
    for p in sample_points() {
        let q = s.tensor(qgt_point(&doubled, &p, &Subspace::lowest(2), &QgtOptions::default()).map_err(|e| e.to_string())?);
        for a in 0..2 {
            worst = worst.max(q.f(a, a).fro_norm());
            for b in 0..2 {
                worst = worst.max((&q.f(a, b) + &q.f(b, a)).fro_norm());
                worst = worst.max(q.f(a, b).hermiticity_deviation());
            }
        }
    }
    Ok(verdict(
        "curvature_antisymmetry",
        worst < 1e-8,
        format!("max |F_mn + F_nm|, |F_mm|, |F - F^+| = {worst:.3e}"),
    ))
}

fn projector_idempotency(_: &Suite) -> Res<Check> {
    let mut worst = 0.0f64;
    let doubled = DoubledFamily::with_default_mix();
    for p in sample_points() {
        for (frame, n) in [
            (eigenframe(&qwz(), &p, &Subspace::lowest(1)), 1.0),
            (eigenframe(&doubled, &p, &Subspace::lowest(2)), 2.0),
        ] {
            let pr = projector(&frame.map_err(|e| e.to_string())?);
            worst = worst
                .max((&pr * &pr).distance(&pr))
                .max(pr.hermiticity_deviation())
                .max((pr.trace().map_err(|e| e.to_string())?.re - n).abs());
        }
    }
    Ok(verdict("projector_idempotency", worst < 1e-12, format!("max |P^2 - P|, |P - P^+|, |tr P - n| = {worst:.3e}")))
}

fn wilson_unitarity(_: &Suite) -> Res<Check> {
    let doubled = DoubledFamily::with_default_mix();
    let n = 10_000;
    let circle: Vec<_> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            pt(1.0 + 0.8 * t.cos(), 2.0 + 0.8 * t.sin(), 1.0)
        })
        .collect();
    let a = wilson_loop(&doubled, &circle, &Subspace::lowest(2), true).map_err(|e| e.to_string())?;
    let b = wilson_loop(&qwz(), &circle, &Subspace::lowest(1), true).map_err(|e| e.to_string())?;
    let sq = square_loop(&pt(0.5, 0.5, -1.0), (0, 1), 1.0, 50);
    let c = wilson_loop(&doubled, &sq, &Subspace::lowest(2), true).map_err(|e| e.to_string())?;
    let worst = a.unitarity_deviation().max(b.unitarity_deviation()).max(c.unitarity_deviation());
    Ok(verdict("wilson_unitarity", worst < 1e-8, format!("max |W^+W - 1| = {worst:.3e} over {n}-segment loops")))
}

fn gauge_covariance(s: &Suite) -> Res<Check> {
    let doubled = DoubledFamily::with_default_mix();
    let sub = Subspace::lowest(2);
    let opts = QgtOptions::default();
    let mut conj = 0.0f64;
    let mut route = 0.0f64;
    for (i, p) in sample_points().into_iter().enumerate() {
        let frame = eigenframe(&doubled, &p, &sub).map_err(|e| e.to_string())?;
        let w = fixed_unitary(i as f64 + 0.5);
        let q = s.tensor(qgt_at_frame(&doubled, &frame, &sub, &opts).map_err(|e| e.to_string())?);
        let q2 = s.tensor(qgt_at_frame(&doubled, &frame.rotated(&w), &sub, &opts).map_err(|e| e.to_string())?);
        let expect = q.conjugated(&w);
        for k in 0..q.q.len() {
            conj = conj.max(q2.q[k].distance(&expect.q[k]));
        }
        for a in 0..2 {
            for b in 0..2 {
                let tf = q2.f(a, b).trace().map_err(|e| e.to_string())?.re;
                route = route.max((tf - q2.tr_f(a, b)).abs());
                route = route.max((q2.g(a, b).trace().map_err(|e| e.to_string())?.re - q2.tr_g(a, b)).abs());
            }
        }
    }
    Ok(verdict(
        "gauge_covariance",
        conj < 1e-6 && route < 1e-6,
        format!("max |Q' - W^+QW| = {conj:.3e}; max |Tr F, Tr g (matrix) - projector route| = {route:.3e}"),
    ))
}

fn analytic_agreement(s: &Suite) -> Res<Check> {
    let mut worst = 0.0f64;
    let spec = GridSpec::square(16, &[1.0]).with_offset(0.25, 0.25);
    let num = s.field(qgt_grid(&qwz(), &spec, &Subspace::lowest(1), &QgtOptions::default()).map_err(|e| e.to_string())?);
    let an = crate::geometry::analytic_grid(&Qwz, &spec, 1e-8).map_err(|e| e.to_string())?;
    for (a, b) in num.values.iter().zip(&an.values) {
        if let (Some(a), Some(b)) = (a, b) {
            for k in 0..4 {
                worst = worst.max(a.q[k].distance(&b.q[k]));
            }
        }
    }
    Ok(verdict("analytic_agreement", worst < 1e-5, format!("max |Q_numeric - Q_closed_form| = {worst:.3e}")))
}

fn phase_diagram(s: &Suite) -> Res<Check> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, expect) in [(-1.0, 1i64), (1.0, -1), (3.0, 0), (-3.0, 0)] {
        let frames = frame_grid(&qwz(), &GridSpec::square(24, &[m]), &Subspace::lowest(1)).map_err(|e| e.to_string())?;
        let lat = chern_lattice(&frames).map_err(|e| e.to_string())?.integer.unwrap_or(i64::MIN);
        let field = s.field(
            qgt_grid(&qwz(), &GridSpec::square(64, &[m]), &Subspace::lowest(1), &QgtOptions::default())
                .map_err(|e| e.to_string())?,
        );
        let dir = chern_direct(&field).map_err(|e| e.to_string())?.value;
        ok &= lat == expect && (dir - expect as f64).abs() < 0.02;
        parts.push(format!("m={m}: lattice {lat}, direct {dir:.4}"));
    }
    Ok(verdict("phase_diagram", ok, parts.join("; ")))
}

fn additivity(_: &Suite) -> Res<Check> {
    let doubled = DoubledFamily::with_default_mix();
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [-1.0, 1.0, 3.0] {
        let spec = GridSpec::square(24, &[m]);
        let one = chern_lattice(&frame_grid(&qwz(), &spec, &Subspace::lowest(1)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?
            .integer;
        let two = chern_lattice(&frame_grid(&doubled, &spec, &Subspace::lowest(2)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?
            .integer;
        ok &= matches!((one, two), (Some(a), Some(b)) if b == 2 * a);
        parts.push(format!("m={m}: {} vs 2x{}", two.unwrap_or(i64::MIN), one.unwrap_or(i64::MIN)));
    }
    Ok(verdict("additivity", ok, parts.join("; ")))
}

fn determinism(_: &Suite) -> Res<Check> {
    let run = |threads: usize| -> Res<(Vec<u64>, Option<i64>)> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| {
            let spec = GridSpec::square(32, &[1.0]);
            let f = qgt_grid::<f64, _>(&DoubledFamily::with_default_mix(), &spec, &Subspace::lowest(2), &QgtOptions::default())
                .map_err(|e| e.to_string())?;
            let bits = f
                .values
                .iter()
                .flatten()
                .flat_map(|q| q.trace_q.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]))
                .collect();
            let frames = frame_grid(&qwz(), &spec, &Subspace::lowest(1)).map_err(|e| e.to_string())?;
            let c = chern_lattice(&frames).map_err(|e| e.to_string())?.integer;
            Ok((bits, c))
        })
    };
    let a = run(1)?;
    let b = run(4)?;
    Ok(verdict("determinism", a == b, format!("1 vs 4 workers: {} values compared", a.0.len())))
}

/// Runs every check in a fixed order.
pub fn run_suite(mutation: Option<Mutation>) -> Vec<Check> {
    let suite = Suite { mutation };
    let checks: [(&'static str, fn(&Suite) -> Res<Check>); 10] = [
        ("hermiticity", hermiticity),
        ("metric_psd", metric_psd),
        ("curvature_antisymmetry", curvature_antisymmetry),
        ("projector_idempotency", projector_idempotency),
        ("wilson_unitarity", wilson_unitarity),
        ("gauge_covariance", gauge_covariance),
        ("analytic_agreement", analytic_agreement),
        ("phase_diagram", phase_diagram),
        ("additivity", additivity),
        ("determinism", determinism),
    ];
    checks
        .iter()
        .map(|(name, f)| f(&suite).unwrap_or_else(|e| verdict(name, false, format!("error: {e}"))))
        .collect()
}

/// Fixed-width report, one line per check.
pub fn report(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        out.push_str(&format!(
            "{:<24} {:<4}  {}\n",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        ));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    out.push_str(&format!("{} checks, {} failed\n", checks.len(), failed));
    out
}
