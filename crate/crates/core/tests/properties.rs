//! Property tests for the structural invariants of the tensor, the lattice
//! Chern number, Wilson loops and the sweep machinery.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qgt::geometry::{qgt_at_frame, Frame};
use qgt::measure::{plateaus, CriticalKind, SweepKind, SweepResult};
use qgt::models::DoubledFamily;
use qgt::topology::square_loop;
use qgt::{
    chern_lattice, detect_critical_points, eigenframe, eig_hermitian, fidelity_susceptibility, frame_grid,
    projector, qgt_analytic, qgt_point, qwz, wilson_loop, CMatrix, ChernMethod, GridSpec, HamiltonianFamily,
    ParameterPoint, QgtOptions, Subspace, SweepSpec,
};

/// Masses at least 0.2 away from the gap closings at −2, 0 and 2.
fn gapped_mass() -> impl Strategy<Value = f64> {
    prop_oneof![-3.5..-2.2, -1.8..-0.2, 0.2..1.8, 2.2..3.5]
}

fn momentum() -> impl Strategy<Value = (f64, f64)> {
    (-PI..PI, -PI..PI)
}

fn unitary2() -> impl Strategy<Value = CMatrix<f64>> {
    (prop::array::uniform4(-1.0..1.0f64), -PI..PI)
        .prop_filter("non-degenerate seed", |(v, _)| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|(v, phase)| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let a = Complex64::new(v[0], v[1]) / n;
            let b = Complex64::new(v[2], v[3]) / n;
            let e = Complex64::from_polar(1.0, phase);
            CMatrix::from_rows(&[vec![a * e, -b.conj() * e], vec![b * e, a.conj() * e]])
        })
}

fn doubled() -> DoubledFamily<f64> {
    DoubledFamily::with_default_mix()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tensor_is_hermitian_with_psd_metric((kx, ky) in momentum(), m in gapped_mass()) {
        let p = ParameterPoint::momentum(kx, ky, &[m]);
        let opts = QgtOptions::default().with_directions(qgt::Directions::All);
        let q = qgt_point(&doubled(), &p, &Subspace::lowest(2), &opts).unwrap();
        prop_assert!(q.hermiticity_residual() < 1e-12);
        let g = q.metric_matrix();
        let gm = CMatrix::from_fn(3, 3, |i, j| Complex64::new(g[i][j], 0.0));
        prop_assert!(eig_hermitian(&gm, 1e-12).unwrap().values[0] >= -1e-9);
        for a in 0..3 {
            for b in 0..3 {
                let (fab, fba) = (q.f(a, b), q.f(b, a));
                prop_assert!(fab.distance(&fba.scale_real(-1.0)) < 1e-12);
                prop_assert!(fab.hermiticity_deviation() < 1e-12);
            }
        }
    }

    #[test]
    fn frame_rotation_conjugates_the_tensor((kx, ky) in momentum(), m in gapped_mass(), w in unitary2()) {
        let family = doubled();
        let p = ParameterPoint::momentum(kx, ky, &[m]);
        let sub = Subspace::lowest(2);
        let opts = QgtOptions::default();
        let frame = eigenframe(&family, &p, &sub).unwrap();
        let a = qgt_at_frame(&family, &frame, &sub, &opts).unwrap();
        let b = qgt_at_frame(&family, &frame.rotated(&w), &sub, &opts).unwrap();
        let expected = a.conjugated(&w);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!(expected.q(i, j).distance(b.q(i, j)) < 1e-6);
                prop_assert_eq!(a.tr_g(i, j).to_bits(), b.tr_g(i, j).to_bits());
                prop_assert_eq!(a.tr_f(i, j).to_bits(), b.tr_f(i, j).to_bits());
            }
        }
    }

    #[test]
    fn projector_is_an_orthogonal_projection((kx, ky) in momentum(), m in gapped_mass(), w in unitary2()) {
        let p = ParameterPoint::momentum(kx, ky, &[m]);
        let frame = eigenframe(&doubled(), &p, &Subspace::lowest(2)).unwrap();
        let pr = projector(&frame);
        prop_assert!((&pr * &pr).distance(&pr) < 1e-12);
        prop_assert!(pr.hermiticity_deviation() < 1e-12);
        prop_assert!((pr.trace().unwrap().re - 2.0).abs() < 1e-12);
        prop_assert!(projector(&frame.rotated(&w)).distance(&pr) < 1e-12);
    }

    #[test]
    fn susceptibility_is_even_and_non_negative(
        (kx, ky) in momentum(),
        m in gapped_mass(),
        angle in 0.0..(2.0 * PI),
    ) {
        let p = ParameterPoint::momentum(kx, ky, &[m]);
        let u = [angle.cos(), angle.sin()];
        let opts = QgtOptions::default();
        let sub = Subspace::lowest(2);
        let plus = fidelity_susceptibility(&doubled(), &p, &u, &sub, &opts).unwrap();
        let minus = fidelity_susceptibility(&doubled(), &p, &[-u[0], -u[1]], &sub, &opts).unwrap();
        prop_assert!(plus >= -1e-12);
        prop_assert_eq!(plus.to_bits(), minus.to_bits());
    }

    #[test]
    fn numeric_tensor_matches_closed_form((kx, ky) in momentum(), m in gapped_mass()) {
        let p = ParameterPoint::momentum(kx, ky, &[m]);
        if let Ok(exact) = qgt_analytic(&qgt::models::Qwz, &p, 1e-8) {
            let q = qgt_point(&qwz(), &p, &Subspace::lowest(1), &QgtOptions::default()).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!((q.q(i, j)[(0, 0)] - exact.q(i, j)[(0, 0)]).norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn lattice_chern_is_an_integer_and_gauge_invariant(m in gapped_mass(), phases in prop::collection::vec(-PI..PI, 144)) {
        let spec = GridSpec::square(12, &[m]);
        let frames = frame_grid(&qwz(), &spec, &Subspace::lowest(1)).unwrap();
        let mut shifted = frames.clone();
        for (v, &t) in shifted.values.iter_mut().zip(&phases) {
            let w = CMatrix::from_rows(&[vec![Complex64::from_polar(1.0, t)]]);
            *v = v.as_ref().map(|f| f.rotated(&w));
        }
        let a = chern_lattice(&frames).unwrap();
        let b = chern_lattice(&shifted).unwrap();
        prop_assert!(a.integer.is_some());
        prop_assert_eq!(a.integer, b.integer);
        prop_assert!((a.value - b.value).abs() < 1e-9);
        let expected = if (-2.0..0.0).contains(&m) { 1 } else if (0.0..2.0).contains(&m) { -1 } else { 0 };
        prop_assert_eq!(a.integer, Some(expected));
    }

    #[test]
    fn wilson_loops_are_unitary_and_reverse_to_adjoints(
        (kx, ky) in momentum(),
        m in gapped_mass(),
        side in 0.05..2.0f64,
    ) {
        let family = doubled();
        let c = ParameterPoint::momentum(kx, ky, &[m]);
        let sub = Subspace::lowest(2);
        let path = square_loop(&c, (0, 1), side, 8);
        let w = wilson_loop(&family, &path, &sub, true).unwrap();
        prop_assert!(w.unitarity_deviation() < 1e-10);
        let mut back = path.clone();
        back[1..].reverse();
        let r = wilson_loop(&family, &back, &sub, true).unwrap();
        prop_assert!(r.unitary.distance(&w.unitary.adjoint()) < 1e-10);
    }

    #[test]
    fn eigen_decomposition_reconstructs((kx, ky) in momentum(), m in -4.0..4.0f64) {
        let h = doubled().evaluate(&ParameterPoint::momentum(kx, ky, &[m])).unwrap();
        let e = eig_hermitian(&h, 1e-12).unwrap();
        let d = CMatrix::real_diagonal(&e.values);
        let back = &(&e.vectors * &d) * &e.vectors.adjoint();
        prop_assert!(back.distance(&h) < 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sweep_values_increase_strictly(start in -5.0..5.0f64, len in 0.0..4.0f64, step in 0.01..1.0f64) {
        let values = SweepSpec::new(start, start + len, step).unwrap().values().unwrap();
        prop_assert!(!values.is_empty());
        prop_assert!(values.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(*values.last().unwrap() <= start + len + 1e-9 * step);
    }

    #[test]
    fn monotone_sweeps_have_no_critical_points(values in prop::collection::vec(0.0..10.0f64, 5..40)) {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let sweep = SweepResult {
            kind: SweepKind::IntegratedMetric,
            parameters: (0..n).map(|i| i as f64).collect(),
            observable: sorted.into_iter().map(Some).collect(),
            singular_counts: vec![0; n],
            grid: (8, 8),
            warnings: Vec::new(),
        };
        prop_assert!(detect_critical_points(&sweep).is_empty());
    }

    #[test]
    fn single_peak_is_recovered(center in -2.0..2.0f64, width in 0.05..0.3f64) {
        let step = 0.05;
        let parameters: Vec<f64> = (0..=120).map(|i| -3.0 + step * i as f64).collect();
        let observable = parameters
            .iter()
            .map(|&m| Some(1.0 + 50.0 * (-(m - center).powi(2) / (2.0 * width * width)).exp()))
            .collect();
        let sweep = SweepResult {
            kind: SweepKind::IntegratedMetric,
            parameters,
            observable,
            singular_counts: vec![0; 121],
            grid: (8, 8),
            warnings: Vec::new(),
        };
        let found = detect_critical_points(&sweep);
        prop_assert_eq!(found.len(), 1);
        prop_assert_eq!(found[0].kind, CriticalKind::Peak);
        prop_assert!((found[0].location - center).abs() <= step / 2.0);
    }
}

#[test]
fn lattice_plateaus_are_exactly_constant() {
    let sweep = SweepSpec::new(-3.0, 3.0, 0.25).unwrap();
    let r = qgt::chern_sweep(
        &qwz(),
        &sweep,
        &GridSpec::square(16, &[0.0]),
        &Subspace::lowest(1),
        ChernMethod::Lattice,
        &QgtOptions::default(),
    )
    .unwrap();
    let found = plateaus(&r);
    let values: Vec<f64> = found.iter().map(|p| p.2).collect();
    assert_eq!(values, vec![0.0, 1.0, -1.0, 0.0]);
    for (m, v) in r.parameters.iter().zip(&r.observable) {
        if let Some(v) = v {
            assert_eq!(*v, v.round(), "m = {m}");
        }
    }
}

#[test]
fn single_precision_tracks_double() {
    let p64 = ParameterPoint::momentum(1.0, 0.5, &[1.0]);
    let p32 = ParameterPoint::momentum(1.0f32, 0.5, &[1.0]);
    let q64 = qgt_point(&qwz(), &p64, &Subspace::lowest(1), &QgtOptions::default()).unwrap();
    let q32 = qgt_point(&qwz(), &p32, &Subspace::lowest(1), &QgtOptions::default()).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((q64.tr_g(i, j) - q32.tr_g(i, j) as f64).abs() < 1e-3);
            assert!((q64.tr_f(i, j) - q32.tr_f(i, j) as f64).abs() < 1e-3);
        }
    }
    let frames = frame_grid(&qwz(), &GridSpec::<f32>::square(16, &[1.0]), &Subspace::lowest(1)).unwrap();
    assert_eq!(chern_lattice(&frames).unwrap().integer, Some(-1));
}

#[test]
fn frames_are_orthonormal() {
    let family = doubled();
    let f: Frame<f64> = eigenframe(&family, &ParameterPoint::momentum(0.3, -1.1, &[1.5]), &Subspace::lowest(2)).unwrap();
    assert!(f.vectors.adjoint_mul(&f.vectors).unwrap().distance(&CMatrix::identity(2)) < 1e-12);
}
