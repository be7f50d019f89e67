//! Chern numbers, link variables and Wilson loops.
//!
//! Orientation convention: the torus is oriented by `dkx ∧ dky` and curvature
//! is that of the tracked (by default lowest) bands, so the lower QWZ band
//! has `C₁ = +1` for `−2 < m < 0` and `C₁ = −1` for `0 < m < 2`.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::geometry::{
    eigenframe, qgt_point, Directions, FieldGrid, Frame, QGTensor, QgtOptions, Subspace, CRITICAL_FRACTION,
};
use crate::linalg::{unitary_align, CMatrix, LinalgError};
use crate::models::{HamiltonianFamily, ParameterPoint};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChernMethod {
    /// Riemann sum of `Tr F_xy` over grid cells.
    Direct,
    /// Gauge-invariant plaquette phases of link variables.
    Lattice,
}

impl ChernMethod {
    pub fn name(self) -> &'static str {
        match self {
            ChernMethod::Direct => "direct",
            ChernMethod::Lattice => "lattice",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChernResult<T> {
    pub value: T,
    /// Exact integer for the lattice method.
    pub integer: Option<i64>,
    pub method: ChernMethod,
    pub grid: (usize, usize),
    pub singular_cells: usize,
}

impl<T: Real> ChernResult<T> {
    /// Distance of `value` from the nearest integer.
    pub fn deviation(&self) -> T {
        (self.value - self.value.round()).abs()
    }
}

/// `C₁ = (1/2π) Σ_cells Tr F_xy Δkx Δky` over non-singular cells.
pub fn chern_direct<T: Real>(field: &FieldGrid<T, QGTensor<T>>) -> Result<ChernResult<T>> {
    let singular = field.singular_count();
    let total = field.values.len();
    if field.singular_fraction() >= CRITICAL_FRACTION {
        return Err(Error::CriticalRegion { singular, total });
    }
    let mut sum = Complex::<T>::zero();
    let mut scale = T::zero();
    for (_, _, cell) in field.cells() {
        let Some(q) = cell else { continue };
        let (Some(a), Some(b)) = (q.position(0), q.position(1)) else {
            return Err(Error::InvalidInput("tensor lacks the kx, ky directions".into()));
        };
        let tf = q.f(a, b).trace()?;
        scale += tf.re.abs();
        sum += tf;
    }
    if sum.im.abs() > T::DEFAULT_TOL * scale.max(T::one()) {
        return Err(Error::InvalidInput(format!(
            "curvature trace has imaginary residue {:e}",
            sum.im.as_f64()
        )));
    }
    let value = sum.re * field.spec.cell_area() / T::two_pi();
    Ok(ChernResult {
        value,
        integer: None,
        method: ChernMethod::Direct,
        grid: (field.nx(), field.ny()),
        singular_cells: singular,
    })
}

/// `det(a†b) / |det(a†b)|`.
pub fn link_variable<T: Real>(frame_a: &Frame<T>, frame_b: &Frame<T>) -> Result<Complex<T>> {
    link_of(&frame_a.vectors, &frame_b.vectors).map_err(|modulus| Error::SingularOverlap {
        point: frame_b.point.to_f64_vec(),
        smallest_singular_value: modulus.as_f64(),
    })
}

fn link_of<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> std::result::Result<Complex<T>, T> {
    let det = a
        .adjoint_mul(b)
        .and_then(|m| m.det())
        .map_err(|_| T::zero())?;
    let r = det.norm();
    if !(r > T::DEFAULT_SING_TOL) {
        return Err(r);
    }
    Ok(det / r)
}

/// Plaquette phases beyond this fraction of π are rejected as inadmissible.
pub const ADMISSIBLE_FRACTION: f64 = 0.99;

/// Lattice Chern number from link variables on a periodic frame grid.
///
/// With `U_μ(k) = link(k, k + μ̂)` and plaquette
/// `U_x(k)·U_y(k + x̂)·U_x(k + ŷ)⁻¹·U_y(k)⁻¹ ≈ exp(−i F_xy Δkx Δky)`, the
/// result is `C₁ = −(1/2π) Σ Arg(plaquette)`, which agrees in sign with
/// [`chern_direct`]. The sum is an integer up to round-off; it is checked and
/// returned exactly.
pub fn chern_lattice<T: Real>(frames: &FieldGrid<T, Frame<T>>) -> Result<ChernResult<T>> {
    let (nx, ny) = (frames.nx(), frames.ny());
    let singular = frames.singular_count();
    if singular > 0 {
        return Err(Error::CriticalRegion {
            singular,
            total: nx * ny,
        });
    }
    let v = |ix: usize, iy: usize| &frames.get(ix % nx, iy % ny).expect("no singular cells").vectors;
    let link = |ix: usize, iy: usize, dx: usize, dy: usize| {
        link_of(v(ix, iy), v(ix + dx, iy + dy)).map_err(|modulus| Error::VanishingLink {
            ix,
            iy,
            modulus: modulus.as_f64(),
        })
    };
    let mut ux = Vec::with_capacity(nx * ny);
    let mut uy = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            ux.push(link(ix, iy, 1, 0)?);
            uy.push(link(ix, iy, 0, 1)?);
        }
    }
    let at = |u: &Vec<Complex<T>>, ix: usize, iy: usize| u[(ix % nx) * ny + iy % ny];
    let limit = T::PI() * T::lit(ADMISSIBLE_FRACTION);
    let mut flux = T::zero();
    for ix in 0..nx {
        for iy in 0..ny {
            let p = at(&ux, ix, iy) * at(&uy, ix + 1, iy) * at(&ux, ix, iy + 1).conj() * at(&uy, ix, iy).conj();
            let phase = p.arg();
            if phase.abs() > limit {
                return Err(Error::Inadmissible {
                    ix,
                    iy,
                    phase: phase.as_f64(),
                });
            }
            flux += phase;
        }
    }
    let value = -flux / T::two_pi();
    let rounded = value.round();
    if (value - rounded).abs() > T::lit(1e-6).max(T::DEFAULT_TOL) {
        return Err(Error::NonIntegerChern { value: value.as_f64() });
    }
    Ok(ChernResult {
        value: rounded,
        integer: rounded.to_i64(),
        method: ChernMethod::Lattice,
        grid: (nx, ny),
        singular_cells: 0,
    })
}

/// Path-ordered parallel transport along a sequence of points.
#[derive(Clone, Debug, PartialEq)]
pub struct Holonomy<T> {
    /// n×n unitary in the gauge of the eigenframe at the first path point.
    pub unitary: CMatrix<T>,
    pub path: Vec<ParameterPoint<T>>,
    pub closed: bool,
}

impl<T: Real> Holonomy<T> {
    pub fn unitarity_deviation(&self) -> T {
        self.unitary.unitarity_deviation()
    }

    /// `arg det W`; for a single band this is the Berry phase `∮A`.
    pub fn berry_phase(&self) -> T {
        self.unitary.det().map(|d| d.arg()).unwrap_or(T::nan())
    }
}

/// Wilson loop `W = T_{L}···T_2·T_1` with `T_j = polar(V_{j+1}† V_j)` the
/// transport of frame coordinates from point `j` to point `j+1`.
///
/// For a closed path the segment from the last point back to the first is
/// appended, so `W` is the holonomy expressed in the first frame's gauge.
/// For a counter-clockwise loop of small area σ in the `(μ, ν)` plane,
/// `W ≈ 1 + i F_μν σ`.
pub fn wilson_loop<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    path: &[ParameterPoint<T>],
    subspace: &Subspace<T>,
    closed: bool,
) -> Result<Holonomy<T>> {
    if path.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "a Wilson loop needs at least 3 path points, got {}",
            path.len()
        )));
    }
    let frames = path
        .iter()
        .map(|p| eigenframe(family, p, subspace).map(|f| f.vectors))
        .collect::<Result<Vec<_>>>()?;
    let mut w = CMatrix::identity(subspace.n);
    let mut steps: Vec<(usize, usize)> = (0..path.len() - 1).map(|j| (j, j + 1)).collect();
    if closed {
        steps.push((path.len() - 1, 0));
    }
    for (a, b) in steps {
        let m = frames[b].adjoint_mul(&frames[a])?;
        let t = unitary_align(&m, T::DEFAULT_SING_TOL).map_err(|e| match e {
            LinalgError::Singular {
                smallest_singular_value,
            } => Error::SingularOverlap {
                point: path[b].to_f64_vec(),
                smallest_singular_value,
            },
            other => Error::Linalg(other),
        })?;
        w = &t * &w;
    }
    Ok(Holonomy {
        unitary: w,
        path: path.to_vec(),
        closed,
    })
}

/// Closed counter-clockwise square of the given side in the `(μ, ν)` plane,
/// starting at the midpoint of the `+μ` edge, `segments` steps per side.
pub fn square_loop<T: Real>(
    center: &ParameterPoint<T>,
    plane: (usize, usize),
    side: T,
    segments: usize,
) -> Vec<ParameterPoint<T>> {
    let segments = segments.max(1);
    let h = side * T::lit(0.5);
    let corners = [(h, T::zero()), (h, h), (-h, h), (-h, -h), (h, -h), (h, T::zero())];
    let mut out = Vec::new();
    for w in corners.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        // The first and last edges are half edges.
        let n = if x0 == x1 && (y0 == T::zero() || y1 == T::zero()) {
            segments.div_ceil(2)
        } else {
            segments
        };
        for s in 0..n {
            let t = T::from_usize_lossy(s) / T::from_usize_lossy(n);
            let x = x0 + (x1 - x0) * t;
            let y = y0 + (y1 - y0) * t;
            out.push(center.shifted(plane.0, x).shifted(plane.1, y));
        }
    }
    out
}

/// Open path: center → `+μ` edge midpoint → once around [`square_loop`] →
/// edge midpoint → center. Its transport is the square's holonomy expressed
/// in the eigenframe gauge at the center.
pub fn lollipop_loop<T: Real>(
    center: &ParameterPoint<T>,
    plane: (usize, usize),
    side: T,
    segments: usize,
) -> Vec<ParameterPoint<T>> {
    let mut path = vec![center.clone()];
    let square = square_loop(center, plane, side, segments);
    path.extend(square.iter().cloned());
    path.push(square[0].clone());
    path.push(center.clone());
    path
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallLoop<T> {
    pub side: T,
    pub area: T,
    /// `‖(W − 1)/σ − i F_μν‖_F`.
    pub residual: T,
    /// `‖W − 1‖_F`.
    pub deviation: T,
    pub holonomy: Holonomy<T>,
}

/// Compares the holonomy of a small square with the curvature at its center.
pub fn small_loop_check<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    center: &ParameterPoint<T>,
    subspace: &Subspace<T>,
    side: T,
    plane: (usize, usize),
    segments: usize,
    opts: &QgtOptions<T>,
) -> Result<SmallLoop<T>> {
    if plane.0 == plane.1 {
        return Err(Error::InvalidInput("loop plane needs two distinct directions".into()));
    }
    if !(side > T::zero()) {
        return Err(Error::InvalidInput("loop side must be positive".into()));
    }
    let opts = QgtOptions {
        directions: Directions::Custom(vec![plane.0, plane.1]),
        ..opts.clone()
    };
    let q = qgt_point(family, center, subspace, &opts)?;
    let f = q.f(0, 1);
    let path = lollipop_loop(center, plane, side, segments);
    let holonomy = wilson_loop(family, &path, subspace, false)?;
    let area = side * side;
    let w_minus_one = &holonomy.unitary - &CMatrix::identity(subspace.n);
    let i = Complex::new(T::zero(), T::one());
    let residual = (&w_minus_one.scale_real(T::one() / area) - &f.scale(i)).fro_norm();
    Ok(SmallLoop {
        side,
        area,
        residual,
        deviation: w_minus_one.fro_norm(),
        holonomy,
    })
}

/// Identity for every `n`; convenient for reporting.
pub fn identity_holonomy<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::from_fn(n, n, |i, j| if i == j { Complex::one() } else { Complex::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{frame_grid, qgt_grid, GridSpec};
    use crate::models::{qwz, ConstantFamily, DoubledFamily};
    use std::f64::consts::PI;

    fn pt(kx: f64, ky: f64, m: f64) -> ParameterPoint<f64> {
        ParameterPoint::momentum(kx, ky, &[m])
    }

    fn lattice(m: f64, n: usize) -> i64 {
        let frames = frame_grid(&qwz(), &GridSpec::square(n, &[m]), &Subspace::lowest(1)).unwrap();
        chern_lattice(&frames).unwrap().integer.unwrap()
    }

    #[test]
    fn lattice_phase_diagram() {
        assert_eq!(lattice(-1.0, 24), 1);
        assert_eq!(lattice(1.0, 24), -1);
        assert_eq!(lattice(3.0, 24), 0);
        assert_eq!(lattice(-3.0, 24), 0);
    }

    #[test]
    fn direct_phase_diagram() {
        for (m, c) in [(1.0f64, -1.0f64), (3.0, 0.0), (-1.0, 1.0)] {
            let field = qgt_grid(&qwz(), &GridSpec::square(32, &[m]), &Subspace::lowest(1), &QgtOptions::default())
                .unwrap();
            let r = chern_direct(&field).unwrap();
            assert!((r.value - c).abs() < 0.05, "m={m}: {}", r.value);
        }
    }

    #[test]
    fn constant_family_chern_is_zero() {
        let f = ConstantFamily::<f64>::two_level();
        let spec = GridSpec::square(8, &[0.0]);
        let field = qgt_grid(&f, &spec, &Subspace::lowest(1), &QgtOptions::default()).unwrap();
        assert_eq!(chern_direct(&field).unwrap().value, 0.0);
        let frames = frame_grid(&f, &spec, &Subspace::lowest(1)).unwrap();
        assert_eq!(chern_lattice(&frames).unwrap().integer, Some(0));
    }

    #[test]
    fn critical_grid_is_rejected() {
        // Two of the sixteen cells sit on gap closings at m = 0.
        let field = qgt_grid(&qwz(), &GridSpec::square(4, &[0.0]), &Subspace::lowest(1), &QgtOptions::default())
            .unwrap();
        assert_eq!(field.singular_count(), 2);
        assert!(matches!(chern_direct(&field), Err(Error::CriticalRegion { .. })));
        let frames = frame_grid(&qwz(), &GridSpec::square(4, &[2.0]), &Subspace::lowest(1)).unwrap();
        assert!(matches!(chern_lattice(&frames), Err(Error::CriticalRegion { .. })));
    }

    #[test]
    fn link_examples() {
        let f = DoubledFamily::<f64>::with_default_mix();
        let s = Subspace::lowest(2);
        let a = eigenframe(&f, &pt(0.4, 1.0, 1.0), &s).unwrap();
        assert!((link_variable(&a, &a).unwrap() - Complex::one()).norm() < 1e-14);
        let w = CMatrix::from_rows(&[
            vec![Complex::from_polar(1.0, 0.3), Complex::zero()],
            vec![Complex::zero(), Complex::from_polar(1.0, 1.1)],
        ]);
        let l = link_variable(&a, &a.rotated(&w)).unwrap();
        assert!((l - Complex::from_polar(1.0, 1.4)).norm() < 1e-14);
        let b = eigenframe(&f, &pt(2.0, 5.0, 1.0), &s).unwrap();
        assert!((link_variable(&a, &b).unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn doubled_lattice_chern_is_twice_abelian() {
        let f = DoubledFamily::<f64>::with_default_mix();
        let frames = frame_grid(&f, &GridSpec::square(24, &[1.0]), &Subspace::lowest(2)).unwrap();
        assert_eq!(chern_lattice(&frames).unwrap().integer, Some(-2));
    }

    #[test]
    fn reversed_grid_orientation_flips_sign() {
        let frames = frame_grid(&qwz(), &GridSpec::square(16, &[1.0]), &Subspace::lowest(1)).unwrap();
        let mut mirrored = frames.clone();
        let n = 16;
        for ix in 0..n {
            for iy in 0..n {
                mirrored.values[ix * n + iy] = frames.values[ix * n + (n - iy) % n].clone();
            }
        }
        assert_eq!(chern_lattice(&mirrored).unwrap().integer, Some(1));
    }

    #[test]
    fn trivial_loops_are_identity() {
        let f = qwz();
        let s = Subspace::lowest(1);
        let p = pt(1.0, 0.5, 1.0);
        let w = wilson_loop(&f, &[p.clone(), p.clone(), p.clone()], &s, true).unwrap();
        assert!(w.unitary.distance(&CMatrix::identity(1)) < 1e-15);
        let b = pt(1.3, 0.7, 1.0);
        let w = wilson_loop(&f, &[p.clone(), b, p], &s, false).unwrap();
        assert!(w.unitary.distance(&CMatrix::identity(1)) < 1e-10);
        assert!(wilson_loop(&f, &[pt(0.0, 0.0, 1.0)], &s, true).is_err());
    }

    #[test]
    fn berry_phase_matches_link_product() {
        let f = qwz();
        let s = Subspace::lowest(1);
        let n = 200;
        let path: Vec<_> = (0..n).map(|i| pt(2.0 * PI * i as f64 / n as f64, 0.7, 1.0)).collect();
        let w = wilson_loop(&f, &path, &s, true).unwrap();
        let frames: Vec<_> = path.iter().map(|p| eigenframe(&f, p, &s).unwrap()).collect();
        let mut prod = Complex::<f64>::one();
        for i in 0..n {
            prod *= link_variable(&frames[i], &frames[(i + 1) % n]).unwrap();
        }
        // W = Π conj(links): the Berry phase is −Arg Π links.
        let diff = (w.berry_phase() + prod.arg()).rem_euclid(2.0 * PI);
        assert!(diff.min(2.0 * PI - diff) < 1e-8, "{diff}");
    }

    #[test]
    fn reversing_a_loop_takes_the_adjoint() {
        let f = DoubledFamily::<f64>::with_default_mix();
        let s = Subspace::lowest(2);
        let path = square_loop(&pt(1.0, 2.0, 1.0), (0, 1), 0.8, 6);
        let mut rev = vec![path[0].clone()];
        rev.extend(path[1..].iter().rev().cloned());
        let w = wilson_loop(&f, &path, &s, true).unwrap();
        let wr = wilson_loop(&f, &rev, &s, true).unwrap();
        assert!(wr.unitary.distance(&w.unitary.adjoint()) < 1e-12);
        assert!(w.unitarity_deviation() < 1e-12);
        assert!(w.unitary.distance(&CMatrix::identity(2)) > 1e-3);
    }

    #[test]
    fn long_loops_stay_unitary() {
        let f = DoubledFamily::<f64>::with_default_mix();
        let s = Subspace::lowest(2);
        let n = 10_000;
        let path: Vec<_> = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                pt(1.0 + 0.9 * t.cos(), 2.0 + 0.9 * t.sin(), 1.0)
            })
            .collect();
        assert!(wilson_loop(&f, &path, &s, true).unwrap().unitarity_deviation() < 1e-8);
    }

    #[test]
    fn small_loop_residual_shrinks() {
        let f = qwz();
        let s = Subspace::lowest(1);
        let c = pt(1.0, 0.5, 1.0);
        let opts = QgtOptions::default();
        let r: Vec<_> = [1e-1, 5e-2, 2.5e-2]
            .iter()
            .map(|&side| small_loop_check(&f, &c, &s, side, (0, 1), 4, &opts).unwrap())
            .collect();
        assert!(r[0].residual > r[1].residual && r[1].residual > r[2].residual);
        // (W − 1) is dominated by iFσ, so halving the side quarters it.
        let ratio = r[0].deviation / r[1].deviation;
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
        let k = small_loop_check(&ConstantFamily::two_level(), &c, &s, 0.1, (0, 1), 4, &opts).unwrap();
        assert_eq!(k.residual, 0.0);
    }

    #[test]
    fn small_loop_at_gap_closing_fails_cleanly() {
        let r = small_loop_check(&qwz(), &pt(PI, PI, 2.0), &Subspace::lowest(1), 0.1, (0, 1), 4, &QgtOptions::default());
        assert!(matches!(r, Err(Error::SingularPoint { .. })));
    }
}
