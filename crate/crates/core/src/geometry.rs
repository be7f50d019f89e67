//! Quantum geometric tensor of an eigensubspace.
//!
//! For a frame `V` (N×n, orthonormal columns) spanning the tracked subspace,
//! `Q_μν = D_μ† (1 − P) D_ν` with `P = V V†` and `D_μ` the central-difference
//! derivative of the frame in the parallel-transport gauge. Its Hermitian
//! part is the metric `g`, and `F = i(Q − Q†)` is the Berry (Wilczek-Zee)
//! curvature.
//!
//! Gauge-invariant traces are computed a second way, from projectors alone:
//! `Tr Q_μν = Tr(P ∂_μP (1 − P) ∂_νP)`. That route never touches a frame
//! phase, so `Tr g`, `Tr F` and everything derived from them are exactly
//! independent of the frame a caller supplies.

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, unitary_align, CMatrix, LinalgError};
use crate::models::{DGradient, DVector, HamiltonianFamily, ParameterPoint};
use crate::scalar::Real;

/// Contiguous band range `[start, start + n)` of the sorted spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<T> {
    pub start: usize,
    pub n: usize,
    /// A boundary gap at or below this marks the point singular.
    pub gap_tol: T,
    /// When set, the subspace must be degenerate: `E[start+n−1] − E[start]` may not exceed it.
    pub degeneracy_tol: Option<T>,
}

impl<T: Real> Subspace<T> {
    pub fn new(start: usize, n: usize) -> Self {
        Self {
            start,
            n,
            gap_tol: T::DEFAULT_GAP_TOL,
            degeneracy_tol: None,
        }
    }

    /// The `n` lowest bands.
    pub fn lowest(n: usize) -> Self {
        Self::new(0, n)
    }

    pub fn with_gap_tol(mut self, tol: T) -> Self {
        self.gap_tol = tol;
        self
    }

    pub fn with_degeneracy_tol(mut self, tol: T) -> Self {
        self.degeneracy_tol = Some(tol);
        self
    }

    pub fn end(&self) -> usize {
        self.start + self.n
    }

    pub fn check(&self, dim: usize) -> Result<()> {
        if self.n == 0 || self.end() > dim {
            return Err(Error::InvalidSubspace(format!(
                "bands {}..{} do not fit a {dim}-dimensional Hilbert space",
                self.start,
                self.end()
            )));
        }
        Ok(())
    }
}

/// Orthonormal basis of the tracked subspace at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<T> {
    pub vectors: CMatrix<T>,
    pub point: ParameterPoint<T>,
}

fn orthonormality_tol<T: Real>() -> T {
    T::DEFAULT_TOL.sqrt() * T::lit(1e-2)
}

impl<T: Real> Frame<T> {
    pub fn new(vectors: CMatrix<T>, point: ParameterPoint<T>) -> Result<Self> {
        let dev = vectors.unitarity_deviation();
        if !(dev <= orthonormality_tol::<T>()) {
            return Err(Error::InvalidInput(format!(
                "frame columns are not orthonormal (deviation {:e})",
                dev.as_f64()
            )));
        }
        Ok(Self { vectors, point })
    }

    /// Subspace dimension.
    pub fn n(&self) -> usize {
        self.vectors.cols()
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    /// Same subspace, basis right-multiplied by the unitary `w`.
    pub fn rotated(&self, w: &CMatrix<T>) -> Self {
        Self {
            vectors: &self.vectors * w,
            point: self.point.clone(),
        }
    }
}

/// `P = V·V†`.
pub fn projector<T: Real>(frame: &Frame<T>) -> CMatrix<T> {
    projector_of(&frame.vectors)
}

fn projector_of<T: Real>(v: &CMatrix<T>) -> CMatrix<T> {
    v * &v.adjoint()
}

/// Eigenframe of the subspace in whatever gauge the eigensolver returns.
pub fn eigenframe<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    point: &ParameterPoint<T>,
    subspace: &Subspace<T>,
) -> Result<Frame<T>> {
    let dim = family.dim();
    subspace.check(dim)?;
    let h = family.evaluate(point)?;
    let eig = eig_hermitian(&h, T::DEFAULT_TOL)?;
    let mut gap = T::infinity();
    if subspace.start > 0 {
        gap = gap.min(eig.values[subspace.start] - eig.values[subspace.start - 1]);
    }
    if subspace.end() < dim {
        gap = gap.min(eig.values[subspace.end()] - eig.values[subspace.end() - 1]);
    }
    if gap <= subspace.gap_tol {
        return Err(Error::SingularPoint {
            point: point.to_f64_vec(),
            gap: gap.as_f64(),
        });
    }
    if let Some(tol) = subspace.degeneracy_tol {
        let spread = eig.values[subspace.end() - 1] - eig.values[subspace.start];
        if spread > tol {
            return Err(Error::NotDegenerate {
                point: point.to_f64_vec(),
                spread: spread.as_f64(),
                tolerance: tol.as_f64(),
            });
        }
    }
    Ok(Frame {
        vectors: eig.vectors.columns(subspace.start, subspace.n),
        point: point.clone(),
    })
}

/// `raw · U†` with `U` the unitary polar factor of `reference† · raw`, so that
/// the overlap with the reference becomes positive definite.
fn align_to<T: Real>(
    raw: &CMatrix<T>,
    reference: &CMatrix<T>,
    sing_tol: T,
    point: &ParameterPoint<T>,
) -> Result<CMatrix<T>> {
    let m = reference.adjoint_mul(raw)?;
    let u = unitary_align(&m, sing_tol).map_err(|e| match e {
        LinalgError::Singular {
            smallest_singular_value,
        } => Error::SingularOverlap {
            point: point.to_f64_vec(),
            smallest_singular_value,
        },
        other => Error::Linalg(other),
    })?;
    Ok(raw * &u.adjoint())
}

/// Eigenframe at `point` in the parallel-transport gauge relative to `reference`.
pub fn aligned_frame<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    point: &ParameterPoint<T>,
    reference: &Frame<T>,
    subspace: &Subspace<T>,
) -> Result<Frame<T>> {
    let raw = eigenframe(family, point, subspace)?;
    if raw.vectors.shape() != reference.vectors.shape() {
        return Err(Error::InvalidInput(format!(
            "reference frame has shape {:?}, subspace frame has {:?}",
            reference.vectors.shape(),
            raw.vectors.shape()
        )));
    }
    let vectors = align_to(&raw.vectors, &reference.vectors, T::DEFAULT_SING_TOL, point)?;
    Ok(Frame {
        vectors,
        point: point.clone(),
    })
}

/// `(V(λ + h·e_μ) − V(λ − h·e_μ)) / 2h`, both neighbours aligned to the
/// eigenframe at `point`.
pub fn frame_derivative<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    point: &ParameterPoint<T>,
    direction: usize,
    step: T,
    subspace: &Subspace<T>,
) -> Result<CMatrix<T>> {
    let center = eigenframe(family, point, subspace)?;
    let plus = aligned_frame(family, &point.shifted(direction, step), &center, subspace)?;
    let minus = aligned_frame(family, &point.shifted(direction, -step), &center, subspace)?;
    Ok((&plus.vectors - &minus.vectors).scale_real(T::one() / (step + step)))
}

/// Which coordinates act as tensor directions.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Directions {
    /// The periodic momenta only.
    #[default]
    Periodic,
    /// Periodic and external coordinates.
    All,
    Custom(Vec<usize>),
}

impl Directions {
    pub fn resolve<T: Real, F: HamiltonianFamily<T> + ?Sized>(&self, family: &F) -> Result<Vec<usize>> {
        let total = family.n_periodic() + family.n_external();
        let dirs: Vec<usize> = match self {
            Directions::Periodic => (0..family.n_periodic()).collect(),
            Directions::All => (0..total).collect(),
            Directions::Custom(v) => v.clone(),
        };
        if dirs.is_empty() {
            return Err(Error::InvalidInput("no tensor directions selected".into()));
        }
        for (i, &d) in dirs.iter().enumerate() {
            if d >= total {
                return Err(Error::InvalidInput(format!(
                    "direction {d} out of range for {total} coordinates"
                )));
            }
            if dirs[..i].contains(&d) {
                return Err(Error::InvalidInput(format!("direction {d} listed twice")));
            }
        }
        Ok(dirs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QgtOptions<T> {
    /// Central-difference step.
    pub step: T,
    pub directions: Directions,
    /// Smallest admissible singular value of a neighbour overlap.
    pub sing_tol: T,
}

impl<T: Real> Default for QgtOptions<T> {
    fn default() -> Self {
        Self {
            step: T::DEFAULT_STEP,
            directions: Directions::Periodic,
            sing_tol: T::DEFAULT_SING_TOL,
        }
    }
}

impl<T: Real> QgtOptions<T> {
    pub fn with_step(mut self, step: T) -> Self {
        self.step = step;
        self
    }

    pub fn with_directions(mut self, directions: Directions) -> Self {
        self.directions = directions;
        self
    }
}

/// QGT over a set of directions. Pair `(a, b)` indexes `directions`.
#[derive(Clone, Debug, PartialEq)]
pub struct QGTensor<T> {
    /// Subspace dimension.
    pub n: usize,
    /// Coordinate index of each tensor direction.
    pub directions: Vec<usize>,
    /// `Q_ab` as n×n matrices, row-major over pairs.
    pub q: Vec<CMatrix<T>>,
    /// `Tr Q_ab` from the projector route.
    pub trace_q: Vec<Complex<T>>,
}

impl<T: Real> QGTensor<T> {
    /// Tensor whose traces are taken from the matrices themselves.
    pub fn from_matrices(n: usize, directions: Vec<usize>, q: Vec<CMatrix<T>>) -> Self {
        let trace_q = q.iter().map(|m| m.trace().expect("square")).collect();
        Self {
            n,
            directions,
            q,
            trace_q,
        }
    }

    pub fn zeros(n: usize, directions: Vec<usize>) -> Self {
        let d = directions.len();
        Self::from_matrices(n, directions, vec![CMatrix::zeros(n, n); d * d])
    }

    /// Number of tensor directions.
    pub fn rank(&self) -> usize {
        self.directions.len()
    }

    /// Position of a coordinate among the tensor directions.
    pub fn position(&self, coordinate: usize) -> Option<usize> {
        self.directions.iter().position(|&d| d == coordinate)
    }

    pub fn q(&self, a: usize, b: usize) -> &CMatrix<T> {
        &self.q[a * self.rank() + b]
    }

    /// `g_ab = (Q_ab + Q_ab†)/2`.
    pub fn g(&self, a: usize, b: usize) -> CMatrix<T> {
        let q = self.q(a, b);
        (q + &q.adjoint()).scale_real(T::lit(0.5))
    }

    /// `F_ab = i(Q_ab − Q_ab†)`.
    pub fn f(&self, a: usize, b: usize) -> CMatrix<T> {
        let q = self.q(a, b);
        (q - &q.adjoint()).scale(Complex::new(T::zero(), T::one()))
    }

    pub fn trace_q(&self, a: usize, b: usize) -> Complex<T> {
        self.trace_q[a * self.rank() + b]
    }

    /// `Tr g_ab`.
    pub fn tr_g(&self, a: usize, b: usize) -> T {
        self.trace_q(a, b).re
    }

    /// `Tr F_ab = −2 Im Tr Q_ab`.
    pub fn tr_f(&self, a: usize, b: usize) -> T {
        -(self.trace_q(a, b).im + self.trace_q(a, b).im)
    }

    /// `max_ab ‖Q_ba − Q_ab†‖_F`.
    pub fn hermiticity_residual(&self) -> T {
        let d = self.rank();
        let mut worst = T::zero();
        for a in 0..d {
            for b in 0..d {
                worst = worst.max(self.q(b, a).distance(&self.q(a, b).adjoint()));
            }
        }
        worst
    }

    /// Real symmetric matrix `[Tr g_ab]`.
    pub fn metric_matrix(&self) -> Vec<Vec<T>> {
        let d = self.rank();
        (0..d).map(|a| (0..d).map(|b| self.tr_g(a, b)).collect()).collect()
    }

    /// `Σ_ab Tr g_ab u^a u^b`.
    pub fn metric_form(&self, u: &[T]) -> T {
        let d = self.rank();
        let mut acc = T::zero();
        for a in 0..d {
            for b in 0..d {
                acc += self.tr_g(a, b) * u[a] * u[b];
            }
        }
        acc
    }

    /// Conjugates every matrix by the unitary `w`: `Q ↦ w† Q w`.
    pub fn conjugated(&self, w: &CMatrix<T>) -> Self {
        let q = self.q.iter().map(|m| &w.adjoint() * &(m * w)).collect();
        Self {
            n: self.n,
            directions: self.directions.clone(),
            q,
            trace_q: self.trace_q.clone(),
        }
    }
}

struct Stencil<T> {
    center: CMatrix<T>,
    plus: Vec<CMatrix<T>>,
    minus: Vec<CMatrix<T>>,
}

fn stencil<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    point: &ParameterPoint<T>,
    center: CMatrix<T>,
    subspace: &Subspace<T>,
    dirs: &[usize],
    step: T,
) -> Result<Stencil<T>> {
    let mut plus = Vec::with_capacity(dirs.len());
    let mut minus = Vec::with_capacity(dirs.len());
    for &d in dirs {
        plus.push(eigenframe(family, &point.shifted(d, step), subspace)?.vectors);
        minus.push(eigenframe(family, &point.shifted(d, -step), subspace)?.vectors);
    }
    Ok(Stencil {
        center,
        plus,
        minus,
    })
}

fn evaluate_stencil<T: Real>(
    frame: &Frame<T>,
    st: &Stencil<T>,
    dirs: Vec<usize>,
    opts: &QgtOptions<T>,
) -> Result<QGTensor<T>> {
    let d = dirs.len();
    let v = &frame.vectors;
    let inv = T::one() / (opts.step + opts.step);
    let point = &frame.point;

    // Frame route: covariant derivatives with (1 − P) applied.
    let mut dperp = Vec::with_capacity(d);
    for a in 0..d {
        let p = align_to(&st.plus[a], v, opts.sing_tol, &point.shifted(dirs[a], opts.step))?;
        let m = align_to(&st.minus[a], v, opts.sing_tol, &point.shifted(dirs[a], -opts.step))?;
        let deriv = (&p - &m).scale_real(inv);
        let inside = v * &v.adjoint_mul(&deriv)?;
        dperp.push(&deriv - &inside);
    }
    let mut q = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            q.push(dperp[a].adjoint_mul(&dperp[b])?);
        }
    }

    // Projector route: Tr(P ∂_aP (1 − P) ∂_bP).
    let p0 = projector_of(&st.center);
    let dp: Vec<CMatrix<T>> = (0..d)
        .map(|a| (&projector_of(&st.plus[a]) - &projector_of(&st.minus[a])).scale_real(inv))
        .collect();
    let left: Vec<CMatrix<T>> = dp.iter().map(|x| &p0 * x).collect();
    let right: Vec<CMatrix<T>> = dp.iter().map(|x| x - &(&p0 * x)).collect();
    let mut trace_q = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            trace_q.push(trace_of_product(&left[a], &right[b]));
        }
    }
    Ok(QGTensor {
        n: v.cols(),
        directions: dirs,
        q,
        trace_q,
    })
}

/// `Tr(A·B)` without forming the product.
fn trace_of_product<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Complex<T> {
    let n = a.rows();
    let mut acc = Complex::zero();
    for i in 0..n {
        for k in 0..a.cols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// QGT at the frame's point with the matrices expressed in the frame's gauge.
///
/// Rotating the frame by a unitary `W` conjugates every `Q_μν` by `W`; the
/// trace fields do not change at all.
pub fn qgt_at_frame<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    frame: &Frame<T>,
    subspace: &Subspace<T>,
    opts: &QgtOptions<T>,
) -> Result<QGTensor<T>> {
    if frame.n() != subspace.n || frame.dim() != family.dim() {
        return Err(Error::InvalidInput(format!(
            "frame shape {:?} does not match a {}-dimensional family with subspace size {}",
            frame.vectors.shape(),
            family.dim(),
            subspace.n
        )));
    }
    let dirs = opts.directions.resolve(family)?;
    let center = eigenframe(family, &frame.point, subspace)?.vectors;
    let st = stencil(family, &frame.point, center, subspace, &dirs, opts.step)?;
    evaluate_stencil(frame, &st, dirs, opts)
}

/// QGT at a point, in the gauge of the eigensolver's frame there.
pub fn qgt_point<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    point: &ParameterPoint<T>,
    subspace: &Subspace<T>,
    opts: &QgtOptions<T>,
) -> Result<QGTensor<T>> {
    let dirs = opts.directions.resolve(family)?;
    let frame = eigenframe(family, point, subspace)?;
    let st = stencil(family, point, frame.vectors.clone(), subspace, &dirs, opts.step)?;
    evaluate_stencil(&frame, &st, dirs, opts)
}

/// Closed-form two-band QGT of the lower band in terms of the Bloch angles:
///
/// `Q_μν = (∂_μθ ∂_νθ + sin²θ ∂_μΦ ∂_νΦ)/4 + (i/4) sinθ (∂_μΦ ∂_νθ − ∂_νΦ ∂_μθ)`,
///
/// with `θ = arccos(d3/|d|)`, `Φ = atan2(d2, d1)` and their gradients obtained
/// from `grad[μ][α] = ∂_μ d_α` by the chain rule. Directions are the two momenta.
pub fn qgt_analytic_twoband<T: Real>(d: &DVector<T>, grad: &DGradient<T>, gap_tol: T) -> Result<QGTensor<T>> {
    let r = d.norm();
    if r <= gap_tol {
        return Err(Error::SingularPoint {
            point: Vec::new(),
            gap: (r + r).as_f64(),
        });
    }
    let rho2 = d.d1 * d.d1 + d.d2 * d.d2;
    let rho = rho2.sqrt();
    if rho <= gap_tol {
        return Err(Error::ChartPole { point: Vec::new() });
    }
    let r2 = r * r;
    let mut dtheta = [T::zero(); 2];
    let mut dphi = [T::zero(); 2];
    for mu in 0..2 {
        let [g1, g2, g3] = grad[mu];
        let drho = (d.d1 * g1 + d.d2 * g2) / rho;
        dtheta[mu] = (d.d3 * drho - rho * g3) / r2;
        dphi[mu] = (d.d1 * g2 - d.d2 * g1) / rho2;
    }
    let sin_theta = rho / r;
    let quarter = T::lit(0.25);
    let mut q = Vec::with_capacity(4);
    for mu in 0..2 {
        for nu in 0..2 {
            let re = (dtheta[mu] * dtheta[nu] + sin_theta * sin_theta * dphi[mu] * dphi[nu]) * quarter;
            let im = sin_theta * (dphi[mu] * dtheta[nu] - dphi[nu] * dtheta[mu]) * quarter;
            q.push(CMatrix::column_vector(&[Complex::new(re, im)]));
        }
    }
    Ok(QGTensor::from_matrices(1, vec![0, 1], q))
}

/// Closed-form QGT of a two-band `d`-vector model at a point.
pub fn qgt_analytic<T: Real, M: crate::models::DVectorModel<T> + ?Sized>(
    model: &M,
    point: &ParameterPoint<T>,
    gap_tol: T,
) -> Result<QGTensor<T>> {
    let d = model.d_vector(point)?;
    let grad = model.d_gradient(point)?;
    qgt_analytic_twoband(&d, &grad, gap_tol).map_err(|e| match e {
        Error::SingularPoint { gap, .. } => Error::SingularPoint {
            point: point.to_f64_vec(),
            gap,
        },
        Error::ChartPole { .. } => Error::ChartPole {
            point: point.to_f64_vec(),
        },
        other => other,
    })
}

/// Uniform grid on the momentum 2-torus at fixed external parameters.
///
/// Cell `(ix, iy)` sits at `k = 2π·((ix + ox)/nx, (iy + oy)/ny)`. The default
/// offset 0 places grid points on the time-reversal-invariant momenta; an
/// offset of 0.5 samples cell centres instead.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<T> {
    pub nx: usize,
    pub ny: usize,
    pub offset: (T, T),
    pub external: Vec<T>,
}

impl<T: Real> GridSpec<T> {
    pub fn new(nx: usize, ny: usize, external: Vec<T>) -> Self {
        Self {
            nx,
            ny,
            offset: (T::zero(), T::zero()),
            external,
        }
    }

    pub fn square(n: usize, external: &[T]) -> Self {
        Self::new(n, n, external.to_vec())
    }

    pub fn with_offset(mut self, ox: T, oy: T) -> Self {
        self.offset = (ox, oy);
        self
    }

    pub fn spacing(&self) -> (T, T) {
        (
            T::two_pi() / T::from_usize_lossy(self.nx),
            T::two_pi() / T::from_usize_lossy(self.ny),
        )
    }

    pub fn cell_area(&self) -> T {
        let (dx, dy) = self.spacing();
        dx * dy
    }

    pub fn point(&self, ix: usize, iy: usize) -> ParameterPoint<T> {
        let (dx, dy) = self.spacing();
        ParameterPoint::momentum(
            dx * (T::from_usize_lossy(ix) + self.offset.0),
            dy * (T::from_usize_lossy(iy) + self.offset.1),
            &self.external,
        )
    }

    pub fn check(&self) -> Result<()> {
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::InvalidInput(format!(
                "grid {}x{} is too small; both sizes must be at least 4",
                self.nx, self.ny
            )));
        }
        Ok(())
    }
}

/// Fraction of singular cells above which a grid is flagged as critical.
pub const CRITICAL_FRACTION: f64 = 0.1;

/// Per-cell values on a [`GridSpec`]; `None` marks a singular cell.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid<T, V> {
    pub spec: GridSpec<T>,
    /// Row-major over `ix`, index `ix * ny + iy`.
    pub values: Vec<Option<V>>,
}

impl<T: Real, V> FieldGrid<T, V> {
    pub fn nx(&self) -> usize {
        self.spec.nx
    }

    pub fn ny(&self) -> usize {
        self.spec.ny
    }

    pub fn spacing(&self) -> (T, T) {
        self.spec.spacing()
    }

    pub fn get(&self, ix: usize, iy: usize) -> Option<&V> {
        self.values[ix * self.spec.ny + iy].as_ref()
    }

    pub fn is_singular(&self, ix: usize, iy: usize) -> bool {
        self.get(ix, iy).is_none()
    }

    pub fn singular_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn singular_fraction(&self) -> f64 {
        self.singular_count() as f64 / self.values.len() as f64
    }

    /// Message when at least [`CRITICAL_FRACTION`] of the cells are singular.
    pub fn critical_warning(&self) -> Option<String> {
        (self.singular_fraction() >= CRITICAL_FRACTION).then(|| {
            format!(
                "{} of {} cells are singular; the model is likely at criticality",
                self.singular_count(),
                self.values.len()
            )
        })
    }

    /// `(ix, iy, value)` in index order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Option<&V>)> + '_ {
        let ny = self.spec.ny;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (i / ny, i % ny, v.as_ref()))
    }
}

fn is_singular_error(e: &Error) -> bool {
    matches!(
        e,
        Error::SingularPoint { .. } | Error::SingularOverlap { .. } | Error::ChartPole { .. }
    )
}

/// Evaluates `cell` on every grid point in parallel. Singular-point,
/// singular-overlap and chart-pole failures mark the cell singular; any other
/// error aborts. The output order, and hence every downstream reduction, does
/// not depend on the number of worker threads.
pub fn evaluate_grid<T, V, C>(spec: &GridSpec<T>, cell: C) -> Result<FieldGrid<T, V>>
where
    T: Real,
    V: Send,
    C: Fn(usize, usize, &ParameterPoint<T>) -> Result<V> + Sync,
{
    spec.check()?;
    let ny = spec.ny;
    let results: Vec<Result<Option<V>>> = (0..spec.nx * ny)
        .into_par_iter()
        .map(|i| {
            let (ix, iy) = (i / ny, i % ny);
            match cell(ix, iy, &spec.point(ix, iy)) {
                Ok(v) => Ok(Some(v)),
                Err(e) if is_singular_error(&e) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let values = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(FieldGrid {
        spec: spec.clone(),
        values,
    })
}

pub fn qgt_grid<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    spec: &GridSpec<T>,
    subspace: &Subspace<T>,
    opts: &QgtOptions<T>,
) -> Result<FieldGrid<T, QGTensor<T>>> {
    evaluate_grid(spec, |_, _, p| qgt_point(family, p, subspace, opts))
}

/// Like [`qgt_grid`], with each cell's eigenframe passed through `gauge`
/// before the tensor is evaluated.
pub fn qgt_grid_gauged<T, F, G>(
    family: &F,
    spec: &GridSpec<T>,
    subspace: &Subspace<T>,
    opts: &QgtOptions<T>,
    gauge: G,
) -> Result<FieldGrid<T, QGTensor<T>>>
where
    T: Real,
    F: HamiltonianFamily<T> + ?Sized,
    G: Fn(usize, usize, Frame<T>) -> Frame<T> + Sync,
{
    evaluate_grid(spec, |ix, iy, p| {
        let frame = gauge(ix, iy, eigenframe(family, p, subspace)?);
        qgt_at_frame(family, &frame, subspace, opts)
    })
}

pub fn frame_grid<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    spec: &GridSpec<T>,
    subspace: &Subspace<T>,
) -> Result<FieldGrid<T, Frame<T>>> {
    evaluate_grid(spec, |_, _, p| eigenframe(family, p, subspace))
}

/// Closed-form QGT on a grid; gap closings and chart poles are singular cells.
pub fn analytic_grid<T: Real, M: crate::models::DVectorModel<T> + ?Sized>(
    model: &M,
    spec: &GridSpec<T>,
    gap_tol: T,
) -> Result<FieldGrid<T, QGTensor<T>>> {
    evaluate_grid(spec, |_, _, p| qgt_analytic(model, p, gap_tol))
}
