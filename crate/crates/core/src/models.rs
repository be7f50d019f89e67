//! Parameterized Hamiltonian families.
//!
//! A family maps a [`ParameterPoint`] (periodic momenta plus external
//! parameters such as a mass `m`) to a Hermitian matrix. Provided here:
//!
//! * the Qi-Wu-Zhang two-band model `d = (sin kx, sin ky, m + cos kx + cos ky)`,
//! * generic two-band `d`-vector models, including tabulated ones read from CSV,
//! * a four-band family with an exactly two-fold degenerate lower band built
//!   from two copies of the two-band model and a momentum-dependent unitary mix,
//! * constant families, useful as a null model.

use std::io::Read;
use std::path::Path;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, CMatrix};
use crate::scalar::Real;

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let tau = T::two_pi();
    let mut r = x % tau;
    if r < T::zero() {
        r += tau;
    }
    if r >= tau {
        r -= tau;
    }
    r
}

/// Position on the parameter manifold.
///
/// Periodic coordinates live on the momentum torus and are reduced into
/// `[0, 2π)` on construction; external coordinates are unconstrained.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterPoint<T> {
    k: Vec<T>,
    external: Vec<T>,
}

impl<T: Real> ParameterPoint<T> {
    pub fn new(k: Vec<T>, external: Vec<T>) -> Self {
        Self {
            k: k.into_iter().map(wrap_angle).collect(),
            external,
        }
    }

    /// Two-dimensional momentum with the given external parameters.
    pub fn momentum(kx: T, ky: T, external: &[T]) -> Self {
        Self::new(vec![kx, ky], external.to_vec())
    }

    pub fn k(&self) -> &[T] {
        &self.k
    }

    pub fn external(&self) -> &[T] {
        &self.external
    }

    /// Total coordinate count: periodic first, then external.
    pub fn dim(&self) -> usize {
        self.k.len() + self.external.len()
    }

    pub fn coordinate(&self, index: usize) -> T {
        if index < self.k.len() {
            self.k[index]
        } else {
            self.external[index - self.k.len()]
        }
    }

    /// Copy displaced by `delta` along coordinate `index`.
    pub fn shifted(&self, index: usize, delta: T) -> Self {
        let mut out = self.clone();
        if index < out.k.len() {
            out.k[index] = wrap_angle(out.k[index] + delta);
        } else {
            out.external[index - self.k.len()] += delta;
        }
        out
    }

    /// Copy displaced by the vector `delta` (one entry per coordinate, or
    /// fewer; missing entries are zero).
    pub fn displaced(&self, delta: &[T]) -> Self {
        let mut out = self.clone();
        for (i, &d) in delta.iter().enumerate() {
            out = out.shifted(i, d);
        }
        out
    }

    pub fn with_external(&self, external: Vec<T>) -> Self {
        Self {
            k: self.k.clone(),
            external,
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.k
            .iter()
            .chain(&self.external)
            .map(|x| x.as_f64())
            .collect()
    }
}

/// A smooth family of Hermitian matrices over a parameter manifold.
pub trait HamiltonianFamily<T: Real>: Send + Sync {
    /// Hilbert-space dimension N.
    fn dim(&self) -> usize;
    fn n_periodic(&self) -> usize;
    fn n_external(&self) -> usize;
    fn evaluate(&self, point: &ParameterPoint<T>) -> Result<CMatrix<T>>;

    fn check_arity(&self, point: &ParameterPoint<T>) -> Result<()> {
        if point.k().len() != self.n_periodic() || point.external().len() != self.n_external() {
            return Err(Error::Arity {
                expected_periodic: self.n_periodic(),
                expected_external: self.n_external(),
                got_periodic: point.k().len(),
                got_external: point.external().len(),
            });
        }
        Ok(())
    }
}

impl<T: Real, F: HamiltonianFamily<T> + ?Sized> HamiltonianFamily<T> for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn n_periodic(&self) -> usize {
        (**self).n_periodic()
    }
    fn n_external(&self) -> usize {
        (**self).n_external()
    }
    fn evaluate(&self, point: &ParameterPoint<T>) -> Result<CMatrix<T>> {
        (**self).evaluate(point)
    }
}

/// Coefficients of `H = ε·1 + d1·σx + d2·σy + d3·σz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DVector<T> {
    pub d1: T,
    pub d2: T,
    pub d3: T,
    pub eps: T,
}

impl<T: Real> DVector<T> {
    pub fn new(d1: T, d2: T, d3: T, eps: T) -> Self {
        Self { d1, d2, d3, eps }
    }

    /// `|d|`; zero marks a gap closing.
    pub fn norm(&self) -> T {
        (self.d1 * self.d1 + self.d2 * self.d2 + self.d3 * self.d3).sqrt()
    }

    pub fn components(&self) -> [T; 3] {
        [self.d1, self.d2, self.d3]
    }
}

/// `∂_μ d_α` for the two momentum directions: `grad[μ][α]`.
pub type DGradient<T> = [[T; 3]; 2];

/// Two-band model specified through its `d`-vector.
pub trait DVectorModel<T: Real>: Send + Sync {
    fn n_external(&self) -> usize;
    fn d_vector(&self, point: &ParameterPoint<T>) -> Result<DVector<T>>;
    fn d_gradient(&self, point: &ParameterPoint<T>) -> Result<DGradient<T>>;
}

/// Adapts a [`DVectorModel`] into a two-band [`HamiltonianFamily`] on the 2-torus.
#[derive(Clone, Debug, Default)]
pub struct TwoBand<M>(pub M);

impl<T: Real, M: DVectorModel<T>> HamiltonianFamily<T> for TwoBand<M> {
    fn dim(&self) -> usize {
        2
    }
    fn n_periodic(&self) -> usize {
        2
    }
    fn n_external(&self) -> usize {
        self.0.n_external()
    }
    fn evaluate(&self, point: &ParameterPoint<T>) -> Result<CMatrix<T>> {
        self.check_arity(point)?;
        Ok(dvector_hamiltonian(&self.0.d_vector(point)?))
    }
}

/// `ε·1 + d1·σx + d2·σy + d3·σz`.
pub fn dvector_hamiltonian<T: Real>(d: &DVector<T>) -> CMatrix<T> {
    let z = T::zero();
    CMatrix::from_rows(&[
        vec![Complex::new(d.eps + d.d3, z), Complex::new(d.d1, -d.d2)],
        vec![Complex::new(d.d1, d.d2), Complex::new(d.eps - d.d3, z)],
    ])
}

/// The Qi-Wu-Zhang model; external parameter 0 is the mass `m`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Qwz;

pub type QwzFamily = TwoBand<Qwz>;

pub fn qwz() -> QwzFamily {
    TwoBand(Qwz)
}

fn qwz_arity<T: Real>(point: &ParameterPoint<T>) -> Result<()> {
    if point.k().len() != 2 || point.external().len() != 1 {
        return Err(Error::Arity {
            expected_periodic: 2,
            expected_external: 1,
            got_periodic: point.k().len(),
            got_external: point.external().len(),
        });
    }
    Ok(())
}

/// `d = (sin kx, sin ky, m + cos kx + cos ky)`, `ε = 0`.
pub fn qwz_d_vector<T: Real>(point: &ParameterPoint<T>) -> Result<DVector<T>> {
    qwz_arity(point)?;
    let (kx, ky, m) = (point.k()[0], point.k()[1], point.external()[0]);
    Ok(DVector::new(kx.sin(), ky.sin(), m + kx.cos() + ky.cos(), T::zero()))
}

pub fn qwz_d_gradient<T: Real>(point: &ParameterPoint<T>) -> Result<DGradient<T>> {
    qwz_arity(point)?;
    let (kx, ky) = (point.k()[0], point.k()[1]);
    let z = T::zero();
    Ok([[kx.cos(), z, -kx.sin()], [z, ky.cos(), -ky.sin()]])
}

impl<T: Real> DVectorModel<T> for Qwz {
    fn n_external(&self) -> usize {
        1
    }
    fn d_vector(&self, point: &ParameterPoint<T>) -> Result<DVector<T>> {
        qwz_d_vector(point)
    }
    fn d_gradient(&self, point: &ParameterPoint<T>) -> Result<DGradient<T>> {
        qwz_d_gradient(point)
    }
}

/// Polar and azimuthal angle of `d/|d|` on the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochAngles<T> {
    /// `θ ∈ [0, π]`.
    pub theta: T,
    /// `Φ ∈ (−π, π]`; `None` at the poles, where the chart degenerates.
    pub phi: Option<T>,
}

/// `θ = arccos(d3/|d|)`, `Φ = atan2(d2, d1)`.
pub fn analytic_angles<T: Real>(d: &DVector<T>, gap_tol: T) -> Result<BlochAngles<T>> {
    let r = d.norm();
    if r <= gap_tol {
        return Err(Error::SingularPoint {
            point: Vec::new(),
            gap: (r + r).as_f64(),
        });
    }
    let rho = d.d1.hypot(d.d2);
    let theta = rho.atan2(d.d3);
    let phi = (rho > gap_tol).then(|| d.d2.atan2(d.d1));
    Ok(BlochAngles { theta, phi })
}

/// Closed-form eigenvectors `(Ψ₊, Ψ₋)` as 2×1 columns:
/// `Ψ₊ = (cos θ/2, e^{iΦ} sin θ/2)`, `Ψ₋ = (−sin θ/2, e^{iΦ} cos θ/2)`.
pub fn analytic_eigenvectors<T: Real>(theta: T, phi: T) -> (CMatrix<T>, CMatrix<T>) {
    let half = theta * T::lit(0.5);
    let (s, c) = half.sin_cos();
    let e = Complex::from_polar(T::one(), phi);
    let z = T::zero();
    let plus = CMatrix::column_vector(&[Complex::new(c, z), e * s]);
    let minus = CMatrix::column_vector(&[Complex::new(-s, z), e * c]);
    (plus, minus)
}

/// A Hamiltonian that does not depend on the parameters.
#[derive(Clone, Debug)]
pub struct ConstantFamily<T> {
    h: CMatrix<T>,
    n_periodic: usize,
    n_external: usize,
}

impl<T: Real> ConstantFamily<T> {
    /// Constant family on the 2-torus with no external parameters.
    pub fn new(h: CMatrix<T>) -> Result<Self> {
        Self::with_arity(h, 2, 0)
    }

    pub fn with_arity(h: CMatrix<T>, n_periodic: usize, n_external: usize) -> Result<Self> {
        let dev = h.hermiticity_deviation();
        if dev > T::DEFAULT_TOL * h.fro_norm().max(T::one()) {
            return Err(Error::InvalidInput(format!(
                "constant Hamiltonian is not Hermitian (deviation {:e})",
                dev.as_f64()
            )));
        }
        Ok(Self {
            h,
            n_periodic,
            n_external,
        })
    }

    /// `diag(−1, 1)`: a gapped two-level system with a parameter-independent ground state.
    pub fn two_level() -> Self {
        Self {
            h: CMatrix::real_diagonal(&[-T::one(), T::one()]),
            n_periodic: 2,
            n_external: 1,
        }
    }
}

impl<T: Real> HamiltonianFamily<T> for ConstantFamily<T> {
    fn dim(&self) -> usize {
        self.h.rows()
    }
    fn n_periodic(&self) -> usize {
        self.n_periodic
    }
    fn n_external(&self) -> usize {
        self.n_external
    }
    fn evaluate(&self, point: &ParameterPoint<T>) -> Result<CMatrix<T>> {
        self.check_arity(point)?;
        Ok(self.h.clone())
    }
}

pub type MixFn<T> = Box<dyn Fn(&ParameterPoint<T>) -> CMatrix<T> + Send + Sync>;

/// `H₄(k, m) = V(k)·[H_qwz ⊕ H_qwz]·V(k)†`.
///
/// Every level of the two-band model appears twice, so the lower band is an
/// exactly degenerate two-dimensional subspace whose basis is rotated by `V`.
pub struct DoubledFamily<T> {
    mix: MixFn<T>,
}

impl<T: Real> std::fmt::Debug for DoubledFamily<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DoubledFamily").finish_non_exhaustive()
    }
}

/// Builds the doubled family for a mixing unitary `V(point)`.
///
/// The mix is sampled on an 8×8 momentum grid (m = 0) and rejected if it is
/// not 4×4 unitary there.
pub fn doubled_qwz_family<T: Real>(
    mix: impl Fn(&ParameterPoint<T>) -> CMatrix<T> + Send + Sync + 'static,
) -> Result<DoubledFamily<T>> {
    let samples = 8;
    let tol = T::DEFAULT_TOL * T::lit(100.0);
    for i in 0..samples {
        for j in 0..samples {
            let step = T::two_pi() / T::from_usize_lossy(samples);
            let p = ParameterPoint::momentum(
                step * T::from_usize_lossy(i),
                step * T::from_usize_lossy(j),
                &[T::zero()],
            );
            let v = mix(&p);
            if v.shape() != (4, 4) {
                return Err(Error::InvalidInput(format!(
                    "mixing matrix must be 4x4, got {:?}",
                    v.shape()
                )));
            }
            let deviation = v.unitarity_deviation();
            if !(deviation <= tol) {
                return Err(Error::NonUnitaryMix {
                    point: p.to_f64_vec(),
                    deviation: deviation.as_f64(),
                });
            }
        }
    }
    Ok(DoubledFamily { mix: Box::new(mix) })
}

/// Hermitian projector `G` onto `span{(e₀+e₂)/√2, (e₁−i·e₃)/√2}`.
///
/// Its entries couple the two copies of the two-band model, and because its
/// eigenvalues are 0 and 1, `exp(i·kx·G) = 1 + (e^{i·kx} − 1)·G` is periodic
/// in `kx`.
pub fn default_mix_generator<T: Real>() -> CMatrix<T> {
    let h = T::lit(0.5);
    let z = T::zero();
    let mut g = CMatrix::zeros(4, 4);
    g[(0, 0)] = Complex::new(h, z);
    g[(0, 2)] = Complex::new(h, z);
    g[(2, 0)] = Complex::new(h, z);
    g[(2, 2)] = Complex::new(h, z);
    g[(1, 1)] = Complex::new(h, z);
    g[(1, 3)] = Complex::new(z, h);
    g[(3, 1)] = Complex::new(z, -h);
    g[(3, 3)] = Complex::new(h, z);
    g
}

/// `exp(i·t·G)` for Hermitian `G`.
pub fn exp_i_hermitian<T: Real>(g: &CMatrix<T>, t: T) -> Result<CMatrix<T>> {
    let eig = eig_hermitian(g, T::DEFAULT_TOL)?;
    let phases: Vec<Complex<T>> = eig
        .values
        .iter()
        .map(|&v| Complex::from_polar(T::one(), v * t))
        .collect();
    let vd = &eig.vectors * &CMatrix::diagonal(&phases);
    Ok(&vd * &eig.vectors.adjoint())
}

impl<T: Real> DoubledFamily<T> {
    /// Mix `V(k) = exp(i·kx·G)` with [`default_mix_generator`].
    pub fn with_default_mix() -> Self {
        let g = default_mix_generator::<T>();
        let id = CMatrix::<T>::identity(4);
        let mix = move |p: &ParameterPoint<T>| {
            let phase = Complex::from_polar(T::one(), p.k()[0]) - Complex::one();
            &id + &g.scale(phase)
        };
        doubled_qwz_family(mix).expect("default mix is unitary")
    }

    /// Block-diagonal `H_qwz ⊕ H_qwz`.
    pub fn identity_mix() -> Self {
        doubled_qwz_family(|_: &ParameterPoint<T>| CMatrix::identity(4)).expect("identity is unitary")
    }
}

impl<T: Real> HamiltonianFamily<T> for DoubledFamily<T> {
    fn dim(&self) -> usize {
        4
    }
    fn n_periodic(&self) -> usize {
        2
    }
    fn n_external(&self) -> usize {
        1
    }
    fn evaluate(&self, point: &ParameterPoint<T>) -> Result<CMatrix<T>> {
        self.check_arity(point)?;
        let h2 = dvector_hamiltonian(&qwz_d_vector(point)?);
        let block = CMatrix::from_fn(4, 4, |i, j| {
            if i / 2 == j / 2 {
                h2[(i % 2, j % 2)]
            } else {
                Complex::zero()
            }
        });
        let v = (self.mix)(point);
        let vh = &v * &block;
        let h = &vh * &v.adjoint();
        // Symmetrize away round-off so the eigensolver sees an exactly Hermitian input.
        Ok(CMatrix::from_fn(4, 4, |i, j| {
            (h[(i, j)] + h[(j, i)].conj()) * T::lit(0.5)
        }))
    }
}

/// `E[n] − E[n−1]` of the sorted spectrum, where `n = subspace_size`.
pub fn energy_gap<T: Real, F: HamiltonianFamily<T> + ?Sized>(
    family: &F,
    point: &ParameterPoint<T>,
    subspace_size: usize,
) -> Result<T> {
    if subspace_size == 0 || subspace_size >= family.dim() {
        return Err(Error::InvalidSubspace(format!(
            "subspace size {subspace_size} must lie in 1..{}",
            family.dim()
        )));
    }
    let eig = eig_hermitian(&family.evaluate(point)?, T::DEFAULT_TOL)?;
    Ok(eig.values[subspace_size] - eig.values[subspace_size - 1])
}

/// Two-band model given by `d`-vector samples on a uniform momentum grid.
///
/// Samples sit at `k = 2π·(i/nx, j/ny)`. Off-grid values and gradients come
/// from the trigonometric interpolant of the samples, which is smooth and
/// periodic and reproduces band-limited models such as QWZ exactly.
#[derive(Clone, Debug)]
pub struct TabulatedDVector<T> {
    nx: usize,
    ny: usize,
    /// Fourier coefficients per component (d1, d2, d3, eps), index `p*ny + q`.
    coefficients: [Vec<Complex<T>>; 4],
}

#[derive(Debug, Deserialize)]
struct TableRow {
    kx_index: usize,
    ky_index: usize,
    d1: f64,
    d2: f64,
    d3: f64,
    eps: f64,
}

impl<T: Real> TabulatedDVector<T> {
    /// Samples in row-major order, index `i*ny + j` for `k = 2π(i/nx, j/ny)`.
    pub fn from_samples(nx: usize, ny: usize, samples: &[DVector<T>]) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Table(format!("grid {nx}x{ny} is too small")));
        }
        if samples.len() != nx * ny {
            return Err(Error::Table(format!(
                "expected {} samples, got {}",
                nx * ny,
                samples.len()
            )));
        }
        let component = |f: fn(&DVector<T>) -> T| -> Vec<Complex<T>> {
            let values: Vec<T> = samples.iter().map(f).collect();
            dft2(&values, nx, ny)
        };
        Ok(Self {
            nx,
            ny,
            coefficients: [
                component(|d| d.d1),
                component(|d| d.d2),
                component(|d| d.d3),
                component(|d| d.eps),
            ],
        })
    }

    /// Reads `kx_index, ky_index, d1, d2, d3, eps` rows with a header line.
    /// Every grid cell must appear exactly once.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.deserialize::<TableRow>() {
            rows.push(rec.map_err(|e| Error::Table(e.to_string()))?);
        }
        if rows.is_empty() {
            return Err(Error::Table("no rows".into()));
        }
        let nx = rows.iter().map(|r| r.kx_index).max().unwrap_or(0) + 1;
        let ny = rows.iter().map(|r| r.ky_index).max().unwrap_or(0) + 1;
        let mut samples: Vec<Option<DVector<T>>> = vec![None; nx * ny];
        for r in &rows {
            let slot = &mut samples[r.kx_index * ny + r.ky_index];
            if slot.is_some() {
                return Err(Error::Table(format!(
                    "duplicate cell ({}, {})",
                    r.kx_index, r.ky_index
                )));
            }
            *slot = Some(DVector::new(T::lit(r.d1), T::lit(r.d2), T::lit(r.d3), T::lit(r.eps)));
        }
        let samples = samples
            .into_iter()
            .enumerate()
            .map(|(idx, s)| {
                s.ok_or_else(|| Error::Table(format!("missing cell ({}, {})", idx / ny, idx % ny)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(nx, ny, &samples)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Table(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(file)
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn basis(n: usize, k: T) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let mut value = Vec::with_capacity(n);
        let mut deriv = Vec::with_capacity(n);
        for p in 0..n {
            if 2 * p == n {
                let f = T::from_usize_lossy(p);
                value.push(Complex::new((f * k).cos(), T::zero()));
                deriv.push(Complex::new(-f * (f * k).sin(), T::zero()));
            } else {
                let f = if 2 * p < n {
                    T::from_usize_lossy(p)
                } else {
                    -T::from_usize_lossy(n - p)
                };
                let e = Complex::from_polar(T::one(), f * k);
                value.push(e);
                deriv.push(e * Complex::new(T::zero(), f));
            }
        }
        (value, deriv)
    }

    fn contract(&self, c: &[Complex<T>], bx: &[Complex<T>], by: &[Complex<T>]) -> T {
        let mut acc = Complex::zero();
        for (p, x) in bx.iter().enumerate() {
            let row = &c[p * self.ny..(p + 1) * self.ny];
            let inner = row
                .iter()
                .zip(by)
                .fold(Complex::zero(), |a: Complex<T>, (cq, yq)| a + cq * yq);
            acc += x * inner;
        }
        acc.re
    }
}

/// `c[p, q] = (1/(nx·ny)) Σ f[i, j] e^{−2πi(pi/nx + qj/ny)}`, computed separably.
fn dft2<T: Real>(values: &[T], nx: usize, ny: usize) -> Vec<Complex<T>> {
    let tau = T::two_pi();
    let twiddle = |n: usize, a: usize| {
        Complex::from_polar(T::one(), -tau * T::from_usize_lossy((a) % n) / T::from_usize_lossy(n))
    };
    // Along y.
    let mut stage = vec![Complex::zero(); nx * ny];
    for i in 0..nx {
        for q in 0..ny {
            let mut acc = Complex::zero();
            for j in 0..ny {
                acc += twiddle(ny, q * j) * values[i * ny + j];
            }
            stage[i * ny + q] = acc;
        }
    }
    let norm = T::one() / T::from_usize_lossy(nx * ny);
    let mut out = vec![Complex::zero(); nx * ny];
    for p in 0..nx {
        for q in 0..ny {
            let mut acc = Complex::zero();
            for i in 0..nx {
                acc += twiddle(nx, p * i) * stage[i * ny + q];
            }
            out[p * ny + q] = acc * norm;
        }
    }
    out
}

impl<T: Real> DVectorModel<T> for TabulatedDVector<T> {
    fn n_external(&self) -> usize {
        0
    }

    fn d_vector(&self, point: &ParameterPoint<T>) -> Result<DVector<T>> {
        if point.k().len() != 2 || !point.external().is_empty() {
            return Err(Error::Arity {
                expected_periodic: 2,
                expected_external: 0,
                got_periodic: point.k().len(),
                got_external: point.external().len(),
            });
        }
        let (bx, _) = Self::basis(self.nx, point.k()[0]);
        let (by, _) = Self::basis(self.ny, point.k()[1]);
        let [c1, c2, c3, ce] = &self.coefficients;
        Ok(DVector::new(
            self.contract(c1, &bx, &by),
            self.contract(c2, &bx, &by),
            self.contract(c3, &bx, &by),
            self.contract(ce, &bx, &by),
        ))
    }

    fn d_gradient(&self, point: &ParameterPoint<T>) -> Result<DGradient<T>> {
        self.d_vector(point)?;
        let (bx, dbx) = Self::basis(self.nx, point.k()[0]);
        let (by, dby) = Self::basis(self.ny, point.k()[1]);
        let mut grad = [[T::zero(); 3]; 2];
        for (alpha, c) in self.coefficients[..3].iter().enumerate() {
            grad[0][alpha] = self.contract(c, &dbx, &by);
            grad[1][alpha] = self.contract(c, &bx, &dby);
        }
        Ok(grad)
    }
}
