//! Quantum geometric tensor toolkit for parameterized Hamiltonians.
//!
//! The numerical core is generic over the real scalar type ([`Real`], `f32`
//! or `f64`); the aliases below fix it to `f64`.
//!
//! ```
//! use qgt::{qwz, frame_grid, chern_lattice, GridSpec, Subspace};
//!
//! let frames = frame_grid(&qwz(), &GridSpec::square(24, &[1.0]), &Subspace::lowest(1)).unwrap();
//! assert_eq!(chern_lattice(&frames).unwrap().integer, Some(-1));
//! ```

pub mod cli;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod measure;
pub mod models;
pub mod scalar;
pub mod topology;

pub use error::{Error, Result};
pub use geometry::{
    aligned_frame, analytic_grid, eigenframe, frame_derivative, frame_grid, projector, qgt_analytic,
    qgt_analytic_twoband, qgt_at_frame, qgt_grid, qgt_grid_gauged, qgt_point, Directions, FieldGrid, Frame,
    GridSpec, QGTensor, QgtOptions, Subspace,
};
pub use linalg::{eig_hermitian, unitary_align, CMatrix, HermEig, LinalgError};
pub use measure::{
    chern_sweep, detect_critical_points, fidelity_susceptibility, integrated_metric_sweep, loglog_slope,
    CriticalKind, CriticalPointEstimate, SweepKind, SweepResult, SweepSpec,
};
pub use models::{
    analytic_angles, analytic_eigenvectors, doubled_qwz_family, dvector_hamiltonian, energy_gap, qwz,
    qwz_d_vector, ConstantFamily, DVector, DVectorModel, DoubledFamily, HamiltonianFamily, ParameterPoint, Qwz,
    TabulatedDVector, TwoBand,
};
pub use scalar::Real;
pub use topology::{
    chern_direct, chern_lattice, link_variable, small_loop_check, wilson_loop, ChernMethod, ChernResult, Holonomy,
};

pub type CMatrix64 = CMatrix<f64>;
pub type Frame64 = Frame<f64>;
pub type QGTensor64 = QGTensor<f64>;
pub type ParameterPoint64 = ParameterPoint<f64>;
pub type Subspace64 = Subspace<f64>;
pub type GridSpec64 = GridSpec<f64>;
pub type CMatrix32 = CMatrix<f32>;
pub type QGTensor32 = QGTensor<f32>;
