use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("parameter point has {got_periodic} periodic and {got_external} external coordinates, model expects {expected_periodic} and {expected_external}")]
    Arity {
        expected_periodic: usize,
        expected_external: usize,
        got_periodic: usize,
        got_external: usize,
    },

    #[error("singular point {point:?}: energy gap {gap:e} at or below tolerance")]
    SingularPoint { point: Vec<f64>, gap: f64 },

    #[error("azimuth undefined at {point:?} (pole of the Bloch-sphere chart); use the projector method")]
    ChartPole { point: Vec<f64> },

    #[error("overlap between neighbouring frames at {point:?} is singular (smallest singular value {smallest_singular_value:e}); reduce the step or refine the grid")]
    SingularOverlap {
        point: Vec<f64>,
        smallest_singular_value: f64,
    },

    #[error("mixing matrix is not unitary at {point:?} (|V^dagger V - I|_F = {deviation:e})")]
    NonUnitaryMix { point: Vec<f64>, deviation: f64 },

    #[error("subspace spread {spread:e} exceeds degeneracy tolerance {tolerance:e} at {point:?}")]
    NotDegenerate {
        point: Vec<f64>,
        spread: f64,
        tolerance: f64,
    },

    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),

    #[error("{singular} of {total} grid cells are singular; the model is likely at criticality")]
    CriticalRegion { singular: usize, total: usize },

    #[error("vanishing link variable at cell ({ix}, {iy}) (|det| = {modulus:e}); refine the grid")]
    VanishingLink { ix: usize, iy: usize, modulus: f64 },

    #[error("plaquette ({ix}, {iy}) has phase {phase} on the branch cut; refine the grid")]
    Inadmissible { ix: usize, iy: usize, phase: f64 },

    #[error("lattice flux sum {value} is not an integer multiple of 2 pi")]
    NonIntegerChern { value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("tabulated model: {0}")]
    Table(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
