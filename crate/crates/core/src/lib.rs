//! Numerical laboratory for exponentially growing solutions of the
//! Schrödinger operator `Δ + q` concentrated near affine two-planes,
//! and for the plane-integral (Radon) data such solutions determine.
//!
//! The crate is organized around the pipeline
//!
//! 1. [`geometry`] — ball domains, affine two-planes, boundary patches;
//! 2. [`fields`] — complex scalar fields on a periodic box and their
//!    spectral transforms;
//! 3. [`cutoffs`] — the profile functions that concentrate solutions
//!    near a plane;
//! 4. [`faddeev`] — the conjugated Laplacian, its symbol, characteristic
//!    variety, frequency tube, and truncated/regularized inverses;
//! 5. [`cgo`] — assembly of approximate and corrected solutions,
//!    together with their measured norms and residuals;
//! 6. [`boundary`] — sphere quadrature meshes, Cauchy data, and the
//!    boundary/volume bilinear forms relating two solutions;
//! 7. [`transform`] — plane integrals, slab limits, filtered
//!    backprojection, and support localization;
//! 8. [`pipeline`] — experiment orchestration, configuration, reports.

pub mod boundary;
pub mod cgo;
pub mod cutoffs;
pub mod faddeev;
pub mod fields;
pub mod geometry;
pub mod pipeline;
pub mod transform;
pub(crate) mod quadrature;

pub use fields::{GridField, Spectrum};
pub use geometry::{BallDomain, Plane, SurfacePatch};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("plane does not intersect the domain: {0}")]
    PlaneMissesDomain(String),
    #[error("numerical guard tripped: {0}")]
    Guard(String),
    #[error("solver diverged: {0}")]
    SolverDiverged(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
