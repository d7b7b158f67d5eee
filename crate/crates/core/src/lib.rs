//! Interior transmission eigenvalues of a radially stratified dielectric ball.
//!
//! The eigenvalues are the zeros of an entire determinant `D(k)` assembled from
//! the boundary data of a singular radial ODE. This crate evaluates `D` in
//! overflow-safe arithmetic, finds its zeros by the argument principle, and
//! measures the growth and zero-density quantities that characterize it.

pub mod bessel;
pub mod cartwright;
pub mod determinant;
pub mod error;
pub mod exec;
pub mod inverse;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod radial;
pub mod scaled;
pub mod zeros;

pub use error::{IteError, Result};
pub use exec::Execution;
pub use profile::{compute_liouville, validate, LiouvilleMap, ProfileKind, RefractionProfile, ValidationReport};
pub use scaled::ScaledComplex;
