//! Exact bound states of the double ring-shaped Coulomb potential
//!
//! ```text
//! V(r, θ) = −Z/r + (1/2r²)·(b/sin²θ + c/cos²θ)
//! ```
//!
//! in atomic units, together with the machinery needed to look at them:
//! Cartesian voxel grids of the probability density, isosurface and contour
//! extraction at relative probability values, and independent numerical
//! checks of every closed-form ingredient.
//!
//! The modules build on each other bottom-up:
//!
//! - [`specfun`]: log-gamma, terminating Kummer series, and the universal
//!   associated Legendre family with its normalization.
//! - [`states`]: quantum-number mapping, potential, radial function, energy.
//! - [`density`]: probability density on voxel grids.
//! - [`surface`]: marching cubes, octant cutaway, yoz-plane contours.
//! - [`verify`]: quadrature, ODE residual and hydrogen oracles.
//! - [`quad`]: composite Gauss–Legendre quadrature shared by the above.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod quad;
pub mod specfun;
pub mod states;
pub mod surface;
pub mod verify;

pub use density::{DensityError, DensityGrid, GridSpec, Scale};
pub use specfun::{SignedLogValue, SpecfunError, UalpSpec};
pub use states::{BoundState, PotentialParams, QuasiNumbers, StateError, StateLabels};
pub use surface::{ContourSet, SurfaceError, TriangleMesh};
pub use verify::VerificationReport;
