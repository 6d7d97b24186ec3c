//! Probability density on Cartesian voxel grids.
//!
//! A grid samples ρ(x, y, z) = |Ψ|² on the vertices of an N×N×N lattice
//! spanning [−h, h]³. N is odd, so the lattice contains the origin and the
//! three coordinate planes; coordinates are formed as `(i − c)·Δ` with
//! `c = (N − 1)/2`, which makes `coord(N − 1 − i) == −coord(i)` exactly and
//! turns the z-parity and x↔y symmetries into bitwise identities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{self, QuadError};
use crate::states::{BoundState, PotentialParams, QuasiNumbers, StateError, StateLabels};

/// Voxels per axis used unless told otherwise.
pub const DEFAULT_POINTS: usize = 151;

/// Fraction of radial probability the automatic extent must enclose.
pub const DEFAULT_COVERAGE: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("grid needs an odd number of points ≥ 3 per axis, got {0}")]
    InvalidPoints(usize),
    #[error("grid half-extent must be positive and finite, got {0}")]
    InvalidExtent(f64),
    #[error("coverage must lie in (0, 1), got {0}")]
    InvalidCoverage(f64),
    #[error("grid is identically zero; relative scaling is undefined")]
    DegenerateGrid,
    #[error("value buffer has {got} entries, expected {expected}")]
    BufferSize { got: usize, expected: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Lattice geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub half_extent: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, half_extent: f64) -> Result<Self, DensityError> {
        if n_points < 3 || n_points.is_multiple_of(2) {
            return Err(DensityError::InvalidPoints(n_points));
        }
        if !(half_extent > 0.0) || !half_extent.is_finite() {
            return Err(DensityError::InvalidExtent(half_extent));
        }
        Ok(Self {
            n_points,
            half_extent,
        })
    }

    /// Lattice index of the origin along each axis.
    pub fn center(&self) -> usize {
        (self.n_points - 1) / 2
    }

    pub fn spacing(&self) -> f64 {
        self.half_extent / self.center() as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.spacing()
    }

    pub fn len(&self) -> usize {
        self.n_points * self.n_points * self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n_points * (j + self.n_points * k)
    }
}

/// Whether grid values are physical densities or rescaled to a peak of 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Absolute,
    Relative,
}

/// State metadata carried by a grid and every artifact derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateInfo {
    pub labels: StateLabels,
    pub params: PotentialParams,
    pub quasi: QuasiNumbers,
}

impl StateInfo {
    pub fn of(state: &BoundState) -> Self {
        Self {
            labels: state.labels(),
            params: state.params(),
            quasi: *state.quasi(),
        }
    }
}

/// N³ block of density samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    spec: GridSpec,
    values: Vec<f64>,
    max_value: f64,
    scale: Scale,
    state: Option<StateInfo>,
}

impl DensityGrid {
    /// Wraps an existing x-fastest value buffer.
    pub fn from_values(
        spec: GridSpec,
        values: Vec<f64>,
        scale: Scale,
        state: Option<StateInfo>,
    ) -> Result<Self, DensityError> {
        if values.len() != spec.len() {
            return Err(DensityError::BufferSize {
                got: values.len(),
                expected: spec.len(),
            });
        }
        let max_value = values.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            spec,
            values,
            max_value,
            scale,
            state,
        })
    }

    /// Samples an arbitrary field on the lattice (used for synthetic test
    /// fields as well as densities).
    pub fn from_fn<F>(spec: GridSpec, scale: Scale, state: Option<StateInfo>, f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Sync,
    {
        let n = spec.n_points;
        let mut values = vec![0.0; spec.len()];
        values
            .par_chunks_mut(n * n)
            .enumerate()
            .for_each(|(k, slab)| {
                let z = spec.coord(k);
                for j in 0..n {
                    let y = spec.coord(j);
                    for i in 0..n {
                        slab[i + n * j] = f(spec.coord(i), y, z);
                    }
                }
            });
        let max_value = values.iter().copied().fold(0.0, f64::max);
        Self {
            spec,
            values,
            max_value,
            scale,
            state,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn state(&self) -> Option<&StateInfo> {
        self.state.as_ref()
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }
}

/// ρ(x, y, z) for a one-off evaluation.
pub fn density_at(
    labels: StateLabels,
    params: PotentialParams,
    x: f64,
    y: f64,
    z: f64,
) -> Result<f64, DensityError> {
    Ok(BoundState::new(labels, params)?.density_at(x, y, z))
}

/// ∫₀^h u² dr.
pub fn radial_mass_within(state: &BoundState, h: f64) -> Result<f64, DensityError> {
    let q = quad::integrate(
        |r| {
            let u = state.radial_u(r);
            u * u
        },
        &quad::radial_breakpoints(h),
        1e-13,
    )?;
    Ok(q.value)
}

/// Smallest h with ∫₀^h u² dr ≥ coverage, by bisection.
pub fn auto_extent(state: &BoundState, coverage: f64) -> Result<f64, DensityError> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(DensityError::InvalidCoverage(coverage));
    }
    let q = state.quasi();
    let z = state.params().z;
    let mut hi = (q.n_prime * q.n_prime / z).max(1.0);
    let mut lo = 0.0;
    while radial_mass_within(state, hi)? < coverage {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(DensityError::InvalidCoverage(coverage));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radial_mass_within(state, mid)? >= coverage {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Samples ρ on the lattice. Voxels are evaluated in parallel; each is a
/// pure function of its coordinates, so the result does not depend on the
/// thread schedule.
pub fn build_grid(state: &BoundState, spec: GridSpec) -> DensityGrid {
    DensityGrid::from_fn(
        spec,
        Scale::Absolute,
        Some(StateInfo::of(state)),
        |x, y, z| state.density_at(x, y, z),
    )
}

/// Grid with the half-extent chosen by [`auto_extent`].
pub fn build_auto_grid(
    state: &BoundState,
    n_points: usize,
    coverage: f64,
) -> Result<DensityGrid, DensityError> {
    let h = auto_extent(state, coverage)?;
    Ok(build_grid(state, GridSpec::new(n_points, h)?))
}

/// Rescales so the maximum voxel is exactly 100. Already-relative grids are
/// returned unchanged.
pub fn normalize_relative(grid: &DensityGrid) -> Result<DensityGrid, DensityError> {
    if grid.scale == Scale::Relative {
        return Ok(grid.clone());
    }
    let max = grid.max_value;
    if !(max > 0.0) {
        return Err(DensityError::DegenerateGrid);
    }
    let values: Vec<f64> = grid.values.par_iter().map(|&v| 100.0 * (v / max)).collect();
    Ok(DensityGrid {
        spec: grid.spec,
        values,
        max_value: 100.0,
        scale: Scale::Relative,
        state: grid.state,
    })
}

/// Riemann sum Σρ·Δ³ (meaningful on absolute grids).
pub fn grid_mass(grid: &DensityGrid) -> f64 {
    let d = grid.spec.spacing();
    grid.values.iter().sum::<f64>() * d * d * d
}
