//! Independent numerical checks of the closed forms.
//!
//! Nothing here reuses the polynomial coefficients of the evaluation path:
//! angular values come either from the ratio-recurrence route of
//! [`AngularFunction::derivatives`] or from a Gauss hypergeometric series,
//! and the hydrogen density is rebuilt from Laguerre and Legendre
//! recurrences.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{self, DensityError, StateInfo};
use crate::quad::{self, QuadError};
use crate::specfun::{AngularFunction, SpecfunError, UalpSpec};
use crate::states::{BoundState, PotentialParams, QuasiNumbers, StateError, StateLabels};
use crate::surface::{self, SurfaceError};

/// Convergence target for every quadrature in this module.
pub const QUAD_TOL: f64 = 1e-13;

/// Upper bound on the neglected radial tail ∫_R^∞.
pub const TAIL_BOUND: f64 = 1e-13;

pub const NORM_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-6;
pub const HYDROGEN_TOL: f64 = 1e-10;
pub const GRID_MASS_RANGE: (f64, f64) = (0.97, 1.005);

/// Default seed for residual and oracle sampling.
pub const DEFAULT_SEED: u64 = 0x5eed_2019;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("radial cutoff search failed for {0}")]
    Cutoff(StateLabels),
}

// ---------------------------------------------------------------------------
// radial quadrature

/// Cutoff R for ∫₀^∞ g(r)u² dr with g = r^power: beyond the outermost
/// turning point, then grown until the log-concave tail bound
/// w(R)u²(R)/|d ln(w u²)/dr| drops below [`TAIL_BOUND`].
pub fn radial_cutoff(state: &BoundState, power: i32) -> Result<(f64, f64), VerifyError> {
    let q = state.quasi();
    let kappa = state.kappa();
    let rho0 = 4.0 * f64::from(q.n_r) + 2.0 * (2.0 * q.l_prime + 1.0) + 2.0;
    let mut r = rho0 / kappa;
    for _ in 0..200 {
        let (u, du, _) = state.radial_u_derivatives(r)?;
        let slope = 2.0 * du / u + f64::from(power) / r;
        if u != 0.0 && slope < 0.0 {
            let bound = r.powi(power) * u * u / -slope;
            if bound <= TAIL_BOUND {
                return Ok((r, bound));
            }
        }
        r *= 1.25;
    }
    Err(VerifyError::Cutoff(state.labels()))
}

/// ∫₀^∞ r^power u(r)² dr.
pub fn radial_moment(state: &BoundState, power: i32) -> Result<f64, VerifyError> {
    radial_integral(state, power, |_| 1.0)
}

/// ∫₀^∞ g(r) r^power u(r)² dr for a bounded smooth weight g; the tail
/// bound assumes |g| ≤ 1 beyond the cutoff.
pub fn radial_integral<G: Fn(f64) -> f64>(
    state: &BoundState,
    power: i32,
    g: G,
) -> Result<f64, VerifyError> {
    let (big_r, _) = radial_cutoff(state, power)?;
    let breaks = quad::radial_breakpoints(big_r);
    let q = quad::integrate(
        |r| {
            let u = state.radial_u(r);
            g(r) * r.powi(power) * u * u
        },
        &breaks,
        QUAD_TOL,
    )?;
    Ok(q.value)
}

/// ∫₀^∞ u² dr.
pub fn quad_radial_norm(state: &BoundState) -> Result<f64, VerifyError> {
    radial_moment(state, 0)
}

/// ⟨r⟩ = ∫ r u² dr / ∫ u² dr.
pub fn mean_radius(state: &BoundState) -> Result<f64, VerifyError> {
    Ok(radial_moment(state, 1)? / radial_moment(state, 0)?)
}

// ---------------------------------------------------------------------------
// angular quadrature

fn angular_quad<F: Fn(f64) -> f64>(f: F) -> Result<f64, VerifyError> {
    Ok(quad::integrate(f, quad::angular_breakpoints(), QUAD_TOL)?.value)
}

/// H evaluated through the ratio-recurrence route. Quadrature nodes never
/// land on x = 0 or |x| = 1, where that route is undefined.
fn recurrence_h(angular: &AngularFunction, x: f64) -> f64 {
    angular.derivatives(x).map(|d| d.0).unwrap_or(0.0)
}

/// ∫_{−1}^{1} H² dx, split at the equatorial cusp.
pub fn quad_angular_norm(state: &BoundState) -> Result<f64, VerifyError> {
    angular_norm_of(state.angular())
}

pub fn angular_norm_of(angular: &AngularFunction) -> Result<f64, VerifyError> {
    angular_quad(|x| {
        let h = recurrence_h(angular, x);
        h * h
    })
}

/// ⟨|cos θ|⟩ = ∫ |x| H² dx.
pub fn mean_abs_cos(state: &BoundState) -> Result<f64, VerifyError> {
    let angular = state.angular();
    let num = angular_quad(|x| {
        let h = recurrence_h(angular, x);
        x.abs() * h * h
    })?;
    Ok(num / angular_norm_of(angular)?)
}

/// Terminating ₂F₁(−k, b; c; t).
pub fn hyp2f1_terminating(k: u32, b: f64, c: f64, t: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 0..k {
        let jf = f64::from(j);
        term *= (jf - f64::from(k)) * (b + jf) / ((c + jf) * (jf + 1.0)) * t;
        sum += term;
    }
    sum
}

/// Unnormalized H from the hypergeometric representation
/// (1−x²)^{m′/2} |x|^{γ₁} ₂F₁(−k, k+γ₁+m′+½; γ₁+½; x²).
pub fn hypergeometric_h(spec: &UalpSpec, x: f64) -> f64 {
    let t = x * x;
    let f = hyp2f1_terminating(
        spec.k,
        f64::from(spec.k) + spec.gamma1 + spec.m_prime + 0.5,
        spec.gamma1 + 0.5,
        t,
    );
    (1.0 - t).max(0.0).powf(0.5 * spec.m_prime) * x.abs().powf(spec.gamma1) * f
}

/// Largest relative deviation of H² from the quadrature-normalized
/// hypergeometric oracle over `points`.
pub fn angular_oracle_deviation(
    angular: &AngularFunction,
    points: &[f64],
) -> Result<f64, VerifyError> {
    let spec = *angular.spec();
    let norm = angular_quad(|x| {
        let h = hypergeometric_h(&spec, x);
        h * h
    })?;
    let mut worst: f64 = 0.0;
    for &x in points {
        let h = hypergeometric_h(&spec, x);
        let expected = h * h / norm;
        let got = angular.eval_sq(x);
        if expected > 0.0 {
            worst = worst.max((got - expected).abs() / expected);
        } else {
            worst = worst.max(got.abs());
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// ODE residuals

/// Residual sample points: log-spaced radii across the bulk of the state
/// and uniform |x| ∈ (0.05, 0.95) with random sign.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoints {
    pub radii: Vec<f64>,
    pub cosines: Vec<f64>,
}

impl SamplePoints {
    pub fn for_state(state: &BoundState, n_samples: usize, seed: u64) -> Result<Self, VerifyError> {
        let (big_r, _) = radial_cutoff(state, 0)?;
        let lo = (1e-3 / state.kappa()).ln();
        let hi = big_r.ln();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radii = (0..n_samples)
            .map(|i| {
                let jitter: f64 = rng.gen_range(0.0..1.0);
                (lo + (hi - lo) * (i as f64 + jitter) / n_samples as f64).exp()
            })
            .collect();
        let cosines = (0..n_samples)
            .map(|_| {
                let x: f64 = rng.gen_range(0.05..0.95);
                if rng.gen_bool(0.5) {
                    -x
                } else {
                    x
                }
            })
            .collect();
        Ok(Self { radii, cosines })
    }
}

/// Max relative residuals (radial, angular) over `n_samples` points each.
pub fn ode_residuals(
    state: &BoundState,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64), VerifyError> {
    let pts = SamplePoints::for_state(state, n_samples, seed)?;
    let radial = radial_residual_max(state, state.energy(), &pts.radii)?;
    let mut angular: f64 = 0.0;
    for &x in &pts.cosines {
        angular = angular.max(state.angular().ode_residual(x)?);
    }
    Ok((radial, angular))
}

/// Max radial residual with a caller-chosen energy.
pub fn radial_residual_max(
    state: &BoundState,
    energy: f64,
    radii: &[f64],
) -> Result<f64, VerifyError> {
    let mut worst: f64 = 0.0;
    for &r in radii {
        worst = worst.max(state.radial_residual(r, energy)?);
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// hydrogen

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Generalized Laguerre L_p^α(x) by the three-term recurrence.
pub fn laguerre(p: u32, alpha: f64, x: f64) -> f64 {
    if p == 0 {
        return 1.0;
    }
    let mut l0 = 1.0;
    let mut l1 = 1.0 + alpha - x;
    for j in 1..p {
        let jf = f64::from(j);
        let l2 = ((2.0 * jf + 1.0 + alpha - x) * l1 - (jf + alpha) * l0) / (jf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// Associated Legendre P_l^m(x), m ≥ 0, without the Condon–Shortley phase.
pub fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for i in 0..m {
        pmm *= f64::from(2 * i + 1) * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * f64::from(2 * m + 1) * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut p0 = pmm;
    for ll in (m + 2)..=l {
        let p = (x * f64::from(2 * ll - 1) * pm1 - f64::from(ll + m - 1) * p0) / f64::from(ll - m);
        p0 = pm1;
        pm1 = p;
    }
    pm1
}

/// Hydrogen-like radial function R_nl(r).
pub fn hydrogen_radial(n: u32, l: u32, z: f64, r: f64) -> f64 {
    let nf = f64::from(n);
    let rho = 2.0 * z * r / nf;
    let norm_sq = (2.0 * z / nf).powi(3) * factorial(n - l - 1) / (2.0 * nf * factorial(n + l));
    norm_sq.sqrt()
        * rho.powi(l as i32)
        * (-0.5 * rho).exp()
        * laguerre(n - l - 1, f64::from(2 * l + 1), rho)
}

/// |Y_lm|² as a function of cos θ.
pub fn spherical_harmonic_sq(l: u32, m: i32, cos: f64) -> f64 {
    let am = m.unsigned_abs();
    f64::from(2 * l + 1) / (4.0 * PI) * factorial(l - am) / factorial(l + am)
        * assoc_legendre(l, am, cos).powi(2)
}

/// Textbook hydrogen-like density |R_nl(r)|²|Y_lm(θ, φ)|² at a Cartesian
/// point, for nuclear charge `z`.
pub fn hydrogen_oracle(labels: StateLabels, z: f64, point: [f64; 3]) -> f64 {
    let StateLabels { n, l, m } = labels;
    let r = (point[0] * point[0] + point[1] * point[1] + point[2] * point[2]).sqrt();
    let cos = if r == 0.0 { 1.0 } else { point[2] / r };
    hydrogen_radial(n, l, z, r).powi(2) * spherical_harmonic_sq(l, m, cos)
}

/// Largest relative deviation between the evaluated density and the
/// hydrogen oracle at `n_points` random points in a ball of radius 3n²/Z.
pub fn hydrogen_deviation(state: &BoundState, n_points: usize, seed: u64) -> f64 {
    let labels = state.labels();
    let z = state.params().z;
    let reach = 3.0 * f64::from(labels.n * labels.n) / z;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_points {
        let p: [f64; 3] = [
            rng.gen_range(-reach..reach),
            rng.gen_range(-reach..reach),
            rng.gen_range(-reach..reach),
        ];
        let expected = hydrogen_oracle(labels, z, p);
        let got = state.density_at(p[0], p[1], p[2]);
        let scale = expected.abs().max(got.abs());
        if scale > 0.0 {
            worst = worst.max((got - expected).abs() / scale);
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// reports

/// One named check: passes iff |value − target| < tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub deviation: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        let deviation = (value - target).abs();
        Self {
            name: name.to_string(),
            value,
            target,
            tolerance,
            deviation,
            pass: deviation < tolerance,
        }
    }

    /// value ∈ (lo, hi), expressed as a distance from the midpoint.
    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(name, value, 0.5 * (lo + hi), 0.5 * (hi - lo))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// Grid resolution for the grid-mass check; `None` skips it.
    pub grid_points: Option<usize>,
    pub coverage: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: DEFAULT_SEED,
            grid_points: None,
            coverage: density::DEFAULT_COVERAGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub labels: StateLabels,
    pub params: PotentialParams,
    pub quasi: QuasiNumbers,
    pub radial_norm: f64,
    pub angular_norm: f64,
    pub radial_residual_max: f64,
    pub angular_residual_max: f64,
    pub angular_oracle_max: f64,
    pub grid_mass: Option<f64>,
    pub hydrogen_max: Option<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Runs every applicable check on one state.
pub fn verify_state(
    state: &BoundState,
    options: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let radial_norm = quad_radial_norm(state)?;
    let angular_norm = quad_angular_norm(state)?;
    let (radial_res, angular_res) = ode_residuals(state, options.samples, options.seed)?;
    let pts = SamplePoints::for_state(state, options.samples, options.seed)?;
    let angular_oracle = angular_oracle_deviation(state.angular(), &pts.cosines)?;

    let mut checks = vec![
        Check::new("radial_norm", radial_norm, 1.0, NORM_TOL),
        Check::new("angular_norm", angular_norm, 1.0, NORM_TOL),
        Check::new("radial_residual", radial_res, 0.0, RESIDUAL_TOL),
        Check::new("angular_residual", angular_res, 0.0, RESIDUAL_TOL),
        Check::new("angular_oracle", angular_oracle, 0.0, RESIDUAL_TOL),
    ];

    let p = state.params();
    let hydrogen_max =
        (p.b == 0.0 && p.c == 0.0).then(|| hydrogen_deviation(state, 1000, options.seed));
    if let Some(h) = hydrogen_max {
        checks.push(Check::new("hydrogen_oracle", h, 0.0, HYDROGEN_TOL));
    }

    let grid_mass = match options.grid_points {
        Some(n) => {
            let grid = density::build_auto_grid(state, n, options.coverage)?;
            Some(density::grid_mass(&grid))
        }
        None => None,
    };
    if let Some(m) = grid_mass {
        checks.push(Check::within(
            "grid_mass",
            m,
            GRID_MASS_RANGE.0,
            GRID_MASS_RANGE.1,
        ));
    }

    let info = StateInfo::of(state);
    Ok(VerificationReport {
        labels: info.labels,
        params: info.params,
        quasi: info.quasi,
        radial_norm,
        angular_norm,
        radial_residual_max: radial_res,
        angular_residual_max: angular_res,
        angular_oracle_max: angular_oracle,
        grid_mass,
        hydrogen_max,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

// ---------------------------------------------------------------------------
// sweeps

/// Grid settings for the pole-concentration columns of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n_points: usize,
    pub coverage: f64,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub quasi: QuasiNumbers,
    pub mean_radius: f64,
    pub mean_abs_cos: f64,
    /// (level, pole concentration) pairs.
    pub pole_concentration: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub labels: StateLabels,
    pub params: PotentialParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<SweepStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

fn sweep_one(
    labels: StateLabels,
    params: PotentialParams,
    grid: Option<&SweepGrid>,
) -> Result<SweepStats, VerifyError> {
    let state = BoundState::new(labels, params)?;
    let mut pole = Vec::new();
    if let Some(g) = grid {
        if !g.levels.is_empty() {
            let rel = density::normalize_relative(&density::build_auto_grid(
                &state, g.n_points, g.coverage,
            )?)?;
            for &level in &g.levels {
                pole.push((level, surface::pole_concentration(&rel, level)?));
            }
        }
    }
    Ok(SweepStats {
        quasi: *state.quasi(),
        mean_radius: mean_radius(&state)?,
        mean_abs_cos: mean_abs_cos(&state)?,
        pole_concentration: pole,
    })
}

/// Expectation values (and optionally pole concentrations) for each
/// (labels, params) pair. Inadmissible inputs become skipped rows carrying
/// the reason; rows come back in input order.
pub fn sweep_statistics(
    runs: &[(StateLabels, PotentialParams)],
    grid: Option<&SweepGrid>,
) -> Vec<SweepRow> {
    runs.par_iter()
        .map(|&(labels, params)| match sweep_one(labels, params, grid) {
            Ok(stats) => SweepRow {
                labels,
                params,
                stats: Some(stats),
                skipped: None,
            },
            Err(e) => SweepRow {
                labels,
                params,
                stats: None,
                skipped: Some(e.to_string()),
            },
        })
        .collect()
}
