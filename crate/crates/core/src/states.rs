//! Bound states of the double ring-shaped Coulomb potential.
//!
//! Atomic units throughout (ħ = M = e = a₀ = 1). A state is labelled by the
//! hydrogen-like integers (n, l, m); the potential parameters b and c shift
//! those to generally non-integer quasi numbers
//!
//! ```text
//! m′ = √(b + m²)
//! γ₁ = (1 + √(1 + 4c))/2          (c > 0)
//!    = (l − |m|) mod 2            (c = 0)
//! l′ = 2k + γ₁ + m′,  λ = l′(l′ + 1)
//! n′ = n_r + l′ + 1,  E = −Z²/(2n′²)
//! ```
//!
//! with n_r = n − l − 1 radial nodes and k = ⌊(l − |m|)/2⌋ angular nodes per
//! hemisphere. For c > 0 only the regular branch exists, and it joins the
//! γ₁ = 1 branch of c = 0 continuously, so l − |m| must be odd there.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{self, AngularFunction, SpecfunError, UalpSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("imaginary order: b + m² = {value} < 0 (b = {b}, m = {m})")]
    ImaginaryOrder { b: f64, m: i32, value: f64 },
    #[error("no γ₁-branch state: c = {c} > 0 requires odd l − |m|, got l = {l}, m = {m}")]
    NoGammaBranch { l: u32, m: i32, c: f64 },
    #[error("c = {0} must be ≥ 0")]
    NegativeC(f64),
    #[error("nuclear charge Z = {0} must be > 0")]
    InvalidCharge(f64),
    #[error("invalid labels (n, l, m) = ({n}, {l}, {m}): {reason}")]
    InvalidLabels {
        n: u32,
        l: u32,
        m: i32,
        reason: &'static str,
    },
    #[error("potential pole in the {term} term (diverges to {}∞)", if *sign > 0 { "+" } else { "−" })]
    Pole { term: &'static str, sign: i8 },
    #[error("coordinate out of domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

impl StateError {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            StateError::ImaginaryOrder { .. } => "imaginary_order",
            StateError::NoGammaBranch { .. } => "no_gamma_branch",
            StateError::NegativeC(_) => "negative_c",
            StateError::InvalidCharge(_) => "invalid_charge",
            StateError::InvalidLabels { .. } => "invalid_labels",
            StateError::Pole { .. } => "pole",
            StateError::Domain(_) => "domain",
            StateError::Specfun(_) => "special_function",
        }
    }
}

/// Physical inputs Z, b, c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    #[serde(rename = "Z")]
    pub z: f64,
    pub b: f64,
    pub c: f64,
}

impl PotentialParams {
    pub fn new(z: f64, b: f64, c: f64) -> Result<Self, StateError> {
        let p = Self { z, b, c };
        p.validate()?;
        Ok(p)
    }

    /// Z = 1 with the given ring strengths.
    pub fn unit_charge(b: f64, c: f64) -> Result<Self, StateError> {
        Self::new(1.0, b, c)
    }

    pub fn validate(&self) -> Result<(), StateError> {
        if !(self.z > 0.0) || !self.z.is_finite() {
            return Err(StateError::InvalidCharge(self.z));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(StateError::NegativeC(self.c));
        }
        if !self.b.is_finite() {
            return Err(StateError::Domain(format!("b = {} is not finite", self.b)));
        }
        Ok(())
    }
}

/// Physical labels (n, l, m).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateLabels {
    pub n: u32,
    pub l: u32,
    pub m: i32,
}

impl StateLabels {
    pub fn new(n: u32, l: u32, m: i32) -> Self {
        Self { n, l, m }
    }
}

impl std::fmt::Display for StateLabels {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.n, self.l, self.m)
    }
}

/// Derived descriptor of one bound state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiNumbers {
    pub m_prime: f64,
    pub gamma1: f64,
    pub k: u32,
    pub l_prime: f64,
    pub n_r: u32,
    pub n_prime: f64,
    pub lambda: f64,
    pub energy: f64,
}

impl QuasiNumbers {
    pub fn ualp_spec(&self) -> UalpSpec {
        UalpSpec {
            k: self.k,
            gamma1: self.gamma1,
            m_prime: self.m_prime,
            l_prime: self.l_prime,
        }
    }
}

/// Equatorial exponent for c > 0.
pub fn gamma1_for(c: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * c).sqrt())
}

pub fn map_quantum_numbers(
    labels: StateLabels,
    params: PotentialParams,
) -> Result<QuasiNumbers, StateError> {
    params.validate()?;
    let StateLabels { n, l, m } = labels;
    if n < 1 {
        return Err(StateError::InvalidLabels {
            n,
            l,
            m,
            reason: "n must be ≥ 1",
        });
    }
    if l + 1 > n {
        return Err(StateError::InvalidLabels {
            n,
            l,
            m,
            reason: "n − l − 1 must be ≥ 0",
        });
    }
    if m.unsigned_abs() > l {
        return Err(StateError::InvalidLabels {
            n,
            l,
            m,
            reason: "|m| must be ≤ l",
        });
    }
    let mf = f64::from(m);
    let order_sq = params.b + mf * mf;
    if order_sq < 0.0 {
        return Err(StateError::ImaginaryOrder {
            b: params.b,
            m,
            value: order_sq,
        });
    }
    let m_prime = order_sq.sqrt();
    let angular_nodes = l - m.unsigned_abs();
    let (gamma1, k) = if params.c > 0.0 {
        if angular_nodes % 2 == 0 {
            return Err(StateError::NoGammaBranch { l, m, c: params.c });
        }
        (gamma1_for(params.c), (angular_nodes - 1) / 2)
    } else {
        let g = angular_nodes % 2;
        (f64::from(g), (angular_nodes - g) / 2)
    };
    let l_prime = 2.0 * f64::from(k) + gamma1 + m_prime;
    let n_r = n - l - 1;
    let n_prime = f64::from(n_r) + l_prime + 1.0;
    Ok(QuasiNumbers {
        m_prime,
        gamma1,
        k,
        l_prime,
        n_r,
        n_prime,
        lambda: l_prime * (l_prime + 1.0),
        energy: energy_for(params.z, n_prime),
    })
}

fn energy_for(z: f64, n_prime: f64) -> f64 {
    -z * z / (2.0 * n_prime * n_prime)
}

/// E = −Z²/(2n′²); Z = 1 unless the state was built with another charge.
pub fn energy(q: &QuasiNumbers) -> f64 {
    q.energy
}

/// V(r, θ) = −Z/r + (b/sin²θ + c/cos²θ)/(2r²).
pub fn potential_v(params: &PotentialParams, r: f64, theta: f64) -> Result<f64, StateError> {
    if !(r > 0.0) {
        return Err(StateError::Domain(format!("r = {r} must be > 0")));
    }
    if !(0.0..=PI).contains(&theta) {
        return Err(StateError::Domain(format!("θ = {theta} outside [0, π]")));
    }
    // f64 cannot hit sin π = 0 or cos π/2 = 0 exactly
    const POLE_EPS: f64 = 1e-15;
    let (s, c) = theta.sin_cos();
    let mut angular = 0.0;
    if params.b != 0.0 {
        if s.abs() < POLE_EPS {
            return Err(StateError::Pole {
                term: "b/sin²θ",
                sign: sign_of(params.b),
            });
        }
        angular += params.b / (s * s);
    }
    if params.c != 0.0 {
        if c.abs() < POLE_EPS {
            return Err(StateError::Pole {
                term: "c/cos²θ",
                sign: sign_of(params.c),
            });
        }
        angular += params.c / (c * c);
    }
    Ok(-params.z / r + angular / (2.0 * r * r))
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else {
        -1
    }
}

/// A fully constructed bound state: quasi numbers plus precomputed angular
/// coefficients and radial prefactor. Immutable and cheap to share.
#[derive(Debug, Clone)]
pub struct BoundState {
    labels: StateLabels,
    params: PotentialParams,
    quasi: QuasiNumbers,
    angular: AngularFunction,
    /// 2Z/n′: ρ = kappa·r.
    kappa: f64,
    /// ln of the radial normalization prefactor.
    log_prefactor: f64,
    /// ln(prefactor·κ^{l′+1}), used by u/r.
    log_prefactor_over_r: f64,
    beta: f64,
}

impl BoundState {
    pub fn new(labels: StateLabels, params: PotentialParams) -> Result<Self, StateError> {
        let quasi = map_quantum_numbers(labels, params)?;
        let angular = AngularFunction::new(quasi.ualp_spec())?;
        let z = params.z;
        let np = quasi.n_prime;
        let lp = quasi.l_prime;
        let lg = |x: f64| specfun::log_gamma(x);
        let log_prefactor = 0.5
            * (z.ln() + lg(np + lp + 1.0)? - lg(f64::from(quasi.n_r) + 1.0)? - 2.0 * np.ln())
            - lg(2.0 * lp + 2.0)?;
        let kappa = 2.0 * z / np;
        Ok(Self {
            labels,
            params,
            quasi,
            angular,
            kappa,
            log_prefactor,
            log_prefactor_over_r: log_prefactor + (lp + 1.0) * kappa.ln(),
            beta: 2.0 * lp + 2.0,
        })
    }

    pub fn labels(&self) -> StateLabels {
        self.labels
    }

    pub fn params(&self) -> PotentialParams {
        self.params
    }

    pub fn quasi(&self) -> &QuasiNumbers {
        &self.quasi
    }

    pub fn angular(&self) -> &AngularFunction {
        &self.angular
    }

    pub fn energy(&self) -> f64 {
        self.quasi.energy
    }

    /// Scale factor κ = 2Z/n′ of the radial variable ρ = κr.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// u(r); zero at the origin since l′ + 1 > 0.
    pub fn radial_u(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let rho = self.kappa * r;
        let q = &self.quasi;
        let log_env = self.log_prefactor + (q.l_prime + 1.0) * rho.ln() - 0.5 * rho;
        log_env.exp() * specfun::kummer_unchecked(q.n_r, self.beta, rho)
    }

    /// u(r)/r, with its finite limit at r = 0 when l′ = 0.
    #[inline]
    pub fn radial_u_over_r(&self, r: f64) -> f64 {
        let q = &self.quasi;
        if r <= 0.0 {
            return if q.l_prime == 0.0 {
                self.log_prefactor_over_r.exp()
            } else {
                0.0
            };
        }
        let rho = self.kappa * r;
        let log_env = if q.l_prime == 0.0 {
            self.log_prefactor_over_r - 0.5 * rho
        } else {
            self.log_prefactor_over_r + q.l_prime * r.ln() - 0.5 * rho
        };
        log_env.exp() * specfun::kummer_unchecked(q.n_r, self.beta, rho)
    }

    /// (u, du/dr, d²u/dr²) at r > 0 from the analytic derivatives of the
    /// envelope ρ^{l′+1}e^{−ρ/2} and of the Kummer polynomial.
    pub fn radial_u_derivatives(&self, r: f64) -> Result<(f64, f64, f64), StateError> {
        if !(r > 0.0) {
            return Err(StateError::Domain(format!("r = {r} must be > 0")));
        }
        let q = &self.quasi;
        let rho = self.kappa * r;
        let a = q.l_prime + 1.0;
        let w = (self.log_prefactor + a * rho.ln() - 0.5 * rho).exp();
        let (f, df, ddf) = kummer_with_derivatives(q.n_r, self.beta, rho);
        let s = a / rho - 0.5;
        let u = w * f;
        let du = self.kappa * w * (s * f + df);
        let ddu =
            self.kappa * self.kappa * w * ((s * s - a / (rho * rho)) * f + 2.0 * s * df + ddf);
        Ok((u, du, ddu))
    }

    /// Relative residual of u″ + (2E + 2Z/r − λ/r²)u = 0 at r, measured
    /// against the sum of the term magnitudes.
    pub fn radial_residual(&self, r: f64, energy: f64) -> Result<f64, StateError> {
        let (u, _, ddu) = self.radial_u_derivatives(r)?;
        let t = [
            ddu,
            2.0 * energy * u,
            2.0 * self.params.z / r * u,
            -self.quasi.lambda / (r * r) * u,
        ];
        let scale: f64 = t.iter().map(|v| v.abs()).sum();
        let sum: f64 = t.iter().sum();
        Ok(if scale == 0.0 { 0.0 } else { sum.abs() / scale })
    }

    /// |Ψ|² = (1/2π)(u/r)² H²(cos θ).
    pub fn wavefunction_modulus_sq(&self, r: f64, theta: f64) -> f64 {
        let ur = self.radial_u_over_r(r);
        let x = theta.cos().clamp(-1.0, 1.0);
        ur * ur * self.angular.eval_sq(x) / (2.0 * PI)
    }

    /// ρ(x, y, z) with r = √(x² + y² + z²), cos θ = z/r.
    #[inline]
    pub fn density_at(&self, x: f64, y: f64, z: f64) -> f64 {
        let r = (x * x + y * y + z * z).sqrt();
        if r == 0.0 {
            if self.quasi.l_prime > 0.0 {
                return 0.0;
            }
            // l′ = 0 is the spherically symmetric s state
            let ur = self.radial_u_over_r(0.0);
            return ur * ur * self.angular.eval_sq(1.0) / (2.0 * PI);
        }
        let ur = self.radial_u_over_r(r);
        let cos = (z / r).clamp(-1.0, 1.0);
        ur * ur * self.angular.eval_sq(cos) / (2.0 * PI)
    }
}

fn kummer_with_derivatives(n_r: u32, beta: f64, x: f64) -> (f64, f64, f64) {
    let n = f64::from(n_r);
    let mut term = 1.0;
    let (mut f, mut df, mut ddf) = (1.0, 0.0, 0.0);
    // t_j x^j accumulated through the coefficient c_j = t_j
    for j in 0..n_r {
        let jf = f64::from(j);
        term *= (jf - n) / ((beta + jf) * (jf + 1.0));
        let p = jf + 1.0;
        f += term * x.powf(p);
        df += term * p * x.powf(p - 1.0);
        if p >= 2.0 {
            ddf += term * p * (p - 1.0) * x.powf(p - 2.0);
        }
    }
    (f, df, ddf)
}

/// u(r) for a one-off evaluation; see [`BoundState::radial_u`].
pub fn radial_u(labels: StateLabels, params: PotentialParams, r: f64) -> Result<f64, StateError> {
    if !(r >= 0.0) {
        return Err(StateError::Domain(format!("r = {r} must be ≥ 0")));
    }
    Ok(BoundState::new(labels, params)?.radial_u(r))
}

/// |Ψ(r, θ, φ)|², φ-independent.
pub fn wavefunction_modulus_sq(
    labels: StateLabels,
    params: PotentialParams,
    r: f64,
    theta: f64,
) -> Result<f64, StateError> {
    if !(r > 0.0) {
        return Err(StateError::Domain(format!("r = {r} must be > 0")));
    }
    Ok(BoundState::new(labels, params)?.wavefunction_modulus_sq(r, theta))
}

#[cfg(test)]
mod tests {
    #![allow(clippy::approx_constant)]
    use super::*;
    use approx::assert_relative_eq;

    fn lab(n: u32, l: u32, m: i32) -> StateLabels {
        StateLabels::new(n, l, m)
    }

    fn pp(b: f64, c: f64) -> PotentialParams {
        PotentialParams::unit_charge(b, c).unwrap()
    }

    #[test]
    fn hydrogen_limit_mapping() {
        let q = map_quantum_numbers(lab(2, 1, 0), pp(0.0, 0.0)).unwrap();
        assert_eq!(
            (q.m_prime, q.gamma1, q.k, q.l_prime, q.n_r, q.n_prime),
            (0.0, 1.0, 0, 1.0, 0, 2.0)
        );
        assert_eq!(q.energy, -0.125);
        assert_eq!(q.lambda, 2.0);
    }

    #[test]
    fn double_ring_mapping_examples() {
        let q = map_quantum_numbers(lab(2, 1, 0), pp(0.5, 0.5)).unwrap();
        assert_relative_eq!(q.m_prime, 0.7071068, epsilon = 1e-7);
        assert_relative_eq!(q.gamma1, 1.3660254, epsilon = 1e-7);
        assert_eq!(q.k, 0);
        assert_relative_eq!(q.l_prime, 2.0731322, epsilon = 1e-7);
        assert_relative_eq!(q.n_prime, 3.0731322, epsilon = 1e-7);
        assert_relative_eq!(q.energy, -0.0529429, epsilon = 1e-7);

        let q = map_quantum_numbers(lab(6, 5, 0), pp(0.5, 10.0)).unwrap();
        assert_relative_eq!(q.gamma1, 3.7015621, epsilon = 1e-7);
        assert_eq!(q.k, 2);
        assert_relative_eq!(q.l_prime, 8.4086689, epsilon = 1e-7);
        assert_relative_eq!(q.n_prime, 9.4086689, epsilon = 1e-7);
    }

    #[test]
    fn mapping_errors() {
        assert!(matches!(
            map_quantum_numbers(lab(4, 1, 0), pp(-0.5, 0.5)),
            Err(StateError::ImaginaryOrder { .. })
        ));
        assert!(matches!(
            map_quantum_numbers(lab(3, 2, 0), pp(0.0, 0.5)),
            Err(StateError::NoGammaBranch { .. })
        ));
        assert!(matches!(
            PotentialParams::new(1.0, 0.0, -0.1),
            Err(StateError::NegativeC(_))
        ));
        assert!(matches!(
            map_quantum_numbers(lab(2, 2, 0), pp(0.0, 0.0)),
            Err(StateError::InvalidLabels { .. })
        ));
        assert!(map_quantum_numbers(lab(3, 1, 2), pp(0.0, 0.0)).is_err());
        // b < 0 is fine while b + m² ≥ 0
        assert!(map_quantum_numbers(lab(3, 2, 1), pp(-0.5, 0.5)).is_ok());
    }

    #[test]
    fn even_parity_allowed_without_c() {
        let q = map_quantum_numbers(lab(3, 2, 0), pp(0.5, 0.0)).unwrap();
        assert_eq!((q.gamma1, q.k), (0.0, 1));
    }

    #[test]
    fn continuity_in_c() {
        let base = map_quantum_numbers(lab(4, 3, 0), pp(0.5, 0.0)).unwrap();
        let mut last = f64::INFINITY;
        for c in [1e-2, 1e-4, 1e-6, 1e-8] {
            let q = map_quantum_numbers(lab(4, 3, 0), pp(0.5, c)).unwrap();
            let gap = (q.l_prime - base.l_prime).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-7);
    }

    #[test]
    fn energy_examples() {
        let q = map_quantum_numbers(lab(1, 0, 0), pp(0.0, 0.0)).unwrap();
        assert_eq!(q.n_prime, 1.0);
        assert_eq!(energy(&q), -0.5);
        let q2 = map_quantum_numbers(lab(2, 1, 0), pp(0.0, 0.0)).unwrap();
        assert_eq!(energy(&q2), -0.125);
        assert!(energy(&q) < energy(&q2));
        let q = map_quantum_numbers(lab(2, 1, 0), pp(0.5, 0.5)).unwrap();
        assert_relative_eq!(energy(&q), -0.0529429, epsilon = 1e-7);
    }

    #[test]
    fn potential_examples() {
        let v = potential_v(&pp(0.0, 0.0), 2.0, 1.234).unwrap();
        assert_eq!(v, -0.5);
        let v = potential_v(&pp(0.5, 0.5), 1.0, PI / 4.0).unwrap();
        assert!(v.abs() < 1e-14);
        let e = potential_v(&pp(0.0, 0.5), 1.0, PI / 2.0).unwrap_err();
        assert!(matches!(e, StateError::Pole { sign: 1, .. }));
        let e = potential_v(&pp(-0.3, 0.0), 1.0, 0.0).unwrap_err();
        assert!(matches!(e, StateError::Pole { sign: -1, .. }));
        assert!(potential_v(&pp(0.0, 0.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn radial_examples() {
        let h = BoundState::new(lab(2, 1, 0), pp(0.0, 0.0)).unwrap();
        assert_eq!(h.radial_u(0.0), 0.0);
        let want = 4.0 * (-1.0f64).exp() / (2.0 * 6f64.sqrt());
        assert_relative_eq!(h.radial_u(2.0), want, epsilon = 1e-12);
        assert_relative_eq!(
            radial_u(lab(2, 1, 0), pp(0.0, 0.0), 2.0).unwrap(),
            0.300_372_3,
            epsilon = 1e-7
        );

        let s = BoundState::new(lab(6, 5, 2), pp(0.5, 5.0)).unwrap();
        assert_eq!(s.quasi().n_r, 0);
        for i in 1..200 {
            assert!(s.radial_u(0.25 * f64::from(i)) > 0.0);
        }
    }

    #[test]
    fn u_over_r_consistent() {
        let s = BoundState::new(lab(5, 1, 0), pp(0.5, 0.5)).unwrap();
        for &r in &[0.1, 1.0, 7.5, 30.0] {
            assert_relative_eq!(
                s.radial_u_over_r(r),
                s.radial_u(r) / r,
                max_relative = 1e-12
            );
        }
        let one_s = BoundState::new(lab(1, 0, 0), pp(0.0, 0.0)).unwrap();
        // u = 2r e^{-r}
        assert_relative_eq!(one_s.radial_u_over_r(0.0), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn radial_residual_small() {
        let s = BoundState::new(lab(5, 1, 0), pp(0.5, 0.5)).unwrap();
        for i in 0..50 {
            let r = 0.05 * 1.12f64.powi(i);
            let res = s.radial_residual(r, s.energy()).unwrap();
            assert!(res < 1e-10, "r={r} res={res}");
        }
    }

    #[test]
    fn wavefunction_examples() {
        let h = lab(2, 1, 0);
        let v = wavefunction_modulus_sq(h, pp(0.0, 0.0), 2.0, 0.0).unwrap();
        let want = (-2.0f64).exp() / (8.0 * PI);
        assert_relative_eq!(v, want, epsilon = 1e-14);
        assert_relative_eq!(v, 0.0053848, epsilon = 1e-7);
        let v = wavefunction_modulus_sq(h, pp(0.5, 0.5), 2.0, PI / 2.0).unwrap();
        assert!(v < 1e-30);
        let v = wavefunction_modulus_sq(lab(3, 2, 1), pp(0.0, 0.0), 2.0, 0.0).unwrap();
        assert_eq!(v, 0.0);
    }
}
