//! Special functions for the separated equations.
//!
//! Everything here works on real, positive arguments only:
//!
//! - [`log_gamma`] evaluates ln Γ(x) for x > 0,
//! - [`kummer_terminating`] evaluates F(−n, β, x) as a finite polynomial,
//! - [`AngularFunction`] evaluates the normalized universal associated
//!   Legendre function
//!
//! ```text
//! H(x) = N (1 − x²)^{m′/2} |x|^{γ₁} Σ_{ν=0}^{k} a_ν x^{2k−2ν},
//! a_ν = (−1)^ν Γ(k+γ₁−ν+1) Γ(2l′−2ν+1)
//!       / (2^{l′} ν! (k−ν)! Γ(2k+2γ₁−2ν+1) Γ(l′−ν+1)),
//! ```
//!
//! which solves
//! `(1−x²)H″ − 2xH′ + [l′(l′+1) − m′²/(1−x²) − c/x²]H = 0` with
//! `c = γ₁(γ₁ − 1)` and `l′ = 2k + γ₁ + m′`.
//!
//! The coefficients a_ν are products and quotients of gamma functions that
//! overflow f64 long before the polynomial itself does, so they are formed
//! as [`SignedLogValue`]s and only exponentiated once combined with the
//! normalization constant.

use std::ops::Mul;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad;

/// Tolerance on `|∫H² dx − 1|` above which the closed-form normalization is
/// replaced by the quadrature one.
pub const NORM_CROSSCHECK_TOL: f64 = 1e-8;

/// Refinement tolerance for the angular normalization integral.
pub const ANGULAR_QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("log_gamma requires a positive argument, got {0}")]
    NonPositiveGamma(f64),
    #[error("Kummer series requires β > 0, got {0}")]
    InvalidBeta(f64),
    #[error("angular argument {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("derivatives are undefined at x = {x} for γ₁ = {gamma1}")]
    ExcludedPoint { x: f64, gamma1: f64 },
    #[error("invalid universal Legendre parameters: {0}")]
    InvalidSpec(String),
    #[error("angular normalization integral failed: {0}")]
    Quadrature(#[from] quad::QuadError),
}

// Lanczos approximation, g = 671/128, 14 terms.
const LANCZOS_G_HALF: f64 = 5.242_187_5;
const LANCZOS_SERIES_0: f64 = 0.999_999_999_999_997_1;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// ln Γ(x) for x > 0.
///
/// Lanczos series; absolute error is a few ulps of `max(1, |ln Γ(x)|)` on
/// [1e−3, 1e4]. Integer arguments up to 20 take the exact factorial path.
pub fn log_gamma(x: f64) -> Result<f64, SpecfunError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecfunError::NonPositiveGamma(x));
    }
    if x.fract() == 0.0 && x <= 21.0 {
        let mut acc = 1.0_f64;
        for i in 2..(x as u32) {
            acc *= i as f64;
        }
        return Ok(acc.ln());
    }
    let tmp = x + LANCZOS_G_HALF;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = LANCZOS_SERIES_0;
    let mut y = x;
    for c in LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    Ok(tmp + (SQRT_2PI * ser / x).ln())
}

fn lgam(x: f64) -> f64 {
    // Callers only pass arguments that are positive by construction.
    log_gamma(x).expect("gamma argument positive by construction")
}

/// A real number stored as sign and natural log of its magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLogValue {
    /// −1, 0 or +1.
    pub sign: i8,
    /// ln |value|; meaningless when `sign == 0`.
    pub log_magnitude: f64,
}

impl SignedLogValue {
    pub const ZERO: Self = Self {
        sign: 0,
        log_magnitude: f64::NEG_INFINITY,
    };
    pub const ONE: Self = Self {
        sign: 1,
        log_magnitude: 0.0,
    };

    pub fn new(sign: i8, log_magnitude: f64) -> Self {
        if sign == 0 {
            Self::ZERO
        } else {
            Self {
                sign: sign.signum(),
                log_magnitude,
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: if x > 0.0 { 1 } else { -1 },
                log_magnitude: x.abs().ln(),
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.exp(),
        }
    }

    /// Multiplies by `e^{log_factor}`.
    pub fn scale_log(self, log_factor: f64) -> Self {
        if self.sign == 0 {
            self
        } else {
            Self {
                sign: self.sign,
                log_magnitude: self.log_magnitude + log_factor,
            }
        }
    }
}

impl Mul for SignedLogValue {
    type Output = SignedLogValue;

    fn mul(self, rhs: SignedLogValue) -> SignedLogValue {
        if self.sign == 0 || rhs.sign == 0 {
            Self::ZERO
        } else {
            Self {
                sign: self.sign * rhs.sign,
                log_magnitude: self.log_magnitude + rhs.log_magnitude,
            }
        }
    }
}

/// F(−n_r, β, x) = Σ_{j=0}^{n_r} (−n_r)_j x^j / ((β)_j j!).
pub fn kummer_terminating(n_r: u32, beta: f64, x: f64) -> Result<f64, SpecfunError> {
    if !(beta > 0.0) {
        return Err(SpecfunError::InvalidBeta(beta));
    }
    Ok(kummer_unchecked(n_r, beta, x))
}

pub(crate) fn kummer_unchecked(n_r: u32, beta: f64, x: f64) -> f64 {
    let n = f64::from(n_r);
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 0..n_r {
        let j = f64::from(j);
        term *= (j - n) * x / ((beta + j) * (j + 1.0));
        sum += term;
    }
    sum
}

/// Parameters of one universal associated Legendre function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UalpSpec {
    pub k: u32,
    pub gamma1: f64,
    pub m_prime: f64,
    pub l_prime: f64,
}

impl UalpSpec {
    pub fn new(k: u32, gamma1: f64, m_prime: f64) -> Result<Self, SpecfunError> {
        if !(gamma1 >= 0.0) || !gamma1.is_finite() {
            return Err(SpecfunError::InvalidSpec(format!(
                "γ₁ = {gamma1} must be ≥ 0"
            )));
        }
        if !(m_prime >= 0.0) || !m_prime.is_finite() {
            return Err(SpecfunError::InvalidSpec(format!(
                "m′ = {m_prime} must be ≥ 0"
            )));
        }
        Ok(Self {
            k,
            gamma1,
            m_prime,
            l_prime: 2.0 * f64::from(k) + gamma1 + m_prime,
        })
    }

    /// The c that produces this γ₁ (γ₁(γ₁ − 1)); zero for γ₁ ∈ {0, 1}.
    pub fn barrier_c(&self) -> f64 {
        self.gamma1 * (self.gamma1 - 1.0)
    }

    fn gamma1_is_integer(&self) -> bool {
        self.gamma1.fract() == 0.0
    }
}

/// The k + 1 polynomial coefficients a_ν (coefficient of x^{2k−2ν}), built
/// from log-gamma sums with the (−1)^ν sign carried separately.
pub fn ualp_coefficients(spec: &UalpSpec) -> Vec<SignedLogValue> {
    let k = f64::from(spec.k);
    let g = spec.gamma1;
    let l = spec.l_prime;
    let ln2 = std::f64::consts::LN_2;
    (0..=spec.k)
        .map(|nu_i| {
            let nu = f64::from(nu_i);
            let log_mag = lgam(k + g - nu + 1.0) + lgam(2.0 * l - 2.0 * nu + 1.0)
                - l * ln2
                - lgam(nu + 1.0)
                - lgam(k - nu + 1.0)
                - lgam(2.0 * k + 2.0 * g - 2.0 * nu + 1.0)
                - lgam(l - nu + 1.0);
            SignedLogValue::new(if nu_i % 2 == 0 { 1 } else { -1 }, log_mag)
        })
        .collect()
}

/// ln N from the closed-form normalization constant
///
/// ```text
/// N = 2^{γ₁} √( k!(2l′+1)Γ(2k+2γ₁+1)Γ(l′−k+1)
///              / (2Γ(l′−k−γ₁+1)Γ(k+γ₁+1)Γ(2l′−2k+1)) ).
/// ```
pub fn log_closed_form_norm(spec: &UalpSpec) -> f64 {
    let k = f64::from(spec.k);
    let g = spec.gamma1;
    let l = spec.l_prime;
    let ln2 = std::f64::consts::LN_2;
    // l′ − k − γ₁ + 1 = k + m′ + 1 > 0 for every valid spec.
    let inner =
        lgam(k + 1.0) + (2.0 * l + 1.0).ln() + lgam(2.0 * k + 2.0 * g + 1.0) + lgam(l - k + 1.0)
            - ln2
            - lgam(k + spec.m_prime + 1.0)
            - lgam(k + g + 1.0)
            - lgam(2.0 * l - 2.0 * k + 1.0);
    g * ln2 + 0.5 * inner
}

/// Where the normalization constant in use came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSource {
    ClosedForm,
    Quadrature,
}

/// Outcome of the construction-time normalization cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormDiagnostic {
    pub source: NormSource,
    /// ∫_{−1}^{1} H² dx with the closed-form constant.
    pub closed_form_integral: f64,
    /// |closed_form_integral − 1|.
    pub deviation: f64,
}

/// A normalized universal associated Legendre function ready for repeated
/// evaluation.
#[derive(Debug, Clone)]
pub struct AngularFunction {
    spec: UalpSpec,
    /// N·a_ν, highest power of x² first.
    poly: Vec<f64>,
    log_norm: f64,
    diagnostic: NormDiagnostic,
}

impl AngularFunction {
    /// Builds coefficients and the closed-form normalization, then checks
    /// ∫H² dx = 1 by quadrature. A deviation beyond
    /// [`NORM_CROSSCHECK_TOL`] switches to the quadrature constant.
    pub fn new(spec: UalpSpec) -> Result<Self, SpecfunError> {
        let coefficients = ualp_coefficients(&spec);
        let log_norm = log_closed_form_norm(&spec);
        let mut this = Self {
            spec,
            poly: coefficients
                .iter()
                .map(|c| c.scale_log(log_norm).to_f64())
                .collect(),
            log_norm,
            diagnostic: NormDiagnostic {
                source: NormSource::ClosedForm,
                closed_form_integral: f64::NAN,
                deviation: f64::NAN,
            },
        };
        let integral = this.norm_integral()?;
        let deviation = (integral - 1.0).abs();
        this.diagnostic = NormDiagnostic {
            source: NormSource::ClosedForm,
            closed_form_integral: integral,
            deviation,
        };
        if !(deviation <= NORM_CROSSCHECK_TOL) {
            let fix = -0.5 * integral.ln();
            this.log_norm += fix;
            for c in &mut this.poly {
                *c *= fix.exp();
            }
            this.diagnostic.source = NormSource::Quadrature;
        }
        Ok(this)
    }

    pub fn spec(&self) -> &UalpSpec {
        &self.spec
    }

    pub fn diagnostic(&self) -> &NormDiagnostic {
        &self.diagnostic
    }

    /// ln N of the constant actually in use.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// ∫_{−1}^{1} H(x)² dx, split at the |x|^{2γ₁} cusp.
    pub fn norm_integral(&self) -> Result<f64, SpecfunError> {
        let q = quad::integrate(
            |x| {
                let h = self.eval(x);
                h * h
            },
            quad::angular_breakpoints(),
            ANGULAR_QUAD_TOL,
        )?;
        Ok(q.value)
    }

    /// H(x) on [−1, 1]; the even extension |x|^{γ₁} is used for x < 0.
    pub fn value(&self, x: f64) -> Result<f64, SpecfunError> {
        if !(x.abs() <= 1.0) {
            return Err(SpecfunError::OutOfRange(x));
        }
        Ok(self.eval(x))
    }

    /// H(x) without the range check; callers guarantee |x| ≤ 1.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let t = x * x;
        let mut p = 0.0;
        for &c in &self.poly {
            p = p * t + c;
        }
        p * self.envelope(x.abs(), t)
    }

    /// H(x)², the factor the density uses.
    #[inline]
    pub fn eval_sq(&self, x: f64) -> f64 {
        let h = self.eval(x);
        h * h
    }

    #[inline]
    fn envelope(&self, ax: f64, t: f64) -> f64 {
        let s = &self.spec;
        let equator = if s.gamma1 == 0.0 {
            1.0
        } else if s.gamma1 == 1.0 {
            ax
        } else {
            ax.powf(s.gamma1)
        };
        let axis = if s.m_prime == 0.0 {
            1.0
        } else {
            let one_minus = 1.0 - t;
            if one_minus <= 0.0 {
                0.0
            } else {
                one_minus.powf(0.5 * s.m_prime)
            }
        };
        equator * axis
    }

    /// (H, dH/dx, d²H/dx²) on (−1, 1).
    ///
    /// The polynomial is rebuilt here from the ratio recurrence
    /// `a_{ν+1}/a_ν = −(k−ν)(2k+2γ₁−2ν−1) / ((ν+1)(2l′−2ν−1))`
    /// rather than reusing [`ualp_coefficients`], so agreement between
    /// `derivatives(x).0` and [`AngularFunction::value`] checks both routes.
    /// x = 0 is excluded for non-integer γ₁; for γ₁ = 1 the right-hand
    /// derivative is returned there.
    pub fn derivatives(&self, x: f64) -> Result<(f64, f64, f64), SpecfunError> {
        let s = &self.spec;
        if !(x.abs() < 1.0) {
            return Err(SpecfunError::OutOfRange(x));
        }
        if x == 0.0 && !s.gamma1_is_integer() {
            return Err(SpecfunError::ExcludedPoint {
                x,
                gamma1: s.gamma1,
            });
        }
        let ax = x.abs();
        let k = f64::from(s.k);
        let g = s.gamma1;
        let l = s.l_prime;

        // leading coefficient N·a_0
        let lead = SignedLogValue::new(
            1,
            lgam(k + g + 1.0) + lgam(2.0 * l + 1.0)
                - l * std::f64::consts::LN_2
                - lgam(k + 1.0)
                - lgam(2.0 * k + 2.0 * g + 1.0)
                - lgam(l + 1.0),
        )
        .scale_log(self.log_norm)
        .to_f64();

        let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
        let mut b = lead;
        for nu in 0..=s.k {
            let nuf = f64::from(nu);
            let power = 2.0 * (k - nuf);
            p += b * ax.powf(power);
            if power >= 1.0 {
                dp += b * power * ax.powf(power - 1.0);
            }
            if power >= 2.0 {
                ddp += b * power * (power - 1.0) * ax.powf(power - 2.0);
            }
            if nu < s.k {
                b *= -(k - nuf) * (2.0 * k + 2.0 * g - 2.0 * nuf - 1.0)
                    / ((nuf + 1.0) * (2.0 * l - 2.0 * nuf - 1.0));
            }
        }

        // equatorial factor B = x^{γ₁}
        let (eb, deb, ddeb) = if g == 0.0 {
            (1.0, 0.0, 0.0)
        } else if g == 1.0 {
            (ax, 1.0, 0.0)
        } else {
            (
                ax.powf(g),
                g * ax.powf(g - 1.0),
                g * (g - 1.0) * ax.powf(g - 2.0),
            )
        };
        // axial factor A = (1 − x²)^{m′/2}
        let one_minus = 1.0 - ax * ax;
        let mp = s.m_prime;
        let ea = one_minus.powf(0.5 * mp);
        let alpha = -mp * ax / one_minus;
        let dalpha = -mp * (1.0 + ax * ax) / (one_minus * one_minus);
        let dea = ea * alpha;
        let ddea = ea * (alpha * alpha + dalpha);

        let env = ea * eb;
        let denv = dea * eb + ea * deb;
        let ddenv = ddea * eb + 2.0 * dea * deb + ea * ddeb;

        let h = env * p;
        let dh = denv * p + env * dp;
        let ddh = ddenv * p + 2.0 * denv * dp + env * ddp;
        // even extension: H(−x) = H(x)
        let dh = if x < 0.0 { -dh } else { dh };
        Ok((h, dh, ddh))
    }

    /// Relative residual of the angular equation at x, measured against the
    /// sum of the magnitudes of its terms.
    pub fn ode_residual(&self, x: f64) -> Result<f64, SpecfunError> {
        let (h, dh, ddh) = self.derivatives(x)?;
        let s = &self.spec;
        let one_minus = 1.0 - x * x;
        let c = s.barrier_c();
        let t1 = one_minus * ddh;
        let t2 = -2.0 * x * dh;
        let t3 = s.l_prime * (s.l_prime + 1.0) * h;
        let t4 = -s.m_prime * s.m_prime / one_minus * h;
        let t5 = if c == 0.0 { 0.0 } else { -c / (x * x) * h };
        let scale = t1.abs() + t2.abs() + t3.abs() + t4.abs() + t5.abs();
        let sum = t1 + t2 + t3 + t4 + t5;
        Ok(if scale == 0.0 { 0.0 } else { sum.abs() / scale })
    }
}

/// H(x) for a one-off evaluation. Builds (and cross-checks) the
/// normalization each call; hold an [`AngularFunction`] for repeated use.
pub fn angular_h(spec: &UalpSpec, x: f64) -> Result<f64, SpecfunError> {
    if !(x.abs() <= 1.0) {
        return Err(SpecfunError::OutOfRange(x));
    }
    AngularFunction::new(*spec)?.value(x)
}

/// (H, H′, H″) at an interior point; see [`AngularFunction::derivatives`].
pub fn angular_h_derivatives(spec: &UalpSpec, x: f64) -> Result<(f64, f64, f64), SpecfunError> {
    AngularFunction::new(*spec)?.derivatives(x)
}
