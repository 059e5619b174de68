//! Oscillation profile `g` of the strip boundary and the admissible values of
//! the thinness parameter.
//!
//! A profile is a real trigonometric polynomial in `2πy/L` with `L = 2π/a`.
//! Restricting to bandlimited profiles keeps `g`, `g'` and the mean `ĝ` exact.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Number of samples per period used to bracket the extrema of `g`.
const EXTREMA_SAMPLES: usize = 4096;
const NEWTON_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile is not strictly positive (min g = {min})")]
    NonPositiveProfile { min: f64 },
    #[error("profile too tall: max g = {max} >= pi/2")]
    TooTall { max: f64 },
    #[error("period divisor a must be >= 1 (got {0})")]
    BadPeriod(u32),
    #[error("mode index k must be >= 1")]
    BadMode,
    #[error("non-finite profile coefficient")]
    NonFinite,
    #[error("epsilon denominator m must be >= 1")]
    BadEpsilon,
    #[error("eps * g1 = {0} must stay below pi/2")]
    EpsilonTooLarge(f64),
}

/// One Fourier mode `c cos(2πky/L) + s sin(2πky/L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileMode {
    pub k: u32,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub s: f64,
}

/// Raw, unvalidated profile coefficients as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub a0: f64,
    #[serde(default)]
    pub modes: Vec<ProfileMode>,
    #[serde(default = "default_divisor")]
    pub a: u32,
}

fn default_divisor() -> u32 {
    1
}

impl ProfileSpec {
    pub fn constant(a0: f64) -> Self {
        Self { a0, modes: Vec::new(), a: 1 }
    }

    /// `g(y) = 1 + 0.5 cos y`, `L = 2π`: the oscillating profile used throughout the tests.
    pub fn reference() -> Self {
        Self { a0: 1.0, modes: vec![ProfileMode { k: 1, c: 0.5, s: 0.0 }], a: 1 }
    }

    pub fn validate(&self) -> Result<BoundaryProfile, ProfileError> {
        BoundaryProfile::new(self.clone())
    }
}

/// A validated, L-periodic boundary profile with cached extrema.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile {
    spec: ProfileSpec,
    period: f64,
    g1: f64,
    g_min: f64,
}

impl BoundaryProfile {
    pub fn new(spec: ProfileSpec) -> Result<Self, ProfileError> {
        if spec.a < 1 {
            return Err(ProfileError::BadPeriod(spec.a));
        }
        if spec.modes.iter().any(|m| m.k == 0) {
            return Err(ProfileError::BadMode);
        }
        if !spec.a0.is_finite() || spec.modes.iter().any(|m| !m.c.is_finite() || !m.s.is_finite()) {
            return Err(ProfileError::NonFinite);
        }
        let period = 2.0 * PI / spec.a as f64;
        let mut profile = Self { spec, period, g1: 0.0, g_min: 0.0 };
        let (g_min, g1) = profile.extrema();
        profile.g1 = g1;
        profile.g_min = g_min;
        if g_min <= 0.0 {
            return Err(ProfileError::NonPositiveProfile { min: g_min });
        }
        if g1 >= FRAC_PI_2 {
            return Err(ProfileError::TooTall { max: g1 });
        }
        Ok(profile)
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    /// Period `L = 2π/a`.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn divisor(&self) -> u32 {
        self.spec.a
    }

    /// Maximum of `g` over a period.
    pub fn g1(&self) -> f64 {
        self.g1
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    /// Mean of `g` over one period; exactly `a0` for a trigonometric polynomial.
    pub fn mean(&self) -> f64 {
        self.spec.a0
    }

    pub fn is_constant(&self) -> bool {
        self.spec.modes.iter().all(|m| m.c == 0.0 && m.s == 0.0)
    }

    #[inline]
    fn phase(&self, k: u32, y: f64) -> f64 {
        // Reduce y first so that eval(y) and eval(y + L) see the same argument.
        let t = y.rem_euclid(self.period) / self.period;
        2.0 * PI * (k as f64) * t
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.spec.modes.iter().fold(self.spec.a0, |acc, m| {
            let (s, c) = self.phase(m.k, y).sin_cos();
            acc + m.c * c + m.s * s
        })
    }

    pub fn eval_deriv(&self, y: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        self.spec.modes.iter().fold(0.0, |acc, m| {
            let (s, c) = self.phase(m.k, y).sin_cos();
            let wk = w * m.k as f64;
            acc + wk * (m.s * c - m.c * s)
        })
    }

    pub fn eval_deriv2(&self, y: f64) -> f64 {
        let w = 2.0 * PI / self.period;
        self.spec.modes.iter().fold(0.0, |acc, m| {
            let (s, c) = self.phase(m.k, y).sin_cos();
            let wk = w * m.k as f64;
            acc - wk * wk * (m.c * c + m.s * s)
        })
    }

    /// Dense sampling brackets every critical point; Newton on `g'` polishes each one.
    fn extrema(&self) -> (f64, f64) {
        if self.is_constant() {
            return (self.spec.a0, self.spec.a0);
        }
        let n = EXTREMA_SAMPLES.max(64 * self.spec.modes.iter().map(|m| m.k as usize).max().unwrap_or(1));
        let h = self.period / n as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let y0 = i as f64 * h;
            let v = self.eval(y0);
            lo = lo.min(v);
            hi = hi.max(v);
            let (d0, d1) = (self.eval_deriv(y0), self.eval_deriv(y0 + h));
            if d0 == 0.0 || d0.signum() != d1.signum() {
                if let Some(root) = self.refine_critical(y0, y0 + h) {
                    let v = self.eval(root);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    fn refine_critical(&self, a: f64, b: f64) -> Option<f64> {
        let (mut lo, mut hi) = (a, b);
        let mut x = 0.5 * (a + b);
        for _ in 0..60 {
            let d = self.eval_deriv(x);
            if d.abs() < 1e-15 {
                return Some(x);
            }
            if self.eval_deriv(lo).signum() == d.signum() {
                lo = x;
            } else {
                hi = x;
            }
            let dd = self.eval_deriv2(x);
            let newton = if dd != 0.0 { x - d / dd } else { f64::NAN };
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - x).abs() < NEWTON_TOL * self.period {
                return Some(next);
            }
            x = next;
        }
        Some(x)
    }
}

/// Thinness parameter restricted to `ε = 1/m` so the strip holds whole cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpsilonValue(u32);

impl EpsilonValue {
    pub fn new(m: u32) -> Result<Self, ProfileError> {
        if m == 0 {
            return Err(ProfileError::BadEpsilon);
        }
        Ok(Self(m))
    }

    pub fn m(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        1.0 / self.0 as f64
    }

    /// Number of oscillation cells across `[0, 2π]`: `2π/(εL) = a·m`.
    pub fn cells(self, profile: &BoundaryProfile) -> usize {
        profile.divisor() as usize * self.0 as usize
    }

    /// Checks `ε g₁ < π/2`, required for the cosine weights to stay positive.
    pub fn check_against(self, profile: &BoundaryProfile) -> Result<(), ProfileError> {
        let top = self.value() * profile.g1();
        if top >= FRAC_PI_2 {
            return Err(ProfileError::EpsilonTooLarge(top));
        }
        Ok(())
    }
}

impl std::fmt::Display for EpsilonValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "1/{}", self.0)
    }
}
