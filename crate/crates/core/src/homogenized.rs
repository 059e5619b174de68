//! The homogenized limit equation `-q₀ w₀'' + w₀ = f` on the circle, solved
//! mode by mode for trigonometric forcing.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomogenizedError {
    #[error("homogenized coefficient must be positive (got {0})")]
    NonPositiveQ0(f64),
    #[error("derivative order must be 1..=4 (got {0})")]
    BadOrder(u32),
    #[error("mode index k must be >= 1")]
    BadMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigMode {
    pub k: u32,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

/// `c0 + Σ a_k cos(kφ) + b_k sin(kφ)`, 2π-periodic.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPoly {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub modes: Vec<TrigMode>,
}

impl TrigPoly {
    pub fn constant(c0: f64) -> Self {
        Self { c0, modes: Vec::new() }
    }

    pub fn cos(k: u32) -> Self {
        Self { c0: 0.0, modes: vec![TrigMode { k, a: 1.0, b: 0.0 }] }
    }

    pub fn validate(&self) -> Result<(), HomogenizedError> {
        if self.modes.iter().any(|m| m.k == 0) {
            return Err(HomogenizedError::BadMode);
        }
        Ok(())
    }

    pub fn eval(&self, phi: f64) -> f64 {
        let phi = phi.rem_euclid(2.0 * PI);
        self.modes.iter().fold(self.c0, |acc, m| {
            let (s, c) = (m.k as f64 * phi).sin_cos();
            acc + m.a * c + m.b * s
        })
    }

    /// Exact term-by-term derivative of order 1..=4.
    pub fn derivative(&self, order: u32) -> Result<TrigPoly, HomogenizedError> {
        if !(1..=4).contains(&order) {
            return Err(HomogenizedError::BadOrder(order));
        }
        let mut p = self.clone();
        for _ in 0..order {
            p = p.differentiate_once();
        }
        Ok(p)
    }

    fn differentiate_once(&self) -> TrigPoly {
        let modes = self
            .modes
            .iter()
            .map(|m| {
                let k = m.k as f64;
                TrigMode { k: m.k, a: k * m.b, b: -k * m.a }
            })
            .collect();
        TrigPoly { c0: 0.0, modes }
    }

    /// Value and the first four derivatives at `phi`.
    pub fn jet(&self, phi: f64) -> [f64; 5] {
        let phi = phi.rem_euclid(2.0 * PI);
        let mut out = [self.c0, 0.0, 0.0, 0.0, 0.0];
        for m in &self.modes {
            let k = m.k as f64;
            let (s, c) = (k * phi).sin_cos();
            let v = m.a * c + m.b * s;
            let d = k * (m.b * c - m.a * s);
            out[0] += v;
            out[1] += d;
            out[2] -= k * k * v;
            out[3] -= k * k * d;
            out[4] += k.powi(4) * v;
        }
        out
    }

    /// Upper bound on `max |p|` (sum of mode amplitudes).
    pub fn sup_bound(&self) -> f64 {
        self.c0.abs() + self.modes.iter().map(|m| m.a.hypot(m.b)).sum::<f64>()
    }
}

/// Unique 2π-periodic solution of `-q₀ w'' + w = f`: each mode is damped by `1 + q₀k²`.
pub fn solve_homogenized(q0: f64, f: &TrigPoly) -> Result<TrigPoly, HomogenizedError> {
    if !(q0 > 0.0) {
        return Err(HomogenizedError::NonPositiveQ0(q0));
    }
    f.validate()?;
    let modes = f
        .modes
        .iter()
        .map(|m| {
            let d = 1.0 + q0 * (m.k as f64).powi(2);
            TrigMode { k: m.k, a: m.a / d, b: m.b / d }
        })
        .collect();
    Ok(TrigPoly { c0: f.c0, modes })
}

/// `max |-q₀ w'' + w - f|` over 1024 equispaced points.
pub fn residual_check(q0: f64, f: &TrigPoly, w0: &TrigPoly) -> f64 {
    (0..1024)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / 1024.0;
            let jet = w0.jet(phi);
            (-q0 * jet[2] + jet[0] - f.eval(phi)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_mode_solutions() {
        let w = solve_homogenized(1.0, &TrigPoly::cos(1)).unwrap();
        assert_eq!(w.modes[0].a, 0.5);
        let w = solve_homogenized(0.8, &TrigPoly::cos(2)).unwrap();
        assert!((w.modes[0].a - 1.0 / 4.2).abs() < 1e-16);
        let w = solve_homogenized(0.37, &TrigPoly::constant(2.5)).unwrap();
        assert_eq!(w, TrigPoly::constant(2.5));
        assert!(matches!(solve_homogenized(0.0, &TrigPoly::cos(1)), Err(HomogenizedError::NonPositiveQ0(_))));
    }

    #[test]
    fn exact_derivatives() {
        let d = TrigPoly::cos(1).derivative(1).unwrap();
        for phi in [0.1, 1.3, 4.0] {
            assert!((d.eval(phi) + phi.sin()).abs() < 1e-15);
        }
        let d4 = TrigPoly::cos(2).derivative(4).unwrap();
        assert_eq!(d4.modes[0].a, 16.0);
        assert!(TrigPoly::cos(1).derivative(5).is_err());

        let p = TrigPoly {
            c0: 0.3,
            modes: vec![TrigMode { k: 1, a: 0.2, b: -0.7 }, TrigMode { k: 3, a: 0.1, b: 0.4 }],
        };
        let fd_err = |h: f64| {
            let d1 = p.derivative(1).unwrap();
            (0..40)
                .map(|i| {
                    let x = 0.15 * i as f64;
                    (d1.eval(x) - (p.eval(x + h) - p.eval(x - h)) / (2.0 * h)).abs()
                })
                .fold(0.0, f64::max)
        };
        assert!((fd_err(1e-2) / fd_err(5e-3) - 4.0).abs() < 0.05);
        for (i, phi) in [0.2, 2.0, 5.5].into_iter().enumerate() {
            let jet = p.jet(phi);
            for order in 1..=4 {
                assert!((jet[order] - p.derivative(order as u32).unwrap().eval(phi)).abs() < 1e-12, "{i} {order}");
            }
        }
    }

    #[test]
    fn residual_detects_perturbations() {
        let f = TrigPoly { c0: 1.0, modes: vec![TrigMode { k: 2, a: 0.5, b: 0.25 }] };
        let mut w = solve_homogenized(0.6, &f).unwrap();
        assert!(residual_check(0.6, &f, &w) <= 1e-13);
        w.modes[0].a += 1e-3;
        assert!(residual_check(0.6, &f, &w) >= 1e-4);
        let zero = TrigPoly::default();
        let w = solve_homogenized(0.6, &zero).unwrap();
        assert_eq!(residual_check(0.6, &zero, &w), 0.0);
    }

    proptest! {
        #[test]
        fn modes_are_damped(q0 in 0.01f64..2.0, a in -3.0f64..3.0, b in -3.0f64..3.0, k in 1u32..12) {
            let f = TrigPoly { c0: 0.0, modes: vec![TrigMode { k, a, b }] };
            let w = solve_homogenized(q0, &f).unwrap();
            prop_assert!(w.modes[0].a.abs() < a.abs() || a == 0.0);
            prop_assert!(w.modes[0].b.abs() < b.abs() || b == 0.0);
            prop_assert!(residual_check(q0, &f, &w) <= 1e-12 * (1.0 + f.sup_bound()));
        }
    }
}
