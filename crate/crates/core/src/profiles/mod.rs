//! Compactly supported radial initial data and the d'Alembert profile `h`
//! built from them.
//!
//! Profiles are even in `r`, so they double as the symmetric continuation to
//! negative arguments that `h` needs:
//!
//! ```text
//! h(x) = -(x/2) f(x) + (1/2) ∫_x^∞ y g(y) dy
//! ```
//!
//! With that profile the free radial wave is `u0(t, r) = [h(t-r) - h(t+r)] / r`,
//! with `u0(0, r) = f(r)` and `∂_t u0(0, r) = g(r)`.

pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use quadrature::{integrate_compact, integrate_with_breaks, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFamily {
    /// `amplitude * (1 - r²/R²)^m` inside `|r| < R`.
    PolyBump,
    Zero,
}

fn default_amplitude() -> f64 {
    1.0
}
fn default_radius() -> f64 {
    1.0
}
fn default_m() -> u32 {
    4
}

/// A smooth (`C^{m-1}`), even, compactly supported radial function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub family: ProfileFamily,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_m")]
    pub m: u32,
}

impl RadialProfile {
    pub fn poly_bump(amplitude: f64, radius: f64, m: u32) -> Self {
        RadialProfile {
            family: ProfileFamily::PolyBump,
            amplitude,
            radius,
            m,
        }
    }

    pub fn zero() -> Self {
        RadialProfile {
            family: ProfileFamily::Zero,
            amplitude: 0.0,
            radius: default_radius(),
            m: default_m(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == ProfileFamily::Zero {
            return Ok(());
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Config(format!(
                "profile amplitude must be finite, got {}",
                self.amplitude
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!(
                "profile radius must be positive and finite, got {}",
                self.radius
            )));
        }
        if self.m < 2 {
            return Err(Error::Config(format!(
                "smoothness exponent m must be >= 2, got {}",
                self.m
            )));
        }
        Ok(())
    }

    /// True when the profile vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.family == ProfileFamily::Zero || self.amplitude == 0.0
    }

    /// Radius outside of which the profile is exactly zero (0 for the zero
    /// profile).
    pub fn support_radius(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.radius
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self.family {
            ProfileFamily::Zero => 0.0,
            ProfileFamily::PolyBump => {
                let s = r / self.radius;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    self.amplitude * (1.0 - s * s).powi(self.m as i32)
                }
            }
        }
    }

    /// `∫_x^∞ y p(y) dy`, closed form for the bump family.
    pub fn moment_tail(&self, x: f64) -> f64 {
        match self.family {
            ProfileFamily::Zero => 0.0,
            ProfileFamily::PolyBump => {
                let s = x / self.radius;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    let k = self.m as f64 + 1.0;
                    self.amplitude * self.radius * self.radius / (2.0 * k)
                        * (1.0 - s * s).powi(self.m as i32 + 1)
                }
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RadialProfile {
            amplitude: self.amplitude * factor,
            ..*self
        }
    }
}

/// The profile `h` of the free solution, built from `(f, g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HFunction {
    f: RadialProfile,
    g: RadialProfile,
    support_radius: f64,
    tol: f64,
}

/// Builds `h` from the data profiles; `h` vanishes for `|x| >= max(R_f, R_g)`.
pub fn build_h(f: &RadialProfile, g: &RadialProfile) -> Result<HFunction> {
    f.validate()?;
    g.validate()?;
    Ok(HFunction {
        f: *f,
        g: *g,
        support_radius: f.support_radius().max(g.support_radius()),
        tol: DEFAULT_TOL,
    })
}

impl HFunction {
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn f(&self) -> &RadialProfile {
        &self.f
    }

    pub fn g(&self) -> &RadialProfile {
        &self.g
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Closed-form evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        -0.5 * x * self.f.eval(x) + 0.5 * self.g.moment_tail(x)
    }

    /// Evaluation with the `g` integral done by quadrature instead of the
    /// antiderivative.
    pub fn eval_quadrature(&self, x: f64) -> Result<f64> {
        let rg = self.g.support_radius();
        let integral = if rg == 0.0 || x >= rg {
            0.0
        } else {
            let lo = x.max(-rg);
            integrate_with_breaks(|y| y * self.g.eval(y), (lo, rg), &[0.0], self.tol)?
        };
        Ok(-0.5 * x * self.f.eval(x) + 0.5 * integral)
    }

    /// Points where `h` is only finitely smooth or changes form.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        for r in [self.f.support_radius(), self.g.support_radius()] {
            if r > 0.0 {
                b.push(-r);
                b.push(r);
            }
        }
        b
    }

    /// `h'(x)` by symmetric differencing with step `1e-6 * R`.
    pub fn derivative(&self, x: f64) -> f64 {
        let step = 1e-6 * self.support_radius.max(f64::MIN_POSITIVE);
        (self.eval(x + step) - self.eval(x - step)) / (2.0 * step)
    }

    /// `h` with both data profiles multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        HFunction {
            f: self.f.scaled(factor),
            g: self.g.scaled(factor),
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_values() {
        let p = RadialProfile::poly_bump(1.0, 1.0, 2);
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(2.0), 0.0);
        assert_eq!(p.eval(1.0), 0.0);
        let p = RadialProfile::poly_bump(3.0, 2.0, 4);
        assert!((p.eval(1.0) - 243.0 / 256.0).abs() < 1e-15);
        assert_eq!(p.eval(-1.0), p.eval(1.0));
    }

    #[test]
    fn validation() {
        assert!(RadialProfile::poly_bump(1.0, 1.0, 1).validate().is_err());
        assert!(RadialProfile::poly_bump(1.0, 0.0, 3).validate().is_err());
        assert!(RadialProfile::poly_bump(f64::NAN, 1.0, 3)
            .validate()
            .is_err());
        assert!(RadialProfile::zero().validate().is_ok());
    }

    #[test]
    fn zero_data_gives_zero_h() {
        let h = build_h(&RadialProfile::zero(), &RadialProfile::zero()).unwrap();
        assert_eq!(h.support_radius(), 0.0);
        for x in [-2.0, -0.5, 0.0, 0.3, 4.0] {
            assert_eq!(h.eval(x), 0.0);
            assert_eq!(h.eval_quadrature(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn h_from_f_only() {
        let f = RadialProfile::poly_bump(1.0, 1.0, 2);
        let h = build_h(&f, &RadialProfile::zero()).unwrap();
        for i in 0..=40 {
            let x = -1.0 + 0.05 * i as f64;
            let expected = -0.5 * x * (1.0 - x * x).powi(2);
            assert!((h.eval(x) - expected).abs() < 1e-15);
            assert!((h.eval(x) + h.eval(-x)).abs() < 1e-15);
        }
    }

    #[test]
    fn h_from_g_only_matches_antiderivative_and_quadrature() {
        let g = RadialProfile::poly_bump(1.0, 1.0, 3);
        let h = build_h(&RadialProfile::zero(), &g).unwrap();
        for i in 0..=48 {
            let x = -1.2 + 0.05 * i as f64;
            let expected = if x.abs() < 1.0 {
                (1.0 - x * x).powi(4) / 16.0
            } else {
                0.0
            };
            assert!((h.eval(x) - expected).abs() < 1e-15, "x = {x}");
            let q = h.eval_quadrature(x).unwrap();
            assert!((q - expected).abs() < 1e-10, "x = {x}: {q} vs {expected}");
        }
    }

    #[test]
    fn mixed_radii_support() {
        let f = RadialProfile::poly_bump(0.7, 0.8, 5);
        let g = RadialProfile::poly_bump(-1.3, 1.5, 4);
        let h = build_h(&f, &g).unwrap();
        assert_eq!(h.support_radius(), 1.5);
        for x in [1.5, 1.5 * (1.0 + 1e-6), 2.0, -1.5, -3.0] {
            assert!(h.eval(x).abs() < DEFAULT_TOL);
            assert!(h.eval_quadrature(x).unwrap().abs() < DEFAULT_TOL);
        }
        for i in 0..60 {
            let x = -1.6 + 0.053 * i as f64;
            let d = (h.eval(x) - h.eval_quadrature(x).unwrap()).abs();
            assert!(d < 1e-10, "x = {x}: {d}");
        }
    }

    #[test]
    fn serde_shape() {
        let p: RadialProfile =
            serde_json::from_str(r#"{"family":"poly_bump","amplitude":1.0,"radius":1.0,"m":3}"#)
                .unwrap();
        assert_eq!(p, RadialProfile::poly_bump(1.0, 1.0, 3));
        let z: RadialProfile = serde_json::from_str(r#"{"family":"zero"}"#).unwrap();
        assert!(z.is_zero());
    }
}
