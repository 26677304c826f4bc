//! Closed-form reflectance terms, direction math and the analytical
//! parameter block.
//!
//! Every term is generic over [`Scalar`](crate::scalar::Scalar) so the same
//! code yields values (`f64`) and exact partial derivatives
//! ([`Dual`](crate::scalar::Dual)).

pub mod frame;
pub mod halfdiff;
pub mod models;
pub mod terms;
pub mod vec3;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

pub use frame::ShadingFrame;
pub use halfdiff::{dirs_to_halfdiff, halfdiff_to_dirs, HalfDiffAngles};
pub use models::{eval_analytical_ggx, eval_cooktorrance, eval_ward};

/// Clamp applied to every cosine that ends up in a denominator.
pub const COS_EPS: f64 = 1e-6;
/// Lower bound on the roughness parameters.
pub const ALPHA_MIN: f64 = 1e-3;
/// Upper bound (exclusive in spirit) on the shading-normal polar angle.
pub const N_THETA_MAX: f64 = FRAC_PI_2 - 1e-3;

pub type Rgb = [f64; 3];

/// Unit vector in the local frame, `z` being the geometric normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction([f64; 3]);

impl Direction {
    pub const NORMAL: Direction = Direction([0.0, 0.0, 1.0]);

    /// Accepts an already unit-length vector.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let l = (x * x + y * y + z * z).sqrt();
        if !l.is_finite() || (l - 1.0).abs() > 1e-9 {
            return Err(Error::OutOfRange(format!(
                "direction ({x}, {y}, {z}) has length {l}"
            )));
        }
        Ok(Self([x, y, z]))
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::OutOfRange(format!("cannot normalize {v:?}")));
        }
        Ok(Self([v[0] / l, v[1] / l, v[2] / l]))
    }

    /// Accepts a vector read back from single-precision storage, unit
    /// within `1e-6`; the stored components are kept as they are so a
    /// re-write reproduces the same bytes.
    pub fn from_stored(v: [f64; 3]) -> Result<Self> {
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !l.is_finite() || (l - 1.0).abs() > 1e-6 {
            return Err(Error::OutOfRange(format!("stored direction {v:?} has length {l}")));
        }
        Ok(Self(v))
    }

    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self([st * cp, st * sp, ct])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn as_array(&self) -> &[f64; 3] {
        &self.0
    }

    pub fn dot(&self, o: &Direction) -> f64 {
        vec3::dot(&self.0, &o.0)
    }

    pub fn is_upper(&self) -> bool {
        self.0[2] > 0.0
    }
}

/// Position of each scalar in the flat 12-vector.
pub mod idx {
    pub const RHO_D: usize = 0;
    pub const RHO_S: usize = 3;
    pub const ALPHA_X: usize = 6;
    pub const ALPHA_Y: usize = 7;
    pub const F0: usize = 8;
    pub const N_THETA: usize = 9;
    pub const N_PHI: usize = 10;
    pub const T_THETA: usize = 11;
}

/// The twelve analytical parameters of the microfacet models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticalParams {
    pub rho_d: Rgb,
    pub rho_s: Rgb,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub f0: f64,
    pub n_theta: f64,
    pub n_phi: f64,
    pub t_theta: f64,
}

impl Default for AnalyticalParams {
    fn default() -> Self {
        Self {
            rho_d: [0.5; 3],
            rho_s: [0.5; 3],
            alpha_x: 0.3,
            alpha_y: 0.3,
            f0: 0.05,
            n_theta: 0.0,
            n_phi: 0.0,
            t_theta: 0.0,
        }
    }
}

impl AnalyticalParams {
    pub const COUNT: usize = 12;

    pub const NAMES: [&'static str; 12] = [
        "rho_d.r", "rho_d.g", "rho_d.b", "rho_s.r", "rho_s.g", "rho_s.b", "alpha_x", "alpha_y",
        "f0", "n_theta", "n_phi", "t_theta",
    ];

    pub fn to_array(&self) -> [f64; 12] {
        let [dr, dg, db] = self.rho_d;
        let [sr, sg, sb] = self.rho_s;
        [
            dr,
            dg,
            db,
            sr,
            sg,
            sb,
            self.alpha_x,
            self.alpha_y,
            self.f0,
            self.n_theta,
            self.n_phi,
            self.t_theta,
        ]
    }

    pub fn from_array(a: &[f64; 12]) -> Self {
        Self {
            rho_d: [a[0], a[1], a[2]],
            rho_s: [a[3], a[4], a[5]],
            alpha_x: a[6],
            alpha_y: a[7],
            f0: a[8],
            n_theta: a[9],
            n_phi: a[10],
            t_theta: a[11],
        }
    }

    pub fn isotropic(rho_d: Rgb, rho_s: Rgb, alpha: f64, f0: f64) -> Self {
        Self {
            rho_d,
            rho_s,
            alpha_x: alpha,
            alpha_y: alpha,
            f0,
            ..Self::default()
        }
    }

    /// Checks every range constraint.
    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        if let Some(i) = a.iter().position(|v| !v.is_finite()) {
            return Err(Error::OutOfRange(format!("{} is not finite", Self::NAMES[i])));
        }
        for (i, v) in self.rho_d.iter().chain(self.rho_s.iter()).enumerate() {
            if *v < 0.0 {
                return Err(Error::OutOfRange(format!("{} = {v} < 0", Self::NAMES[i])));
            }
        }
        for (name, v) in [("alpha_x", self.alpha_x), ("alpha_y", self.alpha_y)] {
            if !(ALPHA_MIN..=1.0).contains(&v) {
                return Err(Error::OutOfRange(format!(
                    "{name} = {v} outside [{ALPHA_MIN}, 1]"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.f0) {
            return Err(Error::OutOfRange(format!("f0 = {} outside [0, 1]", self.f0)));
        }
        if !(0.0..FRAC_PI_2).contains(&self.n_theta) {
            return Err(Error::OutOfRange(format!(
                "n_theta = {} outside [0, pi/2)",
                self.n_theta
            )));
        }
        if !(0.0..TAU).contains(&self.t_theta) {
            return Err(Error::OutOfRange(format!(
                "t_theta = {} outside [0, 2pi)",
                self.t_theta
            )));
        }
        Ok(())
    }

    /// Folds the angles into their canonical domains without changing the
    /// decoded frame.
    pub fn canonical(mut self) -> Self {
        if self.n_theta < 0.0 {
            self.n_theta = -self.n_theta;
            self.n_phi += PI;
        }
        self.n_phi = wrap_angle(self.n_phi);
        self.t_theta = wrap_angle(self.t_theta);
        self
    }

    pub fn shading_frame(&self) -> ShadingFrame {
        ShadingFrame::from_params(self)
    }
}

/// Wraps into `[0, 2pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_parameters_round_trip() {
        let p = AnalyticalParams {
            rho_d: [0.1, 0.2, 0.3],
            rho_s: [0.4, 0.5, 0.6],
            alpha_x: 0.7,
            alpha_y: 0.8,
            f0: 0.9,
            n_theta: 0.1,
            n_phi: 0.2,
            t_theta: 0.3,
        };
        assert_eq!(AnalyticalParams::from_array(&p.to_array()), p);
        assert_eq!(AnalyticalParams::COUNT, p.to_array().len());
    }

    #[test]
    fn defaults_are_valid() {
        AnalyticalParams::default().validate().unwrap();
    }

    #[test]
    fn range_violations_are_reported() {
        let p = AnalyticalParams {
            alpha_x: 1e-4,
            ..AnalyticalParams::default()
        };
        assert!(p.validate().is_err());
        let mut p = AnalyticalParams::default();
        p.rho_s[1] = -0.1;
        assert!(p.validate().is_err());
        let p = AnalyticalParams {
            n_theta: 1.6,
            ..AnalyticalParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn canonical_keeps_normal() {
        let p = AnalyticalParams {
            n_theta: -0.4,
            n_phi: 7.0,
            t_theta: -1.0,
            ..Default::default()
        };
        let q = p.canonical();
        q.validate().unwrap();
        let a = p.shading_frame();
        let b = q.shading_frame();
        for i in 0..3 {
            assert!((a.n[i] - b.n[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_rejects_non_unit() {
        assert!(Direction::new(1.0, 1.0, 0.0).is_err());
        assert!(Direction::new(0.0, 0.6, 0.8).is_ok());
    }
}
