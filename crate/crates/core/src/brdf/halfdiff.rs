//! Half/difference angle parameterization of direction pairs.

use std::f64::consts::{FRAC_PI_2, TAU};

use super::{wrap_angle, Direction};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfDiffAngles {
    pub theta_h: f64,
    pub phi_h: f64,
    pub theta_d: f64,
    pub phi_d: f64,
}

fn rot_z(v: [f64; 3], a: f64) -> [f64; 3] {
    let (s, c) = a.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

fn rot_y(v: [f64; 3], a: f64) -> [f64; 3] {
    let (s, c) = a.sin_cos();
    [c * v[0] + s * v[2], v[1], -s * v[0] + c * v[2]]
}

/// Converts half/difference angles to `(wi, wo)`.
pub fn halfdiff_to_dirs(a: &HalfDiffAngles) -> Result<(Direction, Direction)> {
    let in_range = (0.0..=FRAC_PI_2).contains(&a.theta_h)
        && (0.0..=FRAC_PI_2).contains(&a.theta_d)
        && (0.0..TAU).contains(&a.phi_h)
        && (0.0..TAU).contains(&a.phi_d);
    if !in_range {
        return Err(Error::OutOfRange(format!("half/diff angles {a:?}")));
    }
    let h = Direction::from_spherical(a.theta_h, a.phi_h);
    let d = Direction::from_spherical(a.theta_d, a.phi_d);
    let wi = rot_z(rot_y(*d.as_array(), a.theta_h), a.phi_h);
    let wi = Direction::normalized(wi)?;
    let c = wi.dot(&h);
    let wo = [
        2.0 * c * h.x() - wi.x(),
        2.0 * c * h.y() - wi.y(),
        2.0 * c * h.z() - wi.z(),
    ];
    Ok((wi, Direction::normalized(wo)?))
}

/// Inverse of [`halfdiff_to_dirs`].
pub fn dirs_to_halfdiff(wi: &Direction, wo: &Direction) -> HalfDiffAngles {
    let s = [wi.x() + wo.x(), wi.y() + wo.y(), wi.z() + wo.z()];
    let h = Direction::normalized(s).unwrap_or(Direction::NORMAL);
    let theta_h = h.z().clamp(-1.0, 1.0).acos();
    let phi_h = wrap_angle(h.y().atan2(h.x()));
    let d = rot_y(rot_z(*wi.as_array(), -phi_h), -theta_h);
    let theta_d = d[2].clamp(-1.0, 1.0).acos();
    let phi_d = wrap_angle(d[1].atan2(d[0]));
    HalfDiffAngles {
        theta_h,
        phi_h,
        theta_d,
        phi_d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coincident_at_normal() {
        let a = HalfDiffAngles {
            theta_h: 0.0,
            phi_h: 0.0,
            theta_d: 0.0,
            phi_d: 0.0,
        };
        let (wi, wo) = halfdiff_to_dirs(&a).unwrap();
        for w in [wi, wo] {
            assert!((w.z() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_difference_mirrors_across_normal() {
        let t = std::f64::consts::FRAC_PI_4;
        let a = HalfDiffAngles {
            theta_h: 0.0,
            phi_h: 0.0,
            theta_d: t,
            phi_d: 0.0,
        };
        let (wi, wo) = halfdiff_to_dirs(&a).unwrap();
        assert!((wi.x() - t.sin()).abs() < 1e-12 && (wi.z() - t.cos()).abs() < 1e-12);
        assert!((wo.x() + t.sin()).abs() < 1e-12 && (wo.z() - t.cos()).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        let a = HalfDiffAngles {
            theta_h: 2.0,
            phi_h: 0.0,
            theta_d: 0.0,
            phi_d: 0.0,
        };
        assert!(halfdiff_to_dirs(&a).is_err());
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut n = 0;
        while n < 10_000 {
            let a = HalfDiffAngles {
                theta_h: rng.random_range(0.01..FRAC_PI_2 - 0.01),
                phi_h: rng.random_range(0.01..TAU - 0.01),
                theta_d: rng.random_range(0.01..FRAC_PI_2 - 0.01),
                phi_d: rng.random_range(0.01..TAU - 0.01),
            };
            let (wi, wo) = halfdiff_to_dirs(&a).unwrap();
            assert!((wi.as_array().iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
            let b = dirs_to_halfdiff(&wi, &wo);
            for (x, y) in [
                (a.theta_h, b.theta_h),
                (a.phi_h, b.phi_h),
                (a.theta_d, b.theta_d),
                (a.phi_d, b.phi_d),
            ] {
                assert!((x - y).abs() < 1e-6, "{a:?} vs {b:?}");
            }
            n += 1;
        }
    }
}
