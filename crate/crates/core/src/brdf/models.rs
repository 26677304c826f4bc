//! Closed-form evaluation of the complete analytical models.

use super::terms;
use super::vec3::lift;
use super::{AnalyticalParams, Direction, Rgb};

fn combine(m: [f64; 3], s: [f64; 3], k: f64) -> Rgb {
    [m[0] + s[0] * k, m[1] + s[1] * k, m[2] + s[2] * k]
}

/// `rho_d/pi + rho_s D F G / (4 (n.wi)(n.wo))` with anisotropic GGX `D`,
/// Schlick `F` and separable Smith `G`.
pub fn eval_analytical_ggx(p: &AnalyticalParams, wi: &Direction, wo: &Direction) -> Rgb {
    let a = p.to_array();
    let (i, o) = (lift::<f64>(wi.as_array()), lift::<f64>(wo.as_array()));
    let k = terms::ggx_d(&a, &i, &o)
        * terms::schlick_f(&a, &i, &o)
        * terms::smith_g(&a, &i, &o)
        * terms::recip_norm(&a, &i, &o);
    combine(terms::lambertian(&a), terms::specular_albedo(&a), k)
}

/// Cook-Torrance with isotropic Beckmann `D` (slope `alpha_x`), Schlick `F`
/// and the V-cavity `G`.
pub fn eval_cooktorrance(p: &AnalyticalParams, wi: &Direction, wo: &Direction) -> Rgb {
    let a = p.to_array();
    let (i, o) = (lift::<f64>(wi.as_array()), lift::<f64>(wo.as_array()));
    let k = terms::beckmann_d(&a, &i, &o)
        * terms::schlick_f(&a, &i, &o)
        * terms::vcavity_g(&a, &i, &o)
        * terms::recip_norm(&a, &i, &o);
    combine(terms::lambertian(&a), terms::specular_albedo(&a), k)
}

/// Anisotropic Ward.
pub fn eval_ward(p: &AnalyticalParams, wi: &Direction, wo: &Direction) -> Rgb {
    let a = p.to_array();
    let (i, o) = (lift::<f64>(wi.as_array()), lift::<f64>(wo.as_array()));
    let k = terms::ward_lobe(&a, &i, &o) * terms::ward_norm(&a, &i, &o);
    combine(terms::lambertian(&a), terms::specular_albedo(&a), k)
}
