//! The individual semantic terms that become terminal nodes of a graph.
//!
//! Parameters arrive as the flat 12-vector (see [`idx`]), directions in the
//! geometric frame. Direction-dependent terms are evaluated in the shading
//! frame decoded from the normal angles and tangent rotation.

use std::f64::consts::PI;

use super::frame::Frame;
use super::vec3::{self, V3};
use super::{idx, ALPHA_MIN, COS_EPS};
use crate::scalar::Scalar;

#[inline]
fn alphas<S: Scalar>(p: &[S; 12]) -> (S, S) {
    (p[idx::ALPHA_X].max_c(ALPHA_MIN), p[idx::ALPHA_Y].max_c(ALPHA_MIN))
}

#[inline]
pub fn half_vector<S: Scalar>(wi: &V3<S>, wo: &V3<S>) -> V3<S> {
    vec3::normalize(&vec3::add(wi, wo))
}

/// `rho_d / pi`.
pub fn lambertian<S: Scalar>(p: &[S; 12]) -> [S; 3] {
    let k = 1.0 / PI;
    [
        p[idx::RHO_D].scale(k),
        p[idx::RHO_D + 1].scale(k),
        p[idx::RHO_D + 2].scale(k),
    ]
}

pub fn specular_albedo<S: Scalar>(p: &[S; 12]) -> [S; 3] {
    [p[idx::RHO_S], p[idx::RHO_S + 1], p[idx::RHO_S + 2]]
}

/// Anisotropic GGX normal distribution for a half vector given in the
/// shading frame's local coordinates. Zero below the shading horizon.
pub fn ggx_distribution_local<S: Scalar>(ax: S, ay: S, h: &V3<S>) -> S {
    if h[2].val() <= 0.0 {
        return S::cst(0.0);
    }
    let q = (h[0] / ax).sq() + (h[1] / ay).sq() + h[2].sq();
    S::cst(1.0) / (ax * ay * q.sq()).scale(PI)
}

pub fn ggx_distribution<S: Scalar>(p: &[S; 12], frame: &Frame<S>, h: &V3<S>) -> S {
    let (ax, ay) = alphas(p);
    ggx_distribution_local(ax, ay, &frame.to_local(h))
}

/// `D(h)` with `h` the half vector of `wi` and `wo`.
pub fn ggx_d<S: Scalar>(p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> S {
    let frame = Frame::from_slice(p);
    ggx_distribution(p, &frame, &half_vector(wi, wo))
}

/// Schlick's approximation evaluated at `c = wi . h`.
pub fn schlick_fresnel<S: Scalar>(f0: S, c: S) -> S {
    let c = c.clamp_c(0.0, 1.0);
    f0 + (S::cst(1.0) - f0) * (S::cst(1.0) - c).powi(5)
}

pub fn schlick_f<S: Scalar>(p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> S {
    let h = half_vector(wi, wo);
    schlick_fresnel(p[idx::F0], vec3::dot(wi, &h))
}

/// Smith masking for one direction in local shading coordinates:
/// `1 / (1 + Lambda)`.
pub fn smith_g1_local<S: Scalar>(ax: S, ay: S, v: &V3<S>) -> S {
    let z = v[2].max_c(COS_EPS);
    let t2 = ((ax * v[0]).sq() + (ay * v[1]).sq()) / z.sq();
    S::cst(2.0) / (S::cst(1.0) + (S::cst(1.0) + t2).sqrt())
}

/// Separable Smith shadowing-masking `G1(wi) G1(wo)`.
pub fn smith_g<S: Scalar>(p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> S {
    let frame = Frame::from_slice(p);
    let (ax, ay) = alphas(p);
    smith_g1_local(ax, ay, &frame.to_local(wi)) * smith_g1_local(ax, ay, &frame.to_local(wo))
}

/// `1 / (4 max(n.wi, eps) max(n.wo, eps))`.
pub fn recip_norm_frame<S: Scalar>(frame: &Frame<S>, wi: &V3<S>, wo: &V3<S>) -> S {
    let ci = vec3::dot(&frame.n, wi).max_c(COS_EPS);
    let co = vec3::dot(&frame.n, wo).max_c(COS_EPS);
    S::cst(0.25) / (ci * co)
}

pub fn recip_norm<S: Scalar>(p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> S {
    recip_norm_frame(&Frame::from_slice(p), wi, wo)
}

/// Isotropic Beckmann distribution with slope `m = alpha_x`.
pub fn beckmann_d<S: Scalar>(p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> S {
    let frame = Frame::from_slice(p);
    let h = frame.to_local(&half_vector(wi, wo));
    let m = p[idx::ALPHA_X].max_c(ALPHA_MIN);
    beckmann_local(m, &h)
}

pub fn beckmann_local<S: Scalar>(m: S, h: &V3<S>) -> S {
    if h[2].val() <= 0.0 {
        return S::cst(0.0);
    }
    let c2 = h[2].sq();
    let tan2 = (h[0].sq() + h[1].sq()) / c2;
    let m2 = m.sq();
    (-tan2 / m2).exp() / (m2 * c2.sq()).scale(PI)
}

/// Cook-Torrance V-cavity geometry
/// `min(1, 2(n.h)(n.wo)/(wo.h), 2(n.h)(n.wi)/(wo.h))`.
pub fn vcavity_g<S: Scalar>(p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> S {
    let frame = Frame::from_slice(p);
    let h = half_vector(wi, wo);
    let nh = vec3::dot(&frame.n, &h).max_c(0.0);
    let ni = vec3::dot(&frame.n, wi).max_c(0.0);
    let no = vec3::dot(&frame.n, wo).max_c(0.0);
    let oh = vec3::dot(wo, &h).max_c(COS_EPS);
    let a = (S::cst(2.0) * nh * no) / oh;
    let b = (S::cst(2.0) * nh * ni) / oh;
    let m = if a.val() < b.val() { a } else { b };
    m.min_c(1.0)
}

/// Ward's anisotropic lobe `exp(-(hx^2/ax^2 + hy^2/ay^2)/hz^2) / (4 pi ax ay)`.
pub fn ward_lobe<S: Scalar>(p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> S {
    let frame = Frame::from_slice(p);
    let h = frame.to_local(&half_vector(wi, wo));
    let (ax, ay) = alphas(p);
    if h[2].val() <= 0.0 {
        return S::cst(0.0);
    }
    let e = ((h[0] / ax).sq() + (h[1] / ay).sq()) / h[2].sq();
    (-e).exp() / (ax * ay).scale(4.0 * PI)
}

/// Ward normalization `1 / sqrt(max(n.wi, eps) max(n.wo, eps))`.
pub fn ward_norm<S: Scalar>(p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> S {
    let frame = Frame::from_slice(p);
    let ci = vec3::dot(&frame.n, wi).max_c(COS_EPS);
    let co = vec3::dot(&frame.n, wo).max_c(COS_EPS);
    S::cst(1.0) / (ci * co).sqrt()
}

/// GGX specular lobe with the Fresnel factor left out:
/// `rho_s D G / (4 (n.wi)(n.wo))`.
pub fn ggx_lobe_without_fresnel<S: Scalar>(p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> [S; 3] {
    let k = ggx_d(p, wi, wo) * smith_g(p, wi, wo) * recip_norm(p, wi, wo);
    let s = specular_albedo(p);
    [s[0] * k, s[1] * k, s[2] * k]
}
