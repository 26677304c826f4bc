//! Minimal 3-vector helpers over any [`Scalar`].

use crate::scalar::Scalar;

pub type V3<S> = [S; 3];

#[inline]
pub fn dot<S: Scalar>(a: &V3<S>, b: &V3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn add<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<S: Scalar>(a: &V3<S>, k: S) -> V3<S> {
    [a[0] * k, a[1] * k, a[2] * k]
}

#[inline]
pub fn length<S: Scalar>(a: &V3<S>) -> S {
    dot(a, a).sqrt()
}

/// Normalizes `a`; lengths below `1e-12` are clamped to avoid division by
/// zero.
#[inline]
pub fn normalize<S: Scalar>(a: &V3<S>) -> V3<S> {
    let l = dot(a, a).max_c(1e-24).sqrt();
    let inv = S::cst(1.0) / l;
    scale(a, inv)
}

pub fn lift<S: Scalar>(a: &[f64; 3]) -> V3<S> {
    [S::cst(a[0]), S::cst(a[1]), S::cst(a[2])]
}

pub fn value<S: Scalar>(a: &V3<S>) -> [f64; 3] {
    [a[0].val(), a[1].val(), a[2].val()]
}
