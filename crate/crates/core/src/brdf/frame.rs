use super::vec3::{self, V3};
use super::{idx, AnalyticalParams};
use crate::scalar::Scalar;

/// Orthonormal shading frame built from the normal angles and the tangent
/// rotation.
#[derive(Clone, Copy, Debug)]
pub struct Frame<S> {
    pub n: V3<S>,
    pub t: V3<S>,
    pub b: V3<S>,
}

pub type ShadingFrame = Frame<f64>;

impl<S: Scalar> Frame<S> {
    /// The reference tangent is the world x-axis projected onto the plane
    /// orthogonal to `n`, then rotated about `n` by `t_theta`.
    pub fn build(n_theta: S, n_phi: S, t_theta: S) -> Self {
        let st = n_theta.sin();
        let n = [st * n_phi.cos(), st * n_phi.sin(), n_theta.cos()];
        // x - (x.n) n
        let t0 = [S::cst(1.0) - n[0] * n[0], -n[0] * n[1], -n[0] * n[2]];
        let t0 = vec3::normalize(&t0);
        let nt0 = vec3::cross(&n, &t0);
        let (s, c) = (t_theta.sin(), t_theta.cos());
        let t = vec3::add(&vec3::scale(&t0, c), &vec3::scale(&nt0, s));
        let b = vec3::cross(&n, &t);
        Self { n, t, b }
    }

    pub fn from_slice(p: &[S; 12]) -> Self {
        Self::build(p[idx::N_THETA], p[idx::N_PHI], p[idx::T_THETA])
    }

    /// Coordinates of `v` in `(t, b, n)`.
    #[inline]
    pub fn to_local(&self, v: &V3<S>) -> V3<S> {
        [vec3::dot(v, &self.t), vec3::dot(v, &self.b), vec3::dot(v, &self.n)]
    }
}

impl Frame<f64> {
    pub fn from_params(p: &AnalyticalParams) -> Self {
        Self::build(p.n_theta, p.n_phi, p.t_theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let f = Frame::<f64>::build(
                rng.random_range(0.0..1.5),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            for (a, b) in [(&f.n, &f.t), (&f.n, &f.b), (&f.t, &f.b)] {
                assert!(vec3::dot(a, b).abs() < 1e-9);
            }
            for v in [&f.n, &f.t, &f.b] {
                assert!((vec3::length(v) - 1.0).abs() < 1e-9);
            }
            let c = vec3::cross(&f.n, &f.t);
            for i in 0..3 {
                assert!((c[i] - f.b[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_frame_is_world_frame() {
        let f = Frame::<f64>::build(0.0, 0.0, 0.0);
        assert_eq!(f.n, [0.0, 0.0, 1.0]);
        assert_eq!(f.t, [1.0, 0.0, 0.0]);
        assert_eq!(f.b, [0.0, 1.0, 0.0]);
    }
}
