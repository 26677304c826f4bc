//! Unconstrained storage for the analytical parameters.
//!
//! The optimizer works on raw values; decoding enforces every range:
//! softplus for albedos, scaled sigmoids for roughness and `F0`, a scaled
//! `tanh` for the normal's polar angle and wrap-around for the azimuths.

use crate::brdf::{idx, AnalyticalParams, ALPHA_MIN, N_THETA_MAX};

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn inv_softplus(y: f64) -> f64 {
    let y = y.max(1e-12);
    if y > 30.0 {
        y
    } else {
        y + (-(-y).exp_m1()).ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Raw optimizer-space vector for `a`.
pub fn encode(a: &AnalyticalParams) -> [f64; 12] {
    let v = a.to_array();
    let mut r = [0.0; 12];
    for c in 0..6 {
        r[c] = inv_softplus(v[c]);
    }
    for k in [idx::ALPHA_X, idx::ALPHA_Y] {
        r[k] = logit((v[k] - ALPHA_MIN) / (1.0 - ALPHA_MIN));
    }
    r[idx::F0] = logit(v[idx::F0]);
    r[idx::N_THETA] = (v[idx::N_THETA] / N_THETA_MAX).clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh();
    r[idx::N_PHI] = v[idx::N_PHI];
    r[idx::T_THETA] = v[idx::T_THETA];
    r
}

/// Decoded parameters in canonical form, plus `d decoded / d raw`
/// (the map is diagonal).
pub fn decode(r: &[f64; 12]) -> (AnalyticalParams, [f64; 12]) {
    let mut v = [0.0; 12];
    let mut j = [0.0; 12];
    for c in 0..6 {
        v[c] = softplus(r[c]);
        j[c] = sigmoid(r[c]);
    }
    for k in [idx::ALPHA_X, idx::ALPHA_Y] {
        let s = sigmoid(r[k]);
        v[k] = ALPHA_MIN + (1.0 - ALPHA_MIN) * s;
        j[k] = (1.0 - ALPHA_MIN) * s * (1.0 - s);
    }
    let s = sigmoid(r[idx::F0]);
    v[idx::F0] = s;
    j[idx::F0] = s * (1.0 - s);
    let t = r[idx::N_THETA].tanh();
    v[idx::N_THETA] = N_THETA_MAX * t;
    j[idx::N_THETA] = N_THETA_MAX * (1.0 - t * t);
    v[idx::N_PHI] = r[idx::N_PHI];
    j[idx::N_PHI] = 1.0;
    v[idx::T_THETA] = r[idx::T_THETA];
    j[idx::T_THETA] = 1.0;
    let a = AnalyticalParams::from_array(&v);
    let c = a.canonical();
    if a.n_theta < 0.0 {
        // folding theta -> -theta flips its derivative
        j[idx::N_THETA] = -j[idx::N_THETA];
    }
    (c, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_survive_round_trip() {
        let a = AnalyticalParams::default();
        let (b, _) = decode(&encode(&a));
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let r = [0.3, -1.0, 2.0, 0.1, 0.0, -0.4, 0.5, -2.0, 1.0, 0.7, 1.2, 5.0];
        let (_, j) = decode(&r);
        for k in 0..12 {
            let h = 1e-6;
            let mut rp = r;
            rp[k] += h;
            let mut rm = r;
            rm[k] -= h;
            let fd = (decode(&rp).0.to_array()[k] - decode(&rm).0.to_array()[k]) / (2.0 * h);
            assert!((fd - j[k]).abs() < 1e-6, "param {k}: {fd} vs {}", j[k]);
        }
    }

    proptest! {
        #[test]
        fn any_raw_vector_decodes_to_valid_params(r in proptest::array::uniform12(-40.0f64..40.0)) {
            let (a, j) = decode(&r);
            prop_assert!(a.validate().is_ok(), "{:?}", a);
            prop_assert!(j.iter().all(|v| v.is_finite()));
        }
    }
}
