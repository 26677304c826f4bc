#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::{PI, TAU};

use nea::brdf::{AnalyticalParams, Direction, Rgb};
use nea::data::{gen_corrupted_ggx, planted_materials, Corruption, Noise, SampleSet, SamplingMode};
use nea::graph::{backward, forward, CompGraph, EnhancedModel, EnhancementState, Evaluator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Parameters away from every clamp and from the frame singularity.
pub fn interior_params(rng: &mut ChaCha8Rng) -> AnalyticalParams {
    AnalyticalParams::from_array(&[
        rng.random_range(0.05..0.9),
        rng.random_range(0.05..0.9),
        rng.random_range(0.05..0.9),
        rng.random_range(0.05..0.9),
        rng.random_range(0.05..0.9),
        rng.random_range(0.05..0.9),
        rng.random_range(0.1..0.8),
        rng.random_range(0.1..0.8),
        rng.random_range(0.05..0.9),
        rng.random_range(0.05..0.3),
        rng.random_range(0.2..6.0),
        rng.random_range(0.2..3.0),
    ])
}

/// Anything in range, including clamp boundaries.
pub fn any_params(rng: &mut ChaCha8Rng) -> AnalyticalParams {
    AnalyticalParams::from_array(&[
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        rng.random_range(nea::brdf::ALPHA_MIN..=1.0),
        rng.random_range(nea::brdf::ALPHA_MIN..=1.0),
        rng.random_range(0.0..=1.0),
        rng.random_range(0.0..1.5),
        rng.random_range(0.0..TAU),
        rng.random_range(0.0..PI),
    ])
}

pub fn upper_dir(rng: &mut ChaCha8Rng, max_theta: f64) -> Direction {
    Direction::from_spherical(rng.random_range(0.0..max_theta), rng.random_range(0.0..TAU))
}

pub fn any_dir(rng: &mut ChaCha8Rng) -> Direction {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi = rng.random_range(0.0..TAU);
    let r = (1.0 - z * z).sqrt();
    Direction::normalized([r * phi.cos(), r * phi.sin(), z]).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> EnhancementState {
    EnhancementState::from_bits((0..n).map(|_| rng.random_bool(0.5)).collect())
}

pub fn state_of(n: usize, ones: &[usize]) -> EnhancementState {
    EnhancementState::from_bits((0..n).map(|i| ones.contains(&i)).collect())
}

/// The final enhanced GGX state reported for the paper's experiments:
/// F, G, 1/E and the product `(D F) G`.
pub fn paper_state() -> EnhancementState {
    state_of(11, &[3, 4, 5, 7])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Worst relative error between reverse-mode gradients of `g . f` and
/// central differences, over every analytical, neural and weight component
/// with magnitude above `floor`.
///
/// A component whose step straddles a kink (a leaky ReLU switching sign, a
/// `min` / `max` changing branch) has no derivative for the central
/// difference to estimate. Such a component is counted in `kinks` instead
/// of failing when either the central difference with a ten times smaller
/// step agrees, or the two one-sided differences disagree by more than ten
/// times the tolerance while the reverse-mode value lies much closer to one
/// of them than they lie to each other (for a smooth function it sits
/// midway).
#[derive(Default)]
pub struct GradCheck {
    pub worst: f64,
    pub checked: usize,
    pub kinks: usize,
    pub worst_at: String,
}

pub const GRAD_TOL: f64 = 1e-4;

fn classify(out: &mut GradCheck, ad: f64, f: &mut dyn FnMut(f64) -> f64, mid: f64, h: f64, floor: f64, what: &dyn Fn() -> String) {
    let (lo, hi) = (f(-h), f(h));
    let fd = (hi - lo) / (2.0 * h);
    if ad.abs().max(fd.abs()) <= floor {
        return;
    }
    out.checked += 1;
    let r = rel(ad, fd);
    if r >= GRAD_TOL {
        let small = (f(0.1 * h) - f(-0.1 * h)) / (0.2 * h);
        let (fwd, bwd) = ((hi - mid) / h, (mid - lo) / h);
        let spread = rel(fwd, bwd);
        let one_sided = spread > 10.0 * GRAD_TOL && rel(ad, fwd).min(rel(ad, bwd)) < 0.1 * spread;
        if rel(ad, small) < GRAD_TOL || one_sided {
            out.kinks += 1;
            return;
        }
    }
    if r > out.worst {
        out.worst = r;
        out.worst_at = format!("{} ad {ad:.6e} fd {fd:.6e}", what());
    }
}

#[allow(clippy::too_many_arguments)]
pub fn grad_check(
    model: &EnhancedModel,
    a: &AnalyticalParams,
    z: &[f64],
    wi: &Direction,
    wo: &Direction,
    g: &Rgb,
    h: f64,
    floor: f64,
) -> GradCheck {
    let (_, grads) = backward(model, a, z, wi, wo, g).unwrap();
    let mut ev = Evaluator::new(model);
    let dot = |v: Rgb| g[0] * v[0] + g[1] * v[1] + g[2] * v[2];
    let mut out = GradCheck::default();
    let base = a.to_array();
    let (i_arr, o_arr) = (wi.as_array(), wo.as_array());
    let mid = dot(ev.forward_raw(model, &base, z, i_arr, o_arr, false));
    for i in 0..12 {
        let mut f = |d: f64| {
            let mut p = base;
            p[i] += d;
            dot(ev.forward_raw(model, &p, z, i_arr, o_arr, false))
        };
        classify(&mut out, grads.d_analytical[i], &mut f, mid, h, floor, &|| {
            format!("analytical {}", AnalyticalParams::NAMES[i])
        });
    }
    let mut zz = z.to_vec();
    for i in 0..z.len() {
        let mut f = |d: f64| {
            zz[i] = z[i] + d;
            let v = dot(ev.forward_raw(model, &base, &zz, i_arr, o_arr, false));
            zz[i] = z[i];
            v
        };
        classify(&mut out, grads.d_neural[i], &mut f, mid, h, floor, &|| format!("z[{i}]"));
    }
    let mut m = model.clone();
    for (&slot, dw) in &grads.d_weights {
        for k in 0..dw.len() {
            let w0 = m.modules[&slot].params()[k];
            let mut f = |d: f64| {
                m.modules.get_mut(&slot).unwrap().params_mut()[k] = w0 + d;
                let v = dot(ev.forward_raw(&m, &base, z, i_arr, o_arr, false));
                m.modules.get_mut(&slot).unwrap().params_mut()[k] = w0;
                v
            };
            classify(&mut out, dw[k], &mut f, mid, h, floor, &|| format!("slot {slot} weight {k}"));
        }
    }
    out
}

/// `int D(h) (n.h) dh` over the upper hemisphere by jittered stratified
/// sampling, uniform in `cos(theta)` and `phi`, `side^2` samples.
pub fn projected_ndf_integral(d: impl Fn(&[f64; 3]) -> f64, side: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut sum = 0.0;
    for i in 0..side {
        for j in 0..side {
            let c = (i as f64 + rng.random::<f64>()) / side as f64;
            let phi = TAU * (j as f64 + rng.random::<f64>()) / side as f64;
            let s = (1.0 - c * c).max(0.0).sqrt();
            sum += d(&[s * phi.cos(), s * phi.sin(), c]) * c;
        }
    }
    // pdf = 1 / (2 pi)
    TAU * sum / (side * side) as f64
}

/// The planted-Fresnel benchmark data: four materials, `n` samples each.
pub fn planted_fresnel(n: usize) -> Vec<SampleSet> {
    gen_corrupted_ggx(&planted_materials(), Corruption::FresnelSwap, n, SamplingMode::Isotropic3Angle, Noise::NONE, 7)
}

/// `forward` of the all-zero model of `graph`, for equivalence checks.
pub fn zero_forward(graph: &CompGraph, a: &AnalyticalParams, wi: &Direction, wo: &Direction) -> Rgb {
    let m = EnhancedModel::analytical(graph.clone(), 0);
    forward(&m, a, &[], wi, wo).unwrap()
}

pub fn max_rel(a: &Rgb, b: &Rgb) -> f64 {
    (0..3)
        .map(|c| {
            let s = a[c].abs().max(b[c].abs());
            if s == 0.0 {
                0.0
            } else {
                (a[c] - b[c]).abs() / s
            }
        })
        .fold(0.0, f64::max)
}

/// Gradient check over `configs` random configurations of `graph`, cycling
/// through the all-zero, all-one, paper and random states.
pub fn gradient_sweep(graph: &CompGraph, configs: usize, seed: u64) -> (GradCheck, usize) {
    let n = graph.n_slots();
    let mut r = rng(seed);
    let mut total = GradCheck::default();
    let mut states = std::collections::BTreeSet::new();
    for k in 0..configs {
        let state = match k % 4 {
            0 => EnhancementState::zeros(n),
            1 => EnhancementState::ones_state(n),
            2 if n == 11 => paper_state(),
            _ => random_state(&mut r, n),
        };
        states.insert(state.bits().to_vec());
        let mseed: u64 = r.random();
        let model = EnhancedModel::with_state(graph.clone(), 27, nea::neural::DEFAULT_HIDDEN, &state, |s| {
            nea::seed::derive_seed(&[mseed, s as u64])
        })
        .unwrap();
        let a = interior_params(&mut r);
        let z: Vec<f64> = (0..27).map(|_| r.random_range(-1.0..1.0)).collect();
        let (wi, wo) = (upper_dir(&mut r, 1.3), upper_dir(&mut r, 1.3));
        let g = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let c = grad_check(&model, &a, &z, &wi, &wo, &g, 1e-5, 1e-6);
        total.checked += c.checked;
        total.kinks += c.kinks;
        if c.worst > total.worst {
            total.worst = c.worst;
            total.worst_at = format!("config {k} state {state}: {}", c.worst_at);
        }
    }
    (total, states.len())
}
