//! Direction sampling and synthetic virtual measurements.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::merl::{merl_lookup, MerlTable};
use super::sampleset::{Sample, SampleSet, Source};
use crate::brdf::terms;
use crate::brdf::vec3::{self, lift};
use crate::brdf::{eval_analytical_ggx, halfdiff_to_dirs, AnalyticalParams, Direction, HalfDiffAngles, Rgb};
use crate::brdf::{idx, ALPHA_MIN, COS_EPS};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    /// `(theta_h, theta_d, phi_d)` uniform, `phi_h = 0`.
    Isotropic3Angle,
    /// All four half/difference angles uniform.
    Anisotropic4Angle,
}

/// Redraws allowed per accepted pair before giving up.
const MAX_REDRAWS: usize = 10_000;

/// Draws `n` direction pairs uniformly in half/difference angles, rejecting
/// pairs with either direction at or below the horizon.
pub fn sample_directions(n: usize, mode: SamplingMode, seed: u64) -> Vec<(Direction, Direction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut tries = 0;
        loop {
            tries += 1;
            assert!(tries <= MAX_REDRAWS, "direction sampler failed to find an upper-hemisphere pair");
            let a = HalfDiffAngles {
                theta_h: rng.random_range(0.0..FRAC_PI_2),
                phi_h: match mode {
                    SamplingMode::Isotropic3Angle => 0.0,
                    SamplingMode::Anisotropic4Angle => rng.random_range(0.0..TAU),
                },
                theta_d: rng.random_range(0.0..FRAC_PI_2),
                phi_d: rng.random_range(0.0..TAU),
            };
            let (wi, wo) = halfdiff_to_dirs(&a).expect("sampled angles are in range");
            if wi.z() > 0.0 && wo.z() > 0.0 {
                out.push((wi, wo));
                break;
            }
        }
    }
    out
}

/// Multiplicative Gaussian acquisition noise, per channel, clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Noise {
    pub mu: f64,
    pub sigma: f64,
}

impl Noise {
    pub const NONE: Noise = Noise { mu: 1.0, sigma: 0.0 };
    pub const ACQUISITION: Noise = Noise { mu: 1.0, sigma: 0.1 };
}

/// Replacement used when generating deliberately mismatched data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corruption {
    /// Schlick's form with exponent 2 instead of 5: `F0 + (1 - F0)(1 - c)^2`.
    FresnelSwap,
    /// Exact unpolarized dielectric Fresnel with `eta = (1 + sqrt F0) / (1 - sqrt F0)`.
    DielectricSwap,
    /// Height-correlated Smith `1 / (1 + Lambda(wi) + Lambda(wo))`.
    GeometrySwap,
    /// Ashikhmin-Shirley normalization `1 / (4 (wi.h) max(n.wi, n.wo))`.
    NormSwap,
}

impl std::str::FromStr for Corruption {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "fresnel" => Ok(Corruption::FresnelSwap),
            "dielectric" => Ok(Corruption::DielectricSwap),
            "geometry" => Ok(Corruption::GeometrySwap),
            "norm" => Ok(Corruption::NormSwap),
            _ => Err(crate::Error::Parse(format!("unknown corruption {s:?}"))),
        }
    }
}

/// Exact dielectric Fresnel reflectance for `c = cos` of the incidence angle.
pub fn dielectric_fresnel(f0: f64, c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    let s = f0.clamp(0.0, 0.999_999).sqrt();
    let eta = (1.0 + s) / (1.0 - s);
    let g = (eta * eta - 1.0 + c * c).sqrt();
    let a = (g - c) / (g + c);
    let b = (c * (g + c) - 1.0) / (c * (g - c) + 1.0);
    0.5 * a * a * (1.0 + b * b)
}

fn smith_lambda(ax: f64, ay: f64, v: &[f64; 3]) -> f64 {
    let z = v[2].max(COS_EPS);
    let t2 = ((ax * v[0]).powi(2) + (ay * v[1]).powi(2)) / (z * z);
    0.5 * ((1.0 + t2).sqrt() - 1.0)
}

/// GGX with one term swapped for the given alternative.
pub fn eval_corrupted_ggx(p: &AnalyticalParams, wi: &Direction, wo: &Direction, c: Corruption) -> Rgb {
    let a = p.to_array();
    let (i, o) = (lift::<f64>(wi.as_array()), lift::<f64>(wo.as_array()));
    let frame = crate::brdf::ShadingFrame::from_params(p);
    let h = terms::half_vector(&i, &o);
    let d = terms::ggx_d(&a, &i, &o);
    let f = match c {
        Corruption::FresnelSwap => {
            let c = vec3::dot(&i, &h).clamp(0.0, 1.0);
            p.f0 + (1.0 - p.f0) * (1.0 - c) * (1.0 - c)
        }
        Corruption::DielectricSwap => dielectric_fresnel(p.f0, vec3::dot(&i, &h)),
        _ => terms::schlick_f(&a, &i, &o),
    };
    let g = match c {
        Corruption::GeometrySwap => {
            let (ax, ay) = (a[idx::ALPHA_X].max(ALPHA_MIN), a[idx::ALPHA_Y].max(ALPHA_MIN));
            let li = smith_lambda(ax, ay, &frame.to_local(&i));
            let lo = smith_lambda(ax, ay, &frame.to_local(&o));
            1.0 / (1.0 + li + lo)
        }
        _ => terms::smith_g(&a, &i, &o),
    };
    let e = match c {
        Corruption::NormSwap => {
            let ih = vec3::dot(&i, &h).max(COS_EPS);
            let m = vec3::dot(&frame.n, &i).max(vec3::dot(&frame.n, &o)).max(COS_EPS);
            0.25 / (ih * m)
        }
        _ => terms::recip_norm(&a, &i, &o),
    };
    let k = d * f * g * e;
    let m = terms::lambertian(&a);
    std::array::from_fn(|ch| m[ch] + p.rho_s[ch] * k)
}

fn noisy_sets(
    params_list: &[AnalyticalParams],
    n_per_material: usize,
    mode: SamplingMode,
    noise: Noise,
    seed: u64,
    prefix: &str,
    eval: impl Fn(&AnalyticalParams, &Direction, &Direction) -> Rgb,
) -> Vec<SampleSet> {
    params_list
        .iter()
        .enumerate()
        .map(|(m, p)| {
            let dirs = sample_directions(n_per_material, mode, derive_seed(&[seed, m as u64, 1]));
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, m as u64, 2]));
            let normal = Normal::new(noise.mu, noise.sigma.max(0.0)).expect("finite noise sigma");
            let mut set = SampleSet::new(format!("{prefix}-{m}"), Source::SyntheticGgx);
            set.samples = dirs
                .into_iter()
                .map(|(wi, wo)| {
                    let clean = eval(p, &wi, &wo);
                    let value = if noise.sigma == 0.0 && noise.mu == 1.0 {
                        clean
                    } else {
                        clean.map(|v| (v * normal.sample(&mut rng)).max(0.0))
                    };
                    Sample { wi, wo, value }
                })
                .collect();
            set
        })
        .collect()
}

/// Virtual measurements of the analytical GGX model.
pub fn gen_synthetic_ggx(
    params_list: &[AnalyticalParams],
    n_per_material: usize,
    mode: SamplingMode,
    noise: Noise,
    seed: u64,
) -> Vec<SampleSet> {
    noisy_sets(params_list, n_per_material, mode, noise, seed, "ggx", eval_analytical_ggx)
}

/// Virtual measurements of GGX with one term replaced.
pub fn gen_corrupted_ggx(
    params_list: &[AnalyticalParams],
    corruption: Corruption,
    n_per_material: usize,
    mode: SamplingMode,
    noise: Noise,
    seed: u64,
) -> Vec<SampleSet> {
    noisy_sets(params_list, n_per_material, mode, noise, seed, "corrupted", |p, i, o| {
        eval_corrupted_ggx(p, i, o, corruption)
    })
}

/// Queries a MERL table at `n` sampled isotropic pairs.
pub fn merl_to_sampleset(table: &MerlTable, material_id: &str, n: usize, seed: u64) -> SampleSet {
    let mut set = SampleSet::new(material_id, Source::Merl);
    set.samples = sample_directions(n, SamplingMode::Isotropic3Angle, seed)
        .into_iter()
        .map(|(wi, wo)| Sample {
            wi,
            wo,
            value: merl_lookup(table, &wi, &wo),
        })
        .collect();
    set
}

/// Dense incident directions around one fixed view direction, in the
/// spirit of a lumitexel: `n_side x n_side` concentric-mapped `wi`.
pub fn gen_fixed_view_ggx(p: &AnalyticalParams, wo: Direction, n_side: usize, material_id: &str) -> SampleSet {
    let mut set = SampleSet::new(material_id, Source::SyntheticGgx);
    for y in 0..n_side {
        for x in 0..n_side {
            let u = (x as f64 + 0.5) / n_side as f64;
            let v = (y as f64 + 0.5) / n_side as f64;
            let wi = crate::runtime::square_to_hemisphere(u, v);
            if wi.z() > 0.0 {
                set.samples.push(Sample {
                    wi,
                    wo,
                    value: eval_analytical_ggx(p, &wi, &wo),
                });
            }
        }
    }
    set
}

/// Materials used by the planted-corruption benchmark: mostly specular and
/// moderately rough, so the Fresnel term shapes most of the signal.
pub fn planted_materials() -> Vec<AnalyticalParams> {
    vec![
        AnalyticalParams::isotropic([0.10, 0.08, 0.05], [0.7, 0.6, 0.5], 0.30, 0.08),
        AnalyticalParams::isotropic([0.03, 0.06, 0.10], [0.5, 0.6, 0.7], 0.35, 0.15),
        AnalyticalParams {
            alpha_x: 0.25,
            alpha_y: 0.35,
            ..AnalyticalParams::isotropic([0.12, 0.10, 0.06], [0.6, 0.5, 0.4], 0.3, 0.05)
        },
        AnalyticalParams::isotropic([0.06, 0.06, 0.06], [0.6, 0.6, 0.6], 0.25, 0.10),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_valid_and_deterministic() {
        let a = sample_directions(5000, SamplingMode::Anisotropic4Angle, 3);
        let b = sample_directions(5000, SamplingMode::Anisotropic4Angle, 3);
        assert_eq!(a, b);
        for (wi, wo) in &a {
            assert!(wi.z() > 0.0 && wo.z() > 0.0);
            for d in [wi, wo] {
                assert!((d.dot(d) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sigma_zero_is_exact() {
        let p = vec![AnalyticalParams::default()];
        let sets = gen_synthetic_ggx(&p, 200, SamplingMode::Isotropic3Angle, Noise::NONE, 1);
        for s in &sets[0].samples {
            assert_eq!(s.value, eval_analytical_ggx(&p[0], &s.wi, &s.wo));
        }
    }

    #[test]
    fn fresnel_swap_agrees_at_normal_incidence() {
        for f0 in [0.02, 0.04, 0.3, 0.6] {
            assert!((dielectric_fresnel(f0, 1.0) - f0).abs() < 1e-12);
        }
        let p = planted_materials()[0];
        let n = Direction::NORMAL;
        let b = eval_analytical_ggx(&p, &n, &n);
        for k in [Corruption::FresnelSwap, Corruption::DielectricSwap] {
            let a = eval_corrupted_ggx(&p, &n, &n, k);
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-12 * b[c]);
            }
        }
    }

    #[test]
    fn fresnel_swap_differs_at_grazing() {
        let p = AnalyticalParams::isotropic([0.0; 3], [1.0; 3], 0.3, 0.04);
        let a = HalfDiffAngles {
            theta_h: 0.0,
            phi_h: 0.0,
            theta_d: 80f64.to_radians(),
            phi_d: 0.0,
        };
        let (wi, wo) = halfdiff_to_dirs(&a).unwrap();
        let good = eval_analytical_ggx(&p, &wi, &wo)[0];
        let bad = eval_corrupted_ggx(&p, &wi, &wo, Corruption::DielectricSwap)[0];
        assert!((bad / good - 1.0).abs() > 0.01, "{bad} vs {good}");
        // only F changes, so the ratio is the ratio of the two curves
        let c = 80f64.to_radians().cos();
        let want = (0.04 + 0.96 * (1.0 - c).powi(2)) / (0.04 + 0.96 * (1.0 - c).powi(5));
        let bad = eval_corrupted_ggx(&p, &wi, &wo, Corruption::FresnelSwap)[0];
        assert!((bad / good - want).abs() < 1e-9 * want, "{} vs {want}", bad / good);
    }

    #[test]
    fn corruptions_are_deterministic() {
        let p = planted_materials();
        for c in [
            Corruption::FresnelSwap,
            Corruption::DielectricSwap,
            Corruption::GeometrySwap,
            Corruption::NormSwap,
        ] {
            let a = gen_corrupted_ggx(&p, c, 100, SamplingMode::Isotropic3Angle, Noise::ACQUISITION, 9);
            let b = gen_corrupted_ggx(&p, c, 100, SamplingMode::Isotropic3Angle, Noise::ACQUISITION, 9);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fixed_view_samples_cover_hemisphere() {
        let s = gen_fixed_view_ggx(&AnalyticalParams::default(), Direction::NORMAL, 16, "lt");
        assert!(s.len() > 150);
        s.check(1e-9).unwrap();
    }
}
