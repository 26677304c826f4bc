mod common;

use nea::brdf::AnalyticalParams;
use nea::data::{gen_corrupted_ggx, gen_synthetic_ggx, planted_materials, Corruption, Noise, SamplingMode};
use nea::graph::{build_ggx_graph, build_toy_lambert_fresnel_graph};
use nea::optimize::TrainConfig;
use nea::search::{exhaustive_search, run_enhancement, SearchConfig};

fn tcfg() -> TrainConfig {
    TrainConfig {
        batch_size: 250,
        seed: 1,
        ..TrainConfig::default()
    }
}

#[test]
fn greedy_toy_search_is_close_to_exhaustive_optimum() {
    let data = gen_corrupted_ggx(&planted_materials()[..2], Corruption::FresnelSwap, 1000, SamplingMode::Isotropic3Angle, Noise::NONE, 7);
    let cfg = SearchConfig {
        epochs_per_stage: 10,
        warmup_epochs: 10,
        ..SearchConfig::default()
    };
    let t = std::time::Instant::now();
    let ex = exhaustive_search(build_toy_lambert_fresnel_graph(), &data, &cfg, &tcfg()).unwrap();
    assert_eq!(ex.losses.len(), 32);
    let greedy = run_enhancement(build_toy_lambert_fresnel_graph(), &data, &cfg, &tcfg()).unwrap();
    println!("{:?} exhaustive {} {} greedy {} {}", t.elapsed(), ex.best, ex.best_loss, greedy.model.state, greedy.val_loss);
    assert!(greedy.val_loss <= 1.1 * ex.best_loss, "greedy {} vs optimum {}", greedy.val_loss, ex.best_loss);
}

#[test]
fn search_on_model_generated_data_keeps_the_analytical_model() {
    let p = AnalyticalParams::isotropic([0.2, 0.3, 0.4], [0.5, 0.5, 0.5], 0.3, 0.05);
    let q = AnalyticalParams::isotropic([0.05, 0.05, 0.05], [0.7, 0.6, 0.5], 0.2, 0.1);
    let data = gen_synthetic_ggx(&[p, q], 1000, SamplingMode::Isotropic3Angle, Noise::NONE, 2);
    // converge the analytical model first so candidates compete on fit
    // quality rather than on speed
    let cfg = SearchConfig {
        epochs_per_stage: 10,
        warmup_epochs: 300,
        ..SearchConfig::default()
    };
    let t = std::time::Instant::now();
    let r = run_enhancement(build_ggx_graph(), &data, &cfg, &tcfg()).unwrap();
    println!("{:?}\n{}", t.elapsed(), r.trace.report(&build_ggx_graph()));
    assert!(r.model.state.is_zero(), "moved to {}", r.model.state);
}
