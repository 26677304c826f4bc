//! Per-material fitting against frozen module weights.

use crate::brdf::{AnalyticalParams, Direction, Rgb};
use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::graph::{build_ggx_graph, forward, EnhancedModel, DEFAULT_P_NEURAL};
use crate::optimize::{
    init_material_params, train_candidate, Candidate, MaterialParams, RmsProp, SplitData, TrainConfig, Trainable,
};

/// Parameters of one fitted material.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub analytical: AnalyticalParams,
    pub neural: Vec<f64>,
    /// Mean per-sample loss over the fitted samples.
    pub final_loss: f64,
    pub epochs_run: usize,
}

impl FitResult {
    /// Unfitted starting point: defaults and neural parameters at 0.5.
    pub fn initial(p_neural: usize) -> Self {
        let m = &init_material_params(1, p_neural, 0)[0];
        Self {
            analytical: m.analytical(),
            neural: m.neural.clone(),
            final_loss: f64::NAN,
            epochs_run: 0,
        }
    }

    pub fn param_count(&self) -> usize {
        AnalyticalParams::COUNT + self.neural.len()
    }

    pub fn eval(&self, model: &EnhancedModel, wi: &Direction, wo: &Direction) -> Result<Rgb> {
        forward(model, &self.analytical, &self.neural, wi, wo)
    }

    /// `key=value` lines: the analytical names, `z[i]`, `final_loss` and
    /// `epochs_run`. Values print with round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, v) in AnalyticalParams::NAMES.iter().zip(self.analytical.to_array()) {
            out += &format!("{n}={v:?}\n");
        }
        for (i, v) in self.neural.iter().enumerate() {
            out += &format!("z[{i}]={v:?}\n");
        }
        out += &format!("final_loss={:?}\nepochs_run={}\n", self.final_loss, self.epochs_run);
        out
    }

    /// Parses [`FitResult::to_text`]. Blank lines and `#` comments are
    /// skipped; every analytical name must appear and `z` indices must be
    /// contiguous from 0.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut a = [f64::NAN; 12];
        let mut z: Vec<Option<f64>> = Vec::new();
        let (mut final_loss, mut epochs_run) = (f64::NAN, 0);
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("line {}: {what}: {line:?}", ln + 1));
            let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "epochs_run" {
                epochs_run = v.parse().map_err(|_| bad("bad integer"))?;
                continue;
            }
            let x: f64 = v.parse().map_err(|_| bad("bad number"))?;
            if k == "final_loss" {
                final_loss = x;
            } else if let Some(i) = AnalyticalParams::NAMES.iter().position(|n| *n == k) {
                a[i] = x;
            } else if let Some(i) = k
                .strip_prefix("z[")
                .and_then(|s| s.strip_suffix(']'))
                .and_then(|s| s.parse::<usize>().ok())
            {
                if i >= z.len() {
                    z.resize(i + 1, None);
                }
                z[i] = Some(x);
            } else {
                return Err(bad("unknown key"));
            }
        }
        if let Some(i) = a.iter().position(|v| v.is_nan()) {
            return Err(Error::Parse(format!("missing {}", AnalyticalParams::NAMES[i])));
        }
        let neural = z
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("missing z[{i}]"))))
            .collect::<Result<Vec<_>>>()?;
        let analytical = AnalyticalParams::from_array(&a);
        analytical.validate()?;
        Ok(Self {
            analytical,
            neural,
            final_loss,
            epochs_run,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: RmsProp::DEFAULT_LR,
            seed: 0,
        }
    }
}

/// Optimizes the analytical and neural parameters of one material with the
/// module weights held fixed. Every epoch is a single full-batch step.
///
/// The returned parameters are those with the lowest loss seen at an epoch
/// boundary; if the loss becomes non-finite the search stops there.
pub fn fit_material(model: &EnhancedModel, data: &SampleSet, cfg: &FitConfig) -> Result<FitResult> {
    let init = &init_material_params(1, model.p_neural, cfg.seed)[0];
    fit_material_from(model, data, init, cfg)
}

/// [`fit_material`] from a chosen starting point.
pub fn fit_material_from(
    model: &EnhancedModel,
    data: &SampleSet,
    init: &MaterialParams,
    cfg: &FitConfig,
) -> Result<FitResult> {
    if init.neural.len() != model.p_neural {
        return Err(Error::DimensionMismatch {
            expected: model.p_neural,
            got: init.neural.len(),
        });
    }
    let split = SplitData::all_train(std::slice::from_ref(data));
    let tcfg = TrainConfig {
        batch_size: data.len().max(1),
        epochs_per_stage: cfg.epochs,
        lr: cfg.lr,
        seed: cfg.seed,
        holdout: 0.0,
        ..TrainConfig::default()
    };
    let cand = Candidate {
        model: model.clone(),
        materials: vec![init.clone()],
    };
    let out = train_candidate(cand, &split, &tcfg, Trainable::MaterialsOnly, 0);
    let m = &out.candidate.materials[0];
    let final_loss = out
        .log
        .iter()
        .filter(|l| l.val_loss.is_finite())
        .map(|l| l.val_loss)
        .fold(f64::INFINITY, f64::min);
    Ok(FitResult {
        analytical: m.analytical(),
        neural: m.neural.clone(),
        final_loss,
        epochs_run: out.log.len() - 1,
    })
}

/// Best pure-GGX fit of `data`, for driving standard GGX importance
/// sampling.
pub fn fit_analytical_proxy(data: &SampleSet, cfg: &FitConfig) -> Result<FitResult> {
    let model = EnhancedModel::analytical(build_ggx_graph(), DEFAULT_P_NEURAL);
    fit_material(&model, data, cfg)
}

/// Applies `name = value` edits to a copy of `fit`.
///
/// Names are the analytical parameter names (`rho_d.r`, `alpha_x`, ...),
/// `rho_d` / `rho_s` for all three channels at once, `alpha` for both
/// roughnesses, or `z[i]` for a neural parameter.
pub fn edit_params<'a>(fit: &FitResult, edits: impl IntoIterator<Item = (&'a str, f64)>) -> Result<FitResult> {
    let mut out = fit.clone();
    let mut a = out.analytical.to_array();
    for (name, v) in edits {
        if !v.is_finite() {
            return Err(Error::OutOfRange(format!("{name} = {v}")));
        }
        match name {
            "rho_d" => a[0..3].fill(v),
            "rho_s" => a[3..6].fill(v),
            "alpha" => a[6..8].fill(v),
            _ => {
                if let Some(i) = AnalyticalParams::NAMES.iter().position(|n| *n == name) {
                    a[i] = v;
                } else if let Some(i) = name
                    .strip_prefix("z[")
                    .and_then(|s| s.strip_suffix(']'))
                    .and_then(|s| s.parse::<usize>().ok())
                {
                    let n = out.neural.len();
                    *out.neural
                        .get_mut(i)
                        .ok_or_else(|| Error::OutOfRange(format!("neural index {i} >= {n}")))? = v;
                } else {
                    return Err(Error::OutOfRange(format!("unknown parameter {name:?}")));
                }
            }
        }
    }
    out.analytical = AnalyticalParams::from_array(&a);
    out.analytical.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_PI;

    use super::*;
    use crate::data::{gen_synthetic_ggx, Noise, SamplingMode};

    fn data() -> SampleSet {
        let p = AnalyticalParams::isotropic([0.3, 0.2, 0.1], [0.5, 0.5, 0.5], 0.3, 0.04);
        gen_synthetic_ggx(&[p], 400, SamplingMode::Isotropic3Angle, Noise::NONE, 3).remove(0)
    }

    fn ggx() -> EnhancedModel {
        EnhancedModel::analytical(build_ggx_graph(), 4)
    }

    #[test]
    fn zero_epochs_returns_start() {
        let cfg = FitConfig { epochs: 0, ..FitConfig::default() };
        let init = &init_material_params(1, 4, 0)[0];
        let f = fit_material_from(&ggx(), &data(), init, &cfg).unwrap();
        assert_eq!(f.analytical, init.analytical());
        assert_eq!(f.neural, init.neural);
        assert_eq!(f.epochs_run, 0);
        assert!(f.final_loss.is_finite());
    }

    #[test]
    fn fitting_lowers_loss_and_is_deterministic() {
        let cfg = FitConfig { epochs: 200, lr: 1e-2, seed: 1 };
        let d = data();
        let a = fit_material(&ggx(), &d, &cfg).unwrap();
        let b = fit_material(&ggx(), &d, &cfg).unwrap();
        assert_eq!(a, b);
        let start = fit_material(&ggx(), &d, &FitConfig { epochs: 0, ..cfg.clone() }).unwrap();
        assert!(a.final_loss < 0.5 * start.final_loss, "{} vs {}", a.final_loss, start.final_loss);
        assert_eq!(a.epochs_run, 200);
    }

    #[test]
    fn module_weights_are_not_touched() {
        let mut m = ggx();
        m.enable(3, 5);
        let before = m.flat_weights();
        fit_material(&m, &data(), &FitConfig { epochs: 20, lr: 1e-2, seed: 0 }).unwrap();
        assert_eq!(m.flat_weights(), before);
        let init = &init_material_params(1, 3, 0)[0];
        assert!(fit_material_from(&m, &data(), init, &FitConfig::default()).is_err());
    }

    #[test]
    fn proxy_is_pure_ggx() {
        let f = fit_analytical_proxy(&data(), &FitConfig { epochs: 5, ..FitConfig::default() }).unwrap();
        assert_eq!(f.neural.len(), DEFAULT_P_NEURAL);
    }

    #[test]
    fn text_round_trip() {
        let mut f = FitResult::initial(3);
        f.neural[1] = -0.1234567890123;
        f.analytical.alpha_y = 0.2;
        f.final_loss = 1.5e-3;
        f.epochs_run = 7;
        let t = f.to_text();
        assert!(t.contains("alpha_y=0.2\n") && t.contains("z[2]=0.5\n"));
        assert_eq!(FitResult::from_text(&format!("# note\n\n{t}")).unwrap(), f);
        assert!(FitResult::from_text(&t.replace("z[1]", "z[5]")).is_err());
        assert!(FitResult::from_text(&t.replace("rho_d.r=", "# ")).is_err());
        assert!(FitResult::from_text(&t.replace("f0=", "f0=x")).is_err());
        assert!(FitResult::from_text(&t.replace("alpha_y=0.2", "alpha_y=3.0")).is_err());
        assert!(FitResult::from_text(&format!("{t}colour=1.0\n")).is_err());
    }

    #[test]
    fn edits() {
        let p = AnalyticalParams::isotropic([0.3, 0.2, 0.1], [0.2, 0.2, 0.2], 0.3, 0.04);
        let fit = FitResult { analytical: p, neural: vec![0.5; 4], final_loss: 0.0, epochs_run: 0 };
        let m = ggx();
        let n = Direction::NORMAL;
        let base = fit.eval(&m, &n, &n).unwrap();

        let no_diffuse = edit_params(&fit, [("rho_d", 0.0)]).unwrap();
        let v = no_diffuse.eval(&m, &n, &n).unwrap();
        for c in 0..3 {
            let drop = base[c] - v[c];
            let want = p.rho_d[c] * FRAC_1_PI;
            assert!((drop - want).abs() < 1e-12 * want.max(1.0), "{drop} vs {want}");
        }

        let bright = edit_params(&fit, [("rho_d", 0.0), ("rho_s", 0.8)]).unwrap();
        let w = bright.eval(&m, &n, &n).unwrap();
        for c in 0..3 {
            assert!((w[c] - 4.0 * v[c]).abs() < 1e-12 * w[c]);
        }

        let e = edit_params(&fit, [("rho_d.g", 0.7), ("z[2]", -0.25)]).unwrap();
        assert_eq!(e.analytical.rho_d[1], 0.7);
        assert_eq!(e.neural[2], -0.25);
        for bad in [("rho_d", -0.1), ("alpha", 0.0), ("z[4]", 0.0), ("nope", 0.0), ("f0", f64::NAN)] {
            assert!(edit_params(&fit, [bad]).is_err(), "{bad:?}");
        }
    }
}
