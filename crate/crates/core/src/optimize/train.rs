//! Joint training of module weights, neural parameters and analytical
//! parameters.
//!
//! All trainable scalars of one candidate form a single flat vector: the
//! module weights (slot order) followed, per material, by the 12 raw
//! analytical values and the neural parameter vector. Batch gradients are
//! computed over fixed-size chunks in parallel and reduced in chunk order,
//! so results do not depend on the thread count.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::{loss_log_l1, loss_log_l1_grad};
use super::reparam::{decode, encode};
use super::rmsprop::RmsProp;
use crate::brdf::AnalyticalParams;
use crate::data::{Sample, SampleSet};
use crate::graph::{EnhancedModel, Evaluator};
use crate::seed::derive_seed;

/// Samples per parallel work unit.
const CHUNK: usize = 64;

/// Per-material trainable state.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialParams {
    /// Unconstrained encoding of the analytical parameters.
    pub raw: [f64; 12],
    pub neural: Vec<f64>,
}

impl MaterialParams {
    pub fn new(a: &AnalyticalParams, neural: Vec<f64>) -> Self {
        Self { raw: encode(a), neural }
    }

    pub fn analytical(&self) -> AnalyticalParams {
        decode(&self.raw).0
    }
}

/// Neural parameters at 0.5, analytical parameters at their defaults.
///
/// The initialization is deterministic; `seed` is accepted for interface
/// symmetry with the other generators.
pub fn init_material_params(n_materials: usize, p_neural: usize, _seed: u64) -> Vec<MaterialParams> {
    (0..n_materials)
        .map(|_| MaterialParams::new(&AnalyticalParams::default(), vec![0.5; p_neural]))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs_per_stage: usize,
    pub lr: f64,
    pub seed: u64,
    /// Fraction of each material's samples held out for validation.
    pub holdout: f64,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100_000,
            epochs_per_stage: 30,
            lr: RmsProp::DEFAULT_LR,
            seed: 0,
            holdout: 0.1,
            grad_clip: 1e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialData {
    pub id: String,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

/// Train/validation split of every material.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitData {
    pub materials: Vec<MaterialData>,
}

impl SplitData {
    /// Holds out `round(frac * n)` samples of each material, chosen by a
    /// seeded shuffle.
    pub fn new(sets: &[SampleSet], frac: f64, seed: u64) -> Self {
        let materials = sets
            .iter()
            .enumerate()
            .map(|(m, s)| {
                let mut order: Vec<usize> = (0..s.len()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, m as u64, 0x5917]));
                order.shuffle(&mut rng);
                let n_val = ((s.len() as f64) * frac).round() as usize;
                let (v, t) = order.split_at(n_val.min(s.len()));
                let mut v = v.to_vec();
                let mut t = t.to_vec();
                v.sort_unstable();
                t.sort_unstable();
                MaterialData {
                    id: s.material_id.clone(),
                    train: t.iter().map(|&i| s.samples[i]).collect(),
                    val: v.iter().map(|&i| s.samples[i]).collect(),
                }
            })
            .collect();
        Self { materials }
    }

    /// Every sample used for training; nothing held out.
    pub fn all_train(sets: &[SampleSet]) -> Self {
        Self::new(sets, 0.0, 0)
    }

    pub fn n_materials(&self) -> usize {
        self.materials.len()
    }

    pub fn train_len(&self) -> usize {
        self.materials.iter().map(|m| m.train.len()).sum()
    }

    pub fn val_len(&self) -> usize {
        self.materials.iter().map(|m| m.val.len()).sum()
    }
}

/// A model together with the per-material parameters it is trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub model: EnhancedModel,
    pub materials: Vec<MaterialParams>,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub state: String,
    pub train_loss: f64,
    pub val_loss: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {:.9e}, {:.9e}",
            self.epoch, self.state, self.train_loss, self.val_loss
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest monitored loss.
    pub candidate: Candidate,
    /// Lowest monitored loss (`+inf` when training diverged).
    pub val_loss: f64,
    pub best_epoch: usize,
    pub diverged: bool,
    pub log: Vec<EpochLog>,
}

/// Which parameter groups receive updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trainable {
    Everything,
    /// Module weights frozen; only per-material parameters move.
    MaterialsOnly,
}

struct Layout {
    n_weights: usize,
    /// weights included in the optimized vector
    train_weights: bool,
    per_material: usize,
    p_neural: usize,
}

impl Layout {
    fn new(model: &EnhancedModel, n_materials: usize, what: Trainable) -> (Self, usize) {
        let l = Self {
            n_weights: model.total_weights(),
            train_weights: what == Trainable::Everything,
            per_material: 12 + model.p_neural,
            p_neural: model.p_neural,
        };
        let len = l.weight_len() + n_materials * l.per_material;
        (l, len)
    }

    fn weight_len(&self) -> usize {
        if self.train_weights {
            self.n_weights
        } else {
            0
        }
    }

    fn material_offset(&self, m: usize) -> usize {
        self.weight_len() + m * self.per_material
    }
}

fn pack(c: &Candidate, l: &Layout) -> Vec<f64> {
    let mut v = Vec::new();
    if l.train_weights {
        v.extend(c.model.flat_weights());
    }
    for m in &c.materials {
        v.extend_from_slice(&m.raw);
        v.extend_from_slice(&m.neural);
    }
    v
}

fn unpack(c: &mut Candidate, l: &Layout, v: &[f64]) {
    if l.train_weights {
        c.model.set_flat_weights(&v[..l.n_weights]);
    }
    for (m, mp) in c.materials.iter_mut().enumerate() {
        let o = l.material_offset(m);
        mp.raw.copy_from_slice(&v[o..o + 12]);
        mp.neural.copy_from_slice(&v[o + 12..o + 12 + l.p_neural]);
    }
}

fn decoded(c: &Candidate) -> Vec<([f64; 12], [f64; 12])> {
    c.materials
        .iter()
        .map(|m| {
            let (a, j) = decode(&m.raw);
            (a.to_array(), j)
        })
        .collect()
}

/// Mean per-sample loss of `c` over `pick(material)` samples.
pub fn mean_loss(c: &Candidate, data: &SplitData, pick: impl Fn(&MaterialData) -> &[Sample] + Sync) -> f64 {
    let dec = decoded(c);
    let items: Vec<(usize, &Sample)> = data
        .materials
        .iter()
        .enumerate()
        .flat_map(|(m, md)| pick(md).iter().map(move |s| (m, s)))
        .collect();
    if items.is_empty() {
        return 0.0;
    }
    let sums: Vec<f64> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ev = Evaluator::new(&c.model);
            chunk
                .iter()
                .map(|(m, s)| {
                    let pred = ev.forward_raw(
                        &c.model,
                        &dec[*m].0,
                        &c.materials[*m].neural,
                        s.wi.as_array(),
                        s.wo.as_array(),
                        false,
                    );
                    loss_log_l1(&pred, &s.value, s.wi.z())
                })
                .sum::<f64>()
        })
        .collect();
    sums.iter().sum::<f64>() / items.len() as f64
}

/// Loss sum and gradient sum over `batch` (pairs of material, sample index).
fn batch_gradient(c: &Candidate, l: &Layout, total: usize, data: &SplitData, batch: &[(u32, u32)]) -> (f64, Vec<f64>) {
    let dec = decoded(c);
    let partial: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ev = Evaluator::new(&c.model);
            let mut g = vec![0.0; total];
            let mut w_scratch = if l.train_weights {
                Vec::new()
            } else {
                vec![0.0; l.n_weights]
            };
            let mut loss = 0.0;
            for &(m, i) in chunk {
                let (m, i) = (m as usize, i as usize);
                let s = &data.materials[m].train[i];
                let (a, jac) = &dec[m];
                let pred = ev.forward_raw(
                    &c.model,
                    a,
                    &c.materials[m].neural,
                    s.wi.as_array(),
                    s.wo.as_array(),
                    true,
                );
                let (li, gp) = loss_log_l1_grad(&pred, &s.value, s.wi.z());
                loss += li;
                if gp == [0.0; 3] {
                    continue;
                }
                let mut d_a = [0.0; 12];
                let mo = l.material_offset(m);
                let (head, tail) = g.split_at_mut(mo);
                let d_w = if l.train_weights {
                    &mut head[..l.n_weights]
                } else {
                    &mut w_scratch[..]
                };
                let d_z = &mut tail[12..12 + l.p_neural];
                ev.backward_raw(&c.model, &gp, &mut d_a, d_z, d_w);
                for k in 0..12 {
                    tail[k] += d_a[k] * jac[k];
                }
            }
            (loss, g)
        })
        .collect();
    let mut loss = 0.0;
    let mut g = vec![0.0; total];
    for (li, gi) in partial {
        loss += li;
        for (a, b) in g.iter_mut().zip(gi) {
            *a += b;
        }
    }
    (loss, g)
}

/// Trains one candidate for `cfg.epochs_per_stage` epochs and returns the
/// parameters from the epoch boundary (including the start) with the lowest
/// monitored loss. The monitored loss is the held-out loss, or the training
/// loss when nothing is held out.
pub fn train_candidate(
    mut cand: Candidate,
    data: &SplitData,
    cfg: &TrainConfig,
    what: Trainable,
    stream: u64,
) -> TrainOutcome {
    assert_eq!(cand.materials.len(), data.n_materials(), "one parameter table per material");
    let (layout, total) = Layout::new(&cand.model, cand.materials.len(), what);
    let monitor = |c: &Candidate| {
        if data.val_len() > 0 {
            mean_loss(c, data, |m| &m.val)
        } else {
            mean_loss(c, data, |m| &m.train)
        }
    };
    let state = cand.model.state.to_string();
    let mut params = pack(&cand, &layout);
    let mut opt = RmsProp::new(total, cfg.lr);
    let mut pool: Vec<(u32, u32)> = data
        .materials
        .iter()
        .enumerate()
        .flat_map(|(m, md)| (0..md.train.len() as u32).map(move |i| (m as u32, i)))
        .collect();

    let start = monitor(&cand);
    let mut best = (start, 0usize, params.clone());
    let mut log = Vec::with_capacity(cfg.epochs_per_stage + 1);
    log.push(EpochLog {
        epoch: 0,
        state: state.clone(),
        train_loss: if data.val_len() > 0 {
            mean_loss(&cand, data, |m| &m.train)
        } else {
            start
        },
        val_loss: start,
    });
    let mut diverged = !start.is_finite();
    let batch_size = cfg.batch_size.max(1);

    'epochs: for epoch in 1..=cfg.epochs_per_stage {
        if diverged {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, stream, epoch as u64]));
        pool.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in pool.chunks(batch_size) {
            let (loss, mut g) = batch_gradient(&cand, &layout, total, data, batch);
            let inv = 1.0 / batch.len() as f64;
            let mut norm2 = 0.0;
            for v in &mut g {
                *v *= inv;
                norm2 += *v * *v;
            }
            if !(loss.is_finite() && norm2.is_finite()) {
                diverged = true;
                break 'epochs;
            }
            let norm = norm2.sqrt();
            if norm > cfg.grad_clip {
                let k = cfg.grad_clip / norm;
                g.iter_mut().for_each(|v| *v *= k);
            }
            loss_sum += loss;
            opt.step(&mut params, &g);
            unpack(&mut cand, &layout, &params);
        }
        let val = monitor(&cand);
        let train_loss = loss_sum / pool.len().max(1) as f64;
        log.push(EpochLog {
            epoch,
            state: state.clone(),
            train_loss,
            val_loss: val,
        });
        if !val.is_finite() {
            diverged = true;
            break;
        }
        if val < best.0 {
            best = (val, epoch, params.clone());
        }
    }
    unpack(&mut cand, &layout, &best.2);
    TrainOutcome {
        candidate: cand,
        val_loss: if diverged { f64::INFINITY } else { best.0 },
        best_epoch: best.1,
        diverged,
        log,
    }
}

/// Trains every candidate independently; `streams[i]` seeds candidate `i`.
pub fn train_jointly(
    candidates: Vec<Candidate>,
    data: &SplitData,
    cfg: &TrainConfig,
    streams: &[u64],
) -> Vec<TrainOutcome> {
    assert_eq!(candidates.len(), streams.len());
    candidates
        .into_par_iter()
        .zip(streams.par_iter())
        .map(|(c, &s)| train_candidate(c, data, cfg, Trainable::Everything, s))
        .collect()
}
