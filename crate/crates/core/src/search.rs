//! Greedy search over enhancement states.
//!
//! Each stage trains every state within the Hamming threshold of the
//! current one, all starting from the current model's parameters, and moves
//! to the best. The search stops when the current state wins its own stage.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::codec::{Reader, Writer};
use crate::data::SampleSet;
use crate::error::{Error, Result};
use crate::graph::{state_neighbors, CompGraph, EnhancedModel, EnhancementState, NeighborConstraints, DEFAULT_P_NEURAL};
use crate::neural::DEFAULT_HIDDEN;
use crate::optimize::{
    init_material_params, mean_loss, train_candidate, train_jointly, Candidate, EpochLog, MaterialParams, SplitData,
    TrainConfig, Trainable,
};
use crate::runtime::model_file::{read_model, write_model};
use crate::seed::{bits_key, derive_seed};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"NEAC";
pub const CHECKPOINT_VERSION: u32 = 1;

const WARMUP_STREAM: u64 = 0x5741_524d;

/// Largest graph [`exhaustive_search`] accepts.
pub const EXHAUSTIVE_MAX_SLOTS: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub hamming_threshold: usize,
    pub epochs_per_stage: usize,
    /// Epochs spent fitting the starting model before the first stage.
    pub warmup_epochs: usize,
    pub max_modules: Option<usize>,
    /// Slots whose bit may not change.
    pub fixed_bits: Vec<(usize, bool)>,
    pub max_stages: usize,
    /// Relative margin by which a new state must beat the current one.
    pub improvement: f64,
    pub p_neural: usize,
    pub hidden: [usize; 3],
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            hamming_threshold: 1,
            epochs_per_stage: 30,
            warmup_epochs: 30,
            max_modules: None,
            fixed_bits: Vec::new(),
            max_stages: 20,
            improvement: 1e-4,
            p_neural: DEFAULT_P_NEURAL,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl SearchConfig {
    fn validate(&self, n_slots: usize) -> Result<()> {
        if self.hamming_threshold == 0 {
            return Err(Error::OutOfRange("hamming threshold must be at least 1".into()));
        }
        if let Some(&(s, _)) = self.fixed_bits.iter().find(|(s, _)| *s >= n_slots) {
            return Err(Error::OutOfRange(format!("fixed slot {s} >= {n_slots}")));
        }
        let forced = self.fixed_bits.iter().filter(|(_, v)| *v).count();
        if self.max_modules.is_some_and(|m| forced > m) {
            return Err(Error::OutOfRange(format!(
                "{forced} slots fixed neural but at most {:?} modules allowed",
                self.max_modules
            )));
        }
        Ok(())
    }

    fn constraints(&self) -> NeighborConstraints {
        NeighborConstraints {
            fixed: self.fixed_bits.clone(),
            max_ones: self.max_modules,
        }
    }
}

/// What happened in one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub current: EnhancementState,
    /// Held-out loss of each candidate after training, in enumeration order.
    pub candidates: Vec<(EnhancementState, f64)>,
    pub chosen: EnhancementState,
    pub chosen_loss: f64,
    /// Training log of every candidate.
    pub log: Vec<EpochLog>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchTrace {
    /// Held-out loss of the starting model before any training.
    pub initial_loss: f64,
    /// Held-out loss of the starting model after warm-up.
    pub warmup_loss: f64,
    pub stages: Vec<StageRecord>,
    /// Set when `max_stages` ran out before the state settled.
    pub budget_exceeded: bool,
}

impl SearchTrace {
    /// Selected loss after each stage.
    pub fn selected_losses(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.chosen_loss).collect()
    }

    /// Plain-text report: one block per stage.
    pub fn report(&self, graph: &CompGraph) -> String {
        let mut out = format!(
            "initial val_loss {:.6e}\nwarm-up val_loss {:.6e}\n",
            self.initial_loss, self.warmup_loss
        );
        for s in &self.stages {
            out += &format!(
                "stage {} current {} ({} candidates)\n",
                s.stage,
                s.current,
                s.candidates.len()
            );
            for (st, l) in &s.candidates {
                let mark = if *st == s.chosen { " *" } else { "" };
                out += &format!("  {st} {l:.6e}{mark}\n");
            }
            out += &format!(
                "  chosen {} {:.6e} {}\n",
                s.chosen,
                s.chosen_loss,
                crate::graph::describe_state(graph, &s.chosen)
            );
        }
        if self.budget_exceeded {
            out += "stage budget exhausted before the state settled\n";
        }
        out
    }
}

/// Final model of a search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub model: EnhancedModel,
    pub materials: Vec<MaterialParams>,
    pub val_loss: f64,
    pub trace: SearchTrace,
}

/// SHA-256 over material ids and full-precision sample values.
pub fn data_hash(data: &[SampleSet]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((data.len() as u64).to_le_bytes());
    for set in data {
        h.update((set.material_id.len() as u64).to_le_bytes());
        h.update(set.material_id.as_bytes());
        h.update((set.samples.len() as u64).to_le_bytes());
        for s in &set.samples {
            for v in s.wi.as_array().iter().chain(s.wo.as_array()).chain(&s.value) {
                h.update(v.to_le_bytes());
            }
        }
    }
    h.finalize().into()
}

fn config_hash(cfg: &SearchConfig, tcfg: &TrainConfig) -> [u8; 32] {
    Sha256::digest(format!("{cfg:?}|{tcfg:?}").as_bytes()).into()
}

/// Fewer modules first, then lexicographic bit order.
fn tie_key(s: &EnhancementState) -> (usize, &[bool]) {
    (s.count_ones(), s.bits())
}

/// Index of the state a stage moves to: the lowest loss (ties broken by
/// [`tie_key`]) if it beats `losses[own]` by the relative `margin`,
/// otherwise `own`.
pub fn select_candidate(states: &[EnhancementState], losses: &[f64], own: usize, margin: f64) -> usize {
    let best = (0..states.len())
        .min_by(|&a, &b| {
            losses[a]
                .total_cmp(&losses[b])
                .then_with(|| tie_key(&states[a]).cmp(&tie_key(&states[b])))
        })
        .expect("at least one candidate");
    if best != own && losses[best] < losses[own] * (1.0 - margin) {
        best
    } else {
        own
    }
}

/// First index holding the minimum loss.
fn first_minimum(losses: &[f64]) -> usize {
    let mut best = 0;
    for (i, l) in losses.iter().enumerate() {
        if *l < losses[best] {
            best = i;
        }
    }
    best
}

/// Resumable search state; advance with [`SearchRun::step`].
#[derive(Clone, Debug)]
pub struct SearchRun {
    cfg: SearchConfig,
    tcfg: TrainConfig,
    split: SplitData,
    data_hash: [u8; 32],
    current: Candidate,
    current_loss: f64,
    trace: SearchTrace,
    done: bool,
}

impl SearchRun {
    /// Starts at the all-analytical state (plus any slots fixed neural).
    pub fn new(graph: CompGraph, data: &[SampleSet], cfg: &SearchConfig, tcfg: &TrainConfig) -> Result<Self> {
        let (split, tcfg) = Self::prepare(&graph, data, cfg, tcfg)?;
        let mut state = EnhancementState::zeros(graph.n_slots());
        for &(s, v) in &cfg.fixed_bits {
            state.set(s, v);
        }
        let model = EnhancedModel::with_state(graph, cfg.p_neural, cfg.hidden, &state, |slot| {
            derive_seed(&[tcfg.seed, 0, slot as u64])
        })?;
        let mut current = Candidate {
            model,
            materials: init_material_params(data.len(), cfg.p_neural, tcfg.seed),
        };
        let initial_loss = mean_loss(&current, &split, |m| &m.val);
        let mut current_loss = initial_loss;
        if cfg.warmup_epochs > 0 {
            let wcfg = TrainConfig {
                epochs_per_stage: cfg.warmup_epochs,
                ..tcfg.clone()
            };
            let out = train_candidate(current, &split, &wcfg, Trainable::Everything, WARMUP_STREAM);
            current = out.candidate;
            current_loss = out.val_loss;
        }
        Ok(Self {
            cfg: cfg.clone(),
            tcfg,
            split,
            data_hash: data_hash(data),
            current,
            current_loss,
            trace: SearchTrace {
                initial_loss,
                warmup_loss: current_loss,
                ..SearchTrace::default()
            },
            done: false,
        })
    }

    fn prepare(graph: &CompGraph, data: &[SampleSet], cfg: &SearchConfig, tcfg: &TrainConfig) -> Result<(SplitData, TrainConfig)> {
        graph.validate()?;
        cfg.validate(graph.n_slots())?;
        if data.is_empty() || data.iter().any(|d| d.is_empty()) {
            return Err(Error::OutOfRange("search needs at least one nonempty sample set".into()));
        }
        let split = SplitData::new(data, tcfg.holdout, tcfg.seed);
        if split.val_len() == 0 {
            return Err(Error::OutOfRange("holdout leaves no validation samples".into()));
        }
        let tcfg = TrainConfig {
            epochs_per_stage: cfg.epochs_per_stage,
            ..tcfg.clone()
        };
        Ok((split, tcfg))
    }

    pub fn trace(&self) -> &SearchTrace {
        &self.trace
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn current_state(&self) -> &EnhancementState {
        &self.current.model.state
    }

    /// Runs one stage. Returns `true` once the search has finished.
    pub fn step(&mut self) -> Result<bool> {
        if self.done {
            return Ok(true);
        }
        if self.trace.stages.len() >= self.cfg.max_stages {
            self.trace.budget_exceeded = true;
            self.done = true;
            return Ok(true);
        }
        let stage = self.trace.stages.len() + 1;
        let cur_state = self.current.model.state.clone();
        let states = state_neighbors(&cur_state, self.cfg.hamming_threshold, &self.cfg.constraints());
        let cands: Vec<Candidate> = states
            .iter()
            .map(|s| {
                let mut c = self.current.clone();
                for slot in 0..s.len() {
                    match (cur_state.get(slot), s.get(slot)) {
                        (false, true) => c
                            .model
                            .enable(slot, derive_seed(&[self.tcfg.seed, stage as u64, slot as u64])),
                        (true, false) => c.model.disable(slot),
                        _ => {}
                    }
                }
                c
            })
            .collect();
        let streams: Vec<u64> = states
            .iter()
            .map(|s| derive_seed(&[stage as u64, bits_key(s.bits())]))
            .collect();
        let outcomes = train_jointly(cands, &self.split, &self.tcfg, &streams);

        let losses: Vec<f64> = outcomes.iter().map(|o| o.val_loss).collect();
        let own = states.iter().position(|s| *s == cur_state).expect("current state listed");
        let pick = select_candidate(&states, &losses, own, self.cfg.improvement);
        let log = outcomes.iter().flat_map(|o| o.log.iter().cloned()).collect();
        let chosen = states[pick].clone();
        let chosen_loss = losses[pick];
        log::info!("stage {stage}: {cur_state} -> {chosen} (val {chosen_loss:.6e})");
        self.trace.stages.push(StageRecord {
            stage,
            current: cur_state.clone(),
            candidates: states.into_iter().zip(losses).collect(),
            chosen: chosen.clone(),
            chosen_loss,
            log,
        });
        let out = outcomes.into_iter().nth(pick).unwrap();
        if chosen_loss.is_finite() {
            self.current = out.candidate;
            self.current_loss = chosen_loss;
        }
        self.done = chosen == cur_state;
        if !self.done && self.trace.stages.len() >= self.cfg.max_stages {
            self.trace.budget_exceeded = true;
            self.done = true;
        }
        Ok(self.done)
    }

    /// Runs to completion, writing a checkpoint after every stage when
    /// `checkpoint` is given.
    pub fn finish(mut self, checkpoint: Option<&Path>) -> Result<SearchResult> {
        while !self.step()? {
            if let Some(p) = checkpoint {
                self.save_checkpoint(p)?;
            }
        }
        if let Some(p) = checkpoint {
            self.save_checkpoint(p)?;
        }
        Ok(self.into_result())
    }

    pub fn into_result(self) -> SearchResult {
        SearchResult {
            model: self.current.model,
            materials: self.current.materials,
            val_loss: self.current_loss,
            trace: self.trace,
        }
    }

    /// Serialized search state, closed by a SHA-256 checksum.
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(&CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.bytes(&self.data_hash);
        w.bytes(&config_hash(&self.cfg, &self.tcfg));
        w.u8(self.done as u8);
        w.f64(self.current_loss);
        write_model(&mut w, &self.current.model);
        w.len(self.current.materials.len());
        for m in &self.current.materials {
            m.raw.iter().for_each(|v| w.f64(*v));
            w.f64s(&m.neural);
        }
        w.f64(self.trace.initial_loss);
        w.f64(self.trace.warmup_loss);
        w.u8(self.trace.budget_exceeded as u8);
        w.len(self.trace.stages.len());
        for s in &self.trace.stages {
            w.len(s.stage);
            w.bits(s.current.bits());
            w.len(s.candidates.len());
            for (st, l) in &s.candidates {
                w.bits(st.bits());
                w.f64(*l);
            }
            w.bits(s.chosen.bits());
            w.f64(s.chosen_loss);
            w.len(s.log.len());
            for e in &s.log {
                w.len(e.epoch);
                w.str(&e.state);
                w.f64(e.train_loss);
                w.f64(e.val_loss);
            }
        }
        w.finish_with_checksum()
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.checkpoint_bytes())?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    /// Restores a run from [`SearchRun::checkpoint_bytes`]. The data and
    /// configuration must be the ones the checkpoint was written with.
    pub fn resume(
        graph: CompGraph,
        data: &[SampleSet],
        cfg: &SearchConfig,
        tcfg: &TrainConfig,
        bytes: &[u8],
    ) -> Result<Self> {
        let mut head = Reader::new(bytes);
        head.magic(CHECKPOINT_MAGIC)?;
        let v = head.u32()?;
        if v != CHECKPOINT_VERSION {
            return Err(Error::VersionUnsupported(v));
        }
        let mut r = Reader::with_checksum(bytes)?;
        r.take(8)?;
        if r.take(32)? != data_hash(data) {
            return Err(Error::ChecksumMismatch("checkpoint was written for different data".into()));
        }
        let (split, tcfg) = Self::prepare(&graph, data, cfg, tcfg)?;
        if r.take(32)? != config_hash(cfg, &tcfg) {
            return Err(Error::ChecksumMismatch(
                "checkpoint was written with a different configuration".into(),
            ));
        }
        let done = r.u8()? != 0;
        let current_loss = r.f64()?;
        let model = read_model(&mut r)?;
        if model.graph != graph {
            return Err(Error::InvalidGraph("checkpoint belongs to another graph".into()));
        }
        let n = r.len()?;
        let mut materials = Vec::with_capacity(n);
        for _ in 0..n {
            let mut raw = [0.0; 12];
            for v in &mut raw {
                *v = r.f64()?;
            }
            materials.push(MaterialParams { raw, neural: r.f64s()? });
        }
        if materials.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                got: materials.len(),
            });
        }
        let initial_loss = r.f64()?;
        let warmup_loss = r.f64()?;
        let budget_exceeded = r.u8()? != 0;
        let n_stages = r.len()?;
        let mut stages = Vec::with_capacity(n_stages);
        for _ in 0..n_stages {
            let stage = r.len()?;
            let current = EnhancementState::from_bits(r.bits()?);
            let nc = r.len()?;
            let mut candidates = Vec::with_capacity(nc);
            for _ in 0..nc {
                candidates.push((EnhancementState::from_bits(r.bits()?), r.f64()?));
            }
            let chosen = EnhancementState::from_bits(r.bits()?);
            let chosen_loss = r.f64()?;
            let nl = r.len()?;
            let mut log = Vec::with_capacity(nl);
            for _ in 0..nl {
                log.push(EpochLog {
                    epoch: r.len()?,
                    state: r.str()?,
                    train_loss: r.f64()?,
                    val_loss: r.f64()?,
                });
            }
            stages.push(StageRecord {
                stage,
                current,
                candidates,
                chosen,
                chosen_loss,
                log,
            });
        }
        if !r.is_done() {
            return Err(Error::Parse("unexpected data after checkpoint".into()));
        }
        Ok(Self {
            cfg: cfg.clone(),
            tcfg,
            split,
            data_hash: data_hash(data),
            current: Candidate { model, materials },
            current_loss,
            trace: SearchTrace {
                initial_loss,
                warmup_loss,
                stages,
                budget_exceeded,
            },
            done,
        })
    }
}

/// Runs the greedy search from the all-analytical state to a fixed point.
pub fn run_enhancement(
    graph: CompGraph,
    data: &[SampleSet],
    cfg: &SearchConfig,
    tcfg: &TrainConfig,
) -> Result<SearchResult> {
    SearchRun::new(graph, data, cfg, tcfg)?.finish(None)
}

/// Continues a search from checkpoint bytes.
pub fn resume_enhancement(
    graph: CompGraph,
    data: &[SampleSet],
    cfg: &SearchConfig,
    tcfg: &TrainConfig,
    checkpoint: &[u8],
) -> Result<SearchResult> {
    SearchRun::resume(graph, data, cfg, tcfg, checkpoint)?.finish(None)
}

/// Held-out loss of every state in the hypercube.
#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustiveResult {
    pub best: EnhancementState,
    pub best_loss: f64,
    /// All `2^N` states in lexicographic order with their losses.
    pub losses: Vec<(EnhancementState, f64)>,
}

/// Trains every state of a small graph from scratch for
/// `cfg.epochs_per_stage` epochs and returns the best. Ties go to the
/// lexicographically first state.
pub fn exhaustive_search(
    graph: CompGraph,
    data: &[SampleSet],
    cfg: &SearchConfig,
    tcfg: &TrainConfig,
) -> Result<ExhaustiveResult> {
    let n = graph.n_slots();
    if n > EXHAUSTIVE_MAX_SLOTS {
        return Err(Error::RefusedTooLarge(n));
    }
    let (split, tcfg) = SearchRun::prepare(&graph, data, cfg, tcfg)?;
    let states: Vec<EnhancementState> = (0..1usize << n)
        .map(|k| EnhancementState::from_bits((0..n).map(|i| k >> (n - 1 - i) & 1 == 1).collect()))
        .collect();
    let cands = states
        .iter()
        .map(|s| {
            let model = EnhancedModel::with_state(graph.clone(), cfg.p_neural, cfg.hidden, s, |slot| {
                derive_seed(&[tcfg.seed, 0, slot as u64])
            })?;
            Ok(Candidate {
                model,
                materials: init_material_params(data.len(), cfg.p_neural, tcfg.seed),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let streams: Vec<u64> = states.iter().map(|s| derive_seed(&[0, bits_key(s.bits())])).collect();
    let outcomes = train_jointly(cands, &split, &tcfg, &streams);
    let losses: Vec<(EnhancementState, f64)> = states.into_iter().zip(outcomes.iter().map(|o| o.val_loss)).collect();
    let best = first_minimum(&losses.iter().map(|(_, l)| *l).collect::<Vec<_>>());
    Ok(ExhaustiveResult {
        best: losses[best].0.clone(),
        best_loss: losses[best].1,
        losses,
    })
}
