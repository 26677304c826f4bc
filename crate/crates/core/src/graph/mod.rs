//! Analytical models as computational graphs whose slots (terminal nodes and
//! arithmetic operators) can each be swapped for a neural module.

mod builders;
mod eval;
mod state;

use std::collections::BTreeMap;
use std::fmt;

use crate::brdf::terms;
use crate::brdf::vec3::V3;
use crate::brdf::AnalyticalParams;
use crate::error::{Error, Result};
use crate::neural::{self, NeuralModule, DEFAULT_HIDDEN};
use crate::scalar::Scalar;

pub use builders::{
    build_cooktorrance_graph, build_ggx_graph, build_toy_fresnel_graph, build_toy_lambert_fresnel_graph,
    build_ward_graph, graph_by_name, MODEL_NAMES,
};
pub use eval::{backward, forward, Evaluator, Gradients};
pub use state::{state_neighbors, EnhancementState, NeighborConstraints};

/// Default length of the per-material neural parameter vector.
pub const DEFAULT_P_NEURAL: usize = 27;

/// Semantic terminal of an analytical model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    /// `rho_d / pi`
    Lambert,
    /// `rho_s`
    SpecularAlbedo,
    GgxDistribution,
    SchlickFresnel,
    SmithGeometry,
    /// `1 / (4 (n.wi)(n.wo))`
    RecipNorm,
    BeckmannDistribution,
    VCavityGeometry,
    WardLobe,
    WardNorm,
    /// `rho_s D G / (4 (n.wi)(n.wo))`, the GGX lobe without Fresnel.
    GgxLobeNoFresnel,
}

impl Term {
    pub const ALL: [Term; 11] = [
        Term::Lambert,
        Term::SpecularAlbedo,
        Term::GgxDistribution,
        Term::SchlickFresnel,
        Term::SmithGeometry,
        Term::RecipNorm,
        Term::BeckmannDistribution,
        Term::VCavityGeometry,
        Term::WardLobe,
        Term::WardNorm,
        Term::GgxLobeNoFresnel,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Term::Lambert => "M",
            Term::SpecularAlbedo => "S",
            Term::GgxDistribution => "D",
            Term::SchlickFresnel => "F",
            Term::SmithGeometry => "G",
            Term::RecipNorm => "1/E",
            Term::BeckmannDistribution => "Db",
            Term::VCavityGeometry => "Gv",
            Term::WardLobe => "Dw",
            Term::WardNorm => "Nw",
            Term::GgxLobeNoFresnel => "L",
        }
    }

    pub fn out_dim(self) -> usize {
        match self {
            Term::Lambert | Term::SpecularAlbedo | Term::GgxLobeNoFresnel => 3,
            _ => 1,
        }
    }

    pub fn signature(self) -> InputSignature {
        match self {
            Term::Lambert | Term::SpecularAlbedo => InputSignature::ParamsOnly,
            _ => InputSignature::ParamsAndDirections,
        }
    }

    pub fn code(self) -> u8 {
        Term::ALL.iter().position(|t| *t == self).unwrap() as u8
    }

    pub fn from_code(c: u8) -> Option<Term> {
        Term::ALL.get(c as usize).copied()
    }

    /// Evaluates the closed form; scalar terms fill only `[0]`.
    pub fn eval<S: Scalar>(self, p: &[S; 12], wi: &V3<S>, wo: &V3<S>) -> [S; 3] {
        let z = S::cst(0.0);
        let scalar = |v: S| [v, z, z];
        match self {
            Term::Lambert => terms::lambertian(p),
            Term::SpecularAlbedo => terms::specular_albedo(p),
            Term::GgxDistribution => scalar(terms::ggx_d(p, wi, wo)),
            Term::SchlickFresnel => scalar(terms::schlick_f(p, wi, wo)),
            Term::SmithGeometry => scalar(terms::smith_g(p, wi, wo)),
            Term::RecipNorm => scalar(terms::recip_norm(p, wi, wo)),
            Term::BeckmannDistribution => scalar(terms::beckmann_d(p, wi, wo)),
            Term::VCavityGeometry => scalar(terms::vcavity_g(p, wi, wo)),
            Term::WardLobe => scalar(terms::ward_lobe(p, wi, wo)),
            Term::WardNorm => scalar(terms::ward_norm(p, wi, wo)),
            Term::GgxLobeNoFresnel => terms::ggx_lobe_without_fresnel(p, wi, wo),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Terminal(Term),
    Operator(Op),
}

/// What a replacement module receives as input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InputSignature {
    /// analytical + neural parameters
    ParamsOnly,
    /// analytical + neural parameters + `wi` + `wo`
    ParamsAndDirections,
    /// the two children's outputs
    Operands,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub id: usize,
    pub kind: NodeKind,
    pub children: Vec<usize>,
    pub out_dim: usize,
    pub input_signature: InputSignature,
}

impl NodeSpec {
    pub fn label(&self, g: &CompGraph) -> String {
        match self.kind {
            NodeKind::Terminal(t) => t.symbol().to_string(),
            NodeKind::Operator(op) => {
                let sym = match op {
                    Op::Add => "+",
                    Op::Mul => "*",
                };
                let a = g.nodes[self.children[0]].label(g);
                let b = g.nodes[self.children[1]].label(g);
                format!("({a}{sym}{b})")
            }
        }
    }
}

/// Directed acyclic graph in topological order; the last node is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct CompGraph {
    pub model_name: String,
    pub nodes: Vec<NodeSpec>,
}

impl CompGraph {
    pub fn n_slots(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn terminal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Terminal(_)))
            .count()
    }

    pub fn operator_count(&self) -> usize {
        self.n_slots() - self.terminal_count()
    }

    /// Slot holding terminal `t`, if any.
    pub fn slot_of(&self, t: Term) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.kind == NodeKind::Terminal(t))
    }

    /// Short per-slot label, e.g. `F` or `#7*`.
    pub fn slot_name(&self, slot: usize) -> String {
        match self.nodes[slot].kind {
            NodeKind::Terminal(t) => t.symbol().to_string(),
            NodeKind::Operator(Op::Add) => format!("#{slot}+"),
            NodeKind::Operator(Op::Mul) => format!("#{slot}*"),
        }
    }

    /// Resolves a slot by index or terminal symbol.
    pub fn parse_slot(&self, s: &str) -> Result<usize> {
        if let Ok(i) = s.parse::<usize>() {
            if i < self.n_slots() {
                return Ok(i);
            }
        }
        (0..self.n_slots())
            .find(|&i| self.slot_name(i) == s)
            .ok_or_else(|| Error::Parse(format!("unknown slot {s:?} in {}", self.model_name)))
    }

    /// Checks topological order, arities, a single root and output dims.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidGraph("empty graph".into()));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::InvalidGraph(format!("node {i} has id {}", n.id)));
            }
            match n.kind {
                NodeKind::Terminal(t) => {
                    if !n.children.is_empty() || n.out_dim != t.out_dim() || n.input_signature != t.signature() {
                        return Err(Error::InvalidGraph(format!("malformed terminal {i}")));
                    }
                }
                NodeKind::Operator(_) => {
                    if n.children.len() != 2 || n.input_signature != InputSignature::Operands {
                        return Err(Error::InvalidGraph(format!("operator {i} needs 2 children")));
                    }
                    for &c in &n.children {
                        if c >= i {
                            return Err(Error::InvalidGraph(format!(
                                "operator {i} references later node {c}"
                            )));
                        }
                        parents[c] += 1;
                    }
                    let want = n.children.iter().map(|&c| self.nodes[c].out_dim).max().unwrap();
                    if n.out_dim != want {
                        return Err(Error::InvalidGraph(format!("operator {i} has dim {}", n.out_dim)));
                    }
                }
            }
            if n.out_dim != 1 && n.out_dim != 3 {
                return Err(Error::InvalidGraph(format!("node {i} has dim {}", n.out_dim)));
            }
        }
        let roots: Vec<usize> = (0..self.nodes.len()).filter(|&i| parents[i] == 0).collect();
        if roots != [self.root()] {
            return Err(Error::InvalidGraph(format!("expected single root, found {roots:?}")));
        }
        Ok(())
    }
}

/// A graph, an enhancement state and the modules realizing the set bits.
#[derive(Clone, Debug, PartialEq)]
pub struct EnhancedModel {
    pub graph: CompGraph,
    pub state: EnhancementState,
    pub modules: BTreeMap<usize, NeuralModule>,
    pub p_neural: usize,
    pub hidden: [usize; 3],
}

impl EnhancedModel {
    /// The unmodified analytical model.
    pub fn analytical(graph: CompGraph, p_neural: usize) -> Self {
        let n = graph.n_slots();
        Self {
            graph,
            state: EnhancementState::zeros(n),
            modules: BTreeMap::new(),
            p_neural,
            hidden: DEFAULT_HIDDEN,
        }
    }

    pub fn with_hidden(mut self, hidden: [usize; 3]) -> Self {
        assert!(self.modules.is_empty(), "hidden sizes must be set before modules exist");
        self.hidden = hidden;
        self
    }

    /// Builds the model for `state`, initializing every module from
    /// `seed_for(slot)`.
    pub fn with_state(
        graph: CompGraph,
        p_neural: usize,
        hidden: [usize; 3],
        state: &EnhancementState,
        seed_for: impl Fn(usize) -> u64,
    ) -> Result<Self> {
        let mut m = Self::analytical(graph, p_neural).with_hidden(hidden);
        if state.len() != m.graph.n_slots() {
            return Err(Error::DimensionMismatch {
                expected: m.graph.n_slots(),
                got: state.len(),
            });
        }
        for slot in state.ones() {
            m.enable(slot, seed_for(slot));
        }
        Ok(m)
    }

    pub fn module_input_dim(&self, slot: usize) -> usize {
        let n = &self.graph.nodes[slot];
        match n.input_signature {
            InputSignature::ParamsOnly => AnalyticalParams::COUNT + self.p_neural,
            InputSignature::ParamsAndDirections => AnalyticalParams::COUNT + self.p_neural + 6,
            InputSignature::Operands => n.children.iter().map(|&c| self.graph.nodes[c].out_dim).sum(),
        }
    }

    pub fn module_dims(&self, slot: usize) -> [usize; 5] {
        neural::layer_dims(self.module_input_dim(slot), self.hidden, self.graph.nodes[slot].out_dim)
    }

    /// Replaces `slot` by a freshly initialized module.
    pub fn enable(&mut self, slot: usize, seed: u64) {
        let m = NeuralModule::init_xavier(self.module_dims(slot), seed);
        self.modules.insert(slot, m);
        self.state.set(slot, true);
    }

    /// Reverts `slot` to its analytical form, discarding the module.
    pub fn disable(&mut self, slot: usize) {
        self.modules.remove(&slot);
        self.state.set(slot, false);
    }

    pub fn total_weights(&self) -> usize {
        self.modules.values().map(|m| m.weight_count()).sum()
    }

    /// Per-material trainable scalars.
    pub fn params_per_material(&self) -> usize {
        AnalyticalParams::COUNT + self.p_neural
    }

    /// Start of each module in the concatenated weight vector, in slot order.
    pub fn weight_offsets(&self) -> BTreeMap<usize, usize> {
        let mut off = 0;
        self.modules
            .iter()
            .map(|(&s, m)| {
                let o = off;
                off += m.weight_count();
                (s, o)
            })
            .collect()
    }

    /// All module weights concatenated in slot order.
    pub fn flat_weights(&self) -> Vec<f64> {
        self.modules.values().flat_map(|m| m.params().iter().copied()).collect()
    }

    pub fn set_flat_weights(&mut self, w: &[f64]) {
        let mut off = 0;
        for m in self.modules.values_mut() {
            let n = m.weight_count();
            m.params_mut().copy_from_slice(&w[off..off + n]);
            off += n;
        }
    }

    pub fn describe(&self) -> String {
        describe_state(&self.graph, &self.state)
    }
}

/// Human-readable formula with replaced slots marked `^`.
pub fn describe_state(graph: &CompGraph, state: &EnhancementState) -> String {
    fn go(g: &CompGraph, s: &EnhancementState, i: usize) -> String {
        let n = &g.nodes[i];
        let hat = if s.get(i) { "^" } else { "" };
        match n.kind {
            NodeKind::Terminal(t) => format!("{}{hat}", t.symbol()),
            NodeKind::Operator(op) => {
                let sym = match op {
                    Op::Add => "+",
                    Op::Mul => "*",
                };
                format!(
                    "({} {sym}{hat} {})",
                    go(g, s, n.children[0]),
                    go(g, s, n.children[1])
                )
            }
        }
    }
    go(graph, state, graph.root())
}

impl fmt::Display for CompGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.model_name, self.nodes[self.root()].label(self))
    }
}
