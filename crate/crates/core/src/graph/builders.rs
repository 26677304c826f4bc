use super::{CompGraph, InputSignature, NodeKind, NodeSpec, Op, Term};
use crate::error::{Error, Result};

struct Builder {
    nodes: Vec<NodeSpec>,
}

impl Builder {
    fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn term(&mut self, t: Term) -> usize {
        let id = self.nodes.len();
        self.nodes.push(NodeSpec {
            id,
            kind: NodeKind::Terminal(t),
            children: Vec::new(),
            out_dim: t.out_dim(),
            input_signature: t.signature(),
        });
        id
    }

    fn op(&mut self, op: Op, a: usize, b: usize) -> usize {
        let id = self.nodes.len();
        let out_dim = self.nodes[a].out_dim.max(self.nodes[b].out_dim);
        self.nodes.push(NodeSpec {
            id,
            kind: NodeKind::Operator(op),
            children: vec![a, b],
            out_dim,
            input_signature: InputSignature::Operands,
        });
        id
    }

    fn finish(self, name: &str) -> CompGraph {
        let g = CompGraph {
            model_name: name.to_string(),
            nodes: self.nodes,
        };
        debug_assert!(g.validate().is_ok());
        g
    }
}

/// `M + S * (((D * F) * G) * 1/E)`: 6 terminals, 5 operators.
pub fn build_ggx_graph() -> CompGraph {
    let mut b = Builder::new();
    let m = b.term(Term::Lambert);
    let s = b.term(Term::SpecularAlbedo);
    let d = b.term(Term::GgxDistribution);
    let f = b.term(Term::SchlickFresnel);
    let g = b.term(Term::SmithGeometry);
    let e = b.term(Term::RecipNorm);
    let df = b.op(Op::Mul, d, f);
    let dfg = b.op(Op::Mul, df, g);
    let dfge = b.op(Op::Mul, dfg, e);
    let spec = b.op(Op::Mul, s, dfge);
    b.op(Op::Add, m, spec);
    b.finish("ggx")
}

/// Same layout as GGX with Beckmann `D` and V-cavity `G`.
pub fn build_cooktorrance_graph() -> CompGraph {
    let mut b = Builder::new();
    let m = b.term(Term::Lambert);
    let s = b.term(Term::SpecularAlbedo);
    let d = b.term(Term::BeckmannDistribution);
    let f = b.term(Term::SchlickFresnel);
    let g = b.term(Term::VCavityGeometry);
    let e = b.term(Term::RecipNorm);
    let df = b.op(Op::Mul, d, f);
    let dfg = b.op(Op::Mul, df, g);
    let dfge = b.op(Op::Mul, dfg, e);
    let spec = b.op(Op::Mul, s, dfge);
    b.op(Op::Add, m, spec);
    b.finish("cooktorrance")
}

/// `M + S * (Dw * Nw)`: 4 terminals, 3 operators.
pub fn build_ward_graph() -> CompGraph {
    let mut b = Builder::new();
    let m = b.term(Term::Lambert);
    let s = b.term(Term::SpecularAlbedo);
    let d = b.term(Term::WardLobe);
    let n = b.term(Term::WardNorm);
    let dn = b.op(Op::Mul, d, n);
    let spec = b.op(Op::Mul, s, dn);
    b.op(Op::Add, m, spec);
    b.finish("ward")
}

/// `F * L`: three slots, small enough for exhaustive enumeration.
pub fn build_toy_fresnel_graph() -> CompGraph {
    let mut b = Builder::new();
    let f = b.term(Term::SchlickFresnel);
    let l = b.term(Term::GgxLobeNoFresnel);
    b.op(Op::Mul, f, l);
    b.finish("toy-fresnel")
}

/// `M + F * L`: five slots.
pub fn build_toy_lambert_fresnel_graph() -> CompGraph {
    let mut b = Builder::new();
    let m = b.term(Term::Lambert);
    let f = b.term(Term::SchlickFresnel);
    let l = b.term(Term::GgxLobeNoFresnel);
    let fl = b.op(Op::Mul, f, l);
    b.op(Op::Add, m, fl);
    b.finish("toy-lambert-fresnel")
}

pub const MODEL_NAMES: [&str; 5] = ["ggx", "cooktorrance", "ward", "toy-fresnel", "toy-lambert-fresnel"];

pub fn graph_by_name(name: &str) -> Result<CompGraph> {
    Ok(match name {
        "ggx" => build_ggx_graph(),
        "cooktorrance" | "cook-torrance" => build_cooktorrance_graph(),
        "ward" => build_ward_graph(),
        "toy-fresnel" => build_toy_fresnel_graph(),
        "toy-lambert-fresnel" => build_toy_lambert_fresnel_graph(),
        _ => return Err(Error::Parse(format!("unknown model {name:?}"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ggx_has_eleven_slots() {
        let g = build_ggx_graph();
        g.validate().unwrap();
        assert_eq!(g.n_slots(), 11);
        assert_eq!(g.terminal_count(), 6);
        assert_eq!(g.operator_count(), 5);
        let muls = g
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Operator(Op::Mul))
            .count();
        assert_eq!(muls, 4);
        assert_eq!(g.to_string(), "ggx: (M+(S*(((D*F)*G)*1/E)))");
    }

    #[test]
    fn all_builders_validate() {
        for name in MODEL_NAMES {
            let g = graph_by_name(name).unwrap();
            g.validate().unwrap();
            assert_eq!(g.nodes[g.root()].out_dim, 3);
        }
        assert_eq!(build_ward_graph().n_slots(), 7);
        assert_eq!(build_toy_fresnel_graph().n_slots(), 3);
        assert_eq!(build_toy_lambert_fresnel_graph().n_slots(), 5);
    }

    #[test]
    fn invalid_graphs_are_rejected() {
        let mut g = build_ggx_graph();
        g.nodes[6].children = vec![7, 2];
        assert!(g.validate().is_err());
        let mut g = build_ggx_graph();
        g.nodes.pop();
        assert!(g.validate().is_err(), "two roots");
    }

    #[test]
    fn slots_parse_by_symbol_or_index() {
        let g = build_ggx_graph();
        assert_eq!(g.parse_slot("F").unwrap(), 3);
        assert_eq!(g.parse_slot("1/E").unwrap(), 5);
        assert_eq!(g.parse_slot("#7*").unwrap(), 7);
        assert_eq!(g.parse_slot("10").unwrap(), 10);
        assert!(g.parse_slot("Q").is_err());
    }
}
