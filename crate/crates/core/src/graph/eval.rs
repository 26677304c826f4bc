//! Forward evaluation and reverse-mode gradients through an enhanced graph.
//!
//! Analytical terminals are evaluated with 12-wide dual numbers so their
//! Jacobian with respect to the analytical parameters is available during
//! the reverse sweep. Operators and modules are differentiated in reverse.

use std::collections::BTreeMap;

use super::{EnhancedModel, InputSignature, NodeKind, Op};
use crate::brdf::vec3::lift;
use crate::brdf::{AnalyticalParams, Direction, Rgb};
use crate::error::{Error, Result};
use crate::neural::Tape;
use crate::scalar::Dual;

type D12 = Dual<12>;

/// Gradients of `grad_out . f` with respect to every parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub d_analytical: [f64; 12],
    pub d_neural: Vec<f64>,
    pub d_weights: BTreeMap<usize, Vec<f64>>,
}

#[inline]
fn comp(v: &[f64; 3], dim: usize, c: usize) -> f64 {
    if dim == 1 {
        v[0]
    } else {
        v[c]
    }
}

/// Reusable per-worker scratch for evaluating one model.
#[derive(Clone, Debug)]
pub struct Evaluator {
    vals: Vec<[f64; 3]>,
    jac: Vec<[[f64; 12]; 3]>,
    grads: Vec<[f64; 3]>,
    tapes: Vec<Tape>,
    offsets: Vec<Option<usize>>,
    x: Vec<f64>,
    dx: Vec<f64>,
}

impl Evaluator {
    pub fn new(model: &EnhancedModel) -> Self {
        let n = model.graph.n_slots();
        let offs = model.weight_offsets();
        Self {
            vals: vec![[0.0; 3]; n],
            jac: vec![[[0.0; 12]; 3]; n],
            grads: vec![[0.0; 3]; n],
            tapes: vec![Tape::default(); n],
            offsets: (0..n).map(|s| offs.get(&s).copied()).collect(),
            x: Vec::new(),
            dx: Vec::new(),
        }
    }

    fn module_input(&mut self, model: &EnhancedModel, slot: usize, a: &[f64; 12], z: &[f64], wi: &[f64; 3], wo: &[f64; 3]) {
        let node = &model.graph.nodes[slot];
        self.x.clear();
        match node.input_signature {
            InputSignature::ParamsOnly | InputSignature::ParamsAndDirections => {
                self.x.extend_from_slice(a);
                self.x.extend_from_slice(z);
                if node.input_signature == InputSignature::ParamsAndDirections {
                    self.x.extend_from_slice(wi);
                    self.x.extend_from_slice(wo);
                }
            }
            InputSignature::Operands => {
                for &c in &node.children {
                    let d = model.graph.nodes[c].out_dim;
                    self.x.extend_from_slice(&self.vals[c][..d]);
                }
            }
        }
    }

    /// Evaluates every slot; with `record` set, keeps what the reverse sweep
    /// needs.
    pub fn forward_raw(
        &mut self,
        model: &EnhancedModel,
        a: &[f64; 12],
        z: &[f64],
        wi: &[f64; 3],
        wo: &[f64; 3],
        record: bool,
    ) -> Rgb {
        let g = &model.graph;
        for slot in 0..g.n_slots() {
            let node = &g.nodes[slot];
            let dim = node.out_dim;
            if let Some(module) = model.modules.get(&slot) {
                self.module_input(model, slot, a, z, wi, wo);
                let out = module
                    .forward_tape(&self.x, &mut self.tapes[slot])
                    .expect("module input width is fixed by the graph");
                let mut v = [0.0; 3];
                v[..dim].copy_from_slice(out);
                self.vals[slot] = v;
                continue;
            }
            match node.kind {
                NodeKind::Terminal(t) => {
                    if record {
                        let p: [D12; 12] = std::array::from_fn(|k| D12::var(a[k], k));
                        let out = t.eval(&p, &lift(wi), &lift(wo));
                        for c in 0..3 {
                            self.vals[slot][c] = out[c].v;
                            self.jac[slot][c] = out[c].d;
                        }
                    } else {
                        self.vals[slot] = t.eval(a, wi, wo);
                    }
                }
                NodeKind::Operator(op) => {
                    let (l, r) = (node.children[0], node.children[1]);
                    let (dl, dr) = (g.nodes[l].out_dim, g.nodes[r].out_dim);
                    let mut v = [0.0; 3];
                    for (c, vc) in v.iter_mut().enumerate().take(dim) {
                        let x = comp(&self.vals[l], dl, c);
                        let y = comp(&self.vals[r], dr, c);
                        *vc = match op {
                            Op::Add => x + y,
                            Op::Mul => x * y,
                        };
                    }
                    self.vals[slot] = v;
                }
            }
        }
        let root = g.root();
        let r = self.vals[root];
        if g.nodes[root].out_dim == 1 {
            [r[0]; 3]
        } else {
            r
        }
    }

    /// Reverse sweep after [`Self::forward_raw`] with `record = true`.
    /// Accumulates into the three gradient buffers; `d_w` is the
    /// concatenated module weight gradient in slot order.
    #[allow(clippy::too_many_arguments)]
    pub fn backward_raw(
        &mut self,
        model: &EnhancedModel,
        grad_out: &Rgb,
        d_a: &mut [f64; 12],
        d_z: &mut [f64],
        d_w: &mut [f64],
    ) {
        let g = &model.graph;
        let p = model.p_neural;
        for v in &mut self.grads {
            *v = [0.0; 3];
        }
        let root = g.root();
        self.grads[root] = if g.nodes[root].out_dim == 1 {
            [grad_out.iter().sum(), 0.0, 0.0]
        } else {
            *grad_out
        };
        for slot in (0..g.n_slots()).rev() {
            let node = &g.nodes[slot];
            let dim = node.out_dim;
            let gs = self.grads[slot];
            if gs[..dim].iter().all(|v| *v == 0.0) {
                continue;
            }
            if let Some(module) = model.modules.get(&slot) {
                let off = self.offsets[slot].expect("module offsets built with the evaluator");
                let n_w = module.weight_count();
                self.dx.clear();
                self.dx.resize(module.d_in(), 0.0);
                module.backward(&self.tapes[slot], &gs[..dim], &mut d_w[off..off + n_w], Some(&mut self.dx));
                match node.input_signature {
                    InputSignature::ParamsOnly | InputSignature::ParamsAndDirections => {
                        for k in 0..12 {
                            d_a[k] += self.dx[k];
                        }
                        for k in 0..p {
                            d_z[k] += self.dx[12 + k];
                        }
                    }
                    InputSignature::Operands => {
                        let mut o = 0;
                        for &c in &node.children {
                            let dc = g.nodes[c].out_dim;
                            for k in 0..dc {
                                self.grads[c][k] += self.dx[o + k];
                            }
                            o += dc;
                        }
                    }
                }
                continue;
            }
            match node.kind {
                NodeKind::Terminal(_) => {
                    let j = &self.jac[slot];
                    for c in 0..dim {
                        for k in 0..12 {
                            d_a[k] += gs[c] * j[c][k];
                        }
                    }
                }
                NodeKind::Operator(op) => {
                    let (l, r) = (node.children[0], node.children[1]);
                    let (dl, dr) = (g.nodes[l].out_dim, g.nodes[r].out_dim);
                    for c in 0..dim {
                        let (gl, gr) = match op {
                            Op::Add => (gs[c], gs[c]),
                            Op::Mul => (
                                gs[c] * comp(&self.vals[r], dr, c),
                                gs[c] * comp(&self.vals[l], dl, c),
                            ),
                        };
                        self.grads[l][if dl == 1 { 0 } else { c }] += gl;
                        self.grads[r][if dr == 1 { 0 } else { c }] += gr;
                    }
                }
            }
        }
    }
}

fn check_neural(model: &EnhancedModel, z: &[f64]) -> Result<()> {
    if z.len() != model.p_neural {
        return Err(Error::DimensionMismatch {
            expected: model.p_neural,
            got: z.len(),
        });
    }
    Ok(())
}

/// Evaluates the enhanced model at one direction pair.
pub fn forward(
    model: &EnhancedModel,
    a: &AnalyticalParams,
    z: &[f64],
    wi: &Direction,
    wo: &Direction,
) -> Result<Rgb> {
    check_neural(model, z)?;
    let mut ev = Evaluator::new(model);
    Ok(ev.forward_raw(model, &a.to_array(), z, wi.as_array(), wo.as_array(), false))
}

/// Fused forward and reverse pass; returns the value and the gradients of
/// `grad_out . f`.
pub fn backward(
    model: &EnhancedModel,
    a: &AnalyticalParams,
    z: &[f64],
    wi: &Direction,
    wo: &Direction,
    grad_out: &Rgb,
) -> Result<(Rgb, Gradients)> {
    check_neural(model, z)?;
    let mut ev = Evaluator::new(model);
    let v = ev.forward_raw(model, &a.to_array(), z, wi.as_array(), wo.as_array(), true);
    let mut d_a = [0.0; 12];
    let mut d_z = vec![0.0; model.p_neural];
    let mut d_w = vec![0.0; model.total_weights()];
    ev.backward_raw(model, grad_out, &mut d_a, &mut d_z, &mut d_w);
    let d_weights = model
        .weight_offsets()
        .into_iter()
        .map(|(s, off)| (s, d_w[off..off + model.modules[&s].weight_count()].to_vec()))
        .collect();
    Ok((
        v,
        Gradients {
            d_analytical: d_a,
            d_neural: d_z,
            d_weights,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::brdf::{eval_analytical_ggx, Direction};
    use std::f64::consts::PI;

    #[test]
    fn zero_state_matches_closed_form() {
        let m = EnhancedModel::analytical(build_ggx_graph(), DEFAULT_P_NEURAL);
        let p = AnalyticalParams {
            rho_d: [0.2, 0.3, 0.4],
            rho_s: [0.9, 0.5, 0.1],
            alpha_x: 0.2,
            alpha_y: 0.45,
            f0: 0.08,
            n_theta: 0.2,
            n_phi: 1.0,
            t_theta: 0.5,
        };
        let wi = Direction::from_spherical(0.4, 0.3);
        let wo = Direction::from_spherical(0.9, 2.9);
        let z = vec![0.5; 27];
        let a = forward(&m, &p, &z, &wi, &wo).unwrap();
        let b = eval_analytical_ggx(&p, &wi, &wo);
        for c in 0..3 {
            assert!((a[c] - b[c]).abs() <= 1e-12 * b[c].abs());
        }
    }

    #[test]
    fn zero_module_on_recip_norm_removes_specular() {
        let g = build_ggx_graph();
        let mut m = EnhancedModel::analytical(g, DEFAULT_P_NEURAL);
        let e = m.graph.slot_of(Term::RecipNorm).unwrap();
        m.enable(e, 1);
        let dims = m.module_dims(e);
        *m.modules.get_mut(&e).unwrap() = crate::neural::NeuralModule::zeros(dims);
        let p = AnalyticalParams::default();
        let w = Direction::from_spherical(0.3, 0.0);
        let v = forward(&m, &p, &[0.5; 27], &w, &w).unwrap();
        for c in v {
            assert!((c - 0.5 / PI).abs() < 1e-15);
        }
    }

    #[test]
    fn fresnel_module_input_width_is_45() {
        let mut m = EnhancedModel::analytical(build_ggx_graph(), 27);
        let f = m.graph.slot_of(Term::SchlickFresnel).unwrap();
        assert_eq!(m.module_input_dim(f), 45);
        assert_eq!(m.module_input_dim(m.graph.slot_of(Term::Lambert).unwrap()), 39);
        m.enable(f, 0);
        assert_eq!(m.modules[&f].d_in(), 45);
        assert_eq!(m.modules[&f].d_out(), 1);
    }

    #[test]
    fn wrong_neural_length_is_rejected() {
        let m = EnhancedModel::analytical(build_ggx_graph(), 27);
        let p = AnalyticalParams::default();
        let n = Direction::NORMAL;
        assert!(matches!(
            forward(&m, &p, &[0.5; 3], &n, &n),
            Err(Error::DimensionMismatch { expected: 27, got: 3 })
        ));
    }

    #[test]
    fn lambertian_gradient_is_grad_over_pi() {
        let m = EnhancedModel::analytical(build_ggx_graph(), 27);
        let p = AnalyticalParams::default();
        let wi = Direction::from_spherical(0.3, 0.2);
        let wo = Direction::from_spherical(0.6, 1.2);
        let go = [1.0, 2.0, -3.0];
        let (_, gr) = backward(&m, &p, &[0.5; 27], &wi, &wo, &go).unwrap();
        for c in 0..3 {
            assert!((gr.d_analytical[c] - go[c] / PI).abs() < 1e-15);
        }
        let (_, gr) = backward(&m, &p, &[0.5; 27], &wi, &wo, &[0.0; 3]).unwrap();
        assert!(gr.d_analytical.iter().chain(&gr.d_neural).all(|v| *v == 0.0));
    }
}
