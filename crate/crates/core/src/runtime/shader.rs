//! Shader source generation.
//!
//! The exported text is a single GLSL-style function
//! `vec3 eval_brdf(vec3 wi, vec3 wo, float params[P])` preceded by the
//! module weights as constant `float` arrays. Every graph slot becomes a
//! `vec3` (scalars are broadcast), so operators are plain vector products
//! and sums. Modules are written as loops over their weight arrays.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::fit::FitResult;
use crate::brdf::{ALPHA_MIN, COS_EPS};
use crate::error::{Error, Result};
use crate::graph::{EnhancedModel, InputSignature, NodeKind, Op, Term};
use crate::neural::NeuralModule;

/// Name of the exported function.
pub const SHADER_ENTRY: &str = "eval_brdf";

fn lit(v: f64) -> String {
    let s = format!("{:?}", v as f32);
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn term_code(out: &mut String, slot: usize, t: Term) {
    let s = format!("s{slot}");
    let w = |out: &mut String, line: &str| {
        let _ = writeln!(out, "    {line}");
    };
    match t {
        Term::Lambert => w(
            out,
            &format!("vec3 {s} = vec3(params[0], params[1], params[2]) * {};", lit(std::f64::consts::FRAC_1_PI)),
        ),
        Term::SpecularAlbedo => w(out, &format!("vec3 {s} = vec3(params[3], params[4], params[5]);")),
        Term::GgxDistribution => {
            w(out, &format!("float {s}_v = 0.0;"));
            w(out, "if (hl.z > 0.0) {");
            w(out, "    float q = (hl.x / ax) * (hl.x / ax) + (hl.y / ay) * (hl.y / ay) + hl.z * hl.z;");
            w(out, &format!("    {s}_v = 1.0 / (ax * ay * q * q * PI);"));
            w(out, "}");
            w(out, &format!("vec3 {s} = vec3({s}_v);"));
        }
        Term::SchlickFresnel => {
            w(out, "float fc = min(max(dot(wi, h), 0.0), 1.0);");
            w(out, &format!("vec3 {s} = vec3(params[8] + (1.0 - params[8]) * pow(1.0 - fc, 5.0));"));
        }
        Term::SmithGeometry => {
            for (v, l) in [("gi", "il"), ("go", "ol")] {
                w(out, &format!("float {v}z = max({l}.z, COS_EPS);"));
                w(
                    out,
                    &format!("float {v}t = ((ax * {l}.x) * (ax * {l}.x) + (ay * {l}.y) * (ay * {l}.y)) / ({v}z * {v}z);"),
                );
                w(out, &format!("float {v} = 2.0 / (1.0 + sqrt(1.0 + {v}t));"));
            }
            w(out, &format!("vec3 {s} = vec3(gi * go);"));
        }
        Term::RecipNorm => w(
            out,
            &format!("vec3 {s} = vec3(0.25 / (max(il.z, COS_EPS) * max(ol.z, COS_EPS)));"),
        ),
        Term::BeckmannDistribution => {
            w(out, &format!("float {s}_v = 0.0;"));
            w(out, "if (hl.z > 0.0) {");
            w(out, "    float m2 = ax * ax;");
            w(out, "    float c2 = hl.z * hl.z;");
            w(out, "    float tan2 = (hl.x * hl.x + hl.y * hl.y) / c2;");
            w(out, &format!("    {s}_v = exp(-tan2 / m2) / (m2 * c2 * c2 * PI);"));
            w(out, "}");
            w(out, &format!("vec3 {s} = vec3({s}_v);"));
        }
        Term::VCavityGeometry => {
            w(out, "float vnh = max(hl.z, 0.0);");
            w(out, "float voh = max(dot(wo, h), COS_EPS);");
            w(out, "float va = 2.0 * vnh * max(ol.z, 0.0) / voh;");
            w(out, "float vb = 2.0 * vnh * max(il.z, 0.0) / voh;");
            w(out, &format!("vec3 {s} = vec3(min(min(va, vb), 1.0));"));
        }
        Term::WardLobe => {
            w(out, &format!("float {s}_v = 0.0;"));
            w(out, "if (hl.z > 0.0) {");
            w(out, "    float e = ((hl.x / ax) * (hl.x / ax) + (hl.y / ay) * (hl.y / ay)) / (hl.z * hl.z);");
            w(out, &format!("    {s}_v = exp(-e) / (ax * ay * 4.0 * PI);"));
            w(out, "}");
            w(out, &format!("vec3 {s} = vec3({s}_v);"));
        }
        Term::WardNorm => w(
            out,
            &format!("vec3 {s} = vec3(1.0 / sqrt(max(il.z, COS_EPS) * max(ol.z, COS_EPS)));"),
        ),
        Term::GgxLobeNoFresnel => {
            w(out, &format!("float {s}_d = 0.0;"));
            w(out, "if (hl.z > 0.0) {");
            w(out, "    float q = (hl.x / ax) * (hl.x / ax) + (hl.y / ay) * (hl.y / ay) + hl.z * hl.z;");
            w(out, &format!("    {s}_d = 1.0 / (ax * ay * q * q * PI);"));
            w(out, "}");
            for (v, l) in [("li", "il"), ("lo", "ol")] {
                w(out, &format!("float {v}z = max({l}.z, COS_EPS);"));
                w(
                    out,
                    &format!("float {v}t = ((ax * {l}.x) * (ax * {l}.x) + (ay * {l}.y) * (ay * {l}.y)) / ({v}z * {v}z);"),
                );
                w(out, &format!("float {v} = 2.0 / (1.0 + sqrt(1.0 + {v}t));"));
            }
            w(out, "float le = 0.25 / (max(il.z, COS_EPS) * max(ol.z, COS_EPS));");
            w(out, &format!("vec3 {s} = vec3(params[3], params[4], params[5]) * ({s}_d * (li * lo) * le);"));
        }
    }
}

fn module_code(out: &mut String, model: &EnhancedModel, slot: usize, m: &NeuralModule) {
    let node = &model.graph.nodes[slot];
    let dims = m.dims();
    let p = 12 + model.p_neural;
    let name = format!("W{slot}");
    let _ = writeln!(out, "    float x{slot}_0[{}];", dims[0]);
    match node.input_signature {
        InputSignature::ParamsOnly | InputSignature::ParamsAndDirections => {
            let _ = writeln!(out, "    for (int i = 0; i < {p}; i++) {{ x{slot}_0[i] = params[i]; }}");
            if node.input_signature == InputSignature::ParamsAndDirections {
                for (k, e) in ["wi.x", "wi.y", "wi.z", "wo.x", "wo.y", "wo.z"].iter().enumerate() {
                    let _ = writeln!(out, "    x{slot}_0[{}] = {e};", p + k);
                }
            }
        }
        InputSignature::Operands => {
            let mut k = 0;
            for &c in &node.children {
                let comps: &[&str] = if model.graph.nodes[c].out_dim == 1 { &["x"] } else { &["x", "y", "z"] };
                for comp in comps {
                    let _ = writeln!(out, "    x{slot}_0[{k}] = s{c}.{comp};");
                    k += 1;
                }
            }
        }
    }
    let mut off = 0;
    for l in 0..4 {
        let (din, dout) = (dims[l], dims[l + 1]);
        let (wo, bo) = (off, off + din * dout);
        off = bo + dout;
        let (src, dst) = (format!("x{slot}_{l}"), format!("x{slot}_{}", l + 1));
        let _ = writeln!(out, "    float {dst}[{dout}];");
        let _ = writeln!(out, "    for (int o = 0; o < {dout}; o++) {{");
        let _ = writeln!(out, "        float acc = 0.0;");
        let _ = writeln!(out, "        for (int i = 0; i < {din}; i++) {{ acc += {name}[{wo} + o * {din} + i] * {src}[i]; }}");
        let _ = writeln!(out, "        acc += {name}[{bo} + o];");
        if l < 3 {
            let _ = writeln!(out, "        {dst}[o] = max(acc, {} * acc);", lit(m.leaky_slope()));
        } else {
            let _ = writeln!(out, "        {dst}[o] = acc;");
        }
        let _ = writeln!(out, "    }}");
    }
    let y = format!("x{slot}_4");
    if dims[4] == 1 {
        let _ = writeln!(out, "    vec3 s{slot} = vec3({y}[0]);");
    } else {
        let _ = writeln!(out, "    vec3 s{slot} = vec3({y}[0], {y}[1], {y}[2]);");
    }
}

/// Shader source for `model`. When `fit` is given its parameter vector is
/// included as `MATERIAL_PARAMS`.
pub fn shader_source(model: &EnhancedModel, fit: Option<&FitResult>) -> Result<String> {
    let p = 12 + model.p_neural;
    let mut out = String::new();
    let _ = writeln!(out, "// {}", model.describe());
    let _ = writeln!(
        out,
        "// params: rho_d.rgb, rho_s.rgb, alpha_x, alpha_y, f0, n_theta, n_phi, t_theta, z[{}]",
        model.p_neural
    );
    let _ = writeln!(out, "const float PI = {};", lit(std::f64::consts::PI));
    let _ = writeln!(out, "const float COS_EPS = {};", lit(COS_EPS));
    let _ = writeln!(out, "const float ALPHA_MIN = {};", lit(ALPHA_MIN));
    if let Some(f) = fit {
        if f.neural.len() != model.p_neural {
            return Err(Error::DimensionMismatch {
                expected: model.p_neural,
                got: f.neural.len(),
            });
        }
        let vals: Vec<String> = f.analytical.to_array().iter().chain(&f.neural).map(|v| lit(*v)).collect();
        let _ = writeln!(out, "const float MATERIAL_PARAMS[{p}] = float[{p}]({});", vals.join(", "));
    }
    for (slot, m) in &model.modules {
        let n = m.weight_count();
        let vals: Vec<String> = m.params().iter().map(|v| lit(*v)).collect();
        let _ = writeln!(out, "const float W{slot}[{n}] = float[{n}]({});", vals.join(", "));
    }
    let _ = writeln!(out, "vec3 {SHADER_ENTRY}(vec3 wi, vec3 wo, float params[{p}]) {{");
    for line in [
        "float ax = max(params[6], ALPHA_MIN);",
        "float ay = max(params[7], ALPHA_MIN);",
        "vec3 n = vec3(sin(params[9]) * cos(params[10]), sin(params[9]) * sin(params[10]), cos(params[9]));",
        "vec3 t0 = normalize(vec3(1.0 - n.x * n.x, -n.x * n.y, -n.x * n.z));",
        "vec3 t = t0 * cos(params[11]) + cross(n, t0) * sin(params[11]);",
        "vec3 b = cross(n, t);",
        "vec3 h = normalize(wi + wo);",
        "vec3 hl = vec3(dot(h, t), dot(h, b), dot(h, n));",
        "vec3 il = vec3(dot(wi, t), dot(wi, b), dot(wi, n));",
        "vec3 ol = vec3(dot(wo, t), dot(wo, b), dot(wo, n));",
    ] {
        let _ = writeln!(out, "    {line}");
    }
    let g = &model.graph;
    for slot in 0..g.n_slots() {
        let node = &g.nodes[slot];
        let _ = writeln!(out, "    // slot {slot}: {}", g.slot_name(slot));
        if let Some(m) = model.modules.get(&slot) {
            module_code(&mut out, model, slot, m);
            continue;
        }
        match node.kind {
            NodeKind::Terminal(t) => term_code(&mut out, slot, t),
            NodeKind::Operator(op) => {
                let sym = match op {
                    Op::Add => '+',
                    Op::Mul => '*',
                };
                let _ = writeln!(
                    out,
                    "    vec3 s{slot} = s{} {sym} s{};",
                    node.children[0], node.children[1]
                );
            }
        }
    }
    let _ = writeln!(out, "    return s{};", g.root());
    let _ = writeln!(out, "}}");
    Ok(out)
}

/// Writes [`shader_source`] to `path`.
pub fn export_shader(model: &EnhancedModel, fit: &FitResult, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, shader_source(model, Some(fit))?)?;
    Ok(())
}
