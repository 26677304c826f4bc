//! The `NEAM` model file.
//!
//! Layout (little-endian): magic `NEAM`, `u32` version, `u64` total file
//! length, model name, state bits, `p_neural`, hidden sizes, the constants
//! the evaluation depends on, then each module as slot, layer sizes and
//! parameters. A SHA-256 of all preceding bytes closes the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::brdf::{ALPHA_MIN, COS_EPS};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::graph::{graph_by_name, EnhancedModel, EnhancementState};
use crate::neural::NeuralModule;

pub const MODEL_MAGIC: [u8; 4] = *b"NEAM";
pub const MODEL_VERSION: u32 = 1;

pub(crate) fn write_model(w: &mut Writer, m: &EnhancedModel) {
    w.str(&m.graph.model_name);
    w.bits(m.state.bits());
    w.len(m.p_neural);
    m.hidden.iter().for_each(|h| w.len(*h));
    w.f64(COS_EPS);
    w.f64(ALPHA_MIN);
    w.len(m.modules.len());
    for (&slot, module) in &m.modules {
        w.len(slot);
        module.dims().iter().for_each(|d| w.len(*d));
        w.f64(module.leaky_slope());
        w.f64s(module.params());
    }
}

pub(crate) fn read_model(r: &mut Reader<'_>) -> Result<EnhancedModel> {
    let name = r.str()?;
    let graph = graph_by_name(&name)?;
    let state = EnhancementState::from_bits(r.bits()?);
    if state.len() != graph.n_slots() {
        return Err(Error::DimensionMismatch {
            expected: graph.n_slots(),
            got: state.len(),
        });
    }
    let p_neural = r.len()?;
    let hidden = [r.len()?, r.len()?, r.len()?];
    let (eps, amin) = (r.f64()?, r.f64()?);
    if eps != COS_EPS || amin != ALPHA_MIN {
        return Err(Error::Parse(format!(
            "model built with cos_eps={eps}, alpha_min={amin}; this build uses {COS_EPS}, {ALPHA_MIN}"
        )));
    }
    let mut model = EnhancedModel::analytical(graph, p_neural).with_hidden(hidden);
    let n = r.len()?;
    let mut modules = BTreeMap::new();
    for _ in 0..n {
        let slot = r.len()?;
        if slot >= state.len() || !state.get(slot) {
            return Err(Error::InvalidGraph(format!("module stored for inactive slot {slot}")));
        }
        let dims = [r.len()?, r.len()?, r.len()?, r.len()?, r.len()?];
        if dims != model.module_dims(slot) {
            return Err(Error::DimensionMismatch {
                expected: model.module_dims(slot)[0],
                got: dims[0],
            });
        }
        let slope = r.f64()?;
        modules.insert(slot, NeuralModule::from_parts(dims, r.f64s()?, slope)?);
    }
    if modules.len() != state.count_ones() {
        return Err(Error::InvalidGraph("state bits and stored modules disagree".into()));
    }
    model.state = state;
    model.modules = modules;
    Ok(model)
}

/// Serializes `model` to bytes.
pub fn model_to_bytes(model: &EnhancedModel) -> Vec<u8> {
    let mut body = Writer::default();
    write_model(&mut body, model);
    let mut w = Writer::default();
    w.bytes(&MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    w.len(4 + 4 + 8 + body.buf.len() + 32);
    w.bytes(&body.buf);
    w.finish_with_checksum()
}

/// Parses a model file; nothing is returned unless the whole file checks out.
pub fn model_from_bytes(bytes: &[u8]) -> Result<EnhancedModel> {
    let mut head = Reader::new(bytes);
    head.magic(MODEL_MAGIC)?;
    let version = head.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let total = head.u64()?;
    if (bytes.len() as u64) < total {
        return Err(Error::Truncated(format!("file has {} of {total} bytes", bytes.len())));
    }
    if bytes.len() as u64 != total {
        return Err(Error::Parse(format!("{} trailing bytes", bytes.len() as u64 - total)));
    }
    let mut r = Reader::with_checksum(bytes)?;
    r.take(16)?;
    let m = read_model(&mut r)?;
    if !r.is_done() {
        return Err(Error::Parse("unexpected data after model".into()));
    }
    Ok(m)
}

pub fn save_model(model: &EnhancedModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EnhancedModel> {
    model_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_ggx_graph, build_ward_graph};
    use crate::neural::DEFAULT_HIDDEN;

    fn sample_model() -> EnhancedModel {
        let g = build_ggx_graph();
        let s: EnhancementState = "00011100100".parse().unwrap();
        EnhancedModel::with_state(g, 27, DEFAULT_HIDDEN, &s, |slot| slot as u64 + 7).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample_model();
        let b = model_to_bytes(&m);
        let back = model_from_bytes(&b).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_bytes(&back), b);
        let w = EnhancedModel::analytical(build_ward_graph(), 14);
        assert_eq!(model_from_bytes(&model_to_bytes(&w)).unwrap(), w);
    }

    #[test]
    fn rejects_damaged_files() {
        let b = model_to_bytes(&sample_model());
        for cut in [0, 3, 10, 40, b.len() - 1] {
            assert!(model_from_bytes(&b[..cut]).is_err(), "cut at {cut}");
        }
        assert!(matches!(model_from_bytes(&b[..b.len() - 1]), Err(Error::Truncated(_))));
        let mut foreign = b.clone();
        foreign[..4].copy_from_slice(b"NEAS");
        assert!(matches!(model_from_bytes(&foreign), Err(Error::BadMagic { .. })));
        let mut v2 = b.clone();
        v2[4] = 2;
        assert!(matches!(model_from_bytes(&v2), Err(Error::VersionUnsupported(2))));
        let mut flipped = b.clone();
        let k = flipped.len() - 100;
        flipped[k] ^= 1;
        assert!(matches!(model_from_bytes(&flipped), Err(Error::ChecksumMismatch(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.neam");
        let m = sample_model();
        save_model(&m, &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
    }
}
