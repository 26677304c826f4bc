//! In-memory measurement sets and the `NEAS` binary sample file.
//!
//! Layout (little-endian): magic `NEAS`, `u32` version (1), `u32` count,
//! then `count` records of nine `f32`: `wi.xyz`, `wo.xyz`, `rgb`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::brdf::{Direction, Rgb};
use crate::error::{Error, Result};

pub const SAMPLESET_MAGIC: [u8; 4] = *b"NEAS";
pub const SAMPLESET_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub wi: Direction,
    pub wo: Direction,
    pub value: Rgb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Merl,
    SyntheticGgx,
    File,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub material_id: String,
    pub samples: Vec<Sample>,
    pub source: Source,
}

impl SampleSet {
    pub fn new(material_id: impl Into<String>, source: Source) -> Self {
        Self {
            material_id: material_id.into(),
            samples: Vec::new(),
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Directions unit within `tol`, values finite and non-negative.
    pub fn check(&self, tol: f64) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            for d in [&s.wi, &s.wo] {
                let l = d.dot(d).sqrt();
                if (l - 1.0).abs() > tol {
                    return Err(Error::OutOfRange(format!("sample {i}: direction length {l}")));
                }
            }
            if s.value.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::OutOfRange(format!("sample {i}: value {:?}", s.value)));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.samples.len() * 36);
        out.extend_from_slice(&SAMPLESET_MAGIC);
        out.extend_from_slice(&SAMPLESET_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u32).to_le_bytes());
        for s in &self.samples {
            let rec = s
                .wi
                .as_array()
                .iter()
                .chain(s.wo.as_array())
                .chain(&s.value);
            for v in rec {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Parses a sample file. Directions are kept at stored `f32` precision
    /// and must be unit within `1e-6`.
    pub fn from_bytes(material_id: &str, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Truncated(format!("{} byte header", bytes.len())));
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != SAMPLESET_MAGIC {
            return Err(Error::BadMagic {
                expected: SAMPLESET_MAGIC,
                found: magic,
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != SAMPLESET_VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() < count * 36 {
            return Err(Error::Truncated(format!(
                "expected {} records, payload holds {}",
                count,
                body.len() / 36
            )));
        }
        let mut set = SampleSet::new(material_id, Source::File);
        set.samples.reserve(count);
        for rec in body.chunks_exact(36).take(count) {
            let f: Vec<f64> = rec
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
                .collect();
            set.samples.push(Sample {
                wi: Direction::from_stored([f[0], f[1], f[2]])?,
                wo: Direction::from_stored([f[3], f[4], f[5]])?,
                value: [f[6], f[7], f[8]],
            });
        }
        set.check(1e-6)?;
        Ok(set)
    }
}

pub fn write_sampleset(set: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&set.to_bytes())?;
    Ok(())
}

/// Reads a sample file; the material id is the file stem.
pub fn read_sampleset(path: impl AsRef<Path>) -> Result<SampleSet> {
    let path = path.as_ref();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    SampleSet::from_bytes(&id, &fs::read(path)?)
}
