//! MERL isotropic BRDF tables.
//!
//! A `.binary` file holds three little-endian `i32` dimensions
//! `(90, 90, 180)` followed by the red, green and blue planes of `f64`
//! values indexed by `(theta_h, theta_d, phi_d)`. Stored values are scaled
//! per channel when queried; negative entries mark missing measurements.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;

use crate::brdf::{dirs_to_halfdiff, Direction, Rgb};
use crate::error::{Error, Result};

pub const MERL_DIMS: [usize; 3] = [90, 90, 180];
pub const MERL_CELLS: usize = 90 * 90 * 180;
pub const MERL_SCALE: Rgb = [1.0 / 1500.0, 1.15 / 1500.0, 1.66 / 1500.0];

#[derive(Clone, Debug, PartialEq)]
pub struct MerlTable {
    /// Channel-planar raw payload as stored in the file.
    raw: Vec<f64>,
}

impl MerlTable {
    /// Table with every cell set to the raw stored value `v`.
    pub fn filled(v: Rgb) -> Self {
        let mut raw = Vec::with_capacity(3 * MERL_CELLS);
        for c in v {
            raw.extend(std::iter::repeat_n(c, MERL_CELLS));
        }
        Self { raw }
    }

    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        if raw.len() != 3 * MERL_CELLS {
            return Err(Error::DimensionMismatch {
                expected: 3 * MERL_CELLS,
                got: raw.len(),
            });
        }
        Ok(Self { raw })
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn set_raw(&mut self, cell: usize, v: Rgb) {
        for (c, x) in v.into_iter().enumerate() {
            self.raw[c * MERL_CELLS + cell] = x;
        }
    }

    /// Scaled reflectance of one cell; missing data reads as zero.
    pub fn cell_value(&self, cell: usize) -> Rgb {
        std::array::from_fn(|c| {
            let v = self.raw[c * MERL_CELLS + cell];
            if v < 0.0 {
                0.0
            } else {
                v * MERL_SCALE[c]
            }
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.raw.len() * 8);
        for d in MERL_DIMS {
            out.extend_from_slice(&(d as i32).to_le_bytes());
        }
        for v in &self.raw {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Truncated(format!("{} byte header", bytes.len())));
        }
        let dims: Vec<i32> = bytes[..12]
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if dims.iter().zip(MERL_DIMS).any(|(&a, b)| a as i64 != b as i64) {
            return Err(Error::BadHeader(format!("dimensions {dims:?}, expected (90, 90, 180)")));
        }
        let body = &bytes[12..];
        if body.len() < 3 * MERL_CELLS * 8 {
            return Err(Error::Truncated(format!(
                "payload is {} bytes, expected {}",
                body.len(),
                3 * MERL_CELLS * 8
            )));
        }
        let raw = body
            .chunks_exact(8)
            .take(3 * MERL_CELLS)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Self { raw })
    }
}

pub fn read_merl(path: impl AsRef<Path>) -> Result<MerlTable> {
    MerlTable::from_bytes(&fs::read(path)?)
}

pub fn write_merl(table: &MerlTable, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, table.to_bytes())?;
    Ok(())
}

/// Flat cell index for half/difference angles, using the square-root warp
/// on `theta_h` and folding `phi_d` into `[0, pi)`.
pub fn merl_index(theta_h: f64, theta_d: f64, phi_d: f64) -> usize {
    let th = ((theta_h.max(0.0) / FRAC_PI_2).sqrt() * 90.0) as usize;
    let td = (theta_d.max(0.0) / FRAC_PI_2 * 90.0) as usize;
    let pd = phi_d.rem_euclid(PI);
    let pd = (pd / PI * 180.0) as usize;
    let (th, td, pd) = (th.min(89), td.min(89), pd.min(179));
    (th * 90 + td) * 180 + pd
}

/// Nearest-cell lookup; below-horizon pairs return zero.
pub fn merl_lookup(table: &MerlTable, wi: &Direction, wo: &Direction) -> Rgb {
    if !wi.is_upper() || !wo.is_upper() {
        return [0.0; 3];
    }
    let a = dirs_to_halfdiff(wi, wo);
    table.cell_value(merl_index(a.theta_h, a.theta_d, a.phi_d))
}
