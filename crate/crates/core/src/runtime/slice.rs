//! BRDF slice images.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fs;
use std::path::Path;

use super::fit::FitResult;
use crate::brdf::halfdiff::{halfdiff_to_dirs, HalfDiffAngles};
use crate::brdf::Direction;
use crate::error::{Error, Result};
use crate::graph::{EnhancedModel, Evaluator};

/// Concentric (Shirley-Chiu) map from the unit square onto the disk, lifted
/// to the upper hemisphere.
pub fn square_to_hemisphere(u: f64, v: f64) -> Direction {
    let a = 2.0 * u - 1.0;
    let b = 2.0 * v - 1.0;
    let (x, y) = if a == 0.0 && b == 0.0 {
        (0.0, 0.0)
    } else if a.abs() > b.abs() {
        let phi = FRAC_PI_4 * (b / a);
        (a * phi.cos(), a * phi.sin())
    } else {
        let phi = FRAC_PI_2 - FRAC_PI_4 * (a / b);
        (b * phi.cos(), b * phi.sin())
    };
    let z = (1.0 - x * x - y * y).max(0.0).sqrt();
    Direction::normalized([x, y, z]).unwrap_or(Direction::NORMAL)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SliceMode {
    /// Fixed view `(theta_o, phi_o)`; pixels cover `wi` over the hemisphere.
    FixedWo { theta: f64, phi: f64 },
    /// `theta_h` along x, `theta_d` along y (top row is `theta_d = 0`),
    /// `phi_h = 0`, `phi_d = pi/2`.
    ThetaHThetaD,
}

/// Row-major RGB float image; row 0 is the top.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

impl Image {
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    /// Portable float map, little-endian, bottom row first.
    pub fn to_pfm(&self) -> Vec<u8> {
        let mut out = format!("PF\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        for y in (0..self.height).rev() {
            for p in &self.data[y * self.width..(y + 1) * self.width] {
                for c in p {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_pfm(bytes: &[u8]) -> Result<Self> {
        let mut lines = 0;
        let mut pos = 0;
        while lines < 3 {
            let nl = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::BadHeader("unterminated PFM header".into()))?;
            pos += nl + 1;
            lines += 1;
        }
        let header = std::str::from_utf8(&bytes[..pos]).map_err(|e| Error::BadHeader(e.to_string()))?;
        let mut tok = header.split_whitespace();
        if tok.next() != Some("PF") {
            return Err(Error::BadHeader("expected PF".into()));
        }
        let mut num = |what: &str| -> Result<f64> {
            tok.next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::BadHeader(format!("bad {what}")))
        };
        let width = num("width")? as usize;
        let height = num("height")? as usize;
        if num("scale")? >= 0.0 {
            return Err(Error::BadHeader("only little-endian PFM is supported".into()));
        }
        let body = &bytes[pos..];
        if body.len() != width * height * 12 {
            return Err(Error::Truncated(format!("PFM body has {} bytes", body.len())));
        }
        let mut data = vec![[0f32; 3]; width * height];
        for (i, px) in body.chunks_exact(12).enumerate() {
            let (row, x) = (i / width, i % width);
            let y = height - 1 - row;
            for c in 0..3 {
                data[y * width + x][c] = f32::from_le_bytes(px[4 * c..4 * c + 4].try_into().unwrap());
            }
        }
        Ok(Self { width, height, data })
    }
}

/// Pixel directions of a slice; `None` where the configuration is invalid.
fn pixel_dirs(mode: SliceMode, res: usize, x: usize, y: usize) -> Option<(Direction, Direction)> {
    let u = (x as f64 + 0.5) / res as f64;
    let v = (y as f64 + 0.5) / res as f64;
    match mode {
        SliceMode::FixedWo { theta, phi } => {
            // image y grows downward, hemisphere y upward
            let wi = square_to_hemisphere(u, 1.0 - v);
            Some((wi, Direction::from_spherical(theta, phi)))
        }
        SliceMode::ThetaHThetaD => halfdiff_to_dirs(&HalfDiffAngles {
            theta_h: u * FRAC_PI_2,
            phi_h: 0.0,
            theta_d: v * FRAC_PI_2,
            phi_d: FRAC_PI_2,
        })
        .ok(),
    }
}

/// Cosine-weighted values `f(wi, wo) * cos(theta_i)`; zero below the horizon.
pub fn slice_image(model: &EnhancedModel, fit: &FitResult, mode: SliceMode, resolution: usize) -> Result<Image> {
    if resolution < 8 {
        return Err(Error::OutOfRange(format!("resolution {resolution} < 8")));
    }
    if fit.neural.len() != model.p_neural {
        return Err(Error::DimensionMismatch {
            expected: model.p_neural,
            got: fit.neural.len(),
        });
    }
    let a = fit.analytical.to_array();
    let mut ev = Evaluator::new(model);
    let mut data = Vec::with_capacity(resolution * resolution);
    for y in 0..resolution {
        for x in 0..resolution {
            let px = match pixel_dirs(mode, resolution, x, y) {
                Some((wi, wo)) if wi.z() > 0.0 && wo.z() > 0.0 => {
                    let f = ev.forward_raw(model, &a, &fit.neural, wi.as_array(), wo.as_array(), false);
                    f.map(|c| (c * wi.z()) as f32)
                }
                _ => [0.0; 3],
            };
            data.push(px);
        }
    }
    Ok(Image {
        width: resolution,
        height: resolution,
        data,
    })
}

/// Renders a slice and writes it as PFM.
pub fn render_slice(
    model: &EnhancedModel,
    fit: &FitResult,
    mode: SliceMode,
    resolution: usize,
    path: impl AsRef<Path>,
) -> Result<Image> {
    let img = slice_image(model, fit, mode, resolution)?;
    fs::write(path, img.to_pfm())?;
    Ok(img)
}
