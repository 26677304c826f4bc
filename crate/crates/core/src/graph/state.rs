use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One bit per slot: `false` analytical, `true` neural.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnhancementState {
    bits: Vec<bool>,
}

impl EnhancementState {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn ones_state(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Indices of set bits in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    pub fn is_zero(&self) -> bool {
        self.count_ones() == 0
    }

    /// Bits packed little-endian into bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for i in self.ones() {
            out[i / 8] |= 1 << (i % 8);
        }
        out
    }

    pub fn from_bytes(n: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::DimensionMismatch {
                expected: n.div_ceil(8),
                got: bytes.len(),
            });
        }
        Ok(Self {
            bits: (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect(),
        })
    }
}

impl fmt::Display for EnhancementState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for EnhancementState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("bad state digit {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }
}

/// Restrictions on which states the search may visit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborConstraints {
    /// `(slot, value)` pairs that must hold.
    pub fixed: Vec<(usize, bool)>,
    pub max_ones: Option<usize>,
}

impl NeighborConstraints {
    pub fn admits(&self, s: &EnhancementState) -> bool {
        self.fixed.iter().all(|&(i, v)| s.get(i) == v)
            && self.max_ones.is_none_or(|m| s.count_ones() <= m)
    }
}

/// Every state within Hamming distance `threshold` of `state` that satisfies
/// `constraints`, plus `state` itself.
///
/// Ordered by number of flips, then lexicographically by flipped slot
/// indices.
pub fn state_neighbors(
    state: &EnhancementState,
    threshold: usize,
    constraints: &NeighborConstraints,
) -> Vec<EnhancementState> {
    let n = state.len();
    let mut out = vec![state.clone()];
    let mut combo: Vec<usize> = Vec::new();
    for k in 1..=threshold.min(n) {
        combo.clear();
        combo.extend(0..k);
        loop {
            let mut s = state.clone();
            for &i in &combo {
                s.set(i, !s.get(i));
            }
            if constraints.admits(&s) {
                out.push(s);
            }
            // next k-combination of 0..n
            let mut i = k;
            while i > 0 && combo[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..k {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    out
}
