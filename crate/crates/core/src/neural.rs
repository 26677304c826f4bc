//! The neural module: a 4-layer fully connected network with leaky-ReLU
//! after the first three layers.
//!
//! Parameters live in one flat buffer, layer by layer, each layer storing
//! its row-major `out x in` weight matrix followed by its bias vector. The
//! flat layout is what the optimizer and the model file see.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 3] = [16, 32, 16];
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Number of trainable scalars for layer sizes `dims`.
pub fn weight_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// `[d_in, h0, h1, h2, d_out]`.
pub fn layer_dims(d_in: usize, hidden: [usize; 3], d_out: usize) -> [usize; 5] {
    [d_in, hidden[0], hidden[1], hidden[2], d_out]
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralModule {
    dims: [usize; 5],
    params: Vec<f64>,
    leaky_slope: f64,
}

/// Per-call activation storage; reuse across calls to avoid allocation.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    buf: Vec<f64>,
}

impl NeuralModule {
    /// Xavier-uniform weights, zero biases.
    pub fn init_xavier(dims: [usize; 5], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(weight_count(&dims));
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self {
            dims,
            params,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn zeros(dims: [usize; 5]) -> Self {
        Self {
            dims,
            params: vec![0.0; weight_count(&dims)],
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn from_parts(dims: [usize; 5], params: Vec<f64>, leaky_slope: f64) -> Result<Self> {
        let want = weight_count(&dims);
        if params.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: params.len(),
            });
        }
        Ok(Self {
            dims,
            params,
            leaky_slope,
        })
    }

    pub fn dims(&self) -> [usize; 5] {
        self.dims
    }
    pub fn d_in(&self) -> usize {
        self.dims[0]
    }
    pub fn d_out(&self) -> usize {
        self.dims[4]
    }
    pub fn leaky_slope(&self) -> f64 {
        self.leaky_slope
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
    pub fn weight_count(&self) -> usize {
        self.params.len()
    }

    /// Offset of layer `l`'s weight matrix in the flat buffer.
    fn layer_offset(&self, l: usize) -> usize {
        weight_count(&self.dims[..=l])
    }

    fn tape_len(&self) -> usize {
        // input of every layer plus every pre-activation
        self.dims[..4].iter().sum::<usize>() + self.dims[1..].iter().sum::<usize>()
    }

    /// Evaluates the network.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::default();
        Ok(self.forward_tape(x, &mut tape)?.to_vec())
    }

    /// Evaluates the network, recording activations for [`Self::backward`].
    pub fn forward_tape<'t>(&self, x: &[f64], tape: &'t mut Tape) -> Result<&'t [f64]> {
        if x.len() != self.d_in() {
            return Err(Error::DimensionMismatch {
                expected: self.d_in(),
                got: x.len(),
            });
        }
        tape.buf.clear();
        tape.buf.resize(self.tape_len(), 0.0);
        tape.buf[..x.len()].copy_from_slice(x);
        let mut a_off = 0;
        for l in 0..4 {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let z_off = a_off + n_in;
            let w_off = self.layer_offset(l);
            let w = &self.params[w_off..w_off + n_in * n_out];
            let b = &self.params[w_off + n_in * n_out..w_off + n_in * n_out + n_out];
            let (head, tail) = tape.buf.split_at_mut(z_off);
            let a = &head[a_off..];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                tail[o] = b[o] + row.iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>();
            }
            if l < 3 {
                // next layer input follows the pre-activations
                let (z, next) = tail.split_at_mut(n_out);
                for (dst, &v) in next[..n_out].iter_mut().zip(z.iter()) {
                    *dst = if v > 0.0 { v } else { self.leaky_slope * v };
                }
            }
            a_off = z_off + n_out;
        }
        let out_off = self.tape_len() - self.d_out();
        Ok(&tape.buf[out_off..])
    }

    /// Accumulates `d(grad_out . y)/d(params)` into `d_params` and, when
    /// requested, writes the input gradient into `d_x`.
    pub fn backward(
        &self,
        tape: &Tape,
        grad_out: &[f64],
        d_params: &mut [f64],
        d_x: Option<&mut [f64]>,
    ) {
        debug_assert_eq!(grad_out.len(), self.d_out());
        debug_assert_eq!(d_params.len(), self.params.len());
        // layer input offsets within the tape
        let mut a_offs = [0usize; 4];
        let mut off = 0;
        for l in 0..4 {
            a_offs[l] = off;
            off += self.dims[l] + self.dims[l + 1];
        }
        let mut g: Vec<f64> = grad_out.to_vec();
        let mut g_in = Vec::new();
        for l in (0..4).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let a = &tape.buf[a_offs[l]..a_offs[l] + n_in];
            let z = &tape.buf[a_offs[l] + n_in..a_offs[l] + n_in + n_out];
            if l < 3 {
                for (gi, &zi) in g.iter_mut().zip(z) {
                    if zi <= 0.0 {
                        *gi *= self.leaky_slope;
                    }
                }
            }
            let w_off = self.layer_offset(l);
            let (dw, db) = d_params[w_off..w_off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let go = g[o];
                db[o] += go;
                if go != 0.0 {
                    for (d, ai) in dw[o * n_in..(o + 1) * n_in].iter_mut().zip(a) {
                        *d += go * ai;
                    }
                }
            }
            if l > 0 || d_x.is_some() {
                let w = &self.params[w_off..w_off + n_in * n_out];
                g_in.clear();
                g_in.resize(n_in, 0.0);
                for o in 0..n_out {
                    let go = g[o];
                    if go != 0.0 {
                        for (gi, wi) in g_in.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                            *gi += go * wi;
                        }
                    }
                }
                std::mem::swap(&mut g, &mut g_in);
            }
        }
        if let Some(dx) = d_x {
            dx.copy_from_slice(&g);
        }
    }

    /// Convenience wrapper returning `(d_params, d_x)` for a single input.
    pub fn gradients(&self, x: &[f64], grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if grad_out.len() != self.d_out() {
            return Err(Error::DimensionMismatch {
                expected: self.d_out(),
                got: grad_out.len(),
            });
        }
        let mut tape = Tape::default();
        self.forward_tape(x, &mut tape)?;
        let mut dp = vec![0.0; self.params.len()];
        let mut dx = vec![0.0; self.d_in()];
        self.backward(&tape, grad_out, &mut dp, Some(&mut dx));
        Ok((dp, dx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward matrix evaluation used as the reference.
    fn reference_forward(m: &NeuralModule, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut off = 0;
        for l in 0..4 {
            let (n_in, n_out) = (m.dims[l], m.dims[l + 1]);
            let w = &m.params[off..off + n_in * n_out];
            let b = &m.params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let mut z = vec![0.0; n_out];
            for o in 0..n_out {
                z[o] = b[o];
                for i in 0..n_in {
                    z[o] += w[o * n_in + i] * a[i];
                }
            }
            if l < 3 {
                for v in &mut z {
                    if *v <= 0.0 {
                        *v *= m.leaky_slope;
                    }
                }
            }
            a = z;
        }
        a
    }

    fn rng_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn weight_counts() {
        assert_eq!(weight_count(&[45, 16, 32, 16, 3]), 1859);
        assert_eq!(weight_count(&[45, 16, 32, 16, 1]), 1825);
    }

    #[test]
    fn xavier_bounds_and_zero_bias() {
        let m = NeuralModule::init_xavier(layer_dims(45, DEFAULT_HIDDEN, 1), 5);
        let bound = (6.0f64 / 61.0).sqrt();
        assert!((bound - 0.3136).abs() < 1e-4);
        assert!(m.params[..45 * 16].iter().all(|w| w.abs() <= bound));
        assert!(m.params[45 * 16..45 * 16 + 16].iter().all(|b| *b == 0.0));
        let mut off = 0;
        for w in m.dims.windows(2) {
            off += w[0] * w[1];
            assert!(m.params[off..off + w[1]].iter().all(|b| *b == 0.0));
            off += w[1];
        }
    }

    #[test]
    fn same_seed_same_module() {
        let d = layer_dims(39, DEFAULT_HIDDEN, 3);
        assert_eq!(NeuralModule::init_xavier(d, 9), NeuralModule::init_xavier(d, 9));
        assert_ne!(NeuralModule::init_xavier(d, 9), NeuralModule::init_xavier(d, 10));
    }

    #[test]
    fn zero_module_outputs_zero() {
        let m = NeuralModule::zeros(layer_dims(6, DEFAULT_HIDDEN, 3));
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.5, 0.1, 9.0]).unwrap(), vec![0.0; 3]);
        let (_, dx) = m.gradients(&[1.0; 6], &[1.0, 1.0, 1.0]).unwrap();
        assert!(dx.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn positive_path_is_linear() {
        let dims = [1, 1, 1, 1, 1];
        let m = NeuralModule::from_parts(dims, vec![2.0, 0.0, 1.5, 0.0, 1.0, 0.0, 1.0, 0.5], 0.01)
            .unwrap();
        assert_eq!(m.forward(&[2.0]).unwrap(), vec![6.5]);
    }

    #[test]
    fn matches_reference_evaluation() {
        for seed in 0..20 {
            let m = NeuralModule::init_xavier(layer_dims(45, DEFAULT_HIDDEN, 3), seed);
            let mut m = m;
            let noise = rng_vec(m.params.len(), seed + 100);
            for (p, n) in m.params.iter_mut().zip(noise) {
                *p += 0.1 * n;
            }
            let x = rng_vec(45, seed + 200);
            let got = m.forward(&x).unwrap();
            let want = reference_forward(&m, &x);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = NeuralModule::zeros(layer_dims(4, DEFAULT_HIDDEN, 1));
        assert!(matches!(m.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let m = NeuralModule::init_xavier(layer_dims(10, DEFAULT_HIDDEN, 3), 1);
        let (dp, dx) = m.gradients(&rng_vec(10, 2), &[0.0; 3]).unwrap();
        assert!(dp.iter().chain(dx.iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-6;
        for seed in 0..50 {
            let mut m = NeuralModule::init_xavier(layer_dims(7, [5, 6, 4], 2), seed);
            let noise = rng_vec(m.params.len(), seed + 7);
            for (p, n) in m.params.iter_mut().zip(noise) {
                *p += 0.05 * n;
            }
            let x = rng_vec(7, seed + 1000);
            let g = rng_vec(2, seed + 2000);
            let f = |m: &NeuralModule, x: &[f64]| -> f64 {
                reference_forward(m, x).iter().zip(&g).map(|(a, b)| a * b).sum()
            };
            let (dp, dx) = m.gradients(&x, &g).unwrap();
            let check = |an: f64, num: f64| {
                let err = (an - num).abs() / an.abs().max(num.abs()).max(1e-3);
                assert!(err < 1e-6, "seed {seed}: {an} vs {num}");
            };
            for i in 0..m.params.len() {
                let mut mp = m.clone();
                mp.params[i] += h;
                let mut mm = m.clone();
                mm.params[i] -= h;
                check(dp[i], (f(&mp, &x) - f(&mm, &x)) / (2.0 * h));
            }
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                check(dx[i], (f(&m, &xp) - f(&m, &xm)) / (2.0 * h));
            }
        }
    }

    #[test]
    fn directional_derivative_consistency() {
        let m = NeuralModule::init_xavier(layer_dims(12, DEFAULT_HIDDEN, 1), 3);
        let x = rng_vec(12, 4);
        let delta = rng_vec(12, 5);
        let (_, dx) = m.gradients(&x, &[1.0]).unwrap();
        let dir: f64 = dx.iter().zip(&delta).map(|(a, b)| a * b).sum();
        let h = 1e-6;
        let shift = |s: f64| -> Vec<f64> { x.iter().zip(&delta).map(|(a, d)| a + s * d).collect() };
        let num = (m.forward(&shift(h)).unwrap()[0] - m.forward(&shift(-h)).unwrap()[0]) / (2.0 * h);
        assert!((dir - num).abs() <= 1e-6 * dir.abs().max(1e-3));
    }
}
