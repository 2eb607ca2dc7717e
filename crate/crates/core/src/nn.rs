//! One-hidden-layer perceptron with hand-written backprop and Adam.
//!
//! All parameters live in one flat vector in layer order:
//! `W1 (hidden x input, row-major) | b1 | W2 (output x hidden, row-major) | b2`.
//! Gradients and Adam moments share that layout, as does the checkpoint
//! format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const HIDDEN_UNITS: usize = 50;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

const CHECKPOINT_MAGIC: &[u8; 8] = b"SDNMLP01";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Linear,
    Softmax,
}

/// Dense row-major batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row_vector(row: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: row.len(),
            data: row.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&g| g == 0.0)
    }
}

/// Scale `grads` so that the global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in &mut grads.0 {
            *g *= scale;
        }
    }
    norm
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

/// Activations retained from a forward pass for backprop.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub batch: usize,
    input: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    /// Output-layer values before the head.
    pub logits: Vec<f64>,
    /// Head output (equals `logits` for a linear head).
    pub output: Vec<f64>,
}

impl ForwardCache {
    pub fn output_row(&self, b: usize, width: usize) -> &[f64] {
        &self.output[b * width..(b + 1) * width]
    }

    pub fn logits_row(&self, b: usize, width: usize) -> &[f64] {
        &self.logits[b * width..(b + 1) * width]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    output: usize,
    head: Head,
    params: Vec<f64>,
    adam: AdamState,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|z| z - lse).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Mlp {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`), zero biases.
    pub fn new(input: usize, output: usize, head: Head, rng: &mut impl Rng) -> Self {
        Self::with_hidden(input, HIDDEN_UNITS, output, head, rng)
    }

    pub fn with_hidden(
        input: usize,
        hidden: usize,
        output: usize,
        head: Head,
        rng: &mut impl Rng,
    ) -> Self {
        let mut net = Self::zeros(input, hidden, output, head);
        let b1 = (6.0 / input.max(1) as f64).sqrt();
        let b2 = (6.0 / hidden as f64).sqrt();
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for p in &mut net.params[w1] {
            *p = rng.gen_range(-b1..=b1);
        }
        for p in &mut net.params[w2] {
            *p = rng.gen_range(-b2..=b2);
        }
        net
    }

    pub fn zeros(input: usize, hidden: usize, output: usize, head: Head) -> Self {
        let len = hidden * input + hidden + output * hidden + output;
        Mlp {
            input,
            hidden,
            output,
            head,
            params: vec![0.0; len],
            adam: AdamState {
                m: vec![0.0; len],
                v: vec![0.0; len],
                step: 0,
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    /// Copy weights from `other` (same shape). Optimizer state is kept.
    pub fn copy_weights_from(&mut self, other: &Mlp) {
        debug_assert_eq!(self.params.len(), other.params.len());
        self.params.copy_from_slice(&other.params);
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.b1_range().end;
        s..s + self.output * self.hidden
    }

    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.w2_range().end;
        s..s + self.output
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        let cache = self.forward_cached(input)?;
        Matrix::from_vec(cache.batch, self.output, cache.output)
    }

    /// Forward one observation.
    pub fn forward_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(&Matrix::row_vector(input))?.output)
    }

    pub fn forward_cached(&self, input: &Matrix) -> Result<ForwardCache> {
        if input.cols() != self.input {
            return Err(Error::Dimension {
                expected: self.input,
                got: input.cols(),
            });
        }
        let (ni, nh, no) = (self.input, self.hidden, self.output);
        let w1 = &self.params[self.w1_range()];
        let b1 = &self.params[self.b1_range()];
        let w2 = &self.params[self.w2_range()];
        let b2 = &self.params[self.b2_range()];
        let batch = input.rows();

        let mut pre = vec![0.0; batch * nh];
        let mut act = vec![0.0; batch * nh];
        let mut logits = vec![0.0; batch * no];
        for b in 0..batch {
            let x = input.row(b);
            for j in 0..nh {
                let row = &w1[j * ni..(j + 1) * ni];
                let z = b1[j] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
                pre[b * nh + j] = z;
                act[b * nh + j] = z.max(0.0);
            }
            let h = &act[b * nh..(b + 1) * nh];
            for o in 0..no {
                let row = &w2[o * nh..(o + 1) * nh];
                logits[b * no + o] = b2[o] + row.iter().zip(h).map(|(w, h)| w * h).sum::<f64>();
            }
        }
        let output = match self.head {
            Head::Linear => logits.clone(),
            Head::Softmax => logits.chunks(no).flat_map(softmax).collect(),
        };
        Ok(ForwardCache {
            batch,
            input: input.as_slice().to_vec(),
            pre,
            act,
            logits,
            output,
        })
    }

    /// Parameter gradients given dL/d(output) for the head's output.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Gradients> {
        let no = self.output;
        if upstream.len() != cache.batch * no {
            return Err(Error::Dimension {
                expected: cache.batch * no,
                got: upstream.len(),
            });
        }
        match self.head {
            Head::Linear => self.backward_logits(cache, upstream),
            Head::Softmax => {
                // Softmax Jacobian-vector product: p * (u - <u, p>).
                let mut g = vec![0.0; upstream.len()];
                for b in 0..cache.batch {
                    let p = cache.output_row(b, no);
                    let u = &upstream[b * no..(b + 1) * no];
                    let dot: f64 = p.iter().zip(u).map(|(p, u)| p * u).sum();
                    for o in 0..no {
                        g[b * no + o] = p[o] * (u[o] - dot);
                    }
                }
                self.backward_logits(cache, &g)
            }
        }
    }

    /// Parameter gradients given dL/d(logits), bypassing the head.
    pub fn backward_logits(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Gradients> {
        let (ni, nh, no) = (self.input, self.hidden, self.output);
        if upstream.len() != cache.batch * no {
            return Err(Error::Dimension {
                expected: cache.batch * no,
                got: upstream.len(),
            });
        }
        let w2 = &self.params[self.w2_range()];
        let mut grads = vec![0.0; self.params.len()];
        let (w1r, b1r, w2r, b2r) = (
            self.w1_range(),
            self.b1_range(),
            self.w2_range(),
            self.b2_range(),
        );
        let mut dact = vec![0.0; nh];
        for b in 0..cache.batch {
            let g = &upstream[b * no..(b + 1) * no];
            let h = &cache.act[b * nh..(b + 1) * nh];
            let x = &cache.input[b * ni..(b + 1) * ni];
            dact.iter_mut().for_each(|d| *d = 0.0);
            for o in 0..no {
                if g[o] == 0.0 {
                    continue;
                }
                grads[b2r.start + o] += g[o];
                let wrow = &w2[o * nh..(o + 1) * nh];
                let grow = &mut grads[w2r.start + o * nh..w2r.start + (o + 1) * nh];
                for j in 0..nh {
                    grow[j] += g[o] * h[j];
                    dact[j] += g[o] * wrow[j];
                }
            }
            for j in 0..nh {
                // ReLU subgradient at 0 is 0.
                if cache.pre[b * nh + j] <= 0.0 || dact[j] == 0.0 {
                    continue;
                }
                let dz = dact[j];
                grads[b1r.start + j] += dz;
                let grow = &mut grads[w1r.start + j * ni..w1r.start + (j + 1) * ni];
                for k in 0..ni {
                    grow[k] += dz * x[k];
                }
            }
        }
        Ok(Gradients(grads))
    }

    /// Bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &Gradients, lr: f64) {
        debug_assert_eq!(grads.0.len(), self.params.len());
        let st = &mut self.adam;
        st.step += 1;
        let t = st.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (i, &g) in grads.0.iter().enumerate() {
            st.m[i] = ADAM_BETA1 * st.m[i] + (1.0 - ADAM_BETA1) * g;
            st.v[i] = ADAM_BETA2 * st.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = st.m[i] / c1;
            let v_hat = st.v[i] / c2;
            self.params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }

    /// Short hex digest of the weights.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.params {
            h.update(p.to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Binary checkpoint: magic `SDNMLP01`, then u32 LE input, hidden and
    /// output dims, a head byte (0 linear, 1 softmax), then every parameter
    /// as an f64 LE in layer order.
    pub fn write_checkpoint(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        for dim in [self.input, self.hidden, self.output] {
            w.write_all(&(dim as u32).to_le_bytes())?;
        }
        w.write_all(&[match self.head {
            Head::Linear => 0,
            Head::Softmax => 1,
        }])?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint(mut r: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf).map_err(|_| bad("truncated header"))?;
            *d = u32::from_le_bytes(buf) as usize;
        }
        let mut head = [0u8; 1];
        r.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
        let head = match head[0] {
            0 => Head::Linear,
            1 => Head::Softmax,
            _ => return Err(bad("unknown head")),
        };
        let mut net = Mlp::zeros(dims[0], dims[1], dims[2], head);
        for p in &mut net.params {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf).map_err(|_| bad("truncated parameters"))?;
            *p = f64::from_le_bytes(buf);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|_| bad("read failed"))?;
        if !rest.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_checkpoint(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(BufReader::new(file))
    }
}
