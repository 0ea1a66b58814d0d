//! Fully connected network with flat parameter storage.
//!
//! Parameters live in one contiguous vector, layer by layer: the weight matrix
//! (`out x in`, row-major) followed by the bias. Batched passes keep activations
//! feature-major (`units x batch`) so every output unit is one contiguous row and
//! the inner loop runs over samples. Each sample's dot products are accumulated
//! bias first and then input by input in ascending order, the same order as
//! [`Mlp::predict_naive`], so batched and per-sample results agree bit for bit.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Identity,
}

impl Activation {
    pub fn tag(self) -> u32 {
        match self {
            Activation::LeakyRelu => 0,
            Activation::Identity => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Activation::LeakyRelu),
            1 => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
    offsets: Vec<usize>,
    hidden: Activation,
    slope: T,
}

/// Activations retained by a batched forward pass.
#[derive(Debug, Clone)]
pub struct BatchCache<T> {
    batch: usize,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`; feature-major.
    acts: Vec<Vec<T>>,
    /// Pre-activations of each layer, feature-major.
    pre: Vec<Vec<T>>,
}

impl<T> BatchCache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Gradients of a summed loss: parameters (flat, same layout as the network)
/// and inputs (sample-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub params: Vec<T>,
    pub input: Vec<T>,
}

fn to_feature_major<T: Copy>(rows: &[T], batch: usize, width: usize, out: &mut [T]) {
    for s in 0..batch {
        for k in 0..width {
            out[k * batch + s] = rows[s * width + k];
        }
    }
}

fn to_sample_major<T: Copy>(cols: &[T], batch: usize, width: usize, out: &mut [T]) {
    for k in 0..width {
        for s in 0..batch {
            out[s * width + k] = cols[k * batch + s];
        }
    }
}

/// `out[o][s] = b[o] + sum_j w[o][j] * inp[j][s]`, feature-major.
#[inline]
pub(crate) fn dense_forward<T: Real>(
    w: &[T],
    b: &[T],
    inp: &[T],
    out: &mut [T],
    n_in: usize,
    batch: usize,
) {
    for (o, row) in out.chunks_exact_mut(batch).enumerate() {
        row.fill(b[o]);
        let wrow = &w[o * n_in..(o + 1) * n_in];
        for (j, &wj) in wrow.iter().enumerate() {
            let x = &inp[j * batch..(j + 1) * batch];
            for (r, &xv) in row.iter_mut().zip(x) {
                *r = *r + wj * xv;
            }
        }
    }
}

impl<T: Real> Mlp<T> {
    fn layout(sizes: &[usize]) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut off = 0;
        offsets.push(0);
        for w in sizes.windows(2) {
            off += w[0] * w[1] + w[1];
            offsets.push(off);
        }
        offsets
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::config(format!(
                "layer sizes need >= 2 positive entries, got {sizes:?}"
            )));
        }
        Ok(())
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, slope: T) -> Result<Self> {
        Self::check_sizes(sizes)?;
        let offsets = Self::layout(sizes);
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![T::zero(); *offsets.last().unwrap()],
            offsets,
            hidden,
            slope,
        })
    }

    pub fn from_params(sizes: &[usize], hidden: Activation, slope: T, params: Vec<T>) -> Result<Self> {
        let mut m = Self::zeros(sizes, hidden, slope)?;
        if params.len() != m.params.len() {
            return Err(Error::Shape {
                layer: 0,
                expected: m.params.len(),
                got: params.len(),
            });
        }
        m.params = params;
        Ok(m)
    }

    /// He-style uniform initialization, `W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn init<R: Rng>(sizes: &[usize], hidden: Activation, slope: T, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(sizes, hidden, slope)?;
        for l in 0..m.n_layers() {
            let bound = (6.0 / m.sizes[l] as f64).sqrt();
            for w in m.weights_mut(l) {
                *w = T::lit(rng.random_range(-bound..bound));
            }
        }
        Ok(m)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn slope(&self) -> T {
        self.slope
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn weight_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.offsets[l];
        start..start + self.sizes[l] * self.sizes[l + 1]
    }

    fn bias_range(&self, l: usize) -> std::ops::Range<usize> {
        let end = self.offsets[l + 1];
        end - self.sizes[l + 1]..end
    }

    pub fn weights(&self, l: usize) -> &[T] {
        &self.params[self.weight_range(l)]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [T] {
        let r = self.weight_range(l);
        &mut self.params[r]
    }

    pub fn bias(&self, l: usize) -> &[T] {
        &self.params[self.bias_range(l)]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [T] {
        let r = self.bias_range(l);
        &mut self.params[r]
    }

    #[inline]
    fn is_hidden(&self, l: usize) -> bool {
        l + 1 < self.n_layers() && self.hidden == Activation::LeakyRelu
    }

    #[inline]
    pub(crate) fn activate(&self, l: usize, z: T) -> T {
        if self.is_hidden(l) && !(z > T::zero()) {
            self.slope * z
        } else {
            z
        }
    }

    /// Sample-at-a-time evaluation with fresh buffers per layer.
    pub fn predict_naive(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                layer: 0,
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let n_in = self.sizes[l];
            let w = self.weights(l);
            let b = self.bias(l);
            let mut next = Vec::with_capacity(self.sizes[l + 1]);
            for (o, &bo) in b.iter().enumerate() {
                let mut acc = bo;
                for j in 0..n_in {
                    acc = acc + w[o * n_in + j] * a[j];
                }
                next.push(self.activate(l, acc));
            }
            a = next;
        }
        Ok(a)
    }

    /// Batched forward pass over sample-major rows. Returns sample-major outputs.
    pub fn forward_batch(&self, x: &[T], batch: usize) -> Result<(Vec<T>, BatchCache<T>)> {
        let n_in = self.input_dim();
        if batch == 0 || x.len() != batch * n_in {
            return Err(Error::Shape {
                layer: 0,
                expected: batch * n_in,
                got: x.len(),
            });
        }
        let mut input = vec![T::zero(); x.len()];
        to_feature_major(x, batch, n_in, &mut input);
        let mut acts = Vec::with_capacity(self.sizes.len());
        let mut pre = Vec::with_capacity(self.n_layers());
        acts.push(input);
        for l in 0..self.n_layers() {
            let mut z = vec![T::zero(); self.sizes[l + 1] * batch];
            dense_forward(self.weights(l), self.bias(l), &acts[l], &mut z, self.sizes[l], batch);
            let a: Vec<T> = z.iter().map(|&v| self.activate(l, v)).collect();
            pre.push(z);
            acts.push(a);
        }
        let mut y = vec![T::zero(); batch * self.output_dim()];
        to_sample_major(acts.last().unwrap(), batch, self.output_dim(), &mut y);
        Ok((y, BatchCache { batch, acts, pre }))
    }

    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, BatchCache<T>)> {
        self.forward_batch(x, 1)
    }

    /// Reverse pass for a loss summed over the batch, given `dL/dy` (sample-major).
    pub fn backward(&self, cache: &BatchCache<T>, dy: &[T]) -> Result<Gradients<T>> {
        let batch = cache.batch;
        let n_layers = self.n_layers();
        if cache.acts.len() != n_layers + 1 || cache.pre.len() != n_layers {
            return Err(Error::Shape {
                layer: 0,
                expected: n_layers + 1,
                got: cache.acts.len(),
            });
        }
        for (l, a) in cache.acts.iter().enumerate() {
            if a.len() != self.sizes[l] * batch {
                return Err(Error::Shape {
                    layer: l,
                    expected: self.sizes[l] * batch,
                    got: a.len(),
                });
            }
        }
        if dy.len() != batch * self.output_dim() {
            return Err(Error::Shape {
                layer: n_layers,
                expected: batch * self.output_dim(),
                got: dy.len(),
            });
        }
        let mut grads = vec![T::zero(); self.params.len()];
        let mut delta = vec![T::zero(); dy.len()];
        to_feature_major(dy, batch, self.output_dim(), &mut delta);
        for l in (0..n_layers).rev() {
            let n_in = self.sizes[l];
            let n_out = self.sizes[l + 1];
            if self.is_hidden(l) {
                for (d, &z) in delta.iter_mut().zip(&cache.pre[l]) {
                    if !(z > T::zero()) {
                        *d = *d * self.slope;
                    }
                }
            }
            let a_in = &cache.acts[l];
            let (wr, br) = (self.weight_range(l), self.bias_range(l));
            for o in 0..n_out {
                let d = &delta[o * batch..(o + 1) * batch];
                grads[br.start + o] = d.iter().copied().sum();
                for j in 0..n_in {
                    let x = &a_in[j * batch..(j + 1) * batch];
                    let mut acc = T::zero();
                    for (&dv, &xv) in d.iter().zip(x) {
                        acc += dv * xv;
                    }
                    grads[wr.start + o * n_in + j] = acc;
                }
            }
            let w = self.weights(l);
            let mut prev = vec![T::zero(); n_in * batch];
            for o in 0..n_out {
                let d = &delta[o * batch..(o + 1) * batch];
                for j in 0..n_in {
                    let wj = w[o * n_in + j];
                    let p = &mut prev[j * batch..(j + 1) * batch];
                    for (pv, &dv) in p.iter_mut().zip(d) {
                        *pv += wj * dv;
                    }
                }
            }
            delta = prev;
        }
        let mut input = vec![T::zero(); delta.len()];
        to_sample_major(&delta, batch, self.input_dim(), &mut input);
        Ok(Gradients { params: grads, input })
    }
}
