//! Layered 1D network with forward and backward passes.
//!
//! Activations are stored as `[channel][sample][position]`, so a convolution
//! over a whole batch is a single GEMM of the weights with the im2col matrix
//! and dense layers are the `length = 1` special case.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::scalar::{gemm, Mat, Scalar};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    Sigmoid,
    GlobalAveragePool,
    Flatten,
    Dense {
        out_units: usize,
    },
}

impl LayerSpec {
    /// Convolution with `(k - 1) / 2` zero padding on both sides.
    pub fn conv_same(out_channels: usize, kernel_size: usize, stride: usize) -> Self {
        Self::Conv1d {
            out_channels,
            kernel_size,
            stride,
            padding: (kernel_size - 1) / 2,
        }
    }
}

/// `(channels, length)` of one sample's activation.
pub type Shape = (usize, usize);

/// A layer with resolved shapes and its slice of the parameter vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub input: Shape,
    pub output: Shape,
    /// Offset of the weights in the flat parameter vector; biases follow.
    pub offset: usize,
    pub n_weights: usize,
    pub n_biases: usize,
}

impl Layer {
    pub fn n_params(&self) -> usize {
        self.n_weights + self.n_biases
    }

    /// `(rows, cols)` of the weight matrix of a parametric layer: rows are
    /// output channels, cols run over `(input channel, kernel tap)`.
    fn weight_dims(&self) -> (usize, usize) {
        match self.spec {
            LayerSpec::Conv1d { out_channels, kernel_size, .. } => (out_channels, self.input.0 * kernel_size),
            LayerSpec::Dense { out_units } => (out_units, self.input.0 * self.input.1),
            _ => (0, 0),
        }
    }
}

/// Single-sample input: channels × length, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor1D<T> {
    pub channels: usize,
    pub length: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor1D<T> {
    pub fn new(channels: usize, length: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || length == 0 || data.len() != channels * length {
            return Err(Error::Shape(format!(
                "tensor of {} values cannot be {channels}×{length}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("tensor values must be finite".into()));
        }
        Ok(Self { channels, length, data })
    }

    pub fn sequence(data: Vec<T>) -> Result<Self> {
        let n = data.len();
        Self::new(1, n, data)
    }
}

/// Adam moment estimates for every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    input: Shape,
    layers: Vec<Layer>,
    params: Vec<T>,
    pub adam: AdamState<T>,
}

/// Activation of a whole batch, `[channel][sample][position]`.
#[derive(Clone, Debug)]
struct Act<T> {
    c: usize,
    b: usize,
    l: usize,
    data: Vec<T>,
}

fn resolve(input: Shape, specs: &[LayerSpec]) -> Result<Vec<Layer>> {
    let mut shape = input;
    let mut offset = 0;
    let mut layers = Vec::with_capacity(specs.len());
    for (i, &spec) in specs.iter().enumerate() {
        let (c, l) = shape;
        let (output, n_weights, n_biases) = match spec {
            LayerSpec::Conv1d {
                out_channels,
                kernel_size,
                stride,
                padding,
            } => {
                if kernel_size % 2 == 0 || stride == 0 || out_channels == 0 {
                    return Err(Error::Shape(format!("layer {i}: kernel must be odd, stride and channels >= 1")));
                }
                if l + 2 * padding < kernel_size {
                    return Err(Error::Shape(format!("layer {i}: kernel {kernel_size} longer than input {l}")));
                }
                let out_len = (l + 2 * padding - kernel_size) / stride + 1;
                ((out_channels, out_len), out_channels * c * kernel_size, out_channels)
            }
            LayerSpec::Dense { out_units } => {
                if l != 1 {
                    return Err(Error::Shape(format!("layer {i}: dense input must be flat, got length {l}")));
                }
                if out_units == 0 {
                    return Err(Error::Shape(format!("layer {i}: dense needs >= 1 unit")));
                }
                ((out_units, 1), out_units * c, out_units)
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => (shape, 0, 0),
            LayerSpec::GlobalAveragePool => ((c, 1), 0, 0),
            LayerSpec::Flatten => ((c * l, 1), 0, 0),
        };
        layers.push(Layer {
            spec,
            input: shape,
            output,
            offset,
            n_weights,
            n_biases,
        });
        offset += n_weights + n_biases;
        shape = output;
    }
    Ok(layers)
}

impl<T: Scalar> Model<T> {
    /// Builds a model with seeded initialization: He-uniform for layers
    /// followed by ReLU, Glorot-uniform otherwise, zero biases.
    pub fn new(input: Shape, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        if input.0 == 0 || input.1 == 0 {
            return Err(Error::Shape("model input must be non-empty".into()));
        }
        let layers = resolve(input, specs)?;
        let total = layers.last().map_or(0, |l| l.offset + l.n_params());
        let mut params = vec![T::zero(); total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, layer) in layers.iter().enumerate() {
            if layer.n_weights == 0 {
                continue;
            }
            let (fan_out, fan_in) = match layer.spec {
                LayerSpec::Conv1d { kernel_size, .. } => (layer.output.0 * kernel_size, layer.weight_dims().1),
                _ => layer.weight_dims(),
            };
            let relu_next = matches!(layers.get(i + 1).map(|l| l.spec), Some(LayerSpec::Relu));
            let limit = if relu_next {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            };
            let dist = Uniform::new_inclusive(-limit, limit);
            for p in &mut params[layer.offset..layer.offset + layer.n_weights] {
                *p = T::of(dist.sample(&mut rng));
            }
        }
        Ok(Self {
            input,
            adam: AdamState::new(total),
            layers,
            params,
        })
    }

    /// Rebuilds a model around an existing parameter vector.
    pub fn from_params(input: Shape, specs: &[LayerSpec], params: Vec<T>) -> Result<Self> {
        let layers = resolve(input, specs)?;
        let total = layers.last().map_or(0, |l| l.offset + l.n_params());
        if params.len() != total {
            return Err(Error::Shape(format!("expected {total} parameters, got {}", params.len())));
        }
        Ok(Self {
            input,
            adam: AdamState::new(total),
            layers,
            params,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_len(&self) -> usize {
        let (c, l) = self.layers.last().map_or(self.input, |l| l.output);
        c * l
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Weights of a parametric layer, row-major `(out, in × kernel)`.
    pub fn weights(&self, layer: usize) -> &[T] {
        let l = &self.layers[layer];
        &self.params[l.offset..l.offset + l.n_weights]
    }

    pub fn biases(&self, layer: usize) -> &[T] {
        let l = &self.layers[layer];
        &self.params[l.offset + l.n_weights..l.offset + l.n_params()]
    }

    pub fn forward(&self, input: &Tensor1D<T>) -> Result<Vec<T>> {
        if (input.channels, input.length) != self.input {
            return Err(Error::Shape(format!(
                "input {}×{} does not match model input {:?}",
                input.channels, input.length, self.input
            )));
        }
        self.predict(&input.data, 1)
    }

    /// Row-major `count × input` samples to row-major `count × output` results.
    pub fn predict(&self, inputs: &[T], count: usize) -> Result<Vec<T>> {
        self.check_batch(inputs, count)?;
        let out_len = self.output_len();
        let in_len = self.input.0 * self.input.1;
        let mut out = Vec::with_capacity(count * out_len);
        const CHUNK: usize = 256;
        let mut start = 0;
        while start < count {
            let b = CHUNK.min(count - start);
            let x = self.batch_input(&inputs[start * in_len..(start + b) * in_len], b);
            let mut act = x;
            for layer in &self.layers {
                act = self.layer_forward(layer, &act).0;
            }
            out.extend(to_rows(&act));
            start += b;
        }
        Ok(out)
    }

    fn check_batch(&self, inputs: &[T], count: usize) -> Result<()> {
        let in_len = self.input.0 * self.input.1;
        if inputs.len() != count * in_len {
            return Err(Error::Shape(format!(
                "{} input values for {count} samples of length {in_len}",
                inputs.len()
            )));
        }
        Ok(())
    }

    fn batch_input(&self, rows: &[T], b: usize) -> Act<T> {
        let (c, l) = self.input;
        let mut data = vec![T::zero(); c * b * l];
        for s in 0..b {
            for ch in 0..c {
                let src = &rows[s * c * l + ch * l..s * c * l + (ch + 1) * l];
                data[(ch * b + s) * l..(ch * b + s + 1) * l].copy_from_slice(src);
            }
        }
        Act { c, b, l, data }
    }

    /// Returns the layer output and, for convolutions, the im2col matrix.
    fn layer_forward(&self, layer: &Layer, x: &Act<T>) -> (Act<T>, Option<Vec<T>>) {
        let b = x.b;
        match layer.spec {
            LayerSpec::Conv1d {
                kernel_size,
                stride,
                padding,
                ..
            } => {
                let cols = im2col(x, kernel_size, stride, padding, layer.output.1);
                let out = self.affine(layer, &cols, b * layer.output.1);
                (
                    Act {
                        c: layer.output.0,
                        b,
                        l: layer.output.1,
                        data: out,
                    },
                    Some(cols),
                )
            }
            LayerSpec::Dense { .. } => {
                let out = self.affine(layer, &x.data, b);
                (Act { c: layer.output.0, b, l: 1, data: out }, None)
            }
            LayerSpec::Relu => {
                let data = x.data.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
                (Act { c: x.c, b, l: x.l, data }, None)
            }
            LayerSpec::Sigmoid => {
                let data = x.data.iter().map(|&v| sigmoid(v)).collect();
                (Act { c: x.c, b, l: x.l, data }, None)
            }
            LayerSpec::GlobalAveragePool => {
                let inv = T::one() / T::of(x.l as f64);
                let data = x
                    .data
                    .chunks_exact(x.l)
                    .map(|row| row.iter().fold(T::zero(), |a, &v| a + v) * inv)
                    .collect();
                (Act { c: x.c, b, l: 1, data }, None)
            }
            LayerSpec::Flatten => {
                let mut data = vec![T::zero(); x.c * x.l * b];
                for c in 0..x.c {
                    for s in 0..b {
                        for p in 0..x.l {
                            data[(c * x.l + p) * b + s] = x.data[(c * b + s) * x.l + p];
                        }
                    }
                }
                (Act { c: x.c * x.l, b, l: 1, data }, None)
            }
        }
    }

    /// `W · cols + bias` where `cols` has `W.cols` rows and `n` columns.
    fn affine(&self, layer: &Layer, cols: &[T], n: usize) -> Vec<T> {
        let (rows, k) = layer.weight_dims();
        let w = &self.params[layer.offset..layer.offset + layer.n_weights];
        let bias = &self.params[layer.offset + layer.n_weights..layer.offset + layer.n_params()];
        let mut out = vec![T::zero(); rows * n];
        for (r, row) in out.chunks_exact_mut(n).enumerate() {
            row.iter_mut().for_each(|v| *v = bias[r]);
        }
        gemm(Mat::row_major(w, rows, k), Mat::row_major(cols, k, n), T::one(), &mut out);
        out
    }

    /// Mean loss over the batch and its exact gradient for every parameter.
    pub fn gradients(&self, inputs: &[T], targets: &[T], count: usize, loss: super::Loss) -> Result<(T, Vec<T>)> {
        if count == 0 {
            return Err(Error::Data("gradient batch is empty".into()));
        }
        self.check_batch(inputs, count)?;
        let out_len = self.output_len();
        if targets.len() != count * out_len {
            return Err(Error::Shape(format!(
                "{} targets for {count} samples of output {out_len}",
                targets.len()
            )));
        }
        let x = self.batch_input(inputs, count);
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut cols = Vec::with_capacity(self.layers.len());
        acts.push(x);
        for layer in &self.layers {
            let (y, c) = self.layer_forward(layer, acts.last().expect("input activation"));
            acts.push(y);
            cols.push(c);
        }
        let out = acts.last().expect("output activation");
        let preds = to_rows(out);
        let inv_b = T::one() / T::of(count as f64);
        let mut total = T::zero();
        let mut d_rows = vec![T::zero(); preds.len()];
        for s in 0..count {
            let r = s * out_len..(s + 1) * out_len;
            total = total + loss.value(&preds[r.clone()], &targets[r.clone()]);
            loss.grad(&preds[r.clone()], &targets[r.clone()], &mut d_rows[r]);
        }
        d_rows.iter_mut().for_each(|g| *g = *g * inv_b);
        let mut grad = vec![T::zero(); self.params.len()];
        let mut dy = from_rows(&d_rows, out.c, count, out.l);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            dy = self.layer_backward(layer, &acts[i], &acts[i + 1], cols[i].as_deref(), &dy, &mut grad, i > 0);
        }
        Ok((total * inv_b, grad))
    }

    #[allow(clippy::too_many_arguments)]
    fn layer_backward(
        &self,
        layer: &Layer,
        x: &Act<T>,
        y: &Act<T>,
        cols: Option<&[T]>,
        dy: &Act<T>,
        grad: &mut [T],
        need_dx: bool,
    ) -> Act<T> {
        let b = x.b;
        let shape = Act {
            c: x.c,
            b,
            l: x.l,
            data: Vec::new(),
        };
        match layer.spec {
            LayerSpec::Conv1d {
                kernel_size,
                stride,
                padding,
                ..
            } => {
                let cols = cols.expect("conv forward keeps im2col");
                let n = b * layer.output.1;
                let dcols = self.affine_backward(layer, cols, n, &dy.data, grad, need_dx);
                let mut dx = shape;
                dx.data = match dcols {
                    Some(dc) => col2im(&dc, x, kernel_size, stride, padding, layer.output.1),
                    None => Vec::new(),
                };
                dx
            }
            LayerSpec::Dense { .. } => {
                let dcols = self.affine_backward(layer, &x.data, b, &dy.data, grad, need_dx);
                let mut dx = shape;
                dx.data = dcols.unwrap_or_default();
                dx
            }
            LayerSpec::Relu => {
                let mut dx = shape;
                dx.data = dy
                    .data
                    .iter()
                    .zip(&x.data)
                    .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
                    .collect();
                dx
            }
            LayerSpec::Sigmoid => {
                let mut dx = shape;
                dx.data = dy.data.iter().zip(&y.data).map(|(&g, &s)| g * s * (T::one() - s)).collect();
                dx
            }
            LayerSpec::GlobalAveragePool => {
                let inv = T::one() / T::of(x.l as f64);
                let mut dx = shape;
                dx.data = dy.data.iter().flat_map(|&g| std::iter::repeat(g * inv).take(x.l)).collect();
                dx
            }
            LayerSpec::Flatten => {
                let mut dx = shape;
                dx.data = vec![T::zero(); x.data.len()];
                for c in 0..x.c {
                    for s in 0..b {
                        for p in 0..x.l {
                            dx.data[(c * b + s) * x.l + p] = dy.data[(c * x.l + p) * b + s];
                        }
                    }
                }
                dx
            }
        }
    }

    /// Accumulates weight and bias gradients; returns the input-side gradient
    /// (`Wᵀ · dy`) when requested.
    fn affine_backward(&self, layer: &Layer, cols: &[T], n: usize, dy: &[T], grad: &mut [T], need_dx: bool) -> Option<Vec<T>> {
        let (rows, k) = layer.weight_dims();
        let (gw, gb) = grad[layer.offset..layer.offset + layer.n_params()].split_at_mut(layer.n_weights);
        gemm(Mat::row_major(dy, rows, n), Mat::transposed(cols, k, n), T::one(), gw);
        for (r, row) in dy.chunks_exact(n).enumerate() {
            gb[r] = gb[r] + row.iter().fold(T::zero(), |a, &v| a + v);
        }
        if !need_dx {
            return None;
        }
        let w = &self.params[layer.offset..layer.offset + layer.n_weights];
        let mut dcols = vec![T::zero(); k * n];
        gemm(Mat::transposed(w, rows, k), Mat::row_major(dy, rows, n), T::zero(), &mut dcols);
        Some(dcols)
    }
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Row `(ci·k + tap)`, column `(sample·out_len + o)` holds
/// `x[ci][sample][o·stride + tap − padding]`, zero outside the input.
fn im2col<T: Scalar>(x: &Act<T>, k: usize, stride: usize, padding: usize, out_len: usize) -> Vec<T> {
    let n = x.b * out_len;
    let mut cols = vec![T::zero(); x.c * k * n];
    for ci in 0..x.c {
        for tap in 0..k {
            let row = &mut cols[(ci * k + tap) * n..(ci * k + tap + 1) * n];
            for s in 0..x.b {
                let src = &x.data[(ci * x.b + s) * x.l..(ci * x.b + s + 1) * x.l];
                for o in 0..out_len {
                    let pos = (o * stride + tap) as isize - padding as isize;
                    if pos >= 0 && (pos as usize) < x.l {
                        row[s * out_len + o] = src[pos as usize];
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(dcols: &[T], x: &Act<T>, k: usize, stride: usize, padding: usize, out_len: usize) -> Vec<T> {
    let n = x.b * out_len;
    let mut dx = vec![T::zero(); x.data.len()];
    for ci in 0..x.c {
        for tap in 0..k {
            let row = &dcols[(ci * k + tap) * n..(ci * k + tap + 1) * n];
            for s in 0..x.b {
                let dst = &mut dx[(ci * x.b + s) * x.l..(ci * x.b + s + 1) * x.l];
                for o in 0..out_len {
                    let pos = (o * stride + tap) as isize - padding as isize;
                    if pos >= 0 && (pos as usize) < x.l {
                        dst[pos as usize] = dst[pos as usize] + row[s * out_len + o];
                    }
                }
            }
        }
    }
    dx
}

/// Final activation `[out][sample][1]` to row-major `sample × out`.
fn to_rows<T: Scalar>(a: &Act<T>) -> Vec<T> {
    let width = a.c * a.l;
    let mut out = vec![T::zero(); a.b * width];
    for c in 0..a.c {
        for s in 0..a.b {
            for p in 0..a.l {
                out[s * width + c * a.l + p] = a.data[(c * a.b + s) * a.l + p];
            }
        }
    }
    out
}

fn from_rows<T: Scalar>(rows: &[T], c: usize, b: usize, l: usize) -> Act<T> {
    let width = c * l;
    let mut data = vec![T::zero(); rows.len()];
    for ch in 0..c {
        for s in 0..b {
            for p in 0..l {
                data[(ch * b + s) * l + p] = rows[s * width + ch * l + p];
            }
        }
    }
    Act { c, b, l, data }
}
