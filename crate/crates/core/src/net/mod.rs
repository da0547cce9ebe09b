//! Dense 3D convolutional networks with hand-written backward passes.
//!
//! Activations flow through the stack as batches of flat samples. Dense
//! layers and convolutions (after patch lowering) run on a single GEMM
//! kernel; per-sample work is spread over rayon and reduced in sample order
//! so results do not depend on the thread count.

mod gemm;
mod layers;
mod optim;
mod tensor;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use gemm::{gemm, Mat};
pub use layers::{conv3d_forward, maxpool3d_forward};
use layers::{ConvGeom, PoolGeom};
pub use optim::{adam_step, adam_update, AdamState};
pub use tensor::Tensor4;
pub use train::{evaluate_accuracy, train, train_from, EpochStats, TrainConfig, TrainOutcome};

use crate::{Error, Result};

pub const DEFAULT_CLASSES: usize = 14;
pub const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv3d { f: usize, k: usize, s: usize },
    MaxPool3d { s: usize },
    Dense { n: usize },
    Relu,
    Dropout { keep: f64 },
    Flatten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// Hand-assembled stack; cannot be stored in a weights file.
    Custom,
    NbvNet,
    FcBaseline,
}

impl Architecture {
    pub fn id(self) -> u8 {
        match self {
            Architecture::Custom => 0,
            Architecture::NbvNet => 1,
            Architecture::FcBaseline => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Architecture> {
        match id {
            0 => Some(Architecture::Custom),
            1 => Some(Architecture::NbvNet),
            2 => Some(Architecture::FcBaseline),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Custom => "custom",
            Architecture::NbvNet => "nbvnet",
            Architecture::FcBaseline => "fcbaseline",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nbvnet" => Ok(Architecture::NbvNet),
            "fcbaseline" => Ok(Architecture::FcBaseline),
            _ => Err(Error::invalid(format!("unknown architecture {s:?} (expected nbvnet or fcbaseline)"))),
        }
    }
}

/// Shape of one parametric layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamShape {
    Conv { out: usize, input: usize, k: usize, s: usize },
    Dense { out: usize, input: usize },
}

impl ParamShape {
    pub fn weight_len(&self) -> usize {
        match *self {
            ParamShape::Conv { out, input, k, .. } => out * input * k * k * k,
            ParamShape::Dense { out, input } => out * input,
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            ParamShape::Conv { out, .. } | ParamShape::Dense { out, .. } => out,
        }
    }
}

/// Layer stack plus the nominal per-sample input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub arch: Architecture,
    pub input: [usize; 4],
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// C(10,3,2)-P(2)-C(12,3,2)-P(2)-C(8,3,2)-P(2)-FC(1500)-FC(500)-FC(100)-FC(50)-FC(classes).
    pub fn nbvnet(edge: usize, classes: usize, keep: f64) -> NetworkSpec {
        use LayerSpec::*;
        let mut layers = vec![
            Conv3d { f: 10, k: 3, s: 2 },
            Relu,
            MaxPool3d { s: 2 },
            Conv3d { f: 12, k: 3, s: 2 },
            Relu,
            MaxPool3d { s: 2 },
            Conv3d { f: 8, k: 3, s: 2 },
            Relu,
            Dropout { keep },
            MaxPool3d { s: 2 },
            Flatten,
        ];
        layers.extend(dense_head(&[1500, 500, 100, 50], classes, keep));
        NetworkSpec { arch: Architecture::NbvNet, input: [1, edge, edge, edge], layers }
    }

    /// FC(1500)-FC(750)-FC(100)-FC(50)-FC(classes) on the flattened grid.
    pub fn fc_baseline(edge: usize, classes: usize, keep: f64) -> NetworkSpec {
        let mut layers = vec![LayerSpec::Flatten];
        layers.extend(dense_head(&[1500, 750, 100, 50], classes, keep));
        NetworkSpec { arch: Architecture::FcBaseline, input: [1, edge, edge, edge], layers }
    }

    pub fn for_arch(arch: Architecture, edge: usize, classes: usize, keep: f64) -> Result<NetworkSpec> {
        match arch {
            Architecture::NbvNet => Ok(NetworkSpec::nbvnet(edge, classes, keep)),
            Architecture::FcBaseline => Ok(NetworkSpec::fc_baseline(edge, classes, keep)),
            Architecture::Custom => Err(Error::invalid("custom networks need an explicit layer list")),
        }
    }

    pub fn custom(input: [usize; 4], layers: Vec<LayerSpec>) -> NetworkSpec {
        NetworkSpec { arch: Architecture::Custom, input, layers }
    }

    /// Per-sample activation shape after every layer, starting with the input.
    pub fn shapes(&self) -> Result<Vec<[usize; 4]>> {
        walk_shapes(&self.layers, self.input)
    }

    pub fn param_shapes(&self) -> Result<Vec<ParamShape>> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .filter_map(|(l, s)| match *l {
                LayerSpec::Conv3d { f, k, s: stride } => Some(ParamShape::Conv { out: f, input: s[0], k, s: stride }),
                LayerSpec::Dense { n } => Some(ParamShape::Dense { out: n, input: s.iter().product() }),
                _ => None,
            })
            .collect())
    }

    pub fn outputs(&self) -> Result<usize> {
        Ok(self.shapes()?.last().map_or(0, |s| s.iter().product()))
    }
}

fn dense_head(hidden: &[usize], classes: usize, keep: f64) -> Vec<LayerSpec> {
    let mut v = Vec::new();
    for &n in hidden {
        v.extend([LayerSpec::Dense { n }, LayerSpec::Relu, LayerSpec::Dropout { keep }]);
    }
    v.push(LayerSpec::Dense { n: classes });
    v
}

fn walk_shapes(layers: &[LayerSpec], input: [usize; 4]) -> Result<Vec<[usize; 4]>> {
    if input.contains(&0) {
        return Err(Error::invalid(format!("input shape {input:?} has a zero axis")));
    }
    let mut shapes = vec![input];
    let mut cur = input;
    for l in layers {
        cur = match *l {
            LayerSpec::Conv3d { f, k, s } => {
                if f == 0 || k == 0 || s == 0 {
                    return Err(Error::invalid(format!("invalid layer {l:?}")));
                }
                ConvGeom::new(cur, f, k, s).out_shape()
            }
            LayerSpec::MaxPool3d { s } => {
                if s == 0 {
                    return Err(Error::invalid("pool stride must be >= 1"));
                }
                PoolGeom::new(cur, s).out_shape()
            }
            LayerSpec::Dense { n } => {
                if n == 0 {
                    return Err(Error::invalid("dense layer needs >= 1 unit"));
                }
                [n, 1, 1, 1]
            }
            LayerSpec::Dropout { keep } => {
                if !(keep > 0.0 && keep <= 1.0) {
                    return Err(Error::invalid(format!("keep probability {keep} outside (0,1]")));
                }
                cur
            }
            LayerSpec::Relu => cur,
            LayerSpec::Flatten => [cur.iter().product(), 1, 1, 1],
        };
        shapes.push(cur);
    }
    Ok(shapes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayer {
    pub shape: ParamShape,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Weights and biases of every parametric layer, in stack order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    spec: NetworkSpec,
    layers: Vec<ParamLayer>,
}

impl NetworkParams {
    /// Weights from N(0, 0.1²) truncated at two standard deviations by
    /// redrawing; zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<NetworkParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("finite std");
        let layers = spec
            .param_shapes()?
            .into_iter()
            .map(|shape| ParamLayer {
                shape,
                weights: (0..shape.weight_len())
                    .map(|_| loop {
                        let w: f64 = normal.sample(&mut rng);
                        if w.abs() <= 2.0 * INIT_STD {
                            break w;
                        }
                    })
                    .collect(),
                bias: vec![0.0; shape.bias_len()],
            })
            .collect();
        Ok(NetworkParams { spec, layers })
    }

    /// Reassembles parameters; shapes must match the spec.
    pub fn from_layers(spec: NetworkSpec, layers: Vec<ParamLayer>) -> Result<NetworkParams> {
        let expected = spec.param_shapes()?;
        if expected.len() != layers.len() {
            return Err(Error::invalid(format!("spec has {} parametric layers, got {}", expected.len(), layers.len())));
        }
        for (i, (e, l)) in expected.iter().zip(&layers).enumerate() {
            if *e != l.shape || l.weights.len() != e.weight_len() || l.bias.len() != e.bias_len() {
                return Err(Error::invalid(format!("layer {i}: expected {e:?}, got {:?}", l.shape)));
            }
        }
        Ok(NetworkParams { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn arch(&self) -> Architecture {
        self.spec.arch
    }

    pub fn layers(&self) -> &[ParamLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ParamLayer] {
        &mut self.layers
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.shape.bias_len())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Rebinds the per-sample input shape; the layer shapes must still fit.
    pub fn with_input(mut self, input: [usize; 4]) -> Result<NetworkParams> {
        let mut spec = self.spec.clone();
        spec.input = input;
        let expected = spec.param_shapes()?;
        if expected.iter().ne(self.layers.iter().map(|l| &l.shape)) {
            return Err(Error::invalid(format!("parameters do not fit input shape {input:?}")));
        }
        self.spec = spec;
        Ok(self)
    }

    /// Replaces every dropout keep probability.
    pub fn set_keep(&mut self, keep: f64) -> Result<()> {
        if !(keep > 0.0 && keep <= 1.0) {
            return Err(Error::invalid(format!("keep probability {keep} outside (0,1]")));
        }
        for l in &mut self.spec.layers {
            if let LayerSpec::Dropout { keep: k } = l {
                *k = keep;
            }
        }
        Ok(())
    }
}

/// Shorthand for the default 32³ input and 14 classes.
pub fn init_params(arch: Architecture, seed: u64) -> Result<NetworkParams> {
    NetworkParams::init(NetworkSpec::for_arch(arch, 32, DEFAULT_CLASSES, 0.7)?, seed)
}

/// Gradient buffers shaped like [`NetworkParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Gradients {
        Gradients {
            layers: params.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout masks drawn from a generator seeded with the value.
    Train(u64),
    Eval,
}

enum Cache {
    Conv { geom: ConvGeom, cols: Vec<Vec<f64>> },
    Pool { geom: PoolGeom, in_len: usize, argmax: Vec<u32> },
    Dense { input: Vec<f64>, in_dim: usize },
    Relu { output: Vec<f64> },
    Dropout { scale: Option<Vec<f64>> },
    Flatten,
}

/// Intermediate state kept by a training forward pass.
pub struct ForwardCache {
    batch: usize,
    caches: Vec<Cache>,
}

/// Runs `batch` flat samples of shape `input` through the stack; returns
/// `batch x classes` logits.
fn forward_flat(
    params: &NetworkParams,
    data: &[f64],
    batch: usize,
    input: [usize; 4],
    mode: Mode,
    keep_cache: bool,
) -> Result<(Vec<f64>, Option<ForwardCache>)> {
    if input != params.spec.input {
        return Err(Error::invalid(format!(
            "input shape {input:?} does not match the network's {:?}",
            params.spec.input
        )));
    }
    let sample_len: usize = input.iter().product();
    if batch == 0 || data.len() != batch * sample_len {
        return Err(Error::invalid(format!(
            "batch of {batch} samples of shape {input:?} needs {} values, got {}",
            batch * sample_len,
            data.len()
        )));
    }
    let mut rng = match mode {
        Mode::Train(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Mode::Eval => None,
    };
    let mut x = data.to_vec();
    let mut shape = input;
    let mut caches = Vec::new();
    let mut p = 0;
    for layer in &params.spec.layers {
        let cache = match *layer {
            LayerSpec::Conv3d { f, k, s } => {
                let pl = &params.layers[p];
                p += 1;
                if shape[0] * k * k * k * f != pl.weights.len() {
                    return Err(Error::invalid(format!(
                        "conv layer expects {:?}, activation has {} channels",
                        pl.shape, shape[0]
                    )));
                }
                let geom = ConvGeom::new(shape, f, k, s);
                let out_len = f * geom.positions();
                let mut out = vec![0.0; batch * out_len];
                let cols: Vec<Vec<f64>> = x
                    .par_chunks(geom.in_len())
                    .zip(out.par_chunks_mut(out_len))
                    .map(|(xs, ys)| {
                        let mut col = vec![0.0; geom.rows() * geom.positions()];
                        geom.im2col(xs, &mut col);
                        geom.forward(&col, &pl.weights, &pl.bias, ys);
                        if keep_cache {
                            col
                        } else {
                            Vec::new()
                        }
                    })
                    .collect();
                x = out;
                shape = geom.out_shape();
                Cache::Conv { geom, cols }
            }
            LayerSpec::MaxPool3d { s } => {
                let geom = PoolGeom::new(shape, s);
                let in_len: usize = shape.iter().product();
                let out_len = geom.out_len();
                let mut out = vec![0.0; batch * out_len];
                let mut argmax = vec![0u32; batch * out_len];
                out.par_chunks_mut(out_len)
                    .zip(argmax.par_chunks_mut(out_len))
                    .zip(x.par_chunks(in_len))
                    .for_each(|((ys, arg), xs)| geom.forward(xs, ys, arg));
                x = out;
                shape = geom.out_shape();
                Cache::Pool { geom, in_len, argmax }
            }
            LayerSpec::Dense { n } => {
                let pl = &params.layers[p];
                p += 1;
                let in_dim: usize = shape.iter().product();
                if in_dim * n != pl.weights.len() {
                    return Err(Error::invalid(format!(
                        "dense layer expects {:?}, activation has {in_dim} values",
                        pl.shape
                    )));
                }
                let mut out = vec![0.0; batch * n];
                for row in out.chunks_mut(n) {
                    row.copy_from_slice(&pl.bias);
                }
                gemm(1.0, Mat::new(&x, batch, in_dim), Mat::new(&pl.weights, n, in_dim).t(), 1.0, &mut out);
                let input = std::mem::replace(&mut x, out);
                shape = [n, 1, 1, 1];
                Cache::Dense { input: if keep_cache { input } else { Vec::new() }, in_dim }
            }
            LayerSpec::Relu => {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
                Cache::Relu { output: if keep_cache { x.clone() } else { Vec::new() } }
            }
            LayerSpec::Dropout { keep } => match rng.as_mut() {
                Some(rng) => {
                    let inv = 1.0 / keep;
                    let scale: Vec<f64> =
                        (0..x.len()).map(|_| if rng.random::<f64>() < keep { inv } else { 0.0 }).collect();
                    x.iter_mut().zip(&scale).for_each(|(v, s)| *v *= s);
                    Cache::Dropout { scale: Some(scale) }
                }
                None => Cache::Dropout { scale: None },
            },
            LayerSpec::Flatten => {
                shape = [shape.iter().product(), 1, 1, 1];
                Cache::Flatten
            }
        };
        if keep_cache {
            caches.push(cache);
        }
    }
    Ok((x, keep_cache.then_some(ForwardCache { batch, caches })))
}

/// Reverse pass from `dlogits`; overwrites `grads`.
fn backward_flat(params: &NetworkParams, cache: ForwardCache, dlogits: Vec<f64>, grads: &mut Gradients) {
    let batch = cache.batch;
    // Input gradients are only needed above the first parametric layer.
    let first_param = params
        .spec
        .layers
        .iter()
        .position(|l| matches!(l, LayerSpec::Conv3d { .. } | LayerSpec::Dense { .. }))
        .unwrap_or(0);
    let mut g = dlogits;
    let mut p = params.layers.len();
    for (i, c) in cache.caches.into_iter().enumerate().rev() {
        let need_input = i > first_param;
        match c {
            Cache::Dense { input, in_dim } => {
                p -= 1;
                let pl = &params.layers[p];
                let out = pl.bias.len();
                let (dw, db) = &mut grads.layers[p];
                gemm(1.0, Mat::new(&g, batch, out).t(), Mat::new(&input, batch, in_dim), 0.0, dw);
                db.fill(0.0);
                for row in g.chunks(out) {
                    db.iter_mut().zip(row).for_each(|(d, r)| *d += r);
                }
                if need_input {
                    let mut dx = vec![0.0; batch * in_dim];
                    gemm(1.0, Mat::new(&g, batch, out), Mat::new(&pl.weights, out, in_dim), 0.0, &mut dx);
                    g = dx;
                }
            }
            Cache::Conv { geom, cols } => {
                p -= 1;
                let pl = &params.layers[p];
                let (rows, pos, cout) = (geom.rows(), geom.positions(), geom.cout);
                let per_sample: Vec<(Vec<f64>, Vec<f64>)> = g
                    .par_chunks(cout * pos)
                    .zip(cols.par_iter())
                    .map(|(gs, col)| {
                        let mut dw = vec![0.0; cout * rows];
                        gemm(1.0, Mat::new(gs, cout, pos), Mat::new(col, rows, pos).t(), 0.0, &mut dw);
                        let mut dx = Vec::new();
                        if need_input {
                            let mut dcol = vec![0.0; rows * pos];
                            gemm(1.0, Mat::new(&pl.weights, cout, rows).t(), Mat::new(gs, cout, pos), 0.0, &mut dcol);
                            dx = vec![0.0; geom.in_len()];
                            geom.col2im(&dcol, &mut dx);
                        }
                        (dw, dx)
                    })
                    .collect();
                let (dw, db) = &mut grads.layers[p];
                dw.fill(0.0);
                db.fill(0.0);
                for (s, (dws, _)) in per_sample.iter().enumerate() {
                    dw.iter_mut().zip(dws).for_each(|(a, b)| *a += b);
                    let gs = &g[s * cout * pos..(s + 1) * cout * pos];
                    for (o, chunk) in gs.chunks(pos).enumerate() {
                        db[o] += chunk.iter().sum::<f64>();
                    }
                }
                if need_input {
                    g = per_sample.into_iter().flat_map(|(_, dx)| dx).collect();
                }
            }
            Cache::Pool { geom, in_len, argmax } => {
                let out_len = geom.out_len();
                let mut dx = vec![0.0; batch * in_len];
                for s in 0..batch {
                    let dst = &mut dx[s * in_len..(s + 1) * in_len];
                    for j in 0..out_len {
                        dst[argmax[s * out_len + j] as usize] += g[s * out_len + j];
                    }
                }
                g = dx;
            }
            Cache::Relu { output } => {
                g.iter_mut().zip(&output).for_each(|(d, &y)| {
                    if y <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            Cache::Dropout { scale } => {
                if let Some(scale) = scale {
                    g.iter_mut().zip(&scale).for_each(|(d, s)| *d *= s);
                }
            }
            Cache::Flatten => {}
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Logits of one sample.
pub fn forward(params: &NetworkParams, input: &Tensor4, mode: Mode) -> Result<Vec<f64>> {
    Ok(forward_flat(params, input.data(), 1, input.shape(), mode, false)?.0)
}

/// Batched logits, `batch x classes`.
pub fn forward_batch(
    params: &NetworkParams,
    data: &[f64],
    batch: usize,
    input: [usize; 4],
    mode: Mode,
) -> Result<Vec<f64>> {
    Ok(forward_flat(params, data, batch, input, mode, false)?.0)
}

/// Mean softmax cross-entropy of a flat batch and its gradients.
pub fn loss_and_backward_flat(
    params: &NetworkParams,
    data: &[f64],
    input: [usize; 4],
    labels: &[usize],
    mode: Mode,
    grads: &mut Gradients,
) -> Result<f64> {
    let batch = labels.len();
    if batch == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let classes = params.classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
    }
    let (logits, cache) = forward_flat(params, data, batch, input, mode, true)?;
    let mut loss = 0.0;
    let mut dlogits = vec![0.0; logits.len()];
    for (s, &label) in labels.iter().enumerate() {
        let row = &logits[s * classes..(s + 1) * classes];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        for (c, d) in dlogits[s * classes..(s + 1) * classes].iter_mut().enumerate() {
            let onehot = if c == label { 1.0 } else { 0.0 };
            *d = ((row[c] - lse).exp() - onehot) / batch as f64;
        }
    }
    backward_flat(params, cache.expect("cache kept"), dlogits, grads);
    Ok(loss / batch as f64)
}

/// Mean softmax cross-entropy of a flat batch, forward only.
pub fn batch_loss(
    params: &NetworkParams,
    data: &[f64],
    input: [usize; 4],
    labels: &[usize],
    mode: Mode,
) -> Result<f64> {
    let batch = labels.len();
    let classes = params.classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
    }
    let logits = forward_batch(params, data, batch, input, mode)?;
    let mut loss = 0.0;
    for (row, &label) in logits.chunks(classes).zip(labels) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        loss += m + row.iter().map(|&l| (l - m).exp()).sum::<f64>().ln() - row[label];
    }
    Ok(loss / batch as f64)
}

/// Mean softmax cross-entropy over `(input, label)` pairs and its gradients.
pub fn loss_and_backward(params: &NetworkParams, batch: &[(&Tensor4, usize)], mode: Mode) -> Result<(f64, Gradients)> {
    let Some((first, _)) = batch.first() else {
        return Err(Error::invalid("empty batch"));
    };
    let shape = first.shape();
    let mut data = Vec::with_capacity(batch.len() * first.len());
    for (t, _) in batch {
        if t.shape() != shape {
            return Err(Error::invalid("batch samples differ in shape"));
        }
        data.extend_from_slice(t.data());
    }
    let labels: Vec<usize> = batch.iter().map(|b| b.1).collect();
    let mut grads = Gradients::zeros_like(params);
    let loss = loss_and_backward_flat(params, &data, shape, &labels, mode, &mut grads)?;
    Ok((loss, grads))
}

/// Most probable class (lowest id on ties) and the class distribution.
pub fn predict(params: &NetworkParams, input: &Tensor4) -> Result<(usize, Vec<f64>)> {
    let probs = softmax(&forward(params, input, Mode::Eval)?);
    Ok((argmax(&probs), probs))
}
