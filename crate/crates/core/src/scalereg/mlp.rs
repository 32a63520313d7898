use serde::{Deserialize, Serialize};

use super::Mode;
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Dense layer, `weights` row-major with shape `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.inputs..(j + 1) * self.inputs]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorParams {
    pub mode: Mode,
    pub layers: Vec<Layer>,
}

/// Gradient of the loss, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(params: &RegressorParams) -> Self {
        Self { layers: params.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect() }
    }

    fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }
}

impl RegressorParams {
    /// `[input, hidden..., 1]`
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in checkpoint order: per layer, weights row-major then bias.
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub(crate) fn from_flat(dims: &[usize], mode: Mode, values: &[f64]) -> Result<Self> {
        let mut params = init_shape(dims, mode)?;
        if values.len() != params.param_count() {
            return Err(Error::domain(format!("expected {} parameters, got {}", params.param_count(), values.len())));
        }
        let mut it = values.iter().copied();
        for l in &mut params.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(params)
    }

    pub fn is_finite(&self) -> bool {
        self.flat().all(f64::is_finite)
    }
}

fn init_shape(dims: &[usize], mode: Mode) -> Result<RegressorParams> {
    if dims.len() < 2 {
        return Err(Error::domain("need at least an input and an output dimension"));
    }
    if dims.contains(&0) {
        return Err(Error::domain(format!("layer dims must be positive: {dims:?}")));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::domain(format!("final layer must have width 1: {dims:?}")));
    }
    Ok(RegressorParams { mode, layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() })
}

/// Weights uniform in `±1/sqrt(fan_in)`, biases zero, from stream `(seed, "init")`.
pub fn init_params(layer_dims: &[usize], mode: Mode, seed: u64) -> Result<RegressorParams> {
    let mut params = init_shape(layer_dims, mode)?;
    let mut rng = SplitMix64::keyed(seed, "init");
    for l in &mut params.layers {
        let bound = 1.0 / (l.inputs as f64).sqrt();
        l.weights.iter_mut().for_each(|w| *w = rng.uniform_range(-bound, bound));
    }
    Ok(params)
}

/// Activations of one forward pass: `pre[l]` before ReLU, `post[l]` after,
/// with `post[0]` the input.
pub(crate) struct Trace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Trace {
    pub(crate) fn new(params: &RegressorParams) -> Self {
        let mut post = vec![vec![0.0; params.input_dim()]];
        let mut pre = Vec::with_capacity(params.layers.len());
        for l in &params.layers {
            pre.push(vec![0.0; l.outputs]);
            post.push(vec![0.0; l.outputs]);
        }
        Self { pre, post }
    }

    pub(crate) fn input_mut(&mut self) -> &mut [f64] {
        &mut self.post[0]
    }

    /// Runs the network on `post[0]`; returns the scalar output.
    pub(crate) fn run(&mut self, params: &RegressorParams) -> f64 {
        let last = params.layers.len() - 1;
        for (k, l) in params.layers.iter().enumerate() {
            let (before, after) = self.post.split_at_mut(k + 1);
            let x = &before[k];
            let z = &mut self.pre[k];
            let a = &mut after[0];
            for j in 0..l.outputs {
                let s = l.bias[j] + l.row(j).iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>();
                z[j] = s;
                a[j] = if k == last || s > 0.0 { s } else { 0.0 };
            }
        }
        self.post[last + 1][0]
    }

    /// Accumulates `d_out * ∂out/∂θ` into `grads`. `scratch` holds deltas.
    pub(crate) fn accumulate(
        &self,
        params: &RegressorParams,
        d_out: f64,
        grads: &mut Gradients,
        scratch: &mut Vec<Vec<f64>>,
    ) {
        let n = params.layers.len();
        if scratch.len() != n {
            *scratch = params.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        }
        scratch[n - 1][0] = d_out;
        for k in (0..n).rev() {
            let l = &params.layers[k];
            let g = &mut grads.layers[k];
            let x = &self.post[k];
            let (lower, upper) = scratch.split_at_mut(k);
            let delta = &upper[0];
            for j in 0..l.outputs {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                g.bias[j] += dj;
                let row = &mut g.weights[j * l.inputs..(j + 1) * l.inputs];
                row.iter_mut().zip(x.iter()).for_each(|(gw, v)| *gw += dj * v);
            }
            if k > 0 {
                let prev = &mut lower[k - 1];
                prev.iter_mut().for_each(|d| *d = 0.0);
                for j in 0..l.outputs {
                    let dj = delta[j];
                    if dj == 0.0 {
                        continue;
                    }
                    prev.iter_mut().zip(l.row(j)).for_each(|(d, w)| *d += w * dj);
                }
                // ReLU subgradient at 0 is 0
                for (d, &z) in prev.iter_mut().zip(&self.pre[k - 1]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
        }
    }
}

fn check_len(params: &RegressorParams, len: usize) -> Result<()> {
    if len != params.input_dim() {
        return Err(Error::Dimension { expected: params.input_dim(), got: len });
    }
    Ok(())
}

/// ReLU hidden layers, linear scalar output.
pub fn forward(params: &RegressorParams, feature: &[f64]) -> Result<f64> {
    check_len(params, feature.len())?;
    let mut trace = Trace::new(params);
    trace.input_mut().copy_from_slice(feature);
    Ok(trace.run(params))
}

pub fn forward_f32(params: &RegressorParams, feature: &[f32]) -> Result<f64> {
    check_len(params, feature.len())?;
    let mut trace = Trace::new(params);
    trace.input_mut().iter_mut().zip(feature).for_each(|(d, &s)| *d = s as f64);
    Ok(trace.run(params))
}

/// Mean relative L1 error over `(target, prediction)` pairs.
pub fn loss(batch: &[(f64, f64)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::domain("loss of an empty batch"));
    }
    let mut total = 0.0;
    for &(v, v_hat) in batch {
        if !(v > 0.0) {
            return Err(Error::domain(format!("scale target must be positive, got {v}")));
        }
        total += (v - v_hat).abs() / v;
    }
    Ok(total / batch.len() as f64)
}

/// `d/dv̂ |v - v̂| / v` with the subgradient at `v̂ = v` taken as 0.
#[inline]
pub(crate) fn loss_slope(v: f64, v_hat: f64) -> f64 {
    if v_hat > v {
        1.0 / v
    } else if v_hat < v {
        -1.0 / v
    } else {
        0.0
    }
}

/// Loss and its exact gradient over a batch of `(feature, target)`.
pub fn backward(params: &RegressorParams, batch: &[(&[f64], f64)]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::domain("backward on an empty batch"));
    }
    let mut grads = Gradients::zeros_like(params);
    let mut trace = Trace::new(params);
    let mut scratch = Vec::new();
    let n = batch.len() as f64;
    let mut total = 0.0;
    for &(x, v) in batch {
        check_len(params, x.len())?;
        if !(v > 0.0) {
            return Err(Error::domain(format!("scale target must be positive, got {v}")));
        }
        trace.input_mut().copy_from_slice(x);
        let v_hat = trace.run(params);
        total += (v - v_hat).abs() / v;
        trace.accumulate(params, loss_slope(v, v_hat) / n, &mut grads, &mut scratch);
    }
    Ok((total / n, grads))
}

pub(crate) fn reset(grads: &mut Gradients) {
    grads.clear();
}
