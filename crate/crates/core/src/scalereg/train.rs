use rand::seq::SliceRandom;

use super::mlp::{init_params, loss_slope, reset, Gradients, RegressorParams, Trace};
use super::{lr_at, Mode, TrainConfig, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sample {
    input: Option<u32>,
    render: Option<u32>,
    target: f64,
}

/// Training pairs stored by reference into embedding pools, so a pair set
/// of `items x frames x views` costs one copy of each embedding rather than
/// one concatenated vector per pair.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    mode: Option<Mode>,
    input_dim: usize,
    render_dim: usize,
    inputs: Vec<f32>,
    renders: Vec<f32>,
    samples: Vec<Sample>,
}

impl TrainingSet {
    pub fn new(mode: Mode) -> Self {
        Self { mode: Some(mode), ..Default::default() }
    }

    /// A set of ready-made feature vectors (treated as input-side features).
    pub fn from_features(mode: Mode, features: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::Dimension { expected: features.len(), got: targets.len() });
        }
        let mut set = Self::new(mode);
        for (f, &t) in features.iter().zip(targets) {
            let idx = set.push_pool(PoolSide::Input, &f.iter().map(|&x| x as f32).collect::<Vec<_>>())?;
            set.push_sample(Some(idx), None, t)?;
        }
        Ok(set)
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Pair)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        let s = match self.samples.first() {
            Some(s) => s,
            None => return 0,
        };
        s.input.map_or(0, |_| self.input_dim) + s.render.map_or(0, |_| self.render_dim)
    }

    pub fn targets(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.target)
    }

    /// Adds an input embedding to the pool, returning its handle.
    pub fn add_input(&mut self, v: &[f32]) -> Result<u32> {
        self.push_pool(PoolSide::Input, v)
    }

    pub fn add_render(&mut self, v: &[f32]) -> Result<u32> {
        self.push_pool(PoolSide::Render, v)
    }

    fn push_pool(&mut self, side: PoolSide, v: &[f32]) -> Result<u32> {
        let (pool, dim) = match side {
            PoolSide::Input => (&mut self.inputs, &mut self.input_dim),
            PoolSide::Render => (&mut self.renders, &mut self.render_dim),
        };
        if pool.is_empty() {
            if v.is_empty() {
                return Err(Error::domain("empty feature vector"));
            }
            *dim = v.len();
        } else if v.len() != *dim {
            return Err(Error::Dimension { expected: *dim, got: v.len() });
        }
        pool.extend_from_slice(v);
        Ok((pool.len() / *dim - 1) as u32)
    }

    /// Registers a training pair. The sources present must match the mode.
    pub fn push_sample(&mut self, input: Option<u32>, render: Option<u32>, target: f64) -> Result<()> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::domain(format!("scale target must be positive, got {target}")));
        }
        if input.is_none() && render.is_none() {
            return Err(Error::domain("sample has no features"));
        }
        if let Some(first) = self.samples.first() {
            if first.input.is_some() != input.is_some() || first.render.is_some() != render.is_some() {
                return Err(Error::domain("samples mix feature layouts"));
            }
        }
        self.samples.push(Sample { input, render, target });
        Ok(())
    }

    fn write_feature(&self, i: usize, out: &mut [f64]) {
        let s = self.samples[i];
        let mut k = 0;
        if let Some(idx) = s.input {
            let src = &self.inputs[idx as usize * self.input_dim..(idx as usize + 1) * self.input_dim];
            out[..src.len()].iter_mut().zip(src).for_each(|(d, &x)| *d = x as f64);
            k = src.len();
        }
        if let Some(idx) = s.render {
            let src = &self.renders[idx as usize * self.render_dim..(idx as usize + 1) * self.render_dim];
            out[k..k + src.len()].iter_mut().zip(src).for_each(|(d, &x)| *d = x as f64);
        }
    }

    /// Materialized feature of sample `i`.
    pub fn feature(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.feature_len()];
        self.write_feature(i, &mut out);
        out
    }
}

#[derive(Clone, Copy)]
enum PoolSide {
    Input,
    Render,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: RegressorParams,
    /// Mean training loss per epoch, in epoch order.
    pub history: Vec<f64>,
}

struct Adam {
    m: Gradients,
    v: Gradients,
    t: i32,
}

impl Adam {
    fn new(params: &RegressorParams) -> Self {
        Self { m: Gradients::zeros_like(params), v: Gradients::zeros_like(params), t: 0 }
    }

    fn step(&mut self, params: &mut RegressorParams, grads: &Gradients, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((p, g), m), v) in
            params.layers.iter_mut().zip(&grads.layers).zip(&mut self.m.layers).zip(&mut self.v.layers)
        {
            let groups = [
                (&mut p.weights, &g.weights, &mut m.weights, &mut v.weights),
                (&mut p.bias, &g.bias, &mut m.bias, &mut v.bias),
            ];
            for (p, g, m, v) in groups {
                for i in 0..p.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Minibatch Adam on the relative L1 loss with the step learning-rate
/// schedule. The full pair set is reshuffled every epoch from the stream
/// `(seed, "shuffle")`; runs are bit-reproducible for equal inputs and seed.
pub fn train(set: &TrainingSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::domain("training set is empty"));
    }
    if set.mode() != cfg.mode {
        return Err(Error::domain(format!("training set built for {} but config asks for {}", set.mode(), cfg.mode)));
    }
    let mut dims = vec![set.feature_len()];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(1);
    let mut params = init_params(&dims, cfg.mode, cfg.seed)?;

    let mut adam = Adam::new(&params);
    let mut grads = Gradients::zeros_like(&params);
    let mut trace = Trace::new(&params);
    let mut scratch = Vec::new();
    let mut rng = SplitMix64::keyed(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            reset(&mut grads);
            let n = batch.len() as f64;
            for &i in batch {
                set.write_feature(i, trace.input_mut());
                let v = set.samples[i].target;
                let v_hat = trace.run(&params);
                epoch_total += (v - v_hat).abs() / v;
                trace.accumulate(&params, loss_slope(v, v_hat) / n, &mut grads, &mut scratch);
            }
            adam.step(&mut params, &grads, lr);
        }
        let epoch_loss = epoch_total / set.len() as f64;
        if !epoch_loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss {epoch_loss} at epoch {epoch} (lr {lr:e})")));
        }
        log::debug!("epoch {epoch:4}  lr {lr:.3e}  loss {epoch_loss:.6}");
        history.push(epoch_loss);
    }
    Ok(TrainOutcome { params, history })
}
