//! Scale-factor regression head.
//!
//! A small ReLU MLP maps a paired feature `[f(input), f(render)]` to a volume
//! scale factor. It is trained on the relative L1 loss `|v - v̂| / v`, and at
//! inference the per-view estimates of one item are averaged.

mod checkpoint;
mod mlp;
mod train;

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION,
};
pub use mlp::{backward, forward, forward_f32, init_params, loss, Gradients, Layer, RegressorParams};
pub use train::{train, TrainOutcome, TrainingSet};

use crate::embedding::{pair, subset_views, Embedding};
use crate::geometry::MIN_VOLUME_ML;
use crate::{Error, Result};

/// Lower bound applied to averaged predictions so rescaling stays defined.
pub const MIN_PREDICTED_SCALE: f64 = 1e-6;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Which embeddings the regressor consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pair,
    InputOnly,
    RenderOnly,
}

impl Mode {
    /// Feature length for embeddings of width `dim`.
    pub fn feature_len(self, dim: usize) -> usize {
        match self {
            Mode::Pair => 2 * dim,
            Mode::InputOnly | Mode::RenderOnly => dim,
        }
    }

    pub fn needs_renders(self) -> bool {
        !matches!(self, Mode::InputOnly)
    }

    pub fn needs_inputs(self) -> bool {
        !matches!(self, Mode::RenderOnly)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Pair => "pair",
            Mode::InputOnly => "input-only",
            Mode::RenderOnly => "render-only",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_decay: f64,
    pub lr_step_epochs: usize,
    pub seed: u64,
    pub mode: Mode,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 64,
            base_lr: 1e-4,
            lr_decay: 0.7,
            lr_step_epochs: 10,
            seed: 0,
            mode: Mode::Pair,
            hidden: vec![512, 128],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.lr_step_epochs == 0 {
            return Err(Error::domain("batch size and lr step must be at least 1"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::domain(format!("learning rate must be positive, got {}", self.base_lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::domain(format!("lr decay must be in (0, 1], got {}", self.lr_decay)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::domain("hidden layer widths must be positive"));
        }
        Ok(())
    }
}

/// Step schedule: `base_lr * lr_decay^floor(epoch / lr_step_epochs)`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.base_lr * cfg.lr_decay.powi((epoch / cfg.lr_step_epochs) as i32)
}

/// Regression target `gt / |recon|`. Inverted reconstructions are accepted
/// with a warning.
pub fn compute_scale_target(gt_volume_ml: f64, recon_volume_ml: f64) -> Result<f64> {
    if !(gt_volume_ml > 0.0) {
        return Err(Error::domain(format!("ground-truth volume must be positive, got {gt_volume_ml}")));
    }
    if !(recon_volume_ml.abs() >= MIN_VOLUME_ML) {
        return Err(Error::domain(format!("reconstruction volume {recon_volume_ml:e} is degenerate")));
    }
    if recon_volume_ml < 0.0 {
        log::warn!("negative reconstruction volume {recon_volume_ml}; using its magnitude");
    }
    Ok(gt_volume_ml / recon_volume_ml.abs())
}

/// Per-view scale estimates for the `m` strided views of one item, in view
/// order. Input-only mode yields a single value.
pub fn per_view_scales(
    params: &RegressorParams,
    input: &Embedding,
    renders: &[Embedding],
    m: usize,
) -> Result<Vec<f64>> {
    match params.mode {
        Mode::InputOnly => Ok(vec![forward_f32(params, &input.vector)?]),
        mode => {
            if renders.is_empty() {
                return Err(Error::domain(format!("{mode} prediction needs render embeddings")));
            }
            subset_views(renders, m)?
                .iter()
                .map(|r| match mode {
                    Mode::Pair => forward_f32(params, &pair(input, r)?.0),
                    _ => forward_f32(params, &r.vector),
                })
                .collect()
        }
    }
}

/// Mean of the per-view estimates, clamped to [`MIN_PREDICTED_SCALE`].
pub fn predict_item(params: &RegressorParams, input: &Embedding, renders: &[Embedding], m: usize) -> Result<f64> {
    let scales = per_view_scales(params, input, renders, m)?;
    let mean = scales.iter().sum::<f64>() / scales.len() as f64;
    Ok(mean.max(MIN_PREDICTED_SCALE))
}
