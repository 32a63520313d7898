//! Glue between manifests, embedding files and the scale regressor.

use std::collections::HashMap;

use crate::corpus::{select_frames, FramePhase, ItemRecord, Manifest};
use crate::embedding::{input_id, Embedding};
use crate::eval::Prediction;
use crate::scalereg::{compute_scale_target, predict_item, Mode, RegressorParams, TrainingSet};
use crate::{Error, Result};

/// Embeddings indexed by id. Render embeddings are additionally grouped by
/// their `item/frame` prefix and ordered by view index.
#[derive(Debug, Default)]
pub struct EmbeddingIndex {
    inputs: HashMap<String, Embedding>,
    renders: HashMap<String, Vec<Embedding>>,
}

impl EmbeddingIndex {
    pub fn new(inputs: Vec<Embedding>, renders: Vec<Embedding>, dim: usize) -> Result<Self> {
        let mut index = Self::default();
        for e in inputs {
            check_dim(&e, dim)?;
            if let Some(prev) = index.inputs.insert(e.id.clone(), e) {
                return Err(Error::domain(format!("duplicate input embedding {}", prev.id)));
            }
        }
        for e in renders {
            check_dim(&e, dim)?;
            let view =
                e.view_index().ok_or_else(|| Error::domain(format!("render id {:?} has no view index", e.id)))?;
            let key = e.id[..e.id.len() - view.to_string().len() - 1].to_string();
            index.renders.entry(key).or_default().push(e);
        }
        for (key, views) in &mut index.renders {
            views.sort_by_key(|e| e.view_index());
            if views.windows(2).any(|w| w[0].view_index() == w[1].view_index()) {
                return Err(Error::domain(format!("duplicate render view under {key}")));
            }
        }
        Ok(index)
    }

    pub fn input(&self, item_id: &str, frame: &str) -> Result<&Embedding> {
        let id = input_id(item_id, frame);
        self.inputs.get(&id).ok_or_else(|| Error::domain(format!("no input embedding for {id}")))
    }

    pub fn renders(&self, item_id: &str, frame: &str) -> Result<&[Embedding]> {
        let id = input_id(item_id, frame);
        self.renders.get(&id).map(Vec::as_slice).ok_or_else(|| Error::domain(format!("no render embeddings for {id}")))
    }

    pub fn has_renders(&self) -> bool {
        !self.renders.is_empty()
    }
}

fn check_dim(e: &Embedding, dim: usize) -> Result<()> {
    if e.dim() != dim {
        return Err(Error::domain(format!("embedding {} has dimension {}, manifest declares {dim}", e.id, e.dim())));
    }
    Ok(())
}

fn lookup<'a>(manifest: &'a Manifest, id: &str) -> Result<&'a ItemRecord> {
    manifest.item(id).ok_or_else(|| Error::domain(format!("item {id} is not in the manifest")))
}

/// Training pairs for `ids`: every sampled frame contributes one sample per
/// rendered view. Input-only mode keeps the same pair set with the render
/// half dropped, so all modes see the same number of optimizer steps; when
/// no render embeddings are loaded it falls back to one sample per frame.
pub fn build_training_set(
    manifest: &Manifest,
    ids: &[String],
    embeddings: &EmbeddingIndex,
    mode: Mode,
    k_train: usize,
    seed: u64,
) -> Result<TrainingSet> {
    let mut set = TrainingSet::new(mode);
    for id in ids {
        let item = lookup(manifest, id)?;
        let target = compute_scale_target(item.gt_volume_ml, item.recon_volume_ml)?;
        for frame in select_frames(item, FramePhase::Train, k_train, seed)? {
            let input = match mode.needs_inputs() {
                true => Some(set.add_input(&embeddings.input(id, &frame)?.vector)?),
                false => None,
            };
            if !mode.needs_renders() {
                let copies = match embeddings.has_renders() {
                    true => embeddings.renders(id, &frame)?.len(),
                    false => 1,
                };
                for _ in 0..copies {
                    set.push_sample(input, None, target)?;
                }
                continue;
            }
            for r in embeddings.renders(id, &frame)? {
                let render = set.add_render(&r.vector)?;
                set.push_sample(input, Some(render), target)?;
            }
        }
    }
    Ok(set)
}

/// One prediction per id from a single inference frame, averaging `m`
/// strided views.
pub fn predict_items(
    params: &RegressorParams,
    manifest: &Manifest,
    ids: &[String],
    embeddings: &EmbeddingIndex,
    m: usize,
    phase: FramePhase,
    seed: u64,
) -> Result<Vec<Prediction>> {
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    let needs_renders = params.mode.needs_renders();
    ids.iter()
        .map(|id| {
            let item = lookup(manifest, id)?;
            let frame = select_frames(item, phase, 1, seed)?.remove(0);
            let input = match params.mode.needs_inputs() {
                true => embeddings.input(id, &frame)?.clone(),
                false => Embedding::new(input_id(id, &frame), Vec::new()),
            };
            let renders = match needs_renders {
                true => embeddings.renders(id, &frame)?,
                false => &[],
            };
            let v_hat = predict_item(params, &input, renders, m)?;
            Prediction::new(item, v_hat, if needs_renders { m.min(renders.len()) } else { 0 })
        })
        .collect()
}
