//! Image embeddings, their on-disk container and pairing into regressor
//! features.
//!
//! Id convention: input-image embeddings are `item/frame`, rendered views are
//! `item/frame/view_index`.

mod format;
mod synth;

pub use format::{decode_embeddings, encode_embeddings, read_embeddings, write_embeddings, MAGIC, VERSION};
pub use synth::{synthetic_encode_input, synthetic_encode_render, MIN_SYNTHETIC_DIM, RENDER_GEOMETRY_FEATURES};

use crate::{Error, Result};

/// Embedding width of the default image encoder; paired features are twice this.
pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub id: String,
    pub vector: Vec<f32>,
}

impl Embedding {
    pub fn new(id: impl Into<String>, vector: Vec<f32>) -> Self {
        Self { id: id.into(), vector }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Trailing `/view_index` of a render id, if present and numeric.
    pub fn view_index(&self) -> Option<usize> {
        let mut parts = self.id.rsplitn(2, '/');
        let last = parts.next()?;
        parts.next()?;
        last.parse().ok()
    }
}

pub fn input_id(item_id: &str, frame_id: &str) -> String {
    format!("{item_id}/{frame_id}")
}

pub fn render_id(item_id: &str, frame_id: &str, view_index: usize) -> String {
    format!("{item_id}/{frame_id}/{view_index}")
}

/// Input embedding followed by render embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedFeature(pub Vec<f32>);

impl PairedFeature {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn pair(input: &Embedding, render: &Embedding) -> Result<PairedFeature> {
    if input.dim() != render.dim() {
        return Err(Error::Dimension { expected: input.dim(), got: render.dim() });
    }
    let mut v = Vec::with_capacity(2 * input.dim());
    v.extend_from_slice(&input.vector);
    v.extend_from_slice(&render.vector);
    Ok(PairedFeature(v))
}

/// Positions `round(j·n/m)` for `j = 0..m`, the evenly strided view subset.
pub fn subset_indices(n: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::domain(format!("view count m={m} must be in 1..={n}")));
    }
    // integer round-half-up of j*n/m
    Ok((0..m).map(|j| (2 * j * n + m) / (2 * m)).collect())
}

/// Picks `m` evenly strided views from a list sorted by view index.
pub fn subset_views<T: Clone>(render_embs: &[T], m: usize) -> Result<Vec<T>> {
    Ok(subset_indices(render_embs.len(), m)?.into_iter().map(|i| render_embs[i].clone()).collect())
}
