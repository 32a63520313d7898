//! Deterministic stand-ins for a frozen image encoder.
//!
//! The input encoder sees the photographed object and therefore carries a
//! noisy absolute-size cue. The render encoder sees only the canonical
//! reconstruction, so by construction it carries shape but no absolute scale.
//! All randomness comes from [`SplitMix64`] streams keyed by `(seed, id)`.

use super::{input_id, Embedding};
use crate::camrig::{pose_to_position, pose_up, ViewPose};
use crate::corpus::ItemRecord;
use crate::geometry::{bounding_sphere, cross, dot, norm, TriangleMesh};
use crate::rng::SplitMix64;
use crate::{Error, Result};

pub const MIN_SYNTHETIC_DIM: usize = 8;
/// Leading render components that are computed from geometry.
pub const RENDER_GEOMETRY_FEATURES: usize = 7;

const SIGNATURE_SCALE: f64 = 0.5;
/// Per-frame jitter of the signature block, relative to `noise_sigma`.
const FRAME_JITTER: f64 = 0.5;
const SHAPE_NOISE_SCALE: f64 = 0.05;
const NORMALIZED_TOL: f64 = 1e-6;

fn check_dim(dim: usize) -> Result<()> {
    if dim < MIN_SYNTHETIC_DIM {
        return Err(Error::domain(format!("synthetic embeddings need dim >= {MIN_SYNTHETIC_DIM}, got {dim}")));
    }
    Ok(())
}

/// Input-image embedding for one `(item, frame)`.
///
/// Layout:
/// - `[0]`: `log10(gt_volume_ml * exp(eps))`, `eps ~ N(0, noise_sigma^2)` drawn
///   once per `(item, frame)` from stream `(seed, "noise:item/frame")`
/// - `[1..4]`: axis extents of the reconstruction divided by the largest extent
/// - `[4..]`: category signature (stream `(seed, "category:<name>")`, scale 0.5)
///   plus per-frame jitter of scale `0.5 * noise_sigma` (stream
///   `(seed, "frame:item/frame")`)
pub fn synthetic_encode_input(
    item: &ItemRecord,
    recon: &TriangleMesh,
    frame_id: &str,
    noise_sigma: f64,
    dim: usize,
    seed: u64,
) -> Result<Embedding> {
    check_dim(dim)?;
    if !(item.gt_volume_ml > 0.0) {
        return Err(Error::domain(format!(
            "item {} has non-positive ground-truth volume {}",
            item.item_id, item.gt_volume_ml
        )));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::domain(format!("noise sigma must be non-negative, got {noise_sigma}")));
    }
    let id = input_id(&item.item_id, frame_id);
    let mut v = Vec::with_capacity(dim);

    let eps = noise_sigma * SplitMix64::keyed(seed, &format!("noise:{id}")).normal();
    v.push((item.gt_volume_ml * eps.exp()).log10());

    let ext = recon.extents();
    let longest = ext.iter().cloned().fold(0.0, f64::max);
    if !(longest > 0.0) {
        return Err(Error::domain(format!("reconstruction of {} has zero extent", item.item_id)));
    }
    v.extend(ext.iter().map(|e| e / longest));

    let mut signature = SplitMix64::keyed(seed, &format!("category:{}", item.category));
    let mut jitter = SplitMix64::keyed(seed, &format!("frame:{id}"));
    for _ in 4..dim {
        v.push(SIGNATURE_SCALE * signature.normal() + FRAME_JITTER * noise_sigma * jitter.normal());
    }
    Ok(Embedding::new(id, v.into_iter().map(|x| x as f32).collect()))
}

/// Render embedding of a canonical (unit bounding sphere) mesh seen from `pose`.
///
/// Layout, with the camera at `pose_to_position(pose)` looking at the origin:
/// - `[0]`, `[1]`: vertex-cloud extent along the camera right and up axes
/// - `[2]`: smaller of the two extents over the larger
/// - `[3..7]`: mean, standard deviation, min and max of vertex depth along the
///   viewing direction
/// - `[7..]`: shape-signature noise, scale 0.05, from stream
///   `(seed, "render:<n_vertices>:<n_faces>:<view_index>")`
///
/// The returned id is empty; callers assign `item/frame/view`.
pub fn synthetic_encode_render(mesh: &TriangleMesh, pose: &ViewPose, dim: usize, seed: u64) -> Result<Embedding> {
    check_dim(dim)?;
    let (center, radius) = bounding_sphere(mesh);
    if (radius - 1.0).abs() > NORMALIZED_TOL || norm(center) > NORMALIZED_TOL {
        return Err(Error::domain(format!(
            "render encoder needs a unit-sphere-normalized mesh (center {center:?}, radius {radius})"
        )));
    }
    let eye = pose_to_position(pose);
    let d = norm(eye);
    let forward = [-eye[0] / d, -eye[1] / d, -eye[2] / d];
    let right = {
        let r = cross(forward, pose_up(pose));
        let n = norm(r);
        [r[0] / n, r[1] / n, r[2] / n]
    };
    let up = cross(right, forward);

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &p in &mesh.vertices {
        let coords = [dot(p, right), dot(p, up), dot(p, forward)];
        for k in 0..3 {
            lo[k] = lo[k].min(coords[k]);
            hi[k] = hi[k].max(coords[k]);
        }
        sum += coords[2];
        sum_sq += coords[2] * coords[2];
    }
    let n = mesh.vertices.len() as f64;
    let mean = sum / n;
    let std = (sum_sq / n - mean * mean).max(0.0).sqrt();
    let (ext_u, ext_w) = (hi[0] - lo[0], hi[1] - lo[1]);

    let mut v = vec![ext_u, ext_w, ext_u.min(ext_w) / ext_u.max(ext_w), mean, std, lo[2], hi[2]];
    let mut noise =
        SplitMix64::keyed(seed, &format!("render:{}:{}:{}", mesh.vertices.len(), mesh.faces.len(), pose.view_index));
    v.extend((RENDER_GEOMETRY_FEATURES..dim).map(|_| SHAPE_NOISE_SCALE * noise.normal()));
    Ok(Embedding::new(String::new(), v.into_iter().map(|x| x as f32).collect()))
}
