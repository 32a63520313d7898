//! Dataset manifests, stratified splits, frame sampling and synthetic corpora.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::camrig::{export_rig, generate_rig, DEFAULT_POLAR_DEG, DEFAULT_RADIUS_MULT};
use crate::embedding::{render_id, synthetic_encode_input, synthetic_encode_render, write_embeddings, Embedding};
use crate::geometry::{
    bounding_sphere, generate_primitive, load_mesh, normalize_to_unit_sphere, pipeline_volume, save_obj, Primitive,
    TriangleMesh,
};
use crate::rng::SplitMix64;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub item_id: String,
    pub category: String,
    pub gt_volume_ml: f64,
    /// Relative paths resolve against the manifest's directory.
    pub recon_mesh_path: PathBuf,
    pub recon_volume_ml: f64,
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_name: String,
    pub dim: usize,
    /// Default split seed; optional in hand-written manifests.
    #[serde(default)]
    pub seed: u64,
    pub items: Vec<ItemRecord>,
}

fn schema(field: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Schema { field: field.into(), msg: msg.into() }
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(schema("items", "manifest has no items"));
        }
        if self.dim == 0 {
            return Err(schema("dim", "embedding dimension must be positive"));
        }
        let mut seen = HashSet::new();
        for (i, it) in self.items.iter().enumerate() {
            if it.item_id.is_empty() {
                return Err(schema(format!("items[{i}].item_id"), "empty id"));
            }
            if !seen.insert(it.item_id.as_str()) {
                return Err(schema(format!("items[{i}].item_id"), format!("duplicate item id {:?}", it.item_id)));
            }
            if !(it.gt_volume_ml > 0.0 && it.gt_volume_ml.is_finite()) {
                return Err(schema(
                    format!("items[{i}].gt_volume_ml"),
                    format!("must be positive, got {}", it.gt_volume_ml),
                ));
            }
            if !it.recon_volume_ml.is_finite() {
                return Err(schema(format!("items[{i}].recon_volume_ml"), "must be finite"));
            }
            if it.frames.is_empty() {
                return Err(schema(format!("items[{i}].frames"), "needs at least one frame"));
            }
        }
        Ok(())
    }

    pub fn item(&self, id: &str) -> Option<&ItemRecord> {
        self.items.iter().find(|it| it.item_id == id)
    }

    pub fn index(&self) -> BTreeMap<&str, &ItemRecord> {
        self.items.iter().map(|it| (it.item_id.as_str(), it)).collect()
    }

    pub fn all_ids(&self) -> Vec<String> {
        self.items.iter().map(|it| it.item_id.clone()).collect()
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn save_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    manifest.validate()?;
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(format!("writing manifest {}", path.display()), e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Per category, `round(test_fraction * n)` items go to test, clamped so that
/// every category with at least two items lands on both sides. Singletons stay
/// in train.
pub fn stratified_split(manifest: &Manifest, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::domain(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut by_category: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for it in &manifest.items {
        by_category.entry(&it.category).or_default().push(&it.item_id);
    }
    let mut split = Split { train: Vec::new(), test: Vec::new() };
    for (category, mut ids) in by_category {
        ids.sort_unstable();
        let n = ids.len();
        let n_test = if n < 2 { 0 } else { ((test_fraction * n as f64).round() as usize).clamp(1, n - 1) };
        let mut rng = SplitMix64::keyed(seed, &format!("split:{category}"));
        ids.shuffle(&mut rng);
        split.test.extend(ids[..n_test].iter().map(|s| s.to_string()));
        split.train.extend(ids[n_test..].iter().map(|s| s.to_string()));
    }
    split.train.sort();
    split.test.sort();
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FramePhase {
    Train,
    /// The first frame, for reproducible evaluation.
    Inference,
    /// One seeded-random frame per item.
    InferenceRandom,
}

/// Training samples up to `k_train` distinct frames (kept in manifest order);
/// inference picks a single frame.
pub fn select_frames(item: &ItemRecord, phase: FramePhase, k_train: usize, seed: u64) -> Result<Vec<String>> {
    if item.frames.is_empty() {
        return Err(Error::domain(format!("item {} has no frames", item.item_id)));
    }
    let mut rng = SplitMix64::keyed(seed, &format!("frames:{}", item.item_id));
    match phase {
        FramePhase::Train => {
            if k_train == 0 {
                return Err(Error::domain("k_train must be at least 1"));
            }
            let n = item.frames.len();
            let mut picked = index::sample(&mut rng, n, k_train.min(n)).into_vec();
            picked.sort_unstable();
            Ok(picked.into_iter().map(|i| item.frames[i].clone()).collect())
        }
        FramePhase::Inference => Ok(vec![item.frames[0].clone()]),
        FramePhase::InferenceRandom => Ok(vec![item.frames.choose(&mut rng).unwrap().clone()]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    CubeLike,
    SphereLike,
    CylinderLike,
    Blob,
}

const FAMILIES: [ShapeFamily; 4] =
    [ShapeFamily::CubeLike, ShapeFamily::SphereLike, ShapeFamily::CylinderLike, ShapeFamily::Blob];

/// Category names, cycling through the shape families in order.
const CATEGORY_NAMES: [&str; 12] = [
    "toast",
    "apple",
    "muffin",
    "potato",
    "cheese",
    "orange",
    "cake",
    "chicken",
    "tofu",
    "meatball",
    "sushi",
    "croissant",
];

pub fn category_name(index: usize) -> String {
    CATEGORY_NAMES.get(index).map(|s| s.to_string()).unwrap_or_else(|| format!("category_{index:02}"))
}

pub fn category_family(index: usize) -> ShapeFamily {
    FAMILIES[index % FAMILIES.len()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub dataset_name: String,
    pub n_items: usize,
    pub categories: usize,
    pub volume_range_ml: (f64, f64),
    pub noise_sigma: f64,
    pub views_per_frame: usize,
    pub frames_per_item: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dataset_name: "synthetic".into(),
            n_items: 250,
            categories: 4,
            volume_range_ml: (5.0, 1500.0),
            noise_sigma: 0.1,
            views_per_frame: 75,
            frames_per_item: 3,
            dim: crate::embedding::DEFAULT_DIM,
            seed: 0,
        }
    }
}

fn scale_axes(mut mesh: TriangleMesh, s: [f64; 3]) -> TriangleMesh {
    for p in &mut mesh.vertices {
        *p = [p[0] * s[0], p[1] * s[1], p[2] * s[2]];
    }
    mesh
}

fn family_shape(family: ShapeFamily, rng: &mut SplitMix64) -> Result<TriangleMesh> {
    match family {
        ShapeFamily::CubeLike => generate_primitive(
            &Primitive::Cuboid { size: [1.0, rng.uniform_range(0.6, 1.4), rng.uniform_range(0.6, 1.4)] },
            0,
        ),
        ShapeFamily::SphereLike => {
            let sphere = generate_primitive(&Primitive::Icosphere { radius: 1.0, subdivisions: 3 }, 0)?;
            Ok(scale_axes(sphere, [1.0, rng.uniform_range(0.75, 1.25), rng.uniform_range(0.75, 1.25)]))
        }
        ShapeFamily::CylinderLike => generate_primitive(
            &Primitive::Cylinder { radius: 1.0, height: rng.uniform_range(0.6, 3.0), segments: 48 },
            0,
        ),
        ShapeFamily::Blob => generate_primitive(
            &Primitive::Blob { radius: 1.0, subdivisions: 3, amplitude: rng.uniform_range(0.15, 0.35) },
            rng.next(),
        ),
    }
}

pub const MESH_DIR: &str = "meshes";
pub const EMBEDDING_DIR: &str = "embeddings";
pub const INPUT_EMB: &str = "embeddings/input.emb";
pub const RENDER_EMB: &str = "embeddings/render.emb";
pub const POSES_FILE: &str = "poses.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes a procedural corpus under `out_dir`:
///
/// ```text
/// meshes/<item>.obj         canonical reconstructions (unit bounding sphere)
/// embeddings/input.emb      one embedding per (item, frame)
/// embeddings/render.emb     one embedding per (item, frame, view)
/// poses.json                the render rig
/// manifest.json
/// ```
///
/// Items are assigned to categories round-robin. Category `c` of `C` draws
/// its volumes log-uniformly from the `c`-th of `C` equal slices of the log
/// volume range, so the pooled volumes are log-uniform over the full range.
pub fn generate_synthetic_corpus(cfg: &SyntheticConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let (vmin, vmax) = cfg.volume_range_ml;
    if cfg.categories == 0 || cfg.n_items < cfg.categories {
        return Err(Error::domain(format!(
            "need at least one item per category ({} items, {} categories)",
            cfg.n_items, cfg.categories
        )));
    }
    if !(vmin > 0.0 && vmax >= vmin && vmax.is_finite()) {
        return Err(Error::domain(format!("invalid volume range [{vmin}, {vmax}]")));
    }
    if cfg.frames_per_item == 0 {
        return Err(Error::domain("frames_per_item must be at least 1"));
    }
    let rig = generate_rig(&DEFAULT_POLAR_DEG, cfg.views_per_frame, DEFAULT_RADIUS_MULT)?;

    for dir in [out_dir.to_path_buf(), out_dir.join(MESH_DIR), out_dir.join(EMBEDDING_DIR)] {
        fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }

    let (log_lo, log_hi) = (vmin.ln(), vmax.ln());
    let band = (log_hi - log_lo) / cfg.categories as f64;
    let width = cfg.n_items.saturating_sub(1).to_string().len().max(4);

    let mut items = Vec::with_capacity(cfg.n_items);
    let mut inputs = Vec::with_capacity(cfg.n_items * cfg.frames_per_item);
    let mut renders = Vec::with_capacity(cfg.n_items * cfg.frames_per_item * rig.len());
    for i in 0..cfg.n_items {
        let c = i % cfg.categories;
        let item_id = format!("item_{i:0width$}");
        let mut rng = SplitMix64::keyed(cfg.seed, &format!("item:{item_id}"));

        let band_lo = log_lo + band * c as f64;
        let gt_volume_ml = rng.uniform_range(band_lo, band_lo + band).exp();

        let shape = family_shape(category_family(c), &mut rng)?;
        let rel_path = PathBuf::from(MESH_DIR).join(format!("{item_id}.obj"));
        save_obj(&normalize_to_unit_sphere(&shape)?, out_dir.join(&rel_path))?;
        // re-read so cached volumes and features see exactly the stored mesh
        let recon = load_mesh(out_dir.join(&rel_path))?;

        let item = ItemRecord {
            item_id: item_id.clone(),
            category: category_name(c),
            gt_volume_ml,
            recon_mesh_path: rel_path,
            recon_volume_ml: pipeline_volume(&recon)?,
            frames: (0..cfg.frames_per_item).map(|k| format!("f{k:02}")).collect(),
        };

        let (_, radius) = bounding_sphere(&recon);
        let mut views = Vec::with_capacity(rig.len());
        for pose in &rig {
            let mut pose = pose.clone();
            pose.radius = DEFAULT_RADIUS_MULT * radius;
            views.push(synthetic_encode_render(&recon, &pose, cfg.dim, cfg.seed)?);
        }
        for frame in &item.frames {
            inputs.push(synthetic_encode_input(&item, &recon, frame, cfg.noise_sigma, cfg.dim, cfg.seed)?);
            for (pose, view) in rig.iter().zip(&views) {
                renders.push(Embedding::new(render_id(&item_id, frame, pose.view_index), view.vector.clone()));
            }
        }
        items.push(item);
    }

    write_embeddings(&inputs, out_dir.join(INPUT_EMB))?;
    write_embeddings(&renders, out_dir.join(RENDER_EMB))?;
    export_rig(&rig, out_dir.join(POSES_FILE))?;

    let manifest = Manifest { dataset_name: cfg.dataset_name.clone(), dim: cfg.dim, seed: cfg.seed, items };
    save_manifest(&manifest, out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
