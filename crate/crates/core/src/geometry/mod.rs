//! Triangle meshes in centimeters: volume, closure checks and rescaling.
//!
//! One model unit is one centimeter, so volumes come out in cm³, reported as
//! milliliters.

mod io;
mod primitives;

use std::collections::HashMap;

pub use io::{load_mesh, load_obj_str, load_ply_str, save_obj, write_obj};
pub use primitives::{generate_primitive, Primitive};

use crate::{Error, Result};

pub type Point3 = [f64; 3];

/// Below this magnitude a volume is treated as zero and no scale factor exists.
pub const MIN_VOLUME_ML: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

#[inline]
pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

impl TriangleMesh {
    /// Builds a mesh, checking index ranges and rejecting degenerate faces.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (i, f) in self.faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= n) {
                return Err(Error::domain(format!("face {i} references vertex {bad} but mesh has {n} vertices")));
            }
            if f[0] == f[1] && f[1] == f[2] {
                return Err(Error::domain(format!("face {i} is degenerate")));
            }
        }
        if let Some(p) = self.vertices.iter().find(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::domain(format!("non-finite vertex {p:?}")));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Reverses the winding of every face.
    pub fn flipped(&self) -> Self {
        Self { vertices: self.vertices.clone(), faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect() }
    }

    pub fn translated(&self, offset: Point3) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]]).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Concatenates two meshes into one (disjoint components).
    pub fn merged(&self, other: &Self) -> Self {
        let base = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
        Self { vertices, faces }
    }

    /// Axis-aligned extents `(max - min)` per axis.
    pub fn extents(&self) -> Point3 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        sub(hi, lo)
    }
}

/// Signed enclosed volume in mL: the sum of `v0 · (v1 × v2) / 6` over faces.
///
/// Outward-wound closed meshes give a positive value; open meshes return the
/// raw sum about the origin. For closed meshes the sum does not depend on the
/// origin, so it is taken about the vertex centroid to avoid cancellation on
/// meshes far from the origin.
pub fn signed_volume(mesh: &TriangleMesh) -> f64 {
    let origin = match is_watertight(mesh) {
        true => centroid(&mesh.vertices),
        false => [0.0; 3],
    };
    let v: Vec<Point3> = mesh.vertices.iter().map(|&p| sub(p, origin)).collect();
    mesh.faces.iter().map(|&[a, b, c]| dot(v[a], cross(v[b], v[c]))).sum::<f64>() / 6.0
}

/// Volume used by the scale pipeline: `|signed_volume|`, warning when the mesh
/// is open or inverted and failing when the result is effectively zero.
pub fn pipeline_volume(mesh: &TriangleMesh) -> Result<f64> {
    let signed = signed_volume(mesh);
    if signed.abs() < MIN_VOLUME_ML {
        return Err(Error::domain(format!("mesh volume {signed:e} mL is too small to define a scale factor")));
    }
    if signed < 0.0 {
        log::warn!("mesh has inverted winding (signed volume {signed} mL); using |V|");
    } else if !is_watertight(mesh) {
        log::warn!("mesh is not watertight; volume {signed} mL may be unreliable");
    }
    Ok(signed.abs())
}

/// True iff every directed edge appears exactly once and its reverse exactly
/// once, i.e. each undirected edge is shared by two oppositely wound faces.
pub fn is_watertight(mesh: &TriangleMesh) -> bool {
    if mesh.faces.is_empty() {
        return false;
    }
    let mut directed: HashMap<(usize, usize), u32> = HashMap::with_capacity(mesh.faces.len() * 3);
    for &[a, b, c] in &mesh.faces {
        for e in [(a, b), (b, c), (c, a)] {
            if e.0 == e.1 {
                return false;
            }
            *directed.entry(e).or_insert(0) += 1;
        }
    }
    directed.iter().all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
}

/// Scales every vertex about the origin by `v_scale^(1/3)`, which multiplies
/// the enclosed volume by `v_scale`.
pub fn rescale_mesh(mesh: &TriangleMesh, v_scale: f64) -> Result<TriangleMesh> {
    if !(v_scale > 0.0) || !v_scale.is_finite() {
        return Err(Error::domain(format!("volume scale factor must be positive and finite, got {v_scale}")));
    }
    let s = v_scale.cbrt();
    Ok(TriangleMesh {
        vertices: mesh.vertices.iter().map(|p| [p[0] * s, p[1] * s, p[2] * s]).collect(),
        faces: mesh.faces.clone(),
    })
}

fn centroid(points: &[Point3]) -> Point3 {
    let n = points.len().max(1) as f64;
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    [c[0] / n, c[1] / n, c[2] / n]
}

/// Centroid of the vertices and the largest centroid-to-vertex distance.
///
/// This is not the minimal enclosing sphere; it is used for camera framing
/// and canonical normalization.
pub fn bounding_sphere(mesh: &TriangleMesh) -> (Point3, f64) {
    let c = centroid(&mesh.vertices);
    let r = mesh.vertices.iter().map(|&p| norm(sub(p, c))).fold(0.0, f64::max);
    (c, r)
}

/// Moves the bounding-sphere center to the origin and scales the radius to 1.
///
/// This mimics the arbitrary canonical frame of single-view reconstructions:
/// all absolute size information is removed.
pub fn normalize_to_unit_sphere(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let (c, r) = bounding_sphere(mesh);
    if !(r > 0.0) {
        return Err(Error::domain("cannot normalize a mesh with zero extent"));
    }
    Ok(TriangleMesh {
        vertices: mesh
            .vertices
            .iter()
            .map(|&p| {
                let d = sub(p, c);
                [d[0] / r, d[1] / r, d[2] / r]
            })
            .collect(),
        faces: mesh.faces.clone(),
    })
}
