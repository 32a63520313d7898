use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{cross, dot, norm, sub, Point3, TriangleMesh};
use crate::rng::SplitMix64;
use crate::{Error, Result};

pub const MAX_SUBDIVISIONS: u32 = 6;

/// Procedural closed shapes, all centered on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Cube {
        edge: f64,
    },
    Cuboid {
        size: [f64; 3],
    },
    Icosphere {
        radius: f64,
        subdivisions: u32,
    },
    /// Closed cylinder along +Z built from a regular `segments`-gon prism.
    Cylinder {
        radius: f64,
        height: f64,
        segments: u32,
    },
    /// Icosphere with a smooth radial perturbation of relative amplitude
    /// `amplitude` (< 1), deterministic per seed.
    Blob {
        radius: f64,
        subdivisions: u32,
        amplitude: f64,
    },
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {x}")))
    }
}

fn check_subdivisions(s: u32) -> Result<()> {
    if s > MAX_SUBDIVISIONS {
        return Err(Error::domain(format!("subdivisions must be at most {MAX_SUBDIVISIONS}, got {s}")));
    }
    Ok(())
}

/// Builds a watertight, outward-wound mesh. `seed` only affects blobs.
pub fn generate_primitive(kind: &Primitive, seed: u64) -> Result<TriangleMesh> {
    let mesh = match *kind {
        Primitive::Cube { edge } => {
            positive("edge", edge)?;
            cuboid([edge; 3])
        }
        Primitive::Cuboid { size } => {
            for s in size {
                positive("cuboid size", s)?;
            }
            cuboid(size)
        }
        Primitive::Icosphere { radius, subdivisions } => {
            positive("radius", radius)?;
            check_subdivisions(subdivisions)?;
            let mut m = unit_icosphere(subdivisions);
            for p in &mut m.vertices {
                *p = [p[0] * radius, p[1] * radius, p[2] * radius];
            }
            m
        }
        Primitive::Cylinder { radius, height, segments } => {
            positive("radius", radius)?;
            positive("height", height)?;
            if segments < 3 {
                return Err(Error::domain(format!("cylinder needs at least 3 segments, got {segments}")));
            }
            cylinder(radius, height, segments as usize)
        }
        Primitive::Blob { radius, subdivisions, amplitude } => {
            positive("radius", radius)?;
            check_subdivisions(subdivisions)?;
            if !(0.0..1.0).contains(&amplitude) {
                return Err(Error::domain(format!("blob amplitude must be in [0, 1), got {amplitude}")));
            }
            blob(radius, subdivisions, amplitude, seed)
        }
    };
    Ok(orient_outward(mesh))
}

fn cuboid(size: [f64; 3]) -> TriangleMesh {
    let h = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    // vertex i has bits (x, y, z) = (i & 1, i & 2, i & 4)
    let vertices = (0..8)
        .map(|i| {
            let pick = |bit: usize, k: usize| if i & bit != 0 { h[k] } else { -h[k] };
            [pick(1, 0), pick(2, 1), pick(4, 2)]
        })
        .collect();
    let faces = vec![
        [0, 4, 6],
        [0, 6, 2], // -x
        [1, 3, 7],
        [1, 7, 5], // +x
        [0, 1, 5],
        [0, 5, 4], // -y
        [2, 6, 7],
        [2, 7, 3], // +y
        [0, 2, 3],
        [0, 3, 1], // -z
        [4, 5, 7],
        [4, 7, 6], // +z
    ];
    TriangleMesh { vertices, faces }
}

fn unit(p: Point3) -> Point3 {
    let n = norm(p);
    [p[0] / n, p[1] / n, p[2] / n]
}

fn unit_icosphere(subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(unit)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push(unit([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh { vertices, faces }
}

fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let z = height / 2.0;
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for ring_z in [-z, z] {
        for i in 0..segments {
            let a = std::f64::consts::TAU * i as f64 / segments as f64;
            vertices.push([radius * a.cos(), radius * a.sin(), ring_z]);
        }
    }
    let bottom_center = vertices.len();
    vertices.push([0.0, 0.0, -z]);
    let top_center = vertices.len();
    vertices.push([0.0, 0.0, z]);
    let mut faces = Vec::with_capacity(4 * segments);
    for i in 0..segments {
        let j = (i + 1) % segments;
        let (b0, b1, t0, t1) = (i, j, segments + i, segments + j);
        faces.push([b0, b1, t1]);
        faces.push([b0, t1, t0]);
        faces.push([bottom_center, b1, b0]);
        faces.push([top_center, t0, t1]);
    }
    TriangleMesh { vertices, faces }
}

fn blob(radius: f64, subdivisions: u32, amplitude: f64, seed: u64) -> TriangleMesh {
    let mut rng = SplitMix64::keyed(seed, "blob");
    let waves: Vec<(f64, Point3, f64, f64)> = (0..4)
        .map(|_| {
            let weight = rng.uniform_range(0.5, 1.0);
            let dir = unit([rng.normal(), rng.normal(), rng.normal()]);
            let freq = rng.uniform_range(1.0, 3.0);
            let phase = rng.uniform_range(0.0, std::f64::consts::TAU);
            (weight, dir, freq, phase)
        })
        .collect();
    let total: f64 = waves.iter().map(|w| w.0).sum();
    let mut mesh = unit_icosphere(subdivisions);
    for p in &mut mesh.vertices {
        let g: f64 =
            waves.iter().map(|&(w, dir, freq, phase)| w * (freq * dot(*p, dir) + phase).sin()).sum::<f64>() / total;
        let r = radius * (1.0 + amplitude * g);
        *p = [p[0] * r, p[1] * r, p[2] * r];
    }
    mesh
}

/// Flips faces whose normal points toward the origin. Valid for shapes that
/// are star-shaped about the origin, which all primitives here are.
fn orient_outward(mut mesh: TriangleMesh) -> TriangleMesh {
    let v = &mesh.vertices;
    for f in &mut mesh.faces {
        let (a, b, c) = (v[f[0]], v[f[1]], v[f[2]]);
        let n = cross(sub(b, a), sub(c, a));
        let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0, (a[2] + b[2] + c[2]) / 3.0];
        if dot(n, centroid) < 0.0 {
            f.swap(1, 2);
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{is_watertight, signed_volume};

    #[test]
    fn cube_edge_two_has_volume_eight() {
        let m = generate_primitive(&Primitive::Cube { edge: 2.0 }, 0).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.faces.len(), 12);
        assert!((signed_volume(&m) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn cylinder_matches_prism_formula() {
        let m = generate_primitive(&Primitive::Cylinder { radius: 1.0, height: 2.0, segments: 64 }, 0).unwrap();
        let prism = 64.0 * (std::f64::consts::TAU / 64.0).sin() * 0.5 * 2.0;
        assert!((signed_volume(&m) - prism).abs() < 1e-12);
        let exact = 2.0 * std::f64::consts::PI;
        assert!((signed_volume(&m) - exact).abs() / exact < 0.005);
    }

    #[test]
    fn icosphere_counts() {
        let m = generate_primitive(&Primitive::Icosphere { radius: 1.0, subdivisions: 3 }, 0).unwrap();
        assert_eq!(m.faces.len(), 20 * 64);
        assert_eq!(m.vertices.len(), 642);
        assert!(is_watertight(&m));
    }

    #[test]
    fn blob_is_deterministic_per_seed() {
        let kind = Primitive::Blob { radius: 1.0, subdivisions: 3, amplitude: 0.3 };
        let a = generate_primitive(&kind, 7).unwrap();
        let b = generate_primitive(&kind, 7).unwrap();
        let c = generate_primitive(&kind, 8).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_ne!(a.vertices, c.vertices);
        assert!(is_watertight(&a));
        assert!(signed_volume(&a) > 0.0);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(generate_primitive(&Primitive::Cube { edge: 0.0 }, 0).is_err());
        assert!(generate_primitive(&Primitive::Icosphere { radius: 1.0, subdivisions: 7 }, 0).is_err());
        assert!(generate_primitive(&Primitive::Cylinder { radius: 1.0, height: 1.0, segments: 2 }, 0).is_err());
        assert!(generate_primitive(&Primitive::Blob { radius: 1.0, subdivisions: 1, amplitude: 1.0 }, 0).is_err());
        assert!(generate_primitive(&Primitive::Cuboid { size: [1.0, -1.0, 1.0] }, 0).is_err());
    }

    #[test]
    fn all_primitives_watertight_and_positive() {
        let kinds = [
            Primitive::Cube { edge: 1.5 },
            Primitive::Cuboid { size: [1.0, 2.0, 0.5] },
            Primitive::Icosphere { radius: 2.0, subdivisions: 2 },
            Primitive::Cylinder { radius: 0.5, height: 3.0, segments: 12 },
            Primitive::Blob { radius: 1.0, subdivisions: 2, amplitude: 0.4 },
        ];
        for k in &kinds {
            let m = generate_primitive(k, 1).unwrap();
            assert!(is_watertight(&m), "{k:?}");
            assert!(signed_volume(&m) > 0.0, "{k:?}");
        }
    }
}
