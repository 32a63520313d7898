//! Spherical camera rig: rings of cameras at fixed polar angles, evenly
//! spaced in azimuth, all looking at the origin.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::Point3;
use crate::{Error, Result};

pub const DEFAULT_POLAR_DEG: [f64; 3] = [-45.0, 0.0, 45.0];
pub const DEFAULT_VIEW_COUNT: usize = 75;
/// Camera distance as a multiple of the target's bounding-sphere radius.
pub const DEFAULT_RADIUS_MULT: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPose {
    pub view_index: usize,
    /// Elevation above the XY-plane, degrees in `[-90, 90]`.
    pub polar_deg: f64,
    /// Rotation about +Z, degrees in `[0, 360)`.
    pub azimuth_deg: f64,
    pub radius: f64,
}

/// Builds `total_count` poses split evenly over the polar rings. Indices run
/// ring-major, then by azimuth, so view subsets are reproducible.
pub fn generate_rig(polar_list: &[f64], total_count: usize, radius: f64) -> Result<Vec<ViewPose>> {
    if polar_list.is_empty() {
        return Err(Error::domain("polar angle list is empty"));
    }
    if total_count == 0 || !total_count.is_multiple_of(polar_list.len()) {
        return Err(Error::domain(format!(
            "view count {total_count} is not divisible by the {} polar rings",
            polar_list.len()
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain(format!("camera radius must be positive, got {radius}")));
    }
    if let Some(p) = polar_list.iter().find(|p| !(-90.0..=90.0).contains(*p)) {
        return Err(Error::domain(format!("polar angle {p} outside [-90, 90]")));
    }
    let per_ring = total_count / polar_list.len();
    let step = 360.0 / per_ring as f64;
    let mut poses = Vec::with_capacity(total_count);
    for &polar in polar_list {
        for j in 0..per_ring {
            poses.push(ViewPose { view_index: poses.len(), polar_deg: polar, azimuth_deg: j as f64 * step, radius });
        }
    }
    Ok(poses)
}

/// Spherical to Cartesian: `(r cos φ cos θ, r cos φ sin θ, r sin φ)`.
pub fn pose_to_position(pose: &ViewPose) -> Point3 {
    let (phi, theta) = (pose.polar_deg.to_radians(), pose.azimuth_deg.to_radians());
    let r = pose.radius;
    if pose.polar_deg.abs() == 90.0 {
        return [0.0, 0.0, r * pose.polar_deg.signum()];
    }
    [r * phi.cos() * theta.cos(), r * phi.cos() * theta.sin(), r * phi.sin()]
}

/// Camera up vector: +Z, except +X at the poles where +Z is parallel to the
/// viewing direction.
pub fn pose_up(pose: &ViewPose) -> Point3 {
    if pose.polar_deg.abs() == 90.0 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PoseRecord {
    view_index: usize,
    polar_deg: f64,
    azimuth_deg: f64,
    radius: f64,
    position: [f64; 3],
    look_at: [f64; 3],
    up: [f64; 3],
}

pub fn rig_to_json(poses: &[ViewPose]) -> Result<String> {
    if poses.is_empty() {
        return Err(Error::domain("refusing to export an empty rig"));
    }
    let records: Vec<PoseRecord> = poses
        .iter()
        .map(|p| PoseRecord {
            view_index: p.view_index,
            polar_deg: p.polar_deg,
            azimuth_deg: p.azimuth_deg,
            radius: p.radius,
            position: pose_to_position(p),
            look_at: [0.0; 3],
            up: pose_up(p),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&records)?)
}

/// Writes the pose file. Numbers are emitted in shortest round-trip form, so
/// re-import is exact.
pub fn export_rig(poses: &[ViewPose], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = rig_to_json(poses)?;
    fs::write(path, json + "\n").map_err(|e| Error::io(format!("writing poses {}", path.display()), e))
}

pub fn import_rig(path: impl AsRef<Path>) -> Result<Vec<ViewPose>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading poses {}", path.display()), e))?;
    let records: Vec<PoseRecord> = serde_json::from_str(&text)?;
    let mut seen = std::collections::HashSet::new();
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if !seen.insert(r.view_index) {
                return Err(Error::Schema {
                    field: format!("[{i}].view_index"),
                    msg: format!("duplicate view index {}", r.view_index),
                });
            }
            if !(r.radius > 0.0) {
                return Err(Error::Schema { field: format!("[{i}].radius"), msg: "must be positive".into() });
            }
            Ok(ViewPose {
                view_index: r.view_index,
                polar_deg: r.polar_deg,
                azimuth_deg: r.azimuth_deg,
                radius: r.radius,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rig_has_three_rings_of_25() {
        let rig = generate_rig(&DEFAULT_POLAR_DEG, 75, 2.5).unwrap();
        assert_eq!(rig.len(), 75);
        for (ring, &polar) in DEFAULT_POLAR_DEG.iter().enumerate() {
            let poses = &rig[ring * 25..(ring + 1) * 25];
            for (j, p) in poses.iter().enumerate() {
                assert_eq!(p.polar_deg, polar);
                assert_eq!(p.azimuth_deg, j as f64 * 14.4);
                assert_eq!(p.view_index, ring * 25 + j);
            }
        }
    }

    #[test]
    fn single_ring_of_four() {
        let rig = generate_rig(&[0.0], 4, 1.0).unwrap();
        let az: Vec<f64> = rig.iter().map(|p| p.azimuth_deg).collect();
        assert_eq!(az, vec![0.0, 90.0, 180.0, 270.0]);
    }

    #[test]
    fn indivisible_count_rejected() {
        assert!(generate_rig(&DEFAULT_POLAR_DEG, 74, 1.0).is_err());
        assert!(generate_rig(&DEFAULT_POLAR_DEG, 75, 0.0).is_err());
        assert!(generate_rig(&[], 75, 1.0).is_err());
    }

    #[test]
    fn positions() {
        let pose = |polar, az, r| ViewPose { view_index: 0, polar_deg: polar, azimuth_deg: az, radius: r };
        assert_eq!(pose_to_position(&pose(0.0, 0.0, 2.0)), [2.0, 0.0, 0.0]);
        assert_eq!(pose_to_position(&pose(90.0, 123.0, 1.0)), [0.0, 0.0, 1.0]);
        assert_eq!(pose_up(&pose(-90.0, 0.0, 1.0)), [1.0, 0.0, 0.0]);
        let p = pose_to_position(&pose(45.0, 90.0, 2f64.sqrt()));
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15 && (p[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn positions_on_sphere() {
        for p in generate_rig(&[-60.0, -10.0, 30.0, 80.0], 48, 3.7).unwrap() {
            let x = pose_to_position(&p);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            assert!((r - 3.7).abs() / 3.7 < 1e-12);
        }
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poses.json");
        let rig = generate_rig(&DEFAULT_POLAR_DEG, 75, 2.5 * 0.8660254037844386).unwrap();
        export_rig(&rig, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let raw: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
        assert_eq!(raw.len(), 75);
        assert_eq!(import_rig(&path).unwrap(), rig);
        assert!(export_rig(&[], &path).is_err());
    }
}
