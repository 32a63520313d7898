//! ASCII OBJ and PLY readers, OBJ writer.
//!
//! Quads are fan-triangulated on load; larger polygons are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Point3, TriangleMesh};
use crate::{Error, Result};

/// Loads an ASCII `.obj` or `.ply` mesh, dispatching on the extension and
/// falling back to sniffing the `ply` magic line.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading mesh {}", path.display()), e))?;
    let is_ply = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("ply") => true,
        Some(ext) if ext.eq_ignore_ascii_case("obj") => false,
        _ => text.trim_start().starts_with("ply"),
    };
    if is_ply {
        parse_ply(&text, path)
    } else {
        parse_obj(&text, path)
    }
}

pub fn load_obj_str(text: &str) -> Result<TriangleMesh> {
    parse_obj(text, Path::new("<obj>"))
}

pub fn load_ply_str(text: &str) -> Result<TriangleMesh> {
    parse_ply(text, Path::new("<ply>"))
}

fn perr(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: PathBuf::from(path), line, msg: msg.into() }
}

/// Splits a polygon into triangles. Triangles pass through, quads become
/// `(a, b, c), (a, c, d)`.
fn triangulate(poly: &[usize]) -> std::result::Result<Vec<[usize; 3]>, String> {
    match *poly {
        [a, b, c] => Ok(vec![[a, b, c]]),
        [a, b, c, d] => Ok(vec![[a, b, c], [a, c, d]]),
        _ => Err(format!("unsupported polygon with {} vertices", poly.len())),
    }
}

fn push_faces(faces: &mut Vec<[usize; 3]>, poly: &[usize], n_vertices: usize, path: &Path, line: usize) -> Result<()> {
    if let Some(&bad) = poly.iter().find(|&&i| i >= n_vertices) {
        return Err(perr(path, line, format!("face index {} out of range ({} vertices)", bad + 1, n_vertices)));
    }
    for tri in triangulate(poly).map_err(|m| perr(path, line, m))? {
        if tri[0] == tri[1] && tri[1] == tri[2] {
            return Err(perr(path, line, "degenerate face"));
        }
        faces.push(tri);
    }
    Ok(())
}

fn parse_floats(tokens: &[&str], path: &Path, line: usize) -> Result<Point3> {
    if tokens.len() < 3 {
        return Err(perr(path, line, "vertex needs three coordinates"));
    }
    let mut p = [0.0; 3];
    for (k, t) in tokens.iter().take(3).enumerate() {
        p[k] = t.parse::<f64>().map_err(|_| perr(path, line, format!("bad coordinate {t:?}")))?;
        if !p[k].is_finite() {
            return Err(perr(path, line, "non-finite coordinate"));
        }
    }
    Ok(p)
}

fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let tokens: Vec<&str> = it.collect();
                vertices.push(parse_floats(&tokens, path, line_no)?);
            }
            Some("f") => {
                let mut poly = Vec::with_capacity(4);
                for tok in it {
                    // "i", "i/t", "i//n", "i/t/n"
                    let idx = tok.split('/').next().unwrap_or("");
                    let k: i64 = idx.parse().map_err(|_| perr(path, line_no, format!("bad face index {tok:?}")))?;
                    let resolved = match k {
                        0 => return Err(perr(path, line_no, "face index 0 is invalid in OBJ")),
                        k if k > 0 => (k - 1) as usize,
                        k => {
                            let back = (-k) as usize;
                            if back > vertices.len() {
                                return Err(perr(path, line_no, format!("relative face index {k} out of range")));
                            }
                            vertices.len() - back
                        }
                    };
                    poly.push(resolved);
                }
                push_faces(&mut faces, &poly, vertices.len(), path, line_no)?;
            }
            _ => {}
        }
    }
    // forward references are legal in OBJ, so re-check against the final count
    let mesh = TriangleMesh { vertices, faces };
    mesh.validate().map_err(|e| perr(path, 0, e.to_string()))?;
    Ok(mesh)
}

fn parse_ply(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(perr(path, 1, "missing 'ply' magic")),
    }

    struct Element {
        name: String,
        count: usize,
        props: Vec<String>,
    }
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some((n, line)) = lines.next() else {
            return Err(perr(path, 0, "unterminated PLY header"));
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(perr(path, n, format!("unsupported PLY format {fmt:?}")));
                }
            }
            ["element", name, count] => {
                let count = count.parse().map_err(|_| perr(path, n, format!("bad element count {count:?}")))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            ["property", "list", _, _, name] | ["property", _, name] => {
                let el = elements.last_mut().ok_or_else(|| perr(path, n, "property before any element"))?;
                el.props.push(name.to_string());
            }
            ["end_header"] => break,
            _ => {}
        }
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let Some((n, line)) = lines.next() else {
                return Err(perr(path, 0, format!("unexpected end of file in element {:?}", el.name)));
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let mut p = [0.0f64; 3];
                    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
                        let col = el
                            .props
                            .iter()
                            .position(|p| p == axis)
                            .ok_or_else(|| perr(path, n, format!("vertex element lacks {axis}")))?;
                        let tok = tokens.get(col).ok_or_else(|| perr(path, n, "short vertex record"))?;
                        p[k] = tok.parse().map_err(|_| perr(path, n, format!("bad coordinate {tok:?}")))?;
                        if !p[k].is_finite() {
                            return Err(perr(path, n, "non-finite coordinate"));
                        }
                    }
                    vertices.push(p);
                }
                "face" => {
                    let count: usize =
                        tokens.first().and_then(|t| t.parse().ok()).ok_or_else(|| perr(path, n, "bad face record"))?;
                    if tokens.len() < 1 + count {
                        return Err(perr(path, n, "short face record"));
                    }
                    let poly = tokens[1..1 + count]
                        .iter()
                        .map(|t| t.parse::<usize>().map_err(|_| perr(path, n, format!("bad face index {t:?}"))))
                        .collect::<Result<Vec<_>>>()?;
                    push_faces(&mut faces, &poly, vertices.len(), path, n)?;
                }
                _ => {}
            }
        }
    }
    Ok(TriangleMesh { vertices, faces })
}

/// Formats with 9 significant digits, without exponent for ordinary ranges.
fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 20);
    for p in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", fmt_sig9(p[0]), fmt_sig9(p[1]), fmt_sig9(p[2]));
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_obj(mesh)).map_err(|e| Error::io(format!("writing mesh {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_primitive, signed_volume, Primitive};

    const CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 0 1 0
v 1 1 0
v 0 0 1
v 1 0 1
v 0 1 1
v 1 1 1
f 1 5 7
f 1 7 3
f 2 4 8
f 2 8 6
f 1 2 6
f 1 6 5
f 3 7 8
f 3 8 4
f 1 3 4
f 1 4 2
f 5 6 8
f 5 8 7
";

    #[test]
    fn parses_cube_obj() {
        let m = load_obj_str(CUBE_OBJ).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.faces.len(), 12);
        assert!((signed_volume(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_index_names_line() {
        let text = CUBE_OBJ.replace("f 5 8 7", "f 5 8 9");
        match load_obj_str(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 21),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn slash_and_negative_indices() {
        let m = load_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn rejects_pentagons_and_degenerates() {
        let base = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nv 2 2 0\n";
        assert!(load_obj_str(&format!("{base}f 1 2 3 4 5\n")).is_err());
        assert!(load_obj_str(&format!("{base}f 2 2 2\n")).is_err());
    }

    #[test]
    fn ply_quad_is_fan_triangulated() {
        let text = "ply
format ascii 1.0
element vertex 4
property float x
property float y
property float z
element face 1
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
1 1 0
0 1 0
4 0 1 2 3
";
        let m = load_ply_str(text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn ply_rejects_binary_and_bad_index() {
        let bin = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(load_ply_str(bin).is_err());
        let bad = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n";
        match load_ply_str(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 13),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ply_with_extra_properties() {
        let text =
            "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 3\nproperty float nx\nproperty float x\n\
property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n\
9 0 0 0\n9 1 0 0\n9 0 1 0\n3 0 1 2\n";
        let m = load_ply_str(text).unwrap();
        assert_eq!(m.vertices[1], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn obj_write_has_nine_significant_digits() {
        assert_eq!(fmt_sig9(1.0), "1.00000000");
        assert_eq!(fmt_sig9(-0.123456789123), "-0.123456789");
        assert_eq!(fmt_sig9(12345.6789012), "12345.6789");
        assert_eq!(fmt_sig9(0.0), "0");
    }

    #[test]
    fn obj_round_trip_preserves_volume() {
        let m = generate_primitive(&Primitive::Blob { radius: 1.0, subdivisions: 2, amplitude: 0.3 }, 5).unwrap();
        let back = load_obj_str(&write_obj(&m)).unwrap();
        assert_eq!(back.faces, m.faces);
        let (a, b) = (signed_volume(&m), signed_volume(&back));
        assert!((a - b).abs() / a < 1e-7);
    }
}
