#![allow(dead_code)]

use realscale::geometry::TriangleMesh;

/// Volume by column-wise ray parity on an `n x n x n` grid spanning the
/// mesh's bounding box. Each column through a cell center is intersected with
/// every triangle; cells whose centers fall between alternate crossings count
/// as inside. Independent of the signed-volume formula.
pub fn voxel_volume(mesh: &TriangleMesh, n: usize) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in &mesh.vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    // pad by an irrational-ish fraction so cell centers avoid symmetric edges
    for k in 0..3 {
        let pad = (hi[k] - lo[k]) * 1e-3 * std::f64::consts::SQRT_2;
        lo[k] -= pad;
        hi[k] += pad;
    }
    let h = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64, (hi[2] - lo[2]) / n as f64];

    let mut inside = 0usize;
    let mut hits = Vec::new();
    for i in 0..n {
        let x = lo[0] + (i as f64 + 0.5) * h[0];
        for j in 0..n {
            let y = lo[1] + (j as f64 + 0.5) * h[1];
            hits.clear();
            for f in &mesh.faces {
                let (a, b, c) = (mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
                if x < a[0].min(b[0]).min(c[0]) || x > a[0].max(b[0]).max(c[0]) {
                    continue;
                }
                if y < a[1].min(b[1]).min(c[1]) || y > a[1].max(b[1]).max(c[1]) {
                    continue;
                }
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                if det == 0.0 {
                    continue;
                }
                let u = ((x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y - a[1])) / det;
                let v = ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / det;
                if u < 0.0 || v < 0.0 || u + v > 1.0 {
                    continue;
                }
                hits.push(a[2] + u * (b[2] - a[2]) + v * (c[2] - a[2]));
            }
            hits.sort_by(f64::total_cmp);
            for pair in hits.chunks_exact(2) {
                let first = ((pair[0] - lo[2]) / h[2] - 0.5).ceil().max(0.0) as usize;
                let last = ((pair[1] - lo[2]) / h[2] - 0.5).floor();
                if last >= first as f64 {
                    inside += last as usize - first + 1;
                }
            }
        }
    }
    inside as f64 * h[0] * h[1] * h[2]
}

/// Naive metric implementations used as oracles.
pub mod naive {
    pub fn mae(e: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..g.len() {
            s += (e[i] - g[i]).abs();
        }
        s / g.len() as f64
    }

    pub fn mape(e: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..g.len() {
            s += ((e[i] - g[i]) / g[i]).abs();
        }
        100.0 * s / g.len() as f64
    }

    pub fn pearson(e: &[f64], g: &[f64]) -> f64 {
        let n = g.len() as f64;
        let (mut se, mut sg, mut see, mut sgg, mut seg) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..g.len() {
            se += e[i];
            sg += g[i];
        }
        let (me, mg) = (se / n, sg / n);
        for i in 0..g.len() {
            see += (e[i] - me) * (e[i] - me);
            sgg += (g[i] - mg) * (g[i] - mg);
            seg += (e[i] - me) * (g[i] - mg);
        }
        if see == 0.0 || sgg == 0.0 {
            0.0
        } else {
            seg / see.sqrt() / sgg.sqrt()
        }
    }

    pub fn r2(e: &[f64], g: &[f64]) -> f64 {
        let mg = g.iter().sum::<f64>() / g.len() as f64;
        let mut res = 0.0;
        let mut tot = 0.0;
        for i in 0..g.len() {
            res += (g[i] - e[i]).powi(2);
            tot += (g[i] - mg).powi(2);
        }
        1.0 - res / tot
    }

    pub fn cosine(e: &[f64], g: &[f64]) -> f64 {
        let mut d = 0.0;
        let mut ne = 0.0;
        let mut ng = 0.0;
        for i in 0..g.len() {
            d += e[i] * g[i];
            ne += e[i] * e[i];
            ng += g[i] * g[i];
        }
        d / (ne.sqrt() * ng.sqrt())
    }
}
