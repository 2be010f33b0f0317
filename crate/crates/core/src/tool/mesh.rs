//! Tessellated cutting edge: generation, ASCII STL ingestion and
//! BVH-accelerated line intersection.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use super::{azimuth, CuttingEdge, Hit, ToolDefinition, ToolState, Vec3};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_TRIANGLES: usize = 5_000_000;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [Vec3; 3],
}

impl Triangle {
    pub fn new(a: Vec3, b: Vec3, c: Vec3) -> Self {
        Self { v: [a, b, c] }
    }

    fn area(&self) -> f64 {
        0.5 * (self.v[1] - self.v[0]).cross(&(self.v[2] - self.v[0])).norm()
    }

    fn centroid(&self) -> Vec3 {
        (self.v[0] + self.v[1] + self.v[2]) / 3.0
    }
}

#[derive(Debug, Clone)]
struct Node {
    min: Vec3,
    max: Vec3,
    // leaf: [start, end) into `order`; inner: children indices
    left: usize,
    right: usize,
    leaf: bool,
}

/// Triangle soup in the tool frame (axis +Z, tip at the origin, mm) with a
/// bounding volume hierarchy built once at construction.
#[derive(Debug, Clone)]
pub struct ToolMesh {
    triangles: Vec<Triangle>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    degenerate: usize,
}

impl ToolMesh {
    pub fn new(triangles: Vec<Triangle>) -> Self {
        let mut degenerate = 0;
        let triangles: Vec<Triangle> = triangles
            .into_iter()
            .filter(|t| {
                let ok = t.area() > 1e-18 && t.v.iter().all(|v| v.iter().all(|c| c.is_finite()));
                if !ok {
                    degenerate += 1;
                }
                ok
            })
            .collect();
        let mut mesh = Self {
            order: (0..triangles.len()).collect(),
            triangles,
            nodes: Vec::new(),
            degenerate,
        };
        if !mesh.triangles.is_empty() {
            let n = mesh.triangles.len();
            mesh.build(0, n);
        }
        mesh
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Number of zero-area or non-finite triangles dropped at construction.
    pub fn degenerate_count(&self) -> usize {
        self.degenerate
    }

    /// Axis-aligned bounding box of the whole mesh.
    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        self.nodes.first().map(|n| (n.min, n.max))
    }

    fn bounds(&self, start: usize, end: usize) -> (Vec3, Vec3) {
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            for v in &self.triangles[i].v {
                min = min.inf(v);
                max = max.sup(v);
            }
        }
        (min, max)
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let (min, max) = self.bounds(start, end);
        let idx = self.nodes.len();
        self.nodes.push(Node {
            min,
            max,
            left: start,
            right: end,
            leaf: true,
        });
        if end - start <= LEAF_SIZE {
            return idx;
        }
        let extent = max - min;
        let axis = extent.imax();
        let tris = &self.triangles;
        self.order[start..end].sort_by(|&a, &b| {
            tris[a].centroid()[axis]
                .partial_cmp(&tris[b].centroid()[axis])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mid = (start + end) / 2;
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        let node = &mut self.nodes[idx];
        node.left = left;
        node.right = right;
        node.leaf = false;
        idx
    }

    /// Nearest `t >= 0` of a local-frame line against the mesh.
    pub(crate) fn nearest(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if !slab(o, &inv, &node.min, &node.max, best) {
                continue;
            }
            if node.leaf {
                for &ti in &self.order[node.left..node.right] {
                    if let Some(t) = moller_trumbore(o, d, &self.triangles[ti]) {
                        if t >= 0.0 && t < best {
                            best = t;
                        }
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        best.is_finite().then_some(best)
    }
}

fn slab(o: &Vec3, inv: &Vec3, min: &Vec3, max: &Vec3, t_max: f64) -> bool {
    let mut lo = 0.0f64;
    let mut hi = t_max;
    for k in 0..3 {
        let pad = 1e-9;
        let mut t0 = (min[k] - pad - o[k]) * inv[k];
        let mut t1 = (max[k] + pad - o[k]) * inv[k];
        if t0.is_nan() || t1.is_nan() {
            // direction component is zero and origin lies on the slab plane
            continue;
        }
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        lo = lo.max(t0);
        hi = hi.min(t1);
        if lo > hi {
            return false;
        }
    }
    true
}

fn moller_trumbore(o: &Vec3, d: &Vec3, tri: &Triangle) -> Option<f64> {
    const EDGE_EPS: f64 = 1e-12;
    let e1 = tri.v[1] - tri.v[0];
    let e2 = tri.v[2] - tri.v[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    // grazing (line parallel to or inside the triangle plane) is not a hit
    if det.abs() <= 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri.v[0];
    let u = s.dot(&p) * inv;
    if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

/// Nearest intersection of a line with a tessellated cutter.
pub fn line_mesh_intersection(
    origin: &Vec3,
    dir: &Vec3,
    state: &ToolState,
    mesh: &ToolMesh,
) -> Option<Hit> {
    let frame = state.frame();
    let o = frame.to_local(origin);
    let d = frame.dir_to_local(dir);
    let t = mesh.nearest(&o, &d)?;
    Some(Hit {
        t,
        phi: azimuth(&(o + d * t)),
    })
}

fn arc_segments(angle: f64, radius: f64, chord_error: f64) -> usize {
    let step = 2.0 * (1.0 - chord_error / radius).clamp(-1.0, 1.0).acos();
    ((angle / step).ceil() as usize).max(2)
}

/// Tessellate the cutter surface of revolution with facets deviating at
/// most `chord_error` from the analytic surface. The profile arcs and the
/// azimuthal circles each get half of the budget.
pub fn mesh_tool(tool: &ToolDefinition, chord_error: f64, max_triangles: usize) -> Result<ToolMesh> {
    if !(chord_error > 0.0 && chord_error.is_finite()) {
        return Err(Error::domain("chord error must be positive"));
    }
    let sagitta = chord_error / 2.0;
    let big_r = tool.radius;
    let r = tool.corner_radius;
    let a = tool.ring_radius();

    // (rho, z) profile
    let (profile, closed): (Vec<(f64, f64)>, bool) = match tool.edge {
        CuttingEdge::FlatAndFillet => {
            let n = arc_segments(PI / 2.0, r, sagitta);
            let mut p = vec![(0.0, 0.0), (a, 0.0)];
            for k in 1..=n {
                let psi = (PI / 2.0) * k as f64 / n as f64;
                p.push((a + r * psi.sin(), r - r * psi.cos()));
            }
            p.push((big_r, tool.flute_height));
            p.push((0.0, tool.flute_height));
            (p, false)
        }
        CuttingEdge::CornerCircle => {
            let n = arc_segments(TAU, r, sagitta);
            let p = (0..n)
                .map(|k| {
                    let psi = TAU * k as f64 / n as f64;
                    (a + r * psi.sin(), r - r * psi.cos())
                })
                .collect();
            (p, true)
        }
    };
    let n_az = arc_segments(TAU, big_r, sagitta).max(3);
    let n_edges = if closed { profile.len() } else { profile.len() - 1 };
    let estimate = n_edges.saturating_mul(n_az).saturating_mul(2);
    if estimate > max_triangles {
        return Err(Error::Resource(format!(
            "tool mesh would need {estimate} triangles (cap {max_triangles})"
        )));
    }

    let ring = |(rho, z): (f64, f64), j: usize| -> Vec3 {
        let th = TAU * (j % n_az) as f64 / n_az as f64;
        Vec3::new(rho * th.cos(), rho * th.sin(), z)
    };
    let mut tris = Vec::with_capacity(estimate);
    for e in 0..n_edges {
        let p = profile[e];
        let q = profile[(e + 1) % profile.len()];
        for j in 0..n_az {
            let (p0, p1, q0, q1) = (ring(p, j), ring(p, j + 1), ring(q, j), ring(q, j + 1));
            if p.0 == 0.0 {
                tris.push(Triangle::new(p0, q0, q1));
            } else if q.0 == 0.0 {
                tris.push(Triangle::new(p0, p1, q0));
            } else {
                tris.push(Triangle::new(p0, p1, q1));
                tris.push(Triangle::new(p0, q1, q0));
            }
        }
    }
    Ok(ToolMesh::new(tris))
}

/// Parse an ASCII STL triangle soup. Facet normals are ignored.
pub fn parse_ascii_stl(text: &str, source: &str) -> Result<Vec<Triangle>> {
    let mut tris = Vec::new();
    let mut pending: Vec<Vec3> = Vec::with_capacity(3);
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        if tok.next() != Some("vertex") {
            continue;
        }
        let coords: Vec<f64> = tok
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: source.to_string(),
                line: lineno + 1,
                msg: format!("bad vertex coordinate: {e}"),
            })?;
        if coords.len() != 3 {
            return Err(Error::Parse {
                path: source.to_string(),
                line: lineno + 1,
                msg: format!("vertex needs 3 coordinates, got {}", coords.len()),
            });
        }
        pending.push(Vec3::new(coords[0], coords[1], coords[2]));
        if pending.len() == 3 {
            tris.push(Triangle::new(pending[0], pending[1], pending[2]));
            pending.clear();
        }
    }
    if !pending.is_empty() {
        return Err(Error::Parse {
            path: source.to_string(),
            line: text.lines().count(),
            msg: "trailing incomplete facet".into(),
        });
    }
    Ok(tris)
}

pub fn read_ascii_stl(path: &Path) -> Result<ToolMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(ToolMesh::new(parse_ascii_stl(&text, &path.display().to_string())?))
}

pub fn write_ascii_stl(mesh: &ToolMesh, name: &str) -> String {
    let mut out = format!("solid {name}\n");
    for t in mesh.triangles() {
        let n = (t.v[1] - t.v[0]).cross(&(t.v[2] - t.v[0])).normalize();
        let _ = writeln!(out, "  facet normal {} {} {}", n.x, n.y, n.z);
        out.push_str("    outer loop\n");
        for v in &t.v {
            let _ = writeln!(out, "      vertex {} {} {}", v.x, v.y, v.z);
        }
        out.push_str("    endloop\n  endfacet\n");
    }
    let _ = writeln!(out, "endsolid {name}");
    out
}
