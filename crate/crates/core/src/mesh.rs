//! Triangle surface mesh with a per-vertex area measure.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::Vec3;

/// Colon surface: triangle soup with a per-vertex surface measure.
///
/// `vertex_area[i]` is one third of the summed area of the triangles
/// incident to vertex `i`, so the vertex areas partition the total surface
/// area exactly.
#[derive(Debug, Clone)]
pub struct ColonMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    vertex_area: Vec<f64>,
}

impl ColonMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::InvalidMesh("empty vertex or face list".into()));
        }
        for v in &vertices {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(Error::NonFinite("mesh vertex"));
            }
        }
        let n = vertices.len() as u32;
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex out of range"
                )));
            }
            if triangle_area(vertices[f[0] as usize], vertices[f[1] as usize], vertices[f[2] as usize])
                == 0.0
            {
                return Err(Error::InvalidMesh(format!("face {fi} has zero area")));
            }
        }

        let mut vertex_area = vec![0.0; vertices.len()];
        for f in &faces {
            let a = triangle_area(
                vertices[f[0] as usize],
                vertices[f[1] as usize],
                vertices[f[2] as usize],
            ) / 3.0;
            for &i in f {
                vertex_area[i as usize] += a;
            }
        }

        Ok(Self {
            vertices,
            faces,
            vertex_area,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_area(&self) -> &[f64] {
        &self.vertex_area
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn total_area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                triangle_area(
                    self.vertices[f[0] as usize],
                    self.vertices[f[1] as usize],
                    self.vertices[f[2] as usize],
                )
            })
            .sum()
    }

    /// True when every edge is shared by exactly two faces with opposite
    /// orientation, i.e. the mesh bounds a solid.
    pub fn is_watertight(&self) -> bool {
        // (uses, signed direction sum) per undirected edge
        let mut edges: HashMap<(u32, u32), (u32, i32)> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                let e = edges.entry((a.min(b), a.max(b))).or_insert((0, 0));
                e.0 += 1;
                e.1 += if a < b { 1 } else { -1 };
            }
        }
        edges.values().all(|&(uses, dir)| uses == 2 && dir == 0)
    }

    /// Euclidean distance from `point` to the surface.
    pub fn distance_to_surface(&self, point: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for f in &self.faces {
            let d = point_triangle_distance_sq(
                point,
                self.vertices[f[0] as usize],
                self.vertices[f[1] as usize],
                self.vertices[f[2] as usize],
            );
            best = best.min(d);
        }
        best.sqrt()
    }
}

pub(crate) fn triangle_area(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Squared distance from a point to a triangle (closest-point classification
/// over the triangle's Voronoi regions).
pub(crate) fn point_triangle_distance_sq(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;

    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm_squared();
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm_squared();
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm_squared();
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - ab * v - ac * w).norm_squared()
}
