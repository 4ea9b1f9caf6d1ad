//! Ray-cast depth rendering and per-frame vertex visibility.
//!
//! A [`Renderer`] wraps a world with a BVH over its triangles. Depth images
//! store the camera-frame z of the nearest hit along each pixel-center ray
//! (rays are scaled so the ray parameter *is* the z-depth). A brute-force
//! all-triangles path is kept alongside the BVH; both call the same
//! per-triangle intersection, so their results agree bit for bit.

use rayon::prelude::*;

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::image::{DepthImage, RgbImage};
use crate::world::ColonWorld;
use crate::Vec3;

/// No-hit sentinel for per-pixel triangle ids.
pub const NO_TRIANGLE: u32 = u32::MAX;

/// Ray-triangle hit: `t` is the ray parameter, `(u, v)` the barycentric
/// coordinates of the hit within the triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: u32,
    pub u: f64,
    pub v: f64,
}

/// Moeller-Trumbore intersection; returns `(t, u, v)` for `t > t_min`.
#[inline]
fn ray_triangle(origin: Vec3, dir: Vec3, v0: Vec3, v1: Vec3, v2: Vec3, t_min: f64) -> Option<(f64, f64, f64)> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - v0;
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    (t > t_min).then_some((t, u, v))
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: Vec3) {
        self.min = self.min.inf(&p);
        self.max = self.max.sup(&p);
    }

    /// Slab test against a ray; returns the entry parameter if the box is
    /// hit before `t_max`.
    #[inline]
    fn entry(&self, origin: Vec3, inv_dir: Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for axis in 0..3 {
            let lo = (self.min[axis] - origin[axis]) * inv_dir[axis];
            let hi = (self.max[axis] - origin[axis]) * inv_dir[axis];
            let (near, far) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: Aabb,
    /// Leaf: `[start, start+count)` into the triangle order; inner: child index
    /// (second child is `child + 1`).
    child_or_start: u32,
    count: u32,
}

const LEAF_SIZE: usize = 4;

/// Bounding volume hierarchy over a mesh's triangles.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(triangles: &[[Vec3; 3]]) -> Self {
        let order: Vec<u32> = (0..triangles.len() as u32).collect();
        let centroids: Vec<Vec3> = triangles
            .iter()
            .map(|t| (t[0] + t[1] + t[2]) / 3.0)
            .collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len());
        nodes.push(BvhNode {
            bounds: Aabb::empty(),
            child_or_start: 0,
            count: 0,
        });
        let mut bvh = Self { nodes, order };
        bvh.split(0, 0, triangles.len(), triangles, &centroids);
        bvh
    }

    fn split(
        &mut self,
        node: usize,
        start: usize,
        len: usize,
        triangles: &[[Vec3; 3]],
        centroids: &[Vec3],
    ) {
        let mut bounds = Aabb::empty();
        for &tid in &self.order[start..start + len] {
            for p in &triangles[tid as usize] {
                bounds.grow(*p);
            }
        }
        self.nodes[node].bounds = bounds;

        if len <= LEAF_SIZE {
            self.nodes[node].child_or_start = start as u32;
            self.nodes[node].count = len as u32;
            return;
        }

        let mut cb = Aabb::empty();
        for &tid in &self.order[start..start + len] {
            cb.grow(centroids[tid as usize]);
        }
        let extent = cb.max - cb.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let mid = len / 2;
        self.order[start..start + len].select_nth_unstable_by(mid, |&a, &b| {
            centroids[a as usize][axis]
                .partial_cmp(&centroids[b as usize][axis])
                .unwrap()
                .then(a.cmp(&b))
        });

        let left = self.nodes.len();
        self.nodes.push(BvhNode {
            bounds: Aabb::empty(),
            child_or_start: 0,
            count: 0,
        });
        self.nodes.push(BvhNode {
            bounds: Aabb::empty(),
            child_or_start: 0,
            count: 0,
        });
        self.nodes[node].child_or_start = left as u32;
        self.nodes[node].count = 0;
        self.split(left, start, mid, triangles, centroids);
        self.split(left + 1, start + mid, len - mid, triangles, centroids);
    }
}

/// Set of mesh vertex ids with cheap union/intersection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSet {
    bits: Vec<u64>,
    universe: usize,
}

impl VertexSet {
    pub fn empty(universe: usize) -> Self {
        Self {
            bits: vec![0; universe.div_ceil(64)],
            universe,
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn insert(&mut self, id: u32) {
        self.bits[id as usize / 64] |= 1 << (id as usize % 64);
    }

    pub fn contains(&self, id: u32) -> bool {
        self.bits[id as usize / 64] & (1 << (id as usize % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union_with(&mut self, other: &VertexSet) {
        assert_eq!(self.universe, other.universe);
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        assert_eq!(self.universe, other.universe);
        VertexSet {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| a & b)
                .collect(),
            universe: self.universe,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.universe as u32).filter(|&i| self.contains(i))
    }

    pub fn from_indices(universe: usize, ids: impl IntoIterator<Item = u32>) -> Self {
        let mut s = Self::empty(universe);
        for i in ids {
            s.insert(i);
        }
        s
    }
}

/// Direction used for the point-in-mesh parity test; deliberately skew to
/// axis-aligned geometry.
const PARITY_DIR: Vec3 = Vec3::new(0.563_377_7, 0.715_199_1, 0.414_213_5);

/// World plus acceleration structure and shading tables.
pub struct Renderer<'a> {
    world: &'a ColonWorld,
    bvh: Bvh,
    vertex_normals: Vec<Vec3>,
}

impl<'a> Renderer<'a> {
    pub fn new(world: &'a ColonWorld) -> Self {
        let mesh = &world.mesh;
        let triangles: Vec<[Vec3; 3]> = (0..mesh.face_count()).map(|f| mesh.triangle(f)).collect();
        let bvh = Bvh::build(&triangles);

        let mut normals = vec![Vec3::zeros(); mesh.vertex_count()];
        for f in mesh.faces() {
            let [a, b, c] = [
                mesh.vertices()[f[0] as usize],
                mesh.vertices()[f[1] as usize],
                mesh.vertices()[f[2] as usize],
            ];
            let n = (b - a).cross(&(c - a)); // area-weighted
            for &i in f {
                normals[i as usize] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }

        Self {
            world,
            bvh,
            vertex_normals: normals,
        }
    }

    pub fn world(&self) -> &ColonWorld {
        self.world
    }

    /// Nearest intersection along `origin + t * dir` via the BVH.
    pub fn cast(&self, origin: Vec3, dir: Vec3) -> Option<Hit> {
        self.cast_with_min(origin, dir, 1e-12)
    }

    fn cast_with_min(&self, origin: Vec3, dir: Vec3, t_min: f64) -> Option<Hit> {
        let mesh = &self.world.mesh;
        let inv_dir = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<Hit> = None;
        let mut best_t = f64::INFINITY;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.bvh.nodes[stack[sp] as usize];
            if node.bounds.entry(origin, inv_dir, best_t).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.child_or_start as usize;
                for &tid in &self.bvh.order[start..start + node.count as usize] {
                    let [v0, v1, v2] = mesh.triangle(tid as usize);
                    if let Some((t, u, v)) = ray_triangle(origin, dir, v0, v1, v2, t_min) {
                        if t < best_t {
                            best_t = t;
                            best = Some(Hit {
                                t,
                                triangle: tid,
                                u,
                                v,
                            });
                        }
                    }
                }
            } else {
                let child = node.child_or_start;
                stack[sp] = child;
                stack[sp + 1] = child + 1;
                sp += 2;
            }
        }
        best
    }

    /// Nearest intersection by testing every triangle; the reference path.
    pub fn cast_brute(&self, origin: Vec3, dir: Vec3) -> Option<Hit> {
        let mesh = &self.world.mesh;
        let mut best: Option<Hit> = None;
        let mut best_t = f64::INFINITY;
        for tid in 0..mesh.face_count() {
            let [v0, v1, v2] = mesh.triangle(tid);
            if let Some((t, u, v)) = ray_triangle(origin, dir, v0, v1, v2, 1e-12) {
                if t < best_t {
                    best_t = t;
                    best = Some(Hit {
                        t,
                        triangle: tid as u32,
                        u,
                        v,
                    });
                }
            }
        }
        best
    }

    /// Parity test: odd intersection count means the point is inside.
    pub fn is_inside(&self, point: Vec3) -> bool {
        let mesh = &self.world.mesh;
        let mut count = 0usize;
        for tid in 0..mesh.face_count() {
            let [v0, v1, v2] = mesh.triangle(tid);
            if ray_triangle(point, PARITY_DIR, v0, v1, v2, 1e-12).is_some() {
                count += 1;
            }
        }
        count % 2 == 1
    }

    fn pixel_dir_world(pose: &CameraPose, k: &CameraIntrinsics, row: u32, col: u32) -> Vec3 {
        pose.rotation.transpose() * k.pixel_ray(row, col)
    }

    /// Per-pixel z-depth of the nearest surface along pixel-center rays.
    /// Pixels whose ray escapes get the sentinel 0.
    pub fn render_depth(&self, pose: &CameraPose, k: &CameraIntrinsics) -> Result<DepthImage> {
        Ok(self.render_hits(pose, k)?.0)
    }

    /// Depth render without the pose-containment check, for meshes that do
    /// not bound a solid (test plates, partial walls).
    pub fn render_depth_open(&self, pose: &CameraPose, k: &CameraIntrinsics) -> DepthImage {
        self.render_hits_open(pose, k).0
    }

    /// Depth plus the id of the triangle hit at each pixel.
    pub fn render_hits(
        &self,
        pose: &CameraPose,
        k: &CameraIntrinsics,
    ) -> Result<(DepthImage, Vec<u32>)> {
        if !self.is_inside(pose.position) {
            return Err(Error::PoseOutsideMesh);
        }
        Ok(self.render_hits_open(pose, k))
    }

    fn render_hits_open(&self, pose: &CameraPose, k: &CameraIntrinsics) -> (DepthImage, Vec<u32>) {
        let w = k.width as usize;
        let mut depth = vec![0.0f64; w * k.height as usize];
        let mut tris = vec![NO_TRIANGLE; w * k.height as usize];
        depth
            .par_chunks_mut(w)
            .zip(tris.par_chunks_mut(w))
            .enumerate()
            .for_each(|(row, (drow, trow))| {
                for col in 0..k.width {
                    let dir = Self::pixel_dir_world(pose, k, row as u32, col);
                    if let Some(hit) = self.cast(pose.position, dir) {
                        // dir has unit camera-z, so the ray parameter is the z-depth
                        drow[col as usize] = hit.t;
                        trow[col as usize] = hit.triangle;
                    }
                }
            });
        (
            DepthImage::new(k.width, k.height, depth, *k).expect("hit depths are finite"),
            tris,
        )
    }

    /// Brute-force depth render, for oracle comparisons.
    pub fn render_depth_brute(&self, pose: &CameraPose, k: &CameraIntrinsics) -> Result<DepthImage> {
        if !self.is_inside(pose.position) {
            return Err(Error::PoseOutsideMesh);
        }
        let w = k.width as usize;
        let mut depth = vec![0.0f64; w * k.height as usize];
        depth.par_chunks_mut(w).enumerate().for_each(|(row, drow)| {
            for col in 0..k.width {
                let dir = Self::pixel_dir_world(pose, k, row as u32, col);
                if let Some(hit) = self.cast_brute(pose.position, dir) {
                    drow[col as usize] = hit.t;
                }
            }
        });
        Ok(DepthImage::new(k.width, k.height, depth, *k)?)
    }

    /// Flat debug shading: smooth interpolated normals lit by a fixed world
    /// light over a low-frequency albedo. View-independent by construction
    /// so that reprojected frames of a static world photometrically agree.
    /// No contract beyond being deterministic and smooth.
    pub fn render_rgb(
        &self,
        pose: &CameraPose,
        k: &CameraIntrinsics,
    ) -> Result<(RgbImage, DepthImage)> {
        if !self.is_inside(pose.position) {
            return Err(Error::PoseOutsideMesh);
        }
        let light = Vec3::new(0.267_261_2, -0.534_522_4, 0.801_783_7); // fixed, unit
        let mesh = &self.world.mesh;
        let w = k.width as usize;
        let mut depth = vec![0.0f64; w * k.height as usize];
        let mut rgb = vec![[0.0f32; 3]; w * k.height as usize];
        depth
            .par_chunks_mut(w)
            .zip(rgb.par_chunks_mut(w))
            .enumerate()
            .for_each(|(row, (drow, crow))| {
                for col in 0..k.width {
                    let dir = Self::pixel_dir_world(pose, k, row as u32, col);
                    if let Some(hit) = self.cast(pose.position, dir) {
                        drow[col as usize] = hit.t;
                        let f = mesh.faces()[hit.triangle as usize];
                        let n = self.vertex_normals[f[0] as usize] * (1.0 - hit.u - hit.v)
                            + self.vertex_normals[f[1] as usize] * hit.u
                            + self.vertex_normals[f[2] as usize] * hit.v;
                        let n = n.try_normalize(1e-12).unwrap_or(Vec3::z());
                        let shade = 0.35 + 0.65 * (0.5 + 0.5 * n.dot(&light));
                        let p = pose.position + dir * hit.t;
                        crow[col as usize] = [
                            (albedo(p, 0) * shade) as f32,
                            (albedo(p, 1) * shade) as f32,
                            (albedo(p, 2) * shade) as f32,
                        ];
                    }
                }
            });
        Ok((
            RgbImage::new(k.width, k.height, rgb)?,
            DepthImage::new(k.width, k.height, depth, *k)?,
        ))
    }

    /// Set of vertices that appear unoccluded in the rendered view.
    ///
    /// A vertex is visible iff (a) its camera-frame z is positive, (b) its
    /// projection falls on the image, and (c) its depth does not exceed the
    /// rendered depth in the surrounding 2x2 pixel cell by more than the
    /// relative `depth_tol` (the cell maximum supplies half-pixel slack on
    /// slanted walls).
    pub fn visible_vertices(
        &self,
        pose: &CameraPose,
        k: &CameraIntrinsics,
        depth_tol: f64,
    ) -> Result<VertexSet> {
        let depth = self.render_depth(pose, k)?;
        Ok(self.visible_vertices_with_depth(pose, k, depth_tol, &depth))
    }

    /// Same as [`Renderer::visible_vertices`] but reusing a rendered depth
    /// image for the occlusion test.
    pub fn visible_vertices_with_depth(
        &self,
        pose: &CameraPose,
        k: &CameraIntrinsics,
        depth_tol: f64,
        depth: &DepthImage,
    ) -> VertexSet {
        let mesh = &self.world.mesh;
        let mut set = VertexSet::empty(mesh.vertex_count());
        for (i, &vtx) in mesh.vertices().iter().enumerate() {
            let p_cam = pose.to_camera(vtx);
            let Some((u, v)) = k.project(p_cam) else {
                continue;
            };
            if k.nearest_pixel(u, v).is_none() {
                continue;
            }
            let mut d_ref = 0.0f64;
            let mut any = false;
            let c0 = u.floor() as i64;
            let r0 = v.floor() as i64;
            for (r, c) in [(r0, c0), (r0, c0 + 1), (r0 + 1, c0), (r0 + 1, c0 + 1)] {
                if r < 0 || c < 0 || r >= k.height as i64 || c >= k.width as i64 {
                    continue;
                }
                let d = depth.at(r as u32, c as u32);
                if d > 0.0 {
                    d_ref = d_ref.max(d);
                    any = true;
                }
            }
            if !any || p_cam.z <= d_ref * (1.0 + depth_tol) {
                set.insert(i as u32);
            }
        }
        set
    }
}

/// Low-frequency world-position albedo, one phase per channel.
fn albedo(p: Vec3, channel: usize) -> f64 {
    let (dir, period, phase, base) = match channel {
        0 => (Vec3::new(1.0, 0.4, 0.2), 7.3, 0.0, 0.80),
        1 => (Vec3::new(-0.3, 1.0, 0.5), 5.9, 1.3, 0.62),
        _ => (Vec3::new(0.2, -0.5, 1.0), 9.1, 2.1, 0.55),
    };
    let s = (p.dot(&dir) * std::f64::consts::TAU / period + phase).sin();
    base + 0.15 * s
}
