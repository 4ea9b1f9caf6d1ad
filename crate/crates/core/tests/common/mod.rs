//! Oracles and trajectory builders shared by the integration suites.
//!
//! Everything here recomputes results through routes that are independent
//! of the library paths they check.

use colocov_core::camera::{CameraIntrinsics, CameraPose};
use colocov_core::coverage::{maximal_visible_set, CoverageParams};
use colocov_core::gen::CameraTrajectory;
use colocov_core::image::DepthImage;
use colocov_core::render::{Renderer, VertexSet, NO_TRIANGLE};
use colocov_core::world::ColonWorld;
use colocov_core::Vec3;

/// Coverage via the per-pixel route: a vertex counts as seen when one of
/// its incident triangles is hit by some pixel ray in some frame. This is
/// the rendering-union oracle the vertex-projection path is checked
/// against.
pub fn pixel_union_coverage(
    renderer: &Renderer,
    trajectory: &CameraTrajectory,
    k: &CameraIntrinsics,
    params: &CoverageParams,
) -> f64 {
    let world = renderer.world();
    let mesh = &world.mesh;
    let mut seen = VertexSet::empty(mesh.vertex_count());
    for pose in &trajectory.poses {
        let (_, tris) = renderer.render_hits(pose, k).expect("pose inside mesh");
        for tid in tris {
            if tid != NO_TRIANGLE {
                for &v in &mesh.faces()[tid as usize] {
                    seen.insert(v);
                }
            }
        }
    }
    let p0 = trajectory.poses.first().unwrap().position;
    let p1 = trajectory.poses.last().unwrap().position;
    let maximal = maximal_visible_set(world, p0, p1, params).expect("non-empty window");
    let clipped = seen.intersection(&maximal);
    world.area_of(clipped.iter()) / world.area_of(maximal.iter())
}

fn transported_frames(world: &ColonWorld, arcs: &[f64]) -> Vec<(Vec3, Vec3, Vec3)> {
    let mut frames = Vec::with_capacity(arcs.len());
    let mut normal: Option<Vec3> = None;
    for &arc in arcs {
        let tangent = world.lumen.tangent_at(arc).unwrap();
        let n = match normal {
            None => {
                let candidate = if tangent.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
                (candidate - tangent * candidate.dot(&tangent)).normalize()
            }
            Some(prev) => (prev - tangent * prev.dot(&tangent))
                .try_normalize(1e-12)
                .unwrap_or_else(|| {
                    let candidate = if tangent.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
                    (candidate - tangent * candidate.dot(&tangent)).normalize()
                }),
        };
        normal = Some(n);
        frames.push((tangent, n, tangent.cross(&n)));
    }
    frames
}

/// Centerline pullback whose view direction spins around the lumen axis
/// while the tilt oscillates between looking down the tube and looking
/// back, so every wall patch eventually gets a near-radial view.
pub fn sweep_trajectory(
    world: &ColonWorld,
    frames: usize,
    start_arc: f64,
    end_arc: f64,
    spin_period: usize,
    fps: u32,
) -> CameraTrajectory {
    let arcs: Vec<f64> = (0..frames)
        .map(|i| start_arc + (end_arc - start_arc) * i as f64 / (frames - 1) as f64)
        .collect();
    let frames_axes = transported_frames(world, &arcs);
    let poses = arcs
        .iter()
        .zip(&frames_axes)
        .enumerate()
        .map(|(i, (&arc, &(t, n, b)))| {
            let spin = std::f64::consts::TAU * i as f64 / spin_period as f64;
            let tilt_deg = 70.0 + 45.0 * (std::f64::consts::TAU * i as f64 / (spin_period as f64 * 3.7)).sin();
            let tilt = f64::to_radians(tilt_deg);
            let radial = n * spin.cos() + b * spin.sin();
            let forward = t * tilt.cos() + radial * tilt.sin();
            let position = world.lumen.point_at(arc).unwrap();
            CameraPose::look_along(position, forward, t).unwrap()
        })
        .collect();
    CameraTrajectory { poses, fps }
}

/// Forward-looking centerline pullback without any spin; sees the distal
/// fold faces only.
pub fn forward_pullback(
    world: &ColonWorld,
    frames: usize,
    start_arc: f64,
    end_arc: f64,
    fps: u32,
) -> CameraTrajectory {
    let arcs: Vec<f64> = (0..frames)
        .map(|i| start_arc + (end_arc - start_arc) * i as f64 / (frames - 1) as f64)
        .collect();
    let frames_axes = transported_frames(world, &arcs);
    let poses = arcs
        .iter()
        .zip(&frames_axes)
        .map(|(&arc, &(t, n, _))| {
            let position = world.lumen.point_at(arc).unwrap();
            CameraPose::look_along(position, t, n).unwrap()
        })
        .collect();
    CameraTrajectory { poses, fps }
}

/// Camera parked close to the wall, staring at it for the whole segment.
pub fn wall_stare(world: &ColonWorld, arc: f64, frames: usize, fps: u32) -> CameraTrajectory {
    let tangent = world.lumen.tangent_at(arc).unwrap();
    let candidate = if tangent.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let radial = (candidate - tangent * candidate.dot(&tangent)).normalize();
    let center = world.lumen.point_at(arc).unwrap();
    let renderer = Renderer::new(world);
    let wall = renderer
        .cast(center, radial)
        .map(|hit| hit.t)
        .unwrap_or(1.0);
    let position = center + radial * (0.85 * wall);
    let pose = CameraPose::look_along(position, radial, tangent).unwrap();
    CameraTrajectory {
        poses: vec![pose; frames],
        fps,
    }
}

/// Exhaustive depth-order agreement over every ordered pixel pair.
pub fn exhaustive_dom(pred: &DepthImage, gt: &DepthImage) -> f64 {
    let n = pred.len();
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = gt.data[i] > gt.data[j];
            let r_hat = pred.data[i] > pred.data[j];
            agree += (r == r_hat) as usize;
            total += 1;
        }
    }
    agree as f64 / total as f64
}
