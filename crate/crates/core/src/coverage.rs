//! Surface-coverage computation.
//!
//! For a trajectory with endpoint positions `p0`, `p1`, the *maximal* set is
//! every vertex whose lumen arc parameter falls inside the window
//! `[min + delta0, max + delta1]` spanned by the endpoint arc parameters.
//! The *actual* set is the union over frames of the vertices visible in the
//! rendered views. Coverage is the surface-area ratio of the two, with the
//! actual set clipped to the window so the ratio stays in `[0, 1]`; the
//! unclipped ratio is reported alongside.

use rayon::prelude::*;

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::gen::CameraTrajectory;
use crate::render::{Renderer, VertexSet};
use crate::world::ColonWorld;
use crate::Vec3;

/// Window margins and the occlusion tolerance used for visibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageParams {
    /// Margin past the shallow endpoint: surface immediately beside the
    /// camera is outside its field of view.
    pub delta0: f64,
    /// Margin past the deep endpoint: the deepest frame sees beyond it.
    pub delta1: f64,
    /// Relative depth tolerance of the per-vertex occlusion test.
    pub depth_tol: f64,
}

impl Default for CoverageParams {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            delta1: 4.0,
            depth_tol: 0.005,
        }
    }
}

impl CoverageParams {
    pub fn new(delta0: f64, delta1: f64) -> Result<Self> {
        let params = Self {
            delta0,
            delta1,
            ..Self::default()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 >= 0.0 && self.delta1 >= 0.0) {
            return Err(Error::InvalidParam("window margins must be >= 0".into()));
        }
        if !(self.depth_tol > 0.0) {
            return Err(Error::InvalidParam("depth_tol must be > 0".into()));
        }
        Ok(())
    }

    /// The three margin pairs evaluated by the per-frame coverage vector:
    /// (1, 3), (1, 4) and (1, 6).
    pub fn single_frame_defaults() -> Vec<CoverageParams> {
        [(1.0, 3.0), (1.0, 4.0), (1.0, 6.0)]
            .into_iter()
            .map(|(d0, d1)| CoverageParams {
                delta0: d0,
                delta1: d1,
                ..CoverageParams::default()
            })
            .collect()
    }
}

/// Three-way coverage label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageClass {
    MostlyCovered,
    PartiallyCovered,
    MostlyNotCovered,
}

impl CoverageClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MostlyCovered => "mostly_covered",
            Self::PartiallyCovered => "partially_covered",
            Self::MostlyNotCovered => "mostly_not_covered",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mostly_covered" => Ok(Self::MostlyCovered),
            "partially_covered" => Ok(Self::PartiallyCovered),
            "mostly_not_covered" => Ok(Self::MostlyNotCovered),
            other => Err(Error::InvalidParam(format!("unknown class label {other:?}"))),
        }
    }
}

/// Map a coverage fraction to its class: `[0, 0.4)` mostly-not,
/// `[0.4, 0.8)` partial, `[0.8, 1]` mostly covered.
pub fn classify(coverage: f64) -> Result<CoverageClass> {
    if !(0.0..=1.0).contains(&coverage) {
        return Err(Error::InvalidParam(format!(
            "coverage {coverage} outside [0, 1]"
        )));
    }
    Ok(if coverage < 0.4 {
        CoverageClass::MostlyNotCovered
    } else if coverage < 0.8 {
        CoverageClass::PartiallyCovered
    } else {
        CoverageClass::MostlyCovered
    })
}

/// Coverage of one trajectory segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// Area ratio with the actual set clipped to the maximal window.
    pub coverage: f64,
    /// Unclipped area ratio; may exceed 1 for deep-looking cameras.
    pub coverage_raw: f64,
    /// Vertex-count ratio, clipped, as a secondary figure.
    pub count_coverage: f64,
    /// Unclipped actually-visible vertex count.
    pub n_actual: usize,
    pub n_maximal: usize,
    /// Clipped actually-visible surface area.
    pub area_actual: f64,
    pub area_maximal: f64,
    pub class_label: CoverageClass,
    pub params: CoverageParams,
}

/// Arc-length window implied by two endpoint positions.
pub fn maximal_window(
    world: &ColonWorld,
    p0: Vec3,
    p1: Vec3,
    params: &CoverageParams,
) -> Result<(f64, f64)> {
    params.validate()?;
    let a = world.closest_lumen_param(p0)?;
    let b = world.closest_lumen_param(p1)?;
    // orient so the window inequality is satisfiable regardless of the
    // direction of travel
    let (near, deep) = if a <= b { (a, b) } else { (b, a) };
    let lo = near + params.delta0;
    let hi = (deep + params.delta1).min(world.lumen.total_length());
    if lo > hi {
        return Err(Error::EmptyWindow { lo, hi });
    }
    Ok((lo, hi))
}

/// Vertices whose arc parameter falls inside the endpoint window.
pub fn maximal_visible_set(
    world: &ColonWorld,
    p0: Vec3,
    p1: Vec3,
    params: &CoverageParams,
) -> Result<VertexSet> {
    let (lo, hi) = maximal_window(world, p0, p1, params)?;
    let arcs = world.vertex_arc_params();
    Ok(VertexSet::from_indices(
        arcs.len(),
        arcs.iter()
            .enumerate()
            .filter(|(_, &l)| lo <= l && l <= hi)
            .map(|(i, _)| i as u32),
    ))
}

/// Union of per-frame visible vertex sets over a whole trajectory.
pub fn actual_visible_union(
    renderer: &Renderer,
    trajectory: &CameraTrajectory,
    k: &CameraIntrinsics,
    params: &CoverageParams,
) -> Result<VertexSet> {
    if trajectory.is_empty() {
        return Err(Error::InvalidParam("empty trajectory".into()));
    }
    params.validate()?;
    let n = renderer.world().mesh.vertex_count();
    trajectory
        .poses
        .par_iter()
        .map(|pose| renderer.visible_vertices(pose, k, params.depth_tol))
        .try_reduce(
            || VertexSet::empty(n),
            |mut acc, set| {
                acc.union_with(&set);
                Ok(acc)
            },
        )
}

/// Assemble a report from precomputed actual/maximal sets.
pub fn report_from_sets(
    world: &ColonWorld,
    actual: &VertexSet,
    maximal: &VertexSet,
    params: CoverageParams,
) -> Result<CoverageReport> {
    let area_maximal = world.area_of(maximal.iter());
    let n_maximal = maximal.count();
    if n_maximal == 0 || area_maximal <= 0.0 {
        return Err(Error::EmptyMaximalSet);
    }
    let clipped = actual.intersection(maximal);
    let area_actual = world.area_of(clipped.iter());
    let coverage = area_actual / area_maximal;
    let coverage_raw = world.area_of(actual.iter()) / area_maximal;
    let count_coverage = clipped.count() as f64 / n_maximal as f64;
    Ok(CoverageReport {
        coverage,
        coverage_raw,
        count_coverage,
        n_actual: actual.count(),
        n_maximal,
        area_actual,
        area_maximal,
        class_label: classify(coverage.clamp(0.0, 1.0))?,
        params,
    })
}

/// Coverage of a trajectory segment: rendered visibility union over the
/// maximal window spanned by the first and last camera positions.
pub fn segment_coverage(
    renderer: &Renderer,
    trajectory: &CameraTrajectory,
    k: &CameraIntrinsics,
    params: &CoverageParams,
) -> Result<CoverageReport> {
    if trajectory.is_empty() {
        return Err(Error::InvalidParam("empty trajectory".into()));
    }
    let world = renderer.world();
    let p0 = trajectory.poses.first().unwrap().position;
    let p1 = trajectory.poses.last().unwrap().position;
    let maximal = maximal_visible_set(world, p0, p1, params)?;
    let actual = actual_visible_union(renderer, trajectory, k, params)?;
    report_from_sets(world, &actual, &maximal, *params)
}

/// Per-frame coverage under several window margins; the ground truth a
/// per-frame predictor regresses. Entries are clamped to `[0, 1]`.
pub fn single_frame_coverage_vector(
    renderer: &Renderer,
    pose: &CameraPose,
    k: &CameraIntrinsics,
    params_list: &[CoverageParams],
) -> Result<Vec<f64>> {
    let depth = renderer.render_depth(pose, k)?;
    single_frame_coverage_vector_with_depth(renderer, pose, k, params_list, &depth)
}

/// [`single_frame_coverage_vector`] against an already rendered depth image.
pub fn single_frame_coverage_vector_with_depth(
    renderer: &Renderer,
    pose: &CameraPose,
    k: &CameraIntrinsics,
    params_list: &[CoverageParams],
    depth: &crate::image::DepthImage,
) -> Result<Vec<f64>> {
    if params_list.is_empty() {
        return Err(Error::InvalidParam("empty parameter list".into()));
    }
    let world = renderer.world();
    let mut entries = Vec::with_capacity(params_list.len());
    let mut visible_cache: Vec<(u64, f64)> = Vec::new(); // (depth_tol bits, area)
    for params in params_list {
        params.validate()?;
        let maximal = maximal_visible_set(world, pose.position, pose.position, params)?;
        let area_maximal = world.area_of(maximal.iter());
        if maximal.count() == 0 || area_maximal <= 0.0 {
            return Err(Error::EmptyMaximalSet);
        }
        let key = params.depth_tol.to_bits();
        let area_actual = match visible_cache.iter().find(|(k2, _)| *k2 == key) {
            Some((_, a)) => *a,
            None => {
                let set = renderer.visible_vertices_with_depth(pose, k, params.depth_tol, depth);
                let a = world.area_of(set.iter());
                visible_cache.push((key, a));
                a
            }
        };
        entries.push((area_actual / area_maximal).min(1.0));
    }
    Ok(entries)
}
