//! Labeled segment datasets: trajectory slicing, per-segment export, and a
//! content-hashed manifest.
//!
//! An exported dataset is a tree of per-segment directories, each holding
//! the segment trajectory, camera intrinsics, coverage report, per-frame
//! coverage vectors and (optionally strided) depth frames. `manifest.txt`
//! at the root lists every file as `<fnv1a64-hex> <bytes> <path>`; exports
//! with identical seeds are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::camera::CameraIntrinsics;
use crate::coverage::{
    maximal_visible_set, report_from_sets, single_frame_coverage_vector_with_depth, CoverageClass,
    CoverageParams, CoverageReport,
};
use crate::error::{Error, Result};
use crate::gen::{generate_colon, generate_trajectory, CameraTrajectory, ColonGenSpec, TrajectorySpec};
use crate::io;
use crate::render::{Renderer, VertexSet};

/// 64-bit FNV-1a: offset 0xcbf29ce484222325, prime 0x100000001b3.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Consecutive non-overlapping frame ranges of `seconds * fps` frames;
/// the trailing remainder is dropped.
pub fn segment_frame_ranges(frame_count: usize, fps: u32, seconds: f64) -> Result<Vec<Range<usize>>> {
    if fps == 0 || !(seconds > 0.0) {
        return Err(Error::InvalidParam("fps and seconds must be positive".into()));
    }
    let frames = seconds * fps as f64;
    let rounded = frames.round();
    if (frames - rounded).abs() > 1e-6 || rounded < 1.0 {
        return Err(Error::InvalidParam(
            "seconds * fps must be a positive integer".into(),
        ));
    }
    let len = rounded as usize;
    if frame_count < len {
        return Err(Error::InvalidParam(format!(
            "trajectory of {frame_count} frames is shorter than one {len}-frame segment"
        )));
    }
    Ok((0..frame_count / len)
        .map(|i| i * len..(i + 1) * len)
        .collect())
}

/// Frame ranges for a trajectory, using its own frame rate.
pub fn segment_trajectory(traj: &CameraTrajectory, seconds: f64) -> Result<Vec<Range<usize>>> {
    segment_frame_ranges(traj.len(), traj.fps, seconds)
}

/// One labeled segment: provenance, coverage, and the per-frame coverage
/// vectors (one row per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub world_ref: String,
    pub frame_start: usize,
    /// Exclusive.
    pub frame_end: usize,
    pub fps: u32,
    pub coverage: f64,
    pub class_label: CoverageClass,
    pub coverage_vector_per_frame: Vec<Vec<f64>>,
    pub world_seed: u64,
    pub trajectory_seed: u64,
}

impl SegmentRecord {
    pub fn encode_meta(&self) -> String {
        format!(
            "world_ref={}\nframe_start={}\nframe_end={}\nfps={}\nseed_world={}\nseed_trajectory={}\ncoverage={}\nclass={}\n",
            self.world_ref,
            self.frame_start,
            self.frame_end,
            self.fps,
            self.world_seed,
            self.trajectory_seed,
            self.coverage,
            self.class_label.as_str(),
        )
    }

    pub fn encode_frame_vectors(&self) -> String {
        let mut out = String::new();
        for row in &self.coverage_vector_per_frame {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn decode(meta: &str, frame_vectors: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for line in meta.lines() {
            if let Some((k, v)) = line.split_once('=') {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |key: &str| -> Result<&String> {
            map.get(key)
                .ok_or_else(|| Error::BadHeader(format!("missing key {key}")))
        };
        let rows: Vec<Vec<f64>> = frame_vectors
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(ln, line)| {
                line.split_whitespace()
                    .map(|v| {
                        v.parse::<f64>().map_err(|_| Error::Parse {
                            line: ln + 1,
                            msg: "bad float".into(),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let record = Self {
            world_ref: get("world_ref")?.clone(),
            frame_start: get("frame_start")?
                .parse()
                .map_err(|_| Error::BadHeader("bad frame_start".into()))?,
            frame_end: get("frame_end")?
                .parse()
                .map_err(|_| Error::BadHeader("bad frame_end".into()))?,
            fps: get("fps")?
                .parse()
                .map_err(|_| Error::BadHeader("bad fps".into()))?,
            coverage: get("coverage")?
                .parse()
                .map_err(|_| Error::BadHeader("bad coverage".into()))?,
            class_label: CoverageClass::parse(get("class")?)?,
            coverage_vector_per_frame: rows,
            world_seed: get("seed_world")?
                .parse()
                .map_err(|_| Error::BadHeader("bad seed_world".into()))?,
            trajectory_seed: get("seed_trajectory")?
                .parse()
                .map_err(|_| Error::BadHeader("bad seed_trajectory".into()))?,
        };
        if record.frame_end <= record.frame_start {
            return Err(Error::BadHeader("empty frame range".into()));
        }
        if !(0.0..=1.0).contains(&record.coverage) {
            return Err(Error::BadHeader("coverage outside [0, 1]".into()));
        }
        Ok(record)
    }
}

/// Segment coverage report plus per-frame coverage vectors in one pass
/// (each frame is rendered once and shared by both computations).
pub fn segment_report_with_vectors(
    renderer: &Renderer,
    segment: &CameraTrajectory,
    k: &CameraIntrinsics,
    params: &CoverageParams,
    vector_params: &[CoverageParams],
) -> Result<(CoverageReport, Vec<Vec<f64>>)> {
    if segment.is_empty() {
        return Err(Error::InvalidParam("empty trajectory".into()));
    }
    let world = renderer.world();
    let per_frame: Vec<(VertexSet, Vec<f64>)> = segment
        .poses
        .par_iter()
        .map(|pose| -> Result<(VertexSet, Vec<f64>)> {
            let depth = renderer.render_depth(pose, k)?;
            let visible = renderer.visible_vertices_with_depth(pose, k, params.depth_tol, &depth);
            let vec =
                single_frame_coverage_vector_with_depth(renderer, pose, k, vector_params, &depth)?;
            Ok((visible, vec))
        })
        .collect::<Result<_>>()?;

    let mut actual = VertexSet::empty(world.mesh.vertex_count());
    let mut vectors = Vec::with_capacity(per_frame.len());
    for (set, vec) in per_frame {
        actual.union_with(&set);
        vectors.push(vec);
    }
    let p0 = segment.poses.first().unwrap().position;
    let p1 = segment.poses.last().unwrap().position;
    let maximal = maximal_visible_set(world, p0, p1, params)?;
    let report = report_from_sets(world, &actual, &maximal, *params)?;
    Ok((report, vectors))
}

/// Everything needed to synthesize and export a dataset.
#[derive(Debug, Clone)]
pub struct ExportConfig {
    pub out_dir: PathBuf,
    pub n_worlds: usize,
    pub segments_per_world: usize,
    pub seed: u64,
    pub fps: u32,
    pub segment_seconds: f64,
    pub camera: CameraIntrinsics,
    pub coverage: CoverageParams,
    /// Window margin pairs for the per-frame coverage vectors.
    pub vector_params: Vec<CoverageParams>,
    /// Template world; the seed is replaced per world.
    pub colon: ColonGenSpec,
    /// Template trajectory; seed, fps, duration and arc range are replaced.
    pub trajectory: TrajectorySpec,
    /// Write every n-th depth frame; 1 writes all frames.
    pub depth_stride: usize,
}

impl ExportConfig {
    pub fn new(out_dir: PathBuf) -> Self {
        Self {
            out_dir,
            n_worlds: 1,
            segments_per_world: 1,
            seed: 0,
            fps: 30,
            segment_seconds: 10.0,
            camera: CameraIntrinsics::endoscope_default(),
            coverage: CoverageParams::default(),
            vector_params: CoverageParams::single_frame_defaults(),
            colon: ColonGenSpec::default(),
            trajectory: TrajectorySpec::default(),
            depth_stride: 1,
        }
    }
}

/// Manifest entry: content hash, payload size, and the `/`-separated path
/// relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub hash: u64,
    pub bytes: u64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn encode(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{:016x} {} {}", e.hash, e.bytes, e.path);
        }
        out
    }

    pub fn decode(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, ' ');
            let hash = parts
                .next()
                .and_then(|h| u64::from_str_radix(h, 16).ok())
                .ok_or_else(|| Error::Parse {
                    line: ln + 1,
                    msg: "bad hash".into(),
                })?;
            let bytes = parts
                .next()
                .and_then(|b| b.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: ln + 1,
                    msg: "bad byte count".into(),
                })?;
            let path = parts
                .next()
                .ok_or_else(|| Error::Parse {
                    line: ln + 1,
                    msg: "missing path".into(),
                })?
                .to_string();
            entries.push(ManifestEntry { hash, bytes, path });
        }
        Ok(Self { entries })
    }
}

/// Deterministic per-world seed derivation (splitmix-style mixing).
fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    let mut z = root
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn emit(root: &Path, rel: &str, bytes: &[u8], entries: &mut Vec<ManifestEntry>) -> Result<()> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, bytes)?;
    entries.push(ManifestEntry {
        hash: fnv1a64(bytes),
        bytes: bytes.len() as u64,
        path: rel.to_string(),
    });
    Ok(())
}

/// Generate `n_worlds` worlds, carve each trajectory into segments, and
/// write the labeled dataset. Returns the manifest (also written to
/// `manifest.txt` under the output root).
pub fn export_dataset(cfg: &ExportConfig) -> Result<Manifest> {
    if cfg.depth_stride == 0 {
        return Err(Error::InvalidParam("depth_stride must be >= 1".into()));
    }
    if cfg.n_worlds == 0 || cfg.segments_per_world == 0 {
        return Err(Error::InvalidParam("nothing to export".into()));
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let mut entries = Vec::new();

    for w in 0..cfg.n_worlds {
        let world_seed = derive_seed(cfg.seed, 1, w as u64);
        let trajectory_seed = derive_seed(cfg.seed, 2, w as u64);
        let colon_spec = ColonGenSpec {
            seed: world_seed,
            ..cfg.colon
        };
        let world = generate_colon(&colon_spec)?;
        let renderer = Renderer::new(&world);
        let total = world.lumen.total_length();
        let traj_spec = TrajectorySpec {
            seed: trajectory_seed,
            duration_s: cfg.segments_per_world as f64 * cfg.segment_seconds,
            fps: cfg.fps,
            start_arclen: total * 0.93,
            end_arclen: total * 0.07,
            ..cfg.trajectory
        };
        let traj = generate_trajectory(&world, &traj_spec)?;
        let ranges = segment_frame_ranges(traj.len(), cfg.fps, cfg.segment_seconds)?;
        let world_ref = format!("world_{w:03}");

        emit(
            &cfg.out_dir,
            &format!("{world_ref}/mesh.ccvw"),
            &io::encode_mesh_binary(&world.mesh),
            &mut entries,
        )?;
        emit(
            &cfg.out_dir,
            &format!("{world_ref}/lumen.ccvw"),
            &io::encode_lumen_binary(&world.lumen),
            &mut entries,
        )?;

        for (si, range) in ranges.iter().take(cfg.segments_per_world).enumerate() {
            let segment = CameraTrajectory {
                poses: traj.poses[range.clone()].to_vec(),
                fps: cfg.fps,
            };
            let (report, vectors) = segment_report_with_vectors(
                &renderer,
                &segment,
                &cfg.camera,
                &cfg.coverage,
                &cfg.vector_params,
            )?;
            let record = SegmentRecord {
                world_ref: world_ref.clone(),
                frame_start: range.start,
                frame_end: range.end,
                fps: cfg.fps,
                coverage: report.coverage,
                class_label: report.class_label,
                coverage_vector_per_frame: vectors,
                world_seed,
                trajectory_seed,
            };
            let seg_dir = format!("{world_ref}/segment_{si:04}");
            emit(
                &cfg.out_dir,
                &format!("{seg_dir}/trajectory.txt"),
                io::encode_trajectory(&segment).as_bytes(),
                &mut entries,
            )?;
            emit(
                &cfg.out_dir,
                &format!("{seg_dir}/intrinsics.txt"),
                io::encode_intrinsics(&cfg.camera).as_bytes(),
                &mut entries,
            )?;
            emit(
                &cfg.out_dir,
                &format!("{seg_dir}/coverage.txt"),
                io::encode_coverage_report(&report).as_bytes(),
                &mut entries,
            )?;
            emit(
                &cfg.out_dir,
                &format!("{seg_dir}/segment.txt"),
                record.encode_meta().as_bytes(),
                &mut entries,
            )?;
            emit(
                &cfg.out_dir,
                &format!("{seg_dir}/frame_coverage.txt"),
                record.encode_frame_vectors().as_bytes(),
                &mut entries,
            )?;
            for (fi, pose) in segment.poses.iter().enumerate().step_by(cfg.depth_stride) {
                let depth = renderer.render_depth(pose, &cfg.camera)?;
                emit(
                    &cfg.out_dir,
                    &format!("{seg_dir}/depth/{fi:05}.ccdi"),
                    &io::encode_depth(&depth),
                    &mut entries,
                )?;
            }
        }
    }

    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest { entries };
    fs::write(cfg.out_dir.join("manifest.txt"), manifest.encode())?;
    Ok(manifest)
}

/// Read a segment record back from its directory.
pub fn read_segment_record(dir: &Path) -> Result<SegmentRecord> {
    let meta = fs::read_to_string(dir.join("segment.txt"))?;
    let vectors = fs::read_to_string(dir.join("frame_coverage.txt"))?;
    SegmentRecord::decode(&meta, &vectors)
}

/// Re-hash every file listed in `manifest.txt`; any mismatch or missing
/// file is an error.
pub fn verify_manifest(root: &Path) -> Result<Manifest> {
    let manifest = Manifest::decode(&fs::read_to_string(root.join("manifest.txt"))?)?;
    for entry in &manifest.entries {
        let bytes = fs::read(root.join(&entry.path))?;
        if bytes.len() as u64 != entry.bytes || fnv1a64(&bytes) != entry.hash {
            return Err(Error::HashMismatch {
                path: entry.path.clone(),
            });
        }
    }
    Ok(manifest)
}
