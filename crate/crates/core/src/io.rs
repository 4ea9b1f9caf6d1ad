//! File formats.
//!
//! Text formats are line oriented and round-trip f64 values exactly
//! (trajectories print 17 significant digits; other writers use the
//! shortest-exact form). Binary formats are little-endian with a 16-byte
//! section header: 4-byte magic, u16 version, u16 record kind, u32 record
//! count, u32 reserved. Geometry files use magic `CCVW`; depth images use
//! `CCDI` and RGB images `CCRI` with the image header carrying width and
//! height instead of a count.
//!
//! Every format has an `encode_*`/`decode_*` pair working on bytes plus
//! `write_*`/`read_*` wrappers on paths, so callers can hash exactly what
//! lands on disk.

use std::fs;
use std::path::Path;

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::coverage::{classify, CoverageClass, CoverageParams, CoverageReport};
use crate::error::{Error, Result};
use crate::gen::CameraTrajectory;
use crate::image::{DepthImage, RgbImage};
use crate::lumen::{CurveKind, LumenCurve};
use crate::mesh::ColonMesh;
use crate::{Mat3, Vec3};

pub const GEOMETRY_MAGIC: &[u8; 4] = b"CCVW";
pub const DEPTH_MAGIC: &[u8; 4] = b"CCDI";
pub const RGB_MAGIC: &[u8; 4] = b"CCRI";
pub const FORMAT_VERSION: u16 = 1;

/// Record kinds inside `CCVW` geometry containers.
pub mod record_kind {
    pub const VERTICES: u16 = 1;
    pub const FACES: u16 = 2;
    pub const LUMEN_CATMULL_ROM: u16 = 3;
    pub const LUMEN_POLYLINE: u16 = 4;
}

// ---------------------------------------------------------------------------
// mesh text format: `v x y z` and `f i j k` (1-based indices)

pub fn encode_mesh_text(mesh: &ColonMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    out
}

pub fn decode_mesh_text(text: &str) -> Result<ColonMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let [x, y, z] = parse_three_f64(ln, &mut parts)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut idx = [0u32; 3];
                for slot in &mut idx {
                    let raw: u64 = parts
                        .next()
                        .ok_or_else(|| parse_err(ln, "face needs three indices"))?
                        .parse()
                        .map_err(|_| parse_err(ln, "bad face index"))?;
                    if raw == 0 {
                        return Err(parse_err(ln, "face indices are 1-based"));
                    }
                    *slot = (raw - 1) as u32;
                }
                faces.push(idx);
            }
            Some(other) => {
                return Err(parse_err(ln, &format!("unknown record {other:?}")));
            }
            None => {}
        }
    }
    ColonMesh::new(vertices, faces)
}

pub fn write_mesh_text(path: &Path, mesh: &ColonMesh) -> Result<()> {
    Ok(fs::write(path, encode_mesh_text(mesh))?)
}

pub fn read_mesh_text(path: &Path) -> Result<ColonMesh> {
    decode_mesh_text(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// lumen text format: `l x y z` records in order

pub fn encode_lumen_text(lumen: &LumenCurve) -> String {
    let mut out = String::new();
    for p in lumen.control_points() {
        out.push_str(&format!("l {} {} {}\n", p.x, p.y, p.z));
    }
    out
}

/// Text lumen files carry only control points; they decode to the default
/// Catmull-Rom representation.
pub fn decode_lumen_text(text: &str) -> Result<LumenCurve> {
    let mut points = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("l") => {
                let [x, y, z] = parse_three_f64(ln, &mut parts)?;
                points.push(Vec3::new(x, y, z));
            }
            Some(other) => return Err(parse_err(ln, &format!("unknown record {other:?}"))),
            None => {}
        }
    }
    LumenCurve::catmull_rom(points)
}

pub fn write_lumen_text(path: &Path, lumen: &LumenCurve) -> Result<()> {
    Ok(fs::write(path, encode_lumen_text(lumen))?)
}

pub fn read_lumen_text(path: &Path) -> Result<LumenCurve> {
    decode_lumen_text(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// binary geometry container

fn push_section_header(out: &mut Vec<u8>, kind: u16, count: u32) {
    out.extend_from_slice(GEOMETRY_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
}

struct SectionReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

struct Section {
    kind: u16,
    count: u32,
    payload_start: usize,
}

impl<'a> SectionReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    fn next(&mut self, payload_bytes_per_record: usize) -> Result<Option<Section>> {
        if self.offset == self.bytes.len() {
            return Ok(None);
        }
        if self.bytes.len() - self.offset < 16 {
            return Err(Error::BadHeader("truncated section header".into()));
        }
        let h = &self.bytes[self.offset..self.offset + 16];
        if &h[0..4] != GEOMETRY_MAGIC {
            return Err(Error::BadHeader("bad geometry magic".into()));
        }
        let version = u16::from_le_bytes([h[4], h[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::BadHeader(format!("unsupported version {version}")));
        }
        let kind = u16::from_le_bytes([h[6], h[7]]);
        let count = u32::from_le_bytes([h[8], h[9], h[10], h[11]]);
        let payload_start = self.offset + 16;
        let payload_len = count as usize * payload_bytes_per_record;
        if self.bytes.len() < payload_start + payload_len {
            return Err(Error::BadHeader("truncated section payload".into()));
        }
        self.offset = payload_start + payload_len;
        Ok(Some(Section {
            kind,
            count,
            payload_start,
        }))
    }
}

fn read_f32_triples(bytes: &[u8], start: usize, count: u32) -> Vec<Vec3> {
    (0..count as usize)
        .map(|i| {
            let o = start + i * 12;
            let f = |j: usize| {
                f32::from_le_bytes([bytes[o + j], bytes[o + j + 1], bytes[o + j + 2], bytes[o + j + 3]])
                    as f64
            };
            Vec3::new(f(0), f(4), f(8))
        })
        .collect()
}

/// Vertices and control points are stored as packed 32-bit floats, face
/// indices as packed 32-bit unsigned integers; all records are 12 bytes.
pub fn encode_mesh_binary(mesh: &ColonMesh) -> Vec<u8> {
    let mut out = Vec::new();
    push_section_header(&mut out, record_kind::VERTICES, mesh.vertex_count() as u32);
    for v in mesh.vertices() {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    push_section_header(&mut out, record_kind::FACES, mesh.face_count() as u32);
    for f in mesh.faces() {
        for i in f {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}

pub fn decode_mesh_binary(bytes: &[u8]) -> Result<ColonMesh> {
    let mut reader = SectionReader::new(bytes);
    let mut vertices = None;
    let mut faces = None;
    while let Some(section) = reader.next(12)? {
        match section.kind {
            record_kind::VERTICES => {
                vertices = Some(read_f32_triples(bytes, section.payload_start, section.count));
            }
            record_kind::FACES => {
                faces = Some(
                    (0..section.count as usize)
                        .map(|i| {
                            let o = section.payload_start + i * 12;
                            let idx = |j: usize| {
                                u32::from_le_bytes([
                                    bytes[o + j],
                                    bytes[o + j + 1],
                                    bytes[o + j + 2],
                                    bytes[o + j + 3],
                                ])
                            };
                            [idx(0), idx(4), idx(8)]
                        })
                        .collect::<Vec<_>>(),
                );
            }
            other => return Err(Error::BadHeader(format!("unexpected record kind {other}"))),
        }
    }
    match (vertices, faces) {
        (Some(v), Some(f)) => ColonMesh::new(v, f),
        _ => Err(Error::BadHeader("mesh container missing a section".into())),
    }
}

pub fn encode_lumen_binary(lumen: &LumenCurve) -> Vec<u8> {
    let kind = match lumen.kind() {
        CurveKind::CatmullRom => record_kind::LUMEN_CATMULL_ROM,
        CurveKind::Polyline => record_kind::LUMEN_POLYLINE,
    };
    let mut out = Vec::new();
    push_section_header(&mut out, kind, lumen.control_points().len() as u32);
    for p in lumen.control_points() {
        for c in [p.x, p.y, p.z] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_lumen_binary(bytes: &[u8]) -> Result<LumenCurve> {
    let mut reader = SectionReader::new(bytes);
    let section = reader
        .next(12)?
        .ok_or_else(|| Error::BadHeader("empty lumen container".into()))?;
    let points = read_f32_triples(bytes, section.payload_start, section.count);
    match section.kind {
        record_kind::LUMEN_CATMULL_ROM => LumenCurve::catmull_rom(points),
        record_kind::LUMEN_POLYLINE => LumenCurve::polyline(points),
        other => Err(Error::BadHeader(format!("unexpected record kind {other}"))),
    }
}

pub fn write_mesh_binary(path: &Path, mesh: &ColonMesh) -> Result<()> {
    Ok(fs::write(path, encode_mesh_binary(mesh))?)
}

pub fn read_mesh_binary(path: &Path) -> Result<ColonMesh> {
    decode_mesh_binary(&fs::read(path)?)
}

pub fn write_lumen_binary(path: &Path, lumen: &LumenCurve) -> Result<()> {
    Ok(fs::write(path, encode_lumen_binary(lumen))?)
}

pub fn read_lumen_binary(path: &Path) -> Result<LumenCurve> {
    decode_lumen_binary(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// trajectory text format: one frame per line,
// `t r00 r01 r02 r10 r11 r12 r20 r21 r22 px py pz`, 17 significant digits

pub fn encode_trajectory(traj: &CameraTrajectory) -> String {
    let mut out = String::new();
    for (i, pose) in traj.poses.iter().enumerate() {
        let t = traj.frame_time(i);
        let r = &pose.rotation;
        let p = &pose.position;
        let vals = [
            t,
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            p.x,
            p.y,
            p.z,
        ];
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_trajectory(text: &str) -> Result<CameraTrajectory> {
    let mut poses = Vec::new();
    let mut times = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| parse_err(ln, "bad float")))
            .collect::<Result<_>>()?;
        if vals.len() != 13 {
            return Err(parse_err(ln, "expected 13 values per frame"));
        }
        times.push(vals[0]);
        let rotation = Mat3::new(
            vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7], vals[8], vals[9],
        );
        poses.push(CameraPose::new(
            rotation,
            Vec3::new(vals[10], vals[11], vals[12]),
        )?);
    }
    if poses.is_empty() {
        return Err(Error::BadHeader("empty trajectory file".into()));
    }
    let fps = if times.len() >= 2 {
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::BadHeader("non-increasing frame times".into()));
        }
        (1.0 / dt).round().max(1.0) as u32
    } else {
        30
    };
    Ok(CameraTrajectory { poses, fps })
}

pub fn write_trajectory(path: &Path, traj: &CameraTrajectory) -> Result<()> {
    Ok(fs::write(path, encode_trajectory(traj))?)
}

pub fn read_trajectory(path: &Path) -> Result<CameraTrajectory> {
    decode_trajectory(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// depth / rgb binary images

fn push_image_header(out: &mut Vec<u8>, magic: &[u8; 4], width: u32, height: u32) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
}

fn parse_image_header(bytes: &[u8], magic: &[u8; 4]) -> Result<(u32, u32)> {
    if bytes.len() < 16 {
        return Err(Error::BadHeader("truncated image header".into()));
    }
    if &bytes[0..4] != magic {
        return Err(Error::BadHeader(format!(
            "bad magic, expected {:?}",
            std::str::from_utf8(magic).unwrap()
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::BadHeader(format!("unsupported version {version}")));
    }
    let width = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
    let height = u32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]);
    Ok((width, height))
}

pub fn encode_depth(depth: &DepthImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + depth.data.len() * 4);
    push_image_header(&mut out, DEPTH_MAGIC, depth.width, depth.height);
    for v in &depth.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_depth(bytes: &[u8], intrinsics: CameraIntrinsics) -> Result<DepthImage> {
    let (width, height) = parse_image_header(bytes, DEPTH_MAGIC)?;
    let n = (width as usize) * (height as usize);
    if bytes.len() != 16 + 4 * n {
        return Err(Error::BadHeader("depth payload length mismatch".into()));
    }
    let data = (0..n)
        .map(|i| {
            let o = 16 + 4 * i;
            f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as f64
        })
        .collect();
    DepthImage::new(width, height, data, intrinsics)
}

/// Dimensions stored in a depth file, without decoding the payload.
pub fn peek_depth_dims(bytes: &[u8]) -> Result<(u32, u32)> {
    parse_image_header(bytes, DEPTH_MAGIC)
}

pub fn write_depth(path: &Path, depth: &DepthImage) -> Result<()> {
    Ok(fs::write(path, encode_depth(depth))?)
}

pub fn read_depth(path: &Path, intrinsics: CameraIntrinsics) -> Result<DepthImage> {
    decode_depth(&fs::read(path)?, intrinsics)
}

/// Read a depth file with nominal wide-angle intrinsics derived from its
/// own dimensions; metric evaluation does not consult intrinsics.
pub fn read_depth_nominal(path: &Path) -> Result<DepthImage> {
    let bytes = fs::read(path)?;
    let (w, h) = peek_depth_dims(&bytes)?;
    decode_depth(&bytes, CameraIntrinsics::from_hfov(w, h, 120.0)?)
}

pub fn encode_rgb(rgb: &RgbImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + rgb.data.len() * 12);
    push_image_header(&mut out, RGB_MAGIC, rgb.width, rgb.height);
    for px in &rgb.data {
        for c in px {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub fn decode_rgb(bytes: &[u8]) -> Result<RgbImage> {
    let (width, height) = parse_image_header(bytes, RGB_MAGIC)?;
    let n = (width as usize) * (height as usize);
    if bytes.len() != 16 + 12 * n {
        return Err(Error::BadHeader("rgb payload length mismatch".into()));
    }
    let data = (0..n)
        .map(|i| {
            let o = 16 + 12 * i;
            let f = |j: usize| {
                f32::from_le_bytes([bytes[o + j], bytes[o + j + 1], bytes[o + j + 2], bytes[o + j + 3]])
            };
            [f(0), f(4), f(8)]
        })
        .collect();
    RgbImage::new(width, height, data)
}

pub fn write_rgb(path: &Path, rgb: &RgbImage) -> Result<()> {
    Ok(fs::write(path, encode_rgb(rgb))?)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    decode_rgb(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// intrinsics text format: `fx fy x0 y0 width height`

pub fn encode_intrinsics(k: &CameraIntrinsics) -> String {
    format!(
        "{} {} {} {} {} {}\n",
        k.fx, k.fy, k.x0, k.y0, k.width, k.height
    )
}

pub fn decode_intrinsics(text: &str) -> Result<CameraIntrinsics> {
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .ok_or_else(|| Error::BadHeader("empty intrinsics file".into()))?;
    let vals: Vec<&str> = line.split_whitespace().collect();
    if vals.len() != 6 {
        return Err(parse_err(0, "expected `fx fy x0 y0 width height`"));
    }
    let f = |i: usize| -> Result<f64> { vals[i].parse().map_err(|_| parse_err(0, "bad float")) };
    let d = |i: usize| -> Result<u32> { vals[i].parse().map_err(|_| parse_err(0, "bad integer")) };
    CameraIntrinsics::new(f(0)?, f(1)?, f(2)?, f(3)?, d(4)?, d(5)?)
}

pub fn write_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<()> {
    Ok(fs::write(path, encode_intrinsics(k))?)
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    decode_intrinsics(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// coverage report text format: key=value block

pub fn encode_coverage_report(report: &CoverageReport) -> String {
    format!(
        "coverage={}\ncoverage_raw={}\ncount_coverage={}\nn_actual={}\nn_maximal={}\narea_actual={}\narea_maximal={}\nclass={}\ndelta0={}\ndelta1={}\ndepth_tol={}\n",
        report.coverage,
        report.coverage_raw,
        report.count_coverage,
        report.n_actual,
        report.n_maximal,
        report.area_actual,
        report.area_maximal,
        report.class_label.as_str(),
        report.params.delta0,
        report.params.delta1,
        report.params.depth_tol,
    )
}

pub fn decode_coverage_report(text: &str) -> Result<CoverageReport> {
    let mut map = std::collections::HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(ln, "expected key=value"))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    let get = |key: &str| -> Result<&String> {
        map.get(key)
            .ok_or_else(|| Error::BadHeader(format!("missing key {key}")))
    };
    let f = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::BadHeader(format!("bad float for {key}")))
    };
    let n = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::BadHeader(format!("bad integer for {key}")))
    };
    let report = CoverageReport {
        coverage: f("coverage")?,
        coverage_raw: f("coverage_raw")?,
        count_coverage: f("count_coverage")?,
        n_actual: n("n_actual")?,
        n_maximal: n("n_maximal")?,
        area_actual: f("area_actual")?,
        area_maximal: f("area_maximal")?,
        class_label: CoverageClass::parse(get("class")?)?,
        params: CoverageParams {
            delta0: f("delta0")?,
            delta1: f("delta1")?,
            depth_tol: f("depth_tol")?,
        },
    };
    // consistency: the stored class must match the stored coverage
    if classify(report.coverage.clamp(0.0, 1.0))? != report.class_label {
        return Err(Error::BadHeader("class label disagrees with coverage".into()));
    }
    Ok(report)
}

pub fn write_coverage_report(path: &Path, report: &CoverageReport) -> Result<()> {
    Ok(fs::write(path, encode_coverage_report(report))?)
}

pub fn read_coverage_report(path: &Path) -> Result<CoverageReport> {
    decode_coverage_report(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line: line + 1,
        msg: msg.into(),
    }
}

fn parse_three_f64<'a>(
    ln: usize,
    parts: &mut impl Iterator<Item = &'a str>,
) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for slot in &mut out {
        *slot = parts
            .next()
            .ok_or_else(|| parse_err(ln, "expected three coordinates"))?
            .parse()
            .map_err(|_| parse_err(ln, "bad float"))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate_colon, generate_trajectory, ColonGenSpec, TrajectorySpec};

    fn small_world_spec() -> ColonGenSpec {
        ColonGenSpec {
            seed: 3,
            length: 20.0,
            base_radius: 2.0,
            fold_amplitude: 0.3,
            fold_count: 6,
            bend_amplitude: 1.0,
            axial_segments: 24,
            radial_segments: 12,
        }
    }

    #[test]
    fn mesh_text_round_trip_is_value_exact() {
        let world = generate_colon(&small_world_spec()).unwrap();
        let text = encode_mesh_text(&world.mesh);
        let back = decode_mesh_text(&text).unwrap();
        assert_eq!(world.mesh.vertices(), back.vertices());
        assert_eq!(world.mesh.faces(), back.faces());
        // and the re-encoding is byte identical
        assert_eq!(text, encode_mesh_text(&back));
    }

    #[test]
    fn lumen_text_round_trip() {
        let world = generate_colon(&small_world_spec()).unwrap();
        let text = encode_lumen_text(&world.lumen);
        let back = decode_lumen_text(&text).unwrap();
        assert_eq!(world.lumen.control_points(), back.control_points());
        assert_eq!(world.lumen.kind(), back.kind());
    }

    #[test]
    fn binary_containers_round_trip_bit_exactly() {
        let world = generate_colon(&small_world_spec()).unwrap();
        let bytes = encode_mesh_binary(&world.mesh);
        let mesh = decode_mesh_binary(&bytes).unwrap();
        assert_eq!(bytes, encode_mesh_binary(&mesh));
        assert_eq!(world.mesh.faces(), mesh.faces());

        let lb = encode_lumen_binary(&world.lumen);
        let lumen = decode_lumen_binary(&lb).unwrap();
        assert_eq!(lb, encode_lumen_binary(&lumen));
        assert_eq!(world.lumen.kind(), lumen.kind());

        // single-byte corruption must fail to parse or change the payload
        let mut corrupted = bytes.clone();
        corrupted[0] ^= 0xff;
        assert!(decode_mesh_binary(&corrupted).is_err());
    }

    #[test]
    fn trajectory_round_trip_with_17_digits() {
        let world = generate_colon(&small_world_spec()).unwrap();
        let traj = generate_trajectory(
            &world,
            &TrajectorySpec {
                seed: 4,
                duration_s: 1.0,
                start_arclen: 15.0,
                end_arclen: 5.0,
                ..TrajectorySpec::default()
            },
        )
        .unwrap();
        let text = encode_trajectory(&traj);
        let back = decode_trajectory(&text).unwrap();
        assert_eq!(back.fps, traj.fps);
        assert_eq!(back.poses.len(), traj.poses.len());
        for (a, b) in traj.poses.iter().zip(&back.poses) {
            assert_eq!(a.position.x.to_bits(), b.position.x.to_bits());
            assert_eq!(a.position.y.to_bits(), b.position.y.to_bits());
            assert_eq!(a.position.z.to_bits(), b.position.z.to_bits());
            assert_eq!(a.rotation, b.rotation);
        }
        // each line: 13 fields, 17 significant digits each
        let first = text.lines().next().unwrap();
        assert_eq!(first.split_whitespace().count(), 13);
        let mantissa = first.split_whitespace().next().unwrap();
        assert!(mantissa.contains('e'));
    }

    #[test]
    fn depth_and_rgb_round_trip() {
        let k = CameraIntrinsics::new(8.0, 8.0, 3.5, 3.5, 8, 6).unwrap();
        let depth = DepthImage::new(
            8,
            6,
            (0..48)
                .map(|i| if i % 7 == 0 { 0.0 } else { (i as f32 * 0.37) as f64 })
                .collect(),
            k,
        )
        .unwrap();
        let bytes = encode_depth(&depth);
        let back = decode_depth(&bytes, k).unwrap();
        assert_eq!(depth.data, back.data);
        assert_eq!(bytes, encode_depth(&back));

        let rgb = RgbImage::new(
            4,
            3,
            (0..12)
                .map(|i| [i as f32 / 12.0, 0.5, 1.0 - i as f32 / 12.0])
                .collect(),
        )
        .unwrap();
        let rb = encode_rgb(&rgb);
        let back = decode_rgb(&rb).unwrap();
        assert_eq!(rgb, back);
        assert_eq!(rb, encode_rgb(&back));

        assert!(decode_depth(&rb, k).is_err());
    }

    #[test]
    fn intrinsics_round_trip() {
        let k = CameraIntrinsics::endoscope_default();
        let text = encode_intrinsics(&k);
        let back = decode_intrinsics(&text).unwrap();
        assert_eq!(k, back);
    }

    #[test]
    fn coverage_report_round_trip() {
        let report = CoverageReport {
            coverage: 0.8731,
            coverage_raw: 1.02,
            count_coverage: 0.869,
            n_actual: 4211,
            n_maximal: 4100,
            area_actual: 310.25,
            area_maximal: 355.4,
            class_label: CoverageClass::MostlyCovered,
            params: CoverageParams::default(),
        };
        let text = encode_coverage_report(&report);
        let back = decode_coverage_report(&text).unwrap();
        assert_eq!(report, back);
        for key in [
            "coverage=",
            "coverage_raw=",
            "n_actual=",
            "n_maximal=",
            "class=",
            "delta0=",
            "delta1=",
        ] {
            assert!(text.contains(key), "missing {key}");
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = decode_mesh_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 nope\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(decode_mesh_text("q 1 2 3\n").is_err());
        // zero face index is rejected (1-based)
        assert!(decode_mesh_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").is_err());
    }
}
