//! Procedural colon worlds and camera trajectories, deterministic in a seed.
//!
//! Worlds are tubes around a smoothly bent centerline whose radius is
//! modulated by a sinusoidal fold profile (standing in for haustral ridges).
//! Trajectories perturb a constant-speed pullback along the lumen with
//! band-limited positional and rotational noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::lumen::LumenCurve;
use crate::mesh::ColonMesh;
use crate::render::Renderer;
use crate::world::ColonWorld;
use crate::{Mat3, Vec3};

/// Parameters for [`generate_colon`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColonGenSpec {
    pub seed: u64,
    /// Target centerline length (world units).
    pub length: f64,
    /// Mean tube radius.
    pub base_radius: f64,
    /// Amplitude of the sinusoidal radius modulation; must stay below
    /// `base_radius`.
    pub fold_amplitude: f64,
    /// Number of fold periods along the full length.
    pub fold_count: u32,
    /// Maximum lateral displacement of the centerline.
    pub bend_amplitude: f64,
    pub axial_segments: u32,
    pub radial_segments: u32,
}

impl Default for ColonGenSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            length: 60.0,
            base_radius: 2.5,
            fold_amplitude: 0.4,
            fold_count: 20,
            bend_amplitude: 4.0,
            axial_segments: 192,
            radial_segments: 32,
        }
    }
}

impl ColonGenSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParam("length must be positive".into()));
        }
        if !(self.fold_amplitude >= 0.0 && self.base_radius > self.fold_amplitude) {
            return Err(Error::InvalidParam(
                "need base_radius > fold_amplitude >= 0".into(),
            ));
        }
        if self.fold_count == 0 {
            return Err(Error::InvalidParam("fold_count must be positive".into()));
        }
        if self.bend_amplitude < 0.0 {
            return Err(Error::InvalidParam("bend_amplitude must be >= 0".into()));
        }
        if self.axial_segments < 16 {
            return Err(Error::InvalidParam("axial_segments must be >= 16".into()));
        }
        if self.radial_segments < 12 {
            return Err(Error::InvalidParam("radial_segments must be >= 12".into()));
        }
        Ok(())
    }
}

/// One sinusoidal component of a smooth signal.
#[derive(Debug, Clone, Copy)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// Cycles over the unit interval (centerline) or Hz (trajectories).
    pub frequency: f64,
    pub phase: f64,
}

impl Sinusoid {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * self.frequency * x + self.phase).sin()
    }
}

/// Analytic centerline of a generated colon: lateral sinusoid displacements
/// around the z axis, uniformly scaled so the arc length hits the target.
#[derive(Debug, Clone)]
pub struct CenterlineModel {
    pub lateral: [Vec<Sinusoid>; 2],
    pub scale: f64,
    pub nominal_length: f64,
    arc_table: Vec<f64>,
}

const CENTERLINE_FINE_STEPS: usize = 4096;

impl CenterlineModel {
    pub fn from_spec(spec: &ColonGenSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut lateral = [Vec::new(), Vec::new()];
        for chan in &mut lateral {
            for freq in [1.0, 2.0] {
                chan.push(Sinusoid {
                    // quadratic falloff keeps curvature well below 1/radius
                    amplitude: rng.random_range(0.5..1.0) / (freq * freq),
                    frequency: freq,
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                });
            }
        }
        // scale lateral components so the peak displacement matches the spec
        let mut peak = 0.0f64;
        for k in 0..=CENTERLINE_FINE_STEPS {
            let v = k as f64 / CENTERLINE_FINE_STEPS as f64;
            let dx: f64 = lateral[0].iter().map(|s| s.eval(v)).sum();
            let dy: f64 = lateral[1].iter().map(|s| s.eval(v)).sum();
            peak = peak.max((dx * dx + dy * dy).sqrt());
        }
        let gain = if peak > 0.0 && spec.bend_amplitude > 0.0 {
            spec.bend_amplitude / peak
        } else {
            0.0
        };
        for chan in &mut lateral {
            for s in chan.iter_mut() {
                s.amplitude *= gain;
            }
        }

        let mut model = Self {
            lateral,
            scale: 1.0,
            nominal_length: spec.length,
            arc_table: Vec::new(),
        };
        // normalize total arc length to the requested value
        let raw_len = model.build_arc_table();
        model.scale = spec.length / raw_len;
        for v in &mut model.arc_table {
            *v *= model.scale;
        }
        model
    }

    fn unscaled_point(&self, v: f64) -> Vec3 {
        let dx: f64 = self.lateral[0].iter().map(|s| s.eval(v)).sum();
        let dy: f64 = self.lateral[1].iter().map(|s| s.eval(v)).sum();
        Vec3::new(dx, dy, v * self.nominal_length)
    }

    fn build_arc_table(&mut self) -> f64 {
        let mut table = Vec::with_capacity(CENTERLINE_FINE_STEPS + 1);
        table.push(0.0);
        let mut prev = self.unscaled_point(0.0);
        let mut acc = 0.0;
        for k in 1..=CENTERLINE_FINE_STEPS {
            let p = self.unscaled_point(k as f64 / CENTERLINE_FINE_STEPS as f64);
            acc += (p - prev).norm();
            prev = p;
            table.push(acc);
        }
        self.arc_table = table;
        acc
    }

    /// Centerline point at normalized position `v in [0, 1]`.
    pub fn point(&self, v: f64) -> Vec3 {
        self.unscaled_point(v) * self.scale
    }

    /// Derivative of [`CenterlineModel::point`] with respect to `v`.
    pub fn derivative(&self, v: f64) -> Vec3 {
        let tau = std::f64::consts::TAU;
        let d = |chan: &[Sinusoid]| -> f64 {
            chan.iter()
                .map(|s| s.amplitude * tau * s.frequency * (tau * s.frequency * v + s.phase).cos())
                .sum()
        };
        Vec3::new(d(&self.lateral[0]), d(&self.lateral[1]), self.nominal_length) * self.scale
    }

    /// Arc length from the start to normalized position `v`.
    pub fn arc_length(&self, v: f64) -> f64 {
        let x = v.clamp(0.0, 1.0) * CENTERLINE_FINE_STEPS as f64;
        let i = (x.floor() as usize).min(CENTERLINE_FINE_STEPS - 1);
        let frac = x - i as f64;
        self.arc_table[i] + (self.arc_table[i + 1] - self.arc_table[i]) * frac
    }

    pub fn total_length(&self) -> f64 {
        *self.arc_table.last().unwrap()
    }
}

/// Tube radius at arc length `l` for a generation spec.
pub fn fold_radius(spec: &ColonGenSpec, l: f64, total: f64) -> f64 {
    spec.base_radius
        + spec.fold_amplitude
            * (spec.fold_count as f64 * std::f64::consts::TAU * l / total).sin()
}

/// Generate a watertight tube world. Deterministic in `spec.seed`.
pub fn generate_colon(spec: &ColonGenSpec) -> Result<ColonWorld> {
    spec.validate()?;
    let model = CenterlineModel::from_spec(spec);
    let total = model.total_length();

    let n_rings = spec.axial_segments as usize + 1;
    let m = spec.radial_segments as usize;

    let stations: Vec<Vec3> = (0..n_rings)
        .map(|i| model.point(i as f64 / spec.axial_segments as f64))
        .collect();

    // parallel-transported frames along the stations
    let mut tangents = Vec::with_capacity(n_rings);
    for i in 0..n_rings {
        let t = if i == 0 {
            stations[1] - stations[0]
        } else if i == n_rings - 1 {
            stations[n_rings - 1] - stations[n_rings - 2]
        } else {
            stations[i + 1] - stations[i - 1]
        };
        tangents.push(t.normalize());
    }
    let mut normals = Vec::with_capacity(n_rings);
    let first = pick_perpendicular(tangents[0]);
    normals.push(first);
    for i in 1..n_rings {
        let prev: Vec3 = normals[i - 1];
        let t = tangents[i];
        let n = (prev - t * prev.dot(&t))
            .try_normalize(1e-12)
            .unwrap_or_else(|| pick_perpendicular(t));
        normals.push(n);
    }

    let mut vertices = Vec::with_capacity(n_rings * m);
    for i in 0..n_rings {
        let arc = model.arc_length(i as f64 / spec.axial_segments as f64);
        let radius = fold_radius(spec, arc, total);
        let t = tangents[i];
        let n = normals[i];
        let b = t.cross(&n);
        for j in 0..m {
            let theta = std::f64::consts::TAU * j as f64 / m as f64;
            vertices.push(stations[i] + (n * theta.cos() + b * theta.sin()) * radius);
        }
    }

    let ring = |i: usize, j: usize| (i * m + j % m) as u32;
    let mut faces = Vec::with_capacity(2 * spec.axial_segments as usize * m + 2 * (m - 2));
    for i in 0..spec.axial_segments as usize {
        for j in 0..m {
            // wound so normals face the lumen
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
        }
    }
    // fan caps reuse ring vertices so every vertex keeps the tube radius
    for j in 1..m - 1 {
        faces.push([ring(0, 0), ring(0, j), ring(0, j + 1)]);
        faces.push([
            ring(n_rings - 1, 0),
            ring(n_rings - 1, j + 1),
            ring(n_rings - 1, j),
        ]);
    }

    let mesh = ColonMesh::new(vertices, faces)?;
    let lumen = LumenCurve::catmull_rom(stations)?;
    ColonWorld::new(mesh, lumen)
}

fn pick_perpendicular(t: Vec3) -> Vec3 {
    let candidate = if t.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    (candidate - t * candidate.dot(&t)).normalize()
}

/// Number of faces that belong to the tube wall (the rest close the ends).
pub fn tube_face_count(spec: &ColonGenSpec) -> usize {
    2 * spec.axial_segments as usize * spec.radial_segments as usize
}

/// Parameters for [`generate_trajectory`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub seed: u64,
    pub duration_s: f64,
    pub fps: u32,
    /// Arc length at the first frame (cecum side for a withdrawal).
    pub start_arclen: f64,
    /// Arc length at the last frame.
    pub end_arclen: f64,
    /// Peak positional deviation from the lumen (world units).
    pub position_jitter_amp: f64,
    /// Peak orientation deviation (degrees, axis-angle magnitude).
    pub orientation_jitter_amp_deg: f64,
    /// Low-pass cutoff of the jitter signals, in Hz.
    pub jitter_smoothness_hz: f64,
    /// Withdrawal convention: arc length must strictly decrease.
    pub monotonic: bool,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 10.0,
            fps: 30,
            start_arclen: 50.0,
            end_arclen: 10.0,
            position_jitter_amp: 0.25,
            orientation_jitter_amp_deg: 8.0,
            jitter_smoothness_hz: 1.0,
            monotonic: true,
        }
    }
}

impl TrajectorySpec {
    pub fn frame_count(&self) -> Result<usize> {
        let frames = self.duration_s * self.fps as f64;
        let rounded = frames.round();
        if !(frames.is_finite() && (frames - rounded).abs() < 1e-6 && rounded >= 1.0) {
            return Err(Error::InvalidParam(
                "duration_s * fps must be a positive integer frame count".into(),
            ));
        }
        Ok(rounded as usize)
    }

    pub fn validate(&self, lumen_length: f64) -> Result<()> {
        self.frame_count()?;
        if self.fps == 0 {
            return Err(Error::InvalidParam("fps must be positive".into()));
        }
        for (name, l) in [("start_arclen", self.start_arclen), ("end_arclen", self.end_arclen)] {
            if !(0.0..=lumen_length).contains(&l) {
                return Err(Error::InvalidParam(format!(
                    "{name} {l} outside [0, {lumen_length}]"
                )));
            }
        }
        if self.monotonic && self.start_arclen <= self.end_arclen {
            return Err(Error::InvalidParam(
                "monotonic withdrawal needs start_arclen > end_arclen".into(),
            ));
        }
        if self.position_jitter_amp < 0.0 || self.orientation_jitter_amp_deg < 0.0 {
            return Err(Error::InvalidParam("jitter amplitudes must be >= 0".into()));
        }
        if !(self.jitter_smoothness_hz > 0.0) {
            return Err(Error::InvalidParam("jitter_smoothness_hz must be > 0".into()));
        }
        Ok(())
    }
}

/// Time-indexed camera poses at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraTrajectory {
    pub poses: Vec<CameraPose>,
    pub fps: u32,
}

impl CameraTrajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn frame_time(&self, frame: usize) -> f64 {
        frame as f64 / self.fps as f64
    }
}

/// Band-limited noise: a sum of random-phase sinusoids whose frequencies sit
/// on integer bins of the sampling window, all at or below the cutoff.
#[derive(Debug, Clone, Default)]
pub struct BandLimitedSignal {
    pub components: Vec<Sinusoid>,
}

impl BandLimitedSignal {
    pub fn random(rng: &mut ChaCha8Rng, cutoff_hz: f64, duration_s: f64) -> Self {
        let max_bin = (cutoff_hz * duration_s).floor() as usize;
        if max_bin == 0 {
            return Self::default();
        }
        let n = max_bin.min(6);
        // distinct bins, low frequencies first
        let mut bins: Vec<usize> = (1..=max_bin).collect();
        for i in (1..bins.len()).rev() {
            let j = rng.random_range(0..=i);
            bins.swap(i, j);
        }
        let components = bins[..n]
            .iter()
            .map(|&bin| Sinusoid {
                amplitude: rng.random_range(0.5..1.0),
                frequency: bin as f64 / duration_s,
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        Self { components }
    }

    pub fn sample(&self, t: f64) -> f64 {
        self.components.iter().map(|s| s.eval(t)).sum()
    }
}

/// Three independent band-limited channels scaled to a peak vector norm.
#[derive(Debug, Clone)]
pub struct JitterTrack {
    channels: [BandLimitedSignal; 3],
    gain: f64,
}

impl JitterTrack {
    fn random(
        rng: &mut ChaCha8Rng,
        cutoff_hz: f64,
        duration_s: f64,
        amplitude: f64,
        times: &[f64],
    ) -> Self {
        let channels = [
            BandLimitedSignal::random(rng, cutoff_hz, duration_s),
            BandLimitedSignal::random(rng, cutoff_hz, duration_s),
            BandLimitedSignal::random(rng, cutoff_hz, duration_s),
        ];
        let mut peak = 0.0f64;
        for &t in times {
            let v = Vec3::new(
                channels[0].sample(t),
                channels[1].sample(t),
                channels[2].sample(t),
            );
            peak = peak.max(v.norm());
        }
        let gain = if peak > 0.0 && amplitude > 0.0 {
            amplitude / peak
        } else {
            0.0
        };
        Self { channels, gain }
    }

    pub fn sample(&self, t: f64) -> Vec3 {
        Vec3::new(
            self.channels[0].sample(t),
            self.channels[1].sample(t),
            self.channels[2].sample(t),
        ) * self.gain
    }
}

/// Fraction of the wall distance (along the jitter direction) that a camera
/// may approach; the rest is kept as clearance.
const WALL_CLEARANCE: f64 = 0.9;

/// Generate a pullback trajectory along the lumen with band-limited jitter.
/// Deterministic in `spec.seed`.
pub fn generate_trajectory(world: &ColonWorld, spec: &TrajectorySpec) -> Result<CameraTrajectory> {
    spec.validate(world.lumen.total_length())?;
    let n = spec.frame_count()?;
    let renderer = Renderer::new(world);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let times: Vec<f64> = (0..n).map(|i| i as f64 / spec.fps as f64).collect();
    let pos_jitter = JitterTrack::random(
        &mut rng,
        spec.jitter_smoothness_hz,
        spec.duration_s,
        spec.position_jitter_amp,
        &times,
    );
    let rot_jitter = JitterTrack::random(
        &mut rng,
        spec.jitter_smoothness_hz,
        spec.duration_s,
        spec.orientation_jitter_amp_deg.to_radians(),
        &times,
    );

    // look opposite to the direction of travel (toward the cecum during
    // withdrawal)
    let look_sign = if spec.end_arclen <= spec.start_arclen {
        1.0
    } else {
        -1.0
    };

    let mut poses = Vec::with_capacity(n);
    let mut up_hint = Vec3::zeros();
    for (i, &t) in times.iter().enumerate() {
        let frac = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        let arc = spec.start_arclen + (spec.end_arclen - spec.start_arclen) * frac;
        let base = world.lumen.point_at(arc)?;
        let forward = world.lumen.tangent_at(arc)? * look_sign;
        if i == 0 {
            up_hint = pick_perpendicular(forward);
        } else {
            up_hint = (up_hint - forward * up_hint.dot(&forward))
                .try_normalize(1e-12)
                .unwrap_or_else(|| pick_perpendicular(forward));
        }

        let mut position = base;
        let jitter = pos_jitter.sample(t);
        let norm = jitter.norm();
        if norm > 0.0 {
            let dir = jitter / norm;
            let hit = renderer
                .cast(base, dir)
                .ok_or(Error::TrajectoryExitsMesh)?;
            position = base + dir * norm.min(WALL_CLEARANCE * hit.t);
        }

        let base_rot = CameraPose::look_along(position, forward, up_hint)?.rotation;
        let spin = rot_jitter.sample(t);
        let rotation: Mat3 = (nalgebra::Rotation3::new(spin)
            * nalgebra::Rotation3::from_matrix_unchecked(base_rot))
        .into_inner();
        let pose = CameraPose::new(rotation, position)?;
        if !renderer.is_inside(pose.position) {
            return Err(Error::TrajectoryExitsMesh);
        }
        poses.push(pose);
    }
    Ok(CameraTrajectory { poses, fps: spec.fps })
}
