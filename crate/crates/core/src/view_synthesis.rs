//! Rigid reprojection of depth-carrying images and the photometric loss
//! used to score depth/pose estimates.
//!
//! The pixel warp follows `z' p' = K R K^-1 z p + K t` for homogeneous pixel
//! coordinates `p`, so depth errors and pose errors surface as photometric
//! discrepancy. Synthesis forward-splats depth into the target frame and
//! backward-samples colors bilinearly through the inverse transform; samples
//! that leave the frame, land behind the camera, or fail a relative
//! depth-consistency check are masked out.

use crate::camera::{check_rotation, CameraIntrinsics};
use crate::error::{Error, Result};
use crate::image::{DepthImage, Mask, RgbImage};
use crate::{Mat3, Vec3};

/// Warped samples failing `|z_back - D_t(x)| <= tol * D_t(x)` are treated as
/// occlusion/disocclusion events and masked.
const OCCLUSION_REL_TOL: f64 = 0.05;

/// Rotation plus translation mapping camera frame A into camera frame B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        check_rotation(&rotation)?;
        if !(translation.x.is_finite() && translation.y.is_finite() && translation.z.is_finite()) {
            return Err(Error::NonFinite("translation"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Transform taking points in `from`'s camera frame to `to`'s.
    pub fn between(from: &crate::camera::CameraPose, to: &crate::camera::CameraPose) -> Self {
        Self {
            rotation: to.rotation * from.rotation.transpose(),
            translation: to.rotation * (from.position - to.position),
        }
    }
}

/// Result of warping one pixel: homogeneous coordinates (third component 1)
/// and the transformed depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpedPixel {
    pub pixel: Vec3,
    pub depth: f64,
}

impl WarpedPixel {
    /// False when the point lands at or behind the target camera.
    pub fn valid(&self) -> bool {
        self.depth > 0.0
    }
}

/// Warp a homogeneous pixel with depth `z` through a rigid transform.
/// A non-positive transformed depth is flagged via [`WarpedPixel::valid`],
/// not an error.
pub fn warp_point(
    p: Vec3,
    z: f64,
    k: &CameraIntrinsics,
    xform: &RigidTransform,
) -> Result<WarpedPixel> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidParam(format!("depth must be positive, got {z}")));
    }
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(Error::NonFinite("pixel coordinates"));
    }
    let km = k.matrix();
    let ki = k.inverse_matrix();
    let q: Vec3 = km * (xform.rotation * (ki * (p * z))) + km * xform.translation;
    let depth = q.z;
    if depth == 0.0 {
        return Ok(WarpedPixel {
            pixel: Vec3::new(f64::INFINITY, f64::INFINITY, 1.0),
            depth: 0.0,
        });
    }
    Ok(WarpedPixel {
        pixel: Vec3::new(q.x / depth, q.y / depth, 1.0),
        depth,
    })
}

/// Reproject a frame's colors and depth into the adjacent frame.
///
/// `i_t`/`d_t` are the source frame; `xform` maps the source camera frame to
/// the target frame. Returns the synthesized target RGB, the splatted target
/// depth, and the validity mask.
pub fn synthesize_view(
    i_t: &RgbImage,
    d_t: &DepthImage,
    k: &CameraIntrinsics,
    xform: &RigidTransform,
) -> Result<(RgbImage, DepthImage, Mask)> {
    if i_t.width != d_t.width || i_t.height != d_t.height {
        return Err(Error::ShapeMismatch(format!(
            "rgb {}x{} vs depth {}x{}",
            i_t.width, i_t.height, d_t.width, d_t.height
        )));
    }
    if d_t.width != k.width || d_t.height != k.height {
        return Err(Error::ShapeMismatch(format!(
            "depth {}x{} vs intrinsics {}x{}",
            d_t.width, d_t.height, k.width, k.height
        )));
    }
    let (w, h) = (d_t.width, d_t.height);

    // forward pass: z-buffer the warped source depths at their nearest
    // target pixels
    let mut splat = DepthImage::zeros(*k);
    for r in 0..h {
        for c in 0..w {
            let z = d_t.at(r, c);
            if z <= 0.0 {
                continue;
            }
            let wp = warp_point(Vec3::new(c as f64, r as f64, 1.0), z, k, xform)?;
            if !wp.valid() {
                continue;
            }
            if let Some((tr, tc)) = k.nearest_pixel(wp.pixel.x, wp.pixel.y) {
                if tr < h && tc < w {
                    let cur = splat.at(tr, tc);
                    if cur == 0.0 || wp.depth < cur {
                        splat.set(tr, tc, wp.depth);
                    }
                }
            }
        }
    }

    // backward pass: pull colors from the source through the inverse map
    let inv = xform.inverse();
    let mut rgb = RgbImage::zeros(w, h);
    let mut mask = Mask::filled(w, h, false);
    for r in 0..h {
        for c in 0..w {
            let z = splat.at(r, c);
            if z <= 0.0 {
                continue;
            }
            let back = warp_point(Vec3::new(c as f64, r as f64, 1.0), z, k, &inv)?;
            if !back.valid() {
                continue;
            }
            let (u, v) = (back.pixel.x, back.pixel.y);
            let Some(src_depth) = d_t.sample_bilinear(u, v) else {
                continue;
            };
            if (back.depth - src_depth).abs() > OCCLUSION_REL_TOL * src_depth {
                continue;
            }
            let px = [
                i_t.sample_bilinear(u, v, 0).unwrap() as f32,
                i_t.sample_bilinear(u, v, 1).unwrap() as f32,
                i_t.sample_bilinear(u, v, 2).unwrap() as f32,
            ];
            rgb.set(r, c, px);
            mask.set(r, c, true);
        }
    }
    // splatted depth outside the mask is noise; zero it for cleanliness
    for r in 0..h {
        for c in 0..w {
            if !mask.at(r, c) {
                splat.set(r, c, 0.0);
            }
        }
    }
    Ok((rgb, splat, mask))
}

/// Photometric and geometric agreement between a real frame and a
/// synthesized one, restricted to the mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// Mean absolute color difference.
    pub l1: f64,
    /// Mean structural similarity, in `[-1, 1]`.
    pub ssim: f64,
    /// Mean absolute depth difference (world units).
    pub depth_consistency: f64,
    /// Fraction of pixels contributing to the means.
    pub valid_fraction: f64,
    /// `(1 - w) * l1 + w * (1 - ssim) / 2` for the given ssim weight.
    pub combined: f64,
}

pub fn view_synthesis_loss(
    i_prev: &RgbImage,
    i_hat_prev: &RgbImage,
    d_prev: &DepthImage,
    d_hat_prev: &DepthImage,
    mask: &Mask,
    ssim_weight: f64,
) -> Result<LossReport> {
    let dims = (i_prev.width, i_prev.height);
    for (w, h, name) in [
        (i_hat_prev.width, i_hat_prev.height, "synthesized rgb"),
        (d_prev.width, d_prev.height, "depth"),
        (d_hat_prev.width, d_hat_prev.height, "synthesized depth"),
        (mask.width, mask.height, "mask"),
    ] {
        if (w, h) != dims {
            return Err(Error::ShapeMismatch(format!(
                "{name} is {w}x{h}, expected {}x{}",
                dims.0, dims.1
            )));
        }
    }
    if !(0.0..=1.0).contains(&ssim_weight) {
        return Err(Error::InvalidParam("ssim_weight must be in [0, 1]".into()));
    }
    let n = mask.valid_count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }

    let mut l1 = 0.0;
    let mut depth = 0.0;
    for r in 0..dims.1 {
        for c in 0..dims.0 {
            if !mask.at(r, c) {
                continue;
            }
            let a = i_prev.at(r, c);
            let b = i_hat_prev.at(r, c);
            l1 += (0..3)
                .map(|ch| (a[ch] as f64 - b[ch] as f64).abs())
                .sum::<f64>()
                / 3.0;
            depth += (d_prev.at(r, c) - d_hat_prev.at(r, c)).abs();
        }
    }
    l1 /= n as f64;
    depth /= n as f64;

    let map = ssim_map(i_prev, i_hat_prev);
    let mut ssim = 0.0;
    for r in 0..dims.1 {
        for c in 0..dims.0 {
            if mask.at(r, c) {
                ssim += map[(r * dims.0 + c) as usize];
            }
        }
    }
    ssim /= n as f64;

    Ok(LossReport {
        l1,
        ssim,
        depth_consistency: depth,
        valid_fraction: mask.valid_fraction(),
        combined: (1.0 - ssim_weight) * l1 + ssim_weight * (1.0 - ssim) / 2.0,
    })
}

/// SSIM window radius (11x11 taps) and Gaussian sigma.
const SSIM_RADIUS: i64 = 5;
const SSIM_SIGMA: f64 = 1.5;
/// Stabilizers for unit-range images.
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Per-pixel SSIM between two images, averaged over channels. Windows are
/// Gaussian-weighted and renormalized at the borders.
pub fn ssim_map(a: &RgbImage, b: &RgbImage) -> Vec<f64> {
    assert_eq!((a.width, a.height), (b.width, b.height));
    let (w, h) = (a.width as i64, a.height as i64);
    let mut kernel = [[0.0f64; 11]; 11];
    for (dy, row) in kernel.iter_mut().enumerate() {
        for (dx, k) in row.iter_mut().enumerate() {
            let yy = dy as f64 - SSIM_RADIUS as f64;
            let xx = dx as f64 - SSIM_RADIUS as f64;
            *k = (-(xx * xx + yy * yy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        }
    }

    let mut out = vec![0.0f64; (w * h) as usize];
    for r in 0..h {
        for c in 0..w {
            let mut total = 0.0;
            for ch in 0..3 {
                let mut wsum = 0.0;
                let (mut ma, mut mb) = (0.0, 0.0);
                let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
                for dy in -SSIM_RADIUS..=SSIM_RADIUS {
                    let rr = r + dy;
                    if rr < 0 || rr >= h {
                        continue;
                    }
                    for dx in -SSIM_RADIUS..=SSIM_RADIUS {
                        let cc = c + dx;
                        if cc < 0 || cc >= w {
                            continue;
                        }
                        let wk = kernel[(dy + SSIM_RADIUS) as usize][(dx + SSIM_RADIUS) as usize];
                        let va = a.at(rr as u32, cc as u32)[ch] as f64;
                        let vb = b.at(rr as u32, cc as u32)[ch] as f64;
                        wsum += wk;
                        ma += wk * va;
                        mb += wk * vb;
                        saa += wk * va * va;
                        sbb += wk * vb * vb;
                        sab += wk * va * vb;
                    }
                }
                ma /= wsum;
                mb /= wsum;
                let vaa = (saa / wsum - ma * ma).max(0.0);
                let vbb = (sbb / wsum - mb * mb).max(0.0);
                let vab = sab / wsum - ma * mb;
                total += (2.0 * ma * mb + SSIM_C1) * (2.0 * vab + SSIM_C2)
                    / ((ma * ma + mb * mb + SSIM_C1) * (vaa + vbb + SSIM_C2));
            }
            out[(r * w + c) as usize] = total / 3.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_k() -> CameraIntrinsics {
        CameraIntrinsics::new(2.0, 2.0, 1.0, 1.0, 3, 3).unwrap()
    }

    #[test]
    fn identity_warp_is_identity() {
        let k = CameraIntrinsics::endoscope_default();
        let p = Vec3::new(17.0, 211.0, 1.0);
        let wp = warp_point(p, 3.5, &k, &RigidTransform::identity()).unwrap();
        assert_eq!(wp.depth, 3.5);
        assert_abs_diff_eq!((wp.pixel - p).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_computed_translation_example() {
        // fx = fy = 2, principal point (1, 1); p = (1,1,1), z = 3, pure
        // x-translation by 1: z'p' = 3p + K t = (5, 3, 3)
        let k = test_k();
        let xform = RigidTransform::new(Mat3::identity(), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let wp = warp_point(Vec3::new(1.0, 1.0, 1.0), 3.0, &k, &xform).unwrap();
        assert_eq!(wp.depth, 3.0);
        assert_eq!(wp.pixel.x, 5.0 / 3.0);
        assert_eq!(wp.pixel.y, 1.0);
        assert_eq!(wp.pixel.z, 1.0);
    }

    #[test]
    fn warp_round_trip_through_inverse() {
        let k = CameraIntrinsics::endoscope_default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let rot = nalgebra::Rotation3::from_euler_angles(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            )
            .into_inner();
            let t = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let xform = RigidTransform::new(rot, t).unwrap();
            let p = Vec3::new(rng.random_range(0.0..383.0), rng.random_range(0.0..319.0), 1.0);
            let z = rng.random_range(0.5..20.0);
            let wp = warp_point(p, z, &k, &xform).unwrap();
            if !wp.valid() {
                continue;
            }
            let back = warp_point(wp.pixel, wp.depth, &k, &xform.inverse()).unwrap();
            assert_abs_diff_eq!(back.depth, z, epsilon = 1e-9 * z.max(1.0));
            assert_abs_diff_eq!((back.pixel - p).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn scaling_depth_and_translation_scales_depth_only() {
        let k = CameraIntrinsics::endoscope_default();
        let rot = nalgebra::Rotation3::from_euler_angles(0.1, -0.2, 0.05).into_inner();
        let t = Vec3::new(0.3, -0.1, 0.6);
        let p = Vec3::new(100.0, 150.0, 1.0);
        let z = 4.0;
        for c in [0.1, 2.0, 17.3] {
            let a = warp_point(p, z, &k, &RigidTransform::new(rot, t).unwrap()).unwrap();
            let b = warp_point(p, c * z, &k, &RigidTransform::new(rot, c * t).unwrap()).unwrap();
            assert_abs_diff_eq!(b.depth, c * a.depth, epsilon = 1e-9 * a.depth.abs() * c);
            assert_abs_diff_eq!((b.pixel - a.pixel).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_input_depth_is_error_but_negative_output_is_flag() {
        let k = test_k();
        assert!(warp_point(Vec3::new(1.0, 1.0, 1.0), 0.0, &k, &RigidTransform::identity()).is_err());
        // translate the point behind the camera
        let xform = RigidTransform::new(Mat3::identity(), Vec3::new(0.0, 0.0, -5.0)).unwrap();
        let wp = warp_point(Vec3::new(1.0, 1.0, 1.0), 1.0, &k, &xform).unwrap();
        assert!(!wp.valid());
    }

    fn checker_image(w: u32, h: u32) -> RgbImage {
        // dyadic values so complements like 1 - v stay exact in f32
        let mut img = RgbImage::zeros(w, h);
        for r in 0..h {
            for c in 0..w {
                let v = 0.25 + 0.5 * (((r / 2 + c / 2) % 2) as f32);
                img.set(r, c, [v, v * 0.5, v * 0.25 + 0.125]);
            }
        }
        img
    }

    #[test]
    fn identity_synthesis_reproduces_input() {
        let k = CameraIntrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let img = checker_image(16, 16);
        let depth = DepthImage::new(16, 16, vec![2.0; 256], k).unwrap();
        let (rgb, d_hat, mask) =
            synthesize_view(&img, &depth, &k, &RigidTransform::identity()).unwrap();
        assert_eq!(mask.valid_fraction(), 1.0);
        assert_eq!(rgb, img);
        assert_eq!(d_hat.data, depth.data);
        let loss = view_synthesis_loss(&img, &rgb, &depth, &d_hat, &mask, 0.5).unwrap();
        assert_eq!(loss.l1, 0.0);
        assert_abs_diff_eq!(loss.ssim, 1.0, epsilon = 1e-12);
        assert_eq!(loss.depth_consistency, 0.0);
        assert_eq!(loss.valid_fraction, 1.0);
        assert_abs_diff_eq!(loss.combined, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn axial_push_loses_border_pixels() {
        let k = CameraIntrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let img = checker_image(16, 16);
        let depth = DepthImage::new(16, 16, vec![2.0; 256], k).unwrap();
        let xform = RigidTransform::new(Mat3::identity(), Vec3::new(0.0, 0.0, 0.4)).unwrap();
        let (_, _, mask) = synthesize_view(&img, &depth, &k, &xform).unwrap();
        assert!(mask.valid_fraction() < 1.0);
        assert!(mask.valid_fraction() > 0.3);
    }

    #[test]
    fn inverted_image_l1_matches_direct_computation() {
        let k = CameraIntrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let img = checker_image(16, 16);
        let mut inverted = img.clone();
        for px in &mut inverted.data {
            for ch in px.iter_mut() {
                *ch = 1.0 - *ch;
            }
        }
        let depth = DepthImage::new(16, 16, vec![1.0; 256], k).unwrap();
        let mask = Mask::filled(16, 16, true);
        let loss = view_synthesis_loss(&img, &inverted, &depth, &depth, &mask, 0.0).unwrap();
        let direct: f64 = img
            .data
            .iter()
            .map(|px| {
                px.iter()
                    .map(|&v| (1.0 - 2.0 * v as f64).abs())
                    .sum::<f64>()
                    / 3.0
            })
            .sum::<f64>()
            / 256.0;
        assert_abs_diff_eq!(loss.l1, direct, epsilon = 1e-12);
    }

    #[test]
    fn constant_depth_shift_reports_the_shift() {
        let k = CameraIntrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let img = checker_image(16, 16);
        let d = DepthImage::new(16, 16, vec![2.0; 256], k).unwrap();
        let d_shift = DepthImage::new(16, 16, vec![2.75; 256], k).unwrap();
        let mask = Mask::filled(16, 16, true);
        let loss = view_synthesis_loss(&img, &img, &d, &d_shift, &mask, 0.5).unwrap();
        assert_abs_diff_eq!(loss.depth_consistency, 0.75, epsilon = 1e-6);
    }

    #[test]
    fn empty_mask_is_error() {
        let k = CameraIntrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let img = checker_image(16, 16);
        let d = DepthImage::new(16, 16, vec![1.0; 256], k).unwrap();
        let mask = Mask::filled(16, 16, false);
        assert!(matches!(
            view_synthesis_loss(&img, &img, &d, &d, &mask, 0.5),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn shape_mismatch_is_error() {
        let k = CameraIntrinsics::new(20.0, 20.0, 7.5, 7.5, 16, 16).unwrap();
        let img = checker_image(16, 16);
        let small = checker_image(8, 8);
        let d = DepthImage::new(16, 16, vec![1.0; 256], k).unwrap();
        let mask = Mask::filled(16, 16, true);
        assert!(view_synthesis_loss(&img, &small, &d, &d, &mask, 0.5).is_err());
    }
}
