//! Pinhole camera model: intrinsics and world-to-camera poses.

use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

/// Pinhole intrinsics. Pixel centers sit at integer coordinates, with
/// `(0, 0)` the center of the top-left pixel; `u` grows to the right along
/// columns, `v` downward along rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub x0: f64,
    pub y0: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, x0: f64, y0: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidParam("focal lengths must be positive".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam("image dimensions must be positive".into()));
        }
        if !(0.0..width as f64).contains(&x0) || !(0.0..height as f64).contains(&y0) {
            return Err(Error::InvalidParam(
                "principal point must lie inside the image".into(),
            ));
        }
        Ok(Self {
            fx,
            fy,
            x0,
            y0,
            width,
            height,
        })
    }

    /// Square-pixel intrinsics with the given horizontal field of view and
    /// the principal point at the image center.
    pub fn from_hfov(width: u32, height: u32, hfov_deg: f64) -> Result<Self> {
        if !(0.0 < hfov_deg && hfov_deg < 180.0) {
            return Err(Error::InvalidParam("hfov must be in (0, 180)".into()));
        }
        let f = width as f64 / 2.0 / (hfov_deg.to_radians() / 2.0).tan();
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    /// Wide-angle endoscope default: 384x320 at 120 degrees horizontal.
    pub fn endoscope_default() -> Self {
        Self::from_hfov(384, 320, 120.0).unwrap()
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.x0, 0.0, self.fy, self.y0, 0.0, 0.0, 1.0)
    }

    /// Closed-form inverse of the intrinsic matrix.
    pub fn inverse_matrix(&self) -> Mat3 {
        Mat3::new(
            1.0 / self.fx,
            0.0,
            -self.x0 / self.fx,
            0.0,
            1.0 / self.fy,
            -self.y0 / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Project a camera-frame point; `None` when at or behind the camera.
    pub fn project(&self, p_cam: Vec3) -> Option<(f64, f64)> {
        if p_cam.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p_cam.x / p_cam.z + self.x0,
            self.fy * p_cam.y / p_cam.z + self.y0,
        ))
    }

    /// Camera-frame point for pixel coordinates and depth.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vec3 {
        Vec3::new((u - self.x0) / self.fx * z, (v - self.y0) / self.fy * z, z)
    }

    /// Camera-frame ray direction through a pixel center, normalized so the
    /// z component is 1 (ray parameter equals z-depth).
    pub fn pixel_ray(&self, row: u32, col: u32) -> Vec3 {
        Vec3::new(
            (col as f64 - self.x0) / self.fx,
            (row as f64 - self.y0) / self.fy,
            1.0,
        )
    }

    /// Nearest pixel for continuous image coordinates, if inside the image.
    pub fn nearest_pixel(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        let c = u.round();
        let r = v.round();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((r as u32, c as u32))
    }
}

/// Returns Ok when `r` is orthonormal with determinant +1 within 1e-9.
pub(crate) fn check_rotation(r: &Mat3) -> Result<()> {
    let err = (r.transpose() * r - Mat3::identity()).norm();
    if err > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
        return Err(Error::NotARotation);
    }
    Ok(())
}

/// Rigid camera pose: `rotation` maps world to camera coordinates and
/// `position` is the camera center in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Mat3,
    pub position: Vec3,
}

impl CameraPose {
    pub fn new(rotation: Mat3, position: Vec3) -> Result<Self> {
        check_rotation(&rotation)?;
        if !(position.x.is_finite() && position.y.is_finite() && position.z.is_finite()) {
            return Err(Error::NonFinite("camera position"));
        }
        Ok(Self { rotation, position })
    }

    /// Pose at `position` looking along `forward`, with `up_hint` fixing the
    /// roll. Camera axes: x right, y down, z forward.
    pub fn look_along(position: Vec3, forward: Vec3, up_hint: Vec3) -> Result<Self> {
        let f = forward
            .try_normalize(1e-12)
            .ok_or(Error::Degenerate("zero forward direction".into()))?;
        let up = up_hint - f * up_hint.dot(&f);
        let up = up
            .try_normalize(1e-12)
            .ok_or(Error::Degenerate("up hint parallel to forward".into()))?;
        // x right, y down, z forward is right-handed: right = f x up, down = f x right
        let right = f.cross(&up);
        let down = f.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), f.transpose()]);
        Self::new(rotation, position)
    }

    pub fn to_camera(&self, p_world: Vec3) -> Vec3 {
        self.rotation * (p_world - self.position)
    }

    pub fn to_world(&self, p_cam: Vec3) -> Vec3 {
        self.rotation.transpose() * p_cam + self.position
    }

    /// Camera z axis (viewing direction) in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation.transpose() * Vec3::new(0.0, 0.0, 1.0)
    }
}
