//! Row-major image grids: depth, RGB, and boolean masks.

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};

/// Depth image in world units. `0.0` is the no-hit sentinel; hit pixels are
/// strictly positive z-depths in the camera frame. Samples are f64 in
/// memory; the on-disk format quantizes to f32.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
    pub intrinsics: CameraIntrinsics,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, data: Vec<f64>, intrinsics: CameraIntrinsics) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::ShapeMismatch(format!(
                "depth data length {} for {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("depth sample"));
        }
        Ok(Self {
            width,
            height,
            data,
            intrinsics,
        })
    }

    pub fn zeros(intrinsics: CameraIntrinsics) -> Self {
        Self {
            width: intrinsics.width,
            height: intrinsics.height,
            data: vec![0.0; (intrinsics.width * intrinsics.height) as usize],
            intrinsics,
        }
    }

    #[inline]
    pub fn at(&self, row: u32, col: u32) -> f64 {
        self.data[(row * self.width + col) as usize]
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: f64) {
        self.data[(row * self.width + col) as usize] = value;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Bilinear sample at continuous coordinates; `None` outside the grid's
    /// support or when any participating pixel is the no-hit sentinel.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<f64> {
        bilinear(
            &self.data,
            self.width,
            self.height,
            u,
            v,
            |x| *x,
            |x| *x > 0.0,
        )
    }
}

/// RGB image with channel values in `[0, 1]`, stored interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<[f32; 3]>) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::ShapeMismatch(format!(
                "rgb data length {} for {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data
            .iter()
            .any(|px| px.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::NonFinite("rgb sample"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0; 3]; (width as usize) * (height as usize)],
        }
    }

    #[inline]
    pub fn at(&self, row: u32, col: u32) -> [f32; 3] {
        self.data[(row * self.width + col) as usize]
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: [f32; 3]) {
        self.data[(row * self.width + col) as usize] = value;
    }

    /// Bilinear sample of one channel; `None` outside the support.
    pub fn sample_bilinear(&self, u: f64, v: f64, channel: usize) -> Option<f64> {
        bilinear(
            &self.data,
            self.width,
            self.height,
            u,
            v,
            |px| px[channel] as f64,
            |_| true,
        )
    }
}

/// Per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; (width as usize) * (height as usize)],
        }
    }

    #[inline]
    pub fn at(&self, row: u32, col: u32) -> bool {
        self.data[(row * self.width + col) as usize]
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        self.data[(row * self.width + col) as usize] = value;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn valid_fraction(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.valid_count() as f64 / self.data.len() as f64
        }
    }
}

fn bilinear<T>(
    data: &[T],
    width: u32,
    height: u32,
    u: f64,
    v: f64,
    extract: impl Fn(&T) -> f64,
    valid: impl Fn(&T) -> bool,
) -> Option<f64> {
    if !(u.is_finite() && v.is_finite()) {
        return None;
    }
    if u < 0.0 || v < 0.0 || u > (width - 1) as f64 || v > (height - 1) as f64 {
        return None;
    }
    let c0 = (u.floor() as u32).min(width.saturating_sub(2));
    let r0 = (v.floor() as u32).min(height.saturating_sub(2));
    let (c1, r1) = if width == 1 || height == 1 {
        // degenerate 1-wide/1-tall grids fall back to nearest
        return data
            .get((v.round() as u32 * width + u.round() as u32) as usize)
            .filter(|t| valid(t))
            .map(extract);
    } else {
        (c0 + 1, r0 + 1)
    };
    let fu = u - c0 as f64;
    let fv = v - r0 as f64;
    let idx = |r: u32, c: u32| (r * width + c) as usize;
    let corners = [
        (&data[idx(r0, c0)], (1.0 - fu) * (1.0 - fv)),
        (&data[idx(r0, c1)], fu * (1.0 - fv)),
        (&data[idx(r1, c0)], (1.0 - fu) * fv),
        (&data[idx(r1, c1)], fu * fv),
    ];
    if corners.iter().any(|(t, w)| *w > 0.0 && !valid(t)) {
        return None;
    }
    Some(corners.iter().map(|(t, w)| extract(t) * w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k2() -> CameraIntrinsics {
        CameraIntrinsics::new(1.0, 1.0, 0.5, 0.5, 2, 2).unwrap()
    }

    #[test]
    fn bilinear_interpolates() {
        let d = DepthImage::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], k2()).unwrap();
        assert_abs_diff_eq!(d.sample_bilinear(0.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(d.sample_bilinear(1.0, 1.0).unwrap(), 4.0);
        assert_abs_diff_eq!(d.sample_bilinear(0.5, 0.5).unwrap(), 2.5);
        assert!(d.sample_bilinear(-0.1, 0.0).is_none());
        assert!(d.sample_bilinear(1.1, 0.0).is_none());
    }

    #[test]
    fn bilinear_rejects_sentinel_support() {
        let d = DepthImage::new(2, 2, vec![1.0, 0.0, 3.0, 4.0], k2()).unwrap();
        assert!(d.sample_bilinear(0.5, 0.0).is_none());
        // zero-weight corners do not poison the sample
        assert_abs_diff_eq!(d.sample_bilinear(0.0, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn shape_validation() {
        assert!(DepthImage::new(2, 2, vec![0.0; 3], k2()).is_err());
        assert!(DepthImage::new(2, 2, vec![-1.0, 0.0, 0.0, 0.0], k2()).is_err());
        assert!(RgbImage::new(2, 1, vec![[0.0; 3]; 3]).is_err());
    }

    #[test]
    fn mask_fraction() {
        let mut m = Mask::filled(2, 2, false);
        m.set(0, 1, true);
        assert_eq!(m.valid_count(), 1);
        assert_abs_diff_eq!(m.valid_fraction(), 0.25);
    }
}
