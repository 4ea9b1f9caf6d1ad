//! Lumen centerline: an arc-length parameterized 3D curve.
//!
//! The curve is defined by ordered control points, interpolated either as a
//! polyline or as a Catmull-Rom spline, and reparameterized by cumulative
//! arc length through a lookup table. All public arc-length values live in
//! `[0, L]` where `L` is the table's total length; `0` is the rectum end.

use crate::error::{Error, Result};
use crate::Vec3;

/// Number of entries in the arc-length lookup table.
const ARC_TABLE_LEN: usize = 4096;

/// Dense samples taken before local refinement in closest-point queries.
const CLOSEST_SAMPLES: usize = 2048;

/// Ternary-search iterations on the bracketing interval.
const TERNARY_ITERS: usize = 20;

/// Derivative-sign bisection iterations used to polish the ternary result
/// down to machine precision (needed for the 1e-9 rigid-invariance grade).
const POLISH_ITERS: usize = 90;

/// How the control points are interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// Straight segments between consecutive control points.
    Polyline,
    /// Uniform Catmull-Rom spline through the control points, clamped ends.
    CatmullRom,
}

/// Arc-length parameterized centerline curve.
#[derive(Debug, Clone)]
pub struct LumenCurve {
    control_points: Vec<Vec3>,
    kind: CurveKind,
    /// Cumulative arc length at uniformly spaced values of the underlying
    /// curve parameter. Strictly increasing, starts at 0. Polylines store
    /// their exact per-segment lengths (one entry per control point); the
    /// spline uses `ARC_TABLE_LEN` chord samples.
    arc_table: Vec<f64>,
    total_length: f64,
}

impl LumenCurve {
    pub fn polyline(control_points: Vec<Vec3>) -> Result<Self> {
        Self::build(control_points, CurveKind::Polyline)
    }

    pub fn catmull_rom(control_points: Vec<Vec3>) -> Result<Self> {
        Self::build(control_points, CurveKind::CatmullRom)
    }

    pub fn new(control_points: Vec<Vec3>, kind: CurveKind) -> Result<Self> {
        Self::build(control_points, kind)
    }

    fn build(control_points: Vec<Vec3>, kind: CurveKind) -> Result<Self> {
        if control_points.len() < 2 {
            return Err(Error::InvalidParam(
                "lumen needs at least two control points".into(),
            ));
        }
        for p in &control_points {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::NonFinite("lumen control point"));
            }
        }
        for w in control_points.windows(2) {
            if (w[1] - w[0]).norm() == 0.0 {
                return Err(Error::InvalidParam(
                    "coincident consecutive lumen control points".into(),
                ));
            }
        }

        let mut curve = Self {
            control_points,
            kind,
            arc_table: Vec::new(),
            total_length: 0.0,
        };
        curve.rebuild_arc_table()?;
        Ok(curve)
    }

    fn rebuild_arc_table(&mut self) -> Result<()> {
        let entries = match self.kind {
            // polyline arc length is exact at the control points
            CurveKind::Polyline => self.control_points.len(),
            CurveKind::CatmullRom => ARC_TABLE_LEN,
        };
        let umax = self.param_max();
        let mut table = Vec::with_capacity(entries);
        table.push(0.0);
        let mut prev = self.point_at_param(0.0);
        let mut acc = 0.0;
        for k in 1..entries {
            let u = umax * k as f64 / (entries - 1) as f64;
            let p = self.point_at_param(u);
            acc += (p - prev).norm();
            prev = p;
            if acc <= table[k - 1] {
                return Err(Error::InvalidParam(
                    "lumen arc table is not strictly increasing".into(),
                ));
            }
            table.push(acc);
        }
        self.arc_table = table;
        self.total_length = acc;
        Ok(())
    }

    /// Total arc length `L`.
    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control_points
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    /// Maximum value of the underlying (non-arc-length) curve parameter.
    fn param_max(&self) -> f64 {
        (self.control_points.len() - 1) as f64
    }

    /// Evaluate at the underlying curve parameter `u in [0, n-1]`.
    fn point_at_param(&self, u: f64) -> Vec3 {
        let n = self.control_points.len();
        let seg = (u.floor() as usize).min(n - 2);
        let t = u - seg as f64;
        match self.kind {
            CurveKind::Polyline => {
                let a = self.control_points[seg];
                let b = self.control_points[seg + 1];
                a + (b - a) * t
            }
            CurveKind::CatmullRom => {
                let p0 = self.control_points[seg.saturating_sub(1)];
                let p1 = self.control_points[seg];
                let p2 = self.control_points[seg + 1];
                let p3 = self.control_points[(seg + 2).min(n - 1)];
                catmull_rom(p0, p1, p2, p3, t)
            }
        }
    }

    /// Derivative with respect to the underlying parameter.
    fn derivative_at_param(&self, u: f64) -> Vec3 {
        let n = self.control_points.len();
        let seg = (u.floor() as usize).min(n - 2);
        let t = u - seg as f64;
        match self.kind {
            CurveKind::Polyline => self.control_points[seg + 1] - self.control_points[seg],
            CurveKind::CatmullRom => {
                let p0 = self.control_points[seg.saturating_sub(1)];
                let p1 = self.control_points[seg];
                let p2 = self.control_points[seg + 1];
                let p3 = self.control_points[(seg + 2).min(n - 1)];
                catmull_rom_derivative(p0, p1, p2, p3, t)
            }
        }
    }

    /// Map arc length to the underlying parameter by table interpolation.
    fn param_at_arclen(&self, arclen: f64) -> Result<f64> {
        if !arclen.is_finite() || arclen < 0.0 || arclen > self.total_length {
            return Err(Error::ArcLenOutOfRange {
                value: arclen,
                max: self.total_length,
            });
        }
        let idx = match self
            .arc_table
            .binary_search_by(|v| v.partial_cmp(&arclen).unwrap())
        {
            Ok(i) => return Ok(self.param_step() * i as f64),
            Err(i) => i,
        };
        // arclen lies strictly between table[idx-1] and table[idx]
        let lo = self.arc_table[idx - 1];
        let hi = self.arc_table[idx];
        let frac = (arclen - lo) / (hi - lo);
        Ok(self.param_step() * ((idx - 1) as f64 + frac))
    }

    fn param_step(&self) -> f64 {
        self.param_max() / (self.arc_table.len() - 1) as f64
    }

    /// Point on the curve at arc length `arclen in [0, L]`.
    pub fn point_at(&self, arclen: f64) -> Result<Vec3> {
        Ok(self.point_at_param(self.param_at_arclen(arclen)?))
    }

    /// Unit tangent at arc length `arclen`, pointing toward increasing arc length.
    pub fn tangent_at(&self, arclen: f64) -> Result<Vec3> {
        let d = self.derivative_at_param(self.param_at_arclen(arclen)?);
        let n = d.norm();
        if n == 0.0 {
            return Err(Error::Degenerate("zero tangent on lumen".into()));
        }
        Ok(d / n)
    }

    /// Arc length of the curve point closest to `point`; ties toward smaller
    /// values. Dense sampling brackets the global minimum, ternary search
    /// narrows it, and a derivative-sign bisection polishes the result to
    /// machine precision.
    pub fn closest_param(&self, point: Vec3) -> Result<f64> {
        if !(point.x.is_finite() && point.y.is_finite() && point.z.is_finite()) {
            return Err(Error::NonFinite("query point"));
        }
        let len = self.total_length;
        let step = len / (CLOSEST_SAMPLES - 1) as f64;
        let mut best_k = 0usize;
        let mut best_d = f64::INFINITY;
        for k in 0..CLOSEST_SAMPLES {
            let l = if k + 1 == CLOSEST_SAMPLES {
                len
            } else {
                step * k as f64
            };
            let d = (point - self.point_at(l).unwrap()).norm_squared();
            if d < best_d {
                best_d = d;
                best_k = k;
            }
        }
        let mut lo = if best_k == 0 {
            0.0
        } else {
            step * (best_k - 1) as f64
        };
        let mut hi = if best_k + 1 >= CLOSEST_SAMPLES {
            len
        } else {
            step * (best_k + 1) as f64
        };

        let dist2 = |l: f64| (point - self.point_at(l).unwrap()).norm_squared();
        for _ in 0..TERNARY_ITERS {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if dist2(m1) <= dist2(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }

        // Sign of d/dl ||point - s(l)||^2, up to the positive factor du/dl.
        let slope = |l: f64| {
            let u = self.param_at_arclen(l).unwrap();
            let s = self.point_at_param(u);
            let d = self.derivative_at_param(u);
            -(point - s).dot(&d)
        };
        let (slo, shi) = (slope(lo), slope(hi));
        if slo > 0.0 && shi > 0.0 {
            return Ok(lo);
        }
        if slo < 0.0 && shi < 0.0 {
            return Ok(hi);
        }
        if slo > 0.0 && shi < 0.0 {
            // bracket straddles a local maximum; minimum is at an endpoint
            return Ok(if dist2(lo) <= dist2(hi) { lo } else { hi });
        }
        for _ in 0..POLISH_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn catmull_rom(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3, t: f64) -> Vec3 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * ((2.0 * p1)
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3)
}

fn catmull_rom_derivative(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3, t: f64) -> Vec3 {
    let t2 = t * t;
    0.5 * ((p2 - p0)
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * (2.0 * t)
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * (3.0 * t2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn straight() -> LumenCurve {
        LumenCurve::polyline(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 10.0)]).unwrap()
    }

    #[test]
    fn straight_line_projection() {
        let lumen = straight();
        assert_abs_diff_eq!(lumen.total_length(), 10.0, epsilon = 1e-12);
        let l = lumen.closest_param(Vec3::new(1.0, 0.0, 4.0)).unwrap();
        assert_abs_diff_eq!(l, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn endpoint_projects_to_zero() {
        let lumen = straight();
        let l = lumen.closest_param(Vec3::new(0.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(l, 0.0, epsilon = 1e-9);
        // beyond the start still clamps to 0
        let l = lumen.closest_param(Vec3::new(0.0, 2.0, -3.0)).unwrap();
        assert_abs_diff_eq!(l, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn l_shaped_polyline_second_leg() {
        let lumen = LumenCurve::polyline(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 5.0),
            Vec3::new(5.0, 0.0, 5.0),
        ])
        .unwrap();
        // Expected value from a brute-force scan over 1e6 uniform arc samples.
        let point = Vec3::new(1.0, 0.0, 6.0);
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..1_000_000 {
            let l = lumen.total_length() * k as f64 / 999_999.0;
            let d = (point - lumen.point_at(l).unwrap()).norm_squared();
            if d < best.0 {
                best = (d, l);
            }
        }
        assert_abs_diff_eq!(best.1, 6.0, epsilon = 1e-4);
        let l = lumen.closest_param(point).unwrap();
        assert_abs_diff_eq!(l, 6.0, epsilon = 1e-9);
    }

    #[test]
    fn refinement_not_worse_than_dense_sample() {
        let lumen = LumenCurve::catmull_rom(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(-1.0, 4.0, 6.0),
            Vec3::new(0.5, 5.0, 9.0),
        ])
        .unwrap();
        let point = Vec3::new(0.3, 2.5, 4.0);
        let refined = lumen.closest_param(point).unwrap();
        let d_refined = (point - lumen.point_at(refined).unwrap()).norm();
        let mut d_dense = f64::INFINITY;
        for k in 0..CLOSEST_SAMPLES {
            let l = lumen.total_length() * k as f64 / (CLOSEST_SAMPLES - 1) as f64;
            d_dense = d_dense.min((point - lumen.point_at(l).unwrap()).norm());
        }
        assert!(d_refined <= d_dense + 1e-15);
    }

    #[test]
    fn rigid_invariance() {
        use nalgebra::Rotation3;
        let lumen = LumenCurve::catmull_rom(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 4.0),
            Vec3::new(2.0, 1.5, 8.0),
            Vec3::new(2.0, 0.0, 12.0),
        ])
        .unwrap();
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 0.7);
        let shift = Vec3::new(5.0, -2.0, 1.0);
        let moved = LumenCurve::catmull_rom(
            lumen
                .control_points()
                .iter()
                .map(|p| rot * p + shift)
                .collect(),
        )
        .unwrap();
        for point in [
            Vec3::new(1.0, 0.5, 3.0),
            Vec3::new(-2.0, 2.0, 9.0),
            Vec3::new(0.0, 0.0, 14.0),
        ] {
            let a = lumen.closest_param(point).unwrap();
            let b = moved.closest_param(rot * point + shift).unwrap();
            let scale = a.abs().max(1.0);
            assert!(
                (a - b).abs() <= 1e-9 * scale,
                "rigid invariance violated: {a} vs {b}"
            );
        }
    }

    #[test]
    fn out_of_range_arclen_is_error() {
        let lumen = straight();
        assert!(lumen.point_at(-0.1).is_err());
        assert!(lumen.point_at(10.1).is_err());
        assert!(lumen.point_at(10.0).is_ok());
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(LumenCurve::polyline(vec![Vec3::new(0.0, 0.0, 0.0)]).is_err());
        assert!(LumenCurve::polyline(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 0.0),
        ])
        .is_err());
        assert!(LumenCurve::polyline(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, f64::NAN),
        ])
        .is_err());
    }

    #[test]
    fn non_finite_query_is_error() {
        let lumen = straight();
        assert!(lumen.closest_param(Vec3::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn arc_table_is_strictly_increasing() {
        let lumen = LumenCurve::catmull_rom(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 2.0),
            Vec3::new(1.0, 1.0, 4.0),
        ])
        .unwrap();
        for w in lumen.arc_table.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert_eq!(lumen.arc_table[0], 0.0);
        assert_abs_diff_eq!(
            *lumen.arc_table.last().unwrap(),
            lumen.total_length(),
            epsilon = 0.0
        );
    }
}
