//! Colon world: surface mesh paired with its lumen centerline.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::Result;
use crate::lumen::LumenCurve;
use crate::mesh::ColonMesh;
use crate::Vec3;

/// Immutable pairing of a colon surface with its lumen curve.
///
/// All queries are pure; the per-vertex arc-length table is computed once on
/// first use and shared across threads.
#[derive(Debug)]
pub struct ColonWorld {
    pub mesh: ColonMesh,
    pub lumen: LumenCurve,
    /// World units per centimeter. The default of 1 means 1 unit = 1 cm.
    pub unit_scale: f64,
    arc_params: OnceLock<Vec<f64>>,
}

impl ColonWorld {
    pub fn new(mesh: ColonMesh, lumen: LumenCurve) -> Result<Self> {
        Ok(Self {
            mesh,
            lumen,
            unit_scale: 1.0,
            arc_params: OnceLock::new(),
        })
    }

    /// Arc length of the lumen point closest to `point` (ties toward the
    /// rectum end). Works for mesh points and camera positions alike.
    pub fn closest_lumen_param(&self, point: Vec3) -> Result<f64> {
        self.lumen.closest_param(point)
    }

    /// Closest lumen arc length for every mesh vertex, in vertex order.
    pub fn vertex_arc_params(&self) -> &[f64] {
        self.arc_params.get_or_init(|| {
            self.mesh
                .vertices()
                .par_iter()
                .map(|&v| self.lumen.closest_param(v).expect("finite mesh vertex"))
                .collect()
        })
    }

    /// Sum of vertex areas over a set of vertex ids.
    pub fn area_of(&self, ids: impl IntoIterator<Item = u32>) -> f64 {
        let areas = self.mesh.vertex_area();
        ids.into_iter().map(|i| areas[i as usize]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn straight_world() -> ColonWorld {
        let lumen = LumenCurve::polyline(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 10.0)])
            .unwrap();
        let vertices = vec![
            Vec3::new(1.0, 0.0, 4.0),
            Vec3::new(0.0, 1.0, 7.0),
            Vec3::new(1.0, 1.0, 2.0),
        ];
        let mesh = ColonMesh::new(vertices, vec![[0, 1, 2]]).unwrap();
        ColonWorld::new(mesh, lumen).unwrap()
    }

    #[test]
    fn vertex_arc_params_match_per_point_queries() {
        let world = straight_world();
        let table = world.vertex_arc_params();
        assert_abs_diff_eq!(table[0], 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(table[1], 7.0, epsilon = 1e-9);
        for (i, &v) in world.mesh.vertices().iter().enumerate() {
            assert_eq!(table[i], world.closest_lumen_param(v).unwrap());
        }
    }

    #[test]
    fn arc_params_match_dense_sampling_oracle() {
        let world = crate::gen::generate_colon(&crate::gen::ColonGenSpec {
            seed: 14,
            length: 20.0,
            base_radius: 2.0,
            fold_amplitude: 0.3,
            fold_count: 5,
            bend_amplitude: 2.0,
            axial_segments: 32,
            radial_segments: 16,
            ..Default::default()
        })
        .unwrap();
        let table = world.vertex_arc_params();
        let n_samples = 100_000;
        let total = world.lumen.total_length();
        for (i, &v) in world.mesh.vertices().iter().enumerate().step_by(37) {
            let mut best = (f64::INFINITY, 0.0);
            for s in 0..n_samples {
                let l = total * s as f64 / (n_samples - 1) as f64;
                let d = (v - world.lumen.point_at(l).unwrap()).norm_squared();
                if d < best.0 {
                    best = (d, l);
                }
            }
            assert!(
                (table[i] - best.1).abs() <= 2.0 * total / n_samples as f64,
                "vertex {i}: refined {} vs dense {}",
                table[i],
                best.1
            );
            // the refined point is never farther than the dense best
            let refined = (v - world.lumen.point_at(table[i]).unwrap()).norm_squared();
            assert!(refined <= best.0 + 1e-15);
        }
    }

    #[test]
    fn arc_param_table_is_deterministic() {
        let world = straight_world();
        let a = world.vertex_arc_params().to_vec();
        let b = world.vertex_arc_params().to_vec();
        assert_eq!(a, b);
        let world2 = straight_world();
        assert_eq!(a, world2.vertex_arc_params());
    }
}
