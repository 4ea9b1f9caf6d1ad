//! Moment-matching feature alignment: an affine map that transports one
//! feature distribution's mean and covariance onto another's.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalue floor applied before matrix square roots.
const EIGEN_FLOOR: f64 = 1e-8;

/// Row-major table of feature vectors (rows = samples).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    data: DMatrix<f64>,
}

impl FeatureTable {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature table entry"));
        }
        if data.ncols() == 0 || data.nrows() < data.ncols() + 1 {
            return Err(Error::InvalidParam(format!(
                "need at least d+1 = {} samples for {} feature dimensions, got {}",
                data.ncols() + 1,
                data.ncols(),
                data.nrows()
            )));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParam("empty feature table".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch("ragged feature rows".into()));
        }
        Self::new(DMatrix::from_row_iterator(
            rows.len(),
            d,
            rows.iter().flat_map(|r| r.iter().copied()),
        ))
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn mean(&self) -> DVector<f64> {
        let n = self.data.nrows() as f64;
        DVector::from_iterator(
            self.data.ncols(),
            self.data.column_iter().map(|c| c.sum() / n),
        )
    }

    /// Sample covariance with the n-1 normalization.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut centered = self.data.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        centered.transpose() * &centered / (self.data.nrows() as f64 - 1.0)
    }
}

/// Affine map `x -> linear * (x - source_mean) + target_mean`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAlignMap {
    pub linear: DMatrix<f64>,
    pub source_mean: DVector<f64>,
    pub target_mean: DVector<f64>,
}

impl MomentAlignMap {
    pub fn apply_vector(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * (x - &self.source_mean) + &self.target_mean
    }

    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        if table.dim() != self.source_mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "table dimension {} vs map dimension {}",
                table.dim(),
                self.source_mean.len()
            )));
        }
        let mut out = table.data.clone();
        for mut row in out.row_iter_mut() {
            let x = row.transpose();
            let y = &self.linear * (x - &self.source_mean) + &self.target_mean;
            row.copy_from(&y.transpose());
        }
        FeatureTable::new(out)
    }
}

/// Symmetric matrix function through an eigendecomposition with a floor on
/// the eigenvalues.
fn symmetric_power(m: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    for &l in eig.eigenvalues.iter() {
        if l < -1e-6 * scale {
            return Err(Error::Degenerate(format!(
                "covariance has a significantly negative eigenvalue {l}"
            )));
        }
    }
    let powered = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(EIGEN_FLOOR).powf(power)),
    );
    let mut scaled = eig.eigenvectors.clone();
    for (mut col, &p) in scaled.column_iter_mut().zip(powered.iter()) {
        col *= p;
    }
    Ok(scaled * eig.eigenvectors.transpose())
}

/// Fit the affine map that takes the source table's mean and covariance to
/// the target's, and return the transformed source table. The linear part
/// is `C_target^(1/2) * C_source^(-1/2)` with symmetric square roots.
pub fn coral_align(
    source: &FeatureTable,
    target: &FeatureTable,
) -> Result<(MomentAlignMap, FeatureTable)> {
    if source.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "source dimension {} vs target dimension {}",
            source.dim(),
            target.dim()
        )));
    }
    let c_src = source.covariance();
    let c_tgt = target.covariance();
    let linear = symmetric_power(&c_tgt, 0.5)? * symmetric_power(&c_src, -0.5)?;
    let map = MomentAlignMap {
        linear,
        source_mean: source.mean(),
        target_mean: target.mean(),
    };
    let aligned = map.apply(source)?;
    Ok((map, aligned))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_table(rng: &mut ChaCha8Rng, n: usize, d: usize, spread: f64, shift: f64) -> FeatureTable {
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            rows.push(
                (0..d)
                    .map(|j| shift + spread * (j as f64 + 1.0) * rng.random_range(-1.0..1.0))
                    .collect(),
            );
        }
        FeatureTable::from_rows(&rows).unwrap()
    }

    #[test]
    fn identical_statistics_give_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let table = random_table(&mut rng, 200, 4, 1.0, 0.5);
        let (map, aligned) = coral_align(&table, &table).unwrap();
        let eye = DMatrix::<f64>::identity(4, 4);
        assert!((map.linear.clone() - eye).norm() < 1e-9);
        assert!((map.target_mean.clone() - map.source_mean.clone()).norm() < 1e-9);
        assert!((aligned.matrix() - table.matrix()).norm() < 1e-9);
    }

    #[test]
    fn one_dimensional_closed_form() {
        // source: mean 2, variance 16; target: mean 0, variance 1
        // the map must be x -> (x - 2) / 4, so 6 -> 1
        // five points with exact mean 2 and sample variance 16
        let s = (16.0f64 * 4.0 / 2.0).sqrt();
        let source = FeatureTable::from_rows(&[
            vec![2.0 - s],
            vec![2.0 + s],
            vec![2.0],
            vec![2.0],
            vec![2.0],
        ])
        .unwrap();
        assert_abs_diff_eq!(source.covariance()[(0, 0)], 16.0, epsilon = 1e-12);
        let t = (1.0f64 * 4.0 / 2.0).sqrt();
        let target = FeatureTable::from_rows(&[
            vec![-t],
            vec![t],
            vec![0.0],
            vec![0.0],
            vec![0.0],
        ])
        .unwrap();
        assert_abs_diff_eq!(target.covariance()[(0, 0)], 1.0, epsilon = 1e-12);
        let (map, _) = coral_align(&source, &target).unwrap();
        let y = map.apply_vector(&DVector::from_vec(vec![6.0]));
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(map.linear[(0, 0)], 0.25, epsilon = 1e-9);
    }

    #[test]
    fn aligned_moments_match_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let source = random_table(&mut rng, 300, 6, 2.0, -1.0);
        let target = random_table(&mut rng, 260, 6, 0.7, 3.0);
        let (_, aligned) = coral_align(&source, &target).unwrap();
        assert!((aligned.mean() - target.mean()).norm() < 1e-6);
        assert!((aligned.covariance() - target.covariance()).norm() < 1e-6);
    }

    #[test]
    fn table_validation() {
        assert!(FeatureTable::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        // n must exceed the dimension
        assert!(FeatureTable::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).is_err());
        assert!(FeatureTable::from_rows(&[vec![f64::NAN]]).is_err());
        let a = FeatureTable::from_rows(&[vec![1.0], vec![2.0], vec![0.5]]).unwrap();
        let b = FeatureTable::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0], vec![0.5, -1.0]]).unwrap();
        assert!(coral_align(&a, &b).is_err());
    }
}
