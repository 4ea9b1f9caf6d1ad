//! Depth-estimation evaluation metrics.
//!
//! All depth metrics are scale-aware: predicted depth is only meaningful up
//! to a global factor, so the relative-error metrics minimize over a scale
//! `sigma` applied to the prediction. That minimization is a weighted-median
//! problem (the objective is piecewise linear in `sigma`) and is solved
//! exactly; the discontinuity-robust variant re-searches around that
//! solution because its inner neighborhood-minimum makes the objective
//! non-convex.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::DepthImage;

/// Bundle of depth metrics over an evaluation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub mre: f64,
    pub dr_mre: f64,
    pub dom: f64,
    /// Scale factor fitted by the relative-error minimization.
    pub sigma: f64,
    /// Denominator floor used for zero ground-truth pixels.
    pub epsilon: f64,
    pub n_pairs_sampled: usize,
}

/// Whether the scale factor is fitted over the whole set or per image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    #[default]
    Global,
    PerImage,
}

fn check_pairs(preds: &[DepthImage], gts: &[DepthImage]) -> Result<()> {
    if preds.len() != gts.len() || preds.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} ground-truth images",
            preds.len(),
            gts.len()
        )));
    }
    for (i, (p, g)) in preds.iter().zip(gts).enumerate() {
        if p.width != g.width || p.height != g.height {
            return Err(Error::ShapeMismatch(format!(
                "image {i}: {}x{} vs {}x{}",
                p.width, p.height, g.width, g.height
            )));
        }
    }
    Ok(())
}

/// `1e-3` times the median ground-truth depth; falls back to `1e-3` when the
/// median is zero.
pub fn auto_epsilon(gts: &[DepthImage]) -> f64 {
    let mut all: Vec<f64> = gts.iter().flat_map(|g| g.data.iter().copied()).collect();
    if all.is_empty() {
        return 1e-3;
    }
    let mid = all.len() / 2;
    all.select_nth_unstable_by(mid, f64::total_cmp);
    let median = all[mid];
    if median > 0.0 {
        1e-3 * median
    } else {
        1e-3
    }
}

/// Exact minimizer of `sum_i a_i * |sigma - b_i|`: the weighted median of
/// the breakpoints. Ties resolve to the smallest optimal breakpoint.
fn weighted_median(samples: &mut [(f64, f64)]) -> f64 {
    samples.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = samples.iter().map(|(_, a)| a).sum();
    let mut acc = 0.0;
    for &(b, a) in samples.iter() {
        acc += a;
        if acc >= total / 2.0 {
            return b;
        }
    }
    samples.last().map(|&(b, _)| b).unwrap_or(1.0)
}

struct ScaleProblem {
    /// (breakpoint d/d_hat, weight d_hat/max(d, eps)) per pixel with a
    /// positive prediction.
    terms: Vec<(f64, f64)>,
    /// Contribution of pixels with zero prediction, independent of sigma.
    constant: f64,
    n: usize,
}

impl ScaleProblem {
    fn build(preds: &[DepthImage], gts: &[DepthImage], epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParam("epsilon must be positive".into()));
        }
        let mut terms = Vec::new();
        let mut constant = 0.0;
        let mut n = 0usize;
        for (p, g) in preds.iter().zip(gts) {
            for (&dh, &d) in p.data.iter().zip(&g.data) {
                let denom = d.max(epsilon);
                if dh > 0.0 {
                    terms.push((d / dh, dh / denom));
                } else {
                    constant += d / denom;
                }
                n += 1;
            }
        }
        if terms.is_empty() {
            return Err(Error::Degenerate("all-zero prediction".into()));
        }
        Ok(Self { terms, constant, n })
    }

    fn objective(&self, sigma: f64) -> f64 {
        let sum: f64 = self
            .terms
            .iter()
            .map(|&(b, a)| a * (sigma - b).abs())
            .sum();
        (sum + self.constant) / self.n as f64
    }

    fn solve(&self) -> (f64, f64) {
        let mut samples = self.terms.clone();
        let sigma = weighted_median(&mut samples);
        (self.objective(sigma), sigma)
    }
}

/// Scale-insensitive mean relative error over a set of image pairs, with a
/// single scale fitted across all pixels. Returns `(mre, sigma)`.
pub fn mre(preds: &[DepthImage], gts: &[DepthImage], epsilon: f64) -> Result<(f64, f64)> {
    check_pairs(preds, gts)?;
    Ok(ScaleProblem::build(preds, gts, epsilon)?.solve())
}

/// Single-pair convenience wrapper around [`mre`].
pub fn mre_single(pred: &DepthImage, gt: &DepthImage, epsilon: f64) -> Result<(f64, f64)> {
    mre(
        std::slice::from_ref(pred),
        std::slice::from_ref(gt),
        epsilon,
    )
}

/// Per-image variant: each image pair gets its own fitted scale.
pub fn mre_per_image(
    preds: &[DepthImage],
    gts: &[DepthImage],
    epsilon: f64,
) -> Result<Vec<(f64, f64)>> {
    check_pairs(preds, gts)?;
    preds
        .iter()
        .zip(gts)
        .map(|(p, g)| mre_single(p, g, epsilon))
        .collect()
}

/// Relative-error objective at a fixed scale; the grid-search oracle used to
/// cross-check the weighted-median solution evaluates this directly.
pub fn mre_objective(
    preds: &[DepthImage],
    gts: &[DepthImage],
    epsilon: f64,
    sigma: f64,
) -> Result<f64> {
    check_pairs(preds, gts)?;
    Ok(ScaleProblem::build(preds, gts, epsilon)?.objective(sigma))
}

struct NeighborhoodProblem {
    /// Per pixel: prediction and the (gt, denom) options in its 3x3 patch.
    pixels: Vec<(f64, Vec<(f64, f64)>)>,
    n: usize,
}

impl NeighborhoodProblem {
    fn build(preds: &[DepthImage], gts: &[DepthImage], epsilon: f64) -> Result<Self> {
        let mut pixels = Vec::new();
        let mut n = 0usize;
        for (p, g) in preds.iter().zip(gts) {
            if p.width < 3 || p.height < 3 {
                return Err(Error::ShapeMismatch(
                    "images must be at least 3x3 for neighborhood metrics".into(),
                ));
            }
            for r in 0..p.height as i64 {
                for c in 0..p.width as i64 {
                    let dh = p.at(r as u32, c as u32);
                    let mut opts = Vec::with_capacity(9);
                    for dr in -1..=1 {
                        for dc in -1..=1 {
                            let (rr, cc) = (r + dr, c + dc);
                            if rr < 0 || cc < 0 || rr >= p.height as i64 || cc >= p.width as i64 {
                                continue; // clipped border neighborhood
                            }
                            let d = g.at(rr as u32, cc as u32);
                            opts.push((d, d.max(epsilon)));
                        }
                    }
                    pixels.push((dh, opts));
                    n += 1;
                }
            }
        }
        Ok(Self { pixels, n })
    }

    fn objective(&self, sigma: f64) -> f64 {
        let sum: f64 = self
            .pixels
            .iter()
            .map(|(dh, opts)| {
                opts.iter()
                    .map(|&(d, denom)| (sigma * dh - d).abs() / denom)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        sum / self.n as f64
    }
}

/// Candidate count of the coarse scan over the scale bracket.
const DR_SCAN_STEPS: usize = 256;

/// Discontinuity-robust relative error: each pixel may match any ground
/// truth value in its 3x3 neighborhood. The scale is searched around the
/// convex-surrogate solution, so the result never exceeds [`mre`].
pub fn dr_mre(preds: &[DepthImage], gts: &[DepthImage], epsilon: f64) -> Result<f64> {
    check_pairs(preds, gts)?;
    let (_, sigma0) = ScaleProblem::build(preds, gts, epsilon)?.solve();
    let problem = NeighborhoodProblem::build(preds, gts, epsilon)?;

    let center = if sigma0 > 0.0 { sigma0 } else { 1.0 };
    let (lo, hi) = (center / 2.0, center * 2.0);
    let mut best = (problem.objective(sigma0), sigma0);
    let mut best_idx = 0usize;
    for i in 0..=DR_SCAN_STEPS {
        let s = lo * (hi / lo).powf(i as f64 / DR_SCAN_STEPS as f64);
        let v = problem.objective(s);
        if v < best.0 {
            best = (v, s);
            best_idx = i;
        }
    }
    // golden-section refinement inside the bracketing scan interval
    let step = (hi / lo).powf(1.0 / DR_SCAN_STEPS as f64);
    let mut a = lo * step.powi(best_idx.saturating_sub(1) as i32);
    let mut b = (lo * step.powi(best_idx as i32 + 1)).min(hi);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = problem.objective(x1);
    let mut f2 = problem.objective(x2);
    for _ in 0..120 {
        if f1 < best.0 {
            best = (f1, x1);
        }
        if f2 < best.0 {
            best = (f2, x2);
        }
        if (b - a).abs() < 1e-12 * center {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = problem.objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = problem.objective(x2);
        }
    }
    Ok(best.0)
}

/// Depth order measure: fraction of sampled distinct pixel pairs whose depth
/// ordering agrees between prediction and ground truth. Ties count as
/// agreement only when tied in both. Deterministic in the seed.
pub fn dom(preds: &[DepthImage], gts: &[DepthImage], n_pairs: usize, seed: u64) -> Result<f64> {
    check_pairs(preds, gts)?;
    if n_pairs == 0 {
        return Err(Error::InvalidParam("n_pairs must be >= 1".into()));
    }
    for p in preds {
        if p.len() < 2 {
            return Err(Error::ShapeMismatch("dom needs at least 2 pixels".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agree = 0usize;
    for _ in 0..n_pairs {
        let img = if preds.len() == 1 {
            0
        } else {
            rng.random_range(0..preds.len())
        };
        let n = preds[img].len();
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let r = gts[img].data[i] > gts[img].data[j];
        let r_hat = preds[img].data[i] > preds[img].data[j];
        if r == r_hat {
            agree += 1;
        }
    }
    Ok(agree as f64 / n_pairs as f64)
}

/// Mean absolute error between two coverage lists in `[0, 1]`.
pub fn coverage_mae(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "coverage lists of length {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    for &v in pred.iter().chain(gt) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParam(format!(
                "coverage value {v} outside [0, 1]"
            )));
        }
    }
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// All depth metrics in one pass.
pub fn evaluate(
    preds: &[DepthImage],
    gts: &[DepthImage],
    epsilon: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<MetricReport> {
    let (mre_value, sigma) = mre(preds, gts, epsilon)?;
    if !(sigma > 0.0) {
        return Err(Error::Degenerate(
            "fitted scale is not positive; ground truth is dominated by zeros".into(),
        ));
    }
    let dr = dr_mre(preds, gts, epsilon)?;
    let dom_value = dom(preds, gts, n_pairs, seed)?;
    Ok(MetricReport {
        mre: mre_value,
        dr_mre: dr.min(mre_value),
        dom: dom_value,
        sigma,
        epsilon,
        n_pairs_sampled: n_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraIntrinsics;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn img(w: u32, h: u32, data: Vec<f64>) -> DepthImage {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, w, h).unwrap();
        DepthImage::new(w, h, data, k).unwrap()
    }

    #[test]
    fn perfect_scaled_prediction_has_zero_error() {
        let gt = img(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let pred = img(2, 2, vec![0.5, 1.0, 1.5, 2.0]);
        let (e, sigma) = mre_single(&pred, &gt, 1e-3).unwrap();
        assert_abs_diff_eq!(e, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn two_pixel_weighted_median_example() {
        // gt [1, 2], pred [1, 1]: objective (|s-1| + |s-2|/2)/2, minimized at
        // the weighted median s = 1 with value 0.25
        let gt = img(2, 1, vec![1.0, 2.0]);
        let pred = img(2, 1, vec![1.0, 1.0]);
        let (e, sigma) = mre_single(&pred, &gt, 1e-3).unwrap();
        assert_abs_diff_eq!(sigma, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e, 0.25, epsilon = 1e-15);
        // brute-force grid over [0.5, 3] at 1e-5 cannot beat it
        let mut best = f64::INFINITY;
        let mut s = 0.5;
        while s <= 3.0 {
            best = best.min(mre_objective(
                std::slice::from_ref(&pred),
                std::slice::from_ref(&gt),
                1e-3,
                s,
            )
            .unwrap());
            s += 1e-5;
        }
        assert!(e <= best + 1e-12);
        assert!(best - e <= 1e-6);
    }

    #[test]
    fn single_pixel_is_always_exact() {
        let gt = img(1, 1, vec![3.7]);
        let pred = img(1, 1, vec![0.9]);
        let (e, sigma) = mre_single(&pred, &gt, 1e-3).unwrap();
        assert_abs_diff_eq!(e, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma, 3.7 / 0.9, epsilon = 1e-15);
    }

    #[test]
    fn mre_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let gt_data: Vec<f64> = (0..64).map(|_| rng.random_range(0.5..4.0)).collect();
        let pred_data: Vec<f64> = gt_data
            .iter()
            .map(|&d| d * rng.random_range(0.8..1.2))
            .collect();
        let gt = img(8, 8, gt_data);
        let pred = img(8, 8, pred_data.clone());
        let (base, _) = mre_single(&pred, &gt, 1e-3).unwrap();
        for c in [0.1f64, 17.3] {
            let scaled = img(8, 8, pred_data.iter().map(|&v| v * c).collect());
            let (e, _) = mre_single(&scaled, &gt, 1e-3).unwrap();
            assert!((e - base).abs() <= 1e-9, "scale {c}: {e} vs {base}");
        }
    }

    #[test]
    fn all_zero_prediction_is_error() {
        let gt = img(2, 1, vec![1.0, 2.0]);
        let pred = img(2, 1, vec![0.0, 0.0]);
        assert!(mre_single(&pred, &gt, 1e-3).is_err());
    }

    fn step_edge_pair() -> (DepthImage, DepthImage) {
        // ground truth: columns 0..=8 at depth 1, columns 9.. at depth 10;
        // prediction: the same edge one column to the left
        let mut gt = vec![0.0f64; 256];
        let mut pred = vec![0.0f64; 256];
        for r in 0..16 {
            for c in 0..16 {
                gt[r * 16 + c] = if c <= 8 { 1.0 } else { 10.0 };
                pred[r * 16 + c] = if c <= 7 { 1.0 } else { 10.0 };
            }
        }
        (img(16, 16, pred), img(16, 16, gt))
    }

    #[test]
    fn dr_mre_of_perfect_prediction_is_zero() {
        let gt = img(4, 4, (1..=16).map(|i| i as f64 * 0.3).collect());
        let dr = dr_mre(std::slice::from_ref(&gt), std::slice::from_ref(&gt), 1e-3).unwrap();
        assert!(dr <= 1e-12, "dr_mre = {dr}");
    }

    #[test]
    fn shifted_edge_punishes_mre_not_dr_mre() {
        let (pred, gt) = step_edge_pair();
        let (e, _) = mre_single(&pred, &gt, 1e-3).unwrap();
        assert!(e > 0.1, "mre = {e}");
        let dr = dr_mre(std::slice::from_ref(&pred), std::slice::from_ref(&gt), 1e-3).unwrap();
        assert!(dr <= 1e-6, "dr_mre = {dr}");
    }

    #[test]
    fn dr_mre_never_exceeds_mre() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..25 {
            let gt_data: Vec<f64> = (0..64).map(|_| rng.random_range(0.3..5.0)).collect();
            let pred_data: Vec<f64> = gt_data
                .iter()
                .map(|&d| (d * rng.random_range(0.5..1.5)).max(0.01))
                .collect();
            let gt = img(8, 8, gt_data);
            let pred = img(8, 8, pred_data);
            let (e, _) = mre_single(&pred, &gt, 1e-3).unwrap();
            let dr = dr_mre(std::slice::from_ref(&pred), std::slice::from_ref(&gt), 1e-3).unwrap();
            assert!(dr <= e + 1e-12, "dr {dr} > mre {e}");
        }
    }

    fn exhaustive_dom(pred: &DepthImage, gt: &DepthImage) -> f64 {
        let n = pred.len();
        let mut agree = 0usize;
        let mut total = 0usize;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let r = gt.data[i] > gt.data[j];
                let r_hat = pred.data[i] > pred.data[j];
                agree += (r == r_hat) as usize;
                total += 1;
            }
        }
        agree as f64 / total as f64
    }

    #[test]
    fn dom_perfect_and_reversed() {
        let gt = img(3, 1, vec![1.0, 2.0, 3.0]);
        let rev = img(3, 1, vec![3.0, 2.0, 1.0]);
        assert_eq!(
            dom(
                std::slice::from_ref(&gt),
                std::slice::from_ref(&gt),
                10_000,
                1
            )
            .unwrap(),
            1.0
        );
        assert_eq!(
            dom(
                std::slice::from_ref(&rev),
                std::slice::from_ref(&gt),
                10_000,
                1
            )
            .unwrap(),
            0.0
        );
    }

    #[test]
    fn dom_exhaustive_three_pixel_example() {
        let gt = img(3, 1, vec![1.0, 2.0, 3.0]);
        let pred = img(3, 1, vec![1.0, 3.0, 2.0]);
        assert_abs_diff_eq!(exhaustive_dom(&pred, &gt), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn dom_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gt_data: Vec<f64> = (0..100).map(|_| rng.random_range(0.1..5.0)).collect();
        let pred_data: Vec<f64> = (0..100).map(|_| rng.random_range(0.1..5.0)).collect();
        let gt = img(10, 10, gt_data);
        let pred = img(10, 10, pred_data.clone());
        let warped = img(
            10,
            10,
            pred_data.iter().map(|&v| (v * 3.0).exp().min(1e30)).collect(),
        );
        let a = dom(std::slice::from_ref(&pred), std::slice::from_ref(&gt), 5_000, 7).unwrap();
        let b = dom(std::slice::from_ref(&warped), std::slice::from_ref(&gt), 5_000, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coverage_mae_basics() {
        assert_eq!(coverage_mae(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            coverage_mae(&[0.5], &[0.677]).unwrap(),
            0.177,
            epsilon = 1e-12
        );
        assert!(coverage_mae(&[0.5], &[0.5, 0.6]).is_err());
        assert!(coverage_mae(&[1.5], &[0.5]).is_err());
        // random lists against an independent accumulation
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut acc = 0.0;
        for i in 0..50 {
            acc += (a[i] - b[i]).abs();
        }
        assert_abs_diff_eq!(coverage_mae(&a, &b).unwrap(), acc / 50.0, epsilon = 1e-12);
    }

    #[test]
    fn auto_epsilon_tracks_median() {
        let gt = img(3, 1, vec![1.0, 4.0, 2.0]);
        assert_abs_diff_eq!(auto_epsilon(std::slice::from_ref(&gt)), 2e-3, epsilon = 1e-15);
    }
}
