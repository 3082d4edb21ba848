//! Downstream performance under perturbation and its relation to robustness.
//!
//! Per-image performance is `ACC_p` (fraction of sampled parameters whose
//! perturbed image is classified correctly) or `RMSE_p` (mean over sampled
//! parameters of the per-map depth RMSE). Robustness values predict these
//! through an ordinary-least-squares line fitted on one half of the images
//! and evaluated on the other.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Embedding;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DownstreamError {
    #[error("empty input")]
    EmptyInput,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("all robustness values are equal; fell back to the mean")]
    DegenerateFit { fallback: LinearModel },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("need at least {need} pairs, got {got}")]
    TooFewPairs { need: usize, got: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid depth map: {0}")]
    InvalidDepth(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceKind {
    Accuracy,
    Rmse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub image_id: String,
    pub perturbation_id: String,
    pub value: f64,
    pub kind: PerformanceKind,
}

/// Fraction of correct predictions over the sampled parameters.
pub fn acc_p(correct: &[bool]) -> Result<f64, DownstreamError> {
    if correct.is_empty() {
        return Err(DownstreamError::EmptyInput);
    }
    Ok(correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64)
}

/// Ground-truth or predicted depth, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, DownstreamError> {
        if width * height == 0 || values.len() != width * height {
            return Err(DownstreamError::InvalidDepth(format!(
                "{} values for {width}x{height}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DownstreamError::InvalidDepth("values must be finite and non-negative".into()));
        }
        Ok(Self { width, height, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Root mean squared difference to `other`.
    pub fn rmse(&self, other: &Self) -> Result<f64, DownstreamError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(DownstreamError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let sq: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((sq / self.values.len() as f64).sqrt())
    }
}

/// Mean of the per-map RMSEs (not the RMSE of pooled errors).
pub fn rmse_p(gt: &DepthMap, preds: &[DepthMap]) -> Result<f64, DownstreamError> {
    if preds.is_empty() {
        return Err(DownstreamError::EmptyInput);
    }
    let mut total = 0.0;
    for p in preds {
        total += gt.rmse(p)?;
    }
    Ok(total / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, robustness: f64) -> f64 {
        self.slope * robustness + self.intercept
    }

    /// Mean squared residual over `pairs`.
    pub fn mse(&self, pairs: &[(f64, f64)]) -> Result<f64, DownstreamError> {
        if pairs.is_empty() {
            return Err(DownstreamError::EmptyInput);
        }
        let sum: f64 = pairs.iter().map(|&(x, y)| (y - self.predict(x)).powi(2)).sum();
        Ok(sum / pairs.len() as f64)
    }
}

/// Mean computed relative to the first element; exact for constant series.
fn anchored_mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = xs.clone();
    let Some(anchor) = it.next() else { return f64::NAN };
    let n = xs.clone().count() as f64;
    anchor + xs.map(|x| x - anchor).sum::<f64>() / n
}

/// Ordinary least squares of performance on robustness.
///
/// When every robustness value is equal the slope is undefined; the error
/// carries the fallback `slope = 0, intercept = mean performance`.
pub fn fit_linear(pairs: &[(f64, f64)]) -> Result<LinearModel, DownstreamError> {
    if pairs.len() < 2 {
        return Err(DownstreamError::TooFewPairs { need: 2, got: pairs.len() });
    }
    let mx = anchored_mean(pairs.iter().map(|p| p.0));
    let my = anchored_mean(pairs.iter().map(|p| p.1));
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(DownstreamError::DegenerateFit {
            fallback: LinearModel { slope: 0.0, intercept: my },
        });
    }
    let slope = sxy / sxx;
    Ok(LinearModel {
        slope,
        intercept: my - slope * mx,
    })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, DownstreamError> {
    if xs.len() != ys.len() {
        return Err(DownstreamError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(DownstreamError::TooFewPairs { need: 2, got: xs.len() });
    }
    let mx = anchored_mean(xs.iter().copied());
    let my = anchored_mean(ys.iter().copied());
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(DownstreamError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileGroup {
    pub size: usize,
    pub mean_robustness: f64,
    pub mean_performance: f64,
}

/// Sorts by robustness (stable) and averages four contiguous groups. With
/// `n = 4q + r` the first `r` groups hold `q + 1` pairs.
pub fn quartile_groups(pairs: &[(f64, f64)]) -> Result<[QuartileGroup; 4], DownstreamError> {
    let n = pairs.len();
    if n < 4 {
        return Err(DownstreamError::TooFewPairs { need: 4, got: n });
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (q, r) = (n / 4, n % 4);
    let mut start = 0;
    Ok(std::array::from_fn(|g| {
        let size = q + usize::from(g < r);
        let group = &sorted[start..start + size];
        start += size;
        QuartileGroup {
            size,
            mean_robustness: group.iter().map(|p| p.0).sum::<f64>() / size as f64,
            mean_performance: group.iter().map(|p| p.1).sum::<f64>() / size as f64,
        }
    }))
}

/// Seeded shuffle, then first half / second half. The first half gets the
/// extra element when the count is odd.
pub fn split_halves<T: Clone>(items: &[T], seed: u64) -> (Vec<T>, Vec<T>) {
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut seed::rng_from(&[seed, 0x5_9117]));
    let cut = shuffled.len().div_ceil(2);
    let test = shuffled.split_off(cut);
    (shuffled, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub slope: f64,
    pub intercept: f64,
    pub train_mse: f64,
    pub test_mse: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Fits on the first half of a seeded split and evaluates on the second.
pub fn predict_report(pairs: &[(f64, f64)], seed: u64) -> Result<PredictionReport, DownstreamError> {
    if pairs.len() < 4 {
        return Err(DownstreamError::TooFewPairs { need: 4, got: pairs.len() });
    }
    let (train, test) = split_halves(pairs, seed);
    let model = fit_linear(&train)?;
    Ok(PredictionReport {
        slope: model.slope,
        intercept: model.intercept,
        train_mse: model.mse(&train)?,
        test_mse: model.mse(&test)?,
        n_train: train.len(),
        n_test: test.len(),
        seed,
    })
}

/// Nearest-centroid classifier on embeddings (cosine similarity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyClassifier {
    pub centroids: Vec<Embedding>,
    pub class_names: Vec<String>,
}

impl ToyClassifier {
    /// Centroid of each class is the re-normalized mean of its embeddings.
    pub fn fit(labeled: &[(Embedding, usize)], class_names: Vec<String>) -> Result<Self, DownstreamError> {
        let first = labeled.first().ok_or(DownstreamError::EmptyInput)?;
        let dim = first.0.dim();
        let mut sums = vec![vec![0.0; dim]; class_names.len()];
        for (e, label) in labeled {
            if e.dim() != dim {
                return Err(DownstreamError::DimensionMismatch(format!("{} vs {dim}", e.dim())));
            }
            let sum = sums
                .get_mut(*label)
                .ok_or_else(|| DownstreamError::DimensionMismatch(format!("label {label} has no class name")))?;
            sum.iter_mut().zip(e.as_slice()).for_each(|(s, x)| *s += x);
        }
        let centroids = sums
            .into_iter()
            .map(|s| Embedding::normalize(s).map_err(|e| DownstreamError::DimensionMismatch(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { centroids, class_names })
    }

    /// Class with the highest cosine similarity; ties go to the lowest index.
    pub fn predict(&self, e: &Embedding) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, c) in self.centroids.iter().enumerate() {
            let s = c.cosine(e);
            if s > best.1 {
                best = (i, s);
            }
        }
        best.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{Embedder, ToyEmbedder};
    use crate::metrics::SamplingPlan;
    use crate::perturb::{PerturbationKind, PerturbationSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn acc_p_examples() {
        assert_eq!(acc_p(&[true; 5]).unwrap(), 1.0);
        assert_eq!(acc_p(&[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(acc_p(&[]), Err(DownstreamError::EmptyInput));
    }

    #[test]
    fn rmse_p_examples() {
        let gt = DepthMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(rmse_p(&gt, &[gt.clone(), gt.clone()]).unwrap(), 0.0);

        let shifted = DepthMap::new(2, 2, vec![1.5, 2.5, 3.5, 4.5]).unwrap();
        assert_abs_diff_eq!(rmse_p(&gt, &[shifted]).unwrap(), 0.5, epsilon = 1e-15);

        let flat = DepthMap::new(2, 1, vec![5.0, 5.0]).unwrap();
        let off1 = DepthMap::new(2, 1, vec![6.0, 4.0]).unwrap();
        let off3 = DepthMap::new(2, 1, vec![8.0, 2.0]).unwrap();
        assert_abs_diff_eq!(rmse_p(&flat, &[off1.clone(), off3.clone()]).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(rmse_p(&flat, &[off3, off1]).unwrap(), 2.0);

        assert!(matches!(rmse_p(&gt, &[flat]), Err(DownstreamError::DimensionMismatch(_))));
        assert!(DepthMap::new(1, 1, vec![-1.0]).is_err());
    }

    #[test]
    fn fit_exact_line() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.1, 2.0 * i as f64 * 0.1 + 1.0)).collect();
        let m = fit_linear(&pairs).unwrap();
        assert_abs_diff_eq!(m.slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.intercept, 1.0, epsilon = 1e-12);
        assert!(m.mse(&pairs).unwrap() < 1e-24);
        assert_abs_diff_eq!(m.predict(0.25), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn fit_recovers_noisy_slope() {
        let mut rng = seed::rng_from(&[77]);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let pairs: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let x = i as f64 / 199.0;
                (x, -0.3 * x + 0.9 + noise.sample(&mut rng))
            })
            .collect();
        let m = fit_linear(&pairs).unwrap();
        assert!((m.slope + 0.3).abs() <= 0.02, "slope {}", m.slope);
    }

    #[test]
    fn degenerate_fit_falls_back_to_mean() {
        let pairs = [(0.4, 1.0), (0.4, 2.0), (0.4, 4.5)];
        match fit_linear(&pairs) {
            Err(DownstreamError::DegenerateFit { fallback }) => {
                assert_eq!(fallback.slope, 0.0);
                assert_abs_diff_eq!(fallback.intercept, 2.5, epsilon = 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(fit_linear(&[(1.0, 1.0)]), Err(DownstreamError::TooFewPairs { .. })));
    }

    #[test]
    fn pearson_examples() {
        let xs = [0.1, 0.5, 0.2, 0.9];
        assert_abs_diff_eq!(pearson(&xs, &xs).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_abs_diff_eq!(pearson(&xs, &neg).unwrap(), -1.0, epsilon = 1e-15);
        // Sxy = 3, Sxx = 2, Syy = 42/9 by hand
        assert_abs_diff_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 9.0 / 84f64.sqrt(), epsilon = 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(DownstreamError::ZeroVariance));
        assert!(pearson(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quartile_examples() {
        let pairs: Vec<(f64, f64)> = (1..=8).rev().map(|i| (i as f64, i as f64)).collect();
        let g = quartile_groups(&pairs).unwrap();
        let means: Vec<(f64, f64)> = g.iter().map(|q| (q.mean_robustness, q.mean_performance)).collect();
        assert_eq!(means, vec![(1.5, 1.5), (3.5, 3.5), (5.5, 5.5), (7.5, 7.5)]);

        let five: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 0.0)).collect();
        let sizes: Vec<usize> = quartile_groups(&five).unwrap().iter().map(|q| q.size).collect();
        assert_eq!(sizes, vec![2, 1, 1, 1]);

        let decreasing: Vec<(f64, f64)> = (0..23).map(|i| (i as f64 * 0.01, 1.0 - (i as f64 * 0.01).powi(2))).collect();
        let g = quartile_groups(&decreasing).unwrap();
        assert!(g.windows(2).all(|w| w[1].mean_performance < w[0].mean_performance));

        assert!(matches!(quartile_groups(&five[..3]), Err(DownstreamError::TooFewPairs { .. })));
    }

    #[test]
    fn split_is_seeded() {
        let items: Vec<usize> = (0..11).collect();
        let (a, b) = split_halves(&items, 4);
        assert_eq!((a.len(), b.len()), (6, 5));
        assert_eq!(split_halves(&items, 4), (a.clone(), b));
        assert_ne!(split_halves(&items, 5).0, a);
    }

    #[test]
    fn classifier_acc_p_equals_acc_without_perturbation() {
        let toy = ToyEmbedder::default();
        let corpus = crate::synthetic::labeled_corpus(20, 24, 24, 3);
        let labeled: Vec<(Embedding, usize)> = corpus
            .iter()
            .map(|(_, img, l)| (toy.embed(img).unwrap(), *l))
            .collect();
        let clf = ToyClassifier::fit(&labeled, vec!["warm".into(), "cool".into()]).unwrap();
        let spec = PerturbationSpec::new(PerturbationKind::GaussianNoise)
            .with_domain(0.0, 0.0)
            .unwrap();
        let params = SamplingPlan::default().parameters(spec.a, spec.b).unwrap();
        for (id, img, label) in &corpus {
            let clean_correct = clf.predict(&toy.embed(img).unwrap()) == *label;
            let flags: Vec<bool> = params
                .iter()
                .map(|&k| clf.predict(&toy.embed_perturbed(id, img, &spec, k, 0).unwrap()) == *label)
                .collect();
            assert_eq!(acc_p(&flags).unwrap(), if clean_correct { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn classifier_ties_go_to_lowest_index() {
        let e = Embedding::new(vec![1.0, 0.0]).unwrap();
        let clf = ToyClassifier {
            centroids: vec![e.clone(), e.clone()],
            class_names: vec!["a".into(), "b".into()],
        };
        assert_eq!(clf.predict(&e), 0);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariant(
            xs in prop::collection::vec(-5.0f64..5.0, 3..30),
            scale in 0.1f64..10.0,
            shift in -3.0f64..3.0,
        ) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * x + (i as f64).sin()).collect();
            let base = pearson(&xs, &ys);
            prop_assume!(base.is_ok());
            let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
            prop_assert!((pearson(&moved, &ys).unwrap() - base.unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn fit_on_own_predictions_is_exact(
            xs in prop::collection::vec(-1.0f64..1.0, 2..40),
            slope in -3.0f64..3.0,
            intercept in -1.0f64..1.0,
        ) {
            let pairs: Vec<(f64, f64)> = xs.iter().map(|&x| (x, slope * x + intercept)).collect();
            match fit_linear(&pairs) {
                Ok(m) => {
                    let refit: Vec<(f64, f64)> = xs.iter().map(|&x| (x, m.predict(x))).collect();
                    prop_assert!(fit_linear(&refit).unwrap().mse(&refit).unwrap() <= 1e-18);
                }
                Err(DownstreamError::DegenerateFit { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn rmse_p_permutation_invariant(vals in prop::collection::vec(0.0f64..10.0, 4 * 3)) {
            let gt = DepthMap::new(2, 2, vec![1.0; 4]).unwrap();
            let preds: Vec<DepthMap> = vals.chunks(4).map(|c| DepthMap::new(2, 2, c.to_vec()).unwrap()).collect();
            let rev: Vec<DepthMap> = preds.iter().rev().cloned().collect();
            prop_assert!((rmse_p(&gt, &preds).unwrap() - rmse_p(&gt, &rev).unwrap()).abs() <= 1e-12);
            prop_assert_eq!(rmse_p(&gt, &preds[..1]).unwrap(), gt.rmse(&preds[0]).unwrap());
        }
    }
}
