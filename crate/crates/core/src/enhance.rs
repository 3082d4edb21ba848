//! Robustness-aware fine-tuning of a linear embedder.
//!
//! The trainable embedder is `f'(x) = W phi(x) / |W phi(x)|` over the toy raw
//! features `phi`. Training minimizes `L1 + lambda L2` where
//! `L1 = -mean cos(f'(x), f'(P(x, k)))` rewards stability under the
//! perturbation and `L2 = -mean cos(f(x), f'(x))` keeps `f'` close to the
//! frozen starting point `f`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, Embedder, ToyEmbedder};
use crate::metrics::{self, Embedding, InvalidEmbedding, MetricsError, SamplingPlan};
use crate::perturb::{self, Image, PerturbError, PerturbParam, PerturbationSpec};
use crate::seed;

/// Pre-normalization outputs below this norm have no usable gradient.
pub const MIN_OUTPUT_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("pre-normalization output norm {norm:e} is below {MIN_OUTPUT_NORM:e}")]
    GradientDegenerate { norm: f64 },
    #[error("non-finite weights or loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("feature length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Linear map over raw toy features followed by unit normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainableEmbedder {
    w: DMatrix<f64>,
    features: ToyEmbedder,
}

impl TrainableEmbedder {
    /// `W = I`, which reproduces `features` exactly.
    pub fn identity(features: ToyEmbedder) -> Self {
        let d = features.feature_dim();
        Self {
            w: DMatrix::identity(d, d),
            features,
        }
    }

    /// Identity plus seeded Gaussian noise of standard deviation `scale`.
    pub fn perturbed_identity(features: ToyEmbedder, scale: f64, seed: u64) -> Self {
        let mut out = Self::identity(features);
        let mut rng = seed::rng_from(&[seed, 0x7a11]);
        let normal = rand_distr::Normal::new(0.0, scale).expect("finite scale");
        out.w.iter_mut().for_each(|v| *v += rng.sample(normal));
        out
    }

    pub fn from_matrix(w: DMatrix<f64>, features: ToyEmbedder) -> Result<Self, EnhanceError> {
        if w.ncols() != features.feature_dim() {
            return Err(EnhanceError::DimensionMismatch {
                expected: features.feature_dim(),
                found: w.ncols(),
            });
        }
        if w.nrows() == 0 {
            return Err(EnhanceError::InvalidConfig("W has no rows".into()));
        }
        Ok(Self { w, features })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn features(&self) -> ToyEmbedder {
        self.features
    }

    pub fn d_out(&self) -> usize {
        self.w.nrows()
    }

    pub fn d_raw(&self) -> usize {
        self.w.ncols()
    }

    /// Normalized output for a precomputed feature vector.
    pub fn embed_features(&self, phi: &[f64]) -> Result<Embedding, EnhanceError> {
        let out = project(&self.w, phi)?;
        Ok(Embedding::normalize(out.u.iter().copied().collect()).map_err(EmbedError::from)?)
    }
}

impl Embedder for TrainableEmbedder {
    fn id(&self) -> String {
        format!("linear:{}x{}:grid{}", self.d_out(), self.d_raw(), self.features.grid)
    }

    fn dim(&self) -> usize {
        self.d_out()
    }

    fn embed(&self, image: &Image) -> Result<Embedding, EmbedError> {
        let phi = self.features.raw_features(image)?;
        self.embed_features(&phi).map_err(|e| match e {
            EnhanceError::Embed(e) => e,
            EnhanceError::GradientDegenerate { norm } => {
                EmbedError::InvalidEmbedding(InvalidEmbedding::NonUnitNorm {
                    norm,
                    tolerance: Embedding::NORM_TOLERANCE,
                })
            }
            other => EmbedError::Unsupported(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnhanceConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epochs: 50,
            learning_rate: 1e-5,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<(), EnhanceError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(EnhanceError::InvalidConfig(format!("lambda {} must be >= 0", self.lambda)));
        }
        // lr = 0 is accepted so a run can be used as a pure evaluation pass
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(EnhanceError::InvalidConfig(format!(
                "learning rate {} must be >= 0",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(EnhanceError::InvalidConfig("epochs and batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l1: f64,
    pub l2: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(l1: f64, l2: f64, lambda: f64) -> Self {
        Self {
            l1,
            l2,
            total: l1 + lambda * l2,
        }
    }
}

/// One training example in feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    /// `phi(x)`
    pub clean: Vec<f64>,
    /// `phi(P(x, k))`
    pub perturbed: Vec<f64>,
    /// `f(x)` from the frozen embedder.
    pub base: Vec<f64>,
}

struct Projected {
    u: DVector<f64>,
    norm: f64,
}

fn project(w: &DMatrix<f64>, phi: &[f64]) -> Result<Projected, EnhanceError> {
    if phi.len() != w.ncols() {
        return Err(EnhanceError::DimensionMismatch {
            expected: w.ncols(),
            found: phi.len(),
        });
    }
    let v = w * DVector::from_column_slice(phi);
    let norm = v.norm();
    if !(norm >= MIN_OUTPUT_NORM) {
        return Err(EnhanceError::GradientDegenerate { norm });
    }
    Ok(Projected { u: v / norm, norm })
}

fn check_base(w: &DMatrix<f64>, pair: &TrainingPair) -> Result<(), EnhanceError> {
    if pair.base.len() != w.nrows() {
        return Err(EnhanceError::DimensionMismatch {
            expected: w.nrows(),
            found: pair.base.len(),
        });
    }
    Ok(())
}

/// `L1`, `L2` and their weighted total over `pairs`.
pub fn pair_loss(w: &DMatrix<f64>, pairs: &[TrainingPair], lambda: f64) -> Result<LossBreakdown, EnhanceError> {
    if pairs.is_empty() {
        return Err(EnhanceError::EmptyInput);
    }
    let (mut c1, mut c2) = (0.0, 0.0);
    for pair in pairs {
        check_base(w, pair)?;
        let a = project(w, &pair.clean)?;
        let b = project(w, &pair.perturbed)?;
        c1 += a.u.dot(&b.u);
        c2 += a.u.iter().zip(&pair.base).map(|(x, y)| x * y).sum::<f64>();
    }
    let n = pairs.len() as f64;
    Ok(LossBreakdown::new(-c1 / n, -c2 / n, lambda))
}

/// Analytic `d total / d W`.
///
/// With `u = v / |v|` and `v = W phi`, `du = (I - u u^T) dv / |v|`, so a
/// term `-c . u` pulls back to `-(c - (u.c) u) phi^T / |v|`. Both the clean
/// and the perturbed outputs in `L1` depend on `W`.
pub fn pair_grad(w: &DMatrix<f64>, pairs: &[TrainingPair], lambda: f64) -> Result<DMatrix<f64>, EnhanceError> {
    if pairs.is_empty() {
        return Err(EnhanceError::EmptyInput);
    }
    let n = pairs.len() as f64;
    let mut g = DMatrix::zeros(w.nrows(), w.ncols());
    for pair in pairs {
        check_base(w, pair)?;
        let a = project(w, &pair.clean)?;
        let b = project(w, &pair.perturbed)?;
        let base = DVector::from_column_slice(&pair.base);

        let target_a = &b.u + lambda * &base;
        let ga = -(&target_a - &a.u * a.u.dot(&target_a)) / (a.norm * n);
        let gb = -(&a.u - &b.u * b.u.dot(&a.u)) / (b.norm * n);

        g += ga * DVector::from_column_slice(&pair.clean).transpose();
        g += gb * DVector::from_column_slice(&pair.perturbed).transpose();
    }
    Ok(g)
}

/// Parameter for `image_id` in `epoch`, uniform on the spec's domain.
pub fn epoch_param(spec: &PerturbationSpec, cfg_seed: u64, epoch: usize, image_id: &str) -> f64 {
    let mut rng = seed::rng_from(&[cfg_seed, epoch as u64, seed::hash_str(image_id)]);
    if spec.a == spec.b {
        return spec.a;
    }
    rng.random_range(spec.a..=spec.b)
}

/// Builds the feature-space pairs for one epoch's parameter draw.
pub fn epoch_pairs(
    fprime: &TrainableEmbedder,
    fbase: &TrainableEmbedder,
    batch: &[(String, Image)],
    spec: &PerturbationSpec,
    cfg: &EnhanceConfig,
    epoch: usize,
) -> Result<Vec<TrainingPair>, EnhanceError> {
    if batch.is_empty() {
        return Err(EnhanceError::EmptyInput);
    }
    let features = fprime.features();
    batch
        .iter()
        .map(|(id, image)| {
            let k = epoch_param(spec, cfg.seed, epoch, id);
            let perturbed = perturb::apply(id, image, spec, PerturbParam::Value(k), cfg.seed)?;
            Ok(TrainingPair {
                clean: features.raw_features(image)?,
                perturbed: features.raw_features(&perturbed)?,
                base: fbase.embed(image)?.into_vec(),
            })
        })
        .collect()
}

/// Loss of `fprime` on `batch` with the epoch's parameter draw.
pub fn loss(
    fprime: &TrainableEmbedder,
    fbase: &TrainableEmbedder,
    batch: &[(String, Image)],
    spec: &PerturbationSpec,
    cfg: &EnhanceConfig,
    epoch: usize,
) -> Result<LossBreakdown, EnhanceError> {
    let pairs = epoch_pairs(fprime, fbase, batch, spec, cfg, epoch)?;
    pair_loss(fprime.weights(), &pairs, cfg.lambda)
}

/// Gradient of [`loss`] with respect to `W`.
pub fn grad(
    fprime: &TrainableEmbedder,
    fbase: &TrainableEmbedder,
    batch: &[(String, Image)],
    spec: &PerturbationSpec,
    cfg: &EnhanceConfig,
    epoch: usize,
) -> Result<DMatrix<f64>, EnhanceError> {
    let pairs = epoch_pairs(fprime, fbase, batch, spec, cfg, epoch)?;
    pair_grad(fprime.weights(), &pairs, cfg.lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l1: f64,
    pub l2: f64,
    pub total: f64,
    pub probe_rdr: f64,
    pub probe_cos: f64,
}

/// Probe embeddings are taken at `⊥` plus five equally spaced parameters.
pub fn probe_plan() -> SamplingPlan {
    SamplingPlan::equally_spaced(5)
}

struct Probe {
    /// per image: clean features, then features at each probe parameter
    features: Vec<(Vec<f64>, Vec<Vec<f64>>)>,
    base: Vec<Embedding>,
}

impl Probe {
    fn build(
        fbase: &TrainableEmbedder,
        features: ToyEmbedder,
        probe: &[(String, Image)],
        spec: &PerturbationSpec,
        seed: u64,
    ) -> Result<Self, EnhanceError> {
        let params = probe_plan().parameters(spec.a, spec.b)?;
        let mut out = Self {
            features: Vec::with_capacity(probe.len()),
            base: Vec::with_capacity(probe.len()),
        };
        for (id, image) in probe {
            let sampled = params
                .iter()
                .map(|&k| Ok(features.raw_features(&perturb::apply(id, image, spec, k, seed)?)?))
                .collect::<Result<Vec<_>, EnhanceError>>()?;
            out.features.push((features.raw_features(image)?, sampled));
            out.base.push(fbase.embed(image)?);
        }
        Ok(out)
    }

    /// Mean `r_dr` and mean `cos(f, f')`.
    fn evaluate(&self, fprime: &TrainableEmbedder) -> Result<(f64, f64), EnhanceError> {
        if self.features.is_empty() {
            return Ok((f64::NAN, f64::NAN));
        }
        let (mut rdr, mut cos) = (0.0, 0.0);
        for ((clean, sampled), base) in self.features.iter().zip(&self.base) {
            let embeddings = sampled
                .iter()
                .map(|phi| fprime.embed_features(phi))
                .collect::<Result<Vec<_>, _>>()?;
            rdr += metrics::r_divergence_radius(&embeddings)?;
            cos += fprime.embed_features(clean)?.cosine(base);
        }
        let n = self.features.len() as f64;
        Ok((rdr / n, cos / n))
    }
}

/// Plain minibatch gradient descent on `L1 + lambda L2`.
///
/// Each epoch redraws `k` per image and visits the dataset in a seeded
/// order. The loss columns of the history are evaluated on the full dataset
/// with the epoch-0 draw, so they are comparable across epochs; entry 0 is
/// the state before training.
pub fn finetune(
    fprime: &TrainableEmbedder,
    fbase: &TrainableEmbedder,
    dataset: &[(String, Image)],
    probe: &[(String, Image)],
    spec: &PerturbationSpec,
    cfg: &EnhanceConfig,
) -> Result<(TrainableEmbedder, Vec<EpochRecord>), EnhanceError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(EnhanceError::EmptyInput);
    }
    if fbase.d_out() != fprime.d_out() {
        return Err(EnhanceError::DimensionMismatch {
            expected: fprime.d_out(),
            found: fbase.d_out(),
        });
    }
    let mut current = fprime.clone();
    let eval_pairs = epoch_pairs(&current, fbase, dataset, spec, cfg, 0)?;
    let probe = Probe::build(fbase, current.features(), probe, spec, cfg.seed)?;

    let record = |model: &TrainableEmbedder, epoch: usize| -> Result<EpochRecord, EnhanceError> {
        let l = pair_loss(model.weights(), &eval_pairs, cfg.lambda)?;
        let (probe_rdr, probe_cos) = probe.evaluate(model)?;
        if !l.total.is_finite() {
            return Err(EnhanceError::NonFinite { epoch });
        }
        Ok(EpochRecord {
            epoch,
            l1: l.l1,
            l2: l.l2,
            total: l.total,
            probe_rdr,
            probe_cos,
        })
    };

    let mut history = vec![record(&current, 0)?];
    for epoch in 1..=cfg.epochs {
        let pairs = epoch_pairs(&current, fbase, dataset, spec, cfg, epoch)?;
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut seed::rng_from(&[cfg.seed, epoch as u64, 0xba7c]));
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainingPair> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            let g = pair_grad(&current.w, &batch, cfg.lambda)?;
            current.w -= cfg.learning_rate * g;
            if current.w.iter().any(|v| !v.is_finite()) {
                return Err(EnhanceError::NonFinite { epoch });
            }
        }
        history.push(record(&current, epoch)?);
    }
    Ok((current, history))
}

/// Serialized trained weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub d_out: usize,
    pub d_raw: usize,
    /// row-major
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub config: EnhanceConfig,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn new(model: &TrainableEmbedder, config: EnhanceConfig, epoch: usize) -> Self {
        let w = model.weights();
        Self {
            d_out: w.nrows(),
            d_raw: w.ncols(),
            w: w.transpose().as_slice().to_vec(),
            config,
            epoch,
        }
    }

    /// Rebuilds the embedder; the feature grid follows from `d_raw = 3 g^2 + 3`.
    pub fn model(&self) -> Result<TrainableEmbedder, EnhanceError> {
        if self.w.len() != self.d_out * self.d_raw {
            return Err(EnhanceError::Checkpoint(format!(
                "{} weights for {}x{}",
                self.w.len(),
                self.d_out,
                self.d_raw
            )));
        }
        let grid = (1..=self.d_raw)
            .find(|g| 3 * g * g + 3 == self.d_raw)
            .ok_or_else(|| EnhanceError::Checkpoint(format!("d_raw {} is not a toy feature size", self.d_raw)))?;
        TrainableEmbedder::from_matrix(
            DMatrix::from_row_slice(self.d_out, self.d_raw, &self.w),
            ToyEmbedder::new(grid),
        )
    }
}
