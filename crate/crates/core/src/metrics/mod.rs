//! Robustness metrics over the embeddings of an image's perturbed versions.
//!
//! For a set of unit-norm embeddings `E`:
//!
//! * [`r_cosine`]: `(1 - min_{i,j} cos(e_i, e_j)) / 2`
//! * [`r_euclidean`]: `max_{i,j} |e_i - e_j| / 2`
//! * [`r_divergence_radius`]: radius of the minimum enclosing ball of `E`
//!
//! All three lie in `[0, 1]`. Only the enclosing-ball radius reaches 1 for
//! every configuration whose embeddings sum to zero.

mod properties;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::properties::{
    meb_oracle_check, property_suite, zero_sum_configurations, PropertyCheck, PropertyReport, ZeroSumConfig,
};
use crate::embed::{EmbedError, Embedder};
use crate::geometry::{self, GeometryError, ToleranceConfig};
use crate::perturb::{Image, PerturbParam, PerturbationSpec};
use crate::seed;

/// Iterations used by the approximate solver above [`geometry::MAX_EXACT_POINTS`].
pub const CORESET_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvalidEmbedding {
    #[error("embedding is empty")]
    Empty,
    #[error("embedding has a non-finite component")]
    NonFinite,
    #[error("embedding norm {norm} is not 1 within {tolerance}")]
    NonUnitNorm { norm: f64, tolerance: f64 },
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no embeddings given")]
    EmptyInput,
    #[error("embedding {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    InvalidEmbedding(#[from] InvalidEmbedding),
    #[error("invalid domain [{a}, {b}]")]
    InvalidDomain { a: f64, b: f64 },
    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),
    #[error("image '{image_id}': {source}")]
    Measure {
        image_id: String,
        #[source]
        source: EmbedError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding {
    vector: Vec<f64>,
}

impl Embedding {
    /// Accepted deviation of the input norm from 1.
    pub const NORM_TOLERANCE: f64 = 1e-6;

    /// Validates that `vector` has unit norm within [`Self::NORM_TOLERANCE`]
    /// and rescales it to unit norm exactly.
    pub fn new(vector: Vec<f64>) -> Result<Self, InvalidEmbedding> {
        let norm = Self::checked_norm(&vector)?;
        if (norm - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(InvalidEmbedding::NonUnitNorm {
                norm,
                tolerance: Self::NORM_TOLERANCE,
            });
        }
        Ok(Self::rescaled(vector, norm))
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalize(vector: Vec<f64>) -> Result<Self, InvalidEmbedding> {
        let norm = Self::checked_norm(&vector)?;
        if norm == 0.0 {
            return Err(InvalidEmbedding::NonUnitNorm {
                norm,
                tolerance: Self::NORM_TOLERANCE,
            });
        }
        Ok(Self::rescaled(vector, norm))
    }

    fn checked_norm(vector: &[f64]) -> Result<f64, InvalidEmbedding> {
        if vector.is_empty() {
            return Err(InvalidEmbedding::Empty);
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(InvalidEmbedding::NonFinite);
        }
        Ok(geometry::dot(vector, vector).sqrt())
    }

    /// Vectors already unit-norm to within rounding are kept bit for bit.
    fn rescaled(mut vector: Vec<f64>, norm: f64) -> Self {
        if (norm - 1.0).abs() > 4.0 * f64::EPSILON {
            vector.iter_mut().for_each(|v| *v /= norm);
        }
        Self { vector }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vector
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.vector
    }

    /// Cosine similarity, clamped to `[-1, 1]`; exactly 1 for identical vectors.
    pub fn cosine(&self, other: &Self) -> f64 {
        if self.vector == other.vector {
            return 1.0;
        }
        geometry::dot(&self.vector, &other.vector).clamp(-1.0, 1.0)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        geometry::distance(&self.vector, &other.vector)
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.vector
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let vector = Vec::<f64>::deserialize(d)?;
        Self::new(vector).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    #[serde(rename = "equal")]
    EquallySpaced,
    Random,
}

/// How the continuous parameter domain is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub mode: SamplingMode,
    pub m: usize,
    /// Only used by [`SamplingMode::Random`].
    pub seed: u64,
    /// Prepend the identity parameter, in addition to the `m` samples.
    pub include_identity: bool,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            mode: SamplingMode::EquallySpaced,
            m: 5,
            seed: 0,
            include_identity: true,
        }
    }
}

impl SamplingPlan {
    pub fn equally_spaced(m: usize) -> Self {
        Self {
            m,
            ..Self::default()
        }
    }

    pub fn random(m: usize, seed: u64) -> Self {
        Self {
            mode: SamplingMode::Random,
            m,
            seed,
            ..Self::default()
        }
    }

    pub fn without_identity(mut self) -> Self {
        self.include_identity = false;
        self
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.m == 0 {
            return Err(MetricsError::InvalidPlan("m must be at least 1".into()));
        }
        Ok(())
    }

    /// The full parameter list: identity (if enabled) followed by the samples.
    pub fn parameters(&self, a: f64, b: f64) -> Result<Vec<PerturbParam>, MetricsError> {
        let mut params = Vec::with_capacity(self.m + 1);
        if self.include_identity {
            params.push(PerturbParam::Identity);
        }
        params.extend(sample_domain(a, b, self)?.into_iter().map(PerturbParam::Value));
        Ok(params)
    }
}

/// Discretizes `[a, b]` into `plan.m` values.
///
/// Equally spaced: `a + i (b - a) / (m - 1)` with the last value pinned to
/// `b`; `m = 1` yields `[a]`. Random: i.i.d. uniform draws from a generator
/// keyed by `(plan.seed, a, b)`.
pub fn sample_domain(a: f64, b: f64, plan: &SamplingPlan) -> Result<Vec<f64>, MetricsError> {
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(MetricsError::InvalidDomain { a, b });
    }
    plan.validate()?;
    let m = plan.m;
    let values = match plan.mode {
        SamplingMode::EquallySpaced if m == 1 => vec![a],
        SamplingMode::EquallySpaced => {
            let step = (b - a) / (m - 1) as f64;
            (0..m)
                .map(|i| if i == m - 1 { b } else { (a + i as f64 * step).min(b) })
                .collect()
        }
        SamplingMode::Random => {
            let mut rng = seed::rng_from(&[plan.seed, a.to_bits(), b.to_bits()]);
            (0..m)
                .map(|_| if a == b { a } else { rng.random_range(a..=b) })
                .collect()
        }
    };
    Ok(values)
}

fn check_set(embeddings: &[Embedding]) -> Result<(), MetricsError> {
    let first = embeddings.first().ok_or(MetricsError::EmptyInput)?;
    for (index, e) in embeddings.iter().enumerate() {
        if e.dim() != first.dim() {
            return Err(MetricsError::DimensionMismatch {
                index,
                expected: first.dim(),
                found: e.dim(),
            });
        }
    }
    Ok(())
}

/// `(1 - min pairwise cosine) / 2`; 0 for a single embedding.
pub fn r_cosine(embeddings: &[Embedding]) -> Result<f64, MetricsError> {
    check_set(embeddings)?;
    let mut min_cos = 1.0_f64;
    for (i, a) in embeddings.iter().enumerate() {
        for b in &embeddings[i + 1..] {
            min_cos = min_cos.min(a.cosine(b));
        }
    }
    Ok(((1.0 - min_cos) / 2.0).clamp(0.0, 1.0))
}

/// Half the largest pairwise Euclidean distance.
pub fn r_euclidean(embeddings: &[Embedding]) -> Result<f64, MetricsError> {
    check_set(embeddings)?;
    let mut max_dist = 0.0_f64;
    for (i, a) in embeddings.iter().enumerate() {
        for b in &embeddings[i + 1..] {
            max_dist = max_dist.max(a.distance(b));
        }
    }
    Ok((max_dist / 2.0).clamp(0.0, 1.0))
}

/// Radius of the minimum enclosing ball.
pub fn r_divergence_radius(embeddings: &[Embedding]) -> Result<f64, MetricsError> {
    check_set(embeddings)?;
    let ball = if embeddings.len() <= geometry::MAX_EXACT_POINTS {
        geometry::meb_exact(embeddings, &ToleranceConfig::default())?
    } else {
        geometry::meb_coreset(embeddings, CORESET_ITERATIONS)?
    };
    Ok(ball.radius.clamp(0.0, 1.0))
}

/// All three metrics at once, in the order `(r_cs, r_ed, r_dr)`.
pub fn all_metrics(embeddings: &[Embedding]) -> Result<[f64; 3], MetricsError> {
    Ok([
        r_cosine(embeddings)?,
        r_euclidean(embeddings)?,
        r_divergence_radius(embeddings)?,
    ])
}

/// Metric values for one image under one perturbation and sampling plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRecord {
    pub image_id: String,
    pub perturbation_id: String,
    pub sampled_params: Vec<PerturbParam>,
    pub r_cs: f64,
    pub r_ed: f64,
    pub r_dr: f64,
}

impl RobustnessRecord {
    pub fn from_embeddings(
        image_id: &str,
        perturbation_id: &str,
        sampled_params: Vec<PerturbParam>,
        embeddings: &[Embedding],
    ) -> Result<Self, MetricsError> {
        let [r_cs, r_ed, r_dr] = all_metrics(embeddings)?;
        Ok(Self {
            image_id: image_id.to_string(),
            perturbation_id: perturbation_id.to_string(),
            sampled_params,
            r_cs,
            r_ed,
            r_dr,
        })
    }
}

/// Embeds `P(x, k)` for every parameter of the plan, in plan order.
pub fn embed_sampled(
    image_id: &str,
    image: &Image,
    spec: &PerturbationSpec,
    plan: &SamplingPlan,
    embedder: &dyn Embedder,
    seed: u64,
) -> Result<(Vec<PerturbParam>, Vec<Embedding>), MetricsError> {
    let params = plan.parameters(spec.a, spec.b)?;
    let embeddings = params
        .iter()
        .map(|&k| embedder.embed_perturbed(image_id, image, spec, k, seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| MetricsError::Measure {
            image_id: image_id.to_string(),
            source,
        })?;
    Ok((params, embeddings))
}

/// Measures all three metrics for one image.
pub fn measure(
    image_id: &str,
    image: &Image,
    spec: &PerturbationSpec,
    plan: &SamplingPlan,
    embedder: &dyn Embedder,
    seed: u64,
) -> Result<RobustnessRecord, MetricsError> {
    let (params, embeddings) = embed_sampled(image_id, image, spec, plan, embedder, seed)?;
    RobustnessRecord::from_embeddings(image_id, spec.id(), params, &embeddings)
}
