//! Robustness of embedding functions under common image perturbations.
//!
//! The crate measures how far the embeddings of an image's perturbed versions
//! drift apart, using three metrics: the worst pairwise cosine similarity,
//! the largest pairwise Euclidean distance, and the radius of the minimum
//! enclosing ball of the embeddings ([`metrics::r_divergence_radius`]).
//!
//! Around the metrics sit the pieces needed to run them end to end:
//!
//! * [`geometry`]: exact (Welzl) and approximate minimum enclosing balls.
//! * [`perturb`]: nine deterministic, parameterized image perturbations.
//! * [`embed`]: the [`Embedder`] abstraction, a toy embedder and a JSONL store
//!   for embeddings computed elsewhere.
//! * [`downstream`]: accuracy/RMSE under perturbation, Pearson correlation,
//!   quartile grouping and linear performance prediction.
//! * [`enhance`]: robustness-aware fine-tuning of a linear embedder.

pub mod downstream;
pub mod embed;
pub mod enhance;
pub mod geometry;
pub mod metrics;
pub mod perturb;
pub mod seed;
pub mod synthetic;

pub use embed::{Embedder, EmbeddingStore, ToyEmbedder};
pub use geometry::{Ball, Point, ToleranceConfig};
pub use metrics::{Embedding, RobustnessRecord, SamplingMode, SamplingPlan};
pub use perturb::{Image, PerturbParam, PerturbationKind, PerturbationSpec};

/// Toolkit version embedded in report headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
