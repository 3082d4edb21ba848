//! Embedders: the [`Embedder`] trait, a deterministic [`ToyEmbedder`] that
//! needs no model weights, and an [`EmbeddingStore`] that serves embeddings
//! computed elsewhere from a JSON Lines file.
//!
//! Store file format, one object per line:
//!
//! ```text
//! {"id":"img1","perturbation":"jpeg","param":30,"vector":[1.0,0.0]}
//! {"id":"img1","perturbation":"jpeg","param":null,"vector":[0.6,0.8]}
//! ```
//!
//! `param: null` is the identity parameter. All vectors share one length and
//! must have unit norm.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{Embedding, InvalidEmbedding};
use crate::perturb::{self, Image, PerturbError, PerturbParam, PerturbationSpec};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("image {width}x{height} is smaller than the {grid}x{grid} feature grid")]
    ImageTooSmall { width: usize, height: usize, grid: usize },
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    InvalidEmbedding(#[from] InvalidEmbedding),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}:{line}: {source}")]
    NonUnitNorm {
        path: String,
        line: usize,
        #[source]
        source: InvalidEmbedding,
    },
    #[error("{path}:{line}: vector has length {found}, expected {expected}")]
    DimensionMismatch { path: String, line: usize, expected: usize, found: usize },
    #[error("no embedding stored for ({image_id}, {perturbation}, {param})")]
    MissingKey { image_id: String, perturbation: String, param: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Unsupported(String),
}

/// An embedding function `f`.
pub trait Embedder: Send + Sync {
    /// Provenance tag written into reports.
    fn id(&self) -> String;

    fn dim(&self) -> usize;

    fn embed(&self, image: &Image) -> Result<Embedding, EmbedError>;

    /// Embedding of `P(image, k)`. The default perturbs and then embeds;
    /// lookup-based embedders override it.
    fn embed_perturbed(
        &self,
        image_id: &str,
        image: &Image,
        spec: &PerturbationSpec,
        k: PerturbParam,
        seed: u64,
    ) -> Result<Embedding, EmbedError> {
        let perturbed = perturb::apply(image_id, image, spec, k, seed)?;
        self.embed(&perturbed)
    }
}

/// Grid-of-means plus per-channel spread, L2-normalized.
///
/// Features are the mean of each channel over each cell of a `grid x grid`
/// partition (`3 grid^2` values) followed by the global standard deviation
/// of each channel (3 values).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyEmbedder {
    pub grid: usize,
}

impl Default for ToyEmbedder {
    fn default() -> Self {
        Self { grid: 4 }
    }
}

impl ToyEmbedder {
    /// Added to the first feature of an all-zero feature vector.
    pub const ZERO_EPSILON: f64 = 1e-8;

    pub fn new(grid: usize) -> Self {
        assert!(grid > 0, "grid must be positive");
        Self { grid }
    }

    pub fn feature_dim(&self) -> usize {
        3 * self.grid * self.grid + 3
    }

    /// Unnormalized feature vector.
    pub fn raw_features(&self, image: &Image) -> Result<Vec<f64>, EmbedError> {
        let (w, h, g) = (image.width(), image.height(), self.grid);
        if image.min_side() < g {
            return Err(EmbedError::ImageTooSmall { width: w, height: h, grid: g });
        }
        let mut features = Vec::with_capacity(self.feature_dim());
        for cy in 0..g {
            let (y0, y1) = (cy * h / g, (cy + 1) * h / g);
            for cx in 0..g {
                let (x0, x1) = (cx * w / g, (cx + 1) * w / g);
                let mut sums = [0.0; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = image.pixel(x, y);
                        for c in 0..3 {
                            sums[c] += p[c];
                        }
                    }
                }
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                features.extend(sums.iter().map(|s| s / n));
            }
        }
        let n = (w * h) as f64;
        for c in 0..3 {
            let mean = image.data().iter().skip(c).step_by(3).sum::<f64>() / n;
            let var = image
                .data()
                .iter()
                .skip(c)
                .step_by(3)
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / n;
            features.push(var.sqrt());
        }
        Ok(features)
    }
}

impl Embedder for ToyEmbedder {
    fn id(&self) -> String {
        format!("toy:grid{}", self.grid)
    }

    fn dim(&self) -> usize {
        self.feature_dim()
    }

    fn embed(&self, image: &Image) -> Result<Embedding, EmbedError> {
        let mut features = self.raw_features(image)?;
        if features.iter().all(|&f| f == 0.0) {
            features[0] += Self::ZERO_EPSILON;
        }
        Ok(Embedding::normalize(features)?)
    }
}

/// Exact-match key for a sampled parameter: the shortest decimal that
/// round-trips the value, or `null` for the identity parameter.
pub fn param_key(k: PerturbParam) -> String {
    match k {
        PerturbParam::Identity => "null".to_string(),
        PerturbParam::Value(v) => format!("{v}"),
    }
}

/// One line of the embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreRecord {
    pub id: String,
    pub perturbation: String,
    pub param: PerturbParam,
    pub vector: Vec<f64>,
}

type StoreKey = (String, String, String);

/// Embeddings loaded from a JSON Lines file. Immutable after loading.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    path: PathBuf,
    dim: usize,
    index: HashMap<StoreKey, Embedding>,
}

impl EmbeddingStore {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref();
        let shown = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| EmbedError::Io {
            path: shown.clone(),
            message: e.to_string(),
        })?;
        let mut dim = None;
        let mut index = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| EmbedError::Io {
                path: shown.clone(),
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: StoreRecord = serde_json::from_str(&line).map_err(|e| EmbedError::Parse {
                path: shown.clone(),
                line: line_no,
                message: e.to_string(),
            })?;
            let expected = *dim.get_or_insert(record.vector.len());
            if record.vector.len() != expected {
                return Err(EmbedError::DimensionMismatch {
                    path: shown,
                    line: line_no,
                    expected,
                    found: record.vector.len(),
                });
            }
            let embedding = Embedding::new(record.vector).map_err(|source| EmbedError::NonUnitNorm {
                path: shown.clone(),
                line: line_no,
                source,
            })?;
            index.insert((record.id, record.perturbation, param_key(record.param)), embedding);
        }
        let dim = dim.ok_or_else(|| EmbedError::Parse {
            path: shown,
            line: 0,
            message: "file contains no embeddings".into(),
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            dim,
            index,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, image_id: &str, perturbation: &str, k: PerturbParam) -> Result<&Embedding, EmbedError> {
        let key = (image_id.to_string(), perturbation.to_string(), param_key(k));
        self.index.get(&key).ok_or_else(|| EmbedError::MissingKey {
            image_id: key.0.clone(),
            perturbation: key.1.clone(),
            param: key.2.clone(),
        })
    }
}

impl Embedder for EmbeddingStore {
    fn id(&self) -> String {
        format!("store:{}", self.path.display())
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _: &Image) -> Result<Embedding, EmbedError> {
        Err(EmbedError::Unsupported(
            "an embedding store can only answer (image, perturbation, parameter) lookups".into(),
        ))
    }

    fn embed_perturbed(
        &self,
        image_id: &str,
        _: &Image,
        spec: &PerturbationSpec,
        k: PerturbParam,
        _: u64,
    ) -> Result<Embedding, EmbedError> {
        self.get(image_id, spec.id(), k).cloned()
    }
}

/// Writes records in the store format. Floats are written in shortest
/// round-trip form, so loading recovers every vector bit for bit.
pub fn write_store<W: Write>(mut out: W, records: &[StoreRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
