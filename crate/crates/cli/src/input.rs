use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use robustkit::{Embedder, EmbeddingStore, Image, ToyEmbedder};

pub const THREADS_ENV: &str = "ROBUSTKIT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or `auto`, got `{s}`")),
            Ok(n) => Ok(Self::Fixed(n)),
        }
    }
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl Threads {
    pub fn resolve_with_env(self) -> Result<Self> {
        match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => v
                .trim()
                .parse()
                .map_err(|e: String| anyhow::anyhow!("{THREADS_ENV}: {e}")),
            _ => Ok(self),
        }
    }

    pub fn pool(self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Self::Fixed(n) = self {
            builder = builder.num_threads(n);
        }
        builder.build().context("building thread pool")
    }
}

/// `toy` or `store:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedderChoice {
    Toy,
    Store(PathBuf),
}

impl FromStr for EmbedderChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "toy" {
            Ok(Self::Toy)
        } else if let Some(path) = s.strip_prefix("store:") {
            if path.is_empty() {
                return Err("store: needs a path".into());
            }
            Ok(Self::Store(PathBuf::from(path)))
        } else {
            Err(format!("unknown embedder `{s}` (expected `toy` or `store:PATH`)"))
        }
    }
}

impl fmt::Display for EmbedderChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Toy => f.write_str("toy"),
            Self::Store(p) => write!(f, "store:{}", p.display()),
        }
    }
}

impl EmbedderChoice {
    pub fn build(&self) -> Result<Box<dyn Embedder>> {
        Ok(match self {
            Self::Toy => Box::new(ToyEmbedder::default()),
            Self::Store(path) => Box::new(
                EmbeddingStore::load(path).with_context(|| format!("loading embedding store {}", path.display()))?,
            ),
        })
    }
}

pub struct LoadedImages {
    pub images: Vec<(String, Image)>,
    /// `(file name, message)` for files that could not be read.
    pub failures: Vec<(String, String)>,
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "ppm", "pnm"];

/// Reads every supported image in `dir`, sorted by file name. The image id
/// is the file stem.
pub fn load_image_dir(dir: &Path) -> Result<LoadedImages> {
    if !dir.is_dir() {
        bail!("image directory {} does not exist", dir.display());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();

    let mut out = LoadedImages {
        images: Vec::new(),
        failures: Vec::new(),
    };
    for path in paths {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let id = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if out.images.iter().any(|(existing, _)| *existing == id) {
            out.failures.push((name, format!("duplicate image id `{id}`")));
            continue;
        }
        match Image::load(&path) {
            Ok(img) => out.images.push((id, img)),
            Err(e) => out.failures.push((name, e.to_string())),
        }
    }
    if out.images.is_empty() && out.failures.is_empty() {
        bail!("no .png/.ppm/.pnm images in {}", dir.display());
    }
    Ok(out)
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn report_failures(failures: &[(String, String)]) {
    if failures.is_empty() {
        return;
    }
    eprintln!("{} file(s) failed:", failures.len());
    for (name, msg) in failures {
        eprintln!("  {name}: {msg}");
    }
}
