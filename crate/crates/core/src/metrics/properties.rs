//! Executable checks of the metric properties: bounded domain, monotonicity,
//! best robustness, worst robustness, rotational invariance, plus the
//! `r_ed = sqrt(r_cs)` identity and the cosine metric's known failure of
//! worst robustness.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{all_metrics, embed_sampled, r_cosine, r_divergence_radius, r_euclidean, Embedding, SamplingPlan};
use crate::embed::Embedder;
use crate::geometry;
use crate::perturb::{Image, PerturbParam, PerturbationSpec};
use crate::seed;

pub const EXACT_TOL: f64 = 1e-9;
pub const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// Worst observed deviation from the property (0 when exact).
    pub slack: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl PropertyCheck {
    fn new(name: &str, slack: f64, tolerance: f64, cases: usize) -> Self {
        Self {
            name: name.to_string(),
            passed: slack <= tolerance,
            slack,
            tolerance,
            cases,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A set of unit vectors summing to zero.
#[derive(Debug, Clone)]
pub struct ZeroSumConfig {
    pub label: String,
    pub embeddings: Vec<Embedding>,
    /// Whether some pair is exactly antipodal (then `r_cs = 1` too).
    pub has_antipodal_pair: bool,
}

impl ZeroSumConfig {
    pub fn distinct_directions(&self) -> usize {
        let mut n = 0;
        for (i, e) in self.embeddings.iter().enumerate() {
            if self.embeddings[..i].iter().all(|o| e.distance(o) > 1e-9) {
                n += 1;
            }
        }
        n
    }
}

fn rotate(m: &nalgebra::DMatrix<f64>, vs: &[Vec<f64>]) -> Vec<Embedding> {
    geometry::rotate_points(m, vs)
        .into_iter()
        .map(|v| Embedding::normalize(v).expect("rotated unit vector"))
        .collect()
}

/// Zero-sum configurations in `dim` dimensions: regular `n`-gons in a random
/// plane, centered regular simplices, and antipodal pairs, each placed by a
/// seeded random rotation.
pub fn zero_sum_configurations(dim: usize, seed: u64) -> Vec<ZeroSumConfig> {
    assert!(dim >= 2, "zero-sum configurations need at least two dimensions");
    let m = geometry::random_rotation(dim, seed).expect("dim >= 2");
    let mut out = Vec::new();

    for n in [3usize, 4, 5, 7] {
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                let mut v = vec![0.0; dim];
                v[0] = t.cos();
                v[1] = t.sin();
                v
            })
            .collect();
        out.push(ZeroSumConfig {
            label: format!("polygon{n}/d{dim}"),
            embeddings: rotate(&m, &pts),
            has_antipodal_pair: n % 2 == 0,
        });
    }

    // regular simplex with n vertices needs n - 1 dimensions
    for n in (3..=dim + 1).filter(|&n| n <= 6 || n == dim + 1) {
        let center = 1.0 / n as f64;
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 - center } else { -center }).collect())
            .collect();
        // orthonormal frame of the hyperplane sum(x) = 0 via Gram-Schmidt on the rows
        let mut frame: Vec<Vec<f64>> = Vec::new();
        for r in &raw {
            let mut q = r.clone();
            for f in &frame {
                let c = geometry::dot(&q, f);
                q.iter_mut().zip(f).for_each(|(x, y)| *x -= c * y);
            }
            let norm = geometry::dot(&q, &q).sqrt();
            if norm > 1e-9 && frame.len() < n - 1 {
                q.iter_mut().for_each(|x| *x /= norm);
                frame.push(q);
            }
        }
        let pts: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| {
                let mut v = vec![0.0; dim];
                for (slot, f) in v.iter_mut().zip(&frame) {
                    *slot = geometry::dot(r, f);
                }
                v
            })
            .collect();
        out.push(ZeroSumConfig {
            label: format!("simplex{n}/d{dim}"),
            embeddings: rotate(&m, &pts),
            has_antipodal_pair: false,
        });
    }

    let mut pair = vec![vec![0.0; dim], vec![0.0; dim]];
    pair[0][0] = 1.0;
    pair[1][0] = -1.0;
    out.push(ZeroSumConfig {
        label: format!("antipodal/d{dim}"),
        embeddings: rotate(&m, &pair),
        has_antipodal_pair: true,
    });
    out
}

fn random_unit_set(n: usize, dim: usize, seed: u64) -> Vec<Embedding> {
    let mut rng = seed::rng_from(&[seed, n as u64, dim as u64]);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            Embedding::normalize(v).expect("gaussian vector is non-zero")
        })
        .collect()
}

/// Runs every property check over the embeddings `embedder` produces for
/// `images` under `specs`, plus synthetic configurations in the embedder's
/// dimension. Failures are reported, never returned as errors.
pub fn property_suite(
    embedder: &dyn Embedder,
    images: &[(String, Image)],
    specs: &[PerturbationSpec],
    seed: u64,
) -> PropertyReport {
    let dim = embedder.dim();
    let plan = SamplingPlan::default();

    let mut measured: Vec<Vec<Embedding>> = Vec::new();
    let mut embed_failures = 0usize;
    let mut identity_sets: Vec<Vec<Embedding>> = Vec::new();
    for (id, image) in images {
        for spec in specs {
            match embed_sampled(id, image, spec, &plan, embedder, seed) {
                Ok((params, embs)) => {
                    if let Some(pos) = params.iter().position(|p| *p == PerturbParam::Identity) {
                        identity_sets.push(vec![embs[pos].clone(); embs.len()]);
                    }
                    measured.push(embs);
                }
                Err(_) => embed_failures += 1,
            }
        }
    }
    let random_sets: Vec<Vec<Embedding>> = (0..200u64)
        .map(|i| random_unit_set(2 + (i as usize % 9), dim.max(2), seed ^ i))
        .collect();

    let mut checks = Vec::new();
    checks.push(PropertyCheck::new(
        "embedding",
        embed_failures as f64,
        0.0,
        images.len() * specs.len(),
    ));

    // bounded domain
    let mut slack = 0.0_f64;
    let mut cases = 0;
    for set in measured.iter().chain(&random_sets) {
        for v in all_metrics(set).unwrap_or([f64::NAN; 3]) {
            let dev = if v.is_nan() { f64::INFINITY } else { (-v).max(v - 1.0).max(0.0) };
            slack = slack.max(dev);
        }
        cases += 1;
    }
    checks.push(PropertyCheck::new("bounded_domain", slack, 0.0, cases));

    // monotonicity on nested prefixes of each sampled set
    let mut slack = 0.0_f64;
    let mut cases = 0;
    for set in measured.iter().chain(&random_sets) {
        let mut prev = [0.0; 3];
        for j in 1..=set.len() {
            let cur = all_metrics(&set[..j]).unwrap_or([f64::NAN; 3]);
            for i in 0..3 {
                let drop = prev[i] - cur[i];
                slack = slack.max(if drop.is_nan() { f64::INFINITY } else { drop });
            }
            prev = cur;
            cases += 1;
        }
    }
    checks.push(PropertyCheck::new("monotonicity", slack.max(0.0), MONOTONE_TOL, cases));

    // best robustness: identical embeddings give exact zeros
    let mut constant_sets = identity_sets;
    constant_sets.extend(random_sets.iter().take(20).map(|s| vec![s[0].clone(); s.len()]));
    let slack = constant_sets
        .iter()
        .flat_map(|s| all_metrics(s).unwrap_or([f64::INFINITY; 3]))
        .fold(0.0, f64::max);
    checks.push(PropertyCheck::new("best_robustness", slack, 0.0, constant_sets.len()));

    // worst robustness
    let configs: Vec<ZeroSumConfig> = (2..=dim.clamp(2, 8))
        .chain([dim.max(2)])
        .flat_map(|d| zero_sum_configurations(d, seed ^ d as u64))
        .collect();
    let slack = configs
        .iter()
        .map(|c| (r_divergence_radius(&c.embeddings).unwrap_or(f64::NAN) - 1.0).abs())
        .fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
    checks.push(PropertyCheck::new("worst_robustness", slack, EXACT_TOL, configs.len()));

    // the cosine metric stays below 1 on zero-sum sets without antipodal pairs
    let violating: Vec<&ZeroSumConfig> = configs
        .iter()
        .filter(|c| !c.has_antipodal_pair && c.distinct_directions() > 2)
        .collect();
    let worst_cs = violating
        .iter()
        .map(|c| r_cosine(&c.embeddings).unwrap_or(1.0))
        .fold(0.0, f64::max);
    let reproduced = !violating.is_empty() && worst_cs < 1.0 - EXACT_TOL;
    checks.push(PropertyCheck {
        name: "cosine_worst_robustness_violation".into(),
        passed: reproduced,
        slack: 1.0 - worst_cs,
        tolerance: EXACT_TOL,
        cases: violating.len(),
    });

    // rotational invariance
    let mut slack = 0.0_f64;
    let mut cases = 0;
    for r in 0..4u64 {
        let m = geometry::random_rotation(dim, seed.wrapping_add(r)).expect("dim >= 1");
        for set in measured.iter().chain(random_sets.iter().filter(|s| s[0].dim() == dim)).take(60) {
            let raw: Vec<Vec<f64>> = set.iter().map(|e| e.as_slice().to_vec()).collect();
            let rotated = rotate(&m, &raw);
            let (a, b) = (all_metrics(set), all_metrics(&rotated));
            let dev = match (a, b) {
                (Ok(a), Ok(b)) => (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max),
                _ => f64::INFINITY,
            };
            slack = slack.max(dev);
            cases += 1;
        }
    }
    checks.push(PropertyCheck::new("rotational_invariance", slack, EXACT_TOL, cases));

    // r_ed = sqrt(r_cs)
    let mut slack = 0.0_f64;
    for set in measured.iter().chain(&random_sets) {
        let dev = match (r_cosine(set), r_euclidean(set)) {
            (Ok(cs), Ok(ed)) => (ed - cs.sqrt()).abs(),
            _ => f64::INFINITY,
        };
        slack = slack.max(dev);
    }
    checks.push(PropertyCheck::new(
        "euclidean_cosine_identity",
        slack,
        EXACT_TOL,
        measured.len() + random_sets.len(),
    ));

    PropertyReport { checks }
}

/// Compares [`geometry::meb_exact`] against the brute-force oracle on
/// `instances` random point sets (n <= 8, dim <= 8), and checks that the
/// radius survives an isometric embedding into 512 dimensions.
pub fn meb_oracle_check(instances: usize, seed: u64) -> Vec<PropertyCheck> {
    let tol = geometry::ToleranceConfig::default();
    let mut rng = seed::rng_from(&[seed, 0x0ac1e]);
    let mut oracle_slack = 0.0_f64;
    let mut embed_slack = 0.0_f64;
    let lift = geometry::random_rotation(512, seed).expect("512 > 0");
    for i in 0..instances {
        let n = 1 + i % 8;
        let dim = 1 + (i / 8) % 8;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let exact = geometry::meb_exact(&pts, &tol).map(|b| b.radius).ok();
        let oracle = geometry::meb_bruteforce(&pts).map(|b| b.radius).ok();
        oracle_slack = oracle_slack.max(match (exact, oracle) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => f64::INFINITY,
        });
        let padded: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| {
                let mut v = p.clone();
                v.resize(512, 0.0);
                v
            })
            .collect();
        let lifted = geometry::rotate_points(&lift, &padded);
        embed_slack = embed_slack.max(match (exact, geometry::meb_exact(&lifted, &tol).ok()) {
            (Some(a), Some(b)) => (a - b.radius).abs(),
            _ => f64::INFINITY,
        });
    }
    vec![
        PropertyCheck::new("meb_oracle_agreement", oracle_slack, EXACT_TOL, instances),
        PropertyCheck::new("meb_isometry_invariance", embed_slack, EXACT_TOL, instances),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{EmbedError, ToyEmbedder};
    use crate::perturb::PerturbationKind;

    /// Embedder returning one fixed direction regardless of input.
    struct Constant;

    impl Embedder for Constant {
        fn id(&self) -> String {
            "constant".into()
        }
        fn dim(&self) -> usize {
            3
        }
        fn embed(&self, _: &Image) -> Result<Embedding, EmbedError> {
            Ok(Embedding::normalize(vec![1.0, 2.0, 2.0]).unwrap())
        }
    }

    /// Maps the domain endpoints and midpoint to directions 120 degrees apart.
    struct Triad;

    impl Embedder for Triad {
        fn id(&self) -> String {
            "triad".into()
        }
        fn dim(&self) -> usize {
            2
        }
        fn embed(&self, _: &Image) -> Result<Embedding, EmbedError> {
            Ok(Embedding::new(vec![1.0, 0.0]).unwrap())
        }
        fn embed_perturbed(
            &self,
            _: &str,
            _: &Image,
            spec: &PerturbationSpec,
            k: PerturbParam,
            _: u64,
        ) -> Result<Embedding, EmbedError> {
            let t = match k {
                PerturbParam::Identity => 0.0,
                PerturbParam::Value(v) => (v - spec.a) / (spec.b - spec.a),
            };
            // t = 0, 1/2, 1 land on 0, 120 and 240 degrees
            let angle = std::f64::consts::TAU * 2.0 / 3.0 * t;
            Ok(Embedding::normalize(vec![angle.cos(), angle.sin()]).unwrap())
        }
    }

    fn images() -> Vec<(String, Image)> {
        (0..2)
            .map(|i| (format!("img{i}"), crate::synthetic::smooth_image(24, 24, i)))
            .collect()
    }

    #[test]
    fn constant_embedder_is_maximally_robust() {
        let specs = vec![PerturbationSpec::new(PerturbationKind::GaussianNoise)];
        let report = property_suite(&Constant, &images(), &specs, 1);
        assert!(report.all_passed(), "{report:#?}");
        assert_eq!(report.get("best_robustness").unwrap().slack, 0.0);
    }

    #[test]
    fn triad_embedder_reproduces_closed_forms() {
        let spec = PerturbationSpec::new(PerturbationKind::Brightness);
        let plan = SamplingPlan::equally_spaced(3);
        let rec = super::super::measure("x", &images()[0].1, &spec, &plan, &Triad, 0).unwrap();
        assert!((rec.r_dr - 1.0).abs() <= EXACT_TOL);
        assert!((rec.r_cs - 0.75).abs() <= EXACT_TOL);
        assert!((rec.r_ed - 0.75f64.sqrt()).abs() <= EXACT_TOL);
    }

    #[test]
    fn toy_embedder_passes_every_property() {
        let specs = vec![
            PerturbationSpec::new(PerturbationKind::Jpeg),
            PerturbationSpec::new(PerturbationKind::Contrast),
        ];
        let report = property_suite(&ToyEmbedder::default(), &images(), &specs, 9);
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn oracle_checks_pass() {
        for c in meb_oracle_check(64, 3) {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn zero_sum_configurations_sum_to_zero() {
        for d in [2, 3, 9, 64] {
            for c in zero_sum_configurations(d, 5) {
                let mut sum = vec![0.0; d];
                for e in &c.embeddings {
                    sum.iter_mut().zip(e.as_slice()).for_each(|(s, x)| *s += x);
                }
                assert!(sum.iter().all(|s| s.abs() < 1e-12), "{}", c.label);
            }
        }
    }
}
