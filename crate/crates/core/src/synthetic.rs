//! Seeded synthetic images and corpora for tests, benchmarks and desk-scale
//! runs of the full pipeline.

use rand::Rng;

use crate::perturb::Image;
use crate::seed;

/// Smooth random image: a colored gradient plus a few low-frequency waves.
pub fn smooth_image(width: usize, height: usize, seed: u64) -> Image {
    smooth_image_with_contrast(width, height, seed, 1.0)
}

/// [`smooth_image`] with the gradient and waves scaled by `contrast`.
pub fn smooth_image_with_contrast(width: usize, height: usize, seed: u64, contrast: f64) -> Image {
    let mut rng = seed::rng_from(&[0x5eed_1a9e, seed]);
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..0.8));
    let slope: [(f64, f64); 3] = std::array::from_fn(|_| (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)));
    let waves: Vec<(usize, f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0..3),
                rng.random_range(0.05..0.2),
                rng.random_range(0.5..3.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    Image::from_fn(width, height, |x, y| {
        let u = x as f64 / width as f64;
        let v = y as f64 / height as f64;
        let mut dev: [f64; 3] = std::array::from_fn(|c| slope[c].0 * (u - 0.5) + slope[c].1 * (v - 0.5));
        for &(c, amp, fx, fy, phase) in &waves {
            dev[c] += amp * (std::f64::consts::TAU * (fx * u + fy * v) + phase).sin();
        }
        std::array::from_fn(|c| base[c] + contrast * dev[c])
    })
    .expect("valid dimensions")
}

/// `n` smooth images named `syn0000`, `syn0001`, ...
pub fn corpus(n: usize, width: usize, height: usize, seed: u64) -> Vec<(String, Image)> {
    (0..n)
        .map(|i| (format!("syn{i:04}"), smooth_image(width, height, seed::mix(&[seed, i as u64]))))
        .collect()
}

/// Like [`corpus`] with every image at the given contrast.
pub fn corpus_with_contrast(n: usize, width: usize, height: usize, seed: u64, contrast: f64) -> Vec<(String, Image)> {
    (0..n)
        .map(|i| {
            let s = seed::mix(&[seed, i as u64]);
            (format!("syn{i:04}"), smooth_image_with_contrast(width, height, s, contrast))
        })
        .collect()
}

/// Two-class corpus: class 0 images are tinted warm, class 1 cool.
pub fn labeled_corpus(n: usize, width: usize, height: usize, seed: u64) -> Vec<(String, Image, usize)> {
    corpus(n, width, height, seed)
        .into_iter()
        .enumerate()
        .map(|(i, (id, img))| {
            let label = i % 2;
            let tint = if label == 0 { [0.25, 0.0, -0.25] } else { [-0.25, 0.0, 0.25] };
            let tinted = Image::from_fn(width, height, |x, y| {
                let p = img.pixel(x, y);
                std::array::from_fn(|c| p[c] + tint[c])
            })
            .expect("valid dimensions");
            (id, tinted, label)
        })
        .collect()
}
