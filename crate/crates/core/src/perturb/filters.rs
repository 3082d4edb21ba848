//! Convolution helpers over single-channel planes with symmetric
//! (half-sample) reflection at the borders.

/// Maps any integer index onto `0..n` by mirroring `d c b a | a b c d | d c b a`.
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Normalized 1D Gaussian truncated at 4 sigma (at least one tap per side).
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = ((4.0 * sigma).ceil() as usize).max(1);
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-0.5 * x * x / (sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable convolution of a `width x height` plane with a symmetric 1D kernel.
pub(crate) fn convolve_separable(plane: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            tmp[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(t, w)| w * row[reflect(x as isize + t as isize - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(t, w)| w * tmp[reflect(y as isize + t as isize - r, height) * width + x])
                .sum();
        }
    }
    out
}

pub(crate) fn gaussian_blur(plane: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    convolve_separable(plane, width, height, &gaussian_kernel(sigma))
}

/// Square, odd-sized 2D kernel.
#[derive(Debug, Clone)]
pub(crate) struct Kernel2d {
    pub size: usize,
    pub weights: Vec<f64>,
}

impl Kernel2d {
    /// Normalized disk of the given radius, anti-aliased by a Gaussian of
    /// `alias_sigma`.
    pub(crate) fn disk(radius: f64, alias_sigma: f64) -> Self {
        let margin = (3.0 * alias_sigma).ceil() as usize;
        let half = radius.ceil() as usize + margin;
        let size = 2 * half + 1;
        let mut weights: Vec<f64> = (0..size * size)
            .map(|i| {
                let dx = (i % size) as f64 - half as f64;
                let dy = (i / size) as f64 - half as f64;
                if dx * dx + dy * dy <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        if alias_sigma > 0.0 {
            let g = gaussian_kernel(alias_sigma);
            let gr = (g.len() / 2) as isize;
            let mut blurred = vec![0.0; size * size];
            for y in 0..size {
                for x in 0..size {
                    let mut acc = 0.0;
                    for (ty, wy) in g.iter().enumerate() {
                        let sy = y as isize + ty as isize - gr;
                        if sy < 0 || sy >= size as isize {
                            continue;
                        }
                        for (tx, wx) in g.iter().enumerate() {
                            let sx = x as isize + tx as isize - gr;
                            if sx < 0 || sx >= size as isize {
                                continue;
                            }
                            acc += wy * wx * weights[sy as usize * size + sx as usize];
                        }
                    }
                    blurred[y * size + x] = acc;
                }
            }
            weights = blurred;
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        Self { size, weights }
    }
}

pub(crate) fn convolve2d(plane: &[f64], width: usize, height: usize, kernel: &Kernel2d) -> Vec<f64> {
    let half = (kernel.size / 2) as isize;
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for ky in 0..kernel.size {
                let sy = reflect(y as isize + ky as isize - half, height);
                let row = &kernel.weights[ky * kernel.size..(ky + 1) * kernel.size];
                for (kx, w) in row.iter().enumerate() {
                    if *w != 0.0 {
                        acc += w * plane[sy * width + reflect(x as isize + kx as isize - half, width)];
                    }
                }
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Bilinear sample at fractional coordinates with reflected borders.
pub(crate) fn bilinear(plane: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let at = |xi: isize, yi: isize| plane[reflect(yi, height) * width + reflect(xi, width)];
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
    let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_mirrors_half_sample() {
        let got: Vec<usize> = (-4..8).map(|i| reflect(i, 3)).collect();
        assert_eq!(got, vec![2, 2, 1, 0, 0, 1, 2, 2, 1, 0, 0, 1]);
    }

    #[test]
    fn kernels_are_normalized() {
        for s in [0.2, 0.5, 1.0, 8.0] {
            let k = gaussian_kernel(s);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(k.len() % 2, 1);
        }
        for r in [1.0, 2.5, 5.0] {
            let d = Kernel2d::disk(r, 0.5);
            assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn blurs_preserve_constants() {
        let plane = vec![0.3; 20 * 17];
        for v in gaussian_blur(&plane, 20, 17, 1.3) {
            assert!((v - 0.3).abs() < 1e-12);
        }
        for v in convolve2d(&plane, 20, 17, &Kernel2d::disk(3.0, 0.5)) {
            assert!((v - 0.3).abs() < 1e-12);
        }
        assert!((bilinear(&plane, 20, 17, -3.7, 40.2) - 0.3).abs() < 1e-12);
    }
}
