//! Procedural textures for the fog and frost perturbations.

use rand::Rng;

use super::filters::reflect;

/// Diamond-square plasma fractal on an `n x n` torus (`n` a power of two),
/// min-max normalized to `[0, 1]`. The random displacement amplitude starts
/// at 100 and is divided by `wibble_decay` at every scale.
pub(crate) fn plasma<R: Rng>(n: usize, wibble_decay: f64, rng: &mut R) -> Vec<f64> {
    assert!(n.is_power_of_two() && n >= 2, "plasma size must be a power of two");
    let mut map = vec![0.0; n * n];
    let at = |y: usize, x: usize| (y % n) * n + (x % n);
    let mut step = n;
    let mut wibble = 100.0;
    while step >= 2 {
        let half = step / 2;
        for y in (0..n).step_by(step) {
            for x in (0..n).step_by(step) {
                let mean = (map[at(y, x)] + map[at(y, x + step)] + map[at(y + step, x)] + map[at(y + step, x + step)]) / 4.0;
                map[at(y + half, x + half)] = mean + rng.random_range(-wibble..=wibble);
            }
        }
        for y in (0..n).step_by(step) {
            for x in (0..n).step_by(step) {
                // top-edge midpoint
                let top = (map[at(y, x)]
                    + map[at(y, x + step)]
                    + map[at(y + n - half, x + half)]
                    + map[at(y + half, x + half)])
                    / 4.0;
                map[at(y, x + half)] = top + rng.random_range(-wibble..=wibble);
                // left-edge midpoint
                let left = (map[at(y, x)]
                    + map[at(y + step, x)]
                    + map[at(y + half, x + n - half)]
                    + map[at(y + half, x + half)])
                    / 4.0;
                map[at(y + half, x)] = left + rng.random_range(-wibble..=wibble);
            }
        }
        step = half;
        wibble /= wibble_decay;
    }
    let (lo, hi) = map
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    map.iter_mut()
        .for_each(|v| *v = if span > 0.0 { (*v - lo) / span } else { 0.0 });
    map
}

/// Fixed knobs of the frost texture.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FrostParams {
    /// Fraction of pixels seeded with an ice crystal.
    pub density: f64,
    /// Half-length in pixels of the streak drawn through each crystal.
    pub streak: usize,
    /// Lattice spacing of the brightness modulation noise.
    pub cell: usize,
}

/// Crystalline texture in `[0, 1]`: sparse thresholded seeds streaked along a
/// random direction, modulated by coarse value noise.
pub(crate) fn frost<R: Rng>(width: usize, height: usize, params: FrostParams, rng: &mut R) -> Vec<f64> {
    let seeds: Vec<f64> = (0..width * height)
        .map(|_| {
            let u: f64 = rng.random();
            if u < params.density {
                rng.random_range(0.5..=1.0)
            } else {
                0.0
            }
        })
        .collect();

    let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (dx, dy) = (angle.cos(), angle.sin());
    let len = params.streak as isize;
    let mut streaked = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for t in -len..=len {
                let weight = 1.0 - (t.abs() as f64) / (len as f64 + 1.0);
                let sx = (x as f64 + t as f64 * dx).round() as isize;
                let sy = (y as f64 + t as f64 * dy).round() as isize;
                acc += weight * seeds[reflect(sy, height) * width + reflect(sx, width)];
                // faint cross-streak for a branched look
                let px = (x as f64 - t as f64 * dy * 0.3).round() as isize;
                let py = (y as f64 + t as f64 * dx * 0.3).round() as isize;
                acc += 0.25 * weight * seeds[reflect(py, height) * width + reflect(px, width)];
            }
            streaked[y * width + x] = acc;
        }
    }

    let cell = params.cell.max(1);
    let gw = width / cell + 2;
    let gh = height / cell + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(0.4..=1.0)).collect();
    for y in 0..height {
        for x in 0..width {
            let fx = x as f64 / cell as f64;
            let fy = y as f64 / cell as f64;
            let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let l = |xx: usize, yy: usize| lattice[yy * gw + xx];
            let m = (l(ix, iy) * (1.0 - tx) + l(ix + 1, iy) * tx) * (1.0 - ty)
                + (l(ix, iy + 1) * (1.0 - tx) + l(ix + 1, iy + 1) * tx) * ty;
            streaked[y * width + x] *= m;
        }
    }

    let peak = streaked.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        streaked.iter_mut().for_each(|v| *v = (*v / peak).clamp(0.0, 1.0).powf(0.7));
    }
    streaked
}
