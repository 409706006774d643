//! Deterministic synthetic imagery and distortion operators for exercising
//! the pipeline without external datasets: an oriented-texture generator plus
//! additive white Gaussian noise and Gaussian blur.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::plane::ImagePlane;

/// Generates a seeded grayscale texture with oriented structure: a sum of
/// oriented sinusoidal gratings over multi-octave value noise, affinely
/// rescaled into roughly [16, 240]. The same `(width, height, seed)` always
/// produces the same plane.
pub fn oriented_texture(width: usize, height: usize, seed: u64) -> Result<ImagePlane> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(
            "texture dimensions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Oriented gratings: random angle, wavelength, phase, amplitude.
    let gratings: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let angle = rng.random::<f64>() * std::f64::consts::PI;
            let wavelength = 6.0 + rng.random::<f64>() * 26.0;
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let amplitude = 0.5 + rng.random::<f64>();
            (angle, wavelength, phase, amplitude)
        })
        .collect();

    // Value-noise octaves: coarse random lattices sampled bilinearly.
    let mut octaves: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut cell = 32usize;
    let mut amplitude = 1.0f64;
    while cell >= 2 {
        let lattice_w = width / cell + 2;
        let lattice_h = height / cell + 2;
        let lattice: Vec<f64> = (0..lattice_w * lattice_h)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        octaves.push((cell, lattice, amplitude));
        cell /= 2;
        amplitude *= 0.5;
    }

    let mut plane = ImagePlane::zeros(width, height);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in 0..height {
        for col in 0..width {
            let (x, y) = (col as f64, row as f64);
            let mut v = 0.0;
            for &(angle, wavelength, phase, amplitude) in &gratings {
                let u = x * angle.cos() + y * angle.sin();
                v += amplitude * (std::f64::consts::TAU * u / wavelength + phase).sin();
            }
            for (cell, lattice, amplitude) in &octaves {
                let lattice_w = width / cell + 2;
                let fx = x / *cell as f64;
                let fy = y / *cell as f64;
                let (ix, iy) = (fx as usize, fy as usize);
                let (tx, ty) = (fx - ix as f64, fy - iy as f64);
                let at = |r: usize, c: usize| lattice[r * lattice_w + c];
                let top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
                let bottom = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
                v += amplitude * (top * (1.0 - ty) + bottom * ty);
            }
            plane.set(row, col, v);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }

    let span = if hi > lo { hi - lo } else { 1.0 };
    let samples: Vec<f64> = plane
        .samples()
        .iter()
        .map(|&v| 16.0 + (v - lo) / span * 224.0)
        .collect();
    ImagePlane::from_samples(width, height, samples)
}

/// Adds seeded white Gaussian noise of standard deviation `sigma`. Samples
/// are left unclamped so the noise stays exactly Gaussian.
pub fn add_awgn(plane: &ImagePlane, sigma: f64, seed: u64) -> Result<ImagePlane> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise standard deviation must be finite and nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(plane.clone());
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = plane
        .samples()
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect();
    ImagePlane::from_samples(plane.width(), plane.height(), samples)
}

/// Blurs with a separable Gaussian of standard deviation `radius`, kernel
/// truncated at three standard deviations, reflected at the borders. A zero
/// radius returns the input unchanged.
pub fn gaussian_blur(plane: &ImagePlane, radius: f64) -> Result<ImagePlane> {
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "blur radius must be finite and nonnegative, got {radius}"
        )));
    }
    if radius == 0.0 {
        return Ok(plane.clone());
    }
    let half = (3.0 * radius).ceil() as i64;
    let mut kernel: Vec<f64> = (-half..=half)
        .map(|i| (-(i as f64).powi(2) / (2.0 * radius * radius)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= total;
    }

    let (w, h) = (plane.width() as i64, plane.height() as i64);
    let reflect = |i: i64, n: i64| -> usize {
        let mut i = i;
        // Mirror without repeating the edge sample; stable for any overshoot.
        loop {
            if i < 0 {
                i = -i;
            } else if i >= n {
                i = 2 * n - 2 - i;
            } else {
                return i as usize;
            }
        }
    };

    let mut horizontal = ImagePlane::zeros(plane.width(), plane.height());
    for row in 0..plane.height() {
        for col in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let src = reflect(col + ki as i64 - half, w);
                acc += k * plane.get(row, src);
            }
            horizontal.set(row, col as usize, acc);
        }
    }
    let mut out = ImagePlane::zeros(plane.width(), plane.height());
    for row in 0..h {
        for col in 0..plane.width() {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let src = reflect(row + ki as i64 - half, h);
                acc += k * horizontal.get(src, col);
            }
            out.set(row as usize, col, acc);
        }
    }
    Ok(out)
}
