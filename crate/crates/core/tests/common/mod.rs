//! Independent oracles for cross-checking the library: a second exact-cover
//! counter built on different machinery, numerical quadrature and Monte-Carlo
//! estimates for the closed-form divergences, and small shared generators.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

use tetriqa::plane::ImagePlane;

/// All edge-connected 4-cell subsets of the 4x4 board as bitmasks
/// (bit = row * 4 + col), found by brute force over every 4-bit mask.
pub fn connected_four_subsets() -> Vec<u16> {
    let mut result = Vec::new();
    for mask in 0u16..=u16::MAX {
        if mask.count_ones() != 4 {
            continue;
        }
        let start = mask.trailing_zeros() as u16;
        let mut seen = 1u16 << start;
        let mut frontier = vec![start];
        while let Some(cell) = frontier.pop() {
            let (row, col) = (cell / 4, cell % 4);
            let mut neighbors = Vec::new();
            if row > 0 {
                neighbors.push(cell - 4);
            }
            if row < 3 {
                neighbors.push(cell + 4);
            }
            if col > 0 {
                neighbors.push(cell - 1);
            }
            if col < 3 {
                neighbors.push(cell + 1);
            }
            for n in neighbors {
                let bit = 1u16 << n;
                if mask & bit != 0 && seen & bit == 0 {
                    seen |= bit;
                    frontier.push(n);
                }
            }
        }
        if seen == mask {
            result.push(mask);
        }
    }
    result
}

/// Counts exact covers of the 4x4 board by four tetrominoes with memoized
/// recursion over the covered-cells bitmask, placing a piece on the lowest
/// empty cell at each step.
pub fn exact_cover_count_memoized() -> u64 {
    let placements = connected_four_subsets();
    let mut memo: HashMap<u16, u64> = HashMap::new();
    fn count(covered: u16, placements: &[u16], memo: &mut HashMap<u16, u64>) -> u64 {
        if covered == 0xFFFF {
            return 1;
        }
        if let Some(&c) = memo.get(&covered) {
            return c;
        }
        let first_empty = (!covered).trailing_zeros() as u16;
        let mut total = 0;
        for &p in placements {
            if p & (1 << first_empty) != 0 && p & covered == 0 {
                total += count(covered | p, placements, memo);
            }
        }
        memo.insert(covered, total);
        total
    }
    count(0, &placements, &mut memo)
}

/// Weibull log-density at `x > 0`.
pub fn weibull_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape.ln() - shape * scale.ln() + (shape - 1.0) * x.ln() - (x / scale).powf(shape)
}

/// Numerical oracle for the Weibull-vs-Weibull KLD: trapezoid rule on the
/// exp-sinh substitution x = exp((pi/2) sinh t), which maps the real line
/// onto (0, inf) with doubly exponential endpoint decay. The integrand term
/// is skipped as soon as the first density underflows, before the second
/// log-density (which may be +inf-like) is ever touched.
pub fn weibull_kld_quadrature(k1: f64, l1: f64, k2: f64, l2: f64) -> f64 {
    let steps = 2000usize;
    let (t_lo, t_hi) = (-6.5f64, 6.5f64);
    let h = (t_hi - t_lo) / steps as f64;
    let term = |t: f64| -> f64 {
        let u = (std::f64::consts::FRAC_PI_2) * t.sinh();
        let x = u.exp();
        if !x.is_finite() || x == 0.0 {
            return 0.0;
        }
        let lp1 = weibull_ln_pdf(x, k1, l1);
        if lp1 < -745.0 {
            return 0.0;
        }
        let lp2 = weibull_ln_pdf(x, k2, l2);
        let weight = x * std::f64::consts::FRAC_PI_2 * t.cosh();
        lp1.exp() * (lp1 - lp2) * weight
    };
    let mut sum = 0.5 * (term(t_lo) + term(t_hi));
    for i in 1..steps {
        sum += term(t_lo + h * i as f64);
    }
    sum * h
}

/// Draws a well-conditioned random symmetric positive definite matrix.
pub fn random_pd_matrix(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let mut m = &g * g.transpose() / dim as f64;
    for i in 0..dim {
        m[(i, i)] += 0.5;
    }
    m
}

/// Monte-Carlo oracle for the zero-mean Gaussian KLD: draws from N(0, m1)
/// and averages ln p1 - ln p2. Returns the estimate and its standard error.
pub fn gaussian_kld_monte_carlo(
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let dim = m1.nrows();
    let chol1 = m1.clone().cholesky().expect("m1 must be PD");
    let chol2 = m2.clone().cholesky().expect("m2 must be PD");
    let l1 = chol1.l();
    let ln_det = |l: &DMatrix<f64>| -> f64 { 2.0 * (0..dim).map(|i| l[(i, i)].ln()).sum::<f64>() };
    let (ld1, ld2) = (ln_det(&l1), ln_det(&chol2.l()));

    let normal = rand_distr::StandardNormal;
    let mut mean = 0.0f64;
    let mut m2_acc = 0.0f64;
    for i in 0..samples {
        let u = DMatrix::from_fn(dim, 1, |_, _| {
            rand_distr::Distribution::sample(&normal, rng)
        });
        let y = &l1 * u;
        let q1 = chol1.solve(&y).dot(&y);
        let q2 = chol2.solve(&y).dot(&y);
        let value = 0.5 * (ld2 - ld1 + q2 - q1);
        let delta = value - mean;
        mean += delta / (i + 1) as f64;
        m2_acc += delta * (value - mean);
    }
    let variance = m2_acc / (samples - 1) as f64;
    (mean, (variance / samples as f64).sqrt())
}

/// Seeded uniform-noise plane in [0, 255].
pub fn seeded_plane(width: usize, height: usize, seed: u64) -> ImagePlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..width * height)
        .map(|_| rng.random::<f64>() * 255.0)
        .collect();
    ImagePlane::from_samples(width, height, samples).expect("matching length")
}

/// Seeded random 4x4 block with values in [-range, range].
pub fn seeded_block(rng: &mut ChaCha8Rng, range: f64) -> [[f64; 4]; 4] {
    let mut block = [[0.0f64; 4]; 4];
    for row in block.iter_mut() {
        for v in row.iter_mut() {
            *v = (rng.random::<f64>() * 2.0 - 1.0) * range;
        }
    }
    block
}

/// Lowercase hex encoding of a byte string.
pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Log-spaced grid with `n` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
