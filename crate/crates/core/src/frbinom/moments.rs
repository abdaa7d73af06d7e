use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{pmf, FbParams, PmfTable};

/// `E[B_N] = N p`.
pub fn mean(n: usize, params: &FbParams) -> f64 {
    n as f64 * params.p()
}

/// `Var[B_N] = N p (1-p) + sum_{i != j} p c |i-j|^(2H-2)`.
pub fn variance_exact(n: usize, params: &FbParams) -> f64 {
    let (p, c) = (params.p(), params.c());
    let cross: f64 = (1..n)
        .map(|g| 2.0 * (n - g) as f64 * (g as f64).powf(params.gap_exponent()))
        .sum();
    n as f64 * p * (1.0 - p) + p * c * cross
}

/// Leading-order growth of the variance in `N`.
///
/// * `H < 1/2`: `(p(1-p) + 2pc/(1-2H)) N`
/// * `H = 1/2`: `2pc N ln N`
/// * `H > 1/2`: `pc/(H(2H-1)) N^(2H)`
///
/// This is an asymptotic order, not the variance; use [`variance_exact`] for
/// anything quantitative.
pub fn variance_asymptotic(n: usize, params: &FbParams) -> f64 {
    let (p, h, c) = (params.p(), params.h(), params.c());
    let n = n as f64;
    if h < 0.5 {
        (p * (1.0 - p) + 2.0 * p * c / (1.0 - 2.0 * h)) * n
    } else if h == 0.5 {
        2.0 * p * c * n * n.ln()
    } else {
        p * c / (h * (2.0 * h - 1.0)) * n.powf(2.0 * h)
    }
}

/// Draws `count` i.i.d. variates by inverse-CDF lookup in the pmf table.
pub fn sample(n: usize, params: &FbParams, count: usize, seed: u64) -> Result<Vec<u32>> {
    let table = pmf(n, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_table(&table, count, &mut rng))
}

pub fn sample_table<R: Rng + ?Sized>(table: &PmfTable, count: usize, rng: &mut R) -> Vec<u32> {
    let cdf = table.cdf();
    (0..count).map(|_| draw(&cdf, rng)).collect()
}

pub(crate) fn draw<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    cdf.partition_point(|&acc| acc <= u).min(cdf.len() - 1) as u32
}
