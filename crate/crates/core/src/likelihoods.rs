//! Per-observation log-probabilities for the four count models.
//!
//! | model | blocks | links |
//! |-------|--------|-------|
//! | `fb`    | `psi`, `eta`, `nu` | `p`, `H`, `c°` all logit |
//! | `zip`   | `beta`, `gamma` | `mu` log, `pi` logit |
//! | `zinb`  | `beta`, `gamma`, scalar `log theta` | as ZIP, `theta` log |
//! | `zinb2` | `beta`, `gamma`, `alpha` | as ZIP, `theta_i` log |
//!
//! Each block has one coefficient per design column. The negative binomial
//! has variance `mu + mu^2 / theta`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::frbinom::{pmf, FbParamsNatural, PmfTable};
use crate::regdata::Dataset;

/// Linked probabilities are kept inside `[LINK_FLOOR, LINK_CEILING]` so the
/// distribution stays feasible when a logistic rounds to 0 or 1.
pub const LINK_FLOOR: f64 = 1e-300;
pub const LINK_CEILING: f64 = 1.0 - 1e-12;

/// Significant digits kept in `(p, H, c°)` before the pmf is evaluated.
pub const KEY_DIGITS: i32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fb,
    Zip,
    Zinb,
    Zinb2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Fb, ModelKind::Zip, ModelKind::Zinb, ModelKind::Zinb2];

    /// Coefficient count for a design with `ncols` columns.
    pub fn dimension(self, ncols: usize) -> usize {
        match self {
            ModelKind::Fb | ModelKind::Zinb2 => 3 * ncols,
            ModelKind::Zip => 2 * ncols,
            ModelKind::Zinb => 2 * ncols + 1,
        }
    }

    /// Label of each per-column block, in storage order.
    pub fn block_labels(self) -> &'static [&'static str] {
        match self {
            ModelKind::Fb => &["p", "H", "c0"],
            ModelKind::Zip | ModelKind::Zinb => &["mu", "pi"],
            ModelKind::Zinb2 => &["mu", "pi", "theta"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Fb => "fb",
            ModelKind::Zip => "zip",
            ModelKind::Zinb => "zinb",
            ModelKind::Zinb2 => "zinb2",
        }
    }

    /// Display name used in tables.
    pub fn title(self) -> &'static str {
        match self {
            ModelKind::Fb => "FB",
            ModelKind::Zip => "ZIP",
            ModelKind::Zinb => "ZINB",
            ModelKind::Zinb2 => "ZINB-2",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fb" => Ok(ModelKind::Fb),
            "zip" => Ok(ModelKind::Zip),
            "zinb" => Ok(ModelKind::Zinb),
            "zinb2" | "zinb-2" => Ok(ModelKind::Zinb2),
            _ => Err(Error::Domain(format!("unknown model `{s}`"))),
        }
    }
}

/// Stacked regression coefficients in unconstrained space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefVector {
    model: ModelKind,
    ncols: usize,
    values: Vec<f64>,
}

impl CoefVector {
    pub fn new(model: ModelKind, ncols: usize, values: Vec<f64>) -> Result<Self> {
        let expected = model.dimension(ncols);
        if values.len() != expected {
            return Err(Error::Dimension {
                model: model.to_string(),
                columns: ncols,
                expected,
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("coefficient {bad} is not finite")));
        }
        Ok(CoefVector { model, ncols, values })
    }

    pub fn zeros(model: ModelKind, ncols: usize) -> Self {
        CoefVector {
            model,
            ncols,
            values: vec![0.0; model.dimension(ncols)],
        }
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The `i`-th per-column block.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    /// ZINB dispersion on the log scale.
    pub fn log_theta(&self) -> Option<f64> {
        (self.model == ModelKind::Zinb).then(|| self.values[2 * self.ncols])
    }

    /// `block:column` labels matching [`CoefVector::values`].
    pub fn names(&self, columns: &[String]) -> Vec<String> {
        coefficient_names(self.model, columns)
    }
}

pub fn coefficient_names(model: ModelKind, columns: &[String]) -> Vec<String> {
    let mut out: Vec<String> = model
        .block_labels()
        .iter()
        .flat_map(|b| columns.iter().map(move |c| format!("{b}:{c}")))
        .collect();
    if model == ModelKind::Zinb {
        out.push("log_theta".to_string());
    }
    out
}

fn dot(x: &[f64], b: &[f64]) -> f64 {
    x.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// `1 / (1 + exp(-t))` without overflow for large `|t|`.
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(t))`.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn unit(t: f64) -> f64 {
    logistic(t).clamp(LINK_FLOOR, LINK_CEILING)
}

fn check_row(theta: &CoefVector, x: &[f64]) -> Result<()> {
    if x.len() != theta.ncols {
        return Err(Error::Dimension {
            model: theta.model.to_string(),
            columns: x.len(),
            expected: theta.model.dimension(x.len()),
            got: theta.len(),
        });
    }
    Ok(())
}

/// Linked `(p_i, H_i, c°_i)` for one design row of an FB coefficient vector.
pub fn link_fb(x: &[f64], theta: &CoefVector) -> Result<FbParamsNatural> {
    check_row(theta, x)?;
    if theta.model != ModelKind::Fb {
        return Err(Error::Domain(format!("expected fb coefficients, got {}", theta.model)));
    }
    Ok(FbParamsNatural {
        p: unit(dot(x, theta.block(0))),
        h: unit(dot(x, theta.block(1))),
        c_circ: logistic(dot(x, theta.block(2))).min(LINK_CEILING),
    })
}

/// Rounds to [`KEY_DIGITS`] significant digits, leaving the value alone if
/// rounding would push it onto the boundary of the unit interval.
pub fn quantize(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let exponent = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(KEY_DIGITS - 1 - exponent);
    if !scale.is_finite() || scale == 0.0 {
        return v;
    }
    let q = (v * scale).round() / scale;
    if q > 0.0 && q < 1.0 {
        q
    } else {
        v
    }
}

fn quantized(natural: FbParamsNatural) -> FbParamsNatural {
    FbParamsNatural {
        p: quantize(natural.p),
        h: quantize(natural.h),
        c_circ: quantize(natural.c_circ),
    }
}

fn fb_table(natural: FbParamsNatural, n_trials: u32) -> Result<PmfTable> {
    pmf(n_trials as usize, &natural.to_constrained()?)
}

fn log_of(table: &PmfTable, y: u32) -> f64 {
    table.prob(y as usize).ln()
}

/// `ln P(B_N(p_i, H_i, c°_i) = y)` with linked parameters from `x` and `theta`.
pub fn fb_logpmf(y: u32, x: &[f64], theta: &CoefVector, n_trials: u32) -> Result<f64> {
    if y > n_trials {
        return Err(Error::ResponseExceedsTrials { y, n: n_trials });
    }
    let natural = quantized(link_fb(x, theta)?);
    Ok(log_of(&fb_table(natural, n_trials)?, y))
}

fn poisson_logpmf(y: u32, mu: f64) -> f64 {
    if y == 0 {
        -mu
    } else {
        -mu + y as f64 * mu.ln() - ln_factorial(y as u64)
    }
}

/// NB log-mass with mean `mu` and dispersion `theta`.
pub fn nb_logpmf(y: u32, mu: f64, theta: f64) -> f64 {
    let yf = y as f64;
    // ln Gamma(theta + y) - ln Gamma(theta) - ln y!
    let combinatorial = if y < 64 {
        (0..y).map(|j| (theta + j as f64).ln()).sum::<f64>() - ln_factorial(y as u64)
    } else {
        ln_gamma(theta + yf) - ln_gamma(theta) - ln_factorial(y as u64)
    };
    let zero_part = -theta * (mu / theta).ln_1p();
    if y == 0 {
        return zero_part;
    }
    combinatorial + zero_part + yf * (mu.ln() - (theta + mu).ln())
}

/// Mixes a structural-zero probability `pi = logistic(t)` with a count law.
fn zero_inflated(y: u32, t: f64, count_logpmf: f64) -> f64 {
    let log_pi = -softplus(-t);
    let log_not_pi = -softplus(t);
    if y == 0 {
        log_sum_exp(log_pi, log_not_pi + count_logpmf)
    } else {
        log_not_pi + count_logpmf
    }
}

fn expect_model(theta: &CoefVector, model: ModelKind) -> Result<()> {
    if theta.model != model {
        return Err(Error::Domain(format!(
            "expected {model} coefficients, got {}",
            theta.model
        )));
    }
    Ok(())
}

pub fn zip_logpmf(y: u32, x: &[f64], theta: &CoefVector) -> Result<f64> {
    expect_model(theta, ModelKind::Zip)?;
    check_row(theta, x)?;
    let mu = dot(x, theta.block(0)).exp();
    Ok(zero_inflated(y, dot(x, theta.block(1)), poisson_logpmf(y, mu)))
}

pub fn zinb_logpmf(y: u32, x: &[f64], theta: &CoefVector) -> Result<f64> {
    expect_model(theta, ModelKind::Zinb)?;
    check_row(theta, x)?;
    let mu = dot(x, theta.block(0)).exp();
    let dispersion = theta.log_theta().expect("zinb").exp();
    Ok(zero_inflated(y, dot(x, theta.block(1)), nb_logpmf(y, mu, dispersion)))
}

pub fn zinb2_logpmf(y: u32, x: &[f64], theta: &CoefVector) -> Result<f64> {
    expect_model(theta, ModelKind::Zinb2)?;
    check_row(theta, x)?;
    let mu = dot(x, theta.block(0)).exp();
    let dispersion = dot(x, theta.block(2)).exp();
    Ok(zero_inflated(y, dot(x, theta.block(1)), nb_logpmf(y, mu, dispersion)))
}

/// Dispatches on the coefficient vector's model.
pub fn logpmf(y: u32, x: &[f64], theta: &CoefVector, n_trials: u32) -> Result<f64> {
    match theta.model {
        ModelKind::Fb => fb_logpmf(y, x, theta, n_trials),
        ModelKind::Zip => zip_logpmf(y, x, theta),
        ModelKind::Zinb => zinb_logpmf(y, x, theta),
        ModelKind::Zinb2 => zinb2_logpmf(y, x, theta),
    }
}

type Key = [u64; 3];

/// Memo of FB pmf tables keyed by quantized `(p, H, c°)` for one `N`.
///
/// Tables are always computed at the quantized parameters, so cached and
/// uncached evaluations agree bit for bit.
#[derive(Debug)]
pub struct PmfCache {
    n_trials: u32,
    capacity: usize,
    tables: RwLock<HashMap<Key, Arc<PmfTable>>>,
}

impl PmfCache {
    pub const DEFAULT_CAPACITY: usize = 50_000;

    pub fn new(n_trials: u32) -> Self {
        Self::with_capacity(n_trials, Self::DEFAULT_CAPACITY)
    }

    pub fn with_capacity(n_trials: u32, capacity: usize) -> Self {
        PmfCache {
            n_trials,
            capacity: capacity.max(1),
            tables: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.tables.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, natural: FbParamsNatural) -> Result<Arc<PmfTable>> {
        let key = [natural.p.to_bits(), natural.h.to_bits(), natural.c_circ.to_bits()];
        if let Some(t) = self.tables.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(fb_table(natural, self.n_trials)?);
        let mut map = self.tables.write().expect("cache lock");
        if map.len() >= self.capacity {
            map.clear();
        }
        Ok(Arc::clone(map.entry(key).or_insert(table)))
    }
}

/// Log-likelihood of one model on one dataset.
#[derive(Debug)]
pub struct Likelihood<'a> {
    model: ModelKind,
    data: &'a Dataset,
    cache: Option<PmfCache>,
}

impl<'a> Likelihood<'a> {
    pub fn new(model: ModelKind, data: &'a Dataset) -> Self {
        let cache = (model == ModelKind::Fb).then(|| PmfCache::new(data.n_trials()));
        Likelihood { model, data, cache }
    }

    /// Evaluates every FB observation from scratch.
    pub fn uncached(model: ModelKind, data: &'a Dataset) -> Self {
        Likelihood {
            model,
            data,
            cache: None,
        }
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension(self.data.ncols())
    }

    pub fn coefficients(&self, values: &[f64]) -> Result<CoefVector> {
        CoefVector::new(self.model, self.data.ncols(), values.to_vec())
    }

    fn one(&self, y: u32, x: &[f64], theta: &CoefVector) -> Result<f64> {
        match (&self.cache, self.model) {
            (Some(cache), ModelKind::Fb) => {
                let n = self.data.n_trials();
                if y > n {
                    return Err(Error::ResponseExceedsTrials { y, n });
                }
                let table = cache.get(quantized(link_fb(x, theta)?))?;
                Ok(log_of(&table, y))
            }
            _ => logpmf(y, x, theta, self.data.n_trials()),
        }
    }

    /// `ln P(y_i | x_i, theta)` for every observation, in row order.
    pub fn per_observation(&self, theta: &CoefVector) -> Result<Vec<f64>> {
        if theta.model != self.model || theta.ncols != self.data.ncols() {
            return Err(Error::Dimension {
                model: self.model.to_string(),
                columns: self.data.ncols(),
                expected: self.dimension(),
                got: theta.len(),
            });
        }
        let y = self.data.y();
        (0..self.data.len())
            .into_par_iter()
            .map(|i| self.one(y[i], self.data.row(i), theta))
            .collect()
    }

    /// Sum of [`Likelihood::per_observation`], accumulated in row order so
    /// the result does not depend on thread scheduling.
    pub fn total(&self, theta: &CoefVector) -> Result<f64> {
        Ok(self.per_observation(theta)?.iter().sum())
    }
}

/// Total log-likelihood of `theta` on `data`, without caching.
pub fn total_loglik(theta: &CoefVector, data: &Dataset) -> Result<f64> {
    Likelihood::uncached(theta.model(), data).total(theta)
}
