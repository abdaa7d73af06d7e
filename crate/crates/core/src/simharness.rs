//! Monte-Carlo studies of the FB regression estimator.
//!
//! Each replication draws `x_i` i.i.d. uniform on `(low, high)^k`, samples
//! `y_i` from the fractional binomial at the linked parameters, refits
//! inside the box and records the estimate. Replication `r` uses ChaCha
//! stream `r` of the study seed, so any single replication can be
//! regenerated on its own.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit, FitConfig};
use crate::frbinom::{draw, pmf};
use crate::likelihoods::{coefficient_names, link_fb, CoefVector, ModelKind};
use crate::regdata::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    /// `(p block, H block, c° block)`, one coefficient per covariate each.
    pub theta_true: Vec<f64>,
    pub n: usize,
    #[serde(rename = "N")]
    pub n_trials: u32,
    pub replications: usize,
    pub covariates: usize,
    pub low: f64,
    pub high: f64,
    #[serde(rename = "box")]
    pub bound: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Record wall-clock times; off by default so reports are reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            theta_true: vec![-1.0, 1.0, 2.0, 1.0, 0.0, -1.0],
            n: 400,
            n_trials: 10,
            replications: 20,
            covariates: 2,
            low: -2.0,
            high: 2.0,
            bound: 5.0,
            n_starts: 1,
            seed: 0,
            timing: false,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Domain("replications must be at least 1".into()));
        }
        if self.n == 0 || self.n_trials == 0 || self.covariates == 0 {
            return Err(Error::Domain("n, N and the covariate count must be positive".into()));
        }
        if self.theta_true.len() != 3 * self.covariates {
            return Err(Error::Dimension {
                model: "fb".into(),
                columns: self.covariates,
                expected: 3 * self.covariates,
                got: self.theta_true.len(),
            });
        }
        if !(self.low < self.high) || !(self.bound > 0.0) {
            return Err(Error::Domain("need low < high and a positive box bound".into()));
        }
        if self.theta_true.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("theta_true must be finite".into()));
        }
        Ok(())
    }

    pub fn column_names(&self) -> Vec<String> {
        (1..=self.covariates).map(|j| format!("x{j}")).collect()
    }

    pub fn coefficient_names(&self) -> Vec<String> {
        coefficient_names(ModelKind::Fb, &self.column_names())
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            n_starts: self.n_starts,
            seed: self.seed,
            ..FitConfig::simulation(self.bound)
        }
    }
}

/// Dataset of replication `index`, without intercept.
pub fn generate(spec: &SimSpec, index: usize) -> Result<Dataset> {
    spec.validate()?;
    let theta = CoefVector::new(ModelKind::Fb, spec.covariates, spec.theta_true.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let mut rows = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x: Vec<f64> = (0..spec.covariates)
            .map(|_| rng.random_range(spec.low..spec.high))
            .collect();
        let params = link_fb(&x, &theta)?.to_constrained()?;
        let cdf = pmf(spec.n_trials as usize, &params)?.cdf();
        y.push(draw(&cdf, &mut rng));
        rows.push(x);
    }
    Dataset::from_rows(y, &rows, spec.column_names(), false, Some(spec.n_trials))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub estimate: Option<Vec<f64>>,
    pub loglik: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub mean_replication_seconds: f64,
    pub max_replication_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub spec: SimSpec,
    pub coefficient_names: Vec<String>,
    pub theta_true: Vec<f64>,
    pub bias: Vec<f64>,
    /// Sample standard deviation over replications; absent with fewer than two.
    pub std_error: Option<Vec<f64>>,
    pub replications: Vec<Replication>,
    pub failed: usize,
    pub not_converged: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

impl SimReport {
    /// Header plus one `bias(se)` row labelled by `N` and `n`.
    pub fn table(&self) -> String {
        table(std::slice::from_ref(self))
    }

    pub fn successful(&self) -> usize {
        self.replications.len() - self.failed
    }
}

/// Several reports as rows of one `bias(se)` table.
pub fn table(reports: &[SimReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let mut cells: Vec<Vec<String>> = vec![];
    let mut header = vec!["N".to_string(), "n".to_string()];
    header.extend(first.coefficient_names.iter().cloned());
    cells.push(header);
    for r in reports {
        let mut row = vec![r.spec.n_trials.to_string(), r.spec.n.to_string()];
        for (i, b) in r.bias.iter().enumerate() {
            let se = match &r.std_error {
                Some(se) => format!("{:.2}", se[i]),
                None => "NA".into(),
            };
            row.push(format!("{b:.2}({se})"));
        }
        cells.push(row);
    }
    let widths: Vec<usize> = (0..cells[0].len())
        .map(|c| cells.iter().map(|r| r.get(c).map_or(0, String::len)).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  "));
    }
    out
}

fn replicate(spec: &SimSpec, index: usize) -> Replication {
    let started = Instant::now();
    let outcome = generate(spec, index).and_then(|data| fit(ModelKind::Fb, &data, &spec.fit_config()));
    let seconds = spec.timing.then(|| started.elapsed().as_secs_f64());
    match outcome {
        Ok(f) => Replication {
            index,
            estimate: Some(f.coefficients.values().to_vec()),
            loglik: Some(f.loglik),
            converged: f.converged,
            error: None,
            seconds,
        },
        Err(e) => {
            log::warn!("replication {index} failed: {e}");
            Replication {
                index,
                estimate: None,
                loglik: None,
                converged: false,
                error: Some(e.to_string()),
                seconds,
            }
        }
    }
}

/// Runs every replication and aggregates bias and standard error over the
/// ones that produced an estimate.
pub fn run_study(spec: &SimSpec) -> Result<SimReport> {
    spec.validate()?;
    let started = Instant::now();
    let replications: Vec<Replication> = (0..spec.replications)
        .into_par_iter()
        .map(|i| replicate(spec, i))
        .collect();
    let estimates: Vec<&Vec<f64>> = replications.iter().filter_map(|r| r.estimate.as_ref()).collect();
    let failed = replications.len() - estimates.len();
    let d = spec.theta_true.len();
    let m = estimates.len() as f64;
    let means: Vec<f64> = (0..d)
        .map(|j| estimates.iter().map(|e| e[j]).sum::<f64>() / m)
        .collect();
    let bias = if estimates.is_empty() {
        vec![f64::NAN; d]
    } else {
        means.iter().zip(&spec.theta_true).map(|(a, t)| a - t).collect()
    };
    let std_error = (estimates.len() >= 2).then(|| {
        (0..d)
            .map(|j| {
                let ss: f64 = estimates.iter().map(|e| (e[j] - means[j]).powi(2)).sum();
                (ss / (m - 1.0)).sqrt()
            })
            .collect()
    });
    let timing = spec.timing.then(|| {
        let secs: Vec<f64> = replications.iter().filter_map(|r| r.seconds).collect();
        Timing {
            total_seconds: started.elapsed().as_secs_f64(),
            mean_replication_seconds: secs.iter().sum::<f64>() / secs.len().max(1) as f64,
            max_replication_seconds: secs.iter().copied().fold(0.0, f64::max),
        }
    });
    Ok(SimReport {
        spec: spec.clone(),
        coefficient_names: spec.coefficient_names(),
        theta_true: spec.theta_true.clone(),
        bias,
        std_error,
        not_converged: replications.iter().filter(|r| r.estimate.is_some() && !r.converged).count(),
        failed,
        replications,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frbinom::{c_max, FbParams};

    #[test]
    fn zero_theta_draws_from_the_center() {
        let spec = SimSpec {
            theta_true: vec![0.0; 6],
            n: 4000,
            seed: 11,
            ..Default::default()
        };
        let data = generate(&spec, 0).unwrap();
        let c = 0.5 * c_max(0.5, 0.5).unwrap();
        let table = pmf(10, &FbParams::new(0.5, 0.5, c).unwrap()).unwrap();
        let sd = (table.variance() / 4000.0).sqrt();
        let mean = data.y().iter().map(|&v| v as f64).sum::<f64>() / 4000.0;
        assert!((mean - 5.0).abs() < 3.0 * sd, "{mean}");
    }

    #[test]
    fn mean_tracks_linked_p() {
        let spec = SimSpec { n: 3000, seed: 5, ..Default::default() };
        let data = generate(&spec, 2).unwrap();
        let theta = CoefVector::new(ModelKind::Fb, 2, spec.theta_true.clone()).unwrap();
        let mut expected = 0.0;
        let mut var = 0.0;
        for (row, _) in data.rows().zip(data.y()) {
            let params = link_fb(row, &theta).unwrap().to_constrained().unwrap();
            let t = pmf(10, &params).unwrap();
            expected += t.mean();
            var += t.variance();
        }
        let mean: f64 = data.y().iter().map(|&v| v as f64).sum();
        assert!((mean - expected).abs() < 3.0 * var.sqrt());
        assert!((expected - 10.0 * data.rows().map(|r| crate::likelihoods::logistic(-r[0] + r[1])).sum::<f64>()).abs() < 1e-6);
    }

    #[test]
    fn replications_are_reproducible_and_distinct() {
        let spec = SimSpec { n: 50, seed: 9, ..Default::default() };
        assert_eq!(generate(&spec, 3).unwrap(), generate(&spec, 3).unwrap());
        assert_ne!(generate(&spec, 3).unwrap().y(), generate(&spec, 4).unwrap().y());
    }

    #[test]
    fn single_replication_has_no_standard_error() {
        let spec = SimSpec { n: 60, replications: 1, seed: 1, ..Default::default() };
        let r = run_study(&spec).unwrap();
        assert!(r.std_error.is_none());
        assert_eq!(r.bias.len(), 6);
        assert!(r.table().contains("(NA)"));
    }

    #[test]
    fn rejects_wrong_theta_length() {
        let spec = SimSpec { theta_true: vec![0.0; 4], ..Default::default() };
        assert!(run_study(&spec).is_err());
    }
}
