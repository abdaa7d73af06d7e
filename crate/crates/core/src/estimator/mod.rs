//! Maximum-likelihood fitting.
//!
//! [`fit`] minimizes the negative log-likelihood from several starting points
//! (a Nelder-Mead warm start followed by BFGS), keeps the best, and attaches
//! the observed information and Wald statistics.

mod numdiff;
mod optimize;

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::likelihoods::{logistic, CoefVector, Likelihood, ModelKind};
use crate::regdata::Dataset;

pub use numdiff::{numerical_gradient, numerical_hessian};
pub use optimize::{projected, Bfgs, BfgsOutcome, BoxBound, Minimum, NelderMead};

/// Estimates or standard errors above this magnitude are flagged.
pub const UNRELIABLE_MAGNITUDE: f64 = 10.0;

/// Linked probabilities closer than this to 0 or 1 trigger a boundary warning.
pub const BOUNDARY_PROXIMITY: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the (projected) gradient norm, scaled by `sqrt(d)`.
    pub gradient_tolerance: f64,
    pub parameter_tolerance: f64,
    pub n_starts: usize,
    pub start_scale: f64,
    /// Symmetric box `[-B, B]^d`; `None` fits unconstrained.
    #[serde(rename = "box")]
    pub bound: Option<f64>,
    pub finite_difference_step: f64,
    /// Relative step for the observed-information Hessian.
    pub hessian_step: f64,
    pub simplex_iterations: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 2000,
            gradient_tolerance: 1e-5,
            parameter_tolerance: 1e-10,
            n_starts: 3,
            start_scale: 2.0,
            bound: None,
            finite_difference_step: 1e-5,
            hessian_step: 1e-3,
            simplex_iterations: 400,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Single start from zero inside the box `[-bound, bound]^d`.
    pub fn simulation(bound: f64) -> Self {
        FitConfig {
            n_starts: 1,
            bound: Some(bound),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gradient_tolerance", self.gradient_tolerance),
            ("parameter_tolerance", self.parameter_tolerance),
            ("start_scale", self.start_scale),
            ("finite_difference_step", self.finite_difference_step),
            ("hessian_step", self.hessian_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_starts == 0 {
            return Err(Error::Domain("n_starts must be at least 1".into()));
        }
        if let Some(b) = self.bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Domain(format!("box bound must be positive, got {b}")));
            }
        }
        Ok(())
    }

    /// Starting points: zero first, then uniform draws on `[-start_scale, start_scale]^d`.
    pub fn starting_points(&self, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = vec![vec![0.0; d]];
        for _ in 1..self.n_starts {
            let mut x: Vec<f64> = (0..d)
                .map(|_| rng.random_range(-self.start_scale..=self.start_scale))
                .collect();
            if let Some(b) = self.bound {
                x.iter_mut().for_each(|v| *v = v.clamp(-b, b));
            }
            out.push(x);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub coefficients: CoefVector,
    pub coefficient_names: Vec<String>,
    pub column_names: Vec<String>,
    pub loglik: f64,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Second differences of the negative log-likelihood at the estimate.
    pub hessian: Vec<Vec<f64>>,
    pub std_errors: Vec<Option<f64>>,
    pub z_stats: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub unreliable: Vec<bool>,
    pub aic: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub n_trials: u32,
    pub n_evaluations: usize,
    pub iterations: usize,
    pub best_start: usize,
    pub starts: Vec<StartSummary>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }

    /// Estimates with p-values, one column per link block and one row per
    /// design column, in the `estimate (p-value)` layout.
    pub fn coefficient_table(&self) -> String {
        let labels = self.model.block_labels();
        let k = self.column_names.len();
        let cell = |i: usize| -> String {
            let est = self.coefficients.values()[i];
            let p = match self.p_values[i] {
                Some(p) => format!("{p:.2}"),
                None => "NA".to_string(),
            };
            let mark = if self.unreliable[i] { "*" } else { "" };
            format!("{est:.2} ({p}){mark}")
        };
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec![String::new()];
        header.extend(labels.iter().map(|l| l.to_string()));
        rows.push(header);
        for (j, name) in self.column_names.iter().enumerate() {
            let mut row = vec![name.clone()];
            for b in 0..labels.len() {
                row.push(cell(b * k + j));
            }
            rows.push(row);
        }
        if self.model == ModelKind::Zinb {
            let mut row = vec!["log_theta".to_string(), String::new(), String::new()];
            row[1] = cell(2 * k);
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r.get(c).map_or(0, |s| s.len())).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        let _ = writeln!(
            out,
            "loglik {:.2}  AIC {:.2}  n {}  N {}  converged {}",
            self.loglik, self.aic, self.n, self.n_trials, self.converged
        );
        if self.unreliable.iter().any(|&u| u) {
            let _ = writeln!(out, "* near-singular information, p-value unreliable");
        }
        out
    }
}

/// Fits `model` to `data` by maximum likelihood.
pub fn fit(model: ModelKind, data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Domain("cannot fit an empty dataset".into()));
    }
    let lik = Likelihood::new(model, data);
    let d = lik.dimension();
    let evaluations = AtomicUsize::new(0);
    let objective = |x: &[f64]| -> f64 {
        evaluations.fetch_add(1, Ordering::Relaxed);
        match lik.coefficients(x).and_then(|t| lik.total(&t)) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    let bound = config.bound.map(BoxBound);
    let tolerance = config.gradient_tolerance * (d as f64).sqrt();

    let starts = config.starting_points(d);
    let runs: Vec<BfgsOutcome> = starts
        .par_iter()
        .map(|x0| {
            let warm = NelderMead {
                max_iterations: config.simplex_iterations,
                ..Default::default()
            }
            .minimize(objective, x0, bound);
            let refine = Bfgs {
                max_iterations: config.max_iterations,
                gradient_tolerance: tolerance,
                parameter_tolerance: config.parameter_tolerance,
                finite_difference_step: config.finite_difference_step,
                ..Default::default()
            };
            let mut out = refine.minimize(objective, &warm.x, bound);
            out.minimum.iterations += warm.iterations;
            out
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if r.minimum.value.is_finite() && best.map_or(true, |b| r.minimum.value < runs[b].minimum.value) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        return Err(Error::NoFiniteStart(format!(
            "{model}: log-likelihood is not finite at any of {} starts",
            starts.len()
        )));
    };
    let summaries = starts
        .iter()
        .zip(&runs)
        .map(|(s, r)| StartSummary {
            start: s.clone(),
            loglik: -r.minimum.value,
            converged: r.converged,
            iterations: r.minimum.iterations,
        })
        .collect();
    let run = &runs[best];
    let theta = lik.coefficients(&run.minimum.x)?;
    let loglik = -run.minimum.value;

    let mut warnings = Vec::new();
    let hessian = match numerical_hessian(objective, theta.values(), config.hessian_step) {
        Ok(h) => h,
        Err(e) => {
            warnings.push(format!("observed information unavailable: {e}"));
            vec![vec![f64::NAN; d]; d]
        }
    };
    if !run.converged {
        warnings.push(format!(
            "gradient norm {:.3e} above tolerance {:.3e}",
            run.projected_gradient_norm, tolerance
        ));
    }
    warnings.extend(boundary_warnings(&theta, data, config.bound));

    let result = FitResult {
        model,
        coefficient_names: theta.names(data.column_names()),
        column_names: data.column_names().to_vec(),
        loglik,
        converged: run.converged,
        gradient_norm: run.projected_gradient_norm,
        hessian,
        std_errors: vec![None; d],
        z_stats: vec![None; d],
        p_values: vec![None; d],
        unreliable: vec![false; d],
        aic: crate::inference::aic(loglik, d),
        n: data.len(),
        n_trials: data.n_trials(),
        n_evaluations: evaluations.load(Ordering::Relaxed),
        iterations: run.minimum.iterations,
        best_start: best,
        starts: summaries,
        warnings,
        coefficients: theta,
    };
    Ok(wald_inference(result))
}

fn boundary_warnings(theta: &CoefVector, data: &Dataset, bound: Option<f64>) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(b) = bound {
        let names = theta.names(data.column_names());
        for (name, v) in names.iter().zip(theta.values()) {
            if v.abs() >= b - 1e-8 {
                out.push(format!("{name} = {v} is on the box boundary"));
            }
        }
    }
    let labels = theta.model().block_labels();
    let logistic_blocks: &[usize] = match theta.model() {
        ModelKind::Fb => &[0, 1, 2],
        _ => &[1],
    };
    for &b in logistic_blocks {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for row in data.rows() {
            let eta: f64 = row.iter().zip(theta.block(b)).map(|(x, c)| x * c).sum();
            let v = logistic(eta);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo < BOUNDARY_PROXIMITY || hi > 1.0 - BOUNDARY_PROXIMITY {
            out.push(format!(
                "fitted {} ranges over [{lo:.3e}, {hi:.6}], near the boundary of (0, 1)",
                labels[b]
            ));
        }
    }
    out
}

/// Standard errors, z statistics and two-sided p-values from the observed
/// information stored in `fit.hessian`.
pub fn wald_inference(mut fit: FitResult) -> FitResult {
    let d = fit.hessian.len();
    let info = DMatrix::from_fn(d, d, |i, j| fit.hessian[i][j]);
    let finite = info.iter().all(|v| v.is_finite());
    let covariance = if finite {
        info.clone().cholesky().map(|c| c.inverse())
    } else {
        None
    };
    let values = fit.coefficients.values().to_vec();
    match covariance {
        Some(cov) => {
            for i in 0..d {
                let var = cov[(i, i)];
                if var > 0.0 && var.is_finite() {
                    let se = var.sqrt();
                    let z = values[i] / se;
                    fit.std_errors[i] = Some(se);
                    fit.z_stats[i] = Some(z);
                    fit.p_values[i] = Some(two_sided_p(z));
                    fit.unreliable[i] = values[i].abs() > UNRELIABLE_MAGNITUDE || se > UNRELIABLE_MAGNITUDE;
                } else {
                    fit.unreliable[i] = true;
                }
            }
        }
        None => {
            fit.std_errors = vec![None; d];
            fit.z_stats = vec![None; d];
            fit.p_values = vec![None; d];
            fit.unreliable = vec![true; d];
            fit.warnings
                .push("observed information is not positive definite; standard errors unavailable".into());
        }
    }
    let flagged: Vec<&str> = fit
        .coefficient_names
        .iter()
        .zip(&fit.unreliable)
        .filter(|(_, &u)| u)
        .map(|(n, _)| n.as_str())
        .collect();
    if !flagged.is_empty() && covariance_was_ok(&fit) {
        fit.warnings.push(format!("unreliable inference for: {}", flagged.join(", ")));
    }
    fit
}

fn covariance_was_ok(fit: &FitResult) -> bool {
    fit.std_errors.iter().any(Option::is_some)
}

/// `P(|Z| > |z|)` for standard normal `Z`.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihoods::total_loglik;

    fn dummy_fit(hessian: Vec<Vec<f64>>, values: Vec<f64>) -> FitResult {
        let d = values.len();
        FitResult {
            model: ModelKind::Zip,
            coefficient_names: (0..d).map(|i| format!("b{i}")).collect(),
            column_names: vec!["x".into()],
            coefficients: CoefVector::new(ModelKind::Zip, d / 2, values).unwrap(),
            loglik: -1.0,
            converged: true,
            gradient_norm: 0.0,
            hessian,
            std_errors: vec![None; d],
            z_stats: vec![None; d],
            p_values: vec![None; d],
            unreliable: vec![false; d],
            aic: 2.0 * d as f64 + 2.0,
            n: 10,
            n_trials: 3,
            n_evaluations: 0,
            iterations: 0,
            best_start: 0,
            starts: vec![],
            warnings: vec![],
        }
    }

    #[test]
    fn identity_information_gives_unit_errors() {
        let f = wald_inference(dummy_fit(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, -2.0]));
        assert_eq!(f.std_errors, vec![Some(1.0), Some(1.0)]);
        assert_eq!(f.z_stats, vec![Some(0.5), Some(-2.0)]);
    }

    #[test]
    fn normal_quantile_p_value() {
        assert!((two_sided_p(1.96) - 0.05).abs() < 5e-4);
        assert_eq!(two_sided_p(0.0), 1.0);
    }

    #[test]
    fn indefinite_information_is_flagged_not_fatal() {
        let f = wald_inference(dummy_fit(vec![vec![1.0, 2.0], vec![2.0, 1.0]], vec![0.5, 0.5]));
        assert!(f.std_errors.iter().all(Option::is_none));
        assert!(f.unreliable.iter().all(|&u| u));
        assert!(!f.warnings.is_empty());
    }

    #[test]
    fn large_estimates_are_flagged() {
        let f = wald_inference(dummy_fit(vec![vec![4.0, 0.0], vec![0.0, 1e-4]], vec![11.73, 0.1]));
        assert_eq!(f.unreliable, vec![true, true]);
        assert!((f.std_errors[1].unwrap() - 100.0).abs() < 1e-9);
    }

    fn small_fb_data() -> Dataset {
        let y = vec![0, 0, 3, 1, 0, 4, 0, 2, 0, 0, 5, 1];
        let rows: Vec<Vec<f64>> = (0..y.len()).map(|i| vec![(i as f64 / 6.0) - 1.0]).collect();
        Dataset::from_rows(y, &rows, vec!["x".into()], true, Some(5)).unwrap()
    }

    #[test]
    fn gradient_of_fb_loglik_matches_independent_differences() {
        let data = small_fb_data();
        let theta = [-0.4, 0.3, 0.2, -0.1, 0.5, 0.25];
        let f = |x: &[f64]| {
            let t = CoefVector::new(ModelKind::Fb, 2, x.to_vec()).unwrap();
            total_loglik(&t, &data).unwrap()
        };
        let g = numerical_gradient(f, &theta, 1e-5).unwrap();
        for i in 0..theta.len() {
            let h = 1e-5 * (1.0 + theta[i].abs());
            let mut a = theta.to_vec();
            let mut b = theta.to_vec();
            a[i] += h;
            b[i] -= h;
            let direct = (f(&a) - f(&b)) / (2.0 * h);
            assert!((g[i] - direct).abs() <= 1e-6 * direct.abs().max(1e-3), "{i}");
        }
    }

    #[test]
    fn all_zero_response_drives_mass_to_zero() {
        let rows: Vec<Vec<f64>> = vec![vec![]; 20];
        let data = Dataset::from_rows(vec![0; 20], &rows, vec![], true, Some(4)).unwrap();
        let fit = fit(ModelKind::Fb, &data, &FitConfig { n_starts: 1, ..Default::default() }).unwrap();
        assert!(fit.converged, "{:?}", fit.warnings);
        assert!(fit.loglik <= 0.0 && fit.loglik > -1e-3, "{}", fit.loglik);
        assert!(fit.warnings.iter().any(|w| w.contains("near the boundary")));
    }

    #[test]
    fn fit_is_deterministic() {
        let data = small_fb_data();
        let cfg = FitConfig { n_starts: 2, seed: 7, ..Default::default() };
        let a = fit(ModelKind::Zip, &data, &cfg).unwrap();
        let b = fit(ModelKind::Zip, &data, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.aic, 2.0 * 4.0 - 2.0 * a.loglik);
    }

    #[test]
    fn starts_are_inside_the_box() {
        let cfg = FitConfig { n_starts: 5, bound: Some(1.0), seed: 3, ..Default::default() };
        let s = cfg.starting_points(4);
        assert_eq!(s[0], vec![0.0; 4]);
        assert!(s.iter().flatten().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn table_has_one_row_per_column() {
        let f = wald_inference(dummy_fit(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.5, -2.0]));
        let t = f.coefficient_table();
        assert!(t.lines().next().unwrap().contains("mu"));
        assert!(t.contains("0.50 (0.62)"));
    }
}
