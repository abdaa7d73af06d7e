//! Model comparison and fitted distributions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::frbinom::pmf;
use crate::likelihoods::{link_fb, logpmf, Likelihood, ModelKind};
use crate::regdata::Dataset;

/// Akaike information criterion `2d - 2 loglik`.
pub fn aic(loglik: f64, d: usize) -> f64 {
    2.0 * d as f64 - 2.0 * loglik
}

/// Standard normal upper tail `1 - Phi(z)`.
pub fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VuongResult {
    pub statistic: f64,
    /// One-sided `1 - Phi(statistic)`; small values favour the first model.
    pub p_value: f64,
    pub n: usize,
    pub per_obs_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum VuongOutcome {
    Test(VuongResult),
    /// Every log-likelihood ratio is the same, so the statistic is undefined.
    IdenticalModels { n: usize },
}

impl VuongOutcome {
    pub fn statistic(&self) -> Option<f64> {
        match self {
            VuongOutcome::Test(r) => Some(r.statistic),
            VuongOutcome::IdenticalModels { .. } => None,
        }
    }

    pub fn p_value(&self) -> Option<f64> {
        match self {
            VuongOutcome::Test(r) => Some(r.p_value),
            VuongOutcome::IdenticalModels { .. } => None,
        }
    }
}

/// Uncorrected Vuong statistic `sqrt(n) mean(m) / sd(m)` from the
/// per-observation log-likelihood ratios `m`.
pub fn vuong_from_ratios(m: Vec<f64>) -> VuongOutcome {
    let n = m.len();
    if n < 2 {
        return VuongOutcome::IdenticalModels { n };
    }
    let nf = n as f64;
    let mean = m.iter().sum::<f64>() / nf;
    let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return VuongOutcome::IdenticalModels { n };
    }
    let statistic = nf.sqrt() * mean / sd;
    VuongOutcome::Test(VuongResult {
        statistic,
        p_value: upper_tail(statistic),
        n,
        per_obs_ratios: m,
    })
}

fn check_fit(fit: &FitResult, data: &Dataset) -> Result<()> {
    if fit.n != data.len() || fit.column_names != data.column_names() || fit.n_trials != data.n_trials() {
        return Err(Error::Domain(format!(
            "{} fit (n = {}, N = {}) does not match the dataset (n = {}, N = {})",
            fit.model.title(),
            fit.n,
            fit.n_trials,
            data.len(),
            data.n_trials()
        )));
    }
    Ok(())
}

/// Vuong's closeness test of `a` against `b`; a positive statistic favours `a`.
pub fn vuong_test(a: &FitResult, b: &FitResult, data: &Dataset) -> Result<VuongOutcome> {
    check_fit(a, data)?;
    check_fit(b, data)?;
    let la = Likelihood::new(a.model, data).per_observation(&a.coefficients)?;
    let lb = Likelihood::new(b.model, data).per_observation(&b.coefficients)?;
    Ok(vuong_from_ratios(la.iter().zip(&lb).map(|(x, y)| x - y).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistribution {
    pub model: ModelKind,
    pub profile: Vec<f64>,
    /// Probabilities of `0..=N`.
    pub probs: Vec<f64>,
    /// Mass above `N`; zero for FB.
    pub tail_mass: f64,
}

/// Fitted distribution of the response at one design row.
pub fn profile_distribution(fit: &FitResult, profile: &[f64], n_trials: u32) -> Result<ProfileDistribution> {
    let theta = &fit.coefficients;
    let (probs, tail_mass) = match fit.model {
        ModelKind::Fb => {
            let params = link_fb(profile, theta)?.to_constrained()?;
            (pmf(n_trials as usize, &params)?.probs().to_vec(), 0.0)
        }
        _ => {
            let probs = (0..=n_trials)
                .map(|k| logpmf(k, profile, theta, n_trials).map(f64::exp))
                .collect::<Result<Vec<_>>>()?;
            let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
            (probs, tail)
        }
    };
    Ok(ProfileDistribution {
        model: fit.model,
        profile: profile.to_vec(),
        probs,
        tail_mass,
    })
}

/// Relative frequencies of `0..=N` among rows whose design equals `profile`
/// exactly, with the number of such rows.
pub fn empirical_frequencies(data: &Dataset, profile: &[f64]) -> (usize, Vec<f64>) {
    let n = data.n_trials() as usize;
    let mut counts = vec![0usize; n + 1];
    let mut total = 0;
    for (row, &y) in data.rows().zip(data.y()) {
        if row == profile {
            counts[y as usize] += 1;
            total += 1;
        }
    }
    let freqs = counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect();
    (total, freqs)
}

/// CSV with one row per count: `k`, one fitted column per profile, and the
/// empirical frequency when given.
pub fn profile_csv(profiles: &[ProfileDistribution], empirical: Option<&[f64]>) -> String {
    let mut out = String::from("k");
    for p in profiles {
        let _ = write!(out, ",{}", p.model.as_str());
    }
    if empirical.is_some() {
        out.push_str(",empirical");
    }
    out.push('\n');
    let len = profiles
        .iter()
        .map(|p| p.probs.len())
        .chain(empirical.map(<[f64]>::len))
        .max()
        .unwrap_or(0);
    for k in 0..len {
        let _ = write!(out, "{k}");
        for p in profiles {
            let _ = write!(out, ",{:?}", p.probs.get(k).copied().unwrap_or(0.0));
        }
        if let Some(e) = empirical {
            let _ = write!(out, ",{:?}", e.get(k).copied().unwrap_or(0.0));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub model: ModelKind,
    pub loglik: f64,
    pub d: usize,
    pub aic: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VuongPair {
    pub first: ModelKind,
    pub second: ModelKind,
    #[serde(flatten)]
    pub outcome: VuongOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Sorted by ascending AIC.
    pub leaderboard: Vec<LeaderboardEntry>,
    pub vuong: Vec<VuongPair>,
}

impl ComparisonReport {
    pub fn table(&self) -> String {
        let mut out = format!("{:<8} {:>12} {:>4} {:>12}\n", "model", "loglik", "d", "AIC");
        for e in &self.leaderboard {
            let _ = writeln!(out, "{:<8} {:>12.2} {:>4} {:>12.2}", e.model.title(), e.loglik, e.d, e.aic);
        }
        if !self.vuong.is_empty() {
            out.push('\n');
            let _ = writeln!(out, "{:<16} {:>10} {:>8}", "Vuong", "statistic", "p-value");
            for v in &self.vuong {
                let pair = format!("{} vs {}", v.first.title(), v.second.title());
                match &v.outcome {
                    VuongOutcome::Test(r) => {
                        let _ = writeln!(out, "{pair:<16} {:>10.2} {:>8.2}", r.statistic, r.p_value);
                    }
                    VuongOutcome::IdenticalModels { .. } => {
                        let _ = writeln!(out, "{pair:<16} {:>10} {:>8}", "identical", "-");
                    }
                }
            }
        }
        out
    }
}

/// AIC leaderboard and Vuong tests of every pair `(i, j)`, `i < j`, in
/// the order the fits were given.
pub fn compare(fits: &[FitResult], data: &Dataset) -> Result<ComparisonReport> {
    for f in fits {
        check_fit(f, data)?;
    }
    let mut leaderboard: Vec<LeaderboardEntry> = fits
        .iter()
        .map(|f| LeaderboardEntry {
            model: f.model,
            loglik: f.loglik,
            d: f.dimension(),
            aic: aic(f.loglik, f.dimension()),
            converged: f.converged,
        })
        .collect();
    leaderboard.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    let mut vuong = Vec::new();
    for i in 0..fits.len() {
        for j in (i + 1)..fits.len() {
            vuong.push(VuongPair {
                first: fits[i].model,
                second: fits[j].model,
                outcome: vuong_test(&fits[i], &fits[j], data)?,
            });
        }
    }
    Ok(ComparisonReport { leaderboard, vuong })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{fit, FitConfig};

    #[test]
    fn aic_identity() {
        assert_eq!(aic(0.0, 1), 2.0);
        assert!((aic(-611.48, 9) - 1240.96).abs() < 1e-9);
    }

    #[test]
    fn one_sided_mapping() {
        assert!((upper_tail(1.86) - 0.03).abs() < 5e-3);
        assert!((upper_tail(1.38) - 0.08).abs() < 5e-3);
        assert_eq!(upper_tail(0.0), 0.5);
    }

    #[test]
    fn antisymmetric_and_shift_invariant() {
        let m = vec![0.3, -0.1, 0.7, 0.2, -0.4, 0.05];
        let neg: Vec<f64> = m.iter().map(|v| -v).collect();
        let a = vuong_from_ratios(m.clone()).statistic().unwrap();
        let b = vuong_from_ratios(neg).statistic().unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn constant_ratios_are_identical_models() {
        assert_eq!(vuong_from_ratios(vec![0.0; 5]), VuongOutcome::IdenticalModels { n: 5 });
    }

    fn data() -> Dataset {
        let y = vec![0, 0, 2, 1, 0, 3, 0, 1, 0, 0, 4, 2, 0, 1];
        let rows: Vec<Vec<f64>> = (0..y.len()).map(|i| vec![(i % 2) as f64]).collect();
        Dataset::from_rows(y, &rows, vec!["g".into()], true, None).unwrap()
    }

    #[test]
    fn self_comparison_and_profiles() {
        let d = data();
        let cfg = FitConfig { n_starts: 1, ..Default::default() };
        let zip = fit(ModelKind::Zip, &d, &cfg).unwrap();
        let out = vuong_test(&zip, &zip, &d).unwrap();
        assert!(matches!(out, VuongOutcome::IdenticalModels { .. }));

        let prof = profile_distribution(&zip, &[1.0, 0.0], 4).unwrap();
        let mu = zip.coefficients.block(0)[0].exp();
        let pi = crate::likelihoods::logistic(zip.coefficients.block(1)[0]);
        assert!((prof.probs[0] - (pi + (1.0 - pi) * (-mu).exp())).abs() < 1e-12);
        assert!((prof.probs.iter().sum::<f64>() + prof.tail_mass - 1.0).abs() < 1e-12);

        let (count, emp) = empirical_frequencies(&d, &[1.0, 0.0]);
        assert_eq!(count, 7);
        assert_eq!(emp.len(), prof.probs.len());
    }

    #[test]
    fn leaderboard_is_sorted() {
        let d = data();
        let cfg = FitConfig { n_starts: 1, ..Default::default() };
        let fits: Vec<FitResult> = [ModelKind::Zinb, ModelKind::Zip]
            .iter()
            .map(|&m| fit(m, &d, &cfg).unwrap())
            .collect();
        let r = compare(&fits, &d).unwrap();
        assert!(r.leaderboard.windows(2).all(|w| w[0].aic <= w[1].aic));
        assert_eq!(r.vuong.len(), 1);
    }

    #[test]
    fn binomial_profile_when_dependence_vanishes() {
        let d = data();
        let cfg = FitConfig { n_starts: 1, ..Default::default() };
        let mut f = fit(ModelKind::Zip, &d, &cfg).unwrap();
        f.model = ModelKind::Fb;
        f.coefficients =
            crate::likelihoods::CoefVector::new(ModelKind::Fb, 2, vec![0.0, 0.0, 0.0, 0.0, -40.0, 0.0]).unwrap();
        let p = profile_distribution(&f, &[1.0, 0.0], 4).unwrap();
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| c / 16.0);
        for (a, b) in p.probs.iter().zip(binom) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
