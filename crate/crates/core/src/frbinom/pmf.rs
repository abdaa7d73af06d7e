//! Probability mass function of `B_N(p, H, c)`, the number of successes in
//! the first `N` trials of the dependent Bernoulli sequence.
//!
//! Three routes are provided:
//!
//! * [`pmf`] treats the sequence as the stationary renewal process it is. The
//!   joint success probabilities factor over gaps, so the gap weights
//!   `u(g) = p + c g^(2H-2)` are renewal probabilities and the first-return
//!   law `f` solves `u(n) = sum_{k=1}^{n} f(k) u(n-k)`. Every configuration
//!   probability is then a product of non-negative factors, and the pmf is an
//!   `O(N^3)` sum of positive terms with no cancellation.
//! * [`pmf_inclusion_exclusion`] sums the signed binomial moments
//!   `P(B_N = k) = sum_{m>=k} (-1)^(m-k) C(m,k) T_m`, where `T_m` is the sum of
//!   joint success probabilities over all `m`-subsets, computed by an
//!   `O(N^3)` dynamic program. The alternating sum cancels heavily, so it runs
//!   in double-double arithmetic.
//! * [`pmf_bruteforce`] enumerates all `2^N` configurations. Oracle only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ddouble::Dd;
use super::process::clamp_config;
use super::FbParams;

/// Raw entries below this are reported as a numerical breakdown.
pub const NEGATIVE_MASS_TOLERANCE: f64 = 1e-9;

/// Largest `N` accepted by [`pmf_bruteforce`].
pub const BRUTEFORCE_MAX_TRIALS: usize = 20;

/// A raw pmf entry that came out below `-NEGATIVE_MASS_TOLERANCE`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeMass {
    pub k: usize,
    pub raw: f64,
}

/// `P(B_N = k)` for `k = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfTable {
    trials: usize,
    probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    diagnostics: Vec<NegativeMass>,
}

impl PmfTable {
    /// Clamps tiny negative entries to zero, records larger ones as
    /// diagnostics and rescales the table to sum to one.
    fn from_raw(trials: usize, mut probs: Vec<f64>) -> Self {
        let mut diagnostics = Vec::new();
        for (k, v) in probs.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -NEGATIVE_MASS_TOLERANCE {
                    log::warn!("pmf entry k={k} of B_{trials} evaluated to {v:e}; clamped to 0");
                    diagnostics.push(NegativeMass { k, raw: *v });
                }
                *v = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if total > 0.0 && total != 1.0 {
            probs.iter_mut().for_each(|v| *v /= total);
        }
        PmfTable {
            trials,
            probs,
            diagnostics,
        }
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn diagnostics(&self) -> &[NegativeMass] {
        &self.diagnostics
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - m).powi(2) * p)
            .sum()
    }

    /// Running sums, with the last entry forced to exactly 1.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }
}

fn check_trials(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    Ok(())
}

/// Renewal probabilities `u(g)` for `g = 0..n`, with `u(0) = 1`.
fn gap_weights(n: usize, params: &FbParams) -> Vec<f64> {
    std::iter::once(1.0)
        .chain((1..n).map(|g| params.gap_weight(g)))
        .collect()
}

/// First-return probabilities `f(1..n)` (index 0 unused) and survival
/// `R(m) = 1 - sum_{k<=m} f(k)` for `m = 0..n`.
fn renewal_law(u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let mut f = vec![0.0; n];
    for len in 1..n {
        let conv: f64 = (1..len).map(|k| f[k] * u[len - k]).sum();
        f[len] = u[len] - conv;
    }
    let mut survival = vec![1.0; n];
    for m in 1..n {
        survival[m] = survival[m - 1] - f[m];
    }
    (f, survival)
}

/// Exact pmf of `B_N(p, H, c)` via the renewal decomposition.
pub fn pmf(n: usize, params: &FbParams) -> Result<PmfTable> {
    check_trials(n)?;
    let p = params.p();
    let u = gap_weights(n, params);
    let (first_return, survival) = renewal_law(&u);

    // row[i]: probability that trial i is the m-th success and trials
    // 1..i hold exactly m successes.
    let mut row: Vec<f64> = (0..=n)
        .map(|i| if i == 0 { 0.0 } else { p * survival[i - 1] })
        .collect();
    let mut raw = vec![0.0; n + 1];
    raw[0] = 1.0 - row.iter().sum::<f64>();
    for m in 1..=n {
        raw[m] = (m..=n).map(|i| row[i] * survival[n - i]).sum();
        if m == n {
            break;
        }
        let mut next = vec![0.0; n + 1];
        for i in (m + 1)..=n {
            next[i] = (m..i).map(|j| row[j] * first_return[i - j]).sum();
        }
        row = next;
    }
    Ok(PmfTable::from_raw(n, raw))
}

/// Exact pmf of `B_N(p, H, c)` via signed binomial moments.
pub fn pmf_inclusion_exclusion(n: usize, params: &FbParams) -> Result<PmfTable> {
    check_trials(n)?;
    let u = gap_weights(n, params);
    let p = Dd::from_f64(params.p());

    // moments[m] = T_m = sum over m-subsets of the joint success probability
    let mut moments = vec![Dd::ZERO; n + 1];
    moments[0] = Dd::from_f64(1.0);
    // ending[i] = sum over m-subsets whose largest element is i
    let mut ending: Vec<Dd> = (0..=n).map(|i| if i == 0 { Dd::ZERO } else { p }).collect();
    moments[1] = p * n as f64;
    for m in 2..=n {
        let mut next = vec![Dd::ZERO; n + 1];
        for i in m..=n {
            let mut acc = Dd::ZERO;
            for j in (m - 1)..i {
                acc = acc + ending[j] * u[i - j];
            }
            next[i] = acc;
        }
        moments[m] = next.iter().fold(Dd::ZERO, |a, &b| a + b);
        ending = next;
    }

    let choose = binomial_table(n);
    let raw = (0..=n)
        .map(|k| {
            let mut acc = Dd::ZERO;
            for m in k..=n {
                let term = moments[m] * choose[m][k];
                acc = if (m - k) % 2 == 0 { acc + term } else { acc - term };
            }
            acc.to_f64()
        })
        .collect();
    Ok(PmfTable::from_raw(n, raw))
}

fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let mut row = vec![1.0; m + 1];
        for k in 1..m {
            row[k] = rows[m - 1][k - 1] + rows[m - 1][k];
        }
        rows.push(row);
    }
    rows
}

/// Pmf by enumerating every configuration of `N <= 20` trials and applying
/// the inclusion-exclusion configuration probability to each.
pub fn pmf_bruteforce(n: usize, params: &FbParams) -> Result<PmfTable> {
    check_trials(n)?;
    if n > BRUTEFORCE_MAX_TRIALS {
        return Err(Error::TooLarge {
            n,
            max: BRUTEFORCE_MAX_TRIALS,
        });
    }
    let size = 1usize << n;
    let full = size - 1;

    // joint[mask] = P(all trials in mask succeed); built by appending the
    // highest set bit to the rest of the mask.
    let mut joint = vec![0.0; size];
    joint[0] = 1.0;
    for mask in 1..size {
        let top = usize::BITS - 1 - mask.leading_zeros();
        let rest = mask & !(1 << top);
        joint[mask] = if rest == 0 {
            params.p()
        } else {
            let below = usize::BITS - 1 - rest.leading_zeros();
            joint[rest] * params.gap_weight((top - below) as usize)
        };
    }

    let mut raw = vec![0.0; n + 1];
    for ones in 0..size {
        let zeros = full & !ones;
        let mut total = 0.0;
        let mut sub = zeros;
        loop {
            let term = joint[ones | sub];
            if sub.count_ones() % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & zeros;
        }
        raw[ones.count_ones() as usize] += clamp_config(total)?;
    }
    Ok(PmfTable::from_raw(n, raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, h: f64, c: f64) -> FbParams {
        FbParams::new(p, h, c).unwrap()
    }

    fn binomial(n: usize, p: f64) -> Vec<f64> {
        let choose = binomial_table(n);
        (0..=n)
            .map(|k| choose[n][k] * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
            .collect()
    }

    #[test]
    fn single_trial_is_bernoulli() {
        let q = params(0.3, 0.8, 0.2);
        for table in [
            pmf(1, &q).unwrap(),
            pmf_inclusion_exclusion(1, &q).unwrap(),
            pmf_bruteforce(1, &q).unwrap(),
        ] {
            assert!((table.prob(0) - 0.7).abs() < 1e-15);
            assert!((table.prob(1) - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn two_independent_trials() {
        let q = params(0.3, 0.6, 0.0);
        let t = pmf_bruteforce(2, &q).unwrap();
        let expected = [0.49, 0.42, 0.09];
        for (a, b) in t.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn bruteforce_top_entry_is_single_configuration() {
        let q = params(0.4, 0.7, 0.2);
        let t = pmf_bruteforce(9, &q).unwrap();
        let all = super::super::joint_ones_prob(&super::super::OnesSet::full(9), &q);
        assert!((t.prob(9) - all).abs() < 1e-15);
    }

    #[test]
    fn c_zero_is_binomial() {
        for n in [1, 5, 17, 40] {
            let q = params(0.37, 0.81, 0.0);
            let exact = binomial(n, 0.37);
            for t in [pmf(n, &q).unwrap(), pmf_inclusion_exclusion(n, &q).unwrap()] {
                for (a, b) in t.probs().iter().zip(&exact) {
                    assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn routes_agree_with_oracle() {
        let q = params(0.3, 0.8, 0.1);
        let oracle = pmf_bruteforce(10, &q).unwrap();
        let renewal = pmf(10, &q).unwrap();
        let signed = pmf_inclusion_exclusion(10, &q).unwrap();
        for k in 0..=10 {
            assert!((oracle.prob(k) - renewal.prob(k)).abs() < 1e-10);
            assert!((oracle.prob(k) - signed.prob(k)).abs() < 1e-10);
        }
    }

    #[test]
    fn top_entry_closed_form() {
        let q = params(0.55, 0.9, 0.3);
        let t = pmf(25, &q).unwrap();
        assert!((t.prob(25) - 0.55 * 0.85f64.powi(24)).abs() < 1e-12);
    }

    #[test]
    fn zero_trials_rejected() {
        let q = params(0.5, 0.5, 0.1);
        assert!(pmf(0, &q).is_err());
        assert!(pmf_bruteforce(21, &q).is_err());
    }

    #[test]
    fn cdf_ends_at_one() {
        let t = pmf(12, &params(0.2, 0.9, 0.3)).unwrap();
        let cdf = t.cdf();
        assert_eq!(*cdf.last().unwrap(), 1.0);
        assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
    }
}
