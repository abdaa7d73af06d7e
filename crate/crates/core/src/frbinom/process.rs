//! Finite-dimensional probabilities of the dependent Bernoulli sequence.

use crate::error::{Error, Result};

use super::FbParams;

/// Raw inclusion-exclusion values below this are treated as a breakdown
/// rather than rounding noise.
pub const CONFIG_NEGATIVE_TOLERANCE: f64 = 1e-10;

/// A strictly increasing set of 1-based trial positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OnesSet(Vec<usize>);

impl OnesSet {
    pub fn new(positions: Vec<usize>) -> Result<Self> {
        let ordered = positions.windows(2).all(|w| w[0] < w[1]);
        if !ordered || positions.first().is_some_and(|&first| first == 0) {
            return Err(Error::NotIncreasing(positions));
        }
        Ok(OnesSet(positions))
    }

    pub fn empty() -> Self {
        OnesSet(Vec::new())
    }

    /// `{1, 2, ..., n}`.
    pub fn full(n: usize) -> Self {
        OnesSet((1..=n).collect())
    }

    pub fn positions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn shifted(&self, by: usize) -> Self {
        OnesSet(self.0.iter().map(|&i| i + by).collect())
    }
}

/// `P(xi_i = 1 for every i in set)`.
///
/// Equals `p * prod_j (p + c (i_j - i_{j-1})^(2H-2))`, and 1 for the empty set.
pub fn joint_ones_prob(set: &OnesSet, params: &FbParams) -> f64 {
    joint_from_sorted(set.positions(), params)
}

pub(crate) fn joint_from_sorted(positions: &[usize], params: &FbParams) -> f64 {
    match positions.split_first() {
        None => 1.0,
        Some((_, _)) => positions
            .windows(2)
            .fold(params.p(), |acc, w| acc * params.gap_weight(w[1] - w[0])),
    }
}

/// Probability that every position in `ones` is a success and every position
/// in `zeros` a failure.
///
/// Expands the failures by inclusion-exclusion over subsets of `zeros`.
/// `zeros` is limited to 30 positions.
pub fn config_prob(ones: &OnesSet, zeros: &OnesSet, params: &FbParams) -> Result<f64> {
    if let Some(&shared) = ones
        .positions()
        .iter()
        .find(|i| zeros.positions().binary_search(i).is_ok())
    {
        return Err(Error::Overlap(shared));
    }
    let m = zeros.len();
    if m > 30 {
        return Err(Error::TooLarge { n: m, max: 30 });
    }
    let mut merged = Vec::with_capacity(ones.len() + m);
    let mut raw = 0.0;
    for mask in 0u32..(1u32 << m) {
        merged.clear();
        merged.extend_from_slice(ones.positions());
        merged.extend(
            zeros
                .positions()
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &i)| i),
        );
        merged.sort_unstable();
        let term = joint_from_sorted(&merged, params);
        if mask.count_ones() % 2 == 0 {
            raw += term;
        } else {
            raw -= term;
        }
    }
    clamp_config(raw)
}

pub(crate) fn clamp_config(raw: f64) -> Result<f64> {
    if raw < -CONFIG_NEGATIVE_TOLERANCE {
        return Err(Error::Numerical(format!(
            "configuration probability evaluated to {raw:e}"
        )));
    }
    Ok(raw.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frbinom::FbParams;

    fn params(p: f64, h: f64, c: f64) -> FbParams {
        FbParams::new(p, h, c).unwrap()
    }

    #[test]
    fn onesset_validation() {
        assert!(OnesSet::new(vec![1, 3, 7]).is_ok());
        assert!(OnesSet::new(vec![3, 3]).is_err());
        assert!(OnesSet::new(vec![4, 2]).is_err());
        assert!(OnesSet::new(vec![0, 2]).is_err());
        assert!(OnesSet::new(vec![]).unwrap().is_empty());
    }

    #[test]
    fn single_position_is_marginal() {
        let q = params(0.37, 0.6, 0.1);
        assert_eq!(joint_ones_prob(&OnesSet::new(vec![5]).unwrap(), &q), 0.37);
    }

    #[test]
    fn empty_set_has_probability_one() {
        assert_eq!(joint_ones_prob(&OnesSet::empty(), &params(0.2, 0.2, 0.0)), 1.0);
    }

    #[test]
    fn independent_pair() {
        let q = params(0.5, 0.7, 0.0);
        assert_eq!(joint_ones_prob(&OnesSet::new(vec![1, 2]).unwrap(), &q), 0.25);
    }

    #[test]
    fn gap_two_pair() {
        // 0.5 * (0.5 + 0.2 * 2^-0.5)
        let q = params(0.5, 0.75, 0.2);
        let got = joint_ones_prob(&OnesSet::new(vec![1, 3]).unwrap(), &q);
        let expected = 0.5 * (0.5 + 0.2 / 2f64.sqrt());
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.320_710_678_118_654_75).abs() < 1e-12);
    }

    #[test]
    fn single_zero_is_complement() {
        let q = params(0.3, 0.4, 0.1);
        let z = OnesSet::new(vec![4]).unwrap();
        let got = config_prob(&OnesSet::empty(), &z, &q).unwrap();
        assert!((got - 0.7).abs() < 1e-15);
    }

    #[test]
    fn one_then_zero() {
        let q = params(0.5, 0.75, 0.2);
        let got = config_prob(
            &OnesSet::new(vec![1]).unwrap(),
            &OnesSet::new(vec![2]).unwrap(),
            &q,
        )
        .unwrap();
        assert!((got - 0.15).abs() < 1e-15);
    }

    #[test]
    fn overlap_rejected() {
        let q = params(0.5, 0.75, 0.2);
        let a = OnesSet::new(vec![1, 2]).unwrap();
        let b = OnesSet::new(vec![2, 5]).unwrap();
        assert!(matches!(config_prob(&a, &b, &q), Err(Error::Overlap(2))));
    }

    #[test]
    fn all_configurations_sum_to_one() {
        let q = params(0.35, 0.85, 0.15);
        let n = 8;
        let mut total = 0.0;
        for mask in 0u32..(1 << n) {
            let (ones, zeros): (Vec<usize>, Vec<usize>) =
                (1..=n).partition(|i| mask & (1 << (i - 1)) != 0);
            total += config_prob(
                &OnesSet::new(ones).unwrap(),
                &OnesSet::new(zeros).unwrap(),
                &q,
            )
            .unwrap();
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shift_invariance_is_exact() {
        let q = params(0.42, 0.77, 0.11);
        let s = OnesSet::new(vec![2, 3, 7, 12]).unwrap();
        for by in [1, 5, 100] {
            assert_eq!(joint_ones_prob(&s, &q), joint_ones_prob(&s.shifted(by), &q));
        }
    }
}
