use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_unit(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {value}")))
    }
}

/// Upper bound on the dependence strength `c` for a feasible process.
///
/// Returns `min{1 - p, (-2p + 2^(2H-2) + sqrt(4p - p 2^(2H) + 2^(4H-4))) / 2}`.
/// The bound is strictly positive on the open unit square.
pub fn c_max(p: f64, h: f64) -> Result<f64> {
    check_unit("p", p)?;
    check_unit("H", h)?;
    Ok(c_max_unchecked(p, h))
}

pub(crate) fn c_max_unchecked(p: f64, h: f64) -> f64 {
    let a = (2.0 * h - 2.0).exp2();
    let disc = 4.0 * p - p * (2.0 * h).exp2() + a * a;
    let branch = 0.5 * (-2.0 * p + a + disc.sqrt());
    (1.0 - p).min(branch)
}

/// A feasible `(p, H, c)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbParams {
    p: f64,
    h: f64,
    c: f64,
}

impl FbParams {
    /// Validates `0 < p < 1`, `0 < H < 1` and `0 <= c < c_max(p, H)`.
    pub fn new(p: f64, h: f64, c: f64) -> Result<Self> {
        check_unit("p", p)?;
        check_unit("H", h)?;
        let bound = c_max_unchecked(p, h);
        if !(c >= 0.0 && c < bound) {
            return Err(Error::Infeasible {
                p,
                h,
                c,
                c_max: bound,
            });
        }
        Ok(Self { p, h, c })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `2H - 2`, the power applied to gaps between successes.
    pub fn gap_exponent(&self) -> f64 {
        2.0 * self.h - 2.0
    }

    /// `P(xi_i = 1, xi_{i+gap} = 1) / p`, i.e. `p + c * gap^(2H-2)`.
    ///
    /// Gaps start at 1, so the power never sees a zero base.
    pub fn gap_weight(&self, gap: usize) -> f64 {
        debug_assert!(gap >= 1);
        self.p + self.c * (gap as f64).powf(self.gap_exponent())
    }

    pub fn is_binomial(&self) -> bool {
        self.c == 0.0
    }
}

/// The `(p, H, c°)` parameterization, where `c° = c / c_max(p, H)`.
///
/// Every point of `(0,1)^2 x [0,1)` is feasible, which is what makes the
/// regression likelihood an unconstrained problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbParamsNatural {
    pub p: f64,
    pub h: f64,
    pub c_circ: f64,
}

impl FbParamsNatural {
    pub fn new(p: f64, h: f64, c_circ: f64) -> Result<Self> {
        check_unit("p", p)?;
        check_unit("H", h)?;
        if !(0.0..1.0).contains(&c_circ) {
            return Err(Error::Domain(format!(
                "c° must lie in [0, 1), got {c_circ}"
            )));
        }
        Ok(Self { p, h, c_circ })
    }

    /// Maps back to `(p, H, c)` with `c = c° * c_max(p, H)`.
    pub fn to_constrained(&self) -> Result<FbParams> {
        let bound = c_max(self.p, self.h)?;
        FbParams::new(self.p, self.h, self.c_circ * bound)
    }
}

impl FbParams {
    /// Inverse of [`FbParamsNatural::to_constrained`].
    pub fn to_natural(&self) -> FbParamsNatural {
        FbParamsNatural {
            p: self.p,
            h: self.h,
            c_circ: self.c / c_max_unchecked(self.p, self.h),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn branches(p: f64, h: f64) -> (f64, f64) {
        let a = 2f64.powf(2.0 * h - 2.0);
        let b = 0.5 * (-2.0 * p + a + (4.0 * p - p * 2f64.powf(2.0 * h) + 2f64.powf(4.0 * h - 4.0)).sqrt());
        (1.0 - p, b)
    }

    #[test]
    fn c_max_at_centre_uses_formula_branch() {
        // (-1/2 + sqrt(5/4)) / 2
        let expected = 0.5 * (-0.5 + 1.25f64.sqrt());
        assert!((expected - 0.309_016_994_374_947_4).abs() < 1e-15);
        assert!((c_max(0.5, 0.5).unwrap() - expected).abs() < 1e-15);
        assert!(expected < 0.5);
    }

    #[test]
    fn c_max_low_p_high_h() {
        // 30-digit evaluation: 1 - p = 0.8, formula branch = 0.617125031297493148819540893296
        let (one_minus_p, branch) = branches(0.2, 0.8);
        assert!((branch - 0.617_125_031_297_493_1).abs() < 1e-12);
        assert!((one_minus_p - 0.8).abs() < 1e-15);
        assert!((c_max(0.2, 0.8).unwrap() - 0.617_125_031_297_493_1).abs() < 1e-12);
    }

    #[test]
    fn c_max_vanishes_as_p_approaches_one() {
        // Near p = 1 the formula branch behaves like (1 - p) / (2 - 2^(2H-2)),
        // which undercuts 1 - p; both go to zero.
        for h in [0.1, 0.3, 0.5, 0.9] {
            let a = 2f64.powf(2.0 * h - 2.0);
            let q = 1e-7;
            let v = c_max(1.0 - q, h).unwrap();
            assert!(v > 0.0 && v <= q);
            assert!((v / q - 1.0 / (2.0 - a)).abs() < 1e-6, "h={h}: {v}");
            let (one_minus_p, branch) = branches(1.0 - q, h);
            assert!(branch < one_minus_p);
        }
    }

    #[test]
    fn c_max_rejects_out_of_range() {
        assert!(c_max(0.0, 0.5).is_err());
        assert!(c_max(0.5, 1.0).is_err());
        assert!(c_max(-0.1, 0.5).is_err());
        assert!(c_max(0.5, f64::NAN).is_err());
    }

    #[test]
    fn boundary_c_is_rejected() {
        let bound = c_max(0.5, 0.5).unwrap();
        assert!(FbParams::new(0.5, 0.5, bound).is_err());
        assert!(FbParams::new(0.5, 0.5, -1e-12).is_err());
        assert!(FbParams::new(0.5, 0.5, bound * (1.0 - 1e-12)).is_ok());
    }

    #[test]
    fn to_constrained_examples() {
        let zero = FbParamsNatural::new(0.3, 0.7, 0.0).unwrap();
        assert_eq!(zero.to_constrained().unwrap().c(), 0.0);

        let half = FbParamsNatural::new(0.5, 0.5, 0.5).unwrap();
        let c = half.to_constrained().unwrap().c();
        assert!((c - 0.154_508_497_187_473_7).abs() < 1e-12);
    }

    #[test]
    fn natural_round_trip() {
        for &(p, h, cc) in &[(0.1, 0.9, 0.99), (0.7, 0.2, 0.25), (0.5, 0.5, 0.5)] {
            let fb = FbParamsNatural::new(p, h, cc).unwrap().to_constrained().unwrap();
            let back = fb.c() / c_max(p, h).unwrap();
            assert!((back - cc).abs() < 1e-12);
            assert!((fb.to_natural().c_circ - cc).abs() < 1e-12);
        }
    }
}
