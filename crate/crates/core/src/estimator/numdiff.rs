//! Central finite differences.
//!
//! Steps are relative: coordinate `i` moves by `step * (1 + |theta_i|)`. A
//! non-finite stencil value shrinks that step tenfold once before giving up.

use crate::error::{Error, Result};

fn coordinate_step(step: f64, v: f64) -> f64 {
    step * (1.0 + v.abs())
}

fn eval_pair<F: Fn(&[f64]) -> f64>(f: &F, x: &mut [f64], i: usize, h: f64) -> Option<(f64, f64)> {
    let orig = x[i];
    x[i] = orig + h;
    let plus = f(x);
    x[i] = orig - h;
    let minus = f(x);
    x[i] = orig;
    (plus.is_finite() && minus.is_finite()).then_some((plus, minus))
}

/// Central-difference gradient.
pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut x = theta.to_vec();
    let mut g = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let mut h = coordinate_step(step, theta[i]);
        let pair = match eval_pair(&f, &mut x, i, h) {
            Some(v) => v,
            None => {
                h /= 10.0;
                eval_pair(&f, &mut x, i, h).ok_or_else(|| {
                    Error::Numerical(format!("non-finite objective near coordinate {i}"))
                })?
            }
        };
        g.push((pair.0 - pair.1) / (2.0 * h));
    }
    Ok(g)
}

/// Central-difference Hessian, symmetrized as `(H + H^T) / 2`.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64], step: f64) -> Result<Vec<Vec<f64>>> {
    match hessian_with(&f, theta, step) {
        Some(h) => Ok(h),
        None => hessian_with(&f, theta, step / 10.0)
            .ok_or_else(|| Error::Numerical("non-finite objective in Hessian stencil".into())),
    }
}

fn hessian_with<F: Fn(&[f64]) -> f64>(f: &F, theta: &[f64], step: f64) -> Option<Vec<Vec<f64>>> {
    let d = theta.len();
    let h: Vec<f64> = theta.iter().map(|&v| coordinate_step(step, v)).collect();
    let mut x = theta.to_vec();
    let f0 = f(&x);
    if !f0.is_finite() {
        return None;
    }
    let mut out = vec![vec![0.0; d]; d];
    for i in 0..d {
        let (plus, minus) = eval_pair(f, &mut x, i, h[i])?;
        out[i][i] = (plus - 2.0 * f0 + minus) / (h[i] * h[i]);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut corner = |si: f64, sj: f64| {
                x[i] = theta[i] + si * h[i];
                x[j] = theta[j] + sj * h[j];
                let v = f(&x);
                x[i] = theta[i];
                x[j] = theta[j];
                v
            };
            let pp = corner(1.0, 1.0);
            let pm = corner(1.0, -1.0);
            let mp = corner(-1.0, 1.0);
            let mm = corner(-1.0, -1.0);
            if ![pp, pm, mp, mm].iter().all(|v| v.is_finite()) {
                return None;
            }
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let f = |x: &[f64]| 3.0 * x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5 * x[1] * x[1] + x[1];
        let g = numerical_gradient(f, &[0.7, -1.3], 1e-5).unwrap();
        assert!((g[0] - (6.0 * 0.7 + 2.0 * 1.3)).abs() < 1e-8);
        assert!((g[1] - (-2.0 * 0.7 - 1.3 + 1.0)).abs() < 1e-8);
    }

    #[test]
    fn hessian_of_quadratic_form() {
        let a = [[2.0, 0.5, -1.0], [0.5, 1.0, 0.25], [-1.0, 0.25, 3.0]];
        let f = |x: &[f64]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += x[i] * a[i][j] * x[j];
                }
            }
            s
        };
        let h = numerical_hessian(f, &[0.3, -0.2, 1.1], 1e-3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[i][j] - 2.0 * a[i][j]).abs() < 1e-6, "{i},{j}: {}", h[i][j]);
                assert_eq!(h[i][j], h[j][i]);
            }
        }
    }

    #[test]
    fn shrinks_step_once_near_a_wall() {
        // ln is undefined below 0; at x = 5e-6 the first stencil crosses it
        // and the retry uses h = 1e-6 (relative error about h^2 / 3x^2).
        let f = |x: &[f64]| x[0].ln();
        let g = numerical_gradient(f, &[5e-6], 1e-5).unwrap();
        assert!((g[0] * 5e-6 - 1.0).abs() < 2e-2, "{}", g[0]);
        assert!(numerical_gradient(|x: &[f64]| x[0].ln(), &[1e-7], 1.0).is_err());
    }
}
