//! Minimizers used by the estimator: an adaptive Nelder-Mead simplex for a
//! robust warm start, then BFGS on central-difference gradients.
//!
//! Both accept an optional symmetric box `[-B, B]^d`. The simplex clips
//! candidate points into the box; BFGS takes projected steps and measures
//! convergence with the projected gradient.

use super::numdiff::numerical_gradient;

/// Symmetric box constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxBound(pub f64);

impl BoxBound {
    fn clip(&self, x: &mut [f64]) {
        for v in x {
            *v = v.clamp(-self.0, self.0);
        }
    }
}

fn clip(bound: Option<BoxBound>, x: &mut [f64]) {
    if let Some(b) = bound {
        b.clip(x);
    }
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Best objective after each iteration; never increases.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_iterations: usize,
    /// Stop once the spread of simplex values is below `f_tolerance * (1 + |f_best|)`
    /// and its diameter below `x_tolerance`.
    pub f_tolerance: f64,
    pub x_tolerance: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_iterations: 1000,
            f_tolerance: 1e-10,
            x_tolerance: 1e-6,
            initial_step: 0.5,
        }
    }
}

impl NelderMead {
    pub fn minimize<F: Fn(&[f64]) -> f64>(&self, f: F, x0: &[f64], bound: Option<BoxBound>) -> Minimum {
        let d = x0.len();
        let eval = |x: &[f64]| finite_or_inf(f(x));
        let mut start = x0.to_vec();
        clip(bound, &mut start);
        if d == 0 {
            let value = eval(&start);
            return Minimum {
                x: start,
                value,
                iterations: 0,
                trace: vec![value],
            };
        }

        // Gao & Han's dimension-adapted coefficients.
        let n = d as f64;
        let (alpha, gamma) = (1.0, 1.0 + 2.0 / n);
        let rho = (0.75 - 1.0 / (2.0 * n)).max(0.5);
        let sigma = (1.0 - 1.0 / n).max(0.5);

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        simplex.push((start.clone(), eval(&start)));
        for i in 0..d {
            let mut v = start.clone();
            v[i] += self.initial_step;
            if let Some(b) = bound {
                if v[i] > b.0 {
                    v[i] = start[i] - self.initial_step;
                }
            }
            clip(bound, &mut v);
            let fv = eval(&v);
            simplex.push((v, fv));
        }

        let mut trace = Vec::new();
        let mut iterations = 0;
        let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
        order(&mut simplex);
        while iterations < self.max_iterations {
            iterations += 1;
            let best = simplex[0].1;
            let worst = simplex[d].1;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if best.is_finite()
                && (worst - best).abs() <= self.f_tolerance * (1.0 + best.abs())
                && diameter <= self.x_tolerance
            {
                trace.push(best);
                break;
            }

            let mut centroid = vec![0.0; d];
            for (v, _) in &simplex[..d] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n;
                }
            }
            let toward = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[d].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect();
                clip(bound, &mut p);
                p
            };

            let reflected = toward(alpha);
            let fr = eval(&reflected);
            if fr < simplex[0].1 {
                let expanded = toward(alpha * gamma);
                let fe = eval(&expanded);
                simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            } else if fr < simplex[d - 1].1 {
                simplex[d] = (reflected, fr);
            } else {
                let (contracted, fc) = if fr < simplex[d].1 {
                    let c = toward(alpha * rho);
                    let fc = eval(&c);
                    (c, fc.min(f64::INFINITY))
                } else {
                    let c = toward(-rho);
                    let fc = eval(&c);
                    (c, fc)
                };
                if fc < fr.min(simplex[d].1) {
                    simplex[d] = (contracted, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    for (v, fv) in simplex.iter_mut().skip(1) {
                        for (x, a) in v.iter_mut().zip(&anchor) {
                            *x = a + sigma * (*x - a);
                        }
                        *fv = eval(v);
                    }
                }
            }
            order(&mut simplex);
            trace.push(simplex[0].1);
        }
        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            iterations,
            trace,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bfgs {
    pub max_iterations: usize,
    /// Converged when the projected gradient norm drops below this.
    pub gradient_tolerance: f64,
    /// Stop when a step moves every coordinate by less than this (relative).
    pub parameter_tolerance: f64,
    pub finite_difference_step: f64,
    /// Longest allowed step in the max norm.
    pub max_step: f64,
}

impl Default for Bfgs {
    fn default() -> Self {
        Bfgs {
            max_iterations: 2000,
            gradient_tolerance: 1e-5,
            parameter_tolerance: 1e-10,
            finite_difference_step: 1e-5,
            max_step: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub minimum: Minimum,
    pub gradient: Vec<f64>,
    pub projected_gradient_norm: f64,
    pub converged: bool,
}

/// Gradient components that could not move the point further out of the box
/// are kept; those pushing against an active bound are dropped.
pub fn projected(bound: Option<BoxBound>, x: &[f64], g: &[f64]) -> Vec<f64> {
    match bound {
        None => g.to_vec(),
        Some(b) => x
            .iter()
            .zip(g)
            .map(|(&xi, &gi)| {
                let at_lower = xi <= -b.0 && gi > 0.0;
                let at_upper = xi >= b.0 && gi < 0.0;
                if at_lower || at_upper {
                    0.0
                } else {
                    gi
                }
            })
            .collect(),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Bfgs {
    pub fn minimize<F: Fn(&[f64]) -> f64>(&self, f: F, x0: &[f64], bound: Option<BoxBound>) -> BfgsOutcome {
        let d = x0.len();
        let eval = |x: &[f64]| finite_or_inf(f(x));
        let grad = |x: &[f64]| numerical_gradient(&eval, x, self.finite_difference_step);

        let mut x = x0.to_vec();
        clip(bound, &mut x);
        let mut fx = eval(&x);
        let mut trace = vec![fx];
        let mut g = match grad(&x) {
            Ok(g) => g,
            Err(_) => {
                return BfgsOutcome {
                    gradient: vec![f64::NAN; d],
                    projected_gradient_norm: f64::INFINITY,
                    converged: false,
                    minimum: Minimum {
                        x,
                        value: fx,
                        iterations: 0,
                        trace,
                    },
                }
            }
        };
        let mut inv = identity(d);
        let mut fresh = true;
        let mut iterations = 0;

        while iterations < self.max_iterations {
            let pg = projected(bound, &x, &g);
            if norm(&pg) < self.gradient_tolerance {
                break;
            }
            iterations += 1;

            let mut dir: Vec<f64> = (0..d).map(|i| -dot(&inv[i], &g)).collect();
            let free: Vec<bool> = pg.iter().zip(&g).map(|(p, q)| *p != 0.0 || *q == 0.0).collect();
            for i in 0..d {
                if !free[i] {
                    dir[i] = 0.0;
                }
            }
            if dot(&dir, &pg) >= 0.0 {
                inv = identity(d);
                fresh = true;
                dir = pg.iter().map(|v| -v).collect();
            }
            let longest = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if longest > self.max_step {
                dir.iter_mut().for_each(|v| *v *= self.max_step / longest);
            }

            // Armijo backtracking on the projected path.
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let mut cand: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                clip(bound, &mut cand);
                let step: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
                let fc = eval(&cand);
                if fc <= fx + 1e-4 * dot(&g, &step) && fc.is_finite() {
                    accepted = Some((cand, fc, step));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, fc, step)) = accepted else {
                if fresh {
                    break;
                }
                inv = identity(d);
                fresh = true;
                continue;
            };
            let g_new = match grad(&cand) {
                Ok(v) => v,
                Err(_) => break,
            };
            let change: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&step, &change);
            if sy > 1e-12 * norm(&step) * norm(&change) {
                if fresh {
                    let scale = sy / dot(&change, &change);
                    inv = identity(d);
                    inv.iter_mut().enumerate().for_each(|(i, r)| r[i] = scale);
                    fresh = false;
                }
                bfgs_update(&mut inv, &step, &change, sy);
            }
            let tiny_step = step
                .iter()
                .zip(&cand)
                .all(|(s, v)| s.abs() <= self.parameter_tolerance * (1.0 + v.abs()));
            x = cand;
            fx = fc;
            g = g_new;
            trace.push(fx);
            if tiny_step {
                break;
            }
        }
        let pg = projected(bound, &x, &g);
        let pnorm = norm(&pg);
        BfgsOutcome {
            converged: pnorm < self.gradient_tolerance,
            projected_gradient_norm: pnorm,
            gradient: g,
            minimum: Minimum {
                x,
                value: fx,
                iterations,
                trace,
            },
        }
    }
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// `H <- (I - r s y^T) H (I - r y s^T) + r s s^T` with `r = 1 / (s.y)`.
fn bfgs_update(inv: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let r = 1.0 / sy;
    let hy: Vec<f64> = (0..d).map(|i| dot(&inv[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..d {
        for j in 0..d {
            inv[i][j] += (1.0 + r * yhy) * r * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn simplex_finds_rosenbrock_valley() {
        let nm = NelderMead {
            max_iterations: 5000,
            ..Default::default()
        };
        let m = nm.minimize(rosenbrock, &[-1.2, 1.0], None);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m.x);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bfgs_converges_on_rosenbrock() {
        let out = Bfgs::default().minimize(rosenbrock, &[-1.2, 1.0], None);
        assert!(out.converged, "{out:?}");
        assert!((out.minimum.x[0] - 1.0).abs() < 1e-5);
        assert!(out.minimum.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn box_is_respected() {
        // unconstrained minimum at (3, -4)
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 4.0).powi(2);
        let b = Some(BoxBound(2.0));
        let m = NelderMead::default().minimize(f, &[0.0, 0.0], b);
        assert!(m.x.iter().all(|v| v.abs() <= 2.0));
        let out = Bfgs::default().minimize(f, &m.x, b);
        assert!(out.converged);
        assert!((out.minimum.x[0] - 2.0).abs() < 1e-9 && (out.minimum.x[1] + 2.0).abs() < 1e-9);
        assert!(out.gradient[0].abs() > 1.0, "raw gradient is not zero at the wall");
    }

    #[test]
    fn nan_is_treated_as_uphill() {
        let f = |x: &[f64]| if x[0] < -0.5 { f64::NAN } else { (x[0] - 1.0).powi(2) + x[1] * x[1] };
        let m = NelderMead::default().minimize(f, &[0.0, 0.3], None);
        assert!((m.x[0] - 1.0).abs() < 1e-3);
    }
}
