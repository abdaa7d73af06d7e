use fbreg::estimator::{fit, FitConfig};
use fbreg::frbinom::{sample, FbParamsNatural};
use fbreg::likelihoods::{link_fb, ModelKind};
use fbreg::regdata::{read_csv, ColumnSpec, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Discrete, Poisson};

fn poisson_draw(rng: &mut ChaCha8Rng, mu: f64) -> u32 {
    let law = Poisson::new(mu).unwrap();
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for k in 0.. {
        acc += law.pmf(k);
        if u < acc || k > 200 {
            return k as u32;
        }
    }
    unreachable!()
}

#[test]
fn zip_recovers_poisson_coefficients() {
    let beta = [0.5, 0.8];
    let reps = 8;
    let mut estimates = Vec::new();
    for r in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + r);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..400 {
            let x: f64 = rng.random_range(-1.0..1.0);
            y.push(poisson_draw(&mut rng, (beta[0] + beta[1] * x).exp()));
            rows.push(vec![x]);
        }
        let data = Dataset::from_rows(y, &rows, vec!["x".into()], true, None).unwrap();
        let f = fit(ModelKind::Zip, &data, &FitConfig { n_starts: 1, ..Default::default() }).unwrap();
        estimates.push(f.coefficients.block(0).to_vec());
    }
    for j in 0..2 {
        let v: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
        let mean = v.iter().sum::<f64>() / reps as f64;
        let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
        let mc_se = sd / (reps as f64).sqrt();
        assert!((mean - beta[j]).abs() <= 3.0 * mc_se.max(1e-3), "{j}: {mean} vs {}", beta[j]);
    }
}

/// FB counts in three groups, written as CSV text.
fn grouped_fb_csv() -> String {
    let groups = [("low", 0.15, 0.7, 0.5), ("mid", 0.3, 0.6, 0.3), ("high", 0.45, 0.4, 0.2)];
    let mut text = String::from("y,group,z\n");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (g, (name, p, h, c)) in groups.iter().enumerate() {
        let params = FbParamsNatural::new(*p, *h, *c).unwrap().to_constrained().unwrap();
        for y in sample(8, &params, 120, 40 + g as u64).unwrap() {
            let z: f64 = rng.random_range(-0.5..0.5);
            text.push_str(&format!("{y},{name},{z:.3}\n"));
        }
    }
    text
}

#[test]
fn reference_level_does_not_change_the_fit() {
    let text = grouped_fb_csv();
    let load = |reference: &str| -> Dataset {
        let specs = [
            ColumnSpec::categorical("group").with_reference(reference),
            ColumnSpec::numeric("z"),
        ];
        read_csv(text.as_bytes(), "y", &specs, Some(8)).unwrap()
    };
    let a = load("low");
    let b = load("high");
    assert_ne!(a.column_names(), b.column_names());
    let cfg = FitConfig { n_starts: 1, ..Default::default() };
    let fa = fit(ModelKind::Fb, &a, &cfg).unwrap();
    let fb = fit(ModelKind::Fb, &b, &cfg).unwrap();
    assert!(fa.converged && fb.converged);
    assert!((fa.loglik - fb.loglik).abs() < 1e-4, "{} vs {}", fa.loglik, fb.loglik);
    for i in 0..a.len() {
        let pa = link_fb(a.row(i), &fa.coefficients).unwrap();
        let pb = link_fb(b.row(i), &fb.coefficients).unwrap();
        assert!((pa.p - pb.p).abs() < 1e-4, "row {i}");
        assert!((pa.h - pb.h).abs() < 1e-4, "row {i}");
        assert!((pa.c_circ - pb.c_circ).abs() < 1e-4, "row {i}");
    }
}

#[test]
fn information_is_positive_definite_at_a_regular_fb_fit() {
    let specs = [ColumnSpec::categorical("group"), ColumnSpec::numeric("z")];
    let data = read_csv(grouped_fb_csv().as_bytes(), "y", &specs, Some(8)).unwrap();
    let f = fit(ModelKind::Fb, &data, &FitConfig { n_starts: 2, seed: 1, ..Default::default() }).unwrap();
    assert!(f.std_errors.iter().all(Option::is_some), "{:?}", f.warnings);
    assert!(f.p_values.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
    assert!(f.starts.len() == 2 && f.starts[f.best_start].loglik >= f.starts[1 - f.best_start].loglik);
}
