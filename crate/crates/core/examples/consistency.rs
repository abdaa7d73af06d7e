//! Bias and standard error of the FB estimator for both parameter sets at
//! N = 10 and n = 100, 400.
//!
//! cargo run --release --example consistency -p fbreg

use fbreg::simharness::{run_study, table, SimSpec};

fn main() -> fbreg::Result<()> {
    let scenarios = [
        vec![-1.0, 1.0, 2.0, 1.0, 0.0, -1.0],
        vec![-0.5, 2.0, 1.0, -2.0, 2.0, 1.0],
    ];
    let replications = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    for theta in scenarios {
        let mut reports = Vec::new();
        for n in [100, 400] {
            let spec = SimSpec {
                theta_true: theta.clone(),
                n,
                replications,
                seed: 2024,
                timing: true,
                ..Default::default()
            };
            let r = run_study(&spec)?;
            eprintln!("n = {n}: {:?}", r.timing);
            reports.push(r);
        }
        println!("theta = {theta:?}\n{}", table(&reports));
    }
    Ok(())
}
