mod args;
mod artifact;
mod error;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use fbreg::estimator::{fit, FitConfig, FitResult};
use fbreg::frbinom::{pmf, variance_exact, FbParamsNatural};
use fbreg::inference::{compare, empirical_frequencies, profile_csv, profile_distribution, vuong_test, ComparisonReport, ProfileDistribution, VuongOutcome};
use fbreg::regdata::{load_csv, Dataset};
use fbreg::simharness::{run_study, SimReport, SimSpec};
use serde::{Deserialize, Serialize};

use args::{Cli, Command, CompareArgs, DataArgs, FitArgs, Format, PmfArgs, ProfileArgs, SimulateArgs, VuongArgs};
use artifact::{Artifact, DataConfig, DatasetInfo, RunConfig};
use error::{CliError, NOT_CONVERGED};

const FIT_SCHEMA: &str = "fbreg.fit_result";
const SIM_SCHEMA: &str = "fbreg.sim_report";
const COMPARISON_SCHEMA: &str = "fbreg.comparison";
const VUONG_SCHEMA: &str = "fbreg.vuong";
const PROFILE_SCHEMA: &str = "fbreg.profile";

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Pmf(a) => cmd_pmf(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Vuong(a) => cmd_vuong(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Profile(a) => cmd_profile(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn format_name(f: Format) -> String {
    match f {
        Format::Json => "json",
        Format::Table => "table",
        Format::Csv => "csv",
    }
    .into()
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn print(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// Artifact JSON goes to `--out` when given; stdout gets the requested rendering.
fn emit<T: Serialize>(art: &Artifact<T>, out: Option<&Path>, format: Format, table: impl FnOnce() -> String) -> Result<(), CliError> {
    let json = art.to_json();
    if let Some(path) = out {
        write_file(path, &json)?;
    }
    match format {
        Format::Json if out.is_none() => print(&json),
        Format::Json => Ok(()),
        _ => print(&table()),
    }
}

fn cmd_pmf(a: PmfArgs) -> Result<(), CliError> {
    let natural = FbParamsNatural::new(a.p, a.h, a.c_circ)?;
    let params = natural.to_constrained()?;
    let table = pmf(a.n_trials, &params)?;
    let text = match a.format {
        Format::Json => {
            #[derive(Serialize)]
            struct PmfOut<'a> {
                tool: artifact::Tool,
                p: f64,
                #[serde(rename = "H")]
                h: f64,
                c0: f64,
                c: f64,
                #[serde(rename = "N")]
                n_trials: usize,
                probs: &'a [f64],
                mean: f64,
                variance: f64,
                variance_exact: f64,
                diagnostics: &'a [fbreg::frbinom::NegativeMass],
            }
            let mut s = serde_json::to_string_pretty(&PmfOut {
                tool: artifact::Tool::current(),
                p: a.p,
                h: a.h,
                c0: a.c_circ,
                c: params.c(),
                n_trials: a.n_trials,
                probs: table.probs(),
                mean: table.mean(),
                variance: table.variance(),
                variance_exact: variance_exact(a.n_trials, &params),
                diagnostics: table.diagnostics(),
            })
            .expect("pmf serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("k,prob\n");
            for (k, v) in table.probs().iter().enumerate() {
                let _ = writeln!(s, "{k},{v:?}");
            }
            s
        }
        Format::Table => {
            let mut s = format!("# p = {}  H = {}  c0 = {}  c = {:.6}  N = {}\n", a.p, a.h, a.c_circ, params.c(), a.n_trials);
            let _ = writeln!(s, "{:>4}  {:>14}", "k", "P(B_N = k)");
            for (k, v) in table.probs().iter().enumerate() {
                let _ = writeln!(s, "{k:>4}  {v:>14.10}");
            }
            let _ = writeln!(
                s,
                "mean {:.8}  variance {:.8}  (closed form {:.8})",
                table.mean(),
                table.variance(),
                variance_exact(a.n_trials, &params)
            );
            s
        }
    };
    match &a.out {
        Some(path) => write_file(path, &text),
        None => print(&text),
    }
}

fn data_config(d: &DataArgs) -> Result<DataConfig, CliError> {
    let input = d.input.as_ref().ok_or_else(|| CliError::usage("--input is required"))?;
    let response = d.response.clone().ok_or_else(|| CliError::usage("--response is required"))?;
    Ok(DataConfig {
        input: input.display().to_string(),
        response,
        covariates: d.covariates.clone(),
        n_trials: d.n_trials,
    })
}

fn load(cfg: &DataConfig) -> Result<Dataset, CliError> {
    let path = Path::new(&cfg.input);
    if !path.exists() {
        return Err(CliError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
    }
    Ok(load_csv(path, &cfg.response, &cfg.covariates, cfg.n_trials)?)
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let data_cfg = data_config(&a.data)?;
    let data = load(&data_cfg)?;
    let config = FitConfig {
        max_iterations: a.max_iterations,
        gradient_tolerance: a.gradient_tolerance,
        n_starts: a.starts,
        bound: a.bound,
        seed: a.seed,
        ..Default::default()
    };
    config.validate()?;
    let result = fit(a.model, &data, &config)?;
    let converged = result.converged;
    let run = RunConfig {
        subcommand: "fit".into(),
        data: Some(data_cfg),
        model: Some(a.model),
        fit: Some(config),
        format: format_name(a.format),
        ..Default::default()
    };
    let art = Artifact::new(FIT_SCHEMA, run, Some(DatasetInfo::of(&data)), Some(a.seed), result);
    emit(&art, a.out.as_deref(), a.format, || match a.format {
        Format::Csv => fit_csv(&art.result),
        _ => format!("{} fit\n{}", art.result.model.title(), art.result.coefficient_table()),
    })?;
    for w in &art.result.warnings {
        log::warn!("{w}");
    }
    if converged {
        Ok(())
    } else {
        Err(CliError {
            code: NOT_CONVERGED,
            message: format!("{} fit did not converge", a.model.title()),
        })
    }
}

fn fit_csv(f: &FitResult) -> String {
    let cell = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:?}"));
    let mut s = String::from("coefficient,estimate,std_error,z,p_value,unreliable\n");
    for i in 0..f.dimension() {
        let _ = writeln!(
            s,
            "{},{:?},{},{},{},{}",
            f.coefficient_names[i],
            f.coefficients.values()[i],
            cell(f.std_errors[i]),
            cell(f.z_stats[i]),
            cell(f.p_values[i]),
            f.unreliable[i]
        );
    }
    s
}

/// Loads saved fits and the dataset they were fitted to, checking digests.
fn fits_and_data(paths: &[std::path::PathBuf], data: &DataArgs) -> Result<(Vec<Artifact<FitResult>>, Dataset, DataConfig), CliError> {
    let fits: Vec<Artifact<FitResult>> = paths
        .iter()
        .map(|p| artifact::read(p, FIT_SCHEMA))
        .collect::<Result<_, _>>()?;
    let digest = |a: &Artifact<FitResult>| a.dataset.as_ref().map(|d| d.digest.clone()).unwrap_or_default();
    let first = digest(&fits[0]);
    for (p, f) in paths.iter().zip(&fits) {
        if digest(f) != first {
            return Err(fbreg::Error::DigestMismatch(first, format!("{} in {}", digest(f), p.display())).into());
        }
    }
    let cfg = if data.input.is_some() {
        let mut cfg = data_config(data)?;
        let recorded = fits[0].config.data.clone();
        if data.covariates.is_empty() {
            if let Some(r) = &recorded {
                cfg.covariates = r.covariates.clone();
            }
        }
        if data.n_trials.is_none() {
            cfg.n_trials = recorded.and_then(|r| r.n_trials);
        }
        cfg
    } else {
        fits[0]
            .config
            .data
            .clone()
            .ok_or_else(|| CliError::usage("fit artifact records no data source; pass --input"))?
    };
    let dataset = load(&cfg)?;
    if dataset.digest() != first {
        return Err(fbreg::Error::DigestMismatch(first, dataset.digest()).into());
    }
    Ok((fits, dataset, cfg))
}

fn cmd_compare(a: CompareArgs) -> Result<(), CliError> {
    let (fits, data, cfg) = fits_and_data(&a.fits, &a.data)?;
    let results: Vec<FitResult> = fits.into_iter().map(|f| f.result).collect();
    let report: ComparisonReport = compare(&results, &data)?;
    let run = RunConfig {
        subcommand: "compare".into(),
        data: Some(cfg),
        fits: a.fits.iter().map(|p| p.display().to_string()).collect(),
        format: format_name(a.format),
        ..Default::default()
    };
    let art = Artifact::new(COMPARISON_SCHEMA, run, Some(DatasetInfo::of(&data)), None, report);
    emit(&art, a.out.as_deref(), a.format, || art.result.table())
}

#[derive(Debug, Serialize, Deserialize)]
struct VuongReport {
    first: fbreg::likelihoods::ModelKind,
    second: fbreg::likelihoods::ModelKind,
    #[serde(flatten)]
    outcome: VuongOutcome,
}

fn cmd_vuong(a: VuongArgs) -> Result<(), CliError> {
    let paths = [a.first.clone(), a.second.clone()];
    let (fits, data, cfg) = fits_and_data(&paths, &a.data)?;
    let outcome = vuong_test(&fits[0].result, &fits[1].result, &data)?;
    let report = VuongReport {
        first: fits[0].result.model,
        second: fits[1].result.model,
        outcome,
    };
    let run = RunConfig {
        subcommand: "vuong".into(),
        data: Some(cfg),
        fits: paths.iter().map(|p| p.display().to_string()).collect(),
        format: format_name(a.format),
        ..Default::default()
    };
    let art = Artifact::new(VUONG_SCHEMA, run, Some(DatasetInfo::of(&data)), None, report);
    emit(&art, a.out.as_deref(), a.format, || {
        let r = &art.result;
        let pair = format!("{} vs {}", r.first.title(), r.second.title());
        match &r.outcome {
            VuongOutcome::Test(t) => format!(
                "{pair}: statistic {:.4}, one-sided p-value {:.4} (n = {})\n",
                t.statistic, t.p_value, t.n
            ),
            VuongOutcome::IdenticalModels { n } => {
                format!("{pair}: identical per-observation log-likelihoods (n = {n}); statistic undefined\n")
            }
        }
    })
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    if a.theta.len() % 3 != 0 || a.theta.is_empty() {
        return Err(CliError::usage(format!(
            "--theta needs 3 coefficients per covariate, got {}",
            a.theta.len()
        )));
    }
    let spec = SimSpec {
        covariates: a.theta.len() / 3,
        theta_true: a.theta,
        n: a.n,
        n_trials: a.n_trials,
        replications: a.replications,
        bound: a.bound,
        n_starts: a.starts,
        seed: a.seed,
        timing: a.timing,
        ..Default::default()
    };
    spec.validate()?;
    let report: SimReport = run_study(&spec)?;
    let run = RunConfig {
        subcommand: "simulate".into(),
        simulation: Some(spec),
        format: format_name(a.format),
        ..Default::default()
    };
    let art = Artifact::new(SIM_SCHEMA, run, None, Some(a.seed), report);
    emit(&art, a.out.as_deref(), a.format, || match a.format {
        Format::Csv => {
            let r = &art.result;
            let mut s = String::from("coefficient,true,bias,std_error\n");
            for (i, name) in r.coefficient_names.iter().enumerate() {
                let se = r.std_error.as_ref().map_or("NA".into(), |v| format!("{:?}", v[i]));
                let _ = writeln!(s, "{name},{:?},{:?},{se}", r.theta_true[i], r.bias[i]);
            }
            s
        }
        _ => {
            let r = &art.result;
            let mut s = r.table();
            let _ = writeln!(
                s,
                "{} replications, {} failed, {} not converged",
                r.replications.len(),
                r.failed,
                r.not_converged
            );
            s
        }
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileReport {
    values: BTreeMap<String, String>,
    design: Vec<f64>,
    matching_rows: usize,
    empirical: Vec<f64>,
    fitted: Vec<ProfileDistribution>,
}

fn cmd_profile(a: ProfileArgs) -> Result<(), CliError> {
    let (fits, data, cfg) = fits_and_data(&a.fits, &a.data)?;
    let values: BTreeMap<String, String> = a.at.iter().cloned().collect();
    let schema = data
        .schema()
        .ok_or_else(|| CliError::usage("dataset carries no design schema"))?;
    let design = schema.encode(&values)?;
    let fitted = fits
        .iter()
        .map(|f| profile_distribution(&f.result, &design, data.n_trials()))
        .collect::<Result<Vec<_>, _>>()?;
    let (matching_rows, empirical) = empirical_frequencies(&data, &design);
    let digest = data.digest();
    let report = ProfileReport {
        values,
        design,
        matching_rows,
        empirical,
        fitted,
    };
    let run = RunConfig {
        subcommand: "profile".into(),
        data: Some(cfg),
        fits: a.fits.iter().map(|p| p.display().to_string()).collect(),
        profile: a.at.clone(),
        format: format_name(a.format),
        ..Default::default()
    };
    let art = Artifact::new(PROFILE_SCHEMA, run, Some(DatasetInfo::of(&data)), None, report);
    let text = match a.format {
        Format::Json => art.to_json(),
        _ => {
            let r = &art.result;
            let mut s = format!(
                "# fbreg {} dataset {digest} profile {:?} rows {}\n",
                env!("CARGO_PKG_VERSION"),
                r.values,
                r.matching_rows
            );
            s.push_str(&profile_csv(&r.fitted, Some(&r.empirical)));
            for f in &r.fitted {
                if f.tail_mass > 0.0 {
                    let _ = writeln!(s, "# {} tail mass above N: {:?}", f.model.as_str(), f.tail_mass);
                }
            }
            s
        }
    };
    match &a.out {
        Some(path) => write_file(path, &text),
        None => print(&text),
    }
}
