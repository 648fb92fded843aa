//! Command-line front door: derive priors from penalties, verify the
//! penalty/prior correspondence, plan per-layer penalty factors, run the
//! pruning lab, evaluate convergence-rate bounds and explore Renyi prior
//! candidates. Reports are JSON (CSV where tabular); identical flags and
//! seeds produce byte-identical reports.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::convergence_rates::{corollary_rate, verify_witness, ToyModel};
use crate::divergence::{renyi_prior_candidate, verify_correspondence};
use crate::error::{Error, Result};
use crate::lambda_planner::{plan, plan_to_csv, ArchitectureSpec, Scheme};
use crate::penalty::{PenaltyKind, PenaltySpec, PosteriorFamily};
use crate::prior::PriorDensity;
use crate::prior_engine::{
    check_condition_a, derive_prior_dirac, derive_prior_symbolic, normalize_prior,
    ConditionAReport, DerivedLogDensity,
};
use crate::pruning_lab::{
    make_synthetic_dataset, train_two_phase, Activation, Dataset, MLPModel, TrainConfig,
};
use crate::quadrature::QuadratureConfig;

/// Outcome of one command invocation.
///
/// Exit codes: 0 success, 1 verification failed, 2 invalid input,
/// 3 numerical failure.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub report_path: Option<PathBuf>,
    pub summary: String,
}

impl CommandResult {
    fn ok(report_path: Option<PathBuf>, summary: impl Into<String>) -> Self {
        Self {
            exit_code: 0,
            report_path,
            summary: summary.into(),
        }
    }

    fn failed(code: i32, report_path: Option<PathBuf>, summary: impl Into<String>) -> Self {
        Self {
            exit_code: code,
            report_path,
            summary: summary.into(),
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_)
        | Error::Configuration(_)
        | Error::UnsupportedPenalty(_)
        | Error::InvalidWitness(_)
        | Error::HypothesisViolation(_)
        | Error::Io(_)
        | Error::Json(_) => 2,
        Error::NumericalFailure(_)
        | Error::IllConditionedDeconvolution { .. }
        | Error::RescalingNeeded(_)
        | Error::Domain(_) => 3,
        Error::NonNormalizablePrior(_) | Error::SupportViolation(_) => 1,
        Error::NuDerivation { source, .. } => exit_code_for(source),
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "penprior",
    version,
    about = "Penalty-to-prior derivation, verification, lambda planning, \
             pruning lab, rate bounds and Renyi candidates"
)]
struct Cli {
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Override the command's default numerical tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derive the prior equivalent to a penalty and check its variance
    /// independence.
    DerivePrior(DerivePriorArgs),
    /// Verify that KL(posterior || prior) differs from the penalty by a
    /// constant over a grid of means.
    Verify(VerifyArgs),
    /// Compute per-layer penalty factors for an architecture.
    PlanLambda(PlanLambdaArgs),
    /// Train an MLP with a penalty plan and prune it in two phases.
    TrainPrune(TrainPruneArgs),
    /// Build and check a convergence-rate witness on the toy model.
    RateBound(RateBoundArgs),
    /// Invert a penalty into a Renyi prior candidate on a grid.
    Renyi(RenyiArgs),
}

#[derive(Args, Debug)]
struct DerivePriorArgs {
    /// Penalty kind: l2, l1, group-lasso, reversed-group-lasso, or poly.
    #[arg(long)]
    penalty: String,
    /// Penalty strength (required for named penalties).
    #[arg(long)]
    lambda: Option<f64>,
    /// Even-polynomial coefficients in powers of mu^2, comma separated
    /// (poly penalties only).
    #[arg(long)]
    coeffs: Option<String>,
    /// Parameter-space dimension.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Posterior family: dirac or gaussian.
    #[arg(long, default_value = "dirac")]
    posterior: String,
    /// Posterior variances to test, comma separated (gaussian only).
    #[arg(long)]
    sigma2: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Penalty kind: l2, l1, group-lasso, or reversed-group-lasso.
    #[arg(long)]
    penalty: String,
    /// Penalty strength.
    #[arg(long)]
    lambda: f64,
    /// Candidate prior, e.g. gaussian:0,0.5 | laplace:4 | exp-norm:2.
    #[arg(long)]
    prior: String,
    /// Posterior family: dirac or gaussian.
    #[arg(long, default_value = "dirac")]
    posterior: String,
    /// Posterior variances for the gaussian family, comma separated.
    #[arg(long)]
    sigma2: Option<String>,
    /// Parameter-space dimension.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Half-width of the symmetric 21-point mean grid.
    #[arg(long, default_value_t = 2.0)]
    mu_range: f64,
}

#[derive(Args, Debug)]
struct PlanLambdaArgs {
    /// Path to the architecture description JSON.
    #[arg(long)]
    arch: PathBuf,
    /// Penalty kind: l2, l1, group-lasso, or reversed-group-lasso.
    #[arg(long)]
    penalty: String,
    /// Factor scheme: bayesian or usual.
    #[arg(long)]
    scheme: String,
    /// Global penalty strength; the bayesian scheme defaults to 1/n.
    #[arg(long)]
    global_lambda: Option<f64>,
    /// Sparse-mixture weight in [0, 1] (group-lasso only).
    #[arg(long)]
    mixing_gamma: Option<f64>,
    /// Report format: json or csv.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args, Debug)]
struct TrainPruneArgs {
    /// Path to the architecture description JSON.
    #[arg(long)]
    arch: PathBuf,
    /// Penalty kind: l2, l1, group-lasso, or reversed-group-lasso.
    #[arg(long)]
    penalty: String,
    /// Factor scheme: bayesian or usual.
    #[arg(long, default_value = "bayesian")]
    scheme: String,
    /// Global penalty strength, or "auto" for the scheme default.
    #[arg(long, default_value = "auto")]
    lambda: String,
    /// Dataset: "synthetic" or a CSV path (header row, last column label).
    #[arg(long, default_value = "synthetic")]
    data: String,
    /// Cluster noise of the synthetic dataset.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Initial learning rate.
    #[arg(long, default_value_t = 1e-2)]
    learning_rate: f64,
    /// Per-phase epoch cap.
    #[arg(long, default_value_t = 400)]
    max_epochs: usize,
    /// Minibatch size.
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Epochs without improvement before a phase reacts.
    #[arg(long, default_value_t = 50)]
    patience: usize,
}

#[derive(Args, Debug)]
struct RateBoundArgs {
    /// Rate exponent in (0, 1); the bound decays like n^{-gamma}.
    #[arg(long)]
    gamma: f64,
    /// Sample sizes to check, comma separated.
    #[arg(long, default_value = "100,1000,10000")]
    n_list: String,
    /// Monte-Carlo sample count for the risk estimate.
    #[arg(long, default_value_t = 1000)]
    mc_samples: usize,
}

#[derive(Args, Debug)]
struct RenyiArgs {
    /// Penalty kind: l2, l1, group-lasso, or reversed-group-lasso.
    #[arg(long, default_value = "l2")]
    penalty: String,
    /// Penalty strength.
    #[arg(long)]
    lambda: f64,
    /// Renyi order, positive and different from 1.
    #[arg(long)]
    gamma: f64,
    /// Posterior variance.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Additive constant absorbed by the correspondence.
    #[arg(long, default_value_t = 0.0)]
    k: f64,
    /// Grid lower edge.
    #[arg(long, default_value_t = -8.0)]
    lo: f64,
    /// Grid upper edge.
    #[arg(long, default_value_t = 8.0)]
    hi: f64,
    /// Grid resolution (power of two).
    #[arg(long, default_value_t = 1024)]
    points: usize,
}

fn parse_penalty_kind(s: &str) -> Result<PenaltyKind> {
    match s {
        "l2" => Ok(PenaltyKind::L2),
        "l1" => Ok(PenaltyKind::L1),
        "group-lasso" => Ok(PenaltyKind::GroupLasso),
        "reversed-group-lasso" => Ok(PenaltyKind::ReversedGroupLasso),
        other => Err(Error::InvalidParameter(format!(
            "unknown penalty kind '{other}' (expected l2, l1, group-lasso, \
             reversed-group-lasso, or poly where supported)"
        ))),
    }
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    match s {
        "bayesian" => Ok(Scheme::Bayesian),
        "usual" => Ok(Scheme::Usual),
        other => Err(Error::InvalidParameter(format!(
            "unknown scheme '{other}' (expected bayesian or usual)"
        ))),
    }
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad number '{t}': {e}")))
        })
        .collect()
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<Option<PathBuf>> {
    match out {
        Some(path) => {
            std::fs::write(path, content)?;
            Ok(Some(path.clone()))
        }
        None => {
            println!("{content}");
            Ok(None)
        }
    }
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct DerivePriorReport {
    prior: PriorDensity,
    condition_check: Option<ConditionAReport>,
}

fn cmd_derive_prior(
    args: &DerivePriorArgs,
    out: Option<&PathBuf>,
    tolerance: Option<f64>,
) -> Result<CommandResult> {
    let spec = if args.penalty == "poly" {
        let coeffs = parse_f64_list(args.coeffs.as_deref().ok_or_else(|| {
            Error::InvalidParameter("poly penalties need --coeffs".into())
        })?)?;
        PenaltySpec::even_polynomial(args.lambda.unwrap_or(1.0), args.dim, coeffs)?
    } else {
        let kind = parse_penalty_kind(&args.penalty)?;
        let lambda = args.lambda.ok_or_else(|| {
            Error::InvalidParameter("named penalties need --lambda".into())
        })?;
        PenaltySpec::named(kind, lambda, args.dim)?
    };

    match args.posterior.as_str() {
        "dirac" => {
            let prior = derive_prior_dirac(&spec)?;
            let report = DerivePriorReport {
                prior,
                condition_check: None,
            };
            let path = emit(out, &to_pretty(&report)?)?;
            Ok(CommandResult::ok(path, "derived prior from the Dirac path"))
        }
        "gaussian" => {
            let sigma2 = parse_f64_list(args.sigma2.as_deref().ok_or_else(|| {
                Error::InvalidParameter("gaussian posteriors need --sigma2".into())
            })?)?;
            let free = PosteriorFamily::gaussian_free(args.dim);
            let check = check_condition_a(&spec, &free, &sigma2, tolerance.unwrap_or(1e-9))?;
            if !check.holds() {
                let path = emit(out, &to_pretty(&check)?)?;
                return Ok(CommandResult::failed(
                    1,
                    path,
                    format!(
                        "the derived log-density depends on the variance \
                         (max deviation {:.3e}); no variance-free prior exists",
                        check.max_deviation
                    ),
                ));
            }
            let fixed = PosteriorFamily::gaussian_fixed(args.dim, sigma2[0])?;
            let poly = derive_prior_symbolic(&spec, &fixed)?;
            let prior = normalize_prior(&DerivedLogDensity::Poly(poly))?;
            let report = DerivePriorReport {
                prior,
                condition_check: Some(check),
            };
            let path = emit(out, &to_pretty(&report)?)?;
            Ok(CommandResult::ok(
                path,
                "derived a variance-independent prior",
            ))
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown posterior family '{other}' (expected dirac or gaussian)"
        ))),
    }
}

fn parse_prior(spec: &str, dim: usize) -> Result<PriorDensity> {
    let (name, params) = spec.split_once(':').ok_or_else(|| {
        Error::InvalidParameter(format!(
            "prior spec '{spec}' must look like name:params, e.g. laplace:4"
        ))
    })?;
    let nums = parse_f64_list(params)?;
    match (name, nums.as_slice()) {
        ("gaussian", [mean, var]) => PriorDensity::gaussian(*mean, *var),
        ("laplace", [rate]) => PriorDensity::laplace(*rate),
        ("exp-norm", [rate]) => PriorDensity::exp_norm(*rate, dim),
        _ => Err(Error::InvalidParameter(format!(
            "unknown prior spec '{spec}' (expected gaussian:mean,var | \
             laplace:rate | exp-norm:rate)"
        ))),
    }
}

fn cmd_verify(
    args: &VerifyArgs,
    out: Option<&PathBuf>,
    seed: u64,
    tolerance: Option<f64>,
) -> Result<CommandResult> {
    let kind = parse_penalty_kind(&args.penalty)?;
    let spec = PenaltySpec::named(kind, args.lambda, args.dim)?;
    let prior = parse_prior(&args.prior, args.dim)?;
    let (posterior, nu_grid) = match args.posterior.as_str() {
        "dirac" => (PosteriorFamily::dirac(args.dim), Vec::new()),
        "gaussian" => {
            let nus = match &args.sigma2 {
                Some(s) => parse_f64_list(s)?,
                None => vec![1.0],
            };
            (PosteriorFamily::gaussian_free(args.dim), nus)
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown posterior family '{other}' (expected dirac or gaussian)"
            )))
        }
    };
    let mu_grid: Vec<Vec<f64>> = (0..21)
        .map(|i| {
            let t = -args.mu_range + 2.0 * args.mu_range * i as f64 / 20.0;
            vec![t; args.dim]
        })
        .collect();
    let cfg = QuadratureConfig {
        seed,
        ..QuadratureConfig::default()
    };
    let report = verify_correspondence(&spec, &posterior, &prior, &mu_grid, &nu_grid, &cfg)?;
    let tol = tolerance.unwrap_or(1e-10);
    let passed = report.max_residual <= tol;
    let summary = format!(
        "max residual {:.3e} against tolerance {tol:.1e}",
        report.max_residual
    );
    let path = emit(out, &to_pretty(&report)?)?;
    if passed {
        Ok(CommandResult::ok(path, summary))
    } else {
        Ok(CommandResult::failed(1, path, summary))
    }
}

fn cmd_plan_lambda(args: &PlanLambdaArgs, out: Option<&PathBuf>) -> Result<CommandResult> {
    let kind = parse_penalty_kind(&args.penalty)?;
    let scheme = parse_scheme(&args.scheme)?;
    let text = std::fs::read_to_string(&args.arch)?;
    let arch: ArchitectureSpec = serde_json::from_str(&text)?;
    let plan = plan(&arch, kind, scheme, args.global_lambda, args.mixing_gamma)?;
    let content = match args.format.as_str() {
        "json" => to_pretty(&plan)?,
        "csv" => plan_to_csv(&arch, &plan),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown format '{other}' (expected json or csv)"
            )))
        }
    };
    let path = emit(out, &content)?;
    Ok(CommandResult::ok(
        path,
        format!("planned factors for {} layers", arch.layers.len()),
    ))
}

fn cmd_train_prune(
    args: &TrainPruneArgs,
    out: Option<&PathBuf>,
    seed: u64,
) -> Result<CommandResult> {
    let kind = parse_penalty_kind(&args.penalty)?;
    let scheme = parse_scheme(&args.scheme)?;
    let text = std::fs::read_to_string(&args.arch)?;
    let arch: ArchitectureSpec = serde_json::from_str(&text)?;
    arch.validate()?;
    let global = match args.lambda.as_str() {
        "auto" => None,
        s => Some(s.parse::<f64>().map_err(|e| {
            Error::InvalidParameter(format!("--lambda must be a number or 'auto': {e}"))
        })?),
    };
    let plan = plan(&arch, kind, scheme, global, None)?;

    let n_features = arch.layers[0].p_l;
    let n_classes = arch.layers.last().expect("validated non-empty").n_l;
    let data = if args.data == "synthetic" {
        make_synthetic_dataset(arch.n, n_features, n_classes, args.noise, seed)?
    } else {
        let csv = std::fs::read_to_string(&args.data)?;
        Dataset::from_csv(&csv, seed)?
    };
    if data.n_features() != n_features || data.n_classes > n_classes {
        return Err(Error::Configuration(format!(
            "dataset shape ({} features, {} classes) does not fit the \
             architecture ({n_features} features, {n_classes} outputs)",
            data.n_features(),
            data.n_classes
        )));
    }

    let mut sizes = vec![n_features];
    sizes.extend(arch.layers.iter().map(|l| l.n_l));
    let mut model = MLPModel::new(&sizes, Activation::ReLU, seed)?;
    let cfg = TrainConfig {
        learning_rates: vec![args.learning_rate],
        patience: args.patience,
        max_epochs: args.max_epochs,
        batch_size: args.batch_size,
        seed,
        ..TrainConfig::default()
    };
    let total = model.total_hidden_neurons();
    let report = train_two_phase(&mut model, &data, &plan, &cfg)?;
    let alive = model.alive_hidden_neurons();
    let path = emit(out, &to_pretty(&report)?)?;
    Ok(CommandResult::ok(
        path,
        format!(
            "pruned {} of {total} hidden neurons; test accuracy {:.4}",
            total - alive,
            report.final_test_acc
        ),
    ))
}

fn cmd_rate_bound(
    args: &RateBoundArgs,
    out: Option<&PathBuf>,
    seed: u64,
) -> Result<CommandResult> {
    let model = ToyModel::standard();
    let witness = corollary_rate(&model, args.gamma)?;
    let n_list: Vec<u64> = args
        .n_list
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| Error::InvalidParameter(format!("bad sample size '{t}': {e}")))
        })
        .collect::<Result<_>>()?;
    let report = verify_witness(&model, &witness, &n_list, args.mc_samples, seed)?;
    let all_hold = report.per_n.iter().all(|c| c.conditions_hold);
    let path = emit(out, &to_pretty(&report)?)?;
    let summary = format!(
        "checked {} sample sizes; conditions hold: {all_hold}",
        report.per_n.len()
    );
    if all_hold {
        Ok(CommandResult::ok(path, summary))
    } else {
        Ok(CommandResult::failed(1, path, summary))
    }
}

fn cmd_renyi(args: &RenyiArgs, out: Option<&PathBuf>) -> Result<CommandResult> {
    if !(args.gamma > 0.0) || args.gamma == 1.0 {
        return Err(Error::InvalidParameter(format!(
            "the Renyi order must be positive and different from 1, got {}",
            args.gamma
        )));
    }
    let kind = parse_penalty_kind(&args.penalty)?;
    let spec = PenaltySpec::named(kind, args.lambda, 1)?;
    let posterior = PosteriorFamily::gaussian_fixed(1, args.sigma2)?;
    let candidate = renyi_prior_candidate(
        &spec,
        &posterior,
        args.gamma,
        args.k,
        args.lo,
        args.hi,
        args.points,
    )?;
    let path = emit(out, &to_pretty(&candidate)?)?;
    Ok(CommandResult::ok(
        path,
        format!(
            "candidate prior sampled on [{}, {}) with {} points",
            candidate.lo, candidate.hi, candidate.n_points
        ),
    ))
}

/// Parses the argument list and runs the selected command, mapping every
/// failure onto the documented exit codes.
pub fn run<I, T>(args: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let rendered = e.render().to_string();
            if code == 0 {
                println!("{rendered}");
                return CommandResult::ok(None, "");
            }
            return CommandResult::failed(2, None, rendered);
        }
    };
    let out = cli.out.as_ref();
    let result = match &cli.command {
        Command::DerivePrior(a) => cmd_derive_prior(a, out, cli.tolerance),
        Command::Verify(a) => cmd_verify(a, out, cli.seed, cli.tolerance),
        Command::PlanLambda(a) => cmd_plan_lambda(a, out),
        Command::TrainPrune(a) => cmd_train_prune(a, out, cli.seed),
        Command::RateBound(a) => cmd_rate_bound(a, out, cli.seed),
        Command::Renyi(a) => cmd_renyi(a, out),
    };
    match result {
        Ok(r) => r,
        Err(e) => CommandResult::failed(exit_code_for(&e), None, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::PriorForm;
    use clap::CommandFactory;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("penprior-cli-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn run_vec(args: &[&str]) -> CommandResult {
        run(std::iter::once("penprior").chain(args.iter().copied()))
    }

    #[test]
    fn derive_prior_l2_dirac_gives_half_variance_gaussian() {
        let out = tmp("derive_l2.json");
        let r = run_vec(&[
            "derive-prior",
            "--penalty",
            "l2",
            "--lambda",
            "1",
            "--posterior",
            "dirac",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(r.exit_code, 0);
        let text = std::fs::read_to_string(&out).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let prior: PriorDensity =
            serde_json::from_value(v.get("prior").unwrap().clone()).unwrap();
        match prior.form {
            PriorForm::Gaussian { mean, var } => {
                assert!((mean - 0.0).abs() < 1e-15);
                assert!((var - 0.5).abs() < 1e-12);
            }
            other => panic!("expected a Gaussian prior, got {other:?}"),
        }
    }

    #[test]
    fn variance_dependent_penalty_exits_one_with_deviation_report() {
        let out = tmp("derive_poly.json");
        let r = run_vec(&[
            "derive-prior",
            "--penalty",
            "poly",
            "--coeffs",
            "0,1",
            "--posterior",
            "gaussian",
            "--sigma2",
            "1,2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(r.exit_code, 1);
        let check: ConditionAReport =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert!(!check.independent_of_nu);
        assert!(check.max_deviation > 1e-3);
    }

    #[test]
    fn missing_lambda_is_invalid_input() {
        let r = run_vec(&["derive-prior", "--penalty", "l2"]);
        assert_eq!(r.exit_code, 2);
    }

    #[test]
    fn verify_l1_against_its_laplace_prior_passes() {
        let r = run_vec(&[
            "verify",
            "--penalty",
            "l1",
            "--lambda",
            "4",
            "--prior",
            "laplace:4",
            "--posterior",
            "dirac",
            "--out",
            tmp("verify_l1.json").to_str().unwrap(),
        ]);
        assert_eq!(r.exit_code, 0, "{}", r.summary);
    }

    #[test]
    fn verify_against_wrong_prior_fails_with_exit_one() {
        let r = run_vec(&[
            "verify",
            "--penalty",
            "l1",
            "--lambda",
            "4",
            "--prior",
            "laplace:2",
            "--posterior",
            "dirac",
            "--out",
            tmp("verify_bad.json").to_str().unwrap(),
        ]);
        assert_eq!(r.exit_code, 1);
    }

    #[test]
    fn plan_lambda_reads_architecture_json() {
        let arch = tmp("arch.json");
        std::fs::write(
            &arch,
            r#"{"layers":[{"l":1,"n_l":100,"P_l":784}],"n":42000,"B":100}"#,
        )
        .unwrap();
        let out = tmp("plan.json");
        let r = run_vec(&[
            "plan-lambda",
            "--arch",
            arch.to_str().unwrap(),
            "--penalty",
            "group-lasso",
            "--scheme",
            "bayesian",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(r.exit_code, 0, "{}", r.summary);
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let lam = v["per_layer"]["1"].as_f64().unwrap();
        assert!((lam - (784.0f64 * 785.0).sqrt()).abs() < 1e-9);
        // Malformed input exits 2.
        let r = run_vec(&[
            "plan-lambda",
            "--arch",
            "/nonexistent/arch.json",
            "--penalty",
            "l2",
            "--scheme",
            "bayesian",
        ]);
        assert_eq!(r.exit_code, 2);
    }

    #[test]
    fn rate_bound_gamma_out_of_range_exits_two() {
        let r = run_vec(&["rate-bound", "--gamma", "1.5"]);
        assert_eq!(r.exit_code, 2);
    }

    #[test]
    fn rate_bound_half_rate_passes_and_is_byte_identical() {
        let out1 = tmp("rate1.json");
        let out2 = tmp("rate2.json");
        for out in [&out1, &out2] {
            let r = run_vec(&[
                "rate-bound",
                "--gamma",
                "0.5",
                "--n-list",
                "100,1000",
                "--mc-samples",
                "200",
                "--seed",
                "9",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(r.exit_code, 0, "{}", r.summary);
        }
        assert_eq!(
            std::fs::read(&out1).unwrap(),
            std::fs::read(&out2).unwrap()
        );
    }

    #[test]
    fn renyi_rejects_order_one() {
        let r = run_vec(&["renyi", "--lambda", "1", "--gamma", "1"]);
        assert_eq!(r.exit_code, 2);
    }

    #[test]
    fn renyi_emits_a_grid_candidate() {
        let out = tmp("renyi.json");
        let r = run_vec(&[
            "renyi",
            "--penalty",
            "l2",
            "--lambda",
            "0.25",
            "--gamma",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(r.exit_code, 0, "{}", r.summary);
        let grid: crate::grid::GridFunction =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(grid.n_points, 1024);
    }

    #[test]
    fn help_lists_every_flag_of_every_subcommand() {
        let cmd = Cli::command();
        for sub in cmd.get_subcommands() {
            let help = sub.clone().render_long_help().to_string();
            for arg in sub.get_arguments() {
                if let Some(long) = arg.get_long() {
                    assert!(
                        help.contains(&format!("--{long}")),
                        "help of '{}' is missing --{long}",
                        sub.get_name()
                    );
                }
            }
        }
    }

    #[test]
    fn train_prune_runs_end_to_end_on_a_tiny_architecture() {
        let arch = tmp("tiny_arch.json");
        std::fs::write(
            &arch,
            r#"{"layers":[{"l":1,"n_l":8,"P_l":5},{"l":2,"n_l":3,"P_l":8}],"n":150,"B":32}"#,
        )
        .unwrap();
        let out1 = tmp("train1.json");
        let out2 = tmp("train2.json");
        for out in [&out1, &out2] {
            let r = run_vec(&[
                "train-prune",
                "--arch",
                arch.to_str().unwrap(),
                "--penalty",
                "group-lasso",
                "--scheme",
                "bayesian",
                "--lambda",
                "auto",
                "--max-epochs",
                "20",
                "--patience",
                "5",
                "--seed",
                "3",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(r.exit_code, 0, "{}", r.summary);
        }
        assert_eq!(
            std::fs::read(&out1).unwrap(),
            std::fs::read(&out2).unwrap()
        );
    }
}
