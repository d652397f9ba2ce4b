//! Command-line front end: experiment configuration, execution, CSV output.
//!
//! Every CSV starts with `#`-prefixed metadata lines including a canonical
//! command echo; re-running that command reproduces the file byte for byte.
//! Worker-thread count is deliberately excluded from the echo because results
//! are bit-identical regardless of parallelism.
//!
//! Exit codes: 0 success, 1 numerical failure (divergence, non-convergence),
//! 2 usage error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlmc_sde::analysis::{self, scale};
use mlmc_sde::{
    build_model, build_payoff, EstimatorMode, MlmcConfig, Payoff, SchemeSpec, SdeModel, SimError,
};

#[derive(Parser)]
#[command(
    name = "mlmc-sde",
    version,
    about = "Multilevel Monte Carlo experiments for SDEs with superlinear coefficients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Model name: fhn, gbm.
    #[arg(long, default_value = "fhn")]
    model: String,

    /// Model parameter override, e.g. --param epsilon=0.4 (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,

    /// Scheme: em, milstein-commutative, mm-identity, tms1, tms2, pms.
    #[arg(long, default_value = "tms1")]
    scheme: String,

    /// Master seed; all streams derive from it deterministically.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (0 = all cores). Does not affect results.
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Use the published experiment sizes instead of the fast desk scale.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Strong L2/L4 terminal error versus stepsize, against a fine-path
    /// reference driven by the same increments.
    StrongOrder {
        #[command(flatten)]
        common: CommonArgs,
        /// Monte Carlo samples per stepsize.
        #[arg(long)]
        samples: Option<u64>,
        /// Reference stepsize exponent k (h_exact = T * 2^-k).
        #[arg(long)]
        reference_exp: Option<i32>,
    },
    /// Variance of the antithetic and standard level corrections per level.
    VarianceDecay {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "fhn-smooth")]
        payoff: String,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        min_level: Option<u32>,
        #[arg(long)]
        max_level: Option<u32>,
    },
    /// Total cost versus target accuracy for both drivers.
    CostAccuracy {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "fhn-smooth")]
        payoff: String,
        /// Comma-separated descending accuracies.
        #[arg(long)]
        eps_list: Option<String>,
    },
    /// One full multilevel run.
    Mlmc {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "fhn-smooth")]
        payoff: String,
        /// Target root-mean-square accuracy.
        #[arg(long)]
        eps: f64,
        /// Use the antithetic estimator (default: standard).
        #[arg(long)]
        antithetic: bool,
        /// Assumed weak order for the bias extrapolation.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 20)]
        max_level: u32,
        #[arg(long, default_value_t = 100)]
        min_samples: u64,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(err: SimError) -> Self {
        match err {
            SimError::InvalidArgument(_) | SimError::NonCommutativeModel { .. } => {
                CliError::usage(err.to_string())
            }
            _ => CliError::numerical(err.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn parse_params(raw: &[String]) -> Result<Vec<(String, f64)>, CliError> {
    raw.iter()
        .map(|entry| {
            let (key, value) = entry.split_once('=').ok_or_else(|| {
                CliError::usage(format!("malformed --param `{entry}`, expected KEY=VALUE"))
            })?;
            let parsed: f64 = value.parse().map_err(|_| {
                CliError::usage(format!("malformed numeric value in --param `{entry}`"))
            })?;
            Ok((key.to_string(), parsed))
        })
        .collect()
}

struct Resolved {
    model: SdeModel,
    spec: SchemeSpec,
    params: Vec<(String, f64)>,
}

fn resolve(common: &CommonArgs) -> Result<Resolved, CliError> {
    let params = parse_params(&common.params)?;
    let model = build_model(&common.model, &params)?;
    let spec = SchemeSpec::parse(&common.scheme)?;
    spec.validate_for(&model)?;
    Ok(Resolved {
        model,
        spec,
        params,
    })
}

fn resolve_payoff(name: &str) -> Result<Payoff, CliError> {
    Ok(build_payoff(name)?)
}

/// Canonical re-runnable form of the invocation: all science-relevant
/// settings materialized, execution-environment flags (threads, out) left
/// out.
fn canonical_command(common: &CommonArgs, params: &[(String, f64)], tail: &str) -> String {
    let mut s = format!(
        "mlmc-sde {tail} --model {} --scheme {} --seed {}",
        common.model, common.scheme, common.seed
    );
    for (key, value) in params {
        let _ = write!(s, " --param {key}={value}");
    }
    if common.paper_scale {
        s.push_str(" --paper-scale");
    }
    s
}

fn header(
    common: &CommonArgs,
    params: &[(String, f64)],
    tail: &str,
    extra: &[(&str, String)],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# mlmc-sde v{}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        out,
        "# command: {}",
        canonical_command(common, params, tail)
    );
    let _ = writeln!(out, "# model: {}", common.model);
    let _ = writeln!(out, "# scheme: {}", common.scheme);
    let _ = writeln!(out, "# seed: {}", common.seed);
    for (key, value) in extra {
        let _ = writeln!(out, "# {key}: {value}");
    }
    out
}

fn emit(common: &CommonArgs, content: &str) -> Result<(), CliError> {
    match &common.out {
        Some(path) => {
            let mut file = std::fs::File::create(path).map_err(|e| {
                CliError::usage(format!("output path {} not writable: {e}", path.display()))
            })?;
            file.write_all(content.as_bytes())
                .map_err(|e| CliError::numerical(format!("write failed: {e}")))?;
        }
        None => {
            std::io::stdout()
                .write_all(content.as_bytes())
                .map_err(|e| CliError::numerical(format!("write failed: {e}")))?;
        }
    }
    Ok(())
}

fn with_thread_pool<T>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage(format!("could not build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::StrongOrder {
            common,
            samples,
            reference_exp,
        } => {
            let resolved = resolve(&common)?;
            let n_samples = samples.unwrap_or(if common.paper_scale {
                scale::PAPER_SAMPLES
            } else {
                scale::DESK_SAMPLES
            });
            let ref_exp = reference_exp.unwrap_or(if common.paper_scale {
                scale::PAPER_REFERENCE_EXP
            } else {
                scale::DESK_REFERENCE_EXP
            });
            let h_exact = resolved.model.horizon() * 2f64.powi(-ref_exp);
            let stepsizes = analysis::default_stepsizes(resolved.model.horizon());
            let tail = format!("strong-order --samples {n_samples} --reference-exp {ref_exp}");
            let mut out = header(
                &common,
                &resolved.params,
                &tail,
                &[("columns", "h,err_l2,err_l4,n_samples".into())],
            );
            let rows = with_thread_pool(common.threads, || {
                analysis::strong_error_study(
                    resolved.spec,
                    &resolved.model,
                    &stepsizes,
                    n_samples,
                    h_exact,
                    common.seed,
                )
            })?;
            match rows {
                Ok(rows) => {
                    let _ = writeln!(out, "h,err_l2,err_l4,n_samples");
                    for row in &rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{}",
                            row.h, row.err_l2, row.err_l4, row.n_samples
                        );
                    }
                    let start = analysis::asymptotic_start(rows.len());
                    let hs: Vec<f64> = rows[start..].iter().map(|r| r.h).collect();
                    let l2: Vec<f64> = rows[start..].iter().map(|r| r.err_l2).collect();
                    let l4: Vec<f64> = rows[start..].iter().map(|r| r.err_l4).collect();
                    if let (Ok(fit2), Ok(fit4)) =
                        (analysis::fit_slope(&hs, &l2), analysis::fit_slope(&hs, &l4))
                    {
                        let _ = writeln!(
                            out,
                            "# fit_l2: slope={} r_squared={} window_start={start}",
                            fit2.slope, fit2.r_squared
                        );
                        let _ = writeln!(
                            out,
                            "# fit_l4: slope={} r_squared={} window_start={start}",
                            fit4.slope, fit4.r_squared
                        );
                    }
                    emit(&common, &out)
                }
                Err(err) => {
                    let _ = writeln!(out, "# error: {err}");
                    emit(&common, &out)?;
                    Err(err.into())
                }
            }
        }

        Command::VarianceDecay {
            common,
            payoff,
            samples,
            min_level,
            max_level,
        } => {
            let resolved = resolve(&common)?;
            let payoff_fn = resolve_payoff(&payoff)?;
            let defaults = if common.paper_scale {
                scale::PAPER_LEVELS
            } else {
                scale::DESK_LEVELS
            };
            let lo = min_level.unwrap_or(*defaults.start());
            let hi = max_level.unwrap_or(*defaults.end());
            if lo < 1 || hi < lo {
                return Err(CliError::usage(format!(
                    "invalid level range {lo}..{hi} (need 1 <= min <= max)"
                )));
            }
            let n_samples = samples.unwrap_or(if common.paper_scale {
                scale::PAPER_SAMPLES
            } else {
                scale::DESK_SAMPLES
            });
            let levels: Vec<u32> = (lo..=hi).collect();
            let tail = format!(
                "variance-decay --payoff {payoff} --samples {n_samples} --min-level {lo} --max-level {hi}"
            );
            let mut out = header(
                &common,
                &resolved.params,
                &tail,
                &[
                    ("payoff", payoff.clone()),
                    (
                        "columns",
                        "level,h,variance_antithetic,variance_standard,n_samples".into(),
                    ),
                ],
            );
            let rows = with_thread_pool(common.threads, || {
                analysis::variance_decay_study(
                    resolved.spec,
                    &resolved.model,
                    &payoff_fn,
                    &levels,
                    n_samples,
                    common.seed,
                )
            })?;
            match rows {
                Ok(rows) => {
                    let _ = writeln!(
                        out,
                        "level,h,variance_antithetic,variance_standard,n_samples"
                    );
                    for row in &rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            row.level,
                            row.h_fine,
                            row.var_antithetic,
                            row.var_standard,
                            row.n_samples
                        );
                    }
                    emit(&common, &out)
                }
                Err(err) => {
                    let _ = writeln!(out, "# error: {err}");
                    emit(&common, &out)?;
                    Err(err.into())
                }
            }
        }

        Command::CostAccuracy {
            common,
            payoff,
            eps_list,
        } => {
            let resolved = resolve(&common)?;
            let payoff_fn = resolve_payoff(&payoff)?;
            let eps: Vec<f64> = match &eps_list {
                Some(raw) => raw
                    .split(',')
                    .map(|tok| {
                        tok.trim().parse::<f64>().map_err(|_| {
                            CliError::usage(format!("malformed accuracy `{tok}` in --eps-list"))
                        })
                    })
                    .collect::<Result<_, _>>()?,
                None => scale::EPS_SWEEP.to_vec(),
            };
            let eps_echo: Vec<String> = eps.iter().map(|e| e.to_string()).collect();
            let tail = format!(
                "cost-accuracy --payoff {payoff} --eps-list {}",
                eps_echo.join(",")
            );
            let mut out = header(
                &common,
                &resolved.params,
                &tail,
                &[
                    ("payoff", payoff.clone()),
                    (
                        "columns",
                        "eps,mode,total_cost,estimate,levels,status".into(),
                    ),
                ],
            );
            let rows = with_thread_pool(common.threads, || {
                analysis::cost_accuracy_study(
                    resolved.spec,
                    &resolved.model,
                    &payoff_fn,
                    &eps,
                    common.seed,
                )
            })?;
            let rows = rows?;
            let _ = writeln!(out, "eps,mode,total_cost,estimate,levels,status");
            let mut first_failure: Option<String> = None;
            for row in &rows {
                for (mode, cell) in [("antithetic", &row.antithetic), ("standard", &row.standard)] {
                    match cell {
                        Ok(run) => {
                            let _ = writeln!(
                                out,
                                "{},{mode},{},{},{},ok",
                                row.eps, run.total_cost, run.estimate, run.levels
                            );
                        }
                        Err(err) => {
                            let msg = err.to_string().replace(',', ";");
                            let _ = writeln!(out, "{},{mode},,,,error: {msg}", row.eps);
                            if first_failure.is_none() {
                                first_failure = Some(format!("eps={} mode={mode}: {err}", row.eps));
                            }
                        }
                    }
                }
            }
            emit(&common, &out)?;
            match first_failure {
                Some(diag) => Err(CliError::numerical(format!("sweep cell failed: {diag}"))),
                None => Ok(()),
            }
        }

        Command::Mlmc {
            common,
            payoff,
            eps,
            antithetic,
            alpha,
            max_level,
            min_samples,
        } => {
            let resolved = resolve(&common)?;
            let payoff_fn = resolve_payoff(&payoff)?;
            if !(eps > 0.0) {
                return Err(CliError::usage(format!(
                    "target accuracy must be positive, got {eps}"
                )));
            }
            let mut cfg = MlmcConfig::new(eps);
            cfg.alpha_hint = alpha;
            cfg.max_level = max_level;
            cfg.min_samples = min_samples;
            cfg.seed = common.seed;
            let mode = if antithetic {
                EstimatorMode::Antithetic
            } else {
                EstimatorMode::Standard
            };
            let anti_flag = if antithetic { " --antithetic" } else { "" };
            let tail = format!(
                "mlmc --payoff {payoff} --eps {eps}{anti_flag} --alpha {alpha} --max-level {max_level} --min-samples {min_samples}"
            );
            let mut out = header(
                &common,
                &resolved.params,
                &tail,
                &[
                    ("payoff", payoff.clone()),
                    ("estimator", mode.label().into()),
                    ("columns", "level,h_coarse,N,mean,variance,cost".into()),
                ],
            );
            let result = with_thread_pool(common.threads, || {
                mlmc_sde::run_mlmc(resolved.spec, &resolved.model, &payoff_fn, &cfg, mode)
            })?;
            match result {
                Ok(result) => {
                    let _ = writeln!(out, "level,h_coarse,N,mean,variance,cost");
                    let t = resolved.model.horizon();
                    for stats in &result.levels {
                        let h_coarse = if stats.level() == 0 {
                            t
                        } else {
                            t * 2f64.powi(-(stats.level() as i32 - 1))
                        };
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            stats.level(),
                            h_coarse,
                            stats.n_samples(),
                            stats.mean(),
                            stats.variance(),
                            stats.cost_per_sample()
                        );
                    }
                    let _ = writeln!(
                        out,
                        "# Z={} L={} bias_estimate={} variance_estimate={} total_cost={}",
                        result.estimate,
                        result.max_level(),
                        result.bias_estimate,
                        result.variance_estimate,
                        result.total_cost
                    );
                    emit(&common, &out)
                }
                Err(err) => {
                    let _ = writeln!(out, "# error: {err}");
                    emit(&common, &out)?;
                    Err(err.into())
                }
            }
        }
    }
}
