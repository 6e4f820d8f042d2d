use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;

use cpr::baselines::Method;
use cpr::experiments::{emit_csv, emit_json, run_experiment, ExperimentReport, ExperimentSpec, GridPoint, SizeRule, DESK_D, FULL_D};
use cpr::fidelity::{MeasurementMap, QuadraticMap};
use cpr::linalg::sigma_max;
use cpr::measurement::{estimate_rip_constant, generate_instance, make_ensemble, PsiKind};
use cpr::oracles::{brute_force_cpr, lemma_suite, CheckLine};
use cpr::pipeline::{recover_instance, TwoStageConfig};
use cpr::postprocess::relative_signal_error;
use cpr::{CprError, Result};

#[derive(Parser)]
#[command(name = "cpr", version, about = "Two-stage compressive phase retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Signal dimension.
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Sparsity; a comma-separated list for the experiments.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Trials per cell, or Monte Carlo draws for `verify` and `ensemble`.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Noise standard deviation.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Output path (CSV for experiments, JSON for solve).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated subset of two_stage,sdp,sdp_l1,l1.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Reported error quantile, in (0, 1).
    #[arg(long, global = true)]
    quantile: Option<f64>,
    /// JSON experiment spec; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Two-stage error over the five (m, n) budgets.
    Experiment1 {
        /// Use d = 256, 100 trials and k up to 20.
        #[arg(long)]
        full_scale: bool,
    },
    /// All methods at m = ceil(2k(1 + ln(d/k))), n = 3m.
    Experiment2 {
        #[arg(long)]
        full_scale: bool,
    },
    /// Recover one random instance and print the result as JSON.
    Solve {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Write per-iteration diagnostics to `<prefix>.stage1.csv` and
        /// `<prefix>.stage2.csv`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Run the oracle and lemma checks.
    Verify,
    /// Print statistics of a sensing ensemble.
    Ensemble {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
}

fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| CprError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentSpec::from_json(&text)
}

fn apply_flags(mut spec: ExperimentSpec, c: &Common) -> Result<ExperimentSpec> {
    if let Some(d) = c.d {
        spec.d = d;
    }
    if let Some(k) = &c.k {
        spec.k_list = k.clone();
    }
    if let Some(t) = c.trials {
        spec.trials = t;
    }
    if let Some(s) = c.seed {
        spec.base_seed = s;
    }
    if let Some(s) = c.sigma {
        spec.noise_sigma = s;
    }
    if let Some(q) = c.quantile {
        spec.quantile_q = q;
    }
    if let Some(ms) = &c.methods {
        spec.methods = ms.iter().map(|m| m.parse::<Method>()).collect::<Result<_>>()?;
    }
    spec.validate()?;
    Ok(spec)
}

fn base_spec(c: &Common, preset: fn(usize) -> ExperimentSpec, full_scale: bool) -> Result<ExperimentSpec> {
    let d = if full_scale { FULL_D } else { DESK_D };
    match &c.config {
        Some(p) => load_spec(p),
        None => Ok(preset(d)),
    }
}

fn print_report(report: &ExperimentReport) {
    println!("method,k,m,n,q,quantile,mean,failures,trials");
    for c in &report.cells {
        println!(
            "{},{},{},{},{},{:.6e},{:.6e},{},{}",
            c.method, c.k, c.m, c.n, report.spec.quantile_q, c.quantile, c.mean, c.failures, c.trials
        );
    }
}

fn experiment(c: &Common, preset: fn(usize) -> ExperimentSpec, full_scale: bool) -> Result<ExitCode> {
    let spec = apply_flags(base_spec(c, preset, full_scale)?, c)?;
    if full_scale {
        warn!("full scale: expect hours of compute on a single core");
    }
    let report = run_experiment(&spec)?;
    print_report(&report);
    if let Some(out) = &c.out {
        emit_csv(&report, out)?;
        emit_json(&report, &out.with_extension("json"))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Single-instance parameters: flags, then the config file, then defaults.
fn instance_params(c: &Common, m: Option<usize>, n: Option<usize>) -> Result<(usize, usize, usize, usize, f64, u64)> {
    let file = c.config.as_deref().map(load_spec).transpose()?;
    let d = c.d.or(file.as_ref().map(|s| s.d)).unwrap_or(32);
    let k = c
        .k
        .as_ref()
        .and_then(|v| v.first().copied())
        .or(file.as_ref().and_then(|s| s.k_list.first().copied()))
        .unwrap_or(2);
    if k == 0 || k > d {
        return Err(CprError::InvalidArgument(format!("k={k} must lie in 1..=d={d}")));
    }
    let grid = file
        .as_ref()
        .and_then(|s| s.grid.first().copied())
        .unwrap_or(GridPoint::new(SizeRule::LogRule, SizeRule::MulM(3.0)));
    let (gm, gn) = grid.resolve(d, k)?;
    let m = m.unwrap_or(gm);
    let n = n.unwrap_or(if m == gm { gn } else { 3 * m });
    let sigma = c.sigma.or(file.as_ref().map(|s| s.noise_sigma)).unwrap_or(0.0);
    let seed = c.seed.or(file.as_ref().map(|s| s.base_seed)).unwrap_or(1);
    Ok((d, k, m, n, sigma, seed))
}

fn solve(c: &Common, m: Option<usize>, n: Option<usize>, history: Option<&Path>) -> Result<ExitCode> {
    let (d, k, m, n, sigma, seed) = instance_params(c, m, n)?;
    let ens = make_ensemble(d, m, n, seed, PsiKind::GaussianScaled)?;
    let inst = generate_instance(&ens, k, sigma, seed)?;
    let mut cfg = TwoStageConfig::default();
    cfg.lowrank.record_history = history.is_some();
    cfg.sparse.record_history = history.is_some();
    let res = recover_instance(&ens, &inst, &cfg)?;
    if let Some(prefix) = history {
        let with = |suffix: &str| {
            let mut p = prefix.as_os_str().to_owned();
            p.push(suffix);
            PathBuf::from(p)
        };
        cpr::admm::write_history_csv(&with(".stage1.csv"), "trace", &res.lowrank.history)?;
        cpr::admm::write_history_csv(&with(".stage2.csv"), "l1", &res.sparse.history)?;
    }
    let json = serde_json::to_string_pretty(&res)?;
    match &c.out {
        Some(p) => std::fs::write(p, &json).map_err(|source| CprError::Io {
            path: p.clone(),
            source,
        })?,
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(c: &Common) -> Result<ExitCode> {
    let d = c.d.unwrap_or(DESK_D);
    let k = c.k.as_ref().and_then(|v| v.first().copied()).unwrap_or(2);
    let trials = c.trials.unwrap_or(10_000);
    let seed = c.seed.unwrap_or(5000);
    let ens = make_ensemble(d, 8 * k, 1, seed, PsiKind::GaussianScaled)?;
    let mut lines = lemma_suite(&ens.psi, k, trials, seed)?;

    let cfg = TwoStageConfig::with_tolerance(1e-10, 50_000);
    let mut worst: f64 = 0.0;
    for s in 0..10 {
        let ens = make_ensemble(6, 6, 30, seed + s, PsiKind::GaussianScaled)?;
        let inst = generate_instance(&ens, 2, 0.0, seed + s)?;
        let oracle = brute_force_cpr(&ens, &inst.y, 2)?;
        let res = recover_instance(&ens, &inst, &cfg)?;
        worst = worst.max(relative_signal_error(&res.signal(), &oracle.signal())?);
    }
    lines.push(CheckLine {
        name: "oracle_vs_pipeline".into(),
        statistic: worst,
        bound: 1e-6,
        pass: worst <= 1e-6,
    });
    for l in &lines {
        println!("{l}");
    }
    Ok(if lines.iter().all(|l| l.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn ensemble(c: &Common, m: Option<usize>, n: Option<usize>) -> Result<ExitCode> {
    let (d, k, m, n, _, seed) = instance_params(c, m, n)?;
    let ens = make_ensemble(d, m, n, seed, PsiKind::GaussianScaled)?;
    let gram = QuadraticMap::new(ens.w_stack.clone())?;
    let lam = gram.gram_eigenvalues();
    let rip = if 2 * k <= d {
        Some(estimate_rip_constant(&ens.psi, k, c.trials.unwrap_or(2000), seed)?)
    } else {
        None
    };
    let stats = serde_json::json!({
        "d": d,
        "m": m,
        "n": n,
        "seed": seed,
        "sigma_max_psi": sigma_max(&ens.psi, 1e-8, 1000),
        "rip_estimate_2k": rip,
        "k": k,
        "w_gram_eigenvalue_min": lam.min(),
        "w_gram_eigenvalue_max": lam.max(),
    });
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let c = &cli.common;
    let run = match &cli.command {
        Command::Experiment1 { full_scale } => experiment(c, ExperimentSpec::experiment1, *full_scale),
        Command::Experiment2 { full_scale } => experiment(c, ExperimentSpec::experiment2, *full_scale),
        Command::Solve { m, n, history } => solve(c, *m, *n, history.as_deref()),
        Command::Verify => verify(c),
        Command::Ensemble { m, n } => ensemble(c, *m, *n),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CprError::InvalidArgument(_) | CprError::Json(_) | CprError::DimensionMismatch { .. } => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
