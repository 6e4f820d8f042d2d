//! Monte Carlo sweeps over sparsity levels and measurement budgets, with
//! quantile aggregation and CSV/JSON output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::SolveStatus;
use crate::baselines::{solve_l1_only, solve_sdp_l1, BaselineConfig, Fidelity, Method};
use crate::error::{CprError, Result};
use crate::linalg::Matrix;
use crate::measurement::{generate_instance, make_ensemble, PsiKind, SensingEnsemble, SparseInstance};
use crate::pipeline::{recover_two_stage, TwoStageConfig};
use crate::postprocess::relative_matrix_error;
use crate::rng::{derive_seed, label};

/// Guards `ceil` against values like `24.000000000000004`.
const CEIL_SLACK: f64 = 1e-9;

fn ceil_count(x: f64) -> usize {
    (x - CEIL_SLACK).ceil().max(0.0) as usize
}

/// How `m` or `n` is derived from `(d, k)` and, for `n`, from `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeRule {
    Explicit(usize),
    /// `⌈c · k⌉`.
    MulK(f64),
    /// `⌈2k (1 + ln(d/k))⌉`.
    LogRule,
    /// `⌈c · m⌉`; only meaningful for `n`.
    MulM(f64),
}

impl SizeRule {
    /// Evaluates the rule; `MulM` needs the already resolved `m`.
    pub fn eval(self, d: usize, k: usize, m: Option<usize>) -> Result<usize> {
        let kf = k as f64;
        let v = match self {
            SizeRule::Explicit(v) => v,
            SizeRule::MulK(c) => ceil_count(c * kf),
            SizeRule::LogRule => ceil_count(2.0 * kf * (1.0 + (d as f64 / kf).ln())),
            SizeRule::MulM(c) => match m {
                Some(m) => ceil_count(c * m as f64),
                None => return Err(CprError::InvalidArgument("mul_m cannot define m".into())),
            },
        };
        if v == 0 {
            return Err(CprError::InvalidArgument(format!("{self:?} gives zero at k={k}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub m: SizeRule,
    pub n: SizeRule,
}

impl GridPoint {
    pub fn new(m: SizeRule, n: SizeRule) -> Self {
        Self { m, n }
    }

    pub fn resolve(&self, d: usize, k: usize) -> Result<(usize, usize)> {
        let m = self.m.eval(d, k, None)?;
        let n = self.n.eval(d, k, Some(m))?;
        Ok((m, n))
    }
}

/// Solver budget shared by every method in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub tol: f64,
    /// Weight used by the `sdp_l1` method.
    pub sdp_l1_lambda: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-6,
            sdp_l1_lambda: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub d: usize,
    pub k_list: Vec<usize>,
    pub grid: Vec<GridPoint>,
    /// Standard deviation of the additive measurement noise.
    pub noise_sigma: f64,
    pub trials: usize,
    pub quantile_q: f64,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    #[serde(default)]
    pub solver: SolverSettings,
}

/// Full scale for the sweeps; smaller `d` is the desk default.
pub const FULL_D: usize = 256;
pub const DESK_D: usize = 64;

impl ExperimentSpec {
    /// Two-stage recovery over the five `(m, n)` budgets
    /// `(8k,24k), (8k,32k), (12k,36k), (12k,48k), (16k,48k)`.
    pub fn experiment1(d: usize) -> Self {
        let g = |a: f64, b: f64| GridPoint::new(SizeRule::MulK(a), SizeRule::MulK(b));
        Self {
            d,
            k_list: if d >= FULL_D { (1..=10).map(|i| 2 * i).collect() } else { vec![2, 4] },
            grid: vec![g(8.0, 24.0), g(8.0, 32.0), g(12.0, 36.0), g(12.0, 48.0), g(16.0, 48.0)],
            noise_sigma: 1e-2,
            trials: if d >= FULL_D { 100 } else { 20 },
            quantile_q: 0.9,
            methods: vec![Method::TwoStage],
            base_seed: 1,
            solver: SolverSettings::default(),
        }
    }

    /// All four methods at `m = ⌈2k(1 + ln(d/k))⌉`, `n = 3m`.
    pub fn experiment2(d: usize) -> Self {
        Self {
            d,
            k_list: if d >= FULL_D { (1..=10).map(|i| 2 * i).collect() } else { vec![2, 4, 6, 8] },
            grid: vec![GridPoint::new(SizeRule::LogRule, SizeRule::MulM(3.0))],
            noise_sigma: 1e-2,
            trials: if d >= FULL_D { 100 } else { 25 },
            quantile_q: 0.9,
            methods: Method::ALL.to_vec(),
            base_seed: 2,
            solver: SolverSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CprError::InvalidArgument(msg));
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(self.quantile_q > 0.0 && self.quantile_q < 1.0) {
            return bad(format!("quantile must lie in (0, 1), got {}", self.quantile_q));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma must be >= 0, got {}", self.noise_sigma));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iters == 0 || !(self.solver.sdp_l1_lambda >= 0.0) {
            return bad("solver settings must be positive".into());
        }
        for &k in &self.k_list {
            if k == 0 || k > self.d {
                return bad(format!("k={k} must satisfy 1 <= k <= d={}", self.d));
            }
            for g in &self.grid {
                g.resolve(self.d, k)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Seed of one trial. The method is deliberately not mixed in, so all
    /// methods see the same instances.
    pub fn trial_seed(&self, k: usize, grid_index: usize, trial: usize) -> u64 {
        derive_seed(self.base_seed, &[label("trial"), k as u64, grid_index as u64, trial as u64])
    }
}

/// Aggregated results of one `(method, k, grid point)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub method: Method,
    pub k: usize,
    pub grid_index: usize,
    pub m: usize,
    pub n: usize,
    /// Per-trial `‖X̂ − X*‖_F / ‖X*‖_F`; failures are `+∞`.
    pub errors: Vec<f64>,
    pub seeds: Vec<u64>,
    pub quantile: f64,
    pub mean: f64,
    pub failures: usize,
    /// Finite results that stopped at the iteration cap.
    pub unconverged: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, method: Method, k: usize, grid_index: usize) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.k == k && c.grid_index == grid_index)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The `⌈qT⌉`-th smallest of `values` (1-based). `+∞` entries sort last.
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(CprError::InvalidArgument("quantile of an empty list".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(CprError::InvalidArgument(format!("quantile must lie in (0, 1), got {q}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(CprError::InvalidArgument("quantile input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ceil_count(q * sorted.len() as f64).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Outcome of one method on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub estimate: Option<Matrix>,
    pub status: SolveStatus,
    pub rel_error: f64,
    pub failed: bool,
}

fn baseline_config(spec: &ExperimentSpec, inst: &SparseInstance, lambda: f64) -> BaselineConfig {
    BaselineConfig {
        lambda,
        fidelity: if inst.noise_sigma == 0.0 {
            Fidelity::Equality
        } else {
            Fidelity::Ball(inst.epsilon)
        },
        max_iters: spec.solver.max_iters,
        tol_primal: spec.solver.tol,
        tol_dual: spec.solver.tol,
        ..Default::default()
    }
}

/// Runs `method` on one instance and scores the raw matrix estimate.
/// Errors, infeasibility and non-finite output count as failures.
pub fn run_method(
    method: Method,
    ens: &SensingEnsemble,
    inst: &SparseInstance,
    spec: &ExperimentSpec,
) -> TrialOutcome {
    let solved: Result<(Matrix, SolveStatus)> = match method {
        Method::TwoStage => {
            let cfg = TwoStageConfig::with_tolerance(spec.solver.tol, spec.solver.max_iters);
            recover_two_stage(ens, &inst.y, inst.k, inst.epsilon, &cfg).map(|r| {
                let st = r.status();
                (r.x_hat_matrix, st)
            })
        }
        Method::Sdp => solve_sdp_l1(ens, &inst.y, &baseline_config(spec, inst, 0.0)).map(|r| (r.x_hat, r.status)),
        Method::SdpL1 => solve_sdp_l1(ens, &inst.y, &baseline_config(spec, inst, spec.solver.sdp_l1_lambda))
            .map(|r| (r.x_hat, r.status)),
        Method::L1 => solve_l1_only(ens, &inst.y, &baseline_config(spec, inst, 0.0)).map(|r| (r.x_hat, r.status)),
    };
    match solved {
        Ok((x, status)) => {
            let err = relative_matrix_error(&x, &inst.lift).unwrap_or(f64::INFINITY);
            let failed = status == SolveStatus::Infeasible || !err.is_finite();
            TrialOutcome {
                rel_error: if failed { f64::INFINITY } else { err },
                estimate: Some(x),
                status,
                failed,
            }
        }
        Err(e) => {
            debug!("{method} failed: {e}");
            TrialOutcome {
                estimate: None,
                status: SolveStatus::MaxIterations,
                rel_error: f64::INFINITY,
                failed: true,
            }
        }
    }
}

/// Builds the ensemble and instance of one trial.
pub fn trial_instance(spec: &ExperimentSpec, k: usize, m: usize, n: usize, seed: u64) -> Result<(SensingEnsemble, SparseInstance)> {
    let ens = make_ensemble(spec.d, m, n, seed, PsiKind::GaussianScaled)?;
    let inst = generate_instance(&ens, k, spec.noise_sigma, seed)?;
    Ok((ens, inst))
}

/// Runs every `(method, k, grid point, trial)` combination. Trials run in
/// parallel; results are assembled by index, so the report does not depend
/// on scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    if spec.d >= FULL_D {
        warn!("d = {} is full scale; baseline solves on {}x{} matrices are slow", spec.d, spec.d, spec.d);
    }
    struct Job {
        k: usize,
        g: usize,
        m: usize,
        n: usize,
        trial: usize,
        seed: u64,
    }
    let mut jobs = Vec::new();
    for &k in &spec.k_list {
        for (g, point) in spec.grid.iter().enumerate() {
            let (m, n) = point.resolve(spec.d, k)?;
            for trial in 0..spec.trials {
                jobs.push(Job {
                    k,
                    g,
                    m,
                    n,
                    trial,
                    seed: spec.trial_seed(k, g, trial),
                });
            }
        }
    }
    // One instance per job, shared by every method.
    let outcomes: Vec<Vec<(f64, bool, bool)>> = jobs
        .par_iter()
        .map(|job| match trial_instance(spec, job.k, job.m, job.n, job.seed) {
            Ok((ens, inst)) => spec
                .methods
                .iter()
                .map(|&method| {
                    let o = run_method(method, &ens, &inst, spec);
                    debug!(
                        "{method} k={} m={} n={} trial={} err={:.3e} {:?}",
                        job.k, job.m, job.n, job.trial, o.rel_error, o.status
                    );
                    (o.rel_error, o.failed, !o.failed && !o.status.is_converged())
                })
                .collect(),
            Err(e) => {
                debug!("instance generation failed: {e}");
                vec![(f64::INFINITY, true, false); spec.methods.len()]
            }
        })
        .collect();

    let mut cells = Vec::new();
    for (mi, &method) in spec.methods.iter().enumerate() {
        for &k in &spec.k_list {
            for g in 0..spec.grid.len() {
                let idx: Vec<usize> = (0..jobs.len()).filter(|&j| jobs[j].k == k && jobs[j].g == g).collect();
                let errors: Vec<f64> = idx.iter().map(|&j| outcomes[j][mi].0).collect();
                let failures = idx.iter().filter(|&&j| outcomes[j][mi].1).count();
                let unconverged = idx.iter().filter(|&&j| outcomes[j][mi].2).count();
                cells.push(CellReport {
                    method,
                    k,
                    grid_index: g,
                    m: jobs[idx[0]].m,
                    n: jobs[idx[0]].n,
                    quantile: empirical_quantile(&errors, spec.quantile_q)?,
                    mean: errors.iter().sum::<f64>() / errors.len() as f64,
                    seeds: idx.iter().map(|&j| jobs[j].seed).collect(),
                    errors,
                    failures,
                    unconverged,
                    trials: spec.trials,
                });
            }
        }
    }
    Ok(ExperimentReport { spec: spec.clone(), cells })
}

/// `out.csv` → `out.raw.csv`.
pub fn raw_csv_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.raw.csv"))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CprError + '_ {
    move |source| CprError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the aggregate table to `path` and the per-trial values to
/// [`raw_csv_path`]`(path)`.
pub fn emit_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut agg = csv::Writer::from_path(path).map_err(csv_err(path))?;
    agg.write_record(["method", "k", "m", "n", "q", "quantile", "mean", "failures", "trials"])
        .map_err(csv_err(path))?;
    let q = report.spec.quantile_q;
    for c in &report.cells {
        agg.write_record([
            c.method.tag().to_string(),
            c.k.to_string(),
            c.m.to_string(),
            c.n.to_string(),
            q.to_string(),
            c.quantile.to_string(),
            c.mean.to_string(),
            c.failures.to_string(),
            c.trials.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    agg.flush().map_err(|source| CprError::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let raw_path = raw_csv_path(path);
    let mut raw = csv::Writer::from_path(&raw_path).map_err(csv_err(&raw_path))?;
    raw.write_record(["method", "k", "m", "n", "trial", "seed", "rel_error"])
        .map_err(csv_err(&raw_path))?;
    for c in &report.cells {
        for (t, (e, s)) in c.errors.iter().zip(&c.seeds).enumerate() {
            raw.write_record([
                c.method.tag().to_string(),
                c.k.to_string(),
                c.m.to_string(),
                c.n.to_string(),
                t.to_string(),
                s.to_string(),
                e.to_string(),
            ])
            .map_err(csv_err(&raw_path))?;
        }
    }
    raw.flush().map_err(|source| CprError::Io { path: raw_path, source })
}

/// Writes the full report (spec echo, raw values, seeds) as JSON.
pub fn emit_json(report: &ExperimentReport, path: &Path) -> Result<()> {
    let io = |source| CprError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = BufWriter::new(File::create(path).map_err(io)?);
    f.write_all(report.to_json()?.as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.9).unwrap(), 9.0);
        assert_eq!(empirical_quantile(&[3.5; 7], 0.3).unwrap(), 3.5);
        assert_eq!(empirical_quantile(&[1.0, 2.0, f64::INFINITY], 0.9).unwrap(), f64::INFINITY);
        assert!(empirical_quantile(&[], 0.5).is_err());
        assert!(empirical_quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn quantile_rank_survives_rounding() {
        // 0.9 · 100 is 90.00000000000001 in floating point.
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.9).unwrap(), 90.0);
    }

    #[test]
    fn size_rules() {
        let g = GridPoint::new(SizeRule::LogRule, SizeRule::MulM(3.0));
        // 2·2·(1 + ln 16) = 15.09.
        assert_eq!(g.resolve(32, 2).unwrap(), (16, 48));
        let g = GridPoint::new(SizeRule::MulK(8.0), SizeRule::MulK(24.0));
        assert_eq!(g.resolve(64, 3).unwrap(), (24, 72));
        let g = GridPoint::new(SizeRule::MulM(2.0), SizeRule::Explicit(4));
        assert!(g.resolve(64, 3).is_err());
        assert_eq!(GridPoint::new(SizeRule::LogRule, SizeRule::MulM(3.0)).resolve(64, 8).unwrap().0, 50);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ExperimentSpec::experiment2(64);
        let back = ExperimentSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(spec, back);
        let text = spec.to_json().unwrap();
        assert!(text.contains("\"log_rule\"") && text.contains("\"mul_m\""));
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::experiment1(64);
        assert!(spec.validate().is_ok());
        spec.k_list = vec![65];
        assert!(spec.validate().is_err());
        spec = ExperimentSpec::experiment1(64);
        spec.quantile_q = 1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn trial_seeds_ignore_method_and_separate_cells() {
        let spec = ExperimentSpec::experiment1(64);
        assert_ne!(spec.trial_seed(2, 0, 0), spec.trial_seed(2, 0, 1));
        assert_ne!(spec.trial_seed(2, 0, 0), spec.trial_seed(4, 0, 0));
        assert_ne!(spec.trial_seed(2, 0, 0), spec.trial_seed(2, 1, 0));
    }

    #[test]
    fn raw_path_is_sibling() {
        assert_eq!(raw_csv_path(Path::new("/tmp/a/out.csv")), PathBuf::from("/tmp/a/out.raw.csv"));
    }
}
