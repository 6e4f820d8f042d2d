//! Comparison methods operating directly on the lifted operator `A`:
//!
//! ```text
//! SDP + ℓ1:  minimize trace(X) + λ‖X‖₁  subject to  X ⪰ 0,  A(X) ∈ F
//! ℓ1 only:   minimize ‖X‖₁              subject to  A(X) ∈ F
//! ```
//!
//! where `F` is either `{y}` or the ball `‖A(X) − y‖₂ ≤ r`. With `λ = 0` the
//! first program is the plain SDP.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::admm::{consensus_admm, AdmmSettings, ProxBlock, SolveStatus};
use crate::error::{shape_err, CprError, Result};
use crate::fidelity::{FidelityBall, QuadraticMap};
use crate::linalg::{l1_norm, lambda_min, symmetrize, Matrix, Vector};
use crate::lowrank::project_psd;
use crate::measurement::SensingEnsemble;
use crate::sparse::soft_threshold;

/// Recovery methods compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TwoStage,
    Sdp,
    SdpL1,
    L1,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TwoStage, Method::Sdp, Method::SdpL1, Method::L1];

    pub fn tag(self) -> &'static str {
        match self {
            Method::TwoStage => "two_stage",
            Method::Sdp => "sdp",
            Method::SdpL1 => "sdp_l1",
            Method::L1 => "l1",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = CprError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s.trim())
            .ok_or_else(|| CprError::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    Equality,
    Ball(f64),
}

impl Fidelity {
    fn radius(self) -> f64 {
        match self {
            Fidelity::Equality => 0.0,
            Fidelity::Ball(r) => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Weight of the ℓ1 term; `0` gives the plain SDP.
    pub lambda: f64,
    pub fidelity: Fidelity,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub penalty_rho: f64,
    pub adaptive_rho: bool,
    /// Drops the soft-threshold block regardless of `lambda`.
    pub disable_l1_prox: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            fidelity: Fidelity::Equality,
            max_iters: 5000,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            penalty_rho: 1.0,
            adaptive_rho: true,
            disable_l1_prox: false,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CprError::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        let r = self.fidelity.radius();
        if !(r >= 0.0 && r.is_finite()) {
            return Err(CprError::InvalidArgument(format!("ball radius must be >= 0, got {r}")));
        }
        if self.max_iters == 0 {
            return Err(CprError::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !positive(self.tol_primal) || !positive(self.tol_dual) || !positive(self.penalty_rho) {
            return Err(CprError::InvalidArgument(
                "tolerances and penalty must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    #[serde(skip)]
    pub x_hat: Matrix,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    /// `max(0, ‖A(X̂) − y‖₂ − r)`.
    pub feasibility_gap: f64,
    pub min_eigenvalue: f64,
    pub status: SolveStatus,
    /// Every iterate of the returned block, when requested.
    #[serde(skip)]
    pub trajectory: Vec<Matrix>,
}

struct Fid<'a>(&'a FidelityBall<QuadraticMap>);

impl ProxBlock for Fid<'_> {
    fn prox(&self, v: &Matrix, _rho: f64) -> Matrix {
        self.0.project(v)
    }
}

struct TracePsd;

impl ProxBlock for TracePsd {
    fn prox(&self, v: &Matrix, rho: f64) -> Matrix {
        let shifted = v - Matrix::identity(v.nrows(), v.ncols()) / rho;
        project_psd(&shifted).unwrap_or_else(|_| Matrix::from_element(v.nrows(), v.ncols(), f64::NAN))
    }
}

struct L1 {
    weight: f64,
}

impl ProxBlock for L1 {
    fn prox(&self, v: &Matrix, rho: f64) -> Matrix {
        soft_threshold(v, self.weight / rho)
    }
}

fn fidelity_set(ens: &SensingEnsemble, y: &Vector, cfg: &BaselineConfig) -> Result<FidelityBall<QuadraticMap>> {
    cfg.validate()?;
    if y.len() != ens.n {
        return Err(shape_err("baselines", ens.n.to_string(), y.len().to_string()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(CprError::InvalidArgument("measurements must be finite".into()));
    }
    let map = QuadraticMap::new(ens.sensing_vectors())?;
    Ok(FidelityBall::new(map, y.clone(), cfg.fidelity.radius()))
}

fn settings(cfg: &BaselineConfig) -> AdmmSettings {
    AdmmSettings {
        max_iters: cfg.max_iters,
        tol_primal: cfg.tol_primal,
        tol_dual: cfg.tol_dual,
        rho: cfg.penalty_rho,
        adaptive_rho: cfg.adaptive_rho,
        record_history: false,
    }
}

fn finish(
    set: &FidelityBall<QuadraticMap>,
    x_hat: Matrix,
    out: &crate::admm::AdmmOutput,
    objective: f64,
    psd: bool,
) -> Result<BaselineResult> {
    if x_hat.iter().any(|v| !v.is_finite()) {
        return Err(CprError::Numerical("baseline produced non-finite iterate".into()));
    }
    let status = if set.is_infeasible() {
        SolveStatus::Infeasible
    } else if out.converged {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    Ok(BaselineResult {
        feasibility_gap: (set.residual(&x_hat) - set.radius()).max(0.0),
        min_eigenvalue: if psd { lambda_min(&x_hat)? } else { f64::NAN },
        objective,
        x_hat,
        iterations: out.iterations,
        primal_residual: out.primal_res,
        dual_residual: out.dual_res,
        status,
        trajectory: Vec::new(),
    })
}

/// Trace plus weighted ℓ1 minimization over the PSD cone by consensus ADMM
/// with a fidelity projection, a shifted PSD projection and (for `λ > 0`) a
/// soft-threshold block. The PSD copy is returned.
pub fn solve_sdp_l1(ens: &SensingEnsemble, y: &Vector, cfg: &BaselineConfig) -> Result<BaselineResult> {
    solve_sdp_l1_traced(ens, y, cfg, false)
}

/// As [`solve_sdp_l1`], optionally recording the PSD block after every
/// iteration in `trajectory`.
pub fn solve_sdp_l1_traced(
    ens: &SensingEnsemble,
    y: &Vector,
    cfg: &BaselineConfig,
    trace_iterates: bool,
) -> Result<BaselineResult> {
    let set = fidelity_set(ens, y, cfg)?;
    let fid = Fid(&set);
    let psd = TracePsd;
    let l1 = L1 { weight: cfg.lambda };
    let mut blocks: Vec<&dyn ProxBlock> = vec![&fid, &psd];
    if cfg.lambda > 0.0 && !cfg.disable_l1_prox {
        blocks.push(&l1);
    }
    let d = ens.d;
    let trajectory = RefCell::new(Vec::new());
    let mut s = settings(cfg);
    s.record_history = trace_iterates;
    let monitor = |x: &[Matrix], _z: &Matrix| {
        trajectory.borrow_mut().push(x[1].clone());
        (0.0, 0.0)
    };
    let out = consensus_admm(&blocks, Matrix::zeros(d, d), &s, &monitor);
    let x_hat = symmetrize(&out.blocks[1]);
    let objective = x_hat.trace() + cfg.lambda * l1_norm(&x_hat);
    let mut res = finish(&set, x_hat, &out, objective, true)?;
    res.trajectory = trajectory.into_inner();
    Ok(res)
}

/// Entrywise ℓ1 minimization over the lifted measurements, without PSD or
/// trace terms. The soft-threshold copy is returned.
pub fn solve_l1_only(ens: &SensingEnsemble, y: &Vector, cfg: &BaselineConfig) -> Result<BaselineResult> {
    let set = fidelity_set(ens, y, cfg)?;
    let fid = Fid(&set);
    let l1 = L1 { weight: 1.0 };
    let blocks: [&dyn ProxBlock; 2] = [&fid, &l1];
    let d = ens.d;
    let out = consensus_admm(&blocks, Matrix::zeros(d, d), &settings(cfg), &|_, _| (0.0, 0.0));
    let x_hat = out.blocks[1].clone();
    let objective = l1_norm(&x_hat);
    finish(&set, x_hat, &out, objective, false)
}
