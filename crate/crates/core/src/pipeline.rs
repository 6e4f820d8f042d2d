//! The full two-stage recovery: low-rank stage, sparse stage, then
//! sparse projection, rank-one projection and signal extraction.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{Matrix, Vector};
use crate::lowrank::{solve_trace_min, LowRankResult, LowRankSolveConfig};
use crate::measurement::{SensingEnsemble, SparseInstance};
use crate::postprocess::{
    extract_signal, project_k_sparse, project_rank_one_psd, relative_matrix_error, relative_signal_error,
};
use crate::sparse::{solve_l1_min, SparseResult, SparseSolveConfig};
use crate::SolveStatus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct TwoStageConfig {
    /// Stage-1 settings; `epsilon` is overwritten with the noise bound.
    pub lowrank: LowRankSolveConfig,
    /// Stage-2 settings; `radius` is overwritten with `C ε / √n`.
    pub sparse: SparseSolveConfig,
    /// Replaces the noise bound used in the stage-2 radius.
    pub stage2_epsilon: Option<f64>,
}


impl TwoStageConfig {
    /// Same tolerance for both stages.
    pub fn with_tolerance(tol: f64, max_iters: usize) -> Self {
        let mut cfg = Self::default();
        cfg.lowrank.tol_primal = tol;
        cfg.lowrank.tol_dual = tol;
        cfg.lowrank.max_iters = max_iters;
        cfg.sparse.tol_primal = tol;
        cfg.sparse.tol_dual = tol;
        cfg.sparse.max_iters = max_iters;
        cfg
    }
}

/// Everything produced by one recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    #[serde(skip)]
    pub b_hat: Matrix,
    #[serde(skip)]
    pub x_hat_matrix: Matrix,
    #[serde(skip)]
    pub x_tilde_rank1: Matrix,
    #[serde(skip)]
    pub x_tilde_sparse: Matrix,
    pub x_hat_signal: Vec<f64>,
    pub support: Vec<usize>,
    /// `‖X̂ − X*‖_F / ‖X*‖_F` for the raw stage-2 estimate.
    pub rel_error_matrix: Option<f64>,
    /// Same metric for the post-processed estimate `x̂ x̂ᵀ`.
    pub rel_error_final: Option<f64>,
    /// `min_s ‖s x̂ − x*‖₂ / ‖x*‖₂`.
    pub rel_error_signal: Option<f64>,
    pub lowrank: LowRankResult,
    pub sparse: SparseResult,
    pub config: TwoStageConfig,
}

impl RecoveryResult {
    pub fn status(&self) -> SolveStatus {
        match (self.lowrank.status, self.sparse.status) {
            (SolveStatus::Converged, SolveStatus::Converged) => SolveStatus::Converged,
            (SolveStatus::Infeasible, _) | (_, SolveStatus::Infeasible) => SolveStatus::Infeasible,
            _ => SolveStatus::MaxIterations,
        }
    }

    pub fn signal(&self) -> Vector {
        Vector::from_vec(self.x_hat_signal.clone())
    }

    /// Fills in the error metrics against a known truth.
    pub fn score(&mut self, truth: &SparseInstance) -> Result<()> {
        self.rel_error_matrix = Some(relative_matrix_error(&self.x_hat_matrix, &truth.lift)?);
        self.rel_error_final = Some(relative_matrix_error(&self.x_tilde_rank1, &truth.lift)?);
        self.rel_error_signal = Some(relative_signal_error(&self.signal(), &truth.x_star)?);
        Ok(())
    }
}

/// Runs both stages and the default post-processing (sparse projection,
/// then rank-one PSD projection, then extraction).
pub fn recover_two_stage(
    ens: &SensingEnsemble,
    y: &Vector,
    k: usize,
    epsilon: f64,
    cfg: &TwoStageConfig,
) -> Result<RecoveryResult> {
    let mut lr_cfg = cfg.lowrank;
    lr_cfg.epsilon = epsilon;
    let lowrank = solve_trace_min(ens, y, &lr_cfg)?;

    let mut sp_cfg = cfg.sparse;
    sp_cfg.set_radius_from_noise(cfg.stage2_epsilon.unwrap_or(epsilon), ens.n);
    let sparse = solve_l1_min(&ens.psi, &lowrank.b_hat, &sp_cfg)?;

    let x_tilde_sparse = project_k_sparse(&sparse.x_hat_matrix, k)?;
    let (x_tilde_rank1, _, _) = project_rank_one_psd(&x_tilde_sparse)?;
    let signal = extract_signal(&x_tilde_rank1)?;
    let support = (0..signal.len()).filter(|&i| signal[i] != 0.0).collect();
    let mut config = *cfg;
    config.lowrank = lr_cfg;
    config.sparse = sp_cfg;
    Ok(RecoveryResult {
        b_hat: lowrank.b_hat.clone(),
        x_hat_matrix: sparse.x_hat_matrix.clone(),
        x_tilde_rank1,
        x_tilde_sparse,
        x_hat_signal: signal.iter().copied().collect(),
        support,
        rel_error_matrix: None,
        rel_error_final: None,
        rel_error_signal: None,
        lowrank,
        sparse,
        config,
    })
}

/// Convenience wrapper: recovers from an instance using its noise bound and
/// scores against its truth.
pub fn recover_instance(ens: &SensingEnsemble, inst: &SparseInstance, cfg: &TwoStageConfig) -> Result<RecoveryResult> {
    let mut res = recover_two_stage(ens, &inst.y, inst.k, inst.epsilon, cfg)?;
    res.score(inst)?;
    Ok(res)
}
