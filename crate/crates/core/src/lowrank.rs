//! First stage: trace minimization over the PSD cone with an ℓ2-ball data
//! constraint,
//!
//! ```text
//! minimize trace(B)  subject to  B ⪰ 0,  ‖W(B) − y‖₂ ≤ ε,
//! ```
//!
//! and its regularized least-squares counterpart.

use serde::{Deserialize, Serialize};

use crate::admm::{consensus_admm_until, AdmmSettings, IterRecord, ProxBlock, SolveStatus};
use crate::error::{shape_err, CprError, Result};
use crate::fidelity::{adjoint_preimage, FidelityBall, MeasurementMap, QuadraticMap};
use crate::linalg::{lambda_min, sym_eigen, symmetrize, Matrix, Vector};
use crate::measurement::SensingEnsemble;
use crate::proxgrad::{mfista, ProxGradProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowRankSolveConfig {
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub penalty_rho: f64,
    pub adaptive_rho: bool,
    /// Radius of the data-fidelity ball.
    pub epsilon: f64,
    pub record_history: bool,
}

impl Default for LowRankSolveConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            penalty_rho: 1.0,
            adaptive_rho: true,
            epsilon: 0.0,
            record_history: false,
        }
    }
}

impl LowRankSolveConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.max_iters == 0 {
            return Err(CprError::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !positive(self.tol_primal) || !positive(self.tol_dual) || !positive(self.penalty_rho) {
            return Err(CprError::InvalidArgument(
                "tolerances and penalty must be positive and finite".into(),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(CprError::InvalidArgument(format!(
                "epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankResult {
    #[serde(skip)]
    pub b_hat: Matrix,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `max(0, ‖W(B̂) − y‖₂ − ε)`.
    pub feasibility_gap: f64,
    pub trace_value: f64,
    pub min_eigenvalue: f64,
    pub status: SolveStatus,
    /// `trace(B̂)` minus a certified dual lower bound (trace minimization
    /// only).
    pub duality_gap: Option<f64>,
    #[serde(skip)]
    pub history: Vec<IterRecord>,
}

/// Frobenius-nearest PSD matrix: negative eigenvalues of `(M + Mᵀ)/2` are
/// clamped to zero.
pub fn project_psd(m: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(m)?;
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= vals[j];
    }
    Ok(symmetrize(&(scaled * v.transpose())))
}

/// Projection of `v` onto the ball of the given radius around `center`.
pub fn project_l2_ball(v: &Vector, center: &Vector, radius: f64) -> Vector {
    assert_eq!(v.len(), center.len(), "project_l2_ball: length mismatch");
    let diff = v - center;
    let dist = diff.norm();
    if dist <= radius {
        v.clone()
    } else {
        center + diff * (radius / dist)
    }
}

fn check_inputs(ens: &SensingEnsemble, y: &Vector) -> Result<()> {
    if y.len() != ens.n {
        return Err(shape_err("lowrank_stage", ens.n.to_string(), y.len().to_string()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(CprError::InvalidArgument("measurements must be finite".into()));
    }
    Ok(())
}

/// Prox of `trace + indicator(PSD)`.
struct TracePsd;

impl ProxBlock for TracePsd {
    fn prox(&self, v: &Matrix, rho: f64) -> Matrix {
        let shifted = v - Matrix::identity(v.nrows(), v.ncols()) / rho;
        // A failed eigensolve leaves a NaN iterate, which the caller reports.
        project_psd(&shifted).unwrap_or_else(|_| Matrix::from_element(v.nrows(), v.ncols(), f64::NAN))
    }
}

struct BallBlock<'a, M>(&'a FidelityBall<M>);

impl<M: MeasurementMap> ProxBlock for BallBlock<'_, M> {
    fn prox(&self, v: &Matrix, _rho: f64) -> Matrix {
        self.0.project(v)
    }
}

/// Allowed excess of `‖W(B̂) − y‖₂` over `ε` at convergence:
/// `10 · tol_primal · max(1, ‖y‖₂)`.
pub fn feasibility_slack(cfg: &LowRankSolveConfig, y: &Vector) -> f64 {
    10.0 * cfg.tol_primal * y.norm().max(1.0)
}

/// Lower bound on the optimal trace from a dual candidate `ν`:
/// `⟨ν, y⟩ − ε‖ν‖` after scaling `ν` so that `W*(ν) ⪯ I`.
fn dual_lower_bound(
    set: &FidelityBall<QuadraticMap>,
    y: &Vector,
    epsilon: f64,
    w_adj_nu: &Matrix,
) -> Option<f64> {
    let map = &set.map;
    let nu = adjoint_preimage(map, w_adj_nu);
    let top = sym_eigen(&map.adjoint(&nu)).ok()?.eigenvalues.max();
    let nu = if top > 1.0 { nu / top } else { nu };
    Some(nu.dot(y) - epsilon * nu.norm())
}

/// Solves the trace-minimization program by two-block consensus ADMM with
/// exact projections onto the PSD cone and onto the fidelity ball.
pub fn solve_trace_min(ens: &SensingEnsemble, y: &Vector, cfg: &LowRankSolveConfig) -> Result<LowRankResult> {
    cfg.validate()?;
    check_inputs(ens, y)?;
    let map = QuadraticMap::new(ens.w_stack.clone())?;
    let set = FidelityBall::new(map, y.clone(), cfg.epsilon);
    let ball = BallBlock(&set);
    let psd = TracePsd;
    let settings = AdmmSettings {
        max_iters: cfg.max_iters,
        tol_primal: cfg.tol_primal,
        tol_dual: cfg.tol_dual,
        rho: cfg.penalty_rho,
        adaptive_rho: cfg.adaptive_rho,
        record_history: cfg.record_history,
    };
    let monitor = |x: &[Matrix], _z: &Matrix| {
        let b = &x[1];
        (b.trace(), (set.residual(b) - cfg.epsilon).max(0.0))
    };
    // The returned PSD copy must itself meet the data constraint.
    let slack = feasibility_slack(cfg, y);
    let accept = |x: &[Matrix]| set.residual(&x[1]) <= cfg.epsilon + slack;
    let blocks: [&dyn ProxBlock; 2] = [&ball, &psd];
    let out = consensus_admm_until(&blocks, Matrix::zeros(ens.m, ens.m), &settings, &monitor, &accept);

    let b_hat = symmetrize(&out.blocks[1]);
    if b_hat.iter().any(|v| !v.is_finite()) {
        return Err(CprError::Numerical("low-rank stage produced non-finite iterate".into()));
    }
    let status = if set.is_infeasible() {
        SolveStatus::Infeasible
    } else if out.converged {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    // −ρU_psd ∈ I − S with S ⪰ 0, and the duals cancel, so ρU_ball ≈ W*(ν).
    let dual_ball = out.duals[0].clone();
    let trace_value = b_hat.trace();
    let duality_gap = if status == SolveStatus::Infeasible {
        None
    } else {
        dual_lower_bound(&set, y, cfg.epsilon, &dual_ball).map(|lb| trace_value - lb)
    };
    Ok(LowRankResult {
        feasibility_gap: (set.residual(&b_hat) - cfg.epsilon).max(0.0),
        min_eigenvalue: lambda_min(&b_hat)?,
        trace_value,
        b_hat,
        iterations: out.iterations,
        primal_residual: out.primal_res,
        dual_residual: out.dual_res,
        status,
        duality_gap,
        history: out.history,
    })
}

/// Solves `min ½‖W(B) − y‖² + λ‖B‖_*` over `B ⪰ 0` (where the nuclear norm is
/// the trace) by monotone accelerated projected gradient.
///
/// `primal_residual` holds the gradient-mapping norm at the returned point;
/// `dual_residual` holds the final relative objective decrease.
pub fn solve_trace_reg(
    ens: &SensingEnsemble,
    y: &Vector,
    lambda: f64,
    cfg: &LowRankSolveConfig,
) -> Result<LowRankResult> {
    cfg.validate()?;
    check_inputs(ens, y)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CprError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let map = QuadraticMap::new(ens.w_stack.clone())?;
    let lipschitz = map.gram_eigenvalues().max().max(f64::MIN_POSITIVE);
    let step = 0.99 / lipschitz;
    let smooth = |b: &Matrix| {
        let r = map.apply(b) - y;
        (0.5 * r.norm_squared(), map.adjoint(&r))
    };
    let nonsmooth = |b: &Matrix| lambda * b.trace();
    let prox = |v: &Matrix, tau: f64| {
        let shifted = v - Matrix::identity(v.nrows(), v.ncols()) * (tau * lambda);
        project_psd(&shifted).unwrap_or_else(|_| Matrix::from_element(v.nrows(), v.ncols(), f64::NAN))
    };
    let problem = ProxGradProblem {
        smooth: &smooth,
        nonsmooth: &nonsmooth,
        prox: &prox,
    };
    let out = mfista(&problem, Matrix::zeros(ens.m, ens.m), step, cfg.max_iters, cfg.tol_primal);
    let b_hat = symmetrize(&out.x);
    if b_hat.iter().any(|v| !v.is_finite()) {
        return Err(CprError::Numerical("regularized low-rank solve produced non-finite iterate".into()));
    }
    let obj = &out.objective;
    let last_drop = if obj.len() >= 2 {
        let a = obj[obj.len() - 2];
        let b = obj[obj.len() - 1];
        (a - b) / (1.0 + a.abs())
    } else {
        0.0
    };
    let residual = (map.apply(&b_hat) - y).norm();
    let history = if cfg.record_history {
        obj.iter()
            .enumerate()
            .skip(1)
            .map(|(i, &f)| IterRecord {
                iter: i,
                primal_res: f64::NAN,
                dual_res: f64::NAN,
                objective: f,
                feas_gap: f64::NAN,
                merit: f,
                rho: f64::NAN,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(LowRankResult {
        feasibility_gap: (residual - cfg.epsilon).max(0.0),
        min_eigenvalue: lambda_min(&b_hat)?,
        trace_value: b_hat.trace(),
        b_hat,
        iterations: out.iterations,
        primal_residual: out.gradient_mapping,
        dual_residual: last_drop,
        status: if out.converged {
            SolveStatus::Converged
        } else {
            SolveStatus::MaxIterations
        },
        duality_gap: None,
        history,
    })
}
