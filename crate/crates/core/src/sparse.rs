//! Second stage: entrywise ℓ1 minimization
//!
//! ```text
//! minimize ‖X‖₁  subject to  ‖Ψ X Ψᵀ − B̂‖_F ≤ radius
//! ```
//!
//! with `radius = C ε / √n`, and the ℓ1-regularized least-squares variant.
//! Neither symmetry nor PSD-ness of `X` is imposed here; post-processing
//! restores both.

use serde::{Deserialize, Serialize};

use crate::admm::{consensus_admm, AdmmSettings, IterRecord, ProxBlock, SolveStatus};
use crate::error::{shape_err, CprError, Result};
use crate::fidelity::{adjoint_preimage, CongruenceMap, FidelityBall, MeasurementMap};
use crate::linalg::{l1_norm, max_abs, sigma_max, Matrix, Vector};
use crate::proxgrad::{mfista, ProxGradProblem};

/// Power-iteration settings for `σ_max(Ψ)`.
pub const SIGMA_TOL: f64 = 1e-8;
pub const SIGMA_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseSolveConfig {
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub penalty_rho: f64,
    pub adaptive_rho: bool,
    /// Constraint level `C ε / √n`.
    pub radius: f64,
    /// Proximal-gradient step; `None` selects `0.99 / σ_max(Ψ)⁴`.
    pub step_tau: Option<f64>,
    /// The constant `C` used by [`SparseSolveConfig::set_radius_from_noise`].
    pub stage2_c: f64,
    pub record_history: bool,
}

impl Default for SparseSolveConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            penalty_rho: 1.0,
            adaptive_rho: true,
            radius: 0.0,
            step_tau: None,
            stage2_c: 2.0,
            record_history: false,
        }
    }
}

impl SparseSolveConfig {
    /// Sets `radius = stage2_c · ε / √n`.
    pub fn set_radius_from_noise(&mut self, epsilon: f64, n: usize) {
        self.radius = self.stage2_c * epsilon / (n as f64).sqrt();
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
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(CprError::InvalidArgument(format!(
                "radius must be finite and nonnegative, got {}",
                self.radius
            )));
        }
        if !positive(self.stage2_c) {
            return Err(CprError::InvalidArgument("stage2_c must be positive".into()));
        }
        if let Some(t) = self.step_tau {
            if !positive(t) {
                return Err(CprError::InvalidArgument("step_tau must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseResult {
    #[serde(skip)]
    pub x_hat_matrix: Matrix,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub l1_value: f64,
    /// `max(0, ‖Ψ X̂ Ψᵀ − B̂‖_F − radius)`.
    pub feasibility_gap: f64,
    pub status: SolveStatus,
    /// `l1_value` minus a certified lower bound on the optimum (constrained
    /// solve only).
    pub duality_gap: Option<f64>,
    #[serde(skip)]
    pub history: Vec<IterRecord>,
}

/// Entrywise `sign(m) · max(|m| − t, 0)`.
pub fn soft_threshold(m: &Matrix, t: f64) -> Matrix {
    debug_assert!(t >= 0.0);
    m.map(|v| {
        let a = v.abs();
        if a > t {
            v.signum() * (a - t)
        } else {
            0.0
        }
    })
}

fn check_shapes(psi: &Matrix, b_hat: &Matrix) -> Result<()> {
    let m = psi.nrows();
    if b_hat.shape() != (m, m) {
        return Err(shape_err(
            "sparse_stage",
            format!("{m}x{m}"),
            format!("{}x{}", b_hat.nrows(), b_hat.ncols()),
        ));
    }
    if !crate::linalg::all_finite(b_hat) || !crate::linalg::all_finite(psi) {
        return Err(CprError::InvalidArgument("sparse stage inputs must be finite".into()));
    }
    Ok(())
}

struct BallBlock<'a>(&'a FidelityBall<CongruenceMap>);

impl ProxBlock for BallBlock<'_> {
    fn prox(&self, v: &Matrix, _rho: f64) -> Matrix {
        self.0.project(v)
    }
}

struct L1Block {
    weight: f64,
}

impl ProxBlock for L1Block {
    fn prox(&self, v: &Matrix, rho: f64) -> Matrix {
        soft_threshold(v, self.weight / rho)
    }
}

/// Lower bound on the optimal ℓ1 value from a dual candidate `ν`:
/// `⟨ν, b⟩ − r‖ν‖` after scaling `ν` so that `‖Ψᵀ ν Ψ‖_∞ ≤ 1`. Both signs of
/// `ν` are tried, and `0` is always a bound.
fn dual_lower_bound(set: &FidelityBall<CongruenceMap>, adj_nu: &Matrix) -> f64 {
    let nu = adjoint_preimage(&set.map, adj_nu);
    let top = max_abs(&set.map.adjoint(&nu));
    let nu = if top > 1.0 { nu / top } else { nu };
    let inner = nu.dot(set.target());
    let pen = set.radius() * nu.norm();
    (inner - pen).max(-inner - pen).max(0.0)
}

/// Solves the constrained ℓ1 program by two-block consensus ADMM: an exact
/// projection onto the Frobenius-ball constraint (diagonal in the Kronecker
/// eigenbasis of `ΨΨᵀ`) and entrywise soft-thresholding. The soft-threshold
/// copy is returned, so exact zeros are preserved.
pub fn solve_l1_min(psi: &Matrix, b_hat: &Matrix, cfg: &SparseSolveConfig) -> Result<SparseResult> {
    cfg.validate()?;
    check_shapes(psi, b_hat)?;
    let d = psi.ncols();
    let map = CongruenceMap::new(psi.clone())?;
    let target = Vector::from_column_slice(b_hat.as_slice());
    let set = FidelityBall::new(map, target, cfg.radius);
    let ball = BallBlock(&set);
    let l1 = L1Block { weight: 1.0 };
    let settings = AdmmSettings {
        max_iters: cfg.max_iters,
        tol_primal: cfg.tol_primal,
        tol_dual: cfg.tol_dual,
        rho: cfg.penalty_rho,
        adaptive_rho: cfg.adaptive_rho,
        record_history: cfg.record_history,
    };
    let monitor = |x: &[Matrix], _z: &Matrix| {
        let xs = &x[1];
        (l1_norm(xs), (set.residual(xs) - cfg.radius).max(0.0))
    };
    let blocks: [&dyn ProxBlock; 2] = [&ball, &l1];
    let out = consensus_admm(&blocks, Matrix::zeros(d, d), &settings, &monitor);
    let x_hat = out.blocks[1].clone();
    if x_hat.iter().any(|v| !v.is_finite()) {
        return Err(CprError::Numerical("sparse stage produced non-finite iterate".into()));
    }
    let status = if set.is_infeasible() {
        SolveStatus::Infeasible
    } else if out.converged {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    let l1_value = l1_norm(&x_hat);
    let duality_gap = (status != SolveStatus::Infeasible).then(|| l1_value - dual_lower_bound(&set, &out.duals[0]));
    Ok(SparseResult {
        l1_value,
        duality_gap,
        feasibility_gap: (set.residual(&x_hat) - cfg.radius).max(0.0),
        x_hat_matrix: x_hat,
        iterations: out.iterations,
        primal_residual: out.primal_res,
        dual_residual: out.dual_res,
        status,
        history: out.history,
    })
}

/// Resolves the proximal-gradient step, enforcing `τ σ_max(Ψ)⁴ ≤ 1`.
pub fn resolve_step(psi: &Matrix, step_tau: Option<f64>) -> Result<f64> {
    let s4 = sigma_max(psi, SIGMA_TOL, SIGMA_MAX_ITERS).powi(4);
    match step_tau {
        None => Ok(if s4 > 0.0 { 0.99 / s4 } else { 1.0 }),
        Some(t) if t * s4 <= 1.0 => Ok(t),
        Some(t) => Err(CprError::InvalidArgument(format!(
            "step_tau = {t} exceeds 1/σ_max(Ψ)⁴ = {}",
            1.0 / s4
        ))),
    }
}

/// Solves `min ½‖Ψ X Ψᵀ − B̂‖_F² + λ‖X‖₁` by monotone accelerated proximal
/// gradient. `primal_residual` is the gradient-mapping norm at the returned
/// point.
pub fn solve_l1_reg(psi: &Matrix, b_hat: &Matrix, lambda: f64, cfg: &SparseSolveConfig) -> Result<SparseResult> {
    cfg.validate()?;
    check_shapes(psi, b_hat)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CprError::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let d = psi.ncols();
    let step = resolve_step(psi, cfg.step_tau)?;
    let map = CongruenceMap::new(psi.clone())?;
    let smooth = |x: &Matrix| {
        let r = map.forward(x) - b_hat;
        (0.5 * r.norm_squared(), map.backward(&r))
    };
    let nonsmooth = |x: &Matrix| lambda * l1_norm(x);
    let prox = |v: &Matrix, tau: f64| soft_threshold(v, tau * lambda);
    let problem = ProxGradProblem {
        smooth: &smooth,
        nonsmooth: &nonsmooth,
        prox: &prox,
    };
    let out = mfista(&problem, Matrix::zeros(d, d), step, cfg.max_iters, cfg.tol_primal);
    let x_hat = out.x;
    let residual = (map.forward(&x_hat) - b_hat).norm();
    let obj = &out.objective;
    let last_drop = match obj.len() {
        0 | 1 => 0.0,
        len => (obj[len - 2] - obj[len - 1]) / (1.0 + obj[len - 2].abs()),
    };
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
                rho: out.last_step,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SparseResult {
        l1_value: l1_norm(&x_hat),
        feasibility_gap: (residual - cfg.radius).max(0.0),
        x_hat_matrix: x_hat,
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
