//! Consensus ADMM over matrix-valued blocks.
//!
//! Solves `min Σ_i f_i(X)` by giving each term its own copy `X_i` and driving
//! all copies to a common `Z`:
//!
//! ```text
//! X_i ← prox_{f_i/ρ}(Z − U_i)
//! Z   ← mean_i(X_i + U_i)
//! U_i ← U_i + X_i − Z
//! ```
//!
//! Each solver in the crate supplies its terms as [`ProxBlock`]s whose
//! proximal maps are closed form.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CprError, Result};
use crate::linalg::Matrix;

/// Outcome of an iterative solve. Non-convergence is data, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// The constraint set is empty; the returned point is a least-squares
    /// surrogate.
    Infeasible,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::Converged
    }
}

pub trait ProxBlock {
    /// `argmin_X f(X) + (ρ/2)‖X − V‖_F²`.
    fn prox(&self, v: &Matrix, rho: f64) -> Matrix;
}

impl<F: Fn(&Matrix, f64) -> Matrix> ProxBlock for F {
    fn prox(&self, v: &Matrix, rho: f64) -> Matrix {
        self(v, rho)
    }
}

/// One row of the per-iteration diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    /// Stage objective (trace, ℓ1 norm, ...) at the reported iterate.
    pub objective: f64,
    pub feas_gap: f64,
    /// `√(N‖ΔZ‖² + Σ‖ΔU_i‖²)`; non-increasing for a fixed penalty.
    pub merit: f64,
    pub rho: f64,
}

/// Writes a diagnostics stream as CSV. `objective_name` names the objective
/// column (`trace` for the low-rank stage, `l1` for the sparse stage).
pub fn write_history_csv(path: &Path, objective_name: &str, history: &[IterRecord]) -> Result<()> {
    let io_err = |source| CprError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    writeln!(f, "iter,primal_res,dual_res,{objective_name},feas_gap").map_err(io_err)?;
    for r in history {
        writeln!(
            f,
            "{},{:e},{:e},{:e},{:e}",
            r.iter, r.primal_res, r.dual_res, r.objective, r.feas_gap
        )
        .map_err(io_err)?;
    }
    f.flush().map_err(io_err)
}

#[derive(Debug, Clone, Copy)]
pub struct AdmmSettings {
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub rho: f64,
    pub adaptive_rho: bool,
    pub record_history: bool,
}

#[derive(Debug, Clone)]
pub struct AdmmOutput {
    pub blocks: Vec<Matrix>,
    pub consensus: Matrix,
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub rho: f64,
    pub converged: bool,
    /// Unscaled duals `ρ U_i`; at a solution `−ρ U_i ∈ ∂f_i(X_i)`.
    pub duals: Vec<Matrix>,
    pub history: Vec<IterRecord>,
}

const ADAPT_EVERY: usize = 10;
/// Penalty changes happen every `ADAPT_EVERY` iterations up to this point and
/// afterwards only at `2^j · ADAPT_UNTIL`, so the penalty is eventually
/// constant over ever longer stretches.
const ADAPT_UNTIL: usize = 1000;
const ADAPT_RATIO: f64 = 10.0;
const ADAPT_FACTOR: f64 = 2.0;

fn adapt_now(it: usize) -> bool {
    if it <= ADAPT_UNTIL {
        it.is_multiple_of(ADAPT_EVERY)
    } else {
        it.is_multiple_of(ADAPT_UNTIL) && (it / ADAPT_UNTIL).is_power_of_two()
    }
}

/// Runs consensus ADMM from `z0`. `monitor(blocks, z)` returns
/// `(objective, feas_gap)` for the diagnostics stream and is only called when
/// history is recorded.
pub fn consensus_admm(
    blocks: &[&dyn ProxBlock],
    z0: Matrix,
    settings: &AdmmSettings,
    monitor: &dyn Fn(&[Matrix], &Matrix) -> (f64, f64),
) -> AdmmOutput {
    consensus_admm_until(blocks, z0, settings, monitor, &|_| true)
}

/// As [`consensus_admm`], but convergence is only declared once `accept`
/// also holds for the current block iterates.
pub fn consensus_admm_until(
    blocks: &[&dyn ProxBlock],
    z0: Matrix,
    settings: &AdmmSettings,
    monitor: &dyn Fn(&[Matrix], &Matrix) -> (f64, f64),
    accept: &dyn Fn(&[Matrix]) -> bool,
) -> AdmmOutput {
    let nb = blocks.len();
    let nbf = nb as f64;
    let mut rho = settings.rho;
    let mut z = z0;
    let mut u: Vec<Matrix> = vec![Matrix::zeros(z.nrows(), z.ncols()); nb];
    let mut x: Vec<Matrix> = vec![z.clone(); nb];
    let mut history = Vec::new();
    let mut primal_res = f64::INFINITY;
    let mut dual_res = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=settings.max_iters.max(1) {
        iterations = it;
        for (i, blk) in blocks.iter().enumerate() {
            x[i] = blk.prox(&(&z - &u[i]), rho);
        }
        let mut z_new = Matrix::zeros(z.nrows(), z.ncols());
        for i in 0..nb {
            z_new += &x[i];
            z_new += &u[i];
        }
        z_new /= nbf;

        let mut r_sq = 0.0;
        let mut du_sq = 0.0;
        let mut x_sq = 0.0;
        let mut u_sq = 0.0;
        for i in 0..nb {
            let diff = &x[i] - &z_new;
            r_sq += diff.norm_squared();
            du_sq += diff.norm_squared();
            u[i] += &diff;
            x_sq += x[i].norm_squared();
            u_sq += u[i].norm_squared();
        }
        let dz_sq = (&z_new - &z).norm_squared();
        z = z_new;

        primal_res = r_sq.sqrt();
        dual_res = rho * (nbf * dz_sq).sqrt();
        let eps_pri = settings.tol_primal * (1.0 + x_sq.sqrt().max(nbf.sqrt() * z.norm()));
        let eps_dual = settings.tol_dual * (1.0 + rho * u_sq.sqrt());

        if settings.record_history {
            let (objective, feas_gap) = monitor(&x, &z);
            history.push(IterRecord {
                iter: it,
                primal_res,
                dual_res,
                objective,
                feas_gap,
                merit: (nbf * dz_sq + du_sq).sqrt(),
                rho,
            });
        }

        if primal_res <= eps_pri && dual_res <= eps_dual && accept(&x) {
            converged = true;
            break;
        }

        if settings.adaptive_rho && adapt_now(it) {
            // Residual balancing; the scaled duals follow the penalty.
            let scale = if primal_res > ADAPT_RATIO * dual_res {
                ADAPT_FACTOR
            } else if dual_res > ADAPT_RATIO * primal_res {
                1.0 / ADAPT_FACTOR
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                for ui in u.iter_mut() {
                    *ui /= scale;
                }
            }
        }
    }

    let duals = u.into_iter().map(|ui| ui * rho).collect();
    AdmmOutput {
        duals,
        blocks: x,
        consensus: z,
        iterations,
        primal_res,
        dual_res,
        rho,
        converged,
        history,
    }
}
