//! Projections onto structured sets, signal extraction, and error metrics.
//!
//! Projecting an estimate onto a closed set that contains the truth can at
//! most double its distance to the truth, so both projections here keep the
//! error guarantees of the solver output.

use crate::error::{shape_err, CprError, Result};
use crate::linalg::{symmetrize, top_eigenpair, Matrix, Vector};

/// Frobenius-nearest rank-one PSD matrix `λ₁⁺ u₁u₁ᵀ`, where `(λ₁, u₁)` is
/// the top eigenpair of `(M + Mᵀ)/2` and `λ₁⁺ = max(λ₁, 0)`.
pub fn project_rank_one_psd(m: &Matrix) -> Result<(Matrix, f64, Vector)> {
    if m.nrows() != m.ncols() {
        return Err(shape_err(
            "project_rank_one_psd",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let (val, vec) = top_eigenpair(m)?;
    let val = val.max(0.0);
    Ok((&vec * vec.transpose() * val, val, vec))
}

/// Indices of the `k` largest row norms of `(M + Mᵀ)/2`, ties broken by the
/// lowest index, returned sorted.
pub fn select_support(m: &Matrix, k: usize) -> Vec<usize> {
    let s = symmetrize(m);
    let norms: Vec<f64> = s.row_iter().map(|r| r.norm()).collect();
    let mut idx: Vec<usize> = (0..norms.len()).collect();
    idx.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Keeps the `k × k` principal submatrix on [`select_support`] and zeroes
/// everything else.
pub fn project_k_sparse(m: &Matrix, k: usize) -> Result<Matrix> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(shape_err("project_k_sparse", "square matrix", format!("{}x{}", d, m.ncols())));
    }
    if k == 0 || k > d {
        return Err(CprError::InvalidArgument(format!("k={k} must lie in 1..={d}")));
    }
    let support = select_support(m, k);
    let mut keep = vec![false; d];
    for &i in &support {
        keep[i] = true;
    }
    Ok(Matrix::from_fn(d, d, |i, j| if keep[i] && keep[j] { m[(i, j)] } else { 0.0 }))
}

/// `√λ₁ · u₁` from the top eigenpair. The result is defined up to sign; the
/// sign is fixed so that the largest-magnitude entry is positive.
pub fn extract_signal(m_rank1: &Matrix) -> Result<Vector> {
    let (_, val, vec) = project_rank_one_psd(m_rank1)?;
    if val == 0.0 {
        return Ok(Vector::zeros(m_rank1.nrows()));
    }
    let mut x = vec * val.sqrt();
    let lead = x.iter().copied().fold(0.0_f64, |a, v| if v.abs() > a.abs() { v } else { a });
    if lead < 0.0 {
        x.neg_mut();
    }
    Ok(x)
}

/// `‖X̂ − X*‖_F / ‖X*‖_F`.
pub fn relative_matrix_error(x_hat: &Matrix, x_star: &Matrix) -> Result<f64> {
    if x_hat.shape() != x_star.shape() {
        return Err(shape_err(
            "relative_matrix_error",
            format!("{:?}", x_star.shape()),
            format!("{:?}", x_hat.shape()),
        ));
    }
    let den = x_star.norm();
    if den == 0.0 {
        return Err(CprError::InvalidArgument("reference matrix is zero".into()));
    }
    Ok((x_hat - x_star).norm() / den)
}

/// `min_{s = ±1} ‖s x̂ − x*‖₂ / ‖x*‖₂`.
pub fn relative_signal_error(x_hat: &Vector, x_star: &Vector) -> Result<f64> {
    if x_hat.len() != x_star.len() {
        return Err(shape_err(
            "relative_signal_error",
            x_star.len().to_string(),
            x_hat.len().to_string(),
        ));
    }
    let den = x_star.norm();
    if den == 0.0 {
        return Err(CprError::InvalidArgument("reference signal is zero".into()));
    }
    let plus = (x_hat - x_star).norm();
    let minus = (x_hat + x_star).norm();
    Ok(plus.min(minus) / den)
}

/// Both error metrics at once.
pub fn relative_errors(
    x_hat_matrix: &Matrix,
    x_star_matrix: &Matrix,
    x_hat: &Vector,
    x_star: &Vector,
) -> Result<(f64, f64)> {
    Ok((
        relative_matrix_error(x_hat_matrix, x_star_matrix)?,
        relative_signal_error(x_hat, x_star)?,
    ))
}
