//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CprError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn frob_inner(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Entrywise ℓ1 norm.
pub fn l1_norm(m: &Matrix) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Eigendecomposition of the symmetrized input.
pub fn sym_eigen(m: &Matrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !all_finite(m) {
        return Err(CprError::Numerical(
            "eigendecomposition of a matrix with non-finite entries".into(),
        ));
    }
    let s = symmetrize(m);
    let n = s.nrows();
    // Exact-zero rows and columns are split off first: nalgebra's QR sweep
    // can return infinite eigenvalues on matrices padded with zero blocks.
    let active: Vec<usize> = (0..n).filter(|&i| s.row(i).iter().any(|&v| v != 0.0)).collect();
    if active.len() == n {
        return dense_eigen(s);
    }
    let sub = dense_eigen(s.select_rows(&active).select_columns(&active))?;
    let mut values = Vector::zeros(n);
    let mut vectors = Matrix::zeros(n, n);
    for c in 0..active.len() {
        values[c] = sub.eigenvalues[c];
        for (r, &j) in active.iter().enumerate() {
            vectors[(j, c)] = sub.eigenvectors[(r, c)];
        }
    }
    for (c, i) in (0..n).filter(|i| !active.contains(i)).enumerate() {
        vectors[(i, active.len() + c)] = 1.0;
    }
    Ok(SymmetricEigen {
        eigenvectors: vectors,
        eigenvalues: values,
    })
}

fn dense_eigen(s: Matrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let finite = |e: &SymmetricEigen<f64, nalgebra::Dyn>| {
        e.eigenvalues.iter().all(|v| v.is_finite()) && e.eigenvectors.iter().all(|v| v.is_finite())
    };
    if s.is_empty() {
        return Ok(SymmetricEigen {
            eigenvectors: s.clone(),
            eigenvalues: Vector::zeros(0),
        });
    }
    if let Some(e) = SymmetricEigen::try_new(s.clone(), f64::EPSILON, 0).filter(finite) {
        return Ok(e);
    }
    // Retry on a shifted copy; eigenvectors are unchanged by the shift.
    let shift = max_abs(&s).max(1.0);
    let n = s.nrows();
    let mut e = SymmetricEigen::try_new(s + Matrix::identity(n, n) * shift, f64::EPSILON, 0)
        .filter(finite)
        .ok_or_else(|| CprError::Numerical("symmetric eigensolver did not converge".into()))?;
    e.eigenvalues.add_scalar_mut(-shift);
    Ok(e)
}

/// Smallest eigenvalue of the symmetrized input.
pub fn lambda_min(m: &Matrix) -> Result<f64> {
    Ok(sym_eigen(m)?.eigenvalues.min())
}

/// Largest eigenvalue with its unit eigenvector (symmetrized input).
pub fn top_eigenpair(m: &Matrix) -> Result<(f64, Vector)> {
    let eig = sym_eigen(m)?;
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, cur| {
            if *cur.1 > *best.1 {
                cur
            } else {
                best
            }
        });
    Ok((val, eig.eigenvectors.column(idx).into_owned()))
}

/// Largest singular value by power iteration on `ΨᵀΨ`.
///
/// Stops when the Rayleigh quotient changes by less than `tol` (relative) or
/// after `max_iters` rounds. The start vector is the all-ones vector plus a
/// deterministic ramp so the result does not depend on a seed.
pub fn sigma_max(psi: &Matrix, tol: f64, max_iters: usize) -> f64 {
    let d = psi.ncols();
    if d == 0 || psi.nrows() == 0 {
        return 0.0;
    }
    let mut v = Vector::from_fn(d, |i, _| 1.0 + (i as f64 + 1.0) / (d as f64 * 7.0));
    v /= v.norm();
    let mut prev = 0.0;
    for _ in 0..max_iters {
        let mut w = psi.tr_mul(&(psi * &v));
        let rq = v.dot(&w);
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        w /= nrm;
        v = w;
        if (rq - prev).abs() <= tol * rq.abs() {
            prev = rq;
            break;
        }
        prev = rq;
    }
    prev.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_padded_block_has_finite_spectrum() {
        // A stage-2 estimate after k-sparse projection that made nalgebra's
        // dense solver report an infinite eigenvalue.
        let block = [
            [7.48843097261586155e-2, -1.46168812736941017e-1, 5.98771311829761066e-2, -5.89825500314624884e-1, 2.83707700686283371e-1, 5.57613842332770893e-2],
            [-1.46168812736941017e-1, 2.85748492949988220e-1, -1.18304057535285639e-1, 1.14944865858580147e0, -5.53917480896366277e-1, -1.10707040912876226e-1],
            [5.98771311829761066e-2, -1.18304057535285639e-1, 5.04955052196090770e-2, -4.79237504022166472e-1, 2.29637035912717918e-1, 4.63782783343559546e-2],
            [-5.89825500314624884e-1, 1.14944865858580147e0, -4.79237504022166472e-1, 4.63572519874143207e0, -2.24063410399168816e0, -4.52999513626443640e-1],
            [2.83707700686283371e-1, -5.53917480896366277e-1, 2.29637035912717918e-1, -2.24063410399168816e0, 1.07690973811104840e0, 2.14399479119725178e-1],
            [5.57613842332770893e-2, -1.10707040912876226e-1, 4.63782783343559546e-2, -4.52999513626443640e-1, 2.14399479119725178e-1, 4.35070460633825984e-2],
        ];
        let idx = [12, 17, 24, 53, 54, 62];
        let mut m = Matrix::zeros(64, 64);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = block[a][b];
            }
        }
        let e = sym_eigen(&m).unwrap();
        assert!(e.eigenvalues.iter().all(|v| v.is_finite()));
        let rebuilt = &e.eigenvectors * Matrix::from_diagonal(&e.eigenvalues) * e.eigenvectors.transpose();
        assert!((rebuilt - &m).norm() < 1e-12 * m.norm());
        let (top, _) = top_eigenpair(&m).unwrap();
        assert!((top - 6.170506968612195).abs() < 1e-10);
    }

    #[test]
    fn zero_matrix_eigen() {
        let e = sym_eigen(&Matrix::zeros(4, 4)).unwrap();
        assert_eq!(e.eigenvalues, Vector::zeros(4));
        assert_eq!(e.eigenvectors, Matrix::identity(4, 4));
    }

    #[test]
    fn sigma_max_matches_svd() {
        let psi = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.25]);
        let svd = psi.clone().svd(false, false);
        let exact = svd.singular_values.max();
        assert!((sigma_max(&psi, 1e-14, 10_000) - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn top_eigenpair_of_diagonal() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 3.0, -4.0]));
        let (val, vec) = top_eigenpair(&m).unwrap();
        assert!((val - 3.0).abs() < 1e-12);
        assert!((vec[1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_rejects_nan() {
        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(sym_eigen(&m).is_err());
    }
}
