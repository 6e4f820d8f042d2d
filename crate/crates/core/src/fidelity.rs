//! Euclidean projection onto data-fidelity sets `{X : ‖L(X) − b‖₂ ≤ r}`.
//!
//! Every linear map used by the solvers has a Gram operator `L L*` that is
//! cheap to diagonalize once: for `W` and `A` it is the `n × n` matrix
//! `G_ij = (v_iᵀ v_j)²`, for `X ↦ Ψ X Ψᵀ` it is diagonal in the Kronecker
//! eigenbasis of `Ψ Ψᵀ`. With that spectrum the projection reduces to a scalar
//! secular equation in the multiplier `μ`:
//!
//! `X = X₀ − μ L*((I + μ G)⁻¹ (L(X₀) − b))`.
//!
//! `r = 0` is the limit `μ → ∞`, i.e. the least-squares projection onto the
//! affine set `{L(X) = b}`.

use crate::error::Result;
use crate::linalg::{sym_eigen, Matrix, Vector};
use crate::measurement::{quadratic_forms, weighted_outer_sum};

/// A linear map from matrices to a flat measurement vector, together with the
/// eigendecomposition of its Gram operator.
pub trait MeasurementMap {
    fn apply(&self, x: &Matrix) -> Vector;
    fn adjoint(&self, r: &Vector) -> Matrix;
    /// Coordinates of `r` in the eigenbasis of `L L*`.
    fn to_spectral(&self, r: &Vector) -> Vector;
    fn from_spectral(&self, c: &Vector) -> Vector;
    /// Eigenvalues of `L L*`, aligned with [`MeasurementMap::to_spectral`].
    fn gram_eigenvalues(&self) -> &Vector;
}

/// `X ↦ [v_iᵀ X v_i]_i` for the rows `v_i` of a stacked matrix.
#[derive(Debug, Clone)]
pub struct QuadraticMap {
    rows: Matrix,
    basis: Matrix,
    eigenvalues: Vector,
}

impl QuadraticMap {
    pub fn new(rows: Matrix) -> Result<Self> {
        let mut gram = &rows * rows.transpose();
        gram.apply(|v| *v = *v * *v);
        let eig = sym_eigen(&gram)?;
        Ok(Self {
            rows,
            basis: eig.eigenvectors,
            eigenvalues: eig.eigenvalues,
        })
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }
}

impl MeasurementMap for QuadraticMap {
    fn apply(&self, x: &Matrix) -> Vector {
        quadratic_forms(&self.rows, x)
    }
    fn adjoint(&self, r: &Vector) -> Matrix {
        weighted_outer_sum(&self.rows, r)
    }
    fn to_spectral(&self, r: &Vector) -> Vector {
        self.basis.tr_mul(r)
    }
    fn from_spectral(&self, c: &Vector) -> Vector {
        &self.basis * c
    }
    fn gram_eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }
}

/// `X ↦ Ψ X Ψᵀ`, flattened column-major.
#[derive(Debug, Clone)]
pub struct CongruenceMap {
    psi: Matrix,
    basis: Matrix,
    eigenvalues: Vector,
}

impl CongruenceMap {
    pub fn new(psi: Matrix) -> Result<Self> {
        let m = psi.nrows();
        let eig = sym_eigen(&(&psi * psi.transpose()))?;
        let s = eig.eigenvalues;
        let eigenvalues = Vector::from_fn(m * m, |idx, _| s[idx % m] * s[idx / m]);
        Ok(Self {
            psi,
            basis: eig.eigenvectors,
            eigenvalues,
        })
    }

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        &self.psi * x * self.psi.transpose()
    }

    pub fn backward(&self, y: &Matrix) -> Matrix {
        self.psi.tr_mul(y) * &self.psi
    }

    fn unflatten(&self, r: &Vector) -> Matrix {
        let m = self.psi.nrows();
        Matrix::from_column_slice(m, m, r.as_slice())
    }
}

fn flatten(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

impl MeasurementMap for CongruenceMap {
    fn apply(&self, x: &Matrix) -> Vector {
        flatten(&self.forward(x))
    }
    fn adjoint(&self, r: &Vector) -> Matrix {
        self.backward(&self.unflatten(r))
    }
    fn to_spectral(&self, r: &Vector) -> Vector {
        flatten(&(self.basis.tr_mul(&self.unflatten(r)) * &self.basis))
    }
    fn from_spectral(&self, c: &Vector) -> Vector {
        flatten(&(&self.basis * self.unflatten(c) * self.basis.transpose()))
    }
    fn gram_eigenvalues(&self) -> &Vector {
        &self.eigenvalues
    }
}

/// Relative eigenvalue cutoff below which a Gram direction counts as null.
const NULL_CUTOFF: f64 = 1e-11;

/// Least-squares solution `ν` of `L*(ν) = g`, i.e. `(L L*)⁺ L(g)`.
pub fn adjoint_preimage<M: MeasurementMap>(map: &M, g: &Matrix) -> Vector {
    let c = map.to_spectral(&map.apply(g));
    let lam = map.gram_eigenvalues();
    let cutoff = NULL_CUTOFF * lam.amax();
    let coeffs = Vector::from_fn(c.len(), |j, _| if lam[j] > cutoff { c[j] / lam[j] } else { 0.0 });
    map.from_spectral(&coeffs)
}

/// The set `{X : ‖L(X) − b‖₂ ≤ radius}`.
#[derive(Debug, Clone)]
pub struct FidelityBall<M> {
    pub map: M,
    target: Vector,
    radius: f64,
    cutoff: f64,
    residual_floor: f64,
}

impl<M: MeasurementMap> FidelityBall<M> {
    pub fn new(map: M, target: Vector, radius: f64) -> Self {
        let lmax = map.gram_eigenvalues().amax();
        let cutoff = NULL_CUTOFF * lmax.max(f64::MIN_POSITIVE);
        let c = map.to_spectral(&target);
        let floor_sq: f64 = c
            .iter()
            .zip(map.gram_eigenvalues().iter())
            .filter(|(_, &l)| l <= cutoff)
            .map(|(v, _)| v * v)
            .sum();
        Self {
            map,
            target,
            radius,
            cutoff,
            residual_floor: floor_sq.sqrt(),
        }
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Smallest achievable residual `min_X ‖L(X) − b‖₂`.
    pub fn residual_floor(&self) -> f64 {
        self.residual_floor
    }

    /// True when no `X` satisfies the constraint (up to round-off).
    pub fn is_infeasible(&self) -> bool {
        self.residual_floor > self.radius + 1e-9 * (1.0 + self.target.norm())
    }

    pub fn residual(&self, x: &Matrix) -> f64 {
        (self.map.apply(x) - &self.target).norm()
    }

    /// Euclidean projection of `x0` onto the set. When the set is empty this
    /// returns the projection onto the least-squares solution set instead.
    pub fn project(&self, x0: &Matrix) -> Matrix {
        let r0 = self.map.apply(x0) - &self.target;
        let c = self.map.to_spectral(&r0);
        let lam = self.map.gram_eigenvalues();
        let mut active_sq = 0.0;
        let mut null_sq = 0.0;
        for (cj, &lj) in c.iter().zip(lam.iter()) {
            if lj > self.cutoff {
                active_sq += cj * cj;
            } else {
                null_sq += cj * cj;
            }
        }
        let r2 = self.radius * self.radius;
        if active_sq + null_sq <= r2 {
            return x0.clone();
        }
        let inv_mu = if r2 <= null_sq {
            0.0
        } else {
            1.0 / self.solve_multiplier(&c, lam, null_sq, self.radius)
        };
        let h = Vector::from_fn(c.len(), |j, _| {
            if lam[j] > self.cutoff {
                c[j] / (inv_mu + lam[j])
            } else {
                0.0
            }
        });
        x0 - self.map.adjoint(&self.map.from_spectral(&h))
    }

    /// Root of `φ(μ) = Σ (c_j / (1 + μ λ_j))² + ν² = r²` on `μ > 0`, found by
    /// safeguarded Newton on `1/√φ − 1/r`.
    fn solve_multiplier(&self, c: &Vector, lam: &Vector, null_sq: f64, radius: f64) -> f64 {
        let eval = |mu: f64| -> (f64, f64) {
            let mut phi = null_sq;
            let mut dphi = 0.0;
            for (cj, &lj) in c.iter().zip(lam.iter()) {
                if lj > self.cutoff {
                    let den = 1.0 + mu * lj;
                    let q = cj * cj / (den * den);
                    phi += q;
                    dphi -= 2.0 * q * lj / den;
                }
            }
            (phi, dphi)
        };
        let target = 1.0 / radius;
        let psi = |mu: f64| -> (f64, f64) {
            let (phi, dphi) = eval(mu);
            let s = phi.sqrt();
            (1.0 / s - target, -0.5 * dphi / (phi * s))
        };
        let lmax = lam.amax().max(self.cutoff);
        let mut lo = 0.0;
        let mut hi = 1.0 / lmax;
        while psi(hi).0 < 0.0 {
            lo = hi;
            hi *= 4.0;
            if !hi.is_finite() {
                return f64::MAX;
            }
        }
        let mut mu = lo;
        for _ in 0..200 {
            let (f, df) = psi(mu);
            if f.abs() <= 1e-14 * target {
                break;
            }
            if f < 0.0 {
                lo = mu;
            } else {
                hi = mu;
            }
            let newton = mu - f / df;
            mu = if df > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        mu
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{make_ensemble, PsiKind};
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn randn(r: usize, c: usize, seed: u64) -> Matrix {
        let mut g = rng::stream(seed, 77);
        Matrix::from_fn(r, c, |_, _| g.sample::<f64, _>(StandardNormal))
    }

    /// Dense matrix of the map, one column per basis matrix `E_ab`.
    fn dense_operator<M: MeasurementMap>(map: &M, p: usize) -> Matrix {
        let cols: Vec<Vector> = (0..p * p)
            .map(|idx| {
                let mut e = Matrix::zeros(p, p);
                e[(idx % p, idx / p)] = 1.0;
                map.apply(&e)
            })
            .collect();
        Matrix::from_columns(&cols)
    }

    /// KKT check of the projection. For a positive radius, `X₀ − X` must be a
    /// nonnegative multiple of `L*(L(X) − b)` with the constraint active. For
    /// radius zero, `X₀ − X` must lie in the row space of `L`, computed
    /// independently from a dense SVD.
    fn check_projection<M: MeasurementMap>(set: &FidelityBall<M>, x0: &Matrix) {
        let p = x0.nrows();
        let x = set.project(x0);
        let res = set.map.apply(&x) - set.target();
        assert!(res.norm() <= set.radius() * (1.0 + 1e-8) + 1e-10);
        let diff = x0 - &x;
        if set.radius() == 0.0 {
            let svd = dense_operator(&set.map, p).svd(false, true);
            let vt = svd.v_t.unwrap();
            let smax = svd.singular_values.max();
            let flat = Vector::from_column_slice(diff.as_slice());
            let mut in_row_space = Vector::zeros(flat.len());
            for (j, &sv) in svd.singular_values.iter().enumerate() {
                if sv > 1e-10 * smax {
                    let v = vt.row(j).transpose();
                    in_row_space += &v * v.dot(&flat);
                }
            }
            assert!((flat - in_row_space).norm() < 1e-9 * (1.0 + diff.norm()));
        } else if diff.norm() > 1e-12 {
            let dir = set.map.adjoint(&res);
            let cos = crate::linalg::frob_inner(&dir, &diff) / (dir.norm() * diff.norm());
            assert!((cos - 1.0).abs() < 1e-7, "cos = {cos}");
            assert!((res.norm() - set.radius()).abs() <= 1e-8 * (1.0 + set.radius()));
        }
    }

    #[test]
    fn quadratic_ball_projection_kkt() {
        let ens = make_ensemble(6, 6, 15, 1, PsiKind::GaussianScaled).unwrap();
        let map = QuadraticMap::new(ens.w_stack.clone()).unwrap();
        let y = map.apply(&randn(6, 6, 3)) + Vector::from_fn(15, |i, _| i as f64 * 0.1);
        for radius in [0.0, 0.5, 3.0] {
            let set = FidelityBall::new(map.clone(), y.clone(), radius);
            assert!(!set.is_infeasible());
            check_projection(&set, &randn(6, 6, 9));
        }
    }

    #[test]
    fn congruence_ball_projection_kkt() {
        let psi = randn(4, 7, 5);
        let map = CongruenceMap::new(psi).unwrap();
        let y = randn(4, 4, 6);
        let target = Vector::from_column_slice(y.as_slice());
        for radius in [0.0, 0.1, 1.0] {
            let set = FidelityBall::new(map.clone(), target.clone(), radius);
            check_projection(&set, &randn(7, 7, 10));
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let map = CongruenceMap::new(randn(3, 5, 1)).unwrap();
        let target = Vector::from_column_slice(randn(3, 3, 2).as_slice());
        let set = FidelityBall::new(map, target, 0.3);
        let p = set.project(&randn(5, 5, 3));
        let pp = set.project(&p);
        assert!((p - pp).norm() < 1e-9);
    }

    #[test]
    fn inconsistent_equality_detected() {
        // One measurement vector used twice with conflicting targets.
        let w = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let map = QuadraticMap::new(w).unwrap();
        let set = FidelityBall::new(map.clone(), Vector::from_vec(vec![1.0, 2.0]), 0.0);
        assert!(set.is_infeasible());
        assert!((set.residual_floor() - 0.5f64.sqrt()).abs() < 1e-12);
        let ok = FidelityBall::new(map, Vector::from_vec(vec![1.0, 1.0]), 0.0);
        assert!(!ok.is_infeasible());
    }
}
