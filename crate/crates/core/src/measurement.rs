//! Sensing ensembles, lifting, and the measurement operators.
//!
//! A measurement is `y_i = (w_iᵀ Ψ x)² + z_i`. After lifting `X = x xᵀ` this is
//! linear in `X`: `y = A(X) + z` with `A(X) = W(Ψ X Ψᵀ)` and
//! `W(B)_i = w_iᵀ B w_i`.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, CprError, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng;

/// How the matrix Ψ is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiKind {
    /// iid `N(0, 1/m)` entries.
    GaussianScaled,
    /// `Ψ = I`, requires `m = d`.
    Identity,
    /// A caller-supplied `m × d` matrix.
    Custom(Matrix),
}

/// Serializable tag for [`PsiKind`]; custom matrices cannot be regenerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiKindTag {
    GaussianScaled,
    Identity,
    Custom,
}

impl PsiKind {
    pub fn tag(&self) -> PsiKindTag {
        match self {
            PsiKind::GaussianScaled => PsiKindTag::GaussianScaled,
            PsiKind::Identity => PsiKindTag::Identity,
            PsiKind::Custom(_) => PsiKindTag::Custom,
        }
    }
}

/// The pair (Ψ, {w_i}) defining the operators `W` and `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingEnsemble {
    /// `m × d`.
    pub psi: Matrix,
    /// `n × m`; row `i` is `w_iᵀ`.
    pub w_stack: Matrix,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub psi_kind: PsiKindTag,
}

impl SensingEnsemble {
    /// Builds an ensemble from explicit parts (`psi` is `m × d`, `w_stack` is
    /// `n × m` with one vector per row).
    pub fn from_parts(psi: Matrix, w_stack: Matrix) -> Result<Self> {
        let (m, d) = psi.shape();
        let n = w_stack.nrows();
        if m == 0 || d == 0 || n == 0 {
            return Err(CprError::InvalidArgument(
                "ensemble dimensions must be positive".into(),
            ));
        }
        if w_stack.ncols() != m {
            return Err(shape_err(
                "SensingEnsemble::from_parts",
                format!("w_stack with {m} columns"),
                format!("{} columns", w_stack.ncols()),
            ));
        }
        if !crate::linalg::all_finite(&psi) || !crate::linalg::all_finite(&w_stack) {
            return Err(CprError::InvalidArgument(
                "ensemble entries must be finite".into(),
            ));
        }
        Ok(Self {
            psi,
            w_stack,
            d,
            m,
            n,
            seed: 0,
            psi_kind: PsiKindTag::Custom,
        })
    }

    /// The vector `w_i`.
    pub fn w(&self, i: usize) -> Vector {
        self.w_stack.row(i).transpose()
    }

    /// The effective sensing vectors `a_i = Ψᵀ w_i`, one per row (`n × d`).
    pub fn sensing_vectors(&self) -> Matrix {
        &self.w_stack * &self.psi
    }
}

/// Draws a sensing ensemble. Generation is a pure function of
/// `(d, m, n, seed, psi_kind)`.
pub fn make_ensemble(
    d: usize,
    m: usize,
    n: usize,
    seed: u64,
    psi_kind: PsiKind,
) -> Result<SensingEnsemble> {
    if d == 0 || m == 0 || n == 0 {
        return Err(CprError::InvalidArgument(format!(
            "dimensions must be positive (d={d}, m={m}, n={n})"
        )));
    }
    let tag = psi_kind.tag();
    let psi = match psi_kind {
        PsiKind::GaussianScaled => {
            let mut r = rng::stream(seed, rng::STREAM_PSI);
            let normal = Normal::new(0.0, (1.0 / m as f64).sqrt())
                .map_err(|e| CprError::InvalidArgument(e.to_string()))?;
            // Draw in row-major order so the stream layout is independent of
            // the storage order of the matrix type.
            let vals: Vec<f64> = (0..m * d).map(|_| normal.sample(&mut r)).collect();
            DMatrix::from_row_slice(m, d, &vals)
        }
        PsiKind::Identity => {
            if m != d {
                return Err(CprError::InvalidArgument(format!(
                    "identity Ψ requires m = d, got m={m}, d={d}"
                )));
            }
            Matrix::identity(m, d)
        }
        PsiKind::Custom(p) => {
            if p.shape() != (m, d) {
                return Err(shape_err(
                    "make_ensemble(custom)",
                    format!("{m}x{d}"),
                    format!("{}x{}", p.nrows(), p.ncols()),
                ));
            }
            if !crate::linalg::all_finite(&p) {
                return Err(CprError::InvalidArgument("custom Ψ must be finite".into()));
            }
            p
        }
    };
    let mut r = rng::stream(seed, rng::STREAM_W);
    let vals: Vec<f64> = (0..n * m).map(|_| StandardNormal.sample(&mut r)).collect();
    let w_stack = DMatrix::from_row_slice(n, m, &vals);
    Ok(SensingEnsemble {
        psi,
        w_stack,
        d,
        m,
        n,
        seed,
        psi_kind: tag,
    })
}

/// `x xᵀ`.
pub fn lift(x: &Vector) -> Result<Matrix> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CprError::InvalidArgument("lift of a non-finite vector".into()));
    }
    Ok(x * x.transpose())
}

fn check_square(context: &'static str, b: &Matrix, size: usize) -> Result<()> {
    if b.shape() != (size, size) {
        return Err(shape_err(
            context,
            format!("{size}x{size}"),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(())
}

/// `v_i = w_iᵀ B w_i` for each row of `rows` (`n × p`), with `B` of size `p × p`.
pub(crate) fn quadratic_forms(rows: &Matrix, b: &Matrix) -> Vector {
    let wb = rows * b;
    Vector::from_fn(rows.nrows(), |i, _| wb.row(i).dot(&rows.row(i)))
}

/// `Σ_i v_i r_i r_iᵀ` where `r_i` are the rows of `rows`.
pub(crate) fn weighted_outer_sum(rows: &Matrix, v: &Vector) -> Matrix {
    let mut scaled = rows.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= v[i];
    }
    rows.tr_mul(&scaled)
}

/// `W(B)_i = ⟨w_i w_iᵀ, B⟩`.
pub fn apply_w(ens: &SensingEnsemble, b: &Matrix) -> Result<Vector> {
    check_square("apply_W", b, ens.m)?;
    Ok(quadratic_forms(&ens.w_stack, b))
}

/// `W*(v) = Σ_i v_i w_i w_iᵀ`.
pub fn apply_w_adjoint(ens: &SensingEnsemble, v: &Vector) -> Result<Matrix> {
    if v.len() != ens.n {
        return Err(shape_err("apply_W_adjoint", ens.n.to_string(), v.len().to_string()));
    }
    Ok(weighted_outer_sum(&ens.w_stack, v))
}

/// `A(X) = W(Ψ X Ψᵀ)`.
pub fn apply_a(ens: &SensingEnsemble, x: &Matrix) -> Result<Vector> {
    check_square("apply_A", x, ens.d)?;
    let b = &ens.psi * x * ens.psi.transpose();
    apply_w(ens, &b)
}

/// `A*(v) = Ψᵀ W*(v) Ψ`.
pub fn apply_a_adjoint(ens: &SensingEnsemble, v: &Vector) -> Result<Matrix> {
    let b = apply_w_adjoint(ens, v)?;
    Ok(ens.psi.tr_mul(&b) * &ens.psi)
}

/// Ground truth plus measurements for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstance {
    pub x_star: Vector,
    /// Sorted support indices.
    pub support: Vec<usize>,
    /// `x* x*ᵀ`.
    pub lift: Matrix,
    pub z: Vector,
    pub y: Vector,
    /// Realized `‖z‖₂`.
    pub epsilon: f64,
    pub k: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Draws a `k`-sparse signal with uniformly random support and standard
/// normal nonzeros, and its noisy measurements with noise `N(0, σ²)`.
pub fn generate_instance(
    ens: &SensingEnsemble,
    k: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<SparseInstance> {
    if k == 0 || k > ens.d {
        return Err(CprError::InvalidArgument(format!(
            "sparsity k={k} must lie in 1..=d={}",
            ens.d
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(CprError::InvalidArgument(format!(
            "noise_sigma must be finite and nonnegative, got {noise_sigma}"
        )));
    }
    let mut r = rng::stream(seed, rng::STREAM_SIGNAL);
    let mut support = index::sample(&mut r, ens.d, k).into_vec();
    support.sort_unstable();
    let mut x_star = Vector::zeros(ens.d);
    for &j in &support {
        x_star[j] = r.sample(StandardNormal);
    }
    let lift = lift(&x_star)?;
    let clean = apply_a(ens, &lift)?;

    let mut r = rng::stream(seed, rng::STREAM_NOISE);
    let z = Vector::from_fn(ens.n, |_, _| {
        let g: f64 = r.sample(StandardNormal);
        noise_sigma * g
    });
    let epsilon = z.norm();
    let y = clean + &z;
    Ok(SparseInstance {
        x_star,
        support,
        lift,
        z,
        y,
        epsilon,
        k,
        noise_sigma,
        seed,
    })
}

/// Monte-Carlo *lower* estimate of the restricted isometry constant δ_{2k}:
/// the largest `|‖Ψx‖² − 1|` over `trials` random unit-norm 2k-sparse `x`.
pub fn estimate_rip_constant(psi: &Matrix, k: usize, trials: usize, seed: u64) -> Result<f64> {
    let d = psi.ncols();
    let s = 2 * k;
    if k == 0 || s > d {
        return Err(CprError::InvalidArgument(format!(
            "RIP estimate needs 1 <= 2k <= d (k={k}, d={d})"
        )));
    }
    if trials == 0 {
        return Err(CprError::InvalidArgument("trials must be positive".into()));
    }
    let mut r = rng::stream(seed, rng::STREAM_CHECK);
    let mut worst: f64 = 0.0;
    let mut vals = vec![0.0; s];
    for _ in 0..trials {
        let supp = index::sample(&mut r, d, s);
        for v in vals.iter_mut() {
            *v = r.sample(StandardNormal);
        }
        let nrm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            continue;
        }
        let mut px = Vector::zeros(psi.nrows());
        for (j, col) in supp.iter().enumerate() {
            px.axpy(vals[j] / nrm, &psi.column(col), 1.0);
        }
        worst = worst.max((px.norm_squared() - 1.0).abs());
    }
    Ok(worst)
}

/// Generation parameters for an ensemble plus instance. Raw matrices are
/// never serialized; regeneration from this document is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub psi_kind: PsiKindTag,
    pub k: usize,
    pub noise_sigma: f64,
}

impl InstanceParams {
    pub fn from_instance(ens: &SensingEnsemble, inst: &SparseInstance) -> Self {
        Self {
            d: ens.d,
            m: ens.m,
            n: ens.n,
            seed: ens.seed,
            psi_kind: ens.psi_kind,
            k: inst.k,
            noise_sigma: inst.noise_sigma,
        }
    }

    /// Rebuilds the ensemble and instance. Ensemble and instance draw from
    /// disjoint streams of the same seed.
    pub fn generate(&self) -> Result<(SensingEnsemble, SparseInstance)> {
        let kind = match self.psi_kind {
            PsiKindTag::GaussianScaled => PsiKind::GaussianScaled,
            PsiKindTag::Identity => PsiKind::Identity,
            PsiKindTag::Custom => {
                return Err(CprError::InvalidArgument(
                    "custom Ψ cannot be regenerated from parameters".into(),
                ))
            }
        };
        let ens = make_ensemble(self.d, self.m, self.n, self.seed, kind)?;
        let inst = generate_instance(&ens, self.k, self.noise_sigma, self.seed)?;
        Ok((ens, inst))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
