//! Exhaustive and Monte Carlo checkers used to validate the solvers and the
//! structural inequalities they rely on.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CprError, Result};
use crate::linalg::{frob_inner, Matrix, Vector};
use crate::measurement::{quadratic_forms, SensingEnsemble};
use crate::postprocess::{extract_signal, project_rank_one_psd};
use crate::rng;

/// Largest number of supports [`brute_force_cpr`] will enumerate.
pub const SUPPORT_BUDGET: u128 = 100_000;

/// Additive slack on the RIP estimate used by the lemma checks.
pub const RIP_MARGIN: f64 = 0.05;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub signal: Vec<f64>,
    pub support: Vec<usize>,
    /// `‖A(x̂x̂ᵀ) − y‖₂` for the winning support.
    pub residual: f64,
    pub supports_tried: u128,
}

impl OracleResult {
    pub fn signal(&self) -> Vector {
        Vector::from_vec(self.signal.clone())
    }
}

/// Advances `idx` to the next size-`k` subset of `0..n` in lexicographic
/// order; returns `false` after the last one.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Least-squares fit of a symmetric matrix supported on `supp` to `y`,
/// returned embedded in `d × d`.
fn restricted_fit(a: &Matrix, y: &Vector, supp: &[usize], d: usize) -> Option<Matrix> {
    let k = supp.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|p| (p..k).map(move |q| (p, q))).collect();
    let n = a.nrows();
    let design = Matrix::from_fn(n, pairs.len(), |i, c| {
        let (p, q) = pairs[c];
        let (ap, aq) = (a[(i, supp[p])], a[(i, supp[q])]);
        if p == q {
            ap * ap
        } else {
            2.0 * ap * aq
        }
    });
    let normal = design.transpose() * &design;
    let rhs = design.transpose() * y;
    let coef = match normal.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => normal.svd(true, true).solve(&rhs, 1e-12).ok()?,
    };
    let mut x = Matrix::zeros(d, d);
    for (c, &(p, q)) in pairs.iter().enumerate() {
        x[(supp[p], supp[q])] = coef[c];
        x[(supp[q], supp[p])] = coef[c];
    }
    Some(x)
}

/// Exhaustive search over all size-`k` supports. For each support the
/// restricted lifted least-squares problem is solved, the fit is projected to
/// rank one, and the support whose rank-one estimate has the smallest
/// measurement residual wins.
pub fn brute_force_cpr(ens: &SensingEnsemble, y: &Vector, k: usize) -> Result<OracleResult> {
    let d = ens.d;
    if k == 0 || k > d {
        return Err(CprError::InvalidArgument(format!("need 1 <= k <= d (k={k}, d={d})")));
    }
    if y.len() != ens.n {
        return Err(crate::error::shape_err("brute_force_cpr", ens.n.to_string(), y.len().to_string()));
    }
    let needed = binomial(d, k);
    if needed > SUPPORT_BUDGET {
        return Err(CprError::BudgetExceeded {
            needed,
            budget: SUPPORT_BUDGET,
        });
    }
    if k * (k + 1) / 2 > ens.n {
        return Err(CprError::InvalidArgument(format!(
            "k(k+1)/2 = {} unknowns exceed n = {}",
            k * (k + 1) / 2,
            ens.n
        )));
    }
    let a = ens.sensing_vectors();
    let mut supp: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vector, Vec<usize>)> = None;
    let mut tried = 0u128;
    loop {
        tried += 1;
        if let Some(fit) = restricted_fit(&a, y, &supp, d) {
            let (rank1, _, _) = project_rank_one_psd(&fit)?;
            let residual = (quadratic_forms(&a, &rank1) - y).norm();
            if best.as_ref().is_none_or(|b| residual < b.0) {
                best = Some((residual, extract_signal(&rank1)?, supp.clone()));
            }
        }
        if !next_combination(&mut supp, d) {
            break;
        }
    }
    let (residual, signal, support) =
        best.ok_or_else(|| CprError::Numerical("no support admitted a least-squares fit".into()))?;
    Ok(OracleResult {
        signal: signal.iter().copied().collect(),
        support,
        residual,
        supports_tried: tried,
    })
}

fn random_block(r: &mut impl Rng, d: usize, rows: &[usize], cols: &[usize]) -> Matrix {
    let mut x = Matrix::zeros(d, d);
    for &i in rows {
        for &j in cols {
            x[(i, j)] = r.sample(StandardNormal);
        }
    }
    x
}

/// Outcome of one Monte Carlo check, in the shape printed by `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} statistic={:.6e} bound={:.6e} {}",
            self.name,
            self.statistic,
            self.bound,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Largest observed `|⟨ΨXΨᵀ, ΨX′Ψᵀ⟩| / (‖X‖_F ‖X′‖_F)` over random pairs of
/// `k × k`-sparse matrices whose row sets and column sets are disjoint.
pub fn check_disjoint_support_lemma(psi: &Matrix, k: usize, trials: usize, seed: u64) -> Result<f64> {
    disjoint_support_ratio(psi, k, trials, seed, 1.0)
}

/// As [`check_disjoint_support_lemma`] with `X` scaled by `scale` before the
/// ratio is formed.
pub fn disjoint_support_ratio(psi: &Matrix, k: usize, trials: usize, seed: u64, scale: f64) -> Result<f64> {
    let d = psi.ncols();
    if k == 0 || 4 * k > d {
        return Err(CprError::InvalidArgument(format!("need 1 <= 4k <= d (k={k}, d={d})")));
    }
    let mut r = rng::stream(rng::derive_seed(seed, &[rng::label("disjoint")]), rng::STREAM_CHECK);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let rows = index::sample(&mut r, d, 2 * k).into_vec();
        let cols = index::sample(&mut r, d, 2 * k).into_vec();
        let x = random_block(&mut r, d, &rows[..k], &cols[..k]) * scale;
        let xp = random_block(&mut r, d, &rows[k..], &cols[k..]);
        let lhs = frob_inner(&(psi * &x * psi.transpose()), &(psi * &xp * psi.transpose()));
        let denom = x.norm() * xp.norm();
        if denom > 0.0 {
            worst = worst.max(lhs.abs() / denom);
        }
    }
    Ok(worst)
}

/// Extreme observed ratios `‖ΨXΨᵀ‖²_F / ‖X‖²_F` over random `2k × 2k`-sparse
/// `X`.
pub fn check_rip_product(psi: &Matrix, k: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let d = psi.ncols();
    if k == 0 || 2 * k > d {
        return Err(CprError::InvalidArgument(format!("need 1 <= 2k <= d (k={k}, d={d})")));
    }
    if trials == 0 {
        return Err(CprError::InvalidArgument("trials must be positive".into()));
    }
    let mut r = rng::stream(rng::derive_seed(seed, &[rng::label("rip_product")]), rng::STREAM_CHECK);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..trials {
        let rows = index::sample(&mut r, d, 2 * k).into_vec();
        let cols = index::sample(&mut r, d, 2 * k).into_vec();
        let x = random_block(&mut r, d, &rows, &cols);
        let nx = x.norm_squared();
        if nx == 0.0 {
            continue;
        }
        let ratio = (psi * &x * psi.transpose()).norm_squared() / nx;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo, hi))
}

/// `γ(δ) = (1 − δ)² − 2√2 δ`.
pub fn check_gamma_threshold(delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(CprError::InvalidArgument(format!("delta must lie in [0, 1], got {delta}")));
    }
    Ok((1.0 - delta).powi(2) - 2.0 * std::f64::consts::SQRT_2 * delta)
}

/// The root of `γ` in `[0, 1]`: `1 + √2 (1 − √(1 + √2))`.
pub fn gamma_root() -> f64 {
    let s = std::f64::consts::SQRT_2;
    1.0 + s * (1.0 - (1.0 + s).sqrt())
}

/// Runs both lemma checks on `psi` with bounds taken from a fresh RIP
/// estimate, plus the γ sign check.
pub fn lemma_suite(psi: &Matrix, k: usize, trials: usize, seed: u64) -> Result<Vec<CheckLine>> {
    let delta = crate::measurement::estimate_rip_constant(psi, k, trials, seed)?;
    let slack = delta + RIP_MARGIN;
    let ratio = check_disjoint_support_lemma(psi, k, trials, seed)?;
    let (lo, hi) = check_rip_product(psi, k, trials, seed)?;
    let lower = (1.0 - slack).max(0.0).powi(2);
    let upper = (1.0 + slack).powi(2);
    let root = gamma_root();
    let below = check_gamma_threshold(root - 0.01)?;
    let above = check_gamma_threshold(root + 0.01)?;
    Ok(vec![
        CheckLine {
            name: "disjoint_support_ratio".into(),
            statistic: ratio,
            bound: 2.0 * slack,
            pass: ratio <= 2.0 * slack,
        },
        CheckLine {
            name: "rip_product_min".into(),
            statistic: lo,
            bound: lower,
            pass: lo >= lower,
        },
        CheckLine {
            name: "rip_product_max".into(),
            statistic: hi,
            bound: upper,
            pass: hi <= upper,
        },
        CheckLine {
            name: "gamma_root".into(),
            statistic: root,
            bound: 0.216,
            pass: (root - 0.216).abs() <= 0.01 && below > 0.0 && above < 0.0,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{generate_instance, make_ensemble, PsiKind};
    use crate::postprocess::relative_signal_error;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(64, 4), 635_376);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let mut idx = vec![0, 1];
        let mut all = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            all.push(idx.clone());
        }
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn single_spike_is_exact() {
        let ens = make_ensemble(8, 8, 20, 31, PsiKind::GaussianScaled).unwrap();
        let inst = generate_instance(&ens, 1, 0.0, 31).unwrap();
        let out = brute_force_cpr(&ens, &inst.y, 1).unwrap();
        assert!(relative_signal_error(&out.signal(), &inst.x_star).unwrap() <= 1e-8);
        assert_eq!(out.support, inst.support);
        assert!(out.residual <= 1e-8 * inst.y.norm());
    }

    #[test]
    fn zero_measurements() {
        let ens = make_ensemble(6, 6, 12, 1, PsiKind::GaussianScaled).unwrap();
        let out = brute_force_cpr(&ens, &Vector::zeros(12), 2).unwrap();
        assert!(out.signal().norm() == 0.0);
        assert_eq!(out.residual, 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let ens = make_ensemble(64, 8, 40, 1, PsiKind::GaussianScaled).unwrap();
        let err = brute_force_cpr(&ens, &Vector::zeros(40), 4).unwrap_err();
        assert!(matches!(err, CprError::BudgetExceeded { needed: 635_376, .. }));
    }

    #[test]
    fn orthonormal_psi_has_no_cross_terms() {
        let psi = Matrix::identity(16, 16);
        assert!(check_disjoint_support_lemma(&psi, 2, 200, 4).unwrap() <= 1e-10);
    }

    #[test]
    fn disjoint_ratio_is_scale_free() {
        let ens = make_ensemble(32, 16, 1, 2, PsiKind::GaussianScaled).unwrap();
        let a = disjoint_support_ratio(&ens.psi, 2, 300, 9, 1.0).unwrap();
        let b = disjoint_support_ratio(&ens.psi, 2, 300, 9, 10.0).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn rip_product_closed_forms() {
        let (lo, hi) = check_rip_product(&Matrix::identity(10, 10), 2, 50, 1).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let (lo, hi) = check_rip_product(&(Matrix::identity(10, 10) * 2.0), 2, 50, 1).unwrap();
        assert!((lo - 16.0).abs() < 1e-10 && (hi - 16.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_values() {
        assert_eq!(check_gamma_threshold(0.0).unwrap(), 1.0);
        assert!(check_gamma_threshold(0.216).unwrap().abs() < 1e-2);
        assert!(check_gamma_threshold(0.3).unwrap() < 0.0);
        assert!(check_gamma_threshold(gamma_root()).unwrap().abs() < 1e-12);
        assert!(check_gamma_threshold(1.5).is_err());
    }
}
