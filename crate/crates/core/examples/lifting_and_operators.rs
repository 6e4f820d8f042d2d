//! The lifted measurement operators: `y = A(x xᵀ)` and the adjoint
//! identity `⟨A(X), v⟩ = ⟨X, A*(v)⟩`.

use cpr::linalg::{frob_inner, Matrix, Vector};
use cpr::measurement::{apply_a, apply_a_adjoint, apply_w, generate_instance, lift, make_ensemble, PsiKind};

fn main() -> cpr::Result<()> {
    let ens = make_ensemble(12, 6, 20, 3, PsiKind::GaussianScaled)?;
    let inst = generate_instance(&ens, 2, 0.0, 3)?;

    let x = lift(&inst.x_star)?;
    let via_lift = apply_a(&ens, &x)?;
    let b = &ens.psi * &x * ens.psi.transpose();
    let via_w = apply_w(&ens, &b)?;
    println!("‖A(xxᵀ) − y‖     = {:.2e}", (&via_lift - &inst.y).norm());
    println!("‖W(ΨXΨᵀ) − A(X)‖ = {:.2e}", (&via_w - &via_lift).norm());

    let m = Matrix::from_fn(12, 12, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let v = Vector::from_fn(20, |i, _| (i as f64).sin());
    let lhs = apply_a(&ens, &m)?.dot(&v);
    let rhs = frob_inner(&m, &apply_a_adjoint(&ens, &v)?);
    println!("adjoint identity: {lhs:.12} vs {rhs:.12}");
    Ok(())
}
