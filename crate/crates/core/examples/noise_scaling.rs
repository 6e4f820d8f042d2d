//! Error growth under additive noise: doubling σ should roughly double the
//! recovery error.

use cpr::measurement::{generate_instance, make_ensemble, PsiKind};
use cpr::pipeline::{recover_instance, TwoStageConfig};

fn main() -> cpr::Result<()> {
    let ens = make_ensemble(32, 16, 48, 21, PsiKind::GaussianScaled)?;
    let mut prev: Option<f64> = None;
    for sigma in [1e-3, 2e-3, 4e-3, 8e-3] {
        let inst = generate_instance(&ens, 2, sigma, 21)?;
        let res = recover_instance(&ens, &inst, &TwoStageConfig::default())?;
        let err = res.rel_error_matrix.unwrap_or(f64::NAN);
        match prev {
            Some(p) => println!("sigma {sigma:.0e}: error {err:.3e} (x{:.2})", err / p),
            None => println!("sigma {sigma:.0e}: error {err:.3e}"),
        }
        prev = Some(err);
    }
    Ok(())
}
