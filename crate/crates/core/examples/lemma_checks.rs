//! Monte Carlo checks of the structural inequalities behind the recovery
//! guarantee, one line per check.

use cpr::measurement::{estimate_rip_constant, make_ensemble, PsiKind};
use cpr::oracles::{gamma_root, lemma_suite};

fn main() -> cpr::Result<()> {
    let (d, k) = (64, 2);
    let ens = make_ensemble(d, 8 * k, 1, 11, PsiKind::GaussianScaled)?;
    println!("estimated 2k-RIP constant: {:.3}", estimate_rip_constant(&ens.psi, k, 2000, 11)?);
    println!("gamma threshold root: {:.6}", gamma_root());
    for line in lemma_suite(&ens.psi, k, 2000, 11)? {
        println!("{line}");
    }
    Ok(())
}
