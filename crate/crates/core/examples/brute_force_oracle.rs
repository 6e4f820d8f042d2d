//! Exhaustive support search on a tiny instance, compared with the convex
//! pipeline.

use cpr::measurement::{generate_instance, make_ensemble, PsiKind};
use cpr::oracles::brute_force_cpr;
use cpr::pipeline::{recover_instance, TwoStageConfig};
use cpr::postprocess::relative_signal_error;

fn main() -> cpr::Result<()> {
    for seed in 0..5 {
        let ens = make_ensemble(6, 6, 30, seed, PsiKind::GaussianScaled)?;
        let inst = generate_instance(&ens, 2, 0.0, seed)?;
        let oracle = brute_force_cpr(&ens, &inst.y, 2)?;
        let res = recover_instance(&ens, &inst, &TwoStageConfig::with_tolerance(1e-10, 50_000))?;
        println!(
            "seed {seed}: oracle support {:?} ({} tried, residual {:.1e}), pipeline vs oracle {:.2e}",
            oracle.support,
            oracle.supports_tried,
            oracle.residual,
            relative_signal_error(&res.signal(), &oracle.signal())?
        );
    }
    Ok(())
}
