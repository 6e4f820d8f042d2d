//! Two-stage recovery against the lifted baselines on a single noisy
//! instance.

use cpr::baselines::Method;
use cpr::experiments::{run_method, trial_instance, ExperimentSpec, SizeRule};

fn main() -> cpr::Result<()> {
    let spec = ExperimentSpec::experiment2(32);
    let k = 2;
    let m = SizeRule::LogRule.eval(spec.d, k, None)?;
    let (ens, inst) = trial_instance(&spec, k, m, 3 * m, 5)?;
    println!("d={} k={k} m={m} n={} sigma={}", spec.d, 3 * m, spec.noise_sigma);
    for method in Method::ALL {
        let out = run_method(method, &ens, &inst, &spec);
        println!("{:<10} error {:.3e} {:?}", method.tag(), out.rel_error, out.status);
    }
    Ok(())
}
