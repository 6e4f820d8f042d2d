//! A reduced sweep over the measurement budgets, written as CSV and JSON.

use cpr::baselines::Method;
use cpr::experiments::{emit_csv, emit_json, raw_csv_path, run_experiment, ExperimentSpec};

fn main() -> cpr::Result<()> {
    let mut spec = ExperimentSpec::experiment1(32);
    spec.k_list = vec![2];
    spec.trials = 3;
    spec.methods = vec![Method::TwoStage];
    let report = run_experiment(&spec)?;
    for c in &report.cells {
        println!("k={} m={:>3} n={:>3} q{}={:.3e} failures={}", c.k, c.m, c.n, spec.quantile_q, c.quantile, c.failures);
    }
    let out = std::env::temp_dir().join("cpr_sweep.csv");
    emit_csv(&report, &out)?;
    emit_json(&report, &out.with_extension("json"))?;
    println!("wrote {} and {}", out.display(), raw_csv_path(&out).display());
    Ok(())
}
