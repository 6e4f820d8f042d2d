//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if a criterion fails that is not listed in `KNOWN_FAILURES`.

use std::io::Write;
use std::time::{Duration, Instant};

use cpr::baselines::Method;
use cpr::experiments::{run_experiment, ExperimentSpec, GridPoint, SizeRule, SolverSettings};
use cpr::linalg::{l1_norm, lambda_min, Matrix, Vector};
use cpr::lowrank::{feasibility_slack, solve_trace_min, LowRankSolveConfig};
use cpr::measurement::{apply_w, generate_instance, lift, make_ensemble, PsiKind};
use cpr::oracles::{brute_force_cpr, lemma_suite};
use cpr::pipeline::{recover_instance, TwoStageConfig};
use cpr::postprocess::{project_k_sparse, project_rank_one_psd, relative_signal_error};
use cpr::rng;
use cpr::sparse::{solve_l1_min, SparseSolveConfig};
use cpr::SolveStatus;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

/// Criteria whose failure is analysed in the README; they still print FAIL.
const KNOWN_FAILURES: &[u32] = &[3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn noiseless_recovery() -> Outcome {
    let mut ok = 0;
    let mut worst = Vec::new();
    for s in 0..20u64 {
        let seed = 1000 + s;
        let ens = make_ensemble(32, 16, 48, seed, PsiKind::GaussianScaled).unwrap();
        let inst = generate_instance(&ens, 2, 0.0, seed).unwrap();
        let err = recover_instance(&ens, &inst, &TwoStageConfig::default())
            .ok()
            .and_then(|r| r.rel_error_signal)
            .unwrap_or(f64::INFINITY);
        if err <= 1e-3 {
            ok += 1;
        } else {
            worst.push(format!("seed {seed}: {err:.2e}"));
        }
    }
    Outcome {
        pass: ok >= 19,
        detail: format!("{ok}/20 seeds with signal error <= 1e-3 [{}]", worst.join(", ")),
    }
}

fn noise_scaling() -> Outcome {
    let sigmas = [1e-3, 2e-3, 4e-3];
    let mut medians = Vec::new();
    for &sigma in &sigmas {
        let mut errs: Vec<f64> = (0..10u64)
            .map(|s| {
                let seed = 2000 + s;
                let ens = make_ensemble(32, 16, 48, seed, PsiKind::GaussianScaled).unwrap();
                let inst = generate_instance(&ens, 2, sigma, seed).unwrap();
                recover_instance(&ens, &inst, &TwoStageConfig::default())
                    .ok()
                    .and_then(|r| r.rel_error_matrix)
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        medians.push(median(&mut errs));
    }
    let r1 = medians[1] / medians[0];
    let r2 = medians[2] / medians[1];
    Outcome {
        pass: r1 <= 2.5 && r2 <= 2.5,
        detail: format!(
            "medians {:.3e} {:.3e} {:.3e}; growth per doubling {r1:.3} {r2:.3} (bound 2.5)",
            medians[0], medians[1], medians[2]
        ),
    }
}

fn method_comparison_desk() -> Outcome {
    let spec = ExperimentSpec {
        d: 64,
        k_list: vec![2, 4, 6, 8],
        grid: vec![GridPoint::new(SizeRule::LogRule, SizeRule::MulM(3.0))],
        noise_sigma: 1e-2,
        trials: 25,
        quantile_q: 0.9,
        methods: Method::ALL.to_vec(),
        base_seed: 3,
        solver: SolverSettings::default(),
    };
    let report = run_experiment(&spec).unwrap();
    let q = |m: Method, k: usize| report.cell(m, k, 0).unwrap().quantile;
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [2, 4, 6, 8] {
        parts.push(format!(
            "k={k}: two_stage {:.2e} sdp {:.2e} sdp_l1 {:.2e} l1 {:.2e}",
            q(Method::TwoStage, k),
            q(Method::Sdp, k),
            q(Method::SdpL1, k),
            q(Method::L1, k)
        ));
    }
    for k in [6, 8] {
        let two = q(Method::TwoStage, k);
        let beats_sdp = two < q(Method::Sdp, k);
        let beats_sdp_l1 = two < q(Method::SdpL1, k);
        pass &= beats_sdp && beats_sdp_l1;
        parts.push(format!("k={k}: beats sdp {beats_sdp}, beats sdp_l1 {beats_sdp_l1}"));
    }
    let l1_close = q(Method::L1, 2) <= 2.0 * q(Method::TwoStage, 2);
    pass &= l1_close;
    parts.push(format!("k=2: l1 within 2x {l1_close}"));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn oracle_equivalence() -> Outcome {
    let cfg = TwoStageConfig::with_tolerance(1e-10, 50_000);
    let mut worst: f64 = 0.0;
    for s in 0..10u64 {
        let seed = 4000 + s;
        let ens = make_ensemble(6, 6, 30, seed, PsiKind::GaussianScaled).unwrap();
        let inst = generate_instance(&ens, 2, 0.0, seed).unwrap();
        let oracle = brute_force_cpr(&ens, &inst.y, 2).unwrap();
        let diff = recover_instance(&ens, &inst, &cfg)
            .map(|r| relative_signal_error(&r.signal(), &oracle.signal()).unwrap())
            .unwrap_or(f64::INFINITY);
        worst = worst.max(diff);
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("largest pipeline/oracle difference {worst:.2e} over 10 seeds (bound 1e-6)"),
    }
}

fn lemma_suites() -> Outcome {
    let ens = make_ensemble(64, 16, 1, 5000, PsiKind::GaussianScaled).unwrap();
    let lines = lemma_suite(&ens.psi, 2, 10_000, 5000).unwrap();
    Outcome {
        pass: lines.iter().all(|l| l.pass),
        detail: lines.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("; "),
    }
}

fn projection_doubling() -> Outcome {
    let mut r = rng::stream(6000, rng::STREAM_CHECK);
    let (d, k) = (20, 3);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let supp = index::sample(&mut r, d, k);
        let mut x = Vector::zeros(d);
        for i in supp {
            x[i] = r.sample(StandardNormal);
        }
        let truth = lift(&x).unwrap();
        let scale = 10f64.powf(r.random_range(-3.0..1.0));
        let noise = Matrix::from_fn(d, d, |_, _| r.sample::<f64, _>(StandardNormal)) * scale;
        // Every other trial blends in a competing sparse lift, which pulls
        // both projections toward the wrong structure.
        let m = if trial % 2 == 0 {
            &truth + noise
        } else {
            let mut other = Vector::zeros(d);
            for i in index::sample(&mut r, d, k) {
                other[i] = r.sample(StandardNormal);
            }
            let t: f64 = r.random_range(0.3..0.7);
            &truth * (1.0 - t) + lift(&other).unwrap() * t + noise * 0.01
        };
        let e = (&m - &truth).norm();
        for p in [project_k_sparse(&m, k).unwrap(), project_rank_one_psd(&m).unwrap().0] {
            let ratio = (&p - &truth).norm() / e;
            worst = worst.max(ratio);
            if ratio > 2.0 * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations in 2000 projections; worst ratio {worst:.3} (bound 2)"),
    }
}

fn solver_contracts() -> Outcome {
    let mut problems = Vec::new();
    // (d, k, m, n, sigma, seed)
    let refs = [
        (32, 2, 16, 48, 0.0, 7001),
        (16, 2, 16, 80, 0.0, 7002),
        (32, 3, 24, 72, 1e-3, 7003),
        (64, 4, 32, 96, 1e-2, 7004),
    ];
    let mut checked = 0;
    for &(d, k, m, n, sigma, seed) in &refs {
        let ens = make_ensemble(d, m, n, seed, PsiKind::GaussianScaled).unwrap();
        let inst = generate_instance(&ens, k, sigma, seed).unwrap();

        let cfg = LowRankSolveConfig {
            max_iters: 20_000,
            ..LowRankSolveConfig::with_epsilon(inst.epsilon)
        };
        let lr = solve_trace_min(&ens, &inst.y, &cfg).unwrap();
        if lr.status != SolveStatus::Converged {
            problems.push(format!("stage 1 {seed}: {:?}", lr.status));
        } else {
            let resid = (apply_w(&ens, &lr.b_hat).unwrap() - &inst.y).norm();
            if resid > inst.epsilon + feasibility_slack(&cfg, &inst.y) {
                problems.push(format!("stage 1 {seed}: residual {resid:.3e}"));
            }
            if lambda_min(&lr.b_hat).unwrap() < -1e-8 * lr.b_hat.trace() {
                problems.push(format!("stage 1 {seed}: not PSD"));
            }
        }

        // Stage 2 from the exact low-rank matrix, where X* is feasible.
        let b_star = &ens.psi * &inst.lift * ens.psi.transpose();
        let mut sp = SparseSolveConfig {
            max_iters: 20_000,
            ..Default::default()
        };
        sp.set_radius_from_noise(inst.epsilon, n);
        for b in [&b_star, &lr.b_hat] {
            let res = solve_l1_min(&ens.psi, b, &sp).unwrap();
            let truth_resid = (&ens.psi * &inst.lift * ens.psi.transpose() - b).norm();
            if truth_resid <= sp.radius {
                checked += 1;
                let bound = l1_norm(&inst.lift) + res.duality_gap.unwrap_or(f64::INFINITY);
                if res.l1_value > bound {
                    problems.push(format!("stage 2 {seed}: l1 {:.6e} > {:.6e}", res.l1_value, bound));
                }
            }
        }

        let a = recover_instance(&ens, &inst, &TwoStageConfig::default()).unwrap();
        let b = recover_instance(&ens, &inst, &TwoStageConfig::default()).unwrap();
        if serde_json::to_string(&a).unwrap() != serde_json::to_string(&b).unwrap()
            || a.x_hat_matrix != b.x_hat_matrix
            || a.b_hat != b.b_hat
        {
            problems.push(format!("seed {seed}: runs differ"));
        }
    }
    let small = ExperimentSpec {
        d: 16,
        k_list: vec![2],
        grid: vec![GridPoint::new(SizeRule::MulK(4.0), SizeRule::MulM(3.0))],
        noise_sigma: 1e-3,
        trials: 3,
        quantile_q: 0.9,
        methods: Method::ALL.to_vec(),
        base_seed: 7,
        solver: SolverSettings::default(),
    };
    let r1 = run_experiment(&small).unwrap().to_json().unwrap();
    let r2 = run_experiment(&small).unwrap().to_json().unwrap();
    if r1 != r2 {
        problems.push("experiment reports differ".into());
    }
    Outcome {
        pass: problems.is_empty() && checked >= refs.len(),
        detail: format!(
            "{} reference instances, {checked} feasible-truth sandwich checks, issues: [{}]",
            refs.len(),
            problems.join(", ")
        ),
    }
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, Duration, Check); 7] = [
        (1, "noiseless exact recovery", Duration::from_secs(120), noiseless_recovery),
        (2, "noise scaling", Duration::from_secs(180), noise_scaling),
        (3, "comparison at desk scale", Duration::from_secs(1200), method_comparison_desk),
        (4, "oracle equivalence", Duration::from_secs(60), oracle_equivalence),
        (5, "lemma suites", Duration::from_secs(60), lemma_suites),
        (6, "projection doubling", Duration::from_secs(10), projection_doubling),
        (7, "solver contracts", Duration::from_secs(120), solver_contracts),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut unexpected = 0;
    let mut out = std::io::stdout().lock();
    for (id, name, budget, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t0 = Instant::now();
        let o = check();
        let took = t0.elapsed();
        let pass = o.pass && took <= budget;
        let note = if !pass && KNOWN_FAILURES.contains(&id) {
            " (known, see README)"
        } else {
            ""
        };
        writeln!(
            out,
            "criterion {id} {name}: {}{note} [{:.1}s of {}s] {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            o.detail
        )
        .unwrap();
        out.flush().unwrap();
        if !pass && !KNOWN_FAILURES.contains(&id) {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
