//! Monotone accelerated proximal gradient (MFISTA).
//!
//! Each accepted iterate has objective no larger than the previous one, which
//! plain FISTA does not guarantee.

use crate::linalg::Matrix;

pub(crate) struct ProxGradProblem<'a> {
    /// Returns `(f(X), ∇f(X))` for the smooth part.
    pub smooth: &'a dyn Fn(&Matrix) -> (f64, Matrix),
    /// Value of the nonsmooth part.
    pub nonsmooth: &'a dyn Fn(&Matrix) -> f64,
    /// `prox_{τ g}(V)`.
    pub prox: &'a dyn Fn(&Matrix, f64) -> Matrix,
}

pub(crate) struct ProxGradOutput {
    pub x: Matrix,
    pub iterations: usize,
    pub converged: bool,
    /// `‖X − prox_{τg}(X − τ∇f(X))‖_F / τ` at the returned point.
    pub gradient_mapping: f64,
    pub objective: Vec<f64>,
    pub last_step: f64,
}

const CHECK_EVERY: usize = 10;

pub(crate) fn mfista(
    problem: &ProxGradProblem<'_>,
    x0: Matrix,
    step: f64,
    max_iters: usize,
    tol: f64,
) -> ProxGradOutput {
    let objective_of = |x: &Matrix| (problem.smooth)(x).0 + (problem.nonsmooth)(x);
    let grad_map = |x: &Matrix| -> f64 {
        let (_, g) = (problem.smooth)(x);
        let p = (problem.prox)(&(x - &g * step), step);
        (x - p).norm() / step
    };

    let mut x = x0;
    let mut fx = objective_of(&x);
    let mut yk = x.clone();
    let mut t: f64 = 1.0;
    let mut history = vec![fx];
    let mut converged = false;
    let mut iterations = 0;
    let mut gm = f64::INFINITY;

    for it in 1..=max_iters.max(1) {
        iterations = it;
        let (_, g) = (problem.smooth)(&yk);
        let zk = (problem.prox)(&(&yk - &g * step), step);
        let fz = objective_of(&zk);
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let x_prev = x.clone();
        if fz <= fx {
            x = zk.clone();
            fx = fz;
        }
        yk = &x + (&zk - &x) * (t / t_new) + (&x - &x_prev) * ((t - 1.0) / t_new);
        t = t_new;
        history.push(fx);

        if it % CHECK_EVERY == 0 {
            gm = grad_map(&x);
            if gm <= tol * (1.0 + x.norm()) {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        gm = grad_map(&x);
    }
    ProxGradOutput {
        x,
        iterations,
        converged,
        gradient_mapping: gm,
        objective: history,
        last_step: step,
    }
}
