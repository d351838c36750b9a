//! Riemannian conjugate gradient on the complex-circle manifold.

use super::manifold::{
    euclidean_grad, matching_objective, real_inner, retract, riemannian_grad, vector_transport,
    ManifoldPoint,
};
use crate::error::Result;
use crate::numerics::{ComplexMatrix, ComplexVector};

/// Backtracking line-search constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Armijo {
    pub initial_step: f64,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
    pub max_halvings: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Armijo {
            initial_step: 1.0,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            max_halvings: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RcgOptions {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    pub armijo: Armijo,
}

impl Default for RcgOptions {
    fn default() -> Self {
        RcgOptions {
            max_iters: 200,
            grad_tol: 1e-6,
            armijo: Armijo::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RcgOutcome {
    pub point: ManifoldPoint,
    /// Objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Set when backtracking ran out of halvings; `point` is then the best
    /// iterate found before the failed search.
    pub line_search_failed: bool,
    /// Largest `||q_i| − 1|` over every iterate visited.
    pub max_modulus_error: f64,
}

impl RcgOutcome {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&f64::NAN)
    }
}

/// Minimizes `‖W̃_opt − Q W‖_F²` over unit-modulus `Q` with `W` held fixed,
/// using Polak–Ribière+ directions and Armijo backtracking.
pub fn rcg_minimize(
    w: &ComplexMatrix,
    w_opt: &ComplexMatrix,
    q0: ManifoldPoint,
    opts: &RcgOptions,
) -> Result<RcgOutcome> {
    let mut q = q0;
    let mut f = matching_objective(q.as_vector(), w, w_opt)?;
    let mut grad = riemannian_grad(q.as_vector(), &euclidean_grad(q.as_vector(), w, w_opt)?);
    let mut grad_sq = grad.norm_sqr();
    let mut eta: ComplexVector = grad.iter().map(|g| -g).collect();
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut line_search_failed = false;
    let mut max_modulus_error = q.max_modulus_error();

    while iterations < opts.max_iters && grad_sq.sqrt() >= opts.grad_tol {
        let mut slope = real_inner(&grad, &eta);
        if slope >= 0.0 {
            eta = grad.iter().map(|g| -g).collect();
            slope = -grad_sq;
        }

        let mut step = opts.armijo.initial_step;
        let mut accepted = None;
        for _ in 0..=opts.armijo.max_halvings {
            let candidate = retract(q.as_vector(), &eta, step)?;
            let f_new = matching_objective(candidate.as_vector(), w, w_opt)?;
            if f_new <= f + opts.armijo.sufficient_decrease * step * slope {
                accepted = Some((candidate, f_new));
                break;
            }
            step *= opts.armijo.backtrack;
        }
        let Some((q_new, f_new)) = accepted else {
            line_search_failed = true;
            break;
        };

        let grad_new =
            riemannian_grad(q_new.as_vector(), &euclidean_grad(q_new.as_vector(), w, w_opt)?);
        let grad_prev = vector_transport(q_new.as_vector(), &grad);
        let eta_prev = vector_transport(q_new.as_vector(), &eta);
        let diff: ComplexVector = grad_new.iter().zip(grad_prev.iter()).map(|(a, b)| a - b).collect();
        let beta = (real_inner(&grad_new, &diff) / grad_sq).max(0.0);
        eta = grad_new
            .iter()
            .zip(eta_prev.iter())
            .map(|(g, e)| e * beta - g)
            .collect();

        max_modulus_error = max_modulus_error.max(q_new.max_modulus_error());
        q = q_new;
        f = f_new;
        grad = grad_new;
        grad_sq = grad.norm_sqr();
        trace.push(f);
        iterations += 1;
    }

    Ok(RcgOutcome {
        point: q,
        objective_trace: trace,
        grad_norm: grad_sq.sqrt(),
        iterations,
        line_search_failed,
        max_modulus_error,
    })
}
