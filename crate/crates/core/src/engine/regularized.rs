use super::{DualityMap, ParamOperator};
use crate::error::{Error, Result};
use crate::linalg::axpy;

#[derive(Clone, Debug)]
pub struct InnerOptions {
    /// Target for `‖F(u,v) + εJu‖_*`.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest step for the Gram-preconditioned direction.
    pub max_step: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            tol: 1e-10,
            max_iter: 10_000,
            max_step: 1e8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub u: Vec<f64>,
    /// Final `‖F(u,v) + εJu‖_*`.
    pub residual: f64,
    pub iterations: usize,
    /// Residual after every accepted step, starting with the initial one;
    /// strictly decreasing.
    pub trace: Vec<f64>,
    pub steps: Vec<f64>,
}

const MAX_HALVINGS: usize = 80;

/// Solves `F(u, v) + εJu = 0` for `u` by damped descent
/// `u ← u − τ d`, with `d = G⁻¹(F + εJu)` or the operator's tangent
/// direction, halving `τ` until the dual residual decreases and doubling it
/// after every accepted step.
pub fn solve_regularized<F: ParamOperator + ?Sized>(
    op: &F,
    j: DualityMap<'_>,
    v: &[f64],
    eps: f64,
    start: Option<&[f64]>,
    opts: &InnerOptions,
) -> Result<InnerSolution> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("regularization must be finite and ≥ 0, got {eps}")));
    }
    if eps == 0.0 && !op.strong_modulus().is_some_and(|m| m > 0.0) {
        return Err(Error::invalid(
            "ε = 0 requires a strongly monotone operator (no positive modulus declared)",
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("inner tolerance must be positive"));
    }
    let space = j.space();
    let n = space.dim();
    let mut u = match start {
        Some(s) if s.len() == n => s.to_vec(),
        Some(s) => {
            return Err(Error::invalid(format!(
                "start vector has {} entries, space has dimension {n}",
                s.len()
            )))
        }
        None => vec![0.0; n],
    };

    let residual_at = |u: &[f64]| -> Result<(Vec<f64>, f64)> {
        let mut r = op.eval(u, v)?;
        if r.len() != n {
            return Err(Error::invalid(format!(
                "operator returned {} entries, space has dimension {n}",
                r.len()
            )));
        }
        if eps > 0.0 {
            axpy(eps, &j.apply(u), &mut r);
        }
        let norm = space.dual_norm(&r)?;
        Ok((r, norm))
    };

    let (mut r, mut res) = residual_at(&u)?;
    if !res.is_finite() {
        return Err(Error::invalid("operator is not finite at the starting point"));
    }
    let mut trace = vec![res];
    let mut steps = Vec::new();
    let mut use_tangent = true;
    let mut tau_tangent = 1.0;
    let mut tau_gradient = 1.0;

    for iter in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(InnerSolution {
                u,
                residual: res,
                iterations: iter,
                trace,
                steps,
            });
        }
        let tangent = if use_tangent {
            op.tangent_solve(&u, v, eps, &r).transpose()?
        } else {
            None
        };
        let (d, tau, cap) = match &tangent {
            Some(d) => (d.clone(), &mut tau_tangent, 1.0),
            None => (space.solve(&r)?, &mut tau_gradient, opts.max_step),
        };

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = u.clone();
            axpy(-*tau, &d, &mut trial);
            let (rt, nt) = residual_at(&trial)?;
            if nt < res {
                accepted = Some((trial, rt, nt));
                break;
            }
            *tau *= 0.5;
        }
        match accepted {
            Some((trial, rt, nt)) => {
                steps.push(*tau);
                u = trial;
                r = rt;
                res = nt;
                trace.push(res);
                *tau = (*tau * 2.0).min(cap);
            }
            None if tangent.is_some() => {
                log::debug!("tangent direction stalled at residual {res:e}; falling back to the Gram direction");
                use_tangent = false;
            }
            None => {
                return Err(Error::NonConvergence {
                    what: format!("regularized solve (stalled line search, ε = {eps:e})"),
                    iterations: iter,
                    last_residual: res,
                    residual_trace: trace,
                });
            }
        }
    }
    if res <= opts.tol {
        return Ok(InnerSolution {
            u,
            residual: res,
            iterations: opts.max_iter,
            trace,
            steps,
        });
    }
    Err(Error::NonConvergence {
        what: format!("regularized solve (ε = {eps:e})"),
        iterations: opts.max_iter,
        last_residual: res,
        residual_trace: trace,
    })
}
