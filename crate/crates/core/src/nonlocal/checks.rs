use rand::Rng;
use serde::Serialize;

use super::{psi_q, psi_q_inv, NonlocalSpec};
use crate::checks::{linspace, AssumptionReport, CheckResult, Lattice, Tracker};
use crate::error::Result;
use crate::grid::{GridFunction, Quadrature};
use crate::par::sample_rng;

const REL_TOL: f64 = 1e-12;

/// Growth of `g`, the bounds on `h_j` and the contraction condition on the
/// boundary data. Growth is sampled on the standard lattice and on
/// `|u|, |v| ∈ [10, 10³]`.
pub fn check_g_assumptions(spec: &NonlocalSpec, lattice: &Lattice) -> Result<AssumptionReport> {
    let g = &spec.g;
    let h = &spec.h;
    let ts = lattice.ts();
    let mut large = linspace(10.0, 1000.0, 21);
    large.extend(large.clone().iter().map(|x| -x));
    let mut us = lattice.us();
    us.extend(&large);
    let mut vs = lattice.ys();
    vs.extend(&large);

    let mut growth = Tracker::new("g growth", REL_TOL);
    let mut check_growth = |t: f64, u: f64, v: f64| match g.eval_g(t, u, v) {
        Ok(val) => {
            let bound = g.growth(u, v);
            growth.record((bound - val.abs()) / (1.0 + bound), || {
                format!("|g({t}, {u}, {v})| = {} > {bound}", val.abs())
            })
        }
        Err(e) => growth.fail(e.to_string()),
    };
    for &t in &ts {
        for &u in &us {
            for &v in &vs {
                check_growth(t, u, v);
            }
        }
    }
    for i in 0..lattice.random {
        let mut rng = sample_rng(lattice.seed, i);
        let t: f64 = rng.random();
        let u = rng.random_range(-1000.0..=1000.0);
        let v = rng.random_range(-1000.0..=1000.0);
        check_growth(t, u, v);
    }

    let mut bounds = [Tracker::new("h0 bound", REL_TOL), Tracker::new("h1 bound", REL_TOL)];
    for (j, tr) in bounds.iter_mut().enumerate() {
        for &v in &vs {
            match h.eval_h(j, v) {
                Ok(val) => {
                    let bound = h.alpha[j] * v.abs() + h.beta[j];
                    tr.record((bound - val.abs()) / (1.0 + bound), || {
                        format!("|h{j}({v})| = {} > {bound}", val.abs())
                    })
                }
                Err(e) => tr.fail(e.to_string()),
            }
        }
    }

    let terms = h.contraction_terms();
    let best = terms[0].min(terms[1]);
    let contraction = CheckResult::exact(
        "boundary contraction",
        best < 1.0,
        1.0 - best,
        format!(
            "min(2α₀VarA₀ + α₁VarA₁, 2α₁VarA₁ + α₀VarA₀) = min({}, {}) is not below 1",
            terms[0], terms[1]
        ),
    );
    let theta = CheckResult::exact(
        "theta below q - 1",
        g.theta < g.q - 1.0,
        g.q - 1.0 - g.theta,
        format!("theta = {} is not below q - 1 = {}", g.theta, g.q - 1.0),
    );
    let [b0, b1] = bounds;
    Ok(AssumptionReport {
        checks: vec![growth.finish(), b0.finish(), b1.finish(), contraction, theta],
    })
}

/// Classical residual of a discrete solution of the second equation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlocalCheck {
    pub passed: bool,
    /// `max_i |β_i + g(t_i, u_i, v_i)|` over interior nodes, where `β_i` is
    /// the derivative of the reconstructed flux at node `i`.
    pub max_residual: f64,
    /// `tol·(1 + ‖g‖_∞)`.
    pub tolerance: f64,
    pub worst_node: usize,
    /// `|v(0) − ∫h₀(v)dA₀|` and `|v(1) − ∫h₁(v)dA₁|`.
    pub boundary_errors: [f64; 2],
    pub boundary_tolerance: f64,
    pub detail: Option<String>,
}

pub const BOUNDARY_TOL: f64 = 1e-8;

/// Solves `Σ w ψ_q⁻¹(ξ + β h (x − offset)) = s` for `ξ`; the left side
/// increases in `ξ`.
fn anchor(s: f64, beta: f64, offset: f64, h: f64, q: f64, rule: Quadrature) -> f64 {
    let avg = |xi: f64| -> f64 {
        rule.reference()
            .iter()
            .map(|&(x, w)| w * psi_q_inv(xi + beta * h * (x - offset), q))
            .sum()
    };
    let spread = beta.abs() * h;
    let (mut lo, mut hi) = (psi_q(s, q) - spread, psi_q(s, q) + spread);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if avg(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Slope `β` of the affine flux `ξ(t) = ξ_i + β (t − t_i)` whose `ψ_q⁻¹`
/// cell averages reproduce the slopes `sl`, `sr` of the two cells meeting at
/// node `i`. For `q = 2` this is `(sr − sl)/h`.
fn flux_derivative(sl: f64, sr: f64, h: f64, q: f64, rule: Quadrature) -> f64 {
    if q == 2.0 {
        return (sr - sl) / h;
    }
    // ξ_L(β) increases and ξ_R(β) decreases in β
    let gap = |beta: f64| anchor(sl, beta, 1.0, h, q, rule) - anchor(sr, beta, 0.0, h, q, rule);
    let beta0 = (psi_q(sr, q) - psi_q(sl, q)) / h;
    let mut width = beta0.abs() + 1.0;
    let (mut lo, mut hi) = (beta0 - width, beta0 + width);
    while gap(lo) > 0.0 {
        width *= 2.0;
        lo = beta0 - width;
    }
    while gap(hi) < 0.0 {
        width *= 2.0;
        hi = beta0 + width;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Checks the differential equation at interior nodes and both nonlocal
/// boundary conditions. `tol` defaults to `10 h`.
///
/// `ψ_q(v̇)` is reconstructed around each interior node as the affine
/// function whose `ψ_q⁻¹` cell averages, under the configured quadrature rule,
/// reproduce the slopes of `v` on the two adjacent cells. Differencing
/// `ψ_q` of the slopes directly has an `O(1)` error next to zeros of `v̇`
/// when `q > 2`.
pub fn verify_nonlocal_solution(
    u: &GridFunction,
    v: &GridFunction,
    spec: &NonlocalSpec,
    tol: Option<f64>,
) -> Result<NonlocalCheck> {
    let grid = v.grid();
    let h = grid.h();
    let q = spec.q();
    let tol = tol.unwrap_or(10.0 * h);
    let slopes = v.slopes();
    let mut max_residual = 0.0f64;
    let mut worst_node = 0;
    let mut g_sup = 0.0f64;
    for i in 1..grid.n_cells() {
        let gv = spec.g.eval_g(grid.node(i), u.values()[i], v.values()[i])?;
        g_sup = g_sup.max(gv.abs());
        let beta = flux_derivative(slopes[i - 1], slopes[i], h, q, spec.quadrature);
        let res = (beta + gv).abs();
        if res > max_residual || res.is_nan() {
            max_residual = res;
            worst_node = i;
        }
    }
    let tolerance = tol * (1.0 + g_sup);
    let values = v.values();
    let boundary_errors = [
        (values[0] - spec.h.boundary_integral(0, v, spec.quadrature)?).abs(),
        (values[values.len() - 1] - spec.h.boundary_integral(1, v, spec.quadrature)?).abs(),
    ];
    let interior_ok = max_residual <= tolerance;
    let boundary_ok = boundary_errors.iter().all(|e| *e <= BOUNDARY_TOL);
    let mut detail = Vec::new();
    if !interior_ok {
        detail.push(format!(
            "residual {max_residual:e} at node {worst_node} (t = {}) exceeds {tolerance:e}",
            grid.node(worst_node)
        ));
    }
    for (j, e) in boundary_errors.iter().enumerate() {
        if *e > BOUNDARY_TOL {
            detail.push(format!("boundary condition at t = {j} off by {e:e}"));
        }
    }
    Ok(NonlocalCheck {
        passed: interior_ok && boundary_ok,
        max_residual,
        tolerance,
        worst_node,
        boundary_errors,
        boundary_tolerance: BOUNDARY_TOL,
        detail: (!detail.is_empty()).then(|| detail.join("; ")),
    })
}
