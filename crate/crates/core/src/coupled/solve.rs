use serde::Serialize;

use super::{check_sigma_condition, radius_r, ProblemSpec, RadiusReport};
use crate::checks::{AssumptionReport, CheckResult, Lattice};
use crate::engine::{hybrid_solve, CompactMap, HybridOptions, TraceRow, VNorm};
use crate::error::{Error, Result};
use crate::grid::{p_norm, poincare_constant, sup_norm, Grid, GridFunction};
use crate::nonlocal::{
    apply_t, apply_t_detailed, boundedness_rhs, check_g_assumptions, fixed_point_t, verify_nonlocal_solution, CRoot,
    FixedPointOptions, NonlocalCheck, NonlocalSpec,
};
use crate::plaplace::{
    assemble_f, check_coercivity, check_monotonicity, check_phi_f_assumptions, gamma_at, stiffness_space,
    CoercivityOptions, MinorantScaling, PLaplaceOperator,
};

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub lattice: Lattice,
    pub coercivity: CoercivityOptions,
    /// Largest radius tried by [`radius_r`].
    pub y_max_scan: f64,
    pub radius_tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            lattice: Lattice::default(),
            coercivity: CoercivityOptions::default(),
            y_max_scan: 1000.0,
            radius_tol: 1e-6,
        }
    }
}

impl CheckOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.lattice.seed = seed;
        self.coercivity.seed = seed;
        self
    }
}

/// Every sampled verifier of the system plus the invariant radius.
#[derive(Clone, Debug, Serialize)]
pub struct ProblemCheck {
    pub report: AssumptionReport,
    pub radius: Option<RadiusReport>,
    pub lambda_p: f64,
}

pub fn check_problem(spec: &ProblemSpec, opts: &CheckOptions) -> Result<ProblemCheck> {
    spec.validate()?;
    let lambda_p = poincare_constant(spec.p(), spec.n_cells)?;
    let mut report = check_phi_f_assumptions(&spec.plaplace, &opts.lattice)?;
    let coercivity = CoercivityOptions {
        scaling: spec.scaling,
        ..opts.coercivity.clone()
    };
    report.checks.push(check_coercivity(&spec.plaplace, lambda_p, &coercivity)?.result);
    report.checks.push(check_monotonicity(&spec.plaplace, &coercivity)?);
    report.extend(check_g_assumptions(&spec.nonlocal, &opts.lattice)?);
    report.extend(check_sigma_condition(spec, &opts.lattice)?);
    let radius = match radius_r(spec, lambda_p, opts.y_max_scan, opts.radius_tol) {
        Ok(r) => r,
        Err(Error::Assumption(msg)) => {
            report.checks.push(CheckResult::exact("invariant radius", false, f64::NEG_INFINITY, msg));
            return Ok(ProblemCheck {
                report,
                radius: None,
                lambda_p,
            });
        }
        Err(e) => return Err(e),
    };
    report.checks.push(match &radius {
        Some(r) => CheckResult::exact("invariant radius", true, opts.y_max_scan - r.radius, ""),
        None => CheckResult::exact(
            "invariant radius",
            false,
            f64::NEG_INFINITY,
            format!("no radius R ≤ {} satisfies the ball condition", opts.y_max_scan),
        ),
    });
    Ok(ProblemCheck {
        report,
        radius,
        lambda_p,
    })
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Run [`check_problem`] first and refuse failing data unless `force`.
    pub check: bool,
    pub force: bool,
    /// `G(u, v)` = fixed point of `T(u, ·)` started at `v`, instead of one
    /// application of `T`.
    pub nested_inner: bool,
    /// Use this radius instead of the certified one.
    pub radius: Option<f64>,
    pub check_options: CheckOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            check: true,
            force: false,
            nested_inner: false,
            radius: None,
            check_options: CheckOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Residuals {
    /// `‖F(u, v)‖_*` in the stiffness dual norm.
    pub eq1_dual_norm: f64,
    pub eq1_tolerance: f64,
    /// `‖T(u, v) − v‖_∞`.
    pub eq2_update_sup: f64,
    pub eq2_classical: NonlocalCheck,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub problem: Option<String>,
    pub converged: bool,
    pub n_cells: usize,
    pub p: f64,
    pub q: f64,
    pub residuals: Residuals,
    pub gamma: f64,
    pub gamma_tolerance: f64,
    pub u_p_norm: f64,
    pub v_sup: f64,
    pub lambda_p: f64,
    pub scaling: MinorantScaling,
    pub radius: f64,
    /// `certified`, `override` or `unbounded`.
    pub radius_source: String,
    pub radius_report: Option<RadiusReport>,
    /// `c(u, v)` of the final `v`.
    pub c: CRoot,
    pub stages_run: usize,
    pub epsilon_final: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub clipped_at_end: bool,
    pub nested_inner: bool,
    pub start: String,
    pub assumptions: Option<AssumptionReport>,
    pub diagnostics: Vec<String>,
    pub trace: Vec<TraceRow>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: GridFunction,
    pub v: GridFunction,
    pub report: SolveReport,
}

/// `G(u, v)` of the outer loop.
struct TMap<'a> {
    spec: &'a NonlocalSpec,
    grid: Grid,
    nested: Option<FixedPointOptions>,
}

impl CompactMap for TMap<'_> {
    fn eval(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let u = GridFunction::from_interior(self.grid, u)?;
        let v = GridFunction::new(self.grid, v.to_vec())?;
        Ok(match &self.nested {
            Some(opts) => fixed_point_t(&u, &v, self.spec, opts)?.v.into_values(),
            None => apply_t(&u, &v, self.spec)?.into_values(),
        })
    }

    fn majorant(&self, x: f64, y: f64) -> Option<f64> {
        // the stiffness norm bounds the sup norm in one dimension
        Some(boundedness_rhs(&self.spec.g, &self.spec.h, x, y))
    }
}

/// Solves the coupled system from `u = 0`, `v = 0`.
pub fn solve_system(spec: &ProblemSpec, opts: &SolveOptions) -> Result<Solution> {
    spec.validate()?;
    let grid = Grid::new(spec.n_cells)?;
    let mut diagnostics = Vec::new();

    let (assumptions, radius_report, lambda_p) = if opts.check {
        let c = check_problem(spec, &opts.check_options)?;
        if !c.report.passed() {
            let failed: Vec<String> = c.report.failures().map(|f| f.name.clone()).collect();
            if !opts.force {
                return Err(Error::Assumption(format!("failed checks: {}", failed.join(", "))));
            }
            diagnostics.push(format!("proceeding despite failed checks: {}", failed.join(", ")));
        }
        (Some(c.report), c.radius, c.lambda_p)
    } else {
        let lambda_p = poincare_constant(spec.p(), spec.n_cells)?;
        let r = radius_r(spec, lambda_p, opts.check_options.y_max_scan, opts.check_options.radius_tol)?;
        (None, r, lambda_p)
    };

    let (radius, radius_source) = match (opts.radius, &radius_report) {
        (Some(r), _) => (r, "override"),
        (None, Some(r)) => (r.radius, "certified"),
        (None, None) if opts.force => {
            diagnostics.push("no certified radius; running without a ball".into());
            (f64::INFINITY, "unbounded")
        }
        (None, None) => return Err(Error::Assumption("no certified invariant radius".into())),
    };

    let op = PLaplaceOperator::new(&spec.plaplace, grid)?;
    let tol = &spec.tolerances;
    let g = TMap {
        spec: &spec.nonlocal,
        grid,
        nested: opts.nested_inner.then(|| FixedPointOptions {
            radius,
            tol: tol.outer,
            max_iter: tol.max_outer,
            ..FixedPointOptions::default()
        }),
    };
    let space = stiffness_space(&grid)?;
    let hybrid = HybridOptions {
        // R = 0 is the degenerate ball {0}
        radius: radius.max(f64::MIN_POSITIVE),
        schedule: spec.epsilon_schedule.clone(),
        tol_inner: tol.inner,
        tol_outer: tol.outer,
        max_outer: tol.max_outer,
        inner_max_iter: tol.inner_max_iter,
        v_norm: VNorm::Sup,
        ..HybridOptions::default()
    };
    let sol = hybrid_solve(&op, &g, &space, &vec![0.0; grid.n_interior()], &vec![0.0; grid.n_nodes()], &hybrid)?;

    let u = GridFunction::from_interior(grid, &sol.u)?;
    let v = GridFunction::new(grid, sol.v.clone())?;
    let eq1 = assemble_f(&u, &v, &spec.plaplace)?.dual_norm(&grid)?;
    let t = apply_t_detailed(&u, &v, &spec.nonlocal)?;
    let update = t
        .value
        .values()
        .iter()
        .zip(v.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let classical = verify_nonlocal_solution(&u, &v, &spec.nonlocal, tol.classical)?;
    let gamma = gamma_at(&u, &v, &spec.plaplace, lambda_p, spec.scaling)?;
    let v_sup = sup_norm(&v);

    if eq1 > tol.residual {
        diagnostics.push(format!("first equation residual {eq1:e} above {:e}", tol.residual));
    }
    if !classical.passed {
        diagnostics.push(format!(
            "second equation check failed: {}",
            classical.detail.clone().unwrap_or_default()
        ));
    }
    if gamma > tol.gamma {
        diagnostics.push(format!("γ(‖u‖_p, ‖v‖_∞) = {gamma:e} is positive"));
    }
    if v_sup > radius {
        diagnostics.push(format!("‖v‖_∞ = {v_sup} exceeds R = {radius}"));
    }
    if sol.clipped_at_end {
        diagnostics.push("v was clipped at termination; R does not certify the ball".into());
    }
    let converged = eq1 <= tol.residual
        && classical.passed
        && gamma <= tol.gamma
        && v_sup <= radius
        && !sol.clipped_at_end;

    let report = SolveReport {
        problem: spec.name.clone(),
        converged,
        n_cells: spec.n_cells,
        p: spec.p(),
        q: spec.q(),
        residuals: Residuals {
            eq1_dual_norm: eq1,
            eq1_tolerance: tol.residual,
            eq2_update_sup: update,
            eq2_classical: classical,
        },
        gamma,
        gamma_tolerance: tol.gamma,
        u_p_norm: p_norm(&u, spec.p())?,
        v_sup,
        lambda_p,
        scaling: spec.scaling,
        radius,
        radius_source: radius_source.into(),
        radius_report,
        c: t.root,
        stages_run: sol.stages_run,
        epsilon_final: sol.epsilon,
        outer_iterations: sol.trace.len(),
        inner_iterations: sol.inner_iterations,
        clipped_at_end: sol.clipped_at_end,
        nested_inner: opts.nested_inner,
        start: "u = 0, v = 0".into(),
        assumptions,
        diagnostics,
        trace: sol.trace,
    };
    Ok(Solution { u, v, report })
}
