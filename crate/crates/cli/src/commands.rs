use std::time::Instant;

use serde::Serialize;

use hybridbvp::coupled::{check_problem, solve_system, CheckOptions, ProblemSpec, SolveOptions};
use hybridbvp::engine::{InnerOptions, TraceRow};
use hybridbvp::grid::{poincare_constant_with, sup_norm, GridFunction, PoincareOptions};
use hybridbvp::nonlocal::{apply_t_detailed, fixed_point_t, verify_nonlocal_solution, CRoot, FixedPointOptions, NonlocalCheck};
use hybridbvp::plaplace::{assemble_f, solve_u_with};

use crate::io::{ensure_dir, load_problem, read_grid_column, write_columns, write_json, write_solution, write_trace};
use crate::{CheckArgs, EigenArgs, Failure, SolveArgs, SolvePArgs, SolveQArgs};

fn label(spec: &ProblemSpec) -> &str {
    spec.name.as_deref().unwrap_or("problem")
}

pub fn solve(a: &SolveArgs) -> Result<(), Failure> {
    let mut spec = load_problem(&a.problem)?;
    if let Some(tol) = a.problem.tol {
        spec.tolerances.outer = tol;
        spec.validate()?;
    }
    let opts = SolveOptions {
        force: a.force,
        nested_inner: a.nested_inner,
        check_options: CheckOptions::default().with_seed(a.problem.seed),
        ..SolveOptions::default()
    };
    let sol = solve_system(&spec, &opts)?;
    let dir = &a.problem.out;
    ensure_dir(dir)?;
    write_solution(&dir.join("solution.csv"), &sol.u, &sol.v)?;
    write_json(&dir.join("report.json"), &sol.report)?;
    write_trace(&dir.join("trace.csv"), &sol.report.trace)?;

    let r = &sol.report;
    println!(
        "{}: {} n={} eq1={:.3e} eq2={:.3e}/{:.3e} boundary={:.1e} gamma={:.4e} |v|={:.6} R={:.6} c={:.6} stages={}",
        label(&spec),
        if r.converged { "converged" } else { "NOT converged" },
        r.n_cells,
        r.residuals.eq1_dual_norm,
        r.residuals.eq2_classical.max_residual,
        r.residuals.eq2_classical.tolerance,
        r.residuals.eq2_classical.boundary_errors[0].max(r.residuals.eq2_classical.boundary_errors[1]),
        r.gamma,
        r.v_sup,
        r.radius,
        r.c.c,
        r.stages_run,
    );
    if r.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(r.diagnostics.join("; ")))
    }
}

#[derive(Serialize)]
struct SolvePReport {
    problem: Option<String>,
    n_cells: usize,
    p: f64,
    converged: bool,
    eq1_dual_norm: f64,
    eq1_tolerance: f64,
    epsilons: Vec<f64>,
    inner_iterations: usize,
    u_sup: f64,
    trace: Vec<TraceRow>,
}

pub fn solve_p(a: &SolvePArgs) -> Result<(), Failure> {
    let spec = load_problem(&a.problem)?;
    let v = read_grid_column(&a.v, "v")?;
    let grid = *v.grid();
    let tol = &spec.tolerances;
    let inner = InnerOptions {
        tol: a.problem.tol.unwrap_or(tol.inner),
        max_iter: tol.inner_max_iter,
        ..InnerOptions::default()
    };
    // ε = 0 is admissible outright for a strongly monotone operator
    let schedule = if spec.plaplace.strong_modulus().is_some() {
        vec![0.0]
    } else {
        spec.epsilon_schedule.clone()
    };

    // continuation in ε, warm-started, until the unregularized residual is small
    let mut u = GridFunction::zeros(grid);
    let mut eq1 = f64::INFINITY;
    let mut used = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    for (stage, &eps) in schedule.iter().enumerate() {
        let (next, s) = solve_u_with(&v, eps, &spec.plaplace, Some(&u), &inner)?;
        iterations += s.iterations;
        trace.extend(s.trace.iter().zip(&s.steps).enumerate().map(|(iter, (r, step))| TraceRow {
            stage,
            iter,
            residual: *r,
            step: *step,
            clipped: false,
        }));
        u = next;
        used.push(eps);
        eq1 = assemble_f(&u, &v, &spec.plaplace)?.dual_norm(&grid)?;
        if eq1 <= tol.outer {
            break;
        }
    }
    let report = SolvePReport {
        problem: spec.name.clone(),
        n_cells: grid.n_cells(),
        p: spec.p(),
        converged: eq1 <= tol.residual,
        eq1_dual_norm: eq1,
        eq1_tolerance: tol.residual,
        epsilons: used,
        inner_iterations: iterations,
        u_sup: sup_norm(&u),
        trace,
    };
    let dir = &a.problem.out;
    ensure_dir(dir)?;
    write_solution(&dir.join("solution.csv"), &u, &v)?;
    write_json(&dir.join("report.json"), &report)?;
    write_trace(&dir.join("trace.csv"), &report.trace)?;
    println!(
        "{}: first equation {} n={} eq1={:.3e} eps={:.3e} |u|={:.6}",
        label(&spec),
        if report.converged { "converged" } else { "NOT converged" },
        report.n_cells,
        eq1,
        report.epsilons.last().copied().unwrap_or(f64::NAN),
        report.u_sup,
    );
    if report.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!("residual {eq1:e} above {:e}", tol.residual)))
    }
}

#[derive(Serialize)]
struct SolveQReport {
    problem: Option<String>,
    n_cells: usize,
    q: f64,
    converged: bool,
    iterations: usize,
    last_update: f64,
    c: CRoot,
    check: NonlocalCheck,
    v_sup: f64,
    trace: Vec<TraceRow>,
}

pub fn solve_q(a: &SolveQArgs) -> Result<(), Failure> {
    let spec = load_problem(&a.problem)?;
    let u = read_grid_column(&a.u, "u")?;
    let grid = *u.grid();
    let tol = &spec.tolerances;
    let opts = FixedPointOptions {
        tol: a.problem.tol.unwrap_or(tol.outer),
        max_iter: tol.max_outer,
        ..FixedPointOptions::default()
    };
    let fp = fixed_point_t(&u, &GridFunction::zeros(grid), &spec.nonlocal, &opts)?;
    let root = apply_t_detailed(&u, &fp.v, &spec.nonlocal)?.root;
    let check = verify_nonlocal_solution(&u, &fp.v, &spec.nonlocal, tol.classical)?;
    let report = SolveQReport {
        problem: spec.name.clone(),
        n_cells: grid.n_cells(),
        q: spec.q(),
        converged: check.passed,
        iterations: fp.iterations,
        last_update: fp.last_update,
        c: root,
        v_sup: sup_norm(&fp.v),
        check,
        trace: fp.trace,
    };
    let dir = &a.problem.out;
    ensure_dir(dir)?;
    write_solution(&dir.join("solution.csv"), &u, &fp.v)?;
    write_json(&dir.join("report.json"), &report)?;
    write_trace(&dir.join("trace.csv"), &report.trace)?;
    println!(
        "{}: second equation {} n={} iterations={} update={:.3e} residual={:.3e}/{:.3e} c={:.10}",
        label(&spec),
        if report.converged { "converged" } else { "NOT converged" },
        report.n_cells,
        report.iterations,
        report.last_update,
        report.check.max_residual,
        report.check.tolerance,
        report.c.c,
    );
    if report.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(report.check.detail.clone().unwrap_or_default()))
    }
}

pub fn check(a: &CheckArgs) -> Result<(), Failure> {
    let spec = load_problem(&a.problem)?;
    let opts = CheckOptions::default().with_seed(a.problem.seed);
    let c = check_problem(&spec, &opts)?;
    for r in &c.report.checks {
        println!(
            "{:<5} {:<24} samples={:<7} worst margin={:.3e}{}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.samples,
            r.worst_margin,
            r.witness.as_deref().map(|w| format!("  [{w}]")).unwrap_or_default(),
        );
    }
    match &c.radius {
        Some(r) => println!("lambda_p = {:.10}  R = {:.10}", c.lambda_p, r.radius),
        None => println!("lambda_p = {:.10}  R = none", c.lambda_p),
    }
    if a.write {
        ensure_dir(&a.problem.out)?;
        write_json(&a.problem.out.join("report.json"), &c)?;
    }
    if c.report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = c.report.failures().map(|f| f.name.as_str()).collect();
        Err(Failure::ChecksFailed(format!("failed checks: {}", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct EigenReport {
    p: f64,
    n_cells: usize,
    lambda_p: f64,
    iterations: usize,
    seed: u64,
}

pub fn eigen(a: &EigenArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let opts = PoincareOptions {
        seed: a.seed,
        ..PoincareOptions::default()
    };
    let res = poincare_constant_with(a.p, a.n_cells, &opts)?;
    let elapsed = start.elapsed();
    println!(
        "lambda_p = {:.12} (p = {}, n_cells = {}, {:.3} s)",
        res.lambda,
        a.p,
        a.n_cells,
        elapsed.as_secs_f64()
    );
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        let report = EigenReport {
            p: a.p,
            n_cells: a.n_cells,
            lambda_p: res.lambda,
            iterations: res.iterations,
            seed: a.seed,
        };
        write_json(&dir.join("report.json"), &report)?;
        let grid = res.minimizer.grid();
        let rows: Vec<Vec<f64>> = (0..grid.n_nodes())
            .map(|i| vec![grid.node(i), res.minimizer.values()[i]])
            .collect();
        write_columns(&dir.join("eigenfunction.csv"), &["t", "u"], &rows)?;
    }
    Ok(())
}
