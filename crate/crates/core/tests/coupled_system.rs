use hybridbvp::coupled::{registry, solve_system, SolveOptions};
use hybridbvp::grid::{GridFunction, Grid};
use hybridbvp::nonlocal::{fixed_point_t, FixedPointOptions};
use hybridbvp::plaplace::solve_u;

fn max_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn example_converges_with_all_post_checks() {
    let spec = registry("paper-example").unwrap();
    let sol = solve_system(&spec, &SolveOptions::default()).unwrap();
    let r = &sol.report;
    assert!(r.converged, "{:?}", r.diagnostics);
    assert!(r.residuals.eq1_dual_norm <= 1e-6);
    assert!(r.residuals.eq2_classical.passed);
    assert!(r.residuals.eq2_classical.boundary_errors.iter().all(|e| *e <= 1e-8));
    assert!(r.gamma <= 1e-6);
    assert!(r.v_sup <= r.radius);
    assert_eq!(r.radius_source, "certified");
    assert!(r.assumptions.as_ref().unwrap().passed());
    assert_eq!(sol.u.values()[0], 0.0);
    assert_eq!(*sol.u.values().last().unwrap(), 0.0);
}

#[test]
fn nested_inner_loop_agrees() {
    let mut spec = registry("paper-example").unwrap();
    spec.n_cells = 64;
    let jacobi = solve_system(&spec, &SolveOptions::default()).unwrap();
    let nested = solve_system(
        &spec,
        &SolveOptions {
            nested_inner: true,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    assert!(nested.report.converged);
    assert!(max_diff(&jacobi.u, &nested.u) < 1e-8);
    assert!(max_diff(&jacobi.v, &nested.v) < 1e-8);
}

#[test]
fn decoupled_problem_matches_single_equation_solves() {
    let spec = registry("decoupled").unwrap();
    let sol = solve_system(&spec, &SolveOptions::default()).unwrap();
    assert!(sol.report.converged, "{:?}", sol.report.diagnostics);

    let grid = Grid::new(spec.n_cells).unwrap();
    let zero = GridFunction::zeros(grid);
    let u = solve_u(&zero, 0.0, 1e-13, &spec.plaplace).unwrap();
    let v = fixed_point_t(&zero, &zero, &spec.nonlocal, &FixedPointOptions::default()).unwrap().v;
    let (du, dv) = (max_diff(&u, &sol.u), max_diff(&v, &sol.v));
    assert!(du < 1e-10, "{du}");
    assert!(dv < 1e-10, "{dv}");

    let pi = std::f64::consts::PI;
    let nodes = grid.nodes();
    let eu = nodes.iter().zip(sol.u.values()).map(|(t, x)| (x - (pi * t).sin()).abs()).fold(0.0, f64::max);
    let ev = nodes.iter().zip(sol.v.values()).map(|(t, x)| (x - (t - t * t * t)).abs()).fold(0.0, f64::max);
    assert!(eu < 5e-3 && ev < 1e-3, "{eu} {ev}");
}

#[test]
fn zero_data_gives_zero() {
    let sol = solve_system(&registry("zero").unwrap(), &SolveOptions::default()).unwrap();
    assert!(sol.report.converged);
    assert!(sol.u.values().iter().chain(sol.v.values()).all(|x| *x == 0.0));
}

#[test]
fn example_residuals_shrink_under_refinement() {
    let residual = |n: usize| {
        let mut spec = registry("paper-example").unwrap();
        spec.n_cells = n;
        let opts = SolveOptions {
            check: false,
            ..SolveOptions::default()
        };
        let r = solve_system(&spec, &opts).unwrap().report;
        assert!(r.converged);
        r.residuals.eq2_classical.max_residual
    };
    let (a, b) = (residual(64), residual(128));
    assert!(b < a, "{a} {b}");
}

#[test]
fn reports_are_reproducible() {
    let mut spec = registry("paper-example").unwrap();
    spec.n_cells = 64;
    let a = serde_json::to_string(&solve_system(&spec, &SolveOptions::default()).unwrap().report).unwrap();
    let b = serde_json::to_string(&solve_system(&spec, &SolveOptions::default()).unwrap().report).unwrap();
    assert_eq!(a, b);
}
