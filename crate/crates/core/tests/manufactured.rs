use std::f64::consts::PI;

use hybridbvp::coupled::registry;
use hybridbvp::grid::{Grid, GridFunction};
use hybridbvp::plaplace::solve_u;

fn sup_error(name: &str, n: usize, exact: impl Fn(f64) -> f64) -> f64 {
    let spec = registry(name).unwrap().plaplace;
    let grid = Grid::new(n).unwrap();
    let eps = if spec.p == 2.0 { 0.0 } else { 1e-12 };
    let u = solve_u(&GridFunction::zeros(grid), eps, 1e-10, &spec).unwrap();
    grid.nodes()
        .iter()
        .zip(u.values())
        .map(|(t, x)| (x - exact(*t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn p2_sine() {
    let e = sup_error("manufactured-p2", 256, |t| (PI * t).sin());
    assert!(e <= 5e-3, "{e}");
}

#[test]
fn p2_second_order() {
    let errs: Vec<f64> = [64, 128, 256]
        .into_iter()
        .map(|n| sup_error("manufactured-p2", n, |t| (PI * t).sin()))
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn p3_parabola() {
    let e = sup_error("manufactured-p3", 256, |t| t * (1.0 - t));
    assert!(e <= 1e-2, "{e}");
}
