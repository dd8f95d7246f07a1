//! Two-dimensional demos of the engine, each printed with a Newton or
//! linear-algebra reference solution.

use clap::ValueEnum;
use serde::Serialize;

use hybridbvp::engine::{
    krasnoselskii_lambda0, solve_condkras, solve_eigen, solve_regularized, BallSet, CondKrasOptions, FnOperator,
    InnerOptions, Lambda0Options, Lambda0Report, VecSpace,
};

use crate::io::{ensure_dir, write_json};
use crate::{Failure, SandboxArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    /// Zero of the strongly monotone `F(u) = u³ + Qu − b`.
    BrowderMinty,
    /// `u = Qu + λc` with `Q` a rotation by π/2 scaled by 1/2.
    Lambda0,
    /// `u = 0.3 tanh(u) + B(u)` in the ball of radius 3.
    Condkras,
}

#[derive(Serialize)]
struct DemoReport {
    demo: &'static str,
    solution: Vec<f64>,
    reference: Vec<f64>,
    max_difference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda0: Option<Lambda0Report>,
}

fn solve2(j: [[f64; 2]; 2], r: [f64; 2]) -> [f64; 2] {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    [(r[0] * j[1][1] - j[0][1] * r[1]) / det, (j[0][0] * r[1] - r[0] * j[1][0]) / det]
}

fn newton(x0: [f64; 2], h: impl Fn([f64; 2]) -> ([f64; 2], [[f64; 2]; 2])) -> [f64; 2] {
    let mut x = x0;
    for _ in 0..100 {
        let (r, j) = h(x);
        let d = solve2(j, r);
        x = [x[0] - d[0], x[1] - d[1]];
        if d[0].abs().max(d[1].abs()) < 1e-15 {
            break;
        }
    }
    x
}

const B: [f64; 2] = [2.0, -1.0];
const C: [f64; 2] = [1.0, -2.0];

fn browder_minty() -> Result<DemoReport, Failure> {
    // the linear part has symmetric part I, so F is strongly monotone with m = 1
    let op = FnOperator::new(|u: &[f64], v: &[f64]| {
        Ok(vec![u[0].powi(3) + u[0] - u[1] - v[0], u[1].powi(3) + u[0] + u[1] - v[1]])
    })
    .strongly_monotone(1.0);
    let space = VecSpace::euclidean(2);
    let opts = InnerOptions {
        tol: 1e-13,
        ..InnerOptions::default()
    };
    let sol = solve_regularized(&op, space.duality_map(), &B, 0.0, None, &opts)?;
    let reference = newton([0.0, 0.0], |x| {
        (
            [x[0].powi(3) + x[0] - x[1] - B[0], x[1].powi(3) + x[0] + x[1] - B[1]],
            [[3.0 * x[0] * x[0] + 1.0, -1.0], [1.0, 3.0 * x[1] * x[1] + 1.0]],
        )
    });
    Ok(report("browder-minty", sol.u, reference, None, None))
}

fn lambda0(seed: u64) -> Result<DemoReport, Failure> {
    let q = [[0.0, -0.5], [0.5, 0.0]];
    let a = move |u: &[f64]| Ok(vec![q[0][0] * u[0] + q[0][1] * u[1], q[1][0] * u[0] + q[1][1] * u[1]]);
    let b = |_: &[f64]| Ok(C.to_vec());
    let space = VecSpace::euclidean(2);
    let opts = Lambda0Options {
        seed,
        ..Lambda0Options::default()
    };
    let rep = krasnoselskii_lambda0(&a, &b, &space, &opts)?;
    let lambda = 0.5 * rep.lambda0_certified;
    let u = solve_eigen(&a, &b, lambda, rep.r_certified, rep.m.max(0.0), &space, 1e-12)?;
    let reference = solve2(
        [[1.0 - q[0][0], -q[0][1]], [-q[1][0], 1.0 - q[1][1]]],
        [lambda * C[0], lambda * C[1]],
    );
    Ok(report("lambda0", u, reference, Some(lambda), Some(rep)))
}

fn condkras() -> Result<DemoReport, Failure> {
    let a = |u: &[f64]| Ok(u.iter().map(|x| 0.3 * x.tanh()).collect());
    let b = |v: &[f64]| Ok(vec![0.8 + 0.2 * v[1].sin(), -0.5 + 0.2 * v[0].sin()]);
    let d = BallSet {
        center: vec![0.0, 0.0],
        radius: 3.0,
    };
    let opts = CondKrasOptions {
        m: 0.3,
        tol: 1e-12,
        ..CondKrasOptions::default()
    };
    let u = solve_condkras(&a, &b, &d, &VecSpace::euclidean(2), &opts)?;
    let sech2 = |t: f64| 1.0 / t.cosh().powi(2);
    let reference = newton([0.0, 0.0], |x| {
        (
            [
                x[0] - 0.3 * x[0].tanh() - 0.8 - 0.2 * x[1].sin(),
                x[1] - 0.3 * x[1].tanh() + 0.5 - 0.2 * x[0].sin(),
            ],
            [
                [1.0 - 0.3 * sech2(x[0]), -0.2 * x[1].cos()],
                [-0.2 * x[0].cos(), 1.0 - 0.3 * sech2(x[1])],
            ],
        )
    });
    Ok(report("condkras", u, reference, None, None))
}

fn report(
    demo: &'static str,
    solution: Vec<f64>,
    reference: [f64; 2],
    lambda: Option<f64>,
    lambda0: Option<Lambda0Report>,
) -> DemoReport {
    let max_difference = solution
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    DemoReport {
        demo,
        solution,
        reference: reference.to_vec(),
        max_difference,
        lambda,
        lambda0,
    }
}

pub fn run(a: &SandboxArgs) -> Result<(), Failure> {
    let rep = match a.demo {
        Demo::BrowderMinty => browder_minty()?,
        Demo::Lambda0 => lambda0(a.seed)?,
        Demo::Condkras => condkras()?,
    };
    println!(
        "{}: u = [{:.15}, {:.15}] reference = [{:.15}, {:.15}] max difference = {:.3e}",
        rep.demo, rep.solution[0], rep.solution[1], rep.reference[0], rep.reference[1], rep.max_difference
    );
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write_json(&dir.join("report.json"), &rep)?;
    }
    Ok(())
}
