use std::f64::consts::PI;

use super::*;
use crate::checks::Lattice;
use crate::grid::{poincare_constant, sup_norm};

pub(crate) fn example() -> PLaplaceSpec {
    PLaplaceSpec::parse(3.0, "1", "1", "1", "abs(v)^2 - v^2*u^5 - v^4*u + t^2", "v^2 + 1").unwrap()
}

fn simple(p: f64, f: &str) -> PLaplaceSpec {
    PLaplaceSpec::parse(p, "1", "1", "1", f, "1").unwrap()
}

/// The grammar has no named constants.
const PI_LIT: &str = "3.141592653589793";

fn manufactured_p2() -> PLaplaceSpec {
    simple(2.0, &format!("{PI_LIT}^2*sin({PI_LIT}*t) - u + sin({PI_LIT}*t)"))
}

fn manufactured_p3() -> PLaplaceSpec {
    simple(3.0, "4*abs(1 - 2*t)")
}

fn sup_error(u: &GridFunction, exact: impl Fn(f64) -> f64) -> f64 {
    u.grid()
        .nodes()
        .iter()
        .zip(u.values())
        .map(|(t, x)| (x - exact(*t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn zero_state_gives_zero_residual() {
    let g = Grid::new(8).unwrap();
    let spec = simple(2.0, "0");
    let r = assemble_f(&GridFunction::zeros(g), &GridFunction::zeros(g), &spec).unwrap();
    assert_eq!(r.values().len(), 7);
    assert!(r.values().iter().all(|x| *x == 0.0));
}

#[test]
fn hat_pairing() {
    let g = Grid::new(2).unwrap();
    let hat = GridFunction::new(g, vec![0.0, 1.0, 0.0]).unwrap();
    let r = assemble_f(&hat, &GridFunction::zeros(g), &simple(2.0, "0")).unwrap();
    assert_eq!(r.values(), &[4.0]);
}

#[test]
fn manufactured_residual_is_second_order() {
    let spec = simple(2.0, &format!("{PI_LIT}^2*sin({PI_LIT}*t)"));
    let norm = |n: usize| {
        let g = Grid::new(n).unwrap();
        let mut u = GridFunction::from_fn(g, |t| (PI * t).sin());
        u.values_mut()[n] = 0.0;
        assemble_f(&u, &GridFunction::zeros(g), &spec).unwrap().dual_norm(&g).unwrap()
    };
    let (a, b) = (norm(32), norm(64));
    assert!(a < 1e-3, "{a}");
    assert!(a / b > 3.5, "{a} {b}");
}

#[test]
fn residual_at_zero_is_minus_load() {
    let spec = example();
    let g = Grid::new(16).unwrap();
    let v = GridFunction::from_fn(g, |t| 1.5 * (3.0 * t).cos());
    let r = assemble_f(&GridFunction::zeros(g), &v, &spec).unwrap();
    let h = g.h();
    for i in 1..g.n_cells() {
        let hat = |t: f64| (1.0 - (t - g.node(i)).abs() / h).max(0.0);
        let load = |t: f64| spec.eval_f(t, 0.0, v.eval(t)).unwrap() * hat(t);
        let direct = Quadrature::Gauss2.integrate(g.node(i - 1), g.node(i), load)
            + Quadrature::Gauss2.integrate(g.node(i), g.node(i + 1), load);
        assert!((r.values()[i - 1] + direct).abs() <= 1e-12, "node {i}");
    }
}

#[test]
fn domain_errors_name_the_cell() {
    let spec = simple(2.0, "sqrt(t - 0.5)");
    let g = Grid::new(4).unwrap();
    let e = assemble_f(&GridFunction::zeros(g), &GridFunction::zeros(g), &spec).unwrap_err();
    assert!(e.to_string().contains("cell 0"), "{e}");
}

#[test]
fn p_below_two_is_rejected() {
    assert!(matches!(
        PLaplaceSpec::parse(1.5, "1", "1", "1", "0", "1"),
        Err(Error::Config(_))
    ));
}

#[test]
fn undeclared_variables_are_rejected() {
    assert!(PLaplaceSpec::parse(2.0, "u", "1", "1", "0", "1").is_err());
    assert!(PLaplaceSpec::parse(2.0, "1", "t", "1", "0", "1").is_err());
    assert!(PLaplaceSpec::parse(2.0, "1", "1", "1", "r", "1").is_err());
}

#[test]
fn json_round_trip() {
    let json = r#"{"p": 3, "phi": "1", "m": "1", "M": "1", "f": "t^2 - u", "delta": "v^2 + 1"}"#;
    let spec: PLaplaceSpec = serde_json::from_str(json).unwrap();
    assert_eq!(spec.p, 3.0);
    let back: PLaplaceSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(spec, back);
}

#[test]
fn solve_manufactured_p2() {
    let spec = manufactured_p2();
    let err = |n: usize| {
        let g = Grid::new(n).unwrap();
        let u = solve_u(&GridFunction::zeros(g), 0.0, 1e-11, &spec).unwrap();
        sup_error(&u, |t| (PI * t).sin())
    };
    let (a, b) = (err(128), err(256));
    assert!(b <= 5e-3, "{b}");
    let ratio = a / b;
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio} ({a}, {b})");
}

#[test]
fn solve_manufactured_p3() {
    let g = Grid::new(256).unwrap();
    let u = solve_u(&GridFunction::zeros(g), 1e-12, 1e-10, &manufactured_p3()).unwrap();
    let e = sup_error(&u, |t| t * (1.0 - t));
    assert!(e <= 1e-2, "{e}");
}

#[test]
fn solve_zero_data() {
    let g = Grid::new(32).unwrap();
    let u = solve_u(&GridFunction::zeros(g), 1e-3, 1e-12, &simple(3.0, "0")).unwrap();
    assert!(sup_norm(&u) == 0.0);
}

#[test]
fn gamma_examples() {
    let spec = example();
    let lambda = poincare_constant(3.0, 256).unwrap();
    assert_eq!(gamma_eval(0.0, 3.0, &spec, lambda, MinorantScaling::PoincareRoot).unwrap(), 0.0);
    for &(x, y) in &[(0.5, 0.0), (1.0, 2.0), (2.0, 1.0)] {
        let lit = gamma_eval(x, y, &spec, lambda, MinorantScaling::Reciprocal).unwrap();
        assert!((lit - (x * x * x - (y * y + 1.0) * x / lambda)).abs() < 1e-14);
        let root = gamma_eval(x, y, &spec, lambda, MinorantScaling::PoincareRoot).unwrap();
        assert!((root - (x * x * x - (y * y + 1.0) * x * lambda.powf(-1.0 / 3.0))).abs() < 1e-14);
    }
    assert!(gamma_eval(100.0, 5.0, &spec, lambda, MinorantScaling::PoincareRoot).unwrap() > 0.0);
}

#[test]
fn example_is_coercive() {
    let lambda = poincare_constant(3.0, 256).unwrap();
    let rep = check_coercivity(&example(), lambda, &CoercivityOptions::default()).unwrap();
    assert!(rep.result.passed, "{:?}", rep.result);
    assert_eq!(rep.result.samples, 1000);
    assert!(rep.witness.is_none());
}

#[test]
fn coercivity_margin_without_load() {
    let spec = PLaplaceSpec::parse(3.0, "1", "1", "1", "0", "v^2 + 1").unwrap();
    let lambda = poincare_constant(3.0, 256).unwrap();
    let g = Grid::new(64).unwrap();
    let u = GridFunction::from_fn(g, |t| t * (1.0 - t) * (1.0 + 3.0 * t * t));
    let v = GridFunction::from_fn(g, |t| 2.0 * t - 0.5);
    let x = p_norm(&u, 3.0).unwrap();
    let margin = assemble_f(&u, &v, &spec).unwrap().pair(&u)
        - gamma_at(&u, &v, &spec, lambda, MinorantScaling::PoincareRoot).unwrap();
    let expected = lambda.powf(-1.0 / 3.0) * (1.5f64.powi(2) + 1.0) * x;
    assert!((margin - expected).abs() < 1e-10 * expected, "{margin} {expected}");

    let rep = check_coercivity(&spec, lambda, &CoercivityOptions::default()).unwrap();
    assert!(rep.result.passed && rep.result.worst_margin >= 0.0);
}

#[test]
fn wrong_lower_bound_fails_coercivity() {
    let spec = PLaplaceSpec::parse(3.0, "1", "2", "2", "0", "1").unwrap();
    let lambda = poincare_constant(3.0, 256).unwrap();
    let rep = check_coercivity(&spec, lambda, &CoercivityOptions::default()).unwrap();
    assert!(!rep.result.passed);
    let w = rep.witness.unwrap();
    assert!(w.pairing < w.gamma);
    assert!(rep.result.witness.unwrap().contains(&format!("sample {}", w.sample)));
}

#[test]
fn reciprocal_scaling_is_violated_on_the_example() {
    let lambda = poincare_constant(3.0, 256).unwrap();
    let opts = CoercivityOptions {
        scaling: MinorantScaling::Reciprocal,
        ..CoercivityOptions::default()
    };
    let rep = check_coercivity(&example(), lambda, &opts).unwrap();
    assert!(!rep.result.passed);
    assert!(rep.witness.is_some());
}

#[test]
fn example_satisfies_pointwise_assumptions() {
    let rep = check_phi_f_assumptions(&example(), &Lattice::default()).unwrap();
    assert!(rep.passed(), "{:?}", rep.failures().collect::<Vec<_>>());
    assert_eq!(rep.checks.len(), 6);
}

#[test]
fn increasing_f_fails() {
    let rep = check_phi_f_assumptions(&simple(2.0, "u"), &Lattice::default()).unwrap();
    let f2 = rep.get("f nonincreasing in u").unwrap();
    assert!(!f2.passed);
    assert!(f2.witness.as_ref().unwrap().starts_with("f("));
}

#[test]
fn phi_r_monotonicity() {
    let ok = PLaplaceSpec::parse(2.0, "1/(1+r)", "0.05", "1", "0", "1").unwrap();
    let rep = check_phi_f_assumptions(&ok, &Lattice::default()).unwrap();
    assert!(rep.passed(), "{:?}", rep.failures().collect::<Vec<_>>());

    let bad = PLaplaceSpec::parse(2.0, "1/(1+r)^2", "0.005", "1", "0", "1").unwrap();
    let rep = check_phi_f_assumptions(&bad, &Lattice::default()).unwrap();
    assert!(!rep.get("phi r nondecreasing").unwrap().passed);
    assert!(rep.get("phi bounds").unwrap().passed);
}

#[test]
fn example_is_monotone() {
    let rep = check_monotonicity(&example(), &CoercivityOptions::default()).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert_eq!(rep.samples, 1000);
}

#[test]
fn solutions_satisfy_the_minorant_sign() {
    let spec = example();
    let lambda = poincare_constant(3.0, 256).unwrap();
    let g = Grid::new(64).unwrap();
    for (k, amp) in [0.0, 0.5, 1.0, 2.0].into_iter().enumerate() {
        let v = GridFunction::from_fn(g, |t| amp * (PI * (k as f64 + 1.0) * t).cos());
        let u = solve_u(&v, 1e-6, 1e-10, &spec).unwrap();
        let gamma = gamma_at(&u, &v, &spec, lambda, MinorantScaling::PoincareRoot).unwrap();
        assert!(gamma <= 1e-6, "amp {amp}: {gamma}");
    }
}

#[test]
fn tangent_and_gram_directions_agree() {
    let spec = example();
    let g = Grid::new(32).unwrap();
    let v = GridFunction::from_fn(g, |t| t);
    let op = PLaplaceOperator::new(&spec, g).unwrap();
    let space = stiffness_space(&g).unwrap();
    let opts = InnerOptions { tol: 1e-11, ..InnerOptions::default() };
    let a = solve_regularized(&op, space.duality_map(), v.values(), 1e-4, None, &opts).unwrap();

    struct NoTangent<'a>(PLaplaceOperator<'a>);
    impl ParamOperator for NoTangent<'_> {
        fn eval(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
            self.0.eval(u, v)
        }
    }
    let opts = InnerOptions { tol: 1e-11, max_iter: 200_000, ..InnerOptions::default() };
    let b = solve_regularized(&NoTangent(op), space.duality_map(), v.values(), 1e-4, None, &opts).unwrap();
    let diff = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff}");
    assert!(a.iterations < b.iterations);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pairing_is_monotone(seed in any::<u64>(), n in 4usize..40) {
            let spec = example();
            let opts = CoercivityOptions { n_cells: n, samples: 4, seed, concurrent: false, ..CoercivityOptions::default() };
            let rep = check_monotonicity(&spec, &opts).unwrap();
            prop_assert!(rep.passed, "{:?}", rep);
        }

        #[test]
        fn assembly_is_odd_for_pure_flux(c in -3.0f64..3.0, p in 2.0f64..5.0) {
            let spec = PLaplaceSpec::parse(p, "2 + sin(t)", "1", "3", "0", "1").unwrap();
            let g = Grid::new(10).unwrap();
            let u = GridFunction::from_fn(g, |t| c * t * (1.0 - t));
            let v = GridFunction::zeros(g);
            let a = assemble_f(&u, &v, &spec).unwrap();
            let b = assemble_f(&u.scaled(-1.0), &v, &spec).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x + y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
