use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use rand::Rng;

use super::*;
use crate::error::Error;
use crate::par::sample_rng;

fn scalar(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> FnOperator<'static> {
    FnOperator::new(move |u: &[f64], v: &[f64]| Ok(vec![f(u[0], v[0])]))
}

fn bisect(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    assert!(f(a) < 0.0 && f(b) > 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) < 0.0 {
            a = m
        } else {
            b = m
        }
    }
    0.5 * (a + b)
}

fn inner(tol: f64) -> InnerOptions {
    InnerOptions {
        tol,
        ..InnerOptions::default()
    }
}

#[test]
fn regularized_linear_shift() {
    let sp = VecSpace::euclidean(1);
    let f = scalar(|u, v| u - v).strongly_monotone(1.0);
    let s = solve_regularized(&f, sp.duality_map(), &[3.0], 0.0, None, &inner(1e-12)).unwrap();
    assert!((s.u[0] - 3.0).abs() < 1e-12);
}

#[test]
fn regularized_cubic_needs_epsilon() {
    let sp = VecSpace::euclidean(1);
    let f = scalar(|u, v| u * u * u - v);
    let err = solve_regularized(&f, sp.duality_map(), &[8.0], 0.0, None, &inner(1e-12)).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
    let eps = 1e-8;
    let s = solve_regularized(&f, sp.duality_map(), &[8.0], eps, None, &inner(1e-12)).unwrap();
    let oracle = bisect(0.0, 10.0, |u| u * u * u + eps * u - 8.0);
    assert!((s.u[0] - oracle).abs() < 1e-6);
    assert!((s.u[0] - 2.0).abs() < 1e-6);
}

#[test]
fn regularized_makes_a_rootless_operator_solvable() {
    let sp = VecSpace::euclidean(1);
    let f = scalar(|u, _| u.tanh() - 2.0);
    let s = solve_regularized(&f, sp.duality_map(), &[0.0], 0.1, None, &inner(1e-12)).unwrap();
    let oracle = bisect(0.0, 100.0, |u| u.tanh() + 0.1 * u - 2.0);
    assert!((s.u[0] - oracle).abs() < 1e-3);
    assert!((s.u[0] - 10.0).abs() < 1e-3);
}

#[test]
fn accepted_residuals_strictly_decrease() {
    let sp = VecSpace::dense(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
    let f = FnOperator::new(|u: &[f64], v: &[f64]| {
        Ok(vec![u[0].powi(3) + u[0] - v[0], u[1].sinh() + 0.3 * u[0] - v[1]])
    });
    let s = solve_regularized(&f, sp.duality_map(), &[5.0, -4.0], 1e-3, None, &inner(1e-11)).unwrap();
    assert!(s.trace.len() > 2);
    for w in s.trace.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn non_convergence_carries_the_trace() {
    let sp = VecSpace::euclidean(1);
    let f = scalar(|u, v| u.powi(5) - v);
    let opts = InnerOptions {
        tol: 1e-14,
        max_iter: 3,
        ..InnerOptions::default()
    };
    match solve_regularized(&f, sp.duality_map(), &[100.0], 1e-6, None, &opts) {
        Err(Error::NonConvergence { residual_trace, .. }) => assert!(!residual_trace.is_empty()),
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn parametric_continuity() {
    let sp = VecSpace::euclidean(1);
    let f = scalar(|u, v| u + u.powi(3) - v).strongly_monotone(1.0);
    let solve = |v: f64| solve_regularized(&f, sp.duality_map(), &[v], 0.0, None, &inner(1e-14)).unwrap().u[0];
    let base = solve(1.3);
    let gaps: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|d| (solve(1.3 + d) - base).abs()).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
    assert!(gaps[2] < 1e-5);
}

#[test]
fn duality_map_properties() {
    let mut rng = sample_rng(5, 0);
    let b = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
    let g = &b * b.transpose() + DMatrix::identity(4, 4);
    let g = (&g + g.transpose()) * 0.5;
    let sp = VecSpace::dense(g).unwrap();
    let j = sp.duality_map();
    assert_eq!(j.apply(&[0.0; 4]), vec![0.0; 4]);
    for i in 0..50 {
        let mut rng = sample_rng(6, i);
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ju = j.apply(&u);
        let pair: f64 = ju.iter().zip(&u).map(|(a, b)| a * b).sum();
        assert!((pair - sp.norm(&u).powi(2)).abs() <= 1e-12 * pair.max(1.0));
        let d: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
        let jd: Vec<f64> = ju.iter().zip(j.apply(&w)).map(|(a, b)| a - b).collect();
        assert!(jd.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() > 0.0);
        // ‖Ju‖_* = ‖u‖
        assert!((sp.dual_norm(&ju).unwrap() - sp.norm(&u)).abs() < 1e-10);
    }
}

#[test]
fn gram_validation() {
    assert!(VecSpace::dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0])).is_err());
    assert!(VecSpace::dense(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    assert!(VecSpace::tridiagonal(crate::linalg::stiffness(8)).is_ok());
}

#[test]
fn hybrid_decoupled_contraction() {
    let sp = VecSpace::euclidean(1);
    let f = scalar(|u, _| u);
    let g = FnMap::new(|_u: &[f64], v: &[f64]| Ok(vec![v[0] / 2.0]));
    let opts = HybridOptions {
        radius: 1.0,
        tol_outer: 1e-10,
        ..HybridOptions::default()
    };
    let s = hybrid_solve(&f, &g, &sp, &[0.7], &[0.9], &opts).unwrap();
    assert!(s.u[0].abs() < 1e-9 && s.v[0].abs() < 1e-9);
}

#[test]
fn hybrid_coupled_linear_pair() {
    let sp = VecSpace::euclidean(1);
    let f = scalar(|u, v| u - v)
        .strongly_monotone(1.0)
        .with_gamma(|x, y| x * x - x * y);
    let g = FnMap::new(|u: &[f64], _v: &[f64]| Ok(vec![(u[0] + 1.0) / 2.0]));
    let opts = HybridOptions {
        radius: 2.0,
        tol_outer: 1e-10,
        tol_inner: 1e-12,
        ..HybridOptions::default()
    };
    let s = hybrid_solve(&f, &g, &sp, &[0.0], &[0.0], &opts).unwrap();
    assert!((s.u[0] - 1.0).abs() < 1e-8 && (s.v[0] - 1.0).abs() < 1e-8);
    assert!(s.gamma.unwrap() <= 1e-8);
    assert!(!s.clipped_at_end);
    assert!(s.residual <= 1e-10);
}

#[test]
fn hybrid_flags_clipping_when_the_ball_is_too_small() {
    let sp = VecSpace::euclidean(1);
    let f = scalar(|u, v| u - v).strongly_monotone(1.0);
    let g = FnMap::new(|u: &[f64], _v: &[f64]| Ok(vec![(u[0] + 1.0) / 2.0]));
    let opts = HybridOptions {
        radius: 0.5,
        schedule: vec![0.0],
        tol_outer: 1e-10,
        tol_inner: 1e-12,
        ..HybridOptions::default()
    };
    let s = hybrid_solve(&f, &g, &sp, &[0.0], &[0.0], &opts).unwrap();
    assert!(s.clipped_at_end);
    assert!((s.v[0] - 0.5).abs() < 1e-12);
}

#[test]
fn hybrid_rejects_bad_schedules() {
    let sp = VecSpace::euclidean(1);
    let f = scalar(|u, _| u);
    let g = FnMap::new(|_u: &[f64], v: &[f64]| Ok(v.to_vec()));
    for schedule in [vec![], vec![1.0, 1.0], vec![0.5, 1.0], vec![-1.0]] {
        let opts = HybridOptions {
            schedule,
            ..HybridOptions::default()
        };
        assert!(hybrid_solve(&f, &g, &sp, &[0.0], &[0.0], &opts).is_err());
    }
}

#[test]
fn damping_halves_on_oscillation() {
    let mut d = Damping::new(&DampingOptions::default());
    let v1 = d.step(&[0.0], &[1.0]);
    assert_eq!(d.factor(), 1.0);
    let _ = d.step(&v1, &[-1.0]);
    assert_eq!(d.factor(), 0.5);
    // v ↦ -v has fixed point 0; plain Picard oscillates forever
    let p = damped_picard(&[1.0], &PicardOptions::default(), |v| Ok(vec![-v[0]])).unwrap();
    assert!(p.v[0].abs() <= 1e-10);
}

type Map = fn(&[f64]) -> crate::Result<Vec<f64>>;

fn linear(q: Matrix2<f64>) -> impl Fn(&[f64]) -> crate::Result<Vec<f64>> + Send + Sync {
    move |u: &[f64]| {
        let y = q * nalgebra::Vector2::new(u[0], u[1]);
        Ok(vec![y[0], y[1]])
    }
}

#[test]
fn one_sided_constant_examples() {
    let sp = VecSpace::euclidean(2);
    let sampler = PairSampler::UniformBox { half_width: 1.0 };
    let id: Map = |u| Ok(u.to_vec());
    let m = one_sided_constant(&id, &sp, &sampler, 1000, 42, true).unwrap();
    assert!((m - 1.0).abs() < 1e-12);
    let rot = linear(Matrix2::new(0.0, -1.0, 1.0, 0.0));
    let m = one_sided_constant(&rot, &sp, &sampler, 1000, 42, true).unwrap();
    assert!(m.abs() < 1e-12);
    let same = PairSampler::Custom(std::sync::Arc::new(|_, _| (vec![1.0, 1.0], vec![1.0, 1.0])));
    assert!(one_sided_constant(&id, &sp, &same, 10, 42, false).is_err());
}

fn top_symmetric_eigenvalue(q: &Matrix2<f64>) -> f64 {
    let s = (q + q.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.max()
}

#[test]
fn one_sided_constant_matches_the_symmetric_part() {
    let sp = VecSpace::euclidean(2);
    let sampler = PairSampler::StratifiedDirections { half_width: 1.0 };
    for trial in 0..20 {
        let mut rng = sample_rng(1234, trial);
        let q = Matrix2::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let m = one_sided_constant(&linear(q), &sp, &sampler, 10_000, 42, true).unwrap();
        let want = top_symmetric_eigenvalue(&q);
        assert!(m <= want + 1e-12);
        assert!(want - m <= 1e-6, "trial {trial}: {m} vs {want}");
    }
}

#[test]
fn one_sided_estimate_is_reproducible_across_execution_modes() {
    let sp = VecSpace::euclidean(2);
    let q = Matrix2::new(0.3, 1.2, -0.4, 0.9);
    let s = PairSampler::UniformBox { half_width: 2.0 };
    let a = one_sided_constant(&linear(q), &sp, &s, 5000, 9, true).unwrap();
    let b = one_sided_constant(&linear(q), &sp, &s, 5000, 9, false).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn lambda0_examples() {
    let sp1 = VecSpace::euclidean(1);
    let zero: Map = |u| Ok(vec![0.0; u.len()]);
    let b: Map = |u| Ok(vec![u[0].cos() + 2.0]);
    let opts = Lambda0Options {
        m: Some(0.0),
        ..Lambda0Options::default()
    };
    let rep = krasnoselskii_lambda0(&zero, &b, &sp1, &opts).unwrap();
    assert_eq!(rep.r, 0.0);
    assert!((rep.lambda0 - 1.0 / 4.0).abs() < 1e-15);
    assert!((rep.lambda0_safe - 0.9 / 4.0).abs() < 1e-15);

    let half_plus_one: Map = |u| Ok(vec![u[0] / 2.0 + 1.0]);
    let est = Lambda0Options {
        samples: 2000,
        ..Lambda0Options::default()
    };
    let rep = krasnoselskii_lambda0(&half_plus_one, &b, &sp1, &est).unwrap();
    assert!(rep.m_estimated);
    // sampled quotients carry rounding from close pairs
    assert!((rep.m - 0.5).abs() < 1e-10);
    assert!((rep.r - 2.0).abs() < 1e-10);
    assert!((rep.r_certified - 4.0).abs() < 1e-10);

    let rep = krasnoselskii_lambda0(&half_plus_one, &zero, &sp1, &est).unwrap();
    assert_eq!(rep.lambda0, 1.0);

    let expanding: Map = |u| Ok(vec![2.0 * u[0]]);
    assert!(krasnoselskii_lambda0(&expanding, &b, &sp1, &est).is_err());
}

#[test]
fn eigen_examples() {
    let sp1 = VecSpace::euclidean(1);
    let a: Map = |u| Ok(vec![u[0] / 2.0 + 1.0]);
    let b: Map = |u| Ok(vec![u[0].sin() + 3.0]);
    let zero: Map = |u| Ok(vec![0.0; u.len()]);
    let u = solve_eigen(&a, &b, 0.0, 2.0, 0.5, &sp1, 1e-10).unwrap();
    assert!((u[0] - 2.0).abs() < 1e-9);
    let u = solve_eigen(&a, &zero, 0.3, 2.0, 0.5, &sp1, 1e-10).unwrap();
    assert!((u[0] - 2.0).abs() < 1e-9);
}

#[test]
fn eigen_two_dimensional_linear_oracle() {
    let sp = VecSpace::euclidean(2);
    let q = Matrix2::new(0.0, -0.5, 0.5, 0.0);
    let c = [1.0, -2.0];
    let a = linear(q);
    let b = move |_: &[f64]| Ok(c.to_vec());
    let rep = krasnoselskii_lambda0(&a, &b, &sp, &Lambda0Options::default()).unwrap();
    assert!(rep.m.abs() < 1e-12);
    let lambda = 0.5 * rep.lambda0_certified;
    let u = solve_eigen(&a, &b, lambda, rep.r_certified, 0.0, &sp, 1e-11).unwrap();
    let direct = (Matrix2::identity() - q)
        .lu()
        .solve(&nalgebra::Vector2::new(lambda * c[0], lambda * c[1]))
        .unwrap();
    assert!((u[0] - direct[0]).abs() < 1e-8 && (u[1] - direct[1]).abs() < 1e-8);
}

#[test]
fn eigen_with_the_uncorrected_radius_is_flagged() {
    // A ≡ 0 gives r = 0, yet u = λc solves u = A(u) + λB(u) with ‖u‖ > 0
    let sp = VecSpace::euclidean(2);
    let zero: Map = |u| Ok(vec![0.0; u.len()]);
    let b: Map = |_| Ok(vec![1.0, 1.0]);
    let rep = krasnoselskii_lambda0(&zero, &b, &sp, &Lambda0Options { m: Some(0.0), ..Default::default() }).unwrap();
    let err = solve_eigen(&zero, &b, rep.lambda0, rep.r, 0.0, &sp, 1e-10).unwrap_err();
    assert!(matches!(err, Error::Inconsistent(_)));
    let u = solve_eigen(&zero, &b, rep.lambda0_certified, rep.r_certified, 0.0, &sp, 1e-10).unwrap();
    assert!((u[0] - rep.lambda0_certified).abs() < 1e-10);
}

#[test]
fn eigen_solutions_stay_in_the_certified_ball() {
    for trial in 0..25 {
        let mut rng = sample_rng(77, trial);
        let q = Matrix2::from_fn(|_, _| rng.random_range(-0.6..0.6));
        let a0 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let k = rng.random_range(0.5..3.0);
        let m = top_symmetric_eigenvalue(&q);
        if m >= 0.9 {
            continue;
        }
        let a = move |u: &[f64]| {
            let y = q * nalgebra::Vector2::new(u[0], u[1]);
            Ok(vec![y[0] + a0[0], y[1] + a0[1]])
        };
        let b = move |u: &[f64]| Ok(vec![k * u[1].sin(), k * u[0].cos()]);
        let sp = VecSpace::euclidean(2);
        let rep = krasnoselskii_lambda0(&a, &b, &sp, &Lambda0Options { m: Some(m), ..Default::default() }).unwrap();
        let lambda = rng.random_range(0.0..rep.lambda0_certified);
        let u = solve_eigen(&a, &b, lambda, rep.r_certified, m, &sp, 1e-10).unwrap();
        assert!(sp.norm(&u) <= rep.r_certified, "trial {trial}");
    }
}

#[test]
fn condkras_examples() {
    let sp1 = VecSpace::euclidean(1);
    let zero: Map = |u| Ok(vec![0.0; u.len()]);
    let c: Map = |_| Ok(vec![0.25]);
    let d = BoxSet { lo: vec![0.0], hi: vec![1.0] };
    let u = solve_condkras(&zero, &c, &d, &sp1, &CondKrasOptions::default()).unwrap();
    assert_eq!(u, vec![0.25]);

    let half: Map = |u| Ok(vec![u[0] / 2.0]);
    let one: Map = |_| Ok(vec![1.0]);
    let d = BoxSet { lo: vec![0.0], hi: vec![4.0] };
    let opts = CondKrasOptions {
        m: 0.5,
        ..CondKrasOptions::default()
    };
    let u = solve_condkras(&half, &one, &d, &sp1, &opts).unwrap();
    assert!((u[0] - 2.0).abs() < 1e-10);

    let far: Map = |_| Ok(vec![10.0]);
    let err = solve_condkras(&half, &far, &d, &sp1, &opts).unwrap_err();
    assert!(matches!(err, Error::InvarianceViolation { iteration: 1, .. }));
}

#[test]
fn condkras_two_dimensional_nonlinear_oracle() {
    // A(u) = 0.3 tanh(u) (m = 0.3), B(v) = c + 0.2 sin(v) maps the ball of
    // radius 3 into itself
    let a = |u: &[f64]| Ok(u.iter().map(|x| 0.3 * x.tanh()).collect());
    let b = |v: &[f64]| Ok(vec![0.8 + 0.2 * v[1].sin(), -0.5 + 0.2 * v[0].sin()]);
    let d = BallSet {
        center: vec![0.0, 0.0],
        radius: 3.0,
    };
    let sp = VecSpace::euclidean(2);
    let opts = CondKrasOptions {
        m: 0.3,
        tol: 1e-12,
        ..CondKrasOptions::default()
    };
    let u = solve_condkras(&a, &b, &d, &sp, &opts).unwrap();

    // Newton on H(u) = u − 0.3 tanh(u) − c − 0.2 sin(swap u)
    let mut x = DVector::from_vec(vec![0.0f64, 0.0]);
    for _ in 0..50 {
        let h = DVector::from_vec(vec![
            x[0] - 0.3 * x[0].tanh() - 0.8 - 0.2 * x[1].sin(),
            x[1] - 0.3 * x[1].tanh() + 0.5 - 0.2 * x[0].sin(),
        ]);
        let sech2 = |t: f64| 1.0 / t.cosh().powi(2);
        let jac = DMatrix::from_row_slice(
            2,
            2,
            &[1.0 - 0.3 * sech2(x[0]), -0.2 * x[1].cos(), -0.2 * x[0].cos(), 1.0 - 0.3 * sech2(x[1])],
        );
        x -= jac.lu().solve(&h).unwrap();
    }
    assert!((u[0] - x[0]).abs() < 1e-8 && (u[1] - x[1]).abs() < 1e-8);
}

#[test]
fn convex_sets() {
    let b = BallSet {
        center: vec![1.0, 0.0],
        radius: 2.0,
    };
    assert!(b.contains(&[2.0, 1.0]));
    assert!(!b.contains(&[3.5, 0.0]));
    let p = b.project(&[5.0, 0.0]);
    assert!((p[0] - 3.0).abs() < 1e-15 && b.contains(&p));
    let bx = BoxSet {
        lo: vec![0.0, -1.0],
        hi: vec![1.0, 1.0],
    };
    assert_eq!(bx.project(&[2.0, -3.0]), vec![1.0, -1.0]);
}

#[test]
fn trace_rows_serialize_in_column_order() {
    let row = TraceRow {
        stage: 1,
        iter: 2,
        residual: 0.5,
        step: 1.0,
        clipped: false,
    };
    let s = serde_json::to_string(&row).unwrap();
    assert_eq!(s, r#"{"stage":1,"iter":2,"residual":0.5,"step":1.0,"clipped":false}"#);
}

