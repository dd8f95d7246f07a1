//! Sampled verifiers for the first equation's data.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{assemble_f, gamma_at, MinorantScaling, PLaplaceSpec};
use crate::checks::{AssumptionReport, CheckResult, Lattice, Tracker};
use crate::error::Result;
use crate::grid::{sup_norm, Grid, GridFunction};
use crate::par::{map_indexed, sample_rng};

/// Random `(u, v)` sampling for [`check_coercivity`] and [`check_monotonicity`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityOptions {
    pub n_cells: usize,
    pub samples: usize,
    pub seed: u64,
    /// Sup of `u` is drawn up to about this size.
    pub u_scale: f64,
    /// `‖v‖_∞` is drawn up to about this size.
    pub v_scale: f64,
    pub tol: f64,
    pub scaling: MinorantScaling,
    pub concurrent: bool,
}

impl Default for CoercivityOptions {
    fn default() -> Self {
        CoercivityOptions {
            n_cells: 64,
            samples: 1000,
            seed: 42,
            u_scale: 3.0,
            v_scale: 2.0,
            tol: 1e-8,
            scaling: MinorantScaling::PoincareRoot,
            concurrent: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoercivityWitness {
    pub sample: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pairing: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoercivityReport {
    pub result: CheckResult,
    pub witness: Option<CoercivityWitness>,
}

/// A random smooth Dirichlet function: a few sine modes with decaying random
/// coefficients, rescaled so its sup is uniform in `[0, scale]`.
fn random_dirichlet(grid: Grid, rng: &mut ChaCha8Rng, scale: f64) -> GridFunction {
    let modes: Vec<f64> = (1..=6).map(|k| rng.random_range(-1.0..1.0) / k as f64).collect();
    let shape = GridFunction::from_fn(grid, |t| {
        modes
            .iter()
            .enumerate()
            .map(|(k, c)| c * (std::f64::consts::PI * (k + 1) as f64 * t).sin())
            .sum()
    });
    let mut values = shape.into_values();
    let last = values.len() - 1;
    values[0] = 0.0;
    values[last] = 0.0;
    let shape = GridFunction::new(grid, values).expect("same grid");
    let s = sup_norm(&shape);
    let amp = scale * rng.random::<f64>();
    if s == 0.0 {
        shape
    } else {
        shape.scaled(amp / s)
    }
}

/// A random `v` without boundary constraints: offset plus modes.
fn random_free(grid: Grid, rng: &mut ChaCha8Rng, scale: f64) -> GridFunction {
    let offset = rng.random_range(-1.0..1.0);
    let modes: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let shape = GridFunction::from_fn(grid, |t| {
        offset
            + modes
                .iter()
                .enumerate()
                .map(|(k, c)| c * (std::f64::consts::PI * (k as f64 + 0.5) * t).cos())
                .sum::<f64>()
    });
    let s = sup_norm(&shape);
    let amp = scale * rng.random::<f64>();
    if s == 0.0 {
        shape
    } else {
        shape.scaled(amp / s)
    }
}

/// Samples `⟨F(u, v), u⟩ − γ(‖u‖_p, ‖v‖_∞)` over seeded random pairs.
pub fn check_coercivity(spec: &PLaplaceSpec, lambda_p: f64, opts: &CoercivityOptions) -> Result<CoercivityReport> {
    spec.validate()?;
    let grid = Grid::new(opts.n_cells)?;
    let rows = map_indexed(opts.samples, opts.concurrent, |i| -> Result<_> {
        let mut rng = sample_rng(opts.seed, i);
        let u = random_dirichlet(grid, &mut rng, opts.u_scale);
        let v = random_free(grid, &mut rng, opts.v_scale);
        let pairing = assemble_f(&u, &v, spec)?.pair(&u);
        let gamma = gamma_at(&u, &v, spec, lambda_p, opts.scaling)?;
        Ok((u, v, pairing, gamma))
    });
    let mut tracker = Tracker::new("coercivity", opts.tol);
    let mut witness = None;
    for (i, row) in rows.into_iter().enumerate() {
        let (u, v, pairing, gamma) = match row {
            Ok(r) => r,
            Err(e) => {
                tracker.fail(format!("sample {i}: {e}"));
                continue;
            }
        };
        tracker.record(pairing - gamma, || {
            witness = Some(CoercivityWitness {
                sample: i,
                u: u.values().to_vec(),
                v: v.values().to_vec(),
                pairing,
                gamma,
            });
            format!("sample {i}: <F(u,v),u> = {pairing:e} < gamma = {gamma:e}")
        });
    }
    let result = tracker.finish();
    if result.passed {
        witness = None;
    }
    Ok(CoercivityReport { result, witness })
}

/// Samples `⟨F(u, v) − F(w, v), u − w⟩ ≥ −tol` over seeded random triples.
pub fn check_monotonicity(spec: &PLaplaceSpec, opts: &CoercivityOptions) -> Result<CheckResult> {
    spec.validate()?;
    let grid = Grid::new(opts.n_cells)?;
    let rows = map_indexed(opts.samples, opts.concurrent, |i| -> Result<f64> {
        let mut rng = sample_rng(opts.seed ^ 0x6d6f6e6f, i);
        let u = random_dirichlet(grid, &mut rng, opts.u_scale);
        let w = random_dirichlet(grid, &mut rng, opts.u_scale);
        let v = random_free(grid, &mut rng, opts.v_scale);
        let fu = assemble_f(&u, &v, spec)?;
        let fw = assemble_f(&w, &v, spec)?;
        Ok(fu
            .values()
            .iter()
            .zip(fw.values())
            .zip(u.interior().iter().zip(w.interior()))
            .map(|((a, b), (x, y))| (a - b) * (x - y))
            .sum())
    });
    let mut tracker = Tracker::new("monotonicity", opts.tol);
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Ok(m) => tracker.record(m, || format!("sample {i}: <F(u,v) - F(w,v), u - w> = {m:e}")),
            Err(e) => tracker.fail(format!("sample {i}: {e}")),
        }
    }
    Ok(tracker.finish())
}

/// Margins are compared relative to the size of the compared values.
const REL_TOL: f64 = 1e-12;

fn rel(margin: f64, a: f64, b: f64) -> f64 {
    margin / (1.0 + a.abs() + b.abs())
}

/// Lattice and random-point checks of the bounds on `φ`, the monotonicity of
/// `r ↦ φ r`, the monotonicity of `f` in `u` and the bound `δ`.
pub fn check_phi_f_assumptions(spec: &PLaplaceSpec, lattice: &Lattice) -> Result<AssumptionReport> {
    spec.validate()?;
    let ts = lattice.ts();
    let ys = lattice.ys();
    let rs = lattice.rs();
    let us = lattice.us();
    let vs: Vec<f64> = ys.iter().copied().filter(|y| *y >= 0.0).collect();

    let mut m_pos = Tracker::new("m positive", 0.0);
    let mut m_mono = Tracker::new("m nonincreasing", REL_TOL);
    let mut prev: Option<(f64, f64)> = None;
    for &y in &vs {
        let mv = guard(&mut m_pos, spec.eval_m(y));
        if let Some(mv) = mv {
            if mv > 0.0 {
                m_pos.record(mv, String::new);
            } else {
                m_pos.fail(format!("m({y}) = {mv}"));
            }
            if let Some((py, pm)) = prev {
                m_mono.record(rel(pm - mv, pm, mv), || format!("m({py}) = {pm} < m({y}) = {mv}"));
            }
            prev = Some((y, mv));
        }
    }

    let mut bounds = Tracker::new("phi bounds", REL_TOL);
    let mut phi_r = Tracker::new("phi r nondecreasing", REL_TOL);
    let check_bounds = |t: f64, y: f64, r: f64, tr: &mut Tracker| {
        let vals = (|| Ok::<_, crate::Error>((spec.eval_phi(t, y, r)?, spec.eval_m(y.abs())?, spec.eval_big_m(y.abs())?)))();
        if let Some((phi, m, big_m)) = guard(tr, vals) {
            tr.record(rel(phi - m, phi, m), || format!("phi({t}, {y}, {r}) = {phi} < m(|y|) = {m}"));
            tr.record(rel(big_m - phi, phi, big_m), || format!("phi({t}, {y}, {r}) = {phi} > M(|y|) = {big_m}"));
        }
    };
    let check_phi_r = |t: f64, y: f64, r: f64, s: f64, tr: &mut Tracker| {
        let vals = (|| Ok::<_, crate::Error>((spec.eval_phi(t, y, r)? * r, spec.eval_phi(t, y, s)? * s)))();
        if let Some((a, b)) = guard(tr, vals) {
            tr.record(rel(b - a, a, b), || format!("phi r at (t, y) = ({t}, {y}): {a} at r = {r} > {b} at r = {s}"));
        }
    };
    for &t in &ts {
        for &y in &ys {
            for (j, &r) in rs.iter().enumerate() {
                check_bounds(t, y, r, &mut bounds);
                if j + 1 < rs.len() {
                    check_phi_r(t, y, r, rs[j + 1], &mut phi_r);
                }
            }
        }
    }

    let mut f_mono = Tracker::new("f nonincreasing in u", REL_TOL);
    let check_f_mono = |t: f64, u: f64, w: f64, v: f64, tr: &mut Tracker| {
        let vals = (|| Ok::<_, crate::Error>((spec.eval_f(t, u, v)?, spec.eval_f(t, w, v)?)))();
        if let Some((a, b)) = guard(tr, vals) {
            tr.record(rel(a - b, a, b), || format!("f({t}, {u}, {v}) = {a} < f({t}, {w}, {v}) = {b}"));
        }
    };
    let mut delta = Tracker::new("delta bound", REL_TOL);
    let check_delta = |t: f64, y: f64, v: f64, tr: &mut Tracker| {
        let vals = (|| Ok::<_, crate::Error>((spec.eval_f(t, 0.0, y)?, spec.eval_delta(v)?)))();
        if let Some((fv, d)) = guard(tr, vals) {
            tr.record(rel(d - fv.abs(), fv, d), || format!("|f({t}, 0, {y})| = {} > delta({v}) = {d}", fv.abs()));
        }
    };
    for &t in &ts {
        for &y in &ys {
            for j in 0..us.len().saturating_sub(1) {
                check_f_mono(t, us[j], us[j + 1], y, &mut f_mono);
            }
        }
        for &v in &vs {
            for &y in ys.iter().filter(|y| y.abs() <= v) {
                check_delta(t, y, v, &mut delta);
            }
        }
    }

    for i in 0..lattice.random {
        let mut rng = sample_rng(lattice.seed, i);
        let t: f64 = rng.random();
        let y = rng.random_range(-lattice.y_max..=lattice.y_max);
        let (r, s) = ordered(rng.random_range(0.0..=lattice.r_max), rng.random_range(0.0..=lattice.r_max));
        let (u, w) = ordered(
            rng.random_range(-lattice.u_max..=lattice.u_max),
            rng.random_range(-lattice.u_max..=lattice.u_max),
        );
        let v = y.abs() + rng.random_range(0.0..=lattice.y_max - y.abs());
        check_bounds(t, y, r, &mut bounds);
        check_phi_r(t, y, r, s, &mut phi_r);
        check_f_mono(t, u, w, y, &mut f_mono);
        check_delta(t, y, v, &mut delta);
    }

    Ok(AssumptionReport {
        checks: vec![
            m_pos.finish(),
            m_mono.finish(),
            bounds.finish(),
            phi_r.finish(),
            f_mono.finish(),
            delta.finish(),
        ],
    })
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn guard<T>(tr: &mut Tracker, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            tr.fail(e.to_string());
            None
        }
    }
}
