use serde::Serialize;

use super::{solve_regularized, CompactMap, InnerOptions, ParamOperator, VecSpace};
use crate::error::{Error, Result};
use crate::linalg::dot;

/// Norm used for `v`: the outer iterate lives in a different space than `u`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VNorm {
    #[default]
    Euclidean,
    Sup,
}

impl VNorm {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            VNorm::Euclidean => dot(v, v).sqrt(),
            VNorm::Sup => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            VNorm::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            VNorm::Sup => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
        }
    }
}

/// One row of an iteration trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub stage: usize,
    pub iter: usize,
    pub residual: f64,
    pub step: f64,
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DampingOptions {
    pub initial: f64,
    pub min: f64,
}

impl Default for DampingOptions {
    fn default() -> Self {
        DampingOptions {
            initial: 1.0,
            min: 1.0 / 64.0,
        }
    }
}

/// Relaxation `v ← v + s (w − v)`; `s` halves whenever two successive raw
/// updates point in opposite directions.
#[derive(Clone, Debug)]
pub struct Damping {
    s: f64,
    min: f64,
    prev: Option<Vec<f64>>,
}

impl Damping {
    pub fn new(opts: &DampingOptions) -> Self {
        Damping {
            s: opts.initial.clamp(f64::MIN_POSITIVE, 1.0),
            min: opts.min,
            prev: None,
        }
    }

    pub fn factor(&self) -> f64 {
        self.s
    }

    pub fn step(&mut self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let delta: Vec<f64> = w.iter().zip(v).map(|(a, b)| a - b).collect();
        if let Some(prev) = &self.prev {
            if dot(prev, &delta) < 0.0 && self.s > self.min {
                self.s = (self.s * 0.5).max(self.min);
                log::debug!("oscillation detected, damping factor now {}", self.s);
            }
        }
        let next = v.iter().zip(&delta).map(|(x, d)| x + self.s * d).collect();
        self.prev = Some(delta);
        next
    }
}

#[derive(Clone, Debug)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: DampingOptions,
    pub norm: VNorm,
    pub radius: f64,
    /// Project back onto the ball instead of only reporting an exit.
    pub clip: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-10,
            max_iter: 500,
            damping: DampingOptions::default(),
            norm: VNorm::Euclidean,
            radius: f64::INFINITY,
            clip: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Picard {
    pub v: Vec<f64>,
    pub iterations: usize,
    pub last_update: f64,
    pub trace: Vec<TraceRow>,
    /// Some iterate had norm above the radius.
    pub left_ball: bool,
}

fn radial_clip(v: &mut [f64], norm: VNorm, radius: f64) -> bool {
    if !radius.is_finite() {
        return false;
    }
    let n = norm.norm(v);
    if n > radius {
        let s = radius / n;
        v.iter_mut().for_each(|x| *x *= s);
        true
    } else {
        false
    }
}

/// Damped Picard iteration `v ← (1 − s) v + s T(v)` until the update norm is
/// at most `tol`.
pub fn damped_picard<T>(v0: &[f64], opts: &PicardOptions, mut map: T) -> Result<Picard>
where
    T: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut damping = Damping::new(&opts.damping);
    let mut v = v0.to_vec();
    let mut trace = Vec::new();
    let mut left_ball = false;
    let mut update = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let w = map(&v)?;
        let mut next = damping.step(&v, &w);
        let outside = opts.norm.norm(&next) > opts.radius;
        let clipped = opts.clip && radial_clip(&mut next, opts.norm, opts.radius);
        if outside && !left_ball {
            log::warn!("fixed-point iterate left the ball of radius {} at iteration {iter}", opts.radius);
        }
        left_ball |= outside;
        update = opts.norm.distance(&next, &v);
        v = next;
        trace.push(TraceRow {
            stage: 0,
            iter,
            residual: update,
            step: damping.factor(),
            clipped,
        });
        if update <= opts.tol {
            return Ok(Picard {
                v,
                iterations: iter,
                last_update: update,
                trace,
                left_ball,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "damped Picard iteration".into(),
        iterations: opts.max_iter,
        last_residual: update,
        residual_trace: trace.iter().map(|r| r.residual).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct HybridOptions {
    /// Radius of the ball `B_R` for `v`; infinite disables clipping.
    pub radius: f64,
    pub schedule: Vec<f64>,
    pub tol_inner: f64,
    pub tol_outer: f64,
    /// Outer iterations per stage.
    pub max_outer: usize,
    pub inner_max_iter: usize,
    pub damping: DampingOptions,
    pub v_norm: VNorm,
    /// Stop once `ε‖Ju‖_* < 0.1 tol_outer` after a converged stage.
    pub early_stop: bool,
}

/// `εₖ = 2^{-k}` for `k = 0..=20`.
pub fn default_schedule() -> Vec<f64> {
    (0..=20).map(|k| 0.5f64.powi(k)).collect()
}

impl Default for HybridOptions {
    fn default() -> Self {
        HybridOptions {
            radius: f64::INFINITY,
            schedule: default_schedule(),
            tol_inner: 1e-10,
            tol_outer: 1e-8,
            max_outer: 500,
            inner_max_iter: 10_000,
            damping: DampingOptions::default(),
            v_norm: VNorm::Euclidean,
            early_stop: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HybridSolution {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub stages_run: usize,
    pub epsilon: f64,
    /// `‖F(u, v)‖_*` without the regularization term.
    pub residual: f64,
    pub last_update: f64,
    pub clipped_at_end: bool,
    pub inner_iterations: usize,
    /// `γ(‖u‖, ‖v‖)` when the operator provides a minorant.
    pub gamma: Option<f64>,
}

/// Runs `v ← G(S_ε(v), v)` with damping and clipping to `B_R` for each `ε`
/// of the schedule, warm-starting `u` and `v` across stages. A strongly
/// monotone `F` gets a final `ε = 0` stage when the schedule ends above zero.
pub fn hybrid_solve<F, G>(
    f: &F,
    g: &G,
    space: &VecSpace,
    u0: &[f64],
    v0: &[f64],
    opts: &HybridOptions,
) -> Result<HybridSolution>
where
    F: ParamOperator + ?Sized,
    G: CompactMap + ?Sized,
{
    if !(opts.radius > 0.0) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    if opts.schedule.is_empty() {
        return Err(Error::invalid("empty ε-schedule"));
    }
    if opts.schedule.iter().any(|e| !(*e >= 0.0 && e.is_finite()))
        || opts.schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::invalid("ε-schedule must be non-negative and strictly decreasing"));
    }
    if !(opts.tol_outer > 0.0) {
        return Err(Error::invalid("outer tolerance must be positive"));
    }
    let mut schedule = opts.schedule.clone();
    if f.strong_modulus().is_some_and(|m| m > 0.0) && schedule.last().is_some_and(|e| *e > 0.0) {
        schedule.push(0.0);
    }
    let j = space.duality_map();
    let inner = InnerOptions {
        tol: opts.tol_inner,
        max_iter: opts.inner_max_iter,
        ..InnerOptions::default()
    };
    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    if radial_clip(&mut v, opts.v_norm, opts.radius) {
        log::warn!("starting iterate clipped to the ball of radius {}", opts.radius);
    }
    let mut trace = Vec::new();
    let mut inner_iterations = 0;
    let mut last_update = f64::INFINITY;
    let mut clipped = false;
    let mut residual = f64::INFINITY;
    let mut stages_run = 0;
    let mut epsilon = schedule[0];

    for (stage, &eps) in schedule.iter().enumerate() {
        let wrap = |e: Error| Error::Stage {
            stage,
            epsilon: eps,
            source: Box::new(e),
        };
        let mut damping = Damping::new(&opts.damping);
        let mut converged = false;
        for iter in 1..=opts.max_outer {
            let s = solve_regularized(f, j, &v, eps, Some(&u), &inner).map_err(wrap)?;
            inner_iterations += s.iterations;
            u = s.u;
            let w = g.eval(&u, &v).map_err(wrap)?;
            let mut next = damping.step(&v, &w);
            clipped = radial_clip(&mut next, opts.v_norm, opts.radius);
            if clipped {
                log::warn!("stage {stage}, iteration {iter}: v clipped to the ball of radius {}", opts.radius);
            }
            last_update = opts.v_norm.distance(&next, &v);
            v = next;
            trace.push(TraceRow {
                stage,
                iter,
                residual: last_update,
                step: damping.factor(),
                clipped,
            });
            if last_update <= opts.tol_outer {
                converged = true;
                break;
            }
        }
        if !converged {
            let stage_trace = trace
                .iter()
                .filter(|r| r.stage == stage)
                .map(|r| r.residual)
                .collect();
            return Err(wrap(Error::NonConvergence {
                what: "outer fixed-point iteration".into(),
                iterations: opts.max_outer,
                last_residual: last_update,
                residual_trace: stage_trace,
            }));
        }
        // bring u in line with the final v
        let s = solve_regularized(f, j, &v, eps, Some(&u), &inner).map_err(wrap)?;
        inner_iterations += s.iterations;
        u = s.u;
        stages_run = stage + 1;
        epsilon = eps;
        residual = space.dual_norm(&f.eval(&u, &v).map_err(wrap)?)?;
        log::info!(
            "stage {stage} (ε = {eps:e}) converged: ‖F(u,v)‖_* = {residual:e}, update = {last_update:e}"
        );
        if residual <= opts.tol_outer {
            break;
        }
        if opts.early_stop && eps * space.norm(&u) < 0.1 * opts.tol_outer {
            break;
        }
    }
    if residual > opts.tol_outer {
        return Err(Error::NonConvergence {
            what: format!("ε-schedule exhausted with ‖F(u,v)‖_* above {:e}", opts.tol_outer),
            iterations: stages_run,
            last_residual: residual,
            residual_trace: trace.iter().map(|r| r.residual).collect(),
        });
    }
    let gamma = f.gamma(space.norm(&u), opts.v_norm.norm(&v));
    Ok(HybridSolution {
        u,
        v,
        trace,
        stages_run,
        epsilon,
        residual,
        last_update,
        clipped_at_end: clipped,
        inner_iterations,
        gamma,
    })
}
