use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    hybrid_solve, solve_regularized, FnMap, FnOperator, HybridOptions, InnerOptions, VNorm, VecSpace,
};
use crate::error::{Error, Result};
use crate::par;

type PairFn = dyn Fn(usize, &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) + Send + Sync;

/// Seeded generator of `(u, w)` pairs for sampled inequalities.
#[derive(Clone)]
pub enum PairSampler {
    /// `u`, `w` independent and uniform in `[-half_width, half_width]ⁿ`.
    UniformBox { half_width: f64 },
    /// `u` uniform in the box, `w = u + ρ d`. In two dimensions the angle of
    /// `d` is stratified over `[0, π)` (sample `i` of `n` draws from the
    /// `i`-th slice); otherwise `d` is a Gaussian direction.
    StratifiedDirections { half_width: f64 },
    Custom(Arc<PairFn>),
}

impl fmt::Debug for PairSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairSampler::UniformBox { half_width } => write!(f, "UniformBox({half_width})"),
            PairSampler::StratifiedDirections { half_width } => write!(f, "StratifiedDirections({half_width})"),
            PairSampler::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn gaussian_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let d: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return d.into_iter().map(|x| x / n).collect();
        }
    }
}

impl PairSampler {
    pub fn sample(&self, dim: usize, index: usize, n_samples: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        match self {
            PairSampler::UniformBox { half_width } => {
                let h = *half_width;
                let u = (0..dim).map(|_| rng.random_range(-h..=h)).collect();
                let w = (0..dim).map(|_| rng.random_range(-h..=h)).collect();
                (u, w)
            }
            PairSampler::StratifiedDirections { half_width } => {
                let h = *half_width;
                let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-h..=h)).collect();
                let d = if dim == 2 {
                    let theta = std::f64::consts::PI * (index as f64 + rng.random::<f64>()) / n_samples as f64;
                    vec![theta.cos(), theta.sin()]
                } else {
                    gaussian_direction(dim, rng)
                };
                let rho = h * (1.0 - rng.random::<f64>());
                let w = u.iter().zip(&d).map(|(x, di)| x + rho * di).collect();
                (u, w)
            }
            PairSampler::Custom(f) => f(index, rng),
        }
    }
}

/// Largest sampled `⟨A(u) − A(w), u − w⟩ / ‖u − w‖²`, a lower bound for the
/// one-sided constant of `A`. Coincident pairs are skipped.
pub fn one_sided_constant<A>(
    a: &A,
    space: &VecSpace,
    sampler: &PairSampler,
    n_samples: usize,
    seed: u64,
    concurrent: bool,
) -> Result<f64>
where
    A: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let dim = space.dim();
    let quotients = par::map_indexed(n_samples, concurrent, |i| -> Result<Option<f64>> {
        let mut rng = par::sample_rng(seed, i);
        let (u, w) = sampler.sample(dim, i, n_samples, &mut rng);
        let d: Vec<f64> = u.iter().zip(&w).map(|(x, y)| x - y).collect();
        let nd = space.inner(&d, &d);
        if nd == 0.0 {
            return Ok(None);
        }
        let (au, aw) = (a(&u)?, a(&w)?);
        let da: Vec<f64> = au.iter().zip(&aw).map(|(x, y)| x - y).collect();
        Ok(Some(space.inner(&da, &d) / nd))
    });
    let mut best: Option<f64> = None;
    for q in quotients {
        if let Some(q) = q? {
            best = Some(best.map_or(q, |b| b.max(q)));
        }
    }
    best.ok_or_else(|| Error::invalid("every sampled pair was coincident"))
}

#[derive(Clone, Debug)]
pub struct Lambda0Options {
    /// One-sided constant of `A`; estimated by sampling when absent.
    pub m: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub safety: f64,
    /// Sampler used to estimate `m`.
    pub m_sampler: PairSampler,
    pub concurrent: bool,
}

impl Default for Lambda0Options {
    fn default() -> Self {
        Lambda0Options {
            m: None,
            samples: 10_000,
            seed: 42,
            safety: 0.9,
            m_sampler: PairSampler::StratifiedDirections { half_width: 1.0 },
            concurrent: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Lambda0Report {
    pub m: f64,
    pub m_estimated: bool,
    pub r: f64,
    /// Sampled `sup_{‖u‖ ≤ r} ‖B(u)‖`; a lower bound of the true supremum.
    pub sup_b: f64,
    /// `1 / (1 + sup_b)`; an upper estimate of the true `λ₀`.
    pub lambda0: f64,
    /// `safety · lambda0`.
    pub lambda0_safe: f64,
    /// `(‖A(0)‖ + 1) / (1 − m)`: the radius the a-posteriori estimate
    /// `(1 − m)‖u‖ − ‖A(0)‖ ≤ λ‖B(P u)‖ ≤ 1` actually delivers.
    pub r_certified: f64,
    pub sup_b_certified: f64,
    /// `1 / (1 + sup_{‖u‖ ≤ r_certified} ‖B(u)‖)`; for `λ` up to this value the
    /// solution of the projected equation lies in the certified ball.
    pub lambda0_certified: f64,
    pub samples: usize,
}

/// `r = ‖A(0)‖ / (1 − m)` and `λ₀ = 1 / (1 + sup_{‖u‖≤r} ‖B(u)‖)`, the
/// supremum taken over seeded uniform samples of the ball (plus its centre).
/// The same samples, rescaled, give the certified pair for the larger radius
/// `(‖A(0)‖ + 1) / (1 − m)`.
pub fn krasnoselskii_lambda0<A, B>(a: &A, b: &B, space: &VecSpace, opts: &Lambda0Options) -> Result<Lambda0Report>
where
    A: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    B: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if opts.samples == 0 {
        return Err(Error::invalid("sample budget must be at least 1"));
    }
    let (m, m_estimated) = match opts.m {
        Some(m) => (m, false),
        None => (
            one_sided_constant(a, space, &opts.m_sampler, opts.samples, opts.seed, opts.concurrent)?,
            true,
        ),
    };
    if !(m < 1.0) {
        return Err(Error::invalid(format!("one-sided constant m = {m} is not below 1")));
    }
    let dim = space.dim();
    let zero = vec![0.0; dim];
    let a0 = space.norm(&a(&zero)?);
    let r = a0 / (1.0 - m);
    let r_cert = (a0 + 1.0) / (1.0 - m);
    let norms = par::map_indexed(opts.samples, opts.concurrent, |i| -> Result<(f64, f64)> {
        if i == 0 {
            let n = space.norm(&b(&zero)?);
            return Ok((n, n));
        }
        let mut rng = par::sample_rng(opts.seed ^ 0x5eed_ba11, i);
        let dir = gaussian_direction(dim, &mut rng);
        let radius = rng.random::<f64>().powf(1.0 / dim as f64);
        let z: Vec<f64> = dir.iter().map(|x| x * radius).collect();
        let unit = space.from_euclidean_ball(&z)?;
        let inner: Vec<f64> = unit.iter().map(|x| x * r).collect();
        let outer: Vec<f64> = unit.iter().map(|x| x * r_cert).collect();
        Ok((space.norm(&b(&inner)?), space.norm(&b(&outer)?)))
    });
    let (mut sup_b, mut sup_cert): (f64, f64) = (0.0, 0.0);
    for n in norms {
        let (x, y) = n?;
        sup_b = sup_b.max(x);
        sup_cert = sup_cert.max(y);
    }
    let lambda0 = 1.0 / (1.0 + sup_b);
    Ok(Lambda0Report {
        m,
        m_estimated,
        r,
        sup_b,
        lambda0,
        lambda0_safe: opts.safety * lambda0,
        r_certified: r_cert,
        sup_b_certified: sup_cert,
        lambda0_certified: 1.0 / (1.0 + sup_cert),
        samples: opts.samples,
    })
}

fn radial_projection(u: &[f64], r: f64, space: &VecSpace) -> Vec<f64> {
    let n = space.norm(u);
    if n <= r {
        u.to_vec()
    } else {
        u.iter().map(|x| x * r / n).collect()
    }
}

/// Solves `u = A(u) + λ B(u)` through the hybrid loop with
/// `F(u, v) = u − A(u) − v` (strongly monotone with modulus `1 − m`) and
/// `G(u, v) = λ B(P_r u)`, `P_r` the radial projection onto the ball of
/// radius `r`. The bound `‖u‖ ≤ r` is checked afterwards.
pub fn solve_eigen<A, B>(a: &A, b: &B, lambda: f64, r: f64, m: f64, space: &VecSpace, tol: f64) -> Result<Vec<f64>>
where
    A: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
    B: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("λ must be non-negative, got {lambda}")));
    }
    if !(m < 1.0) {
        return Err(Error::invalid(format!("one-sided constant m = {m} is not below 1")));
    }
    if !(r >= 0.0) {
        return Err(Error::invalid("ball radius must be non-negative"));
    }
    let f = identity_minus(a, space, 1.0 - m);
    let g = FnMap::new(|u: &[f64], _v: &[f64]| {
        let bu = b(&radial_projection(u, r, space))?;
        Ok(bu.into_iter().map(|x| lambda * x).collect())
    });
    let dim = space.dim();
    let opts = HybridOptions {
        schedule: vec![0.0],
        tol_inner: 0.01 * tol,
        tol_outer: 0.01 * tol,
        max_outer: 10_000,
        v_norm: VNorm::Euclidean,
        ..HybridOptions::default()
    };
    let sol = hybrid_solve(&f, &g, space, &vec![0.0; dim], &vec![0.0; dim], &opts)?;
    let u = sol.u;
    let au = a(&u)?;
    let bu = b(&radial_projection(&u, r, space))?;
    let res: Vec<f64> = (0..dim).map(|i| u[i] - au[i] - lambda * bu[i]).collect();
    let res = space.norm(&res);
    if res > tol {
        return Err(Error::NonConvergence {
            what: "eigen-type equation".into(),
            iterations: sol.trace.len(),
            last_residual: res,
            residual_trace: sol.trace.iter().map(|t| t.residual).collect(),
        });
    }
    let norm = space.norm(&u);
    if norm > r + tol {
        return Err(Error::Inconsistent(format!(
            "solution norm {norm} exceeds the a-priori radius {r}"
        )));
    }
    Ok(u)
}

/// `F(u, v) = G(u − A(u) − v)`, the dual form of `u − A(u) − v`.
fn identity_minus<'a, A>(a: &'a A, space: &'a VecSpace, modulus: f64) -> FnOperator<'a>
where
    A: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    FnOperator::new(move |u: &[f64], v: &[f64]| {
        let au = a(u)?;
        let x: Vec<f64> = (0..u.len()).map(|i| u[i] - au[i] - v[i]).collect();
        Ok(space.apply(&x))
    })
    .strongly_monotone(modulus)
}

/// Closed convex set given by a membership test and a projection.
pub trait ConvexSet: Send + Sync {
    fn contains(&self, u: &[f64]) -> bool;
    fn project(&self, u: &[f64]) -> Vec<f64>;
    fn describe(&self) -> String;
}

const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ConvexSet for BoxSet {
    fn contains(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| *x >= l - MEMBERSHIP_TOL * (1.0 + l.abs()) && *x <= h + MEMBERSHIP_TOL * (1.0 + h.abs()))
    }

    fn project(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (l, h))| x.clamp(*l, *h))
            .collect()
    }

    fn describe(&self) -> String {
        format!("box {:?} to {:?}", self.lo, self.hi)
    }
}

/// Euclidean ball.
#[derive(Clone, Debug, PartialEq)]
pub struct BallSet {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSet {
    fn distance(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>().sqrt()
    }
}

impl ConvexSet for BallSet {
    fn contains(&self, u: &[f64]) -> bool {
        self.distance(u) <= self.radius * (1.0 + MEMBERSHIP_TOL) + MEMBERSHIP_TOL
    }

    fn project(&self, u: &[f64]) -> Vec<f64> {
        let d = self.distance(u);
        if d <= self.radius {
            return u.to_vec();
        }
        u.iter()
            .zip(&self.center)
            .map(|(x, c)| c + (x - c) * self.radius / d)
            .collect()
    }

    fn describe(&self) -> String {
        format!("ball of radius {} around {:?}", self.radius, self.center)
    }
}

#[derive(Clone, Debug)]
pub struct CondKrasOptions {
    /// One-sided constant of `A`, below 1.
    pub m: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; the projection of the origin onto `D` by default.
    pub start: Option<Vec<f64>>,
}

impl Default for CondKrasOptions {
    fn default() -> Self {
        CondKrasOptions {
            m: 0.0,
            tol: 1e-10,
            max_iter: 1000,
            start: None,
        }
    }
}

/// Picard iteration of `T(u) = (I − A)⁻¹ B(u)` inside `D`, each inverse by a
/// strongly monotone regularized solve. Every iterate must stay in `D`.
pub fn solve_condkras<A, B>(a: &A, b: &B, d: &dyn ConvexSet, space: &VecSpace, opts: &CondKrasOptions) -> Result<Vec<f64>>
where
    A: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
    B: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    if !(opts.m < 1.0) {
        return Err(Error::invalid(format!("one-sided constant m = {} is not below 1", opts.m)));
    }
    let dim = space.dim();
    let mut u = match &opts.start {
        Some(s) => s.clone(),
        None => d.project(&vec![0.0; dim]),
    };
    if !d.contains(&u) {
        return Err(Error::invalid(format!("starting point is not in the {}", d.describe())));
    }
    let f = identity_minus(a, space, 1.0 - opts.m);
    let j = space.duality_map();
    let inner = InnerOptions {
        tol: 0.01 * opts.tol,
        ..InnerOptions::default()
    };
    let mut trace = Vec::new();
    for iter in 1..=opts.max_iter {
        let bu = b(&u)?;
        let next = solve_regularized(&f, j, &bu, 0.0, Some(&u), &inner)?.u;
        if !d.contains(&next) {
            return Err(Error::InvarianceViolation {
                iteration: iter,
                detail: format!("iterate {next:?} is outside the {}", d.describe()),
            });
        }
        u = next;
        let (au, bu) = (a(&u)?, b(&u)?);
        let res: Vec<f64> = (0..dim).map(|i| u[i] - au[i] - bu[i]).collect();
        let res = space.norm(&res);
        trace.push(res);
        if res <= opts.tol {
            return Ok(u);
        }
    }
    Err(Error::NonConvergence {
        what: "conditional Krasnoselskii iteration".into(),
        iterations: opts.max_iter,
        last_residual: trace.last().copied().unwrap_or(f64::NAN),
        residual_trace: trace,
    })
}
