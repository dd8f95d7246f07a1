//! The coupled system: the p-Laplacian equation for `u` driven by `v`, and the
//! nonlocal q-Laplacian equation for `v` driven by `u`.

mod radius;
mod registry;
mod solve;

pub use radius::{radius_r, PsiCoefficients, RadiusReport};
pub use registry::{registry, registry_names};
pub use solve::{check_problem, solve_system, CheckOptions, ProblemCheck, Residuals, SolveOptions, SolveReport, Solution};

use serde::{Deserialize, Serialize};

use crate::checks::{AssumptionReport, CheckResult, Lattice, Tracker};
use crate::error::{Error, Result};
use crate::grid::{BVFunction, Quadrature};
use crate::nonlocal::{NonlocalRaw, NonlocalSpec};
use crate::plaplace::{MinorantScaling, PLaplaceSpec};

/// `δ(y)/m(y) ≤ α y^σ + β` with `σ < (p − 1)(q − 1)/r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaCondition {
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Dual-norm residual of each inner `u` solve.
    pub inner: f64,
    /// `v`-update norm and `‖F(u, v)‖_*` at termination.
    pub outer: f64,
    /// Acceptance bound on the first equation's dual residual.
    pub residual: f64,
    /// Classical residual tolerance of the second equation; `10 h` if absent.
    pub classical: Option<f64>,
    /// Bound on `γ(‖u‖_p, ‖v‖_∞)` at the solution.
    pub gamma: f64,
    pub max_outer: usize,
    pub inner_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            inner: 1e-12,
            outer: 1e-10,
            residual: 1e-6,
            classical: None,
            gamma: 1e-6,
            max_outer: 500,
            inner_max_iter: 10_000,
        }
    }
}

/// `εₖ = 2^{-k}` for `k = 0..=40`.
pub fn coupled_schedule() -> Vec<f64> {
    (0..=40).map(|k| 0.5f64.powi(k)).collect()
}

/// Full description of the coupled system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemRaw", into = "ProblemRaw")]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub plaplace: PLaplaceSpec,
    pub nonlocal: NonlocalSpec,
    pub sigma: SigmaCondition,
    pub n_cells: usize,
    pub tolerances: Tolerances,
    pub epsilon_schedule: Vec<f64>,
    pub scaling: MinorantScaling,
}

impl ProblemSpec {
    pub fn p(&self) -> f64 {
        self.plaplace.p
    }

    pub fn q(&self) -> f64 {
        self.nonlocal.g.q
    }

    pub fn validate(&self) -> Result<()> {
        self.plaplace.validate()?;
        self.nonlocal.g.validate()?;
        self.nonlocal.h.validate()?;
        if self.n_cells < 2 {
            return Err(Error::Config(format!("n_cells must be at least 2, got {}", self.n_cells)));
        }
        let s = &self.epsilon_schedule;
        if s.is_empty() || s.iter().any(|e| !(*e >= 0.0 && e.is_finite())) || s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("epsilon_schedule must be non-empty, non-negative and strictly decreasing".into()));
        }
        let t = &self.tolerances;
        for (name, x) in [("inner", t.inner), ("outer", t.outer), ("residual", t.residual), ("gamma", t.gamma)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("tolerance `{name}` must be positive, got {x}")));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemRaw {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    p: f64,
    phi: String,
    m: String,
    #[serde(rename = "M")]
    big_m: String,
    f: String,
    delta: String,
    q: f64,
    g: String,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "C")]
    c: f64,
    r: f64,
    theta: f64,
    h0: String,
    h1: String,
    alpha: [f64; 2],
    beta: [f64; 2],
    #[serde(rename = "A0")]
    a0: BVFunction,
    #[serde(rename = "A1")]
    a1: BVFunction,
    sigma_condition: SigmaCondition,
    #[serde(default = "default_cells")]
    n_cells: usize,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default = "coupled_schedule")]
    epsilon_schedule: Vec<f64>,
    #[serde(default)]
    quadrature: Quadrature,
    #[serde(default)]
    minorant_scaling: MinorantScaling,
}

fn default_cells() -> usize {
    256
}

impl TryFrom<ProblemRaw> for ProblemSpec {
    type Error = Error;

    fn try_from(raw: ProblemRaw) -> Result<Self> {
        let mut plaplace = PLaplaceSpec::parse(raw.p, &raw.phi, &raw.m, &raw.big_m, &raw.f, &raw.delta)?;
        plaplace.quadrature = raw.quadrature;
        let nonlocal = NonlocalSpec::try_from(NonlocalRaw {
            q: raw.q,
            g: raw.g,
            a: raw.a,
            b: raw.b,
            c: raw.c,
            r: raw.r,
            theta: raw.theta,
            h0: raw.h0,
            h1: raw.h1,
            alpha: raw.alpha,
            beta: raw.beta,
            a0: raw.a0,
            a1: raw.a1,
            quadrature: raw.quadrature,
        })?;
        let spec = ProblemSpec {
            name: raw.name,
            plaplace,
            nonlocal,
            sigma: raw.sigma_condition,
            n_cells: raw.n_cells,
            tolerances: raw.tolerances,
            epsilon_schedule: raw.epsilon_schedule,
            scaling: raw.minorant_scaling,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ProblemSpec> for ProblemRaw {
    fn from(s: ProblemSpec) -> Self {
        let pl = s.plaplace;
        let nl = NonlocalRaw::from(s.nonlocal);
        ProblemRaw {
            name: s.name,
            p: pl.p,
            phi: pl.phi.phi.to_string(),
            m: pl.phi.m.to_string(),
            big_m: pl.phi.big_m.to_string(),
            f: pl.f.f.to_string(),
            delta: pl.f.delta.to_string(),
            q: nl.q,
            g: nl.g,
            a: nl.a,
            b: nl.b,
            c: nl.c,
            r: nl.r,
            theta: nl.theta,
            h0: nl.h0,
            h1: nl.h1,
            alpha: nl.alpha,
            beta: nl.beta,
            a0: nl.a0,
            a1: nl.a1,
            sigma_condition: s.sigma,
            n_cells: s.n_cells,
            tolerances: s.tolerances,
            epsilon_schedule: s.epsilon_schedule,
            quadrature: pl.quadrature,
            minorant_scaling: s.scaling,
        }
    }
}

/// Exponent inequality `σ < (p − 1)(q − 1)/r` checked exactly, and
/// `δ(y)/m(y) ≤ α y^σ + β` on `y ∈ [0, 10³]` (1001 points) plus seeded
/// random points.
pub fn check_sigma_condition(spec: &ProblemSpec, lattice: &Lattice) -> Result<AssumptionReport> {
    use rand::Rng;

    let (p, q, r) = (spec.p(), spec.q(), spec.nonlocal.g.r);
    let limit = if r == 0.0 { f64::INFINITY } else { (p - 1.0) * (q - 1.0) / r };
    let sc = &spec.sigma;
    let exponent = CheckResult::exact(
        "sigma exponent",
        sc.sigma < limit,
        limit - sc.sigma,
        format!("sigma = {} is not below (p - 1)(q - 1)/r = {limit}", sc.sigma),
    );
    let mut bound = Tracker::new("delta/m growth", 1e-12);
    let mut check = |y: f64| {
        let vals = (|| Ok::<_, Error>((spec.plaplace.eval_delta(y)?, spec.plaplace.eval_m(y)?)))();
        match vals {
            Ok((d, m)) => {
                let lhs = d / m;
                let rhs = sc.alpha * y.powf(sc.sigma) + sc.beta;
                bound.record((rhs - lhs) / (1.0 + rhs.abs()), || {
                    format!("delta({y})/m({y}) = {lhs} > {rhs}")
                });
            }
            Err(e) => bound.fail(e.to_string()),
        }
    };
    for i in 0..=1000 {
        check(i as f64);
    }
    for i in 0..lattice.random {
        let y = crate::par::sample_rng(lattice.seed, i).random_range(0.0..=1000.0);
        check(y);
    }
    Ok(AssumptionReport {
        checks: vec![exponent, bound.finish()],
    })
}
