//! The nonlocal problem
//!
//! ```text
//! −(ψ_q(v̇))˙ = g(t, u, v),   v(0) = ∫ h₀(v) dA₀,   v(1) = ∫ h₁(v) dA₁
//! ```
//!
//! solved through the integral operator
//! `T(u, v)(t) = ∫₀ᵗ ψ_q⁻¹(c − VN_g(s)) ds + ∫ h₀(v) dA₀`, where `VN_g` is the
//! running integral of `g(·, u, v)` and `c = c(u, v)` is the unique zero of
//! the increasing function `Θ`.

mod checks;

pub use checks::{check_g_assumptions, verify_nonlocal_solution, NonlocalCheck};

use serde::{Deserialize, Serialize};

use crate::engine::{damped_picard, DampingOptions, PicardOptions, TraceRow, VNorm};
use crate::error::{Error, Result};
use crate::expr::{parse_slot, Env, Expr, Var};
use crate::grid::{sup_norm, BVFunction, Grid, GridFunction, Quadrature};

/// Right-hand side `g` with its growth constants:
/// `|g(t, u, v)| ≤ A|u|ʳ + B|v|^θ + C`.
#[derive(Clone, Debug, PartialEq)]
pub struct GSpec {
    pub q: f64,
    pub g: Expr,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r: f64,
    pub theta: f64,
}

impl GSpec {
    pub fn new(q: f64, g: Expr, a: f64, b: f64, c: f64, r: f64, theta: f64) -> Result<Self> {
        let spec = GSpec { q, g, a, b, c, r, theta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(Error::Config(format!("q must be a finite number above 1, got {}", self.q)));
        }
        for (name, x) in [("A", self.a), ("B", self.b), ("C", self.c), ("r", self.r), ("theta", self.theta)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {x}")));
            }
        }
        if self.theta >= self.q - 1.0 {
            return Err(Error::Config(format!(
                "theta = {} must be below q - 1 = {}",
                self.theta,
                self.q - 1.0
            )));
        }
        for v in self.g.variables() {
            if !matches!(v, Var::T | Var::U | Var::V) {
                return Err(Error::Config(format!("g may only use t, u, v; found `{}`", v.name())));
            }
        }
        Ok(())
    }

    pub fn eval_g(&self, t: f64, u: f64, v: f64) -> Result<f64> {
        self.g
            .eval(&Env::tuv(t, u, v))
            .map_err(|e| Error::eval(format!("g at (t, u, v) = ({t}, {u}, {v})"), e))
    }

    /// `A xʳ + B y^θ + C`.
    pub fn growth(&self, x: f64, y: f64) -> f64 {
        self.a * x.abs().powf(self.r) + self.b * y.abs().powf(self.theta) + self.c
    }
}

/// Boundary data: `|h_j(v)| ≤ α_j |v| + β_j` and the integrators `A_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct HSpec {
    pub h0: Expr,
    pub h1: Expr,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub a0: BVFunction,
    pub a1: BVFunction,
}

impl HSpec {
    pub fn new(h0: Expr, h1: Expr, alpha: [f64; 2], beta: [f64; 2], a0: BVFunction, a1: BVFunction) -> Result<Self> {
        let spec = HSpec { h0, h1, alpha, beta, a0, a1 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for x in self.alpha.iter().chain(&self.beta) {
            if !(*x >= 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("alpha and beta must be finite and non-negative, got {x}")));
            }
        }
        for (name, h) in [("h0", &self.h0), ("h1", &self.h1)] {
            if h.variables().iter().any(|v| *v != Var::V) {
                return Err(Error::Config(format!("{name} may only use v")));
            }
        }
        Ok(())
    }

    pub fn eval_h(&self, j: usize, v: f64) -> Result<f64> {
        let h = if j == 0 { &self.h0 } else { &self.h1 };
        h.eval(&Env::new().with(Var::V, v))
            .map_err(|e| Error::eval(format!("h{j} at v = {v}"), e))
    }

    pub fn variations(&self) -> [f64; 2] {
        [self.a0.total_variation(), self.a1.total_variation()]
    }

    /// The two quantities whose minimum must be below 1:
    /// `2α₀VarA₀ + α₁VarA₁` and `2α₁VarA₁ + α₀VarA₀`.
    pub fn contraction_terms(&self) -> [f64; 2] {
        let [v0, v1] = self.variations();
        let [a0, a1] = self.alpha;
        [2.0 * a0 * v0 + a1 * v1, 2.0 * a1 * v1 + a0 * v0]
    }

    /// `∫ h_j(v) dA_j`.
    pub fn boundary_integral(&self, j: usize, v: &GridFunction, rule: Quadrature) -> Result<f64> {
        let a = if j == 0 { &self.a0 } else { &self.a1 };
        a.stieltjes(v.grid(), rule, |t| self.eval_h(j, v.eval(t)))
    }
}

/// Data of the second equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NonlocalRaw", into = "NonlocalRaw")]
pub struct NonlocalSpec {
    pub g: GSpec,
    pub h: HSpec,
    pub quadrature: Quadrature,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct NonlocalRaw {
    pub q: f64,
    pub g: String,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub r: f64,
    pub theta: f64,
    pub h0: String,
    pub h1: String,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    #[serde(rename = "A0")]
    pub a0: BVFunction,
    #[serde(rename = "A1")]
    pub a1: BVFunction,
    #[serde(default)]
    pub quadrature: Quadrature,
}

impl TryFrom<NonlocalRaw> for NonlocalSpec {
    type Error = Error;

    fn try_from(raw: NonlocalRaw) -> Result<Self> {
        Ok(NonlocalSpec {
            g: GSpec::new(
                raw.q,
                parse_slot("g", &raw.g, &[Var::T, Var::U, Var::V])?,
                raw.a,
                raw.b,
                raw.c,
                raw.r,
                raw.theta,
            )?,
            h: HSpec::new(
                parse_slot("h0", &raw.h0, &[Var::V])?,
                parse_slot("h1", &raw.h1, &[Var::V])?,
                raw.alpha,
                raw.beta,
                raw.a0,
                raw.a1,
            )?,
            quadrature: raw.quadrature,
        })
    }
}

impl From<NonlocalSpec> for NonlocalRaw {
    fn from(s: NonlocalSpec) -> Self {
        NonlocalRaw {
            q: s.g.q,
            g: s.g.g.to_string(),
            a: s.g.a,
            b: s.g.b,
            c: s.g.c,
            r: s.g.r,
            theta: s.g.theta,
            h0: s.h.h0.to_string(),
            h1: s.h.h1.to_string(),
            alpha: s.h.alpha,
            beta: s.h.beta,
            a0: s.h.a0,
            a1: s.h.a1,
            quadrature: s.quadrature,
        }
    }
}

impl NonlocalSpec {
    pub fn new(g: GSpec, h: HSpec) -> Self {
        NonlocalSpec {
            g,
            h,
            quadrature: Quadrature::default(),
        }
    }

    pub fn q(&self) -> f64 {
        self.g.q
    }
}

pub fn psi_q(z: f64, q: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        z.abs().powf(q - 2.0) * z
    }
}

pub fn psi_q_inv(x: f64, q: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(1.0 / (q - 1.0)).copysign(x)
    }
}

/// `VN_g` at the nodes and at the quadrature points of every cell.
#[derive(Clone, Debug)]
pub struct VolterraLoad {
    grid: Grid,
    rule: Quadrature,
    nodes: Vec<f64>,
    /// `n_cells × rule.len()` values, row-major by cell.
    points: Vec<f64>,
    /// Largest `|g|` seen at the quadrature points.
    pub g_sup: f64,
}

impl VolterraLoad {
    pub fn new(u: &GridFunction, v: &GridFunction, spec: &NonlocalSpec) -> Result<Self> {
        if u.grid() != v.grid() {
            return Err(Error::invalid("u and v live on different grids"));
        }
        let grid = *v.grid();
        let rule = spec.quadrature;
        let reference = rule.reference();
        let h = grid.h();
        let g = |k: usize, x: f64| -> Result<f64> {
            let t = grid.node(k) + x * h;
            spec.g.eval_g(t, u.eval_in_cell(k, x), v.eval_in_cell(k, x))
        };
        let mut nodes = Vec::with_capacity(grid.n_nodes());
        let mut points = Vec::with_capacity(grid.n_cells() * reference.len());
        let mut g_sup = 0.0f64;
        let mut acc = 0.0;
        nodes.push(0.0);
        for k in 0..grid.n_cells() {
            let mut cell = 0.0;
            for &(x, w) in reference {
                let gx = g(k, x)?;
                g_sup = g_sup.max(gx.abs());
                cell += w * h * gx;
                // ∫ from the cell start to the point, same rule on [0, x]
                let mut part = 0.0;
                for &(y, wy) in reference {
                    part += wy * x * h * g(k, x * y)?;
                }
                points.push(acc + part);
            }
            acc += cell;
            nodes.push(acc);
        }
        Ok(VolterraLoad {
            grid,
            rule,
            nodes,
            points,
            g_sup,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Largest `|VN_g|` over nodes and quadrature points.
    pub fn sup(&self) -> f64 {
        self.nodes.iter().chain(&self.points).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Cumulative `∫₀^{t_i} ψ_q⁻¹(c − VN_g)` at every node.
    fn cumulative(&self, c: f64, q: f64) -> Vec<f64> {
        let h = self.grid.h();
        let reference = self.rule.reference();
        let mut out = Vec::with_capacity(self.grid.n_nodes());
        let mut acc = 0.0;
        out.push(0.0);
        for cell in self.points.chunks(reference.len()) {
            for (vn, &(_, w)) in cell.iter().zip(reference) {
                acc += w * h * psi_q_inv(c - vn, q);
            }
            out.push(acc);
        }
        out
    }

    fn integral(&self, c: f64, q: f64) -> f64 {
        let h = self.grid.h();
        let reference = self.rule.reference();
        self.points
            .chunks(reference.len())
            .map(|cell| {
                cell.iter()
                    .zip(reference)
                    .map(|(vn, &(_, w))| w * h * psi_q_inv(c - vn, q))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// `c(u, v)` with the data it was computed from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CRoot {
    pub c: f64,
    /// `Θ(c)`.
    pub theta: f64,
    /// Initial bracket `ψ_q(I₁ − I₀) ∓ sup|VN_g|`.
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// `∫ h₀(v) dA₀` and `∫ h₁(v) dA₁`.
    pub boundary: [f64; 2],
}

const C_MAX_ITER: usize = 200;

/// Zero of `Θ(c) = ∫₀¹ ψ_q⁻¹(c − VN_g) + I₀ − I₁` by Illinois regula falsi
/// on the a-priori bracket.
pub fn find_c_with(load: &VolterraLoad, boundary: [f64; 2], q: f64, tol: f64) -> Result<CRoot> {
    let theta = |c: f64| load.integral(c, q) + boundary[0] - boundary[1];
    let center = psi_q(boundary[1] - boundary[0], q);
    let spread = load.sup();
    let bracket = (center - spread, center + spread);
    let (mut lo, mut hi) = bracket;
    let (mut flo, mut fhi) = (theta(lo), theta(hi));
    let done = |c: f64, th: f64, iterations: usize| CRoot {
        c,
        theta: th,
        bracket,
        iterations,
        boundary,
    };
    if flo.abs() <= tol {
        return Ok(done(lo, flo, 0));
    }
    if fhi.abs() <= tol {
        return Ok(done(hi, fhi, 0));
    }
    // rounding can leave the bracket a hair short; widen geometrically
    let mut widen = spread.max(1.0) * 1e-12;
    while flo > 0.0 {
        lo -= widen;
        widen *= 2.0;
        flo = theta(lo);
    }
    widen = spread.max(1.0) * 1e-12;
    while fhi < 0.0 {
        hi += widen;
        widen *= 2.0;
        fhi = theta(hi);
    }
    let mut side = 0i8;
    for it in 1..=C_MAX_ITER {
        let mut c = hi - fhi * (hi - lo) / (fhi - flo);
        if !(c > lo && c < hi) {
            c = 0.5 * (lo + hi);
        }
        let fc = theta(c);
        if fc.abs() <= tol {
            return Ok(done(c, fc, it));
        }
        if fc < 0.0 {
            lo = c;
            flo = fc;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = c;
            fhi = fc;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
            let fm = theta(0.5 * (lo + hi));
            if fm.abs() <= tol {
                return Ok(done(0.5 * (lo + hi), fm, it));
            }
            return Err(Error::NonConvergence {
                what: format!("root of Θ: bracket collapsed with |Θ| = {:e} above {tol:e}", fm.abs()),
                iterations: it,
                last_residual: fm.abs(),
                residual_trace: vec![],
            });
        }
    }
    let c = 0.5 * (lo + hi);
    Err(Error::NonConvergence {
        what: "root of Θ".into(),
        iterations: C_MAX_ITER,
        last_residual: theta(c).abs(),
        residual_trace: vec![],
    })
}

fn boundary_pair(v: &GridFunction, spec: &NonlocalSpec) -> Result<[f64; 2]> {
    Ok([
        spec.h.boundary_integral(0, v, spec.quadrature)?,
        spec.h.boundary_integral(1, v, spec.quadrature)?,
    ])
}

pub fn find_c(u: &GridFunction, v: &GridFunction, spec: &NonlocalSpec, tol: f64) -> Result<f64> {
    let load = VolterraLoad::new(u, v, spec)?;
    Ok(find_c_with(&load, boundary_pair(v, spec)?, spec.q(), tol)?.c)
}

/// Tolerance on `|Θ(c)|`.
pub const C_TOL: f64 = 1e-10;

/// One application of `T` with its intermediate values.
#[derive(Clone, Debug)]
pub struct TApplication {
    pub value: GridFunction,
    pub root: CRoot,
    pub load: VolterraLoad,
}

pub fn apply_t_detailed(u: &GridFunction, v: &GridFunction, spec: &NonlocalSpec) -> Result<TApplication> {
    let load = VolterraLoad::new(u, v, spec)?;
    let root = find_c_with(&load, boundary_pair(v, spec)?, spec.q(), C_TOL)?;
    let values = load
        .cumulative(root.c, spec.q())
        .into_iter()
        .map(|x| x + root.boundary[0])
        .collect();
    Ok(TApplication {
        value: GridFunction::new(*v.grid(), values)?,
        root,
        load,
    })
}

pub fn apply_t(u: &GridFunction, v: &GridFunction, spec: &NonlocalSpec) -> Result<GridFunction> {
    Ok(apply_t_detailed(u, v, spec)?.value)
}

#[derive(Clone, Debug)]
pub struct FixedPointOptions {
    /// `‖v‖_∞` bound; exits are reported, not clipped.
    pub radius: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: DampingOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            radius: f64::INFINITY,
            tol: 1e-10,
            max_iter: 500,
            damping: DampingOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub v: GridFunction,
    pub iterations: usize,
    pub last_update: f64,
    pub trace: Vec<TraceRow>,
    pub left_ball: bool,
}

/// Damped Picard iteration of `T(u, ·)` in the sup norm.
pub fn fixed_point_t(u: &GridFunction, v0: &GridFunction, spec: &NonlocalSpec, opts: &FixedPointOptions) -> Result<FixedPoint> {
    let grid = *v0.grid();
    if sup_norm(v0) > opts.radius {
        log::warn!("starting v lies outside the ball of radius {}", opts.radius);
    }
    let picard = PicardOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        damping: opts.damping.clone(),
        norm: VNorm::Sup,
        radius: opts.radius,
        clip: false,
    };
    let p = damped_picard(v0.values(), &picard, |v| {
        let v = GridFunction::new(grid, v.to_vec())?;
        Ok(apply_t(u, &v, spec)?.into_values())
    })?;
    Ok(FixedPoint {
        v: GridFunction::new(grid, p.v)?,
        iterations: p.iterations,
        last_update: p.last_update,
        trace: p.trace,
        left_ball: p.left_ball,
    })
}

/// `k`-th power bound `(a + b)^k ≤ factor·(a^k + b^k)` for `a, b ≥ 0`.
fn split_factor(k: f64) -> f64 {
    if k <= 1.0 {
        1.0
    } else {
        2f64.powf(k - 1.0)
    }
}

/// Right-hand side of the bound on `‖T(u, v)‖_∞` for `‖u‖_∞ ≤ x`,
/// `‖v‖_∞ ≤ y`:
///
/// ```text
/// a y + β₁VarA₁ + β₀VarA₀ + (2A xʳ + 2C)^{1/(q−1)} + (2B)^{1/(q−1)} y^{θ/(q−1)}
/// ```
///
/// with `a = α₁VarA₁ + 2α₀VarA₀`. For `q < 2` the last two terms carry the
/// factor `2^{1/(q−1) − 1}` from splitting the power of a sum.
pub fn boundedness_rhs(g: &GSpec, h: &HSpec, x: f64, y: f64) -> f64 {
    let [v0, v1] = h.variations();
    let k = 1.0 / (g.q - 1.0);
    let a = h.alpha[1] * v1 + 2.0 * h.alpha[0] * v0;
    let split = split_factor(k);
    a * y
        + h.beta[1] * v1
        + h.beta[0] * v0
        + split * (2.0 * g.a * x.powf(g.r) + 2.0 * g.c).powf(k)
        + split * (2.0 * g.b).powf(k) * y.powf(g.theta * k)
}

/// Least `R` with `boundedness_rhs(x, R) ≤ R`.
pub fn schauder_radius(g: &GSpec, h: &HSpec, x: f64) -> Result<f64> {
    let [v0, v1] = h.variations();
    let a = h.alpha[1] * v1 + 2.0 * h.alpha[0] * v0;
    if a >= 1.0 {
        return Err(Error::Assumption(format!(
            "α₁VarA₁ + 2α₀VarA₀ = {a} is not below 1; no invariant ball"
        )));
    }
    let gap = |r: f64| boundedness_rhs(g, h, x, r) - r;
    if gap(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while gap(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::invalid("radius search overflowed"));
        }
    }
    let mut lo = 0.0;
    // r ↦ gap(r) is concave, so {gap ≤ 0} is a half-line
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
