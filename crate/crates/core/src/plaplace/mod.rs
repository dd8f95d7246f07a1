//! Discrete weak form of `-(φ(t, v, |u'|^{p-1}) |u'|^{p-2} u')' = f(t, u, v)`
//! with `u(0) = u(1) = 0`.
//!
//! `F(u, v) = D(u, v) − N_f(u, v)` is assembled against the interior hat
//! functions:
//!
//! ```text
//! F_i = ∫ φ(t, v, |u'|^{p-1}) |u'|^{p-2} u' w_i' dt − ∫ f(t, u, v) w_i dt
//! ```
//!
//! The flux is exact per cell because `u'` is cellwise constant; the cell
//! averages of `φ` and the load integral use the configured quadrature rule.

mod checks;

pub use checks::{
    check_coercivity, check_monotonicity, check_phi_f_assumptions, CoercivityOptions, CoercivityReport,
    CoercivityWitness,
};

use serde::{Deserialize, Serialize};

use crate::engine::{solve_regularized, InnerOptions, InnerSolution, ParamOperator, VecSpace};
use crate::error::{Error, Result};
use crate::expr::{parse_slot, Env, Expr, Var};
use crate::grid::{p_norm, Grid, GridFunction, Quadrature};
use crate::linalg::{stiffness, SymTridiag};

/// `φ` with its bounds `m ≤ φ ≤ M`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiSpec {
    /// Over `t`, `y` (the value of `v`) and `r = |u'|^{p-1}`.
    pub phi: Expr,
    /// Over `y`; positive and nonincreasing.
    pub m: Expr,
    /// Over `y`.
    pub big_m: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FSpec {
    /// Over `t`, `u`, `v`.
    pub f: Expr,
    /// Over `v ≥ 0`; bounds `|f(t, 0, y)|` for `|y| ≤ v`.
    pub delta: Expr,
}

/// Data of the first equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PLaplaceRaw", into = "PLaplaceRaw")]
pub struct PLaplaceSpec {
    pub p: f64,
    pub phi: PhiSpec,
    pub f: FSpec,
    pub quadrature: Quadrature,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PLaplaceRaw {
    p: f64,
    phi: String,
    m: String,
    #[serde(rename = "M")]
    big_m: String,
    f: String,
    delta: String,
    #[serde(default)]
    quadrature: Quadrature,
}

impl TryFrom<PLaplaceRaw> for PLaplaceSpec {
    type Error = Error;

    fn try_from(raw: PLaplaceRaw) -> Result<Self> {
        let spec = PLaplaceSpec {
            p: raw.p,
            phi: PhiSpec {
                phi: parse_slot("phi", &raw.phi, &[Var::T, Var::Y, Var::R])?,
                m: parse_slot("m", &raw.m, &[Var::Y])?,
                big_m: parse_slot("M", &raw.big_m, &[Var::Y])?,
            },
            f: FSpec {
                f: parse_slot("f", &raw.f, &[Var::T, Var::U, Var::V])?,
                delta: parse_slot("delta", &raw.delta, &[Var::V])?,
            },
            quadrature: raw.quadrature,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<PLaplaceSpec> for PLaplaceRaw {
    fn from(s: PLaplaceSpec) -> Self {
        PLaplaceRaw {
            p: s.p,
            phi: s.phi.phi.to_string(),
            m: s.phi.m.to_string(),
            big_m: s.phi.big_m.to_string(),
            f: s.f.f.to_string(),
            delta: s.f.delta.to_string(),
            quadrature: s.quadrature,
        }
    }
}

impl PLaplaceSpec {
    /// Parses the expressions, checking each slot's variables.
    pub fn parse(p: f64, phi: &str, m: &str, big_m: &str, f: &str, delta: &str) -> Result<Self> {
        PLaplaceRaw {
            p,
            phi: phi.into(),
            m: m.into(),
            big_m: big_m.into(),
            f: f.into(),
            delta: delta.into(),
            quadrature: Quadrature::default(),
        }
        .try_into()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("the p-Laplacian needs a finite p ≥ 2, got {}", self.p)));
        }
        Ok(())
    }

    /// `φ` does not depend on `r`, so the flux derivative is analytic.
    fn phi_independent_of_r(&self) -> bool {
        !self.phi.phi.variables().contains(&Var::R)
    }

    /// Modulus of strong monotonicity in the stiffness norm, available when
    /// `p = 2` and `φ` is a positive constant: then `D` is `φ` times the
    /// stiffness matrix and `−N_f` is monotone.
    pub fn strong_modulus(&self) -> Option<f64> {
        if self.p != 2.0 || !self.phi.phi.is_constant() {
            return None;
        }
        let c = self.phi.phi.eval(&Env::new()).ok()?;
        (c > 0.0).then_some(c)
    }

    pub fn eval_m(&self, y: f64) -> Result<f64> {
        self.phi
            .m
            .eval(&Env::new().with(Var::Y, y))
            .map_err(|e| Error::eval(format!("m at y = {y}"), e))
    }

    pub fn eval_big_m(&self, y: f64) -> Result<f64> {
        self.phi
            .big_m
            .eval(&Env::new().with(Var::Y, y))
            .map_err(|e| Error::eval(format!("M at y = {y}"), e))
    }

    pub fn eval_delta(&self, v: f64) -> Result<f64> {
        self.f
            .delta
            .eval(&Env::new().with(Var::V, v))
            .map_err(|e| Error::eval(format!("delta at v = {v}"), e))
    }

    pub fn eval_phi(&self, t: f64, y: f64, r: f64) -> Result<f64> {
        self.phi
            .phi
            .eval(&Env::new().with(Var::T, t).with(Var::Y, y).with(Var::R, r))
            .map_err(|e| Error::eval(format!("phi at (t, y, r) = ({t}, {y}, {r})"), e))
    }

    pub fn eval_f(&self, t: f64, u: f64, v: f64) -> Result<f64> {
        self.f
            .f
            .eval(&Env::tuv(t, u, v))
            .map_err(|e| Error::eval(format!("f at (t, u, v) = ({t}, {u}, {v})"), e))
    }
}

pub fn psi_p(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(p - 2.0) * s
    }
}

/// Pairings of the residual with the interior hat functions.
#[derive(Clone, Debug, PartialEq)]
pub struct DualVector(pub Vec<f64>);

impl DualVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `sqrt(rᵀ K⁻¹ r)` with `K` the stiffness matrix of `grid`.
    pub fn dual_norm(&self, grid: &Grid) -> Result<f64> {
        stiffness_space(grid)?.dual_norm(&self.0)
    }

    /// `⟨r, u⟩` for a Dirichlet grid function `u`.
    pub fn pair(&self, u: &GridFunction) -> f64 {
        self.0.iter().zip(u.interior()).map(|(a, b)| a * b).sum()
    }
}

/// The discrete `H¹₀` inner product on interior values.
pub fn stiffness_space(grid: &Grid) -> Result<VecSpace> {
    if grid.n_cells() < 2 {
        return Err(Error::invalid("need at least two cells for an interior node"));
    }
    VecSpace::tridiagonal(stiffness(grid.n_cells()))
}

/// Per-cell data shared by assembly and the tangent.
struct Cell {
    slope: f64,
    /// Cell average of `φ(t, v(t), |s|^{p-1})`.
    phi_bar: f64,
}

fn cell_phi_bar(spec: &PLaplaceSpec, v: &GridFunction, k: usize, slope: f64) -> Result<f64> {
    let grid = v.grid();
    let h = grid.h();
    let r = slope.abs().powf(spec.p - 1.0);
    let mut acc = 0.0;
    for &(x, w) in spec.quadrature.reference() {
        let t = grid.node(k) + x * h;
        acc += w * spec
            .eval_phi(t, v.eval_in_cell(k, x), r)
            .map_err(|e| in_cell(e, k))?;
    }
    Ok(acc)
}

fn in_cell(e: Error, k: usize) -> Error {
    match e {
        Error::Eval { context, source } => Error::Eval {
            context: format!("cell {k}: {context}"),
            source,
        },
        other => other,
    }
}

fn check_pair(u: &GridFunction, v: &GridFunction) -> Result<()> {
    if u.grid() != v.grid() {
        return Err(Error::invalid("u and v live on different grids"));
    }
    if !u.is_dirichlet() {
        return Err(Error::invalid("u must vanish at both endpoints"));
    }
    Ok(())
}

fn cells(spec: &PLaplaceSpec, u: &GridFunction, v: &GridFunction) -> Result<Vec<Cell>> {
    (0..u.grid().n_cells())
        .map(|k| {
            let slope = u.slope(k);
            Ok(Cell {
                slope,
                phi_bar: cell_phi_bar(spec, v, k, slope)?,
            })
        })
        .collect()
}

/// Residual `F(u, v)` as a [`DualVector`] of length `n_cells − 1`.
pub fn assemble_f(u: &GridFunction, v: &GridFunction, spec: &PLaplaceSpec) -> Result<DualVector> {
    spec.validate()?;
    check_pair(u, v)?;
    let grid = u.grid();
    let n = grid.n_cells();
    let h = grid.h();
    let mut out = vec![0.0; n + 1];
    for (k, c) in cells(spec, u, v)?.iter().enumerate() {
        let flux = c.phi_bar * psi_p(c.slope, spec.p);
        // ∫_cell flux · w' with w' = ±1/h over a cell of length h
        out[k] -= flux;
        out[k + 1] += flux;
        for &(x, w) in spec.quadrature.reference() {
            let t = grid.node(k) + x * h;
            let fv = spec
                .eval_f(t, u.eval_in_cell(k, x), v.eval_in_cell(k, x))
                .map_err(|e| in_cell(e, k))?;
            out[k] -= w * h * fv * (1.0 - x);
            out[k + 1] -= w * h * fv * x;
        }
    }
    out.pop();
    out.remove(0);
    Ok(DualVector(out))
}

/// How the Poincaré constant enters the coercivity minorant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinorantScaling {
    /// `γ = m(y) xᵖ − λ_p^{-1/p} δ(y) x`, from `∫|u| ≤ ‖u‖_{Lᵖ} ≤ λ_p^{-1/p} ‖u‖_p`.
    #[default]
    PoincareRoot,
    /// `γ = m(y) xᵖ − δ(y) x / λ_p`.
    Reciprocal,
}

impl MinorantScaling {
    pub fn factor(self, lambda_p: f64, p: f64) -> f64 {
        match self {
            MinorantScaling::PoincareRoot => lambda_p.powf(-1.0 / p),
            MinorantScaling::Reciprocal => 1.0 / lambda_p,
        }
    }
}

/// Coercivity minorant `γ(x, y) = m(y) xᵖ − κ δ(y) x`.
pub fn gamma_eval(x: f64, y: f64, spec: &PLaplaceSpec, lambda_p: f64, scaling: MinorantScaling) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let kappa = scaling.factor(lambda_p, spec.p);
    Ok(spec.eval_m(y)? * x.powf(spec.p) - kappa * spec.eval_delta(y)? * x)
}

/// [`ParamOperator`] view of `F` on the interior nodal values of `u` and the
/// full nodal values of `v`.
pub struct PLaplaceOperator<'a> {
    spec: &'a PLaplaceSpec,
    grid: Grid,
}

impl<'a> PLaplaceOperator<'a> {
    pub fn new(spec: &'a PLaplaceSpec, grid: Grid) -> Result<Self> {
        spec.validate()?;
        if grid.n_cells() < 2 {
            return Err(Error::invalid("need at least two cells for an interior node"));
        }
        Ok(PLaplaceOperator { spec, grid })
    }

    fn functions(&self, u: &[f64], v: &[f64]) -> Result<(GridFunction, GridFunction)> {
        Ok((
            GridFunction::from_interior(self.grid, u)?,
            GridFunction::new(self.grid, v.to_vec())?,
        ))
    }

    /// Tridiagonal approximation of `F'(u) + εK`: exact flux derivative
    /// (smoothed where `u'` vanishes and `p > 2`) plus the positive part of
    /// `−∂f/∂u` against the mass pairing.
    fn tangent(&self, u: &GridFunction, v: &GridFunction, eps: f64) -> Result<SymTridiag> {
        let spec = self.spec;
        let grid = &self.grid;
        let n = grid.n_cells();
        let h = grid.h();
        let p = spec.p;
        let cs = cells(spec, u, v)?;
        let smax = cs.iter().fold(0.0f64, |m, c| m.max(c.slope.abs()));
        let sigma2 = (1e-2 * smax).powi(2) + 1e-16;
        let analytic = spec.phi_independent_of_r();

        let mut jac = Vec::with_capacity(n);
        for (k, c) in cs.iter().enumerate() {
            let smooth = c.phi_bar * (p - 1.0) * (c.slope * c.slope + sigma2).powf((p - 2.0) / 2.0);
            let j = if analytic {
                smooth
            } else {
                let d = 1e-7 * (1.0 + c.slope.abs());
                let flux = |s: f64| -> Result<f64> { Ok(cell_phi_bar(spec, v, k, s)? * psi_p(s, p)) };
                let fd = (flux(c.slope + d)? - flux(c.slope - d)?) / (2.0 * d);
                fd.max(smooth.min(c.phi_bar.abs() * (p - 1.0) * sigma2.powf((p - 2.0) / 2.0)))
            };
            jac.push(j.max(0.0) / h);
        }

        let mut diag = vec![0.0; n + 1];
        let mut off = vec![0.0; n];
        for k in 0..n {
            diag[k] += jac[k];
            diag[k + 1] += jac[k];
            off[k] -= jac[k];
            for &(x, w) in spec.quadrature.reference() {
                let t = grid.node(k) + x * h;
                let (uq, vq) = (u.eval_in_cell(k, x), v.eval_in_cell(k, x));
                let du = 1e-6 * (1.0 + uq.abs());
                let fu = (spec.eval_f(t, uq + du, vq)? - spec.eval_f(t, uq - du, vq)?) / (2.0 * du);
                let g = (-fu).max(0.0) * w * h;
                diag[k] += g * (1.0 - x) * (1.0 - x);
                diag[k + 1] += g * x * x;
                off[k] += g * x * (1.0 - x);
            }
        }
        let floor = eps.max(1e-14);
        let k_diag = 2.0 / h;
        let k_off = -1.0 / h;
        let diag: Vec<f64> = diag[1..n].iter().map(|d| d + floor * k_diag).collect();
        let off: Vec<f64> = off[1..n - 1].iter().map(|o| o + floor * k_off).collect();
        SymTridiag::new(diag, off)
    }
}

impl ParamOperator for PLaplaceOperator<'_> {
    fn eval(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let (u, v) = self.functions(u, v)?;
        Ok(assemble_f(&u, &v, self.spec)?.0)
    }

    fn strong_modulus(&self) -> Option<f64> {
        self.spec.strong_modulus()
    }

    fn tangent_solve(&self, u: &[f64], v: &[f64], eps: f64, r: &[f64]) -> Option<Result<Vec<f64>>> {
        Some((|| {
            let (u, v) = self.functions(u, v)?;
            self.tangent(&u, &v, eps)?.solve(r)
        })())
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// `S_ε(v)`: the solution of `F(u, v) + εKu = 0`.
pub fn solve_u(v: &GridFunction, eps: f64, tol: f64, spec: &PLaplaceSpec) -> Result<GridFunction> {
    Ok(solve_u_with(v, eps, spec, None, &InnerOptions { tol, ..InnerOptions::default() })?.0)
}

pub fn solve_u_with(
    v: &GridFunction,
    eps: f64,
    spec: &PLaplaceSpec,
    start: Option<&GridFunction>,
    opts: &InnerOptions,
) -> Result<(GridFunction, InnerSolution)> {
    let grid = *v.grid();
    let op = PLaplaceOperator::new(spec, grid)?;
    let space = stiffness_space(&grid)?;
    let sol = solve_regularized(
        &op,
        space.duality_map(),
        v.values(),
        eps,
        start.map(|s| s.interior()),
        opts,
    )?;
    Ok((GridFunction::from_interior(grid, &sol.u)?, sol))
}

/// `γ(‖u‖_p, ‖v‖_∞)` for grid functions.
pub fn gamma_at(u: &GridFunction, v: &GridFunction, spec: &PLaplaceSpec, lambda_p: f64, scaling: MinorantScaling) -> Result<f64> {
    gamma_eval(p_norm(u, spec.p)?, crate::grid::sup_norm(v), spec, lambda_p, scaling)
}

#[cfg(test)]
mod tests;
