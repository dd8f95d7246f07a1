//! Uniform P1 discretization of `[0, 1]`.
//!
//! Grid functions are continuous and piecewise linear, so slopes are constant
//! per cell and `‖u‖_p = (∫|u'|^p)^{1/p}` is computed exactly.

mod bv;
mod poincare;

pub use bv::{stieltjes_integral, total_variation, BVFunction};
pub use poincare::{
    discrete_laplacian_eigenpair, poincare_constant, poincare_constant_with, PoincareOptions,
    PoincareResult,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_cells: usize,
}

/// Uniform partition of `[0, 1]` into `n_cells` cells.
pub fn make_grid(n_cells: usize) -> Result<Grid> {
    Grid::new(n_cells)
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::invalid("a grid needs at least one cell"));
        }
        Ok(Grid { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n_cells as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|i| self.node(i)).collect()
    }

    /// Index of the cell containing `t`, clamped to `[0, n_cells - 1]`.
    pub fn cell_of(&self, t: f64) -> usize {
        let k = (t * self.n_cells as f64).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.n_cells - 1)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    Midpoint,
    #[default]
    Gauss2,
}

const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_13, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];
const MIDPOINT: [(f64, f64); 1] = [(0.5, 1.0)];

impl Quadrature {
    /// `(abscissa, weight)` pairs on the reference cell `[0, 1]`; weights sum
    /// to one.
    pub fn reference(self) -> &'static [(f64, f64)] {
        match self {
            Quadrature::Midpoint => &MIDPOINT,
            Quadrature::Gauss2 => &GAUSS2,
        }
    }

    /// Polynomial degree integrated exactly on each cell.
    pub fn degree(self) -> usize {
        match self {
            Quadrature::Midpoint => 1,
            Quadrature::Gauss2 => 3,
        }
    }

    /// `∫_a^b f` with the rule applied once on `[a, b]`.
    pub fn integrate(self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = b - a;
        self.reference()
            .iter()
            .map(|&(x, w)| w * f(a + x * len))
            .sum::<f64>()
            * len
    }

    /// Composite rule over the cells of `grid`.
    pub fn integrate_grid(self, grid: &Grid, f: impl Fn(f64) -> f64) -> f64 {
        (0..grid.n_cells())
            .map(|k| self.integrate(grid.node(k), grid.node(k + 1), &f))
            .sum()
    }
}

/// Nodal values of a continuous piecewise-linear function on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::invalid(format!(
                "grid function needs {} nodal values, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.n_nodes()],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            grid,
            values: grid.nodes().into_iter().map(f).collect(),
        }
    }

    /// Dirichlet function from its interior values.
    pub fn from_interior(grid: Grid, interior: &[f64]) -> Result<Self> {
        if interior.len() != grid.n_interior() {
            return Err(Error::invalid(format!(
                "expected {} interior values, got {}",
                grid.n_interior(),
                interior.len()
            )));
        }
        let mut values = Vec::with_capacity(grid.n_nodes());
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        Ok(GridFunction { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    /// Linear interpolation; `t` outside `[0, 1]` is clamped.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.grid.cell_of(t);
        let h = self.grid.h();
        let x = ((t - self.grid.node(k)) / h).clamp(0.0, 1.0);
        self.values[k] * (1.0 - x) + self.values[k + 1] * x
    }

    /// Value at local coordinate `x ∈ [0, 1]` of cell `k`.
    pub fn eval_in_cell(&self, k: usize, x: f64) -> f64 {
        self.values[k] * (1.0 - x) + self.values[k + 1] * x
    }

    /// Constant derivative on cell `k`.
    pub fn slope(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) * self.grid.n_cells() as f64
    }

    pub fn slopes(&self) -> Vec<f64> {
        (0..self.grid.n_cells()).map(|k| self.slope(k)).collect()
    }

    pub fn is_dirichlet(&self) -> bool {
        self.values[0] == 0.0 && self.values[self.values.len() - 1] == 0.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|x| c * x).collect(),
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("norm exponent must be finite and ≥ 1, got {p}")));
    }
    Ok(())
}

/// `(∫|u'|^p)^{1/p}`, exact for P1 functions.
pub fn p_norm(u: &GridFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let h = u.grid.h();
    let sum: f64 = (0..u.grid.n_cells()).map(|k| u.slope(k).abs().powf(p)).sum();
    Ok((h * sum).powf(1.0 / p))
}

pub fn sup_norm(u: &GridFunction) -> f64 {
    u.values.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `(∫|u|^p)^{1/p}` by the composite Gauss rule.
pub fn lp_norm(u: &GridFunction, p: f64) -> Result<f64> {
    lp_norm_with(u, p, Quadrature::Gauss2)
}

pub fn lp_norm_with(u: &GridFunction, p: f64, rule: Quadrature) -> Result<f64> {
    check_exponent(p)?;
    let h = u.grid.h();
    let mut sum = 0.0;
    for k in 0..u.grid.n_cells() {
        for &(x, w) in rule.reference() {
            sum += w * h * u.eval_in_cell(k, x).abs().powf(p);
        }
    }
    Ok(sum.powf(1.0 / p))
}

/// Cumulative integral `t ↦ ∫_0^t f`, sampled at the nodes.
pub fn volterra(grid: &Grid, rule: Quadrature, f: impl Fn(f64) -> f64) -> GridFunction {
    let mut values = Vec::with_capacity(grid.n_nodes());
    let mut acc = 0.0;
    values.push(0.0);
    for k in 0..grid.n_cells() {
        acc += rule.integrate(grid.node(k), grid.node(k + 1), &f);
        values.push(acc);
    }
    GridFunction {
        grid: *grid,
        values,
    }
}

/// `‖u‖_∞ ≤ ‖u‖_p` up to 1e-12, for a function vanishing at both ends.
pub fn sobolev_check(u: &GridFunction, p: f64) -> Result<bool> {
    Ok(sup_norm(u) <= p_norm(u, p)? + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn hat(n: usize) -> GridFunction {
        let g = Grid::new(n).unwrap();
        GridFunction::from_fn(g, |t| 1.0 - (2.0 * t - 1.0).abs())
    }

    #[test]
    fn grids() {
        assert_eq!(make_grid(1).unwrap().nodes(), vec![0.0, 1.0]);
        assert_eq!(
            make_grid(4).unwrap().nodes(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(make_grid(0).is_err());
        let g = make_grid(1000).unwrap();
        let nodes = g.nodes();
        assert_eq!(*nodes.last().unwrap(), 1.0);
        for w in nodes.windows(2) {
            assert!((w[1] - w[0] - g.h()).abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_exactness() {
        for rule in [Quadrature::Midpoint, Quadrature::Gauss2] {
            let total: f64 = rule.reference().iter().map(|r| r.1).sum();
            assert!((total - 1.0).abs() < 1e-15);
            for d in 0..=rule.degree() {
                let got = rule.integrate(0.2, 0.7, |t| t.powi(d as i32));
                let want = (0.7f64.powi(d as i32 + 1) - 0.2f64.powi(d as i32 + 1)) / (d as f64 + 1.0);
                assert!((got - want).abs() < 1e-15, "{rule:?} degree {d}");
            }
        }
    }

    #[test]
    fn norm_examples() {
        let g = Grid::new(16).unwrap();
        let id = GridFunction::from_fn(g, |t| t);
        assert!((p_norm(&id, 2.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(p_norm(&GridFunction::zeros(g), 3.0).unwrap(), 0.0);
        // peak 1 at the midpoint means slopes ±2; half the height gives slopes ±1
        for p in [1.0, 2.0, 3.5] {
            assert!((p_norm(&hat(2), p).unwrap() - 2.0).abs() < 1e-14);
            assert!((p_norm(&hat(2).scaled(0.5), p).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(p_norm(&id, 0.5).is_err());

        assert_eq!(sup_norm(&GridFunction::zeros(g)), 0.0);
        assert_eq!(sup_norm(&hat(2)), 1.0);
        let s = GridFunction::from_fn(Grid::new(4).unwrap(), |t| (PI * t).sin());
        assert_eq!(sup_norm(&s), 1.0);

        let one = GridFunction::from_fn(g, |_| 1.0);
        assert!((lp_norm(&one, 3.0).unwrap() - 1.0).abs() < 1e-14);
        let id64 = GridFunction::from_fn(Grid::new(64).unwrap(), |t| t);
        assert!((lp_norm(&id64, 2.0).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-10);
        assert_eq!(lp_norm(&GridFunction::zeros(g), 2.0).unwrap(), 0.0);
        assert!(lp_norm(&one, 0.9).is_err());
    }

    #[test]
    fn volterra_examples() {
        let g = Grid::new(128).unwrap();
        let v = volterra(&g, Quadrature::Gauss2, |_| 1.0);
        for (i, x) in v.values().iter().enumerate() {
            assert!((x - g.node(i)).abs() < 1e-14);
        }
        let z = volterra(&g, Quadrature::Gauss2, |_| 0.0);
        assert_eq!(sup_norm(&z), 0.0);
        let half_sq = volterra(&g, Quadrature::Gauss2, |t| t);
        for (i, x) in half_sq.values().iter().enumerate() {
            let t = g.node(i);
            assert!((x - t * t / 2.0).abs() < 1e-8);
        }
        // endpoint equals the composite rule
        let f = |t: f64| (3.0 * t).cos() + t * t;
        let end = volterra(&g, Quadrature::Gauss2, f).values()[g.n_cells()];
        assert!((end - Quadrature::Gauss2.integrate_grid(&g, f)).abs() < 1e-14);
    }

    #[test]
    fn sobolev_examples() {
        assert!(sobolev_check(&hat(2), 2.0).unwrap());
        assert!(sobolev_check(&GridFunction::zeros(Grid::new(8).unwrap()), 2.0).unwrap());
    }

    #[test]
    fn sobolev_holds_on_random_dirichlet_functions() {
        let g = Grid::new(50).unwrap();
        for i in 0..1000 {
            let mut rng = crate::par::sample_rng(11, i);
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            let interior: Vec<f64> = (0..g.n_interior())
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect();
            let u = GridFunction::from_interior(g, &interior).unwrap();
            for p in [2.0, 3.0] {
                assert!(sobolev_check(&u, p).unwrap(), "sample {i}, p = {p}");
            }
        }
    }

    proptest! {
        #[test]
        fn p_norm_is_homogeneous(vals in prop::collection::vec(-10.0f64..10.0, 7), c in -5.0f64..5.0, p in 1.0f64..6.0) {
            let g = Grid::new(8).unwrap();
            let u = GridFunction::from_interior(g, &vals).unwrap();
            let lhs = p_norm(&u.scaled(c), p).unwrap();
            let rhs = c.abs() * p_norm(&u, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }
}
