use serde::{Deserialize, Serialize};

use super::{Grid, GridFunction, Quadrature};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var};

/// Sub-cells used to integrate an absolutely continuous density when no grid
/// is at hand (total variation, endpoint values).
const DENSITY_CELLS: usize = 4096;

const MERGE_TOL: f64 = 1e-15;

/// A function of bounded variation on `[0, 1]`, used as a Stieltjes integrator.
///
/// The piecewise part is constant `left_values[0]` before the first breakpoint,
/// linear from `right_values[i]` to `left_values[i + 1]` between breakpoints and
/// constant `right_values[last]` after the last one. A breakpoint at `0`
/// carries `A(0) = left_values[0]`, one at `1` carries
/// `A(1) = right_values[last]`, so jumps at the endpoints are charged to the
/// integral. An optional `density` in `t` adds the absolutely continuous part
/// `∫_0^t density`, which lets smooth integrators such as `t²` be represented
/// exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BVRaw", into = "BVRaw")]
pub struct BVFunction {
    breakpoints: Vec<f64>,
    left_values: Vec<f64>,
    right_values: Vec<f64>,
    density: Option<Expr>,
    density_total: f64,
    density_variation: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BVRaw {
    breakpoints: Vec<f64>,
    left_values: Vec<f64>,
    right_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    density: Option<Expr>,
}

impl TryFrom<BVRaw> for BVFunction {
    type Error = Error;

    fn try_from(raw: BVRaw) -> Result<Self> {
        let bv = BVFunction::new(raw.breakpoints, raw.left_values, raw.right_values)?;
        match raw.density {
            Some(d) => bv.with_density(d),
            None => Ok(bv),
        }
    }
}

impl From<BVFunction> for BVRaw {
    fn from(bv: BVFunction) -> Self {
        BVRaw {
            breakpoints: bv.breakpoints,
            left_values: bv.left_values,
            right_values: bv.right_values,
            density: bv.density,
        }
    }
}

impl BVFunction {
    /// Builds the canonical form: breakpoints sorted, coincident breakpoints
    /// merged, jumps below 1e-15 dropped.
    pub fn new(breakpoints: Vec<f64>, left_values: Vec<f64>, right_values: Vec<f64>) -> Result<Self> {
        let n = breakpoints.len();
        if n == 0 {
            return Err(Error::invalid("a BV function needs at least one breakpoint"));
        }
        if left_values.len() != n || right_values.len() != n {
            return Err(Error::invalid(format!(
                "{n} breakpoints but {} left and {} right values",
                left_values.len(),
                right_values.len()
            )));
        }
        if let Some(b) = breakpoints.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::invalid(format!("breakpoint {b} lies outside [0, 1]")));
        }
        if left_values.iter().chain(&right_values).any(|x| !x.is_finite()) {
            return Err(Error::invalid("BV values must be finite"));
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| breakpoints[i].total_cmp(&breakpoints[j]));

        let mut b: Vec<f64> = Vec::with_capacity(n);
        let mut l: Vec<f64> = Vec::with_capacity(n);
        let mut r: Vec<f64> = Vec::with_capacity(n);
        for i in order {
            match b.last() {
                Some(&last) if (breakpoints[i] - last).abs() <= MERGE_TOL => {
                    *r.last_mut().unwrap() = right_values[i];
                }
                _ => {
                    b.push(breakpoints[i]);
                    l.push(left_values[i]);
                    r.push(right_values[i]);
                }
            }
        }
        for (li, ri) in l.iter().zip(r.iter_mut()) {
            if (*ri - li).abs() < MERGE_TOL {
                *ri = *li;
            }
        }
        Ok(BVFunction {
            breakpoints: b,
            left_values: l,
            right_values: r,
            density: None,
            density_total: 0.0,
            density_variation: 0.0,
        })
    }

    /// `A(t) = a + s·t`.
    pub fn linear(a: f64, s: f64) -> Self {
        BVFunction::new(vec![0.0, 1.0], vec![a, a + s], vec![a, a + s]).expect("valid linear BV")
    }

    /// Jump of `height` at `at`, zero before.
    pub fn step(at: f64, height: f64) -> Result<Self> {
        BVFunction::new(vec![at], vec![0.0], vec![height])
    }

    /// Adds an absolutely continuous part with the given density in `t`.
    pub fn with_density(mut self, density: Expr) -> Result<Self> {
        if let Some(var) = density.variables().into_iter().find(|v| *v != Var::T) {
            return Err(Error::Config(format!(
                "BV density may only use `t`, found `{}`",
                var.name()
            )));
        }
        let grid = Grid::new(DENSITY_CELLS)?;
        let rule = Quadrature::Gauss2;
        let h = grid.h();
        let (mut total, mut var) = (0.0, 0.0);
        for k in 0..grid.n_cells() {
            for &(x, w) in rule.reference() {
                let t = grid.node(k) + x * h;
                let d = eval_density(&density, t)?;
                total += w * h * d;
                var += w * h * d.abs();
            }
        }
        self.density = Some(density);
        self.density_total = total;
        self.density_variation = var;
        Ok(self)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn left_values(&self) -> &[f64] {
        &self.left_values
    }

    pub fn right_values(&self) -> &[f64] {
        &self.right_values
    }

    pub fn density(&self) -> Option<&Expr> {
        self.density.as_ref()
    }

    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints
            .iter()
            .zip(self.left_values.iter().zip(&self.right_values))
            .map(|(&b, (l, r))| (b, r - l))
    }

    /// `(start, end, increment)` of each linear segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.breakpoints.len() - 1).map(move |i| {
            (
                self.breakpoints[i],
                self.breakpoints[i + 1],
                self.left_values[i + 1] - self.right_values[i],
            )
        })
    }

    pub fn start_value(&self) -> f64 {
        self.left_values[0]
    }

    pub fn end_value(&self) -> f64 {
        self.right_values[self.right_values.len() - 1] + self.density_total
    }

    /// `Σ|jump| + Σ|segment increment| + ∫|density|`.
    pub fn total_variation(&self) -> f64 {
        self.jumps().map(|(_, j)| j.abs()).sum::<f64>()
            + self.segments().map(|(_, _, d)| d.abs()).sum::<f64>()
            + self.density_variation
    }

    /// Pure-jump part, starting from zero.
    pub fn jump_part(&self) -> Self {
        let mut level = 0.0;
        let mut l = Vec::with_capacity(self.breakpoints.len());
        let mut r = Vec::with_capacity(self.breakpoints.len());
        for (_, j) in self.jumps() {
            l.push(level);
            level += j;
            r.push(level);
        }
        BVFunction::new(self.breakpoints.clone(), l, r).expect("jump part stays valid")
    }

    /// Continuous part (segments and density), starting from zero.
    pub fn continuous_part(&self) -> Self {
        let mut level = 0.0;
        let mut l = vec![0.0];
        for (_, _, d) in self.segments() {
            level += d;
            l.push(level);
        }
        let mut c = BVFunction::new(self.breakpoints.clone(), l.clone(), l).expect("continuous part stays valid");
        c.density = self.density.clone();
        c.density_total = self.density_total;
        c.density_variation = self.density_variation;
        c
    }

    /// `∫_0^1 f dA`: segment slopes and the density integrated with `rule` on
    /// the cells of `grid` (segments are further split at breakpoints), plus
    /// `f(b)·jump` for every breakpoint.
    pub fn stieltjes<F>(&self, grid: &Grid, rule: Quadrature, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut total = 0.0;
        for (b, jump) in self.jumps() {
            if jump != 0.0 {
                total += f(b)? * jump;
            }
        }
        for (a, b, inc) in self.segments() {
            if inc == 0.0 || b <= a {
                continue;
            }
            let slope = inc / (b - a);
            let mut lo = a;
            let mut k = grid.cell_of(a);
            while lo < b {
                let hi = grid.node(k + 1).min(b);
                if hi > lo {
                    let len = hi - lo;
                    for &(x, w) in rule.reference() {
                        total += w * len * slope * f(lo + x * len)?;
                    }
                }
                lo = hi;
                k += 1;
                if k >= grid.n_cells() {
                    break;
                }
            }
        }
        if let Some(density) = &self.density {
            let h = grid.h();
            for k in 0..grid.n_cells() {
                for &(x, w) in rule.reference() {
                    let t = grid.node(k) + x * h;
                    total += w * h * eval_density(density, t)? * f(t)?;
                }
            }
        }
        Ok(total)
    }
}

fn eval_density(density: &Expr, t: f64) -> Result<f64> {
    density
        .eval(&Env::new().with(Var::T, t))
        .map_err(|e| Error::eval(format!("BV density at t = {t}"), e))
}

/// `∫_0^1 f dA` for a nodal function `f`, 2-point Gauss on `f`'s grid.
pub fn stieltjes_integral(f: &GridFunction, a: &BVFunction) -> Result<f64> {
    a.stieltjes(f.grid(), Quadrature::Gauss2, |t| Ok(f.eval(t)))
}

pub fn total_variation(a: &BVFunction) -> f64 {
    a.total_variation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use proptest::prelude::*;

    fn square() -> BVFunction {
        BVFunction::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0])
            .unwrap()
            .with_density(parse("2*t").unwrap())
            .unwrap()
    }

    #[test]
    fn stieltjes_examples() {
        let g = Grid::new(128).unwrap();
        let one = GridFunction::from_fn(g, |_| 1.0);
        let id = GridFunction::from_fn(g, |t| t);
        assert!((stieltjes_integral(&one, &BVFunction::linear(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-14);

        let step = BVFunction::step(0.5, 1.0).unwrap();
        let f = GridFunction::from_fn(g, |t| (7.0 * t).cos() + t);
        let got = stieltjes_integral(&f, &step).unwrap();
        assert!((got - f.eval(0.5)).abs() < 1e-15);

        let got = stieltjes_integral(&id, &square()).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-8, "{got}");
    }

    #[test]
    fn rejects_breakpoints_outside_unit_interval() {
        assert!(BVFunction::new(vec![1.5], vec![0.0], vec![1.0]).is_err());
        assert!(BVFunction::new(vec![-0.1, 0.5], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(BVFunction::new(vec![], vec![], vec![]).is_err());
        assert!(BVFunction::new(vec![0.5], vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn total_variation_examples() {
        assert!((BVFunction::linear(0.0, 1.0).total_variation() - 1.0).abs() < 1e-15);
        let bump = BVFunction::new(vec![1.0 / 3.0, 2.0 / 3.0], vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!((bump.total_variation() - 2.0).abs() < 1e-15);
        assert!((square().total_variation() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_form() {
        let a = BVFunction::new(vec![0.7, 0.2, 0.2], vec![1.0, 0.0, 0.5], vec![2.0, 0.5, 1.0]).unwrap();
        assert_eq!(a.breakpoints(), &[0.2, 0.7]);
        assert_eq!(a.left_values(), &[0.0, 1.0]);
        assert_eq!(a.right_values(), &[1.0, 2.0]);
        let tiny = BVFunction::new(vec![0.5], vec![1.0], vec![1.0 + 1e-16]).unwrap();
        assert_eq!(tiny.jumps().next().unwrap().1, 0.0);
    }

    #[test]
    fn endpoint_jumps_are_charged() {
        let g = Grid::new(4).unwrap();
        let f = GridFunction::from_fn(g, |t| 1.0 + t);
        let at0 = BVFunction::step(0.0, 2.0).unwrap();
        let at1 = BVFunction::step(1.0, 3.0).unwrap();
        assert_eq!(stieltjes_integral(&f, &at0).unwrap(), 2.0);
        assert_eq!(stieltjes_integral(&f, &at1).unwrap(), 6.0);
    }

    #[test]
    fn json_round_trip() {
        let a = square();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"breakpoints":[0.0,1.0],"left_values":[0.0,0.0],"right_values":[0.0,0.0],"density":"(2.0 * t)"}"#);
        let back: BVFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        let bad = r#"{"breakpoints":[2.0],"left_values":[0.0],"right_values":[1.0]}"#;
        assert!(serde_json::from_str::<BVFunction>(bad).is_err());
        let bad_density = r#"{"breakpoints":[0.0],"left_values":[0.0],"right_values":[0.0],"density":"v"}"#;
        assert!(serde_json::from_str::<BVFunction>(bad_density).is_err());
    }

    fn arb_bv() -> impl Strategy<Value = BVFunction> {
        prop::collection::vec((0.0f64..=1.0, -3.0f64..3.0, -3.0f64..3.0), 1..6)
            .prop_map(|pts| {
                let (b, (l, r)): (Vec<f64>, (Vec<f64>, Vec<f64>)) =
                    pts.into_iter().map(|(b, l, r)| (b, (l, r))).unzip();
                BVFunction::new(b, l, r).unwrap()
            })
    }

    fn arb_monotone_bv() -> impl Strategy<Value = BVFunction> {
        prop::collection::vec((0.0f64..=1.0, 0.0f64..2.0, 0.0f64..2.0), 1..6).prop_map(|mut pts| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut level = 0.0;
            let (mut b, mut l, mut r) = (vec![], vec![], vec![]);
            for (x, seg, jump) in pts {
                level += seg;
                b.push(x);
                l.push(level);
                level += jump;
                r.push(level);
            }
            BVFunction::new(b, l, r).unwrap()
        })
    }

    proptest! {
        #[test]
        fn stieltjes_is_linear_in_f(a in arb_bv(), c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
            let g = Grid::new(32).unwrap();
            let f1 = GridFunction::from_fn(g, |t| (3.0 * t).sin());
            let f2 = GridFunction::from_fn(g, |t| t * t - 0.3);
            let comb = GridFunction::from_fn(g, |t| c1 * f1.eval(t) + c2 * f2.eval(t));
            let lhs = stieltjes_integral(&comb, &a).unwrap();
            let rhs = c1 * stieltjes_integral(&f1, &a).unwrap() + c2 * stieltjes_integral(&f2, &a).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn stieltjes_is_additive_over_jump_and_continuous_parts(a in arb_bv()) {
            let g = Grid::new(32).unwrap();
            let f = GridFunction::from_fn(g, |t| (5.0 * t).cos());
            let whole = stieltjes_integral(&f, &a).unwrap();
            let split = stieltjes_integral(&f, &a.jump_part()).unwrap()
                + stieltjes_integral(&f, &a.continuous_part()).unwrap();
            prop_assert!((whole - split).abs() <= 1e-12 * (1.0 + whole.abs()));
        }

        #[test]
        fn monotone_variation_is_the_increment(a in arb_monotone_bv()) {
            let tv = total_variation(&a);
            prop_assert!((tv - (a.end_value() - a.start_value()).abs()).abs() <= 1e-12 * (1.0 + tv));
        }
    }
}
