use serde::Serialize;

use super::ProblemSpec;
use crate::error::{Error, Result};

/// `ψ(x, y) = a y + b x^{rx} + c y^{ry} + d`, a bound on `‖T(u, v)‖_∞` for
/// `‖u‖_p ≤ x` (hence `‖u‖_∞ ≤ x`) and `‖v‖_∞ ≤ y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsiCoefficients {
    pub a: f64,
    pub b: f64,
    pub x_exponent: f64,
    pub c: f64,
    pub y_exponent: f64,
    pub d: f64,
}

impl PsiCoefficients {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let g = &spec.nonlocal.g;
        let h = &spec.nonlocal.h;
        let [v0, v1] = h.variations();
        let k = 1.0 / (g.q - 1.0);
        // (x + y + z)^k ≤ 3^{k−1}(x^k + y^k + z^k) once k > 1
        let split = if k <= 1.0 { 1.0 } else { 3f64.powf(k - 1.0) };
        PsiCoefficients {
            a: h.alpha[1] * v1 + 2.0 * h.alpha[0] * v0,
            b: split * (2.0 * g.a).powf(k),
            x_exponent: g.r * k,
            c: split * (2.0 * g.b).powf(k),
            y_exponent: g.theta * k,
            d: h.beta[1] * v1 + h.beta[0] * v0 + split * (2.0 * g.c).powf(k),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a * y + self.b * x.powf(self.x_exponent) + self.c * y.powf(self.y_exponent) + self.d
    }
}

/// Invariant ball radius with the data that certified it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusReport {
    pub radius: f64,
    pub psi: PsiCoefficients,
    /// `κ` in `x_max(y) = (κ δ(y)/m(y))^{1/(p−1)}`.
    pub kappa: f64,
    pub lambda_p: f64,
    /// `sup_{y ≤ R} ψ(x_max(y), y)` over the final scan.
    pub phi_at_radius: f64,
    pub argmax_y: f64,
}

const SCAN_POINTS: usize = 1000;

struct Scan<'a> {
    spec: &'a ProblemSpec,
    psi: PsiCoefficients,
    kappa: f64,
}

impl Scan<'_> {
    /// Largest `x` with `γ(x, y) ≤ 0`.
    fn x_max(&self, y: f64) -> Result<f64> {
        let p = self.spec.p();
        let d = self.spec.plaplace.eval_delta(y)?;
        let m = self.spec.plaplace.eval_m(y)?;
        if !(m > 0.0) {
            return Err(Error::Assumption(format!("m({y}) = {m} is not positive")));
        }
        Ok((self.kappa * d.max(0.0) / m).powf(1.0 / (p - 1.0)))
    }

    fn value(&self, y: f64) -> Result<f64> {
        Ok(self.psi.eval(self.x_max(y)?, y))
    }

    /// `sup_{y ∈ [0, r]}` by a uniform scan refined 10× around the argmax.
    fn sup(&self, r: f64) -> Result<(f64, f64)> {
        let step = r / SCAN_POINTS as f64;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=SCAN_POINTS {
            let y = i as f64 * step;
            let v = self.value(y)?;
            if v > best.0 {
                best = (v, y);
            }
        }
        let centre = best.1;
        for j in 0..=20 {
            let y = (centre - step + j as f64 * step / 10.0).clamp(0.0, r);
            let v = self.value(y)?;
            if v > best.0 {
                best = (v, y);
            }
        }
        Ok(best)
    }
}

/// Least `R ≤ y_max_scan` with `sup_{y ≤ R} ψ(x_max(y), y) ≤ R`: a scan of
/// 1000 candidate radii followed by bisection to relative `tol`. `None` when
/// no candidate qualifies.
pub fn radius_r(spec: &ProblemSpec, lambda_p: f64, y_max_scan: f64, tol: f64) -> Result<Option<RadiusReport>> {
    let psi = PsiCoefficients::from_spec(spec);
    if psi.a >= 1.0 {
        return Err(Error::Assumption(format!(
            "ψ has y-coefficient a = {} ≥ 1; no invariant ball",
            psi.a
        )));
    }
    if !(y_max_scan > 0.0) {
        return Err(Error::invalid("radius scan bound must be positive"));
    }
    let kappa = spec.scaling.factor(lambda_p, spec.p());
    let scan = Scan { spec, psi, kappa };
    let holds = |r: f64| -> Result<Option<(f64, f64)>> {
        let (phi, y) = scan.sup(r)?;
        Ok((phi <= r).then_some((phi, y)))
    };
    if let Some((phi, y)) = holds(0.0)? {
        return Ok(Some(RadiusReport {
            radius: 0.0,
            psi: scan.psi,
            kappa,
            lambda_p,
            phi_at_radius: phi,
            argmax_y: y,
        }));
    }
    let mut prev = 0.0;
    let mut found = None;
    for i in 1..=SCAN_POINTS {
        let r = y_max_scan * i as f64 / SCAN_POINTS as f64;
        if let Some(hit) = holds(r)? {
            found = Some((r, hit));
            break;
        }
        prev = r;
    }
    let Some((mut hi, mut best)) = found else {
        return Ok(None);
    };
    let mut lo = prev;
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        match holds(mid)? {
            Some(hit) => {
                hi = mid;
                best = hit;
            }
            None => lo = mid,
        }
    }
    Ok(Some(RadiusReport {
        radius: hi,
        psi: scan.psi,
        kappa,
        lambda_p,
        phi_at_radius: best.0,
        argmax_y: best.1,
    }))
}
