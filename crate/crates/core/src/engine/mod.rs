//! Finite-dimensional monotone-operator and fixed-point engine.
//!
//! `u` lives in a [`VecSpace`] whose Gram matrix defines the inner product;
//! residuals are dual vectors measured in `‖r‖_* = sqrt(rᵀ G⁻¹ r)`. The
//! duality map is the Gram matrix itself.

mod hybrid;
mod regularized;
mod sandbox;
mod space;

pub use hybrid::{
    damped_picard, default_schedule, hybrid_solve, Damping, DampingOptions, HybridOptions, HybridSolution, Picard,
    PicardOptions, TraceRow, VNorm,
};
pub use regularized::{solve_regularized, InnerOptions, InnerSolution};
pub use sandbox::{
    krasnoselskii_lambda0, one_sided_constant, solve_condkras, solve_eigen, BallSet, BoxSet,
    ConvexSet, CondKrasOptions, Lambda0Options, Lambda0Report, PairSampler,
};
pub use space::{DualityMap, Gram, VecSpace};

use crate::error::Result;

/// `F(u, v)` of the regularized equation `F(u, v) + εJu = 0`, returning a dual
/// vector. The structure flags are claims that sampled verifiers check.
pub trait ParamOperator {
    fn eval(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    fn monotone(&self) -> bool {
        true
    }

    /// Modulus `m > 0` with `⟨F(u,v) − F(w,v), u − w⟩ ≥ m‖u − w‖²`.
    fn strong_modulus(&self) -> Option<f64> {
        None
    }

    /// Coercivity minorant `γ(‖u‖, ‖v‖) ≤ ⟨F(u,v), u⟩`.
    fn gamma(&self, _x: f64, _y: f64) -> Option<f64> {
        None
    }

    /// Approximate solve of `(F'(u) + εJ) d = r`. When provided it replaces
    /// the Gram-preconditioned direction `G⁻¹ r` in [`solve_regularized`].
    fn tangent_solve(&self, _u: &[f64], _v: &[f64], _eps: f64, _r: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Whether sampled verifiers may call `eval` from several threads.
    fn concurrent_safe(&self) -> bool {
        false
    }
}

/// `G(u, v)` of the outer fixed-point loop.
pub trait CompactMap {
    fn eval(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>>;

    /// Majorant `ψ(‖u‖, ‖v‖) ≥ ‖G(u, v)‖`.
    fn majorant(&self, _x: f64, _y: f64) -> Option<f64> {
        None
    }
}

type OpFn<'a> = dyn Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync + 'a;
type ScalarFn<'a> = dyn Fn(f64, f64) -> f64 + Send + Sync + 'a;

/// [`ParamOperator`] built from closures.
pub struct FnOperator<'a> {
    f: Box<OpFn<'a>>,
    strong: Option<f64>,
    gamma: Option<Box<ScalarFn<'a>>>,
}

impl<'a> FnOperator<'a> {
    pub fn new(f: impl Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync + 'a) -> Self {
        FnOperator {
            f: Box::new(f),
            strong: None,
            gamma: None,
        }
    }

    pub fn strongly_monotone(mut self, m: f64) -> Self {
        self.strong = Some(m);
        self
    }

    pub fn with_gamma(mut self, gamma: impl Fn(f64, f64) -> f64 + Send + Sync + 'a) -> Self {
        self.gamma = Some(Box::new(gamma));
        self
    }
}

impl ParamOperator for FnOperator<'_> {
    fn eval(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        (self.f)(u, v)
    }

    fn strong_modulus(&self) -> Option<f64> {
        self.strong
    }

    fn gamma(&self, x: f64, y: f64) -> Option<f64> {
        self.gamma.as_ref().map(|g| g(x, y))
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// [`CompactMap`] built from a closure.
pub struct FnMap<'a> {
    g: Box<OpFn<'a>>,
    majorant: Option<Box<ScalarFn<'a>>>,
}

impl<'a> FnMap<'a> {
    pub fn new(g: impl Fn(&[f64], &[f64]) -> Result<Vec<f64>> + Send + Sync + 'a) -> Self {
        FnMap {
            g: Box::new(g),
            majorant: None,
        }
    }

    pub fn with_majorant(mut self, psi: impl Fn(f64, f64) -> f64 + Send + Sync + 'a) -> Self {
        self.majorant = Some(Box::new(psi));
        self
    }
}

impl CompactMap for FnMap<'_> {
    fn eval(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        (self.g)(u, v)
    }

    fn majorant(&self, x: f64, y: f64) -> Option<f64> {
        self.majorant.as_ref().map(|m| m(x, y))
    }
}

#[cfg(test)]
mod tests;
