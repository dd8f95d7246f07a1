//! Report types shared by the sampled assumption verifiers.

use serde::Serialize;

/// Outcome of one sampled condition. `worst_margin` is the smallest
/// `rhs − lhs` seen (negative means violated).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    pub worst_margin: f64,
    pub witness: Option<String>,
}

impl CheckResult {
    pub fn exact(name: impl Into<String>, passed: bool, margin: f64, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            samples: 1,
            worst_margin: margin,
            witness: (!passed).then(|| detail.into()),
        }
    }
}

/// Running minimum of margins with the first worst witness.
pub(crate) struct Tracker {
    name: String,
    tol: f64,
    samples: usize,
    worst: f64,
    witness: Option<String>,
    failed: bool,
}

impl Tracker {
    pub(crate) fn new(name: impl Into<String>, tol: f64) -> Self {
        Tracker {
            name: name.into(),
            tol,
            samples: 0,
            worst: f64::INFINITY,
            witness: None,
            failed: false,
        }
    }

    /// Records `margin`; `describe` is only called for a new worst sample.
    pub(crate) fn record(&mut self, margin: f64, describe: impl FnOnce() -> String) {
        self.samples += 1;
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if margin < self.worst {
            self.worst = margin;
            if margin < -self.tol {
                self.failed = true;
                self.witness = Some(describe());
            }
        }
    }

    pub(crate) fn fail(&mut self, detail: String) {
        self.samples += 1;
        self.failed = true;
        self.worst = f64::NEG_INFINITY;
        self.witness.get_or_insert(detail);
    }

    pub(crate) fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            passed: !self.failed,
            samples: self.samples,
            worst_margin: self.worst,
            witness: self.witness,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<CheckResult>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn extend(&mut self, other: AssumptionReport) {
        self.checks.extend(other.checks);
    }
}

/// Sampling lattice for the pointwise verifiers: `t ∈ {0, 0.1, …, 1}`,
/// `y, u ∈ [-10, 10]` and `r ∈ [0, 10]` on 21 points each, plus seeded random
/// points.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub t_points: usize,
    pub y_max: f64,
    pub y_points: usize,
    pub r_max: f64,
    pub r_points: usize,
    pub u_max: f64,
    pub u_points: usize,
    pub random: usize,
    pub seed: u64,
}

impl Default for Lattice {
    fn default() -> Self {
        Lattice {
            t_points: 11,
            y_max: 10.0,
            y_points: 21,
            r_max: 10.0,
            r_points: 21,
            u_max: 10.0,
            u_points: 21,
            random: 1000,
            seed: 42,
        }
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl Lattice {
    pub fn ts(&self) -> Vec<f64> {
        linspace(0.0, 1.0, self.t_points)
    }
    pub fn ys(&self) -> Vec<f64> {
        linspace(-self.y_max, self.y_max, self.y_points)
    }
    pub fn rs(&self) -> Vec<f64> {
        linspace(0.0, self.r_max, self.r_points)
    }
    pub fn us(&self) -> Vec<f64> {
        linspace(-self.u_max, self.u_max, self.u_points)
    }
}
