//! Symmetric tridiagonal matrices: products, solves and Sturm counts.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix given by its diagonal and first off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::invalid(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(SymTridiag { diag, off })
    }

    /// Constant-coefficient matrix of size `n`.
    pub fn toeplitz(n: usize, d: f64, o: f64) -> Self {
        SymTridiag {
            diag: vec![d; n],
            off: vec![o; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// `self - sigma * other`.
    pub fn shifted(&self, sigma: f64, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a - sigma * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a - sigma * b).collect(),
        }
    }

    /// LDLᵀ pivots without pivoting; a zero pivot is nudged to keep the
    /// recurrence finite.
    fn pivots(&self) -> Vec<f64> {
        let n = self.dim();
        let mut d = Vec::with_capacity(n);
        let mut prev = 0.0;
        for i in 0..n {
            let mut di = self.diag[i];
            if i > 0 {
                di -= self.off[i - 1] * self.off[i - 1] / prev;
            }
            if di == 0.0 {
                di = f64::EPSILON * (self.diag[i].abs() + 1.0);
            }
            d.push(di);
            prev = di;
        }
        d
    }

    /// Number of negative pivots, which equals the number of negative
    /// eigenvalues (Sylvester's law of inertia).
    pub fn negative_count(&self) -> usize {
        self.pivots().iter().filter(|&&d| d < 0.0).count()
    }

    /// Solves `self · x = b` by symmetric Gaussian elimination. Intended for
    /// SPD matrices and for shifted systems close to singular (inverse
    /// iteration), where no pivoting is acceptable.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::invalid("right-hand side length mismatch"));
        }
        let d = self.pivots();
        let mut y = b.to_vec();
        for i in 1..n {
            y[i] -= self.off[i - 1] / d[i - 1] * y[i - 1];
        }
        let mut x = vec![0.0; n];
        x[n - 1] = y[n - 1] / d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (y[i] - self.off[i] * x[i + 1]) / d[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tridiagonal solve produced non-finite values"));
        }
        Ok(x)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.pivots().iter().all(|&d| d > 0.0)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Discrete H¹₀ stiffness matrix on `n_cells` uniform cells (interior nodes).
pub fn stiffness(n_cells: usize) -> SymTridiag {
    let h = 1.0 / n_cells as f64;
    SymTridiag::toeplitz(n_cells.saturating_sub(1), 2.0 / h, -1.0 / h)
}

/// Consistent P1 mass matrix on `n_cells` uniform cells (interior nodes).
pub fn mass(n_cells: usize) -> SymTridiag {
    let h = 1.0 / n_cells as f64;
    SymTridiag::toeplitz(n_cells.saturating_sub(1), 4.0 * h / 6.0, h / 6.0)
}
