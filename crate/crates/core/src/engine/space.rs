use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{dot, SymTridiag};

/// Symmetric positive-definite Gram matrix.
#[derive(Clone, Debug)]
pub enum Gram {
    Identity(usize),
    Tridiagonal(SymTridiag),
    Dense {
        matrix: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
}

/// `ℝⁿ` with the inner product `⟨u, w⟩ = uᵀ G w`.
#[derive(Clone, Debug)]
pub struct VecSpace {
    gram: Gram,
}

impl VecSpace {
    pub fn euclidean(dim: usize) -> Self {
        VecSpace {
            gram: Gram::Identity(dim),
        }
    }

    pub fn tridiagonal(gram: SymTridiag) -> Result<Self> {
        if !gram.is_positive_definite() {
            return Err(Error::invalid("tridiagonal Gram matrix is not positive definite"));
        }
        Ok(VecSpace {
            gram: Gram::Tridiagonal(gram),
        })
    }

    /// Dense Gram matrix; must be symmetric to 1e-12 and admit a Cholesky
    /// factorization.
    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("Gram matrix must be square"));
        }
        let scale = matrix.amax().max(1.0);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("Gram matrix is not symmetric"));
        }
        let chol = Cholesky::new(matrix.clone())
            .ok_or_else(|| Error::invalid("Gram matrix is not positive definite"))?;
        Ok(VecSpace {
            gram: Gram::Dense { matrix, chol },
        })
    }

    pub fn gram(&self) -> &Gram {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        match &self.gram {
            Gram::Identity(n) => *n,
            Gram::Tridiagonal(t) => t.dim(),
            Gram::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    /// `G u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match &self.gram {
            Gram::Identity(_) => u.to_vec(),
            Gram::Tridiagonal(t) => t.matvec(u),
            Gram::Dense { matrix, .. } => (matrix * DVector::from_column_slice(u)).as_slice().to_vec(),
        }
    }

    /// `G⁻¹ r`.
    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        match &self.gram {
            Gram::Identity(_) => Ok(r.to_vec()),
            Gram::Tridiagonal(t) => t.solve(r),
            Gram::Dense { chol, .. } => Ok(chol.solve(&DVector::from_column_slice(r)).as_slice().to_vec()),
        }
    }

    pub fn inner(&self, u: &[f64], w: &[f64]) -> f64 {
        dot(u, &self.apply(w))
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// `sqrt(rᵀ G⁻¹ r)`.
    pub fn dual_norm(&self, r: &[f64]) -> Result<f64> {
        Ok(dot(r, &self.solve(r)?).max(0.0).sqrt())
    }

    /// Maps a point of the Euclidean unit ball onto the unit ball of this
    /// norm (`z ↦ L⁻ᵀ z` with `G = L Lᵀ`).
    pub fn from_euclidean_ball(&self, z: &[f64]) -> Result<Vec<f64>> {
        match &self.gram {
            Gram::Identity(_) => Ok(z.to_vec()),
            Gram::Tridiagonal(t) => {
                let n = t.dim();
                let m = DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        t.diag[i]
                    } else if i + 1 == j {
                        t.off[i]
                    } else if j + 1 == i {
                        t.off[j]
                    } else {
                        0.0
                    }
                });
                let chol = Cholesky::new(m).ok_or_else(|| Error::invalid("Gram matrix is not positive definite"))?;
                lt_solve(&chol, z)
            }
            Gram::Dense { chol, .. } => lt_solve(chol, z),
        }
    }

    pub fn duality_map(&self) -> DualityMap<'_> {
        DualityMap { space: self }
    }
}

fn lt_solve(chol: &Cholesky<f64, Dyn>, z: &[f64]) -> Result<Vec<f64>> {
    let lt = chol.l().transpose();
    lt.solve_upper_triangular(&DVector::from_column_slice(z))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::invalid("singular Cholesky factor"))
}

/// Discrete duality map `J u = G u`: linear, `J(0) = 0`, `⟨Ju, u⟩ = ‖u‖²` and
/// strictly monotone because `G` is positive definite.
#[derive(Clone, Copy, Debug)]
pub struct DualityMap<'a> {
    space: &'a VecSpace,
}

impl DualityMap<'_> {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.space.apply(u)
    }

    pub fn space(&self) -> &VecSpace {
        self.space
    }
}
