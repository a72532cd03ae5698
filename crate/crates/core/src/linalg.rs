//! Symmetric positive-definite matrices and spectral matrix functions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this are treated as zero and rejected.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// Symmetry tolerance, relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A validated symmetric positive-definite matrix with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpdMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::NotSpd(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        if !is_symmetric(&matrix, SYMMETRY_TOL) {
            return Err(Error::NotSpd("matrix is not symmetric".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.min();
        if min < EIGEN_FLOOR {
            return Err(Error::NotSpd(format!("smallest eigenvalue {min:e}")));
        }
        Ok(Self {
            matrix: sym,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0).expect("identity is SPD")
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim) * scale)
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.min()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.max()
    }

    pub fn condition_number(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }

    /// `V f(Λ) Vᵀ` for the spectral decomposition `M = V Λ Vᵀ`.
    pub fn map_spectrum<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let d = DVector::from_iterator(self.dim(), self.eigenvalues.iter().map(|&l| f(l)));
        let v = &self.eigenvectors;
        v * DMatrix::from_diagonal(&d) * v.transpose()
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        self.map_spectrum(|l| l.max(EIGEN_FLOOR).sqrt())
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.map_spectrum(|l| 1.0 / l)
    }

    /// Lower-triangular Cholesky factor `L` with `L Lᵀ = M`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        match nalgebra::Cholesky::new(self.matrix.clone()) {
            Some(c) => c.l(),
            // eigen-based symmetric root still satisfies S Sᵀ = M
            None => self.sqrt(),
        }
    }
}

/// `φ(z) = (sin z / z)²`, by series near zero.
pub fn sinc_squared(z: f64) -> f64 {
    let sinc = if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    };
    sinc * sinc
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// Largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn symmetric_lambda_max(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.max()
}

/// Eigenvectors of a symmetric matrix sorted by decreasing eigenvalue.
pub fn leading_eigenvectors(m: &DMatrix<f64>, count: usize) -> Vec<DVector<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .into_iter()
        .take(count)
        .map(|i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            // fix the sign so the output is deterministic
            if let Some(k) = v.iter().position(|x| x.abs() > 1e-12) {
                if v[k] < 0.0 {
                    v.neg_mut();
                }
            }
            v
        })
        .collect()
}
