use std::fmt;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::linalg::{c, hermitian_eigen, hermiticity_defect, projector, trace, CMatrix, CVector};

/// Tolerances used when a matrix is accepted as a density matrix.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub hermitian: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            hermitian: 1e-10,
            trace: 1e-10,
            min_eigenvalue: -1e-10,
        }
    }
}

/// Hermitian, positive semidefinite, unit-trace complex matrix.
#[derive(Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerance::default())
    }

    /// Validates without renormalizing; a matrix outside tolerance is rejected.
    pub fn with_tolerance(matrix: CMatrix, tol: Tolerance) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(SimError::InvalidDensityMatrix(format!(
                "matrix is {}x{}, expected square and non-empty",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SimError::InvalidDensityMatrix("non-finite entry".into()));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > tol.hermitian {
            return Err(SimError::InvalidDensityMatrix(format!(
                "not Hermitian (max |A - A^†| = {defect:.3e})"
            )));
        }
        let tr = trace(&matrix);
        if (tr - c(1.0)).norm() > tol.trace {
            return Err(SimError::InvalidDensityMatrix(format!(
                "trace is {:.12} + {:.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        let (values, _) = hermitian_eigen(&matrix);
        if values[0] < tol.min_eigenvalue {
            return Err(SimError::InvalidDensityMatrix(format!(
                "negative eigenvalue {:.3e}",
                values[0]
            )));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix the caller knows is a state, enforcing exact Hermiticity.
    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        let matrix = (&matrix + matrix.adjoint()) * c(0.5);
        Self { matrix }
    }

    pub fn pure(state: &CVector) -> Result<Self> {
        let norm = state.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(SimError::InvalidDensityMatrix("zero state vector".into()));
        }
        Ok(Self::from_matrix_unchecked(projector(&(state / c(norm)))))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim) / c(dim as f64),
        }
    }

    /// Computational-basis projector `|index><index|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut matrix = CMatrix::zeros(dim, dim);
        matrix[(index, index)] = c(1.0);
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        trace(&self.matrix)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self {
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix).0[0]
    }

    /// `<v|rho|v>` for a normalized `v`.
    pub fn expectation(&self, v: &CVector) -> f64 {
        (v.adjoint() * &self.matrix * v)[(0, 0)].re
    }
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DensityMatrix{}", self.matrix)
    }
}
