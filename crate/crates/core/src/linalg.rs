//! Dense complex linear algebra helpers built on `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Eigendecomposition `H = Q diag(values) Q†` of a Hermitian matrix, values ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        let n = h.nrows();
        // symmetrize so round-off in the input cannot leak an anti-Hermitian part
        let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self { values, vectors }
    }

    /// `exp(-i * dt * H)`.
    pub fn propagator(&self, dt: f64) -> CMatrix {
        let phases: Vec<Complex64> = self
            .values
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -dt * e))
            .collect();
        self.reconstruct(&phases)
    }

    /// `Q diag(d) Q†`.
    pub fn reconstruct(&self, diag: &[Complex64]) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let d = diag[j];
            for i in 0..n {
                scaled[(i, j)] *= d;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Directional derivative of `exp(-i dt H)` along the Hermitian direction `b`
    /// (Daleckii-Krein divided differences).
    pub fn propagator_derivative(&self, dt: f64, b: &CMatrix) -> CMatrix {
        let n = self.values.len();
        let q = &self.vectors;
        let bt = q.adjoint() * b * q;
        let ph: Vec<Complex64> = self
            .values
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -dt * e))
            .collect();
        let mut g = CMatrix::zeros(n, n);
        for a in 0..n {
            for c in 0..n {
                let de = self.values[a] - self.values[c];
                let dd = if de.abs() * dt.abs() < 1e-10 {
                    // f'(e) for f(e) = exp(-i dt e)
                    -I * dt * ph[a]
                } else {
                    (ph[a] - ph[c]) / de
                };
                g[(a, c)] = dd * bt[(a, c)];
            }
        }
        q * g * q.adjoint()
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |(A - A†)_ij|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `max |(U†U - I)_ij|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

pub(crate) fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.dotc(b)
}
