//! Operators of the reference box `[-1/2, 1/2]` as dense Hermitian matrices
//! in the truncated Dirichlet eigenbasis
//! `phi_j(x) = sqrt(2) sin(j pi (x + 1/2))`, `j = 1..N`.
//!
//! Units are fixed by `hbar = 1` and mass `1/2`, so the free Hamiltonian is
//! `-d^2/dx^2` with eigenvalues `j^2 pi^2`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, inner, CMatrix, CVector, I};

/// Number of retained eigenmodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisTruncation(usize);

impl BasisTruncation {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "basis truncation must keep at least 2 modes, got {dim}"
            )));
        }
        Ok(Self(dim))
    }

    pub fn dim(self) -> usize {
        self.0
    }
}

/// Length and center of the physical box `[d - l/2, d + l/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGeometry {
    pub length: f64,
    pub center: f64,
}

impl BoxGeometry {
    pub fn new(length: f64, center: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidInput(format!(
                "box length must be positive and finite (got length {length}, center {center})"
            )));
        }
        Ok(Self { length, center })
    }

    /// The reference box `[-1/2, 1/2]`.
    pub fn reference() -> Self {
        Self {
            length: 1.0,
            center: 0.0,
        }
    }

    pub fn left_wall(&self) -> f64 {
        self.center - 0.5 * self.length
    }

    pub fn right_wall(&self) -> f64 {
        self.center + 0.5 * self.length
    }
}

/// Parity sector of the centered box. `phi_j` is even for odd `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Parity::Even),
            -1 => Ok(Parity::Odd),
            _ => Err(Error::InvalidInput(format!(
                "parity sign must be +1 or -1, got {sign}"
            ))),
        }
    }

    /// Parity of the 1-based basis function `phi_j`.
    pub fn of_mode(j: usize) -> Self {
        if j % 2 == 1 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Wavefunction coefficients on the eigenbasis of the box it is referenced to.
///
/// A state tagged with geometry `g` stands for `W_g^dagger psi`, where `psi` has the
/// same coefficients on the reference box; the tag is bookkeeping only.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub coeffs: CVector,
    pub geometry: BoxGeometry,
}

impl SpectralState {
    pub fn new(coeffs: CVector, geometry: BoxGeometry) -> Self {
        Self { coeffs, geometry }
    }

    /// The eigenmode `phi_j` (1-based) of `geometry`.
    pub fn basis(j: usize, n: BasisTruncation, geometry: BoxGeometry) -> Result<Self> {
        if j == 0 || j > n.dim() {
            return Err(Error::InvalidInput(format!(
                "mode index {j} outside 1..={}",
                n.dim()
            )));
        }
        let mut c = CVector::zeros(n.dim());
        c[j - 1] = Complex64::new(1.0, 0.0);
        Ok(Self::new(c, geometry))
    }

    pub fn ground(n: BasisTruncation, geometry: BoxGeometry) -> Self {
        Self::basis(1, n, geometry).expect("mode 1 always exists")
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero state".into()));
        }
        Ok(Self::new(self.coeffs.unscale(n), self.geometry))
    }

    pub fn inner(&self, other: &SpectralState) -> Complex64 {
        inner(&self.coeffs, &other.coeffs)
    }

    /// `sqrt(sum (E_j + 1) |c_j|^2)`, the form-domain norm.
    pub fn plus_norm(&self) -> f64 {
        weighted_norm(&self.coeffs, 1.0)
    }

    /// `sqrt(sum |c_j|^2 / (E_j + 1))`, the dual norm.
    pub fn minus_norm(&self) -> f64 {
        weighted_norm(&self.coeffs, -1.0)
    }

    /// Probability carried by the given parity sector.
    pub fn sector_probability(&self, parity: Parity) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(k, _)| Parity::of_mode(k + 1) == parity)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }
}

pub(crate) fn weighted_norm(c: &CVector, power: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(k, z)| {
            let j = (k + 1) as f64;
            (j * j * PI * PI + 1.0).powf(power) * z.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Identity of an assembled operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    Laplacian,
    Momentum,
    Dilation,
    Interaction,
    Hamiltonian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    pub matrix: CMatrix,
    pub label: OperatorKind,
}

impl HermitianOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    pub fn entry(&self, j: usize, l: usize) -> Complex64 {
        self.matrix[(j - 1, l - 1)]
    }

    pub fn apply(&self, state: &SpectralState) -> SpectralState {
        SpectralState::new(&self.matrix * &state.coeffs, state.geometry)
    }
}

/// Wall motion `l(t) = ell0 + lambda f(t)`, `d(t) = d0 + delta f(t)` and the
/// slope bound `|f'| < rate_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub lambda: f64,
    pub delta: f64,
    pub ell0: f64,
    pub d0: f64,
    pub rate_bound: f64,
}

impl MotionParams {
    pub fn new(lambda: f64, delta: f64, ell0: f64, d0: f64, rate_bound: f64) -> Result<Self> {
        let all_finite = [lambda, delta, ell0, d0, rate_bound]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite || lambda < 0.0 || ell0 <= 0.0 || rate_bound <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "motion parameters need lambda >= 0, ell0 > 0, rate_bound > 0 \
                 (got lambda {lambda}, ell0 {ell0}, rate_bound {rate_bound})"
            )));
        }
        Ok(Self {
            lambda,
            delta,
            ell0,
            d0,
            rate_bound,
        })
    }

    /// Box length for wall displacement `f`.
    pub fn length_at(&self, f: f64) -> f64 {
        self.ell0 + self.lambda * f
    }

    pub fn geometry_at(&self, f: f64) -> Result<BoxGeometry> {
        BoxGeometry::new(self.length_at(f), self.d0 + self.delta * f)
    }

    /// Bound `ell0 / lambda` on `|f|` (infinite for a pure translation).
    pub fn displacement_bound(&self) -> f64 {
        if self.lambda > 0.0 {
            self.ell0 / self.lambda
        } else {
            f64::INFINITY
        }
    }
}

/// `E_j = j^2 pi^2`, `j = 1..N`.
pub fn dirichlet_eigenvalues(n: BasisTruncation) -> Vec<f64> {
    (1..=n.dim()).map(|j| (j as f64 * PI).powi(2)).collect()
}

pub fn laplacian_matrix(n: BasisTruncation) -> HermitianOperator {
    let e = dirichlet_eigenvalues(n);
    let matrix = CMatrix::from_fn(n.dim(), n.dim(), |i, k| {
        if i == k {
            Complex64::new(e[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    HermitianOperator {
        matrix,
        label: OperatorKind::Laplacian,
    }
}

/// `<phi_j, p phi_l> = i 2 j l [1 - (-1)^(j+l)] / (l^2 - j^2)`; nonzero only for odd `j + l`.
pub fn momentum_matrix(n: BasisTruncation) -> HermitianOperator {
    let matrix = CMatrix::from_fn(n.dim(), n.dim(), |a, b| {
        let (j, l) = (a + 1, b + 1);
        if (j + l) % 2 == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let (jf, lf) = (j as f64, l as f64);
        I * (4.0 * jf * lf / (lf * lf - jf * jf))
    });
    HermitianOperator {
        matrix,
        label: OperatorKind::Momentum,
    }
}

/// `<phi_j, x∘p phi_l> = -i j l [1 + (-1)^(j+l)] / (l^2 - j^2)` with `x∘p = (xp + px)/2`;
/// nonzero only for even, nonzero `l - j`.
pub fn dilation_matrix(n: BasisTruncation) -> HermitianOperator {
    let matrix = CMatrix::from_fn(n.dim(), n.dim(), |a, b| {
        let (j, l) = (a + 1, b + 1);
        if j == l || (j + l) % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        let (jf, lf) = (j as f64, l as f64);
        -I * (2.0 * jf * lf / (lf * lf - jf * jf))
    });
    HermitianOperator {
        matrix,
        label: OperatorKind::Dilation,
    }
}

/// `V = lambda x∘p + delta p`.
pub fn interaction_matrix(params: &MotionParams, n: BasisTruncation) -> HermitianOperator {
    let x = dilation_matrix(n).matrix;
    let p = momentum_matrix(n).matrix;
    let matrix = x * Complex64::new(params.lambda, 0.0) + p * Complex64::new(params.delta, 0.0);
    HermitianOperator {
        matrix,
        label: OperatorKind::Interaction,
    }
}

/// `a * Laplacian - b * V`, the generic form of every Hamiltonian used here.
pub(crate) fn combine(lap: &[f64], v: &CMatrix, a: f64, b: f64) -> CMatrix {
    let mut h = v * Complex64::new(-b, 0.0);
    for (k, e) in lap.iter().enumerate() {
        h[(k, k)] += a * e;
    }
    h
}

/// Basis-change matrix between the eigenbases of two boxes.
#[derive(Debug, Clone)]
pub struct FrameMap {
    /// Entry `(l, j)` is `<chi_l^dst, chi_j^src>` on the real line.
    pub matrix: CMatrix,
    /// `1 - ||column_j||^2`: probability of `chi_j^src` lost to the truncation.
    pub column_deficiency: Vec<f64>,
}

impl FrameMap {
    pub fn apply(&self, state: &SpectralState, dst: BoxGeometry) -> SpectralState {
        SpectralState::new(&self.matrix * &state.coeffs, dst)
    }
}

/// Matrix of `W_dst W_src^dagger` restricted to the truncated bases, i.e. the
/// overlaps of the eigenfunctions of the `src` box with those of the `dst` box
/// (both extended by zero outside their walls).
pub fn frame_map_coefficients(
    src: BoxGeometry,
    dst: BoxGeometry,
    n: BasisTruncation,
) -> Result<FrameMap> {
    let src = BoxGeometry::new(src.length, src.center)?;
    let dst = BoxGeometry::new(dst.length, dst.center)?;
    let dim = n.dim();
    let lo = src.left_wall().max(dst.left_wall());
    let hi = src.right_wall().min(dst.right_wall());
    let matrix = if src == dst {
        CMatrix::identity(dim, dim)
    } else if hi <= lo {
        CMatrix::zeros(dim, dim)
    } else {
        CMatrix::from_fn(dim, dim, |a, b| {
            Complex64::new(sine_overlap(dst, a + 1, src, b + 1, lo, hi), 0.0)
        })
    };
    let column_deficiency = (0..dim)
        .map(|j| 1.0 - matrix.column(j).norm_squared())
        .collect();
    Ok(FrameMap {
        matrix,
        column_deficiency,
    })
}

/// `int_lo^hi chi_j^g(y) chi_k^h(y) dy` with `chi_j^g(y) = sqrt(2/l) sin(j pi ((y-d)/l + 1/2))`.
fn sine_overlap(g: BoxGeometry, j: usize, h: BoxGeometry, k: usize, lo: f64, hi: f64) -> f64 {
    let (w1, p1) = sine_wave(g, j);
    let (w2, p2) = sine_wave(h, k);
    let amp = 2.0 / (g.length * h.length).sqrt();
    // sin A sin B = (cos(A - B) - cos(A + B)) / 2
    0.5 * amp
        * (cosine_integral(w1 - w2, p1 - p2, lo, hi) - cosine_integral(w1 + w2, p1 + p2, lo, hi))
}

fn sine_wave(g: BoxGeometry, j: usize) -> (f64, f64) {
    let w = j as f64 * PI / g.length;
    (w, j as f64 * PI * (0.5 - g.center / g.length))
}

/// `int_lo^hi cos(w y + phi) dy`, stable as `w -> 0`.
fn cosine_integral(w: f64, phi: f64, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let x = w * half;
    let sinc = if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    };
    2.0 * half * sinc * (w * mid + phi).cos()
}

/// Diagonal projector onto one parity sector.
pub fn parity_projector(parity: Parity, n: BasisTruncation) -> DMatrix<f64> {
    DMatrix::from_fn(n.dim(), n.dim(), |a, b| {
        if a == b && Parity::of_mode(a + 1) == parity {
            1.0
        } else {
            0.0
        }
    })
}
