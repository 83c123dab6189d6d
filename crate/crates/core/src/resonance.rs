//! Spectral analysis of `H(eta) = Laplacian + eta V`: integer resonances at
//! `eta = 0`, eigencurve tracking, curvature checks and non-resonant chains.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{CMatrix, HermitianEigen};
use crate::operators::{
    combine, dirichlet_eigenvalues, interaction_matrix, BasisTruncation, MotionParams,
};

/// Absolute tolerance on gap differences at `eta != 0`.
pub const DEFAULT_RESONANCE_TOL: f64 = 1e-8;

/// Minimum margin between the best and second-best eigenvector overlap when
/// matching curves across grid points.
pub const MATCHING_GAP: f64 = 0.1;

/// `|E_{s2} - E_{s1}| = |E_{t2} - E_{t1}|` with `(s1, s2)` a chain pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    pub s1: usize,
    pub s2: usize,
    pub t1: usize,
    pub t2: usize,
    /// `| |E_{s2} - E_{s1}| - |E_{t2} - E_{t1}| |` (0 for the integer search).
    pub mismatch: f64,
}

impl Resonance {
    pub fn indices(&self) -> [usize; 4] {
        [self.s1, self.s2, self.t1, self.t2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceReport {
    pub quadruples: Vec<Resonance>,
    pub eta: f64,
    pub tolerance: f64,
}

impl ResonanceReport {
    pub fn contains(&self, q: [usize; 4]) -> bool {
        self.quadruples.iter().any(|r| r.indices() == q)
    }

    pub fn is_empty(&self) -> bool {
        self.quadruples.is_empty()
    }
}

/// Exact integer search at `eta = 0`: every consecutive pair `(s, s + 1)` against
/// every pair `t1 < t2 <= max_index` with `t2^2 - t1^2 = 2 s + 1`, excluding the
/// trivial match `(t1, t2) = (s, s + 1)`.
pub fn find_resonances_at_zero(n: BasisTruncation, max_index: usize) -> Result<ResonanceReport> {
    if max_index > n.dim() {
        return Err(Error::InvalidInput(format!(
            "max_index {max_index} exceeds the truncation {}",
            n.dim()
        )));
    }
    let mut quadruples = Vec::new();
    for t2 in 2..=max_index {
        for t1 in 1..t2 {
            let gap = t2 * t2 - t1 * t1;
            if gap % 2 == 0 {
                continue;
            }
            let s = (gap - 1) / 2;
            if s >= 1 && s < max_index && (t1, t2) != (s, s + 1) {
                quadruples.push(Resonance {
                    s1: s,
                    s2: s + 1,
                    t1,
                    t2,
                    mismatch: 0.0,
                });
            }
        }
    }
    quadruples.sort_by_key(|r| r.indices());
    Ok(ResonanceReport {
        quadruples,
        eta: 0.0,
        tolerance: 0.0,
    })
}

/// Eigencurves `E_j(eta)` continued across a grid by eigenvector overlap.
#[derive(Debug, Clone)]
pub struct SpectrumCurve {
    pub eta_grid: Vec<f64>,
    /// `eigenvalues[g][j]`: curve `j` (0-based label at the first grid point) at `eta_grid[g]`.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Eigenvectors as columns, ordered like `eigenvalues[g]`.
    pub eigenvectors: Vec<CMatrix>,
}

impl SpectrumCurve {
    /// Curve of the mode with 1-based label `j`.
    pub fn curve(&self, j: usize) -> Vec<f64> {
        self.eigenvalues.iter().map(|row| row[j - 1]).collect()
    }
}

/// `Laplacian + eta V` on the truncated basis.
pub fn perturbed_hamiltonian(params: &MotionParams, eta: f64, n: BasisTruncation) -> CMatrix {
    let v = interaction_matrix(params, n).matrix;
    combine(&dirichlet_eigenvalues(n), &v, 1.0, -eta)
}

/// Diagonalize on every grid point (independently, per `exec`) and match
/// eigenvectors between neighbours (sequentially).
pub fn spectrum_vs_eta(
    params: &MotionParams,
    eta_grid: &[f64],
    n: BasisTruncation,
    exec: Execution,
) -> Result<SpectrumCurve> {
    if eta_grid.is_empty() || eta_grid.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidInput(
            "eta grid must be non-empty and finite".into(),
        ));
    }
    let lap = dirichlet_eigenvalues(n);
    let v = interaction_matrix(params, n).matrix;
    let decomps = exec.map(eta_grid.to_vec(), |eta| {
        HermitianEigen::new(&combine(&lap, &v, 1.0, -eta))
    });

    let dim = n.dim();
    let mut eigenvalues = Vec::with_capacity(eta_grid.len());
    let mut eigenvectors: Vec<CMatrix> = Vec::with_capacity(eta_grid.len());
    for (g, dec) in decomps.into_iter().enumerate() {
        if g == 0 {
            eigenvalues.push(dec.values.clone());
            eigenvectors.push(dec.vectors);
            continue;
        }
        let prev = &eigenvectors[g - 1];
        let overlap = prev.adjoint() * &dec.vectors;
        let mut order = vec![usize::MAX; dim];
        let mut taken = vec![false; dim];
        for curve in 0..dim {
            let (mut best, mut second, mut arg) = (-1.0, -1.0, 0);
            for k in 0..dim {
                let o = overlap[(curve, k)].norm();
                if o > best {
                    second = best;
                    best = o;
                    arg = k;
                } else if o > second {
                    second = o;
                }
            }
            if best - second < MATCHING_GAP || taken[arg] {
                return Err(Error::DegenerateMatching {
                    eta: eta_grid[g],
                    gap: best - second,
                });
            }
            taken[arg] = true;
            order[curve] = arg;
        }
        eigenvalues.push(order.iter().map(|&k| dec.values[k]).collect());
        eigenvectors.push(CMatrix::from_fn(dim, dim, |i, c| {
            dec.vectors[(i, order[c])]
        }));
    }
    Ok(SpectrumCurve {
        eta_grid: eta_grid.to_vec(),
        eigenvalues,
        eigenvectors,
    })
}

/// Closed-form `eta^2` Taylor coefficient of `E_j(eta)` at `eta = 0`:
/// `lambda^2 / (8 j^2 pi^2) - lambda^2 / 48 - delta^2 / 4`.
/// The second derivative itself is twice this value, see [`eigenvalue_curvature`].
pub fn second_derivative_formula(params: &MotionParams, j: usize) -> f64 {
    let (l, d) = (params.lambda, params.delta);
    let jj = (j * j) as f64;
    l * l / (8.0 * jj * PI * PI) - l * l / 48.0 - d * d / 4.0
}

/// `d^2 E_j / d eta^2` at `eta = 0`.
pub fn eigenvalue_curvature(params: &MotionParams, j: usize) -> f64 {
    2.0 * second_derivative_formula(params, j)
}

/// Outcome of [`certify_chain`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainCertificate {
    pub eta: f64,
    pub max_index: usize,
    /// Smallest `|<phi_j(eta), V phi_{j+1}(eta)>|` along the chain.
    pub weakest_coupling: f64,
    pub connected: bool,
    /// Resonances violating the chain (empty iff non-resonant).
    pub report: ResonanceReport,
}

impl ChainCertificate {
    pub fn certified(&self) -> bool {
        self.connected && self.report.is_empty()
    }
}

/// Grid from 0 to `eta` fine enough for overlap matching.
fn tracking_grid(eta: f64, step: f64) -> Vec<f64> {
    let count = ((eta.abs() / step).ceil() as usize).max(1);
    (0..=count).map(|k| eta * k as f64 / count as f64).collect()
}

/// Default grid spacing used to continue eigencurves from `eta = 0`.
pub const TRACKING_STEP: f64 = 5e-3;

fn check_chain(
    v: &CMatrix,
    eta: f64,
    values: &[f64],
    vectors: &CMatrix,
    max_index: usize,
    tol: f64,
) -> ChainCertificate {
    let m = max_index;
    let cols = vectors.columns(0, m).into_owned();
    let coupling = cols.adjoint() * v * &cols;
    let weakest_coupling = (0..m.saturating_sub(1))
        .map(|j| coupling[(j, j + 1)].norm())
        .fold(f64::INFINITY, f64::min);
    let mut quadruples = Vec::new();
    for s in 1..m {
        let chain_gap = (values[s] - values[s - 1]).abs();
        for t2 in 2..=m {
            for t1 in 1..t2 {
                if (t1, t2) == (s, s + 1) || coupling[(t1 - 1, t2 - 1)].norm() <= tol {
                    continue;
                }
                let mismatch = (chain_gap - (values[t2 - 1] - values[t1 - 1]).abs()).abs();
                if mismatch <= tol {
                    quadruples.push(Resonance {
                        s1: s,
                        s2: s + 1,
                        t1,
                        t2,
                        mismatch,
                    });
                }
            }
        }
    }
    ChainCertificate {
        eta,
        max_index,
        weakest_coupling,
        connected: weakest_coupling > tol,
        report: ResonanceReport {
            quadruples,
            eta,
            tolerance: tol,
        },
    }
}

fn validate_chain_args(n: BasisTruncation, max_index: usize, tol: f64) -> Result<()> {
    if max_index < 2 || 2 * max_index > n.dim() {
        return Err(Error::InvalidInput(format!(
            "need 2 <= max_index <= N/2 (max_index {max_index}, N {})",
            n.dim()
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// Check that consecutive perturbed eigenvectors are coupled by `V` and that no
/// chain gap coincides with another coupled gap at `eta`.
pub fn certify_chain(
    params: &MotionParams,
    eta: f64,
    n: BasisTruncation,
    max_index: usize,
    tol: f64,
    exec: Execution,
) -> Result<ChainCertificate> {
    validate_chain_args(n, max_index, tol)?;
    let curve = spectrum_vs_eta(params, &tracking_grid(eta, TRACKING_STEP), n, exec)?;
    let v = interaction_matrix(params, n).matrix;
    let last = curve.eta_grid.len() - 1;
    Ok(check_chain(
        &v,
        eta,
        &curve.eigenvalues[last],
        &curve.eigenvectors[last],
        max_index,
        tol,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ScanOutcome {
    Found(ChainCertificate),
    NotFound,
}

/// Smallest `eta = k eta_max / grid_size`, `k >= 1`, at which [`certify_chain`]
/// passes. Never returns `eta = 0`.
pub fn scan_for_nonresonant_eta(
    params: &MotionParams,
    eta_max: f64,
    grid_size: usize,
    n: BasisTruncation,
    max_index: usize,
    tol: f64,
    exec: Execution,
) -> Result<ScanOutcome> {
    validate_chain_args(n, max_index, tol)?;
    if !(eta_max > 0.0 && eta_max.is_finite()) || grid_size == 0 {
        return Err(Error::InvalidInput(
            "scan needs eta_max > 0 and grid_size >= 1".into(),
        ));
    }
    // a tracking grid that contains every scan point
    let per_cell = ((eta_max / grid_size as f64 / TRACKING_STEP).ceil() as usize).max(1);
    let total = grid_size * per_cell;
    let grid: Vec<f64> = (0..=total)
        .map(|k| eta_max * k as f64 / total as f64)
        .collect();
    let curve = spectrum_vs_eta(params, &grid, n, exec)?;
    let v = interaction_matrix(params, n).matrix;
    let points: Vec<usize> = (1..=grid_size).collect();
    let certificates = exec.map(points, |k| {
        let g = k * per_cell;
        check_chain(
            &v,
            grid[g],
            &curve.eigenvalues[g],
            &curve.eigenvectors[g],
            max_index,
            tol,
        )
    });
    Ok(certificates
        .into_iter()
        .find(|c| c.certified())
        .map_or(ScanOutcome::NotFound, ScanOutcome::Found))
}
