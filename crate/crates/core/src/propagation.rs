//! Propagators of the auxiliary bilinear system
//! `H_v = ell0^-2 Laplacian - ell0^-1 v(t) V`
//! and of the fixed-domain moving-box system
//! `H_f = (ell0 + lambda f)^-2 Laplacian - f' (ell0 + lambda f)^-1 V`.
//!
//! Constant segments use exact exponentials from a Hermitian eigendecomposition.
//! Linear segments use the exponential midpoint rule, one exponential per sub-step.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, unitarity_defect, CMatrix, CVector, HermitianEigen};
use crate::operators::{
    combine, dirichlet_eigenvalues, interaction_matrix, BasisTruncation, MotionParams,
    SpectralState,
};

/// Default number of exponential-midpoint sub-steps per linear segment.
pub const DEFAULT_SUBSTEPS: usize = 64;

/// Sub-stepping rule for linear segments: each segment of length `len` gets
/// `max(min_substeps, ceil(len / max_step))` equal sub-steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stepping {
    pub min_substeps: usize,
    pub max_step: f64,
}

impl Default for Stepping {
    fn default() -> Self {
        Self {
            min_substeps: DEFAULT_SUBSTEPS,
            max_step: f64::INFINITY,
        }
    }
}

impl Stepping {
    /// Uniform maximal step `h` regardless of segment length.
    pub fn fixed(h: f64) -> Self {
        Self {
            min_substeps: 1,
            max_step: h,
        }
    }

    pub fn substeps(&self, len: f64) -> usize {
        let by_step = if self.max_step.is_finite() {
            ((len / self.max_step) - 1e-9).ceil().max(0.0) as usize
        } else {
            0
        };
        by_step.max(self.min_substeps).max(1)
    }

    fn validate(&self) -> Result<()> {
        if self.max_step.is_nan() || self.max_step <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "invalid stepping rule {self:?}"
            )));
        }
        Ok(())
    }
}

/// One linear piece `f(t) = offset + slope (t - t_start)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPiece {
    pub offset: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ControlValues {
    /// Piecewise-constant `v(t)`.
    Constant(Vec<f64>),
    /// Piecewise-linear `f(t)`.
    Linear(Vec<LinearPiece>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlKind {
    Constant,
    Linear,
}

/// A control signal on `[0, T]` with breakpoints `0 = t_0 < ... < t_d = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseControl {
    breakpoints: Vec<f64>,
    values: ControlValues,
}

impl PiecewiseControl {
    pub fn constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::validated(breakpoints, ControlValues::Constant(values))
    }

    pub fn linear(breakpoints: Vec<f64>, pieces: Vec<LinearPiece>) -> Result<Self> {
        Self::validated(breakpoints, ControlValues::Linear(pieces))
    }

    /// Constant control on `values.len()` equal segments of `[0, horizon]`.
    pub fn uniform_constant(horizon: f64, values: Vec<f64>) -> Result<Self> {
        let d = values.len();
        if d == 0 {
            return Err(Error::InvalidInput(
                "control needs at least one segment".into(),
            ));
        }
        let breakpoints = (0..=d).map(|k| horizon * k as f64 / d as f64).collect();
        Self::constant(breakpoints, values)
    }

    fn validated(breakpoints: Vec<f64>, values: ControlValues) -> Result<Self> {
        let segments = match &values {
            ControlValues::Constant(v) => v.len(),
            ControlValues::Linear(p) => p.len(),
        };
        if segments == 0 || breakpoints.len() != segments + 1 {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints for {segments} segments",
                breakpoints.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidInput("controls start at t = 0".into()));
        }
        if breakpoints.iter().any(|t| !t.is_finite())
            || breakpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidInput(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        let finite = match &values {
            ControlValues::Constant(v) => v.iter().all(|x| x.is_finite()),
            ControlValues::Linear(p) => p
                .iter()
                .all(|x| x.offset.is_finite() && x.slope.is_finite()),
        };
        if !finite {
            return Err(Error::InvalidInput("control values must be finite".into()));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn kind(&self) -> ControlKind {
        match self.values {
            ControlValues::Constant(_) => ControlKind::Constant,
            ControlValues::Linear(_) => ControlKind::Linear,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &ControlValues {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("validated non-empty")
    }

    pub fn segment_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn segment_bounds(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }

    /// Segment containing `t` (right-continuous; `T` maps to the last segment).
    pub fn segment_at(&self, t: f64) -> usize {
        let d = self.segment_count();
        match self.breakpoints.partition_point(|&b| b <= t) {
            0 => 0,
            k => (k - 1).min(d - 1),
        }
    }

    /// Slope of `f` (linear) or value of `v` (constant) on segment `k`.
    pub fn rate(&self, k: usize) -> f64 {
        match &self.values {
            ControlValues::Constant(v) => v[k],
            ControlValues::Linear(p) => p[k].slope,
        }
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.segment_count()).map(|k| self.rate(k)).collect()
    }

    /// Value of a linear control at `t` (right-continuous at breakpoints).
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.segment_at(t);
        self.value_in_segment(k, t)
    }

    /// Value of segment `k`'s linear formula at `t` (may be evaluated at the right end).
    pub fn value_in_segment(&self, k: usize, t: f64) -> f64 {
        match &self.values {
            ControlValues::Linear(p) => p[k].offset + p[k].slope * (t - self.breakpoints[k]),
            ControlValues::Constant(_) => 0.0,
        }
    }

    /// Left limit of `f` at `T`.
    pub fn final_value(&self) -> f64 {
        let d = self.segment_count();
        self.value_in_segment(d - 1, self.horizon())
    }

    /// `max |f|` over all segments, including left limits at breakpoints.
    pub fn sup_abs_value(&self) -> f64 {
        (0..self.segment_count())
            .flat_map(|k| {
                let (a, b) = self.segment_bounds(k);
                [self.value_in_segment(k, a), self.value_in_segment(k, b)]
            })
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sup_abs_rate(&self) -> f64 {
        self.rates().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn shortest_segment(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Concatenate `other` after `self` (both of the same kind).
    pub fn append(&self, other: &PiecewiseControl) -> Result<PiecewiseControl> {
        let shift = self.horizon();
        let mut breakpoints = self.breakpoints.clone();
        breakpoints.extend(other.breakpoints[1..].iter().map(|t| t + shift));
        let values = match (&self.values, &other.values) {
            (ControlValues::Constant(a), ControlValues::Constant(b)) => {
                ControlValues::Constant(a.iter().chain(b).copied().collect())
            }
            (ControlValues::Linear(a), ControlValues::Linear(b)) => {
                ControlValues::Linear(a.iter().chain(b).copied().collect())
            }
            _ => {
                return Err(Error::InvalidInput(
                    "cannot join controls of different kinds".into(),
                ))
            }
        };
        Self::validated(breakpoints, values)
    }
}

/// Unitary propagator `U(t_to, t_from)` on the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: CMatrix,
    pub t_from: f64,
    pub t_to: f64,
}

impl Propagator {
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    pub fn apply(&self, state: &SpectralState) -> SpectralState {
        SpectralState::new(&self.matrix * &state.coeffs, state.geometry)
    }

    /// `self` after `earlier`: `U(t, s) U(s, r)`.
    pub fn compose(&self, earlier: &Propagator) -> Propagator {
        Propagator {
            matrix: &self.matrix * &earlier.matrix,
            t_from: earlier.t_from,
            t_to: self.t_to,
        }
    }
}

/// One exponential step `exp(-i dt (a Laplacian - b V))` ending at `t_end`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Step {
    pub dt: f64,
    pub drift: f64,
    pub drive: f64,
    pub t_end: f64,
}

/// Operators of one truncated model, assembled once and shared.
#[derive(Debug, Clone)]
pub struct BoxModel {
    pub params: MotionParams,
    pub truncation: BasisTruncation,
    pub(crate) laplacian: Vec<f64>,
    pub(crate) interaction: CMatrix,
}

impl BoxModel {
    pub fn new(params: MotionParams, truncation: BasisTruncation) -> Self {
        Self {
            params,
            truncation,
            laplacian: dirichlet_eigenvalues(truncation),
            interaction: interaction_matrix(&params, truncation).matrix,
        }
    }

    pub fn dim(&self) -> usize {
        self.truncation.dim()
    }

    pub fn interaction(&self) -> &CMatrix {
        &self.interaction
    }

    pub fn laplacian_eigenvalues(&self) -> &[f64] {
        &self.laplacian
    }

    /// `drift * Laplacian - drive * V`.
    pub fn hamiltonian(&self, drift: f64, drive: f64) -> CMatrix {
        combine(&self.laplacian, &self.interaction, drift, drive)
    }

    /// Auxiliary Hamiltonian for a constant control value `v`.
    pub fn auxiliary_hamiltonian(&self, v: f64) -> CMatrix {
        let l0 = self.params.ell0;
        self.hamiltonian(1.0 / (l0 * l0), v / l0)
    }

    /// Transformed Hamiltonian at displacement `f` and rate `f'`.
    pub fn transformed_hamiltonian(&self, f: f64, rate: f64) -> CMatrix {
        let l = self.params.length_at(f);
        self.hamiltonian(1.0 / (l * l), rate / l)
    }

    fn check_span(control: &PiecewiseControl, span: (f64, f64)) -> Result<()> {
        let t_max = control.horizon();
        let ok = |t: f64| t.is_finite() && t >= -1e-12 && t <= t_max * (1.0 + 1e-12) + 1e-12;
        if !ok(span.0) || !ok(span.1) {
            return Err(Error::InvalidInput(format!(
                "time span ({}, {}) outside the control domain [0, {t_max}]",
                span.0, span.1
            )));
        }
        Ok(())
    }

    /// Steps of the auxiliary system on `[t0, t1]`, `t0 <= t1`.
    pub(crate) fn auxiliary_steps(
        &self,
        v: &PiecewiseControl,
        t0: f64,
        t1: f64,
    ) -> Result<Vec<Step>> {
        if v.kind() != ControlKind::Constant {
            return Err(Error::InvalidInput(
                "the auxiliary system takes a piecewise-constant control".into(),
            ));
        }
        let r = self.params.rate_bound;
        if let Some(bad) = v.rates().into_iter().find(|x| x.abs() >= r) {
            return Err(Error::InvalidInput(format!(
                "|v| = {} violates the rate bound {r}",
                bad.abs()
            )));
        }
        let l0 = self.params.ell0;
        let mut steps = Vec::new();
        for k in 0..v.segment_count() {
            let (a, b) = v.segment_bounds(k);
            let (lo, hi) = (a.max(t0), b.min(t1));
            if hi > lo {
                steps.push(Step {
                    dt: hi - lo,
                    drift: 1.0 / (l0 * l0),
                    drive: v.rate(k) / l0,
                    t_end: hi,
                });
            }
        }
        Ok(steps)
    }

    /// Exponential-midpoint steps of the transformed system on `[t0, t1]`; pieces
    /// with zero rate have constant coefficients and take one exact step.
    pub(crate) fn transformed_steps(
        &self,
        f: &PiecewiseControl,
        t0: f64,
        t1: f64,
        stepping: Stepping,
    ) -> Result<Vec<Step>> {
        if f.kind() != ControlKind::Linear {
            return Err(Error::InvalidInput(
                "the moving-box system takes a piecewise-linear control".into(),
            ));
        }
        stepping.validate()?;
        let mut steps = Vec::new();
        for k in 0..f.segment_count() {
            let (a, b) = f.segment_bounds(k);
            for t in [a, b] {
                let length = self.params.length_at(f.value_in_segment(k, t));
                if length <= 0.0 {
                    return Err(Error::WallCollision { time: t, length });
                }
            }
            let (lo, hi) = (a.max(t0), b.min(t1));
            if hi <= lo {
                continue;
            }
            let rate = f.rate(k);
            // constant coefficients: a single exponential is exact
            let count = if rate == 0.0 {
                1
            } else {
                stepping.substeps(hi - lo)
            };
            let dt = (hi - lo) / count as f64;
            for s in 0..count {
                let mid = lo + (s as f64 + 0.5) * dt;
                let length = self.params.length_at(f.value_in_segment(k, mid));
                steps.push(Step {
                    dt,
                    drift: 1.0 / (length * length),
                    drive: rate / length,
                    t_end: if s + 1 == count {
                        hi
                    } else {
                        lo + (s + 1) as f64 * dt
                    },
                });
            }
        }
        Ok(steps)
    }

    fn product(&self, steps: &[Step], cache: bool) -> CMatrix {
        let n = self.dim();
        let mut memo: HashMap<(u64, u64), HermitianEigen> = HashMap::new();
        let mut u = CMatrix::identity(n, n);
        for s in steps {
            let key = (s.drift.to_bits(), s.drive.to_bits());
            let step_u = if cache {
                memo.entry(key)
                    .or_insert_with(|| HermitianEigen::new(&self.hamiltonian(s.drift, s.drive)))
                    .propagator(s.dt)
            } else {
                HermitianEigen::new(&self.hamiltonian(s.drift, s.drive)).propagator(s.dt)
            };
            u = step_u * u;
        }
        u
    }

    fn oriented(
        &self,
        span: (f64, f64),
        forward: impl Fn(f64, f64) -> Result<CMatrix>,
    ) -> Result<Propagator> {
        let (s, t) = span;
        let matrix = if s <= t {
            forward(s, t)?
        } else {
            forward(t, s)?.adjoint()
        };
        Ok(Propagator {
            matrix,
            t_from: s,
            t_to: t,
        })
    }

    /// `U(t, s)` of the auxiliary system for `span = (s, t)`, as an ordered product
    /// of exact segment exponentials (decompositions cached per control value).
    pub fn propagate_auxiliary(
        &self,
        v: &PiecewiseControl,
        span: (f64, f64),
    ) -> Result<Propagator> {
        Self::check_span(v, span)?;
        self.oriented(span, |a, b| {
            Ok(self.product(&self.auxiliary_steps(v, a, b)?, true))
        })
    }

    /// `U(t, s)` of the moving-box system in the reference frame, exponential midpoint
    /// rule sub-stepped inside every linear piece.
    pub fn propagate_transformed(
        &self,
        f: &PiecewiseControl,
        span: (f64, f64),
        stepping: Stepping,
    ) -> Result<Propagator> {
        Self::check_span(f, span)?;
        self.oriented(span, |a, b| {
            Ok(self.product(&self.transformed_steps(f, a, b, stepping)?, false))
        })
    }

    /// Evolve a reference-frame state through `steps`, recording `(t, coeffs)` after each
    /// step when `record` is set.
    pub(crate) fn evolve_steps(
        &self,
        steps: &[Step],
        psi: &CVector,
        mut record: Option<&mut Vec<(f64, CVector)>>,
    ) -> CVector {
        let mut psi = psi.clone();
        let mut memo: HashMap<(u64, u64, u64), CMatrix> = HashMap::new();
        for s in steps {
            let key = (s.drift.to_bits(), s.drive.to_bits(), s.dt.to_bits());
            let u = memo.entry(key).or_insert_with(|| {
                HermitianEigen::new(&self.hamiltonian(s.drift, s.drive)).propagator(s.dt)
            });
            psi = &*u * psi;
            if let Some(rec) = record.as_deref_mut() {
                rec.push((s.t_end, psi.clone()));
            }
        }
        psi
    }

    /// `U_v(T, 0) psi` for the auxiliary system.
    pub fn evolve_auxiliary(&self, v: &PiecewiseControl, psi: &CVector) -> Result<CVector> {
        let steps = self.auxiliary_steps(v, 0.0, v.horizon())?;
        Ok(self.evolve_steps(&steps, psi, None))
    }

    /// `U_f(T, 0) psi` for the transformed system.
    pub fn evolve_transformed(
        &self,
        f: &PiecewiseControl,
        psi: &CVector,
        stepping: Stepping,
    ) -> Result<CVector> {
        let steps = self.transformed_steps(f, 0.0, f.horizon(), stepping)?;
        Ok(self.evolve_steps(&steps, psi, None))
    }

    /// Evolve a physical state through the moving box driven by `f`.
    ///
    /// The returned state equals `W_final^dagger U_f(T, 0) W_initial phi0`. Because a
    /// state tagged with geometry `g` already stores the coefficients of `W_g phi`,
    /// both frame maps are identities on the coefficient vector: the result is the
    /// reference-frame action of `U_f` followed by relabeling the geometry to
    /// `(ell0 + lambda f(T), d0 + delta f(T))`.
    pub fn evolve_moving_box(
        &self,
        f: &PiecewiseControl,
        phi0: &SpectralState,
        stepping: Stepping,
    ) -> Result<SpectralState> {
        self.check_dim(phi0)?;
        let start = self.params.geometry_at(f.value_at(0.0))?;
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
        if !same(start.length, phi0.geometry.length) || !same(start.center, phi0.geometry.center) {
            return Err(Error::InvalidInput(format!(
                "initial state lives in box {:?}, the control starts in {:?}",
                phi0.geometry, start
            )));
        }
        let coeffs = self.evolve_transformed(f, &phi0.coeffs, stepping)?;
        let end = self.params.geometry_at(f.final_value())?;
        Ok(SpectralState::new(coeffs, end))
    }

    /// Like [`Self::evolve_moving_box`], sampling the state after every step.
    pub fn moving_box_trajectory(
        &self,
        f: &PiecewiseControl,
        phi0: &SpectralState,
        stepping: Stepping,
    ) -> Result<Vec<(f64, CVector)>> {
        self.check_dim(phi0)?;
        let steps = self.transformed_steps(f, 0.0, f.horizon(), stepping)?;
        let mut rec = vec![(0.0, phi0.coeffs.clone())];
        self.evolve_steps(&steps, &phi0.coeffs, Some(&mut rec));
        Ok(rec)
    }

    pub(crate) fn check_dim(&self, s: &SpectralState) -> Result<()> {
        if s.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "state has {} coefficients, model has {}",
                s.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

pub fn plus_norm(psi: &SpectralState) -> f64 {
    psi.plus_norm()
}

pub fn minus_norm(psi: &SpectralState) -> f64 {
    psi.minus_norm()
}

/// Global-phase-insensitive overlap `|<target, state>|`.
pub fn fidelity(target: &CVector, state: &CVector) -> f64 {
    inner(target, state).norm()
}

/// `min_theta ||target - e^{i theta} state||`.
pub fn phase_aligned_distance(target: &CVector, state: &CVector) -> f64 {
    let d2 = target.norm_squared() + state.norm_squared() - 2.0 * fidelity(target, state);
    d2.max(0.0).sqrt()
}
