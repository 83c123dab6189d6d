//! Constants of the stability estimate for families `H(t) = f0(t) Laplacian + f1(t) V`
//! and numerical checks of the propagator-difference bound and of the lifting
//! convergence.
//!
//! For the moving box `f0 = 1 / l(t)^2` and `f1 = -f'(t) / l(t)` with
//! `l(t) = ell0 + lambda f(t)`; for the auxiliary system `l = ell0`, `f' = v`.

use serde::Serialize;

use crate::control::lift_control;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::CVector;
use crate::operators::{weighted_norm, MotionParams, SpectralState};
use crate::propagation::{BoxModel, ControlKind, PiecewiseControl, Stepping};

/// Default Young-inequality parameter inside the constants.
pub const DEFAULT_EPSILON: f64 = 0.5;

/// `|<psi, A psi>| <= a <psi, Laplacian psi> + b ||psi||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormBound {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormBounds {
    pub momentum: FormBound,
    pub dilation: FormBound,
}

/// Relative form bounds of `p` and `x∘p` with respect to the Laplacian.
///
/// `|<psi, p psi>| <= ||psi|| ||p psi|| <= eps ||p psi||^2 + ||psi||^2 / (4 eps)`;
/// for `x∘p`, `|<psi, x∘p psi>| = |Re <x psi, p psi>| <= ||psi|| ||p psi|| / 2`
/// since `|x| <= 1/2`, giving `b = 1 / (16 eps)`.
pub fn form_bound_constants(epsilon: f64) -> Result<FormBounds> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(FormBounds {
        momentum: FormBound {
            a: epsilon,
            b: 1.0 / (4.0 * epsilon),
        },
        dilation: FormBound {
            a: epsilon,
            b: 1.0 / (16.0 * epsilon),
        },
    })
}

/// Offset `b_V(eps)` for `V = lambda x∘p + delta p`, splitting `eps` evenly
/// over the weights: `(lambda + |delta|)(lambda / 16 + |delta| / 4) / eps`.
pub fn interaction_form_offset(lambda: f64, delta: f64, epsilon: f64) -> f64 {
    let w = lambda.abs() + delta.abs();
    w * (lambda.abs() / 16.0 + delta.abs() / 4.0) / epsilon
}

/// One piece on which `l(t) = length_start + length_slope (t - t0)` and `f' = rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientPiece {
    pub t0: f64,
    pub t1: f64,
    pub length_start: f64,
    pub length_slope: f64,
    pub rate: f64,
}

impl CoefficientPiece {
    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn length_at(&self, t: f64) -> f64 {
        self.length_start + self.length_slope * (t - self.t0)
    }

    pub fn length_end(&self) -> f64 {
        self.length_at(self.t1)
    }

    /// `(f0, f1)` at `t`.
    pub fn coefficients(&self, t: f64) -> (f64, f64) {
        let l = self.length_at(t);
        (1.0 / (l * l), -self.rate / l)
    }

    /// Piece restricted to `[a, b]` (must lie inside).
    fn restricted(&self, a: f64, b: f64) -> Self {
        Self {
            t0: a,
            t1: b,
            length_start: self.length_at(a),
            ..*self
        }
    }

    /// `||f0'||_{L1} + ||f1'||_{L1}` on the piece (both are monotone).
    fn derivative_l1(&self) -> f64 {
        let (a0, a1) = self.coefficients(self.t0);
        let (b0, b1) = self.coefficients(self.t1);
        (b0 - a0).abs() + (b1 - a1).abs()
    }
}

/// Coefficient functions of a Hamiltonian family on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientFamily {
    pub lambda: f64,
    pub delta: f64,
    pub pieces: Vec<CoefficientPiece>,
}

impl CoefficientFamily {
    /// Auxiliary system driven by a piecewise-constant `v`.
    pub fn auxiliary(params: &MotionParams, v: &PiecewiseControl) -> Result<Self> {
        if v.kind() != ControlKind::Constant {
            return Err(Error::InvalidInput(
                "auxiliary family needs a piecewise-constant control".into(),
            ));
        }
        let pieces = (0..v.segment_count())
            .map(|k| {
                let (t0, t1) = v.segment_bounds(k);
                CoefficientPiece {
                    t0,
                    t1,
                    length_start: params.ell0,
                    length_slope: 0.0,
                    rate: v.rate(k),
                }
            })
            .collect();
        Self::validated(params, pieces)
    }

    /// Moving-box family of a piecewise-linear wall motion `f`.
    pub fn moving_box(params: &MotionParams, f: &PiecewiseControl) -> Result<Self> {
        if f.kind() != ControlKind::Linear {
            return Err(Error::InvalidInput(
                "moving-box family needs a piecewise-linear control".into(),
            ));
        }
        let pieces = (0..f.segment_count())
            .map(|k| {
                let (t0, t1) = f.segment_bounds(k);
                CoefficientPiece {
                    t0,
                    t1,
                    length_start: params.length_at(f.value_in_segment(k, t0)),
                    length_slope: params.lambda * f.rate(k),
                    rate: f.rate(k),
                }
            })
            .collect();
        Self::validated(params, pieces)
    }

    fn validated(params: &MotionParams, pieces: Vec<CoefficientPiece>) -> Result<Self> {
        for p in &pieces {
            for (t, l) in [(p.t0, p.length_start), (p.t1, p.length_end())] {
                if l <= 0.0 {
                    return Err(Error::WallCollision { time: t, length: l });
                }
            }
        }
        Ok(Self {
            lambda: params.lambda,
            delta: params.delta,
            pieces,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.t1)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.pieces.iter().map(|p| p.t0).collect();
        b.push(self.horizon());
        b
    }

    /// The family restricted to `[a, b]`.
    pub fn restricted(&self, a: f64, b: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .filter(|p| p.t1 > a && p.t0 < b)
            .map(|p| p.restricted(p.t0.max(a), p.t1.min(b)))
            .collect();
        Self { pieces, ..*self }
    }

    /// `inf f0`.
    pub fn mu(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                let l = p.length_start.max(p.length_end());
                1.0 / (l * l)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `sup_t max(|f0|, |f1|)`.
    pub fn sup_coefficient(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| [p.coefficients(p.t0), p.coefficients(p.t1)])
            .fold(0.0, |m, (a, b)| m.max(a.abs()).max(b.abs()))
    }

    /// `sum_i ||f_i'||_{L1}` over the whole interval, jumps at breakpoints excluded.
    pub fn derivative_l1(&self) -> f64 {
        self.pieces
            .iter()
            .map(CoefficientPiece::derivative_l1)
            .sum()
    }

    fn piece_at(&self, t: f64) -> &CoefficientPiece {
        let k = self
            .pieces
            .partition_point(|p| p.t1 <= t)
            .min(self.pieces.len() - 1);
        &self.pieces[k]
    }
}

/// The bundle `(M, mu, b(eps), m, K, c, L)` of the stability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityConstants {
    pub epsilon: f64,
    #[serde(rename = "M")]
    pub sup_coefficient: f64,
    pub mu: f64,
    pub b_eps: f64,
    pub m: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub c: f64,
    /// `sup` over the families of `sum_i ||f_i'||_{L1}`.
    pub derivative_l1: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

/// Constants for a single family, see [`compute_uniform_constants`].
pub fn compute_constants(family: &CoefficientFamily, epsilon: f64) -> Result<StabilityConstants> {
    compute_uniform_constants(std::slice::from_ref(family), epsilon)
}

/// Constants valid uniformly for several families sharing `V` (one perturbation, `nu = 1`):
/// `b(eps) = b_V(eps mu / M)`, `m = M b(eps)`, `K = max{1, eps, b_V(eps)}`,
/// `c = max{M + mu eps, 1 + 2m, 1 / (mu (1 - eps)), 1}`,
/// `L = c^8 exp(2 c^2 K (nu + 1) sup ||f'||_{L1})`.
pub fn compute_uniform_constants(
    families: &[CoefficientFamily],
    epsilon: f64,
) -> Result<StabilityConstants> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let first = families
        .first()
        .filter(|f| !f.pieces.is_empty())
        .ok_or_else(|| Error::InvalidInput("no coefficient family given".into()))?;
    let (lambda, delta) = (first.lambda, first.delta);
    let mu = families
        .iter()
        .map(CoefficientFamily::mu)
        .fold(f64::INFINITY, f64::min);
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "leading coefficient must stay positive (mu = {mu})"
        )));
    }
    let sup = families
        .iter()
        .map(CoefficientFamily::sup_coefficient)
        .fold(0.0, f64::max);
    let nu = 1.0;
    let b_eps = interaction_form_offset(lambda, delta, epsilon * mu / (nu * sup));
    let m = sup * b_eps;
    let k = 1f64
        .max(epsilon)
        .max(interaction_form_offset(lambda, delta, epsilon));
    let c = (sup + mu * epsilon)
        .max(1.0 + 2.0 * m)
        .max(1.0 / (mu * (1.0 - epsilon)))
        .max(1.0);
    let derivative_l1 = families
        .iter()
        .map(CoefficientFamily::derivative_l1)
        .fold(0.0, f64::max);
    let l = c.powi(8) * (2.0 * c * c * k * (nu + 1.0) * derivative_l1).exp();
    Ok(StabilityConstants {
        epsilon,
        sup_coefficient: sup,
        mu,
        b_eps,
        m,
        k,
        c,
        derivative_l1,
        l,
    })
}

/// `int_a^b dt / l(t)^p` for `l` linear on `[a, b]`, `p` in {1, 2}.
fn inverse_power_integral(p: &CoefficientPiece, a: f64, b: f64, power: i32) -> f64 {
    let (la, lb) = (p.length_at(a), p.length_at(b));
    let k = p.length_slope;
    if k.abs() * (b - a) <= 1e-12 * la {
        return (b - a) / la.powi(power);
    }
    match power {
        1 => (lb / la).ln() / k,
        _ => (1.0 / la - 1.0 / lb) / k,
    }
}

/// `int |f_{x,i} - f_{y,i}|` over `[a, b]` for `i = 0, 1`, where both families are
/// single linear-length pieces there. Each difference has the sign of
/// `l_y - l_x` (same rate on the piece) up to the zeros of a low-degree polynomial,
/// handled by splitting at the roots.
fn coefficient_difference_l1(x: &CoefficientPiece, y: &CoefficientPiece, a: f64, b: f64) -> f64 {
    let mut cuts = vec![a, b];
    // l_x - l_y is linear: one root at most
    let (da, db) = (
        x.length_at(a) - y.length_at(a),
        x.length_at(b) - y.length_at(b),
    );
    if da * db < 0.0 {
        cuts.push(a + (b - a) * da / (da - db));
    }
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (s, t) = (w[0], w[1]);
        if t <= s {
            continue;
        }
        let d0 = inverse_power_integral(x, s, t, 2) - inverse_power_integral(y, s, t, 2);
        let d1 = x.rate * inverse_power_integral(x, s, t, 1)
            - y.rate * inverse_power_integral(y, s, t, 1);
        total += d0.abs() + d1.abs();
    }
    total
}

/// Which family the lifted control `f_n` is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    Auxiliary,
    Lifted(usize),
}

/// Both sides of the stability inequality on one piece of the common refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentBound {
    pub t0: f64,
    pub t1: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub coefficient_l1: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl SegmentBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCheck {
    pub segments: Vec<SegmentBound>,
}

impl StabilityCheck {
    pub fn holds(&self) -> bool {
        self.segments.iter().all(SegmentBound::holds)
    }

    pub fn worst_ratio(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.rhs > 0.0)
            .map(|s| s.lhs / s.rhs)
            .fold(0.0, f64::max)
    }
}

fn common_refinement(a: &[f64], b: &[f64]) -> Vec<f64> {
    let tol = 1e-12 * a.last().copied().unwrap_or(1.0).abs().max(1.0);
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| (*x - *y).abs() <= tol);
    all
}

/// Evaluate `||(U_n - U_other) psi_a||_-` against
/// `L ||psi_a||_+ sum_i ||f_{n,i} - f_{other,i}||_{L1}` on every piece of the common
/// refinement, where `psi_a` is `psi` evolved by the lifted family to the piece start
/// and `L` uses constants uniform over both families on that piece.
pub fn verify_stability_bound(
    model: &BoxModel,
    v: &PiecewiseControl,
    n: usize,
    other: Comparison,
    psi: &SpectralState,
    epsilon: f64,
    stepping: Stepping,
) -> Result<StabilityCheck> {
    model.check_dim(psi)?;
    let params = &model.params;
    let f_n = lift_control(v, n)?;
    let fam_n = CoefficientFamily::moving_box(params, &f_n)?;
    let (fam_o, f_o) = match other {
        Comparison::Auxiliary => (CoefficientFamily::auxiliary(params, v)?, None),
        Comparison::Lifted(m) => {
            let f_m = lift_control(v, m)?;
            (CoefficientFamily::moving_box(params, &f_m)?, Some(f_m))
        }
    };
    let cuts = common_refinement(&fam_n.breakpoints(), &fam_o.breakpoints());
    let mut state: CVector = psi.coeffs.clone();
    let mut segments = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let (pn, po) = (fam_n.piece_at(mid), fam_o.piece_at(mid));
        let u_n = model.propagate_transformed(&f_n, (a, b), stepping)?;
        let u_o = match &f_o {
            None => model.propagate_auxiliary(v, (a, b))?,
            Some(f_m) => model.propagate_transformed(f_m, (a, b), stepping)?,
        };
        let diff = (&u_n.matrix - &u_o.matrix) * &state;
        let lhs = weighted_norm(&diff, -1.0);
        let constants =
            compute_uniform_constants(&[fam_n.restricted(a, b), fam_o.restricted(a, b)], epsilon)?;
        let coefficient_l1 = coefficient_difference_l1(pn, po, a, b);
        let rhs = constants.l * weighted_norm(&state, 1.0) * coefficient_l1;
        segments.push(SegmentBound {
            t0: a,
            t1: b,
            lhs,
            rhs,
            coefficient_l1,
            l: constants.l,
        });
        state = &u_n.matrix * state;
    }
    Ok(StabilityCheck { segments })
}

/// `G_n = (1/ell0^2 - 1/l^2) + v (1/ell0 - 1/l)` on one lifted piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GnNorm {
    pub t0: f64,
    pub t1: f64,
    pub l1: f64,
}

/// `||G_n||_{L1}` on every piece of the lift `f_n` of `v` (closed form, split at
/// the sign changes of `G_n`).
pub fn g_n_l1_norms(params: &MotionParams, v: &PiecewiseControl, n: usize) -> Result<Vec<GnNorm>> {
    let f_n = lift_control(v, n)?;
    let fam = CoefficientFamily::moving_box(params, &f_n)?;
    let l0 = params.ell0;
    Ok(fam
        .pieces
        .iter()
        .map(|p| {
            let vv = p.rate;
            // G = (l - l0)(l + l0 + v l0 l) / (l^2 l0^2): second root where l (1 + v l0) = -l0
            let mut cuts = vec![p.t0, p.t1];
            if p.length_slope != 0.0 && 1.0 + vv * l0 != 0.0 {
                let root_len = -l0 / (1.0 + vv * l0);
                let t = p.t0 + (root_len - p.length_start) / p.length_slope;
                if t > p.t0 && t < p.t1 {
                    cuts.insert(1, t);
                }
            }
            let l1 = cuts
                .windows(2)
                .map(|w| {
                    let (s, t) = (w[0], w[1]);
                    let constant = (1.0 / (l0 * l0) + vv / l0) * (t - s);
                    (constant
                        - inverse_power_integral(p, s, t, 2)
                        - vv * inverse_power_integral(p, s, t, 1))
                    .abs()
                })
                .sum();
            GnNorm {
                t0: p.t0,
                t1: p.t1,
                l1,
            }
        })
        .collect())
}

/// Errors of the lifted evolution against the auxiliary one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    /// `(n, minus-norm error)`.
    pub rows: Vec<(usize, f64)>,
    /// Least-squares slope of `ln error` against `ln n` (absent if any error is 0).
    pub slope: Option<f64>,
}

/// `||U_{f_n}(T, 0) psi0 - U_v(T, 0) psi0||_-` for each `n` (computed per `exec`).
pub fn lifting_convergence_study(
    model: &BoxModel,
    v: &PiecewiseControl,
    psi0: &SpectralState,
    n_list: &[usize],
    stepping: Stepping,
    exec: Execution,
) -> Result<ConvergenceStudy> {
    model.check_dim(psi0)?;
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::InvalidInput(
            "n_list must be positive and strictly increasing".into(),
        ));
    }
    let reference = model.evolve_auxiliary(v, &psi0.coeffs)?;
    let errors = exec.map(n_list.to_vec(), |n| -> Result<(usize, f64)> {
        let f_n = lift_control(v, n)?;
        let psi = model.evolve_transformed(&f_n, &psi0.coeffs, stepping)?;
        Ok((n, weighted_norm(&(psi - &reference), -1.0)))
    });
    let rows = errors.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceStudy {
        slope: log_log_slope(&rows),
        rows,
    })
}

/// Least-squares slope of `ln e` against `ln n`.
pub fn log_log_slope(rows: &[(usize, f64)]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|&(_, e)| e.is_nan() || e <= 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    let k = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / k,
        pts.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
