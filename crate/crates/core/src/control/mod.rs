//! State-transfer synthesis: piecewise-constant controls for the auxiliary system,
//! their piecewise-linear lift to wall motions, and the full moving-wall pipeline.

mod grape;
mod lifting;

pub use grape::{GrapeSettings, StartOutcome};
pub use lifting::{append_final_segment, lift_control, CoastFit, FinalSegment};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::operators::{BasisTruncation, BoxGeometry, MotionParams, Parity, SpectralState};
use crate::propagation::{
    fidelity, phase_aligned_distance, BoxModel, LinearPiece, PiecewiseControl, Stepping,
};

/// Fidelity below which every start counts as stagnated.
pub const STAGNATION_FIDELITY: f64 = 0.5;

/// Wall-motion parameters reaching box `(ell1, d1)` from `(ell0, d0)` with
/// `lambda = 1` and a single displacement `f(T) = ell1 - ell0`.
///
/// A pure translation (`ell1 = ell0`, `d1 != d0`) is outside the reach of the
/// method and reported as [`Error::Unsupported`].
pub fn reduce_motion(
    ell0: f64,
    d0: f64,
    ell1: f64,
    d1: f64,
    rate_bound: f64,
) -> Result<MotionParams> {
    if !(ell0 > 0.0 && ell1 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "box lengths must be positive (got {ell0}, {ell1})"
        )));
    }
    let (dl, dd) = (ell1 - ell0, d1 - d0);
    let delta = match (dl == 0.0, dd == 0.0) {
        (true, true) => 1.0,
        (false, true) => 0.0,
        (false, false) => dd / dl,
        (true, false) => {
            return Err(Error::Unsupported(
                "pure translation of a box with fixed length: the reduction needs a change of \
                 length, and whether rigid shifts alone are controllable is an open problem"
                    .into(),
            ))
        }
    };
    MotionParams::new(1.0, delta, ell0, d0, rate_bound)
}

/// Approximate transfer `initial -> target` between two box geometries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferProblem {
    pub initial: SpectralState,
    pub target: SpectralState,
    pub epsilon: f64,
    pub params: MotionParams,
}

impl TransferProblem {
    /// Build the problem, deriving the motion with [`reduce_motion`].
    pub fn new(
        initial: SpectralState,
        target: SpectralState,
        epsilon: f64,
        rate_bound: f64,
    ) -> Result<Self> {
        let (g0, g1) = (initial.geometry, target.geometry);
        let params = reduce_motion(g0.length, g0.center, g1.length, g1.center, rate_bound)?;
        Self::with_params(initial, target, epsilon, params)
    }

    /// Build the problem with explicit motion parameters.
    pub fn with_params(
        initial: SpectralState,
        target: SpectralState,
        epsilon: f64,
        params: MotionParams,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if initial.dim() != target.dim() {
            return Err(Error::InvalidInput(
                "initial and target use different truncations".into(),
            ));
        }
        BasisTruncation::new(initial.dim())?;
        let (n0, n1) = (initial.norm(), target.norm());
        if n0 == 0.0 || (n0 - n1).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "initial and target norms must agree and be nonzero (got {n0}, {n1})"
            )));
        }
        let start = params.geometry_at(0.0)?;
        if !same_geometry(start, initial.geometry) {
            return Err(Error::InvalidInput(format!(
                "initial state lives in {:?}, the motion starts in {start:?}",
                initial.geometry
            )));
        }
        if params.delta == 0.0 {
            for (name, s) in [("initial", &initial), ("target", &target)] {
                let even = s.sector_probability(Parity::Even) / (n0 * n0);
                if even.min(1.0 - even) > 1e-10 {
                    return Err(Error::InvalidInput(format!(
                        "a pure dilation preserves parity: the {name} state must lie in one parity sector"
                    )));
                }
            }
        }
        let problem = Self {
            initial,
            target,
            epsilon,
            params,
        };
        let end = params.geometry_at(problem.final_displacement()?)?;
        if !same_geometry(end, problem.target.geometry) {
            return Err(Error::InvalidInput(format!(
                "the motion ends in {end:?}, the target lives in {:?}",
                problem.target.geometry
            )));
        }
        Ok(problem)
    }

    pub fn truncation(&self) -> BasisTruncation {
        BasisTruncation::new(self.initial.dim()).expect("validated")
    }

    /// Prescribed final displacement `f(T)`.
    pub fn final_displacement(&self) -> Result<f64> {
        let p = &self.params;
        let g1 = self.target.geometry;
        if p.lambda > 0.0 {
            Ok((g1.length - p.ell0) / p.lambda)
        } else if p.delta != 0.0 {
            Ok((g1.center - p.d0) / p.delta)
        } else if same_geometry(g1, self.initial.geometry) {
            Ok(0.0)
        } else {
            Err(Error::InvalidInput(
                "lambda = delta = 0 cannot move the walls".into(),
            ))
        }
    }
}

fn same_geometry(a: BoxGeometry, b: BoxGeometry) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs()));
    close(a.length, b.length) && close(a.center, b.center)
}

/// Best piecewise-constant control found by the multistart ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct PcSynthesis {
    pub control: PiecewiseControl,
    /// `|<target, U_v(T, 0) initial>|` for normalized states.
    pub fidelity: f64,
    pub start_index: usize,
}

/// Search `segments` amplitudes on `[0, horizon]` maximizing the auxiliary
/// transfer fidelity of `problem`. The error budget is not enforced here.
pub fn synthesize_pc_control(
    problem: &TransferProblem,
    segments: usize,
    horizon: f64,
    settings: &GrapeSettings,
) -> Result<PcSynthesis> {
    let model = BoxModel::new(problem.params, problem.truncation());
    synthesize_towards(
        &model,
        &problem.initial.coeffs,
        &problem.target.coeffs,
        segments,
        horizon,
        settings,
    )
}

fn synthesize_towards(
    model: &BoxModel,
    initial: &CVector,
    target: &CVector,
    segments: usize,
    horizon: f64,
    settings: &GrapeSettings,
) -> Result<PcSynthesis> {
    if segments == 0 || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need segments >= 1 and horizon > 0 (got {segments}, {horizon})"
        )));
    }
    let initial = initial.unscale(initial.norm());
    let target = target.unscale(target.norm());
    let objective = grape::Objective {
        model,
        initial: &initial,
        target: &target,
        dt: horizon / segments as f64,
        bound: model.params.rate_bound,
    };
    let best = grape::multistart(&objective, segments, settings);
    if best.fidelity < STAGNATION_FIDELITY {
        return Err(Error::NoImprovement {
            best_fidelity: best.fidelity,
            threshold: STAGNATION_FIDELITY,
        });
    }
    Ok(PcSynthesis {
        control: PiecewiseControl::uniform_constant(horizon, best.amplitudes)?,
        fidelity: best.fidelity,
        start_index: best.index,
    })
}

/// Escalation budgets of [`solve_transfer`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOptions {
    pub segments: Vec<usize>,
    pub horizons: Vec<f64>,
    pub lift_start: usize,
    pub lift_max: usize,
    pub grape: GrapeSettings,
    pub stepping: Stepping,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            segments: vec![20, 40, 80],
            horizons: vec![2.0, 5.0, 10.0],
            lift_start: 4,
            lift_max: 1024,
            grape: GrapeSettings::default(),
            stepping: Stepping::default(),
        }
    }
}

/// Post-hoc check of the returned wall motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstraintReport {
    pub starts_at_zero: bool,
    pub reaches_final_value: bool,
    pub displacement_within_bound: bool,
    pub rate_within_bound: bool,
    pub length_positive: bool,
}

impl ConstraintReport {
    pub fn all(&self) -> bool {
        self.starts_at_zero
            && self.reaches_final_value
            && self.displacement_within_bound
            && self.rate_within_bound
            && self.length_positive
    }
}

/// Check `f(0) = 0`, `f(T) = a`, `|f| < ell0 / lambda` before the final value is
/// reached, `|f'| < r` and a positive box length throughout.
pub fn check_constraints(f: &PiecewiseControl, a: f64, params: &MotionParams) -> ConstraintReport {
    let bound = params.displacement_bound();
    let d = f.segment_count();
    let mut displacement_ok = true;
    let mut length_ok = true;
    for k in 0..d {
        let (t0, t1) = f.segment_bounds(k);
        let (x0, x1) = (f.value_in_segment(k, t0), f.value_in_segment(k, t1));
        length_ok &= params.length_at(x0) > 0.0 && params.length_at(x1) > 0.0;
        // values equal to the final value are the prescribed endpoint, not an excursion
        for x in [x0, x1] {
            if x != a && x.abs() >= bound {
                displacement_ok = false;
            }
        }
    }
    displacement_ok &= a.abs() <= bound;
    ConstraintReport {
        starts_at_zero: f.value_at(0.0).abs() <= 1e-14,
        reaches_final_value: (f.final_value() - a).abs() <= 1e-12,
        displacement_within_bound: displacement_ok,
        rate_within_bound: f.sup_abs_rate() < params.rate_bound,
        length_positive: length_ok,
    }
}

/// One escalation step of [`solve_transfer`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub segments: usize,
    pub horizon: f64,
    pub auxiliary_fidelity: Option<f64>,
    pub lift_n: Option<usize>,
    pub lifting_error: Option<f64>,
    pub achieved_error: Option<f64>,
}

/// Output of the moving-wall pipeline; every number is measured.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub v: PiecewiseControl,
    pub f: PiecewiseControl,
    pub n_refine: usize,
    pub achieved_error: f64,
    pub auxiliary_fidelity: f64,
    pub lifting_error: f64,
    pub final_geometry: BoxGeometry,
    pub final_state: SpectralState,
    pub ramp_duration: f64,
    pub coast_duration: f64,
    pub constraints: ConstraintReport,
    pub attempts: Vec<Attempt>,
}

/// Full pipeline: synthesize `v` for the auxiliary system (aimed at the target
/// pulled back through the final ramp), lift it with doubling `n` until it tracks
/// the auxiliary evolution within `epsilon / 2`, append the ramp to `f(T)` and the
/// coast, then measure the moving-box error. Budgets escalate over horizons and
/// segment counts until the measured error is below `epsilon`.
pub fn solve_transfer(
    problem: &TransferProblem,
    options: &TransferOptions,
) -> Result<SynthesisResult> {
    let params = problem.params;
    let eps = problem.epsilon;
    let model = BoxModel::new(params, problem.truncation());
    let a = problem.final_displacement()?;
    let bound = params.displacement_bound();
    if params.length_at(a) <= 0.0 || a.abs() > bound {
        return Err(Error::InfeasibleRamp {
            value: a,
            limit: bound,
        });
    }
    let psi0 = &problem.initial.coeffs;
    let psi1 = &problem.target.coeffs;

    // target seen from before the nominal ramp 0 -> a
    let speed = 0.5 * params.rate_bound;
    let aux_target = if a != 0.0 {
        let ramp = PiecewiseControl::linear(
            vec![0.0, a.abs() / speed],
            vec![LinearPiece {
                offset: 0.0,
                slope: a.signum() * speed,
            }],
        )?;
        let u = model.propagate_transformed(&ramp, (0.0, ramp.horizon()), options.stepping)?;
        u.matrix.adjoint() * psi1
    } else {
        psi1.clone()
    };

    let mut attempts = Vec::new();
    let mut last_stagnation = None;
    for &horizon in &options.horizons {
        for &segments in &options.segments {
            let mut attempt = Attempt {
                segments,
                horizon,
                auxiliary_fidelity: None,
                lift_n: None,
                lifting_error: None,
                achieved_error: None,
            };
            let synth = match synthesize_towards(
                &model,
                psi0,
                &aux_target,
                segments,
                horizon,
                &options.grape,
            ) {
                Ok(s) => s,
                Err(e @ Error::NoImprovement { .. }) => {
                    last_stagnation = Some(e);
                    attempts.push(attempt);
                    continue;
                }
                Err(e) => return Err(e),
            };
            attempt.auxiliary_fidelity = Some(synth.fidelity);
            let aux_error = (2.0 * (1.0 - synth.fidelity)).max(0.0).sqrt();
            if aux_error > 0.5 * eps {
                attempts.push(attempt);
                continue;
            }
            let psi_aux = model.evolve_auxiliary(&synth.control, psi0)?;
            let mut lifted = None;
            let mut n = options.lift_start.max(1);
            while n <= options.lift_max {
                let f_n = lift_control(&synth.control, n)?;
                let psi_n = model.evolve_transformed(&f_n, psi0, options.stepping)?;
                let err = (&psi_n - &psi_aux).norm();
                attempt.lift_n = Some(n);
                attempt.lifting_error = Some(err);
                if err <= 0.5 * eps {
                    lifted = Some((n, f_n, psi_n, err));
                    break;
                }
                n *= 2;
            }
            let Some((n, f_n, psi_n, lifting_error)) = lifted else {
                attempts.push(attempt);
                continue;
            };
            let fit = CoastFit {
                state: &psi_n,
                target: psi1,
                stepping: options.stepping,
            };
            let tail = append_final_segment(&model, &f_n, a, eps, Some(fit))?;
            let final_state =
                model.evolve_moving_box(&tail.control, &problem.initial, options.stepping)?;
            let achieved_error = phase_aligned_distance(psi1, &final_state.coeffs);
            attempt.achieved_error = Some(achieved_error);
            attempts.push(attempt);
            if achieved_error < eps {
                let constraints = check_constraints(&tail.control, a, &params);
                if !constraints.all() {
                    return Err(Error::InvalidInput(format!(
                        "synthesized motion violates its constraints: {constraints:?}"
                    )));
                }
                return Ok(SynthesisResult {
                    v: synth.control,
                    f: tail.control,
                    n_refine: n,
                    achieved_error,
                    auxiliary_fidelity: synth.fidelity,
                    lifting_error,
                    final_geometry: final_state.geometry,
                    final_state,
                    ramp_duration: tail.ramp_duration,
                    coast_duration: tail.coast_duration,
                    constraints,
                    attempts,
                });
            }
        }
    }
    if attempts.iter().all(|a| a.auxiliary_fidelity.is_none()) {
        if let Some(e) = last_stagnation {
            return Err(e);
        }
    }
    Err(Error::BudgetExceeded(format!(
        "no budget in {} attempts reached error {eps}",
        attempts.len()
    )))
}

/// Phase-insensitive overlap of normalized states.
pub fn normalized_fidelity(target: &CVector, state: &CVector) -> f64 {
    fidelity(target, state) / (target.norm() * state.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motion_reduction_branches() {
        let p = reduce_motion(1.0, 0.0, 2.0, 1.0, 2.0).unwrap();
        assert_eq!((p.lambda, p.delta), (1.0, 1.0));
        let p = reduce_motion(1.0, 0.0, 1.0, 0.0, 2.0).unwrap();
        assert_eq!((p.lambda, p.delta), (1.0, 1.0));
        let p = reduce_motion(1.0, 0.0, 2.0, 0.0, 2.0).unwrap();
        assert_eq!((p.lambda, p.delta), (1.0, 0.0));
        let p = reduce_motion(1.0, 0.0, 3.0, -1.0, 2.0).unwrap();
        assert_eq!(p.delta, -0.5);
        let err = reduce_motion(1.0, 0.0, 1.0, 0.5, 2.0).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn problem_validation() {
        let n = BasisTruncation::new(8).unwrap();
        let g0 = BoxGeometry::new(1.0, 0.0).unwrap();
        let g1 = BoxGeometry::new(2.0, 0.0).unwrap();
        let ground = SpectralState::ground(n, g0);
        let excited = SpectralState::basis(2, n, g1).unwrap();
        // even -> odd under pure dilation is a well-posed (if hopeless) problem
        assert!(TransferProblem::new(ground.clone(), excited, 0.1, 2.0).is_ok());
        let mut mixed = SpectralState::ground(n, g1);
        mixed.coeffs[0] = num_complex::Complex64::new(0.6, 0.0);
        mixed.coeffs[1] = num_complex::Complex64::new(0.8, 0.0);
        assert!(TransferProblem::new(ground.clone(), mixed, 0.1, 2.0).is_err());
        let scaled = SpectralState::new(ground.coeffs.scale(2.0), g1);
        assert!(TransferProblem::new(ground, scaled, 0.1, 2.0).is_err());
    }

    #[test]
    fn constraint_report_flags_violations() {
        let params = MotionParams::new(1.0, 1.0, 1.0, 0.0, 2.0).unwrap();
        let good = PiecewiseControl::linear(
            vec![0.0, 1.0],
            vec![LinearPiece {
                offset: 0.0,
                slope: 1.0,
            }],
        )
        .unwrap();
        assert!(check_constraints(&good, 1.0, &params).all());
        let fast = PiecewiseControl::linear(
            vec![0.0, 0.25],
            vec![LinearPiece {
                offset: 0.0,
                slope: 4.0,
            }],
        )
        .unwrap();
        assert!(!check_constraints(&fast, 1.0, &params).rate_within_bound);
        let far = PiecewiseControl::linear(
            vec![0.0, 1.0, 2.0],
            vec![
                LinearPiece {
                    offset: 0.0,
                    slope: -1.5,
                },
                LinearPiece {
                    offset: -1.5,
                    slope: 1.5,
                },
            ],
        )
        .unwrap();
        let report = check_constraints(&far, 0.0, &params);
        assert!(!report.displacement_within_bound && !report.length_positive);
    }
}
