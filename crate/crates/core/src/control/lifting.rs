//! Piecewise-linear lifting of piecewise-constant controls and the final ramp.

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::propagation::{BoxModel, ControlKind, LinearPiece, PiecewiseControl, Stepping};

/// Sawtooth lift `f_n` of `v`: on every piece of the coarsest common refinement of
/// the uniform `n`-partition and `v`'s breakpoints, `f` starts at 0 with slope `v`.
/// Hence `f_n' = v` away from breakpoints and `|f_n| < r T / n`.
pub fn lift_control(v: &PiecewiseControl, n: usize) -> Result<PiecewiseControl> {
    if v.kind() != ControlKind::Constant {
        return Err(Error::InvalidInput(
            "only piecewise-constant controls can be lifted".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidInput("lifting needs n >= 1".into()));
    }
    let horizon = v.horizon();
    let merge_tol = 1e-12 * horizon;
    let mut points: Vec<f64> = v.breakpoints().to_vec();
    for k in 1..n {
        let t = horizon * k as f64 / n as f64;
        let near = points
            .binary_search_by(|p| p.total_cmp(&t))
            .map(|_| true)
            .unwrap_or_else(|i| {
                (i > 0 && t - points[i - 1] <= merge_tol)
                    || (i < points.len() && points[i] - t <= merge_tol)
            });
        if !near {
            let i = points.partition_point(|&p| p < t);
            points.insert(i, t);
        }
    }
    let pieces = points
        .windows(2)
        .map(|w| LinearPiece {
            offset: 0.0,
            slope: v.rate(v.segment_at(0.5 * (w[0] + w[1]))),
        })
        .collect();
    PiecewiseControl::linear(points, pieces)
}

/// Fit data for choosing the coast duration: the state before the appended
/// segments and the target it should match.
#[derive(Debug, Clone, Copy)]
pub struct CoastFit<'a> {
    pub state: &'a CVector,
    pub target: &'a CVector,
    pub stepping: Stepping,
}

/// A control extended by a ramp to the prescribed final value and a coast.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalSegment {
    pub control: PiecewiseControl,
    pub ramp_duration: f64,
    pub coast_duration: f64,
    /// Fidelity after the extension, when a fit was requested.
    pub fidelity: Option<f64>,
}

/// Append a ramp from `f(T)` to `a` at slope `±r/2` followed by a constant-`f`
/// coast whose length `tau` is chosen on one drift revival period
/// `2 (ell0 + lambda a)^2 / pi` to maximize the overlap with `fit.target`.
/// The coast is omitted whenever it cannot gain more than `tolerance / 2`.
pub fn append_final_segment(
    model: &BoxModel,
    f: &PiecewiseControl,
    a: f64,
    tolerance: f64,
    fit: Option<CoastFit<'_>>,
) -> Result<FinalSegment> {
    let params = model.params;
    if f.kind() != ControlKind::Linear {
        return Err(Error::InvalidInput(
            "the final segment extends a piecewise-linear control".into(),
        ));
    }
    if !a.is_finite() || params.length_at(a) <= 0.0 {
        return Err(Error::InfeasibleRamp {
            value: a,
            limit: -params.displacement_bound(),
        });
    }
    let start = f.final_value();
    let speed = 0.5 * params.rate_bound;
    let ramp_duration = (a - start).abs() / speed;
    let mut control = f.clone();
    if ramp_duration > 0.0 {
        let ramp = PiecewiseControl::linear(
            vec![0.0, ramp_duration],
            vec![LinearPiece {
                offset: start,
                slope: (a - start).signum() * speed,
            }],
        )?;
        control = control.append(&ramp)?;
    }

    let Some(fit) = fit else {
        return Ok(FinalSegment {
            control,
            ramp_duration,
            coast_duration: 0.0,
            fidelity: None,
        });
    };
    let mut state = fit.state.clone();
    if ramp_duration > 0.0 {
        let ramp_only = PiecewiseControl::linear(
            vec![0.0, ramp_duration],
            vec![LinearPiece {
                offset: start,
                slope: (a - start).signum() * speed,
            }],
        )?;
        state = model.evolve_transformed(&ramp_only, &state, fit.stepping)?;
    }
    let length = params.length_at(a);
    let omega: Vec<f64> = model
        .laplacian_eigenvalues()
        .iter()
        .map(|e| e / (length * length))
        .collect();
    let weights: Vec<_> = fit
        .target
        .iter()
        .zip(state.iter())
        .map(|(t, s)| t.conj() * s)
        .collect();
    let overlap = |tau: f64| -> f64 {
        weights
            .iter()
            .zip(&omega)
            .map(|(w, &om)| w * num_complex::Complex64::from_polar(1.0, -om * tau))
            .sum::<num_complex::Complex64>()
            .norm()
    };
    let period = 2.0 * length * length / std::f64::consts::PI;
    let grid = 16 * model.dim() * model.dim();
    let dtau = period / grid as f64;
    let (mut best_tau, mut best) = (0.0, overlap(0.0));
    for k in 1..grid {
        let tau = k as f64 * dtau;
        let val = overlap(tau);
        if val > best {
            best = val;
            best_tau = tau;
        }
    }
    if best_tau > 0.0 {
        // golden-section refinement inside the bracketing grid cell pair
        let (mut lo, mut hi) = (best_tau - dtau, best_tau + dtau);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if overlap(x1) >= overlap(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let tau = 0.5 * (lo + hi);
        if overlap(tau) > best {
            best = overlap(tau);
            best_tau = tau;
        }
    }
    let no_coast = overlap(0.0);
    let coast_duration = if best - no_coast > 0.5 * tolerance {
        best_tau
    } else {
        0.0
    };
    let fidelity = if coast_duration > 0.0 { best } else { no_coast };
    if coast_duration > 0.0 {
        let coast = PiecewiseControl::linear(
            vec![0.0, coast_duration],
            vec![LinearPiece {
                offset: a,
                slope: 0.0,
            }],
        )?;
        control = control.append(&coast)?;
    }
    Ok(FinalSegment {
        control,
        ramp_duration,
        coast_duration,
        fidelity: Some(fidelity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_control_lifts_to_ramp_and_sawtooth() {
        let v = PiecewiseControl::uniform_constant(2.0, vec![0.75]).unwrap();
        let f1 = lift_control(&v, 1).unwrap();
        assert_eq!(f1.segment_count(), 1);
        assert!((f1.final_value() - 1.5).abs() < 1e-15);
        let f2 = lift_control(&v, 2).unwrap();
        assert_eq!(f2.breakpoints(), &[0.0, 1.0, 2.0]);
        assert!((f2.value_in_segment(0, 1.0) - 0.75).abs() < 1e-15);
        assert_eq!(f2.value_at(1.0), 0.0);
        assert!((f2.sup_abs_value() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn refinement_merges_shared_breakpoints() {
        let v = PiecewiseControl::uniform_constant(1.0, vec![0.1, -0.2, 0.3, -0.4]).unwrap();
        let f = lift_control(&v, 8).unwrap();
        assert_eq!(f.segment_count(), 8);
        let g = lift_control(&v, 3).unwrap();
        assert_eq!(g.segment_count(), 6);
        for k in 0..g.segment_count() {
            let (a, b) = g.segment_bounds(k);
            assert_eq!(g.rate(k), v.rate(v.segment_at(0.5 * (a + b))));
        }
    }
}
