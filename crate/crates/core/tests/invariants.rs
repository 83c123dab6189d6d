//! Property-based checks of structural invariants.

use boxctrl::control::lift_control;
use boxctrl::linalg::CVector;
use boxctrl::operators::{dilation_matrix, interaction_matrix, laplacian_matrix, momentum_matrix};
use boxctrl::propagation::{BoxModel, PiecewiseControl, Stepping};
use boxctrl::{BasisTruncation, BoxGeometry, MotionParams, Parity, SpectralState};
use num_complex::Complex64;
use proptest::prelude::*;

fn state(parts: &[(f64, f64)]) -> SpectralState {
    let c = CVector::from_iterator(
        parts.len(),
        parts.iter().map(|&(re, im)| Complex64::new(re, im)),
    );
    SpectralState::new(c, BoxGeometry::reference())
}

fn amplitudes(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assembled_operators_are_hermitian(n in 2usize..40, lambda in 0.0..3.0f64, delta in -3.0..3.0f64) {
        let n = BasisTruncation::new(n).unwrap();
        let p = MotionParams::new(lambda, delta, 1.0, 0.0, 1.0).unwrap();
        for op in [laplacian_matrix(n), momentum_matrix(n), dilation_matrix(n), interaction_matrix(&p, n)] {
            prop_assert!(op.hermiticity_defect() <= 1e-12);
        }
        let model = BoxModel::new(p, n);
        prop_assert!(boxctrl::linalg::hermiticity_defect(&model.transformed_hamiltonian(0.3, -0.7)) <= 1e-12);
    }

    #[test]
    fn norm_scale_ordering(parts in amplitudes(12)) {
        let s = state(&parts);
        prop_assert!(s.minus_norm() <= s.norm() + 1e-15);
        prop_assert!(s.norm() <= s.plus_norm() + 1e-15);
    }

    #[test]
    fn scale_cauchy_schwarz(a in amplitudes(10), b in amplitudes(10)) {
        let (psi, phi) = (state(&a), state(&b));
        prop_assert!(psi.inner(&phi).norm() <= psi.minus_norm() * phi.plus_norm() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn lift_tracks_v_and_stays_small(
        values in prop::collection::vec(-0.999..0.999f64, 1..8),
        horizon in 0.1..5.0f64,
        n in 1usize..200,
    ) {
        let r = 1.0;
        let v = PiecewiseControl::uniform_constant(horizon, values).unwrap();
        let f = lift_control(&v, n).unwrap();
        prop_assert!(f.segment_count() <= n + v.segment_count());
        prop_assert!(f.sup_abs_value() < r * horizon / n as f64);
        for k in 0..f.segment_count() {
            let (a, b) = f.segment_bounds(k);
            prop_assert_eq!(f.value_in_segment(k, a), 0.0);
            prop_assert_eq!(f.rate(k), v.rate(v.segment_at(0.5 * (a + b))));
        }
    }

    #[test]
    fn auxiliary_propagators_are_unitary(values in prop::collection::vec(-1.9..1.9f64, 1..6), horizon in 0.05..3.0f64) {
        let model = BoxModel::new(MotionParams::new(1.0, 1.0, 1.0, 0.0, 2.0).unwrap(), BasisTruncation::new(12).unwrap());
        let v = PiecewiseControl::uniform_constant(horizon, values).unwrap();
        let u = model.propagate_auxiliary(&v, (0.0, horizon)).unwrap();
        prop_assert!(u.unitarity_defect() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dilation_never_mixes_parity(values in prop::collection::vec(-1.99..1.99f64, 20), horizon in 0.5..4.0f64, even in amplitudes(16)) {
        let n = BasisTruncation::new(32).unwrap();
        let model = BoxModel::new(MotionParams::new(1.0, 0.0, 1.0, 0.0, 2.0).unwrap(), n);
        let mut c = CVector::zeros(32);
        for (k, &(re, im)) in even.iter().enumerate() {
            c[2 * k] = Complex64::new(re, im);
        }
        prop_assume!(c.norm() > 1e-3);
        let psi = SpectralState::new(c.unscale(c.norm()), BoxGeometry::reference());
        let v = PiecewiseControl::uniform_constant(horizon, values).unwrap();
        let out = SpectralState::new(model.evolve_auxiliary(&v, &psi.coeffs).unwrap(), psi.geometry);
        prop_assert!(out.sector_probability(Parity::Odd) <= 1e-10);
        let f = lift_control(&v, 4).unwrap();
        let moved = model.evolve_moving_box(&f, &psi, Stepping::default()).unwrap();
        prop_assert!(moved.sector_probability(Parity::Odd) <= 1e-10);
        prop_assert!((moved.norm() - 1.0).abs() <= 1e-9);
    }
}
