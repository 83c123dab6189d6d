//! Propagators against a fine-step Runge-Kutta integration of the coefficient
//! ODE, self-convergence of the midpoint rule, and the moving-box bookkeeping.

use boxctrl::linalg::{max_abs, CMatrix, CVector};
use boxctrl::operators::parity_projector;
use boxctrl::propagation::{
    phase_aligned_distance, BoxModel, LinearPiece, PiecewiseControl, Stepping,
};
use boxctrl::{BasisTruncation, BoxGeometry, MotionParams, Parity, SpectralState};
use num_complex::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Classical RK4 for `i c' = H(t) c` with step `h`.
fn rk4(h_of_t: &dyn Fn(f64) -> CMatrix, c0: &CVector, t0: f64, t1: f64, h: f64) -> CVector {
    let steps = ((t1 - t0) / h).ceil() as usize;
    let h = (t1 - t0) / steps as f64;
    let rhs = |t: f64, c: &CVector| -> CVector { (h_of_t(t) * c) * (-I) };
    let mut c = c0.clone();
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = rhs(t, &c);
        let k2 = rhs(t + h / 2.0, &(&c + &k1 * Complex64::new(h / 2.0, 0.0)));
        let k3 = rhs(t + h / 2.0, &(&c + &k2 * Complex64::new(h / 2.0, 0.0)));
        let k4 = rhs(t + h, &(&c + &k3 * Complex64::new(h, 0.0)));
        c += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
            * Complex64::new(h / 6.0, 0.0);
    }
    c
}

/// RK4 with step halving until successive results agree to `tol`.
fn reference_solution(
    h_of_t: &dyn Fn(f64) -> CMatrix,
    c0: &CVector,
    t0: f64,
    t1: f64,
    tol: f64,
) -> CVector {
    let mut h = 1e-3;
    let mut prev = rk4(h_of_t, c0, t0, t1, h);
    loop {
        h /= 2.0;
        let next = rk4(h_of_t, c0, t0, t1, h);
        if (&next - &prev).norm() < tol {
            return next;
        }
        assert!(h > 1e-7, "reference integration did not converge");
        prev = next;
    }
}

fn model(lambda: f64, delta: f64, n: usize) -> BoxModel {
    BoxModel::new(
        MotionParams::new(lambda, delta, 1.0, 0.0, 2.0).unwrap(),
        BasisTruncation::new(n).unwrap(),
    )
}

#[test]
fn auxiliary_matches_runge_kutta_oracle() {
    for n in [4, 6, 8] {
        let m = model(1.0, 0.8, n);
        let v = PiecewiseControl::constant(vec![0.0, 0.3, 0.7], vec![1.4, -0.9]).unwrap();
        let u = m.propagate_auxiliary(&v, (0.0, 0.7)).unwrap();
        for j in 0..n {
            let mut e = CVector::zeros(n);
            e[j] = Complex64::new(1.0, 0.0);
            // segment by segment, so no stage ever samples the wrong side of the jump
            let mid =
                reference_solution(&|_| m.auxiliary_hamiltonian(v.rate(0)), &e, 0.0, 0.3, 1e-10);
            let end = reference_solution(
                &|_| m.auxiliary_hamiltonian(v.rate(1)),
                &mid,
                0.3,
                0.7,
                1e-10,
            );
            let ours = u.matrix.column(j).into_owned();
            assert!((ours - end).norm() < 1e-7, "N={n}, column {j}");
        }
        assert!(u.unitarity_defect() < 1e-9);
    }
}

#[test]
fn transformed_matches_runge_kutta_oracle() {
    let n = 6;
    let m = model(1.0, 1.0, n);
    let f = PiecewiseControl::linear(
        vec![0.0, 0.25, 0.5],
        vec![
            LinearPiece {
                offset: 0.0,
                slope: 1.2,
            },
            LinearPiece {
                offset: 0.0,
                slope: -0.8,
            },
        ],
    )
    .unwrap();
    let psi = SpectralState::ground(m.truncation, BoxGeometry::reference());
    let ours = m
        .evolve_transformed(&f, &psi.coeffs, Stepping::fixed(2e-4))
        .unwrap();
    let h_seg = |k: usize| {
        let f = f.clone();
        let m = m.clone();
        move |t: f64| m.transformed_hamiltonian(f.value_in_segment(k, t), f.rate(k))
    };
    let mid = reference_solution(&h_seg(0), &psi.coeffs, 0.0, 0.25, 1e-10);
    let end = reference_solution(&h_seg(1), &mid, 0.25, 0.5, 1e-10);
    assert!((ours - end).norm() < 1e-6);
}

#[test]
fn midpoint_rule_is_second_order() {
    let m = model(1.0, 1.0, 8);
    let f = PiecewiseControl::linear(
        vec![0.0, 0.5],
        vec![LinearPiece {
            offset: 0.0,
            slope: 1.5,
        }],
    )
    .unwrap();
    let psi = SpectralState::ground(m.truncation, BoxGeometry::reference()).coeffs;
    let run = |h: f64| m.evolve_transformed(&f, &psi, Stepping::fixed(h)).unwrap();
    let (a, b, c) = (run(2e-3), run(1e-3), run(5e-4));
    // Richardson reference from the two finest runs
    let reference = &c + (&c - &b) * Complex64::new(1.0 / 3.0, 0.0);
    let ratio = (&b - &reference).norm() / (&c - &reference).norm();
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    let coarse_ratio = (&a - &b).norm() / (&b - &c).norm();
    assert!((3.5..=4.5).contains(&coarse_ratio), "ratio {coarse_ratio}");
}

#[test]
fn transformed_composition_at_breakpoints() {
    let m = model(1.0, 0.5, 10);
    let f = PiecewiseControl::linear(
        vec![0.0, 0.4, 1.0],
        vec![
            LinearPiece {
                offset: 0.0,
                slope: 0.9,
            },
            LinearPiece {
                offset: 0.1,
                slope: -1.1,
            },
        ],
    )
    .unwrap();
    let s = Stepping::default();
    let full = m.propagate_transformed(&f, (0.0, 1.0), s).unwrap();
    let first = m.propagate_transformed(&f, (0.0, 0.4), s).unwrap();
    let second = m.propagate_transformed(&f, (0.4, 1.0), s).unwrap();
    assert!(max_abs(&(second.compose(&first).matrix - &full.matrix)) < 1e-9);
    assert!(full.unitarity_defect() < 1e-9);
}

#[test]
fn even_state_stays_even_under_dilation() {
    let m = model(1.0, 0.0, 16);
    let v = PiecewiseControl::uniform_constant(2.0, vec![1.9, -1.3, 0.4, -0.2, 1.1, -1.8]).unwrap();
    let u = m.propagate_auxiliary(&v, (0.0, 2.0)).unwrap();
    let mut psi = CVector::zeros(16);
    psi[0] = Complex64::new(0.6, 0.0);
    psi[2] = Complex64::new(0.0, 0.8);
    for k in 0..=v.segment_count() {
        let t = v.breakpoints()[k];
        let u_t = m.propagate_auxiliary(&v, (0.0, t)).unwrap();
        let out = &u_t.matrix * &psi;
        for j in (1..16).step_by(2) {
            assert!(out[j].norm() <= 1e-12, "t={t}, mode {}", j + 1);
        }
    }
    let odd = parity_projector(Parity::Odd, m.truncation).map(|x| Complex64::new(x, 0.0));
    let even = parity_projector(Parity::Even, m.truncation).map(|x| Complex64::new(x, 0.0));
    assert!(max_abs(&(odd * &u.matrix * even)) <= 1e-10);
}

#[test]
fn static_moving_box_is_free_evolution() {
    let m = BoxModel::new(
        MotionParams::new(1.0, 1.0, 1.5, -0.2, 1.0).unwrap(),
        BasisTruncation::new(8).unwrap(),
    );
    let f = PiecewiseControl::linear(
        vec![0.0, 0.9],
        vec![LinearPiece {
            offset: 0.0,
            slope: 0.0,
        }],
    )
    .unwrap();
    let g = BoxGeometry::new(1.5, -0.2).unwrap();
    let mut c = CVector::zeros(8);
    c[0] = Complex64::new(0.8, 0.0);
    c[3] = Complex64::new(0.0, 0.6);
    let out = m
        .evolve_moving_box(&f, &SpectralState::new(c.clone(), g), Stepping::default())
        .unwrap();
    let expected = CVector::from_fn(8, |k, _| {
        let e = ((k + 1) * (k + 1)) as f64 * std::f64::consts::PI.powi(2) / 2.25;
        c[k] * Complex64::from_polar(1.0, -e * 0.9)
    });
    assert!((out.coeffs - expected).norm() < 1e-12);
    assert_eq!(out.geometry, g);
}

#[test]
fn moving_box_preserves_norm() {
    let m = model(1.0, 1.0, 16);
    let f = PiecewiseControl::linear(
        vec![0.0, 0.5, 1.0, 1.25],
        vec![
            LinearPiece {
                offset: 0.0,
                slope: 1.9,
            },
            LinearPiece {
                offset: 0.0,
                slope: -1.9,
            },
            LinearPiece {
                offset: -0.2,
                slope: 0.5,
            },
        ],
    )
    .unwrap();
    let psi = SpectralState::ground(m.truncation, BoxGeometry::reference());
    let out = m.evolve_moving_box(&f, &psi, Stepping::default()).unwrap();
    assert!((out.norm() - 1.0).abs() < 1e-9);
    assert!(phase_aligned_distance(&psi.coeffs, &out.coeffs) > 1e-3);
}
