//! Resonance search, eigencurve tracking and chain certification.

use std::f64::consts::PI;

use boxctrl::resonance::{
    certify_chain, eigenvalue_curvature, find_resonances_at_zero, scan_for_nonresonant_eta,
    second_derivative_formula, spectrum_vs_eta, ScanOutcome,
};
use boxctrl::{BasisTruncation, Error, Execution, MotionParams};

fn params(lambda: f64, delta: f64) -> MotionParams {
    MotionParams::new(lambda, delta, 1.0, 0.0, 1.0).unwrap()
}

fn trunc(n: usize) -> BasisTruncation {
    BasisTruncation::new(n).unwrap()
}

/// Every `(s1, s2, t1, t2)` with `s2 = s1 + 1` and equal squared gaps, by brute force.
fn brute_force(max_index: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for s1 in 1..max_index {
        for t1 in 1..=max_index {
            for t2 in 1..=max_index {
                let s2 = s1 + 1;
                let lhs = (s2 * s2 - s1 * s1) as i64;
                let rhs = (t2 * t2) as i64 - (t1 * t1) as i64;
                if t1 < t2 && lhs == rhs && (t1, t2) != (s1, s2) {
                    out.push([s1, s2, t1, t2]);
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn integer_search_matches_brute_force() {
    for m in [2, 3, 7, 8, 10, 23, 50] {
        let report = find_resonances_at_zero(trunc(50), m).unwrap();
        let found: Vec<[usize; 4]> = report.quadruples.iter().map(|r| r.indices()).collect();
        assert_eq!(found, brute_force(m), "max_index {m}");
    }
}

#[test]
fn explicit_quadruple_with_gap_441() {
    let report = find_resonances_at_zero(trunc(250), 250).unwrap();
    assert!(report.contains([220, 221, 20, 29]));
    assert_eq!(221 * 221 - 220 * 220, 441);
    assert_eq!(29 * 29 - 20 * 20, 441);
    assert!(report
        .quadruples
        .iter()
        .all(|q| (q.s1, q.s2) != (q.t1, q.t2)));
}

#[test]
fn unperturbed_spectrum_is_exact() {
    let c = spectrum_vs_eta(&params(1.0, 1.0), &[0.0], trunc(40), Execution::Sequential).unwrap();
    for j in 1..=20 {
        assert!((c.eigenvalues[0][j - 1] - (j * j) as f64 * PI * PI).abs() < 1e-8);
    }
}

#[test]
fn first_derivative_vanishes_and_curvature_matches() {
    let h = 1e-3;
    for (lambda, delta) in [(1.0, 0.0), (0.5, 1.0), (1.0, 1.0)] {
        let p = params(lambda, delta);
        let c = spectrum_vs_eta(&p, &[-h, 0.0, h], trunc(64), Execution::Sequential).unwrap();
        for j in 1..=5 {
            let e = c.curve(j);
            let first = (e[2] - e[0]) / (2.0 * h);
            let second = (e[2] - 2.0 * e[1] + e[0]) / (h * h);
            assert!(first.abs() < 1e-8, "first derivative {first}");
            assert!(
                (second - eigenvalue_curvature(&p, j)).abs() < 1e-4,
                "j={j}: {second}"
            );
            assert!((0.5 * second - second_derivative_formula(&p, j)).abs() < 1e-4);
        }
    }
}

#[test]
fn uniform_shift_without_dilation() {
    // the truncation error decays like N^-3, so the 1e-6 level needs N = 256
    let grid: Vec<f64> = (0..=50).map(|k| 0.01 * k as f64).collect();
    let c = spectrum_vs_eta(&params(0.0, 1.0), &grid, trunc(256), Execution::default()).unwrap();
    for (g, eta) in grid.iter().enumerate() {
        for j in 1..=5 {
            let e0 = (j * j) as f64 * PI * PI;
            assert!(
                (c.eigenvalues[g][j - 1] - e0 + eta * eta / 4.0).abs() < 1e-6,
                "j={j} eta={eta}"
            );
        }
        for j in 1..=10 {
            for k in 1..j {
                let gap = c.eigenvalues[g][j - 1] - c.eigenvalues[g][k - 1];
                let gap0 = c.eigenvalues[0][j - 1] - c.eigenvalues[0][k - 1];
                assert!((gap - gap0).abs() < 1e-6, "({j},{k}) at eta {eta}");
            }
        }
    }
}

#[test]
fn truncation_stability_of_low_modes() {
    let p = params(1.0, 1.0);
    let grid = [0.0, 0.25, 0.5];
    let coarse = spectrum_vs_eta(&p, &grid, trunc(256), Execution::default()).unwrap();
    let fine = spectrum_vs_eta(&p, &grid, trunc(512), Execution::default()).unwrap();
    for (g, eta) in grid.iter().enumerate() {
        for j in 1..=5 {
            let d = (coarse.eigenvalues[g][j - 1] - fine.eigenvalues[g][j - 1]).abs();
            assert!(d < 1e-6, "j={j}, eta={eta}: {d:e}");
        }
    }
}

#[test]
fn coarse_grid_is_flagged() {
    let err = spectrum_vs_eta(
        &params(1.0, 1.0),
        &[0.0, 60.0],
        trunc(12),
        Execution::Sequential,
    )
    .unwrap_err();
    assert!(matches!(err, Error::DegenerateMatching { .. }));
}

#[test]
fn chain_at_zero_shows_the_large_resonance() {
    let n = trunc(442);
    let cert = certify_chain(&params(1.0, 1.0), 0.0, n, 221, 1e-8, Execution::default()).unwrap();
    assert!(cert.connected);
    assert!(cert.report.contains([220, 221, 20, 29]));
    assert!(!cert.certified());
}

#[test]
fn chain_at_zero_is_connected() {
    let cert = certify_chain(
        &params(1.0, 1.0),
        0.0,
        trunc(20),
        10,
        1e-8,
        Execution::Sequential,
    )
    .unwrap();
    assert!(cert.connected);
    assert!(cert.weakest_coupling > 1.0);
}

#[test]
fn scan_finds_positive_eta_with_dilation() {
    let out = scan_for_nonresonant_eta(
        &params(1.0, 1.0),
        0.1,
        20,
        trunc(64),
        30,
        1e-8,
        Execution::default(),
    )
    .unwrap();
    match out {
        ScanOutcome::Found(c) => {
            assert!(c.eta > 0.0 && c.eta <= 0.1);
            assert!(c.certified());
        }
        ScanOutcome::NotFound => panic!("no certificate on the grid"),
    }
}

#[test]
fn scan_never_returns_zero() {
    // no integer resonance below index 8: eta = 0 would pass, the scan must not report it
    let out = scan_for_nonresonant_eta(
        &params(1.0, 1.0),
        0.05,
        5,
        trunc(16),
        6,
        1e-8,
        Execution::Sequential,
    )
    .unwrap();
    match out {
        ScanOutcome::Found(c) => assert!((c.eta - 0.01).abs() < 1e-15),
        ScanOutcome::NotFound => panic!("expected the first grid point"),
    }
}

#[test]
fn scan_without_dilation_finds_nothing() {
    for n in [128, 256] {
        let out = scan_for_nonresonant_eta(
            &params(0.0, 1.0),
            0.1,
            20,
            trunc(n),
            30,
            1e-8,
            Execution::default(),
        )
        .unwrap();
        assert_eq!(out, ScanOutcome::NotFound, "N = {n}");
    }
}
