//! Closed-form matrix elements against direct Gauss-Legendre quadrature.

use std::f64::consts::{PI, SQRT_2};
use std::num::NonZeroUsize;

use boxctrl::operators::{dilation_matrix, frame_map_coefficients, momentum_matrix};
use boxctrl::{BasisTruncation, BoxGeometry};
use gauss_quad::GaussLegendre;

fn phi(j: usize, x: f64) -> f64 {
    SQRT_2 * (j as f64 * PI * (x + 0.5)).sin()
}

fn dphi(j: usize, x: f64) -> f64 {
    let k = j as f64 * PI;
    SQRT_2 * k * (k * (x + 0.5)).cos()
}

/// Composite rule: `panels` equal panels with `nodes` points each.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, nodes: usize) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(nodes).unwrap());
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            rule.integrate(lo, lo + h, &f)
        })
        .sum()
}

#[test]
fn momentum_entries_match_quadrature_up_to_n50() {
    let n = 50;
    let p = momentum_matrix(BasisTruncation::new(n).unwrap());
    // >= 4N nodes in total
    let (panels, nodes) = (10, 24);
    for j in 1..=n {
        for l in 1..=n {
            // <phi_j, p phi_l> = -i int phi_j phi_l'
            let integral = integrate(|x| phi(j, x) * dphi(l, x), -0.5, 0.5, panels, nodes);
            let z = p.entry(j, l);
            assert!(z.re.abs() < 1e-12, "({j},{l}) real part {}", z.re);
            assert!(
                (z.im + integral).abs() < 1e-10,
                "({j},{l}): {} vs {}",
                z.im,
                -integral
            );
        }
    }
}

#[test]
fn dilation_entries_match_quadrature_up_to_n50() {
    let n = 50;
    let d = dilation_matrix(BasisTruncation::new(n).unwrap());
    let (panels, nodes) = (10, 24);
    for j in 1..=n {
        for l in 1..=n {
            // x∘p = (xp + px)/2 ; <phi_j, x∘p phi_l> = -(i/2) int phi_j (x phi_l' + (x phi_l)')
            let integral = integrate(
                |x| phi(j, x) * (2.0 * x * dphi(l, x) + phi(l, x)),
                -0.5,
                0.5,
                panels,
                nodes,
            );
            let z = d.entry(j, l);
            assert!(z.re.abs() < 1e-12);
            assert!(
                (z.im + 0.5 * integral).abs() < 1e-10,
                "({j},{l}): {} vs {}",
                z.im,
                -0.5 * integral
            );
        }
    }
}

#[test]
fn frame_map_entry_to_doubled_box() {
    let map = frame_map_coefficients(
        BoxGeometry::new(1.0, 0.0).unwrap(),
        BoxGeometry::new(2.0, 0.0).unwrap(),
        BasisTruncation::new(8).unwrap(),
    )
    .unwrap();
    let oracle = integrate(|x| phi(1, x) * phi(1, x / 2.0) / SQRT_2, -0.5, 0.5, 4, 32);
    assert!((map.matrix[(0, 0)].re - oracle).abs() < 1e-12);
    assert_eq!(map.matrix[(0, 0)].im, 0.0);
}

#[test]
fn frame_map_shifted_boxes_match_quadrature() {
    let src = BoxGeometry::new(1.3, 0.2).unwrap();
    let dst = BoxGeometry::new(2.0, 0.5).unwrap();
    let map = frame_map_coefficients(src, dst, BasisTruncation::new(6).unwrap()).unwrap();
    let chi =
        |g: BoxGeometry, j: usize, y: f64| phi(j, (y - g.center) / g.length) / g.length.sqrt();
    let (lo, hi) = (
        src.left_wall().max(dst.left_wall()),
        src.right_wall().min(dst.right_wall()),
    );
    for a in 1..=6 {
        for b in 1..=6 {
            let oracle = integrate(|y| chi(dst, a, y) * chi(src, b, y), lo, hi, 8, 24);
            assert!(
                (map.matrix[(a - 1, b - 1)].re - oracle).abs() < 1e-12,
                "({a},{b})"
            );
        }
    }
    for d in &map.column_deficiency {
        assert!(*d >= -1e-12);
    }
}
