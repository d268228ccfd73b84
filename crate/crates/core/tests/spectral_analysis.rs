mod support;

use fraclab::grid::Grid1D;
use fraclab::operator::{assemble_restricted, assemble_spectral, OperatorPair};
use fraclab::params::FracParams;
use fraclab::spectrum::{
    isolatedness_certificate, nodal_analysis, rayleigh, solve_spectrum, trivial_branch_index, CertificateStatus,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use support::det_sign;

fn restricted(n: usize, s: f64) -> OperatorPair {
    assemble_restricted(&Grid1D::new(-1.0, 1.0, n).unwrap(), &FracParams::new(s).unwrap()).unwrap()
}

#[test]
fn pencils_are_positive_definite() {
    for s in [0.3, 0.4, 0.5, 0.75] {
        for n in [64, 128, 256] {
            let pair = restricted(n, s);
            assert_eq!(pair.pencil().count_below(0.0), 0, "s={s} N={n}");
            assert!(pair.pencil().eigenvalue(1).unwrap() > 0.0);
        }
    }
}

#[test]
fn spectral_kind_matches_fractional_powers() {
    for (a, b) in [(0.0, 1.0), (-1.0, 1.0), (0.5, 3.0)] {
        for s in [0.3, 0.5, 0.75] {
            let grid = Grid1D::new(a, b, 64).unwrap();
            let pair = assemble_spectral(&grid, &FracParams::new(s).unwrap(), 64).unwrap();
            let sp = solve_spectrum(&pair, 8).unwrap();
            for k in 1..=8 {
                let exact = (k as f64 * PI / (b - a)).powf(2.0 * s);
                assert!((sp.eigenvalue(k) - exact).abs() <= 1e-10 * exact, "k={k}");
            }
        }
    }
}

#[test]
fn perron_and_sign_change_dichotomy() {
    for s in [0.3, 0.4, 0.5, 0.75] {
        for n in [31, 64, 128] {
            let sp = solve_spectrum(&restricted(n, s), 6).unwrap();
            assert!(sp.eigenvector(1).iter().all(|&v| v > 0.0), "φ₁ not positive at s={s} N={n}");
            for k in 2..=6 {
                let phi = sp.eigenvector(k);
                assert!(phi.min() < 0.0 && phi.max() > 0.0, "φ_{k} one-signed at s={s} N={n}");
            }
        }
    }
}

#[test]
fn eigenpairs_are_consistent_with_energy_and_rayleigh() {
    let pair = restricted(96, 0.4);
    let sp = solve_spectrum(&pair, 4).unwrap();
    for k in 1..=4 {
        let phi = sp.eigenvector(k);
        let q = pair.energy(phi, phi).unwrap() / pair.mass(phi, phi).unwrap();
        assert!((q - sp.eigenvalue(k)).abs() <= 1e-12 * sp.eigenvalue(k));
        assert!((rayleigh(&pair, phi).unwrap() - sp.eigenvalue(k)).abs() <= 1e-12 * sp.eigenvalue(k));
    }
    for j in 1..=4 {
        for k in 1..j {
            assert!(pair.mass(sp.eigenvector(j), sp.eigenvector(k)).unwrap().abs() <= 1e-10);
        }
    }
    let l1 = sp.eigenvalue(1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let u = DVector::from_fn(96, |_, _| rng.random_range(-1.0..1.0));
        assert!(rayleigh(&pair, &u).unwrap() - l1 >= -1e-12 * l1);
    }
}

#[test]
fn index_agrees_with_brute_force_determinant_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [4, 7, 12, 16] {
        for s in [0.3, 0.6] {
            let pair = restricted(n, s);
            let top = pair.pencil().eigenvalue(n).unwrap();
            let t = DMatrix::from_diagonal(pair.mass_diag());
            for _ in 0..50 {
                let lam = rng.random_range(0.0..1.1 * top);
                let brute = det_sign(pair.stiffness() - &t * lam);
                assert_eq!(trivial_branch_index(&pair, lam), brute, "N={n} s={s} λ={lam}");
            }
            let sp = solve_spectrum(&pair, 3).unwrap();
            let (l1, l2, l3) = (sp.eigenvalue(1), sp.eigenvalue(2), sp.eigenvalue(3));
            assert_eq!(trivial_branch_index(&pair, 0.5 * l1), 1);
            assert_eq!(trivial_branch_index(&pair, 0.5 * (l1 + l2)), -1);
            assert_eq!(trivial_branch_index(&pair, 0.5 * (l2 + l3)), 1);
            assert_eq!(trivial_branch_index(&pair, l2), 0);
        }
    }
}

#[test]
fn index_jump_over_the_documented_sample_windows() {
    let pair = restricted(128, 0.4);
    let sp = solve_spectrum(&pair, 2).unwrap();
    let (l1, l2) = (sp.eigenvalue(1), sp.eigenvalue(2));
    for i in 0..=50 {
        let t = i as f64 / 50.0;
        assert_eq!(trivial_branch_index(&pair, l1 * (0.01 + 0.98 * t)), 1);
        let above = (l1 + 1e-6 * l1) + t * ((l2 - 1e-6 * l2) - (l1 + 1e-6 * l1));
        assert_eq!(trivial_branch_index(&pair, above), -1);
    }
}

#[test]
fn restricted_gap_stabilizes_to_a_positive_limit() {
    let r = isolatedness_certificate(&restricted(128, 0.4), &[128, 256, 512]).unwrap();
    assert_eq!(r.status, CertificateStatus::Certified);
    let gaps: Vec<f64> = r.levels.iter().map(|l| l.gap).collect();
    assert!(gaps.iter().all(|g| *g > 1.0));
    assert!((gaps[2] - gaps[1]).abs() < (gaps[1] - gaps[0]).abs());
    let single = isolatedness_certificate(&restricted(64, 0.4), &[64]).unwrap();
    assert_eq!(single.status, CertificateStatus::Inconclusive);
}

#[test]
fn nodal_bound_product_is_scale_stable() {
    let mut floors = Vec::new();
    for n in [128, 256] {
        let pair = restricted(n, 0.4);
        let sp = solve_spectrum(&pair, 6).unwrap();
        let first = nodal_analysis(&sp, pair.grid(), 1, 0.4).unwrap();
        assert_eq!(first.domains.len(), 1);
        assert_eq!(first.domains[0].sign, 1);
        let products: Vec<f64> =
            (2..=6).map(|k| nodal_analysis(&sp, pair.grid(), k, 0.4).unwrap().bound_product).collect();
        assert!(products.iter().all(|p| *p > 0.0));
        floors.push((products[0], products.iter().copied().fold(f64::INFINITY, f64::min)));
    }
    let (a, b) = (floors[0], floors[1]);
    assert!((a.0 - b.0).abs() <= 0.2 * b.0, "k=2 product moved: {a:?} vs {b:?}");
    assert!((a.1 - b.1).abs() <= 0.2 * b.1, "floor moved: {a:?} vs {b:?}");
}

#[test]
fn spectral_second_mode_splits_the_unit_interval() {
    let grid = Grid1D::new(0.0, 1.0, 63).unwrap();
    for s in [0.4, 0.5] {
        let pair = assemble_spectral(&grid, &FracParams::new(s).unwrap(), 63).unwrap();
        let sp = solve_spectrum(&pair, 2).unwrap();
        let r = nodal_analysis(&sp, &grid, 2, s).unwrap();
        assert_eq!(r.domains.len(), 2);
        for d in &r.domains {
            assert!((d.measure() - 0.5).abs() < 1e-12);
        }
        let expected = 0.5 * (2.0 * PI).powf(2.0 * s).powf(1.0 / (2.0 * s));
        assert!((r.bound_product - expected).abs() < 1e-9 * expected);
    }
}
