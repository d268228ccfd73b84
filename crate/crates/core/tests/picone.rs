mod support;

use fraclab::exec::Execution;
use fraclab::grid::Grid1D;
use fraclab::operator::{assemble_restricted, assemble_spectral, OperatorPair};
use fraclab::params::FracParams;
use fraclab::picone::{
    discrete_picone, elementary_inequality_check, isolatedness_contradiction_demo, picone_defects,
    picone_property_run, PiconePair,
};
use fraclab::spectrum::solve_spectrum;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use support::pairwise_sum;

fn restricted(n: usize, s: f64) -> OperatorPair {
    assemble_restricted(&Grid1D::new(-1.0, 1.0, n).unwrap(), &FracParams::new(s).unwrap()).unwrap()
}

#[test]
fn slack_is_the_pairwise_sum_on_four_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in [0.3, 0.4, 0.5, 0.75] {
        let pair = restricted(4, s);
        for _ in 0..200 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..1.0)).collect();
            let p = PiconePair::new(DVector::from_vec(u.clone()), DVector::from_vec(v.clone()), 0.0).unwrap();
            let got = discrete_picone(&pair, &p).unwrap();
            let brute = pairwise_sum(pair.stiffness(), &u, &v);
            assert!((got.slack - brute).abs() <= 1e-12 * (1.0 + got.rhs.abs()), "{} vs {brute}", got.slack);
            assert!(brute >= 0.0);
        }
    }
}

#[test]
fn property_runs_hold_at_three_orders() {
    for s in [0.3, 0.4, 0.5] {
        let summary = picone_property_run(&restricted(64, s), 2_000, 99, Execution::Parallel).unwrap();
        assert_eq!(summary.failures, 0, "s={s}: {summary:?}");
        assert!(summary.worst_slack >= -1e-10);
    }
}

#[test]
fn equality_when_u_equals_v() {
    let pair = restricted(40, 0.4);
    let v = DVector::from_fn(40, |i, _| 0.2 + (i as f64 * 0.37).sin().abs());
    let r = discrete_picone(&pair, &PiconePair::new(v.clone(), v, 0.0).unwrap()).unwrap();
    assert!(r.slack.abs() <= 1e-12 * r.rhs.abs());
}

#[test]
fn slack_is_continuous_in_the_shift() {
    let pair = restricted(48, 0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = DVector::from_fn(48, |_, _| rng.random_range(-1.0..1.0));
    let v = DVector::from_fn(48, |_, _| rng.random_range(0.1..1.0));
    let at = |eps: f64| discrete_picone(&pair, &PiconePair::new(u.clone(), v.clone(), eps).unwrap()).unwrap().slack;
    let base = at(0.0);
    for eps in [1e-2, 1e-3, 1e-4, 1e-5] {
        let diff = (at(2.0 * eps) - at(eps)).abs();
        assert!(diff <= 50.0 * eps * (1.0 + base.abs()), "eps={eps}: {diff}");
    }
}

#[test]
fn contradiction_demo_on_both_kinds() {
    let pair = restricted(128, 0.4);
    let sp = solve_spectrum(&pair, 2).unwrap();
    let r = isolatedness_contradiction_demo(&pair, &sp).unwrap();
    assert!(r.contradiction);
    assert!(r.eigen_side < 0.0);
    assert!(r.defects.iter().all(|d| d.defect >= -1e-10));

    let grid = Grid1D::new(0.0, 1.0, 64).unwrap();
    let spectral = assemble_spectral(&grid, &FracParams::new(0.5).unwrap(), 64).unwrap();
    let sp = solve_spectrum(&spectral, 2).unwrap();
    let r = isolatedness_contradiction_demo(&spectral, &sp).unwrap();
    assert!((r.lambda1 - r.lambda2 + PI).abs() < 1e-10);
    assert!(r.defects.is_empty());
}

#[test]
fn defect_vanishes_when_the_second_mode_is_replaced_by_the_first() {
    let pair = restricted(96, 0.4);
    let sp = solve_spectrum(&pair, 1).unwrap();
    let phi = sp.eigenvector(1);
    let defects = picone_defects(&pair, phi, phi, &[1e-2, 1e-4, 1e-6]).unwrap();
    let scale = pair.energy(phi, phi).unwrap();
    for w in defects.windows(2) {
        assert!(w[1].defect.abs() < w[0].defect.abs());
    }
    assert!(defects.last().unwrap().defect.abs() < 1e-5 * scale);
}

#[test]
fn elementary_equality_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let a: f64 = rng.random_range(0.01..10.0);
        let c: f64 = rng.random_range(0.01..10.0);
        let k: f64 = rng.random_range(0.1..10.0);
        // a·d = b·c with ab ≥ 0 gives equality
        let e = elementary_inequality_check(a, k * a, c, k * c).unwrap();
        assert!((e.rhs - e.lhs).abs() <= 1e-12 * (1.0 + e.rhs.abs()));
    }
    let e = elementary_inequality_check(1.0, 0.0, 2.0, 1.0).unwrap();
    assert_eq!((e.lhs, e.rhs), (0.5, 1.0));
}
