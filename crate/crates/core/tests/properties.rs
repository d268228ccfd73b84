use fraclab::exec::Execution;
use fraclab::grid::Grid1D;
use fraclab::nonlinearity::{builtin, nemytskii, TermSpec};
use fraclab::operator::{assemble_restricted, assemble_spectral, OperatorPair};
use fraclab::params::FracParams;
use fraclab::picone::{discrete_picone, elementary_inequality_check, PiconePair};
use fraclab::spectrum::{rayleigh, solve_spectrum, trivial_branch_index};
use nalgebra::DVector;
use proptest::prelude::*;

fn restricted(n: usize, s: f64) -> OperatorPair {
    assemble_restricted(&Grid1D::new(-1.0, 1.0, n).unwrap(), &FracParams::new(s).unwrap()).unwrap()
}

fn vector(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(lo..hi, n).prop_map(DVector::from_vec)
}

const N: usize = 24;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stiffness_is_symmetric_with_m_matrix_signs(s in 0.26f64..0.95, n in 4usize..40) {
        let pair = restricted(n, s);
        let st = pair.stiffness();
        prop_assert!((st - st.transpose()).amax() <= 1e-12 * st.amax());
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| st[(i, j)]).sum();
            prop_assert!(st[(i, i)] > -off);
            prop_assert!((0..n).all(|j| j == i || st[(i, j)] <= 0.0));
        }
    }

    #[test]
    fn energy_is_symmetric(s in 0.26f64..0.95, u in vector(N, -1.0, 1.0), v in vector(N, -1.0, 1.0)) {
        let pair = restricted(N, s);
        let (uv, vu) = (pair.energy(&u, &v).unwrap(), pair.energy(&v, &u).unwrap());
        prop_assert!((uv - vu).abs() <= 1e-12 * (1.0 + uv.abs()));
    }

    #[test]
    fn rayleigh_quotient_is_bounded_below_by_lambda1(s in 0.26f64..0.95, u in vector(N, -1.0, 1.0)) {
        prop_assume!(u.amax() > 1e-3);
        let pair = restricted(N, s);
        let l1 = solve_spectrum(&pair, 1).unwrap().eigenvalue(1);
        prop_assert!(rayleigh(&pair, &u).unwrap() >= l1 * (1.0 - 1e-12));
    }

    #[test]
    fn spectral_rayleigh_bounded_below(s in 0.26f64..0.95, u in vector(N, -1.0, 1.0)) {
        prop_assume!(u.amax() > 1e-3);
        let pair = assemble_spectral(&Grid1D::new(0.0, 1.0, N).unwrap(), &FracParams::new(s).unwrap(), N).unwrap();
        let l1 = std::f64::consts::PI.powf(2.0 * s);
        prop_assert!(rayleigh(&pair, &u).unwrap() >= l1 * (1.0 - 1e-10));
    }

    #[test]
    fn elementary_inequality_holds(
        a in -1e3f64..1e3,
        b in -1e3f64..1e3,
        lc in -6.0f64..6.0,
        ld in -6.0f64..6.0,
    ) {
        let chk = elementary_inequality_check(a, b, 10f64.powf(lc), 10f64.powf(ld)).unwrap();
        prop_assert!(chk.holds);
        prop_assert!(chk.lhs <= chk.rhs + 1e-12 * (1.0 + chk.rhs.abs()));
    }

    #[test]
    fn picone_slack_is_nonnegative(
        s in 0.26f64..0.95,
        u in vector(N, -1.0, 1.0),
        v in vector(N, 1e-3, 1.0),
        eps in 0.0f64..1e-2,
    ) {
        let pair = restricted(N, s);
        let r = discrete_picone(&pair, &PiconePair::new(u, v, eps).unwrap()).unwrap();
        prop_assert!(r.slack >= -1e-10 * (1.0 + r.rhs.abs()));
    }

    #[test]
    fn nemytskii_is_odd(gamma in 2.05f64..4.0, u in vector(N, -2.0, 2.0), lam in 0.0f64..5.0) {
        let pair = restricted(N, 0.4);
        let term = builtin(&TermSpec::OddPower { gamma }, &pair).unwrap();
        let plus = nemytskii(&term, &pair, lam, &u).unwrap().values;
        let minus = nemytskii(&term, &pair, lam, &-&u).unwrap().values;
        prop_assert_eq!(plus, -minus);
    }

    #[test]
    fn index_is_the_parity_of_eigenvalues_below(s in 0.26f64..0.95, t in 0.0f64..1.0) {
        let pair = restricted(N, s);
        let sp = solve_spectrum(&pair, N).unwrap();
        let lam = t * 1.05 * sp.eigenvalue(N);
        let near = (1..=N).any(|k| (lam - sp.eigenvalue(k)).abs() <= 1e-6 * sp.eigenvalue(k).max(1.0));
        prop_assume!(!near);
        let below = (1..=N).filter(|&k| sp.eigenvalue(k) < lam).count();
        let idx = trivial_branch_index(&pair, lam);
        prop_assert_eq!(idx, if below % 2 == 0 { 1 } else { -1 });
    }

    #[test]
    fn execution_policies_agree(len in 0usize..500, salt in any::<u64>()) {
        let f = |i: usize| ((i as u64 ^ salt) as f64).sqrt().sin();
        prop_assert_eq!(Execution::Sequential.map(len, f), Execution::Parallel.map(len, f));
    }
}
