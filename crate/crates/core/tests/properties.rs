use nalgebra::DMatrix;
use ncorlicz::algebra::{apply_function, ElementKind, TracedAlgebra, C64};
use ncorlicz::dsops::{averages, compose, convex_combine, kadison_check, verify_ds, DsOperator};
use ncorlicz::maximal::yeadon_search;
use ncorlicz::orlicz::{derived_tilde, luxemburg_norm, luxemburg_norm_sf, OrliczFunction};
use ncorlicz::symfunc::{majorizes, singular_value_function};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = TracedAlgebra> {
    prop::collection::vec((1usize..=3, 0.25f64..4.0), 1..=3)
        .prop_map(|blocks| TracedAlgebra::new(&blocks).unwrap())
}

fn orlicz() -> impl Strategy<Value = OrliczFunction> {
    prop_oneof![
        (1.0f64..4.0).prop_map(|p| OrliczFunction::power(p).unwrap()),
        (0.5f64..2.0).prop_map(|a| OrliczFunction::log_power(a).unwrap()),
        Just(OrliczFunction::piecewise(vec![[0.0, 0.0], [1.0, 0.5], [2.0, 2.0]]).unwrap()),
    ]
}

fn operator(a: &TracedAlgebra, seed: u64, which: u8) -> DsOperator {
    let u = DsOperator::from_unitary_conjugation(a, &a.random_unitary(seed)).unwrap();
    let d = a.dims()[0];
    let corr = DMatrix::from_fn(d, d, |i, j| C64::new(0.6f64.powi((i as i32 - j as i32).abs()), 0.0));
    let s = DsOperator::from_schur_correlation(a, &corr, 0).unwrap();
    match which % 4 {
        0 => u,
        1 => s,
        2 => compose(&u, &s).unwrap(),
        _ => convex_combine(&u, &s, 0.35).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn functional_calculus_is_multiplicative(a in shape(), seed in any::<u64>()) {
        let x = a.random_element(ElementKind::Positive, seed);
        let f = apply_function(&a, |u| u + 1.0, &x).unwrap();
        let g = apply_function(&a, |u| u * u, &x).unwrap();
        let fg = apply_function(&a, |u| (u + 1.0) * u * u, &x).unwrap();
        prop_assert!((&(&f * &g) - &fg).uniform_norm() <= 1e-9 * fg.uniform_norm().max(1.0));
    }

    #[test]
    fn mu_is_unitarily_invariant(a in shape(), seed in any::<u64>()) {
        let x = a.random_element(ElementKind::General, seed);
        let u = a.random_unitary(seed ^ 0xABCD);
        let y = &(&u * &x) * &u.adjoint();
        let mx = singular_value_function(&a, &x).unwrap();
        let my = singular_value_function(&a, &y).unwrap();
        prop_assert!(mx.sup_distance(&my) <= 1e-9 * x.uniform_norm().max(1.0));
        prop_assert!((mx.support_length() - my.support_length()).abs() <= 1e-9);
    }

    #[test]
    fn luxemburg_norm_axioms(a in shape(), phi in orlicz(), seed in any::<u64>(), s in -3.0f64..3.0) {
        let x = a.random_element(ElementKind::General, seed);
        let y = a.random_element(ElementKind::General, seed.wrapping_add(1));
        let nx = luxemburg_norm(&a, &x, &phi).unwrap().value;
        let ny = luxemburg_norm(&a, &y, &phi).unwrap().value;
        let nxy = luxemburg_norm(&a, &(&x + &y), &phi).unwrap().value;
        let nsx = luxemburg_norm(&a, &x.scale(s), &phi).unwrap().value;
        prop_assert!(nxy <= (nx + ny) * (1.0 + 1e-9));
        prop_assert!((nsx - s.abs() * nx).abs() <= 1e-8 * nx.max(1.0));
        prop_assert!((luxemburg_norm(&a, &x.adjoint(), &phi).unwrap().value - nx).abs() <= 1e-9 * nx.max(1.0));
        prop_assert_eq!(luxemburg_norm(&a, &a.zero(), &phi).unwrap().value, 0.0);
    }

    #[test]
    fn luxemburg_norm_matches_step_function_path(a in shape(), phi in orlicz(), seed in any::<u64>()) {
        let x = a.random_element(ElementKind::General, seed);
        let m = luxemburg_norm(&a, &x, &phi).unwrap().value;
        let f = luxemburg_norm_sf(&singular_value_function(&a, &x).unwrap(), &phi).unwrap().value;
        prop_assert!((m - f).abs() <= 1e-8 * m.max(1.0));
    }

    #[test]
    fn norm_is_fully_symmetric(a in shape(), phi in orlicz(), seed in any::<u64>()) {
        let x = a.random_element(ElementKind::General, seed);
        let t = operator(&a, seed, (seed % 4) as u8);
        let y = t.apply(&x).unwrap();
        let (mx, my) = (singular_value_function(&a, &x).unwrap(), singular_value_function(&a, &y).unwrap());
        prop_assert!(majorizes(&mx, &my));
        let nx = luxemburg_norm(&a, &x, &phi).unwrap().value;
        let ny = luxemburg_norm(&a, &y, &phi).unwrap().value;
        prop_assert!(ny <= nx + 1e-8 * nx.max(1.0));
    }

    #[test]
    fn mu_commutes_with_orlicz_function(a in shape(), phi in orlicz(), seed in any::<u64>()) {
        let x = a.random_element(ElementKind::General, seed);
        let lhs = singular_value_function(&a, &apply_function(&a, |u| phi.eval(u), &x.abs()).unwrap()).unwrap();
        let rhs = singular_value_function(&a, &x).unwrap().map(|v| phi.eval(v));
        prop_assert!(lhs.sup_distance(&rhs) <= 1e-9 * rhs.sup().max(1.0));
    }

    #[test]
    fn square_norm_identity(a in shape(), p in 2.0f64..4.0, seed in any::<u64>()) {
        let phi = OrliczFunction::power(p).unwrap();
        let tilde = derived_tilde(&phi).unwrap();
        let x = a.random_element(ElementKind::Positive, seed);
        let nx = luxemburg_norm(&a, &x, &phi).unwrap().value;
        let nsq = luxemburg_norm(&a, &(&x * &x), &tilde).unwrap().value;
        prop_assert!((nsq - nx * nx).abs() <= 1e-8 * (nx * nx).max(1.0));
    }

    #[test]
    fn ds_operators_contract(a in shape(), which in 0u8..4, seed in any::<u64>(), phi in orlicz()) {
        let t = operator(&a, seed, which);
        prop_assert!(verify_ds(&t).passed());
        let x = a.random_element(ElementKind::General, seed.wrapping_mul(3));
        let tx = t.apply(&x).unwrap();
        for p in [1.0, 2.0, f64::INFINITY] {
            prop_assert!(a.lp_norm(&tx, p).unwrap() <= a.lp_norm(&x, p).unwrap() * (1.0 + 1e-9));
        }
        let nx = luxemburg_norm(&a, &x, &phi).unwrap().value;
        prop_assert!(luxemburg_norm(&a, &tx, &phi).unwrap().value <= nx + 1e-8 * nx.max(1.0));
    }

    #[test]
    fn kadison_holds_for_ds_operators(a in shape(), which in 0u8..4, seed in any::<u64>()) {
        let t = operator(&a, seed, which);
        let x = a.random_element(ElementKind::Hermitian, seed);
        let margin = kadison_check(&t, &x).unwrap();
        prop_assert!(margin >= -1e-9 * x.uniform_norm().powi(2).max(1.0));
    }

    #[test]
    fn averages_stay_in_uniform_ball(a in shape(), which in 0u8..4, seed in any::<u64>()) {
        let t = operator(&a, seed, which);
        let x = a.random_element(ElementKind::General, seed);
        for (_, avg) in averages(&t, &x).unwrap().take(40) {
            prop_assert!(avg.uniform_norm() <= x.uniform_norm() * (1.0 + 1e-10));
        }
    }

    #[test]
    fn yeadon_sup_guarantee(a in shape(), which in 0u8..4, seed in any::<u64>(), level in 0.1f64..1.0) {
        let t = operator(&a, seed, which);
        let x = a.random_element(ElementKind::Positive, seed);
        let r = yeadon_search(&t, &x, level * x.uniform_norm(), 24).unwrap();
        prop_assert!(r.pass, "{:?}", r.checks);
    }

    #[test]
    fn commutative_yeadon_trace_bound(d in 2usize..6, seed in any::<u64>(), level in 0.05f64..0.9) {
        let a = TracedAlgebra::diagonal(&vec![1.0; d]).unwrap();
        let mut rng = seed;
        let mut next = || { rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (rng >> 33) as f64 / (1u64 << 31) as f64 };
        let perm_mix: DMatrix<f64> = DMatrix::from_fn(d, d, |i, j| if j == (i + 1) % d { 1.0 } else { 0.0 });
        let lam = next();
        let s = perm_mix.scale(lam) + DMatrix::from_element(d, d, (1.0 - lam) / d as f64);
        let t = DsOperator::from_substochastic(&a, &s).unwrap();
        let x = a.from_diagonal(&(0..d).map(|_| next()).collect::<Vec<_>>()).unwrap();
        let nu = level * x.uniform_norm().max(1e-3);
        let r = yeadon_search(&t, &x, nu, 32).unwrap();
        prop_assert!(r.pass, "{:?}", r.checks);
        prop_assert!(r.trace_complement <= a.trace_re(&x).unwrap() / nu + 1e-9);
    }
}
