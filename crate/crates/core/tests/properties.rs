use std::sync::Arc;

use double_phase::cli::{field_csv, fmt_f64, read_field_csv};
use double_phase::energy::pairing;
use double_phase::exponents::{build_exponent_set, ExponentField};
use double_phase::varexp::{
    check_holder, check_inclusion_bound, check_modular_norm_relations, luxemburg_norm, modular,
};
use double_phase::{DomainGrid, Energy, ExponentSet, FieldExpr, Functional, GridFunction};
use proptest::prelude::*;

fn grid() -> Arc<DomainGrid> {
    Arc::new(DomainGrid::unit(3, 5).unwrap())
}

fn exponents(g: &Arc<DomainGrid>) -> ExponentSet {
    let p = |e: &str| FieldExpr::parse(e).unwrap();
    build_exponent_set(&p("2"), &p("2 + 0.5*sin(pi*x1)"), &p("4"), g.clone()).unwrap()
}

/// Zero-boundary fields on the 5^3 grid with amplitudes spanning 1e-2..1e2.
fn field() -> impl Strategy<Value = GridFunction> {
    let n = grid().node_count();
    (prop::collection::vec(-1.0f64..1.0, n), -2.0f64..2.0)
        .prop_map(|(v, e)| {
            GridFunction::new(grid(), v, true)
                .unwrap()
                .scaled(10f64.powf(e))
        })
        .prop_filter("nonzero", |u| u.max_abs() > 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energies_are_even_and_gradients_odd(u in field(), lambda in 0.0f64..50.0) {
        let s = exponents(u.grid());
        let neg = u.scaled(-1.0);
        for which in [Functional::J, Functional::I] {
            let e = Energy::new(&s, lambda, which);
            prop_assert_eq!(e.value(&u), e.value(&neg));
            let (a, b) = (e.gradient(&u), e.gradient(&neg));
            for (x, y) in a.0.values().iter().zip(b.0.values()) {
                prop_assert!(*x == -*y);
            }
        }
    }

    #[test]
    fn difference_agrees_with_values(u in field(), v in field(), lambda in 0.0f64..50.0) {
        let s = exponents(u.grid());
        let e = Energy::new(&s, lambda, Functional::J);
        let d = e.difference(&u, &v);
        let direct = e.value(&u.add(&v)) - e.value(&u);
        let scale = e.value(&u).abs().max(e.value(&u.add(&v)).abs());
        prop_assert!((d - direct).abs() <= 1e-10 * scale, "{} vs {}", d, direct);
    }

    #[test]
    fn gradient_matches_central_difference(u in field(), v in field()) {
        let s = exponents(u.grid());
        let e = Energy::new(&s, 3.0, Functional::I);
        let h = 1e-5 * u.max_abs() / v.max_abs();
        let fd = e.difference(&u.axpy(-h, &v), &v.scaled(2.0 * h)) / (2.0 * h);
        let an = pairing(&e.gradient(&u), &v);
        prop_assert!((an - fd).abs() <= 1e-4 * an.abs().max(fd.abs()), "{} vs {}", an, fd);
    }

    #[test]
    fn gradient_part_is_midpoint_convex(u in field(), v in field()) {
        let s = exponents(u.grid());
        let e = Energy::new(&s, 0.0, Functional::I);
        let mid = e.report(&u.add(&v).scaled(0.5)).gradient_part();
        let avg = 0.5 * (e.report(&u).gradient_part() + e.report(&v).gradient_part());
        prop_assert!(mid <= avg * (1.0 + 1e-12));
    }

    #[test]
    fn luxemburg_norm_is_homogeneous(u in field(), c in -1e3f64..1e3) {
        prop_assume!(c.abs() > 1e-3);
        let s = exponents(u.grid());
        let (a, _) = luxemburg_norm(&u, &s.m).unwrap();
        let (b, trace) = luxemburg_norm(&u.scaled(c), &s.m).unwrap();
        prop_assert!((b - c.abs() * a).abs() <= 1e-8 * c.abs() * a);
        prop_assert!(trace.residual <= 1e-10);
    }

    #[test]
    fn constant_exponent_norm_has_closed_form(u in field(), p in 1.1f64..6.0) {
        let pf = ExponentField::constant(u.grid().clone(), p).unwrap();
        let (n, _) = luxemburg_norm(&u, &pf).unwrap();
        let closed = modular(&u, &pf).powf(1.0 / p);
        prop_assert!((n - closed).abs() <= 1e-10 * closed);
    }

    #[test]
    fn norm_modular_sandwich_and_holder(u in field(), v in field()) {
        let s = exponents(u.grid());
        prop_assert!(check_modular_norm_relations(&u, &s.m).unwrap().pass);
        prop_assert!(check_holder(&u, &v, &s.m).unwrap().pass);
        prop_assert!(check_inclusion_bound(&u, &s.m, &s.q).unwrap().pass);
    }

    #[test]
    fn field_csv_round_trips(u in field()) {
        let back = read_field_csv(&field_csv(&u), u.grid()).unwrap();
        prop_assert_eq!(back.values(), u.values());
    }

    #[test]
    fn float_text_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
