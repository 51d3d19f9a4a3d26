//! Identities that tie modules together.

use bosonkit::algebra::{conjugate, normal_order_wick, parse_expr, BosonExpr, Limits};
use bosonkit::coherent::{normalization, RhoSequence};
use bosonkit::deformed::{canonical_value, deformed_ogf, BoxFunction};
use bosonkit::series::{big_rat, rat};
use bosonkit::sheffer::{catalog, sheffer_sequence, CatalogName};
use bosonkit::stirling::{bell_polynomial, classic_table, negative_excess, stirling2, HomogSpec, Method, NegativeInput};
use proptest::prelude::*;

#[test]
fn bell_catalog_entry_is_the_exponential_polynomials() {
    let bell = catalog(CatalogName::Bell, 10).unwrap();
    for n in 0..=8 {
        assert_eq!(sheffer_sequence(&bell.pair, n).unwrap(), bell_polynomial(n));
    }
}

#[test]
fn canonical_box_gives_classic_columns() {
    let t = classic_table(10);
    for k in 1..=5 {
        let col = deformed_ogf(k, &BoxFunction::Canonical, 3, 10).unwrap().ogf_coeffs();
        for n in 0..=10 {
            assert_eq!(col[n], t.entry(n, k), "n={n} k={k}");
            if n >= 1 {
                assert_eq!(canonical_value(n, k, 3), big_rat(stirling2(n, k, Method::Explicit)));
            }
        }
    }
}

#[test]
fn factorial_weight_normalizes_to_exponential() {
    let rho = RhoSequence::factorial(400);
    for x in [0.1, 1.0, 7.5] {
        let n = normalization(&rho, x, 1e-16).unwrap();
        assert!((n.value - f64::exp(x)).abs() < 1e-12 * f64::exp(x));
    }
}

#[test]
fn negative_excess_through_conjugation() {
    let l = Limits::default();
    let h = HomogSpec::from_ints(-2, &[(1, 1), (2, 3)]).unwrap();
    let t = negative_excess(&NegativeInput::Homog(h.clone()), 4).unwrap();
    for n in 1..=4 {
        let direct = normal_order_wick(&BosonExpr::power(h.to_expr(), n), &l).unwrap();
        assert_eq!(t.normal_form(n as usize), direct);
        let mirrored = normal_order_wick(&conjugate(&BosonExpr::power(h.to_expr(), n)), &l).unwrap();
        assert_eq!(mirrored.to_expr(), conjugate(&direct.to_expr()));
    }
    assert_eq!(t.entry(1, 2), rat(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rendered_normal_forms_parse_back(text in "(ad|a)( (ad|a)){0,7}", n in 1u32..4) {
        let l = Limits::default();
        let e = BosonExpr::power(parse_expr(&text).unwrap(), n);
        let nf = normal_order_wick(&e, &l).unwrap();
        let again = normal_order_wick(&parse_expr(&nf.to_string()).unwrap(), &l).unwrap();
        prop_assert_eq!(again, nf);
    }
}
