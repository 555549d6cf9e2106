//! Property-based tests: differentiation rules of the jet arithmetic,
//! linearity and inversion properties of the tensor maps, and parser
//! round trips, over randomized inputs.

use std::sync::Arc;

use num_rational::Rational64;
use proptest::prelude::*;

use confgeo::jets::{Expr, ScalarField};
use confgeo::tensor::{h_map, ricci_contraction, suspension, PointMetric, Variance, WeightedTensor};

fn small_coeff() -> impl Strategy<Value = f64> {
    // Bounded away from huge magnitudes so products stay well scaled.
    (-100i32..=100).prop_map(|k| k as f64 / 100.0)
}

fn poly_field(dim: usize) -> impl Strategy<Value = ScalarField> {
    // Random degree-2 polynomial in `dim` variables.
    let terms = prop::collection::vec((small_coeff(), 0..dim, 0..dim), 1..5);
    (small_coeff(), terms).prop_map(move |(c0, terms)| {
        let mut e = Expr::constant(c0);
        for (c, i, j) in terms {
            e = Expr::add(
                e,
                Expr::mul(Expr::constant(c), Expr::mul(Expr::var(i), Expr::var(j))),
            );
        }
        ScalarField::new(e, dim).unwrap()
    })
}

fn nonneg_poly_field(dim: usize) -> impl Strategy<Value = ScalarField> {
    let terms = prop::collection::vec((small_coeff(), 0..dim, 0..dim), 1..5);
    (small_coeff(), terms).prop_map(move |(c0, terms)| {
        let mut e = Expr::constant(c0.abs());
        for (c, i, j) in terms {
            let term = Expr::mul(
                Expr::constant(c.abs()),
                Expr::mul(Expr::var(i), Expr::var(j)),
            );
            e = if c < 0.0 { Expr::sub(e, term) } else { Expr::add(e, term) };
        }
        ScalarField::new(e, dim).unwrap()
    })
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(small_coeff(), dim)
}

fn spd_metric(n: usize) -> impl Strategy<Value = Arc<PointMetric<f64>>> {
    prop::collection::vec(small_coeff(), n * n).prop_map(move |raw| {
        // δ + 0.3·(LᵀL-ish symmetric part) is positive definite for
        // these coefficient sizes.
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = 0.15 * (raw[i * n + j] + raw[j * n + i])
                    + if i == j { 1.0 } else { 0.0 };
            }
        }
        PointMetric::new(n, &entries).unwrap()
    })
}

fn bilinear(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(small_coeff(), n * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Jets obey the product rule: ∂(fg) = f·∂g + g·∂f, checked on
    /// all first partials of the order-2 jet of the product.
    #[test]
    fn jet_product_rule(f in poly_field(3), g in poly_field(3), p in point(3)) {
        let fg = ScalarField::new(
            Expr::mul(f.expr().clone(), g.expr().clone()), 3).unwrap();
        let jf = f.jet::<f64>(&p, 2).unwrap();
        let jg = g.jet::<f64>(&p, 2).unwrap();
        let jfg = fg.jet::<f64>(&p, 2).unwrap();
        for i in 0..3 {
            let want = jf.value() * jg.d(i) + jg.value() * jf.d(i);
            prop_assert!((jfg.d(i) - want).abs() < 1e-9 * (1.0 + want.abs()));
        }
    }

    /// Symbolic differentiation matches the jet derivative.
    #[test]
    fn symbolic_derivative_matches_jet_partial(f in poly_field(3), p in point(3)) {
        for i in 0..3 {
            let sym: f64 = f.derivative(i).eval(&p).unwrap();
            let jet = f.jet::<f64>(&p, 1).unwrap();
            prop_assert!((sym - jet.d(i)).abs() < 1e-10 * (1.0 + sym.abs()));
        }
    }

    /// The suspension and its Ricci contraction are both linear, so the
    /// composite is linear too.
    #[test]
    fn suspension_is_linear(
        metric in spd_metric(3),
        a in bilinear(3),
        b in bilinear(3),
        s in small_coeff(),
    ) {
        let variance = [Variance::Co, Variance::Co];
        let w = Rational64::from_integer(0);
        let ta = WeightedTensor::from_coeffs(&metric, &variance, w, a.clone()).unwrap();
        let tb = WeightedTensor::from_coeffs(&metric, &variance, w, b.clone()).unwrap();
        let combo = ta.scale(s).add(&tb);
        let lhs = ricci_contraction(&suspension(&combo).unwrap()).unwrap();
        let rhs = ricci_contraction(&suspension(&ta).unwrap()).unwrap()
            .scale(s)
            .add(&ricci_contraction(&suspension(&tb).unwrap()).unwrap());
        prop_assert!(lhs.sub(&rhs).sup_norm() < 1e-9);
    }

    /// The Schouten-type section inverts the Ricci contraction of the
    /// suspension in every dimension where it is defined.
    #[test]
    fn h_map_round_trip(metric in spd_metric(4), a in bilinear(4)) {
        let variance = [Variance::Co, Variance::Co];
        let w = Rational64::from_integer(0);
        let t = WeightedTensor::from_coeffs(&metric, &variance, w, a).unwrap();
        let h = h_map(&t).unwrap();
        let back = ricci_contraction(&suspension(&h).unwrap()).unwrap();
        prop_assert!(back.sub(&t).sup_norm() < 1e-9);
    }

    /// Printing an expression and re-parsing it evaluates identically.
    /// The grammar has no unary minus, so the subtraction form
    /// `a - b` is used instead of negative literals.
    #[test]
    fn parser_round_trips_printed_expressions(f in nonneg_poly_field(2), p in point(2)) {
        let printed = f.expr().to_string();
        let reparsed = ScalarField::parse(&printed, 2).unwrap();
        let a: f64 = f.eval(&p).unwrap();
        let b: f64 = reparsed.eval(&p).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    /// The generic scalar type works in single precision: f32 jets
    /// agree with f64 jets to single-precision accuracy.
    #[test]
    fn f32_jets_agree_with_f64(f in poly_field(2), p in point(2)) {
        let p32: Vec<f32> = p.iter().map(|&x| x as f32).collect();
        let j64 = f.jet::<f64>(&p, 2).unwrap();
        let j32 = f.jet::<f32>(&p32, 2).unwrap();
        prop_assert!((j64.value() as f32 - j32.value()).abs() < 1e-3);
        for i in 0..2 {
            prop_assert!((j64.d(i) as f32 - j32.d(i)).abs() < 1e-3);
        }
    }
}
