use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conformal::{curvature_package, ConformalChart, WeylStructure};
use crate::embedding::{
    fundamental_form, mixed_schouten, relative_schouten, EmbeddingStructures,
    GeodesyClass, Immersion,
};
use crate::error::Error;
use crate::jets::{Expr, ScalarField};
use crate::randfield::{random_metric, random_point, random_polynomial};

use super::*;
use crate::conformal::MobiusStructure;

fn flat_data_with_random_fields(seed: u64, n: usize, r: usize) -> RealizationData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = RealizationData::trivial(n, r).unwrap();
    // Trace-free b0 on a flat base: opposite diagonal entries plus a
    // symmetric off-diagonal block per fiber index.
    let mut b0 = vec![ScalarField::zero(n); n * n * r];
    for alpha in 0..r {
        if n >= 2 {
            let p = ScalarField::new(random_polynomial(&mut rng, n, 2, 0.15), n).unwrap();
            let q = ScalarField::new(random_polynomial(&mut rng, n, 2, 0.15), n).unwrap();
            b0[(0 * n + 0) * r + alpha] = p.clone();
            b0[(1 * n + 1) * r + alpha] =
                ScalarField::new(Expr::neg(p.expr().clone()), n).unwrap();
            b0[(0 * n + 1) * r + alpha] = q.clone();
            b0[(1 * n + 0) * r + alpha] = q;
        }
        // For n = 1 the only trace-free form is zero.
    }
    data.b0 = b0;
    let mut a = Vec::new();
    for _ in 0..n * r {
        a.push(ScalarField::new(random_polynomial(&mut rng, n, 2, 0.1), n).unwrap());
    }
    let mut b = vec![ScalarField::zero(n); n * n];
    for i in 0..n {
        for j in i..n {
            let e = ScalarField::new(random_polynomial(&mut rng, n, 2, 0.1), n).unwrap();
            b[i * n + j] = e.clone();
            b[j * n + i] = e;
        }
    }
    data.a = a;
    data.b = b;
    data.f = ScalarField::new(random_polynomial(&mut rng, n, 2, 0.1), n).unwrap();
    data
}

#[test]
fn trivial_data_builds_a_product_metric() {
    let data = RealizationData::trivial(2, 2).unwrap();
    let total = build_total_metric(&data, &[vec![0.0, 0.0]]).unwrap();
    assert!(total.epsilon() > 0.05, "epsilon {}", total.epsilon());
    let chart = total.chart();
    for z in [
        vec![0.0f64, 0.0, 0.0, 0.0],
        vec![0.7, -0.3, 0.2, -0.4],
        vec![-1.0, 2.0, 1.5, 0.8],
    ] {
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                let got = chart.metric_field(i, j).eval(&z).unwrap();
                assert!((got - want).abs() < 1e-12, "entry ({i},{j}) = {got}");
            }
        }
    }
}

#[test]
fn symbolic_base_curvature_matches_the_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for n in [2usize, 3] {
        let g = random_metric(&mut rng, n, 2, 0.2);
        let base = base_geometry(n, &g).unwrap();
        let chart = ConformalChart::new(n, g.clone()).unwrap();
        let w = WeylStructure::levi_civita(&chart);
        for _ in 0..2 {
            let p = random_point(&mut rng, n, 0.3);
            let pkg = curvature_package(&w, &p).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let sym = ScalarField::new(base.ricci[i * n + j].clone(), n)
                        .unwrap()
                        .eval(&p)
                        .unwrap();
                    assert!(
                        (sym - pkg.ricci.get(&[i, j])).abs() < 1e-8,
                        "ricci ({i},{j}): symbolic {sym} vs direct {}",
                        pkg.ricci.get(&[i, j])
                    );
                }
            }
            let scal = ScalarField::new(base.scal.clone(), n)
                .unwrap()
                .eval(&p)
                .unwrap();
            assert!((scal - pkg.scal).abs() < 1e-8);
        }
    }
}

#[test]
fn ricci_table_matches_the_built_metric() {
    for (seed, n, r) in [(7u64, 2usize, 2usize), (8, 1, 2), (9, 2, 1), (10, 2, 3)] {
        let data = flat_data_with_random_fields(seed, n, r);
        let total = build_total_metric(&data, &[vec![0.0; n]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..2 {
            let p = random_point(&mut rng, n, 0.3);
            let res = ricci_table_residual(&data, &total, &p).unwrap();
            assert!(res < 1e-6, "n={n} r={r}: ricci table residual {res:.3e}");
        }
    }
}

#[test]
fn covariant_table_matches_the_christoffel_jets() {
    for (seed, n, r) in [(17u64, 2usize, 2usize), (18, 1, 2), (19, 2, 1)] {
        let data = flat_data_with_random_fields(seed, n, r);
        let total = build_total_metric(&data, &[vec![0.0; n]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..2 {
            let p = random_point(&mut rng, n, 0.3);
            let res = covariant_table_residual(&data, &total, &p).unwrap();
            assert!(res < 1e-6, "n={n} r={r}: covariant table residual {res:.3e}");
        }
    }
}

#[test]
fn round_trip_recovers_the_prescribed_invariants() {
    let n = 2usize;
    let r = 2usize;
    for seed in [21u64, 22, 23] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut geometry = RealizationData::trivial(n, r).unwrap();
        let mut b0 = vec![ScalarField::zero(n); n * n * r];
        for alpha in 0..r {
            let p = ScalarField::new(random_polynomial(&mut rng, n, 2, 0.15), n).unwrap();
            let q = ScalarField::new(random_polynomial(&mut rng, n, 2, 0.15), n).unwrap();
            b0[(0 * n + 0) * r + alpha] = p.clone();
            b0[(1 * n + 1) * r + alpha] =
                ScalarField::new(Expr::neg(p.expr().clone()), n).unwrap();
            b0[(0 * n + 1) * r + alpha] = q.clone();
            b0[(1 * n + 0) * r + alpha] = q;
        }
        geometry.b0 = b0;
        let mu_target: Vec<ScalarField> = (0..n * r)
            .map(|_| ScalarField::new(random_polynomial(&mut rng, n, 2, 0.15), n).unwrap())
            .collect();
        let mut rho_target = vec![ScalarField::zero(n); n * n];
        for i in 0..n {
            for j in i..n {
                let e =
                    ScalarField::new(random_polynomial(&mut rng, n, 2, 0.15), n).unwrap();
                rho_target[i * n + j] = e.clone();
                rho_target[j * n + i] = e;
            }
        }
        let source_h = vec![ScalarField::zero(n); n * n];
        let solved =
            solve_prescription(&geometry, &mu_target, &rho_target, Some(&source_h))
                .unwrap();
        let total = build_total_metric(&solved, &[vec![0.0; n]]).unwrap();
        let imm = total.zero_section().unwrap();
        let w = WeylStructure::levi_civita(total.chart());
        let mob = MobiusStructure::flat(imm.induced_chart()).unwrap();
        let structures = EmbeddingStructures::with_source_mobius(&mob);
        for _ in 0..3 {
            let p = random_point(&mut rng, n, 0.25);
            let ff = fundamental_form(&imm, &w, &p).unwrap();
            for i in 0..n {
                for j in 0..n {
                    for alpha in 0..r {
                        let want =
                            solved.b0[(i * n + j) * r + alpha].eval(&p).unwrap();
                        let got = ff.b0_at(i, j, alpha);
                        assert!(
                            (got - want).abs() < 1e-5,
                            "seed {seed}: b0[{i}{j}{alpha}] {got} vs {want}"
                        );
                    }
                }
            }
            assert!(ff.h_sup_norm() < 1e-8, "mean curvature {}", ff.h_sup_norm());
            let mixed = mixed_schouten(&imm, &w, structures.clone(), &p).unwrap();
            for i in 0..n {
                for alpha in 0..r {
                    let want = mu_target[i * r + alpha].eval(&p).unwrap();
                    let got = mixed.at(i, alpha);
                    assert!(
                        (got - want).abs() < 1e-5,
                        "seed {seed}: mu[{i}{alpha}] {got} vs {want}"
                    );
                }
            }
            let rho = relative_schouten(&imm, &w, structures.clone(), &p).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let want = rho_target[i * n + j].eval(&p).unwrap();
                    let got = rho.get(&[i, j]);
                    assert!(
                        (got - want).abs() < 1e-5,
                        "seed {seed}: rho[{i}{j}] {got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn rotating_frame_scenario_verifies_all_identities() {
    let report = section5_scenario().unwrap();
    assert!(report.epsilon > 1e-3, "epsilon {}", report.epsilon);
    assert!(report.a_sup < 1e-10, "a_sup {}", report.a_sup);
    assert!(report.b_sup < 1e-10, "b_sup {}", report.b_sup);
    assert!(
        report.frame_identity_residual < 1e-10,
        "frame identities {:.3e}",
        report.frame_identity_residual
    );
    assert!(
        report.geodesic_residual < 1e-6,
        "geodesic residual {:.3e}",
        report.geodesic_residual
    );
    assert!(
        report.schouten_residual < 1e-6,
        "schouten residual {:.3e}",
        report.schouten_residual
    );
    assert!(report.b0_min > 0.9, "b0_min {}", report.b0_min);
    assert_eq!(report.classification, GeodesyClass::NotUmbilical);
}

#[test]
fn adapted_factor_on_a_plane_is_linear_in_the_height() {
    // Flat slice x3 = 0 with a constant target: f = h0 · x3.
    let chart = ConformalChart::euclidean(3);
    let imm = Immersion::parse(2, &chart, &["x1", "x2", "0"]).unwrap();
    let h0 = 0.25;
    let f = adapted_factor(&imm, &ScalarField::constant(h0, 2)).unwrap();
    for q in [
        vec![0.0, 0.0, 0.0],
        vec![0.5, -0.3, 0.8],
        vec![-1.0, 2.0, -0.6],
    ] {
        let want = h0 * q[2];
        let got = f.eval(&q).unwrap();
        assert!((got - want).abs() < 1e-12, "f({q:?}) = {got}, want {want}");
    }
}

#[test]
fn adapted_factor_prescribes_the_mean_curvature_on_a_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let n = 2usize;
    let chart = ConformalChart::euclidean(3);
    let q = random_polynomial(&mut rng, n, 3, 0.3);
    let comps = vec![
        ScalarField::coordinate(0, n),
        ScalarField::coordinate(1, n),
        ScalarField::new(q, n).unwrap(),
    ];
    let imm = Immersion::new(n, &chart, comps).unwrap();
    let target = ScalarField::parse("0.1 + 0.2*x1 - 0.1*x2", n).unwrap();
    let f = adapted_factor(&imm, &target).unwrap();
    // The rescaled gauge e^{−2f}·g corresponds to the Weyl offset
    // θ = −df; its mean curvature along the graph, measured against
    // the upward normal, must equal the target.
    let theta: Vec<ScalarField> = (0..3)
        .map(|i| {
            ScalarField::new(Expr::neg(f.expr().clone().derivative(i)), 3).unwrap()
        })
        .collect();
    let w = WeylStructure::new(&chart, theta).unwrap();
    for _ in 0..3 {
        let p = random_point(&mut rng, n, 0.3);
        // f vanishes on the graph itself.
        let on_graph = imm.map_point(&p).unwrap();
        assert!(f.eval(&on_graph).unwrap().abs() < 1e-12);
        // Orientation of the Gram-Schmidt normal against the upward
        // unit normal (−∇q, 1)/W.
        let fr = crate::embedding::frame_at(&imm, &w, &p, 1).unwrap();
        let xi = fr.normal_vector(0);
        let qx = imm.components()[2].derivative(0).eval(&p).unwrap();
        let qy = imm.components()[2].derivative(1).eval(&p).unwrap();
        let wv = (1.0 + qx * qx + qy * qy).sqrt();
        let upward = [-qx / wv, -qy / wv, 1.0 / wv];
        let sign = (xi[0] * upward[0] + xi[1] * upward[1] + xi[2] * upward[2]).signum();
        let ff = fundamental_form(&imm, &w, &p).unwrap();
        let got = ff.h_sup_norm();
        let want = (sign * target.eval(&p).unwrap()).abs();
        assert!(
            (got - want).abs() < 1e-7,
            "mean curvature {got} vs target {want} at {p:?}"
        );
    }
}

#[test]
fn degenerate_inputs_are_rejected() {
    let n = 2usize;
    // Rank-one fibers force the mixed target to vanish.
    let geometry = RealizationData::trivial(n, 1).unwrap();
    let mu = vec![ScalarField::constant(0.3, n); n];
    let rho = vec![ScalarField::zero(n); n * n];
    let source_h = vec![ScalarField::zero(n); n * n];
    let err = solve_prescription(&geometry, &mu, &rho, Some(&source_h)).unwrap_err();
    assert!(matches!(err, Error::Scenario(_)), "got {err:?}");

    // A fundamental form with a trace is rejected.
    let mut bad = RealizationData::trivial(n, 2).unwrap();
    bad.b0[0] = ScalarField::constant(1.0, n);
    let err = RealizationData::new(
        bad.n, bad.r, bad.g, bad.g_nu, bad.omega, bad.b0, bad.a, bad.b, bad.f,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Domain(_)), "got {err:?}");

    // The fiber metric must be positive definite.
    let t = RealizationData::trivial(n, 2).unwrap();
    let err = RealizationData::new(
        t.n,
        t.r,
        t.g.clone(),
        vec![1.0, 0.0, 0.0, -1.0],
        t.omega.clone(),
        t.b0.clone(),
        t.a.clone(),
        t.b.clone(),
        t.f.clone(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::SingularMetric), "got {err:?}");

    // A base Schouten-Weyl tensor is required for low base dimension.
    let g2 = RealizationData::trivial(2, 2).unwrap();
    let mu = vec![ScalarField::zero(2); 4];
    let rho = vec![ScalarField::zero(2); 4];
    let err = solve_prescription(&g2, &mu, &rho, None).unwrap_err();
    assert!(matches!(err, Error::MissingStructure(_)), "got {err:?}");

    // Adapted factors only make sense for coordinate graphs in a flat
    // gauge.
    let chart = ConformalChart::euclidean(4);
    let imm = Immersion::parse(2, &chart, &["x1", "x2", "0", "0"]).unwrap();
    let err = adapted_factor(&imm, &ScalarField::zero(2)).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)), "got {err:?}");
}
