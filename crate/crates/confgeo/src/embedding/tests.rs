use super::*;
use crate::conformal::{mobius_canonical, Density, MobiusStructure, WeylStructure};
use crate::randfield::{random_one_form, random_point, random_polynomial};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Product chart ℝ³ × S² with the unit round sphere in stereographic
/// coordinates (x4, x5).
fn product_r3_s2() -> Arc<ConformalChart> {
    let g = "4 / (1 + x4^2 + x5^2)^2";
    let mut rows = vec!["0"; 25];
    rows[0] = "1";
    rows[6] = "1";
    rows[12] = "1";
    rows[18] = g;
    rows[24] = g;
    ConformalChart::parse(5, &rows).unwrap()
}

/// Unit sphere S^{m−1} ⊂ ℝ^m in stereographic source coordinates.
fn stereographic_sphere(m: usize) -> Immersion {
    let n = m - 1;
    let sq: Vec<String> = (1..=n).map(|a| format!("x{a}^2")).collect();
    let denom = format!("(1 + {})", sq.join(" + "));
    let mut comps: Vec<String> =
        (1..=n).map(|a| format!("2*x{a} / {denom}")).collect();
    comps.push(format!("(1 - {}) / {denom}", sq.join(" - ")));
    let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
    Immersion::parse(n, &ConformalChart::euclidean(m), &refs).unwrap()
}

/// Codimension-two graph surface in flat ℝ⁴ with nonzero B₀, H, and
/// normal curvature.
fn graph_surface_r4() -> Immersion {
    Immersion::parse(
        2,
        &ConformalChart::euclidean(4),
        &[
            "x1",
            "x2",
            "0.3*x1^2 - 0.2*x1*x2 + 0.1*x2^3",
            "0.1*x2^2 + 0.15*x1*x2 + 0.05*x1^3",
        ],
    )
    .unwrap()
}

fn constant_fields(values: &[f64], dim: usize) -> Vec<ScalarField> {
    values
        .iter()
        .map(|&v| ScalarField::constant(v, dim))
        .collect()
}

#[test]
fn plane_in_flat_space_has_vanishing_invariants() {
    let chart = ConformalChart::euclidean(3);
    let imm = Immersion::parse(2, &chart, &["x1", "x2", "0"]).unwrap();
    let w = WeylStructure::levi_civita(&chart);
    let mob = MobiusStructure::flat(imm.induced_chart()).unwrap();
    let structures = EmbeddingStructures::with_source_mobius(&mob);
    let p = [0.3f64, -0.2];
    let ff = fundamental_form(&imm, &w, &p).unwrap();
    assert!(sup(&ff.b) < 1e-12);
    assert!(ff.h_sup_norm() < 1e-12);
    let kappa = normal_curvature_kappa(&imm, &w, &p).unwrap();
    assert!(kappa.sup_norm() < 1e-12);
    let mu = mixed_schouten(&imm, &w, structures, &p).unwrap();
    assert!(mu.sup_norm() < 1e-12);
    let rho = relative_schouten(&imm, &w, structures, &p).unwrap();
    assert!(rho.sup_norm() < 1e-12);
    let grid = vec![vec![0.0f64, 0.0], vec![0.3, -0.2], vec![-0.1, 0.4]];
    let report =
        classify_geodesy(&imm, &w, structures, &grid, GEODESY_TOLERANCE).unwrap();
    assert_eq!(report.class, GeodesyClass::StronglyGeodesic);
    assert_eq!(report.class.to_string(), "strongly_geodesic");
}

#[test]
fn graph_fundamental_form_matches_the_hessian_at_the_origin() {
    // For a graph x3 = q(x1, x2) the fundamental form at a critical
    // point of q is the Hessian of q tensor the unit normal.
    let chart = ConformalChart::euclidean(3);
    let imm = Immersion::parse(
        2,
        &chart,
        &["x1", "x2", "0.3*x1^2 - 0.1*x1*x2 + 0.25*x2^2 + 0.2*x1^2*x2"],
    )
    .unwrap();
    let w = WeylStructure::levi_civita(&chart);
    let ff = fundamental_form(&imm, &w, &[0.0f64, 0.0]).unwrap();
    let hess = [[0.6, -0.1], [-0.1, 0.5]];
    for a in 0..2 {
        for b in 0..2 {
            assert!((ff.b_at(a, b, 0) - hess[a][b]).abs() < 1e-12);
        }
    }
    let mean = 0.5 * (hess[0][0] + hess[1][1]);
    assert!((ff.h[0] - mean).abs() < 1e-12);
    assert!((ff.b0_at(0, 0, 0) - (hess[0][0] - mean)).abs() < 1e-12);
    assert!((ff.b0_at(0, 1, 0) - hess[0][1]).abs() < 1e-12);
}

#[test]
fn round_sphere_is_umbilical_with_unit_mean_curvature() {
    let imm = stereographic_sphere(3);
    let w = WeylStructure::levi_civita(imm.ambient_chart());
    for p in [[0.3f64, -0.2], [0.1, 0.4], [0.0, 0.0]] {
        let ff = fundamental_form(&imm, &w, &p).unwrap();
        assert!(ff.b0_sup_norm() < 1e-9, "B0 at {p:?}");
        assert!((ff.h_norm_squared() - 1.0).abs() < 1e-9, "|H| at {p:?}");
    }
}

#[test]
fn fundamental_form_transforms_by_the_normal_offset() {
    // Under ∇ → ∇ + η̃ the fundamental form changes by −η^⊥·c: the
    // mean curvature absorbs the normal part of η and B₀ is invariant.
    let imm = graph_surface_r4();
    let w = WeylStructure::levi_civita(imm.ambient_chart());
    let eta = [
        ScalarField::parse("0.4 + 0.3*x2", 4).unwrap(),
        ScalarField::parse("0 - 0.2*x1", 4).unwrap(),
        ScalarField::parse("0.1*x3 - 0.2", 4).unwrap(),
        ScalarField::parse("0.2 - 0.1*x4", 4).unwrap(),
    ];
    let w_prime = w.offset(&eta).unwrap();
    let p = [0.2f64, -0.1];
    let fr = frame_at(&imm, &w, &p, 1).unwrap();
    let q = imm.map_point(&p).unwrap();
    let eta_vals: Vec<f64> = eta.iter().map(|f| f.eval(&q).unwrap()).collect();
    let ff = fundamental_form(&imm, &w, &p).unwrap();
    let ff_prime = fundamental_form(&imm, &w_prime, &p).unwrap();
    for alpha in 0..2 {
        let xi = fr.normal_vector(alpha);
        let eta_perp: f64 = (0..4).map(|i| eta_vals[i] * xi[i]).sum();
        assert!((ff_prime.h[alpha] - ff.h[alpha] + eta_perp).abs() < 1e-10);
        for a in 0..2 {
            for b in 0..2 {
                let gn = fr.metric_n().g(a, b);
                let lhs = ff_prime.b_at(a, b, alpha) - ff.b_at(a, b, alpha);
                assert!((lhs + eta_perp * gn).abs() < 1e-10);
                assert!(
                    (ff_prime.b0_at(a, b, alpha) - ff.b0_at(a, b, alpha)).abs()
                        < 1e-10
                );
            }
        }
    }
}

#[test]
fn schouten_type_tensors_are_weyl_independent() {
    let imm = graph_surface_r4();
    let w = WeylStructure::levi_civita(imm.ambient_chart());
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let eta = random_one_form(&mut rng, 4, 1, 0.4);
    let w_prime = w.offset(&eta).unwrap();
    let mob = MobiusStructure::flat(imm.induced_chart()).unwrap();
    let structures = EmbeddingStructures::with_source_mobius(&mob);
    for p in [[0.2f64, -0.1], [-0.15, 0.25]] {
        let mu = mixed_schouten(&imm, &w, structures, &p).unwrap();
        let mu_prime = mixed_schouten(&imm, &w_prime, structures, &p).unwrap();
        let mu_diff: Vec<f64> = mu
            .mu
            .iter()
            .zip(&mu_prime.mu)
            .map(|(a, b)| a - b)
            .collect();
        assert!(sup(&mu_diff) < 1e-7, "mu at {p:?}: {}", sup(&mu_diff));
        let rho = relative_schouten(&imm, &w, structures, &p).unwrap();
        let rho_prime = relative_schouten(&imm, &w_prime, structures, &p).unwrap();
        assert!(rho.sub(&rho_prime).sup_norm() < 1e-7, "rho at {p:?}");
        assert!(rho.skew_part().sup_norm() < 1e-9, "rho symmetry at {p:?}");
        let kappa = normal_curvature_kappa(&imm, &w, &p).unwrap();
        let kappa_prime = normal_curvature_kappa(&imm, &w_prime, &p).unwrap();
        let kappa_diff: Vec<f64> = kappa
            .kappa
            .iter()
            .zip(&kappa_prime.kappa)
            .map(|(a, b)| a - b)
            .collect();
        assert!(sup(&kappa_diff) < 1e-7, "kappa at {p:?}");
        assert!(kappa.skew_residual() < 1e-9);
    }
}

#[test]
fn normal_curvature_is_nonzero_for_a_generic_surface_in_r4() {
    let chart = ConformalChart::euclidean(4);
    let imm = Immersion::parse(2, &chart, &["x1", "x2", "x1^2", "x1*x2"]).unwrap();
    let w = WeylStructure::levi_civita(&chart);
    let kappa = normal_curvature_kappa(&imm, &w, &[0.0f64, 0.0]).unwrap();
    assert!(kappa.sup_norm() > 0.5, "kappa = {}", kappa.sup_norm());
    assert!(kappa.skew_residual() < 1e-9);
    // A flat plane in ℝ⁴ has flat normal bundle.
    let plane = Immersion::parse(2, &chart, &["x1", "x2", "0", "0"]).unwrap();
    let kappa0 = normal_curvature_kappa(&plane, &w, &[0.3f64, 0.1]).unwrap();
    assert!(kappa0.sup_norm() < 1e-12);
}

#[test]
fn hypersurface_mixed_schouten_vanishes() {
    // Codimension one forces μ ≡ 0 (the Gauss-Codazzi relation), for
    // any ambient metric and any ambient Weyl structure.
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    for m in [3usize, 4] {
        let n = m - 1;
        let metric = crate::randfield::random_metric(&mut rng, m, 2, 0.2);
        let chart = ConformalChart::new(m, metric).unwrap();
        let theta = random_one_form(&mut rng, m, 1, 0.3);
        let w = WeylStructure::new(&chart, theta).unwrap();
        let mut comps: Vec<ScalarField> = (0..n)
            .map(|a| ScalarField::coordinate(a, n))
            .collect();
        comps.push(
            ScalarField::new(random_polynomial(&mut rng, n, 3, 0.3), n).unwrap(),
        );
        let imm = Immersion::new(n, &chart, comps).unwrap();
        for _ in 0..2 {
            let p = random_point(&mut rng, n, 0.2);
            let mu =
                mixed_schouten(&imm, &w, EmbeddingStructures::none(), &p).unwrap();
            assert!(mu.sup_norm() < 1e-6, "m={m}: mu = {}", mu.sup_norm());
        }
    }
}

#[test]
fn tangential_offset_shifts_the_divergence_of_b0() {
    // For an offset that is tangential at the evaluation point,
    // (δ^{∇'}B₀ − δ^∇B₀)(∂_b) = (n−1) B₀(∂_b, θ♯).
    let imm = graph_surface_r4();
    let w = WeylStructure::levi_civita(imm.ambient_chart());
    let p = [0.2f64, -0.1];
    let fr = frame_at(&imm, &w, &p, 2).unwrap();
    let (n, m, r) = (fr.n, fr.m, fr.r);
    let theta_n = [0.4f64, -0.3];
    // Tangential lift of θ^N at p, as a constant ambient covector.
    let mut eta_vals = vec![0.0f64; m];
    for i in 0..m {
        for a in 0..n {
            for b in 0..n {
                for j in 0..m {
                    eta_vals[i] += theta_n[a]
                        * fr.gninv[a * n + b].value()
                        * fr.g_amb[i * m + j].value()
                        * fr.dphi[j * n + b].value();
                }
            }
        }
    }
    let w_prime = w.offset(&constant_fields(&eta_vals, m)).unwrap();
    let delta = divergence_b0(&imm, &w, &p).unwrap();
    let delta_prime = divergence_b0(&imm, &w_prime, &p).unwrap();
    // θ♯ in source coordinates.
    let mut s = vec![0.0f64; n];
    for d in 0..n {
        for a in 0..n {
            s[d] += fr.gninv[d * n + a].value() * theta_n[a];
        }
    }
    for b in 0..n {
        for beta in 0..r {
            let mut expected = 0.0;
            for d in 0..n {
                expected += fr.b0[(b * n + d) * r + beta].value() * s[d];
            }
            expected *= (n - 1) as f64;
            let got = delta_prime[b * r + beta] - delta[b * r + beta];
            assert!(
                (got - expected).abs() < 1e-8,
                "b={b} beta={beta}: {got} vs {expected}"
            );
        }
    }
}

#[test]
fn unit_three_sphere_is_strongly_geodesic() {
    let imm = stereographic_sphere(4);
    let w = WeylStructure::levi_civita(imm.ambient_chart());
    let structures = EmbeddingStructures::none();
    for p in [[0.3f64, -0.2, 0.5], [0.1, 0.2, -0.3]] {
        let ff = fundamental_form(&imm, &w, &p).unwrap();
        assert!(ff.b0_sup_norm() < 1e-8);
        assert!((ff.h_norm_squared() - 1.0).abs() < 1e-8);
        let mu = mixed_schouten(&imm, &w, structures, &p).unwrap();
        assert!(mu.sup_norm() < 1e-8);
        let rho = relative_schouten(&imm, &w, structures, &p).unwrap();
        assert!(rho.sup_norm() < 1e-8, "rho = {}", rho.sup_norm());
    }
    let grid = vec![vec![0.3f64, -0.2, 0.5], vec![0.1, 0.2, -0.3]];
    let report =
        classify_geodesy(&imm, &w, structures, &grid, GEODESY_TOLERANCE).unwrap();
    assert_eq!(report.class, GeodesyClass::StronglyGeodesic);
}

#[test]
fn flat_slice_of_a_product_is_weakly_geodesic() {
    // ℝ³ × {pt} inside ℝ³ × S² is totally geodesic with μ ≡ 0 but
    // ρ = −(1/12)·g, so it is weakly and not strongly geodesic.
    let chart = product_r3_s2();
    let imm =
        Immersion::parse(3, &chart, &["x1", "x2", "x3", "0.4", "0 - 0.3"]).unwrap();
    let w = WeylStructure::levi_civita(&chart);
    let structures = EmbeddingStructures::none();
    for p in [[0.1f64, -0.2, 0.3], [0.0, 0.0, 0.0]] {
        let ff = fundamental_form(&imm, &w, &p).unwrap();
        assert!(sup(&ff.b) < 1e-12);
        let mu = mixed_schouten(&imm, &w, structures, &p).unwrap();
        assert!(mu.sup_norm() < 1e-9);
        let rho = relative_schouten(&imm, &w, structures, &p).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let expected = if a == b { -1.0 / 12.0 } else { 0.0 };
                assert!(
                    (rho.get(&[a, b]) - expected).abs() < 1e-9,
                    "rho[{a}{b}] = {}",
                    rho.get(&[a, b])
                );
            }
        }
    }
    let grid = vec![vec![0.1f64, -0.2, 0.3], vec![0.0, 0.0, 0.0]];
    let report =
        classify_geodesy(&imm, &w, structures, &grid, GEODESY_TOLERANCE).unwrap();
    assert_eq!(report.class, GeodesyClass::WeaklyGeodesic);
    assert!(report.rho_sup > 0.05);
}

#[test]
fn mixed_plane_matches_the_relative_schouten_oracle() {
    // N = (line in ℝ³) × (great circle in S²) inside ℝ³ × S²: totally
    // geodesic, flat induced metric, and ρ is diagonal with entries
    // (−1/12, g^N_22/4) in the product coordinates.
    let chart = product_r3_s2();
    let imm = Immersion::parse(2, &chart, &["x1", "0", "0", "x2", "0"]).unwrap();
    let w = WeylStructure::levi_civita(&chart);
    let mob = MobiusStructure::flat(imm.induced_chart()).unwrap();
    let structures = EmbeddingStructures::with_source_mobius(&mob);
    let p = [0.3f64, 0.5];
    let ff = fundamental_form(&imm, &w, &p).unwrap();
    assert!(sup(&ff.b) < 1e-12);
    let g22 = imm.induced_chart().metric_field(1, 1).eval(&p).unwrap();
    let rho = relative_schouten(&imm, &w, structures, &p).unwrap();
    assert!((rho.get(&[0, 0]) + 1.0 / 12.0).abs() < 1e-10);
    assert!(rho.get(&[0, 1]).abs() < 1e-10);
    assert!((rho.get(&[1, 1]) - g22 / 4.0).abs() < 1e-10);
}

#[test]
fn induced_mobius_matches_the_source_operator_up_to_rho() {
    // The source Möbius operator differs from the induced one by the
    // trace-free relative Schouten tensor acting on the density.
    let chart = product_r3_s2();
    let imm = Immersion::parse(2, &chart, &["x1", "0", "0", "x2", "0"]).unwrap();
    let w = WeylStructure::levi_civita(&chart);
    let mob = MobiusStructure::flat(imm.induced_chart()).unwrap();
    let structures = EmbeddingStructures::with_source_mobius(&mob);
    let l = Density::new(
        ScalarField::parse("1 + 0.3*x1 + 0.2*x1*x2", 2).unwrap(),
        Rational64::from_integer(1),
    );
    let p = [0.3f64, 0.5];
    let wn = imm.induced_weyl(&w).unwrap();
    let hess0 = hessian_weighted(&wn, &l, &p)
        .unwrap()
        .sym_part()
        .trace_free_part()
        .unwrap();
    let h0 = mobius_h0_at(&mob, &wn, &p).unwrap();
    let lambda = l.field.eval(&p).unwrap();
    let m_source = hess0.add(
        &h0.scale(lambda)
            .with_weight(Rational64::from_integer(-1)),
    );
    let m_ind = induced_mobius(&imm, &w, structures, &l, &p).unwrap();
    let rho0 = relative_schouten(&imm, &w, structures, &p)
        .unwrap()
        .trace_free_part()
        .unwrap();
    // The source operator differs from the induced one by −ρ₀ acting
    // on the density, with ρ oriented so the ambient Schouten term
    // enters positively.
    let residual = m_source
        .sub(&m_ind)
        .add(&rho0.scale(lambda).with_weight(Rational64::from_integer(-1)))
        .sup_norm();
    assert!(residual < 1e-7, "residual = {residual}");
    assert!(rho0.sup_norm() > 0.05, "oracle must not be vacuous");
    // Independence of the ambient Weyl structure.
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let eta = random_one_form(&mut rng, 5, 1, 0.4);
    let w_prime = w.offset(&eta).unwrap();
    let m_ind_prime = induced_mobius(&imm, &w_prime, structures, &l, &p).unwrap();
    assert!(m_ind.sub(&m_ind_prime).sup_norm() < 1e-8);
    assert!(m_ind.trace_c(0, 1).unwrap().coeffs()[0].abs() < 1e-10);
    assert!(m_ind.skew_part().sup_norm() < 1e-10);
}

#[test]
fn induced_mobius_matches_the_canonical_operator_on_a_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let chart = ConformalChart::euclidean(5);
    let mut comps: Vec<ScalarField> = (0..3)
        .map(|a| ScalarField::coordinate(a, 3))
        .collect();
    for _ in 0..2 {
        comps.push(ScalarField::new(random_polynomial(&mut rng, 3, 3, 0.25), 3).unwrap());
    }
    let imm = Immersion::new(3, &chart, comps).unwrap();
    let w = WeylStructure::levi_civita(&chart);
    let structures = EmbeddingStructures::none();
    let l = Density::new(
        ScalarField::parse("1 + 0.2*x1 - 0.1*x2*x3", 3).unwrap(),
        Rational64::from_integer(1),
    );
    for _ in 0..2 {
        let p = random_point(&mut rng, 3, 0.2);
        let m_source = mobius_canonical(imm.induced_chart(), &l, &p).unwrap();
        let m_ind = induced_mobius(&imm, &w, structures, &l, &p).unwrap();
        let lambda = l.field.eval(&p).unwrap();
        let rho0 = relative_schouten(&imm, &w, structures, &p)
            .unwrap()
            .trace_free_part()
            .unwrap();
        let residual = m_source
            .sub(&m_ind)
            .add(&rho0.scale(lambda).with_weight(Rational64::from_integer(-1)))
            .sup_norm();
        assert!(residual < 1e-7, "residual = {residual}");
    }
}

#[test]
fn induced_laplace_reproduces_the_circle_value() {
    // Flat line: the induced Laplace operator kills constants.
    let flat2 = ConformalChart::euclidean(2);
    let amb_mob = MobiusStructure::flat(&flat2).unwrap();
    let w = WeylStructure::levi_civita(&flat2);
    let half = Rational64::new(1, 2);
    let l = Density::constant(1.0, 1, half);
    let line = Immersion::parse(1, &flat2, &["x1", "0"]).unwrap();
    let structures = EmbeddingStructures {
        ambient_mobius: Some(&amb_mob),
        ..EmbeddingStructures::default()
    };
    let v = induced_laplace(&line, &w, structures, &l, &[0.2f64]).unwrap();
    assert!(v.abs() < 1e-12);
    // Circle of radius r: the operator on the unit constant density is
    // (1/4)(1/r²).
    let r = 0.7f64;
    let circle = Immersion::parse(
        1,
        &flat2,
        &["0.7*cos(x1)", "0.7*sin(x1)"],
    )
    .unwrap();
    let v = induced_laplace(&circle, &w, structures, &l, &[0.4f64]).unwrap();
    assert!((v - 0.25 / (r * r)).abs() < 1e-10, "got {v}");
    // Wrong density weight is rejected.
    let bad = Density::constant(1.0, 1, Rational64::from_integer(1));
    assert!(matches!(
        induced_laplace(&circle, &w, structures, &bad, &[0.4f64]),
        Err(Error::WeightMismatch { .. })
    ));
    // An ambient surface needs an attached Möbius structure.
    assert!(matches!(
        induced_laplace(&circle, &w, EmbeddingStructures::none(), &l, &[0.4f64]),
        Err(Error::MissingStructure(_))
    ));
}

#[test]
fn induced_laplace_is_weyl_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(75);
    let metric = crate::randfield::random_metric(&mut rng, 3, 2, 0.2);
    let chart = ConformalChart::new(3, metric).unwrap();
    let q1 = ScalarField::new(random_polynomial(&mut rng, 1, 3, 0.3), 1).unwrap();
    let q2 = ScalarField::new(random_polynomial(&mut rng, 1, 3, 0.3), 1).unwrap();
    let imm = Immersion::new(
        1,
        &chart,
        vec![ScalarField::coordinate(0, 1), q1, q2],
    )
    .unwrap();
    let w = WeylStructure::levi_civita(&chart);
    let eta = random_one_form(&mut rng, 3, 1, 0.4);
    let w_prime = w.offset(&eta).unwrap();
    let l = Density::new(
        ScalarField::parse("1 + 0.2*x1", 1).unwrap(),
        Rational64::new(1, 2),
    );
    let structures = EmbeddingStructures::none();
    for p in [[0.1f64], [-0.2]] {
        let v = induced_laplace(&imm, &w, structures, &l, &p).unwrap();
        let v_prime = induced_laplace(&imm, &w_prime, structures, &l, &p).unwrap();
        assert!((v - v_prime).abs() < 1e-8, "at {p:?}: {v} vs {v_prime}");
    }
}

#[test]
fn adapted_extension_restricts_correctly_and_kills_mean_curvature() {
    let imm = stereographic_sphere(3);
    let w = WeylStructure::levi_civita(imm.ambient_chart());
    let p = [0.2f64, 0.1];
    let theta_n = [0.3f64, -0.2];
    let eta = extend_adapted(&imm, &w, &theta_n, &p).unwrap();
    // The extension pulls back to the prescribed source 1-form.
    let fr = frame_at(&imm, &w, &p, 1).unwrap();
    let dphi = fr.differential();
    for a in 0..2 {
        let pulled: f64 = (0..3).map(|i| eta[i] * dphi[i * 2 + a]).sum();
        assert!((pulled - theta_n[a]).abs() < 1e-10);
    }
    // Offsetting by the extension cancels the mean curvature at p.
    let w_adapted = w.offset(&constant_fields(&eta, 3)).unwrap();
    let ff = fundamental_form(&imm, &w_adapted, &p).unwrap();
    assert!(ff.h_sup_norm() < 1e-10, "H = {}", ff.h_sup_norm());
}

#[test]
fn degenerate_inputs_are_rejected() {
    let chart = ConformalChart::euclidean(3);
    // Rank-deficient differential.
    let folded = Immersion::parse(2, &chart, &["x1", "x1", "0"]).unwrap();
    let w = WeylStructure::levi_civita(&chart);
    assert!(matches!(
        fundamental_form(&folded, &w, &[0.1f64, 0.2]),
        Err(Error::RankDeficient(_))
    ));
    // Source dimension must be smaller than the ambient dimension.
    assert!(Immersion::parse(3, &chart, &["x1", "x2", "x3"]).is_err());
    // Relative Schouten on a surface needs a source Möbius structure.
    let chart4 = ConformalChart::euclidean(4);
    let surf = Immersion::parse(2, &chart4, &["x1", "x2", "x1^2", "0"]).unwrap();
    let w4 = WeylStructure::levi_civita(&chart4);
    assert!(matches!(
        relative_schouten(&surf, &w4, EmbeddingStructures::none(), &[0.0f64, 0.0]),
        Err(Error::MissingStructure(_))
    ));
    // The induced Möbius operator needs a surface or larger source.
    let curve = Immersion::parse(1, &chart, &["x1", "0", "0"]).unwrap();
    let l = Density::constant(1.0, 1, Rational64::from_integer(1));
    assert!(matches!(
        induced_mobius(
            &curve,
            &w,
            EmbeddingStructures::none(),
            &l,
            &[0.0f64]
        ),
        Err(Error::Dimension(_))
    ));
    // A Weyl structure on a different chart is rejected.
    let other = ConformalChart::euclidean(3);
    let w_other = WeylStructure::levi_civita(&other);
    assert!(fundamental_form(&folded, &w_other, &[0.1f64, 0.2]).is_err());
}
