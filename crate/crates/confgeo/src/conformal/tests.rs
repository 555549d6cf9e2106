use std::sync::Arc;

use num_rational::Rational64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conformal::{
    curvature_package, hessian_weighted, laplace_canonical, laplace_canonical_with,
    laplace_sigma_at, mobius_canonical, mobius_canonical_with, mobius_h0_at,
    schouten_for_gauge, transform_check, ConformalChart, Density, GaugePoint,
    LaplaceStructure, MobiusStructure, WeylStructure,
};
use crate::error::Error;
use crate::jets::{Expr, ScalarField};
use crate::randfield::{random_metric, random_one_form, random_point, random_polynomial};
use crate::tensor::{Variance, WeightedTensor};

/// Stereographic gauge of the unit round m-sphere:
/// `g_ij = 4 δ_ij / (1 + |x|^2)^2`.
fn sphere_chart(m: usize) -> Arc<ConformalChart> {
    let mut norm_sq = Expr::constant(1.0);
    for i in 0..m {
        norm_sq = Expr::add(norm_sq, Expr::pow(Expr::var(i), 2));
    }
    let factor = Expr::div(Expr::constant(4.0), Expr::pow(norm_sq, 2));
    let metric = (0..m * m)
        .map(|pos| {
            let (i, j) = (pos / m, pos % m);
            if i == j {
                ScalarField::new(factor.clone(), m).unwrap()
            } else {
                ScalarField::zero(m)
            }
        })
        .collect();
    ConformalChart::new(m, metric).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn flat_levi_civita_has_zero_package() {
    let chart = ConformalChart::euclidean(3);
    let w = WeylStructure::levi_civita(&chart);
    let p = [0.3, -0.7, 1.2];
    let gauge = GaugePoint::at(&w, &p, 3).unwrap();
    for v in gauge.christoffel_values() {
        assert_eq!(v, 0.0);
    }
    let pkg = curvature_package(&w, &p).unwrap();
    assert!(pkg.curvature.sup_norm() == 0.0);
    assert!(pkg.faraday.sup_norm() == 0.0);
    assert_eq!(pkg.sigma, 0.0);
    assert!(pkg.schouten.as_ref().unwrap().sup_norm() == 0.0);
    assert!(pkg.weyl.as_ref().unwrap().sup_norm() == 0.0);
}

#[test]
fn flat_weyl_christoffel_oracle() {
    // Euclidean gauge, θ = dx1. The connection offset is
    // Γ^k_ij = δ^k_i θ_j + δ^k_j θ_i − δ_ij θ^k, so the x1-component of
    // the derivative of e2 along e2 is −1 and Γ^2_12 = 1.
    let chart = ConformalChart::euclidean(3);
    let theta = vec![
        ScalarField::constant(1.0, 3),
        ScalarField::zero(3),
        ScalarField::zero(3),
    ];
    let w = WeylStructure::new(&chart, theta).unwrap();
    let gauge = GaugePoint::at(&w, &[0.0f64, 0.0, 0.0], 3).unwrap();
    assert!((gauge.gamma_jet(0, 1, 1).value() - (-1.0)).abs() < 1e-12);
    assert!((gauge.gamma_jet(1, 0, 1).value() - 1.0).abs() < 1e-12);
    assert!((gauge.gamma_jet(1, 1, 0).value() - 1.0).abs() < 1e-12);
    assert!((gauge.gamma_jet(0, 0, 0).value() - 1.0).abs() < 1e-12);
    assert!(gauge.gamma_jet(2, 0, 1).value().abs() < 1e-12);
}

#[test]
fn koszul_matches_finite_differences() {
    let m = 3;
    let chart = sphere_chart(m);
    let w = WeylStructure::levi_civita(&chart);
    let p = [0.1f64, -0.2, 0.3];
    let gauge = GaugePoint::at(&w, &p, 3).unwrap();

    // Central differences of the metric entries.
    let h = 1e-5;
    let mut dg = vec![0.0; m * m * m]; // dg[(k*m+i)*m+j] = ∂_k g_ij
    for k in 0..m {
        let mut plus = p;
        let mut minus = p;
        plus[k] += h;
        minus[k] -= h;
        for i in 0..m {
            for j in 0..m {
                let gp: f64 = chart.metric_field(i, j).eval(&plus).unwrap();
                let gm: f64 = chart.metric_field(i, j).eval(&minus).unwrap();
                dg[(k * m + i) * m + j] = (gp - gm) / (2.0 * h);
            }
        }
    }
    let metric = gauge.metric_value();
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let mut fd = 0.0;
                for l in 0..m {
                    let low = dg[(i * m + j) * m + l] + dg[(j * m + i) * m + l]
                        - dg[(l * m + i) * m + j];
                    fd += 0.5 * metric.ginv(k, l) * low;
                }
                let jet = gauge.gamma_gauge_jet(k, i, j).value();
                assert!(
                    (fd - jet).abs() < 1e-6,
                    "Γ^{k}_{i}{j}: fd {fd} vs jet {jet}"
                );
            }
        }
    }
}

#[test]
fn round_sphere_has_constant_curvature_package() {
    // Unit sphere: ric = (m−1)·g, scal = m(m−1), σ = m/2, h = g/2,
    // F = 0, W = 0.
    for m in [3usize, 4] {
        let chart = sphere_chart(m);
        let w = WeylStructure::levi_civita(&chart);
        let p: Vec<f64> = (0..m).map(|i| 0.1 * (i as f64 + 1.0) - 0.25).collect();
        let pkg = curvature_package(&w, &p).unwrap();

        assert!((pkg.scal - (m * (m - 1)) as f64).abs() < 1e-9, "scal m={m}");
        assert!((pkg.sigma - m as f64 / 2.0).abs() < 1e-9);
        assert!(pkg.faraday.sup_norm() < 1e-9);
        assert!(pkg.ricci_sym0.sup_norm() < 1e-9);

        let c = WeightedTensor::gauge_c(&pkg.metric).with_weight(Rational64::from_integer(-2));
        let h = pkg.schouten.as_ref().unwrap();
        assert!(h.sub(&c.scale(0.5)).sup_norm() < 1e-9, "h = g/2 at m={m}");

        assert!(pkg.weyl.as_ref().unwrap().sup_norm() < 1e-9);
        assert!(pkg.bianchi().unwrap() < 1e-9);
        assert!(pkg.reassembly_residual().unwrap() < 1e-9);
    }
}

#[test]
fn round_two_sphere_package() {
    let chart = sphere_chart(2);
    let w = WeylStructure::levi_civita(&chart);
    let p = [0.2f64, -0.1];
    let pkg = curvature_package(&w, &p).unwrap();
    assert!((pkg.sigma - 1.0).abs() < 1e-9);
    assert!(pkg.schouten.is_none());
    assert!(pkg.weyl.is_none());
    assert!(pkg.reassembly_residual().unwrap() < 1e-9);
    assert!(pkg.bianchi().unwrap() < 1e-9);
}

#[test]
fn curvature_identities_on_random_weyl_structures() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for m in [3usize, 4, 5] {
        let metric = random_metric(&mut rng, m, 3, 0.2);
        let chart = ConformalChart::new(m, metric).unwrap();
        let theta = random_one_form(&mut rng, m, 2, 0.4);
        let w = WeylStructure::new(&chart, theta).unwrap();
        for _ in 0..3 {
            let p = random_point(&mut rng, m, 0.25);
            let pkg = curvature_package(&w, &p).unwrap();
            assert!(pkg.bianchi().unwrap() < 1e-9, "bianchi m={m}");
            assert!(pkg.reassembly_residual().unwrap() < 1e-9, "reassembly m={m}");
            assert!(pkg.ricci_skew_residual() < 1e-9, "ricci skew m={m}");
            assert!(pkg.weyl_trace_residual().unwrap() < 1e-9, "weyl trace m={m}");
            if m == 3 {
                assert!(
                    pkg.weyl.as_ref().unwrap().sup_norm() < 1e-9,
                    "W = 0 in dimension 3"
                );
            }
        }
    }
}

#[test]
fn transformation_laws_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for m in [3usize, 4] {
        let metric = random_metric(&mut rng, m, 3, 0.2);
        let chart = ConformalChart::new(m, metric).unwrap();
        let theta = random_one_form(&mut rng, m, 1, 0.3);
        let w = WeylStructure::new(&chart, theta).unwrap();
        let eta = random_one_form(&mut rng, m, 1, 0.5);
        for _ in 0..3 {
            let p = random_point(&mut rng, m, 0.25);
            let report = transform_check(&w, &eta, &p).unwrap();
            assert!(
                report.max_residual() < 1e-8,
                "m={m}: residual {}",
                report.max_residual()
            );
        }
    }
}

#[test]
fn gauge_rescaling_matches_weyl_offset() {
    // The Levi-Civita connection of e^{2f}g, computed in the gauge g as
    // the Weyl structure θ = df, has the same coordinate Christoffels
    // and curvature as the direct computation in the gauge e^{2f}g.
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let m = 3;
    let metric = random_metric(&mut rng, m, 2, 0.2);
    let chart = ConformalChart::new(m, metric).unwrap();
    let f = ScalarField::new(random_polynomial(&mut rng, m, 2, 0.3), m).unwrap();
    let (chart_prime, theta) = chart.rescaled(&f).unwrap();

    let via_weyl = WeylStructure::new(&chart, theta).unwrap();
    let via_gauge = WeylStructure::levi_civita(&chart_prime);
    let p = [0.1f64, -0.15, 0.2];
    let gp_weyl = GaugePoint::at(&via_weyl, &p, 3).unwrap();
    let gp_gauge = GaugePoint::at(&via_gauge, &p, 3).unwrap();

    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let a = gp_weyl.gamma_jet(k, i, j).value();
                let b = gp_gauge.gamma_jet(k, i, j).value();
                assert!((a - b).abs() < 1e-9, "Γ^{k}_{i}{j}: {a} vs {b}");
            }
        }
    }
    let r_weyl = gp_weyl.curvature_value();
    let r_gauge = gp_gauge.curvature_value();
    assert!(max_abs_diff(r_weyl.coeffs(), r_gauge.coeffs()) < 1e-8);

    // The Ricci tensor is a coordinate (0,2)-tensor of the connection
    // itself, so it also agrees between the two gauges.
    let pkg_weyl = curvature_package(&via_weyl, &p).unwrap();
    let pkg_gauge = curvature_package(&via_gauge, &p).unwrap();
    assert!(max_abs_diff(pkg_weyl.ricci.coeffs(), pkg_gauge.ricci.coeffs()) < 1e-8);
    assert!(pkg_weyl.faraday.sup_norm() < 1e-9, "exact 1-forms are closed");
}

#[test]
fn hessian_on_flat_chart_is_coordinate_hessian() {
    let chart = ConformalChart::euclidean(3);
    let w = WeylStructure::levi_civita(&chart);
    let l = Density::new(
        ScalarField::parse("x1^2", 3).unwrap(),
        Rational64::from_integer(1),
    );
    let hess = hessian_weighted(&w, &l, &[0.4f64, 0.1, -0.3]).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let expect = if i == 0 && j == 0 { 2.0 } else { 0.0 };
            assert!((hess.get(&[i, j]) - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn hessian_transformation_law() {
    // Hess' − Hess = (k−1)[η_i ∇_j l + η_j ∇_i l] + c_ij ∇_{η♯} l
    //               + k[∇_i η_j + (k−2) η_i η_j + c_ij c(η,η)] l
    // between a base Weyl structure ∇ and ∇' = ∇ + η̃.
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let m = 3;
    let metric = random_metric(&mut rng, m, 2, 0.2);
    let chart = ConformalChart::new(m, metric).unwrap();
    let theta = random_one_form(&mut rng, m, 1, 0.3);
    let w = WeylStructure::new(&chart, theta).unwrap();
    let eta = random_one_form(&mut rng, m, 1, 0.5);
    let w_prime = w.offset(&eta).unwrap();
    let k = Rational64::new(2, 3);
    let kf = 2.0 / 3.0;
    let l = Density::new(
        ScalarField::new(random_polynomial(&mut rng, m, 2, 0.7), m).unwrap(),
        k,
    );

    for _ in 0..3 {
        let p = random_point(&mut rng, m, 0.25);
        let hess = hessian_weighted(&w, &l, &p).unwrap();
        let hess_prime = hessian_weighted(&w_prime, &l, &p).unwrap();

        let gauge = GaugePoint::at(&w, &p, 3).unwrap();
        let metric = gauge.metric_value();
        let lambda_jet = l.field.jet(&p, 3).unwrap();
        let lambda: f64 = lambda_jet.value();
        let nabla_l = gauge.density_derivative(&lambda_jet, k);
        let nabla_l_values: Vec<f64> = nabla_l.comps().iter().map(|j| j.value()).collect();

        let eta_jets: Vec<_> = eta.iter().map(|e| e.jet(&p, 3).unwrap()).collect();
        let eta_values: Vec<f64> = eta_jets.iter().map(|j| j.value()).collect();
        let eta_tensor = crate::conformal::JetTensor::new(
            m,
            vec![Variance::Co],
            Rational64::from_integer(-1),
            eta_jets,
        );
        let nabla_eta = gauge.covariant_derivative(&eta_tensor).value(metric);

        let eta_sharp = metric.sharp(&eta_values);
        let dl_eta: f64 = (0..m).map(|a| eta_sharp[a] * nabla_l_values[a]).sum();
        let c_ee = metric.inner_co(&eta_values, &eta_values);

        let diff = WeightedTensor::from_fn(
            metric,
            &[Variance::Co, Variance::Co],
            k - 2,
            |idx| {
                let (i, j) = (idx[0], idx[1]);
                let c_ij = metric.g(i, j);
                (kf - 1.0)
                    * (eta_values[i] * nabla_l_values[j] + eta_values[j] * nabla_l_values[i])
                    + c_ij * dl_eta
                    + kf * (nabla_eta.get(&[i, j])
                        + (kf - 2.0) * eta_values[i] * eta_values[j]
                        + c_ij * c_ee)
                        * lambda
            },
        );
        let residual = hess_prime.sub(&hess.add(&diff)).sup_norm();
        assert!(residual < 1e-8, "hessian law residual {residual}");
    }
}

#[test]
fn mobius_canonical_flat_values() {
    let chart = ConformalChart::euclidean(3);
    let one = Rational64::from_integer(1);
    let p = [0.2f64, -0.4, 0.1];

    let m_const = mobius_canonical(&chart, &Density::constant(1.0, 3, one), &p).unwrap();
    assert!(m_const.sup_norm() < 1e-12);

    // |x|^2 has pure-trace Hessian, so it is in the kernel too.
    let m_norm = mobius_canonical(
        &chart,
        &Density::new(ScalarField::parse("x1^2 + x2^2 + x3^2", 3).unwrap(), one),
        &p,
    )
    .unwrap();
    assert!(m_norm.sup_norm() < 1e-12);

    let m_sq = mobius_canonical(
        &chart,
        &Density::new(ScalarField::parse("x1^2", 3).unwrap(), one),
        &p,
    )
    .unwrap();
    assert!((m_sq.get(&[0, 0]) - 4.0 / 3.0).abs() < 1e-12);
    assert!((m_sq.get(&[1, 1]) + 2.0 / 3.0).abs() < 1e-12);
    assert!(m_sq.get(&[0, 1]).abs() < 1e-12);
}

#[test]
fn mobius_canonical_is_weyl_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let m = 4;
    let metric = random_metric(&mut rng, m, 2, 0.2);
    let chart = ConformalChart::new(m, metric).unwrap();
    let l = Density::new(
        ScalarField::new(random_polynomial(&mut rng, m, 3, 0.8), m).unwrap(),
        Rational64::from_integer(1),
    );
    let lc = WeylStructure::levi_civita(&chart);
    let theta = random_one_form(&mut rng, m, 2, 0.6);
    let other = WeylStructure::new(&chart, theta).unwrap();
    for _ in 0..3 {
        let p = random_point(&mut rng, m, 0.25);
        let a = mobius_canonical_with(&lc, &l, &p).unwrap();
        let b = mobius_canonical_with(&other, &l, &p).unwrap();
        let residual = a.sub(&b).sup_norm();
        assert!(residual < 1e-8, "Möbius Weyl dependence {residual}");
    }
}

#[test]
fn mobius_canonical_is_gauge_covariant() {
    // Representations in gauges g and e^{2f}g differ by e^{f} (the
    // output carries one density factor).
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let m = 3;
    let metric = random_metric(&mut rng, m, 2, 0.2);
    let chart = ConformalChart::new(m, metric).unwrap();
    let f = ScalarField::new(random_polynomial(&mut rng, m, 2, 0.3), m).unwrap();
    let (chart_prime, _) = chart.rescaled(&f).unwrap();
    let l = Density::new(
        ScalarField::new(random_polynomial(&mut rng, m, 3, 0.8), m).unwrap(),
        Rational64::from_integer(1),
    );
    let l_prime = l.transported(&f).unwrap();
    let p = [0.15f64, -0.1, 0.2];
    let base = mobius_canonical(&chart, &l, &p).unwrap();
    let prime = mobius_canonical(&chart_prime, &l_prime, &p).unwrap();
    let fp: f64 = f.eval(&p).unwrap();
    let expected: Vec<f64> = base.coeffs().iter().map(|v| v * fp.exp()).collect();
    let residual = max_abs_diff(prime.coeffs(), &expected);
    assert!(residual < 1e-8, "Möbius gauge covariance {residual}");
}

#[test]
fn mobius_canonical_rejects_wrong_weight_and_low_dimension() {
    let chart = ConformalChart::euclidean(3);
    let bad = Density::constant(1.0, 3, Rational64::from_integer(2));
    match mobius_canonical(&chart, &bad, &[0.0f64, 0.0, 0.0]) {
        Err(Error::WeightMismatch { expected, got }) => {
            assert_eq!(expected, Rational64::from_integer(1));
            assert_eq!(got, Rational64::from_integer(2));
        }
        other => panic!("expected weight mismatch, got {other:?}"),
    }

    let surface = ConformalChart::euclidean(2);
    let l = Density::constant(1.0, 2, Rational64::from_integer(1));
    assert!(matches!(
        mobius_canonical::<f64>(&surface, &l, &[0.0, 0.0]),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn laplace_canonical_flat_and_sphere_values() {
    let chart = ConformalChart::euclidean(3);
    let k = Rational64::new(-1, 2);
    let p = [0.3f64, 0.1, -0.2];
    let l_const = Density::constant(2.0, 3, k);
    assert!(laplace_canonical(&chart, &l_const, &p).unwrap().abs() < 1e-12);

    let l_sq = Density::new(ScalarField::parse("x1^2", 3).unwrap(), k);
    assert!((laplace_canonical(&chart, &l_sq, &p).unwrap() - 2.0).abs() < 1e-12);

    // Unit 3-sphere, constant density: L l = (1 − m/2) σ λ = −(3/4) λ.
    let sphere = sphere_chart(3);
    let lam = 2.0;
    let l_s = Density::constant(lam, 3, k);
    let got = laplace_canonical(&sphere, &l_s, &p).unwrap();
    assert!((got - (-0.75) * lam).abs() < 1e-9, "sphere Laplace {got}");
}

#[test]
fn laplace_canonical_is_weyl_invariant_and_gauge_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let m = 4;
    let k = Rational64::new(2 - m as i64, 2);
    let metric = random_metric(&mut rng, m, 2, 0.2);
    let chart = ConformalChart::new(m, metric).unwrap();
    let l = Density::new(
        ScalarField::new(random_polynomial(&mut rng, m, 3, 0.8), m).unwrap(),
        k,
    );
    let lc = WeylStructure::levi_civita(&chart);
    let theta = random_one_form(&mut rng, m, 2, 0.6);
    let other = WeylStructure::new(&chart, theta).unwrap();
    let p = random_point(&mut rng, m, 0.25);
    let a: f64 = laplace_canonical_with(&lc, &l, &p).unwrap();
    let b: f64 = laplace_canonical_with(&other, &l, &p).unwrap();
    assert!((a - b).abs() < 1e-8, "Laplace Weyl dependence {}", a - b);

    // Gauge change: the output is a weight k−2 density, so its
    // representation picks up e^{(k−2)f}.
    let f = ScalarField::new(random_polynomial(&mut rng, m, 2, 0.3), m).unwrap();
    let (chart_prime, _) = chart.rescaled(&f).unwrap();
    let l_prime = l.transported(&f).unwrap();
    let prime: f64 = laplace_canonical(&chart_prime, &l_prime, &p).unwrap();
    let kf = -(m as f64) / 2.0 + 1.0 - 2.0; // k − 2
    let fp: f64 = f.eval(&p).unwrap();
    let expected = a * (kf * fp).exp();
    assert!(
        (prime - expected).abs() < 1e-8,
        "Laplace gauge covariance {}",
        prime - expected
    );
}

#[test]
fn laplace_canonical_rejects_wrong_weight() {
    let chart = ConformalChart::euclidean(4);
    let l = Density::constant(1.0, 4, Rational64::from_integer(1));
    match laplace_canonical(&chart, &l, &[0.0f64; 4]) {
        Err(Error::WeightMismatch { expected, got }) => {
            assert_eq!(expected, Rational64::from_integer(-1));
            assert_eq!(got, Rational64::from_integer(1));
        }
        other => panic!("expected weight mismatch, got {other:?}"),
    }
}

#[test]
fn mobius_structure_transformation_is_a_cocycle() {
    // h₀ along θ = η1 + η2 equals the two-step law: first to η1, then
    // offset by η2 using the intermediate Weyl derivative.
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let m = 2;
    let metric = random_metric(&mut rng, m, 2, 0.2);
    let chart = ConformalChart::new(m, metric).unwrap();
    let h0_entries = {
        let a = random_polynomial(&mut rng, m, 2, 0.5);
        let b = random_polynomial(&mut rng, m, 2, 0.5);
        let d = random_polynomial(&mut rng, m, 2, 0.5);
        vec![
            ScalarField::new(a, m).unwrap(),
            ScalarField::new(b.clone(), m).unwrap(),
            ScalarField::new(b, m).unwrap(),
            ScalarField::new(d, m).unwrap(),
        ]
    };
    let mob = MobiusStructure::new(&chart, h0_entries).unwrap();
    let eta1 = random_one_form(&mut rng, m, 1, 0.4);
    let eta2 = random_one_form(&mut rng, m, 1, 0.4);
    let w1 = WeylStructure::new(&chart, eta1.clone()).unwrap();
    let w12 = w1.offset(&eta2).unwrap();

    let p = [0.2f64, -0.15];
    let direct = mobius_h0_at(&mob, &w12, &p).unwrap();

    let step1 = mobius_h0_at(&mob, &w1, &p).unwrap();
    let gauge1 = GaugePoint::at(&w1, &p, 3).unwrap();
    let metric_p = gauge1.metric_value();
    let eta2_jets: Vec<_> = eta2.iter().map(|e| e.jet(&p, 3).unwrap()).collect();
    let eta2_values: Vec<f64> = eta2_jets.iter().map(|j| j.value()).collect();
    let eta2_tensor = crate::conformal::JetTensor::new(
        m,
        vec![Variance::Co],
        Rational64::from_integer(-1),
        eta2_jets,
    );
    let nabla_eta2 = gauge1.covariant_derivative(&eta2_tensor).value(metric_p);
    let eta2_sq = WeightedTensor::from_fn(
        metric_p,
        &[Variance::Co, Variance::Co],
        Rational64::from_integer(-2),
        |idx| eta2_values[idx[0]] * eta2_values[idx[1]],
    );
    let two_step = step1
        .sub(&nabla_eta2.sym_part().trace_free_part().unwrap())
        .add(&eta2_sq.trace_free_part().unwrap());
    let residual = direct.sub(&two_step).sup_norm();
    assert!(residual < 1e-8, "Möbius cocycle residual {residual}");
}

#[test]
fn laplace_structure_transformation_is_a_cocycle() {
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    let m = 1;
    let metric = random_metric(&mut rng, m, 2, 0.2);
    let chart = ConformalChart::new(m, metric).unwrap();
    let lap = LaplaceStructure::new(
        &chart,
        ScalarField::new(random_polynomial(&mut rng, m, 2, 0.5), m).unwrap(),
    )
    .unwrap();
    let eta1 = random_one_form(&mut rng, m, 1, 0.4);
    let eta2 = random_one_form(&mut rng, m, 1, 0.4);
    let w1 = WeylStructure::new(&chart, eta1).unwrap();
    let w12 = w1.offset(&eta2).unwrap();
    let p = [0.1f64];

    let direct: f64 = laplace_sigma_at(&lap, &w12, &p).unwrap();

    let step1: f64 = laplace_sigma_at(&lap, &w1, &p).unwrap();
    let gauge1 = GaugePoint::at(&w1, &p, 3).unwrap();
    let metric_p = gauge1.metric_value();
    let eta2_jets: Vec<_> = eta2.iter().map(|e| e.jet(&p, 3).unwrap()).collect();
    let eta2_values: Vec<f64> = eta2_jets.iter().map(|j| j.value()).collect();
    let eta2_tensor = crate::conformal::JetTensor::new(
        m,
        vec![Variance::Co],
        Rational64::from_integer(-1),
        eta2_jets,
    );
    let nabla_eta2 = gauge1.covariant_derivative(&eta2_tensor).value(metric_p);
    let delta_eta2 = -nabla_eta2.trace_c(0, 1).unwrap().coeffs()[0];
    let c_ee = metric_p.inner_co(&eta2_values, &eta2_values);
    let two_step = step1 + delta_eta2 + 0.5 * c_ee;
    assert!(
        (direct - two_step).abs() < 1e-8,
        "Laplace cocycle residual {}",
        direct - two_step
    );
}

#[test]
fn schouten_for_gauge_covers_every_dimension() {
    // m = 3: curvature Schouten tensor; Euclidean gauge is flat.
    let flat3 = ConformalChart::euclidean(3);
    let h3 = schouten_for_gauge::<f64>(&flat3, None, None, &[0.1, 0.2, 0.3]).unwrap();
    assert!(h3.sup_norm() < 1e-12);

    // m = 2: needs a Möbius structure; the flat one on the round
    // 2-sphere gauge gives the constant-curvature value h = g/2.
    let sphere2 = sphere_chart(2);
    let p2 = [0.2f64, -0.1];
    assert!(matches!(
        schouten_for_gauge::<f64>(&sphere2, None, None, &p2),
        Err(Error::MissingStructure(_))
    ));
    let mob = MobiusStructure::flat(&sphere2).unwrap();
    let h2 = schouten_for_gauge(&sphere2, Some(&mob), None, &p2).unwrap();
    let c2 = WeightedTensor::gauge_c(h2.metric()).with_weight(Rational64::from_integer(-2));
    assert!(h2.sub(&c2.scale(0.5)).sup_norm() < 1e-9);

    // m = 1: needs a Laplace structure; σ·c.
    let line = ConformalChart::euclidean(1);
    assert!(matches!(
        schouten_for_gauge::<f64>(&line, None, None, &[0.0]),
        Err(Error::MissingStructure(_))
    ));
    let lap = LaplaceStructure::new(&line, ScalarField::parse("3", 1).unwrap()).unwrap();
    let h1 = schouten_for_gauge(&line, None, Some(&lap), &[0.4f64]).unwrap();
    assert!((h1.get(&[0, 0]) - 3.0).abs() < 1e-12);
}
