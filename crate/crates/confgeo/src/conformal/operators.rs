//! Weighted Hessians, Möbius and Laplace operators and structures.

use std::sync::Arc;

use num_rational::Rational64;

use crate::conformal::chart::{ConformalChart, WeylStructure};
use crate::conformal::curvature::curvature_package;
use crate::conformal::gauge::GaugePoint;
use crate::error::{Error, Result};
use crate::jets::ScalarField;
use crate::scalar::Real;
use crate::tensor::{Variance, WeightedTensor};

/// A conformal density represented by a scalar field in the chart's
/// gauge, together with its exact weight.
#[derive(Debug, Clone)]
pub struct Density {
    pub field: ScalarField,
    pub weight: Rational64,
}

impl Density {
    pub fn new(field: ScalarField, weight: Rational64) -> Density {
        Density { field, weight }
    }

    pub fn constant(c: f64, dim: usize, weight: Rational64) -> Density {
        Density {
            field: ScalarField::constant(c, dim),
            weight,
        }
    }

    /// Representation of the same density in the gauge `e^{2f}g`:
    /// `λ' = e^{kf}λ`.
    pub fn transported(&self, f: &ScalarField) -> Result<Density> {
        use crate::jets::Expr;
        let kf = Expr::mul(
            Expr::constant(*self.weight.numer() as f64 / *self.weight.denom() as f64),
            f.expr().clone(),
        );
        let expr = Expr::mul(Expr::exp(kf), self.field.expr().clone());
        Ok(Density {
            field: ScalarField::new(expr, self.field.dim())?,
            weight: self.weight,
        })
    }
}

/// Weighted Hessian `Hess^∇(X,Y) l = (∇∇l)(X,Y)` of a weight-`k`
/// density at a point. Slots `[Co, Co]`, weight `k − 2`.
pub fn hessian_weighted<F: Real>(
    w: &WeylStructure,
    l: &Density,
    p: &[F],
) -> Result<WeightedTensor<F>> {
    let gauge = GaugePoint::at(w, p, 3)?;
    hessian_weighted_at(&gauge, l, p)
}

/// Same, from precomputed connection jets.
pub fn hessian_weighted_at<F: Real>(
    gauge: &GaugePoint<F>,
    l: &Density,
    p: &[F],
) -> Result<WeightedTensor<F>> {
    let lambda = l.field.jet(p, 3)?;
    let first = gauge.density_derivative(&lambda, l.weight);
    let hess = gauge.covariant_derivative(&first);
    Ok(hess.value(gauge.metric_value()))
}

/// Canonical Möbius operator value
/// `M_{(X,Y)} l = Hess₀(X,Y) l + h₀^{∇,s}(X,Y) l` for a weight-1
/// density, evaluated through the given Weyl structure (the result is
/// independent of it).
pub fn mobius_canonical_with<F: Real>(
    w: &WeylStructure,
    l: &Density,
    p: &[F],
) -> Result<WeightedTensor<F>> {
    let m = w.chart().dim();
    if m < 3 {
        return Err(Error::Dimension(format!(
            "the canonical Möbius operator needs dimension >= 3, got {m}; \
             attach an explicit Möbius structure instead"
        )));
    }
    let one = Rational64::from_integer(1);
    if l.weight != one {
        return Err(Error::WeightMismatch {
            expected: one,
            got: l.weight,
        });
    }
    let hess = hessian_weighted(w, l, p)?;
    let hess0 = hess.sym_part().trace_free_part()?;
    let pkg = curvature_package(w, p)?;
    let h_s0 = pkg
        .schouten_sym
        .as_ref()
        .expect("m >= 3 has a Schouten tensor")
        .trace_free_part()?;
    let lambda: F = l.field.eval(p)?;
    // λ carries weight 1, so h₀·λ has total weight −1, matching Hess₀.
    Ok(hess0.add(&h_s0.scale(lambda).with_weight(Rational64::from_integer(-1))))
}

/// Canonical Möbius operator through the gauge Levi-Civita connection.
pub fn mobius_canonical<F: Real>(
    chart: &Arc<ConformalChart>,
    l: &Density,
    p: &[F],
) -> Result<WeightedTensor<F>> {
    mobius_canonical_with(&WeylStructure::levi_civita(chart), l, p)
}

/// Canonical Laplace operator value
/// `L l = tr_c(Hess l) + (1 − m/2) σ l` for a density of weight
/// exactly `1 − m/2`; independent of the Weyl structure used.
pub fn laplace_canonical_with<F: Real>(
    w: &WeylStructure,
    l: &Density,
    p: &[F],
) -> Result<F> {
    let m = w.chart().dim();
    if m < 2 {
        return Err(Error::Dimension(
            "the canonical Laplace operator needs dimension >= 2; \
             attach an explicit Laplace structure instead"
                .into(),
        ));
    }
    let expected = Rational64::new(2 - m as i64, 2);
    if l.weight != expected {
        return Err(Error::WeightMismatch {
            expected,
            got: l.weight,
        });
    }
    let hess = hessian_weighted(w, l, p)?;
    let trace = hess.trace_c(0, 1)?.coeffs()[0];
    let pkg = curvature_package(w, p)?;
    let lambda: F = l.field.eval(p)?;
    Ok(trace + F::of_rational(expected) * pkg.sigma * lambda)
}

/// Canonical Laplace operator through the gauge Levi-Civita connection.
pub fn laplace_canonical<F: Real>(
    chart: &Arc<ConformalChart>,
    l: &Density,
    p: &[F],
) -> Result<F> {
    laplace_canonical_with(&WeylStructure::levi_civita(chart), l, p)
}

/// Möbius structure on a surface chart: the symmetric trace-free
/// Schouten substitute `h₀`, declared relative to the gauge
/// Levi-Civita connection.
#[derive(Debug, Clone)]
pub struct MobiusStructure {
    chart: Arc<ConformalChart>,
    h0: Vec<ScalarField>,
}

impl MobiusStructure {
    pub fn new(
        chart: &Arc<ConformalChart>,
        h0: Vec<ScalarField>,
    ) -> Result<MobiusStructure> {
        if chart.dim() != 2 {
            return Err(Error::Dimension(format!(
                "a Möbius structure lives on a surface, chart has dimension {}",
                chart.dim()
            )));
        }
        if h0.len() != 4 {
            return Err(Error::Dimension(
                "h0 needs 4 row-major entries on a surface".into(),
            ));
        }
        if h0[1] != h0[2] {
            return Err(Error::Dimension("h0 must be symmetric".into()));
        }
        Ok(MobiusStructure {
            chart: Arc::clone(chart),
            h0,
        })
    }

    /// The flat Möbius structure `h₀ ≡ 0`.
    pub fn flat(chart: &Arc<ConformalChart>) -> Result<MobiusStructure> {
        let h0 = (0..4).map(|_| ScalarField::zero(2)).collect();
        MobiusStructure::new(chart, h0)
    }

    pub fn chart(&self) -> &Arc<ConformalChart> {
        &self.chart
    }

    pub fn h0_field(&self, i: usize, j: usize) -> &ScalarField {
        &self.h0[i * 2 + j]
    }
}

/// The Möbius Schouten tensor `h₀^{M,∇}` of a Weyl structure on a
/// Möbius surface, via the trace-free transformation law from the
/// stored gauge value: `h₀^{∇} = h₀^{g} − (∇^g θ)₀ + (θ⊗θ)₀`.
pub fn mobius_h0_at<F: Real>(
    mob: &MobiusStructure,
    w: &WeylStructure,
    p: &[F],
) -> Result<WeightedTensor<F>> {
    if !Arc::ptr_eq(mob.chart(), w.chart()) {
        return Err(Error::Dimension(
            "Möbius structure and Weyl structure live on different charts".into(),
        ));
    }
    let gauge = GaugePoint::at(w, p, 3)?;
    let metric = gauge.metric_value();
    let mut stored = WeightedTensor::zeros(
        metric,
        &[Variance::Co, Variance::Co],
        Rational64::from_integer(-2),
    );
    for i in 0..2 {
        for j in 0..2 {
            stored.set(&[i, j], mob.h0_field(i, j).eval(p)?);
        }
    }
    let stored = stored.sym_part().trace_free_part()?;
    let nabla_theta = gauge
        .covariant_derivative_gauge(&gauge.theta_tensor())
        .value(metric);
    let theta_values: Vec<F> = (0..2).map(|i| gauge.theta_jet(i).value()).collect();
    let theta_sq = WeightedTensor::from_fn(
        metric,
        &[Variance::Co, Variance::Co],
        Rational64::from_integer(-2),
        |idx| theta_values[idx[0]] * theta_values[idx[1]],
    );
    Ok(stored
        .sub(&nabla_theta.sym_part().trace_free_part()?)
        .add(&theta_sq.trace_free_part()?))
}

/// Laplace structure on a curve chart: the Schouten substitute `σ`,
/// declared relative to the gauge Levi-Civita connection.
#[derive(Debug, Clone)]
pub struct LaplaceStructure {
    chart: Arc<ConformalChart>,
    sigma: ScalarField,
}

impl LaplaceStructure {
    pub fn new(
        chart: &Arc<ConformalChart>,
        sigma: ScalarField,
    ) -> Result<LaplaceStructure> {
        if chart.dim() != 1 {
            return Err(Error::Dimension(format!(
                "a Laplace structure lives on a curve, chart has dimension {}",
                chart.dim()
            )));
        }
        Ok(LaplaceStructure {
            chart: Arc::clone(chart),
            sigma,
        })
    }

    pub fn flat(chart: &Arc<ConformalChart>) -> Result<LaplaceStructure> {
        LaplaceStructure::new(chart, ScalarField::zero(1))
    }

    pub fn chart(&self) -> &Arc<ConformalChart> {
        &self.chart
    }

    pub fn sigma_field(&self) -> &ScalarField {
        &self.sigma
    }
}

/// The Schouten substitute `σ^{L,∇}` of a Weyl structure on a Laplace
/// curve: `σ^{∇} = σ^{g} + δ^g θ + ((2−m)/2) c(θ,θ)` with `m = 1`.
pub fn laplace_sigma_at<F: Real>(
    lap: &LaplaceStructure,
    w: &WeylStructure,
    p: &[F],
) -> Result<F> {
    if !Arc::ptr_eq(lap.chart(), w.chart()) {
        return Err(Error::Dimension(
            "Laplace structure and Weyl structure live on different charts".into(),
        ));
    }
    let gauge = GaugePoint::at(w, p, 3)?;
    let metric = gauge.metric_value();
    let nabla_theta = gauge
        .covariant_derivative_gauge(&gauge.theta_tensor())
        .value(metric);
    let delta_theta = -nabla_theta.trace_c(0, 1)?.coeffs()[0];
    let theta_values: Vec<F> = vec![gauge.theta_jet(0).value()];
    let c_tt = metric.inner_co(&theta_values, &theta_values);
    let m = 1i64;
    let sigma0: F = lap.sigma_field().eval(p)?;
    Ok(sigma0 + delta_theta + F::of((2 - m) as f64) * F::of(0.5) * c_tt)
}

/// The full Schouten-type tensor `h^g` of the gauge metric, usable in
/// every dimension: the curvature Schouten tensor for `m ≥ 3`, the
/// Möbius substitute plus trace part for `m = 2`, and `σ·c` from a
/// Laplace structure for `m = 1`.
pub fn schouten_for_gauge<F: Real>(
    chart: &Arc<ConformalChart>,
    mobius: Option<&MobiusStructure>,
    laplace: Option<&LaplaceStructure>,
    p: &[F],
) -> Result<WeightedTensor<F>> {
    let m = chart.dim();
    let lc = WeylStructure::levi_civita(chart);
    match m {
        0 => unreachable!("charts have positive dimension"),
        1 => {
            let lap = laplace.ok_or_else(|| {
                Error::MissingStructure(
                    "a Laplace structure is required on a curve".into(),
                )
            })?;
            let gauge = GaugePoint::at(&lc, p, 3)?;
            let metric = gauge.metric_value();
            let sigma: F = lap.sigma_field().eval(p)?;
            let c = WeightedTensor::gauge_c(metric)
                .with_weight(Rational64::from_integer(-2));
            Ok(c.scale(sigma))
        }
        2 => {
            let mob = mobius.ok_or_else(|| {
                Error::MissingStructure(
                    "a Möbius structure is required on a surface".into(),
                )
            })?;
            let h0 = mobius_h0_at(mob, &lc, p)?;
            let pkg = curvature_package(&lc, p)?;
            let c = WeightedTensor::gauge_c(&pkg.metric)
                .with_weight(Rational64::from_integer(-2));
            Ok(h0.add(&c.scale(pkg.sigma * F::of(0.5))))
        }
        _ => {
            let pkg = curvature_package(&lc, p)?;
            Ok(pkg
                .schouten_sym
                .expect("m >= 3 has a Schouten tensor"))
        }
    }
}
