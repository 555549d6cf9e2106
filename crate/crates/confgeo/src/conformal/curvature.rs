//! Full curvature decomposition of a Weyl structure at a point.

use std::sync::Arc;

use num_rational::Rational64;

use crate::conformal::chart::WeylStructure;
use crate::conformal::gauge::GaugePoint;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{
    bianchi_residual, ricci_contraction, suspension, two_form_times_id, PointMetric,
    Variance, WeightedTensor,
};

/// Curvature data of a Weyl structure at one point: the full tensor
/// and its CO(n)-irreducible components.
#[derive(Debug, Clone)]
pub struct CurvaturePackage<F: Real> {
    pub dim: usize,
    pub metric: Arc<PointMetric<F>>,
    /// `R^∇`, slots `[Co, Co, Contra, Co]`, weight −2.
    pub curvature: WeightedTensor<F>,
    /// Faraday 2-form `F^∇`.
    pub faraday: WeightedTensor<F>,
    /// Ricci tensor `ric^∇` (skew part −(m/2)·F).
    pub ricci: WeightedTensor<F>,
    /// Trace-free symmetric Ricci part.
    pub ricci_sym0: WeightedTensor<F>,
    /// Scalar curvature `tr_c ric^∇`.
    pub scal: F,
    /// Normalized scalar curvature `σ^∇ = scal/(2(m−1))`.
    pub sigma: F,
    /// Symmetric Schouten-Weyl tensor (m ≥ 3 only).
    pub schouten_sym: Option<WeightedTensor<F>>,
    /// Full Schouten-Weyl tensor `h^∇ = h^{∇,s} − F^∇/2` (m ≥ 3 only).
    pub schouten: Option<WeightedTensor<F>>,
    /// Weyl tensor `W` (m ≥ 3 only; zero when m = 3).
    pub weyl: Option<WeightedTensor<F>>,
}

impl<F: Real> CurvaturePackage<F> {
    /// Residual of the decomposition
    /// `R = h∧id + W + F⊗id` (m ≥ 3) or
    /// `R = ½σ·c∧id + F⊗id` (m = 2).
    pub fn reassembly_residual(&self) -> Result<F> {
        let f_id = two_form_times_id(&self.faraday)?;
        let rebuilt = match &self.schouten {
            Some(h) => suspension(h)?
                .add(self.weyl.as_ref().expect("weyl accompanies schouten"))
                .add(&f_id),
            None => {
                let c = WeightedTensor::gauge_c(&self.metric)
                    .with_weight(Rational64::from_integer(-2));
                suspension(&c.scale(self.sigma * F::of(0.5)))?.add(&f_id)
            }
        };
        Ok(self.curvature.sub(&rebuilt).sup_norm())
    }

    /// Residual of the first Bianchi identity of `R^∇ − F⊗id`'s
    /// Riemannian part, i.e. of the full tensor against
    /// `R_{X,Y}Z + R_{Y,Z}X + R_{Z,X}Y = (dF-type term)`; for the full
    /// `R^∇` of a torsion-free connection the plain cyclic sum already
    /// vanishes.
    pub fn bianchi(&self) -> Result<F> {
        bianchi_residual(&self.curvature)
    }

    /// Residual of `skew(ric) = −(m/2)·F`.
    pub fn ricci_skew_residual(&self) -> F {
        let target = self.faraday.scale(-F::of(self.dim as f64) * F::of(0.5));
        self.ricci.skew_part().sub(&target).sup_norm()
    }

    /// Residual of the Ricci trace of the Weyl tensor.
    pub fn weyl_trace_residual(&self) -> Result<F> {
        match &self.weyl {
            Some(w) => Ok(ricci_contraction(w)?.sup_norm()),
            None => Ok(F::zero()),
        }
    }
}

/// Evaluate the curvature package of a Weyl structure at a point.
pub fn curvature_package<F: Real>(
    w: &WeylStructure,
    p: &[F],
) -> Result<CurvaturePackage<F>> {
    let gauge = GaugePoint::at(w, p, 3)?;
    curvature_package_at(&gauge)
}

/// Same, from precomputed connection jets.
pub fn curvature_package_at<F: Real>(
    gauge: &GaugePoint<F>,
) -> Result<CurvaturePackage<F>> {
    let m = gauge.dim();
    if m < 2 {
        return Err(Error::Dimension(
            "curvature needs dimension >= 2 (a curve has no curvature content)".into(),
        ));
    }
    let metric = Arc::clone(gauge.metric_value());
    let curvature = gauge.curvature_value();

    // Identity component of R_{ij} ∈ co(m): F_ij = (1/m) Σ_k R[i][j][k][k].
    let faraday = WeightedTensor::from_fn(
        &metric,
        &[Variance::Co, Variance::Co],
        Rational64::from_integer(-2),
        |idx| {
            let mut acc = F::zero();
            for k in 0..m {
                acc = acc + curvature.get(&[idx[0], idx[1], k, k]);
            }
            acc / F::of(m as f64)
        },
    );

    let ricci = ricci_contraction(&curvature)?;
    let ricci_sym = ricci.sym_part();
    let ricci_sym0 = ricci_sym.trace_free_part()?;
    let scal = ricci.trace_c(0, 1)?.coeffs()[0];
    let sigma = scal / (F::of(2.0) * F::of((m - 1) as f64));

    let (schouten_sym, schouten, weyl) = if m >= 3 {
        let c = WeightedTensor::gauge_c(&metric).with_weight(Rational64::from_integer(-2));
        let h_sym = ricci_sym0
            .scale(F::one() / F::of((m - 2) as f64))
            .add(&c.scale(scal / (F::of(2.0) * F::of(m as f64) * F::of((m - 1) as f64))));
        let h_full = h_sym.sub(&faraday.scale(F::of(0.5)));
        let weyl = curvature
            .sub(&suspension(&h_full)?)
            .sub(&two_form_times_id(&faraday)?);
        (Some(h_sym), Some(h_full), Some(weyl))
    } else {
        (None, None, None)
    };

    Ok(CurvaturePackage {
        dim: m,
        metric,
        curvature,
        faraday,
        ricci,
        ricci_sym0,
        scal,
        sigma,
        schouten_sym,
        schouten,
        weyl,
    })
}

/// Residuals of the transformation laws between `∇` and `∇' = ∇ + η̃`.
#[derive(Debug, Clone)]
pub struct TransformReport<F> {
    /// `h' − h + ∇η − η⊗η + ½c(η,η)c` (m ≥ 3).
    pub schouten_residual: Option<F>,
    /// Trace-free-part law for `h₀` (m ≥ 3).
    pub h0_residual: Option<F>,
    /// `σ' − σ − δ^∇η − ((2−m)/2)c(η,η)`.
    pub sigma_residual: F,
    /// `F' − F − dη`.
    pub faraday_residual: F,
    /// `W' − W` (m ≥ 3).
    pub weyl_residual: Option<F>,
}

impl<F: Real> TransformReport<F> {
    pub fn max_residual(&self) -> F {
        let mut worst = self.sigma_residual.max(self.faraday_residual);
        for r in [self.schouten_residual, self.h0_residual, self.weyl_residual]
            .into_iter()
            .flatten()
        {
            worst = worst.max(r);
        }
        worst
    }
}

/// Check the curvature transformation laws between `w` and `w + η̃`
/// at a point.
pub fn transform_check<F: Real>(
    w: &WeylStructure,
    eta: &[crate::jets::ScalarField],
    p: &[F],
) -> Result<TransformReport<F>> {
    let m = w.chart().dim();
    let w_prime = w.offset(eta)?;
    let base = curvature_package(w, p)?;
    let prime = curvature_package(&w_prime, p)?;
    let metric = &base.metric;

    // η as a jet tensor over ∇ = w's connection.
    let gauge = GaugePoint::at(w, p, 3)?;
    let mut eta_jets = Vec::with_capacity(m);
    for e in eta {
        eta_jets.push(e.jet(p, 3)?);
    }
    let eta_tensor = crate::conformal::gauge::JetTensor::new(
        m,
        vec![Variance::Co],
        Rational64::from_integer(-1),
        eta_jets.clone(),
    );
    let nabla_eta = gauge.covariant_derivative(&eta_tensor).value(metric);
    let eta_values: Vec<F> = eta_jets.iter().map(|j| j.value()).collect();
    let eta_sq = WeightedTensor::from_fn(
        metric,
        &[Variance::Co, Variance::Co],
        Rational64::from_integer(-2),
        |idx| eta_values[idx[0]] * eta_values[idx[1]],
    );
    let c_eta_eta = metric.inner_co(&eta_values, &eta_values);
    let c = WeightedTensor::gauge_c(metric).with_weight(Rational64::from_integer(-2));

    let schouten_residual = match (&base.schouten, &prime.schouten) {
        (Some(h), Some(h_prime)) => {
            let expected = h
                .sub(&nabla_eta)
                .add(&eta_sq)
                .sub(&c.scale(c_eta_eta * F::of(0.5)));
            Some(h_prime.sub(&expected).sup_norm())
        }
        _ => None,
    };

    let h0_residual = match (&base.schouten_sym, &prime.schouten_sym) {
        (Some(h), Some(h_prime)) => {
            let h0 = h.trace_free_part()?;
            let h0_prime = h_prime.trace_free_part()?;
            let expected = h0
                .sub(&nabla_eta.sym_part().trace_free_part()?)
                .add(&eta_sq.trace_free_part()?);
            Some(h0_prime.sub(&expected).sup_norm())
        }
        _ => None,
    };

    // δ^∇η = −tr_c ∇η.
    let delta_eta = -nabla_eta.trace_c(0, 1)?.coeffs()[0];
    let expected_sigma = base.sigma
        + delta_eta
        + F::of((2 - m as i64) as f64) * F::of(0.5) * c_eta_eta;
    let sigma_residual = (prime.sigma - expected_sigma).abs();

    let faraday_residual = prime
        .faraday
        .sub(&base.faraday)
        .sub(&gauge.dtheta_eta(&eta_jets))
        .sup_norm();

    let weyl_residual = match (&base.weyl, &prime.weyl) {
        (Some(wt), Some(wt_prime)) => Some(wt_prime.sub(wt).sup_norm()),
        _ => None,
    };

    Ok(TransformReport {
        schouten_residual,
        h0_residual,
        sigma_residual,
        faraday_residual,
        weyl_residual,
    })
}
