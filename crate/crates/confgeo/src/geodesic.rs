//! Conformal acceleration, adapted Weyl structures along curves, and
//! the conformal-geodesic integrator.
//!
//! The acceleration of a parametrized curve is the third-order,
//! gauge-independent vector field
//!
//! ```text
//! a(γ) = g(γ̇,γ̇)(h^g(γ̇))♯ − γ⃛ + 3·g(γ̇,γ̈)/g(γ̇,γ̇)·γ̈
//!        + (−6·g(γ̇,γ̈)²/g(γ̇,γ̇)² + 3/2·g(γ̈,γ̈)/g(γ̇,γ̇)
//!           + 2·g(γ̇,γ⃛)/g(γ̇,γ̇))·γ̇
//! ```
//!
//! with `γ̈ = ∇^g_γ̇ γ̇` and `γ⃛ = ∇^g_γ̇ γ̈`, where `h^g` is the
//! Schouten-type tensor of the gauge metric (for surfaces and curves
//! it is supplied by an attached Möbius or Laplace structure).

use std::io::Write;
use std::sync::Arc;

use num_rational::Rational64;

use crate::conformal::{
    curvature_package_at, mobius_h0_at, ConformalChart, GaugePoint, LaplaceStructure,
    MobiusStructure, WeylStructure,
};
use crate::error::{Error, Result};
use crate::jets::{Jet, ScalarField};
use crate::scalar::Real;
use crate::tensor::{PointMetric, WeightedTensor};

/// Auxiliary Möbius/Laplace data needed to evaluate `h^g` in low
/// dimensions. For `m ≥ 3` no structure is required.
#[derive(Debug, Clone, Copy, Default)]
pub struct CurveStructures<'a> {
    pub mobius: Option<&'a MobiusStructure>,
    pub laplace: Option<&'a LaplaceStructure>,
}

impl<'a> CurveStructures<'a> {
    pub fn none() -> CurveStructures<'a> {
        CurveStructures::default()
    }

    pub fn with_mobius(mob: &'a MobiusStructure) -> CurveStructures<'a> {
        CurveStructures {
            mobius: Some(mob),
            laplace: None,
        }
    }

    pub fn with_laplace(lap: &'a LaplaceStructure) -> CurveStructures<'a> {
        CurveStructures {
            mobius: None,
            laplace: Some(lap),
        }
    }
}

/// Third-order data of a regular curve at one parameter value:
/// position, velocity, and the covariant acceleration `∇^g_γ̇ γ̇` in
/// the chart gauge.
#[derive(Debug, Clone)]
pub struct CurveState<F> {
    pub t: F,
    pub x: Vec<F>,
    pub v: Vec<F>,
    /// Covariant second derivative `γ̈ = ∇^g_γ̇ γ̇`.
    pub w: Vec<F>,
}

/// Point geometry for curve operations: gauge connection jets plus the
/// Schouten-type tensor `h^g` (from curvature for `m ≥ 3`, from the
/// attached structure otherwise).
struct PointGeometry<F: Real> {
    gauge: GaugePoint<F>,
    schouten: WeightedTensor<F>,
}

fn geometry_at<F: Real>(
    chart: &Arc<ConformalChart>,
    structures: CurveStructures<'_>,
    x: &[F],
) -> Result<PointGeometry<F>> {
    let lc = WeylStructure::levi_civita(chart);
    let gauge = GaugePoint::at(&lc, x, 2)?;
    let schouten = match chart.dim() {
        1 => {
            let lap = structures.laplace.ok_or_else(|| {
                Error::MissingStructure(
                    "conformal acceleration on a curve needs a Laplace structure".into(),
                )
            })?;
            let sigma: F = lap.sigma_field().eval(x)?;
            WeightedTensor::gauge_c(gauge.metric_value())
                .with_weight(Rational64::from_integer(-2))
                .scale(sigma)
        }
        2 => {
            let mob = structures.mobius.ok_or_else(|| {
                Error::MissingStructure(
                    "conformal acceleration on a surface needs a Möbius structure".into(),
                )
            })?;
            let h0 = mobius_h0_at(mob, &lc, x)?;
            let pkg = curvature_package_at(&gauge)?;
            let c = WeightedTensor::gauge_c(gauge.metric_value())
                .with_weight(Rational64::from_integer(-2));
            h0.add(&c.scale(pkg.sigma * F::of(0.5)))
        }
        _ => curvature_package_at(&gauge)?
            .schouten_sym
            .expect("m >= 3 has a Schouten tensor"),
    };
    Ok(PointGeometry { gauge, schouten })
}

fn speed_squared<F: Real>(metric: &PointMetric<F>, v: &[F]) -> Result<F> {
    let f2 = metric.inner(v, v);
    if f2 <= F::of(1e-12) {
        return Err(Error::Numerical(
            "curve velocity is (numerically) null".into(),
        ));
    }
    Ok(f2)
}

/// `Γ(a, b)^k` from flattened Christoffel values at `(k*m+i)*m+j`.
fn christoffel_contract<F: Real>(gamma: &[F], m: usize, a: &[F], b: &[F]) -> Vec<F> {
    (0..m)
        .map(|k| {
            let mut acc = F::zero();
            for i in 0..m {
                for j in 0..m {
                    acc = acc + gamma[(k * m + i) * m + j] * a[i] * b[j];
                }
            }
            acc
        })
        .collect()
}

fn acceleration_from_parts<F: Real>(
    metric: &PointMetric<F>,
    schouten: &WeightedTensor<F>,
    v: &[F],
    w: &[F],
    jerk: &[F],
) -> Result<Vec<F>> {
    let m = v.len();
    let f2 = speed_squared(metric, v)?;
    let h_v: Vec<F> = (0..m)
        .map(|j| (0..m).map(|i| schouten.get(&[i, j]) * v[i]).sum())
        .collect();
    let h_v_sharp = metric.sharp(&h_v);
    let g_vw = metric.inner(v, w);
    let g_ww = metric.inner(w, w);
    let g_vj = metric.inner(v, jerk);
    let tangent_coeff = -F::of(6.0) * g_vw * g_vw / (f2 * f2)
        + F::of(1.5) * g_ww / f2
        + F::of(2.0) * g_vj / f2;
    Ok((0..m)
        .map(|i| {
            f2 * h_v_sharp[i] - jerk[i]
                + F::of(3.0) * g_vw / f2 * w[i]
                + tangent_coeff * v[i]
        })
        .collect())
}

/// Conformal acceleration `a(γ)` of a curve state with covariant third
/// derivative `jerk = ∇^g_γ̇ γ̈`, evaluated in the chart gauge.
pub fn conformal_acceleration<F: Real>(
    chart: &Arc<ConformalChart>,
    structures: CurveStructures<'_>,
    state: &CurveState<F>,
    jerk: &[F],
) -> Result<Vec<F>> {
    let geo = geometry_at(chart, structures, &state.x)?;
    acceleration_from_parts(
        geo.gauge.metric_value(),
        &geo.schouten,
        &state.v,
        &state.w,
        jerk,
    )
}

/// Split a vector at a curve state into its tangential and normal
/// parts with respect to the gauge metric.
pub fn tangential_normal_split<F: Real>(
    metric: &PointMetric<F>,
    v: &[F],
    a: &[F],
) -> Result<(Vec<F>, Vec<F>)> {
    let f2 = speed_squared(metric, v)?;
    let coeff = metric.inner(v, a) / f2;
    let tangential: Vec<F> = v.iter().map(|&vi| coeff * vi).collect();
    let normal: Vec<F> = a
        .iter()
        .zip(&tangential)
        .map(|(&ai, &ti)| ai - ti)
        .collect();
    Ok((tangential, normal))
}

/// The 1-form `θ` of the Weyl structure adapted to the curve at this
/// state: with `f² = g(γ̇,γ̇)` and `f' = g(γ̈,γ̇)/f`, the dual vector is
/// `T = γ̈/f² − 2(f'/f³)γ̇` and `θ = T♭`. The adapted structure
/// satisfies `∇_γ̇ γ̇ = 0`.
pub fn adapted_theta_along_curve<F: Real>(
    chart: &Arc<ConformalChart>,
    state: &CurveState<F>,
) -> Result<Vec<F>> {
    let m = chart.dim();
    let mut g = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            g.push(chart.metric_field(i, j).eval(&state.x)?);
        }
    }
    let metric = PointMetric::new(m, &g)?;
    adapted_theta_from_metric(&metric, &state.v, &state.w)
}

fn adapted_theta_from_metric<F: Real>(
    metric: &PointMetric<F>,
    v: &[F],
    w: &[F],
) -> Result<Vec<F>> {
    let f2 = speed_squared(metric, v)?;
    let f = f2.sqrt();
    let fprime = metric.inner(w, v) / f;
    let big_t: Vec<F> = (0..v.len())
        .map(|i| w[i] / f2 - F::of(2.0) * fprime / (f2 * f) * v[i])
        .collect();
    Ok(metric.flat(&big_t))
}

/// A curve given by closed-form chart coordinates as functions of a
/// single parameter.
#[derive(Debug, Clone)]
pub struct CurveMap {
    chart: Arc<ConformalChart>,
    comps: Vec<ScalarField>,
}

/// Jet-exact data of a [`CurveMap`] at one parameter value: the state,
/// the covariant third derivative, the adapted 1-form `θ`, and its
/// covariant derivative along the curve.
#[derive(Debug, Clone)]
pub struct CurveFrame<F: Real> {
    pub state: CurveState<F>,
    /// `γ⃛ = ∇^g_γ̇ γ̈`.
    pub jerk: Vec<F>,
    /// Adapted 1-form `θ` at the point.
    pub theta: Vec<F>,
    /// `(∇^g_γ̇ θ)_j` along the curve.
    pub nabla_theta_dir: Vec<F>,
    pub metric: Arc<PointMetric<F>>,
}

impl CurveMap {
    pub fn new(chart: &Arc<ConformalChart>, comps: Vec<ScalarField>) -> Result<CurveMap> {
        if comps.len() != chart.dim() {
            return Err(Error::Dimension(format!(
                "curve needs {} components, got {}",
                chart.dim(),
                comps.len()
            )));
        }
        for c in &comps {
            if c.dim() != 1 {
                return Err(Error::Dimension(
                    "curve components must be functions of one parameter".into(),
                ));
            }
        }
        Ok(CurveMap {
            chart: Arc::clone(chart),
            comps,
        })
    }

    pub fn parse(chart: &Arc<ConformalChart>, sources: &[&str]) -> Result<CurveMap> {
        let comps = sources
            .iter()
            .map(|s| ScalarField::parse(s, 1))
            .collect::<Result<Vec<_>>>()?;
        CurveMap::new(chart, comps)
    }

    pub fn chart(&self) -> &Arc<ConformalChart> {
        &self.chart
    }

    /// Chart fields restricted to the curve: substitute the curve
    /// components into an ambient scalar field.
    fn restrict(&self, field: &ScalarField) -> Result<ScalarField> {
        let exprs: Vec<_> = self.comps.iter().map(|c| c.expr().clone()).collect();
        ScalarField::new(field.expr().substitute(&exprs), 1)
    }

    /// Evaluate the full third-order frame at parameter `t` using
    /// one-variable jets (all derivatives are exact).
    pub fn frame_at<F: Real>(&self, t: F) -> Result<CurveFrame<F>> {
        let m = self.chart.dim();
        let p = [t];

        // Order-3 jets of the coordinates in the curve parameter.
        let gamma: Vec<Jet<F>> = self
            .comps
            .iter()
            .map(|c| c.jet(&p, 3))
            .collect::<Result<Vec<_>>>()?;
        let x: Vec<F> = gamma.iter().map(|j| j.value()).collect();
        let vel: Vec<Jet<F>> = gamma.iter().map(|j| j.derivative(0)).collect();

        // Metric, its spatial derivatives, and Christoffels along the
        // curve, as one-variable jets.
        let mut g = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                g.push(self.restrict(self.chart.metric_field(i, j))?.jet(&p, 3)?);
            }
        }
        let ginv = crate::conformal::invert_jet_matrix(m, &g)?;
        let mut dg = Vec::with_capacity(m * m * m); // dg[(k*m+i)*m+j] = ∂_k g_ij ∘ γ
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    dg.push(
                        self.restrict(&self.chart.metric_field(i, j).derivative(k))?
                            .jet(&p, 3)?,
                    );
                }
            }
        }
        let half = F::of(0.5);
        let mut gamma_sym = Vec::with_capacity(m * m * m); // Γ^k_ij at (k*m+i)*m+j
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut acc: Option<Jet<F>> = None;
                    for l in 0..m {
                        let low = &(&dg[(i * m + j) * m + l] + &dg[(j * m + i) * m + l])
                            - &dg[(l * m + i) * m + j];
                        let contrib = &ginv[k * m + l] * &low;
                        acc = Some(match acc {
                            None => contrib,
                            Some(a) => &a + &contrib,
                        });
                    }
                    gamma_sym.push(acc.unwrap().scale(half));
                }
            }
        }

        // Covariant acceleration jets: γ̈^k = v'^k + Γ^k_ab v^a v^b.
        let acc: Vec<Jet<F>> = (0..m)
            .map(|k| {
                let mut j = vel[k].derivative(0);
                for a in 0..m {
                    for b in 0..m {
                        j = &j + &(&(&gamma_sym[(k * m + a) * m + b] * &vel[a]) * &vel[b]);
                    }
                }
                j
            })
            .collect();

        // Covariant jerk values: γ⃛^k = (γ̈^k)' + Γ^k_ab v^a γ̈^b.
        let jerk: Vec<F> = (0..m)
            .map(|k| {
                let mut val = acc[k].d(0);
                for a in 0..m {
                    for b in 0..m {
                        val = val
                            + gamma_sym[(k * m + a) * m + b].value()
                                * vel[a].value()
                                * acc[b].value();
                    }
                }
                val
            })
            .collect();

        // Adapted 1-form jets: θ_i = g_ij T^j with
        // T = γ̈/f² − 2(f'/f³)γ̇.
        let mut f2: Option<Jet<F>> = None;
        for i in 0..m {
            for j in 0..m {
                let contrib = &(&g[i * m + j] * &vel[i]) * &vel[j];
                f2 = Some(match f2 {
                    None => contrib,
                    Some(a) => &a + &contrib,
                });
            }
        }
        let f2 = f2.unwrap();
        if f2.value() <= F::of(1e-12) {
            return Err(Error::Numerical(
                "curve velocity is (numerically) null".into(),
            ));
        }
        let f = f2.sqrt()?;
        let mut g_acc_v: Option<Jet<F>> = None;
        for i in 0..m {
            for j in 0..m {
                let contrib = &(&g[i * m + j] * &acc[i]) * &vel[j];
                g_acc_v = Some(match g_acc_v {
                    None => contrib,
                    Some(a) => &a + &contrib,
                });
            }
        }
        let fprime = g_acc_v.unwrap().try_div(&f)?;
        let f3 = &f2 * &f;
        let big_t: Vec<Jet<F>> = (0..m)
            .map(|i| {
                let first = acc[i].try_div(&f2)?;
                let second = (&fprime * &vel[i]).try_div(&f3)?.scale(F::of(2.0));
                Ok(&first - &second)
            })
            .collect::<Result<Vec<_>>>()?;
        let theta: Vec<Jet<F>> = (0..m)
            .map(|i| {
                let mut acc_j: Option<Jet<F>> = None;
                for j in 0..m {
                    let contrib = &g[i * m + j] * &big_t[j];
                    acc_j = Some(match acc_j {
                        None => contrib,
                        Some(a) => &a + &contrib,
                    });
                }
                acc_j.unwrap()
            })
            .collect();

        // (∇^g_γ̇ θ)_i = dθ_i/dt − Γ^a_{ki} γ̇^k θ_a (the chain rule
        // turns γ̇^k ∂_k θ_i into the parameter derivative).
        let v_values: Vec<F> = vel.iter().map(|j| j.value()).collect();
        let nabla_theta_dir: Vec<F> = (0..m)
            .map(|i| {
                let mut val = theta[i].d(0);
                for k in 0..m {
                    for a in 0..m {
                        val = val
                            - gamma_sym[(a * m + k) * m + i].value()
                                * v_values[k]
                                * theta[a].value();
                    }
                }
                val
            })
            .collect();

        let g_values: Vec<F> = g.iter().map(|j| j.value()).collect();
        let metric = PointMetric::new(m, &g_values)?;
        Ok(CurveFrame {
            state: CurveState {
                t,
                x,
                v: v_values,
                w: acc.iter().map(|j| j.value()).collect(),
            },
            jerk,
            theta: theta.iter().map(|j| j.value()).collect(),
            nabla_theta_dir,
            metric,
        })
    }
}

/// Residual of the identity `a(γ) = c(γ̇,γ̇)·(h^∇(γ̇))♯` for the Weyl
/// structure adapted to the curve, both sides evaluated independently
/// at parameter `t`.
pub fn accel_equivalence_check<F: Real>(
    curve: &CurveMap,
    structures: CurveStructures<'_>,
    t: F,
) -> Result<F> {
    let m = curve.chart().dim();
    let frame = curve.frame_at(t)?;
    let a = conformal_acceleration(curve.chart(), structures, &frame.state, &frame.jerk)?;

    let geo = geometry_at(curve.chart(), structures, &frame.state.x)?;
    let metric = geo.gauge.metric_value();
    let v = &frame.state.v;
    let f2 = speed_squared(metric.as_ref(), v)?;
    let theta_sharp = metric.sharp(&frame.theta);
    let c_tt = metric.inner(&theta_sharp, &theta_sharp);
    let theta_v: F = (0..m).map(|i| frame.theta[i] * v[i]).sum();

    // h^∇(γ̇)_j = h^g(γ̇)_j − (∇^g_γ̇ θ)_j + θ(γ̇)θ_j − ½ c(θ,θ) g_jk γ̇^k.
    let gv = metric.flat(v);
    let h_nabla_v: Vec<F> = (0..m)
        .map(|j| {
            let hg: F = (0..m).map(|i| geo.schouten.get(&[i, j]) * v[i]).sum();
            hg - frame.nabla_theta_dir[j] + theta_v * frame.theta[j]
                - F::of(0.5) * c_tt * gv[j]
        })
        .collect();
    let rhs: Vec<F> = metric
        .sharp(&h_nabla_v)
        .into_iter()
        .map(|z| f2 * z)
        .collect();

    let mut worst = F::zero();
    for i in 0..m {
        worst = worst.max((a[i] - rhs[i]).abs());
    }
    Ok(worst)
}

/// One sample of an integrated conformal geodesic.
#[derive(Debug, Clone)]
pub struct TraceSample<F> {
    pub t: F,
    pub x: Vec<F>,
    pub v: Vec<F>,
    pub w: Vec<F>,
    /// Norm of the re-evaluated conformal acceleration, with the
    /// covariant third derivative estimated from neighboring samples.
    pub residual: F,
}

/// Integrated conformal geodesic with per-sample residuals.
#[derive(Debug, Clone)]
pub struct GeodesicTrace<F> {
    pub dim: usize,
    pub step: F,
    pub samples: Vec<TraceSample<F>>,
}

impl<F: Real> GeodesicTrace<F> {
    pub fn max_residual(&self) -> F {
        self.samples
            .iter()
            .map(|s| s.residual)
            .fold(F::zero(), F::max)
    }

    /// CSV with columns `t, x1..xm, v1..vm, w1..wm, residual_norm`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let m = self.dim;
        let mut header = String::from("t");
        for prefix in ["x", "v", "w"] {
            for i in 1..=m {
                header.push_str(&format!(",{prefix}{i}"));
            }
        }
        header.push_str(",residual_norm");
        writeln!(out, "{header}")?;
        for s in &self.samples {
            let mut line = format!("{:.12e}", s.t.as_f64());
            for block in [&s.x, &s.v, &s.w] {
                for &val in block.iter() {
                    line.push_str(&format!(",{:.12e}", val.as_f64()));
                }
            }
            line.push_str(&format!(",{:.3e}", s.residual.as_f64()));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Integration options: parameter interval and fixed step size.
#[derive(Debug, Clone, Copy)]
pub struct IntegrationOptions<F> {
    pub t_span: (F, F),
    pub step: F,
}

impl<F: Real> Default for IntegrationOptions<F> {
    fn default() -> IntegrationOptions<F> {
        IntegrationOptions {
            t_span: (F::zero(), F::one()),
            step: F::of(1e-3),
        }
    }
}

/// Right-hand side of the first-order system for `(x, v, w)` with
/// `w = ∇^g_γ̇ γ̇`: setting `a(γ) = 0` and pairing with `γ̇` resolves
/// the third derivative in closed form,
/// `γ⃛ = K − 2(g(γ̇,K)/g(γ̇,γ̇))γ̇`.
fn ode_rhs<F: Real>(
    chart: &Arc<ConformalChart>,
    structures: CurveStructures<'_>,
    x: &[F],
    v: &[F],
    w: &[F],
) -> Result<(Vec<F>, Vec<F>, Vec<F>)> {
    let m = chart.dim();
    let geo = geometry_at(chart, structures, x)?;
    let metric = geo.gauge.metric_value();
    let gamma = geo.gauge.christoffel_values();
    let f2 = speed_squared(metric.as_ref(), v)?;
    let g_vw = metric.inner(v, w);
    let g_ww = metric.inner(w, w);
    let h_v: Vec<F> = (0..m)
        .map(|j| (0..m).map(|i| geo.schouten.get(&[i, j]) * v[i]).sum())
        .collect();
    let h_v_sharp = metric.sharp(&h_v);
    let coeff = -F::of(6.0) * g_vw * g_vw / (f2 * f2) + F::of(1.5) * g_ww / f2;
    let k_vec: Vec<F> = (0..m)
        .map(|i| f2 * h_v_sharp[i] + F::of(3.0) * g_vw / f2 * w[i] + coeff * v[i])
        .collect();
    let g_vk = metric.inner(v, &k_vec);
    let jerk: Vec<F> = (0..m)
        .map(|i| k_vec[i] - F::of(2.0) * g_vk / f2 * v[i])
        .collect();

    let gamma_vv = christoffel_contract(&gamma, m, v, v);
    let gamma_vw = christoffel_contract(&gamma, m, v, w);
    let dx = v.to_vec();
    let dv: Vec<F> = (0..m).map(|i| w[i] - gamma_vv[i]).collect();
    let dw: Vec<F> = (0..m).map(|i| jerk[i] - gamma_vw[i]).collect();
    Ok((dx, dv, dw))
}

/// Integrate the conformal-geodesic equation `a(γ) = 0` with classical
/// fixed-step 4th-order Runge-Kutta on the system `(x, v, w)`.
pub fn integrate_conformal_geodesic<F: Real>(
    chart: &Arc<ConformalChart>,
    structures: CurveStructures<'_>,
    init: &CurveState<F>,
    opts: IntegrationOptions<F>,
) -> Result<GeodesicTrace<F>> {
    let m = chart.dim();
    if init.x.len() != m || init.v.len() != m || init.w.len() != m {
        return Err(Error::Dimension(
            "initial state does not match the chart dimension".into(),
        ));
    }
    let (t0, t1) = opts.t_span;
    let h = opts.step;
    if h <= F::zero() || t1 <= t0 {
        return Err(Error::Numerical("empty or reversed integration span".into()));
    }
    let n_steps = ((t1 - t0) / h).as_f64().round() as usize;
    if n_steps == 0 {
        return Err(Error::Numerical("step exceeds the integration span".into()));
    }

    let mut t = t0;
    let mut x = init.x.clone();
    let mut v = init.v.clone();
    let mut w = init.w.clone();
    let mut raw: Vec<(F, Vec<F>, Vec<F>, Vec<F>)> =
        Vec::with_capacity(n_steps + 1);
    raw.push((t, x.clone(), v.clone(), w.clone()));

    let half = F::of(0.5);
    let sixth = F::one() / F::of(6.0);
    for _ in 0..n_steps {
        let k1 = ode_rhs(chart, structures, &x, &v, &w)?;
        let advance = |base_x: &[F], base_v: &[F], base_w: &[F], k: &(Vec<F>, Vec<F>, Vec<F>), s: F| {
            let nx: Vec<F> = (0..m).map(|i| base_x[i] + s * k.0[i]).collect();
            let nv: Vec<F> = (0..m).map(|i| base_v[i] + s * k.1[i]).collect();
            let nw: Vec<F> = (0..m).map(|i| base_w[i] + s * k.2[i]).collect();
            (nx, nv, nw)
        };
        let (x2, v2, w2) = advance(&x, &v, &w, &k1, half * h);
        let k2 = ode_rhs(chart, structures, &x2, &v2, &w2)?;
        let (x3, v3, w3) = advance(&x, &v, &w, &k2, half * h);
        let k3 = ode_rhs(chart, structures, &x3, &v3, &w3)?;
        let (x4, v4, w4) = advance(&x, &v, &w, &k3, h);
        let k4 = ode_rhs(chart, structures, &x4, &v4, &w4)?;
        for i in 0..m {
            x[i] = x[i]
                + h * sixth * (k1.0[i] + F::of(2.0) * k2.0[i] + F::of(2.0) * k3.0[i] + k4.0[i]);
            v[i] = v[i]
                + h * sixth * (k1.1[i] + F::of(2.0) * k2.1[i] + F::of(2.0) * k3.1[i] + k4.1[i]);
            w[i] = w[i]
                + h * sixth * (k1.2[i] + F::of(2.0) * k2.2[i] + F::of(2.0) * k3.2[i] + k4.2[i]);
        }
        t = t + h;
        if !x.iter().chain(&v).chain(&w).all(|z| z.as_f64().is_finite()) {
            return Err(Error::Numerical(format!(
                "trajectory blew up near t = {}",
                t.as_f64()
            )));
        }
        raw.push((t, x.clone(), v.clone(), w.clone()));
    }

    // Residual pass: re-evaluate a(γ) per sample with the covariant
    // third derivative estimated from neighboring samples
    // (second-order differences, one-sided at the ends).
    let n = raw.len();
    let mut samples = Vec::with_capacity(n);
    for s in 0..n {
        let (ts, xs, vs, ws) = &raw[s];
        let dw_dt: Vec<F> = if n < 3 {
            vec![F::zero(); m]
        } else if s == 0 {
            (0..m)
                .map(|i| {
                    (-F::of(3.0) * raw[0].3[i] + F::of(4.0) * raw[1].3[i] - raw[2].3[i])
                        / (F::of(2.0) * h)
                })
                .collect()
        } else if s == n - 1 {
            (0..m)
                .map(|i| {
                    (F::of(3.0) * raw[n - 1].3[i] - F::of(4.0) * raw[n - 2].3[i]
                        + raw[n - 3].3[i])
                        / (F::of(2.0) * h)
                })
                .collect()
        } else {
            (0..m)
                .map(|i| (raw[s + 1].3[i] - raw[s - 1].3[i]) / (F::of(2.0) * h))
                .collect()
        };
        let geo = geometry_at(chart, structures, xs)?;
        let gamma = geo.gauge.christoffel_values();
        let gamma_vw = christoffel_contract(&gamma, m, vs, ws);
        let jerk: Vec<F> = (0..m).map(|i| dw_dt[i] + gamma_vw[i]).collect();
        let a = acceleration_from_parts(geo.gauge.metric_value(), &geo.schouten, vs, ws, &jerk)?;
        let residual = a.iter().fold(F::zero(), |acc, z| acc.max(z.abs()));
        samples.push(TraceSample {
            t: *ts,
            x: xs.clone(),
            v: vs.clone(),
            w: ws.clone(),
            residual,
        });
    }
    Ok(GeodesicTrace {
        dim: m,
        step: h,
        samples,
    })
}

/// Maximum deviation of a point cloud from the circle (or line)
/// determined by its first, middle, and last points. Conformal
/// geodesics of flat space are exactly circles and lines.
pub fn circle_line_deviation(points: &[Vec<f64>]) -> f64 {
    assert!(points.len() >= 3, "need at least three points");
    let m = points[0].len();
    let p0 = &points[0];
    let pm = &points[points.len() / 2];
    let pn = &points[points.len() - 1];
    let sub = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let norm = |a: &[f64]| -> f64 { dot(a, a).sqrt() };

    let u1 = sub(pm, p0);
    let u2 = sub(pn, p0);
    let n1 = norm(&u1);
    assert!(n1 > 1e-12, "degenerate sample spread");
    let e1: Vec<f64> = u1.iter().map(|z| z / n1).collect();
    let proj = dot(&u2, &e1);
    let u2_perp: Vec<f64> = (0..m).map(|i| u2[i] - proj * e1[i]).collect();
    let n2 = norm(&u2_perp);

    if n2 < 1e-9 {
        // Collinear anchors: measure distance to the line through p0
        // along e1.
        return points
            .iter()
            .map(|p| {
                let d = sub(p, p0);
                let along = dot(&d, &e1);
                let off: Vec<f64> = (0..m).map(|i| d[i] - along * e1[i]).collect();
                norm(&off)
            })
            .fold(0.0, f64::max);
    }

    let e2: Vec<f64> = u2_perp.iter().map(|z| z / n2).collect();
    // Plane coordinates of the anchors: p0 = (0,0), pm = (a1,0),
    // pn = (b1,b2). Circumcenter from the two chord bisectors.
    let a1 = n1;
    let b1 = proj;
    let b2 = n2;
    let cx = a1 / 2.0;
    let cy = (b1 * b1 + b2 * b2 - b1 * a1) / (2.0 * b2);
    let r = (cx * cx + cy * cy).sqrt();

    points
        .iter()
        .map(|p| {
            let d = sub(p, p0);
            let in1 = dot(&d, &e1);
            let in2 = dot(&d, &e2);
            let off: Vec<f64> = (0..m)
                .map(|i| d[i] - in1 * e1[i] - in2 * e2[i])
                .collect();
            let radial = (((in1 - cx).powi(2) + (in2 - cy).powi(2)).sqrt() - r).abs();
            radial.max(norm(&off))
        })
        .fold(0.0, f64::max)
}
