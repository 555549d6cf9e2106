//! Jet-level connection data of a Weyl structure at a point.
//!
//! A [`GaugePoint`] bundles the jets of the gauge metric, its inverse,
//! the Weyl 1-form, and both Christoffel symbol families at a chart
//! point. All curvature and covariant-derivative evaluation reduces to
//! polynomial jet arithmetic on this data, so identities hold to
//! roundoff.

use std::sync::Arc;

use num_rational::Rational64;

use crate::conformal::chart::WeylStructure;
use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::scalar::Real;
use crate::tensor::{for_each_index, PointMetric, Variance, WeightedTensor};

/// Invert a square matrix of jets by Gauss-Jordan elimination,
/// pivoting on the value parts.
pub fn invert_jet_matrix<F: Real>(n: usize, m: &[Jet<F>]) -> Result<Vec<Jet<F>>> {
    assert_eq!(m.len(), n * n);
    let shape = m[0].shape().clone();
    let mut a: Vec<Jet<F>> = m.to_vec();
    let mut inv: Vec<Jet<F>> = (0..n * n)
        .map(|pos| {
            if pos / n == pos % n {
                Jet::constant(&shape, F::one())
            } else {
                Jet::zero(&shape)
            }
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                a[r * n + col]
                    .value()
                    .abs()
                    .partial_cmp(&a[s * n + col].value().abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot_row * n + col].value().abs() <= F::epsilon() * F::of(1e4) {
            return Err(Error::SingularMetric);
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
                inv.swap(col * n + k, pivot_row * n + k);
            }
        }
        let pivot = a[col * n + col].clone();
        for k in 0..n {
            a[col * n + k] = a[col * n + k].try_div(&pivot)?;
            inv[col * n + k] = inv[col * n + k].try_div(&pivot)?;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r * n + col].clone();
            if factor.sup_norm() == F::zero() {
                continue;
            }
            for k in 0..n {
                a[r * n + k] = &a[r * n + k] - &(&factor * &a[col * n + k]);
                inv[r * n + k] = &inv[r * n + k] - &(&factor * &inv[col * n + k]);
            }
        }
    }
    Ok(inv)
}

/// A tensor field germ: one jet per component, plus the variance
/// signature and total conformal weight of the field.
#[derive(Debug, Clone)]
pub struct JetTensor<F: Real> {
    m: usize,
    variance: Vec<Variance>,
    weight: Rational64,
    comps: Vec<Jet<F>>,
}

impl<F: Real> JetTensor<F> {
    pub fn new(
        m: usize,
        variance: Vec<Variance>,
        weight: Rational64,
        comps: Vec<Jet<F>>,
    ) -> JetTensor<F> {
        assert_eq!(comps.len(), m.pow(variance.len() as u32));
        JetTensor {
            m,
            variance,
            weight,
            comps,
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn weight(&self) -> Rational64 {
        self.weight
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Jet<F> {
        &self.comps[self.linear_index(idx)]
    }

    pub fn comps(&self) -> &[Jet<F>] {
        &self.comps
    }

    /// Pointwise value as a weighted tensor over the given metric.
    pub fn value(&self, metric: &Arc<PointMetric<F>>) -> WeightedTensor<F> {
        let values = self.comps.iter().map(|j| j.value()).collect();
        WeightedTensor::from_coeffs(metric, &self.variance, self.weight, values)
            .expect("component count matches shape")
    }
}

fn idx3(m: usize, k: usize, i: usize, j: usize) -> usize {
    (k * m + i) * m + j
}

/// All connection jets of a Weyl structure at one chart point.
#[derive(Debug, Clone)]
pub struct GaugePoint<F: Real> {
    m: usize,
    point: Vec<F>,
    g: Vec<Jet<F>>,
    ginv: Vec<Jet<F>>,
    theta: Vec<Jet<F>>,
    /// Gauge Levi-Civita symbols `Γ^k_ij` at slot `(k*m+i)*m+j`.
    gamma_gauge: Vec<Jet<F>>,
    /// Weyl-structure symbols, same layout.
    gamma: Vec<Jet<F>>,
    metric_value: Arc<PointMetric<F>>,
}

impl<F: Real> GaugePoint<F> {
    /// Evaluate the Weyl structure's connection data at `p` with
    /// metric jets of the given order (Christoffels come out one order
    /// lower, curvature two orders lower).
    pub fn at(w: &WeylStructure, p: &[F], order: usize) -> Result<GaugePoint<F>> {
        let m = w.chart().dim();
        if p.len() != m {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, chart has {m}",
                p.len()
            )));
        }
        let mut g = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                g.push(w.chart().metric_field(i, j).jet(p, order)?);
            }
        }
        let ginv = invert_jet_matrix(m, &g)?;
        let mut theta = Vec::with_capacity(m);
        for t in w.theta() {
            theta.push(t.jet(p, order)?);
        }

        // Γ^k_ij = ½ g^{kl} (∂_i g_jl + ∂_j g_il − ∂_l g_ij)
        let half = F::of(0.5);
        let mut gamma_gauge = Vec::with_capacity(m * m * m);
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut acc: Option<Jet<F>> = None;
                    for l in 0..m {
                        let term = &g[j * m + l].derivative(i)
                            + &g[i * m + l].derivative(j)
                            - g[i * m + j].derivative(l);
                        let contrib = &ginv[k * m + l] * &term;
                        acc = Some(match acc {
                            None => contrib,
                            Some(a) => &a + &contrib,
                        });
                    }
                    gamma_gauge.push(acc.unwrap().scale(half));
                }
            }
        }

        // Weyl addition: Γ^∇k_ij = Γ^g + δ^k_i θ_j + δ^k_j θ_i − g_ij g^{kl}θ_l.
        let mut theta_sharp = Vec::with_capacity(m);
        for k in 0..m {
            let mut acc: Option<Jet<F>> = None;
            for l in 0..m {
                let contrib = &ginv[k * m + l] * &theta[l];
                acc = Some(match acc {
                    None => contrib,
                    Some(a) => &a + &contrib,
                });
            }
            theta_sharp.push(acc.unwrap());
        }
        let mut gamma = gamma_gauge.clone();
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut extra = -(&g[i * m + j] * &theta_sharp[k]);
                    if k == i {
                        extra = &extra + &theta[j];
                    }
                    if k == j {
                        extra = &extra + &theta[i];
                    }
                    let pos = idx3(m, k, i, j);
                    gamma[pos] = &gamma[pos] + &extra;
                }
            }
        }

        let g_values: Vec<F> = g.iter().map(|j| j.value()).collect();
        let metric_value = PointMetric::new(m, &g_values)?;
        Ok(GaugePoint {
            m,
            point: p.to_vec(),
            g,
            ginv,
            theta,
            gamma_gauge,
            gamma,
            metric_value,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn point(&self) -> &[F] {
        &self.point
    }

    pub fn metric_value(&self) -> &Arc<PointMetric<F>> {
        &self.metric_value
    }

    pub fn g_jet(&self, i: usize, j: usize) -> &Jet<F> {
        &self.g[i * self.m + j]
    }

    pub fn ginv_jet(&self, i: usize, j: usize) -> &Jet<F> {
        &self.ginv[i * self.m + j]
    }

    pub fn theta_jet(&self, i: usize) -> &Jet<F> {
        &self.theta[i]
    }

    pub fn gamma_gauge_jet(&self, k: usize, i: usize, j: usize) -> &Jet<F> {
        &self.gamma_gauge[idx3(self.m, k, i, j)]
    }

    pub fn gamma_jet(&self, k: usize, i: usize, j: usize) -> &Jet<F> {
        &self.gamma[idx3(self.m, k, i, j)]
    }

    /// Christoffel values `Γ^∇k_ij` of the Weyl structure at the point.
    pub fn christoffel_values(&self) -> Vec<F> {
        self.gamma.iter().map(|j| j.value()).collect()
    }

    /// Curvature jets `R[i][j][k][l] = (R_{∂i,∂j} ∂l)^k` from
    /// `R^k_{l;ij} = ∂_iΓ^k_jl − ∂_jΓ^k_il + Γ^k_ia Γ^a_jl − Γ^k_ja Γ^a_il`.
    pub fn curvature_jets(&self) -> Vec<Jet<F>> {
        let m = self.m;
        let mut r = Vec::with_capacity(m * m * m * m);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut acc = &self.gamma[idx3(m, k, j, l)].derivative(i)
                            - &self.gamma[idx3(m, k, i, l)].derivative(j);
                        for a in 0..m {
                            acc = &acc
                                + &(&self.gamma[idx3(m, k, i, a)]
                                    * &self.gamma[idx3(m, a, j, l)]);
                            acc = &acc
                                - &(&self.gamma[idx3(m, k, j, a)]
                                    * &self.gamma[idx3(m, a, i, l)]);
                        }
                        r.push(acc);
                    }
                }
            }
        }
        r
    }

    /// Curvature value as a weighted tensor (slots `[Co,Co,Contra,Co]`,
    /// weight −2).
    pub fn curvature_value(&self) -> WeightedTensor<F> {
        let jets = self.curvature_jets();
        let values: Vec<F> = jets.iter().map(|j| j.value()).collect();
        WeightedTensor::from_coeffs(
            &self.metric_value,
            &[Variance::Co, Variance::Co, Variance::Contra, Variance::Co],
            Rational64::from_integer(-2),
            values,
        )
        .expect("curvature shape")
    }

    fn covariant_derivative_with(
        &self,
        t: &JetTensor<F>,
        gamma: &[Jet<F>],
        weight_action: bool,
    ) -> JetTensor<F> {
        let m = self.m;
        assert_eq!(t.dim(), m, "tensor lives on a different chart");
        let rank = t.rank();
        let s = t
            .variance()
            .iter()
            .filter(|&&v| v == Variance::Contra)
            .count() as i64;
        let r = rank as i64 - s;
        let k_intr = t.weight() - Rational64::from_integer(s - r);
        let mut out_variance = vec![Variance::Co];
        out_variance.extend_from_slice(t.variance());
        let mut comps: Vec<Jet<F>> = Vec::with_capacity(m.pow(rank as u32 + 1));
        let mut scratch = vec![0usize; rank];
        for_each_index(rank + 1, m, |full| {
            let i = full[0];
            let idx = &full[1..];
            let mut acc = t.get(idx).derivative(i);
            for (slot, &v) in t.variance().iter().enumerate() {
                scratch.copy_from_slice(idx);
                for a in 0..m {
                    scratch[slot] = a;
                    let term = match v {
                        Variance::Contra => {
                            &gamma[idx3(m, idx[slot], i, a)] * t.get(&scratch)
                        }
                        Variance::Co => {
                            -(&gamma[idx3(m, a, i, idx[slot])] * t.get(&scratch))
                        }
                    };
                    acc = &acc + &term;
                }
            }
            if weight_action && k_intr != Rational64::from_integer(0) {
                acc = &acc + &(&self.theta[i] * t.get(idx)).scale(F::of_rational(k_intr));
            }
            comps.push(acc);
        });
        JetTensor::new(m, out_variance, t.weight() - 1, comps)
    }

    /// Covariant derivative with respect to the Weyl structure: a new
    /// covariant slot is prepended, the total weight drops by 1, and
    /// the intrinsic weight of the field acts through `θ`.
    pub fn covariant_derivative(&self, t: &JetTensor<F>) -> JetTensor<F> {
        self.covariant_derivative_with(t, &self.gamma, true)
    }

    /// Covariant derivative with respect to the gauge Levi-Civita
    /// connection (no weight action).
    pub fn covariant_derivative_gauge(&self, t: &JetTensor<F>) -> JetTensor<F> {
        self.covariant_derivative_with(t, &self.gamma_gauge, false)
    }

    /// Jet tensor of the Weyl 1-form (`[Co]`, weight −1).
    pub fn theta_tensor(&self) -> JetTensor<F> {
        JetTensor::new(
            self.m,
            vec![Variance::Co],
            Rational64::from_integer(-1),
            self.theta.clone(),
        )
    }

    /// Weighted density derivative: `∇_i λ = ∂_i λ + k θ_i λ` for a
    /// weight-`k` density represented by the scalar jet `λ` in this
    /// gauge. Output slots `[Co]`, weight `k − 1`.
    pub fn density_derivative(&self, lambda: &Jet<F>, k: Rational64) -> JetTensor<F> {
        let kf = F::of_rational(k);
        let comps: Vec<Jet<F>> = (0..self.m)
            .map(|i| &lambda.derivative(i) + &(&self.theta[i] * lambda).scale(kf))
            .collect();
        JetTensor::new(self.m, vec![Variance::Co], k - 1, comps)
    }

    /// Exterior derivative of the Weyl 1-form: `(dθ)_ij = ∂_iθ_j − ∂_jθ_i`.
    pub fn dtheta_value(&self) -> WeightedTensor<F> {
        self.dtheta_eta(&self.theta)
    }

    /// Exterior derivative of an arbitrary 1-form given by jets.
    pub fn dtheta_eta(&self, eta: &[Jet<F>]) -> WeightedTensor<F> {
        WeightedTensor::from_fn(
            &self.metric_value,
            &[Variance::Co, Variance::Co],
            Rational64::from_integer(-2),
            |idx| eta[idx[1]].d(idx[0]) - eta[idx[0]].d(idx[1]),
        )
    }
}
