//! Pointwise weighted-tensor algebra.
//!
//! Tensors live at a single point of a chart and carry a variance
//! signature together with an exact rational conformal weight. The
//! gauge metric at the point provides the musical isomorphisms; the
//! curvature-algebra maps (suspension, Ricci contraction, its right
//! inverse) operate on these values.

use std::sync::Arc;

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauge metric value at a point: the symmetric matrix `g_ij` and its
/// inverse.
#[derive(Debug, Clone)]
pub struct PointMetric<F: Real> {
    n: usize,
    g: Vec<F>,
    ginv: Vec<F>,
}

impl<F: Real> PointMetric<F> {
    /// Build from the row-major entries of a symmetric matrix.
    pub fn new(n: usize, entries: &[F]) -> Result<Arc<PointMetric<F>>> {
        if entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "metric entry count {} does not match dimension {n}",
                entries.len()
            )));
        }
        let ginv = invert_symmetric(n, entries)?;
        Ok(Arc::new(PointMetric {
            n,
            g: entries.to_vec(),
            ginv,
        }))
    }

    pub fn euclidean(n: usize) -> Arc<PointMetric<F>> {
        let mut g = vec![F::zero(); n * n];
        for i in 0..n {
            g[i * n + i] = F::one();
        }
        Arc::new(PointMetric {
            n,
            g: g.clone(),
            ginv: g,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn g(&self, i: usize, j: usize) -> F {
        self.g[i * self.n + j]
    }

    pub fn ginv(&self, i: usize, j: usize) -> F {
        self.ginv[i * self.n + j]
    }

    /// Pairing of two vectors.
    pub fn inner(&self, x: &[F], y: &[F]) -> F {
        let mut acc = F::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                acc = acc + self.g(i, j) * x[i] * y[j];
            }
        }
        acc
    }

    /// Pairing of two covectors through the inverse metric.
    pub fn inner_co(&self, a: &[F], b: &[F]) -> F {
        let mut acc = F::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                acc = acc + self.ginv(i, j) * a[i] * b[j];
            }
        }
        acc
    }

    /// Index-raising of a covector.
    pub fn sharp(&self, a: &[F]) -> Vec<F> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.ginv(i, j) * a[j]).sum())
            .collect()
    }

    /// Index-lowering of a vector.
    pub fn flat(&self, x: &[F]) -> Vec<F> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.g(i, j) * x[j]).sum())
            .collect()
    }
}

/// Invert a symmetric matrix by Gauss-Jordan with partial pivoting.
pub fn invert_symmetric<F: Real>(n: usize, m: &[F]) -> Result<Vec<F>> {
    let mut a = m.to_vec();
    let mut inv = vec![F::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = F::one();
    }
    let scale = m
        .iter()
        .fold(F::zero(), |acc, &x| if x.abs() > acc { x.abs() } else { acc });
    if scale == F::zero() {
        return Err(Error::SingularMetric);
    }
    let eps = F::epsilon() * scale * F::of(1e3);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                a[r * n + col]
                    .abs()
                    .partial_cmp(&a[s * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot_row * n + col].abs() <= eps {
            return Err(Error::SingularMetric);
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
                inv.swap(col * n + k, pivot_row * n + k);
            }
        }
        let pivot = a[col * n + col];
        for k in 0..n {
            a[col * n + k] = a[col * n + k] / pivot;
            inv[col * n + k] = inv[col * n + k] / pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r * n + col];
            if factor == F::zero() {
                continue;
            }
            for k in 0..n {
                a[r * n + k] = a[r * n + k] - factor * a[col * n + k];
                inv[r * n + k] = inv[r * n + k] - factor * inv[col * n + k];
            }
        }
    }
    Ok(inv)
}

/// Slot variance of a tensor index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    /// Lower index (covector slot).
    Co,
    /// Upper index (vector slot).
    Contra,
}

/// Dense tensor value at a point, tagged with slot variances and a
/// conformal weight.
///
/// The weight is the total weight `s - r + k` of the section, so it is
/// exactly the factor multiplying `θ(X)` in the identity-component
/// action of a Weyl-structure change on this value. Raising or
/// lowering a slot uses the weight-±2 metric isomorphisms and shifts
/// the weight accordingly; the trace maps `tr_c` and the curvature
/// algebra below use the weightless gauge representative of the
/// conformal class and preserve the weight tag.
#[derive(Debug, Clone)]
pub struct WeightedTensor<F: Real> {
    metric: Arc<PointMetric<F>>,
    variance: Vec<Variance>,
    weight: Rational64,
    coeffs: Vec<F>,
}

/// Visit all multi-indices of the given rank over `0..n`.
pub fn for_each_index(rank: usize, n: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; rank];
    loop {
        f(&idx);
        let mut pos = rank;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

impl<F: Real> WeightedTensor<F> {
    pub fn zeros(
        metric: &Arc<PointMetric<F>>,
        variance: &[Variance],
        weight: Rational64,
    ) -> WeightedTensor<F> {
        let len = metric.n.pow(variance.len() as u32);
        WeightedTensor {
            metric: Arc::clone(metric),
            variance: variance.to_vec(),
            weight,
            coeffs: vec![F::zero(); len],
        }
    }

    pub fn from_coeffs(
        metric: &Arc<PointMetric<F>>,
        variance: &[Variance],
        weight: Rational64,
        coeffs: Vec<F>,
    ) -> Result<WeightedTensor<F>> {
        let len = metric.n.pow(variance.len() as u32);
        if coeffs.len() != len {
            return Err(Error::Dimension(format!(
                "coefficient count {} does not match shape {len}",
                coeffs.len()
            )));
        }
        Ok(WeightedTensor {
            metric: Arc::clone(metric),
            variance: variance.to_vec(),
            weight,
            coeffs,
        })
    }

    pub fn from_fn(
        metric: &Arc<PointMetric<F>>,
        variance: &[Variance],
        weight: Rational64,
        mut f: impl FnMut(&[usize]) -> F,
    ) -> WeightedTensor<F> {
        let mut t = WeightedTensor::zeros(metric, variance, weight);
        let n = metric.n;
        let rank = variance.len();
        let mut pos = 0;
        for_each_index(rank, n, |idx| {
            t.coeffs[pos] = f(idx);
            pos += 1;
        });
        t
    }

    /// The gauge-metric bilinear value `c` at the point, weightless.
    pub fn gauge_c(metric: &Arc<PointMetric<F>>) -> WeightedTensor<F> {
        WeightedTensor::from_fn(
            metric,
            &[Variance::Co, Variance::Co],
            Rational64::from_integer(0),
            |idx| metric.g(idx[0], idx[1]),
        )
    }

    pub fn metric(&self) -> &Arc<PointMetric<F>> {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.n
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

    pub fn with_weight(mut self, weight: Rational64) -> WeightedTensor<F> {
        self.weight = weight;
        self
    }

    pub fn coeffs(&self) -> &[F] {
        &self.coeffs
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let n = self.metric.n;
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < n);
            acc * n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> F {
        self.coeffs[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: F) {
        let pos = self.linear_index(idx);
        self.coeffs[pos] = value;
    }

    pub fn add_at(&mut self, idx: &[usize], value: F) {
        let pos = self.linear_index(idx);
        self.coeffs[pos] = self.coeffs[pos] + value;
    }

    fn assert_compatible(&self, other: &WeightedTensor<F>) {
        assert_eq!(self.variance, other.variance, "variance mismatch");
        debug_assert_eq!(self.weight, other.weight, "weight mismatch");
        assert_eq!(self.metric.n, other.metric.n, "dimension mismatch");
    }

    pub fn add(&self, other: &WeightedTensor<F>) -> WeightedTensor<F> {
        self.assert_compatible(other);
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a = *a + *b;
        }
        out
    }

    pub fn sub(&self, other: &WeightedTensor<F>) -> WeightedTensor<F> {
        self.assert_compatible(other);
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a = *a - *b;
        }
        out
    }

    pub fn scale(&self, s: F) -> WeightedTensor<F> {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a = *a * s;
        }
        out
    }

    pub fn neg(&self) -> WeightedTensor<F> {
        self.scale(-F::one())
    }

    pub fn sup_norm(&self) -> F {
        self.coeffs
            .iter()
            .fold(F::zero(), |acc, &x| if x.abs() > acc { x.abs() } else { acc })
    }

    /// Raise a covariant slot through the metric isomorphism
    /// (weight +2).
    pub fn raise(&self, slot: usize) -> Result<WeightedTensor<F>> {
        if self.variance[slot] != Variance::Co {
            return Err(Error::Dimension(format!(
                "slot {slot} is already contravariant"
            )));
        }
        let mut out = self.metric_contract(slot, true);
        out.variance[slot] = Variance::Contra;
        out.weight += 2;
        Ok(out)
    }

    /// Lower a contravariant slot through the metric isomorphism
    /// (weight −2).
    pub fn lower(&self, slot: usize) -> Result<WeightedTensor<F>> {
        if self.variance[slot] != Variance::Contra {
            return Err(Error::Dimension(format!(
                "slot {slot} is already covariant"
            )));
        }
        let mut out = self.metric_contract(slot, false);
        out.variance[slot] = Variance::Co;
        out.weight -= 2;
        Ok(out)
    }

    fn metric_contract(&self, slot: usize, use_inverse: bool) -> WeightedTensor<F> {
        let n = self.metric.n;
        let mut out = self.clone();
        let mut scratch = vec![0usize; self.rank()];
        for_each_index(self.rank(), n, |idx| {
            let mut acc = F::zero();
            scratch.copy_from_slice(idx);
            for k in 0..n {
                scratch[slot] = k;
                let m = if use_inverse {
                    self.metric.ginv(idx[slot], k)
                } else {
                    self.metric.g(idx[slot], k)
                };
                acc = acc + m * self.get(&scratch);
            }
            let pos = out.linear_index(idx);
            out.coeffs[pos] = acc;
        });
        out
    }

    /// Contract a contravariant slot against a covariant one; weight
    /// is unchanged.
    pub fn contract(&self, up: usize, down: usize) -> Result<WeightedTensor<F>> {
        if self.variance[up] != Variance::Contra || self.variance[down] != Variance::Co {
            return Err(Error::Dimension(
                "contraction needs one contravariant and one covariant slot".into(),
            ));
        }
        self.pair_sum(up, down, None)
    }

    /// Trace of two covariant slots against the weightless inverse
    /// gauge form; weight is unchanged.
    pub fn trace_c(&self, a: usize, b: usize) -> Result<WeightedTensor<F>> {
        if self.variance[a] != Variance::Co || self.variance[b] != Variance::Co {
            return Err(Error::Dimension(
                "c-trace needs two covariant slots".into(),
            ));
        }
        self.pair_sum(a, b, Some(true))
    }

    fn pair_sum(
        &self,
        a: usize,
        b: usize,
        metric: Option<bool>,
    ) -> Result<WeightedTensor<F>> {
        if a == b {
            return Err(Error::Dimension("cannot contract a slot with itself".into()));
        }
        let n = self.metric.n;
        let out_variance: Vec<Variance> = self
            .variance
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != a && *s != b)
            .map(|(_, &v)| v)
            .collect();
        let mut out = WeightedTensor::zeros(&self.metric, &out_variance, self.weight);
        let mut full = vec![0usize; self.rank()];
        let mut pos = 0;
        for_each_index(out_variance.len(), n, |idx| {
            let mut src = idx.iter();
            for (s, slot) in full.iter_mut().enumerate() {
                if s != a && s != b {
                    *slot = *src.next().unwrap();
                }
            }
            let mut acc = F::zero();
            for i in 0..n {
                match metric {
                    None => {
                        full[a] = i;
                        full[b] = i;
                        acc = acc + self.get(&full);
                    }
                    Some(use_inverse) => {
                        for j in 0..n {
                            full[a] = i;
                            full[b] = j;
                            let m = if use_inverse {
                                self.metric.ginv(i, j)
                            } else {
                                self.metric.g(i, j)
                            };
                            acc = acc + m * self.get(&full);
                        }
                    }
                }
            }
            out.coeffs[pos] = acc;
            pos += 1;
        });
        Ok(out)
    }

    /// Symmetric part of a rank-2 tensor.
    pub fn sym_part(&self) -> WeightedTensor<F> {
        assert_eq!(self.rank(), 2);
        let half = F::of(0.5);
        WeightedTensor::from_fn(&self.metric, &self.variance, self.weight, |idx| {
            (self.get(idx) + self.get(&[idx[1], idx[0]])) * half
        })
    }

    /// Skew-symmetric part of a rank-2 tensor.
    pub fn skew_part(&self) -> WeightedTensor<F> {
        assert_eq!(self.rank(), 2);
        let half = F::of(0.5);
        WeightedTensor::from_fn(&self.metric, &self.variance, self.weight, |idx| {
            (self.get(idx) - self.get(&[idx[1], idx[0]])) * half
        })
    }

    /// Trace-free part of a covariant bilinear form.
    pub fn trace_free_part(&self) -> Result<WeightedTensor<F>> {
        assert_eq!(self.variance, [Variance::Co, Variance::Co]);
        let tr = self.trace_c(0, 1)?.coeffs[0];
        let n = F::of(self.metric.n as f64);
        let mut out = self.clone();
        for i in 0..self.metric.n {
            for j in 0..self.metric.n {
                let pos = i * self.metric.n + j;
                out.coeffs[pos] = out.coeffs[pos] - tr / n * self.metric.g(i, j);
            }
        }
        Ok(out)
    }
}

/// Skew endomorphism `θ∧X`: `(θ∧X)(Y) = θ(Y)X − c(X,Y)θ^♯`.
/// Slots `[Contra, Co]`, weight 0.
pub fn wedge_vf<F: Real>(
    metric: &Arc<PointMetric<F>>,
    theta: &[F],
    x: &[F],
) -> WeightedTensor<F> {
    let sharp = metric.sharp(theta);
    let flat = metric.flat(x);
    WeightedTensor::from_fn(
        metric,
        &[Variance::Contra, Variance::Co],
        Rational64::from_integer(0),
        |idx| theta[idx[1]] * x[idx[0]] - flat[idx[1]] * sharp[idx[0]],
    )
}

/// Conformal-algebra endomorphism `θ̃_X = θ∧X + θ(X)·id`.
pub fn tilde_theta<F: Real>(
    metric: &Arc<PointMetric<F>>,
    theta: &[F],
    x: &[F],
) -> WeightedTensor<F> {
    let mut e = wedge_vf(metric, theta, x);
    let tx: F = theta.iter().zip(x).map(|(&t, &v)| t * v).sum();
    for i in 0..metric.n {
        e.add_at(&[i, i], tx);
    }
    e
}

/// Natural action of an endomorphism `[Contra, Co]` on each slot of a
/// tensor (derivation action of `gl(n)`): `+E` on contravariant slots,
/// `−Eᵀ` on covariant slots.
pub fn endo_action<F: Real>(
    endo: &WeightedTensor<F>,
    t: &WeightedTensor<F>,
) -> WeightedTensor<F> {
    assert_eq!(endo.variance(), [Variance::Contra, Variance::Co]);
    let n = t.dim();
    let mut out = WeightedTensor::zeros(t.metric(), t.variance(), t.weight());
    let mut scratch = vec![0usize; t.rank()];
    let rank = t.rank();
    for_each_index(rank, n, |idx| {
        let mut acc = F::zero();
        for slot in 0..rank {
            scratch.copy_from_slice(idx);
            for k in 0..n {
                scratch[slot] = k;
                let v = t.get(&scratch);
                acc = acc
                    + match t.variance()[slot] {
                        Variance::Contra => endo.get(&[idx[slot], k]) * v,
                        Variance::Co => -endo.get(&[k, idx[slot]]) * v,
                    };
            }
        }
        out.set(idx, acc);
    });
    out
}

/// Action of a Weyl-structure change on a weighted tensor value:
/// `θ̃_X ξ = (θ∧X)ξ + w·θ(X)·ξ` with `w` the tensor's total weight.
pub fn theta_tilde_action<F: Real>(
    theta: &[F],
    x: &[F],
    t: &WeightedTensor<F>,
) -> WeightedTensor<F> {
    let wedge = wedge_vf(t.metric(), theta, x);
    let tx: F = theta.iter().zip(x).map(|(&a, &b)| a * b).sum();
    let w = F::of_rational(t.weight());
    endo_action(&wedge, t).add(&t.scale(w * tx))
}

/// Suspension of a bilinear form:
/// `(A∧id)_{X,Y} = A(Y,·)∧X − A(X,·)∧Y`.
/// Output slots `[Co, Co, Contra, Co]` (2-form pair, then the
/// endomorphism acting as `Z ↦ (A∧id)_{X,Y}Z`), same weight as `A`.
pub fn suspension<F: Real>(a: &WeightedTensor<F>) -> Result<WeightedTensor<F>> {
    if a.variance() != [Variance::Co, Variance::Co] {
        return Err(Error::Dimension(
            "suspension takes a covariant bilinear form".into(),
        ));
    }
    let metric = Arc::clone(a.metric());
    let n = metric.n;
    // a_sharp[j][k] = g^{ka} A_{ja}: the vector A(∂_j,·)^♯.
    let mut a_sharp = vec![F::zero(); n * n];
    for j in 0..n {
        for k in 0..n {
            let mut acc = F::zero();
            for l in 0..n {
                acc = acc + metric.ginv(k, l) * a.get(&[j, l]);
            }
            a_sharp[j * n + k] = acc;
        }
    }
    Ok(WeightedTensor::from_fn(
        &metric,
        &[Variance::Co, Variance::Co, Variance::Contra, Variance::Co],
        a.weight(),
        |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            let mut acc = F::zero();
            // (A(Y,·)∧X)(Z) = A(Y,Z)X − c(X,Z)A(Y,·)^♯ with X=∂_i, Y=∂_j.
            if k == i {
                acc = acc + a.get(&[j, l]);
            }
            acc = acc - metric.g(i, l) * a_sharp[j * n + k];
            // −(A(X,·)∧Y)(Z)
            if k == j {
                acc = acc - a.get(&[i, l]);
            }
            acc = acc + metric.g(j, l) * a_sharp[i * n + k];
            acc
        },
    ))
}

/// Tensor product `F ⊗ id` of a 2-form with the identity endomorphism,
/// in curvature slot layout.
pub fn two_form_times_id<F: Real>(f2: &WeightedTensor<F>) -> Result<WeightedTensor<F>> {
    if f2.variance() != [Variance::Co, Variance::Co] {
        return Err(Error::Dimension("expected a covariant 2-form".into()));
    }
    Ok(WeightedTensor::from_fn(
        f2.metric(),
        &[Variance::Co, Variance::Co, Variance::Contra, Variance::Co],
        f2.weight(),
        |idx| {
            if idx[2] == idx[3] {
                f2.get(&[idx[0], idx[1]])
            } else {
                F::zero()
            }
        },
    ))
}

fn check_curvature_shape<F: Real>(r: &WeightedTensor<F>) -> Result<()> {
    if r.variance()
        != [Variance::Co, Variance::Co, Variance::Contra, Variance::Co]
    {
        return Err(Error::Dimension(
            "expected curvature slots [Co, Co, Contra, Co]".into(),
        ));
    }
    Ok(())
}

/// Ricci contraction `ric(R)(X,Y) = tr(R_{·,X}Y)`; preserves the
/// weight tag.
pub fn ricci_contraction<F: Real>(r: &WeightedTensor<F>) -> Result<WeightedTensor<F>> {
    check_curvature_shape(r)?;
    let n = r.dim();
    Ok(WeightedTensor::from_fn(
        r.metric(),
        &[Variance::Co, Variance::Co],
        r.weight(),
        |idx| {
            let mut acc = F::zero();
            for a in 0..n {
                acc = acc + r.get(&[a, idx[0], a, idx[1]]);
            }
            acc
        },
    ))
}

/// Right inverse of `ric ∘ suspension`:
/// `h(A) = A₀ˢ/(n−2) + tr_c A·c/(2n(n−1)) + A^skew/(n−2)`.
///
/// The skew coefficient is forced by
/// `ric(A∧id) = (n−2)A + tr_c A·c`, which holds for skew `A` as well;
/// the curvature decomposition handles the Faraday part separately
/// (its skew Schouten contribution is `−F/2` with the `F⊗id` term
/// carrying the remainder), so no `−1/2` appears here.
pub fn h_map<F: Real>(a: &WeightedTensor<F>) -> Result<WeightedTensor<F>> {
    let n = a.dim();
    if n < 3 {
        return Err(Error::Dimension(format!(
            "the Schouten-type inverse needs dimension >= 3, got {n}"
        )));
    }
    if a.variance() != [Variance::Co, Variance::Co] {
        return Err(Error::Dimension("expected a covariant bilinear form".into()));
    }
    let sym0 = a.sym_part().trace_free_part()?;
    let skew = a.skew_part();
    let tr = a.trace_c(0, 1)?.coeffs()[0];
    let nf = F::of(n as f64);
    let c = WeightedTensor::gauge_c(a.metric()).with_weight(a.weight());
    let out = sym0
        .add(&skew)
        .scale(F::one() / F::of((n - 2) as f64))
        .add(&c.scale(tr / (F::of(2.0) * nf * (nf - F::one()))));
    Ok(out)
}

/// Max residual of the first Bianchi identity
/// `R_{X,Y}Z + R_{Y,Z}X + R_{Z,X}Y = 0`.
pub fn bianchi_residual<F: Real>(r: &WeightedTensor<F>) -> Result<F> {
    check_curvature_shape(r)?;
    let n = r.dim();
    let mut worst = F::zero();
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                for k in 0..n {
                    let s = r.get(&[i, j, k, l])
                        + r.get(&[j, l, k, i])
                        + r.get(&[l, i, k, j]);
                    if s.abs() > worst {
                        worst = s.abs();
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Max residual of antisymmetry in the 2-form slots.
pub fn two_form_antisymmetry_residual<F: Real>(r: &WeightedTensor<F>) -> Result<F> {
    check_curvature_shape(r)?;
    let n = r.dim();
    let mut worst = F::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let s = r.get(&[i, j, k, l]) + r.get(&[j, i, k, l]);
                    if s.abs() > worst {
                        worst = s.abs();
                    }
                }
            }
        }
    }
    Ok(worst)
}
