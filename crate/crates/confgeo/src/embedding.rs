//! Immersed submanifolds of a conformal chart: induced structures,
//! fundamental form, normal-bundle curvature, mixed and relative
//! Schouten-Weyl tensors, induced Möbius and Laplace operators, and
//! geodesy classification.
//!
//! All frame data (tangent pushforwards, the deterministic orthonormal
//! normal frame, connection coefficients) is computed as jets over the
//! source chart, so frame derivatives are exact rather than
//! finite-difference estimates.

use std::fmt;
use std::sync::Arc;

use num_rational::Rational64;

use crate::conformal::{
    curvature_package, hessian_weighted, invert_jet_matrix, laplace_sigma_at,
    mobius_h0_at, ConformalChart, Density, LaplaceStructure, MobiusStructure,
    WeylStructure,
};
use crate::error::{Error, Result};
use crate::jets::{Expr, Jet, JetShape, ScalarField};
use crate::scalar::Real;
use crate::tensor::{PointMetric, Variance, WeightedTensor};

/// Squared-norm threshold below which a Gram-Schmidt candidate counts
/// as lying in the span of the accepted frame.
pub const SPAN_TOLERANCE: f64 = 1e-10;

/// Default sup-norm threshold for the geodesy classification.
pub const GEODESY_TOLERANCE: f64 = 1e-6;

/// An immersion of an `n`-dimensional source chart into an
/// `m`-dimensional conformal chart (`m > n`), given by the component
/// maps as scalar fields of the source coordinates.
#[derive(Debug, Clone)]
pub struct Immersion {
    n: usize,
    ambient: Arc<ConformalChart>,
    comps: Vec<ScalarField>,
    induced: Arc<ConformalChart>,
}

impl Immersion {
    pub fn new(
        n: usize,
        ambient: &Arc<ConformalChart>,
        comps: Vec<ScalarField>,
    ) -> Result<Immersion> {
        let m = ambient.dim();
        if n == 0 || n >= m {
            return Err(Error::Dimension(format!(
                "immersion needs 0 < source dimension < ambient dimension, \
                 got {n} and {m}"
            )));
        }
        if comps.len() != m {
            return Err(Error::Dimension(format!(
                "immersion needs {m} component maps, got {}",
                comps.len()
            )));
        }
        for c in &comps {
            if c.dim() != n {
                return Err(Error::Dimension(format!(
                    "component map lives on a {}-dimensional chart, expected {n}",
                    c.dim()
                )));
            }
        }
        let induced = induced_chart(n, ambient, &comps)?;
        Ok(Immersion {
            n,
            ambient: Arc::clone(ambient),
            comps,
            induced,
        })
    }

    pub fn parse(
        n: usize,
        ambient: &Arc<ConformalChart>,
        sources: &[&str],
    ) -> Result<Immersion> {
        let comps = sources
            .iter()
            .map(|s| ScalarField::parse(s, n))
            .collect::<Result<Vec<_>>>()?;
        Immersion::new(n, ambient, comps)
    }

    pub fn dim_source(&self) -> usize {
        self.n
    }

    pub fn dim_ambient(&self) -> usize {
        self.ambient.dim()
    }

    pub fn codim(&self) -> usize {
        self.ambient.dim() - self.n
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn ambient_chart(&self) -> &Arc<ConformalChart> {
        &self.ambient
    }

    /// The source chart with the pullback gauge metric.
    pub fn induced_chart(&self) -> &Arc<ConformalChart> {
        &self.induced
    }

    pub fn map_point<F: Real>(&self, p: &[F]) -> Result<Vec<F>> {
        self.comps.iter().map(|c| c.eval(p)).collect()
    }

    /// Compose an ambient scalar field with the immersion.
    pub fn pullback(&self, field: &ScalarField) -> Result<ScalarField> {
        let repl: Vec<Expr> = self.comps.iter().map(|c| c.expr().clone()).collect();
        ScalarField::new(field.expr().substitute(&repl), self.n)
    }

    /// Pullback of an ambient 1-form:
    /// `(φ*θ)_a = θ_i∘φ · ∂_a φ^i`.
    pub fn pullback_one_form(&self, theta: &[ScalarField]) -> Result<Vec<ScalarField>> {
        let m = self.ambient.dim();
        if theta.len() != m {
            return Err(Error::Dimension(format!(
                "1-form needs {m} components, got {}",
                theta.len()
            )));
        }
        let mut out = Vec::with_capacity(self.n);
        for a in 0..self.n {
            let mut acc = Expr::constant(0.0);
            for i in 0..m {
                let pulled = self.pullback(&theta[i])?;
                acc = Expr::add(
                    acc,
                    Expr::mul(
                        pulled.expr().clone(),
                        self.comps[i].derivative(a).expr().clone(),
                    ),
                );
            }
            out.push(ScalarField::new(acc, self.n)?);
        }
        Ok(out)
    }

    /// The induced Weyl structure on the source: pullback chart with
    /// the pullback 1-form (the tangential projection of the ambient
    /// Weyl connection).
    pub fn induced_weyl(&self, w: &WeylStructure) -> Result<WeylStructure> {
        if !Arc::ptr_eq(w.chart(), &self.ambient) {
            return Err(Error::Dimension(
                "Weyl structure lives on a different chart than the immersion target"
                    .into(),
            ));
        }
        let theta_n = self.pullback_one_form(w.theta())?;
        WeylStructure::new(&self.induced, theta_n)
    }
}

/// Pullback gauge metric, built symmetrically so the chart's symbolic
/// symmetry check passes.
fn induced_chart(
    n: usize,
    ambient: &Arc<ConformalChart>,
    comps: &[ScalarField],
) -> Result<Arc<ConformalChart>> {
    let m = ambient.dim();
    let repl: Vec<Expr> = comps.iter().map(|c| c.expr().clone()).collect();
    let dphi: Vec<Expr> = (0..m)
        .flat_map(|i| (0..n).map(move |a| (i, a)))
        .map(|(i, a)| comps[i].derivative(a).expr().clone())
        .collect();
    let mut entries = vec![Expr::constant(0.0); n * n];
    for a in 0..n {
        for b in a..n {
            let mut acc = Expr::constant(0.0);
            for i in 0..m {
                for j in 0..m {
                    let gij = ambient.metric_field(i, j).expr().substitute(&repl);
                    acc = Expr::add(
                        acc,
                        Expr::mul(
                            gij,
                            Expr::mul(dphi[i * n + a].clone(), dphi[j * n + b].clone()),
                        ),
                    );
                }
            }
            entries[a * n + b] = acc.clone();
            entries[b * n + a] = acc;
        }
    }
    let fields = entries
        .into_iter()
        .map(|e| ScalarField::new(e, n))
        .collect::<Result<Vec<_>>>()?;
    ConformalChart::new(n, fields)
}

/// Low-dimension structures the Schouten-type tensors may need: a
/// Möbius structure on the ambient chart when `m = 2`, and a Möbius or
/// Laplace structure on the induced chart when `n = 2` or `n = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmbeddingStructures<'a> {
    pub ambient_mobius: Option<&'a MobiusStructure>,
    pub source_mobius: Option<&'a MobiusStructure>,
    pub source_laplace: Option<&'a LaplaceStructure>,
}

impl<'a> EmbeddingStructures<'a> {
    pub fn none() -> EmbeddingStructures<'a> {
        EmbeddingStructures::default()
    }

    pub fn with_source_mobius(mob: &'a MobiusStructure) -> EmbeddingStructures<'a> {
        EmbeddingStructures {
            source_mobius: Some(mob),
            ..EmbeddingStructures::default()
        }
    }

    pub fn with_source_laplace(lap: &'a LaplaceStructure) -> EmbeddingStructures<'a> {
        EmbeddingStructures {
            source_laplace: Some(lap),
            ..EmbeddingStructures::default()
        }
    }
}

/// Frame data of an immersion at one source point, as jets over the
/// source chart. Normal-frame components are indexed `α·m + i`
/// (ambient coordinates of `ξ_α`); `B`-family components use the
/// layout `(a·n + b)·r + α`.
pub struct FramePoint<F: Real> {
    n: usize,
    m: usize,
    r: usize,
    point: Vec<F>,
    ambient_point: Vec<F>,
    /// Pulled ambient metric `g_ij ∘ φ`, `m × m`.
    g_amb: Vec<Jet<F>>,
    /// Tangent pushforwards `∂_a φ^i` at `i·n + a`.
    dphi: Vec<Jet<F>>,
    /// Pullback 1-form `θ^N_a` of the ambient Weyl structure.
    theta_n: Vec<Jet<F>>,
    /// Orthonormal normal frame, ambient components at `α·m + i`.
    xi: Vec<Jet<F>>,
    /// Induced metric `g^N_ab` and its inverse.
    gn: Vec<Jet<F>>,
    gninv: Vec<Jet<F>>,
    /// Induced Weyl connection symbols `Γ^{N,d}_{ab}` at `(d·n+a)·n+b`.
    gamma_n: Vec<Jet<F>>,
    /// Full fundamental form `B_abα = g(B(∂_a,∂_b), ξ_α)`.
    b: Vec<Jet<F>>,
    /// Mean-curvature covector `H_α = H(ξ_α)`.
    h: Vec<Jet<F>>,
    /// Trace-free part `B₀ = B − H·g^N`.
    b0: Vec<Jet<F>>,
    /// Normal-connection coefficients
    /// `ω_{aβα} = g(∇_{∂_a} ξ_α, ξ_β)` at `(a·r+β)·r+α`.
    omega: Vec<Jet<F>>,
    metric_n: Arc<PointMetric<F>>,
}

fn jet_inner<F: Real>(m: usize, g: &[Jet<F>], u: &[Jet<F>], v: &[Jet<F>]) -> Jet<F> {
    let mut acc = Jet::zero(u[0].shape());
    for i in 0..m {
        for j in 0..m {
            acc = &acc + &(&(&g[i * m + j] * &u[i]) * &v[j]);
        }
    }
    acc
}

impl<F: Real> FramePoint<F> {
    pub fn dim_source(&self) -> usize {
        self.n
    }

    pub fn dim_ambient(&self) -> usize {
        self.m
    }

    pub fn codim(&self) -> usize {
        self.r
    }

    pub fn point(&self) -> &[F] {
        &self.point
    }

    pub fn ambient_point(&self) -> &[F] {
        &self.ambient_point
    }

    /// Induced metric value at the point.
    pub fn metric_n(&self) -> &Arc<PointMetric<F>> {
        &self.metric_n
    }

    /// Ambient components of the normal frame vector `ξ_α`.
    pub fn normal_vector(&self, alpha: usize) -> Vec<F> {
        (0..self.m)
            .map(|i| self.xi[alpha * self.m + i].value())
            .collect()
    }

    /// Tangent pushforward values `∂_a φ^i` at `i·n + a`.
    pub fn differential(&self) -> Vec<F> {
        self.dphi.iter().map(|j| j.value()).collect()
    }
}

/// Evaluate the frame data at a source point with jets of the given
/// order over the source chart.
pub fn frame_at<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    p: &[F],
    order: usize,
) -> Result<FramePoint<F>> {
    if !Arc::ptr_eq(w.chart(), &imm.ambient) {
        return Err(Error::Dimension(
            "Weyl structure lives on a different chart than the immersion target".into(),
        ));
    }
    let n = imm.n;
    let m = imm.ambient.dim();
    let r = m - n;
    if p.len() != n {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, source chart has {n}",
            p.len()
        )));
    }
    let shape = JetShape::get(n, order);
    let repl: Vec<Expr> = imm.comps.iter().map(|c| c.expr().clone()).collect();
    let pull = |f: &ScalarField| -> Result<Jet<F>> {
        ScalarField::new(f.expr().substitute(&repl), n)?.jet(p, order)
    };

    let ambient_point: Vec<F> = imm.map_point(p)?;

    // Immersion jets: first and second coordinate derivatives.
    let mut dphi = Vec::with_capacity(m * n);
    let mut d2phi = Vec::with_capacity(m * n * n);
    for i in 0..m {
        let c = &imm.comps[i];
        for a in 0..n {
            dphi.push(c.derivative(a).jet(p, order)?);
        }
        for a in 0..n {
            for b in 0..n {
                d2phi.push(c.derivative(a).derivative(b).jet(p, order)?);
            }
        }
    }
    // dphi layout is i·n + a; d2phi layout is (i·n + a)·n + b.

    // Pulled ambient metric, its inverse, its coordinate derivatives,
    // and the pulled Weyl 1-form.
    let mut g_amb = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            g_amb.push(pull(imm.ambient.metric_field(i, j))?);
        }
    }
    let ginv_amb = invert_jet_matrix(m, &g_amb)?;
    let mut dg = Vec::with_capacity(m * m * m); // ∂_k g_ij ∘ φ at (k·m+i)·m+j
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                dg.push(pull(&imm.ambient.metric_field(i, j).derivative(k))?);
            }
        }
    }
    let mut theta_amb = Vec::with_capacity(m);
    for t in w.theta() {
        theta_amb.push(pull(t)?);
    }

    // Ambient Weyl Christoffels composed with φ:
    // Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    //          + δ^k_i θ_j + δ^k_j θ_i − g_ij g^{kl} θ_l.
    let half = F::of(0.5);
    let mut theta_sharp = Vec::with_capacity(m);
    for k in 0..m {
        let mut acc = Jet::zero(&shape);
        for l in 0..m {
            acc = &acc + &(&ginv_amb[k * m + l] * &theta_amb[l]);
        }
        theta_sharp.push(acc);
    }
    let mut gamma = Vec::with_capacity(m * m * m); // (k·m+i)·m+j
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let mut acc = Jet::zero(&shape);
                for l in 0..m {
                    let low = &(&dg[(i * m + j) * m + l] + &dg[(j * m + i) * m + l])
                        - &dg[(l * m + i) * m + j];
                    acc = &acc + &(&ginv_amb[k * m + l] * &low);
                }
                let mut sym = acc.scale(half);
                sym = &sym - &(&g_amb[i * m + j] * &theta_sharp[k]);
                if k == i {
                    sym = &sym + &theta_amb[j];
                }
                if k == j {
                    sym = &sym + &theta_amb[i];
                }
                gamma.push(sym);
            }
        }
    }

    // Deterministic orthonormal frame: the tangent pushforwards first
    // (rank failures are errors), then the ambient coordinate basis in
    // order, skipping candidates within the span tolerance.
    let mut frame: Vec<Vec<Jet<F>>> = Vec::with_capacity(m);
    let accept = |frame: &mut Vec<Vec<Jet<F>>>, v: Vec<Jet<F>>| -> Result<bool> {
        let mut u = v;
        for e in frame.iter() {
            let coeff = jet_inner(m, &g_amb, &u, e);
            for i in 0..m {
                u[i] = &u[i] - &(&coeff * &e[i]);
            }
        }
        let nn = jet_inner(m, &g_amb, &u, &u);
        if nn.value() <= F::of(SPAN_TOLERANCE) {
            return Ok(false);
        }
        let inv_norm = nn.sqrt()?.recip()?;
        for i in 0..m {
            u[i] = &u[i] * &inv_norm;
        }
        frame.push(u);
        Ok(true)
    };
    for a in 0..n {
        let t: Vec<Jet<F>> = (0..m).map(|i| dphi[i * n + a].clone()).collect();
        if !accept(&mut frame, t)? {
            return Err(Error::RankDeficient(format!(
                "differential drops rank at the sampled point (direction {})",
                a + 1
            )));
        }
    }
    for i in 0..m {
        if frame.len() == m {
            break;
        }
        let e: Vec<Jet<F>> = (0..m)
            .map(|k| {
                if k == i {
                    Jet::constant(&shape, F::one())
                } else {
                    Jet::zero(&shape)
                }
            })
            .collect();
        accept(&mut frame, e)?;
    }
    if frame.len() != m {
        return Err(Error::Numerical(
            "could not complete the normal frame from the coordinate basis".into(),
        ));
    }
    let mut xi = Vec::with_capacity(r * m);
    for vec in frame.drain(..).skip(n) {
        xi.extend(vec);
    }

    // Induced metric and inverse.
    let mut gn = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let ta: Vec<Jet<F>> = (0..m).map(|i| dphi[i * n + a].clone()).collect();
            let tb: Vec<Jet<F>> = (0..m).map(|i| dphi[i * n + b].clone()).collect();
            gn.push(jet_inner(m, &g_amb, &ta, &tb));
        }
    }
    let gninv = invert_jet_matrix(n, &gn)?;
    let gn_values: Vec<F> = gn.iter().map(|j| j.value()).collect();
    let metric_n = PointMetric::new(n, &gn_values)?;

    // Second-derivative vectors
    // D_ab^k = ∂_a∂_b φ^k + Γ^k_ij ∂_aφ^i ∂_bφ^j,
    // whose normal part is B(∂_a,∂_b) and tangential part gives Γ^N.
    let mut dcov: Vec<Vec<Jet<F>>> = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let mut vec = Vec::with_capacity(m);
            for k in 0..m {
                let mut acc = d2phi[(k * n + a) * n + b].clone();
                for i in 0..m {
                    for j in 0..m {
                        acc = &acc
                            + &(&(&gamma[(k * m + i) * m + j] * &dphi[i * n + a])
                                * &dphi[j * n + b]);
                    }
                }
                vec.push(acc);
            }
            dcov.push(vec);
        }
    }

    // Fundamental form in the normal frame, mean curvature, trace-free
    // part, and the induced connection symbols.
    let mut b = Vec::with_capacity(n * n * r);
    for a in 0..n {
        for c in 0..n {
            for alpha in 0..r {
                let xi_a: Vec<Jet<F>> =
                    (0..m).map(|i| xi[alpha * m + i].clone()).collect();
                b.push(jet_inner(m, &g_amb, &dcov[a * n + c], &xi_a));
            }
        }
    }
    let inv_n = F::one() / F::of(n as f64);
    let mut h = Vec::with_capacity(r);
    for alpha in 0..r {
        let mut acc = Jet::zero(&shape);
        for a in 0..n {
            for c in 0..n {
                acc = &acc + &(&gninv[a * n + c] * &b[(a * n + c) * r + alpha]);
            }
        }
        h.push(acc.scale(inv_n));
    }
    let mut b0 = Vec::with_capacity(n * n * r);
    for a in 0..n {
        for c in 0..n {
            for alpha in 0..r {
                b0.push(&b[(a * n + c) * r + alpha] - &(&h[alpha] * &gn[a * n + c]));
            }
        }
    }
    let mut gamma_n = Vec::with_capacity(n * n * n); // (d·n+a)·n+b
    for d in 0..n {
        for a in 0..n {
            for c in 0..n {
                let mut acc = Jet::zero(&shape);
                for e in 0..n {
                    let te: Vec<Jet<F>> =
                        (0..m).map(|i| dphi[i * n + e].clone()).collect();
                    let pairing = jet_inner(m, &g_amb, &dcov[a * n + c], &te);
                    acc = &acc + &(&gninv[d * n + e] * &pairing);
                }
                gamma_n.push(acc);
            }
        }
    }

    // Normal-connection coefficients ω_{aβα} = g(∇_{∂_a} ξ_α, ξ_β)
    // with ∇_{∂_a} ξ_α = ∂_a ξ_α + Γ(∂_aφ, ξ_α).
    let mut omega = Vec::with_capacity(n * r * r);
    for a in 0..n {
        let mut nabla_xi: Vec<Vec<Jet<F>>> = Vec::with_capacity(r);
        for alpha in 0..r {
            let mut vec = Vec::with_capacity(m);
            for k in 0..m {
                let mut acc = xi[alpha * m + k].derivative(a);
                for i in 0..m {
                    for j in 0..m {
                        acc = &acc
                            + &(&(&gamma[(k * m + i) * m + j] * &dphi[i * n + a])
                                * &xi[alpha * m + j]);
                    }
                }
                vec.push(acc);
            }
            nabla_xi.push(vec);
        }
        for beta in 0..r {
            for alpha in 0..r {
                let xi_b: Vec<Jet<F>> =
                    (0..m).map(|i| xi[beta * m + i].clone()).collect();
                omega.push(jet_inner(m, &g_amb, &nabla_xi[alpha], &xi_b));
            }
        }
    }

    let mut theta_n = Vec::with_capacity(n);
    for a in 0..n {
        let mut acc = Jet::zero(&shape);
        for i in 0..m {
            acc = &acc + &(&theta_amb[i] * &dphi[i * n + a]);
        }
        theta_n.push(acc);
    }

    Ok(FramePoint {
        n,
        m,
        r,
        point: p.to_vec(),
        ambient_point,
        g_amb,
        dphi,
        theta_n,
        xi,
        gn,
        gninv,
        gamma_n,
        b,
        h,
        b0,
        omega,
        metric_n,
    })
}

fn sup<F: Real>(values: &[F]) -> F {
    values
        .iter()
        .fold(F::zero(), |acc, z| if z.abs() > acc { z.abs() } else { acc })
}

/// Fundamental-form data at a point, in the deterministic orthonormal
/// normal frame: `B = H·c + B₀` with `B₀` trace-free.
#[derive(Debug, Clone)]
pub struct FundamentalForm<F> {
    pub n: usize,
    pub r: usize,
    /// `B(∂_a,∂_b)` frame components at `(a·n+b)·r+α`.
    pub b: Vec<F>,
    /// Mean-curvature covector components `H(ξ_α)`.
    pub h: Vec<F>,
    /// Trace-free part, same layout as `b`.
    pub b0: Vec<F>,
}

impl<F: Real> FundamentalForm<F> {
    pub fn b_at(&self, a: usize, c: usize, alpha: usize) -> F {
        self.b[(a * self.n + c) * self.r + alpha]
    }

    pub fn b0_at(&self, a: usize, c: usize, alpha: usize) -> F {
        self.b0[(a * self.n + c) * self.r + alpha]
    }

    pub fn b0_sup_norm(&self) -> F {
        sup(&self.b0)
    }

    pub fn h_sup_norm(&self) -> F {
        sup(&self.h)
    }

    /// Gauge norm squared `c(H, H)` of the mean curvature.
    pub fn h_norm_squared(&self) -> F {
        self.h.iter().map(|&z| z * z).sum()
    }
}

/// Evaluate `(B, H, B₀)` of the immersion under the ambient Weyl
/// structure at a source point.
pub fn fundamental_form<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    p: &[F],
) -> Result<FundamentalForm<F>> {
    let fr = frame_at(imm, w, p, 1)?;
    Ok(FundamentalForm {
        n: fr.n,
        r: fr.r,
        b: fr.b.iter().map(|j| j.value()).collect(),
        h: fr.h.iter().map(|j| j.value()).collect(),
        b0: fr.b0.iter().map(|j| j.value()).collect(),
    })
}

/// Extend a source 1-form value to the ambient covector of the adapted
/// Weyl structure at `φ(p)`: the tangential lift of `θ^N` plus the
/// mean-curvature covector of the base structure, so the offset
/// structure has `H = 0` at the point.
pub fn extend_adapted<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    theta_source: &[F],
    p: &[F],
) -> Result<Vec<F>> {
    let fr = frame_at(imm, w, p, 1)?;
    let (n, m, r) = (fr.n, fr.m, fr.r);
    if theta_source.len() != n {
        return Err(Error::Dimension(format!(
            "source 1-form needs {n} components, got {}",
            theta_source.len()
        )));
    }
    let g: Vec<F> = fr.g_amb.iter().map(|j| j.value()).collect();
    let dphi: Vec<F> = fr.dphi.iter().map(|j| j.value()).collect();
    let gninv: Vec<F> = fr.gninv.iter().map(|j| j.value()).collect();
    let mut out = vec![F::zero(); m];
    // Tangential lift: θ_i = θ^N_a g^{N,ab} g_ij ∂_bφ^j vanishes on the
    // normal space and pulls back to θ^N.
    for i in 0..m {
        for a in 0..n {
            for b in 0..n {
                for j in 0..m {
                    out[i] = out[i]
                        + theta_source[a] * gninv[a * n + b] * g[i * m + j]
                            * dphi[j * n + b];
                }
            }
        }
    }
    // Normal part: the mean curvature covector H_α ξ_α♭.
    for alpha in 0..r {
        let h_val = fr.h[alpha].value();
        for i in 0..m {
            let mut flat = F::zero();
            for j in 0..m {
                flat = flat + g[i * m + j] * fr.xi[alpha * m + j].value();
            }
            out[i] = out[i] + h_val * flat;
        }
    }
    Ok(out)
}

/// Curvature of the weightless normal connection, in the deterministic
/// normal frame: `κ_{ab}` is skew in the endomorphism slots `(β, α)`.
#[derive(Debug, Clone)]
pub struct NormalCurvature<F> {
    pub n: usize,
    pub r: usize,
    /// Components at `((a·n+b)·r+β)·r+α`.
    pub kappa: Vec<F>,
}

impl<F: Real> NormalCurvature<F> {
    pub fn at(&self, a: usize, b: usize, beta: usize, alpha: usize) -> F {
        self.kappa[((a * self.n + b) * self.r + beta) * self.r + alpha]
    }

    pub fn sup_norm(&self) -> F {
        sup(&self.kappa)
    }

    /// Residual of skewness in the endomorphism slots.
    pub fn skew_residual(&self) -> F {
        let mut worst = F::zero();
        for a in 0..self.n {
            for b in 0..self.n {
                for beta in 0..self.r {
                    for alpha in 0..self.r {
                        let s = self.at(a, b, beta, alpha) + self.at(a, b, alpha, beta);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Curvature of the weightless normal connection
/// `∇^{⊥,0} = ∇^⊥ − θ(X)·id`, which is independent of the ambient Weyl
/// structure.
pub fn normal_curvature_kappa<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    p: &[F],
) -> Result<NormalCurvature<F>> {
    let fr = frame_at(imm, w, p, 2)?;
    let (n, r) = (fr.n, fr.r);
    // Weightless coefficients ω⁰_{aβα} = ω_{aβα} − θ^N_a δ_{βα}.
    let om0 = |a: usize, beta: usize, alpha: usize| -> Jet<F> {
        let w_jet = fr.omega[(a * r + beta) * r + alpha].clone();
        if beta == alpha {
            &w_jet - &fr.theta_n[a]
        } else {
            w_jet
        }
    };
    let mut kappa = Vec::with_capacity(n * n * r * r);
    for a in 0..n {
        for b in 0..n {
            for beta in 0..r {
                for alpha in 0..r {
                    let mut val =
                        om0(b, beta, alpha).d(a) - om0(a, beta, alpha).d(b);
                    for gamma in 0..r {
                        val = val
                            + om0(a, beta, gamma).value() * om0(b, gamma, alpha).value()
                            - om0(b, beta, gamma).value() * om0(a, gamma, alpha).value();
                    }
                    kappa.push(val);
                }
            }
        }
    }
    Ok(NormalCurvature { n, r, kappa })
}

/// The full ambient Schouten-type tensor `h^∇` at an ambient point:
/// from the curvature for `m ≥ 3`, from the attached Möbius structure
/// (plus trace and Faraday parts) for `m = 2`.
fn ambient_schouten_full<F: Real>(
    w: &WeylStructure,
    structures: EmbeddingStructures<'_>,
    q: &[F],
) -> Result<WeightedTensor<F>> {
    let m = w.chart().dim();
    match m {
        0 | 1 => Err(Error::Dimension(
            "ambient Schouten tensor needs ambient dimension >= 2".into(),
        )),
        2 => {
            let mob = structures.ambient_mobius.ok_or_else(|| {
                Error::MissingStructure(
                    "a Möbius structure on the ambient surface is required".into(),
                )
            })?;
            let h0 = mobius_h0_at(mob, w, q)?;
            let pkg = curvature_package(w, q)?;
            let c = WeightedTensor::gauge_c(&pkg.metric)
                .with_weight(Rational64::from_integer(-2));
            Ok(h0
                .add(&c.scale(pkg.sigma * F::of(0.5)))
                .sub(&pkg.faraday.scale(F::of(0.5))))
        }
        _ => Ok(curvature_package(w, q)?
            .schouten
            .expect("m >= 3 has a Schouten tensor")),
    }
}

/// The full Schouten-type tensor `h^{N,∇}` of the induced Weyl
/// structure at a source point.
fn induced_schouten_full<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    structures: EmbeddingStructures<'_>,
    p: &[F],
) -> Result<WeightedTensor<F>> {
    let wn = imm.induced_weyl(w)?;
    match imm.n {
        1 => {
            let lap = structures.source_laplace.ok_or_else(|| {
                Error::MissingStructure(
                    "a Laplace structure on the source curve is required".into(),
                )
            })?;
            let sigma = laplace_sigma_at(lap, &wn, p)?;
            let g = imm.induced.metric_field(0, 0).eval(p)?;
            let metric = PointMetric::new(1, &[g])?;
            let c = WeightedTensor::gauge_c(&metric)
                .with_weight(Rational64::from_integer(-2));
            Ok(c.scale(sigma))
        }
        2 => {
            let mob = structures.source_mobius.ok_or_else(|| {
                Error::MissingStructure(
                    "a Möbius structure on the source surface is required".into(),
                )
            })?;
            let h0 = mobius_h0_at(mob, &wn, p)?;
            let pkg = curvature_package(&wn, p)?;
            let c = WeightedTensor::gauge_c(&pkg.metric)
                .with_weight(Rational64::from_integer(-2));
            Ok(h0
                .add(&c.scale(pkg.sigma * F::of(0.5)))
                .sub(&pkg.faraday.scale(F::of(0.5))))
        }
        _ => Ok(curvature_package(&wn, p)?
            .schouten
            .expect("n >= 3 has a Schouten tensor")),
    }
}

/// Conformal divergence values `(δ^∇B₀)(∂_b)(ξ_β)` at `b·r + β`.
fn delta_b0_values<F: Real>(fr: &FramePoint<F>) -> Vec<F> {
    let (n, r) = (fr.n, fr.r);
    // (∇_a B₀)_{bcβ} = ∂_a B₀_{bcβ} + ω_{aβα} B₀_{bcα}
    //                  − Γ^{N,d}_{ab} B₀_{dcβ} − Γ^{N,d}_{ac} B₀_{bdβ}.
    let nabla_b0 = |a: usize, b: usize, c: usize, beta: usize| -> F {
        let mut val = fr.b0[(b * n + c) * r + beta].d(a);
        for alpha in 0..r {
            val = val
                + fr.omega[(a * r + beta) * r + alpha].value()
                    * fr.b0[(b * n + c) * r + alpha].value();
        }
        for d in 0..n {
            val = val
                - fr.gamma_n[(d * n + a) * n + b].value()
                    * fr.b0[(d * n + c) * r + beta].value()
                - fr.gamma_n[(d * n + a) * n + c].value()
                    * fr.b0[(b * n + d) * r + beta].value();
        }
        val
    };
    let mut out = Vec::with_capacity(n * r);
    for b in 0..n {
        for beta in 0..r {
            let mut acc = F::zero();
            for a in 0..n {
                for c in 0..n {
                    acc = acc + fr.gninv[a * n + c].value() * nabla_b0(a, b, c, beta);
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Conformal divergence `(δ^∇B₀)(∂_b)(ξ_β)` of the trace-free
/// fundamental form, values at `b·r + β`.
pub fn divergence_b0<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    p: &[F],
) -> Result<Vec<F>> {
    let fr = frame_at(imm, w, p, 2)?;
    Ok(delta_b0_values(&fr))
}

/// Mixed Schouten-Weyl tensor `μ : TN → ν*` in the normal frame.
#[derive(Debug, Clone)]
pub struct MixedSchouten<F> {
    pub n: usize,
    pub r: usize,
    /// Components `μ(∂_a)(ξ_β)` at `a·r + β`.
    pub mu: Vec<F>,
}

impl<F: Real> MixedSchouten<F> {
    pub fn at(&self, a: usize, beta: usize) -> F {
        self.mu[a * self.r + beta]
    }

    pub fn sup_norm(&self) -> F {
        sup(&self.mu)
    }
}

/// Mixed Schouten-Weyl tensor
/// `μ(X)(ξ) = h^M(X,ξ) − (∇_X H)(ξ) + (δ^∇B₀)(X)(ξ)/(n−1)`;
/// the divergence term is omitted for curves (`n = 1`). The result is
/// independent of the ambient Weyl structure.
pub fn mixed_schouten<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    structures: EmbeddingStructures<'_>,
    p: &[F],
) -> Result<MixedSchouten<F>> {
    let fr = frame_at(imm, w, p, 2)?;
    let (n, m, r) = (fr.n, fr.m, fr.r);
    let h_m = ambient_schouten_full(w, structures, &fr.ambient_point)?;
    let delta = if n >= 2 {
        delta_b0_values(&fr)
    } else {
        vec![F::zero(); r]
    };
    let inv = if n >= 2 {
        F::one() / F::of((n - 1) as f64)
    } else {
        F::zero()
    };
    let mut mu = Vec::with_capacity(n * r);
    for a in 0..n {
        for beta in 0..r {
            // h^M(∂_aφ, ξ_β).
            let mut hm = F::zero();
            for i in 0..m {
                for j in 0..m {
                    hm = hm
                        + h_m.get(&[i, j])
                            * fr.dphi[i * n + a].value()
                            * fr.xi[beta * m + j].value();
                }
            }
            // (∇_a H)_β = ∂_a H_β − H_α ω_{aαβ}.
            let mut nabla_h = fr.h[beta].d(a);
            for alpha in 0..r {
                nabla_h = nabla_h
                    - fr.h[alpha].value() * fr.omega[(a * r + alpha) * r + beta].value();
            }
            mu.push(hm - nabla_h + inv * delta[a * r + beta]);
        }
    }
    Ok(MixedSchouten { n, r, mu })
}

/// Relative Schouten-Weyl tensor
/// `ρ(X,Y) = (h^M − h^N)(X,Y) + ½c(H,H)c(X,Y) + H(B₀(X,Y))` as a
/// symmetric bilinear form over the induced metric. Independent of the
/// ambient Weyl structure (given fixed low-dimension structures).
pub fn relative_schouten<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    structures: EmbeddingStructures<'_>,
    p: &[F],
) -> Result<WeightedTensor<F>> {
    let fr = frame_at(imm, w, p, 1)?;
    let (n, m, r) = (fr.n, fr.m, fr.r);
    let h_m = ambient_schouten_full(w, structures, &fr.ambient_point)?;
    let h_n = induced_schouten_full(imm, w, structures, p)?;
    let hh: F = fr.h.iter().map(|j| j.value() * j.value()).sum();
    let half = F::of(0.5);
    Ok(WeightedTensor::from_fn(
        &fr.metric_n,
        &[Variance::Co, Variance::Co],
        Rational64::from_integer(-2),
        |idx| {
            let (a, b) = (idx[0], idx[1]);
            let mut hm = F::zero();
            for i in 0..m {
                for j in 0..m {
                    hm = hm
                        + h_m.get(&[i, j])
                            * fr.dphi[i * n + a].value()
                            * fr.dphi[j * n + b].value();
                }
            }
            let mut hb0 = F::zero();
            for alpha in 0..r {
                hb0 = hb0
                    + fr.h[alpha].value() * fr.b0[(a * n + b) * r + alpha].value();
            }
            hm - h_n.get(&[a, b]) + half * hh * fr.gn[a * n + b].value() + hb0
        },
    ))
}

/// Induced Möbius operator value on a weight-1 source density
/// (`m > n ≥ 2`): the trace-free intrinsic Hessian over the induced
/// Weyl structure plus the restricted ambient Schouten and
/// mean-curvature corrections. Independent of the ambient Weyl
/// structure.
pub fn induced_mobius<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    structures: EmbeddingStructures<'_>,
    l: &Density,
    p: &[F],
) -> Result<WeightedTensor<F>> {
    let n = imm.n;
    if n < 2 {
        return Err(Error::Dimension(format!(
            "the induced Möbius operator needs source dimension >= 2, got {n}"
        )));
    }
    let one = Rational64::from_integer(1);
    if l.weight != one {
        return Err(Error::WeightMismatch {
            expected: one,
            got: l.weight,
        });
    }
    let fr = frame_at(imm, w, p, 1)?;
    let (m, r) = (fr.m, fr.r);
    let wn = imm.induced_weyl(w)?;
    let hess0 = hessian_weighted(&wn, l, p)?.sym_part().trace_free_part()?;
    let h_m = ambient_schouten_full(w, structures, &fr.ambient_point)?;
    let hm_tn = WeightedTensor::from_fn(
        &fr.metric_n,
        &[Variance::Co, Variance::Co],
        Rational64::from_integer(-2),
        |idx| {
            let mut acc = F::zero();
            for i in 0..m {
                for j in 0..m {
                    acc = acc
                        + h_m.get(&[i, j])
                            * fr.dphi[i * n + idx[0]].value()
                            * fr.dphi[j * n + idx[1]].value();
                }
            }
            acc
        },
    );
    let hb0 = WeightedTensor::from_fn(
        &fr.metric_n,
        &[Variance::Co, Variance::Co],
        Rational64::from_integer(-2),
        |idx| {
            let mut acc = F::zero();
            for alpha in 0..r {
                acc = acc
                    + fr.h[alpha].value()
                        * fr.b0[(idx[0] * n + idx[1]) * r + alpha].value();
            }
            acc
        },
    );
    let lambda: F = l.field.eval(p)?;
    let correction = hm_tn.sym_part().trace_free_part()?.add(&hb0);
    // λ carries weight 1, so the weight-(−2) correction retags to −1.
    Ok(hess0.add(
        &correction
            .scale(lambda)
            .with_weight(Rational64::from_integer(-1)),
    ))
}

/// Induced Laplace operator value on a source density of weight
/// `1 − n/2` (`m > n ≥ 1`): the conformal trace of the intrinsic
/// Hessian plus the restricted ambient Schouten trace and
/// mean-curvature terms. Independent of the ambient Weyl structure.
pub fn induced_laplace<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    structures: EmbeddingStructures<'_>,
    l: &Density,
    p: &[F],
) -> Result<F> {
    let n = imm.n;
    let k = Rational64::new(2 - n as i64, 2);
    if l.weight != k {
        return Err(Error::WeightMismatch {
            expected: k,
            got: l.weight,
        });
    }
    let fr = frame_at(imm, w, p, 1)?;
    let m = fr.m;
    let wn = imm.induced_weyl(w)?;
    let hess = hessian_weighted(&wn, l, p)?;
    let tr_hess = hess.trace_c(0, 1)?.coeffs()[0];
    let h_m = ambient_schouten_full(w, structures, &fr.ambient_point)?;
    let mut tr_hm = F::zero();
    for a in 0..n {
        for b in 0..n {
            let mut hm_ab = F::zero();
            for i in 0..m {
                for j in 0..m {
                    hm_ab = hm_ab
                        + h_m.get(&[i, j])
                            * fr.dphi[i * n + a].value()
                            * fr.dphi[j * n + b].value();
                }
            }
            tr_hm = tr_hm + fr.gninv[a * n + b].value() * hm_ab;
        }
    }
    let hh: F = fr.h.iter().map(|j| j.value() * j.value()).sum();
    let lambda: F = l.field.eval(p)?;
    let kf = F::of_rational(k);
    Ok(tr_hess
        + kf * tr_hm * lambda
        + kf * F::of(n as f64) * F::of(0.5) * hh * lambda)
}

/// Geodesy class of an immersion, ordered by strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesyClass {
    StronglyGeodesic,
    WeaklyGeodesic,
    TotallyUmbilical,
    NotUmbilical,
}

impl fmt::Display for GeodesyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GeodesyClass::StronglyGeodesic => "strongly_geodesic",
            GeodesyClass::WeaklyGeodesic => "weakly_geodesic",
            GeodesyClass::TotallyUmbilical => "totally_umbilical",
            GeodesyClass::NotUmbilical => "none",
        };
        write!(f, "{s}")
    }
}

/// Classification result with the sup-norms that produced it.
#[derive(Debug, Clone)]
pub struct GeodesyReport<F> {
    pub class: GeodesyClass,
    pub b0_sup: F,
    pub mu_sup: F,
    pub rho_sup: F,
    pub tolerance: F,
}

/// Classify the geodesy of the immersion by thresholding the sup-norms
/// of `B₀`, `μ`, and `ρ` over a grid of source points:
/// totally umbilical means `B₀ ≡ 0`, weakly geodesic adds `μ ≡ 0`, and
/// strongly geodesic adds `ρ ≡ 0`.
pub fn classify_geodesy<F: Real>(
    imm: &Immersion,
    w: &WeylStructure,
    structures: EmbeddingStructures<'_>,
    grid: &[Vec<F>],
    tolerance: F,
) -> Result<GeodesyReport<F>> {
    if grid.is_empty() {
        return Err(Error::Dimension("classification grid is empty".into()));
    }
    let mut b0_sup = F::zero();
    let mut mu_sup = F::zero();
    let mut rho_sup = F::zero();
    for p in grid {
        let ff = fundamental_form(imm, w, p)?;
        b0_sup = b0_sup.max(ff.b0_sup_norm());
        let mu = mixed_schouten(imm, w, structures, p)?;
        mu_sup = mu_sup.max(mu.sup_norm());
        let rho = relative_schouten(imm, w, structures, p)?;
        rho_sup = rho_sup.max(rho.sup_norm());
    }
    let class = if b0_sup > tolerance {
        GeodesyClass::NotUmbilical
    } else if mu_sup > tolerance {
        GeodesyClass::TotallyUmbilical
    } else if rho_sup > tolerance {
        GeodesyClass::WeaklyGeodesic
    } else {
        GeodesyClass::StronglyGeodesic
    };
    Ok(GeodesyReport {
        class,
        b0_sup,
        mu_sup,
        rho_sup,
        tolerance,
    })
}

#[cfg(test)]
mod tests;
