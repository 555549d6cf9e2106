//! Truncated Taylor (jet) arithmetic in up to 8 variables, order <= 3.

use std::collections::HashMap;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest chart dimension supported (desk scale).
pub const MAX_DIM: usize = 8;
/// Largest derivative order supported; curvature needs 2, covariant
/// derivatives of Schouten-type tensors need 3.
pub const MAX_ORDER: usize = 3;

type MultiIndex = [u8; MAX_DIM];

/// Shared layout for all jets of a given (dimension, order) pair:
/// the multi-index enumeration and the truncated product table.
#[derive(Debug)]
pub struct JetShape {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// `product[i * len + j]` is the coefficient slot of `alpha_i + alpha_j`,
    /// or `u32::MAX` when the sum exceeds the truncation order.
    product: Vec<u32>,
}

static SHAPES: Lazy<Mutex<HashMap<(usize, usize), Arc<JetShape>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn degree(alpha: &MultiIndex) -> usize {
    alpha.iter().map(|&a| a as usize).sum()
}

fn enumerate(dim: usize, order: usize) -> Vec<MultiIndex> {
    // All multi-indices with total degree <= order, sorted by
    // (degree, lex) so coefficients of equal degree are contiguous.
    let mut out = Vec::new();
    let mut current = [0u8; MAX_DIM];
    fn rec(
        dim: usize,
        var: usize,
        left: usize,
        current: &mut MultiIndex,
        out: &mut Vec<MultiIndex>,
    ) {
        if var == dim {
            out.push(*current);
            return;
        }
        for a in 0..=left {
            current[var] = a as u8;
            rec(dim, var + 1, left - a, current, out);
        }
        current[var] = 0;
    }
    rec(dim, 0, order, &mut current, &mut out);
    out.sort_by_key(|alpha| (degree(alpha), *alpha));
    out
}

impl JetShape {
    pub fn get(dim: usize, order: usize) -> Arc<JetShape> {
        assert!(dim >= 1 && dim <= MAX_DIM, "jet dimension out of range");
        assert!(order <= MAX_ORDER, "jet order out of range");
        let mut cache = SHAPES.lock().unwrap();
        cache
            .entry((dim, order))
            .or_insert_with(|| {
                let indices = enumerate(dim, order);
                let lookup: HashMap<_, _> = indices
                    .iter()
                    .enumerate()
                    .map(|(i, alpha)| (*alpha, i))
                    .collect();
                let len = indices.len();
                let mut product = vec![u32::MAX; len * len];
                for (i, a) in indices.iter().enumerate() {
                    for (j, b) in indices.iter().enumerate() {
                        if degree(a) + degree(b) <= order {
                            let mut sum = [0u8; MAX_DIM];
                            for v in 0..dim {
                                sum[v] = a[v] + b[v];
                            }
                            product[i * len + j] = lookup[&sum] as u32;
                        }
                    }
                }
                Arc::new(JetShape {
                    dim,
                    order,
                    indices,
                    lookup,
                    product,
                })
            })
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    fn slot(&self, alpha: &[usize]) -> Option<usize> {
        let mut key = [0u8; MAX_DIM];
        for (v, &a) in alpha.iter().enumerate() {
            key[v] = a as u8;
        }
        self.lookup.get(&key).copied()
    }
}

/// Value plus Taylor coefficients: the slot for multi-index `alpha`
/// holds `partial^alpha f(p) / alpha!`.
#[derive(Debug, Clone)]
pub struct Jet<F> {
    shape: Arc<JetShape>,
    coeffs: Vec<F>,
}

impl<F: Real> Jet<F> {
    pub fn constant(shape: &Arc<JetShape>, value: F) -> Self {
        let mut coeffs = vec![F::zero(); shape.len()];
        coeffs[0] = value;
        Jet {
            shape: shape.clone(),
            coeffs,
        }
    }

    pub fn zero(shape: &Arc<JetShape>) -> Self {
        Jet::constant(shape, F::zero())
    }

    /// The jet of the coordinate function `x_{var}` at a point where it
    /// takes `value`.
    pub fn variable(shape: &Arc<JetShape>, var: usize, value: F) -> Self {
        assert!(var < shape.dim(), "variable index out of range");
        let mut jet = Jet::constant(shape, value);
        if shape.order() >= 1 {
            let mut alpha = vec![0usize; shape.dim()];
            alpha[var] = 1;
            let slot = shape.slot(&alpha).unwrap();
            jet.coeffs[slot] = F::one();
        }
        jet
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    /// Plain value of the underlying function at the base point.
    pub fn value(&self) -> F {
        self.coeffs[0]
    }

    /// Taylor coefficient for the multi-index `alpha` (zero-padded).
    pub fn coeff(&self, alpha: &[usize]) -> F {
        match self.shape.slot(alpha) {
            Some(slot) => self.coeffs[slot],
            None => panic!("multi-index outside jet order"),
        }
    }

    /// The partial derivative `partial^alpha f(p)` (coefficient times `alpha!`).
    pub fn partial(&self, alpha: &[usize]) -> F {
        let fact: f64 = alpha
            .iter()
            .map(|&a| (1..=a).map(|k| k as f64).product::<f64>())
            .product();
        self.coeff(alpha) * F::of(fact)
    }

    /// First partial along variable `i`.
    pub fn d(&self, i: usize) -> F {
        let mut alpha = vec![0usize; self.dim()];
        alpha[i] = 1;
        self.partial(&alpha)
    }

    pub fn truncate(&self, order: usize) -> Jet<F> {
        if order >= self.order() {
            return self.clone();
        }
        let shape = JetShape::get(self.dim(), order);
        let mut out = Jet::zero(&shape);
        for (slot, alpha) in shape.indices.iter().enumerate() {
            let src = self.shape.lookup[alpha];
            out.coeffs[slot] = self.coeffs[src];
        }
        out
    }

    /// Jet of `partial f / partial x_i`, one order lower.
    pub fn derivative(&self, i: usize) -> Jet<F> {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        assert!(i < self.dim());
        let shape = JetShape::get(self.dim(), self.order() - 1);
        let mut out = Jet::zero(&shape);
        for (slot, alpha) in shape.indices.iter().enumerate() {
            let mut src_alpha = *alpha;
            src_alpha[i] += 1;
            let src = self.shape.lookup[&src_alpha];
            out.coeffs[slot] = self.coeffs[src] * F::of((alpha[i] + 1) as f64);
        }
        out
    }

    fn aligned(&self, rhs: &Jet<F>) -> (Jet<F>, Jet<F>) {
        assert_eq!(self.dim(), rhs.dim(), "jet dimension mismatch");
        if Arc::ptr_eq(&self.shape, &rhs.shape) {
            (self.clone(), rhs.clone())
        } else {
            let order = self.order().min(rhs.order());
            (self.truncate(order), rhs.truncate(order))
        }
    }

    pub fn scale(&self, s: F) -> Jet<F> {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c = *c * s;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Largest absolute coefficient; handy for residual checks.
    pub fn sup_norm(&self) -> F {
        self.coeffs
            .iter()
            .fold(F::zero(), |acc, c| acc.max(c.abs()))
    }

    /// Nilpotent part `self - value`, used by the unary Taylor expansions.
    fn fluctuation(&self) -> Jet<F> {
        let mut out = self.clone();
        out.coeffs[0] = F::zero();
        out
    }

    /// Compose a univariate Taylor expansion `sum_j c_j w^j / j!` with the
    /// nilpotent part of `self`; `derivs[j]` is the j-th derivative of the
    /// outer function at `self.value()`.
    fn univariate(&self, derivs: &[F]) -> Jet<F> {
        let w = self.fluctuation();
        let mut acc = Jet::constant(&self.shape, derivs[0]);
        let mut power = Jet::constant(&self.shape, F::one());
        let mut factorial = 1.0f64;
        for (j, &dj) in derivs.iter().enumerate().skip(1) {
            power = &power * &w;
            factorial *= j as f64;
            acc = &acc + &power.scale(dj / F::of(factorial));
        }
        acc
    }

    pub fn exp(&self) -> Jet<F> {
        let e = self.value().exp();
        let derivs = vec![e; self.order() + 1];
        self.univariate(&derivs)
    }

    pub fn sin(&self) -> Jet<F> {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [s, c, -s, -c];
        let derivs: Vec<F> = (0..=self.order()).map(|j| cycle[j % 4]).collect();
        self.univariate(&derivs)
    }

    pub fn cos(&self) -> Jet<F> {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [c, -s, -c, s];
        let derivs: Vec<F> = (0..=self.order()).map(|j| cycle[j % 4]).collect();
        self.univariate(&derivs)
    }

    pub fn ln(&self) -> Result<Jet<F>> {
        let v = self.value();
        if v <= F::zero() || !v.is_finite() {
            return Err(Error::Domain(format!("log of non-positive value {v}")));
        }
        let mut derivs = vec![F::zero(); self.order() + 1];
        derivs[0] = v.ln();
        // d^j/dx^j ln x = (-1)^(j-1) (j-1)! x^-j
        let mut sign = F::one();
        for (j, d) in derivs.iter_mut().enumerate().skip(1) {
            let fact: f64 = (1..j).map(|k| k as f64).product();
            *d = sign * F::of(fact) / v.powi(j as i32);
            sign = -sign;
        }
        Ok(self.univariate(&derivs))
    }

    pub fn sqrt(&self) -> Result<Jet<F>> {
        let v = self.value();
        if v <= F::zero() || !v.is_finite() {
            return Err(Error::Domain(format!("sqrt of non-positive value {v}")));
        }
        let root = v.sqrt();
        let mut derivs = vec![root; self.order() + 1];
        // d^j/dx^j x^(1/2) = (1/2)(1/2 - 1).. x^(1/2 - j)
        let mut coeff = 1.0f64;
        for (j, d) in derivs.iter_mut().enumerate().skip(1) {
            coeff *= 0.5 - (j as f64 - 1.0);
            *d = F::of(coeff) * root / v.powi(j as i32);
        }
        Ok(self.univariate(&derivs))
    }

    pub fn recip(&self) -> Result<Jet<F>> {
        let v = self.value();
        if v == F::zero() || !v.is_finite() {
            return Err(Error::Domain("division by zero".into()));
        }
        let mut derivs = vec![F::zero(); self.order() + 1];
        // d^j/dx^j x^-1 = (-1)^j j! x^-(j+1)
        let mut sign = F::one();
        for (j, d) in derivs.iter_mut().enumerate() {
            let fact: f64 = (1..=j).map(|k| k as f64).product();
            *d = sign * F::of(fact) / v.powi(j as i32 + 1);
            sign = -sign;
        }
        Ok(self.univariate(&derivs))
    }

    pub fn try_div(&self, rhs: &Jet<F>) -> Result<Jet<F>> {
        let (a, b) = self.aligned(rhs);
        Ok(&a * &b.recip()?)
    }

    pub fn powi(&self, n: i32) -> Result<Jet<F>> {
        if n == 0 {
            return Ok(Jet::constant(&self.shape, F::one()));
        }
        let base = if n > 0 {
            self.clone()
        } else {
            self.recip()?
        };
        let mut acc = base.clone();
        for _ in 1..n.abs() {
            acc = &acc * &base;
        }
        Ok(acc)
    }
}

impl<F: Real> Add for &Jet<F> {
    type Output = Jet<F>;
    fn add(self, rhs: &Jet<F>) -> Jet<F> {
        let (mut a, b) = self.aligned(rhs);
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x = *x + *y;
        }
        a
    }
}

impl<F: Real> Sub for &Jet<F> {
    type Output = Jet<F>;
    fn sub(self, rhs: &Jet<F>) -> Jet<F> {
        let (mut a, b) = self.aligned(rhs);
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x = *x - *y;
        }
        a
    }
}

impl<F: Real> Mul for &Jet<F> {
    type Output = Jet<F>;
    fn mul(self, rhs: &Jet<F>) -> Jet<F> {
        let (a, b) = self.aligned(rhs);
        let shape = a.shape.clone();
        let len = shape.len();
        let mut coeffs = vec![F::zero(); len];
        for (i, &ca) in a.coeffs.iter().enumerate() {
            if ca == F::zero() {
                continue;
            }
            let row = i * len;
            for (j, &cb) in b.coeffs.iter().enumerate() {
                let target = shape.product[row + j];
                if target != u32::MAX {
                    coeffs[target as usize] = coeffs[target as usize] + ca * cb;
                }
            }
        }
        Jet { shape, coeffs }
    }
}

impl<F: Real> Neg for &Jet<F> {
    type Output = Jet<F>;
    fn neg(self) -> Jet<F> {
        self.scale(-F::one())
    }
}

impl<F: Real> Div for &Jet<F> {
    type Output = Jet<F>;
    fn div(self, rhs: &Jet<F>) -> Jet<F> {
        self.try_div(rhs).expect("jet division by zero")
    }
}

macro_rules! owned_ops {
    ($($trait:ident :: $method:ident),*) => {$(
        impl<F: Real> $trait for Jet<F> {
            type Output = Jet<F>;
            fn $method(self, rhs: Jet<F>) -> Jet<F> {
                $trait::$method(&self, &rhs)
            }
        }
        impl<F: Real> $trait<&Jet<F>> for Jet<F> {
            type Output = Jet<F>;
            fn $method(self, rhs: &Jet<F>) -> Jet<F> {
                $trait::$method(&self, rhs)
            }
        }
    )*};
}

owned_ops!(Add::add, Sub::sub, Mul::mul, Div::div);

impl<F: Real> AddAssign<&Jet<F>> for Jet<F> {
    fn add_assign(&mut self, rhs: &Jet<F>) {
        *self = &*self + rhs;
    }
}

impl<F: Real> SubAssign<&Jet<F>> for Jet<F> {
    fn sub_assign(&mut self, rhs: &Jet<F>) {
        *self = &*self - rhs;
    }
}

impl<F: Real> Neg for Jet<F> {
    type Output = Jet<F>;
    fn neg(self) -> Jet<F> {
        -&self
    }
}
