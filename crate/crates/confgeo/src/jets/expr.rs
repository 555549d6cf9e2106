//! Closed-form expression trees over chart coordinates `x1..x8`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jets::jet::{Jet, JetShape, MAX_DIM};
use crate::scalar::Real;

/// Abstract syntax tree for a scalar expression. Closed under
/// differentiation: every node's derivative is again an `Expr`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
    Log(Arc<Expr>),
    Sqrt(Arc<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        assert!(i < MAX_DIM, "variable index out of range");
        Expr::Var(i)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (Expr::Const(c), _) if *c == 0.0 => b,
            (_, Expr::Const(c)) if *c == 0.0 => a,
            _ => Expr::Add(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (_, Expr::Const(c)) if *c == 0.0 => a,
            _ => Expr::Sub(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (Expr::Const(c), _) if *c == 0.0 => Expr::Const(0.0),
            (_, Expr::Const(c)) if *c == 0.0 => Expr::Const(0.0),
            (Expr::Const(c), _) if *c == 1.0 => b,
            (_, Expr::Const(c)) if *c == 1.0 => a,
            _ => Expr::Mul(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => Expr::Const(x / y),
            (Expr::Const(c), _) if *c == 0.0 => Expr::Const(0.0),
            (_, Expr::Const(c)) if *c == 1.0 => a,
            _ => Expr::Div(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::sub(Expr::Const(0.0), a)
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        match (&a, n) {
            (_, 0) => Expr::Const(1.0),
            (_, 1) => a,
            (Expr::Const(c), _) => Expr::Const(c.powi(n)),
            _ => Expr::Pow(Arc::new(a), n),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::Sin(Arc::new(a))
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::Cos(Arc::new(a))
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Arc::new(a))
    }

    pub fn log(a: Expr) -> Expr {
        Expr::Log(Arc::new(a))
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::Sqrt(Arc::new(a))
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b) => a.max_var().into_iter().chain(b.max_var()).max(),
            Expr::Pow(a, _)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Sqrt(a) => a.max_var(),
        }
    }

    /// Symbolic partial derivative with respect to `x_{var}`.
    pub fn derivative(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::add(a.derivative(var), b.derivative(var)),
            Expr::Sub(a, b) => Expr::sub(a.derivative(var), b.derivative(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative(var), (**b).clone()),
                Expr::mul((**a).clone(), b.derivative(var)),
            ),
            Expr::Div(a, b) => Expr::div(
                Expr::sub(
                    Expr::mul(a.derivative(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.derivative(var)),
                ),
                Expr::pow((**b).clone(), 2),
            ),
            Expr::Pow(a, n) => Expr::mul(
                Expr::mul(Expr::Const(*n as f64), Expr::pow((**a).clone(), n - 1)),
                a.derivative(var),
            ),
            Expr::Sin(a) => Expr::mul(Expr::cos((**a).clone()), a.derivative(var)),
            Expr::Cos(a) => Expr::neg(Expr::mul(
                Expr::sin((**a).clone()),
                a.derivative(var),
            )),
            Expr::Exp(a) => Expr::mul(Expr::exp((**a).clone()), a.derivative(var)),
            Expr::Log(a) => Expr::div(a.derivative(var), (**a).clone()),
            Expr::Sqrt(a) => Expr::div(
                a.derivative(var),
                Expr::mul(Expr::Const(2.0), Expr::sqrt((**a).clone())),
            ),
        }
    }

    /// Substitute `replacements[i]` for `x_{i}`. Variables beyond the
    /// replacement list are kept as-is.
    pub fn substitute(&self, replacements: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => replacements
                .get(*i)
                .cloned()
                .unwrap_or_else(|| Expr::Var(*i)),
            Expr::Add(a, b) => {
                Expr::add(a.substitute(replacements), b.substitute(replacements))
            }
            Expr::Sub(a, b) => {
                Expr::sub(a.substitute(replacements), b.substitute(replacements))
            }
            Expr::Mul(a, b) => {
                Expr::mul(a.substitute(replacements), b.substitute(replacements))
            }
            Expr::Div(a, b) => {
                Expr::div(a.substitute(replacements), b.substitute(replacements))
            }
            Expr::Pow(a, n) => Expr::pow(a.substitute(replacements), *n),
            Expr::Sin(a) => Expr::sin(a.substitute(replacements)),
            Expr::Cos(a) => Expr::cos(a.substitute(replacements)),
            Expr::Exp(a) => Expr::exp(a.substitute(replacements)),
            Expr::Log(a) => Expr::log(a.substitute(replacements)),
            Expr::Sqrt(a) => Expr::sqrt(a.substitute(replacements)),
        }
    }

    /// Shift every variable index by `offset` (used when a field over an
    /// `n`-chart is reused on an `(n+r)`-dimensional total space).
    pub fn shift_vars(&self, offset: usize) -> Expr {
        let max = match self.max_var() {
            Some(m) => m,
            None => return self.clone(),
        };
        let repl: Vec<Expr> = (0..=max).map(|i| Expr::Var(i + offset)).collect();
        self.substitute(&repl)
    }

    /// Evaluate as a jet at `point`.
    pub fn eval_jet<F: Real>(
        &self,
        shape: &Arc<JetShape>,
        point: &[F],
    ) -> Result<Jet<F>> {
        Ok(match self {
            Expr::Const(c) => Jet::constant(shape, F::of(*c)),
            Expr::Var(i) => {
                if *i >= shape.dim() {
                    return Err(Error::Dimension(format!(
                        "variable x{} used on a {}-dimensional chart",
                        i + 1,
                        shape.dim()
                    )));
                }
                Jet::variable(shape, *i, point[*i])
            }
            Expr::Add(a, b) => a.eval_jet(shape, point)? + b.eval_jet(shape, point)?,
            Expr::Sub(a, b) => a.eval_jet(shape, point)? - b.eval_jet(shape, point)?,
            Expr::Mul(a, b) => a.eval_jet(shape, point)? * b.eval_jet(shape, point)?,
            Expr::Div(a, b) => a
                .eval_jet(shape, point)?
                .try_div(&b.eval_jet(shape, point)?)?,
            Expr::Pow(a, n) => a.eval_jet(shape, point)?.powi(*n)?,
            Expr::Sin(a) => a.eval_jet(shape, point)?.sin(),
            Expr::Cos(a) => a.eval_jet(shape, point)?.cos(),
            Expr::Exp(a) => a.eval_jet(shape, point)?.exp(),
            Expr::Log(a) => a.eval_jet(shape, point)?.ln()?,
            Expr::Sqrt(a) => a.eval_jet(shape, point)?.sqrt()?,
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Pow(..) => 3,
            _ => 4,
        }
    }

    fn fmt_child(
        &self,
        f: &mut fmt::Formatter<'_>,
        min_prec: u8,
    ) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Add(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " + ")?;
                b.fmt_child(f, 2)
            }
            Expr::Sub(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " - ")?;
                b.fmt_child(f, 2)
            }
            Expr::Mul(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "*")?;
                b.fmt_child(f, 3)
            }
            Expr::Div(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "/")?;
                b.fmt_child(f, 3)
            }
            Expr::Pow(a, n) => {
                a.fmt_child(f, 4)?;
                write!(f, "^{n}")
            }
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

/// An expression together with the dimension of the chart it lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    expr: Expr,
    dim: usize,
}

impl ScalarField {
    pub fn new(expr: Expr, dim: usize) -> Result<ScalarField> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension(format!(
                "chart dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if let Some(max) = expr.max_var() {
            if max >= dim {
                return Err(Error::Dimension(format!(
                    "expression uses x{} on a {dim}-dimensional chart",
                    max + 1
                )));
            }
        }
        Ok(ScalarField { expr, dim })
    }

    pub fn parse(source: &str, dim: usize) -> Result<ScalarField> {
        ScalarField::new(super::parse(source)?, dim)
    }

    pub fn constant(c: f64, dim: usize) -> ScalarField {
        ScalarField {
            expr: Expr::Const(c),
            dim,
        }
    }

    pub fn zero(dim: usize) -> ScalarField {
        ScalarField::constant(0.0, dim)
    }

    pub fn coordinate(i: usize, dim: usize) -> ScalarField {
        assert!(i < dim);
        ScalarField {
            expr: Expr::Var(i),
            dim,
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.expr, Expr::Const(c) if c == 0.0)
    }

    /// Evaluate the jet of the field at `p` to the given order.
    pub fn jet<F: Real>(&self, p: &[F], order: usize) -> Result<Jet<F>> {
        if p.len() != self.dim {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, chart has {}",
                p.len(),
                self.dim
            )));
        }
        let shape = JetShape::get(self.dim, order);
        let jet = self.expr.eval_jet(&shape, p)?;
        if !jet.is_finite() {
            return Err(Error::Domain(
                "field evaluation produced a non-finite value".into(),
            ));
        }
        Ok(jet)
    }

    /// Plain evaluation (order-0 jet).
    pub fn eval<F: Real>(&self, p: &[F]) -> Result<F> {
        Ok(self.jet(p, 0)?.value())
    }

    pub fn derivative(&self, var: usize) -> ScalarField {
        ScalarField {
            expr: self.expr.derivative(var),
            dim: self.dim,
        }
    }
}
