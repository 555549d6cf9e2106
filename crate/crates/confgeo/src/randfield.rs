//! Seeded random polynomial fields for regression scenarios and
//! property suites.

use rand::Rng;

use crate::jets::{Expr, ScalarField};

fn monomials(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; dim];
    fn rec(dim: usize, var: usize, left: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if var == dim {
            out.push(current.clone());
            return;
        }
        for a in 0..=left {
            current[var] = a;
            rec(dim, var + 1, left - a, current, out);
        }
        current[var] = 0;
    }
    rec(dim, 0, degree, &mut current, &mut out);
    out
}

/// Random polynomial of the given degree with coefficients uniform in
/// `[-scale, scale]`.
pub fn random_polynomial(rng: &mut impl Rng, dim: usize, degree: usize, scale: f64) -> Expr {
    let mut acc = Expr::constant(0.0);
    for mono in monomials(dim, degree) {
        let coeff: f64 = rng.gen_range(-scale..scale);
        let mut term = Expr::constant(coeff);
        for (var, &power) in mono.iter().enumerate() {
            if power > 0 {
                term = Expr::mul(term, Expr::pow(Expr::var(var), power as i32));
            }
        }
        acc = Expr::add(acc, term);
    }
    acc
}

/// Random symmetric metric `δ + (small polynomial perturbation)`,
/// positive-definite near the origin.
pub fn random_metric(
    rng: &mut impl Rng,
    dim: usize,
    degree: usize,
    scale: f64,
) -> Vec<ScalarField> {
    let mut entries = vec![Expr::constant(0.0); dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let base = if i == j { 1.0 } else { 0.0 };
            let perturbation = random_polynomial(rng, dim, degree, scale);
            let e = Expr::add(Expr::constant(base), perturbation);
            entries[i * dim + j] = e.clone();
            entries[j * dim + i] = e;
        }
    }
    entries
        .into_iter()
        .map(|e| ScalarField::new(e, dim).expect("variables within chart"))
        .collect()
}

/// Random 1-form with polynomial components.
pub fn random_one_form(
    rng: &mut impl Rng,
    dim: usize,
    degree: usize,
    scale: f64,
) -> Vec<ScalarField> {
    (0..dim)
        .map(|_| {
            ScalarField::new(random_polynomial(rng, dim, degree, scale), dim)
                .expect("variables within chart")
        })
        .collect()
}

/// Random point with coordinates uniform in `[-radius, radius]`.
pub fn random_point(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-radius..radius)).collect()
}
