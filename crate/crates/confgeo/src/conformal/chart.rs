//! Coordinate charts carrying a conformal class and Weyl structures.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jets::{Expr, ScalarField, MAX_DIM};

/// A chart with a gauge metric representing the conformal class.
#[derive(Debug, Clone)]
pub struct ConformalChart {
    dim: usize,
    metric: Vec<ScalarField>,
}

impl ConformalChart {
    /// Build from the row-major symmetric matrix of metric entries.
    pub fn new(dim: usize, metric: Vec<ScalarField>) -> Result<Arc<ConformalChart>> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension(format!(
                "chart dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if metric.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "metric needs {} entries, got {}",
                dim * dim,
                metric.len()
            )));
        }
        for (i, entry) in metric.iter().enumerate() {
            if entry.dim() != dim {
                return Err(Error::Dimension(format!(
                    "metric entry {i} lives on a {}-dimensional chart, expected {dim}",
                    entry.dim()
                )));
            }
        }
        for i in 0..dim {
            for j in 0..i {
                if metric[i * dim + j] != metric[j * dim + i] {
                    return Err(Error::Dimension(format!(
                        "metric entries ({i},{j}) and ({j},{i}) differ symbolically"
                    )));
                }
            }
        }
        Ok(Arc::new(ConformalChart { dim, metric }))
    }

    /// Euclidean chart of the given dimension.
    pub fn euclidean(dim: usize) -> Arc<ConformalChart> {
        let metric = (0..dim * dim)
            .map(|pos| {
                let (i, j) = (pos / dim, pos % dim);
                ScalarField::constant(if i == j { 1.0 } else { 0.0 }, dim)
            })
            .collect();
        ConformalChart::new(dim, metric).expect("euclidean chart is valid")
    }

    /// Parse metric entries from expression sources (row-major, full
    /// matrix).
    pub fn parse(dim: usize, sources: &[&str]) -> Result<Arc<ConformalChart>> {
        let metric = sources
            .iter()
            .map(|s| ScalarField::parse(s, dim))
            .collect::<Result<Vec<_>>>()?;
        ConformalChart::new(dim, metric)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric_field(&self, i: usize, j: usize) -> &ScalarField {
        &self.metric[i * self.dim + j]
    }

    pub fn metric_fields(&self) -> &[ScalarField] {
        &self.metric
    }

    /// Conformally rescaled chart `g' = e^{2f} g`, together with the
    /// 1-form `θ = df` that expresses the Levi-Civita connection of
    /// `g'` as the Weyl structure `∇^g + θ̃` relative to this gauge.
    pub fn rescaled(
        &self,
        f: &ScalarField,
    ) -> Result<(Arc<ConformalChart>, Vec<ScalarField>)> {
        if f.dim() != self.dim {
            return Err(Error::Dimension(
                "gauge factor lives on a different chart".into(),
            ));
        }
        let factor = Expr::exp(Expr::mul(Expr::constant(2.0), f.expr().clone()));
        let metric = self
            .metric
            .iter()
            .map(|entry| {
                ScalarField::new(
                    Expr::mul(factor.clone(), entry.expr().clone()),
                    self.dim,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let theta = (0..self.dim).map(|i| f.derivative(i)).collect();
        Ok((ConformalChart::new(self.dim, metric)?, theta))
    }
}

/// A Weyl structure: the 1-form `θ` relative to the gauge Levi-Civita
/// connection of the chart (`θ = 0` is the gauge connection itself).
#[derive(Debug, Clone)]
pub struct WeylStructure {
    chart: Arc<ConformalChart>,
    theta: Vec<ScalarField>,
}

impl WeylStructure {
    pub fn new(chart: &Arc<ConformalChart>, theta: Vec<ScalarField>) -> Result<WeylStructure> {
        if theta.len() != chart.dim() {
            return Err(Error::Dimension(format!(
                "Weyl 1-form needs {} components, got {}",
                chart.dim(),
                theta.len()
            )));
        }
        for t in &theta {
            if t.dim() != chart.dim() {
                return Err(Error::Dimension(
                    "Weyl 1-form component on a different chart".into(),
                ));
            }
        }
        Ok(WeylStructure {
            chart: Arc::clone(chart),
            theta,
        })
    }

    /// The gauge Levi-Civita connection.
    pub fn levi_civita(chart: &Arc<ConformalChart>) -> WeylStructure {
        let theta = (0..chart.dim())
            .map(|_| ScalarField::zero(chart.dim()))
            .collect();
        WeylStructure {
            chart: Arc::clone(chart),
            theta,
        }
    }

    pub fn chart(&self) -> &Arc<ConformalChart> {
        &self.chart
    }

    pub fn theta(&self) -> &[ScalarField] {
        &self.theta
    }

    /// The Weyl structure `∇ + η̃`.
    pub fn offset(&self, eta: &[ScalarField]) -> Result<WeylStructure> {
        if eta.len() != self.chart.dim() {
            return Err(Error::Dimension("offset 1-form has wrong length".into()));
        }
        let theta = self
            .theta
            .iter()
            .zip(eta)
            .map(|(a, b)| {
                ScalarField::new(
                    Expr::add(a.expr().clone(), b.expr().clone()),
                    self.chart.dim(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        WeylStructure::new(&self.chart, theta)
    }
}
