use super::grid::Grid;
use crate::error::{Error, Result};

/// Grid-sampled scalar field at a fixed time.
///
/// `far_field` holds the constant values `(u₋, u₊)` assumed beyond the box
/// along the first axis in full-space runs; regional runs leave it unset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
    pub far_field: Option<(f64, f64)>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64, far_field: Option<(f64, f64)>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), actual: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values, time, far_field })
    }

    pub fn constant(grid: &Grid, value: f64, far_field: Option<(f64, f64)>) -> Self {
        Self { grid: grid.clone(), values: vec![value; grid.len()], time: 0.0, far_field }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sup norm including the far-field constants.
    pub fn sup_norm_with_far_field(&self) -> f64 {
        let far = self.far_field.map_or(0.0, |(a, b)| a.abs().max(b.abs()));
        self.sup_norm().max(far)
    }

    /// `max u - min u`.
    pub fn oscillation(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Midpoint-rule integral.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Samples `f` at every node of `grid`, at `t = 0`.
pub fn sample_function_to_field<F>(f: F, grid: &Grid, far_field: Option<(f64, f64)>) -> Result<ScalarField>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = grid.dim();
    let values = grid.points().map(|p| f(&p[..dim])).collect();
    ScalarField::new(grid.clone(), values, 0.0, far_field)
}
