use crate::error::{check_len, Error, Result};
use crate::geometry::ImagingGrid;
use crate::physics::{db_per_cm_to_np_per_m, np_per_m_to_db_per_cm};

/// Attenuation coefficients on an imaging grid, Np/m, row-major with rows
/// along depth.
#[derive(Debug, Clone, PartialEq)]
pub struct AttenuationImage {
    grid: ImagingGrid,
    values: Vec<f64>,
}

impl AttenuationImage {
    pub fn new(grid: ImagingGrid, values: Vec<f64>) -> Result<Self> {
        check_len(grid.n_cells(), values.len(), "attenuation image")?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("attenuation image"));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: ImagingGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_cells()],
        }
    }

    pub fn from_db_per_cm(grid: ImagingGrid, values_db_cm: &[f64]) -> Result<Self> {
        Self::new(
            grid,
            values_db_cm
                .iter()
                .map(|&v| db_per_cm_to_np_per_m(v))
                .collect(),
        )
    }

    pub fn grid(&self) -> &ImagingGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.index(row, col)]
    }

    pub fn to_db_per_cm(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&v| np_per_m_to_db_per_cm(v))
            .collect()
    }
}
