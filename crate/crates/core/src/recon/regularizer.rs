use crate::error::{check_len, Result};
use crate::geometry::ImagingGrid;
use crate::raypath::SparseMatrix;

/// Per-direction weights of the first-difference regularizer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GradientWeights {
    pub horizontal: f64,
    pub vertical: f64,
    /// `(r, c) → (r+1, c+1)`
    pub diagonal: f64,
    /// `(r, c+1) → (r+1, c)`
    pub anti_diagonal: f64,
}

impl GradientWeights {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            horizontal: self.horizontal * factor,
            vertical: self.vertical * factor,
            diagonal: self.diagonal * factor,
            anti_diagonal: self.anti_diagonal * factor,
        }
    }
}

impl Default for GradientWeights {
    fn default() -> Self {
        Self {
            horizontal: 1.0,
            vertical: 1.0,
            diagonal: std::f64::consts::FRAC_1_SQRT_2,
            anti_diagonal: std::f64::consts::FRAC_1_SQRT_2,
        }
    }
}

/// Stacked weighted first differences: horizontal, vertical, diagonal and
/// anti-diagonal neighbour pairs, in that order. Pairs that would wrap
/// around the grid edge are omitted.
#[derive(Debug, Clone)]
pub struct RegularizerMatrix {
    forward: SparseMatrix,
    adjoint: SparseMatrix,
    weights: GradientWeights,
}

impl RegularizerMatrix {
    pub fn build(grid: &ImagingGrid, weights: GradientWeights) -> Self {
        let (rows, cols) = (grid.n_axial(), grid.n_lateral());
        let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut pair = |from: usize, to: usize, kappa: f64| {
            // columns sorted ascending within a row
            let (lo, hi) = if from < to { (from, to) } else { (to, from) };
            let sign = if from < to { 1.0 } else { -1.0 };
            entries.push(vec![(lo, -sign * kappa), (hi, sign * kappa)]);
        };
        for r in 0..rows {
            for c in 0..cols.saturating_sub(1) {
                pair(grid.index(r, c), grid.index(r, c + 1), weights.horizontal);
            }
        }
        for r in 0..rows.saturating_sub(1) {
            for c in 0..cols {
                pair(grid.index(r, c), grid.index(r + 1, c), weights.vertical);
            }
        }
        for r in 0..rows.saturating_sub(1) {
            for c in 0..cols.saturating_sub(1) {
                pair(grid.index(r, c), grid.index(r + 1, c + 1), weights.diagonal);
            }
        }
        for r in 0..rows.saturating_sub(1) {
            for c in 0..cols.saturating_sub(1) {
                pair(
                    grid.index(r, c + 1),
                    grid.index(r + 1, c),
                    weights.anti_diagonal,
                );
            }
        }
        let forward = SparseMatrix::from_rows(grid.n_cells(), entries);
        let adjoint = forward.transpose();
        Self {
            forward,
            adjoint,
            weights,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.forward.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.forward.n_cols()
    }

    pub fn weights(&self) -> GradientWeights {
        self.weights
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.forward
    }

    pub fn apply(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_cols(), alpha.len(), "image for D·α")?;
        Ok(self.forward.mul_vec(alpha))
    }

    pub(crate) fn apply_into(&self, alpha: &[f64], out: &mut [f64]) {
        self.forward.mul_vec_into(alpha, out);
    }

    pub(crate) fn apply_transpose_into(&self, v: &[f64], out: &mut [f64]) {
        self.adjoint.mul_vec_into(v, out);
    }
}
