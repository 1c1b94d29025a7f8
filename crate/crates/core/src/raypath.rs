//! Sparse ray-path matrix: entry `(ray, cell)` is the length of the ray
//! inside that cell, so `L · α` is the discretized attenuation line integral.
//!
//! Each leg of a ray is traversed with an incremental parametric walk over
//! grid-line crossings (Siddon / Jacobs). Between consecutive crossings the
//! ray lies in a single cell, identified from the interval midpoint under
//! half-open `[low, high)` cells, so a ray through a grid corner never
//! double counts.

use std::io::Write;
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::geometry::{AcquisitionGeometry, ImagingGrid, RaySpec};
use crate::par;

const SPAN_TOLERANCE: f64 = 1e-12;

/// Row-compressed sparse matrix with a cached transpose for parallel
/// adjoint products.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(col, value)` lists. Columns within a row must be
    /// strictly increasing.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in &rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for &(c, v) in row {
                debug_assert!(c < n_cols);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
            .iter()
            .sum()
    }

    /// Triplets `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(c, v)| (i, c, v)))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for (c, v) in self.row(i) {
                let slot = next[c];
                col_idx[slot] = i;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `y = A x`, written into `out`. Each entry sums its row in storage
    /// order, so results do not depend on thread count.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(out.len(), self.n_rows);
        par::fill(out, |i| {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            self.col_idx[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&c, &v)| v * x[c])
                .sum()
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut out);
        out
    }
}

/// The ray-path matrix `L` (rays × cells, meters) with its transpose.
#[derive(Debug, Clone)]
pub struct RayPathMatrix {
    forward: SparseMatrix,
    adjoint: SparseMatrix,
    grid: ImagingGrid,
}

impl RayPathMatrix {
    pub fn from_sparse(forward: SparseMatrix, grid: ImagingGrid) -> Result<Self> {
        check_len(grid.n_cells(), forward.n_cols(), "ray-path matrix columns")?;
        let adjoint = forward.transpose();
        Ok(Self {
            forward,
            adjoint,
            grid,
        })
    }

    pub fn grid(&self) -> &ImagingGrid {
        &self.grid
    }

    pub fn n_rays(&self) -> usize {
        self.forward.n_rows()
    }

    pub fn n_cells(&self) -> usize {
        self.forward.n_cols()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.forward
    }

    pub fn row_sum(&self, ray: usize) -> f64 {
        self.forward.row_sum(ray)
    }

    /// Path integrals `L α`, one per ray.
    pub fn apply(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_cells(), alpha.len(), "image for L·α")?;
        Ok(self.forward.mul_vec(alpha))
    }

    /// Back-projection `Lᵀ v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_rays(), v.len(), "ray vector for Lᵀ·v")?;
        Ok(self.adjoint.mul_vec(v))
    }

    pub(crate) fn apply_into(&self, alpha: &[f64], out: &mut [f64]) {
        self.forward.mul_vec_into(alpha, out);
    }

    pub(crate) fn apply_transpose_into(&self, v: &[f64], out: &mut [f64]) {
        self.adjoint.mul_vec_into(v, out);
    }

    /// Same matrix with rows reordered so that new row `k` is old row
    /// `order[k]`.
    pub fn permute_rays(&self, order: &[usize]) -> Result<Self> {
        check_len(self.n_rays(), order.len(), "ray permutation")?;
        let rows = order
            .iter()
            .map(|&i| self.forward.row(i).collect())
            .collect();
        Self::from_sparse(SparseMatrix::from_rows(self.n_cells(), rows), self.grid)
    }

    /// Writes `row,col,value` lines with C `%.12e` formatted values.
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for (r, c, v) in self.forward.triplets() {
            writeln!(out, "{r},{c},{}", format_c_exp(v, 12)).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Formats like C's `printf("%.{precision}e")`: explicit exponent sign and at
/// least two exponent digits.
pub fn format_c_exp(value: f64, precision: usize) -> String {
    if !value.is_finite() {
        return format!("{value}");
    }
    let s = format!("{value:.precision$e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    format!("{mantissa}e{sign}{digits:0>2}")
}

/// Builds `L` for every `(tx, rx)` pair in row-major order.
pub fn build_system_matrix(
    geom: &AcquisitionGeometry,
    grid: &ImagingGrid,
) -> Result<RayPathMatrix> {
    check_span(geom, grid)?;
    let rays = geom.all_rays();
    let rows = par::map_slice(&rays, |ray| trace_ray(ray, grid));
    RayPathMatrix::from_sparse(SparseMatrix::from_rows(grid.n_cells(), rows), *grid)
}

fn check_span(geom: &AcquisitionGeometry, grid: &ImagingGrid) -> Result<()> {
    let close = |a: f64, b: f64| (a - b).abs() <= SPAN_TOLERANCE * a.abs().max(b.abs());
    if !close(grid.width(), geom.aperture()) || !close(grid.height(), geom.reflector_depth()) {
        return Err(Error::GridMismatch(format!(
            "grid spans {} x {} m, acquisition spans {} x {} m",
            grid.width(),
            grid.height(),
            geom.aperture(),
            geom.reflector_depth()
        )));
    }
    Ok(())
}

/// One row of `L`: sorted by cell, duplicate cells from the two legs merged.
pub fn trace_ray(ray: &RaySpec, grid: &ImagingGrid) -> Vec<(usize, f64)> {
    let mut entries = Vec::new();
    for (start, end) in ray.segments() {
        trace_segment(start, end, grid, &mut entries);
    }
    entries.sort_by_key(|&(c, _)| c);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (c, v) in entries {
        match merged.last_mut() {
            Some((last, acc)) if *last == c => *acc += v,
            _ => merged.push((c, v)),
        }
    }
    merged
}

/// Appends `(cell, length)` for each cell the segment crosses, in traversal
/// order.
pub fn trace_segment(
    start: (f64, f64),
    end: (f64, f64),
    grid: &ImagingGrid,
    out: &mut Vec<(usize, f64)>,
) {
    let (x0, z0) = start;
    let (dx, dz) = (end.0 - x0, end.1 - z0);
    let length = dx.hypot(dz);
    if length == 0.0 {
        return;
    }

    let axis = |delta: f64, origin: f64, cell: f64| -> AxisWalk {
        if delta == 0.0 || cell == 0.0 {
            return AxisWalk::frozen();
        }
        let step = cell / delta.abs();
        let forward = delta > 0.0;
        // index of the first grid line strictly ahead of the origin
        let pos = origin / cell;
        let line = if forward {
            pos.floor() + 1.0
        } else {
            pos.ceil() - 1.0
        };
        AxisWalk {
            next: ((line * cell - origin) / delta).max(0.0),
            step,
        }
    };

    let mut xs = axis(dx, x0, grid.cell_width());
    let mut zs = axis(dz, z0, grid.cell_height());

    // Crossings closer than this (rounding near a grid line) are merged into
    // the following interval rather than emitted as sliver entries.
    const SLIVER: f64 = 1e-12;
    let mut t = 0.0;
    while t < 1.0 {
        let t_next = xs.next.min(zs.next).min(1.0);
        if t_next - t > SLIVER || t_next >= 1.0 {
            let mid = 0.5 * (t + t_next);
            let cell = grid.index(grid.row_of(z0 + mid * dz), grid.col_of(x0 + mid * dx));
            out.push((cell, (t_next - t) * length));
            t = t_next;
        }
        if xs.next <= t_next {
            xs.advance();
        }
        if zs.next <= t_next {
            zs.advance();
        }
    }
}

struct AxisWalk {
    next: f64,
    step: f64,
}

impl AxisWalk {
    fn frozen() -> Self {
        Self {
            next: f64::INFINITY,
            step: f64::INFINITY,
        }
    }

    fn advance(&mut self) {
        self.next += self.step;
    }
}
