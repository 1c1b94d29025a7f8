//! Acquisition geometry: a linear array at depth 0 facing a flat reflector at
//! depth `d`, and the specular V-shaped ray for each transmit/receive pair.
//!
//! Coordinates are `(x, z)` in meters, `x` lateral along the array and `z`
//! axial (depth). Element `i` sits at `x = i * pitch`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionGeometry {
    n_elements: usize,
    pitch: f64,
    reflector_depth: f64,
}

impl AcquisitionGeometry {
    /// A single element is accepted as a degenerate, zero-aperture array.
    pub fn new(n_elements: usize, pitch: f64, reflector_depth: f64) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::invalid("geometry", "n_elements must be at least 1"));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::invalid(
                "geometry",
                format!("pitch must be > 0, got {pitch}"),
            ));
        }
        if !(reflector_depth > 0.0 && reflector_depth.is_finite()) {
            return Err(Error::invalid(
                "geometry",
                format!("reflector depth must be > 0, got {reflector_depth}"),
            ));
        }
        Ok(Self {
            n_elements,
            pitch,
            reflector_depth,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn reflector_depth(&self) -> f64 {
        self.reflector_depth
    }

    pub fn aperture(&self) -> f64 {
        (self.n_elements - 1) as f64 * self.pitch
    }

    /// Number of transmit/receive pairs, `n_elements²`.
    pub fn n_rays(&self) -> usize {
        self.n_elements * self.n_elements
    }

    pub fn element_x(&self, index: usize) -> f64 {
        index as f64 * self.pitch
    }

    pub fn ray_index(&self, tx: usize, rx: usize) -> usize {
        tx * self.n_elements + rx
    }

    pub fn ray_for_pair(&self, tx: usize, rx: usize) -> Result<RaySpec> {
        for index in [tx, rx] {
            if index >= self.n_elements {
                return Err(Error::IndexOutOfRange {
                    index,
                    len: self.n_elements,
                });
            }
        }
        let xt = self.element_x(tx);
        let xr = self.element_x(rx);
        let d = self.reflector_depth;
        let offset = (xt - xr).abs();
        let theta = (offset / (2.0 * d)).atan();
        Ok(RaySpec {
            tx_index: tx,
            rx_index: rx,
            tx_x: xt,
            rx_x: xr,
            incidence_angle: theta,
            vertex: (0.5 * (xt + xr), d),
            // hypot rather than 2d/cos(theta): same quantity, no cancellation
            total_length: offset.hypot(2.0 * d),
        })
    }

    /// All `n²` rays, row-major in `(tx, rx)`.
    pub fn all_rays(&self) -> Vec<RaySpec> {
        let n = self.n_elements;
        (0..n * n)
            .map(|k| self.ray_for_pair(k / n, k % n).expect("indices in range"))
            .collect()
    }
}

/// Specular path `(x_t, 0) -> ((x_t + x_r)/2, d) -> (x_r, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySpec {
    pub tx_index: usize,
    pub rx_index: usize,
    pub tx_x: f64,
    pub rx_x: f64,
    /// Angle from the plate normal, radians.
    pub incidence_angle: f64,
    pub vertex: (f64, f64),
    pub total_length: f64,
}

impl RaySpec {
    /// The down-leg and up-leg as `((x0, z0), (x1, z1))` pairs.
    pub fn segments(&self) -> [((f64, f64), (f64, f64)); 2] {
        [
            ((self.tx_x, 0.0), self.vertex),
            (self.vertex, (self.rx_x, 0.0)),
        ]
    }
}

/// `n_axial × n_lateral` cells covering `[0, aperture] × [0, depth]`.
/// Cell `(row, col)` has flat index `row * n_lateral + col`, rows along depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagingGrid {
    n_axial: usize,
    n_lateral: usize,
    width: f64,
    height: f64,
}

impl ImagingGrid {
    pub fn new(n_axial: usize, n_lateral: usize, width: f64, height: f64) -> Result<Self> {
        if n_axial == 0 || n_lateral == 0 {
            return Err(Error::invalid("grid", "N1 and N2 must be at least 1"));
        }
        if !(width >= 0.0 && width.is_finite()) || !(height > 0.0 && height.is_finite()) {
            return Err(Error::invalid(
                "grid",
                format!("extent must be finite with positive depth, got {width} x {height}"),
            ));
        }
        Ok(Self {
            n_axial,
            n_lateral,
            width,
            height,
        })
    }

    /// Grid spanning exactly the acquisition domain of `geom`.
    pub fn for_geometry(
        geom: &AcquisitionGeometry,
        n_axial: usize,
        n_lateral: usize,
    ) -> Result<Self> {
        Self::new(n_axial, n_lateral, geom.aperture(), geom.reflector_depth())
    }

    /// Same domain with each dimension multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.n_axial * factor,
            self.n_lateral * factor,
            self.width,
            self.height,
        )
    }

    pub fn n_axial(&self) -> usize {
        self.n_axial
    }

    pub fn n_lateral(&self) -> usize {
        self.n_lateral
    }

    pub fn n_cells(&self) -> usize {
        self.n_axial * self.n_lateral
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn cell_width(&self) -> f64 {
        self.width / self.n_lateral as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.height / self.n_axial as f64
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_lateral + col
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) * self.cell_width(),
            (row as f64 + 0.5) * self.cell_height(),
        )
    }

    /// Column containing `x` under half-open `[low, high)` cells; the far
    /// edge maps to the last column.
    pub fn col_of(&self, x: f64) -> usize {
        if self.width == 0.0 {
            return 0;
        }
        let c = (x / self.cell_width()).floor();
        (c.max(0.0) as usize).min(self.n_lateral - 1)
    }

    pub fn row_of(&self, z: f64) -> usize {
        let r = (z / self.cell_height()).floor();
        (r.max(0.0) as usize).min(self.n_axial - 1)
    }
}
