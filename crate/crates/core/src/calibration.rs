//! Water-referenced normalization of reflector-echo amplitudes.
//!
//! For each pair, `b = ln(A_meas |R_water(θ)| / (A_calib |R_tissue(θ)|))`,
//! which cancels element responses and leaves the attenuation difference
//! between the sample and water along the ray. In absolute mode the known
//! water path loss `α_water · 2d/cosθ` is subtracted so that `−b` is the
//! path integral of the sample attenuation itself.

use crate::error::{check_len, Error, Result};
use crate::geometry::AcquisitionGeometry;
use crate::par;
use crate::physics::{MediumSpec, ReflectionPair};

const DEPTH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix {
    n_elements: usize,
    values: Vec<f64>,
    pub medium: String,
    pub reflector_depth: f64,
}

impl AmplitudeMatrix {
    /// `values` is row-major in `(tx, rx)`; all entries must be finite and
    /// strictly positive.
    pub fn new(
        n_elements: usize,
        values: Vec<f64>,
        medium: impl Into<String>,
        reflector_depth: f64,
    ) -> Result<Self> {
        check_len(n_elements * n_elements, values.len(), "amplitude matrix")?;
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonPositiveAmplitude {
                tx: k / n_elements,
                rx: k % n_elements,
                value: values[k],
            });
        }
        Ok(Self {
            n_elements,
            values,
            medium: medium.into(),
            reflector_depth,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, tx: usize, rx: usize) -> f64 {
        self.values[tx * self.n_elements + rx]
    }
}

/// Calibrated log-amplitude data, one entry per ray in `(tx, rx)` order (Np).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedData {
    pub values: Vec<f64>,
    pub geometry: AcquisitionGeometry,
    pub absolute: bool,
}

impl NormalizedData {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reshapes into `n × n` rows indexed by transmit element.
    pub fn reshape_to_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.geometry.n_elements();
        self.values.chunks(n).map(<[f64]>::to_vec).collect()
    }

    /// Inverse of [`reshape_to_matrix`](Self::reshape_to_matrix).
    pub fn from_matrix(
        rows: &[Vec<f64>],
        geometry: AcquisitionGeometry,
        absolute: bool,
    ) -> Result<Self> {
        let n = geometry.n_elements();
        check_len(n, rows.len(), "normalized data rows")?;
        let mut values = Vec::with_capacity(n * n);
        for row in rows {
            check_len(n, row.len(), "normalized data columns")?;
            values.extend_from_slice(row);
        }
        Ok(Self {
            values,
            geometry,
            absolute,
        })
    }
}

/// The three media involved in a measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Media {
    pub water: MediumSpec,
    pub tissue: MediumSpec,
    pub reflector: MediumSpec,
}

impl Default for Media {
    fn default() -> Self {
        Self {
            water: MediumSpec::water(),
            tissue: MediumSpec::water(),
            reflector: MediumSpec::plexiglas(),
        }
    }
}

/// `ln(|R_water(θ)| / |R_tissue(θ)|)` per ray.
pub(crate) fn reflection_log_ratio(geom: &AcquisitionGeometry, media: &Media) -> Result<Vec<f64>> {
    let water = ReflectionPair::new(media.water, media.reflector);
    let tissue = ReflectionPair::new(media.tissue, media.reflector);
    let n = geom.n_elements();
    par::map_range(geom.n_rays(), |k| {
        let theta = geom.ray_for_pair(k / n, k % n)?.incidence_angle;
        let rw = water.reflection_coefficient(theta)?.abs();
        let rt = tissue.reflection_coefficient(theta)?.abs();
        Ok((rw / rt).ln())
    })
    .into_iter()
    .collect()
}

pub fn normalize(
    meas: &AmplitudeMatrix,
    calib: &AmplitudeMatrix,
    media: &Media,
    geom: &AcquisitionGeometry,
    absolute: bool,
) -> Result<NormalizedData> {
    let n = geom.n_elements();
    check_len(n, meas.n_elements(), "measurement elements")?;
    check_len(n, calib.n_elements(), "calibration elements")?;
    for depth in [meas.reflector_depth, calib.reflector_depth] {
        if (depth - geom.reflector_depth()).abs() > DEPTH_TOLERANCE {
            return Err(Error::DepthMismatch {
                measured: depth,
                calibration: geom.reflector_depth(),
            });
        }
    }
    let reflection = reflection_log_ratio(geom, media)?;
    let water_loss = media.water.attenuation;
    let values = par::map_range(geom.n_rays(), |k| {
        let mut b = (meas.values[k] / calib.values[k]).ln() + reflection[k];
        if absolute {
            let ray = geom.ray_for_pair(k / n, k % n).expect("ray index in range");
            b -= water_loss * ray.total_length;
        }
        b
    });
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("normalized data"));
    }
    Ok(NormalizedData {
        values,
        geometry: *geom,
        absolute,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geom(n: usize) -> AcquisitionGeometry {
        AcquisitionGeometry::new(n, 300e-6, 0.03).unwrap()
    }

    fn matrix(n: usize, seed: u64, label: &str) -> AmplitudeMatrix {
        let values = (0..n * n)
            .map(|k| 0.05 + ((k as u64 * 2654435761 + seed * 97) % 1000) as f64 / 1000.0)
            .collect();
        AmplitudeMatrix::new(n, values, label, 0.03).unwrap()
    }

    #[test]
    fn self_calibration_is_zero() {
        let g = geom(16);
        let a = matrix(16, 3, "water");
        let b = normalize(&a, &a, &Media::default(), &g, false).unwrap();
        assert!(b.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn absolute_offset_at_normal_incidence() {
        let g = geom(4);
        let a = matrix(4, 1, "water");
        let b = normalize(&a, &a, &Media::default(), &g, true).unwrap();
        // 0.05 Np/cm over 2 × 30 mm
        assert_relative_eq!(b.values[0], -0.30, max_relative = 1e-14);
        assert_relative_eq!(b.values[5], -0.30, max_relative = 1e-14);
        assert!(b.values[3] < -0.30);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            AmplitudeMatrix::new(2, vec![1.0, 0.0, 1.0, 1.0], "x", 0.03),
            Err(Error::NonPositiveAmplitude { tx: 0, rx: 1, .. })
        ));
        assert!(AmplitudeMatrix::new(2, vec![1.0; 3], "x", 0.03).is_err());

        let g = geom(4);
        let a = matrix(4, 1, "tissue");
        let mut c = matrix(4, 2, "water");
        c.reflector_depth = 0.031;
        assert!(matches!(
            normalize(&a, &c, &Media::default(), &g, false),
            Err(Error::DepthMismatch { .. })
        ));
    }

    #[test]
    fn critical_angle_propagates() {
        // A reflector slower than the tissue has a critical angle.
        let media = Media {
            reflector: MediumSpec::new(800.0, 1180.0, 0.0).unwrap(),
            ..Media::default()
        };
        let g = AcquisitionGeometry::new(64, 1e-3, 0.01).unwrap();
        let a = matrix(64, 1, "tissue");
        let mut c = a.clone();
        c.reflector_depth = 0.01;
        let mut a = a;
        a.reflector_depth = 0.01;
        assert!(matches!(
            normalize(&a, &c, &media, &g, false),
            Err(Error::CriticalAngle { .. })
        ));
    }

    #[test]
    fn reshape_layout() {
        let g = geom(2);
        let data = NormalizedData {
            values: vec![1.0, 2.0, 3.0, 4.0],
            geometry: g,
            absolute: false,
        };
        let m = data.reshape_to_matrix();
        assert_eq!(m, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(NormalizedData::from_matrix(&m, g, false).unwrap(), data);
        assert_eq!(
            NormalizedData {
                values: vec![0.0; 128 * 128],
                geometry: geom(128),
                absolute: true
            }
            .reshape_to_matrix()
            .len(),
            128
        );
    }

    proptest! {
        #[test]
        fn swap_antisymmetry(seed_a in 0u64..1000, seed_b in 0u64..1000, c in 1400.0f64..1650.0) {
            let g = geom(6);
            let a = matrix(6, seed_a, "tissue");
            let w = matrix(6, seed_b, "water");
            let tissue = MediumSpec::new(c, 1000.0, 0.0).unwrap();
            let forward = Media { tissue, ..Media::default() };
            let swapped = Media { water: tissue, tissue: MediumSpec::water(), ..Media::default() };
            let b1 = normalize(&a, &w, &forward, &g, false).unwrap();
            let b2 = normalize(&w, &a, &swapped, &g, false).unwrap();
            for (x, y) in b1.values.iter().zip(&b2.values) {
                prop_assert!((x + y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
