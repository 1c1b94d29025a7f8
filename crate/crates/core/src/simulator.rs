//! Ground-truth phantoms and synthetic multistatic acquisitions from the
//! straight-ray Beer–Lambert model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calibration::{reflection_log_ratio, AmplitudeMatrix, Media};
use crate::error::{check_len, Error, Result};
use crate::geometry::{AcquisitionGeometry, ImagingGrid};
use crate::image::AttenuationImage;
use crate::metrics::RegionMask;
use crate::par;
use crate::physics::{db_per_cm_to_np_per_m, forward_amplitude, ReflectionPair};
use crate::raypath::RayPathMatrix;

/// Shapes may overhang the domain edge by this much (m) to absorb rounding
/// in hand-written spec files.
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Inclusion {
    Ellipse {
        /// `(x, z)` in m
        center: [f64; 2],
        /// lateral and axial semi-axes in m
        semi_axes: [f64; 2],
        attenuation_db_cm: f64,
    },
    Rectangle {
        center: [f64; 2],
        /// lateral and axial half-widths in m
        half_size: [f64; 2],
        attenuation_db_cm: f64,
    },
}

impl Inclusion {
    pub fn circle(center: [f64; 2], radius: f64, attenuation_db_cm: f64) -> Self {
        Inclusion::Ellipse {
            center,
            semi_axes: [radius, radius],
            attenuation_db_cm,
        }
    }

    pub fn attenuation_db_cm(&self) -> f64 {
        match *self {
            Inclusion::Ellipse {
                attenuation_db_cm, ..
            }
            | Inclusion::Rectangle {
                attenuation_db_cm, ..
            } => attenuation_db_cm,
        }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        match *self {
            Inclusion::Ellipse {
                center, semi_axes, ..
            } => {
                let u = (x - center[0]) / semi_axes[0];
                let v = (z - center[1]) / semi_axes[1];
                u * u + v * v <= 1.0
            }
            Inclusion::Rectangle {
                center, half_size, ..
            } => (x - center[0]).abs() <= half_size[0] && (z - center[1]).abs() <= half_size[1],
        }
    }

    fn extent(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Inclusion::Ellipse {
                center, semi_axes, ..
            } => (center, semi_axes),
            Inclusion::Rectangle {
                center, half_size, ..
            } => (center, half_size),
        }
    }
}

/// Declarative phantom: a background plus inclusions, later ones on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub background_db_cm: f64,
    #[serde(default, rename = "inclusion")]
    pub inclusions: Vec<Inclusion>,
}

impl PhantomSpec {
    pub fn homogeneous(background_db_cm: f64) -> Self {
        Self {
            background_db_cm,
            inclusions: Vec::new(),
        }
    }

    pub fn with(mut self, inclusion: Inclusion) -> Self {
        self.inclusions.push(inclusion);
        self
    }

    pub fn validate(&self, grid: &ImagingGrid) -> Result<()> {
        let check_att = |v: f64| v >= 0.0 && v.is_finite();
        if !check_att(self.background_db_cm) {
            return Err(Error::invalid(
                "phantom",
                format!("background attenuation {}", self.background_db_cm),
            ));
        }
        for (index, inc) in self.inclusions.iter().enumerate() {
            if !check_att(inc.attenuation_db_cm()) {
                return Err(Error::invalid(
                    "phantom",
                    format!("inclusion {index} attenuation {}", inc.attenuation_db_cm()),
                ));
            }
            let (c, half) = inc.extent();
            if !(half[0] > 0.0 && half[1] > 0.0) {
                return Err(Error::invalid(
                    "phantom",
                    format!("inclusion {index} has empty extent"),
                ));
            }
            let inside = c[0] - half[0] >= -DOMAIN_SLACK
                && c[0] + half[0] <= grid.width() + DOMAIN_SLACK
                && c[1] - half[1] >= -DOMAIN_SLACK
                && c[1] + half[1] <= grid.height() + DOMAIN_SLACK;
            if !inside {
                return Err(Error::ShapeOutsideDomain { index });
            }
        }
        Ok(())
    }

    /// Center-sampled rasterization, Np/m.
    pub fn rasterize(&self, grid: &ImagingGrid) -> Result<AttenuationImage> {
        self.validate(grid)?;
        let background = db_per_cm_to_np_per_m(self.background_db_cm);
        let values = par::map_range(grid.n_cells(), |k| {
            let (x, z) = grid.cell_center(k / grid.n_lateral(), k % grid.n_lateral());
            self.inclusions
                .iter()
                .rev()
                .find(|inc| inc.contains(x, z))
                .map_or(background, |inc| {
                    db_per_cm_to_np_per_m(inc.attenuation_db_cm())
                })
        });
        AttenuationImage::new(*grid, values)
    }

    /// Cells whose center lies in any inclusion.
    pub fn inclusion_mask(&self, grid: &ImagingGrid) -> Result<RegionMask> {
        self.validate(grid)?;
        let cells = par::map_range(grid.n_cells(), |k| {
            let (x, z) = grid.cell_center(k / grid.n_lateral(), k % grid.n_lateral());
            self.inclusions.iter().any(|inc| inc.contains(x, z))
        });
        RegionMask::new(*grid, cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation as a fraction of `max |b|`.
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::invalid(
                "noise",
                format!("level must be >= 0, got {level}"),
            ));
        }
        Ok(Self { level, seed })
    }

    /// Standard-normal draw for `ray`. Each ray gets its own ChaCha stream,
    /// so the draw depends only on `(seed, ray)`.
    pub fn standard_normal(&self, ray: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(ray as u64);
        StandardNormal.sample(&mut rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedAcquisition {
    pub tissue: AmplitudeMatrix,
    pub water: AmplitudeMatrix,
    /// `max |b|` of the noiseless absolute log-ratio data, Np.
    pub reference_scale: f64,
    /// Noise standard deviation actually applied, Np.
    pub noise_sigma: f64,
}

/// Tissue-like and water-like amplitude matrices with unit `A0` and `S`.
///
/// The water-like matrix propagates through a uniform `α_water` image on the
/// same discretization as the tissue. Noise is added to the normalized log
/// ratio `b` and folded back into the tissue amplitudes.
pub fn simulate_measurement(
    alpha: &AttenuationImage,
    l: &RayPathMatrix,
    geom: &AcquisitionGeometry,
    media: &Media,
    noise: &NoiseSpec,
) -> Result<SimulatedAcquisition> {
    check_len(geom.n_rays(), l.n_rays(), "rays in L vs geometry")?;
    check_len(l.n_cells(), alpha.values().len(), "phantom cells vs L")?;
    let n = geom.n_elements();
    let depth = geom.reflector_depth();

    let tissue_integral = l.apply(alpha.values())?;
    let water_image = vec![media.water.attenuation; l.n_cells()];
    let water_integral = l.apply(&water_image)?;

    let water_pair = ReflectionPair::new(media.water, media.reflector);
    let tissue_pair = ReflectionPair::new(media.tissue, media.reflector);
    let reflections: Vec<(f64, f64)> = par::map_range(geom.n_rays(), |k| {
        let theta = geom.ray_for_pair(k / n, k % n)?.incidence_angle;
        Ok((
            water_pair.reflection_coefficient(theta)?,
            tissue_pair.reflection_coefficient(theta)?,
        ))
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let water_values = par::map_range(geom.n_rays(), |k| {
        forward_amplitude(water_integral[k], reflections[k].0, 1.0, 1.0)
    });

    let reference_scale = tissue_integral.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise_sigma = noise.level * reference_scale;

    let tissue_values = if noise_sigma > 0.0 {
        let log_ratio = reflection_log_ratio(geom, media)?;
        par::map_range(geom.n_rays(), |k| {
            // water-relative b, perturbed, then inverted back to an amplitude
            let b = water_integral[k] - tissue_integral[k];
            let b_noisy = b + noise_sigma * noise.standard_normal(k);
            water_values[k] * (b_noisy - log_ratio[k]).exp()
        })
    } else {
        par::map_range(geom.n_rays(), |k| {
            forward_amplitude(tissue_integral[k], reflections[k].1, 1.0, 1.0)
        })
    };

    Ok(SimulatedAcquisition {
        tissue: AmplitudeMatrix::new(n, tissue_values, "tissue", depth)?,
        water: AmplitudeMatrix::new(n, water_values, "water", depth)?,
        reference_scale,
        noise_sigma,
    })
}
