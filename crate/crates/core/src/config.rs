//! Experiment configuration: TOML sections of `key = value` pairs with units
//! in the key names. Every field has a default, so a file only needs the
//! values it changes; command-line flags are applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::Media;
use crate::error::{Error, Result};
use crate::geometry::{AcquisitionGeometry, ImagingGrid};
use crate::physics::{db_per_cm_to_np_per_m, np_per_m_to_db_per_cm, MediumSpec};
use crate::recon::{GradientWeights, ReconConfig};
use crate::simulator::NoiseSpec;

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "UATOMO_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryBlock {
    pub n_elements: usize,
    pub pitch_m: f64,
    pub reflector_depth_m: f64,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        Self {
            n_elements: 128,
            pitch_m: 300e-6,
            reflector_depth_m: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub n_axial: usize,
    pub n_lateral: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            n_axial: 64,
            n_lateral: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumBlock {
    /// `None` only for tissue: falls back to water's speed of sound.
    #[serde(default)]
    pub speed_m_s: Option<f64>,
    #[serde(default = "default_density")]
    pub density_kg_m3: f64,
    #[serde(default)]
    pub attenuation_db_cm: f64,
}

fn default_density() -> f64 {
    1000.0
}

impl MediumBlock {
    fn from_medium(m: MediumSpec) -> Self {
        Self {
            speed_m_s: Some(m.speed_of_sound),
            density_kg_m3: m.density,
            attenuation_db_cm: np_per_m_to_db_per_cm(m.attenuation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediaBlock {
    pub water: MediumBlock,
    pub tissue: MediumBlock,
    pub reflector: MediumBlock,
}

impl Default for MediaBlock {
    fn default() -> Self {
        Self {
            water: MediumBlock::from_medium(MediumSpec::water()),
            tissue: MediumBlock {
                speed_m_s: None,
                density_kg_m3: 1000.0,
                attenuation_db_cm: 0.0,
            },
            reflector: MediumBlock::from_medium(MediumSpec::plexiglas()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconBlock {
    pub lambda: f64,
    pub kappa_horizontal: f64,
    pub kappa_vertical: f64,
    pub kappa_diagonal: f64,
    pub kappa_anti_diagonal: f64,
    /// Np; unset means `1e-6 · median |b|`.
    pub epsilon: Option<f64>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub progress_tolerance: f64,
    pub memory: usize,
    pub continuation: bool,
}

impl Default for ReconBlock {
    fn default() -> Self {
        let r = ReconConfig::default();
        Self {
            lambda: r.lambda,
            kappa_horizontal: r.weights.horizontal,
            kappa_vertical: r.weights.vertical,
            kappa_diagonal: r.weights.diagonal,
            kappa_anti_diagonal: r.weights.anti_diagonal,
            epsilon: r.epsilon,
            max_iterations: r.max_iterations,
            gradient_tolerance: r.gradient_tolerance,
            progress_tolerance: r.progress_tolerance,
            memory: r.memory,
            continuation: r.continuation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBlock {
    /// Fraction of `max |b|`, e.g. 0.05 for 5 %.
    pub level: f64,
    pub seed: u64,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        Self {
            level: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationBlock {
    /// The forward model runs on a grid this many times finer per axis.
    pub refine: usize,
    /// Recorded in metadata only; the ray model has no pulse shape.
    pub center_frequency_hz: f64,
    pub pulse_half_cycles: u32,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            refine: 1,
            center_frequency_hz: 5e6,
            pulse_half_cycles: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationBlock {
    pub absolute: bool,
}

impl Default for CalibrationBlock {
    fn default() -> Self {
        Self { absolute: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub levels: Vec<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            levels: vec![0.0, 0.025, 0.05, 0.075, 0.10, 0.13],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    /// Write matrices and images as `.bin` + `.hdr` instead of text.
    pub binary: bool,
    pub pgm: bool,
    /// dB/cm range mapped to black..white.
    pub pgm_window_db_cm: [f64; 2],
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            binary: false,
            pgm: true,
            pgm_window_db_cm: [0.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsBlock {
    pub phantom: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub tissue: Option<PathBuf>,
    pub water: Option<PathBuf>,
    pub recon: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryBlock,
    pub grid: GridBlock,
    pub media: MediaBlock,
    pub recon: ReconBlock,
    pub noise: NoiseBlock,
    pub simulation: SimulationBlock,
    pub calibration: CalibrationBlock,
    pub sweep: SweepBlock,
    pub output: OutputBlock,
    pub paths: PathsBlock,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn geometry(&self) -> Result<AcquisitionGeometry> {
        let g = &self.geometry;
        AcquisitionGeometry::new(g.n_elements, g.pitch_m, g.reflector_depth_m)
    }

    pub fn grid(&self) -> Result<ImagingGrid> {
        ImagingGrid::for_geometry(&self.geometry()?, self.grid.n_axial, self.grid.n_lateral)
    }

    pub fn simulation_grid(&self) -> Result<ImagingGrid> {
        if self.simulation.refine == 0 {
            return Err(Error::Config("simulation.refine must be at least 1".into()));
        }
        self.grid()?.refined(self.simulation.refine)
    }

    pub fn media(&self) -> Result<Media> {
        let m = &self.media;
        let water_speed = m
            .water
            .speed_m_s
            .ok_or_else(|| Error::Config("media.water.speed_m_s is required".into()))?;
        let reflector_speed = m
            .reflector
            .speed_m_s
            .ok_or_else(|| Error::Config("media.reflector.speed_m_s is required".into()))?;
        let tissue_speed = m.tissue.speed_m_s.unwrap_or_else(|| {
            log::warn!(
                "tissue speed of sound not set; using water's {water_speed} m/s \
                 (reflection-coefficient correction becomes a no-op)"
            );
            water_speed
        });
        let medium = |speed: f64, block: &MediumBlock| {
            MediumSpec::new(
                speed,
                block.density_kg_m3,
                db_per_cm_to_np_per_m(block.attenuation_db_cm),
            )
        };
        Ok(Media {
            water: medium(water_speed, &m.water)?,
            tissue: medium(tissue_speed, &m.tissue)?,
            reflector: medium(reflector_speed, &m.reflector)?,
        })
    }

    pub fn recon_config(&self) -> ReconConfig {
        let r = &self.recon;
        ReconConfig {
            lambda: r.lambda,
            weights: GradientWeights {
                horizontal: r.kappa_horizontal,
                vertical: r.kappa_vertical,
                diagonal: r.kappa_diagonal,
                anti_diagonal: r.kappa_anti_diagonal,
            },
            epsilon: r.epsilon,
            max_iterations: r.max_iterations,
            gradient_tolerance: r.gradient_tolerance,
            progress_tolerance: r.progress_tolerance,
            memory: r.memory,
            continuation: r.continuation,
        }
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.noise.level, self.noise.seed)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Extension for matrix/image outputs.
    pub fn data_extension(&self) -> &'static str {
        if self.output.binary {
            "bin"
        } else {
            "txt"
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.geometry().unwrap().n_rays(), 16384);
        let media = cfg.media().unwrap();
        assert_relative_eq!(media.water.attenuation, 5.0, max_relative = 1e-14);
        assert_eq!(media.tissue.speed_of_sound, 1482.5);
        assert_eq!(cfg.recon_config(), ReconConfig::default());
    }

    #[test]
    fn partial_override() {
        let cfg = ExperimentConfig::from_toml(
            "[geometry]\nreflector_depth_m = 0.046\n[media.tissue]\nspeed_m_s = 1540.0\n[recon]\nlambda = 1.5\n",
        )
        .unwrap();
        assert_eq!(cfg.geometry.n_elements, 128);
        assert_eq!(cfg.geometry.reflector_depth_m, 0.046);
        assert_eq!(cfg.media().unwrap().tissue.speed_of_sound, 1540.0);
        assert_eq!(cfg.recon_config().lambda, 1.5);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(matches!(
            ExperimentConfig::from_toml("[geometry]\nelements = 3\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn serialized_defaults_reload() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
