//! Ultrasound attenuation tomography from multistatic pulse-echo
//! reflections off a passive plate.
//!
//! The pipeline: [`geometry`] defines the array, reflector and V-shaped rays;
//! [`raypath`] discretizes them into the sparse path-length matrix `L`;
//! [`calibration`] turns tissue and water amplitude matrices into log-ratio
//! data `b`; [`recon`] solves `min ‖Lα + b‖₁ + λ‖Dα‖₁`; [`metrics`] scores the
//! result. [`simulator`] closes the loop with synthetic data.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod image;
pub mod io;
pub mod metrics;
pub mod par;
pub mod physics;
pub mod raypath;
pub mod recon;
pub mod simulator;

pub use calibration::{normalize, AmplitudeMatrix, Media, NormalizedData};
pub use error::{Error, Result};
pub use geometry::{AcquisitionGeometry, ImagingGrid, RaySpec};
pub use image::AttenuationImage;
pub use metrics::{MetricsReport, RegionMask};
pub use physics::{MediumSpec, ReflectionPair};
pub use raypath::{build_system_matrix, RayPathMatrix};
pub use recon::{solve, ConvergenceReport, ReconConfig, Reconstruction};
pub use simulator::{
    simulate_measurement, Inclusion, NoiseSpec, PhantomSpec, SimulatedAcquisition,
};
