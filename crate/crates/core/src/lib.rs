//! Photon-counting spectral CT workbench.
//!
//! Simulates multi-bin photon-counting scans of analytic phantoms,
//! reconstructs them with fan-beam FBP, converts between attenuation and
//! density, assembles training sets for multi-channel self-supervised
//! denoising (and the Noise2Noise / Noise2Clean baselines), and scores
//! denoised images with SSIM and RMSE.

pub mod cli;
pub mod config;
pub mod convert;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod image;
pub mod materials;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod plot;
pub mod projector;
pub mod recon;
pub mod rng;
pub mod source;
pub mod spectral;
pub mod tensor;

pub use config::Config;
pub use dataset::{DatasetManifest, Mode, SampleRecord};
pub use error::{Error, Result};
pub use geometry::{make_geometry, FanBeamGeometry, GeometryOverrides, Ray};
pub use image::{Channel, ImageGrid, Units};
pub use materials::{Material, MaterialTable};
pub use metrics::{Plane, RoiSpec, SsimParams};
pub use phantom::{Ellipse, Phantom, PhantomFamily};
pub use projector::{forward_project, project_phantom_analytic, Sinogram};
pub use recon::{fbp, reconstruct_all_channels, reconstruct_noiseless, Filter, ReconGrid, SpectralImageSet};
pub use spectral::{CountsFrame, DrawOptions, SpectralModel};
