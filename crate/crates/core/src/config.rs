//! Top-level run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::DatasetSettings;
use crate::error::{Error, Result};
use crate::geometry::FanBeamGeometry;
use crate::materials::MaterialTable;
use crate::phantom::PhantomFamily;
use crate::recon::ReconGrid;
use crate::spectral::SpectralModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    /// Number of generated phantoms (ignored when `files` is set).
    pub count: usize,
    /// Side of the phantom's square field of view, cm.
    pub field_of_view: f64,
    pub family: PhantomFamily,
    /// Explicit phantom description files instead of generated ones.
    pub files: Option<Vec<PathBuf>>,
    /// Materials file; the bundled table when absent.
    pub materials: Option<PathBuf>,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            count: 4,
            field_of_view: 51.2,
            family: PhantomFamily::default(),
            files: None,
            materials: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectorKind {
    /// Closed-form line integrals of the ellipses.
    #[default]
    Analytic,
    /// Joseph projection of the rasterized phantom.
    Joseph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Independent noise realizations per phantom (N2N needs two).
    pub realizations: usize,
    pub projector: ProjectorKind,
    /// Raster grid for the Joseph path.
    pub raster_size: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            realizations: 2,
            projector: ProjectorKind::Analytic,
            raster_size: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub geometry: FanBeamGeometry,
    pub spectral: SpectralModel,
    pub phantom: PhantomConfig,
    pub simulation: SimulationConfig,
    pub recon: ReconGrid,
    pub dataset: DatasetSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            geometry: FanBeamGeometry::default(),
            spectral: SpectralModel::default(),
            phantom: PhantomConfig::default(),
            simulation: SimulationConfig::default(),
            recon: ReconGrid::default(),
            dataset: DatasetSettings::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::config(format!("config file {} not found", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// A small configuration for quick runs: 128 views, 128 detectors at
    /// 0.4 cm, 128² images.
    pub fn desk_scale() -> Self {
        let mut c = Self::default();
        c.geometry.num_detectors = 128;
        c.geometry.detector_pitch = 0.4;
        c.geometry.num_views = 128;
        c.recon.grid_size = 128;
        c.recon.fov = 51.2;
        c
    }

    pub fn materials(&self) -> Result<MaterialTable> {
        let table = match &self.phantom.materials {
            Some(p) => MaterialTable::load(p)?,
            None => MaterialTable::bundled(),
        };
        table.validate_bins(self.spectral.num_bins())?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.spectral.validate()?;
        self.recon.validate()?;
        self.phantom.family.validate()?;
        self.dataset.ratios.normalized()?;
        if self.simulation.realizations == 0 {
            return Err(Error::config("simulation.realizations must be at least 1"));
        }
        if self.simulation.raster_size < 16 {
            return Err(Error::config("simulation.raster_size must be at least 16"));
        }
        if self.phantom.files.is_none() && self.phantom.count == 0 {
            return Err(Error::config("phantom.count must be at least 1"));
        }
        Ok(())
    }

    pub fn geometry_hash(&self) -> String {
        hash_json(&self.geometry)
    }

    pub fn spectral_hash(&self) -> String {
        hash_json(&self.spectral)
    }
}

/// First 16 hex digits of the SHA-256 of the compact JSON form.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
