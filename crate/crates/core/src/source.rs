//! Where noise-free sinograms come from.
//!
//! The simulator only needs, per slice and energy bin, the noise-free line
//! integrals. Analytic phantoms provide them in closed form; any other
//! object (for example patient slices converted to per-bin attenuation by an
//! external DICOM reader) can be plugged in through [`ImageSlices`], which
//! forward projects the supplied images with the Joseph projector.

use crate::error::{Error, Result};
use crate::geometry::FanBeamGeometry;
use crate::image::{Channel, ImageGrid, Units};
use crate::materials::MaterialTable;
use crate::phantom::Phantom;
use crate::projector::{forward_project, project_phantom_analytic, Sinogram};
use crate::spectral::SpectralModel;

pub trait SliceSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn id(&self, index: usize) -> String;

    /// Noise-free line integrals of slice `index` in `bin`.
    fn sinogram(&self, index: usize, bin: usize, geom: &FanBeamGeometry, spectral: &SpectralModel) -> Result<Sinogram>;
}

pub fn phantom_id(index: usize) -> String {
    format!("phantom{index:04}")
}

/// Closed-form projections of ellipse phantoms.
pub struct AnalyticPhantoms<'a> {
    pub phantoms: &'a [Phantom],
    pub materials: &'a MaterialTable,
}

impl SliceSource for AnalyticPhantoms<'_> {
    fn len(&self) -> usize {
        self.phantoms.len()
    }

    fn id(&self, index: usize) -> String {
        phantom_id(index)
    }

    fn sinogram(&self, index: usize, bin: usize, geom: &FanBeamGeometry, spectral: &SpectralModel) -> Result<Sinogram> {
        project_phantom_analytic(&self.phantoms[index], geom, bin, spectral, self.materials)
    }
}

/// Joseph projections of rasterized ellipse phantoms.
pub struct RasterizedPhantoms<'a> {
    pub phantoms: &'a [Phantom],
    pub materials: &'a MaterialTable,
    pub raster_size: usize,
}

impl SliceSource for RasterizedPhantoms<'_> {
    fn len(&self) -> usize {
        self.phantoms.len()
    }

    fn id(&self, index: usize) -> String {
        phantom_id(index)
    }

    fn sinogram(&self, index: usize, bin: usize, geom: &FanBeamGeometry, spectral: &SpectralModel) -> Result<Sinogram> {
        let img = self.phantoms[index].rasterize(self.raster_size, bin, spectral, self.materials)?;
        Ok(forward_project(&img, geom))
    }
}

/// Externally supplied per-bin attenuation images, one `Vec` per slice.
pub struct ImageSlices {
    pub slices: Vec<(String, Vec<ImageGrid>)>,
}

impl SliceSource for ImageSlices {
    fn len(&self) -> usize {
        self.slices.len()
    }

    fn id(&self, index: usize) -> String {
        self.slices[index].0.clone()
    }

    fn sinogram(&self, index: usize, bin: usize, geom: &FanBeamGeometry, spectral: &SpectralModel) -> Result<Sinogram> {
        spectral.check_bin(bin)?;
        let (id, images) = &self.slices[index];
        let img = images
            .get(bin)
            .ok_or_else(|| Error::config(format!("slice {id} has no image for bin{}", bin + 1)))?;
        if img.units != Units::Attenuation {
            return Err(Error::config(format!("slice {id} bin{} is not an attenuation image", bin + 1)));
        }
        let mut s = forward_project(img, geom);
        s.channel = Channel::Bin(bin);
        Ok(s)
    }
}
