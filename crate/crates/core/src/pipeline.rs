//! In-memory simulation chain: noise-free sinograms, photon counts, per
//! channel reconstructions, datasets.

use std::path::Path;

use rayon::prelude::*;

use crate::config::{Config, ProjectorKind};
use crate::dataset::{write_dataset, DatasetManifest, DatasetProvenance, Mode, PhantomImages, Reconstruction};
use crate::error::{Error, Result};
use crate::materials::MaterialTable;
use crate::phantom::Phantom;
use crate::projector::Sinogram;
use crate::recon::{reconstruct_all_channels, reconstruct_noiseless};
use crate::rng::{derive_key, stream};
use crate::source::{AnalyticPhantoms, RasterizedPhantoms, SliceSource};
use crate::spectral::{draw_counts, expected_counts, CountsFrame, DrawOptions};

/// Noise seed of realization `r` of slice `index`.
pub fn realization_seed(master: u64, index: usize, r: usize) -> u64 {
    derive_key(&[master, stream::REALIZATION, index as u64, r as u64])
}

/// Generated phantoms (or the configured phantom files).
pub fn phantoms(cfg: &Config) -> Result<Vec<Phantom>> {
    let list = match &cfg.phantom.files {
        Some(files) => files.iter().map(|p| Phantom::load(p)).collect::<Result<Vec<_>>>()?,
        None => (0..cfg.phantom.count)
            .map(|i| {
                let mut fam = cfg.phantom.family.clone();
                fam.max_radius = fam.max_radius.min(0.95 * cfg.geometry.scan_radius());
                fam.generate(cfg.seed, i as u64, cfg.phantom.field_of_view)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let scan = cfg.geometry.scan_radius();
    for (i, p) in list.iter().enumerate() {
        if p.radius() > scan {
            return Err(Error::config(format!(
                "phantom {i} reaches {:.2} cm but the scanner only sees {:.2} cm from the centre",
                p.radius(),
                scan
            )));
        }
    }
    Ok(list)
}

pub fn source<'a>(cfg: &Config, phantoms: &'a [Phantom], materials: &'a MaterialTable) -> Box<dyn SliceSource + 'a> {
    match cfg.simulation.projector {
        ProjectorKind::Analytic => Box::new(AnalyticPhantoms { phantoms, materials }),
        ProjectorKind::Joseph => Box::new(RasterizedPhantoms {
            phantoms,
            materials,
            raster_size: cfg.simulation.raster_size,
        }),
    }
}

/// Noise-free sinograms and noisy counts of one slice.
#[derive(Debug, Clone)]
pub struct SimulatedSlice {
    pub id: String,
    pub index: usize,
    pub noiseless: Vec<Sinogram>,
    /// `frames[r][k]`: realization `r`, bin `k`.
    pub frames: Vec<Vec<CountsFrame>>,
}

pub fn noiseless_sinograms(cfg: &Config, src: &dyn SliceSource, index: usize) -> Result<Vec<Sinogram>> {
    (0..cfg.spectral.num_bins())
        .map(|k| src.sinogram(index, k, &cfg.geometry, &cfg.spectral))
        .collect()
}

pub fn simulate_slice(cfg: &Config, src: &dyn SliceSource, index: usize) -> Result<SimulatedSlice> {
    let noiseless = noiseless_sinograms(cfg, src, index)?;
    let frames = (0..cfg.simulation.realizations)
        .map(|r| {
            let seed = realization_seed(cfg.seed, index, r);
            noiseless
                .iter()
                .enumerate()
                .map(|(k, s)| draw_counts(&expected_counts(s, &cfg.spectral, k)?, seed, DrawOptions::default()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulatedSlice {
        id: src.id(index),
        index,
        noiseless,
        frames,
    })
}

/// Reconstructs every realization and the noise-free reference.
pub fn reconstruct_slice(cfg: &Config, sim: &SimulatedSlice) -> Result<PhantomImages> {
    let noisy = sim
        .frames
        .iter()
        .enumerate()
        .map(|(r, frames)| {
            Ok(Reconstruction {
                phantom_id: sim.id.clone(),
                seed: Some(realization_seed(cfg.seed, sim.index, r)),
                images: reconstruct_all_channels(frames, &cfg.spectral, &cfg.geometry, &cfg.recon)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clean = Reconstruction {
        phantom_id: sim.id.clone(),
        seed: None,
        images: reconstruct_noiseless(&sim.noiseless, &cfg.spectral, &cfg.geometry, &cfg.recon)?,
    };
    Ok(PhantomImages {
        phantom_id: sim.id.clone(),
        noisy,
        clean: Some(clean),
    })
}

/// Simulates and reconstructs every slice of `src`, in parallel over slices.
pub fn simulate_and_reconstruct(cfg: &Config, src: &dyn SliceSource) -> Result<Vec<PhantomImages>> {
    (0..src.len())
        .into_par_iter()
        .map(|i| reconstruct_slice(cfg, &simulate_slice(cfg, src, i)?))
        .collect()
}

pub fn provenance(cfg: &Config) -> DatasetProvenance {
    DatasetProvenance {
        master_seed: cfg.seed,
        geometry_hash: cfg.geometry_hash(),
        spectral_hash: cfg.spectral_hash(),
    }
}

/// Phantoms → counts → images → dataset files in `out_dir`, all in memory.
pub fn build_dataset(cfg: &Config, mode: Mode, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let materials = cfg.materials()?;
    let phantoms = phantoms(cfg)?;
    let src = source(cfg, &phantoms, &materials);
    let images = simulate_and_reconstruct(cfg, src.as_ref())?;
    write_dataset(out_dir, mode, &images, &cfg.spectral, &cfg.dataset, &provenance(cfg))
}
