//! Sinograms and fan-beam forward projection.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{FanBeamGeometry, Ray};
use crate::image::{Channel, ImageGrid};
use crate::materials::MaterialTable;
use crate::phantom::Phantom;
use crate::spectral::SpectralModel;

/// Line integrals, `views × detectors`, row-major by view.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub views: usize,
    pub detectors: usize,
    pub data: Vec<f64>,
    pub channel: Channel,
}

impl Sinogram {
    pub fn new(views: usize, detectors: usize, data: Vec<f64>, channel: Channel) -> Result<Self> {
        if data.len() != views * detectors {
            return Err(Error::shape(format!(
                "sinogram data has {} values, expected {views}x{detectors}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "sinogram entry ({}, {}) is not finite",
                i / detectors.max(1),
                i % detectors.max(1)
            )));
        }
        Ok(Self {
            views,
            detectors,
            data,
            channel,
        })
    }

    pub fn zeros(geom: &FanBeamGeometry, channel: Channel) -> Self {
        Self {
            views: geom.num_views,
            detectors: geom.num_detectors,
            data: vec![0.0; geom.num_views * geom.num_detectors],
            channel,
        }
    }

    #[inline]
    pub fn get(&self, view: usize, det: usize) -> f64 {
        self.data[view * self.detectors + det]
    }

    pub fn row(&self, view: usize) -> &[f64] {
        &self.data[view * self.detectors..(view + 1) * self.detectors]
    }

    pub fn same_shape(&self, other: &Sinogram) -> bool {
        self.views == other.views && self.detectors == other.detectors
    }

    pub fn check_geometry(&self, geom: &FanBeamGeometry) -> Result<()> {
        if self.views != geom.num_views || self.detectors != geom.num_detectors {
            return Err(Error::shape(format!(
                "sinogram is {}x{} but the geometry has {} views x {} detectors",
                self.views, self.detectors, geom.num_views, geom.num_detectors
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.data.iter_mut().for_each(|v| *v *= factor);
        s
    }

    /// Circularly shifts the views by `shift` (view v moves to v + shift).
    pub fn roll_views(&self, shift: usize) -> Self {
        let mut s = self.clone();
        let n = self.views;
        for v in 0..n {
            let dst = (v + shift) % n;
            s.data[dst * self.detectors..(dst + 1) * self.detectors].copy_from_slice(self.row(v));
        }
        s
    }
}

fn project_with<F>(geom: &FanBeamGeometry, channel: Channel, integrate: F) -> Sinogram
where
    F: Fn(&Ray) -> f64 + Sync,
{
    let dets = geom.num_detectors;
    let norm = 1.0 / geom.oversample as f64;
    let mut data = vec![0.0; geom.num_views * dets];
    data.par_chunks_mut(dets).enumerate().for_each(|(view, row)| {
        for (det, out) in row.iter_mut().enumerate() {
            *out = geom.element_rays(view, det).map(|r| integrate(&r)).sum::<f64>() * norm;
        }
    });
    Sinogram {
        views: geom.num_views,
        detectors: dets,
        data,
        channel,
    }
}

/// Joseph projection of `image` (cm⁻¹) along every scanner ray.
pub fn forward_project(image: &ImageGrid, geom: &FanBeamGeometry) -> Sinogram {
    project_with(geom, image.channel, |ray| joseph_ray(image, ray))
}

/// Line integral of `image` along `ray` with Joseph's method: step one pixel
/// at a time along the dominant axis and interpolate linearly across the
/// other. Samples past the image edge interpolate towards zero.
pub fn joseph_ray(image: &ImageGrid, ray: &Ray) -> f64 {
    let n = image.size();
    let h = image.pitch();
    let half = 0.5 * image.fov();
    let [ox, oy] = ray.origin;
    let [dx, dy] = ray.dir;
    // Swap roles so the loop always walks the dominant axis.
    let (along_x, o_main, o_cross, d_main, d_cross) = if dx.abs() >= dy.abs() {
        (true, ox, oy, dx, dy)
    } else {
        (false, oy, ox, dy, dx)
    };
    if d_main == 0.0 {
        return 0.0;
    }
    let slope = d_cross / d_main;
    let data = &image.data;
    let mut sum = 0.0;
    for i in 0..n {
        let m = (i as f64 + 0.5) * h - half;
        let t = (m - o_main) / d_main;
        if t < 0.0 {
            continue;
        }
        let c = o_cross + (m - o_main) * slope;
        let r = (c + half) / h - 0.5;
        if r <= -1.0 || r >= n as f64 {
            continue;
        }
        let j0 = r.floor();
        let f = r - j0;
        let j0 = j0 as isize;
        let fetch = |j: isize| -> f64 {
            if j < 0 || j >= n as isize {
                0.0
            } else if along_x {
                data[j as usize * n + i]
            } else {
                data[i * n + j as usize]
            }
        };
        sum += (1.0 - f) * fetch(j0) + f * fetch(j0 + 1);
    }
    sum * h / d_main.abs()
}

/// Exact noise-free sinogram of an analytic phantom in one bin.
pub fn project_phantom_analytic(
    phantom: &Phantom,
    geom: &FanBeamGeometry,
    bin: usize,
    spectral: &SpectralModel,
    materials: &MaterialTable,
) -> Result<Sinogram> {
    let mu = phantom.attenuations(bin, spectral, materials)?;
    Ok(project_with(geom, Channel::Bin(bin), |ray| phantom.line_integral_with(ray, &mu)))
}
