//! Attenuation ↔ density conversion around the denoiser.
//!
//! Each channel is divided by its mass attenuation coefficient before the
//! network sees it and multiplied back afterwards. One coefficient per
//! channel (water by default) is used for the whole image, so tissues other
//! than water keep a residual channel-dependent contrast.

use crate::error::{Error, Result};
use crate::image::{ImageGrid, Units};
use crate::recon::SpectralImageSet;
use crate::spectral::SpectralModel;

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("mass attenuation coefficient must be positive, got {kappa}")))
    }
}

/// cm⁻¹ → g/cm³.
pub fn attenuation_to_density(img: &ImageGrid, kappa: f64) -> Result<ImageGrid> {
    check_kappa(kappa)?;
    if img.units != Units::Attenuation {
        return Err(Error::config(format!("expected an attenuation image, got units {}", img.units)));
    }
    let mut out = img.clone();
    out.data.iter_mut().for_each(|v| *v /= kappa);
    out.units = Units::Density;
    Ok(out)
}

/// g/cm³ → cm⁻¹.
pub fn density_to_attenuation(img: &ImageGrid, kappa: f64) -> Result<ImageGrid> {
    check_kappa(kappa)?;
    if img.units != Units::Density {
        return Err(Error::config(format!("expected a density image, got units {}", img.units)));
    }
    let mut out = img.clone();
    out.data.iter_mut().for_each(|v| *v *= kappa);
    out.units = Units::Attenuation;
    Ok(out)
}

/// Converts every channel with the model's per-channel κ.
pub fn set_to_density(set: &SpectralImageSet, model: &SpectralModel) -> Result<SpectralImageSet> {
    let convert = |img: &ImageGrid| attenuation_to_density(img, model.kappa(img.channel));
    Ok(SpectralImageSet {
        singles: set.singles.iter().map(convert).collect::<Result<_>>()?,
        sum: set.sum.as_ref().map(convert).transpose()?,
    })
}

pub fn set_to_attenuation(set: &SpectralImageSet, model: &SpectralModel) -> Result<SpectralImageSet> {
    let convert = |img: &ImageGrid| density_to_attenuation(img, model.kappa(img.channel));
    Ok(SpectralImageSet {
        singles: set.singles.iter().map(convert).collect::<Result<_>>()?,
        sum: set.sum.as_ref().map(convert).transpose()?,
    })
}
