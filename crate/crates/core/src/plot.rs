//! Grayscale PNG rendering with a display window.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::metrics::Plane;

/// Maps `[lo, hi]` linearly onto 0..=255, clamping outside values.
pub fn render(plane: &Plane, window: (f64, f64)) -> Result<GrayImage> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::config(format!("display window [{lo}, {hi}] is empty")));
    }
    let mut img = GrayImage::new(plane.width as u32, plane.height as u32);
    for y in 0..plane.height {
        for x in 0..plane.width {
            let t = ((plane.get(x, y) - lo) / (hi - lo)).clamp(0.0, 1.0);
            // Row 0 holds the smallest y; flip so +y points up on screen.
            img.put_pixel(x as u32, (plane.height - 1 - y) as u32, Luma([(t * 255.0).round() as u8]));
        }
    }
    Ok(img)
}

/// Places planes of equal height side by side.
pub fn tile(planes: &[Plane]) -> Result<Plane> {
    let first = planes.first().ok_or_else(|| Error::shape("nothing to tile"))?;
    if planes.iter().any(|p| p.height != first.height) {
        return Err(Error::shape("tiled planes must share a height"));
    }
    let width: usize = planes.iter().map(|p| p.width).sum();
    let mut data = Vec::with_capacity(width * first.height);
    for y in 0..first.height {
        for p in planes {
            data.extend_from_slice(&p.data[y * p.width..(y + 1) * p.width]);
        }
    }
    Plane::new(width, first.height, data)
}

pub fn min_max(plane: &Plane) -> (f64, f64) {
    let lo = plane.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plane.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

pub fn save_png(plane: &Plane, window: (f64, f64), path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    render(plane, window)?
        .save(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}
