//! Image quality metrics: MSE, RMSE, SSIM and ROI extraction.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// A rectangular row-major image without physical metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "plane data has {} values, expected {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl From<&ImageGrid> for Plane {
    fn from(img: &ImageGrid) -> Self {
        Self {
            width: img.size(),
            height: img.size(),
            data: img.data.clone(),
        }
    }
}

fn same_shape(x: &Plane, y: &Plane) -> Result<()> {
    if x.width != y.width || x.height != y.height {
        return Err(Error::shape(format!(
            "images are {}x{} and {}x{}",
            x.width, x.height, y.width, y.height
        )));
    }
    Ok(())
}

/// Mean of squared differences.
pub fn mse(x: &Plane, y: &Plane) -> Result<f64> {
    same_shape(x, y)?;
    let sum: f64 = x.data.iter().zip(&y.data).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.data.len() as f64)
}

pub fn rmse(x: &Plane, y: &Plane) -> Result<f64> {
    mse(x, y).map(f64::sqrt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Dynamic range L of the pixel values.
    pub dynamic_range: f64,
    /// Side of the square Gaussian window.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl SsimParams {
    pub fn with_range(dynamic_range: f64) -> Self {
        Self {
            dynamic_range,
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }

    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(window: usize, sigma: f64) -> Vec<f64> {
    let c = (window as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering: output is `(w - k + 1) × (h - k + 1)`.
fn filter_valid(p: &[f64], width: usize, height: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = width - k + 1;
    let oh = height - k + 1;
    let mut tmp = vec![0.0; ow * height];
    for y in 0..height {
        let row = &p[y * width..(y + 1) * width];
        for x in 0..ow {
            tmp[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Per-window SSIM map over every window position fully inside the image.
pub fn ssim_map(x: &Plane, y: &Plane, params: &SsimParams) -> Result<Plane> {
    same_shape(x, y)?;
    if !(params.dynamic_range > 0.0) {
        return Err(Error::config("SSIM dynamic range must be positive"));
    }
    let k = params.window;
    if k == 0 || k > x.width || k > x.height {
        return Err(Error::shape(format!(
            "SSIM window {k} does not fit a {}x{} image",
            x.width, x.height
        )));
    }
    let taps = gaussian_taps(k, params.sigma);
    let (w, h) = (x.width, x.height);
    let xx: Vec<f64> = x.data.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.data.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.data.iter().zip(&y.data).map(|(a, b)| a * b).collect();
    let mu_x = filter_valid(&x.data, w, h, &taps);
    let mu_y = filter_valid(&y.data, w, h, &taps);
    let e_xx = filter_valid(&xx, w, h, &taps);
    let e_yy = filter_valid(&yy, w, h, &taps);
    let e_xy = filter_valid(&xy, w, h, &taps);
    let (c1, c2) = (params.c1(), params.c2());
    let data = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let sxx = e_xx[i] - mx * mx;
            let syy = e_yy[i] - my * my;
            let sxy = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
        })
        .collect();
    Plane::new(w - k + 1, h - k + 1, data)
}

/// Mean SSIM, Gaussian window (11×11, σ = 1.5, K1 = 0.01, K2 = 0.03 by default).
pub fn ssim(x: &Plane, y: &Plane, params: &SsimParams) -> Result<f64> {
    let map = ssim_map(x, y, params)?;
    Ok(map.data.iter().sum::<f64>() / map.data.len() as f64)
}

/// Copies the `w × h` window whose top-left pixel is `(x0, y0)`.
pub fn roi(img: &Plane, x0: usize, y0: usize, w: usize, h: usize) -> Result<Plane> {
    if w == 0 || h == 0 || x0 + w > img.width || y0 + h > img.height {
        return Err(Error::shape(format!(
            "ROI {w}x{h} at ({x0}, {y0}) does not fit a {}x{} image",
            img.width, img.height
        )));
    }
    let mut data = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        data.extend_from_slice(&img.data[y * img.width + x0..y * img.width + x0 + w]);
    }
    Plane::new(w, h, data)
}

/// How to place the evaluation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiSpec {
    Full,
    /// Centred square of the given side.
    Centered(usize),
    /// Centred square scaled from 200 px on a 512 px image.
    Auto,
    Window { x0: usize, y0: usize, w: usize, h: usize },
}

impl RoiSpec {
    /// Resolves to `(x0, y0, w, h)` for a `width × height` image.
    pub fn resolve(&self, width: usize, height: usize) -> Result<(usize, usize, usize, usize)> {
        let centred = |side: usize| -> Result<(usize, usize, usize, usize)> {
            if side == 0 || side > width || side > height {
                return Err(Error::shape(format!(
                    "centred ROI of side {side} does not fit a {width}x{height} image"
                )));
            }
            Ok(((width - side) / 2, (height - side) / 2, side, side))
        };
        match *self {
            RoiSpec::Full => Ok((0, 0, width, height)),
            RoiSpec::Centered(side) => centred(side),
            RoiSpec::Auto => {
                let side = ((width.min(height) as f64) * 200.0 / 512.0).round() as usize;
                centred(side.max(1))
            }
            RoiSpec::Window { x0, y0, w, h } => Ok((x0, y0, w, h)),
        }
    }

    pub fn apply(&self, img: &Plane) -> Result<Plane> {
        let (x0, y0, w, h) = self.resolve(img.width, img.height)?;
        roi(img, x0, y0, w, h)
    }
}

impl FromStr for RoiSpec {
    type Err = Error;

    /// `full`, `auto`, `center:N`, or `x0,y0,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("invalid ROI `{s}` (use full, auto, center:N or x0,y0,w,h)"));
        match s {
            "full" => return Ok(RoiSpec::Full),
            "auto" => return Ok(RoiSpec::Auto),
            _ => {}
        }
        if let Some(n) = s.strip_prefix("center:") {
            return n.parse().map(RoiSpec::Centered).map_err(|_| bad());
        }
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        match parts[..] {
            [x0, y0, w, h] => Ok(RoiSpec::Window { x0, y0, w, h }),
            _ => Err(bad()),
        }
    }
}
