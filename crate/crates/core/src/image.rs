//! Square image grids with physical units and channel tags.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spectral channel of a sinogram or image.
///
/// Bins are indexed from zero in code; their text form is one-based
/// (`bin1` .. `binE`) to match how energy channels are usually numbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Bin(usize),
    Sum,
}

impl Channel {
    pub fn bin_index(self) -> Option<usize> {
        match self {
            Channel::Bin(k) => Some(k),
            Channel::Sum => None,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Bin(k) => write!(f, "bin{}", k + 1),
            Channel::Sum => f.write_str("sum"),
        }
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "sum" {
            return Ok(Channel::Sum);
        }
        s.strip_prefix("bin")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .map(|n| Channel::Bin(n - 1))
            .ok_or_else(|| Error::config(format!("invalid channel tag `{s}`")))
    }
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    /// Linear attenuation.
    #[serde(rename = "cm^-1")]
    Attenuation,
    /// Mass density.
    #[serde(rename = "g/cm^3")]
    Density,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::Attenuation => "cm^-1",
            Units::Density => "g/cm^3",
        })
    }
}

/// A square, row-major image centred on the rotation axis.
///
/// Pixel `(col, row)` has its centre at
/// `x = (col + 0.5) * pitch - fov / 2`, `y = (row + 0.5) * pitch - fov / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    size: usize,
    pitch: f64,
    pub data: Vec<f64>,
    pub units: Units,
    pub channel: Channel,
}

impl ImageGrid {
    pub fn zeros(size: usize, pitch: f64, units: Units, channel: Channel) -> Self {
        Self {
            size,
            pitch,
            data: vec![0.0; size * size],
            units,
            channel,
        }
    }

    pub fn from_data(
        size: usize,
        pitch: f64,
        data: Vec<f64>,
        units: Units,
        channel: Channel,
    ) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::shape(format!(
                "image data has {} values, expected {}x{}",
                data.len(),
                size,
                size
            )));
        }
        if !(pitch > 0.0) {
            return Err(Error::config(format!("pixel pitch must be positive, got {pitch}")));
        }
        Ok(Self {
            size,
            pitch,
            data,
            units,
            channel,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Pixel pitch in cm.
    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Side length of the image in cm.
    pub fn fov(&self) -> f64 {
        self.pitch * self.size as f64
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.size + col]
    }

    #[inline]
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        let half = 0.5 * self.fov();
        (
            (col as f64 + 0.5) * self.pitch - half,
            (row as f64 + 0.5) * self.pitch - half,
        )
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.size == other.size
    }
}
