//! Equal-spaced (flat detector) fan-beam scanner geometry.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A ray with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: [f64; 2],
    pub dir: [f64; 2],
}

impl Ray {
    pub fn new(origin: [f64; 2], dir: [f64; 2]) -> Self {
        Self { origin, dir }
    }

    /// Ray through `a` towards `b`.
    pub fn through(a: [f64; 2], b: [f64; 2]) -> Self {
        let d = [b[0] - a[0], b[1] - a[1]];
        let n = d[0].hypot(d[1]);
        Self {
            origin: a,
            dir: [d[0] / n, d[1] / n],
        }
    }

    pub fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let rot = |p: [f64; 2]| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        Self {
            origin: rot(self.origin),
            dir: rot(self.dir),
        }
    }

    /// Perpendicular distance from `p` to the ray's supporting line.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let v = [p[0] - self.origin[0], p[1] - self.origin[1]];
        (v[0] * self.dir[1] - v[1] * self.dir[0]).abs()
    }
}

/// Fan-beam scanner. The source circles the origin at `source_to_origin`; a
/// flat detector row faces it at `source_to_detector`, centred on the
/// central ray. Distances in cm, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FanBeamGeometry {
    pub source_to_origin: f64,
    pub source_to_detector: f64,
    pub num_detectors: usize,
    pub detector_pitch: f64,
    pub num_views: usize,
    pub angular_range: f64,
    /// Sub-rays per detector element along the detector row.
    pub oversample: usize,
}

impl Default for FanBeamGeometry {
    fn default() -> Self {
        Self {
            source_to_origin: 142.0,
            source_to_detector: 180.0,
            num_detectors: 512,
            detector_pitch: 0.1,
            num_views: 512,
            angular_range: 2.0 * PI,
            oversample: 1,
        }
    }
}

/// Partial geometry; unset fields take the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryOverrides {
    pub source_to_origin: Option<f64>,
    pub source_to_detector: Option<f64>,
    pub num_detectors: Option<usize>,
    pub detector_pitch: Option<f64>,
    pub num_views: Option<usize>,
    pub angular_range: Option<f64>,
    pub oversample: Option<usize>,
}

pub fn make_geometry(overrides: &GeometryOverrides) -> Result<FanBeamGeometry> {
    let d = FanBeamGeometry::default();
    let g = FanBeamGeometry {
        source_to_origin: overrides.source_to_origin.unwrap_or(d.source_to_origin),
        source_to_detector: overrides.source_to_detector.unwrap_or(d.source_to_detector),
        num_detectors: overrides.num_detectors.unwrap_or(d.num_detectors),
        detector_pitch: overrides.detector_pitch.unwrap_or(d.detector_pitch),
        num_views: overrides.num_views.unwrap_or(d.num_views),
        angular_range: overrides.angular_range.unwrap_or(d.angular_range),
        oversample: overrides.oversample.unwrap_or(d.oversample),
    };
    g.validate()?;
    Ok(g)
}

impl FanBeamGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.source_to_origin > 0.0) {
            return Err(Error::config("source_to_origin must be positive"));
        }
        if !(self.source_to_detector > self.source_to_origin) {
            return Err(Error::config(format!(
                "source_to_detector ({}) must exceed source_to_origin ({})",
                self.source_to_detector, self.source_to_origin
            )));
        }
        if self.num_detectors == 0 || self.num_views == 0 {
            return Err(Error::config("num_detectors and num_views must be at least 1"));
        }
        if !(self.detector_pitch > 0.0) {
            return Err(Error::config("detector_pitch must be positive"));
        }
        if !(self.angular_range > 0.0) || !self.angular_range.is_finite() {
            return Err(Error::config("angular_range must be positive and finite"));
        }
        if self.oversample == 0 {
            return Err(Error::config("oversample must be at least 1"));
        }
        Ok(())
    }

    pub fn view_angle(&self, view: usize) -> f64 {
        view as f64 * self.angular_range / self.num_views as f64
    }

    pub fn view_angles(&self) -> Vec<f64> {
        (0..self.num_views).map(|v| self.view_angle(v)).collect()
    }

    /// Angular step between views.
    pub fn view_step(&self) -> f64 {
        self.angular_range / self.num_views as f64
    }

    /// Signed detector coordinate (cm, on the physical detector) of an element centre.
    #[inline]
    pub fn detector_coord(&self, det: f64) -> f64 {
        (det - 0.5 * (self.num_detectors as f64 - 1.0)) * self.detector_pitch
    }

    pub fn half_fan_angle(&self) -> f64 {
        (0.5 * self.num_detectors as f64 * self.detector_pitch / self.source_to_detector).atan()
    }

    /// Radius of the circle seen by every view.
    pub fn scan_radius(&self) -> f64 {
        self.source_to_origin * self.half_fan_angle().sin()
    }

    /// Ratio of source-detector to source-origin distance.
    pub fn magnification(&self) -> f64 {
        self.source_to_detector / self.source_to_origin
    }

    pub fn source_position(&self, view: usize) -> [f64; 2] {
        let (s, c) = self.view_angle(view).sin_cos();
        [self.source_to_origin * c, self.source_to_origin * s]
    }

    /// Ray from the source to detector coordinate `s` (cm) at `view`.
    pub fn ray_at(&self, view: usize, s: f64) -> Ray {
        let (sb, cb) = self.view_angle(view).sin_cos();
        let src = [self.source_to_origin * cb, self.source_to_origin * sb];
        let d = self.source_to_detector;
        // Central ray runs along -(cos, sin); the detector axis is (-sin, cos).
        let v = [-d * cb - s * sb, -d * sb + s * cb];
        let n = v[0].hypot(v[1]);
        Ray::new(src, [v[0] / n, v[1] / n])
    }

    /// Ray to the centre of detector element `det`.
    pub fn ray(&self, view: usize, det: usize) -> Ray {
        self.ray_at(view, self.detector_coord(det as f64))
    }

    /// Rays sampling detector element `det`, `oversample` per element.
    pub fn element_rays(&self, view: usize, det: usize) -> impl Iterator<Item = Ray> + '_ {
        let m = self.oversample;
        (0..m).map(move |j| {
            let offset = (j as f64 + 0.5) / m as f64 - 0.5;
            self.ray_at(view, self.detector_coord(det as f64 + offset))
        })
    }
}
