//! Analytic ellipse phantoms.
//!
//! Ellipses are painted in list order: where two overlap, the later one
//! wins. [`Phantom::rasterize`] and [`Phantom::analytic_line_integral`]
//! share that rule, which makes the closed-form integral a valid oracle for
//! the discrete projector.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Ray;
use crate::image::{Channel, ImageGrid, Units};
use crate::materials::MaterialTable;
use crate::rng::{stream, KeyedRng};
use crate::spectral::SpectralModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipse {
    pub center_x: f64,
    pub center_y: f64,
    pub semi_axis_a: f64,
    pub semi_axis_b: f64,
    /// Radians, counter-clockwise, of the `a` axis from +x.
    #[serde(default)]
    pub rotation: f64,
    pub material: String,
    /// g/cm³
    pub density: f64,
}

impl Ellipse {
    pub fn circle(center: (f64, f64), radius: f64, material: &str, density: f64) -> Self {
        Self {
            center_x: center.0,
            center_y: center.1,
            semi_axis_a: radius,
            semi_axis_b: radius,
            rotation: 0.0,
            material: material.to_string(),
            density,
        }
    }

    /// Maps a point into the frame where the ellipse is the unit disk.
    #[inline]
    fn to_unit(&self, x: f64, y: f64, sin: f64, cos: f64) -> (f64, f64) {
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = cos * dx + sin * dy;
        let v = -sin * dx + cos * dy;
        (u / self.semi_axis_a, v / self.semi_axis_b)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let (u, v) = self.to_unit(x, y, s, c);
        u * u + v * v <= 1.0
    }

    /// Parameter interval `[t_in, t_out]` where the ray is inside, if any.
    pub fn intersect(&self, ray: &Ray) -> Option<(f64, f64)> {
        let (s, c) = self.rotation.sin_cos();
        let (ou, ov) = self.to_unit(ray.origin[0], ray.origin[1], s, c);
        let du = (c * ray.dir[0] + s * ray.dir[1]) / self.semi_axis_a;
        let dv = (-s * ray.dir[0] + c * ray.dir[1]) / self.semi_axis_b;
        let a = du * du + dv * dv;
        let b = ou * du + ov * dv;
        let cc = ou * ou + ov * ov - 1.0;
        let disc = b * b - a * cc;
        if disc <= 0.0 {
            return None;
        }
        let root = disc.sqrt();
        Some(((-b - root) / a, (-b + root) / a))
    }

    /// Largest distance from the origin to any point of the ellipse (upper bound).
    pub fn extent(&self) -> f64 {
        self.center_x.hypot(self.center_y) + self.semi_axis_a.max(self.semi_axis_b)
    }

    fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            center_x: c * self.center_x - s * self.center_y,
            center_y: s * self.center_x + c * self.center_y,
            rotation: self.rotation + theta,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phantom {
    pub ellipses: Vec<Ellipse>,
    /// Side of the square field of view, cm.
    pub field_of_view: f64,
}

impl Phantom {
    pub fn new(ellipses: Vec<Ellipse>, field_of_view: f64) -> Result<Self> {
        let p = Self {
            ellipses,
            field_of_view,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn empty(field_of_view: f64) -> Self {
        Self {
            ellipses: Vec::new(),
            field_of_view,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.field_of_view > 0.0) {
            return Err(Error::config("phantom field_of_view must be positive"));
        }
        let r = 0.5 * self.field_of_view;
        for (i, e) in self.ellipses.iter().enumerate() {
            if !(e.semi_axis_a > 0.0 && e.semi_axis_b > 0.0) {
                return Err(Error::config(format!("ellipse {i}: semi-axes must be positive")));
            }
            if !(e.density >= 0.0) {
                return Err(Error::config(format!("ellipse {i}: density must be non-negative")));
            }
            if self.max_extent_of(e) > r {
                return Err(Error::config(format!(
                    "ellipse {i} reaches {:.3} cm from the centre, outside the {:.3} cm reconstruction circle",
                    self.max_extent_of(e),
                    r
                )));
            }
        }
        Ok(())
    }

    fn max_extent_of(&self, e: &Ellipse) -> f64 {
        // Exact farthest distance: sample the boundary densely; the
        // centre-plus-major-axis bound is too loose for rotated ellipses.
        let (s, c) = e.rotation.sin_cos();
        (0..720)
            .map(|i| {
                let t = i as f64 * std::f64::consts::PI / 360.0;
                let (u, v) = (e.semi_axis_a * t.cos(), e.semi_axis_b * t.sin());
                (e.center_x + c * u - s * v).hypot(e.center_y + s * u + c * v)
            })
            .fold(0.0, f64::max)
    }

    /// Farthest point of any ellipse from the origin.
    pub fn radius(&self) -> f64 {
        self.ellipses.iter().map(|e| self.max_extent_of(e)).fold(0.0, f64::max)
    }

    /// Linear attenuation (cm⁻¹) of every ellipse in `bin`.
    pub fn attenuations(&self, bin: usize, spectral: &SpectralModel, materials: &MaterialTable) -> Result<Vec<f64>> {
        spectral.check_bin(bin)?;
        self.ellipses
            .iter()
            .map(|e| Ok(e.density * materials.get(&e.material)?.kappa(bin)?))
            .collect()
    }

    /// Point-samples the phantom at pixel centres.
    pub fn rasterize(
        &self,
        grid_size: usize,
        bin: usize,
        spectral: &SpectralModel,
        materials: &MaterialTable,
    ) -> Result<ImageGrid> {
        self.rasterize_supersampled(grid_size, 1, bin, spectral, materials)
    }

    /// Averages `factor × factor` point samples per pixel; `factor = 1` is
    /// plain centre sampling.
    pub fn rasterize_supersampled(
        &self,
        grid_size: usize,
        factor: usize,
        bin: usize,
        spectral: &SpectralModel,
        materials: &MaterialTable,
    ) -> Result<ImageGrid> {
        if grid_size < 16 {
            return Err(Error::config(format!("grid_size must be at least 16, got {grid_size}")));
        }
        if factor == 0 {
            return Err(Error::config("supersampling factor must be at least 1"));
        }
        let mu = self.attenuations(bin, spectral, materials)?;
        let pitch = self.field_of_view / grid_size as f64;
        let mut img = ImageGrid::zeros(grid_size, pitch, Units::Attenuation, Channel::Bin(bin));
        let trig: Vec<(f64, f64)> = self.ellipses.iter().map(|e| e.rotation.sin_cos()).collect();
        let value_at = |x: f64, y: f64| -> f64 {
            for (i, e) in self.ellipses.iter().enumerate().rev() {
                let (u, v) = e.to_unit(x, y, trig[i].0, trig[i].1);
                if u * u + v * v <= 1.0 {
                    return mu[i];
                }
            }
            0.0
        };
        let sub = pitch / factor as f64;
        let norm = 1.0 / (factor * factor) as f64;
        for row in 0..grid_size {
            for col in 0..grid_size {
                let (cx, cy) = img.pixel_center(col, row);
                let v = if factor == 1 {
                    value_at(cx, cy)
                } else {
                    let mut acc = 0.0;
                    for j in 0..factor {
                        for i in 0..factor {
                            let x = cx - 0.5 * pitch + (i as f64 + 0.5) * sub;
                            let y = cy - 0.5 * pitch + (j as f64 + 0.5) * sub;
                            acc += value_at(x, y);
                        }
                    }
                    acc * norm
                };
                img.data[row * grid_size + col] = v;
            }
        }
        Ok(img)
    }

    /// Exact line integral of attenuation along `ray` (from its origin onwards).
    pub fn analytic_line_integral(
        &self,
        ray: &Ray,
        bin: usize,
        spectral: &SpectralModel,
        materials: &MaterialTable,
    ) -> Result<f64> {
        let mu = self.attenuations(bin, spectral, materials)?;
        Ok(self.line_integral_with(ray, &mu))
    }

    /// Line integral with precomputed per-ellipse attenuations.
    pub fn line_integral_with(&self, ray: &Ray, mu: &[f64]) -> f64 {
        let mut spans: Vec<(f64, f64, usize)> = Vec::with_capacity(self.ellipses.len());
        for (i, e) in self.ellipses.iter().enumerate() {
            if let Some((t0, t1)) = e.intersect(ray) {
                if t1 > 0.0 {
                    spans.push((t0.max(0.0), t1, i));
                }
            }
        }
        match spans.len() {
            0 => return 0.0,
            1 => return (spans[0].1 - spans[0].0) * mu[spans[0].2],
            _ => {}
        }
        // Split the ray at every boundary crossing and give each piece the
        // value of the topmost ellipse covering it.
        let mut cuts: Vec<f64> = spans.iter().flat_map(|s| [s.0, s.1]).collect();
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            if len <= 0.0 {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            if let Some(top) = spans
                .iter()
                .filter(|s| s.0 <= mid && mid <= s.1)
                .map(|s| s.2)
                .max()
            {
                total += len * mu[top];
            }
        }
        total
    }

    /// The phantom rotated by `theta` about the origin.
    pub fn rotated(&self, theta: f64) -> Self {
        Self {
            ellipses: self.ellipses.iter().map(|e| e.rotated(theta)).collect(),
            field_of_view: self.field_of_view,
        }
    }

    /// Multiplies every density by `factor`.
    pub fn scale_density(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.ellipses.iter_mut().for_each(|e| e.density *= factor);
        p
    }
}

/// Parameters of the randomized body phantom family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomFamily {
    /// Largest allowed distance of any ellipse point from the centre, cm.
    pub max_radius: f64,
    pub min_inserts: usize,
    pub max_inserts: usize,
    pub density_range: (f64, f64),
    pub body_material: String,
    pub insert_materials: Vec<String>,
}

impl Default for PhantomFamily {
    fn default() -> Self {
        Self {
            max_radius: 18.0,
            min_inserts: 3,
            max_inserts: 10,
            density_range: (0.2, 1.8),
            body_material: "water".into(),
            insert_materials: vec!["water".into(), "bone".into(), "soft_tissue".into()],
        }
    }
}

impl PhantomFamily {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_radius > 0.0) {
            return Err(Error::config("phantom max_radius must be positive"));
        }
        if self.min_inserts > self.max_inserts {
            return Err(Error::config("min_inserts exceeds max_inserts"));
        }
        let (lo, hi) = self.density_range;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::config("density_range must satisfy 0 <= low <= high"));
        }
        if self.insert_materials.is_empty() && self.max_inserts > 0 {
            return Err(Error::config("insert_materials is empty"));
        }
        Ok(())
    }

    /// Draws phantom number `index` of the family for `seed`.
    ///
    /// A water body ellipse with `min_inserts..=max_inserts` inner ellipses,
    /// each placed entirely inside the body.
    pub fn generate(&self, seed: u64, index: u64, field_of_view: f64) -> Result<Phantom> {
        self.validate()?;
        let limit = self.max_radius.min(0.5 * field_of_view);
        let mut rng = KeyedRng::new(&[seed, stream::PHANTOM, index]);
        let body_a = limit * rng.random_range(0.72..0.92);
        let body_b = limit * rng.random_range(0.55..0.80);
        let body = Ellipse {
            center_x: 0.0,
            center_y: 0.0,
            semi_axis_a: body_a,
            semi_axis_b: body_b,
            rotation: rng.random_range(-0.3..0.3),
            material: self.body_material.clone(),
            density: 1.0,
        };
        let n = rng.random_range(self.min_inserts..=self.max_inserts);
        let mut ellipses = vec![body.clone()];
        let (s, c) = body.rotation.sin_cos();
        let (dlo, dhi) = self.density_range;
        for _ in 0..n {
            let size = body_b * rng.random_range(0.06..0.25);
            let a = size * rng.random_range(0.6..1.0);
            let b = size * rng.random_range(0.6..1.0);
            // Centre within the body, shrunk so the insert stays inside.
            let r = rng.random_range(0.0f64..1.0).sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let u = r * phi.cos() * (body_a - size);
            let v = r * phi.sin() * (body_b - size);
            let material = self.insert_materials[rng.random_range(0..self.insert_materials.len())].clone();
            let density = if dhi > dlo { rng.random_range(dlo..dhi) } else { dlo };
            ellipses.push(Ellipse {
                center_x: c * u - s * v,
                center_y: s * u + c * v,
                semi_axis_a: a,
                semi_axis_b: b,
                rotation: rng.random_range(0.0..std::f64::consts::PI),
                material,
                density,
            });
        }
        Phantom::new(ellipses, field_of_view)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SpectralModel, MaterialTable) {
        (SpectralModel::default(), MaterialTable::bundled())
    }

    fn table_with_mu(mu_over_rho: f64) -> MaterialTable {
        let mut t = MaterialTable::default();
        t.insert("m", 1.0, vec![mu_over_rho; 4]);
        t
    }

    #[test]
    fn empty_phantom_rasterizes_to_zero() {
        let (s, m) = setup();
        let img = Phantom::empty(20.0).rasterize(64, 0, &s, &m).unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));
        assert!((img.pitch() - 20.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn centred_water_disk_has_constant_value() {
        let (s, m) = setup();
        let p = Phantom::new(vec![Ellipse::circle((0.0, 0.0), 5.0, "water", 1.0)], 20.0).unwrap();
        for bin in 0..4 {
            let kappa = m.get("water").unwrap().mu_over_rho[bin];
            let img = p.rasterize(64, bin, &s, &m).unwrap();
            for row in 0..64 {
                for col in 0..64 {
                    let (x, y) = img.pixel_center(col, row);
                    let want = if x * x + y * y <= 25.0 { kappa } else { 0.0 };
                    assert_eq!(img.get(col, row), want);
                }
            }
        }
    }

    #[test]
    fn unknown_material_is_a_config_error() {
        let (s, m) = setup();
        let p = Phantom::new(vec![Ellipse::circle((0.0, 0.0), 1.0, "unobtainium", 1.0)], 10.0).unwrap();
        assert!(matches!(p.rasterize(16, 0, &s, &m), Err(Error::Config(_))));
        assert!(matches!(p.rasterize(8, 0, &s, &m), Err(Error::Config(_))));
        assert!(p.rasterize(16, 4, &s, &m).is_err());
    }

    #[test]
    fn validation_rejects_bad_ellipses() {
        assert!(Phantom::new(vec![Ellipse::circle((0.0, 0.0), 0.0, "water", 1.0)], 10.0).is_err());
        assert!(Phantom::new(vec![Ellipse::circle((0.0, 0.0), 1.0, "water", -1.0)], 10.0).is_err());
        assert!(Phantom::new(vec![Ellipse::circle((4.5, 0.0), 1.0, "water", 1.0)], 10.0).is_err());
    }

    #[test]
    fn chord_through_centre() {
        let t = table_with_mu(0.2);
        let s = SpectralModel::default();
        let p = Phantom::new(vec![Ellipse::circle((0.0, 0.0), 2.0, "m", 1.0)], 10.0).unwrap();
        let ray = Ray::new([-10.0, 0.0], [1.0, 0.0]);
        assert!((p.analytic_line_integral(&ray, 0, &s, &t).unwrap() - 0.8).abs() < 1e-14);
    }

    #[test]
    fn chord_at_offset() {
        let t = table_with_mu(0.2);
        let s = SpectralModel::default();
        let p = Phantom::new(vec![Ellipse::circle((0.0, 0.0), 2.0, "m", 1.0)], 10.0).unwrap();
        let ray = Ray::new([-10.0, 1.0], [1.0, 0.0]);
        let want = 2.0 * 3f64.sqrt() * 0.2;
        let got = p.analytic_line_integral(&ray, 0, &s, &t).unwrap();
        assert!((got - want).abs() < 1e-14);
        assert!((got - 0.69282).abs() < 1e-5);
    }

    #[test]
    fn miss_is_zero() {
        let t = table_with_mu(0.2);
        let s = SpectralModel::default();
        let p = Phantom::new(vec![Ellipse::circle((0.0, 0.0), 2.0, "m", 1.0)], 10.0).unwrap();
        let ray = Ray::new([-10.0, 2.5], [1.0, 0.0]);
        assert_eq!(p.analytic_line_integral(&ray, 0, &s, &t).unwrap(), 0.0);
    }

    #[test]
    fn nested_insert_overrides_body() {
        // Body of mu 0.2 (r=4) with a mu 0.5 insert (r=1): a centre chord sees
        // 6 cm of body and 2 cm of insert.
        let mut t = MaterialTable::default();
        t.insert("a", 1.0, vec![0.2; 4]);
        t.insert("b", 1.0, vec![0.5; 4]);
        let s = SpectralModel::default();
        let p = Phantom::new(
            vec![
                Ellipse::circle((0.0, 0.0), 4.0, "a", 1.0),
                Ellipse::circle((0.0, 0.0), 1.0, "b", 1.0),
            ],
            10.0,
        )
        .unwrap();
        let ray = Ray::new([0.0, -9.0], [0.0, 1.0]);
        let got = p.analytic_line_integral(&ray, 0, &s, &t).unwrap();
        assert!((got - (6.0 * 0.2 + 2.0 * 0.5)).abs() < 1e-13);
    }

    #[test]
    fn family_is_reproducible_and_valid() {
        let fam = PhantomFamily::default();
        let a = fam.generate(3, 1, 51.2).unwrap();
        let b = fam.generate(3, 1, 51.2).unwrap();
        let c = fam.generate(3, 2, 51.2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.radius() <= fam.max_radius);
        assert!((4..=11).contains(&a.ellipses.len()));
        for e in &a.ellipses[1..] {
            assert!((0.2..=1.8).contains(&e.density));
        }
    }

    #[test]
    fn json_uses_documented_field_names() {
        let p = Phantom::new(vec![Ellipse::circle((1.0, 0.0), 2.0, "water", 1.0)], 10.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        let e = &v["ellipses"][0];
        for key in ["center_x", "center_y", "semi_axis_a", "semi_axis_b", "rotation", "material", "density"] {
            assert!(e.get(key).is_some(), "{key}");
        }
        assert_eq!(v["field_of_view"], 10.0);
    }
}
