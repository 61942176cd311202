//! Materials and their per-bin mass attenuation coefficients.
//!
//! The bundled table covers water, ICRU-44 soft tissue and ICRU-44 cortical
//! bone for the default four bins (30-45, 45-60, 60-80, 80-100 keV). Each
//! entry is the NIST XCOM total mass attenuation coefficient (coherent
//! scattering included) log-log interpolated to the arithmetic bin centre
//! (37.5, 52.5, 70, 90 keV), rounded to four decimals.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../data/materials.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    #[serde(skip)]
    pub id: String,
    /// g/cm³
    pub density_default: f64,
    /// κ per energy bin, cm²/g.
    pub mu_over_rho: Vec<f64>,
}

impl Material {
    pub fn kappa(&self, bin: usize) -> Result<f64> {
        self.mu_over_rho.get(bin).copied().ok_or_else(|| {
            Error::config(format!(
                "material `{}` has no attenuation coefficient for bin{}",
                self.id,
                bin + 1
            ))
        })
    }
}

/// Map from material id to [`Material`]; the JSON form is the plain map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaterialTable {
    materials: BTreeMap<String, Material>,
}

impl MaterialTable {
    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED).expect("bundled material table is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Material> = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("materials table: {e}")))?;
        Self::from_map(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, Material> =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_map(raw)
    }

    fn from_map(raw: BTreeMap<String, Material>) -> Result<Self> {
        let mut materials = BTreeMap::new();
        for (id, mut m) in raw {
            if m.mu_over_rho.iter().any(|&k| !(k > 0.0)) {
                return Err(Error::config(format!(
                    "material `{id}`: every mass attenuation coefficient must be positive"
                )));
            }
            if !(m.density_default >= 0.0) {
                return Err(Error::config(format!("material `{id}`: negative default density")));
            }
            m.id = id.clone();
            materials.insert(id, m);
        }
        Ok(Self { materials })
    }

    pub fn insert(&mut self, id: &str, density_default: f64, mu_over_rho: Vec<f64>) {
        self.materials.insert(
            id.to_string(),
            Material {
                id: id.to_string(),
                density_default,
                mu_over_rho,
            },
        );
    }

    pub fn get(&self, id: &str) -> Result<&Material> {
        self.materials
            .get(id)
            .ok_or_else(|| Error::config(format!("unknown material id `{id}`")))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(String::as_str)
    }

    /// Checks that every material covers `num_bins` bins.
    pub fn validate_bins(&self, num_bins: usize) -> Result<()> {
        for m in self.materials.values() {
            if m.mu_over_rho.len() < num_bins {
                return Err(Error::config(format!(
                    "material `{}` defines {} coefficients but the spectral model has {} bins",
                    m.id,
                    m.mu_over_rho.len(),
                    num_bins
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.materials).expect("material table serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // NIST XCOM anchors (cm²/g, total with coherent) at 30, 40, 50, 60, 80, 100 keV.
    const ANCHOR_KEV: [f64; 6] = [30.0, 40.0, 50.0, 60.0, 80.0, 100.0];
    const ANCHORS: [(&str, [f64; 6]); 3] = [
        ("water", [0.3756, 0.2683, 0.2269, 0.2059, 0.1837, 0.1707]),
        ("soft_tissue", [0.3790, 0.2688, 0.2264, 0.2048, 0.1823, 0.1693]),
        ("bone", [1.331, 0.6655, 0.4242, 0.3148, 0.2229, 0.1855]),
    ];

    fn loglog(values: &[f64; 6], e: f64) -> f64 {
        let i = ANCHOR_KEV.windows(2).position(|w| w[0] <= e && e <= w[1]).unwrap();
        let t = (e / ANCHOR_KEV[i]).ln() / (ANCHOR_KEV[i + 1] / ANCHOR_KEV[i]).ln();
        (values[i].ln() + t * (values[i + 1].ln() - values[i].ln())).exp()
    }

    #[test]
    fn bundled_table_matches_reference_interpolation() {
        let table = MaterialTable::bundled();
        for (id, anchors) in ANCHORS {
            let m = table.get(id).unwrap();
            for (k, e) in [37.5, 52.5, 70.0, 90.0].into_iter().enumerate() {
                let expected = loglog(&anchors, e);
                assert!(
                    (m.mu_over_rho[k] - expected).abs() < 5e-5,
                    "{id} bin{}: {} vs {}",
                    k + 1,
                    m.mu_over_rho[k],
                    expected
                );
            }
        }
    }

    #[test]
    fn kappa_decreases_with_energy() {
        let table = MaterialTable::bundled();
        for id in ["water", "soft_tissue", "bone"] {
            let k = &table.get(id).unwrap().mu_over_rho;
            assert!(k.windows(2).all(|w| w[0] > w[1]), "{id}");
        }
    }

    #[test]
    fn rejects_nonpositive_kappa_and_unknown_ids() {
        assert!(MaterialTable::from_json_str(
            r#"{"x": {"density_default": 1.0, "mu_over_rho": [0.2, 0.0]}}"#
        )
        .is_err());
        assert!(matches!(MaterialTable::bundled().get("lead"), Err(Error::Config(_))));
    }

    #[test]
    fn json_round_trip() {
        let t = MaterialTable::bundled();
        assert_eq!(MaterialTable::from_json_str(&t.to_json()).unwrap(), t);
    }
}
