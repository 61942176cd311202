#![allow(dead_code)]

use pcct::{Ellipse, FanBeamGeometry, MaterialTable, Phantom, SpectralModel};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Materials with a flat κ of 0.2 ("flat") next to the bundled ones, so a
/// density-1 disk has μ = 0.2 cm⁻¹ in every bin.
pub fn materials() -> MaterialTable {
    let mut t = MaterialTable::bundled();
    t.insert("flat", 1.0, vec![0.2; 4]);
    t
}

pub fn disk(radius: f64, material: &str) -> Phantom {
    Phantom::new(vec![Ellipse::circle((0.0, 0.0), radius, material, 1.0)], 51.2).unwrap()
}

/// 128 views, 128 detectors at 0.4 cm.
pub fn desk_geometry() -> FanBeamGeometry {
    FanBeamGeometry {
        num_detectors: 128,
        detector_pitch: 0.4,
        num_views: 128,
        ..Default::default()
    }
}

pub fn spectral() -> SpectralModel {
    SpectralModel::default()
}

pub fn random_vec(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Direct sliding-window SSIM: explicit 2-D Gaussian weights and centred moments.
pub fn ssim_oracle(x: &[f64], y: &[f64], w: usize, h: usize, range: f64) -> f64 {
    let k = 11usize;
    let sigma = 1.5f64;
    let c = 5.0f64;
    let mut g = vec![vec![0.0; k]; k];
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            g[i][j] = (-d2 / (2.0 * sigma * sigma)).exp();
            total += g[i][j];
        }
    }
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let mut acc = 0.0;
    let mut count = 0;
    for y0 in 0..=h - k {
        for x0 in 0..=w - k {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let idx = (y0 + i) * w + x0 + j;
                    mx += g[i][j] / total * x[idx];
                    my += g[i][j] / total * y[idx];
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let idx = (y0 + i) * w + x0 + j;
                    let wt = g[i][j] / total;
                    vx += wt * (x[idx] - mx).powi(2);
                    vy += wt * (y[idx] - my).powi(2);
                    cxy += wt * (x[idx] - mx) * (y[idx] - my);
                }
            }
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}

pub fn mse_oracle(x: &[f64], y: &[f64], w: usize, h: usize) -> f64 {
    let mut s = 0.0;
    for r in 0..h {
        for c in 0..w {
            let d = x[r * w + c] - y[r * w + c];
            s += d * d;
        }
    }
    s / (w * h) as f64
}

/// Every file under `dir`, as (relative path, bytes), sorted.
pub fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
