//! Fan-beam FBP of a uniform disk at full scanner scale.
//!
//! cargo run --release --example fbp_disk [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use pcct::metrics::Plane;
use pcct::{fbp, plot, project_phantom_analytic, Ellipse, FanBeamGeometry, Filter, MaterialTable, Phantom, ReconGrid, SpectralModel};

fn main() -> pcct::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples/fbp_disk".into());
    let geom = FanBeamGeometry::default();
    let spectral = SpectralModel::default();
    let mut materials = MaterialTable::bundled();
    materials.insert("flat", 1.0, vec![0.2; 4]);
    let radius = 8.0;
    let phantom = Phantom::new(vec![Ellipse::circle((0.0, 0.0), radius, "flat", 1.0)], 51.2)?;
    let sino = project_phantom_analytic(&phantom, &geom, 0, &spectral, &materials)?;

    for filter in [Filter::RamLak, Filter::Hann] {
        let grid = ReconGrid { filter, ..Default::default() };
        let t = Instant::now();
        let img = fbp(&sino, &geom, &grid)?;
        let elapsed = t.elapsed().as_secs_f64();
        let n = img.size();
        let inside: Vec<f64> = (0..n * n)
            .filter(|&i| {
                let (x, y) = img.pixel_center(i % n, i / n);
                x.hypot(y) < radius - 0.5
            })
            .map(|i| img.data[i])
            .collect();
        let mean = inside.iter().sum::<f64>() / inside.len() as f64;
        let rmse = (inside.iter().map(|v| (v - 0.2).powi(2)).sum::<f64>() / inside.len() as f64).sqrt();
        println!("{filter:?}: {elapsed:.2} s, interior mean {mean:.5} (true 0.2), relative rmse {:.3}%", 100.0 * rmse / 0.2);
        plot::save_png(&Plane::from(&img), (0.0, 0.25), &out.join(format!("disk_{filter:?}.png").to_lowercase()))?;
    }
    Ok(())
}
