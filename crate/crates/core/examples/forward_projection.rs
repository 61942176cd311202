//! Joseph projection of a rasterized phantom next to the exact analytic sinogram.
//!
//! cargo run --release --example forward_projection

use std::time::Instant;

use pcct::{forward_project, project_phantom_analytic, FanBeamGeometry, MaterialTable, PhantomFamily, SpectralModel};

fn main() -> pcct::Result<()> {
    let geom = FanBeamGeometry::default();
    println!(
        "fan: {} views x {} detectors, half angle {:.4} rad, scan radius {:.2} cm, magnification {:.4}",
        geom.num_views,
        geom.num_detectors,
        geom.half_fan_angle(),
        geom.scan_radius(),
        geom.magnification()
    );
    let spectral = SpectralModel::default();
    let materials = MaterialTable::bundled();
    let phantom = PhantomFamily::default().generate(7, 0, 51.2)?;

    let t = Instant::now();
    let exact = project_phantom_analytic(&phantom, &geom, 0, &spectral, &materials)?;
    println!("analytic sinogram: {:.2} s", t.elapsed().as_secs_f64());

    for factor in [1, 4] {
        let raster = phantom.rasterize_supersampled(512, factor, 0, &spectral, &materials)?;
        let t = Instant::now();
        let joseph = forward_project(&raster, &geom);
        let peak = exact.data.iter().cloned().fold(0.0, f64::max);
        let worst = joseph.data.iter().zip(&exact.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let rms = (joseph.data.iter().zip(&exact.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            / exact.data.len() as f64)
            .sqrt();
        println!(
            "joseph on {factor}x{factor}-sampled raster: {:.2} s, max |diff| {:.4} ({:.2}% of peak {:.3}), rms {:.5}",
            t.elapsed().as_secs_f64(),
            worst,
            100.0 * worst / peak,
            peak,
            rms
        );
    }
    Ok(())
}
