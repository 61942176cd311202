//! Generate a random body phantom, save its description and per-bin rasters.
//!
//! cargo run --release --example phantom_raster [out_dir]

use std::path::PathBuf;

use pcct::metrics::Plane;
use pcct::{plot, MaterialTable, PhantomFamily, SpectralModel};

fn main() -> pcct::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples/phantom_raster".into());
    let spectral = SpectralModel::default();
    let materials = MaterialTable::bundled();
    let phantom = PhantomFamily::default().generate(1, 0, 51.2)?;
    println!("{} ellipses, outer radius {:.2} cm", phantom.ellipses.len(), phantom.radius());
    for e in &phantom.ellipses {
        println!(
            "  {:<12} centre ({:6.2}, {:6.2})  axes {:5.2} x {:5.2}  density {:.2}",
            e.material, e.center_x, e.center_y, e.semi_axis_a, e.semi_axis_b, e.density
        );
    }
    pcct::tensor::write_json(&out.join("phantom.json"), &phantom)?;
    for k in 0..spectral.num_bins() {
        let img = phantom.rasterize(256, k, &spectral, &materials)?;
        let (lo, hi) = spectral.bins[k];
        println!("bin{} ({lo}-{hi} keV): max mu {:.4} cm^-1", k + 1, img.data.iter().cloned().fold(0.0, f64::max));
        plot::save_png(&Plane::from(&img), (0.0, 0.4), &out.join(format!("phantom_bin{}.png", k + 1)))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
