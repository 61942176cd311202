//! SSIM and RMSE of a noisy reconstruction against the noise-free one, over a centred ROI.
//!
//! cargo run --release --example image_metrics

use pcct::cli::default_dynamic_range;
use pcct::metrics::{rmse, ssim};
use pcct::pipeline::{reconstruct_slice, simulate_slice};
use pcct::source::AnalyticPhantoms;
use pcct::{Config, MaterialTable, PhantomFamily, Plane, RoiSpec, SsimParams};

fn main() -> pcct::Result<()> {
    let cfg = Config::default();
    let materials = MaterialTable::bundled();
    let phantoms = vec![PhantomFamily::default().generate(11, 0, 51.2)?];
    let src = AnalyticPhantoms { phantoms: &phantoms, materials: &materials };
    let images = reconstruct_slice(&cfg, &simulate_slice(&cfg, &src, 0)?)?;
    let clean = &images.clean.as_ref().expect("noise-free set").images;
    let noisy = &images.noisy[0].images;
    let roi = RoiSpec::Auto;
    println!("ROI {:?} on {}^2", roi.resolve(cfg.recon.grid_size, cfg.recon.grid_size)?, cfg.recon.grid_size);
    for (n, c) in noisy.iter().zip(clean.iter()) {
        let range = default_dynamic_range(c.channel);
        let x = roi.apply(&Plane::from(n))?;
        let y = roi.apply(&Plane::from(c))?;
        println!(
            "{:<5} ssim {:.4}  rmse {:.5} cm^-1  (range {range})",
            c.channel.to_string(),
            ssim(&x, &y, &SsimParams::with_range(range))?,
            rmse(&x, &y)?
        );
    }
    Ok(())
}
