//! Build multi-channel training samples in memory and write them to disk.
//!
//! cargo run --release --example s2ms_dataset [out_dir]

use std::path::PathBuf;

use pcct::pipeline::build_dataset;
use pcct::{Config, DatasetManifest, Mode};

fn main() -> pcct::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples/s2ms_dataset".into());
    let mut cfg = Config::desk_scale();
    cfg.phantom.count = 10;
    cfg.seed = 5;
    let manifest = build_dataset(&cfg, Mode::S2ms, &out)?;
    println!(
        "{} samples, {} input channels, {}x{} at {:.2} cm",
        manifest.n, manifest.in_channels, manifest.image_size, manifest.image_size, manifest.pixel_pitch
    );
    println!("splits: train {:?}\n        val {:?}\n        test {:?}", manifest.splits.train, manifest.splits.val, manifest.splits.test);
    for r in manifest.records.iter().take(4) {
        let inputs: Vec<String> = r.input_channels.iter().map(|c| c.to_string()).collect();
        println!("  {} target {} <- [{}]  {}", r.phantom_id, r.target_channel, inputs.join(", "), r.input_file);
    }
    let reopened = DatasetManifest::open(&out)?;
    println!("manifest re-opened: N = {}", reopened.n);
    Ok(())
}
