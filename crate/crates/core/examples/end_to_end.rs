//! The file-based workflow of the `pcct` binary, driven from code.
//!
//! cargo run --release --example end_to_end [run_dir]

use std::path::PathBuf;

use pcct::cli::{self, EvaluateArgs, SimulateArgs};
use pcct::{Mode, RoiSpec};

fn main() -> pcct::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let run = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples/end_to_end".into());
    let info = cli::cmd_simulate(&SimulateArgs {
        out: run.clone(),
        seed: Some(1),
        phantoms: Some(10),
        desk: true,
        ..Default::default()
    })?;
    println!("simulated {} phantoms", info.phantom_ids.len());
    cli::cmd_reconstruct(&run)?;
    for mode in Mode::ALL {
        let m = cli::cmd_make_dataset(&run, mode, None, None)?;
        println!("{mode}: {} samples, {} input channels", m.n, m.in_channels);
    }
    let eval = run.join("dataset_s2ms").join("eval");
    let report = cli::cmd_evaluate(&EvaluateArgs {
        pred: eval.join("noisy"),
        reference: eval.join("reference"),
        roi: RoiSpec::Auto,
        dynamic_range: None,
        out: Some(run.join("report.json")),
        diff_maps: Some(run.join("plots")),
    })?;
    for (ch, methods) in &report.per_channel {
        for (m, s) in methods {
            println!("{ch} {m}: ssim {:.4} rmse {:.5}", s.ssim, s.rmse);
        }
    }
    cli::cmd_plot(&[eval.join("noisy"), eval.join("reference")], &run.join("plots"), Some((0.0, 0.4)))?;
    println!("outputs in {}", run.display());
    Ok(())
}
