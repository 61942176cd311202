use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pcct::cli::{self, EvaluateArgs, SimulateArgs};
use pcct::dataset::SplitRatios;
use pcct::{Mode, RoiSpec};

#[derive(Parser)]
#[command(name = "pcct", version, about = "Photon-counting spectral CT simulation and denoising workbench")]
struct Args {
    /// Worker threads (falls back to PCCT_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate phantoms, noise-free sinograms and photon counts.
    Simulate {
        /// JSON configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run directory to create.
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of generated phantoms.
        #[arg(long)]
        phantoms: Option<usize>,
        /// Noise realizations per phantom.
        #[arg(long)]
        realizations: Option<usize>,
        /// Total photons per ray over all bins.
        #[arg(long)]
        n0: Option<f64>,
        /// Use the reduced 128-view, 128² configuration as the base.
        #[arg(long)]
        desk: bool,
    },
    /// Reconstruct every channel of a simulated run.
    Reconstruct {
        run: PathBuf,
    },
    /// Assemble a training set from a reconstructed run.
    MakeDataset {
        run: PathBuf,
        #[arg(long, default_value = "s2ms")]
        mode: Mode,
        /// train:val:test, e.g. 8:1:1.
        #[arg(long)]
        ratios: Option<SplitRatios>,
        /// Output directory; `<run>/dataset_<mode>` by default.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Score predicted images against references.
    Evaluate {
        /// Predicted images, or one sub-directory per method.
        pred: PathBuf,
        /// Reference images with matching file names.
        reference: PathBuf,
        /// full, auto, center:N or x0,y0,w,h.
        #[arg(long, default_value = "auto")]
        roi: RoiSpec,
        /// SSIM dynamic range; per-channel display window when omitted.
        #[arg(long)]
        range: Option<f64>,
        /// Report path; `<pred>/report.json` by default.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Directory for absolute-difference maps.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Render S2T images to PNG.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        /// Display window as lo,hi; per-image min/max when omitted.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if hi > lo {
        Ok((lo, hi))
    } else {
        Err("window must have hi > lo".into())
    }
}

fn run(args: Args) -> pcct::Result<()> {
    let threads = cli::configure_threads(args.threads);
    log::debug!("{threads} worker threads");
    match args.command {
        Command::Simulate {
            config,
            out,
            seed,
            phantoms,
            realizations,
            n0,
            desk,
        } => {
            let info = cli::cmd_simulate(&SimulateArgs {
                config,
                out: out.clone(),
                seed,
                phantoms,
                realizations,
                n0_total: n0,
                desk,
            })?;
            println!(
                "simulated {} phantoms x {} realizations into {}",
                info.phantom_ids.len(),
                info.realizations,
                out.display()
            );
        }
        Command::Reconstruct { run } => {
            let n = cli::cmd_reconstruct(&run)?;
            println!("wrote {n} noisy images to {}", run.join("images").display());
        }
        Command::MakeDataset { run, mode, ratios, out } => {
            let m = cli::cmd_make_dataset(&run, mode, ratios, out)?;
            println!(
                "{} samples ({} train / {} val / {} test phantoms)",
                m.n,
                m.splits.train.len(),
                m.splits.val.len(),
                m.splits.test.len()
            );
        }
        Command::Evaluate {
            pred,
            reference,
            roi,
            range,
            out,
            plots,
        } => {
            let report = cli::cmd_evaluate(&EvaluateArgs {
                pred,
                reference,
                roi,
                dynamic_range: range,
                out,
                diff_maps: plots,
            })?;
            for (ch, methods) in &report.per_channel {
                for (m, s) in methods {
                    println!("{ch:>5} {m:<16} ssim {:.4} rmse {:.5} (n={})", s.ssim, s.rmse, s.count);
                }
            }
        }
        Command::Plot { inputs, out, window } => {
            for p in cli::cmd_plot(&inputs, &out, window)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
