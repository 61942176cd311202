//! File-based commands behind the `pcct` executable.
//!
//! A run directory produced by `simulate` looks like
//!
//! ```text
//! run/
//!   config.json  materials.json  run.json
//!   phantoms/phantom0000.json
//!   sinograms/phantom0000_bin1.s2t (+ .json)     noise-free line integrals
//!   counts/r0/phantom0000_bin1.s2t (+ .json)     i32 photon counts
//!   images/clean/phantom0000_sum.s2t (+ .json)   after `reconstruct`
//!   images/r0/phantom0000_bin1.s2t (+ .json)
//!   dataset_s2ms/manifest.json ...               after `make-dataset`
//! ```
//!
//! `run.json` is written last and marks a complete simulation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dataset::{dataset_dir, write_dataset, DatasetManifest, Mode, PhantomImages, Reconstruction, SplitRatios};
use crate::error::{Error, Result};
use crate::geometry::FanBeamGeometry;
use crate::image::{Channel, ImageGrid, Units};
use crate::materials::MaterialTable;
use crate::metrics::{rmse, ssim, Plane, RoiSpec, SsimParams};
use crate::phantom::Phantom;
use crate::pipeline::{noiseless_sinograms, phantoms, provenance, realization_seed, simulate_slice, source};
use crate::plot;
use crate::recon::{reconstruct_all_channels, reconstruct_noiseless, SpectralImageSet};
use crate::spectral::CountsFrame;
use crate::tensor::{read_json, sidecar_path, write_json, write_with_sidecar, Tensor, TensorData};

pub const RUN_FILE: &str = "run.json";
pub const RUN_VERSION: u32 = 1;

/// Sets the worker count from `threads`, else `PCCT_THREADS`, else all cores.
pub fn configure_threads(threads: Option<usize>) -> usize {
    let n = threads
        .or_else(|| std::env::var("PCCT_THREADS").ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0);
    if let Some(n) = n {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialised");
        }
    }
    rayon::current_num_threads()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub version: u32,
    pub seed: u64,
    pub phantom_ids: Vec<String>,
    pub realizations: usize,
    /// `realization_seeds[p][r]`
    pub realization_seeds: Vec<Vec<u64>>,
}

impl RunInfo {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(RUN_FILE);
        if !path.is_file() {
            return Err(Error::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "not a simulated run directory (run `simulate` first)"),
            ));
        }
        read_json(&path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinogramMeta {
    pub channel: Channel,
    /// `line_integral` or `counts`.
    pub kind: String,
    pub phantom_id: String,
    pub seed: Option<u64>,
    pub n0_total: f64,
    pub geometry: FanBeamGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub channel: Channel,
    pub units: Units,
    /// cm
    pub pitch: f64,
    pub n0_total: f64,
    pub seed: Option<u64>,
    pub phantom_id: String,
}

fn file_name(id: &str, channel: Channel) -> String {
    format!("{id}_{channel}.s2t")
}

fn realization_dir(r: usize) -> String {
    format!("r{r}")
}

/// Overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub phantoms: Option<usize>,
    pub realizations: Option<usize>,
    pub n0_total: Option<f64>,
    /// Start from [`Config::desk_scale`] instead of the full-size defaults.
    pub desk: bool,
}

pub fn resolve_config(args: &SimulateArgs) -> Result<Config> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None if args.desk => Config::desk_scale(),
        None => Config::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.phantoms {
        cfg.phantom.count = n;
    }
    if let Some(r) = args.realizations {
        cfg.simulation.realizations = r;
    }
    if let Some(n0) = args.n0_total {
        cfg.spectral.n0_total = n0;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Phantoms, noise-free sinograms and photon counts for every realization.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<RunInfo> {
    let cfg = resolve_config(args)?;
    let materials = cfg.materials()?;
    let list = phantoms(&cfg)?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut resolved = cfg.clone();
    resolved.phantom.materials = None;
    resolved.phantom.files = None;
    write_json(&out.join("config.json"), &resolved)?;
    crate::tensor::write_atomic(&out.join("materials.json"), materials.to_json().as_bytes())?;

    let src = source(&cfg, &list, &materials);
    let ids: Vec<String> = (0..list.len()).map(|i| src.id(i)).collect();
    (0..list.len()).into_par_iter().try_for_each(|i| -> Result<()> {
        let sim = simulate_slice(&cfg, src.as_ref(), i)?;
        write_json(&out.join("phantoms").join(format!("{}.json", sim.id)), &list[i])?;
        for s in &sim.noiseless {
            let meta = SinogramMeta {
                channel: s.channel,
                kind: "line_integral".into(),
                phantom_id: sim.id.clone(),
                seed: None,
                n0_total: cfg.spectral.n0_total,
                geometry: cfg.geometry.clone(),
            };
            let t = Tensor::from_f64(vec![s.views as u64, s.detectors as u64], &s.data)?;
            write_with_sidecar(&out.join("sinograms").join(file_name(&sim.id, s.channel)), &t, &meta)?;
        }
        for (r, frames) in sim.frames.iter().enumerate() {
            for f in frames {
                let meta = SinogramMeta {
                    channel: f.channel,
                    kind: "counts".into(),
                    phantom_id: sim.id.clone(),
                    seed: Some(f.seed),
                    n0_total: cfg.spectral.n0_total,
                    geometry: cfg.geometry.clone(),
                };
                let t = Tensor::new(
                    vec![f.views as u64, f.detectors as u64],
                    TensorData::I32(f.counts.iter().map(|&c| c as i32).collect()),
                )?;
                let path = out.join("counts").join(realization_dir(r)).join(file_name(&sim.id, f.channel));
                write_with_sidecar(&path, &t, &meta)?;
            }
        }
        log::info!("simulated {}", sim.id);
        Ok(())
    })?;

    let info = RunInfo {
        version: RUN_VERSION,
        seed: cfg.seed,
        realizations: cfg.simulation.realizations,
        realization_seeds: (0..ids.len())
            .map(|i| (0..cfg.simulation.realizations).map(|r| realization_seed(cfg.seed, i, r)).collect())
            .collect(),
        phantom_ids: ids,
    };
    write_json(&out.join(RUN_FILE), &info)?;
    Ok(info)
}

struct LoadedRun {
    cfg: Config,
    info: RunInfo,
    materials: MaterialTable,
    phantoms: Vec<Phantom>,
}

fn load_run(run_dir: &Path) -> Result<LoadedRun> {
    let info = RunInfo::load(run_dir)?;
    let cfg: Config = read_json(&run_dir.join("config.json"))?;
    cfg.validate()?;
    let materials = MaterialTable::load(&run_dir.join("materials.json"))?;
    let phantoms = info
        .phantom_ids
        .iter()
        .map(|id| Phantom::load(&run_dir.join("phantoms").join(format!("{id}.json"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedRun {
        cfg,
        info,
        materials,
        phantoms,
    })
}

fn read_counts(path: &Path, expected: Channel, geom: &FanBeamGeometry) -> Result<CountsFrame> {
    let t = Tensor::read(path)?;
    let meta: SinogramMeta = read_json(&sidecar_path(path))?;
    let counts = match t.data {
        TensorData::I32(v) => v
            .into_iter()
            .map(|c| u32::try_from(c).map_err(|_| Error::format(path, "negative photon count")))
            .collect::<Result<Vec<_>>>()?,
        TensorData::F32(_) => return Err(Error::format(path, "photon counts must be stored as i32")),
    };
    if t.dims != [geom.num_views as u64, geom.num_detectors as u64] {
        return Err(Error::format(path, format!("dims {:?} do not match the geometry", t.dims)));
    }
    if meta.channel != expected {
        return Err(Error::format(path, format!("sidecar channel {} != {expected}", meta.channel)));
    }
    Ok(CountsFrame {
        views: geom.num_views,
        detectors: geom.num_detectors,
        counts,
        channel: expected,
        seed: meta.seed.unwrap_or(0),
        noiseless_lambda: None,
    })
}

fn write_image_set(dir: &Path, id: &str, set: &SpectralImageSet, seed: Option<u64>, n0_total: f64) -> Result<()> {
    for img in set.iter() {
        let meta = ImageMeta {
            channel: img.channel,
            units: img.units,
            pitch: img.pitch(),
            n0_total,
            seed,
            phantom_id: id.to_string(),
        };
        let n = img.size() as u64;
        write_with_sidecar(&dir.join(file_name(id, img.channel)), &Tensor::from_f64(vec![n, n], &img.data)?, &meta)?;
    }
    Ok(())
}

/// Reads a 2-D image (`[H, W]` or `[1, H, W]`) and its sidecar.
pub fn read_image(path: &Path) -> Result<ImageGrid> {
    let t = Tensor::read(path)?;
    let meta: ImageMeta = read_json(&sidecar_path(path))?;
    let plane = tensor_plane(&t, path)?;
    if plane.width != plane.height {
        return Err(Error::format(path, "images must be square"));
    }
    ImageGrid::from_data(plane.width, meta.pitch, plane.data, meta.units, meta.channel)
}

fn tensor_plane(t: &Tensor, path: &Path) -> Result<Plane> {
    let (h, w) = match t.dims[..] {
        [h, w] | [1, h, w] => (h as usize, w as usize),
        _ => return Err(Error::format(path, format!("expected a 2-D image, got dims {:?}", t.dims))),
    };
    Plane::new(w, h, t.to_f64())
}

/// FBP of every channel of every realization plus the noise-free references.
pub fn cmd_reconstruct(run_dir: &Path) -> Result<usize> {
    let run = load_run(run_dir)?;
    let cfg = &run.cfg;
    let src = source(cfg, &run.phantoms, &run.materials);
    let written: Vec<usize> = run
        .info
        .phantom_ids
        .par_iter()
        .enumerate()
        .map(|(i, id)| -> Result<usize> {
            let mut count = 0;
            let noiseless = noiseless_sinograms(cfg, src.as_ref(), i)?;
            let clean = reconstruct_noiseless(&noiseless, &cfg.spectral, &cfg.geometry, &cfg.recon)?;
            write_image_set(&run_dir.join("images").join("clean"), id, &clean, None, cfg.spectral.n0_total)?;
            for r in 0..run.info.realizations {
                let dir = run_dir.join("counts").join(realization_dir(r));
                let frames = cfg
                    .spectral
                    .channels()
                    .map(|ch| read_counts(&dir.join(file_name(id, ch)), ch, &cfg.geometry))
                    .collect::<Result<Vec<_>>>()?;
                let set = reconstruct_all_channels(&frames, &cfg.spectral, &cfg.geometry, &cfg.recon)?;
                let seed = run.info.realization_seeds[i][r];
                write_image_set(&run_dir.join("images").join(realization_dir(r)), id, &set, Some(seed), cfg.spectral.n0_total)?;
                count += set.iter().count();
            }
            log::info!("reconstructed {id}");
            Ok(count)
        })
        .collect::<Result<_>>()?;
    Ok(written.into_iter().sum())
}

fn load_image_set(dir: &Path, id: &str, bins: usize) -> Result<SpectralImageSet> {
    let singles = (0..bins)
        .map(|k| read_image(&dir.join(file_name(id, Channel::Bin(k)))))
        .collect::<Result<Vec<_>>>()?;
    let sum = read_image(&dir.join(file_name(id, Channel::Sum)))?;
    Ok(SpectralImageSet {
        singles,
        sum: Some(sum),
    })
}

/// Builds the `mode` dataset from a reconstructed run.
///
/// Besides the samples, the test-split phantoms are exported in attenuation
/// units to `eval/reference/` (noise-free) and `eval/noisy/` (first
/// realization) for `evaluate`.
pub fn cmd_make_dataset(run_dir: &Path, mode: Mode, ratios: Option<SplitRatios>, out: Option<PathBuf>) -> Result<DatasetManifest> {
    let run = load_run(run_dir)?;
    let mut cfg = run.cfg.clone();
    if let Some(r) = ratios {
        cfg.dataset.ratios = r.normalized()?;
    }
    let needs_two = mode == Mode::N2n || (mode == Mode::S2ms && cfg.dataset.decorrelated_sum);
    if needs_two && run.info.realizations < 2 {
        return Err(Error::config(format!(
            "{mode} needs two noise realizations per phantom but the run has {}",
            run.info.realizations
        )));
    }
    let bins = cfg.spectral.num_bins();
    let images_dir = run_dir.join("images");
    let phantoms = run
        .info
        .phantom_ids
        .iter()
        .enumerate()
        .map(|(i, id)| -> Result<PhantomImages> {
            let noisy = (0..run.info.realizations)
                .map(|r| {
                    Ok(Reconstruction {
                        phantom_id: id.clone(),
                        seed: Some(run.info.realization_seeds[i][r]),
                        images: load_image_set(&images_dir.join(realization_dir(r)), id, bins)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let clean = Reconstruction {
                phantom_id: id.clone(),
                seed: None,
                images: load_image_set(&images_dir.join("clean"), id, bins)?,
            };
            Ok(PhantomImages {
                phantom_id: id.clone(),
                noisy,
                clean: Some(clean),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = out.unwrap_or_else(|| dataset_dir(run_dir, mode));
    let manifest = write_dataset(&out, mode, &phantoms, &cfg.spectral, &cfg.dataset, &provenance(&cfg))?;
    for id in &manifest.splits.test {
        let ph = phantoms.iter().find(|p| &p.phantom_id == id).expect("test ids come from the run");
        let reference = ph.clean.as_ref().expect("clean set loaded");
        let singles = |set: &SpectralImageSet| SpectralImageSet {
            singles: set.singles.clone(),
            sum: None,
        };
        write_image_set(&out.join("eval").join("reference"), id, &singles(&reference.images), None, cfg.spectral.n0_total)?;
        write_image_set(&out.join("eval").join("noisy"), id, &singles(&ph.noisy[0].images), ph.noisy[0].seed, cfg.spectral.n0_total)?;
    }
    Ok(manifest)
}

/// Display window width used as the SSIM dynamic range, cm⁻¹.
pub fn default_dynamic_range(channel: Channel) -> f64 {
    match channel {
        Channel::Bin(2) | Channel::Bin(3) => 0.35,
        _ => 0.4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub ssim: f64,
    pub rmse: f64,
    /// Images averaged.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub roi: RoiSpec,
    pub dynamic_range: BTreeMap<String, f64>,
    pub per_channel: BTreeMap<String, BTreeMap<String, MethodScore>>,
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub pred: PathBuf,
    pub reference: PathBuf,
    pub roi: RoiSpec,
    /// Overrides the per-channel display-window range.
    pub dynamic_range: Option<f64>,
    /// Report path; `<pred>/report.json` when absent.
    pub out: Option<PathBuf>,
    /// Directory for |pred − ref| PNG maps.
    pub diff_maps: Option<PathBuf>,
}

fn s2t_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "s2t"))
        .collect();
    files.sort();
    Ok(files)
}

fn channel_of(path: &Path) -> Result<Channel> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    stem.rsplit('_')
        .next()
        .and_then(|tag| tag.parse().ok())
        .ok_or_else(|| Error::format(path, "file name does not end in _binK or _sum"))
}

/// Methods to score: sub-directories of `pred` holding S2T files, or `pred`
/// itself.
fn method_dirs(pred: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut subdirs: Vec<PathBuf> = fs::read_dir(pred)
        .map_err(|e| Error::io(pred, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut out = Vec::new();
    for d in subdirs {
        if !s2t_files(&d)?.is_empty() {
            let name = d.file_name().unwrap().to_string_lossy().into_owned();
            out.push((name, d));
        }
    }
    if out.is_empty() {
        let name = pred
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "pred".into());
        out.push((name, pred.to_path_buf()));
    }
    Ok(out)
}

/// SSIM and RMSE of predicted against reference images over an ROI,
/// averaged per channel and method.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluationReport> {
    let refs = s2t_files(&args.reference)?;
    if refs.is_empty() {
        return Err(Error::io(
            &args.reference,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no .s2t reference images"),
        ));
    }
    let mut acc: BTreeMap<String, BTreeMap<String, (f64, f64, usize)>> = BTreeMap::new();
    let mut ranges = BTreeMap::new();
    for (method, dir) in method_dirs(&args.pred)? {
        let mut matched = 0;
        for rpath in &refs {
            let name = rpath.file_name().unwrap();
            let ppath = dir.join(name);
            if !ppath.is_file() {
                continue;
            }
            let channel = channel_of(rpath)?;
            let reference = tensor_plane(&Tensor::read(rpath)?, rpath)?;
            let pred = tensor_plane(&Tensor::read(&ppath)?, &ppath)?;
            if (pred.width, pred.height) != (reference.width, reference.height) {
                return Err(Error::format(&ppath, "image size differs from the reference"));
            }
            let range = args.dynamic_range.unwrap_or_else(|| default_dynamic_range(channel));
            ranges.insert(channel.to_string(), range);
            let r_roi = args.roi.apply(&reference)?;
            let p_roi = args.roi.apply(&pred)?;
            let s = ssim(&p_roi, &r_roi, &SsimParams::with_range(range))?;
            let e = rmse(&p_roi, &r_roi)?;
            let entry = acc
                .entry(channel.to_string())
                .or_default()
                .entry(method.clone())
                .or_insert((0.0, 0.0, 0));
            entry.0 += s;
            entry.1 += e;
            entry.2 += 1;
            matched += 1;
            if let Some(diff_dir) = &args.diff_maps {
                let diff = Plane::new(
                    pred.width,
                    pred.height,
                    pred.data.iter().zip(&reference.data).map(|(a, b)| (a - b).abs()).collect(),
                )?;
                let stem = Path::new(name).file_stem().unwrap().to_string_lossy();
                plot::save_png(&diff, (0.0, 0.1 * range), &diff_dir.join(format!("{method}_{stem}_absdiff.png")))?;
            }
        }
        if matched == 0 {
            log::warn!("method {method}: no file in {} matches a reference image", dir.display());
        }
    }
    let per_channel = acc
        .into_iter()
        .map(|(ch, methods)| {
            let scores = methods
                .into_iter()
                .map(|(m, (s, e, n))| {
                    (
                        m,
                        MethodScore {
                            ssim: s / n as f64,
                            rmse: e / n as f64,
                            count: n,
                        },
                    )
                })
                .collect();
            (ch, scores)
        })
        .collect();
    let report = EvaluationReport {
        roi: args.roi,
        dynamic_range: ranges,
        per_channel,
    };
    let out = args.out.clone().unwrap_or_else(|| args.pred.join("report.json"));
    write_json(&out, &report)?;
    Ok(report)
}

/// Renders S2T files (or every S2T file of a directory) to PNG.
///
/// Multi-channel tensors `[C, H, W]` are tiled left to right. Without an
/// explicit window each image uses its own min/max.
pub fn cmd_plot(inputs: &[PathBuf], out_dir: &Path, window: Option<(f64, f64)>) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(s2t_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    let mut written = Vec::new();
    for f in files {
        let t = Tensor::read(&f)?;
        let planes: Vec<Plane> = match t.dims[..] {
            [h, w] => vec![Plane::new(w as usize, h as usize, t.to_f64())?],
            [c, h, w] => {
                let v = t.to_f64();
                let n = (h * w) as usize;
                (0..c as usize)
                    .map(|i| Plane::new(w as usize, h as usize, v[i * n..(i + 1) * n].to_vec()))
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::format(&f, format!("cannot plot dims {:?}", t.dims))),
        };
        let tiled = plot::tile(&planes)?;
        let win = window.unwrap_or_else(|| plot::min_max(&tiled));
        let stem = f.file_stem().unwrap().to_string_lossy();
        let out = out_dir.join(format!("{stem}.png"));
        plot::save_png(&tiled, win, &out)?;
        written.push(out);
    }
    Ok(written)
}
