//! Training samples for the three supervision modes, phantom-level splits,
//! and the on-disk dataset layout.
//!
//! * `n2c`: noisy single channel in, noise-free reconstruction of the same
//!   channel out.
//! * `n2n`: one noise realization in, an independent realization of the same
//!   channel out.
//! * `s2ms`: the other `E - 1` single channels plus the channel-sum image in,
//!   the held-out channel out. All images are in density units.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Channel, ImageGrid, Units};
use crate::recon::SpectralImageSet;
use crate::rng::{stream, KeyedRng};
use crate::spectral::SpectralModel;
use crate::tensor::{read_json, write_json, Tensor};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    N2c,
    N2n,
    S2ms,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::N2c, Mode::N2n, Mode::S2ms];

    /// Network input channels for a dataset with `num_bins` bins.
    pub fn input_channels(self, num_bins: usize) -> usize {
        match self {
            Mode::S2ms => num_bins,
            Mode::N2c | Mode::N2n => 1,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::N2c => "n2c",
            Mode::N2n => "n2n",
            Mode::S2ms => "s2ms",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n2c" => Ok(Mode::N2c),
            "n2n" => Ok(Mode::N2n),
            "s2ms" => Ok(Mode::S2ms),
            _ => Err(Error::config(format!("unknown mode `{s}` (expected n2c, n2n or s2ms)"))),
        }
    }
}

/// One reconstructed image set of a phantom. `seed` is `None` for the
/// noise-free reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub phantom_id: String,
    pub seed: Option<u64>,
    pub images: SpectralImageSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub inputs: Vec<ImageGrid>,
    pub target: ImageGrid,
    pub mode: Mode,
    pub target_bin: usize,
    /// Noise seeds of the inputs followed by the target's (absent when noise-free).
    pub seeds: Vec<u64>,
    pub phantom_id: String,
}

impl SampleRecord {
    pub fn input_channels(&self) -> Vec<Channel> {
        self.inputs.iter().map(|i| i.channel).collect()
    }
}

fn require_density(rec: &Reconstruction) -> Result<()> {
    match rec.images.iter().find(|i| i.units != Units::Density) {
        Some(img) => Err(Error::config(format!(
            "{} of phantom {} is in {}, samples need density images",
            img.channel, rec.phantom_id, img.units
        ))),
        None => Ok(()),
    }
}

fn single(rec: &Reconstruction, bin: usize) -> Result<&ImageGrid> {
    rec.images.singles.get(bin).ok_or_else(|| {
        Error::config(format!(
            "bin{} out of range: phantom {} has {} bins",
            bin + 1,
            rec.phantom_id,
            rec.images.num_bins()
        ))
    })
}

/// Multi-channel sample: inputs are the single channels other than
/// `target_bin` in ascending order, then the channel-sum image.
pub fn assemble_s2ms(rec: &Reconstruction, target_bin: usize) -> Result<SampleRecord> {
    assemble_s2ms_with_sum(rec, rec, target_bin)
}

/// Like [`assemble_s2ms`] but takes the channel-sum image from `sum_source`,
/// an independent realization of the same phantom. The target counts then
/// do not feed any input.
pub fn assemble_s2ms_with_sum(rec: &Reconstruction, sum_source: &Reconstruction, target_bin: usize) -> Result<SampleRecord> {
    require_density(rec)?;
    require_density(sum_source)?;
    if sum_source.phantom_id != rec.phantom_id {
        return Err(Error::config("channel-sum source belongs to a different phantom"));
    }
    let target = single(rec, target_bin)?.clone();
    let sum = sum_source.images.sum.clone().ok_or_else(|| {
        Error::config(format!("phantom {} has no channel-sum image", sum_source.phantom_id))
    })?;
    let mut inputs: Vec<ImageGrid> = rec
        .images
        .singles
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != target_bin)
        .map(|(_, img)| img.clone())
        .collect();
    inputs.push(sum);
    let mut seeds: Vec<u64> = Vec::new();
    seeds.extend(rec.seed);
    if !std::ptr::eq(rec, sum_source) {
        seeds.extend(sum_source.seed);
    }
    Ok(SampleRecord {
        inputs,
        target,
        mode: Mode::S2ms,
        target_bin,
        seeds,
        phantom_id: rec.phantom_id.clone(),
    })
}

/// Noise2Noise sample: input from realization `a`, target from `b`.
pub fn assemble_n2n(a: &Reconstruction, b: &Reconstruction, bin: usize) -> Result<SampleRecord> {
    require_density(a)?;
    require_density(b)?;
    if a.phantom_id != b.phantom_id {
        return Err(Error::config(format!(
            "N2N pair mixes phantoms {} and {}",
            a.phantom_id, b.phantom_id
        )));
    }
    let (sa, sb) = match (a.seed, b.seed) {
        (Some(sa), Some(sb)) => (sa, sb),
        _ => return Err(Error::config("N2N needs two noisy realizations")),
    };
    if sa == sb {
        return Err(Error::config(format!(
            "N2N realizations share seed {sa}; their noise would not be independent"
        )));
    }
    Ok(SampleRecord {
        inputs: vec![single(a, bin)?.clone()],
        target: single(b, bin)?.clone(),
        mode: Mode::N2n,
        target_bin: bin,
        seeds: vec![sa, sb],
        phantom_id: a.phantom_id.clone(),
    })
}

/// Noise2Clean sample: noisy input, noise-free target.
pub fn assemble_n2c(noisy: &Reconstruction, clean: &Reconstruction, bin: usize) -> Result<SampleRecord> {
    require_density(noisy)?;
    require_density(clean)?;
    if noisy.phantom_id != clean.phantom_id {
        return Err(Error::config("N2C pair mixes phantoms"));
    }
    if clean.seed.is_some() {
        return Err(Error::config("N2C target must be the noise-free reconstruction"));
    }
    let seed = noisy
        .seed
        .ok_or_else(|| Error::config("N2C input must be a noisy realization"))?;
    Ok(SampleRecord {
        inputs: vec![single(noisy, bin)?.clone()],
        target: single(clean, bin)?.clone(),
        mode: Mode::N2c,
        target_bin: bin,
        seeds: vec![seed],
        phantom_id: noisy.phantom_id.clone(),
    })
}

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios(pub [f64; 3]);

impl Default for SplitRatios {
    fn default() -> Self {
        Self([0.8, 0.1, 0.1])
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    /// `8:1:1` or `0.8,0.1,0.1`; normalized to sum to one.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split([':', ','])
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::config(format!("invalid split ratios `{s}`")))?;
        match parts[..] {
            [a, b, c] => SplitRatios([a, b, c]).normalized(),
            _ => Err(Error::config(format!("split ratios need three parts, got `{s}`"))),
        }
    }
}

impl SplitRatios {
    pub fn normalized(self) -> Result<Self> {
        let total: f64 = self.0.iter().sum();
        if self.0.iter().any(|&r| !(r >= 0.0)) || !(total > 0.0) {
            return Err(Error::config("split ratios must be non-negative with a positive sum"));
        }
        Ok(Self(self.0.map(|r| r / total)))
    }

    /// Phantoms per split for `n` phantoms.
    ///
    /// Largest-remainder rounding (ties go to the earlier split). When that
    /// leaves the test split empty while the test ratio is positive and
    /// `n >= 2`, one phantom moves from the largest split to test.
    pub fn counts(&self, n: usize) -> Result<[usize; 3]> {
        let r = self.normalized()?.0;
        let quotas = r.map(|x| x * n as f64);
        let mut counts = quotas.map(|q| q.floor() as usize);
        let mut left = n - counts.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - quotas[a].floor();
            let fb = quotas[b] - quotas[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        if counts[2] == 0 && r[2] > 0.0 && n >= 2 {
            let donor = if counts[0] >= counts[1] { 0 } else { 1 };
            counts[donor] -= 1;
            counts[2] += 1;
        }
        for (name, i) in [("train", 0), ("validation", 1), ("test", 2)] {
            if counts[i] == 0 && r[i] > 0.0 {
                log::warn!("{name} split is empty for {n} phantoms at ratios {:?}", self.0);
            }
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Phantom ids per split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn of(&self, id: &str) -> Option<Split> {
        if self.train.iter().any(|p| p == id) {
            Some(Split::Train)
        } else if self.val.iter().any(|p| p == id) {
            Some(Split::Val)
        } else if self.test.iter().any(|p| p == id) {
            Some(Split::Test)
        } else {
            None
        }
    }

    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Seeded shuffle of phantom ids, then consecutive blocks per split.
pub fn split_phantoms(ids: &[String], ratios: &SplitRatios, seed: u64) -> Result<SplitAssignment> {
    let unique: BTreeSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::config("phantom ids must be unique"));
    }
    let [n_train, n_val, _] = ratios.counts(ids.len())?;
    let mut order: Vec<String> = ids.to_vec();
    order.sort();
    order.shuffle(&mut KeyedRng::new(&[seed, stream::SPLIT]));
    let mut rest = order.into_iter();
    let train = rest.by_ref().take(n_train).collect();
    let val = rest.by_ref().take(n_val).collect();
    let test = rest.collect();
    Ok(SplitAssignment { train, val, test })
}

/// Everything reconstructed for one phantom, in attenuation units.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomImages {
    pub phantom_id: String,
    pub noisy: Vec<Reconstruction>,
    pub clean: Option<Reconstruction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSettings {
    pub ratios: SplitRatios,
    /// Take the s2ms channel-sum input from the second realization.
    pub decorrelated_sum: bool,
    /// Emit both (A→B) and (B→A) N2N pairs.
    pub n2n_both_directions: bool,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        Self {
            ratios: SplitRatios::default(),
            decorrelated_sum: false,
            n2n_both_directions: false,
        }
    }
}

/// Builds the records of one phantom for `mode`, one per target bin.
pub fn phantom_records(
    images: &PhantomImages,
    mode: Mode,
    model: &SpectralModel,
    settings: &DatasetSettings,
) -> Result<Vec<SampleRecord>> {
    use crate::convert::set_to_density;
    let to_density = |r: &Reconstruction| -> Result<Reconstruction> {
        Ok(Reconstruction {
            phantom_id: r.phantom_id.clone(),
            seed: r.seed,
            images: set_to_density(&r.images, model)?,
        })
    };
    let first = images
        .noisy
        .first()
        .ok_or_else(|| Error::config(format!("phantom {} has no noisy reconstruction", images.phantom_id)))?;
    let a = to_density(first)?;
    let bins = 0..model.num_bins();
    match mode {
        Mode::S2ms => {
            if settings.decorrelated_sum {
                let alt = images.noisy.get(1).ok_or_else(|| {
                    Error::config("decorrelated_sum needs a second noise realization")
                })?;
                let b = to_density(alt)?;
                bins.map(|k| assemble_s2ms_with_sum(&a, &b, k)).collect()
            } else {
                bins.map(|k| assemble_s2ms(&a, k)).collect()
            }
        }
        Mode::N2n => {
            let second = images.noisy.get(1).ok_or_else(|| {
                Error::config(format!(
                    "n2n needs two noise realizations; phantom {} has {}",
                    images.phantom_id,
                    images.noisy.len()
                ))
            })?;
            let b = to_density(second)?;
            let mut out = Vec::new();
            for k in bins {
                out.push(assemble_n2n(&a, &b, k)?);
                if settings.n2n_both_directions {
                    out.push(assemble_n2n(&b, &a, k)?);
                }
            }
            Ok(out)
        }
        Mode::N2c => {
            let clean = images.clean.as_ref().ok_or_else(|| {
                Error::config(format!("n2c needs the noise-free reconstruction of {}", images.phantom_id))
            })?;
            let c = to_density(clean)?;
            bins.map(|k| assemble_n2c(&a, &c, k)).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub index: usize,
    pub split: Split,
    pub phantom_id: String,
    pub mode: Mode,
    pub target_channel: Channel,
    pub input_channels: Vec<Channel>,
    pub seeds: Vec<u64>,
    /// Relative to the dataset directory; `[C, H, W]` f32.
    pub input_file: String,
    /// Relative to the dataset directory; `[1, H, W]` f32.
    pub target_file: String,
    /// κ used to bring the target back to attenuation, cm²/g.
    pub target_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub mode: Mode,
    #[serde(rename = "N")]
    pub n: usize,
    pub split_ratios: SplitRatios,
    pub splits: SplitAssignment,
    pub master_seed: u64,
    pub geometry_hash: String,
    pub spectral_hash: String,
    pub spectral: SpectralModel,
    pub image_size: usize,
    /// cm
    pub pixel_pitch: f64,
    pub units: Units,
    pub in_channels: usize,
    pub records: Vec<RecordEntry>,
}

impl DatasetManifest {
    /// Reads `dir/manifest.json` and checks it against the files on disk.
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let m: Self = read_json(&path)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::format(&path, format!("unsupported manifest version {}", m.version)));
        }
        if m.n != m.records.len() {
            return Err(Error::format(
                &path,
                format!("manifest says N = {} but lists {} records", m.n, m.records.len()),
            ));
        }
        for r in &m.records {
            for f in [&r.input_file, &r.target_file] {
                let p = dir.join(f);
                if !p.is_file() {
                    return Err(Error::format(&path, format!("record {} refers to missing {}", r.index, p.display())));
                }
            }
        }
        Ok(m)
    }

    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &RecordEntry> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

/// Identity of a run that a dataset records.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetProvenance {
    pub master_seed: u64,
    pub geometry_hash: String,
    pub spectral_hash: String,
}

fn stack_planes(images: &[ImageGrid]) -> Result<Tensor> {
    let first = images.first().ok_or_else(|| Error::shape("empty image stack"))?;
    let n = first.size();
    let mut values = Vec::with_capacity(images.len() * n * n);
    for img in images {
        if img.size() != n {
            return Err(Error::shape("images in a stack differ in size"));
        }
        values.extend_from_slice(&img.data);
    }
    Tensor::from_f64(vec![images.len() as u64, n as u64, n as u64], &values)
}

/// Writes the records of every phantom and the manifest (last).
///
/// Record files go to `samples/<split>/`, named after phantom, target
/// channel and record index.
pub fn write_dataset(
    out_dir: &Path,
    mode: Mode,
    phantoms: &[PhantomImages],
    model: &SpectralModel,
    settings: &DatasetSettings,
    provenance: &DatasetProvenance,
) -> Result<DatasetManifest> {
    let ids: Vec<String> = phantoms.iter().map(|p| p.phantom_id.clone()).collect();
    let splits = split_phantoms(&ids, &settings.ratios, provenance.master_seed)?;
    let mut records = Vec::new();
    let mut shape: Option<(usize, f64)> = None;
    for split in Split::ALL {
        for id in splits.ids(split) {
            let ph = phantoms.iter().find(|p| &p.phantom_id == id).expect("split ids come from phantoms");
            for rec in phantom_records(ph, mode, model, settings)? {
                let index = records.len();
                let size = rec.target.size();
                match shape {
                    None => shape = Some((size, rec.target.pitch())),
                    Some((s, _)) if s != size => {
                        return Err(Error::shape(format!("phantom {id} reconstructed at {size}px, others at {s}px")))
                    }
                    _ => {}
                }
                let stem = format!("samples/{split}/{id}_{}_{index:05}", Channel::Bin(rec.target_bin));
                let input_file = format!("{stem}_input.s2t");
                let target_file = format!("{stem}_target.s2t");
                stack_planes(&rec.inputs)?.write(&out_dir.join(&input_file))?;
                stack_planes(std::slice::from_ref(&rec.target))?.write(&out_dir.join(&target_file))?;
                records.push(RecordEntry {
                    index,
                    split,
                    phantom_id: rec.phantom_id.clone(),
                    mode,
                    target_channel: Channel::Bin(rec.target_bin),
                    input_channels: rec.input_channels(),
                    seeds: rec.seeds.clone(),
                    input_file,
                    target_file,
                    target_kappa: model.kappa_ref[rec.target_bin],
                });
            }
        }
    }
    let (image_size, pixel_pitch) = shape.unwrap_or((0, 0.0));
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        mode,
        n: records.len(),
        split_ratios: settings.ratios.normalized()?,
        splits,
        master_seed: provenance.master_seed,
        geometry_hash: provenance.geometry_hash.clone(),
        spectral_hash: provenance.spectral_hash.clone(),
        spectral: model.clone(),
        image_size,
        pixel_pitch,
        units: Units::Density,
        in_channels: mode.input_channels(model.num_bins()),
        records,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Reads one record back as `(inputs [C,H,W], target [1,H,W])`.
pub fn load_record(dir: &Path, entry: &RecordEntry) -> Result<(Tensor, Tensor)> {
    let input = Tensor::read(&dir.join(&entry.input_file))?;
    let target = Tensor::read(&dir.join(&entry.target_file))?;
    Ok((input, target))
}

pub fn dataset_dir(run_dir: &Path, mode: Mode) -> PathBuf {
    run_dir.join(format!("dataset_{mode}"))
}
