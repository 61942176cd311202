//! Energy bins, photon counting with Poisson noise, log transform and the
//! channel-sum construction.

use std::path::Path;

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Channel;
use crate::projector::Sinogram;
use crate::rng::{stream, KeyedRng};

/// Water κ at the default bin centres, cm²/g (same values as the bundled table).
pub const WATER_KAPPA: [f64; 4] = [0.2893, 0.2211, 0.1937, 0.1767];

/// Counts below this value are clamped before the log transform.
pub const MIN_COUNT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralModel {
    /// (E_low, E_high) in keV.
    pub bins: Vec<(f64, f64)>,
    /// Fraction of the emitted photons landing in each bin.
    pub weights: Vec<f64>,
    /// Photons emitted along each ray, summed over bins.
    pub n0_total: f64,
    /// Attenuation-to-density coefficient per bin, cm²/g.
    pub kappa_ref: Vec<f64>,
    /// Coefficient for the channel-sum image, cm²/g.
    pub kappa_sum: f64,
}

impl Default for SpectralModel {
    fn default() -> Self {
        let weights = vec![0.28, 0.27, 0.25, 0.20];
        let kappa_ref = WATER_KAPPA.to_vec();
        let kappa_sum = flux_weighted(&weights, &kappa_ref);
        Self {
            bins: vec![(30.0, 45.0), (45.0, 60.0), (60.0, 80.0), (80.0, 100.0)],
            weights,
            n0_total: 1e5,
            kappa_ref,
            kappa_sum,
        }
    }
}

/// Σ w_k κ_k.
pub fn flux_weighted(weights: &[f64], kappa: &[f64]) -> f64 {
    weights.iter().zip(kappa).map(|(w, k)| w * k).sum()
}

impl SpectralModel {
    /// Builds a model with `kappa_sum` set to the flux-weighted mean of `kappa_ref`.
    pub fn new(bins: Vec<(f64, f64)>, weights: Vec<f64>, n0_total: f64, kappa_ref: Vec<f64>) -> Result<Self> {
        let kappa_sum = flux_weighted(&weights, &kappa_ref);
        let m = Self {
            bins,
            weights,
            n0_total,
            kappa_ref,
            kappa_sum,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn channels(&self) -> impl Iterator<Item = Channel> {
        (0..self.num_bins()).map(Channel::Bin)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins.is_empty() {
            return Err(Error::config("spectral model needs at least one bin"));
        }
        for (i, &(lo, hi)) in self.bins.iter().enumerate() {
            if !(hi > lo) {
                return Err(Error::config(format!("bin{} has E_high <= E_low", i + 1)));
            }
            if i > 0 && self.bins[i - 1].1 != lo {
                return Err(Error::config(format!(
                    "bins must be contiguous: bin{} ends at {} but bin{} starts at {}",
                    i,
                    self.bins[i - 1].1,
                    i + 1,
                    lo
                )));
            }
        }
        if self.weights.len() != self.num_bins() || self.kappa_ref.len() != self.num_bins() {
            return Err(Error::config("weights and kappa_ref need one entry per bin"));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::config("spectral weights must be non-negative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("spectral weights sum to {total}, expected 1")));
        }
        if !(self.n0_total > 0.0) || !self.n0_total.is_finite() {
            return Err(Error::config("n0_total must be positive"));
        }
        if self.kappa_ref.iter().chain([&self.kappa_sum]).any(|&k| !(k > 0.0)) {
            return Err(Error::config("every kappa must be positive"));
        }
        Ok(())
    }

    pub fn check_bin(&self, bin: usize) -> Result<()> {
        if bin < self.num_bins() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "bin{} out of range for a {}-bin model",
                bin + 1,
                self.num_bins()
            )))
        }
    }

    /// Unattenuated photons per ray in `channel`.
    pub fn flux(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Bin(k) => self.n0_total * self.weights[k],
            Channel::Sum => self.n0_total,
        }
    }

    pub fn kappa(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Bin(k) => self.kappa_ref[k],
            Channel::Sum => self.kappa_sum,
        }
    }
}

/// Integer photon counts for one channel, `num_views × num_detectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsFrame {
    pub views: usize,
    pub detectors: usize,
    pub counts: Vec<u32>,
    pub channel: Channel,
    pub seed: u64,
    /// Expected counts, kept when requested.
    pub noiseless_lambda: Option<Vec<f64>>,
}

/// Expected counts λ for one bin, `views × detectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedCounts {
    pub views: usize,
    pub detectors: usize,
    pub lambda: Vec<f64>,
    pub channel: Channel,
}

/// λ = n0_total · w_k · exp(−p).
pub fn expected_counts(sino: &Sinogram, model: &SpectralModel, bin: usize) -> Result<ExpectedCounts> {
    model.check_bin(bin)?;
    let flux = model.flux(Channel::Bin(bin));
    Ok(ExpectedCounts {
        views: sino.views,
        detectors: sino.detectors,
        lambda: sino.data.iter().map(|&p| flux * (-p).exp()).collect(),
        channel: Channel::Bin(bin),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DrawOptions {
    /// Round λ instead of sampling.
    pub noiseless: bool,
    /// Keep λ in the returned frame.
    pub keep_lambda: bool,
}

/// Independent Poisson draw per entry.
///
/// Entry `(v, d)` of bin `k` uses the stream addressed by
/// `(seed, COUNTS, k, v, d)`, so a frame is identical whatever the thread count.
pub fn draw_counts(expected: &ExpectedCounts, seed: u64, opts: DrawOptions) -> Result<CountsFrame> {
    if let Some(&bad) = expected.lambda.iter().find(|&&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::config(format!("expected counts must be finite and non-negative, got {bad}")));
    }
    if expected.lambda.iter().any(|&l| l > u32::MAX as f64 / 2.0) {
        return Err(Error::config("expected counts exceed the integer count range"));
    }
    let bin = match expected.channel {
        Channel::Bin(k) => k as u64,
        Channel::Sum => u64::MAX,
    };
    let det = expected.detectors;
    let mut counts = vec![0u32; expected.lambda.len()];
    counts
        .par_chunks_mut(det.max(1))
        .zip(expected.lambda.par_chunks(det.max(1)))
        .enumerate()
        .for_each(|(view, (out, lam))| {
            for (d, (c, &l)) in out.iter_mut().zip(lam).enumerate() {
                *c = if opts.noiseless {
                    l.round() as u32
                } else {
                    let mut rng = KeyedRng::new(&[seed, stream::COUNTS, bin, view as u64, d as u64]);
                    sample_poisson(l, &mut rng)
                };
            }
        });
    Ok(CountsFrame {
        views: expected.views,
        detectors: expected.detectors,
        counts,
        channel: expected.channel,
        seed,
        noiseless_lambda: opts.keep_lambda.then(|| expected.lambda.clone()),
    })
}

pub fn sample_poisson(lambda: f64, rng: &mut KeyedRng) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(lambda).expect("positive finite rate").sample(rng);
    draw as u32
}

/// p̂ = −ln(max(c, 1) / flux).
pub fn counts_to_projection(frame: &CountsFrame, model: &SpectralModel) -> Result<Sinogram> {
    let flux = match frame.channel {
        Channel::Bin(k) => {
            model.check_bin(k)?;
            model.flux(frame.channel)
        }
        Channel::Sum => model.n0_total,
    };
    if !(flux > 0.0) {
        return Err(Error::config(format!(
            "{} has zero spectral weight; its counts cannot be log-transformed",
            frame.channel
        )));
    }
    let data = frame
        .counts
        .iter()
        .map(|&c| -((c as f64).max(MIN_COUNT) / flux).ln())
        .collect();
    Sinogram::new(frame.views, frame.detectors, data, frame.channel)
}

/// Per-entry sum of all bin frames, tagged `sum`.
pub fn channel_sum_counts(frames: &[CountsFrame]) -> Result<CountsFrame> {
    let first = frames
        .first()
        .ok_or_else(|| Error::config("channel sum needs at least one frame"))?;
    for f in frames {
        if f.views != first.views || f.detectors != first.detectors {
            return Err(Error::shape(format!(
                "{} is {}x{} but {} is {}x{}",
                f.channel, f.views, f.detectors, first.channel, first.views, first.detectors
            )));
        }
        if f.channel == Channel::Sum {
            return Err(Error::config("channel sum input already tagged `sum`"));
        }
    }
    let mut counts = vec![0u32; first.counts.len()];
    for f in frames {
        for (acc, &c) in counts.iter_mut().zip(&f.counts) {
            *acc += c;
        }
    }
    Ok(CountsFrame {
        views: first.views,
        detectors: first.detectors,
        counts,
        channel: Channel::Sum,
        seed: first.seed,
        noiseless_lambda: None,
    })
}

/// Noise-free channel-sum projection: −ln Σ_k w_k exp(−p_k).
pub fn channel_sum_projection(sinos: &[Sinogram], model: &SpectralModel) -> Result<Sinogram> {
    if sinos.len() != model.num_bins() {
        return Err(Error::config(format!(
            "channel sum needs {} bin sinograms, got {}",
            model.num_bins(),
            sinos.len()
        )));
    }
    let first = &sinos[0];
    for s in sinos {
        if !s.same_shape(first) {
            return Err(Error::shape("bin sinograms differ in shape"));
        }
    }
    let data = (0..first.data.len())
        .map(|i| {
            let t: f64 = sinos
                .iter()
                .zip(&model.weights)
                .map(|(s, w)| w * (-s.data[i]).exp())
                .sum();
            -t.ln()
        })
        .collect();
    Sinogram::new(first.views, first.detectors, data, Channel::Sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(p: f64, views: usize, dets: usize, ch: Channel) -> Sinogram {
        Sinogram::new(views, dets, vec![p; views * dets], ch).unwrap()
    }

    #[test]
    fn default_model_is_valid() {
        let m = SpectralModel::default();
        m.validate().unwrap();
        assert_eq!(m.num_bins(), 4);
        assert!((m.kappa_sum - flux_weighted(&m.weights, &m.kappa_ref)).abs() < 1e-15);
    }

    #[test]
    fn validation_catches_bad_models() {
        let mut m = SpectralModel::default();
        m.weights[0] = 0.3;
        assert!(m.validate().is_err());
        let mut m = SpectralModel::default();
        m.bins[2] = (61.0, 80.0);
        assert!(m.validate().is_err());
        let mut m = SpectralModel::default();
        m.n0_total = 0.0;
        assert!(m.validate().is_err());
        let mut m = SpectralModel::default();
        m.kappa_ref[1] = -0.1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn expected_counts_at_zero_and_ln2() {
        let mut m = SpectralModel::default();
        m.weights = vec![0.25; 4];
        let lam = expected_counts(&flat(0.0, 3, 5, Channel::Bin(1)), &m, 1).unwrap();
        assert!(lam.lambda.iter().all(|&l| (l - 25000.0).abs() < 1e-9));
        let lam = expected_counts(&flat(2f64.ln(), 3, 5, Channel::Bin(1)), &m, 1).unwrap();
        assert!(lam.lambda.iter().all(|&l| (l - 12500.0).abs() < 1e-9));
    }

    #[test]
    fn zero_rate_gives_zero_counts() {
        let e = ExpectedCounts {
            views: 2,
            detectors: 3,
            lambda: vec![0.0; 6],
            channel: Channel::Bin(0),
        };
        let f = draw_counts(&e, 9, DrawOptions::default()).unwrap();
        assert!(f.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn same_seed_same_frame_different_seed_differs() {
        let e = ExpectedCounts {
            views: 8,
            detectors: 16,
            lambda: vec![500.0; 128],
            channel: Channel::Bin(2),
        };
        let a = draw_counts(&e, 11, DrawOptions::default()).unwrap();
        let b = draw_counts(&e, 11, DrawOptions::default()).unwrap();
        let c = draw_counts(&e, 12, DrawOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn noiseless_flag_rounds() {
        let e = ExpectedCounts {
            views: 1,
            detectors: 3,
            lambda: vec![1.4, 2.6, 1000.5],
            channel: Channel::Bin(0),
        };
        let f = draw_counts(&e, 0, DrawOptions { noiseless: true, keep_lambda: true }).unwrap();
        assert_eq!(f.counts, vec![1, 3, 1001]);
        assert_eq!(f.noiseless_lambda.as_deref(), Some(&e.lambda[..]));
    }

    #[test]
    fn negative_rate_rejected() {
        let e = ExpectedCounts {
            views: 1,
            detectors: 1,
            lambda: vec![-1.0],
            channel: Channel::Bin(0),
        };
        assert!(draw_counts(&e, 0, DrawOptions::default()).is_err());
    }

    #[test]
    fn log_transform_fixed_points() {
        let m = SpectralModel::default();
        let flux = m.flux(Channel::Bin(0));
        let frame = CountsFrame {
            views: 1,
            detectors: 3,
            counts: vec![flux as u32, (flux / 2.0) as u32, 0],
            channel: Channel::Bin(0),
            seed: 0,
            noiseless_lambda: None,
        };
        let p = counts_to_projection(&frame, &m).unwrap();
        assert!(p.data[0].abs() < 1e-12);
        assert!((p.data[1] - 2f64.ln()).abs() < 1e-12);
        // zero counts clamp to one count
        assert!((p.data[2] - flux.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_bin_cannot_be_transformed() {
        let m = SpectralModel::new(
            vec![(30.0, 45.0), (45.0, 60.0)],
            vec![1.0, 0.0],
            1e5,
            vec![0.3, 0.2],
        )
        .unwrap();
        let frame = CountsFrame {
            views: 1,
            detectors: 1,
            counts: vec![10],
            channel: Channel::Bin(1),
            seed: 0,
            noiseless_lambda: None,
        };
        assert!(matches!(counts_to_projection(&frame, &m), Err(Error::Config(_))));
    }

    #[test]
    fn noiseless_sum_of_identical_bins_recovers_projection() {
        let m = SpectralModel::default();
        let p = 0.7;
        let frames: Vec<CountsFrame> = (0..4)
            .map(|k| {
                let e = expected_counts(&flat(p, 2, 2, Channel::Bin(k)), &m, k).unwrap();
                draw_counts(&e, 0, DrawOptions { noiseless: true, keep_lambda: false }).unwrap()
            })
            .collect();
        let sum = channel_sum_counts(&frames).unwrap();
        let ps = counts_to_projection(&sum, &m).unwrap();
        assert_eq!(ps.channel, Channel::Sum);
        // Rounding each bin to integers perturbs the total by at most 2 counts.
        let tol = 2.0 / (m.n0_total * (-p as f64).exp());
        assert!(ps.data.iter().all(|&v| (v - p).abs() < tol));

        let sinos: Vec<Sinogram> = (0..4).map(|k| flat(p, 2, 2, Channel::Bin(k))).collect();
        let exact = channel_sum_projection(&sinos, &m).unwrap();
        assert!(exact.data.iter().all(|&v| (v - p).abs() < 1e-14));
    }

    #[test]
    fn two_bin_sum_matches_scalar_formula() {
        let m = SpectralModel::new(vec![(30.0, 60.0), (60.0, 100.0)], vec![0.6, 0.4], 1e5, vec![0.25, 0.18])
            .unwrap();
        let a = flat(1.3, 1, 4, Channel::Bin(0));
        let b = flat(0.4, 1, 4, Channel::Bin(1));
        let s = channel_sum_projection(&[a, b], &m).unwrap();
        let oracle = -(0.6 * (-1.3f64).exp() + 0.4 * (-0.4f64).exp()).ln();
        assert!(s.data.iter().all(|&v| (v - oracle).abs() < 1e-14));
    }

    #[test]
    fn single_bin_sum_equals_bin() {
        let m = SpectralModel::new(vec![(30.0, 100.0)], vec![1.0], 1e5, vec![0.2]).unwrap();
        let e = expected_counts(&flat(0.9, 3, 3, Channel::Bin(0)), &m, 0).unwrap();
        let f = draw_counts(&e, 5, DrawOptions::default()).unwrap();
        let sum = channel_sum_counts(std::slice::from_ref(&f)).unwrap();
        assert_eq!(sum.counts, f.counts);
        assert_eq!(
            counts_to_projection(&sum, &m).unwrap().data,
            counts_to_projection(&f, &m).unwrap().data
        );
    }

    #[test]
    fn mismatched_frames_rejected() {
        let a = CountsFrame {
            views: 1,
            detectors: 2,
            counts: vec![1, 2],
            channel: Channel::Bin(0),
            seed: 0,
            noiseless_lambda: None,
        };
        let mut b = a.clone();
        b.detectors = 1;
        b.counts = vec![1];
        b.channel = Channel::Bin(1);
        assert!(matches!(channel_sum_counts(&[a, b]), Err(Error::Shape(_))));
    }
}
