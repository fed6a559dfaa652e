//! Synthetic multi-subject, multi-device SSVEP epochs.
//!
//! Each trial is `M·s(t) + noise`: `s` is a harmonic latent source shared by
//! all subjects for a given stimulus, `M` a mixing matrix drawn once per
//! (subject, device), and the noise is spatially independent 1/f background
//! with a white floor. Phase is defined at stimulus onset. The response
//! reaches the electrodes `L` seconds after onset, `L` being the device's
//! latency, so an epoch cut at `L` starts where the response starts and
//! sample `n` carries `s(n/fs)` on every device.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::domain::{standard_stimulus_table, validate_dataset, Dataset, DomainId, Epoch, Montage, StimulusSpec};
use crate::error::{Error, Result};

/// Power of the white floor relative to the 1/f component.
pub const WHITE_FLOOR_DB: f64 = -20.0;

/// How the latent source reaches the electrodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mixing {
    /// One spatial pattern for the whole source.
    #[default]
    Rank1,
    /// A separate spatial pattern per harmonic.
    PerHarmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_trials_per_stimulus: usize,
    /// Targets are taken from the 40-entry table at indices 1, 6, 11, …
    pub n_targets: usize,
    pub sample_rate_hz: f64,
    pub duration_seconds: f64,
    pub n_harmonics: usize,
    pub harmonic_decay: f64,
    pub snr_db: f64,
    /// Multiplies the source after the noise level is set; 0 gives pure noise.
    pub signal_gain: f64,
    pub mixing: Mixing,
    pub device_montages: Vec<Montage>,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 5,
            n_trials_per_stimulus: 6,
            n_targets: 8,
            sample_rate_hz: 256.0,
            duration_seconds: 1.5,
            n_harmonics: 5,
            harmonic_decay: 1.0,
            snr_db: -18.0,
            signal_gain: 1.0,
            mixing: Mixing::Rank1,
            device_montages: vec![Montage::active_two(256.0), Montage::q30(256.0)],
            rng_seed: 20_231_105,
        }
    }
}

impl SynthConfig {
    pub fn stimuli(&self) -> Vec<StimulusSpec> {
        let table = standard_stimulus_table();
        let step = (table.len() / self.n_targets.max(1)).max(1);
        table.into_iter().step_by(step).take(self.n_targets).collect()
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_seconds * self.sample_rate_hz).round() as usize
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_subjects == 0 {
            out.push("synth.nSubjects must be >= 1".into());
        }
        if self.n_trials_per_stimulus == 0 {
            out.push("synth.nTrialsPerStimulus must be >= 1".into());
        }
        if self.n_targets == 0 || self.n_targets > 40 {
            out.push(format!("synth.nTargets must be in 1..=40, got {}", self.n_targets));
        }
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            out.push(format!("synth.sampleRateHz must be positive, got {}", self.sample_rate_hz));
        }
        if !(self.duration_seconds > 0.0) || self.n_samples() < 2 {
            out.push(format!("synth.durationSeconds too short: {}", self.duration_seconds));
        }
        if self.n_harmonics == 0 {
            out.push("synth.nHarmonics must be >= 1".into());
        }
        if !self.harmonic_decay.is_finite() {
            out.push("synth.harmonicDecay must be finite".into());
        }
        if !self.snr_db.is_finite() {
            out.push("synth.snrDb must be finite".into());
        }
        if !self.signal_gain.is_finite() {
            out.push("synth.signalGain must be finite".into());
        }
        if self.device_montages.is_empty() {
            out.push("synth.deviceMontages must not be empty".into());
        }
        for (i, m) in self.device_montages.iter().enumerate() {
            for p in m.problems() {
                out.push(format!("synth.deviceMontages[{i}]: {p}"));
            }
        }
        if self.n_targets >= 1 && self.n_targets <= 40 && self.sample_rate_hz > 0.0 {
            let fmax = self.stimuli().iter().map(|s| s.frequency_hz).fold(0.0, f64::max);
            let top = self.n_harmonics as f64 * fmax;
            if top >= self.sample_rate_hz / 2.0 {
                out.push(format!(
                    "synth.nHarmonics: harmonic {} of {fmax} Hz reaches {top} Hz, at or above Nyquist",
                    self.n_harmonics
                ));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    /// Seed for one (subject, device) stream.
    pub fn derived_seed(&self, subject: usize, device: usize) -> u64 {
        self.rng_seed ^ subject as u64 ^ ((device as u64) << 32)
    }
}

pub fn subject_name(subject: usize) -> String {
    format!("S{:02}", subject + 1)
}

/// Harmonic components `h^(−decay)·sin(2π·h·f·t + h·φ)`, one row per harmonic,
/// sampled at `t = t0 + n/fs`. Not normalized.
pub fn harmonic_components(spec: &StimulusSpec, cfg: &SynthConfig, t0: f64) -> DMatrix<f64> {
    let n = cfg.n_samples();
    DMatrix::from_fn(cfg.n_harmonics, n, |h, i| {
        let h = (h + 1) as f64;
        let t = t0 + i as f64 / cfg.sample_rate_hz;
        h.powf(-cfg.harmonic_decay) * (2.0 * PI * h * spec.frequency_hz * t + h * spec.phase_rad).sin()
    })
}

/// Unit-RMS latent source for `spec`, starting `t0` seconds after onset.
pub fn latent_ssvep_at(spec: &StimulusSpec, cfg: &SynthConfig, t0: f64) -> Vec<f64> {
    let comps = harmonic_components(spec, cfg, t0);
    let mut s: Vec<f64> = (0..comps.ncols()).map(|j| comps.column(j).sum()).collect();
    let rms = (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
    if rms > 0.0 {
        s.iter_mut().for_each(|v| *v /= rms);
    }
    s
}

/// Unit-RMS latent source sampled from stimulus onset.
pub fn generate_latent_ssvep(spec: &StimulusSpec, cfg: &SynthConfig) -> Vec<f64> {
    latent_ssvep_at(spec, cfg, 0.0)
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit_variance(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter_mut().for_each(|x| *x -= mean);
    let sd = (v.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        v.iter_mut().for_each(|x| *x /= sd);
    }
}

/// Background noise generator: 1/f Gaussian plus a white floor, unit variance.
pub struct NoiseShaper {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    ifft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    gain: Vec<f64>,
}

impl NoiseShaper {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let gain = (0..n)
            .map(|k| {
                let f = k.min(n - k);
                if f == 0 {
                    0.0
                } else {
                    1.0 / (f as f64).sqrt()
                }
            })
            .collect();
        NoiseShaper {
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
            gain,
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.gain.len();
        let white = normal_vec(rng, n);
        let mut buf: Vec<Complex<f64>> = white.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        for (b, g) in buf.iter_mut().zip(&self.gain) {
            *b *= g;
        }
        self.ifft.process(&mut buf);
        let mut pink: Vec<f64> = buf.iter().map(|c| c.re).collect();
        unit_variance(&mut pink);
        let mut floor = normal_vec(rng, n);
        unit_variance(&mut floor);
        let a = 10f64.powf(WHITE_FLOOR_DB / 20.0);
        let mut out: Vec<f64> = pink.iter().zip(&floor).map(|(p, w)| p + a * w).collect();
        unit_variance(&mut out);
        out
    }
}

/// Draws the mixing matrix for one (subject, device): `N_C × 1` for rank-1
/// mixing, `N_C × H` per harmonic.
pub fn draw_mixing(rng: &mut ChaCha8Rng, n_channels: usize, cfg: &SynthConfig) -> DMatrix<f64> {
    let cols = match cfg.mixing {
        Mixing::Rank1 => 1,
        Mixing::PerHarmonic => cfg.n_harmonics,
    };
    DMatrix::from_iterator(n_channels, cols, normal_vec(rng, n_channels * cols))
}

/// Generates the full dataset of one subject on one device.
pub fn generate_subject_dataset(subject: usize, device: usize, cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    if subject >= cfg.n_subjects || device >= cfg.device_montages.len() {
        return Err(Error::InvalidArgument(format!(
            "subject {subject} / device {device} out of range ({} subjects, {} devices)",
            cfg.n_subjects,
            cfg.device_montages.len()
        )));
    }
    let mut montage = cfg.device_montages[device].clone();
    montage.sample_rate_hz = cfg.sample_rate_hz;
    let nc = montage.n_channels();
    let ns = cfg.n_samples();
    let stimuli = cfg.stimuli();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.derived_seed(subject, device));
    let mixing = draw_mixing(&mut rng, nc, cfg);
    let shaper = NoiseShaper::new(ns);

    let mut epochs = Vec::with_capacity(stimuli.len() * cfg.n_trials_per_stimulus);
    // response delay equals the epoch latency
    let t0 = 0.0;
    for spec in &stimuli {
        let clean = match cfg.mixing {
            Mixing::Rank1 => {
                let s = latent_ssvep_at(spec, cfg, t0);
                &mixing * DMatrix::from_row_slice(1, ns, &s)
            }
            Mixing::PerHarmonic => {
                let comps = harmonic_components(spec, cfg, t0);
                let total: Vec<f64> = (0..ns).map(|j| comps.column(j).sum()).collect();
                let rms = (total.iter().map(|v| v * v).sum::<f64>() / ns as f64).sqrt();
                &mixing * comps / rms.max(f64::MIN_POSITIVE)
            }
        };
        let signal_power = clean.norm_squared() / (nc * ns) as f64;
        let noise_sd = (signal_power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();
        for trial in 0..cfg.n_trials_per_stimulus {
            let mut data = &clean * cfg.signal_gain;
            for c in 0..nc {
                let noise = shaper.sample(&mut rng);
                for (j, v) in noise.into_iter().enumerate() {
                    data[(c, j)] += noise_sd * v;
                }
            }
            epochs.push(Epoch::new(data, spec.index, trial));
        }
    }
    let domain = DomainId::new(subject_name(subject), "1", montage.device_name.clone());
    let ds = Dataset::new(domain, montage, stimuli, epochs);
    debug_assert!(validate_dataset(&ds).is_empty());
    Ok(ds)
}

/// All subjects on one device, in subject order.
pub fn generate_device(device: usize, cfg: &SynthConfig) -> Result<Vec<Dataset>> {
    use rayon::prelude::*;
    (0..cfg.n_subjects)
        .into_par_iter()
        .map(|s| generate_subject_dataset(s, device, cfg))
        .collect()
}
