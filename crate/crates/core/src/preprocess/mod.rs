//! Signal conditioning: resampling, re-referencing, latency-shifted epoching,
//! power-line notch and the sub-band filter bank.
//!
//! The chain order is resample → re-reference → epoch → notch → filter bank.
//! Every filter is applied forward-backward with [`PreprocessConfig::padding_seconds`]
//! of edge extension on each side: odd reflection for the filter bank (which
//! keeps it exactly linear), autoregressive extrapolation for the notch.

pub mod iir;
pub mod resample;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{round_index, Dataset, DomainId, Epoch, Montage, StimulusSpec};
use crate::error::{Error, Result};

pub use iir::{design_butterworth_bandpass, design_notch, Biquad, EdgeMode, Sos};
pub use resample::{rational_ratio, resample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub target_rate_hz: f64,
    pub reference_channel: String,
    /// Epoch start relative to stimulus onset (the latency `L`).
    pub epoch_start_seconds: f64,
    pub epoch_duration_seconds: f64,
    pub notch_frequency_hz: f64,
    pub notch_quality_factor: f64,
    /// Edge extension applied on each side by every zero-phase filter.
    pub padding_seconds: f64,
    /// Edge extension used by the notch. The filter bank always reflects.
    pub notch_padding: PaddingMode,
    /// Autoregressive order for [`PaddingMode::Predict`].
    pub prediction_order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaddingMode {
    Reflect,
    Predict,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_rate_hz: 256.0,
            reference_channel: "Fz".into(),
            epoch_start_seconds: 0.15,
            epoch_duration_seconds: 1.5,
            notch_frequency_hz: 60.0,
            notch_quality_factor: 35.0,
            padding_seconds: 0.25,
            notch_padding: PaddingMode::Predict,
            prediction_order: 8,
        }
    }
}

impl PreprocessConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.target_rate_hz > 0.0) {
            out.push(format!("preprocess.targetRateHz must be positive, got {}", self.target_rate_hz));
        }
        if !(self.target_rate_hz > 2.0 * self.notch_frequency_hz) {
            out.push(format!(
                "preprocess.notchFrequencyHz {} must lie below Nyquist of {} Hz",
                self.notch_frequency_hz, self.target_rate_hz
            ));
        }
        if !(self.notch_frequency_hz > 0.0) {
            out.push("preprocess.notchFrequencyHz must be positive".into());
        }
        if !(self.notch_quality_factor > 0.0) {
            out.push("preprocess.notchQualityFactor must be positive".into());
        }
        if !(self.epoch_duration_seconds > 0.0) {
            out.push("preprocess.epochDurationSeconds must be positive".into());
        }
        if !(self.epoch_start_seconds >= 0.0) {
            out.push("preprocess.epochStartSeconds must be non-negative".into());
        }
        if !(self.padding_seconds >= 0.0) {
            out.push("preprocess.paddingSeconds must be non-negative".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(p.join("; ")))
        }
    }

    /// Epoch length in samples, `round(duration · rate)`.
    pub fn epoch_samples(&self) -> usize {
        round_index(self.epoch_duration_seconds * self.target_rate_hz) as usize
    }

    pub fn padding_samples(&self) -> usize {
        round_index(self.padding_seconds * self.target_rate_hz) as usize
    }

    fn notch_edge_mode(&self) -> EdgeMode {
        match self.notch_padding {
            PaddingMode::Reflect => EdgeMode::Reflect,
            PaddingMode::Predict => EdgeMode::Predict {
                order: self.prediction_order,
            },
        }
    }
}

/// Sub-band edges of the filter bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FilterBankSpec {
    pub n_bands: usize,
    /// `(low, high)` in Hz, one pair per band.
    pub band_edges: Vec<(f64, f64)>,
    /// Analog prototype order of each band-pass.
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    4
}

impl Default for FilterBankSpec {
    fn default() -> Self {
        FilterBankSpec::harmonic(5, 8.0, 88.0)
    }
}

impl FilterBankSpec {
    /// Band `k` (1-based) spans `[k·step, upper]` Hz.
    pub fn harmonic(n_bands: usize, step_hz: f64, upper_hz: f64) -> Self {
        FilterBankSpec {
            n_bands,
            band_edges: (1..=n_bands).map(|k| (k as f64 * step_hz, upper_hz)).collect(),
            order: default_order(),
        }
    }

    pub fn problems(&self, sample_rate_hz: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_bands == 0 {
            out.push("filterbank.nBands must be >= 1".into());
        }
        if self.n_bands != self.band_edges.len() {
            out.push(format!(
                "filterbank.nBands = {} but {} band edges given",
                self.n_bands,
                self.band_edges.len()
            ));
        }
        if self.order == 0 {
            out.push("filterbank.order must be >= 1".into());
        }
        let nyquist = sample_rate_hz / 2.0;
        for (k, &(lo, hi)) in self.band_edges.iter().enumerate() {
            if !(lo > 0.0 && lo < hi && hi < nyquist) {
                out.push(format!(
                    "filterbank band {}: need 0 < low < high < {nyquist} Hz, got ({lo}, {hi})",
                    k + 1
                ));
            }
        }
        for (k, w) in self.band_edges.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                out.push(format!("filterbank band {}: low edges must increase strictly", k + 2));
            }
        }
        out
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let p = self.problems(sample_rate_hz);
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidBand(p.join("; ")))
        }
    }
}

/// A designed filter bank ready to decompose epochs.
#[derive(Debug, Clone)]
pub struct FilterBank {
    spec: FilterBankSpec,
    sample_rate_hz: f64,
    pad: usize,
    bands: Vec<Sos>,
}

impl FilterBank {
    pub fn new(spec: &FilterBankSpec, sample_rate_hz: f64, padding_seconds: f64) -> Result<Self> {
        spec.validate(sample_rate_hz)?;
        let bands = spec
            .band_edges
            .iter()
            .map(|&(lo, hi)| design_butterworth_bandpass(spec.order, lo, hi, sample_rate_hz))
            .collect();
        Ok(FilterBank {
            spec: spec.clone(),
            sample_rate_hz,
            pad: round_index(padding_seconds * sample_rate_hz).max(0) as usize,
            bands,
        })
    }

    pub fn spec(&self) -> &FilterBankSpec {
        &self.spec
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, k: usize) -> &Sos {
        &self.bands[k]
    }

    /// One zero-phase band-passed copy of `x` per sub-band.
    pub fn decompose(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        self.bands.iter().map(|sos| filtfilt_rows(sos, x, self.pad)).collect()
    }
}

/// Applies `sos` forward-backward to every row (channel) of `x`.
pub fn filtfilt_rows(sos: &Sos, x: &DMatrix<f64>, pad: usize) -> DMatrix<f64> {
    filtfilt_rows_with(sos, x, pad, EdgeMode::Reflect)
}

fn filtfilt_rows_with(sos: &Sos, x: &DMatrix<f64>, pad: usize, mode: EdgeMode) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    let mut row = vec![0.0; x.ncols()];
    for c in 0..x.nrows() {
        for (dst, src) in row.iter_mut().zip(x.row(c).iter()) {
            *dst = *src;
        }
        let y = sos.filtfilt_with(&row, pad, mode);
        for (j, v) in y.into_iter().enumerate() {
            out[(c, j)] = v;
        }
    }
    out
}

/// Decomposes `x` into the sub-bands of `spec`.
pub fn filter_bank(x: &DMatrix<f64>, spec: &FilterBankSpec, cfg: &PreprocessConfig) -> Result<Vec<DMatrix<f64>>> {
    Ok(FilterBank::new(spec, cfg.target_rate_hz, cfg.padding_seconds)?.decompose(x))
}

/// Zero-phase power-line notch applied to every channel of an epoch.
pub fn notch_filter(epoch: &DMatrix<f64>, cfg: &PreprocessConfig) -> Result<DMatrix<f64>> {
    if !(cfg.notch_frequency_hz < cfg.target_rate_hz / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "notch frequency {} Hz is not below Nyquist ({} Hz)",
            cfg.notch_frequency_hz,
            cfg.target_rate_hz / 2.0
        )));
    }
    let sos = design_notch(cfg.notch_frequency_hz, cfg.notch_quality_factor, cfg.target_rate_hz);
    Ok(filtfilt_rows_with(&sos, epoch, cfg.padding_samples(), cfg.notch_edge_mode()))
}

/// Subtracts the reference channel from every other channel and drops it.
/// Returns the re-referenced matrix and the retained labels.
pub fn rereference(
    signal: &DMatrix<f64>,
    labels: &[String],
    reference_label: &str,
) -> Result<(DMatrix<f64>, Vec<String>)> {
    if labels.len() != signal.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} channels",
            labels.len(),
            signal.nrows()
        )));
    }
    let r = labels
        .iter()
        .position(|l| l == reference_label)
        .ok_or_else(|| Error::ChannelNotFound(reference_label.to_string()))?;
    let keep: Vec<usize> = (0..labels.len()).filter(|&c| c != r).collect();
    let out = DMatrix::from_fn(keep.len(), signal.ncols(), |i, t| signal[(keep[i], t)] - signal[(r, t)]);
    Ok((out, keep.iter().map(|&c| labels[c].clone()).collect()))
}

/// Cuts `[onset + L, onset + L + duration)` from a continuous recording at
/// `cfg.target_rate_hz`. The start index is `round((onset + L)·rate)`.
pub fn extract_epoch(continuous: &DMatrix<f64>, onset_seconds: f64, cfg: &PreprocessConfig) -> Result<DMatrix<f64>> {
    let start = round_index((onset_seconds + cfg.epoch_start_seconds) * cfg.target_rate_hz);
    let len = cfg.epoch_samples() as i64;
    let end = start + len;
    if start < 0 || end > continuous.ncols() as i64 {
        return Err(Error::InsufficientData {
            start,
            end,
            available: continuous.ncols(),
        });
    }
    Ok(continuous.columns(start as usize, len as usize).into_owned())
}

/// A continuous recording with stimulus events, as it comes off a device.
#[derive(Debug, Clone)]
pub struct Recording {
    /// Channels × samples at `sample_rate_hz`, including the reference channel.
    pub data: DMatrix<f64>,
    pub channel_labels: Vec<String>,
    pub sample_rate_hz: f64,
    /// `(onset seconds, stimulus index, trial index)` per event.
    pub events: Vec<(f64, usize, usize)>,
}

/// Runs resample → re-reference → epoch → notch over a recording. Filter-bank
/// decomposition happens later, inside model fitting and classification.
pub fn preprocess_recording(
    rec: &Recording,
    domain: DomainId,
    device_name: &str,
    stimuli: Vec<StimulusSpec>,
    cfg: &PreprocessConfig,
) -> Result<Dataset> {
    cfg.validate()?;
    let resampled = resample(&rec.data, rec.sample_rate_hz, cfg.target_rate_hz)?;
    let (referenced, labels) = rereference(&resampled, &rec.channel_labels, &cfg.reference_channel)?;
    let montage = Montage::new(device_name, labels, cfg.target_rate_hz, cfg.epoch_start_seconds)?;
    let epochs = rec
        .events
        .iter()
        .map(|&(onset, stim, trial)| {
            let raw = extract_epoch(&referenced, onset, cfg)?;
            Ok(Epoch::new(notch_filter(&raw, cfg)?, stim, trial))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(domain, montage, stimuli, epochs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn sine_row(freq: f64, fs: f64, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(1, n, |_, j| (2.0 * PI * freq * j as f64 / fs).sin())
    }

    #[test]
    fn defaults_are_valid() {
        assert!(PreprocessConfig::default().validate().is_ok());
        assert_eq!(PreprocessConfig::default().epoch_samples(), 384);
        assert!(FilterBankSpec::default().validate(256.0).is_ok());
        assert_eq!(
            FilterBankSpec::default().band_edges,
            vec![(8.0, 88.0), (16.0, 88.0), (24.0, 88.0), (32.0, 88.0), (40.0, 88.0)]
        );
    }

    #[test]
    fn invalid_configs_report_every_problem() {
        let cfg = PreprocessConfig {
            target_rate_hz: 100.0,
            epoch_duration_seconds: 0.0,
            ..Default::default()
        };
        assert_eq!(cfg.problems().len(), 2);
        let spec = FilterBankSpec {
            n_bands: 3,
            band_edges: vec![(8.0, 130.0), (4.0, 88.0)],
            order: 4,
        };
        let p = spec.problems(256.0);
        assert_eq!(p.len(), 3, "{p:?}");
        assert!(matches!(spec.validate(256.0), Err(Error::InvalidBand(_))));
    }

    #[test]
    fn rereference_cases() {
        let labels: Vec<String> = ["O1", "Fz", "O2"].map(String::from).to_vec();
        let same = DMatrix::from_fn(3, 10, |_, t| t as f64);
        let (z, kept) = rereference(&same, &labels, "Fz").unwrap();
        assert_eq!(kept, vec!["O1".to_string(), "O2".to_string()]);
        assert!(z.iter().all(|&v| v == 0.0));

        let x = DMatrix::from_fn(3, 10, |c, t| if c == 1 { 0.0 } else { (c * 10 + t) as f64 });
        let (y, _) = rereference(&x, &labels, "Fz").unwrap();
        assert_eq!(y.row(0), x.row(0));
        assert_eq!(y.row(1), x.row(2));

        assert!(matches!(rereference(&x, &labels, "Cz"), Err(Error::ChannelNotFound(_))));
    }

    #[test]
    fn epoch_indices() {
        let rec = DMatrix::from_fn(1, 1000, |_, t| t as f64);
        let cfg = PreprocessConfig::default();
        let e = extract_epoch(&rec, 0.0, &cfg).unwrap();
        assert_eq!(e.ncols(), 384);
        assert_eq!(e[(0, 0)], 38.0);
        assert_eq!(e[(0, 383)], 421.0);

        let cfg17 = PreprocessConfig {
            epoch_start_seconds: 0.17,
            ..Default::default()
        };
        assert_eq!(extract_epoch(&rec, 0.0, &cfg17).unwrap()[(0, 0)], 44.0);

        assert!(matches!(
            extract_epoch(&rec, 2.5, &cfg),
            Err(Error::InsufficientData { start: 678, end: 1062, available: 1000 })
        ));
    }

    #[test]
    fn whole_recording_epoch() {
        let rec = DMatrix::from_fn(2, 384, |c, t| (c + t) as f64);
        let cfg = PreprocessConfig {
            epoch_start_seconds: 0.0,
            ..Default::default()
        };
        assert_eq!(extract_epoch(&rec, 0.0, &cfg).unwrap(), rec);
    }

    #[test]
    fn notch_zero_in_zero_out() {
        let z = DMatrix::zeros(3, 384);
        assert_eq!(notch_filter(&z, &PreprocessConfig::default()).unwrap(), z);
    }

    #[test]
    fn notch_rejects_above_nyquist() {
        let cfg = PreprocessConfig {
            notch_frequency_hz: 130.0,
            ..Default::default()
        };
        assert!(notch_filter(&DMatrix::zeros(1, 10), &cfg).is_err());
    }

    #[test]
    fn filter_bank_zero_input() {
        let out = filter_bank(&DMatrix::zeros(2, 384), &FilterBankSpec::default(), &PreprocessConfig::default()).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|b| b.iter().all(|&v| v == 0.0) && b.shape() == (2, 384)));
    }

    #[test]
    fn filter_bank_rejects_band_above_nyquist() {
        let spec = FilterBankSpec {
            n_bands: 1,
            band_edges: vec![(8.0, 200.0)],
            order: 4,
        };
        assert!(matches!(
            filter_bank(&DMatrix::zeros(1, 10), &spec, &PreprocessConfig::default()),
            Err(Error::InvalidBand(_))
        ));
    }

    #[test]
    fn single_wide_band_is_near_identity() {
        let spec = FilterBankSpec {
            n_bands: 1,
            band_edges: vec![(4.0, 110.0)],
            order: 4,
        };
        let x = sine_row(20.0, 256.0, 384);
        let y = &filter_bank(&x, &spec, &PreprocessConfig::default()).unwrap()[0];
        let ratio = rms(y.as_slice()) / rms(x.as_slice());
        assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn preprocess_chain_produces_384_sample_epochs() {
        let fs = 500.0;
        let n = (fs * 6.0) as usize;
        let labels: Vec<String> = ["PO3", "Fz", "O1"].map(String::from).to_vec();
        let data = DMatrix::from_fn(3, n, |c, t| ((c + 1) as f64 * 0.01 * t as f64).sin());
        let rec = Recording {
            data,
            channel_labels: labels,
            sample_rate_hz: fs,
            events: vec![(0.5, 1, 0), (2.0, 2, 0), (3.0, 1, 1), (4.0, 2, 1)],
        };
        let stimuli = crate::domain::standard_stimulus_table()[..2].to_vec();
        let ds = preprocess_recording(&rec, DomainId::new("s", "1", "dev"), "dev", stimuli, &PreprocessConfig::default())
            .unwrap();
        assert_eq!(ds.n_channels(), 2);
        assert!(ds.epochs.iter().all(|e| e.n_samples() == 384 && e.n_channels() == 2));
        assert!(crate::domain::validate_dataset_with(&ds, Some(384)).is_empty());
    }
}
