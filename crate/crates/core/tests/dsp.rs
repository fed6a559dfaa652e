use std::f64::consts::PI;

use lst_ssvep::domain::{standard_stimulus_table, DomainId};
use lst_ssvep::preprocess::{
    filter_bank, notch_filter, preprocess_recording, resample, FilterBankSpec, PreprocessConfig, Recording,
};
use nalgebra::DMatrix;

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn sine(freq: f64, fs: f64, n: usize, phase: f64) -> DMatrix<f64> {
    DMatrix::from_fn(1, n, |_, j| (2.0 * PI * freq * j as f64 / fs + phase).sin())
}

#[test]
fn notch_removes_line_noise() {
    let cfg = PreprocessConfig::default();
    let x = sine(60.0, 256.0, 384, 0.4);
    let y = notch_filter(&x, &cfg).unwrap();
    let ratio = rms(y.as_slice()) / rms(x.as_slice());
    assert!(ratio <= 0.1, "60 Hz RMS ratio {ratio}");
}

#[test]
fn notch_keeps_ssvep_band() {
    let cfg = PreprocessConfig::default();
    let x = sine(12.0, 256.0, 384, 1.1);
    let y = notch_filter(&x, &cfg).unwrap();
    // drop 0.1 s of edge on both sides
    let inner = 26..384 - 26;
    let a = rms(&x.as_slice()[inner.clone()]);
    let b = rms(&y.as_slice()[inner]);
    assert!((b / a - 1.0).abs() <= 0.02, "12 Hz RMS ratio {}", b / a);
}

#[test]
fn filter_bank_band_selectivity() {
    let cfg = PreprocessConfig::default();
    let x = sine(12.0, 256.0, 384, 0.3);
    let bands = filter_bank(&x, &FilterBankSpec::default(), &cfg).unwrap();
    assert_eq!(bands.len(), 5);
    let r1 = rms(bands[0].as_slice()) / rms(x.as_slice());
    let r3 = rms(bands[2].as_slice()) / rms(x.as_slice());
    assert!(r1 >= 0.9, "band 1 keeps {r1}");
    assert!(r3 <= 0.1, "band 3 keeps {r3}");
}

#[test]
fn resampled_sine_matches_direct_evaluation() {
    let fs_in = 2048.0;
    let x = sine(10.0, fs_in, 2048 * 3, 0.0);
    let y = resample(&x, fs_in, 256.0).unwrap();
    let direct = sine(10.0, 256.0, y.ncols(), 0.0);
    // ignore the filter's edge region
    let inner = 64..y.ncols() - 64;
    let err: Vec<f64> = inner.clone().map(|j| y[(0, j)] - direct[(0, j)]).collect();
    let amp_ratio = rms(&y.as_slice()[inner.clone()]) / rms(&direct.as_slice()[inner]);
    assert!((amp_ratio - 1.0).abs() <= 0.01, "amplitude ratio {amp_ratio}");
    assert!(rms(&err) <= 0.01, "pointwise error {}", rms(&err));
}

#[test]
fn recordings_from_both_devices_yield_384_sample_epochs() {
    let stimuli = standard_stimulus_table()[..2].to_vec();
    for (rate, latency) in [(500.0, 0.15), (2048.0, 0.17)] {
        let secs = 8.0;
        let n = (secs * rate) as usize;
        let labels: Vec<String> = ["Fz", "Oz", "O1", "O2"].iter().map(|s| s.to_string()).collect();
        let data = DMatrix::from_fn(4, n, |c, j| (2.0 * PI * (8.0 + c as f64) * j as f64 / rate).sin());
        let rec = Recording {
            data,
            channel_labels: labels,
            sample_rate_hz: rate,
            events: vec![(0.5, 1, 0), (2.25, 1, 1), (4.0, 2, 0), (5.773, 2, 1)],
        };
        let cfg = PreprocessConfig {
            epoch_start_seconds: latency,
            ..PreprocessConfig::default()
        };
        let ds = preprocess_recording(&rec, DomainId::new("S01", "1", "dev"), "dev", stimuli.clone(), &cfg).unwrap();
        assert_eq!(ds.n_channels(), 3);
        assert!(ds.epochs.iter().all(|e| e.n_samples() == 384));
    }
}
