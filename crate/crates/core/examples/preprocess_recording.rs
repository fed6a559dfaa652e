//! Turns a simulated 2048 Hz continuous recording with line noise into
//! 256 Hz epochs.
use std::f64::consts::PI;

use lst_ssvep::domain::{standard_stimulus_table, DomainId};
use lst_ssvep::preprocess::{preprocess_recording, PreprocessConfig, Recording};
use nalgebra::DMatrix;

fn main() -> lst_ssvep::Result<()> {
    let rate = 2048.0;
    let stimuli = standard_stimulus_table()[..4].to_vec();
    let labels: Vec<String> = ["Fz", "POz", "O1", "Oz", "O2"].iter().map(|s| s.to_string()).collect();
    let n = (12.0 * rate) as usize;
    let events: Vec<(f64, usize, usize)> = (0..8).map(|i| (0.5 + 1.4 * i as f64, i % 4 + 1, i / 4)).collect();
    let data = DMatrix::from_fn(labels.len(), n, |c, j| {
        let t = j as f64 / rate;
        let line = 0.8 * (2.0 * PI * 60.0 * t).sin();
        let ssvep = if c == 0 { 0.0 } else { (2.0 * PI * 9.0 * t + c as f64).sin() };
        ssvep + line
    });
    let rec = Recording {
        data,
        channel_labels: labels,
        sample_rate_hz: rate,
        events,
    };
    let cfg = PreprocessConfig {
        epoch_start_seconds: 0.17,
        ..PreprocessConfig::default()
    };
    let ds = preprocess_recording(&rec, DomainId::new("S01", "1", "ActiveTwo"), "ActiveTwo", stimuli, &cfg)?;
    println!("channels after re-referencing: {:?}", ds.montage.channel_labels);
    for e in ds.sorted_epochs() {
        println!(
            "stimulus {} trial {}: {}x{} samples, rms {:.3}",
            e.stimulus_index,
            e.trial_index,
            e.n_channels(),
            e.n_samples(),
            e.data.norm() / (e.data.len() as f64).sqrt()
        );
    }
    Ok(())
}
