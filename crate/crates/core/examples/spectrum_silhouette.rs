//! Spectrum of a channel-averaged template, and how tightly trials cluster by
//! stimulus before and after transfer.
use lst_ssvep::eval::{channel_averaged_points, normalized_spectrum, silhouette_score};
use lst_ssvep::lst::{build_targets, transfer_dataset, LstScope};
use lst_ssvep::synth::{generate_subject_dataset, SynthConfig};
use lst_ssvep::trca::fit_model;
use lst_ssvep::preprocess::FilterBankSpec;

fn main() -> lst_ssvep::Result<()> {
    let cfg = SynthConfig {
        snr_db: -10.0,
        ..SynthConfig::default()
    };
    let target = generate_subject_dataset(0, 0, &cfg)?;
    let model = fit_model(&target, &FilterBankSpec::default(), 0.25)?;
    let avg: Vec<f64> = lst_ssvep::eval::channel_average(&model.broadband_templates[0]);
    let (freqs, mags) = normalized_spectrum(&avg, cfg.sample_rate_hz)?;
    let mut peaks: Vec<(f64, f64)> = freqs.into_iter().zip(mags).filter(|(f, _)| *f <= 60.0).collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("stimulus {} Hz template, strongest bins:", model.stimuli[0].frequency_hz);
    for (f, m) in peaks.iter().take(5) {
        println!("  {f:6.2} Hz  {m:.3}");
    }

    let source = generate_subject_dataset(1, 0, &cfg)?;
    let (moved, _) = transfer_dataset(&source, &build_targets(&target)?, &target.montage, LstScope::PerTrial)?;
    for (name, ds) in [("before", &source), ("after", &moved)] {
        let (points, labels) = channel_averaged_points(ds);
        println!("silhouette {name}: {:.3}", silhouette_score(&points, &labels)?);
    }
    Ok(())
}
