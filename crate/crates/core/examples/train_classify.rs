//! Fits a filter-bank ensemble TRCA model on synthetic calibration trials and
//! decodes the held-out ones.
use lst_ssvep::preprocess::FilterBankSpec;
use lst_ssvep::synth::{generate_subject_dataset, SynthConfig};
use lst_ssvep::trca::fit_model;

fn main() -> lst_ssvep::Result<()> {
    let snr: f64 = std::env::args().nth(1).map_or(-10.0, |s| s.parse().expect("snr in dB"));
    let cfg = SynthConfig {
        snr_db: snr,
        ..SynthConfig::default()
    };
    let ds = generate_subject_dataset(0, 0, &cfg)?;
    let mut calib = ds.clone();
    calib.epochs.retain(|e| e.trial_index < 4);
    let model = fit_model(&calib, &FilterBankSpec::default(), 0.25)?;
    println!("band weights {:?}", model.alpha());

    let mut hits = 0;
    let mut total = 0;
    for e in ds.sorted_epochs().into_iter().filter(|e| e.trial_index >= 4) {
        let s = model.classify(&e.data)?;
        hits += usize::from(s.decision == e.stimulus_index);
        total += 1;
        println!("true {:>2} decoded {:>2} rho {:.3}", e.stimulus_index, s.decision, s.rho.iter().cloned().fold(f64::MIN, f64::max));
    }
    println!("accuracy at {snr} dB: {hits}/{total}");
    Ok(())
}
