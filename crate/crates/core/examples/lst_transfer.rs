//! Maps one subject's 8-channel trials into another subject's 6-channel space
//! and compares their correlation with the new subject's templates.
use lst_ssvep::eval::channel_average;
use lst_ssvep::lst::{build_targets, transfer_dataset, LstScope};
use lst_ssvep::synth::{generate_subject_dataset, SynthConfig};
use lst_ssvep::trca::pearson;

fn main() -> lst_ssvep::Result<()> {
    let cfg = SynthConfig {
        snr_db: -10.0,
        ..SynthConfig::default()
    };
    let mut calib = generate_subject_dataset(0, 1, &cfg)?;
    calib.epochs.retain(|e| e.trial_index < 2);
    let source = generate_subject_dataset(1, 0, &cfg)?;
    let targets = build_targets(&calib)?;
    let (moved, maps) = transfer_dataset(&source, &targets, &calib.montage, LstScope::PerTrial)?;
    println!(
        "{} source trials, {} -> {} channels",
        maps.len(),
        source.n_channels(),
        moved.n_channels()
    );
    for t in &targets {
        let template = channel_average(&t.matrix);
        let r = |ds: &lst_ssvep::domain::Dataset| {
            let v: Vec<f64> = ds
                .epochs
                .iter()
                .filter(|e| e.stimulus_index == t.stimulus_index)
                .map(|e| pearson(&channel_average(&e.data), &template).unwrap_or(0.0))
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        println!("stimulus {:>2}: r before {:+.3} after {:+.3}", t.stimulus_index, r(&source), r(&moved));
    }
    let worst = maps.iter().map(|m| m.residual_frobenius).fold(0.0, f64::max);
    println!("largest residual {worst:.3}");
    Ok(())
}
