//! Generates synthetic datasets for every subject and device and writes them
//! as containers.
use lst_ssvep::io::write_dataset;
use lst_ssvep::synth::{generate_device, SynthConfig};

fn main() -> lst_ssvep::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth-out".into());
    std::fs::create_dir_all(&out)?;
    let cfg = SynthConfig::default();
    for d in 0..cfg.device_montages.len() {
        for ds in generate_device(d, &cfg)? {
            let path = format!("{out}/{}_{}.epochs", ds.domain.subject, ds.montage.device_name);
            write_dataset(&ds, &path)?;
            println!("{path}: {} trials of {}x{}", ds.epochs.len(), ds.n_channels(), ds.n_samples());
        }
    }
    Ok(())
}
