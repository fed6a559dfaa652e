//! Round-trips a dataset and a trained model through the binary containers.
use lst_ssvep::io::{decode_dataset, decode_model, encode_dataset, encode_model};
use lst_ssvep::preprocess::FilterBankSpec;
use lst_ssvep::synth::{generate_subject_dataset, SynthConfig};
use lst_ssvep::trca::fit_model;

fn main() -> lst_ssvep::Result<()> {
    let ds = generate_subject_dataset(2, 1, &SynthConfig::default())?;
    let bytes = encode_dataset(&ds)?;
    let back = decode_dataset(&bytes)?;
    let header_len = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    println!("dataset: {} bytes, header {header_len} bytes, {} trials back", bytes.len(), back.epochs.len());

    let model = fit_model(&ds, &FilterBankSpec::default(), 0.25)?;
    let bytes = encode_model(&model)?;
    let restored = decode_model(&bytes)?;
    let same = ds
        .epochs
        .iter()
        .all(|e| model.classify(&e.data).unwrap().rho == restored.classify(&e.data).unwrap().rho);
    println!("model: {} bytes, identical scores after reload: {same}", bytes.len());
    Ok(())
}
