use lst_ssvep::error::Error;
use lst_ssvep::io::{decode_dataset, decode_model, encode_dataset, encode_model, read_dataset, write_dataset};
use lst_ssvep::preprocess::FilterBankSpec;
use lst_ssvep::synth::{generate_subject_dataset, SynthConfig};
use lst_ssvep::trca::fit_model;

fn cfg() -> SynthConfig {
    SynthConfig {
        n_subjects: 1,
        n_trials_per_stimulus: 13,
        ..SynthConfig::default()
    }
}

/// Splits a container into its JSON header and payload.
fn split(bytes: &[u8]) -> (serde_json::Value, &[u8]) {
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    (serde_json::from_slice(&bytes[8..8 + n]).unwrap(), &bytes[8 + n..])
}

fn join(header: &serde_json::Value, payload: &[u8]) -> Vec<u8> {
    let h = serde_json::to_vec(header).unwrap();
    let mut out = (h.len() as u64).to_le_bytes().to_vec();
    out.extend(h);
    out.extend_from_slice(payload);
    out
}

#[test]
fn synthetic_dataset_round_trip() {
    let ds = generate_subject_dataset(0, 1, &cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("S01_Q30.epochs");
    write_dataset(&ds, &path).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back.domain, ds.domain);
    assert_eq!(back.montage, ds.montage);
    assert_eq!(back.stimuli, ds.stimuli);
    assert_eq!(back.epochs.len(), ds.epochs.len());
    // samples are stored as f32; a second pass is exact
    assert_eq!(encode_dataset(&back).unwrap(), encode_dataset(&decode_dataset(&encode_dataset(&back).unwrap()).unwrap()).unwrap());
}

#[test]
fn model_round_trip_classifies_identically() {
    let ds = generate_subject_dataset(0, 0, &cfg()).unwrap();
    let mut train = ds.clone();
    train.epochs.retain(|e| e.trial_index < 5);
    let model = fit_model(&train, &FilterBankSpec::default(), 0.25).unwrap();
    let back = decode_model(&encode_model(&model).unwrap()).unwrap();
    let test: Vec<_> = ds.epochs.iter().filter(|e| e.trial_index >= 5).take(100).collect();
    assert_eq!(test.len(), 64);
    let more = generate_subject_dataset(0, 0, &SynthConfig { rng_seed: 99, ..cfg() }).unwrap();
    let trials: Vec<_> = test.into_iter().chain(more.epochs.iter().take(36)).collect();
    assert_eq!(trials.len(), 100);
    for e in trials {
        let a = model.classify(&e.data).unwrap();
        let b = back.classify(&e.data).unwrap();
        assert_eq!(a.decision, b.decision);
        for (x, y) in a.rho.iter().zip(&b.rho) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn empty_templates_rejected() {
    let ds = generate_subject_dataset(0, 0, &cfg()).unwrap();
    let model = fit_model(&ds, &FilterBankSpec::default(), 0.25).unwrap();
    let mut broken = model.clone();
    broken.templates.clear();
    assert!(matches!(encode_model(&broken), Err(Error::InvalidModel(_))));
    let (mut h, payload) = {
        let bytes = encode_model(&model).unwrap();
        let (h, p) = split(&bytes);
        (h, p.to_vec())
    };
    // zero samples per template: only the filter weights remain in the payload
    let [nk, nc, nf] = [0, 1, 2].map(|i| h["shape"][i].as_u64().unwrap() as usize);
    h["shape"][3] = serde_json::json!(0);
    let err = decode_model(&join(&h, &payload[..8 * nk * nc * nf])).unwrap_err();
    assert!(matches!(err, Error::InvalidModel(_)), "{err:?}");
}

#[test]
fn newer_format_version_rejected() {
    let ds = generate_subject_dataset(0, 0, &cfg()).unwrap();
    let model = fit_model(&ds, &FilterBankSpec::default(), 0.25).unwrap();
    let bytes = encode_model(&model).unwrap();
    let (mut h, payload) = split(&bytes);
    h["formatVersion"] = serde_json::json!(2);
    let err = decode_model(&join(&h, payload)).unwrap_err();
    assert!(matches!(err, Error::UnsupportedVersion { .. }), "{err:?}");
}

#[test]
fn truncated_payload_reports_offset() {
    let ds = generate_subject_dataset(0, 0, &cfg()).unwrap();
    let bytes = encode_dataset(&ds).unwrap();
    let err = decode_dataset(&bytes[..bytes.len() - 3]).unwrap_err();
    assert!(matches!(err, Error::TruncatedPayload { .. }), "{err:?}");
}
