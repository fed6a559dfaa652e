//! On-disk containers for datasets and models, and CSV trial import.
//!
//! Both containers are a little-endian `u64` header length, a JSON header of
//! that many bytes, then a raw little-endian payload. Datasets store `f32`
//! samples, trials in (stimulus, trial) order, each trial channel-major
//! (`N_S` consecutive samples per channel). Models store `f64` values: every
//! band's filter matrix row by row, then every band's templates, then the
//! broadband templates, each template channel-major.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{validate_dataset, Dataset, DomainId, Epoch, Montage, Provenance, StimulusSpec};
use crate::error::{Error, Result};
use crate::preprocess::FilterBankSpec;
use crate::trca::TrcaModel;

pub const FORMAT_VERSION: u32 = 1;
const PREFIX: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TrialEntry {
    pub stimulus_index: usize,
    pub trial_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<TrialProvenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TrialProvenance {
    pub source_domain: DomainId,
    pub source_trial: usize,
    /// Absent when no fit was made.
    pub residual_frobenius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub kind: String,
    pub domain_id: DomainId,
    pub montage: Montage,
    pub stimuli: Vec<StimulusSpec>,
    pub trials: Vec<TrialEntry>,
    /// `[trials, channels, samples]`.
    pub shape: [usize; 3],
    pub dtype: String,
    pub byte_order: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelHeader {
    pub format_version: u32,
    pub kind: String,
    pub stimuli: Vec<StimulusSpec>,
    pub bank_spec: FilterBankSpec,
    pub sample_rate_hz: f64,
    pub padding_seconds: f64,
    pub alpha_exponent: f64,
    pub alpha_offset: f64,
    pub regularized_cells: Vec<(usize, usize)>,
    /// `[bands, channels, stimuli, samples]`.
    pub shape: [usize; 4],
    pub dtype: String,
    pub byte_order: String,
}

fn encode(header: &impl Serialize, payload: &[u8]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(PREFIX + json.len() + payload.len());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    Ok(out)
}

/// Byte offset within the file of a serde_json error position.
fn json_offset(header: &[u8], e: &serde_json::Error) -> u64 {
    let (line, col) = (e.line(), e.column());
    if line == 0 {
        return PREFIX as u64;
    }
    let mut pos = 0usize;
    for _ in 1..line {
        match header[pos..].iter().position(|&b| b == b'\n') {
            Some(i) => pos += i + 1,
            None => break,
        }
    }
    (PREFIX + pos + col.saturating_sub(1)) as u64
}

/// Splits a container into its parsed header and payload slice, checking the
/// version and expected kind.
fn decode<'b, H: for<'de> Deserialize<'de>>(bytes: &'b [u8], kind: &str) -> Result<(H, &'b [u8], u64)> {
    if bytes.len() < PREFIX {
        return Err(Error::Format {
            offset: 0,
            message: format!("file is {} bytes, shorter than the 8-byte header length", bytes.len()),
        });
    }
    let len = u64::from_le_bytes(bytes[..PREFIX].try_into().expect("8 bytes"));
    let available = (bytes.len() - PREFIX) as u64;
    if len > available {
        return Err(Error::Format {
            offset: PREFIX as u64,
            message: format!("header declares {len} bytes but only {available} follow"),
        });
    }
    let end = PREFIX + len as usize;
    let raw = &bytes[PREFIX..end];
    let value: serde_json::Value = serde_json::from_slice(raw).map_err(|e| Error::Format {
        offset: json_offset(raw, &e),
        message: format!("malformed header: {e}"),
    })?;
    let version = value.get("formatVersion").and_then(|v| v.as_u64()).ok_or_else(|| Error::Format {
        offset: PREFIX as u64,
        message: "header lacks formatVersion".into(),
    })?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::UnsupportedVersion {
            found: version.min(u32::MAX as u64) as u32,
            expected: FORMAT_VERSION,
        });
    }
    match value.get("kind").and_then(|v| v.as_str()) {
        Some(k) if k == kind => {}
        other => {
            return Err(Error::Format {
                offset: PREFIX as u64,
                message: format!("expected a {kind} container, header kind is {other:?}"),
            })
        }
    }
    let header: H = serde_json::from_value(value).map_err(|e| Error::Format {
        offset: PREFIX as u64,
        message: format!("invalid header: {e}"),
    })?;
    Ok((header, &bytes[end..], end as u64))
}

fn check_payload(payload: &[u8], start: u64, expected: u64) -> Result<()> {
    let actual = payload.len() as u64;
    if actual < expected {
        return Err(Error::TruncatedPayload {
            offset: start + actual,
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(Error::Format {
            offset: start + expected,
            message: format!("{} unexpected trailing bytes", actual - expected),
        });
    }
    Ok(())
}

fn check_dtype(dtype: &str, byte_order: &str, want: &str) -> Result<()> {
    if dtype != want || byte_order != "little" {
        return Err(Error::Format {
            offset: PREFIX as u64,
            message: format!("unsupported sample encoding {dtype}/{byte_order}, expected {want}/little"),
        });
    }
    Ok(())
}

/// Serializes `ds` to container bytes.
pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let problems = validate_dataset(ds);
    if let Some(p) = problems.first() {
        return Err(Error::InvalidArgument(format!("refusing to write invalid dataset: {p}")));
    }
    let epochs = ds.sorted_epochs();
    let (nc, ns) = (ds.n_channels(), ds.n_samples());
    let header = DatasetHeader {
        format_version: FORMAT_VERSION,
        kind: "dataset".into(),
        domain_id: ds.domain.clone(),
        montage: ds.montage.clone(),
        stimuli: ds.stimuli.clone(),
        trials: epochs
            .iter()
            .map(|e| TrialEntry {
                stimulus_index: e.stimulus_index,
                trial_index: e.trial_index,
                provenance: e.provenance.as_ref().map(|p| TrialProvenance {
                    source_domain: p.source_domain.clone(),
                    source_trial: p.source_trial,
                    residual_frobenius: p.residual_frobenius.is_finite().then_some(p.residual_frobenius),
                }),
            })
            .collect(),
        shape: [epochs.len(), nc, ns],
        dtype: "float32".into(),
        byte_order: "little".into(),
    };
    let mut payload = Vec::with_capacity(4 * epochs.len() * nc * ns);
    for e in &epochs {
        for c in 0..nc {
            for s in 0..ns {
                payload.extend_from_slice(&(e.data[(c, s)] as f32).to_le_bytes());
            }
        }
    }
    encode(&header, &payload)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let (h, payload, start): (DatasetHeader, _, _) = decode(bytes, "dataset")?;
    check_dtype(&h.dtype, &h.byte_order, "float32")?;
    let [nt, nc, ns] = h.shape;
    let shape_err = |m: String| Error::Format {
        offset: PREFIX as u64,
        message: m,
    };
    if h.trials.len() != nt {
        return Err(shape_err(format!("shape declares {nt} trials, trial index lists {}", h.trials.len())));
    }
    if h.montage.n_channels() != nc {
        return Err(shape_err(format!(
            "shape declares {nc} channels, montage lists {}",
            h.montage.n_channels()
        )));
    }
    check_payload(payload, start, 4 * (nt * nc * ns) as u64)?;
    let mut chunks = payload.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64);
    let epochs = h
        .trials
        .into_iter()
        .map(|t| {
            let data = DMatrix::from_row_iterator(nc, ns, chunks.by_ref().take(nc * ns));
            Epoch {
                data,
                stimulus_index: t.stimulus_index,
                trial_index: t.trial_index,
                provenance: t.provenance.map(|p| Provenance {
                    source_domain: p.source_domain,
                    source_trial: p.source_trial,
                    residual_frobenius: p.residual_frobenius.unwrap_or(f64::NAN),
                }),
            }
        })
        .collect();
    Ok(Dataset::new(h.domain_id, h.montage, h.stimuli, epochs))
}

fn io_context(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_dataset(ds)?).map_err(io_context(path))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    decode_dataset(&fs::read(path).map_err(io_context(path))?)
}

pub fn encode_model(model: &TrcaModel) -> Result<Vec<u8>> {
    model.validate()?;
    let (nk, nc, nf, ns) = (model.n_bands(), model.n_channels(), model.stimuli.len(), model.n_samples());
    let header = ModelHeader {
        format_version: FORMAT_VERSION,
        kind: "model".into(),
        stimuli: model.stimuli.clone(),
        bank_spec: model.bank_spec.clone(),
        sample_rate_hz: model.sample_rate_hz,
        padding_seconds: model.padding_seconds,
        alpha_exponent: model.alpha_exponent,
        alpha_offset: model.alpha_offset,
        regularized_cells: model.regularized_cells.clone(),
        shape: [nk, nc, nf, ns],
        dtype: "float64".into(),
        byte_order: "little".into(),
    };
    let mut payload = Vec::with_capacity(8 * (nk * nc * nf + (nk + 1) * nf * nc * ns));
    let mut put = |m: &DMatrix<f64>| {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                payload.extend_from_slice(&m[(r, c)].to_le_bytes());
            }
        }
    };
    model.filters.iter().for_each(&mut put);
    model.templates.iter().flatten().for_each(&mut put);
    model.broadband_templates.iter().for_each(&mut put);
    encode(&header, &payload)
}

pub fn decode_model(bytes: &[u8]) -> Result<TrcaModel> {
    let (h, payload, start): (ModelHeader, _, _) = decode(bytes, "model")?;
    check_dtype(&h.dtype, &h.byte_order, "float64")?;
    let [nk, nc, nf, ns] = h.shape;
    if h.stimuli.len() != nf || h.bank_spec.n_bands != nk {
        return Err(Error::Format {
            offset: PREFIX as u64,
            message: format!(
                "shape {:?} disagrees with {} stimuli and {} bands",
                h.shape,
                h.stimuli.len(),
                h.bank_spec.n_bands
            ),
        });
    }
    check_payload(payload, start, 8 * (nk * nc * nf + (nk + 1) * nf * nc * ns) as u64)?;
    let mut vals = payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
    let mut take = |r: usize, c: usize| DMatrix::from_row_iterator(r, c, vals.by_ref().take(r * c));
    let filters = (0..nk).map(|_| take(nc, nf)).collect();
    let templates = (0..nk).map(|_| (0..nf).map(|_| take(nc, ns)).collect()).collect();
    let broadband = (0..nf).map(|_| take(nc, ns)).collect();
    TrcaModel::from_parts(
        h.stimuli,
        filters,
        templates,
        broadband,
        h.bank_spec,
        h.sample_rate_hz,
        h.padding_seconds,
        h.alpha_exponent,
        h.alpha_offset,
        h.regularized_cells,
    )
}

pub fn write_model(model: &TrcaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)?).map_err(io_context(path))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<TrcaModel> {
    let path = path.as_ref();
    decode_model(&fs::read(path).map_err(io_context(path))?)
}

/// Reads one trial from CSV: a header row of channel labels, then one row
/// per sample. Returns the labels and a `channels × samples` matrix.
pub fn read_trial_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, DMatrix<f64>)> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let labels: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        for field in rec.iter() {
            values.push(field.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("{}: row {}: not a number: {field:?}", path.display(), i + 2))
            })?);
        }
        rows += 1;
    }
    Ok((labels.clone(), DMatrix::from_row_slice(rows, labels.len(), &values).transpose()))
}

/// Reorders the rows of `data` (labelled by `labels`) into `montage` order.
pub fn to_montage_order(labels: &[String], data: &DMatrix<f64>, montage: &Montage) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(montage.n_channels(), data.ncols());
    for (i, ch) in montage.channel_labels.iter().enumerate() {
        let j = labels
            .iter()
            .position(|l| l == ch)
            .ok_or_else(|| Error::ChannelNotFound(ch.clone()))?;
        out.set_row(i, &data.row(j));
    }
    Ok(out)
}

/// Imports a directory of per-trial CSV files named
/// `<stimulusIndex>_<trialIndex>.csv`. Files are read in sorted name order
/// and channels are reordered to `montage`.
pub fn import_csv_dir(
    dir: impl AsRef<Path>,
    domain: DomainId,
    montage: Montage,
    stimuli: Vec<StimulusSpec>,
) -> Result<Dataset> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut epochs = Vec::with_capacity(files.len());
    for f in files {
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let parsed = stem
            .split_once('_')
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)));
        let Some((stim, trial)) = parsed else {
            return Err(Error::InvalidArgument(format!(
                "{}: expected a name like <stimulus>_<trial>.csv",
                f.display()
            )));
        };
        let (labels, data) = read_trial_csv(&f)?;
        epochs.push(Epoch::new(to_montage_order(&labels, &data, &montage)?, stim, trial));
    }
    Ok(Dataset::new(domain, montage, stimuli, epochs))
}
