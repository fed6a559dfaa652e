//! Domain types shared across the pipeline: the JFPM stimulus table,
//! device montages, epochs and per-domain datasets.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// One target of the JFPM stimulus grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StimulusSpec {
    /// 1-based position in the stimulus table.
    pub index: usize,
    pub frequency_hz: f64,
    /// Phase in radians, reduced to `[0, 2π)`.
    pub phase_rad: f64,
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let r = phase.rem_euclid(TWO_PI);
    // rem_euclid can return exactly 2π for tiny negative inputs
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// Builds a JFPM table: entry `n` (1-based) has frequency `f0 + df·(n−1)` and
/// phase `(phi0 + dphi·(n−1)) mod 2π`.
pub fn build_stimulus_table(
    n_targets: usize,
    f0: f64,
    df: f64,
    phi0: f64,
    dphi: f64,
) -> Result<Vec<StimulusSpec>> {
    if n_targets == 0 {
        return Err(Error::InvalidArgument("nTargets must be >= 1".into()));
    }
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::InvalidArgument(format!("df must be positive, got {df}")));
    }
    Ok((0..n_targets)
        .map(|i| StimulusSpec {
            index: i + 1,
            frequency_hz: f0 + df * i as f64,
            phase_rad: wrap_phase(phi0 + dphi * i as f64),
        })
        .collect())
}

/// The 40-target grid: 8.0–15.8 Hz in 0.2 Hz steps, phases stepping by 0.35π.
pub fn standard_stimulus_table() -> Vec<StimulusSpec> {
    build_stimulus_table(40, 8.0, 0.2, 0.0, 0.35 * PI).expect("static parameters are valid")
}

/// Inverse of the standard table's frequency map.
pub fn standard_index_for_frequency(frequency_hz: f64) -> usize {
    ((frequency_hz - 8.0) / 0.2).round() as usize + 1
}

/// Rounds half away from zero. All sample-index arithmetic goes through here.
pub fn round_index(x: f64) -> i64 {
    x.round() as i64
}

/// Electrode layout and timing metadata of a recording device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Montage {
    pub device_name: String,
    pub channel_labels: Vec<String>,
    pub sample_rate_hz: f64,
    /// Visual-pathway and setup latency `L`.
    pub latency_seconds: f64,
}

impl Montage {
    pub fn new(
        device_name: impl Into<String>,
        channel_labels: Vec<String>,
        sample_rate_hz: f64,
        latency_seconds: f64,
    ) -> Result<Self> {
        let m = Montage {
            device_name: device_name.into(),
            channel_labels,
            sample_rate_hz,
            latency_seconds,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.channel_labels.is_empty() {
            out.push("montage has no channels".to_string());
        }
        let mut seen = HashSet::new();
        for label in &self.channel_labels {
            if !seen.insert(label.as_str()) {
                out.push(format!("duplicate channel label {label:?}"));
            }
        }
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            out.push(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        if !(0.0..1.0).contains(&self.latency_seconds) {
            out.push(format!("latency must lie in [0, 1) s, got {}", self.latency_seconds));
        }
        out
    }

    pub fn n_channels(&self) -> usize {
        self.channel_labels.len()
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|l| l == label)
    }

    /// Occipital 8-channel gel system (POz, PO3, PO4, PO7, PO8, Oz, O1, O2), L = 0.15 s.
    pub fn active_two(sample_rate_hz: f64) -> Self {
        Montage {
            device_name: "ActiveTwo".into(),
            channel_labels: ["POz", "PO3", "PO4", "PO7", "PO8", "Oz", "O1", "O2"]
                .map(String::from)
                .to_vec(),
            sample_rate_hz,
            latency_seconds: 0.15,
        }
    }

    /// Occipital 6-channel dry system (PO3, PO4, PO7, PO8, O1, O2), L = 0.17 s.
    pub fn q30(sample_rate_hz: f64) -> Self {
        Montage {
            device_name: "Q30".into(),
            channel_labels: ["PO3", "PO4", "PO7", "PO8", "O1", "O2"]
                .map(String::from)
                .to_vec(),
            sample_rate_hz,
            latency_seconds: 0.17,
        }
    }
}

/// Identifies one recording domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DomainId {
    pub subject: String,
    pub session: String,
    pub device: String,
}

impl DomainId {
    pub fn new(subject: impl Into<String>, session: impl Into<String>, device: impl Into<String>) -> Self {
        DomainId {
            subject: subject.into(),
            session: session.into(),
            device: device.into(),
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.subject, self.session, self.device)
    }
}

/// Where a transferred trial came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Provenance {
    pub source_domain: DomainId,
    pub source_trial: usize,
    pub residual_frobenius: f64,
}

/// A single trial: `channels × samples`, microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub data: DMatrix<f64>,
    pub stimulus_index: usize,
    pub trial_index: usize,
    pub provenance: Option<Provenance>,
}

impl Epoch {
    pub fn new(data: DMatrix<f64>, stimulus_index: usize, trial_index: usize) -> Self {
        Epoch {
            data,
            stimulus_index,
            trial_index,
            provenance: None,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }
}

/// All trials recorded in one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub domain: DomainId,
    pub montage: Montage,
    /// Targets presented in this domain, in table order.
    pub stimuli: Vec<StimulusSpec>,
    pub epochs: Vec<Epoch>,
}

impl Dataset {
    pub fn new(domain: DomainId, montage: Montage, stimuli: Vec<StimulusSpec>, epochs: Vec<Epoch>) -> Self {
        Dataset {
            domain,
            montage,
            stimuli,
            epochs,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.montage.n_channels()
    }

    /// Sample count of the first epoch (0 for an empty dataset).
    pub fn n_samples(&self) -> usize {
        self.epochs.first().map_or(0, Epoch::n_samples)
    }

    pub fn stimulus_indices(&self) -> Vec<usize> {
        self.stimuli.iter().map(|s| s.index).collect()
    }

    pub fn trials_for(&self, stimulus: usize) -> impl Iterator<Item = &Epoch> {
        self.epochs.iter().filter(move |e| e.stimulus_index == stimulus)
    }

    /// Trial count shared by every stimulus, or `None` when unbalanced or empty.
    pub fn trials_per_stimulus(&self) -> Option<usize> {
        let counts = self.trial_counts();
        let first = *counts.values().next()?;
        (first > 0 && counts.values().all(|&c| c == first)).then_some(first)
    }

    /// Trial count per listed stimulus, in table order.
    pub fn trial_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts: BTreeMap<usize, usize> = self.stimuli.iter().map(|s| (s.index, 0)).collect();
        for e in &self.epochs {
            *counts.entry(e.stimulus_index).or_default() += 1;
        }
        counts
    }

    /// Epochs sorted by (stimulus, trial).
    pub fn sorted_epochs(&self) -> Vec<&Epoch> {
        let mut v: Vec<&Epoch> = self.epochs.iter().collect();
        v.sort_by_key(|e| (e.stimulus_index, e.trial_index));
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationRule {
    InvalidMontage,
    UnknownStimulus,
    UnbalancedTrialCount,
    DuplicateTrial,
    ChannelCountMismatch,
    SampleCountMismatch,
    NonFiniteSample,
}

impl fmt::Display for ViolationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationRule::InvalidMontage => "invalid montage",
            ViolationRule::UnknownStimulus => "unknown stimulus",
            ViolationRule::UnbalancedTrialCount => "unbalanced trial count",
            ViolationRule::DuplicateTrial => "duplicate trial",
            ViolationRule::ChannelCountMismatch => "channel count mismatch",
            ViolationRule::SampleCountMismatch => "sample count mismatch",
            ViolationRule::NonFiniteSample => "non-finite sample",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: ViolationRule,
    /// `(stimulus, trial)` of the offending epoch, when the rule concerns one.
    pub epoch: Option<(usize, usize)>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.epoch {
            Some((s, t)) => write!(f, "{} (stimulus {s}, trial {t}): {}", self.rule, self.detail),
            None => write!(f, "{}: {}", self.rule, self.detail),
        }
    }
}

/// Checks every dataset invariant and reports each violation; never fails.
pub fn validate_dataset(ds: &Dataset) -> Vec<Violation> {
    validate_dataset_with(ds, None)
}

/// Like [`validate_dataset`], additionally requiring every epoch to hold
/// exactly `expected_samples` samples.
pub fn validate_dataset_with(ds: &Dataset, expected_samples: Option<usize>) -> Vec<Violation> {
    let mut out = Vec::new();
    for p in ds.montage.problems() {
        out.push(Violation {
            rule: ViolationRule::InvalidMontage,
            epoch: None,
            detail: p,
        });
    }

    let known: BTreeSet<usize> = ds.stimuli.iter().map(|s| s.index).collect();
    let n_channels = ds.n_channels();
    let n_samples = expected_samples.unwrap_or_else(|| ds.n_samples());
    let mut seen = HashSet::new();

    for e in &ds.epochs {
        let key = Some((e.stimulus_index, e.trial_index));
        if !known.contains(&e.stimulus_index) {
            out.push(Violation {
                rule: ViolationRule::UnknownStimulus,
                epoch: key,
                detail: "stimulus not listed in the dataset's stimulus table".into(),
            });
        }
        if !seen.insert((e.stimulus_index, e.trial_index)) {
            out.push(Violation {
                rule: ViolationRule::DuplicateTrial,
                epoch: key,
                detail: "trial index appears twice for this stimulus".into(),
            });
        }
        if e.n_channels() != n_channels {
            out.push(Violation {
                rule: ViolationRule::ChannelCountMismatch,
                epoch: key,
                detail: format!("{} channels, montage has {n_channels}", e.n_channels()),
            });
        }
        if e.n_samples() != n_samples {
            out.push(Violation {
                rule: ViolationRule::SampleCountMismatch,
                epoch: key,
                detail: format!("{} samples, expected {n_samples}", e.n_samples()),
            });
        }
        let bad = e.data.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            out.push(Violation {
                rule: ViolationRule::NonFiniteSample,
                epoch: key,
                detail: format!("{bad} non-finite sample(s)"),
            });
        }
    }

    // modal count; ties resolved towards the larger count
    let counts = ds.trial_counts();
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in counts.values() {
        *freq.entry(c).or_default() += 1;
    }
    if let Some((&modal, _)) = freq.iter().max_by_key(|(c, f)| (**f, **c)) {
        for (&stim, &c) in &counts {
            if c != modal {
                out.push(Violation {
                    rule: ViolationRule::UnbalancedTrialCount,
                    epoch: None,
                    detail: format!("stimulus {stim} has {c} trials, others have {modal}"),
                });
            }
        }
    }
    out
}
