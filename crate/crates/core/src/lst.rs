//! Least-squares transformation (LST) between recording domains.
//!
//! A source trial `x'` (`N'_C × N_S`) is mapped into the new domain's channel
//! space by the `P` minimizing `‖x̄ − P·x'‖_F`, where the transformation target
//! `x̄` is the new domain's calibration average for the same stimulus. The
//! transformed trials are then pooled with the new domain's own calibration
//! trials to train the decoder.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, DomainId, Epoch, Montage, Provenance};
use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Calibration average of one stimulus in the new domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationTarget {
    pub stimulus_index: usize,
    pub matrix: DMatrix<f64>,
    pub n_trials_averaged: usize,
}

/// One fitted transformation and its fit quality.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMap {
    /// `N_C × N'_C`.
    pub p: DMatrix<f64>,
    pub source_domain: Option<DomainId>,
    pub stimulus_index: Option<usize>,
    pub source_trial_index: Option<usize>,
    /// `‖x̄ − P·x'‖_F`.
    pub residual_frobenius: f64,
    /// The source Gram matrix was singular; `P` is the minimum-norm solution.
    pub rank_deficient: bool,
}

/// Builds one target per stimulus of `calib` by averaging its trials.
pub fn build_targets(calib: &Dataset) -> Result<Vec<TransformationTarget>> {
    calib
        .stimuli
        .iter()
        .map(|s| {
            let mut count = 0usize;
            let mut acc: Option<DMatrix<f64>> = None;
            for e in calib.trials_for(s.index) {
                match acc.as_mut() {
                    Some(a) => *a += &e.data,
                    None => acc = Some(e.data.clone()),
                }
                count += 1;
            }
            let sum = acc.ok_or(Error::IncompleteCalibration { stimulus: s.index })?;
            Ok(TransformationTarget {
                stimulus_index: s.index,
                matrix: sum / count as f64,
                n_trials_averaged: count,
            })
        })
        .collect()
}

/// Least-squares `P` with `target ≈ P·source`, via the SVD pseudo-inverse of
/// `source`. Equals `x·x'ᵀ(x'x'ᵀ)⁻¹` when `source` has full row rank.
pub fn fit_transform(target: &DMatrix<f64>, source: &DMatrix<f64>) -> Result<TransferMap> {
    if target.ncols() != source.ncols() {
        return Err(Error::InvalidArgument(format!(
            "target has {} samples, source has {}",
            target.ncols(),
            source.ncols()
        )));
    }
    let (pinv, rank_deficient) = pseudo_inverse(source);
    let p = target * pinv;
    let residual_frobenius = (target - &p * source).norm();
    Ok(TransferMap {
        p,
        source_domain: None,
        stimulus_index: None,
        source_trial_index: None,
        residual_frobenius,
        rank_deficient,
    })
}

/// Moore–Penrose pseudo-inverse with relative cutoff [`PINV_CUTOFF`]. Also
/// reports whether any row-space direction was discarded.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (DMatrix::zeros(cols, rows), rows > 0);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let cutoff = PINV_CUTOFF * smax;
    let mut kept = 0usize;
    let mut pinv = DMatrix::zeros(cols, rows);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            kept += 1;
            pinv += v_t.row(i).transpose() * u.column(i).transpose() / s;
        }
    }
    (pinv, kept < rows)
}

/// Whether one `P` is fitted per source trial or per source domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LstScope {
    #[default]
    PerTrial,
    PerDomain,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct LstConfig {
    pub scope: LstScope,
}

fn target_for<'a>(targets: &'a [TransformationTarget], stimulus: usize) -> Result<&'a TransformationTarget> {
    targets
        .iter()
        .find(|t| t.stimulus_index == stimulus)
        .ok_or_else(|| Error::IncompatibleDomain(format!("no transformation target for stimulus {stimulus}")))
}

fn check_coverage(source: &Dataset, targets: &[TransformationTarget]) -> Result<()> {
    let mut src: Vec<usize> = source.stimulus_indices();
    let mut tgt: Vec<usize> = targets.iter().map(|t| t.stimulus_index).collect();
    src.sort_unstable();
    tgt.sort_unstable();
    if src != tgt {
        return Err(Error::IncompatibleDomain(format!(
            "source stimuli {src:?} differ from target stimuli {tgt:?}"
        )));
    }
    if let Some(t) = targets.first() {
        if t.matrix.ncols() != source.n_samples() {
            return Err(Error::IncompatibleDomain(format!(
                "targets have {} samples, source has {}",
                t.matrix.ncols(),
                source.n_samples()
            )));
        }
    }
    Ok(())
}

/// Fits the transformations that map every trial of `source` onto `targets`.
/// Maps are returned in `source.epochs` order.
pub fn fit_dataset_maps(source: &Dataset, targets: &[TransformationTarget], scope: LstScope) -> Result<Vec<TransferMap>> {
    check_coverage(source, targets)?;
    let annotate = |mut m: TransferMap, e: &Epoch| {
        m.source_domain = Some(source.domain.clone());
        m.stimulus_index = Some(e.stimulus_index);
        m.source_trial_index = Some(e.trial_index);
        m
    };
    match scope {
        LstScope::PerTrial => source
            .epochs
            .iter()
            .map(|e| {
                let t = target_for(targets, e.stimulus_index)?;
                Ok(annotate(fit_transform(&t.matrix, &e.data)?, e))
            })
            .collect(),
        LstScope::PerDomain => {
            let ns = source.n_samples();
            let n = source.epochs.len();
            let nc_t = targets.first().map_or(0, |t| t.matrix.nrows());
            let mut big_src = DMatrix::zeros(source.n_channels(), ns * n);
            let mut big_tgt = DMatrix::zeros(nc_t, ns * n);
            for (i, e) in source.epochs.iter().enumerate() {
                big_src.columns_mut(i * ns, ns).copy_from(&e.data);
                big_tgt
                    .columns_mut(i * ns, ns)
                    .copy_from(&target_for(targets, e.stimulus_index)?.matrix);
            }
            let shared = fit_transform(&big_tgt, &big_src)?;
            source
                .epochs
                .iter()
                .map(|e| {
                    let t = target_for(targets, e.stimulus_index)?;
                    let residual = (&t.matrix - &shared.p * &e.data).norm();
                    Ok(annotate(
                        TransferMap {
                            residual_frobenius: residual,
                            ..shared.clone()
                        },
                        e,
                    ))
                })
                .collect()
        }
    }
}

/// Transforms every trial of `source` into the channel space of
/// `target_montage`. Each output epoch records its provenance.
pub fn transfer_dataset(
    source: &Dataset,
    targets: &[TransformationTarget],
    target_montage: &Montage,
    scope: LstScope,
) -> Result<(Dataset, Vec<TransferMap>)> {
    if let Some(t) = targets.first() {
        if t.matrix.nrows() != target_montage.n_channels() {
            return Err(Error::IncompatibleDomain(format!(
                "targets have {} channels, target montage has {}",
                t.matrix.nrows(),
                target_montage.n_channels()
            )));
        }
    }
    let maps = fit_dataset_maps(source, targets, scope)?;
    let epochs = source
        .epochs
        .iter()
        .zip(&maps)
        .map(|(e, m)| Epoch {
            data: &m.p * &e.data,
            stimulus_index: e.stimulus_index,
            trial_index: e.trial_index,
            provenance: Some(Provenance {
                source_domain: source.domain.clone(),
                source_trial: e.trial_index,
                residual_frobenius: m.residual_frobenius,
            }),
        })
        .collect();
    let out = Dataset::new(
        source.domain.clone(),
        target_montage.clone(),
        source.stimuli.clone(),
        epochs,
    );
    Ok((out, maps))
}

/// How the training pool of a new domain is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    /// New-domain calibration trials only.
    Baseline,
    /// Calibration plus untransformed source trials.
    Naive,
    /// Calibration plus LST-transformed source trials.
    Lst,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Baseline, Scheme::Naive, Scheme::Lst];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Baseline => "BASELINE",
            Scheme::Naive => "NAIVE",
            Scheme::Lst => "LST",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BASELINE" => Ok(Scheme::Baseline),
            "NAIVE" | "W/OLST" => Ok(Scheme::Naive),
            "LST" | "W/LST" => Ok(Scheme::Lst),
            other => Err(Error::InvalidArgument(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Assembles the training pool for `scheme`. `others` holds the raw source
/// datasets for [`Scheme::Naive`] and the transferred datasets for
/// [`Scheme::Lst`]; it is ignored for [`Scheme::Baseline`]. Pooled trials are
/// renumbered after the calibration trials.
pub fn assemble_pool(new_calib: &Dataset, others: &[Dataset], scheme: Scheme) -> Result<Dataset> {
    let mut pool = new_calib.clone();
    if scheme == Scheme::Baseline {
        return Ok(pool);
    }
    let nc = new_calib.n_channels();
    let mut next: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for e in &new_calib.epochs {
        let n = next.entry(e.stimulus_index).or_default();
        *n = (*n).max(e.trial_index + 1);
    }
    let known = new_calib.stimulus_indices();
    for other in others {
        if other.n_channels() != nc || other.epochs.iter().any(|e| e.n_channels() != nc) {
            return Err(match scheme {
                Scheme::Naive => Error::MontageMismatch {
                    target_channels: nc,
                    source_channels: other.n_channels(),
                },
                _ => Error::IncompatibleDomain(format!(
                    "transferred dataset {} has {} channels, new domain has {nc}",
                    other.domain,
                    other.n_channels()
                )),
            });
        }
        if other.n_samples() != new_calib.n_samples() {
            return Err(Error::IncompatibleDomain(format!(
                "{} has {} samples per trial, new domain has {}",
                other.domain,
                other.n_samples(),
                new_calib.n_samples()
            )));
        }
        for e in other.sorted_epochs() {
            if !known.contains(&e.stimulus_index) {
                continue;
            }
            let slot = next.entry(e.stimulus_index).or_default();
            let mut epoch = e.clone();
            if epoch.provenance.is_none() {
                epoch.provenance = Some(Provenance {
                    source_domain: other.domain.clone(),
                    source_trial: e.trial_index,
                    residual_frobenius: f64::NAN,
                });
            }
            epoch.trial_index = *slot;
            *slot += 1;
            pool.epochs.push(epoch);
        }
    }
    Ok(pool)
}
