//! Leave-one-subject-out evaluation of the BASELINE / NAIVE / LST schemes.
//!
//! Every (target subject, repeat) cell is independent. Within a cell the
//! target's trials are split once per stimulus by a seeded shuffle: the last
//! `testTrialsPerStimulus` positions are held out and the first `c` positions
//! calibrate, so test sets are shared across calibration counts. The
//! supplementary-subject mode instead pins calibration to the first trials
//! and testing to the last ones, and varies how many source subjects join.

mod report;
mod stats;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{EvalReport, PairwiseTest, ReportRow, SummaryEntry, CSV_HEADER};
pub use stats::{
    average_ranks, channel_average, log_error_rate, normalized_spectrum, silhouette_score,
    template_test_correlation, wilcoxon_signed_rank, WilcoxonResult, EXACT_MAX_N,
};

use crate::domain::{Dataset, StimulusSpec};
use crate::error::{Error, Result};
use crate::lst::{fit_dataset_maps, LstConfig, Scheme, TransformationTarget};
use crate::preprocess::{FilterBank, FilterBankSpec};
use crate::trca::{fit_model_decomposed, pearson, DecomposedTrial, TrcaModel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DevicePair {
    pub target_device: String,
    pub source_device: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct EvalPlan {
    pub schemes: Vec<Scheme>,
    pub calib_trial_counts: Vec<usize>,
    pub n_repeats: usize,
    pub test_trials_per_stimulus: usize,
    /// Enables the supplementary-subject sweep when set.
    pub supplementary_subject_counts: Option<Vec<usize>>,
    /// Calibration trials per stimulus in the supplementary sweep.
    pub supplementary_calib_trials: usize,
    /// Device used for within-device evaluation; defaults to the first
    /// device found in the input.
    pub device: Option<String>,
    /// When non-empty, sources come from another device and only these
    /// pairings are evaluated.
    pub cross_device_pairs: Vec<DevicePair>,
    pub rng_seed: u64,
}

impl Default for EvalPlan {
    fn default() -> Self {
        EvalPlan {
            schemes: Scheme::ALL.to_vec(),
            calib_trial_counts: vec![2, 3, 4, 5],
            n_repeats: 10,
            test_trials_per_stimulus: 3,
            supplementary_subject_counts: None,
            supplementary_calib_trials: 5,
            device: None,
            cross_device_pairs: Vec::new(),
            rng_seed: 0,
        }
    }
}

impl EvalPlan {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.schemes.is_empty() {
            out.push("eval.schemes must not be empty".into());
        }
        let mut s = self.schemes.clone();
        s.sort();
        s.dedup();
        if s.len() != self.schemes.len() {
            out.push("eval.schemes contains duplicates".into());
        }
        if self.n_repeats == 0 {
            out.push("eval.nRepeats must be >= 1".into());
        }
        if self.test_trials_per_stimulus == 0 {
            out.push("eval.testTrialsPerStimulus must be >= 1".into());
        }
        match &self.supplementary_subject_counts {
            None => {
                if self.calib_trial_counts.is_empty() {
                    out.push("eval.calibTrialCounts must not be empty".into());
                }
                if self.calib_trial_counts.iter().any(|&c| c < 1) {
                    out.push("eval.calibTrialCounts entries must be >= 1".into());
                }
            }
            Some(counts) => {
                if counts.is_empty() || counts.iter().any(|&m| m == 0) {
                    out.push("eval.supplementarySubjectCounts entries must be >= 1".into());
                }
                if self.supplementary_calib_trials == 0 {
                    out.push("eval.supplementaryCalibTrials must be >= 1".into());
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    fn calib_counts(&self) -> Vec<usize> {
        match self.supplementary_subject_counts {
            Some(_) => vec![self.supplementary_calib_trials],
            None => self.calib_trial_counts.clone(),
        }
    }
}

/// Decoder and transfer settings shared by every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub filter_bank: FilterBankSpec,
    pub padding_seconds: f64,
    pub lst: LstConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            filter_bank: FilterBankSpec::default(),
            padding_seconds: 0.25,
            lst: LstConfig::default(),
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of one (target subject, repeat) cell. Depends on the subject's name
/// rather than its position, so adding or removing sources leaves splits alone.
pub fn cell_seed(base: u64, subject: &str, repeat: usize) -> u64 {
    base ^ fnv1a(subject) ^ (repeat as u64).rotate_left(40)
}

/// Target-domain data with cached sub-band decompositions.
struct Domain<'a> {
    ds: &'a Dataset,
    trials: Vec<DecomposedTrial>,
    /// Epoch positions per stimulus (model order), sorted by trial index.
    by_stimulus: Vec<Vec<usize>>,
}

impl<'a> Domain<'a> {
    fn new(ds: &'a Dataset, stimuli: &[StimulusSpec], bank: &FilterBank) -> Self {
        let trials = ds
            .epochs
            .iter()
            .map(|e| DecomposedTrial::new(e.data.clone(), bank))
            .collect();
        let by_stimulus = stimuli
            .iter()
            .map(|s| {
                let mut v: Vec<usize> = (0..ds.epochs.len())
                    .filter(|&i| ds.epochs[i].stimulus_index == s.index)
                    .collect();
                v.sort_by_key(|&i| ds.epochs[i].trial_index);
                v
            })
            .collect();
        Domain { ds, trials, by_stimulus }
    }

    fn subject(&self) -> &str {
        &self.ds.domain.subject
    }

    fn device(&self) -> &str {
        &self.ds.montage.device_name
    }
}

/// Positions (into `Domain::by_stimulus[n]`) used for calibration and test.
struct Split {
    order: Vec<Vec<usize>>,
    n_test: usize,
}

impl Split {
    fn calib(&self, n: usize, c: usize) -> &[usize] {
        &self.order[n][..c]
    }

    fn test(&self, n: usize) -> &[usize] {
        let o = &self.order[n];
        &o[o.len() - self.n_test..]
    }
}

struct Cell<'d, 'a> {
    target: &'d Domain<'a>,
    sources: Vec<&'d Domain<'a>>,
    source_device: String,
    repeat: usize,
    split: Split,
    calib_count: usize,
}

struct Scenario<'d, 'a> {
    targets: Vec<&'d Domain<'a>>,
    sources: Vec<&'d Domain<'a>>,
    source_device: String,
}

fn pool_trials<'t>(cell: &Cell<'t, '_>, scheme: Scheme, stimuli: &[StimulusSpec], opts: &EvalOptions) -> Result<PoolOut<'t>> {
    let t = cell.target;
    let calib: Vec<Vec<&DecomposedTrial>> = (0..stimuli.len())
        .map(|n| {
            cell.split
                .calib(n, cell.calib_count)
                .iter()
                .map(|&i| &t.trials[t.by_stimulus[n][i]])
                .collect()
        })
        .collect();
    match scheme {
        Scheme::Baseline => Ok(PoolOut::borrowed(calib)),
        Scheme::Naive => {
            let mut groups = calib;
            for src in &cell.sources {
                if src.ds.n_channels() != t.ds.n_channels() {
                    return Err(Error::MontageMismatch {
                        target_channels: t.ds.n_channels(),
                        source_channels: src.ds.n_channels(),
                    });
                }
                for (n, g) in groups.iter_mut().enumerate() {
                    g.extend(src.by_stimulus[n].iter().map(|&i| &src.trials[i]));
                }
            }
            Ok(PoolOut::borrowed(groups))
        }
        Scheme::Lst => {
            let targets: Vec<TransformationTarget> = stimuli
                .iter()
                .zip(&calib)
                .map(|(s, g)| {
                    let mut m = g[0].broadband.clone();
                    for tr in &g[1..] {
                        m += &tr.broadband;
                    }
                    TransformationTarget {
                        stimulus_index: s.index,
                        matrix: m / g.len() as f64,
                        n_trials_averaged: g.len(),
                    }
                })
                .collect();
            let mut residuals = Vec::new();
            let mut transformed: Vec<Vec<DecomposedTrial>> = vec![Vec::new(); stimuli.len()];
            let mut raw_avg: Vec<(usize, Vec<f64>)> = Vec::new();
            for src in &cell.sources {
                let maps = fit_dataset_maps(src.ds, &targets, opts.lst.scope)?;
                for (n, idx) in src.by_stimulus.iter().enumerate() {
                    for &i in idx {
                        let m = &maps[i];
                        residuals.push(m.residual_frobenius);
                        raw_avg.push((n, channel_average(&src.trials[i].broadband)));
                        transformed[n].push(src.trials[i].map_channels(&m.p));
                    }
                }
            }
            Ok(PoolOut {
                calib,
                extra: transformed,
                residuals,
                raw_source_averages: raw_avg,
            })
        }
    }
}

struct PoolOut<'t> {
    calib: Vec<Vec<&'t DecomposedTrial>>,
    extra: Vec<Vec<DecomposedTrial>>,
    residuals: Vec<f64>,
    raw_source_averages: Vec<(usize, Vec<f64>)>,
}

impl<'t> PoolOut<'t> {
    fn borrowed(groups: Vec<Vec<&'t DecomposedTrial>>) -> Self {
        PoolOut {
            extra: vec![Vec::new(); groups.len()],
            calib: groups,
            residuals: Vec::new(),
            raw_source_averages: Vec::new(),
        }
    }

    fn groups(&self) -> Vec<Vec<&DecomposedTrial>> {
        self.calib
            .iter()
            .zip(&self.extra)
            .map(|(c, e)| c.iter().copied().chain(e.iter()).collect())
            .collect()
    }

    /// Silhouette of channel-averaged pool trials with raw and with
    /// transformed source trials.
    fn silhouettes(&self) -> Result<(f64, f64)> {
        let mut calib_pts = Vec::new();
        let mut calib_labels = Vec::new();
        for (n, g) in self.calib.iter().enumerate() {
            for t in g {
                calib_pts.push(channel_average(&t.broadband));
                calib_labels.push(n);
            }
        }
        let mut before = calib_pts.clone();
        let mut before_labels = calib_labels.clone();
        for (n, v) in &self.raw_source_averages {
            before.push(v.clone());
            before_labels.push(*n);
        }
        let mut after = calib_pts;
        let mut after_labels = calib_labels;
        for (n, g) in self.extra.iter().enumerate() {
            for t in g {
                after.push(channel_average(&t.broadband));
                after_labels.push(n);
            }
        }
        Ok((
            silhouette_score(&before, &before_labels)?,
            silhouette_score(&after, &after_labels)?,
        ))
    }
}

fn mean_and_max(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (Some(mean), Some(v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)))
}

fn test_scores(model: &TrcaModel, cell: &Cell<'_, '_>, n_stim: usize) -> Result<(usize, usize, f64)> {
    let t = cell.target;
    let mut correct = 0;
    let mut total = 0;
    let mut r_sum = 0.0;
    let template_avgs: Vec<Vec<f64>> = model.broadband_templates.iter().map(channel_average).collect();
    for n in 0..n_stim {
        for &i in cell.split.test(n) {
            let pos = t.by_stimulus[n][i];
            let trial = &t.trials[pos];
            let score = model.classify_bands(&trial.bands)?;
            if score.decision == t.ds.epochs[pos].stimulus_index {
                correct += 1;
            }
            r_sum += pearson(&channel_average(&trial.broadband), &template_avgs[n]).unwrap_or(0.0);
            total += 1;
        }
    }
    Ok((correct, total, r_sum / total as f64))
}

fn run_cell(
    cell: &Cell<'_, '_>,
    plan: &EvalPlan,
    opts: &EvalOptions,
    stimuli: &[StimulusSpec],
    bank: &FilterBank,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for &scheme in &plan.schemes {
        let wrap = |e: Error| Error::Eval {
            subject: cell.target.subject().to_string(),
            scheme: scheme.to_string(),
            repeat: cell.repeat,
            source: Box::new(e),
        };
        if scheme == Scheme::Naive && cell.sources.iter().any(|s| s.ds.n_channels() != cell.target.ds.n_channels()) {
            // raw pooling is undefined across montages
            continue;
        }
        let pool = pool_trials(cell, scheme, stimuli, opts).map_err(wrap)?;
        let groups = pool.groups();
        let model = fit_model_decomposed(stimuli, &groups, bank, opts.padding_seconds).map_err(wrap)?;
        let (correct, n_test, r) = test_scores(&model, cell, stimuli.len()).map_err(wrap)?;
        let accuracy = correct as f64 / n_test as f64;
        let (sil_before, sil_after) = if scheme == Scheme::Lst && !cell.sources.is_empty() {
            let (b, a) = pool.silhouettes().map_err(wrap)?;
            (Some(b), Some(a))
        } else {
            (None, None)
        };
        let (residual_mean, residual_max) = mean_and_max(&pool.residuals);
        rows.push(ReportRow {
            target_subject: cell.target.subject().to_string(),
            target_device: cell.target.device().to_string(),
            source_device: cell.source_device.clone(),
            scheme,
            calib_count: cell.calib_count,
            n_source_subjects: cell.sources.len(),
            repeat: cell.repeat,
            n_test,
            accuracy,
            log_error_rate: log_error_rate(accuracy, n_test),
            mean_template_test_correlation: r,
            silhouette_before: sil_before,
            silhouette_after: sil_after,
            residual_mean,
            residual_max,
        });
    }
    Ok(rows)
}

fn check_inputs(datasets: &[Dataset]) -> Result<(Vec<StimulusSpec>, f64)> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::InvalidArgument("no datasets to evaluate".into()))?;
    let mut stimuli = first.stimuli.clone();
    stimuli.sort_by_key(|s| s.index);
    let rate = first.montage.sample_rate_hz;
    let ns = first.n_samples();
    for ds in datasets {
        let mut s = ds.stimuli.clone();
        s.sort_by_key(|s| s.index);
        if s.iter().map(|x| x.index).ne(stimuli.iter().map(|x| x.index)) {
            return Err(Error::IncompatibleDomain(format!("{} has a different stimulus set", ds.domain)));
        }
        if ds.montage.sample_rate_hz != rate || ds.n_samples() != ns {
            return Err(Error::IncompatibleDomain(format!(
                "{} differs in sample rate or epoch length",
                ds.domain
            )));
        }
        let v = crate::domain::validate_dataset(ds);
        if !v.is_empty() {
            return Err(Error::IncompatibleDomain(format!("{}: {}", ds.domain, v[0])));
        }
        if ds.trials_per_stimulus().is_none() {
            return Err(Error::IncompatibleDomain(format!("{} has unbalanced trial counts", ds.domain)));
        }
    }
    Ok((stimuli, rate))
}

/// Runs the full leave-one-subject-out protocol on `datasets` (any mix of
/// subjects and devices). Rows come out in (pair, subject, repeat,
/// calibration count or source count, scheme) order regardless of thread
/// count.
pub fn run_leave_one_subject_out(datasets: &[Dataset], plan: &EvalPlan, opts: &EvalOptions) -> Result<EvalReport> {
    plan.validate()?;
    let (stimuli, rate) = check_inputs(datasets)?;
    let bank = FilterBank::new(&opts.filter_bank, rate, opts.padding_seconds)?;

    let mut devices: Vec<String> = Vec::new();
    for ds in datasets {
        if !devices.contains(&ds.montage.device_name) {
            devices.push(ds.montage.device_name.clone());
        }
    }
    let pairs: Vec<(String, String)> = if plan.cross_device_pairs.is_empty() {
        let d = plan.device.clone().unwrap_or_else(|| devices[0].clone());
        vec![(d.clone(), d)]
    } else {
        plan.cross_device_pairs
            .iter()
            .map(|p| (p.target_device.clone(), p.source_device.clone()))
            .collect()
    };
    let needed: Vec<&String> = pairs.iter().flat_map(|(a, b)| [a, b]).collect();
    for d in &needed {
        if !devices.contains(d) {
            return Err(Error::InvalidArgument(format!("no datasets for device {d:?}")));
        }
    }

    let used: Vec<&Dataset> = {
        let mut v: Vec<&Dataset> = datasets.iter().filter(|d| needed.contains(&&d.montage.device_name)).collect();
        v.sort_by(|a, b| (&a.montage.device_name, &a.domain.subject).cmp(&(&b.montage.device_name, &b.domain.subject)));
        v
    };
    let domains: Vec<Domain> = used.par_iter().map(|ds| Domain::new(ds, &stimuli, &bank)).collect();

    let calib_counts = plan.calib_counts();
    let max_calib = calib_counts.iter().copied().max().unwrap_or(0);

    let scenarios: Vec<Scenario> = pairs
        .iter()
        .map(|(td, sd)| Scenario {
            targets: domains.iter().filter(|d| d.device() == td).collect(),
            sources: domains.iter().filter(|d| d.device() == sd).collect(),
            source_device: sd.clone(),
        })
        .collect();

    for sc in &scenarios {
        for t in &sc.targets {
            let avail = t.ds.trials_per_stimulus().unwrap_or(0);
            if max_calib + plan.test_trials_per_stimulus > avail {
                return Err(Error::InvalidArgument(format!(
                    "{}: {} calibration + {} test trials exceed the {} available per stimulus",
                    t.ds.domain, max_calib, plan.test_trials_per_stimulus, avail
                )));
            }
            let others = sc.sources.iter().filter(|s| s.subject() != t.subject()).count();
            if others == 0 {
                return Err(Error::InvalidArgument(format!("{}: no source subjects", t.ds.domain)));
            }
            if let Some(counts) = &plan.supplementary_subject_counts {
                if let Some(&m) = counts.iter().find(|&&m| m > others) {
                    return Err(Error::InvalidArgument(format!(
                        "{}: {m} supplementary subjects requested, {others} available",
                        t.ds.domain
                    )));
                }
            }
        }
    }

    let mut jobs = Vec::new();
    for (si, sc) in scenarios.iter().enumerate() {
        for ti in 0..sc.targets.len() {
            for r in 0..plan.n_repeats {
                jobs.push((si, ti, r));
            }
        }
    }

    let results: Vec<Result<Vec<ReportRow>>> = jobs
        .par_iter()
        .map(|&(si, ti, repeat)| {
            let sc = &scenarios[si];
            let target = sc.targets[ti];
            let others: Vec<&Domain> = sc
                .sources
                .iter()
                .copied()
                .filter(|s| s.subject() != target.subject())
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(plan.rng_seed, target.subject(), repeat));
            let mut rows = Vec::new();
            match &plan.supplementary_subject_counts {
                None => {
                    let order = target
                        .by_stimulus
                        .iter()
                        .map(|v| {
                            let mut o: Vec<usize> = (0..v.len()).collect();
                            o.shuffle(&mut rng);
                            o
                        })
                        .collect();
                    let split = Split {
                        order,
                        n_test: plan.test_trials_per_stimulus,
                    };
                    let mut cell = Cell {
                        target,
                        sources: others,
                        source_device: sc.source_device.clone(),
                        repeat,
                        split,
                        calib_count: 0,
                    };
                    for &c in &calib_counts {
                        cell.calib_count = c;
                        rows.extend(run_cell(&cell, plan, opts, &stimuli, &bank)?);
                    }
                }
                Some(counts) => {
                    let mut pool = others;
                    pool.shuffle(&mut rng);
                    for &m in counts {
                        let cell = Cell {
                            target,
                            sources: pool[..m].to_vec(),
                            source_device: sc.source_device.clone(),
                            repeat,
                            split: Split {
                                order: target.by_stimulus.iter().map(|v| (0..v.len()).collect()).collect(),
                                n_test: plan.test_trials_per_stimulus,
                            },
                            calib_count: plan.supplementary_calib_trials,
                        };
                        rows.extend(run_cell(&cell, plan, opts, &stimuli, &bank)?);
                    }
                }
            }
            Ok(rows)
        })
        .collect();

    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    let pairwise_tests = pairwise_tests(&rows, &plan.schemes);
    Ok(EvalReport { rows, pairwise_tests })
}

type CellKey = (String, String, usize, usize);

/// Wilcoxon tests between every pair of schemes, pairing rows by
/// (subject, repeat) within each (device pair, calibration count, source
/// count) group.
pub fn pairwise_tests(rows: &[ReportRow], schemes: &[Scheme]) -> Vec<PairwiseTest> {
    let mut groups: BTreeMap<CellKey, BTreeMap<Scheme, BTreeMap<(String, usize), f64>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.target_device.clone(), r.source_device.clone(), r.calib_count, r.n_source_subjects))
            .or_default()
            .entry(r.scheme)
            .or_default()
            .insert((r.target_subject.clone(), r.repeat), r.accuracy);
    }
    let mut out = Vec::new();
    for ((td, sd, c, m), by_scheme) in &groups {
        for (i, a) in schemes.iter().enumerate() {
            for b in &schemes[i + 1..] {
                let (Some(ra), Some(rb)) = (by_scheme.get(a), by_scheme.get(b)) else {
                    continue;
                };
                let (xa, xb): (Vec<f64>, Vec<f64>) = ra
                    .iter()
                    .filter_map(|(k, va)| rb.get(k).map(|vb| (*va, *vb)))
                    .unzip();
                let test = wilcoxon_signed_rank(&xa, &xb).ok();
                out.push(PairwiseTest {
                    target_device: td.clone(),
                    source_device: sd.clone(),
                    scheme_a: *a,
                    scheme_b: *b,
                    calib_count: *c,
                    n_source_subjects: *m,
                    n_pairs: xa.len(),
                    mean_difference: if xa.is_empty() {
                        f64::NAN
                    } else {
                        xa.iter().zip(&xb).map(|(p, q)| p - q).sum::<f64>() / xa.len() as f64
                    },
                    wilcoxon_w: test.map(|t| t.w),
                    p_value: test.map(|t| t.p_value),
                });
            }
        }
    }
    out
}

/// Channel-averaged trials of a dataset as silhouette points, labelled by
/// stimulus index.
pub fn channel_averaged_points(ds: &Dataset) -> (Vec<Vec<f64>>, Vec<usize>) {
    ds.epochs
        .iter()
        .map(|e| (channel_average(&e.data), e.stimulus_index))
        .unzip()
}

/// Mean of `trials`, or `None` for an empty slice.
pub fn average_trials<'m>(trials: impl IntoIterator<Item = &'m DMatrix<f64>>) -> Option<DMatrix<f64>> {
    let mut count = 0usize;
    let mut acc: Option<DMatrix<f64>> = None;
    for t in trials {
        match acc.as_mut() {
            Some(a) => *a += t,
            None => acc = Some(t.clone()),
        }
        count += 1;
    }
    acc.map(|a| a / count as f64)
}
