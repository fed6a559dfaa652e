use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::lst::Scheme;

/// Column order of [`EvalReport::to_csv`].
pub const CSV_HEADER: &str = "targetSubject,targetDevice,sourceDevice,scheme,calibCount,nSourceSubjects,repeat,nTest,accuracy,logErrorRate,meanTemplateTestCorrelation,silhouetteBefore,silhouetteAfter,residualMean,residualMax";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportRow {
    pub target_subject: String,
    pub target_device: String,
    pub source_device: String,
    pub scheme: Scheme,
    pub calib_count: usize,
    /// Source subjects available to NAIVE and LST in this cell.
    pub n_source_subjects: usize,
    pub repeat: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub log_error_rate: f64,
    pub mean_template_test_correlation: f64,
    /// LST rows only.
    pub silhouette_before: Option<f64>,
    pub silhouette_after: Option<f64>,
    pub residual_mean: Option<f64>,
    pub residual_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PairwiseTest {
    pub target_device: String,
    pub source_device: String,
    pub scheme_a: Scheme,
    pub scheme_b: Scheme,
    pub calib_count: usize,
    pub n_source_subjects: usize,
    pub n_pairs: usize,
    /// Mean of `accuracy(A) − accuracy(B)`.
    pub mean_difference: f64,
    /// `None` when the test is degenerate or has fewer than 5 pairs.
    pub wilcoxon_w: Option<f64>,
    pub p_value: Option<f64>,
}

/// Accuracy summary of one (device pair, scheme, calibration count, source
/// count) group. Means are over repeats first, then subjects; SD and SEM are
/// across subjects.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryEntry {
    pub target_device: String,
    pub source_device: String,
    pub scheme: Scheme,
    pub calib_count: usize,
    pub n_source_subjects: usize,
    pub n_subjects: usize,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub sem_accuracy: f64,
    pub mean_log_error_rate: f64,
    pub mean_template_test_correlation: f64,
    pub mean_silhouette_before: Option<f64>,
    pub mean_silhouette_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub pairwise_tests: Vec<PairwiseTest>,
}

fn num(out: &mut String, v: f64) {
    if v.is_finite() {
        let _ = write!(out, "{v}");
    }
}

fn opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        num(out, v);
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_opt(v: &[Option<f64>]) -> Option<f64> {
    let vals: Vec<f64> = v.iter().flatten().copied().collect();
    (!vals.is_empty()).then(|| mean(&vals))
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},",
                r.target_subject,
                r.target_device,
                r.source_device,
                r.scheme,
                r.calib_count,
                r.n_source_subjects,
                r.repeat,
                r.n_test
            );
            num(&mut out, r.accuracy);
            out.push(',');
            num(&mut out, r.log_error_rate);
            out.push(',');
            num(&mut out, r.mean_template_test_correlation);
            for v in [r.silhouette_before, r.silhouette_after, r.residual_mean, r.residual_max] {
                out.push(',');
                opt(&mut out, v);
            }
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> Vec<SummaryEntry> {
        type Key = (String, String, Scheme, usize, usize);
        let mut groups: BTreeMap<Key, BTreeMap<String, Vec<&ReportRow>>> = BTreeMap::new();
        for r in &self.rows {
            groups
                .entry((
                    r.target_device.clone(),
                    r.source_device.clone(),
                    r.scheme,
                    r.calib_count,
                    r.n_source_subjects,
                ))
                .or_default()
                .entry(r.target_subject.clone())
                .or_default()
                .push(r);
        }
        groups
            .into_iter()
            .map(|((td, sd, scheme, c, m), subjects)| {
                let per_subject = |f: &dyn Fn(&ReportRow) -> f64| -> Vec<f64> {
                    subjects.values().map(|rs| mean(&rs.iter().map(|r| f(r)).collect::<Vec<_>>())).collect()
                };
                let acc = per_subject(&|r| r.accuracy);
                let n = acc.len();
                let m_acc = mean(&acc);
                let spread = if n > 1 {
                    (acc.iter().map(|a| (a - m_acc).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                let all: Vec<&ReportRow> = subjects.values().flatten().copied().collect();
                SummaryEntry {
                    target_device: td,
                    source_device: sd,
                    scheme,
                    calib_count: c,
                    n_source_subjects: m,
                    n_subjects: n,
                    mean_accuracy: m_acc,
                    sd_accuracy: spread,
                    sem_accuracy: spread / (n as f64).sqrt(),
                    mean_log_error_rate: mean(&per_subject(&|r| r.log_error_rate)),
                    mean_template_test_correlation: mean(&per_subject(&|r| r.mean_template_test_correlation)),
                    mean_silhouette_before: mean_opt(&all.iter().map(|r| r.silhouette_before).collect::<Vec<_>>()),
                    mean_silhouette_after: mean_opt(&all.iter().map(|r| r.silhouette_after).collect::<Vec<_>>()),
                }
            })
            .collect()
    }

    /// Mean accuracy of one group, if present.
    pub fn mean_accuracy(&self, scheme: Scheme, calib_count: usize) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.scheme == scheme && s.calib_count == calib_count)
            .map(|s| s.mean_accuracy)
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "summary": self.summary(),
            "pairwiseTests": self.pairwise_tests,
        })
    }
}
