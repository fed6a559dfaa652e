use num_complex::Complex;
use rustfft::FftPlanner;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::Dataset;
use crate::error::{Error, Result};
use crate::trca::{pearson, TrcaModel};

/// Largest sample size that gets the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W+, W−)`.
    pub w: f64,
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Average ranks (1-based) of `|d|`, ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 5 {
        return Err(Error::InvalidArgument(format!("need at least 5 pairs, got {}", a.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(Error::DegenerateTest);
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w = w_plus.min(total - w_plus);

    if n <= EXACT_MAX_N {
        // ranks are multiples of 1/2, so doubled ranks are integers
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut counts = vec![0f64; max + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        let target = (2.0 * w).round() as usize;
        let tail: f64 = counts[..=target].iter().sum();
        let p = (2.0 * tail / 2f64.powi(n as i32)).min(1.0);
        return Ok(WilcoxonResult {
            w,
            p_value: p,
            n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(WilcoxonResult {
        w,
        p_value: (2.0 * normal.cdf(z)).min(1.0),
        n,
        exact: false,
    })
}

/// One-sided magnitude spectrum of `signal` zero-padded to four times its
/// length, scaled to a unit peak. Returns `(frequencies, magnitudes)`.
pub fn normalized_spectrum(signal: &[f64], sample_rate_hz: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if signal.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {}", signal.len())));
    }
    let n = 4 * signal.len();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2 + 1;
    let mut mag: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::UndefinedNormalization);
    }
    mag.iter_mut().for_each(|m| *m /= peak);
    let freqs = (0..half).map(|k| k as f64 * sample_rate_hz / n as f64).collect();
    Ok((freqs, mag))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette over all points (Euclidean). A point alone in its cluster
/// scores 0.
pub fn silhouette_score(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::InvalidArgument("points and labels differ in length".into()));
    }
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.len() < 2 {
        return Err(Error::InvalidArgument("silhouette needs at least 2 clusters".into()));
    }
    let n = points.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&points[i], &points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let slot = |l: usize| clusters.binary_search(&l).expect("label listed");
    let sizes: Vec<usize> = clusters.iter().map(|&c| labels.iter().filter(|&&l| l == c).count()).collect();
    let mut total = 0.0;
    let mut sums = vec![0.0; clusters.len()];
    for i in 0..n {
        let own = slot(labels[i]);
        if sizes[own] < 2 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[slot(labels[j])] += dist[i * n + j];
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..clusters.len())
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// Row mean of a multichannel trial.
pub fn channel_average(x: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let nc = x.nrows() as f64;
    (0..x.ncols()).map(|j| x.column(j).sum() / nc).collect()
}

/// Mean over test trials of the Pearson correlation between the
/// channel-averaged trial and the channel-averaged broadband template of its
/// stimulus. A constant signal contributes 0.
pub fn template_test_correlation(model: &TrcaModel, test: &Dataset) -> Result<f64> {
    if test.epochs.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let templates: Vec<(usize, Vec<f64>)> = model
        .stimuli
        .iter()
        .zip(&model.broadband_templates)
        .map(|(s, t)| (s.index, channel_average(t)))
        .collect();
    let mut sum = 0.0;
    for e in &test.epochs {
        if e.n_channels() != model.n_channels() || e.n_samples() != model.n_samples() {
            return Err(Error::IncompatibleDomain(format!(
                "test trial is {}×{}, model expects {}×{}",
                e.n_channels(),
                e.n_samples(),
                model.n_channels(),
                model.n_samples()
            )));
        }
        let t = templates
            .iter()
            .find(|(i, _)| *i == e.stimulus_index)
            .ok_or_else(|| Error::IncompatibleDomain(format!("model has no stimulus {}", e.stimulus_index)))?;
        sum += pearson(&channel_average(&e.data), &t.1).unwrap_or(0.0);
    }
    Ok(sum / test.epochs.len() as f64)
}

/// `log10(max(1 − accuracy, 1/(2·n_test)))`.
pub fn log_error_rate(accuracy: f64, n_test: usize) -> f64 {
    (1.0 - accuracy).max(1.0 / (2.0 * n_test as f64)).log10()
}
