//! Ensemble task-related component analysis with filter-bank fusion.
//!
//! Training finds, per sub-band `k` and stimulus `n`, the spatial filter
//! maximizing summed inter-trial covariance `wᵀSw` subject to `wᵀQw = 1`,
//! i.e. the leading generalized eigenvector of `(S, Q)`. The ensemble filter
//! of band `k` stacks every stimulus' filter column-wise. Classification
//! correlates the ensemble projection of a test trial with each stimulus'
//! projected template, then fuses bands with weights `k^exponent + offset`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::domain::{Dataset, StimulusSpec};
use crate::error::{Error, Result};
use crate::preprocess::{FilterBank, FilterBankSpec};

pub const DEFAULT_ALPHA_EXPONENT: f64 = -1.25;
pub const DEFAULT_ALPHA_OFFSET: f64 = 0.25;

/// `Q` is treated as singular when its smallest eigenvalue falls below this
/// fraction of its largest.
const SINGULAR_RATIO: f64 = 1e-12;
/// Ridge added to a singular `Q`, relative to its mean eigenvalue.
const RIDGE: f64 = 1e-9;

/// Sub-band weights `k^exponent + offset`, `k = 1..=n_bands`.
pub fn filter_bank_weights(n_bands: usize, exponent: f64, offset: f64) -> Vec<f64> {
    (1..=n_bands).map(|k| (k as f64).powf(exponent) + offset).collect()
}

/// Removes each row's mean.
pub fn center_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    out
}

/// Sample cross-covariance `(1/(N_S − 1))·ãb̃ᵀ` with per-channel mean removal.
pub fn covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    assert_eq!(n, b.ncols(), "covariance operands differ in length");
    let denom = (n.max(2) - 1) as f64;
    center_rows(a) * center_rows(b).transpose() / denom
}

/// Inter-trial (`S`) and within-trial (`Q`) covariance sums and the leading
/// generalized eigenvector.
#[derive(Debug, Clone)]
pub struct TrcaDecomposition {
    pub s: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// Generalized eigenvalues of `(S, Q)`, descending.
    pub eigenvalues: Vec<f64>,
    /// Unit Euclidean norm, first nonzero entry positive.
    pub leading_vector: DVector<f64>,
    /// `Q` was singular and a ridge was added before solving.
    pub regularized: bool,
}

impl TrcaDecomposition {
    pub fn leading_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `uᵀSu / uᵀQu`.
    pub fn rayleigh_quotient(&self, u: &DVector<f64>) -> f64 {
        (u.transpose() * &self.s * u)[0] / (u.transpose() * &self.q * u)[0]
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Flips `v` so that its first entry that is not numerically zero is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12 * scale) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Fits the TRCA filter for one stimulus in one sub-band.
pub fn fit_trca_filter(trials: &[&DMatrix<f64>]) -> Result<TrcaDecomposition> {
    if trials.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "TRCA needs at least 2 trials, got {}",
            trials.len()
        )));
    }
    let (nc, ns) = trials[0].shape();
    if trials.iter().any(|t| t.shape() != (nc, ns)) {
        return Err(Error::InvalidArgument("trials differ in shape".into()));
    }
    if ns < 2 || nc == 0 {
        return Err(Error::InvalidArgument(format!("degenerate trial shape {nc}x{ns}")));
    }
    let denom = (ns - 1) as f64;
    let mut sum = DMatrix::zeros(nc, ns);
    let mut q = DMatrix::zeros(nc, nc);
    for t in trials {
        let c = center_rows(t);
        q += &c * c.transpose();
        sum += c;
    }
    q /= denom;
    // Σ_{i≠j} x̃_i x̃_jᵀ = (Σx̃)(Σx̃)ᵀ − Σ x̃_i x̃_iᵀ
    let mut s = &sum * sum.transpose() / denom - &q;
    symmetrize(&mut s);
    symmetrize(&mut q);

    let (eigenvalues, leading_vector, regularized) = generalized_leading(&s, &q)?;
    Ok(TrcaDecomposition {
        s,
        q,
        eigenvalues,
        leading_vector,
        regularized,
    })
}

/// Solves `S w = λ Q w` for symmetric `S` and symmetric PSD `Q` by Cholesky
/// whitening. Returns descending eigenvalues, the leading vector and whether
/// `Q` had to be regularized.
fn generalized_leading(s: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<(Vec<f64>, DVector<f64>, bool)> {
    let n = q.nrows();
    let trace = q.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::InvalidArgument("trials have zero or non-finite variance".into()));
    }
    let q_eig = SymmetricEigen::new(q.clone()).eigenvalues;
    let lmax = q_eig.max();
    let lmin = q_eig.min();
    let singular = lmin <= SINGULAR_RATIO * lmax;
    let q_eff = if singular {
        q + DMatrix::identity(n, n) * (RIDGE * trace / n as f64)
    } else {
        q.clone()
    };
    let chol = Cholesky::new(q_eff).ok_or_else(|| Error::InvalidArgument("Q is not positive definite".into()))?;
    let l = chol.l();
    // C = L⁻¹ S L⁻ᵀ
    let linv_s = l
        .solve_lower_triangular(s)
        .ok_or_else(|| Error::InvalidArgument("triangular solve failed".into()))?;
    let mut c = l
        .solve_lower_triangular(&linv_s.transpose())
        .ok_or_else(|| Error::InvalidArgument("triangular solve failed".into()))?;
    symmetrize(&mut c);
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let v = eig.eigenvectors.column(order[0]).into_owned();
    // w = L⁻ᵀ v
    let mut w = l
        .transpose()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::InvalidArgument("triangular solve failed".into()))?;
    let norm = w.norm();
    w /= norm;
    canonical_sign(&mut w);
    Ok((eigenvalues, w, singular))
}

/// A trial together with its sub-band decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedTrial {
    pub broadband: DMatrix<f64>,
    pub bands: Vec<DMatrix<f64>>,
}

impl DecomposedTrial {
    pub fn new(broadband: DMatrix<f64>, bank: &FilterBank) -> Self {
        let bands = bank.decompose(&broadband);
        DecomposedTrial { broadband, bands }
    }

    /// Left-multiplies every component by `p`. Exact counterpart of
    /// transforming the broadband trial first, because the filter bank acts
    /// per channel and is linear.
    pub fn map_channels(&self, p: &DMatrix<f64>) -> Self {
        DecomposedTrial {
            broadband: p * &self.broadband,
            bands: self.bands.iter().map(|b| p * b).collect(),
        }
    }
}

/// Fitted ensemble TRCA model.
#[derive(Debug, Clone)]
pub struct TrcaModel {
    /// Stimuli in model order; filter columns and templates follow it.
    pub stimuli: Vec<StimulusSpec>,
    /// Per band: `N_C × N_F`, column `n` is stimulus `n`'s filter.
    pub filters: Vec<DMatrix<f64>>,
    /// `templates[k][n]`: band-`k` trial mean for stimulus `n`.
    pub templates: Vec<Vec<DMatrix<f64>>>,
    /// Trial mean of the unfiltered training trials per stimulus.
    pub broadband_templates: Vec<DMatrix<f64>>,
    pub bank_spec: FilterBankSpec,
    pub sample_rate_hz: f64,
    pub padding_seconds: f64,
    pub alpha_exponent: f64,
    pub alpha_offset: f64,
    /// `(band, stimulus index)` cells whose `Q` needed regularization.
    pub regularized_cells: Vec<(usize, usize)>,
    bank: FilterBank,
    /// `filters[k]ᵀ · templates[k][n]`, precomputed for classification.
    projected: Vec<Vec<DMatrix<f64>>>,
}

/// Per-trial classification output.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    /// Fused feature per stimulus, model order.
    pub rho: Vec<f64>,
    /// `N_K × N_F` per-band correlations.
    pub per_band: DMatrix<f64>,
    /// Stimulus index (table numbering) of the largest `rho`, lowest wins ties.
    pub decision: usize,
    /// Some projected signal had zero variance; its correlation was set to 0.
    pub degenerate: bool,
}

impl TrcaModel {
    /// Assembles a model from fitted parts and precomputes projections.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        stimuli: Vec<StimulusSpec>,
        filters: Vec<DMatrix<f64>>,
        templates: Vec<Vec<DMatrix<f64>>>,
        broadband_templates: Vec<DMatrix<f64>>,
        bank_spec: FilterBankSpec,
        sample_rate_hz: f64,
        padding_seconds: f64,
        alpha_exponent: f64,
        alpha_offset: f64,
        regularized_cells: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let bank = FilterBank::new(&bank_spec, sample_rate_hz, padding_seconds)?;
        let mut model = TrcaModel {
            stimuli,
            filters,
            templates,
            broadband_templates,
            bank_spec,
            sample_rate_hz,
            padding_seconds,
            alpha_exponent,
            alpha_offset,
            regularized_cells,
            bank,
            projected: Vec::new(),
        };
        model.validate()?;
        model.projected = model
            .filters
            .iter()
            .zip(&model.templates)
            .map(|(w, ts)| ts.iter().map(|t| w.transpose() * t).collect())
            .collect();
        Ok(model)
    }

    /// Structural checks; violations yield [`Error::InvalidModel`].
    pub fn validate(&self) -> Result<()> {
        let nf = self.stimuli.len();
        let nk = self.bank_spec.n_bands;
        let bad = |m: String| Err(Error::InvalidModel(m));
        if nf == 0 {
            return bad("model has no stimuli".into());
        }
        if self.filters.len() != nk || self.templates.len() != nk {
            return bad(format!(
                "expected {nk} bands, got {} filters and {} template sets",
                self.filters.len(),
                self.templates.len()
            ));
        }
        if self.broadband_templates.len() != nf {
            return bad(format!("expected {nf} broadband templates, got {}", self.broadband_templates.len()));
        }
        let nc = self.filters[0].nrows();
        let ns = self.broadband_templates[0].ncols();
        if nc == 0 || ns == 0 {
            return bad("empty templates".into());
        }
        for (k, (w, ts)) in self.filters.iter().zip(&self.templates).enumerate() {
            if w.shape() != (nc, nf) {
                return bad(format!("band {k}: filter shape {:?}, expected ({nc}, {nf})", w.shape()));
            }
            if ts.len() != nf {
                return bad(format!("band {k}: {} templates, expected {nf}", ts.len()));
            }
            for t in ts {
                if t.shape() != (nc, ns) || t.iter().any(|v| !v.is_finite()) {
                    return bad(format!("band {k}: template has wrong shape or non-finite values"));
                }
            }
            if w.iter().any(|v| !v.is_finite()) {
                return bad(format!("band {k}: non-finite filter weights"));
            }
        }
        if self.broadband_templates.iter().any(|t| t.shape() != (nc, ns)) {
            return bad("broadband template shape mismatch".into());
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.filters[0].nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.broadband_templates[0].ncols()
    }

    pub fn n_bands(&self) -> usize {
        self.filters.len()
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn alpha(&self) -> Vec<f64> {
        filter_bank_weights(self.n_bands(), self.alpha_exponent, self.alpha_offset)
    }

    /// Classifies one preprocessed broadband trial.
    pub fn classify(&self, trial: &DMatrix<f64>) -> Result<ScoreVector> {
        self.check_shape(trial)?;
        self.classify_bands(&self.bank.decompose(trial))
    }

    fn check_shape(&self, trial: &DMatrix<f64>) -> Result<()> {
        if trial.shape() != (self.n_channels(), self.n_samples()) {
            return Err(Error::InvalidArgument(format!(
                "test trial is {:?}, model expects ({}, {})",
                trial.shape(),
                self.n_channels(),
                self.n_samples()
            )));
        }
        Ok(())
    }

    /// Classifies a trial that has already been decomposed with this model's bank.
    pub fn classify_bands(&self, bands: &[DMatrix<f64>]) -> Result<ScoreVector> {
        if bands.len() != self.n_bands() {
            return Err(Error::InvalidArgument(format!(
                "{} sub-bands given, model has {}",
                bands.len(),
                self.n_bands()
            )));
        }
        for b in bands {
            self.check_shape(b)?;
        }
        let nf = self.stimuli.len();
        let mut per_band = DMatrix::zeros(self.n_bands(), nf);
        let mut degenerate = false;
        for (k, x) in bands.iter().enumerate() {
            let test = self.filters[k].transpose() * x;
            for n in 0..nf {
                match pearson(test.as_slice(), self.projected[k][n].as_slice()) {
                    Some(r) => per_band[(k, n)] = r,
                    None => degenerate = true,
                }
            }
        }
        let alpha = self.alpha();
        let rho: Vec<f64> = (0..nf)
            .map(|n| (0..self.n_bands()).map(|k| alpha[k] * per_band[(k, n)]).sum())
            .collect();
        let best = argmax_lowest(&rho);
        Ok(ScoreVector {
            rho,
            per_band,
            decision: self.stimuli[best].index,
            degenerate,
        })
    }
}

/// Index of the maximum; the lowest index wins ties.
pub fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Pearson correlation of two equal-length sequences, clamped to `[-1, 1]`.
/// `None` when either has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Fits a model from trials grouped by stimulus. `groups[n]` holds the
/// trials of `stimuli[n]`; every group needs the same count (≥ 2).
pub fn fit_model_decomposed(
    stimuli: &[StimulusSpec],
    groups: &[Vec<&DecomposedTrial>],
    bank: &FilterBank,
    padding_seconds: f64,
) -> Result<TrcaModel> {
    if stimuli.is_empty() || groups.len() != stimuli.len() {
        return Err(Error::InvalidArgument(format!(
            "{} trial groups for {} stimuli",
            groups.len(),
            stimuli.len()
        )));
    }
    let nt = groups[0].len();
    if groups.iter().any(|g| g.len() != nt) {
        return Err(Error::InvalidArgument("unbalanced trial counts across stimuli".into()));
    }
    if nt < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials per stimulus, got {nt}")));
    }
    let nk = bank.n_bands();
    if groups.iter().flatten().any(|t| t.bands.len() != nk) {
        return Err(Error::InvalidArgument("trial decomposed with a different filter bank".into()));
    }
    let nc = groups[0][0].broadband.nrows();
    let nf = stimuli.len();

    let mean_of = |mats: &mut dyn Iterator<Item = &DMatrix<f64>>| -> DMatrix<f64> {
        let mut acc: Option<DMatrix<f64>> = None;
        let mut count = 0usize;
        for m in mats {
            match acc.as_mut() {
                Some(a) => *a += m,
                None => acc = Some(m.clone()),
            }
            count += 1;
        }
        acc.expect("non-empty group") / count as f64
    };

    let mut filters = Vec::with_capacity(nk);
    let mut templates = Vec::with_capacity(nk);
    let mut regularized = Vec::new();
    for k in 0..nk {
        let mut w = DMatrix::zeros(nc, nf);
        let mut ts = Vec::with_capacity(nf);
        for (n, group) in groups.iter().enumerate() {
            let trials: Vec<&DMatrix<f64>> = group.iter().map(|t| &t.bands[k]).collect();
            let dec = fit_trca_filter(&trials).map_err(|e| Error::Fit {
                band: k + 1,
                stimulus: stimuli[n].index,
                source: Box::new(e),
            })?;
            if dec.regularized {
                regularized.push((k + 1, stimuli[n].index));
            }
            w.set_column(n, &dec.leading_vector);
            ts.push(mean_of(&mut trials.iter().copied()));
        }
        filters.push(w);
        templates.push(ts);
    }
    let broadband = groups
        .iter()
        .map(|g| mean_of(&mut g.iter().map(|t| &t.broadband)))
        .collect();

    TrcaModel::from_parts(
        stimuli.to_vec(),
        filters,
        templates,
        broadband,
        bank.spec().clone(),
        bank.sample_rate_hz(),
        padding_seconds,
        DEFAULT_ALPHA_EXPONENT,
        DEFAULT_ALPHA_OFFSET,
        regularized,
    )
}

/// Fits a model on every trial of `training`, decomposing with `bank_spec`.
pub fn fit_model(training: &Dataset, bank_spec: &FilterBankSpec, padding_seconds: f64) -> Result<TrcaModel> {
    let bank = FilterBank::new(bank_spec, training.montage.sample_rate_hz, padding_seconds)?;
    let decomposed: Vec<Vec<DecomposedTrial>> = training
        .stimuli
        .iter()
        .map(|s| {
            training
                .trials_for(s.index)
                .map(|e| DecomposedTrial::new(e.data.clone(), &bank))
                .collect()
        })
        .collect();
    let groups: Vec<Vec<&DecomposedTrial>> = decomposed.iter().map(|g| g.iter().collect()).collect();
    fit_model_decomposed(&training.stimuli, &groups, &bank, padding_seconds)
}
