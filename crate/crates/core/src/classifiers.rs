//! Two-class discriminant classifiers: plug-in QDA, ridge-regularized
//! R-QDA, the spectrally corrected SR-QDA, and a KNN baseline.
//!
//! Scores follow one sign convention: `W(x) > 0` predicts class 0, and
//! `W(x) <= 0` predicts class 1.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{
    log_det_inverse_regularized, BulkTerms, optimize_omega, shrinkage_coefficients, ClassQuantities, GammaParams,
    OmegaParams, OmegaSearch, PopulationQuantities, SpikeTerm, VarianceForm,
};
use crate::model::{class_moments, symmetric_eigen, ClassMoments, EigenSummary, LabeledDataset, SpikedCovarianceSpec};
use crate::rng::rng_from_seed;
use crate::spike::{
    detect_spike_counts, estimate_plug_ins, fit_class_spikes, ClassSpikeFit, MeanSeparationPolicy, PlugInEstimates,
    SpikeCounts, DEFAULT_SAFETY_MARGIN,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantScore {
    pub value: f64,
    pub predicted_class: usize,
}

impl DiscriminantScore {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            predicted_class: if value > 0.0 { 0 } else { 1 },
        }
    }
}

pub trait Classifier: Sync {
    fn predict_row(&self, x: &[f64]) -> Result<usize>;
    /// Priors used to weight per-class errors.
    fn priors(&self) -> [f64; 2];
}

pub trait Discriminant: Classifier {
    fn score(&self, x: &[f64]) -> Result<DiscriminantScore>;
}

macro_rules! discriminant_classifier {
    ($t:ty) => {
        impl Classifier for $t {
            fn predict_row(&self, x: &[f64]) -> Result<usize> {
                Ok(self.score(x)?.predicted_class)
            }
            fn priors(&self) -> [f64; 2] {
                self.priors
            }
        }
    };
}

pub fn validate_priors(priors: [f64; 2]) -> Result<[f64; 2]> {
    if priors.iter().any(|&p| !(p > 0.0 && p.is_finite())) || (priors[0] + priors[1] - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "priors must be positive and sum to 1, got {priors:?}"
        )));
    }
    Ok(priors)
}

/// Explicit priors, or class frequencies of the training data.
pub fn resolve_priors(data: &LabeledDataset, priors: Option<[f64; 2]>) -> Result<[f64; 2]> {
    match priors {
        Some(p) => validate_priors(p),
        None => {
            let n = data.n_samples() as f64;
            let n0 = data.class_count(0) as f64;
            validate_priors([n0 / n, 1.0 - n0 / n])
        }
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

fn both_moments(data: &LabeledDataset) -> Result<[ClassMoments; 2]> {
    Ok([class_moments(data, 0)?, class_moments(data, 1)?])
}

fn quad_dense(m: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    w.dot(&(m * w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaModel {
    pub means: [DVector<f64>; 2],
    /// Inverse covariance, or its thresholded pseudo-inverse.
    pub precisions: [DMatrix<f64>; 2],
    /// Log-determinant over the retained eigenvalues.
    pub log_dets: [f64; 2],
    /// Number of eigenvalues retained per class.
    pub ranks: [usize; 2],
    pub priors: [f64; 2],
}

/// Pseudo-inverse and log pseudo-determinant, dropping eigenvalues at or
/// below `p * eps * l_1`.
fn pseudo_inverse(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64, usize)> {
    let eig = symmetric_eigen(cov)?;
    let p = eig.dimension();
    let top = eig.values[0].max(0.0);
    let threshold = p as f64 * f64::EPSILON * top;
    let mut inv = DMatrix::zeros(p, p);
    let mut log_det = 0.0;
    let mut rank = 0;
    for j in 0..p {
        let l = eig.values[j];
        if l > threshold {
            let u = eig.vectors.column(j);
            inv += (u * u.transpose()) / l;
            log_det += l.ln();
            rank += 1;
        }
    }
    Ok((inv, log_det, rank))
}

pub fn fit_qda(data: &LabeledDataset, priors: Option<[f64; 2]>) -> Result<QdaModel> {
    let priors = resolve_priors(data, priors)?;
    let [m0, m1] = both_moments(data)?;
    let (p0, l0, r0) = pseudo_inverse(&m0.covariance)?;
    let (p1, l1, r1) = pseudo_inverse(&m1.covariance)?;
    if r0 < data.n_features() || r1 < data.n_features() {
        log::debug!("QDA covariance singular; using pseudo-inverse (ranks {r0}, {r1})");
    }
    Ok(QdaModel {
        means: [m0.mean, m1.mean],
        precisions: [p0, p1],
        log_dets: [l0, l1],
        ranks: [r0, r1],
        priors,
    })
}

impl QdaModel {
    /// The QDA rule built from true parameters.
    pub fn oracle(specs: [&SpikedCovarianceSpec; 2], pi0: f64) -> Result<Self> {
        let priors = validate_priors([pi0, 1.0 - pi0])?;
        let p = specs[0].dimension();
        if specs[1].dimension() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: specs[1].dimension(),
            });
        }
        Ok(Self {
            means: [specs[0].mean().clone(), specs[1].mean().clone()],
            precisions: [specs[0].precision(), specs[1].precision()],
            log_dets: [specs[0].log_det(), specs[1].log_det()],
            ranks: [p, p],
            priors,
        })
    }

    pub fn eta(&self) -> f64 {
        -0.5 * (self.log_dets[0] - self.log_dets[1]) - (self.priors[1] / self.priors[0]).ln()
    }
}

impl Discriminant for QdaModel {
    fn score(&self, x: &[f64]) -> Result<DiscriminantScore> {
        check_dim(self.means[0].len(), x)?;
        let x = DVectorView::from_slice(x, x.len());
        let w0 = x - &self.means[0];
        let w1 = x - &self.means[1];
        let value = self.eta() - 0.5 * quad_dense(&self.precisions[0], &w0) + 0.5 * quad_dense(&self.precisions[1], &w1);
        Ok(DiscriminantScore::new(value))
    }
}
discriminant_classifier!(QdaModel);

/// Which sign the R-QDA constant takes.
///
/// `Consistent` uses `eta = 1/2 log(|H_0| / |H_1|) - log(pi_1/pi_0)`,
/// treating `H_i` as the precision surrogate exactly as `Sigma_i^{-1}` is
/// treated in QDA; `AsPrinted` uses the opposite sign of the
/// log-determinant ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RidgeEtaSign {
    #[default]
    Consistent,
    AsPrinted,
}

/// Ridge R-QDA in eigen-form: `H_i = sum_j u_j u_j' / (1 + gamma l_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RqdaModel {
    pub means: [DVector<f64>; 2],
    pub eigen: [EigenSummary; 2],
    pub gamma: f64,
    /// `log |H_i| = -sum_j log(1 + gamma l_j)`.
    pub log_det_h: [f64; 2],
    pub priors: [f64; 2],
    pub eta_sign: RidgeEtaSign,
}

/// Per-class moments and spectra, shared by every ridge parameter.
#[derive(Debug, Clone)]
struct RidgeBasis {
    means: [DVector<f64>; 2],
    eigen: [EigenSummary; 2],
}

impl RidgeBasis {
    fn fit(data: &LabeledDataset) -> Result<Self> {
        let [m0, m1] = both_moments(data)?;
        let e0 = symmetric_eigen(&m0.covariance)?;
        let e1 = symmetric_eigen(&m1.covariance)?;
        Ok(Self {
            means: [m0.mean, m1.mean],
            eigen: [e0, e1],
        })
    }

    fn model(&self, gamma: f64, priors: [f64; 2], eta_sign: RidgeEtaSign) -> RqdaModel {
        let log_det_h = [0, 1].map(|i| -self.eigen[i].values.iter().map(|&l| (1.0 + gamma * l.max(0.0)).ln()).sum::<f64>());
        RqdaModel {
            means: self.means.clone(),
            eigen: self.eigen.clone(),
            gamma,
            log_det_h,
            priors,
            eta_sign,
        }
    }
}

fn ridge_weights(eigen: &EigenSummary, gamma: f64) -> DVector<f64> {
    eigen.values.map(|l| 1.0 / (1.0 + gamma * l.max(0.0)))
}

pub fn fit_rqda(data: &LabeledDataset, gamma: f64, priors: Option<[f64; 2]>) -> Result<RqdaModel> {
    fit_rqda_with(data, gamma, priors, RidgeEtaSign::default())
}

pub fn fit_rqda_with(
    data: &LabeledDataset,
    gamma: f64,
    priors: Option<[f64; 2]>,
    eta_sign: RidgeEtaSign,
) -> Result<RqdaModel> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("ridge parameter must be positive, got {gamma}")));
    }
    let priors = resolve_priors(data, priors)?;
    Ok(RidgeBasis::fit(data)?.model(gamma, priors, eta_sign))
}

impl RqdaModel {
    pub fn eta(&self) -> f64 {
        let ratio = self.log_det_h[0] - self.log_det_h[1];
        let sign = match self.eta_sign {
            RidgeEtaSign::Consistent => 0.5,
            RidgeEtaSign::AsPrinted => -0.5,
        };
        sign * ratio - (self.priors[1] / self.priors[0]).ln()
    }

    /// Dense `H_i`.
    pub fn ridge_operator(&self, class: usize) -> DMatrix<f64> {
        let e = &self.eigen[class];
        let w = ridge_weights(e, self.gamma);
        &e.vectors * DMatrix::from_diagonal(&w) * e.vectors.transpose()
    }

    fn quad(&self, class: usize, x: DVectorView<f64>) -> f64 {
        let e = &self.eigen[class];
        let proj = e.vectors.tr_mul(&(x - &self.means[class]));
        proj.iter()
            .zip(e.values.iter())
            .map(|(z, &l)| z * z / (1.0 + self.gamma * l.max(0.0)))
            .sum()
    }
}

impl Discriminant for RqdaModel {
    fn score(&self, x: &[f64]) -> Result<DiscriminantScore> {
        check_dim(self.means[0].len(), x)?;
        let x = DVectorView::from_slice(x, x.len());
        Ok(DiscriminantScore::new(self.eta() - 0.5 * self.quad(0, x) + 0.5 * self.quad(1, x)))
    }
}
discriminant_classifier!(RqdaModel);

/// `{10^(i/10) : i = -10..=10}`.
pub fn default_rqda_grid() -> Vec<f64> {
    (-10..=10).map(|i| 10f64.powf(i as f64 / 10.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSelection {
    pub gamma: f64,
    /// Mean cross-validated accuracy per candidate.
    pub accuracies: Vec<f64>,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(data: &LabeledDataset, folds: usize, rng_seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = rng_from_seed(rng_seed);
    let mut out = vec![Vec::new(); folds];
    for class in 0..2 {
        let mut idx = data.class_indices(class);
        if idx.len() < folds {
            return Err(Error::InvalidInput(format!(
                "class {class} has {} samples, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            out[k % folds].push(i);
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Complement of a fold within `0..n`.
fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in fold {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

/// Chooses the ridge parameter by stratified k-fold cross-validation;
/// ties go to the smallest candidate.
pub fn select_rqda_gamma(
    data: &LabeledDataset,
    candidates: &[f64],
    folds: usize,
    rng_seed: u64,
    priors: Option<[f64; 2]>,
    eta_sign: RidgeEtaSign,
) -> Result<GammaSelection> {
    if candidates.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 ridge candidates".into()));
    }
    if let Some(g) = candidates.iter().find(|&&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidInput(format!("ridge candidate {g} must be positive")));
    }
    let assignment = stratified_folds(data, folds, rng_seed)?;
    let mut totals = vec![0.0; candidates.len()];
    for fold in &assignment {
        let test = data.subset(fold)?;
        let train = data.subset(&complement(data.n_samples(), fold))?;
        if test.class_count(0) == 0 || test.class_count(1) == 0 {
            return Err(Error::InvalidInput("a validation fold is missing a class".into()));
        }
        let priors = resolve_priors(&train, priors)?;
        let basis = RidgeBasis::fit(&train)?;
        // Projections onto each class's eigenbasis do not depend on gamma.
        let proj: [DMatrix<f64>; 2] = [0, 1].map(|c| {
            let centered = DMatrix::from_fn(test.n_samples(), test.n_features(), |r, k| {
                test.features()[(r, k)] - basis.means[c][k]
            });
            (centered * &basis.eigen[c].vectors).map(|v| v * v)
        });
        for (slot, &gamma) in totals.iter_mut().zip(candidates) {
            let model = basis.model(gamma, priors, eta_sign);
            let w = [0, 1].map(|c| ridge_weights(&basis.eigen[c], gamma));
            let q = [0, 1].map(|c| &proj[c] * &w[c]);
            let eta = model.eta();
            let predictions: Vec<usize> = (0..test.n_samples())
                .map(|r| DiscriminantScore::new(eta - 0.5 * q[0][r] + 0.5 * q[1][r]).predicted_class)
                .collect();
            *slot += error_report(&predictions, test.labels(), priors)?.accuracy;
        }
    }
    let accuracies: Vec<f64> = totals.iter().map(|t| t / folds as f64).collect();
    // Ties go to the smallest gamma, whatever the candidate order.
    let mut best = 0;
    for k in 1..candidates.len() {
        let (a, b) = (accuracies[k], accuracies[best]);
        if a > b || (a == b && candidates[k] < candidates[best]) {
            best = k;
        }
    }
    Ok(GammaSelection {
        gamma: candidates[best],
        accuracies,
    })
}

/// How many spikes each class carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpikeCountMode {
    Known([SpikeCounts; 2]),
    Auto { safety_margin: f64 },
}

impl Default for SpikeCountMode {
    fn default() -> Self {
        Self::Auto {
            safety_margin: DEFAULT_SAFETY_MARGIN,
        }
    }
}

/// Which noise-variance estimate SR-QDA plugs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseEstimate {
    #[default]
    Corrected,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrqdaOptions {
    pub counts: SpikeCountMode,
    pub priors: Option<[f64; 2]>,
    pub search: OmegaSearch,
    pub form: VarianceForm,
    pub bulk: BulkTerms,
    pub noise: NoiseEstimate,
    pub mean_policy: MeanSeparationPolicy,
}

impl Default for SrqdaOptions {
    fn default() -> Self {
        Self {
            counts: SpikeCountMode::default(),
            priors: None,
            search: OmegaSearch::default(),
            form: VarianceForm::default(),
            bulk: BulkTerms::default(),
            noise: NoiseEstimate::default(),
            mean_policy: MeanSeparationPolicy::default(),
        }
    }
}

/// Regularized inverse of one class,
/// `sigma^-2 (I - sum_s coeff_s u_s u_s')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedInverse {
    pub sigma_sq: f64,
    /// Columns are the spike eigenvectors, in coefficient order.
    pub directions: DMatrix<f64>,
    pub coefficients: Vec<f64>,
    /// `log |H~^{-1}|`.
    pub log_det: f64,
}

impl RegularizedInverse {
    pub fn quad(&self, w: &DVector<f64>) -> f64 {
        let proj = self.directions.tr_mul(w);
        let correction: f64 = proj.iter().zip(&self.coefficients).map(|(z, g)| g * z * z).sum();
        (w.norm_squared() - correction) / self.sigma_sq
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let p = self.directions.nrows();
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.coefficients));
        (DMatrix::identity(p, p) - &self.directions * d * self.directions.transpose()) / self.sigma_sq
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrqdaModel {
    pub means: [DVector<f64>; 2],
    pub inverses: [RegularizedInverse; 2],
    pub fits: [ClassSpikeFit; 2],
    pub plug_ins: PlugInEstimates,
    pub omega_star: OmegaParams,
    pub gamma_star: GammaParams,
    /// Optimized asymptotic Fisher ratio at `gamma_star`.
    pub fisher_ratio: f64,
    pub eta: f64,
    pub priors: [f64; 2],
}

/// `eta = -1/2 log(|H~_1^{-1}| / |H~_0^{-1}|) - log(pi_1 / pi_0)`.
pub fn srqda_eta(log_det: [f64; 2], priors: [f64; 2]) -> f64 {
    -0.5 * (log_det[1] - log_det[0]) - (priors[1] / priors[0]).ln()
}

pub fn fit_srqda(data: &LabeledDataset, options: &SrqdaOptions) -> Result<SrqdaModel> {
    let priors = resolve_priors(data, options.priors)?;
    let p = data.n_features();
    let moments = both_moments(data)?;
    for (i, m) in moments.iter().enumerate() {
        if m.count < 4 {
            return Err(Error::DegenerateClass {
                class: i,
                count: m.count,
                required: 4,
            });
        }
    }
    let mu_hat = &moments[0].mean - &moments[1].mean;
    let mut eigs = Vec::with_capacity(2);
    for m in &moments {
        let mut e = symmetric_eigen(&m.covariance)?;
        e.align_signs(&mu_hat);
        eigs.push(e);
    }
    let mut fits = Vec::with_capacity(2);
    for i in 0..2 {
        let dof = moments[i].count - 1;
        let counts = match options.counts {
            SpikeCountMode::Known(c) => c[i],
            SpikeCountMode::Auto { safety_margin } => detect_spike_counts(&eigs[i], dof, safety_margin)?,
        };
        fits.push(fit_class_spikes(&eigs[i], counts, dof)?);
    }
    let fits: [ClassSpikeFit; 2] = fits.try_into().expect("two classes");
    let sigma_sq = [0, 1].map(|i| match options.noise {
        NoiseEstimate::Corrected => fits[i].noise.corrected,
        NoiseEstimate::Raw => fits[i].noise.raw,
    });
    let c_mean = [0, 1].map(|i| p as f64 / moments[i].count as f64);
    // Without spikes the mean separation only shifts constants that the
    // search never sees, so a failed estimate is harmless there.
    let policy = if fits[0].spikes.is_empty() && fits[1].spikes.is_empty() {
        MeanSeparationPolicy::TreatAsZero
    } else {
        options.mean_policy
    };
    let plug_ins = estimate_plug_ins([&fits[0], &fits[1]], [&eigs[0], &eigs[1]], &mu_hat, sigma_sq, c_mean, policy)?;

    let classes = [0, 1].map(|i| {
        let est = &plug_ins.classes[i];
        ClassQuantities {
            sigma_sq: sigma_sq[i],
            c: c_mean[i],
            alpha: est.alpha(),
            spikes: fits[i]
                .spikes
                .iter()
                .enumerate()
                .map(|(k, s)| SpikeTerm {
                    kind: s.kind,
                    lambda: s.lambda,
                    a: s.a,
                    b: est.b_hat[k],
                })
                .collect(),
        }
    });
    let quantities = PopulationQuantities {
        classes,
        psi: plug_ins.psi.clone(),
        p,
        log_prior_ratio: (priors[1] / priors[0]).ln(),
        form: options.form,
        bulk: options.bulk,
    };
    let optimum = optimize_omega(&quantities, &options.search)?;
    let coeffs = shrinkage_coefficients(&optimum.gamma, &quantities)?;

    let inverses = [0, 1].map(|i| {
        let fit = &fits[i];
        let directions = DMatrix::from_fn(p, fit.spikes.len(), |r, k| eigs[i].vectors[(r, fit.spikes[k].eigen_index)]);
        let coefficients = coeffs.class(i).to_vec();
        RegularizedInverse {
            sigma_sq: sigma_sq[i],
            log_det: log_det_inverse_regularized(p as f64 * sigma_sq[i].ln(), &coefficients),
            directions,
            coefficients,
        }
    });
    let eta = srqda_eta([inverses[0].log_det, inverses[1].log_det], priors);
    let [m0, m1] = moments;
    Ok(SrqdaModel {
        means: [m0.mean, m1.mean],
        inverses,
        fits,
        plug_ins,
        omega_star: optimum.omega,
        gamma_star: optimum.gamma,
        fisher_ratio: optimum.value,
        eta,
        priors,
    })
}

impl Discriminant for SrqdaModel {
    fn score(&self, x: &[f64]) -> Result<DiscriminantScore> {
        check_dim(self.means[0].len(), x)?;
        let x = DVector::from_column_slice(x);
        let q0 = self.inverses[0].quad(&(&x - &self.means[0]));
        let q1 = self.inverses[1].quad(&(&x - &self.means[1]));
        Ok(DiscriminantScore::new(self.eta - 0.5 * q0 + 0.5 * q1))
    }
}
discriminant_classifier!(SrqdaModel);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub features: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub k: usize,
    pub priors: [f64; 2],
}

pub fn fit_knn(data: &LabeledDataset, k: usize) -> Result<KnnModel> {
    if k == 0 || k > data.n_samples() {
        return Err(Error::InvalidInput(format!(
            "k must be in 1..={}, got {k}",
            data.n_samples()
        )));
    }
    Ok(KnnModel {
        features: data.features().clone(),
        labels: data.labels().to_vec(),
        k,
        priors: resolve_priors(data, None)?,
    })
}

/// Score is the vote margin `(votes_0 - votes_1) / k`.
impl Discriminant for KnnModel {
    fn score(&self, x: &[f64]) -> Result<DiscriminantScore> {
        check_dim(self.features.ncols(), x)?;
        let mut dist: Vec<(f64, usize)> = self
            .features
            .row_iter()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
        }
        let votes0 = dist[..self.k].iter().filter(|(_, i)| self.labels[*i] == 0).count();
        Ok(DiscriminantScore::new((2.0 * votes0 as f64 - self.k as f64) / self.k as f64))
    }
}
discriminant_classifier!(KnnModel);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub class_errors: [f64; 2],
    pub global_error: f64,
    pub accuracy: f64,
}

fn error_report(predictions: &[usize], labels: &[usize], priors: [f64; 2]) -> Result<ErrorReport> {
    let mut wrong = [0usize; 2];
    let mut total = [0usize; 2];
    for (&p, &l) in predictions.iter().zip(labels) {
        total[l] += 1;
        if p != l {
            wrong[l] += 1;
        }
    }
    if let Some(c) = (0..2).find(|&c| total[c] == 0) {
        return Err(Error::InvalidInput(format!("test set has no members of class {c}")));
    }
    let class_errors = [0, 1].map(|c| wrong[c] as f64 / total[c] as f64);
    let global_error = priors[0] * class_errors[0] + priors[1] * class_errors[1];
    Ok(ErrorReport {
        class_errors,
        global_error,
        accuracy: 1.0 - global_error,
    })
}

pub fn predict(model: &dyn Classifier, features: &DMatrix<f64>) -> Result<Vec<usize>> {
    let rows: Vec<Vec<f64>> = features.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.par_iter().map(|r| model.predict_row(r)).collect()
}

pub fn scores(model: &dyn Discriminant, features: &DMatrix<f64>) -> Result<Vec<DiscriminantScore>> {
    let rows: Vec<Vec<f64>> = features.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.par_iter().map(|r| model.score(r)).collect()
}

/// Per-class misclassification rates, weighted by the model's priors.
pub fn evaluate(model: &dyn Classifier, test: &LabeledDataset) -> Result<ErrorReport> {
    let predictions = predict(model, test.features())?;
    error_report(&predictions, test.labels(), model.priors())
}
