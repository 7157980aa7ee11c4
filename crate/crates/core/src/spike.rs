//! Random-matrix estimators for spiked covariance models: spike counts,
//! noise variance (raw and bias-corrected), spiked eigenvalues, and the
//! angle/projection plug-ins used by the Fisher objective.
//!
//! Eigenvalue-side quantities take `n` as the degrees of freedom of the
//! sample covariance (`n_i - 1` for centered data), so `c = p / n`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EigenSummary;

pub const DEFAULT_SAFETY_MARGIN: f64 = 0.10;
pub const MAX_DETECTION_ITERATIONS: usize = 20;
/// Relative gap below which two sample eigenvalues count as coincident.
pub const COINCIDENCE_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpikeCounts {
    pub upper: usize,
    pub lower: usize,
}

impl SpikeCounts {
    pub fn new(upper: usize, lower: usize) -> Self {
        Self { upper, lower }
    }

    pub fn total(&self) -> usize {
        self.upper + self.lower
    }
}

impl std::fmt::Display for SpikeCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.upper, self.lower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseVarianceEstimate {
    pub raw: f64,
    pub corrected: f64,
    /// `J = p / n` used by the correction.
    pub ratio_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpikeKind {
    Upper,
    Lower,
}

/// Index of the sample eigenvalue paired with a spike: upper spike `k`
/// (0-based) uses `l_{k+1}`, lower spike `-k-1` uses `l_{p-k}`.
pub fn paired_index(kind: SpikeKind, k: usize, p: usize) -> usize {
    match kind {
        SpikeKind::Upper => k,
        SpikeKind::Lower => p - 1 - k,
    }
}

fn check_counts(p: usize, counts: SpikeCounts) -> Result<()> {
    if counts.total() >= p {
        return Err(Error::InvalidInput(format!(
            "spike counts {counts} leave no noise eigenvalues at p = {p}"
        )));
    }
    Ok(())
}

/// Mean of the sample eigenvalues not claimed by a spike.
pub fn noise_variance_raw(eig: &EigenSummary, counts: SpikeCounts) -> Result<f64> {
    let p = eig.dimension();
    check_counts(p, counts)?;
    let bulk = &eig.values.as_slice()[counts.upper..p - counts.lower];
    let value = bulk.iter().sum::<f64>() / bulk.len() as f64;
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::NegativeVariance(value));
    }
    Ok(value)
}

/// `raw * (1 + J/(p - r) * (r + sum 1/lambda))` with `lambda` relative to
/// the noise level, which is the plug-in bias correction written with
/// absolute spike sizes `raw * lambda`.
pub fn noise_variance_corrected(
    raw: f64,
    counts: SpikeCounts,
    lambda_hat: &[f64],
    p: usize,
    n: usize,
) -> Result<f64> {
    check_counts(p, counts)?;
    if lambda_hat.len() != counts.total() {
        return Err(Error::DimensionMismatch {
            expected: counts.total(),
            found: lambda_hat.len(),
        });
    }
    if lambda_hat.iter().any(|&l| l == 0.0 || !l.is_finite()) {
        return Err(Error::InvalidInput("spike estimate is zero or non-finite".into()));
    }
    let j = p as f64 / n as f64;
    let r = counts.total() as f64;
    let inv: f64 = lambda_hat.iter().map(|l| 1.0 / l).sum();
    let value = raw * (1.0 + j / (p as f64 - r) * (r + inv));
    if !(value > 0.0) {
        return Err(Error::NegativeVariance(value));
    }
    Ok(value)
}

/// `(p - r) / (sigma^2 sqrt(2J)) * (estimate - sigma^2)`.
pub fn standardized_noise_statistic(
    estimate: f64,
    sigma_sq_true: f64,
    counts: SpikeCounts,
    p: usize,
    n: usize,
) -> f64 {
    let j = p as f64 / n as f64;
    (p as f64 - counts.total() as f64) / (sigma_sq_true * (2.0 * j).sqrt())
        * (estimate - sigma_sq_true)
}

/// Asymptotic mean of the standardized statistic for the uncorrected
/// estimator: `-sqrt(J/2) * (r + sum 1/lambda)` with relative spikes.
pub fn raw_noise_bias(lambdas: &[f64], p: usize, n: usize) -> f64 {
    let j = p as f64 / n as f64;
    let inv: f64 = lambdas.iter().map(|l| 1.0 / l).sum();
    -(j / 2.0).sqrt() * (lambdas.len() as f64 + inv)
}

/// `phi(x) = x + J x / (x - 1)`; the almost-sure limit of `l_j / sigma^2`
/// is `phi(1 + lambda_j)`.
pub fn spike_forward_map(x: f64, j: f64) -> Result<f64> {
    if x == 1.0 {
        return Err(Error::InvalidInput("spike map has a pole at x = 1".into()));
    }
    Ok(x + j * x / (x - 1.0))
}

/// Iterated Marchenko-Pastur edge detector. `n` is the degrees of freedom.
pub fn detect_spike_counts(eig: &EigenSummary, n: usize, safety_margin: f64) -> Result<SpikeCounts> {
    let p = eig.dimension();
    if p < 4 || n < 4 {
        return Err(Error::InvalidInput(format!(
            "spike detection needs p >= 4 and n >= 4, got p = {p}, n = {n}"
        )));
    }
    if !(0.0..1.0).contains(&safety_margin) {
        return Err(Error::InvalidInput(format!(
            "safety margin {safety_margin} must lie in [0, 1)"
        )));
    }
    let c = p as f64 / n as f64;
    let values = eig.values.as_slice();
    // With n < p only the top n eigenvalues carry information.
    let informative = &values[..p.min(n)];
    let mut sigma_sq = median(informative);
    let mut previous: Option<SpikeCounts> = None;
    let mut counts = SpikeCounts::default();
    for _ in 0..MAX_DETECTION_ITERATIONS {
        let upper_edge = sigma_sq * (1.0 + c.sqrt()).powi(2) * (1.0 + safety_margin);
        let upper = values.iter().take_while(|&&l| l > upper_edge).count();
        let lower = if c < 1.0 {
            let lower_edge = sigma_sq * (1.0 - c.sqrt()).powi(2) * (1.0 - safety_margin);
            values.iter().rev().take_while(|&&l| l < lower_edge).count()
        } else {
            0
        };
        // Keep at least half the spectrum as bulk.
        let upper = upper.min(p / 2);
        counts = SpikeCounts::new(upper, lower.min(p / 2 - upper));
        if previous == Some(counts) {
            return Ok(counts);
        }
        previous = Some(counts);
        sigma_sq = noise_variance_raw(eig, counts)?;
    }
    Err(Error::NonConvergence {
        iterations: MAX_DETECTION_ITERATIONS,
        last: counts,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Spiked-eigenvalue estimate from sample eigenvalue `index`:
/// `lambda = -1 / (sigma^2 * m(l)) - 1` with the companion Stieltjes
/// transform `m(l) = -(1 - c)/l + (1/n) sum_{k != j} 1/(l_k - l)`.
pub fn estimate_spike_at(eig: &EigenSummary, index: usize, sigma_sq: f64, n: usize) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(Error::InvalidInput(format!("sigma^2 must be positive, got {sigma_sq}")));
    }
    let values = eig.values.as_slice();
    let p = values.len();
    let c = p as f64 / n as f64;
    let lj = values[index];
    if lj <= 0.0 {
        return Err(Error::Fit(format!(
            "sample eigenvalue {index} is {lj:e}; the spike is not estimable"
        )));
    }
    let mut sum = 0.0;
    for (k, &lk) in values.iter().enumerate() {
        if k == index {
            continue;
        }
        let gap = lk - lj;
        if gap.abs() <= COINCIDENCE_GAP * lj.abs() {
            return Err(Error::CoincidentEigenvalues { index });
        }
        sum += 1.0 / gap;
    }
    let m = -(1.0 - c) / lj + sum / n as f64;
    Ok(-1.0 / (sigma_sq * m) - 1.0)
}

/// One estimate per declared spike: upper spikes in order `lambda_1..`,
/// then lower spikes in order `lambda_{-1}, lambda_{-2}, ..`.
pub fn estimate_spiked_eigenvalues(
    eig: &EigenSummary,
    counts: SpikeCounts,
    sigma_sq: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let p = eig.dimension();
    check_counts(p, counts)?;
    let upper = (0..counts.upper).map(|k| paired_index(SpikeKind::Upper, k, p));
    let lower = (0..counts.lower).map(|k| paired_index(SpikeKind::Lower, k, p));
    upper
        .chain(lower)
        .map(|idx| estimate_spike_at(eig, idx, sigma_sq, n))
        .collect()
}

/// Limiting squared cosine between a sample spike eigenvector and its
/// population direction: `(lambda^2 - c) / (lambda (lambda + c))`.
pub fn compute_a(lambda: f64, c: f64) -> Result<f64> {
    if lambda.abs() <= c.sqrt() {
        return Err(Error::SubcriticalSpike {
            lambda,
            threshold: c.sqrt(),
        });
    }
    let denom = lambda * (lambda + c);
    if denom == 0.0 {
        return Err(Error::SubcriticalSpike {
            lambda,
            threshold: c.sqrt(),
        });
    }
    Ok((lambda * lambda - c) / denom)
}

/// `||mu_hat||^2 - c1 sigma1^2 - c0 sigma0^2`, the shared denominator of
/// the mean-separation estimators.
pub fn mean_separation_denominator(mu_hat: &DVector<f64>, sigma_sq: [f64; 2], c: [f64; 2]) -> f64 {
    mu_hat.norm_squared() - c[1] * sigma_sq[1] - c[0] * sigma_sq[0]
}

/// `1 / alpha_i = sigma_i^2 / (||mu_hat||^2 - c1 sigma1^2 - c0 sigma0^2)`.
pub fn estimate_alpha_inverse(
    mu_hat: &DVector<f64>,
    sigma0_sq: f64,
    sigma1_sq: f64,
    c0: f64,
    c1: f64,
    which: usize,
) -> Result<f64> {
    let denominator = mean_separation_denominator(mu_hat, [sigma0_sq, sigma1_sq], [c0, c1]);
    if !(denominator > 0.0) {
        return Err(Error::MeanSeparation { denominator });
    }
    let sigma_sq = if which == 0 { sigma0_sq } else { sigma1_sq };
    Ok(sigma_sq / denominator)
}

/// Unclamped projection estimate
/// `(1 + c/lambda)/(1 - c/lambda) * (mu_hat' u)^2 / denominator`.
pub fn estimate_b_unclamped(
    mu_hat: &DVector<f64>,
    u_j: &DVector<f64>,
    lambda_hat_j: f64,
    c: f64,
    sigma0_sq: f64,
    sigma1_sq: f64,
    c0: f64,
    c1: f64,
) -> Result<f64> {
    let shrink = 1.0 - c / lambda_hat_j;
    if shrink == 0.0 || !shrink.is_finite() {
        return Err(Error::InvalidInput(format!(
            "projection correction is singular at lambda = {lambda_hat_j}, c = {c}"
        )));
    }
    let denominator = mean_separation_denominator(mu_hat, [sigma0_sq, sigma1_sq], [c0, c1]);
    if !(denominator > 0.0) {
        return Err(Error::MeanSeparation { denominator });
    }
    let proj = mu_hat.dot(u_j);
    Ok((1.0 + c / lambda_hat_j) / shrink * proj * proj / denominator)
}

/// [`estimate_b_unclamped`] clamped at zero.
#[allow(clippy::too_many_arguments)]
pub fn estimate_b(
    mu_hat: &DVector<f64>,
    u_j: &DVector<f64>,
    lambda_hat_j: f64,
    c: f64,
    sigma0_sq: f64,
    sigma1_sq: f64,
    c0: f64,
    c1: f64,
) -> Result<f64> {
    let b = estimate_b_unclamped(mu_hat, u_j, lambda_hat_j, c, sigma0_sq, sigma1_sq, c0, c1)?;
    if b < 0.0 {
        log::warn!("projection estimate {b:e} clamped to 0");
    }
    Ok(b.max(0.0))
}

/// Cross-class alignment `u_l' u_j / sqrt(a_l a_j)`.
pub fn estimate_psi(u_l: &DVector<f64>, u_j: &DVector<f64>, a_l: f64, a_j: f64) -> Result<f64> {
    if !(a_l > 0.0 && a_j > 0.0) {
        return Err(Error::InvalidInput(format!(
            "alignment correction needs positive a, got {a_l} and {a_j}"
        )));
    }
    Ok(u_l.dot(u_j) / (a_l * a_j).sqrt())
}

/// One estimated spike of a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedSpike {
    pub kind: SpikeKind,
    /// Column of the class eigendecomposition holding `u_j`.
    pub eigen_index: usize,
    pub sample_eigenvalue: f64,
    pub lambda: f64,
    pub a: f64,
}

/// Per-class spectral fit: counts actually used, noise variance, and the
/// spikes in coefficient order (lower `lambda_{-r2}..lambda_{-1}`, then
/// upper `lambda_1..lambda_{r1}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpikeFit {
    pub requested: SpikeCounts,
    pub counts: SpikeCounts,
    pub dof: usize,
    pub c: f64,
    pub noise: NoiseVarianceEstimate,
    pub spikes: Vec<EstimatedSpike>,
}

impl ClassSpikeFit {
    pub fn dropped(&self) -> SpikeCounts {
        SpikeCounts::new(
            self.requested.upper - self.counts.upper,
            self.requested.lower - self.counts.lower,
        )
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.spikes.iter().map(|s| s.lambda).collect()
    }

    pub fn upper_spikes(&self) -> impl Iterator<Item = &EstimatedSpike> {
        self.spikes.iter().filter(|s| s.kind == SpikeKind::Upper)
    }

    pub fn lower_spikes(&self) -> impl Iterator<Item = &EstimatedSpike> {
        self.spikes.iter().filter(|s| s.kind == SpikeKind::Lower)
    }
}

/// Number of leading estimates satisfying `valid`.
fn leading_valid(values: &[f64], valid: impl Fn(usize, f64) -> bool) -> usize {
    values.iter().enumerate().take_while(|&(k, &v)| valid(k, v)).count()
}

/// Estimates noise variance and spikes for one class. A spike is kept
/// only if its estimate is supercritical and its sample eigenvalue lies
/// outside the bulk `sigma^2 (1 +- sqrt(c))^2`; near the edge the
/// estimator alone can return spurious supercritical values for bulk
/// eigenvalues. Failing spikes (and all lower spikes when `dof < p`)
/// are dropped from the end of their group and the fit is repeated with
/// the reduced counts.
pub fn fit_class_spikes(eig: &EigenSummary, requested: SpikeCounts, dof: usize) -> Result<ClassSpikeFit> {
    let p = eig.dimension();
    check_counts(p, requested)?;
    if dof < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 degrees of freedom, got {dof}")));
    }
    let c = p as f64 / dof as f64;
    let threshold = c.sqrt();
    let mut counts = requested;
    if dof < p {
        counts.lower = 0;
    }
    counts.upper = counts.upper.min(dof.min(p) - 1);
    let kept_counts = |counts: SpikeCounts, lambdas: &[f64], sigma_sq: f64| {
        let (up, low) = lambdas.split_at(counts.upper);
        let upper_edge = sigma_sq * (1.0 + threshold).powi(2);
        let lower_edge = sigma_sq * (1.0 - threshold).powi(2);
        let upper_ok = |k: usize, l: f64| l > threshold && eig.values[paired_index(SpikeKind::Upper, k, p)] > upper_edge;
        let lower_ok = |k: usize, l: f64| {
            l > -1.0 && l < -threshold && eig.values[paired_index(SpikeKind::Lower, k, p)] < lower_edge
        };
        SpikeCounts::new(leading_valid(up, upper_ok), leading_valid(low, lower_ok))
    };

    loop {
        let raw = noise_variance_raw(eig, counts)?;
        let provisional = estimate_spiked_eigenvalues(eig, counts, raw, dof)?;
        let kept = kept_counts(counts, &provisional, raw);
        if kept != counts {
            counts = kept;
            continue;
        }
        let corrected = noise_variance_corrected(raw, counts, &provisional, p, dof)?;
        let lambdas = estimate_spiked_eigenvalues(eig, counts, corrected, dof)?;
        let kept = kept_counts(counts, &lambdas, corrected);
        let (up, low) = lambdas.split_at(counts.upper);
        if kept != counts {
            counts = kept;
            continue;
        }
        if requested != counts {
            log::debug!("spike counts reduced from {requested} to {counts}");
        }
        let make = |kind, k: usize, lambda: f64| -> Result<EstimatedSpike> {
            let eigen_index = paired_index(kind, k, p);
            Ok(EstimatedSpike {
                kind,
                eigen_index,
                sample_eigenvalue: eig.values[eigen_index],
                lambda,
                a: compute_a(lambda, c)?,
            })
        };
        let mut spikes = Vec::with_capacity(counts.total());
        for k in (0..counts.lower).rev() {
            spikes.push(make(SpikeKind::Lower, k, low[k])?);
        }
        for (k, &l) in up.iter().enumerate() {
            spikes.push(make(SpikeKind::Upper, k, l)?);
        }
        return Ok(ClassSpikeFit {
            requested,
            counts,
            dof,
            c,
            noise: NoiseVarianceEstimate {
                raw,
                corrected,
                ratio_c: c,
            },
            spikes,
        });
    }
}

/// What to do when the mean-separation denominator is not positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MeanSeparationPolicy {
    /// Propagate [`Error::MeanSeparation`].
    #[default]
    Fail,
    /// Treat the mean separation as undetectable: `alpha = 0`, `b = 0`.
    TreatAsZero,
}

/// Plug-in quantities of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeEstimates {
    pub lambda_hat: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub alpha_inv_hat: f64,
    pub noise: NoiseVarianceEstimate,
}

impl SpikeEstimates {
    pub fn alpha(&self) -> f64 {
        if self.alpha_inv_hat.is_finite() {
            1.0 / self.alpha_inv_hat
        } else {
            0.0
        }
    }
}

/// Plug-in quantities of both classes plus the cross-class alignments
/// (`psi[(s, t)]` pairs class-0 spike `s` with class-1 spike `t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlugInEstimates {
    pub classes: [SpikeEstimates; 2],
    pub psi: nalgebra::DMatrix<f64>,
    pub mean_separation: f64,
    pub clamped_b: usize,
}

/// Plug-in estimates from two spectral fits. `mu_hat = x0 - x1`,
/// `c_mean[i] = p / n_i`, `sigma_sq` the noise levels to plug in.
pub fn estimate_plug_ins(
    fits: [&ClassSpikeFit; 2],
    eigs: [&EigenSummary; 2],
    mu_hat: &DVector<f64>,
    sigma_sq: [f64; 2],
    c_mean: [f64; 2],
    policy: MeanSeparationPolicy,
) -> Result<PlugInEstimates> {
    let denominator = mean_separation_denominator(mu_hat, sigma_sq, c_mean);
    let separated = denominator > 0.0;
    if !separated && policy == MeanSeparationPolicy::Fail {
        return Err(Error::MeanSeparation { denominator });
    }
    let mut clamped_b = 0;
    let mut classes = Vec::with_capacity(2);
    for i in 0..2 {
        let fit = fits[i];
        let mut b_hat = Vec::with_capacity(fit.spikes.len());
        for s in &fit.spikes {
            let b = if separated {
                let raw = estimate_b_unclamped(
                    mu_hat,
                    &eigs[i].vector(s.eigen_index),
                    s.lambda,
                    fit.c,
                    sigma_sq[0],
                    sigma_sq[1],
                    c_mean[0],
                    c_mean[1],
                )?;
                if raw < 0.0 {
                    clamped_b += 1;
                }
                raw.max(0.0)
            } else {
                0.0
            };
            b_hat.push(b);
        }
        let alpha_inv_hat = if separated {
            sigma_sq[i] / denominator
        } else {
            f64::INFINITY
        };
        classes.push(SpikeEstimates {
            lambda_hat: fit.lambdas(),
            a_hat: fit.spikes.iter().map(|s| s.a).collect(),
            b_hat,
            alpha_inv_hat,
            noise: fit.noise,
        });
    }
    if clamped_b > 0 {
        log::warn!("{clamped_b} projection estimates clamped to 0");
    }
    let (s0, s1) = (&fits[0].spikes, &fits[1].spikes);
    let mut psi = nalgebra::DMatrix::zeros(s0.len(), s1.len());
    for (r, a) in s0.iter().enumerate() {
        let ua = eigs[0].vector(a.eigen_index);
        for (col, b) in s1.iter().enumerate() {
            psi[(r, col)] = estimate_psi(&ua, &eigs[1].vector(b.eigen_index), a.a, b.a)?;
        }
    }
    let classes: [SpikeEstimates; 2] = classes.try_into().expect("two classes");
    Ok(PlugInEstimates {
        classes,
        psi,
        mean_separation: denominator,
        clamped_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn summary(values: &[f64]) -> EigenSummary {
        EigenSummary {
            values: DVector::from_row_slice(values),
            vectors: DMatrix::identity(values.len(), values.len()),
        }
    }

    #[test]
    fn raw_noise_variance_examples() {
        assert_eq!(noise_variance_raw(&summary(&[5.0, 1.0, 1.0, 1.0]), SpikeCounts::new(1, 0)).unwrap(), 1.0);
        assert_eq!(noise_variance_raw(&summary(&[5.0, 2.0, 1.0, 0.1]), SpikeCounts::new(1, 1)).unwrap(), 1.5);
        assert!(noise_variance_raw(&summary(&[5.0, 2.0]), SpikeCounts::new(1, 1)).is_err());
    }

    #[test]
    fn corrected_noise_variance_examples() {
        assert_eq!(noise_variance_corrected(1.3, SpikeCounts::default(), &[], 50, 100).unwrap(), 1.3);
        let v = noise_variance_corrected(1.0, SpikeCounts::new(1, 0), &[10.0], 100, 200).unwrap();
        assert_relative_eq!(v, 1.0 + 0.5 / 99.0 * 1.1, epsilon = 1e-15);
        assert!(noise_variance_corrected(1.0, SpikeCounts::new(1, 0), &[0.0], 100, 200).is_err());
    }

    #[test]
    fn standardized_statistic_examples() {
        let counts = SpikeCounts::new(1, 0);
        assert_eq!(standardized_noise_statistic(1.0, 1.0, counts, 101, 202), 0.0);
        assert_relative_eq!(standardized_noise_statistic(1.01, 1.0, counts, 101, 202), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_map_examples() {
        assert_relative_eq!(spike_forward_map(26.0, 1.0).unwrap(), 27.04, epsilon = 1e-12);
        assert_eq!(spike_forward_map(3.7, 0.0).unwrap(), 3.7);
        let j: f64 = 0.3;
        assert_relative_eq!(spike_forward_map(1.0 + j.sqrt(), j).unwrap(), (1.0 + j.sqrt()).powi(2), epsilon = 1e-12);
        assert!(spike_forward_map(1.0, 0.5).is_err());
    }

    #[test]
    fn compute_a_examples() {
        assert_relative_eq!(compute_a(25.0, 1.0).unwrap(), 624.0 / 650.0, epsilon = 1e-15);
        assert_relative_eq!(compute_a(-0.95, 0.5).unwrap(), 0.4025 / 0.4275, epsilon = 1e-12);
        assert!(matches!(compute_a(0.5, 0.25), Err(Error::SubcriticalSpike { .. })));
        assert!(compute_a(-0.4, 0.25).is_err());
    }

    #[test]
    fn alpha_inverse_examples() {
        let mu = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert_relative_eq!(estimate_alpha_inverse(&mu, 1.0, 1.0, 1.0, 1.0, 0).unwrap(), 1.0);
        assert_relative_eq!(estimate_alpha_inverse(&mu, 2.0, 1.0, 0.0, 0.0, 0).unwrap(), 2.0 / 3.0);
        assert!(matches!(
            estimate_alpha_inverse(&mu, 2.0, 1.0, 1.0, 1.0, 1),
            Err(Error::MeanSeparation { .. })
        ));
    }

    #[test]
    fn b_examples() {
        let mu = DVector::from_vec(vec![3.0, 4.0, 0.0]);
        let e3 = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert_eq!(estimate_b(&mu, &e3, 10.0, 0.5, 1.0, 1.0, 0.0, 0.0).unwrap(), 0.0);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_relative_eq!(estimate_b(&mu, &e1, 10.0, 0.0, 1.0, 1.0, 0.0, 0.0).unwrap(), 9.0 / 25.0);
        assert!(estimate_b(&mu, &e1, 0.5, 0.5, 1.0, 1.0, 0.0, 0.0).is_err());
        // Negative raw value from a lower spike is clamped.
        let raw = estimate_b_unclamped(&mu, &e1, -0.3, 0.5, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(raw < 0.0);
        assert_eq!(estimate_b(&mu, &e1, -0.3, 0.5, 1.0, 1.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn psi_examples() {
        let u = DVector::from_vec(vec![0.6, 0.8]);
        let w = DVector::from_vec(vec![-0.8, 0.6]);
        assert_relative_eq!(estimate_psi(&u, &u, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(estimate_psi(&u, &w, 0.9, 0.8).unwrap(), 0.0);
        assert!(estimate_psi(&u, &u, 0.0, 1.0).is_err());
    }

    #[test]
    fn coincident_eigenvalues_are_rejected() {
        let eig = summary(&[3.0, 3.0, 1.0, 1.0, 0.5]);
        assert!(matches!(
            estimate_spiked_eigenvalues(&eig, SpikeCounts::new(1, 0), 1.0, 10),
            Err(Error::CoincidentEigenvalues { index: 0 })
        ));
    }

    #[test]
    fn classical_limit_of_spike_estimate() {
        // A single detached eigenvalue over a flat bulk at c -> 0.
        let mut values = vec![1.0; 10];
        values[0] = 26.0;
        for (k, v) in values.iter_mut().enumerate().skip(1) {
            *v += 1e-3 * k as f64;
        }
        values[1..].sort_by(|a, b| b.total_cmp(a));
        let eig = summary(&values);
        let lam = estimate_spiked_eigenvalues(&eig, SpikeCounts::new(1, 0), 1.0, 100_000).unwrap();
        assert_relative_eq!(lam[0], 25.0, max_relative = 0.02);
    }

    #[test]
    fn spike_estimate_inverts_forward_map_on_idealized_spectrum() {
        // Bulk eigenvalues at the Marchenko-Pastur quantiles, spike at its
        // almost-sure limit: the estimate should land near the truth.
        let (p, n, lambda) = (400usize, 800usize, 9.0f64);
        let c = p as f64 / n as f64;
        let mut values = vec![spike_forward_map(1.0 + lambda, c).unwrap()];
        values.extend(mp_quantiles(p - 1, c));
        let eig = summary(&values);
        let lam = estimate_spiked_eigenvalues(&eig, SpikeCounts::new(1, 0), 1.0, n).unwrap();
        assert!((lam[0] - lambda).abs() < 0.2, "estimate {}", lam[0]);
    }

    /// Descending quantiles of the Marchenko-Pastur law with ratio `c < 1`.
    fn mp_quantiles(m: usize, c: f64) -> Vec<f64> {
        let (lo, hi) = ((1.0 - c.sqrt()).powi(2), (1.0 + c.sqrt()).powi(2));
        let density = |x: f64| ((hi - x) * (x - lo)).max(0.0).sqrt() / (2.0 * std::f64::consts::PI * c * x);
        let grid = 200_000;
        let h = (hi - lo) / grid as f64;
        let mut cdf = Vec::with_capacity(grid);
        let mut acc = 0.0;
        for k in 0..grid {
            acc += density(lo + (k as f64 + 0.5) * h) * h;
            cdf.push(acc);
        }
        let total = acc;
        let mut out: Vec<f64> = (0..m)
            .map(|q| {
                let target = (q as f64 + 0.5) / m as f64 * total;
                let k = cdf.partition_point(|&v| v < target);
                lo + (k as f64 + 0.5) * h
            })
            .collect();
        out.sort_by(|a, b| b.total_cmp(a));
        out
    }

    #[test]
    fn detector_on_idealized_spectra() {
        let (p, n) = (200usize, 800usize);
        let c = p as f64 / n as f64;
        let eig = summary(&{
            let mut v = mp_quantiles(p, c);
            v.sort_by(|a, b| b.total_cmp(a));
            v
        });
        assert_eq!(detect_spike_counts(&eig, n, 0.1).unwrap(), SpikeCounts::default());

        let mut v = vec![spike_forward_map(26.0, c).unwrap()];
        v.extend(mp_quantiles(p - 2, c));
        v.push(spike_forward_map(0.1, c).unwrap());
        let eig = summary(&v);
        assert_eq!(detect_spike_counts(&eig, n, 0.1).unwrap(), SpikeCounts::new(1, 1));
    }

    #[test]
    fn fit_drops_subcritical_spikes() {
        let (p, n) = (200usize, 400usize);
        let c = p as f64 / n as f64;
        let mut v = vec![spike_forward_map(26.0, c).unwrap()];
        v.extend(mp_quantiles(p - 1, c));
        let eig = summary(&v);
        // Second declared spike sits in the bulk and must be dropped.
        let fit = fit_class_spikes(&eig, SpikeCounts::new(2, 0), n).unwrap();
        assert_eq!(fit.counts, SpikeCounts::new(1, 0));
        assert_eq!(fit.dropped(), SpikeCounts::new(1, 0));
        assert!((fit.spikes[0].lambda - 25.0).abs() < 1.0);
    }

    #[test]
    fn rank_deficient_fit_drops_lower_spikes() {
        let mut v = vec![40.0];
        v.extend((0..9).map(|k| 2.0 - 0.1 * k as f64));
        v.extend(std::iter::repeat_n(0.0, 10));
        let eig = summary(&v);
        let fit = fit_class_spikes(&eig, SpikeCounts::new(1, 1), 10).unwrap();
        assert_eq!(fit.counts.lower, 0);
    }

    proptest! {
        #[test]
        fn compute_a_is_increasing(c in 0.05f64..2.0, x in 1.01f64..50.0, dx in 1e-3f64..1.0) {
            let lo = c.sqrt() * x;
            let a0 = compute_a(lo, c).unwrap();
            let a1 = compute_a(lo + dx, c).unwrap();
            prop_assert!(a1 > a0);
            prop_assert!((0.0..1.0).contains(&a0));
        }

        #[test]
        fn corrected_at_least_raw_for_upper_spikes(raw in 0.1f64..5.0, l in prop::collection::vec(0.5f64..50.0, 1..4)) {
            let counts = SpikeCounts::new(l.len(), 0);
            let v = noise_variance_corrected(raw, counts, &l, 100, 150).unwrap();
            prop_assert!(v >= raw);
        }

        #[test]
        fn forward_map_is_increasing_above_edge(j in 0.01f64..2.0, t in 0.01f64..20.0) {
            let x0 = 1.0 + j.sqrt() + t;
            prop_assert!(spike_forward_map(x0 + 0.01, j).unwrap() > spike_forward_map(x0, j).unwrap());
        }
    }
}
