//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use srqda::fisher::{
    build_components, eta, mean_bar, omega_to_gamma, shrinkage_coefficients, var_bar, BulkTerms, GammaParams,
    OmegaParams, PopulationQuantities, VarianceForm,
};
use srqda::model::{moments_of_rows, sample_class, spiked_sqrt, symmetric_eigen, SpikedCovarianceSpec};
use srqda::rng::{derive_seed, rng_from_seed};
use srqda::spike::{paired_index, SpikeKind};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// One class's `spec` with given spikes along columns of `dirs`.
pub fn spec(sigma_sq: f64, upper: &[f64], lower: &[f64], dirs: DMatrix<f64>, mean: DVector<f64>) -> SpikedCovarianceSpec {
    SpikedCovarianceSpec::new(sigma_sq, upper.to_vec(), lower.to_vec(), dirs, mean).unwrap()
}

/// Moments of the limiting statistic for test points of one class.
#[derive(Debug, Clone, Copy)]
pub struct MomentCheck {
    pub class: usize,
    /// Monte Carlo over `z`.
    pub mean_mc: f64,
    pub var_mc: f64,
    /// Exact moments over `z` given the training sample.
    pub mean_exact: f64,
    pub var_exact: f64,
    /// Deterministic equivalents.
    pub mean_bar: f64,
    pub var_bar: f64,
}

impl MomentCheck {
    pub fn mean_rel_err(&self) -> f64 {
        ((self.mean_mc - self.mean_bar) / self.mean_bar).abs()
    }
    pub fn var_rel_err(&self) -> f64 {
        ((self.var_mc - self.var_bar) / self.var_bar).abs()
    }
}

/// Two-class statistic test bed: population quantities plus one
/// training draw (means and sample spike eigenvectors in coefficient
/// order).
pub struct StatisticBed {
    pub specs: [SpikedCovarianceSpec; 2],
    pub q: PopulationQuantities,
    pub xbar: [DVector<f64>; 2],
    pub u: [Vec<DVector<f64>>; 2],
}

impl StatisticBed {
    pub fn new(specs: [SpikedCovarianceSpec; 2], n: [usize; 2], form: VarianceForm, seed: u64) -> Self {
        let q = PopulationQuantities::from_specs([&specs[0], &specs[1]], n, 0.5, form).unwrap();
        let mu = specs[1].mean() - specs[0].mean();
        let p = specs[0].dimension();
        let mut xbar = Vec::new();
        let mut u = Vec::new();
        for i in 0..2 {
            let rows = sample_class(&specs[i], n[i], derive_seed(seed, &[i as u64]));
            let m = moments_of_rows(&rows).unwrap();
            let mut eig = symmetric_eigen(&m.covariance).unwrap();
            eig.align_signs(&mu);
            let r1 = specs[i].spikes_upper().len();
            let r2 = specs[i].spikes_lower().len();
            let idx = (0..r2)
                .rev()
                .map(|k| paired_index(SpikeKind::Lower, k, p))
                .chain((0..r1).map(|k| paired_index(SpikeKind::Upper, k, p)));
            u.push(idx.map(|j| eig.vector(j)).collect::<Vec<_>>());
            xbar.push(m.mean);
        }
        Self {
            specs,
            q,
            xbar: [xbar[0].clone(), xbar[1].clone()],
            u: [u[0].clone(), u[1].clone()],
        }
    }

    /// Random admissible parameters: `omega` uniform in `(0.05, 0.95)`
    /// per axis, kept away from the lower-spike singular points.
    pub fn random_gamma(&self, seed: u64) -> GammaParams {
        let mut rng = rng_from_seed(seed);
        loop {
            let w: [f64; 4] = std::array::from_fn(|_| 0.05 + 0.9 * rand::Rng::random::<f64>(&mut rng));
            if let Ok(g) = omega_to_gamma(&OmegaParams::from_array(w), &self.q) {
                if g.is_admissible(&self.q, f64::INFINITY, 0.05) {
                    return g;
                }
            }
        }
    }

    /// Exact and Monte Carlo moments of
    /// `p sigma_i^2 d + kappa_i + 2 y_i' z - xi_i` against the deterministic
    /// equivalents, with `draws` standard normal vectors `z`.
    pub fn check(&self, gamma: &GammaParams, bulk: BulkTerms, draws: usize, seed: u64) -> [MomentCheck; 2] {
        let mut q = self.q.clone();
        q.bulk = bulk;
        let comps = build_components(&q).unwrap();
        let coeffs = shrinkage_coefficients(gamma, &q).unwrap();
        let eta = eta(&comps, &coeffs);
        let p = q.p;
        let sig = [q.classes[0].sigma_sq, q.classes[1].sigma_sq];
        let d = 1.0 / sig[1] - 1.0 / sig[0];
        let apply = |k: usize, v: &DVector<f64>| -> DVector<f64> {
            let mut out = v.clone();
            for (u, &c) in self.u[k].iter().zip(coeffs.class(k)) {
                out.axpy(-c * u.dot(v), u, 1.0);
            }
            out / sig[k]
        };
        std::array::from_fn(|i| {
            let root = spiked_sqrt(&self.specs[i]);
            let mu_i = self.specs[i].mean();
            let r0 = mu_i - &self.xbar[0];
            let r1 = mu_i - &self.xbar[1];
            let y = &root * (apply(1, &r1) - apply(0, &r0));
            let xi = -2.0 * eta + r0.dot(&apply(0, &r0)) - r1.dot(&apply(1, &r1));
            // kappa = sum_s w_s (z' Sigma^{1/2} u_s)^2
            let mut vecs = Vec::new();
            let mut weights = Vec::new();
            for k in 0..2 {
                let sign = if k == 0 { 1.0 } else { -1.0 };
                for (u, &c) in self.u[k].iter().zip(coeffs.class(k)) {
                    vecs.push(&root * u);
                    weights.push(sign * c / sig[k]);
                }
            }
            let constant = p as f64 * sig[i] * d - xi;
            let mean_exact = constant + vecs.iter().zip(&weights).map(|(v, w)| w * v.norm_squared()).sum::<f64>();
            let mut frob = 0.0;
            for (s, vs) in vecs.iter().enumerate() {
                for (t, vt) in vecs.iter().enumerate() {
                    frob += weights[s] * weights[t] * vs.dot(vt).powi(2);
                }
            }
            let var_exact = 2.0 * frob + 4.0 * y.norm_squared();

            let mut rng = rng_from_seed(derive_seed(seed, &[i as u64]));
            let mut basis = DMatrix::zeros(p, vecs.len() + 1);
            for (c, v) in vecs.iter().enumerate() {
                basis.set_column(c, v);
            }
            basis.set_column(vecs.len(), &y);
            let basis_t = basis.transpose();
            let mut samples = Vec::with_capacity(draws);
            let mut z = DVector::zeros(p);
            for _ in 0..draws {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let proj = &basis_t * &z;
                let kappa: f64 = weights.iter().enumerate().map(|(s, w)| w * proj[s].powi(2)).sum();
                samples.push(constant + kappa + 2.0 * proj[vecs.len()]);
            }
            MomentCheck {
                class: i,
                mean_mc: mean(&samples),
                var_mc: variance(&samples),
                mean_exact,
                var_exact,
                mean_bar: mean_bar(&comps, &coeffs, i),
                var_bar: var_bar(&comps, &coeffs, i).unwrap_or(f64::NAN),
            }
        })
    }
}

impl StatisticBed {
    /// Exact mean and variance over `z` of `2 W(x)` itself, i.e. with the
    /// full `d z' Sigma_i z` instead of its limit, from dense matrices.
    pub fn full_moments(&self, gamma: &GammaParams) -> [(f64, f64); 2] {
        let comps = build_components(&self.q).unwrap();
        let coeffs = shrinkage_coefficients(gamma, &self.q).unwrap();
        let eta = eta(&comps, &coeffs);
        let p = self.q.p;
        let sig = [self.q.classes[0].sigma_sq, self.q.classes[1].sigma_sq];
        let h = |k: usize| {
            let mut m = DMatrix::identity(p, p);
            for (u, &c) in self.u[k].iter().zip(coeffs.class(k)) {
                m -= u * u.transpose() * c;
            }
            m / sig[k]
        };
        let h = [h(0), h(1)];
        std::array::from_fn(|i| {
            let root = spiked_sqrt(&self.specs[i]);
            let b = &root * (&h[1] - &h[0]) * &root;
            let mu_i = self.specs[i].mean();
            let r0 = mu_i - &self.xbar[0];
            let r1 = mu_i - &self.xbar[1];
            let y = &root * (&h[1] * &r1 - &h[0] * &r0);
            let xi = -2.0 * eta + r0.dot(&(&h[0] * &r0)) - r1.dot(&(&h[1] * &r1));
            (b.trace() - xi, 2.0 * (&b * &b).trace() + 4.0 * y.norm_squared())
        })
    }
}

/// Spec pair at dimension `p`: class 0 spikes {25, 10} and {-0.8},
/// class 1 spikes {15} and {-0.9}, `mu_0 = (2/sqrt p) 1`. With
/// `overlap`, class 1's leading direction is tilted towards class 0's.
pub fn moment_specs(p: usize, sigma1_sq: f64, overlap: Option<f64>, seed: u64) -> [SpikedCovarianceSpec; 2] {
    let frame = srqda::model::make_orthonormal_directions(p, 6, seed).unwrap();
    let d0 = frame.columns(0, 3).into_owned();
    let mut d1 = frame.columns(3, 2).into_owned();
    if let Some(t) = overlap {
        let tilted = frame.column(3) * (1.0 - t * t).sqrt() + frame.column(0) * t;
        d1.set_column(0, &tilted);
    }
    let mu0 = DVector::from_element(p, 2.0 / (p as f64).sqrt());
    [
        spec(1.0, &[25.0, 10.0], &[-0.8], d0, mu0),
        spec(sigma1_sq, &[15.0], &[-0.9], d1, DVector::zeros(p)),
    ]
}

/// Gaussian log-density from the dense covariance via Cholesky.
pub fn gaussian_ln_pdf(mean: &DVector<f64>, cov: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let chol = cov.clone().cholesky().expect("positive definite covariance");
    let w = chol.l().solve_lower_triangular(&(x - mean)).unwrap();
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (w.norm_squared() + log_det + mean.len() as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Bayes decision at `x` by explicit likelihood ratio.
pub fn bayes_decision(specs: [&SpikedCovarianceSpec; 2], pi0: f64, x: &DVector<f64>) -> usize {
    let l0 = pi0.ln() + gaussian_ln_pdf(specs[0].mean(), &specs[0].covariance(), x);
    let l1 = (1.0 - pi0).ln() + gaussian_ln_pdf(specs[1].mean(), &specs[1].covariance(), x);
    if l0 > l1 {
        0
    } else {
        1
    }
}

fn class_fit(
    spec: &SpikedCovarianceSpec,
    n: usize,
    counts: srqda::spike::SpikeCounts,
    seed: u64,
) -> (srqda::model::ClassMoments, srqda::model::EigenSummary, srqda::spike::ClassSpikeFit) {
    let rows = sample_class(spec, n, seed);
    let m = moments_of_rows(&rows).unwrap();
    let eig = symmetric_eigen(&m.covariance).unwrap();
    let fit = srqda::spike::fit_class_spikes(&eig, counts, n - 1).unwrap();
    (m, eig, fit)
}

/// Noise-variance CLT summary over `reps` samples.
#[derive(Debug, Clone, Copy)]
pub struct NoiseClt {
    pub corrected_mean: f64,
    pub corrected_var: f64,
    pub raw_mean: f64,
    pub raw_bias_theory: f64,
}

/// Standardized noise statistics at `p = 200`, `n = 400`, `sigma^2 = 1`,
/// one spike of size 25.
pub fn noise_clt(reps: usize, seed: u64) -> NoiseClt {
    use srqda::spike::{raw_noise_bias, standardized_noise_statistic, SpikeCounts};
    let (p, n) = (200, 400);
    let counts = SpikeCounts::new(1, 0);
    let dirs = srqda::model::make_orthonormal_directions(p, 1, seed).unwrap();
    let s = spec(1.0, &[25.0], &[], dirs, DVector::zeros(p));
    let (mut corr, mut raw) = (Vec::new(), Vec::new());
    for r in 0..reps {
        let (_, _, fit) = class_fit(&s, n, counts, derive_seed(seed, &[r as u64]));
        let dof = n - 1;
        corr.push(standardized_noise_statistic(fit.noise.corrected, 1.0, counts, p, dof));
        raw.push(standardized_noise_statistic(fit.noise.raw, 1.0, counts, p, dof));
    }
    NoiseClt {
        corrected_mean: mean(&corr),
        corrected_var: variance(&corr),
        raw_mean: mean(&raw),
        raw_bias_theory: raw_noise_bias(&[25.0], p, n - 1),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Consistency {
    pub lambda_mean_abs_err: f64,
    pub lambda_bias: f64,
    pub lambda_sd: f64,
    pub b_mean_abs_err: f64,
    pub psi_mean_abs_err: f64,
}

/// Spike-estimator consistency at `p = 200`, `n = 400` per class.
/// Projection case: class 0 has spike 25 along `v` and mean `3 v`,
/// class 1 is isotropic with mean 0 (so `b = 1`). Alignment case: both
/// classes spike along the same `v` (25 and 15), so `psi = 1`.
pub fn spike_consistency(trials: usize, seed: u64) -> Consistency {
    use srqda::spike::{estimate_plug_ins, MeanSeparationPolicy, SpikeCounts};
    let (p, n) = (200, 400);
    let one = SpikeCounts::new(1, 0);
    let (mut dl, mut db, mut dp, mut lam) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in 0..trials {
        let ts = derive_seed(seed, &[t as u64]);
        let dirs = srqda::model::make_orthonormal_directions(p, 1, ts).unwrap();
        let v = dirs.column(0).into_owned();

        let s0 = spec(1.0, &[25.0], &[], dirs.clone(), &v * 3.0);
        let s1 = spec(1.0, &[], &[], DMatrix::zeros(p, 0), DVector::zeros(p));
        let (m0, mut e0, f0) = class_fit(&s0, n, one, derive_seed(ts, &[1]));
        let (m1, mut e1, f1) = class_fit(&s1, n, SpikeCounts::new(0, 0), derive_seed(ts, &[2]));
        dl.push((f0.spikes[0].lambda - 25.0).abs());
        lam.push(f0.spikes[0].lambda);
        let mu_hat = &m0.mean - &m1.mean;
        e0.align_signs(&mu_hat);
        e1.align_signs(&mu_hat);
        let c = [p as f64 / n as f64; 2];
        let sig = [f0.noise.corrected, f1.noise.corrected];
        let plug = estimate_plug_ins([&f0, &f1], [&e0, &e1], &mu_hat, sig, c, MeanSeparationPolicy::Fail).unwrap();
        db.push((plug.classes[0].b_hat[0] - 1.0).abs());

        let s1 = spec(1.0, &[15.0], &[], dirs, DVector::zeros(p));
        let (m1, mut e1, f1) = class_fit(&s1, n, one, derive_seed(ts, &[3]));
        let mu_hat = &m0.mean - &m1.mean;
        let mut e0 = e0.clone();
        e0.align_signs(&mu_hat);
        e1.align_signs(&mu_hat);
        let sig = [f0.noise.corrected, f1.noise.corrected];
        let plug = estimate_plug_ins([&f0, &f1], [&e0, &e1], &mu_hat, sig, c, MeanSeparationPolicy::Fail).unwrap();
        dp.push((plug.psi[(0, 0)] - 1.0).abs());
    }
    Consistency {
        lambda_mean_abs_err: mean(&dl),
        lambda_bias: mean(&lam) - 25.0,
        lambda_sd: variance(&lam).sqrt(),
        b_mean_abs_err: mean(&db),
        psi_mean_abs_err: mean(&dp),
    }
}

/// Mean squared cosine between the leading sample eigenvector and `v`
/// at `p = 300`, `n = 600`, spike 25, with the predicted limit.
pub fn angle_law(trials: usize, seed: u64) -> (f64, f64) {
    let (p, n) = (300, 600);
    let mut cos2 = Vec::new();
    for t in 0..trials {
        let ts = derive_seed(seed, &[t as u64]);
        let dirs = srqda::model::make_orthonormal_directions(p, 1, ts).unwrap();
        let s = spec(1.0, &[25.0], &[], dirs.clone(), DVector::zeros(p));
        let rows = sample_class(&s, n, derive_seed(ts, &[1]));
        let eig = symmetric_eigen(&moments_of_rows(&rows).unwrap().covariance).unwrap();
        cos2.push(eig.vector(0).dot(&dirs.column(0)).powi(2));
    }
    let a = srqda::spike::compute_a(25.0, p as f64 / n as f64).unwrap();
    (mean(&cos2), a)
}

/// Worst errors of the closed-form identities over `trials` random draws.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityErrors {
    /// Low-rank regularized inverse vs dense inverse (max relative entry).
    pub inverse: f64,
    /// Closed-form log-determinant vs dense Cholesky, `p <= 100`.
    pub log_det: f64,
    pub omega_roundtrip: f64,
    /// Direct Fisher ratio vs the combined g/e/Omega form (relative).
    pub ratio_forms: f64,
}

pub fn identity_errors(trials: usize, seed: u64) -> IdentityErrors {
    use rand::Rng;
    use srqda::fisher::{fisher_ratio_combined, fisher_ratio_from_components, gamma_to_omega, log_det_inverse_regularized, shrink};
    let mut out = IdentityErrors::default();
    let mut rng = rng_from_seed(seed);
    for t in 0..trials {
        let ts = derive_seed(seed, &[t as u64]);
        let p = 20 + (t * 17) % 81;
        let u = srqda::model::make_orthonormal_directions(p, 4, ts).unwrap();
        let sigma_sq = rng.random_range(0.5..3.0);
        let lambdas = [rng.random_range(1.0..40.0), rng.random_range(0.5..5.0), -rng.random_range(0.1..0.95), -rng.random_range(0.1..0.95)];
        let (g1, g2) = (rng.random_range(0.01..2.0), rng.random_range(0.01..0.9));
        let gammas = [g1, g1, g2, g2];
        let mut h = DMatrix::<f64>::identity(p, p);
        let mut low = DMatrix::<f64>::identity(p, p);
        let mut coeffs = Vec::new();
        for k in 0..4 {
            let uk = u.column(k);
            h += uk * uk.transpose() * (gammas[k] * lambdas[k]);
            let s = shrink(gammas[k], lambdas[k]).unwrap();
            low -= uk * uk.transpose() * s;
            coeffs.push(s);
        }
        h *= sigma_sq;
        low /= sigma_sq;
        let dense = h.clone().try_inverse().unwrap();
        let scale = dense.amax();
        out.inverse = out.inverse.max((&dense - &low).amax() / scale);
        let chol = h.cholesky().unwrap();
        let dense_log_det = -2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let closed = log_det_inverse_regularized(p as f64 * sigma_sq.ln(), &coeffs);
        out.log_det = out.log_det.max((closed - dense_log_det).abs());

        let specs = moment_specs(80, 1.0 + t as f64 * 0.1, Some(0.3), ts);
        let bed_q = PopulationQuantities::from_specs([&specs[0], &specs[1]], [160, 160], 0.5, VarianceForm::Rederived).unwrap();
        let w: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.02..0.98));
        let Ok(gamma) = omega_to_gamma(&OmegaParams::from_array(w), &bed_q) else { continue };
        let back = gamma_to_omega(&gamma, &bed_q).unwrap().to_array();
        let rt = back.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.omega_roundtrip = out.omega_roundtrip.max(rt);
        let comps = build_components(&bed_q).unwrap();
        let Ok(c) = shrinkage_coefficients(&gamma, &bed_q) else { continue };
        if let (Ok(a), Ok(b)) = (fisher_ratio_from_components(&comps, &c), fisher_ratio_combined(&comps, &c)) {
            out.ratio_forms = out.ratio_forms.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    out
}

/// 2-D spec pair with different noise levels, spikes and means.
pub fn planar_specs() -> [SpikedCovarianceSpec; 2] {
    let t = 0.4f64;
    let d0 = DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()]);
    let d1 = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    [
        spec(1.0, &[3.0], &[], d0, DVector::from_vec(vec![0.5, -0.3])),
        spec(1.5, &[1.2], &[-0.6], d1, DVector::from_vec(vec![-0.4, 0.2])),
    ]
}

/// Grid points where the oracle QDA disagrees with the likelihood ratio,
/// out of `side^2` points on `[-4, 4]^2`.
pub fn bayes_grid_mismatches(side: usize, pi0: f64) -> (usize, usize) {
    use srqda::classifiers::{Classifier, QdaModel};
    let specs = planar_specs();
    let oracle = QdaModel::oracle([&specs[0], &specs[1]], pi0).unwrap();
    let mut bad = 0;
    for i in 0..side {
        for j in 0..side {
            let at = |k: usize| -4.0 + 8.0 * (k as f64 + 0.5) / side as f64;
            let x = DVector::from_vec(vec![at(i), at(j)]);
            if oracle.predict_row(x.as_slice()).unwrap() != bayes_decision([&specs[0], &specs[1]], pi0, &x) {
                bad += 1;
            }
        }
    }
    (bad, side * side)
}
