//! Asymptotic Fisher ratio of the SR-QDA statistic and its maximization
//! over the four regularization parameters.
//!
//! Spikes of a class are ordered as in the coefficient vector: lower
//! spikes `lambda_{-r2} .. lambda_{-1}` first, then upper spikes
//! `lambda_1 .. lambda_{r1}`; class 0 precedes class 1.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SpikedCovarianceSpec;
use crate::spike::{compute_a, SpikeKind};

/// Tolerance under which a per-class variance counts as numerical noise.
pub const VARIANCE_CLAMP: f64 = 1e-9;
pub const DEFAULT_GRID_RESOLUTION: usize = 20;
pub const DEFAULT_REFINE_RESOLUTION: usize = 10;
pub const DEFAULT_DELTA_OMEGA: f64 = 1e-3;

/// Which variant of the variance blocks to assemble.
///
/// * `Displayed` — the published component formulas, including the
///   `sigma_0^4` denominator in the off-diagonal `Theta` entries.
/// * `PatternConsistent` — as displayed but with `sigma_i^4` there.
/// * `Rederived` — the blocks recomputed from the covariance of quadratic
///   forms: squared `theta`, signed alignments in `M`/`e`, and the
///   cross-class block `N` with the class roles exchanged.
///
/// All three agree when spike directions of the two classes are
/// orthogonal. Otherwise only `Rederived` tracks the Monte Carlo moments
/// of the statistic, so it is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VarianceForm {
    Displayed,
    PatternConsistent,
    #[default]
    Rederived,
}

/// Whether the statistic's moments keep the bulk quadratic form.
///
/// `Omitted` replaces `(1/sigma_1^2 - 1/sigma_0^2) z' Sigma_i z` by
/// `p sigma_i^2 (1/sigma_1^2 - 1/sigma_0^2)`, as in the published
/// asymptotics. That drops an O(1) spike contribution to the mean and the
/// O(p) chi-square fluctuation (and its covariance with the spike terms)
/// from the variance, which matters whenever `sigma_0 != sigma_1`.
/// `Included` restores them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BulkTerms {
    #[default]
    Omitted,
    Included,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeTerm {
    pub kind: SpikeKind,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassQuantities {
    pub sigma_sq: f64,
    /// `p / n_i`, the ratio entering the mean-related terms.
    pub c: f64,
    pub alpha: f64,
    pub spikes: Vec<SpikeTerm>,
}

impl ClassQuantities {
    /// Largest upper spike `lambda_1`, the scale of `gamma_1`.
    pub fn upper_scale(&self) -> Option<f64> {
        self.spikes
            .iter()
            .filter(|s| s.kind == SpikeKind::Upper)
            .map(|s| s.lambda)
            .reduce(f64::max)
    }

    /// `|lambda_{-1}|`, the magnitude of the most negative lower spike.
    pub fn lower_scale(&self) -> Option<f64> {
        self.spikes
            .iter()
            .filter(|s| s.kind == SpikeKind::Lower)
            .map(|s| s.lambda)
            .reduce(f64::min)
            .map(f64::abs)
    }

    pub fn lowers(&self) -> impl Iterator<Item = &SpikeTerm> {
        self.spikes.iter().filter(|s| s.kind == SpikeKind::Lower)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationQuantities {
    pub classes: [ClassQuantities; 2],
    /// `psi[(s, t)] = v_{s,0}' v_{t,1}`.
    pub psi: DMatrix<f64>,
    pub p: usize,
    /// `log(pi_1 / pi_0)`.
    pub log_prior_ratio: f64,
    pub form: VarianceForm,
    #[serde(default)]
    pub bulk: BulkTerms,
}

impl PopulationQuantities {
    pub fn validate(&self) -> Result<()> {
        let (r0, r1) = (self.classes[0].spikes.len(), self.classes[1].spikes.len());
        if self.psi.nrows() != r0 || self.psi.ncols() != r1 {
            return Err(Error::InvalidInput(format!(
                "alignment matrix must be {r0}x{r1}, got {}x{}",
                self.psi.nrows(),
                self.psi.ncols()
            )));
        }
        for (i, cq) in self.classes.iter().enumerate() {
            if !(cq.sigma_sq > 0.0) || !cq.c.is_finite() || cq.c < 0.0 || !cq.alpha.is_finite() {
                return Err(Error::InvalidInput(format!("class {i} quantities are invalid")));
            }
            let mut seen_upper = false;
            for s in &cq.spikes {
                match s.kind {
                    SpikeKind::Upper => seen_upper = true,
                    SpikeKind::Lower if seen_upper => {
                        return Err(Error::InvalidInput(format!(
                            "class {i}: lower spikes must precede upper spikes"
                        )))
                    }
                    SpikeKind::Lower => {}
                }
                if !(s.lambda.is_finite() && s.a.is_finite() && s.b.is_finite()) {
                    return Err(Error::InvalidInput(format!("class {i}: non-finite spike term")));
                }
            }
        }
        Ok(())
    }

    pub fn rank(&self, class: usize) -> usize {
        self.classes[class].spikes.len()
    }

    /// Alignment between spike `s` of class `class` and spike `t` of the
    /// other class.
    fn cross(&self, class: usize, s: usize, t: usize) -> f64 {
        if class == 0 {
            self.psi[(s, t)]
        } else {
            self.psi[(t, s)]
        }
    }

    /// `phi_{s,i} = 1 + a_s sum_k lambda_{k,~i} psi_{k,s}^2`.
    pub fn phi(&self, class: usize, s: usize) -> f64 {
        let other = &self.classes[1 - class];
        let a = self.classes[class].spikes[s].a;
        1.0 + a * other
            .spikes
            .iter()
            .enumerate()
            .map(|(k, t)| t.lambda * self.cross(class, s, k).powi(2))
            .sum::<f64>()
    }

    /// `sum_k lambda_{k,~i} psi_{k,s} psi_{k,t}` over spikes of the other
    /// class; `signed = false` uses `|psi psi|`.
    fn weighted_overlap(&self, class: usize, s: usize, t: usize, signed: bool) -> f64 {
        self.classes[1 - class]
            .spikes
            .iter()
            .enumerate()
            .map(|(k, sp)| {
                let prod = self.cross(class, s, k) * self.cross(class, t, k);
                sp.lambda * if signed { prod } else { prod.abs() }
            })
            .sum()
    }

    /// `theta_{s,t,i} = sum_k lambda_{k,~i} sqrt(a_s a_t psi_{k,s}^2 psi_{k,t}^2)`.
    pub fn theta(&self, class: usize, s: usize, t: usize) -> f64 {
        let sp = &self.classes[class].spikes;
        (sp[s].a * sp[t].a).sqrt() * self.weighted_overlap(class, s, t, false)
    }

    /// Population quantities of two spiked models with training sizes
    /// `n`. The angle terms use `c = p / (n_i - 1)` (the degrees of
    /// freedom of the sample covariance) and the mean terms `c = p / n_i`.
    pub fn from_specs(
        specs: [&SpikedCovarianceSpec; 2],
        n: [usize; 2],
        pi0: f64,
        form: VarianceForm,
    ) -> Result<Self> {
        let p = specs[0].dimension();
        if specs[1].dimension() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: specs[1].dimension(),
            });
        }
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(Error::InvalidInput(format!("prior {pi0} outside (0, 1)")));
        }
        let mu = specs[1].mean() - specs[0].mean();
        let mu_sq = mu.norm_squared();
        let mut classes = Vec::new();
        let mut dirs = Vec::new();
        for (i, spec) in specs.iter().enumerate() {
            if n[i] < 2 {
                return Err(Error::DegenerateClass {
                    class: i,
                    count: n[i],
                    required: 2,
                });
            }
            let c_eig = p as f64 / (n[i] - 1) as f64;
            let mut spikes = Vec::new();
            let mut cols = Vec::new();
            let r1 = spec.spikes_upper().len();
            // Lower spikes are stored lambda_{-1} first; emit them reversed.
            for (k, &l) in spec.spikes_lower().iter().enumerate().rev() {
                cols.push(r1 + k);
                spikes.push((SpikeKind::Lower, l));
            }
            for (k, &l) in spec.spikes_upper().iter().enumerate() {
                cols.push(k);
                spikes.push((SpikeKind::Upper, l));
            }
            let mut terms = Vec::new();
            let mut v_cols = Vec::new();
            for (&col, &(kind, lambda)) in cols.iter().zip(&spikes) {
                let mut v = spec.directions().column(col).into_owned();
                if mu.dot(&v) < 0.0 {
                    v.neg_mut();
                }
                let b = if mu_sq > 0.0 { mu.dot(&v).powi(2) / mu_sq } else { 0.0 };
                terms.push(SpikeTerm {
                    kind,
                    lambda,
                    a: compute_a(lambda, c_eig)?,
                    b,
                });
                v_cols.push(v);
            }
            classes.push(ClassQuantities {
                sigma_sq: spec.sigma_sq(),
                c: p as f64 / n[i] as f64,
                alpha: mu_sq / spec.sigma_sq(),
                spikes: terms,
            });
            dirs.push(v_cols);
        }
        let psi = DMatrix::from_fn(dirs[0].len(), dirs[1].len(), |s, t| dirs[0][s].dot(&dirs[1][t]));
        let classes: [ClassQuantities; 2] = classes.try_into().expect("two classes");
        let q = Self {
            classes,
            psi,
            p,
            log_prior_ratio: ((1.0 - pi0) / pi0).ln(),
            form,
            bulk: BulkTerms::default(),
        };
        q.validate()?;
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub gamma1_0: f64,
    pub gamma2_0: f64,
    pub gamma1_1: f64,
    pub gamma2_1: f64,
}

impl GammaParams {
    /// `(gamma_1, gamma_2)` of one class.
    pub fn class(&self, i: usize) -> (f64, f64) {
        if i == 0 {
            (self.gamma1_0, self.gamma2_0)
        } else {
            (self.gamma1_1, self.gamma2_1)
        }
    }

    /// Membership in the admissible set: every parameter in `(0, bound)`
    /// and `gamma_2` at least `delta` away from each `1/|lambda_j|`.
    pub fn is_admissible(&self, q: &PopulationQuantities, bound: f64, delta: f64) -> bool {
        (0..2).all(|i| {
            let (g1, g2) = self.class(i);
            let in_range = |g: f64| g > 0.0 && g < bound;
            in_range(g1)
                && in_range(g2)
                && q.classes[i]
                    .lowers()
                    .all(|s| (g2 - 1.0 / s.lambda.abs()).abs() >= delta)
        })
    }
}

/// The four reparametrized shrinkage parameters, each in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaParams {
    pub omega1_1: f64,
    pub omega2_1: f64,
    pub omega1_0: f64,
    pub omega2_0: f64,
}

impl OmegaParams {
    /// Values in axis order `(omega_11, omega_21, omega_10, omega_20)`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.omega1_1, self.omega2_1, self.omega1_0, self.omega2_0]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            omega1_1: a[0],
            omega2_1: a[1],
            omega1_0: a[2],
            omega2_0: a[3],
        }
    }
}

/// Scales of the two groups of class `i`: `lambda_1` and `|lambda_{-1}|`
/// (1 for an empty group).
fn group_scales(q: &PopulationQuantities, i: usize) -> (f64, f64) {
    let c = &q.classes[i];
    (c.upper_scale().unwrap_or(1.0), c.lower_scale().unwrap_or(1.0))
}

/// `gamma = omega / (scale (1 - omega))`.
pub fn omega_to_gamma(omega: &OmegaParams, q: &PopulationQuantities) -> Result<GammaParams> {
    if let Some(w) = omega.to_array().iter().find(|&&w| !(w > 0.0 && w < 1.0)) {
        return Err(Error::Inadmissible(format!("omega {w} outside (0, 1)")));
    }
    let (s1_0, s2_0) = group_scales(q, 0);
    let (s1_1, s2_1) = group_scales(q, 1);
    let map = |w: f64, s: f64| w / (s * (1.0 - w));
    Ok(GammaParams {
        gamma1_0: map(omega.omega1_0, s1_0),
        gamma2_0: map(omega.omega2_0, s2_0),
        gamma1_1: map(omega.omega1_1, s1_1),
        gamma2_1: map(omega.omega2_1, s2_1),
    })
}

/// Inverse of [`omega_to_gamma`]: `omega = gamma scale / (1 + gamma scale)`.
pub fn gamma_to_omega(gamma: &GammaParams, q: &PopulationQuantities) -> Result<OmegaParams> {
    let (s1_0, s2_0) = group_scales(q, 0);
    let (s1_1, s2_1) = group_scales(q, 1);
    let map = |g: f64, s: f64| -> Result<f64> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Inadmissible(format!("gamma {g} must be positive")));
        }
        Ok(g * s / (1.0 + g * s))
    };
    Ok(OmegaParams {
        omega1_1: map(gamma.gamma1_1, s1_1)?,
        omega2_1: map(gamma.gamma2_1, s2_1)?,
        omega1_0: map(gamma.gamma1_0, s1_0)?,
        omega2_0: map(gamma.gamma2_0, s2_0)?,
    })
}

/// The coefficient vector `gamma~` in class-0-then-class-1 order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageCoefficients {
    pub values: DVector<f64>,
    /// Number of class-0 entries.
    pub split: usize,
}

impl ShrinkageCoefficients {
    pub fn class(&self, i: usize) -> &[f64] {
        let v = self.values.as_slice();
        if i == 0 {
            &v[..self.split]
        } else {
            &v[self.split..]
        }
    }
}

/// `gamma lambda / (1 + gamma lambda)`.
pub fn shrink(gamma: f64, lambda: f64) -> Result<f64> {
    let denom = 1.0 + gamma * lambda;
    if denom.abs() <= 1e-12 {
        return Err(Error::Inadmissible(format!(
            "1 + gamma*lambda vanishes at gamma = {gamma}, lambda = {lambda}"
        )));
    }
    Ok(gamma * lambda / denom)
}

pub fn shrinkage_coefficients(gamma: &GammaParams, q: &PopulationQuantities) -> Result<ShrinkageCoefficients> {
    let mut values = Vec::with_capacity(q.rank(0) + q.rank(1));
    for i in 0..2 {
        let (g1, g2) = gamma.class(i);
        for s in &q.classes[i].spikes {
            let g = match s.kind {
                SpikeKind::Upper => g1,
                SpikeKind::Lower => g2,
            };
            values.push(shrink(g, s.lambda)?);
        }
    }
    Ok(ShrinkageCoefficients {
        values: DVector::from_vec(values),
        split: q.rank(0),
    })
}

/// Components of the asymptotic mean and variance of the statistic for
/// test points of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassComponents {
    pub g: DVector<f64>,
    pub e: DVector<f64>,
    pub omega: DMatrix<f64>,
    pub b: f64,
    /// `c_1 - c_0 + p (sigma_i^2/sigma_1^2 - sigma_i^2/sigma_0^2) + (-1)^i alpha_~i`;
    /// the mean is `2 eta + offset + g' gamma~`.
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherComponents {
    pub classes: [ClassComponents; 2],
    /// `g_0 - g_1`.
    pub g: DVector<f64>,
    /// `e_0 + e_1`.
    pub e: DVector<f64>,
    /// `Omega_0 + Omega_1`.
    pub omega: DMatrix<f64>,
    /// `b_0 + b_1`.
    pub b: f64,
    pub beta0: f64,
    pub beta1: f64,
    /// log-noise terms for the constant: `p log sigma_i^2`.
    pub p_log_sigma_sq: [f64; 2],
    pub log_prior_ratio: f64,
}

/// Position of spike `s` of class `i` in the coefficient vector.
fn slot(q: &PopulationQuantities, i: usize, s: usize) -> usize {
    if i == 0 {
        s
    } else {
        q.rank(0) + s
    }
}

fn class_components(q: &PopulationQuantities, x: usize) -> ClassComponents {
    let r = q.rank(0) + q.rank(1);
    let xt = 1 - x;
    let cls = &q.classes;
    let sx = cls[x].sigma_sq;
    let sxt = cls[xt].sigma_sq;
    let p = q.p as f64;
    let sign = |i: usize| if i == 0 { 1.0 } else { -1.0 };
    let rederived = q.form == VarianceForm::Rederived;

    let mut g = DVector::zeros(r);
    let mut e = DVector::zeros(r);
    let mut omega = DMatrix::zeros(r, r);

    // Spikes of the test class itself.
    for (s, sp) in cls[x].spikes.iter().enumerate() {
        let k = slot(q, x, s);
        let diag = 1.0 + sp.lambda * sp.a;
        g[k] = sign(x) * diag;
        omega[(k, k)] = 0.5 * diag * diag;
    }

    // Spikes of the other class: kernel through Sigma_x, plus the mean
    // contribution carried by H_~x.
    let c = xt;
    let alpha_c = cls[c].alpha;
    let mean_scale = alpha_c * sx / cls[c].sigma_sq;
    for (s, sp) in cls[c].spikes.iter().enumerate() {
        let k = slot(q, c, s);
        let phi = q.phi(c, s);
        g[k] = sign(c) * (sx / cls[c].sigma_sq * phi + alpha_c * sp.a * sp.b);
        omega[(k, k)] = sx * sx / (2.0 * cls[c].sigma_sq.powi(2)) * phi * phi + mean_scale * sp.a * sp.b;

        let overlap: f64 = cls[x]
            .spikes
            .iter()
            .enumerate()
            .map(|(m, mp)| {
                let psi = q.cross(c, s, m);
                let w = if rederived { psi } else { psi.abs() };
                mp.lambda * mp.b.sqrt() * w
            })
            .sum();
        e[k] = mean_scale * (-sp.a * sp.b - sp.a * sp.b.sqrt() * overlap);

        for (t, tp) in cls[c].spikes.iter().enumerate() {
            if t == s {
                continue;
            }
            let l = slot(q, c, t);
            let signed = q.weighted_overlap(c, s, t, true);
            let quad = match q.form {
                VarianceForm::Displayed => sx * sx / (2.0 * cls[0].sigma_sq.powi(2)) * q.theta(c, s, t),
                VarianceForm::PatternConsistent => {
                    sx * sx / (2.0 * cls[c].sigma_sq.powi(2)) * q.theta(c, s, t)
                }
                VarianceForm::Rederived => {
                    sx * sx / (2.0 * cls[c].sigma_sq.powi(2)) * sp.a * tp.a * signed * signed
                }
            };
            let overlap = if rederived {
                signed
            } else {
                q.weighted_overlap(c, s, t, false)
            };
            let m = mean_scale * sp.a * tp.a * (sp.b * tp.b).sqrt() * overlap;
            omega[(k, l)] = quad + m;
        }
    }

    // Cross-class block.
    for (s, s0) in cls[0].spikes.iter().enumerate() {
        for (t, t1) in cls[1].spikes.iter().enumerate() {
            let psi_sq = q.psi[(s, t)].powi(2);
            let value = if rederived {
                let own = if x == 0 { s0.lambda } else { t1.lambda };
                -sx / (2.0 * sxt) * (1.0 + own).powi(2) * s0.a * t1.a * psi_sq
            } else {
                let lam = if x == 1 { s0.lambda } else { t1.lambda };
                -sxt / (2.0 * sx) * (1.0 + lam).powi(2) * s0.a * t1.a * psi_sq
            };
            let (k, l) = (slot(q, 0, s), slot(q, 1, t));
            omega[(k, l)] = value;
            omega[(l, k)] = value;
        }
    }

    let b = cls[1].c * sx / cls[1].sigma_sq
        + cls[0].c * sx / cls[0].sigma_sq
        + alpha_c * sx / cls[c].sigma_sq
            * (1.0 + cls[x].spikes.iter().map(|m| m.lambda * m.b).sum::<f64>());
    let offset = cls[1].c - cls[0].c + p * (sx / cls[1].sigma_sq - sx / cls[0].sigma_sq)
        + sign(x) * cls[xt].alpha;

    let mut offset = offset;
    let mut b = b;
    if q.bulk == BulkTerms::Included {
        // d z' Sigma_x z with d = 1/sigma_1^2 - 1/sigma_0^2: its mean beyond
        // p sigma_x^2 d, its variance 2 d^2 tr Sigma_x^2, and its covariance
        // 2 d u' Sigma_x^2 u (per unit coefficient) with each spike term.
        let d = 1.0 / cls[1].sigma_sq - 1.0 / cls[0].sigma_sq;
        let excess = |l: f64| (1.0 + l).powi(2) - 1.0;
        offset += sx * d * cls[x].spikes.iter().map(|m| m.lambda).sum::<f64>();
        let tr_sq = sx * sx * (p + cls[x].spikes.iter().map(|m| excess(m.lambda)).sum::<f64>());
        b += 0.5 * d * d * tr_sq;
        for owner in 0..2 {
            for (s, sp) in cls[owner].spikes.iter().enumerate() {
                let spread = if owner == x {
                    excess(sp.lambda)
                } else {
                    cls[x]
                        .spikes
                        .iter()
                        .enumerate()
                        .map(|(k, m)| excess(m.lambda) * q.cross(owner, s, k).powi(2))
                        .sum::<f64>()
                };
                let u_sigma_sq_u = sx * sx * (1.0 + sp.a * spread);
                e[slot(q, owner, s)] += 0.5 * d * sign(owner) * u_sigma_sq_u / cls[owner].sigma_sq;
            }
        }
    }

    // Symmetrize exactly; the blocks above are symmetric up to rounding.
    let omega = (&omega + omega.transpose()) * 0.5;
    ClassComponents {
        g,
        e,
        omega,
        b,
        offset,
    }
}

pub fn build_components(q: &PopulationQuantities) -> Result<FisherComponents> {
    q.validate()?;
    let c0 = class_components(q, 0);
    let c1 = class_components(q, 1);
    let p = q.p as f64;
    let (s0, s1) = (q.classes[0].sigma_sq, q.classes[1].sigma_sq);
    Ok(FisherComponents {
        g: &c0.g - &c1.g,
        e: &c0.e + &c1.e,
        omega: &c0.omega + &c1.omega,
        b: c0.b + c1.b,
        beta0: q.classes[0].alpha + p * (s0 / s1 - 1.0),
        beta1: q.classes[1].alpha + p * (s1 / s0 - 1.0),
        p_log_sigma_sq: [p * s0.ln(), p * s1.ln()],
        log_prior_ratio: q.log_prior_ratio,
        classes: [c0, c1],
    })
}

/// `log |H~_i^{-1}| = -p log sigma_i^2 + sum log |1 - gamma_s|`, using
/// `1 - gamma lambda/(1 + gamma lambda) = 1/(1 + gamma lambda)`.
pub fn log_det_inverse_regularized(p_log_sigma_sq: f64, coeffs: &[f64]) -> f64 {
    -p_log_sigma_sq + coeffs.iter().map(|g| (1.0 - g).abs().ln()).sum::<f64>()
}

/// `eta = -1/2 log(|H~_1^{-1}| / |H~_0^{-1}|) - log(pi_1/pi_0)`.
pub fn eta(components: &FisherComponents, coeffs: &ShrinkageCoefficients) -> f64 {
    let l0 = log_det_inverse_regularized(components.p_log_sigma_sq[0], coeffs.class(0));
    let l1 = log_det_inverse_regularized(components.p_log_sigma_sq[1], coeffs.class(1));
    -0.5 * (l1 - l0) - components.log_prior_ratio
}

pub fn mean_bar(components: &FisherComponents, coeffs: &ShrinkageCoefficients, class_index: usize) -> f64 {
    let c = &components.classes[class_index];
    2.0 * eta(components, coeffs) + c.offset + c.g.dot(&coeffs.values)
}

fn quadratic(omega: &DMatrix<f64>, e: &DVector<f64>, b: f64, x: &DVector<f64>) -> f64 {
    x.dot(&(omega * x)) + 2.0 * e.dot(x) + b
}

pub fn var_bar(components: &FisherComponents, coeffs: &ShrinkageCoefficients, class_index: usize) -> Result<f64> {
    let c = &components.classes[class_index];
    let v = 4.0 * quadratic(&c.omega, &c.e, c.b, &coeffs.values);
    clamp_variance(v)
}

fn clamp_variance(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -VARIANCE_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance(v))
    }
}

/// `|m_0 - m_1| / sqrt(v_0 + v_1)` from the per-class mean and variance.
pub fn fisher_ratio_from_components(components: &FisherComponents, coeffs: &ShrinkageCoefficients) -> Result<f64> {
    let num = (mean_bar(components, coeffs, 0) - mean_bar(components, coeffs, 1)).abs();
    let den = var_bar(components, coeffs, 0)? + var_bar(components, coeffs, 1)?;
    if !(den > 0.0) {
        return Err(Error::NegativeVariance(den));
    }
    Ok(num / den.sqrt())
}

/// The combined form `|g' gamma~ + beta_0 + beta_1| / (2 sqrt(gamma~' Omega gamma~ + 2 e' gamma~ + b))`.
pub fn fisher_ratio_combined(components: &FisherComponents, coeffs: &ShrinkageCoefficients) -> Result<f64> {
    let x = &coeffs.values;
    let num = (components.g.dot(x) + components.beta0 + components.beta1).abs();
    let den = quadratic(&components.omega, &components.e, components.b, x);
    if !(den > 0.0) {
        return Err(Error::NegativeVariance(den));
    }
    Ok(num / (2.0 * den.sqrt()))
}

pub fn fisher_ratio_bar(gamma: &GammaParams, q: &PopulationQuantities) -> Result<f64> {
    let components = build_components(q)?;
    let coeffs = shrinkage_coefficients(gamma, q)?;
    fisher_ratio_from_components(&components, &coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaSearch {
    pub resolution: usize,
    /// Points per axis of the refinement pass inside the best cell; 0
    /// disables refinement.
    pub refine: usize,
    pub delta_omega: f64,
}

impl Default for OmegaSearch {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_GRID_RESOLUTION,
            refine: DEFAULT_REFINE_RESOLUTION,
            delta_omega: DEFAULT_DELTA_OMEGA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaOptimum {
    pub omega: OmegaParams,
    pub gamma: GammaParams,
    pub value: f64,
    /// Grid points evaluated (admissible or not).
    pub evaluated: usize,
}

/// Axis layout: `(class, kind)` for `(omega_11, omega_21, omega_10, omega_20)`.
const AXES: [(usize, SpikeKind); 4] = [
    (1, SpikeKind::Upper),
    (1, SpikeKind::Lower),
    (0, SpikeKind::Upper),
    (0, SpikeKind::Lower),
];

/// One search axis: candidate omegas with the coefficient values they
/// induce on the axis's spike group.
struct Axis {
    omegas: Vec<f64>,
    /// `coeffs[k]` holds the group's coefficients at `omegas[k]`.
    coeffs: Vec<Vec<f64>>,
    slots: Vec<usize>,
    active: bool,
}

/// Singular points `(1 + lambda_j / lambda_{-1})^{-1}` of a lower axis.
fn singular_points(q: &PopulationQuantities, class: usize) -> Vec<f64> {
    let cq = &q.classes[class];
    let Some(scale) = cq.lower_scale() else {
        return Vec::new();
    };
    let lambda_m1 = -scale;
    cq.lowers().map(|s| 1.0 / (1.0 + s.lambda / lambda_m1)).collect()
}

fn build_axis(q: &PopulationQuantities, axis: usize, candidates: &[f64], delta: f64) -> Result<Axis> {
    let (class, kind) = AXES[axis];
    let cq = &q.classes[class];
    let group: Vec<(usize, f64)> = cq
        .spikes
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == kind)
        .map(|(k, s)| (slot(q, class, k), s.lambda))
        .collect();
    let active = !group.is_empty();
    let scale = match kind {
        SpikeKind::Upper => cq.upper_scale(),
        SpikeKind::Lower => cq.lower_scale(),
    }
    .unwrap_or(1.0);
    let singular = if kind == SpikeKind::Lower {
        singular_points(q, class)
    } else {
        Vec::new()
    };
    let mut omegas = Vec::new();
    let mut coeffs = Vec::new();
    let list: &[f64] = if active { candidates } else { &candidates[..1] };
    for &w in list {
        if singular.iter().any(|&s| (w - s).abs() < delta) {
            continue;
        }
        let gamma = w / (scale * (1.0 - w));
        let values: Result<Vec<f64>> = group.iter().map(|&(_, l)| shrink(gamma, l)).collect();
        match values {
            Ok(v) => {
                omegas.push(w);
                coeffs.push(v);
            }
            Err(_) => continue,
        }
    }
    Ok(Axis {
        omegas,
        coeffs,
        slots: group.iter().map(|&(k, _)| k).collect(),
        active,
    })
}

fn centers(resolution: usize, lo: f64, width: f64) -> Vec<f64> {
    (0..resolution)
        .map(|k| lo + (k as f64 + 0.5) * width / resolution as f64)
        .collect()
}

/// Per-class data needed to score one coefficient vector quickly.
struct Scorer<'a> {
    components: &'a FisherComponents,
}

impl Scorer<'_> {
    fn score(&self, x: &DVector<f64>) -> Option<f64> {
        let c = self.components;
        let mut den = 0.0;
        for cls in &c.classes {
            let v = 4.0 * quadratic(&cls.omega, &cls.e, cls.b, x);
            if v < -VARIANCE_CLAMP || !v.is_finite() {
                return None;
            }
            den += v.max(0.0);
        }
        if !(den > 0.0) {
            return None;
        }
        let num = (c.g.dot(x) + c.beta0 + c.beta1).abs();
        let value = num / den.sqrt();
        value.is_finite().then_some(value)
    }
}

/// Best `(value, flat index)` over a product grid; ties go to the
/// smallest index, which is the lexicographically smallest omega.
fn search_grid(axes: &[Axis; 4], r: usize, scorer: &Scorer) -> Option<(f64, [usize; 4])> {
    let dims: Vec<usize> = axes.iter().map(|a| a.omegas.len()).collect();
    let total: usize = dims.iter().product();
    if total == 0 {
        return None;
    }
    let unflatten = |mut idx: usize| {
        let mut out = [0usize; 4];
        for a in (0..4).rev() {
            out[a] = idx % dims[a];
            idx /= dims[a];
        }
        out
    };
    let best = (0..total)
        .into_par_iter()
        .filter_map(|flat| {
            let idx = unflatten(flat);
            let mut x = DVector::zeros(r);
            for (a, axis) in axes.iter().enumerate() {
                for (slot, v) in axis.slots.iter().zip(&axis.coeffs[idx[a]]) {
                    x[*slot] = *v;
                }
            }
            scorer.score(&x).map(|v| (v, flat))
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })?;
    Some((best.0, unflatten(best.1)))
}

/// Grid search of the Fisher ratio over `omega in (0,1)^4` minus the
/// singular neighborhoods, with an optional refinement inside the best
/// cell. Axes whose spike group is empty do not affect the objective and
/// collapse to their first center.
pub fn optimize_omega(q: &PopulationQuantities, search: &OmegaSearch) -> Result<OmegaOptimum> {
    if search.resolution < 2 {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be at least 2, got {}",
            search.resolution
        )));
    }
    let components = build_components(q)?;
    let scorer = Scorer {
        components: &components,
    };
    let r = q.rank(0) + q.rank(1);
    let base = centers(search.resolution, 0.0, 1.0);
    let axes: Vec<Axis> = (0..4)
        .map(|a| build_axis(q, a, &base, search.delta_omega))
        .collect::<Result<_>>()?;
    let axes: [Axis; 4] = axes.try_into().map_err(|_| Error::EmptyGrid)?;
    let mut evaluated: usize = axes.iter().map(|a| a.omegas.len()).product();
    let (mut value, idx) = search_grid(&axes, r, &scorer).ok_or(Error::EmptyGrid)?;
    let mut best: [f64; 4] = std::array::from_fn(|a| axes[a].omegas[idx[a]]);

    if search.refine >= 2 {
        let width = 1.0 / search.resolution as f64;
        let fine: Vec<Axis> = (0..4)
            .map(|a| {
                let pts = if axes[a].active {
                    centers(search.refine, best[a] - 0.5 * width, width)
                } else {
                    vec![best[a]]
                };
                build_axis(q, a, &pts, search.delta_omega)
            })
            .collect::<Result<_>>()?;
        let fine: [Axis; 4] = fine.try_into().map_err(|_| Error::EmptyGrid)?;
        evaluated += fine.iter().map(|a| a.omegas.len()).product::<usize>();
        if let Some((v, fidx)) = search_grid(&fine, r, &scorer) {
            let cand: [f64; 4] = std::array::from_fn(|a| fine[a].omegas[fidx[a]]);
            if v > value || (v == value && cand < best) {
                value = v;
                best = cand;
            }
        }
    }
    let omega = OmegaParams::from_array(best);
    let gamma = omega_to_gamma(&omega, q)?;
    Ok(OmegaOptimum {
        omega,
        gamma,
        value,
        evaluated,
    })
}
