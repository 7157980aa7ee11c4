//! Core data model: labeled datasets, spiked covariance specifications,
//! per-class moments, symmetric eigendecomposition and Gaussian sampling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Asymmetry tolerance accepted by [`symmetric_eigen`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// A two-class dataset: `n` rows of `p` features and a 0/1 label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if features.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "dataset needs at least 2 rows, got {}",
                features.nrows()
            )));
        }
        if features.ncols() < 1 {
            return Err(Error::InvalidInput("dataset has no feature columns".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {bad} is not 0 or 1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self { features, labels })
    }

    /// Stacks two class matrices (rows are observations) into one dataset.
    pub fn from_classes(class0: &DMatrix<f64>, class1: &DMatrix<f64>) -> Result<Self> {
        if class0.ncols() != class1.ncols() {
            return Err(Error::DimensionMismatch {
                expected: class0.ncols(),
                found: class1.ncols(),
            });
        }
        let n0 = class0.nrows();
        let n1 = class1.nrows();
        let p = class0.ncols();
        let mut features = DMatrix::zeros(n0 + n1, p);
        features.rows_mut(0, n0).copy_from(class0);
        features.rows_mut(n0, n1).copy_from(class1);
        let labels = std::iter::repeat_n(0, n0)
            .chain(std::iter::repeat_n(1, n1))
            .collect();
        Self::new(features, labels)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == class).then_some(i))
            .collect()
    }

    pub fn class_count(&self, class: usize) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Rows of one class as an `n_i x p` matrix.
    pub fn class_rows(&self, class: usize) -> DMatrix<f64> {
        self.features.select_rows(self.class_indices(class).iter())
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(indices.iter());
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels)
    }
}

/// Ground-truth parameters of one class under the spiked model
/// `sigma_sq * (I + sum_j lambda_j v_j v_j^T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikedCovarianceSpec {
    sigma_sq: f64,
    spikes_upper: Vec<f64>,
    /// `lambda_{-1}, lambda_{-2}, ...`: most negative first.
    spikes_lower: Vec<f64>,
    /// Columns: upper-spike directions, then lower-spike directions.
    directions: DMatrix<f64>,
    mean: DVector<f64>,
}

impl SpikedCovarianceSpec {
    pub fn new(
        sigma_sq: f64,
        spikes_upper: Vec<f64>,
        spikes_lower: Vec<f64>,
        directions: DMatrix<f64>,
        mean: DVector<f64>,
    ) -> Result<Self> {
        if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise variance must be positive, got {sigma_sq}"
            )));
        }
        if let Some(l) = spikes_upper.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "upper spike {l} must be positive"
            )));
        }
        if let Some(l) = spikes_lower.iter().find(|&&l| !(l > -1.0 && l < 0.0)) {
            return Err(Error::InvalidInput(format!(
                "lower spike {l} must lie in (-1, 0)"
            )));
        }
        let k = spikes_upper.len() + spikes_lower.len();
        let p = mean.len();
        if directions.nrows() != p || directions.ncols() != k {
            return Err(Error::InvalidInput(format!(
                "directions must be {p}x{k}, got {}x{}",
                directions.nrows(),
                directions.ncols()
            )));
        }
        let gram = directions.transpose() * &directions;
        let off = (gram - DMatrix::identity(k, k)).amax();
        if off > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "directions are not orthonormal (deviation {off:e})"
            )));
        }
        Ok(Self {
            sigma_sq,
            spikes_upper,
            spikes_lower,
            directions,
            mean,
        })
    }

    /// A spec without spikes: `sigma_sq * I`.
    pub fn isotropic(sigma_sq: f64, mean: DVector<f64>) -> Result<Self> {
        let p = mean.len();
        Self::new(sigma_sq, vec![], vec![], DMatrix::zeros(p, 0), mean)
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn spikes_upper(&self) -> &[f64] {
        &self.spikes_upper
    }

    pub fn spikes_lower(&self) -> &[f64] {
        &self.spikes_lower
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// All spikes in direction-column order.
    pub fn spikes(&self) -> Vec<f64> {
        self.spikes_upper
            .iter()
            .chain(&self.spikes_lower)
            .copied()
            .collect()
    }

    pub fn upper_direction(&self, j: usize) -> DVector<f64> {
        self.directions.column(j).into_owned()
    }

    pub fn lower_direction(&self, j: usize) -> DVector<f64> {
        self.directions
            .column(self.spikes_upper.len() + j)
            .into_owned()
    }

    fn low_rank(&self, weight: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let p = self.dimension();
        let weights = DVector::from_iterator(
            self.directions.ncols(),
            self.spikes().into_iter().map(weight),
        );
        let scaled = DMatrix::from_fn(p, weights.len(), |r, c| self.directions[(r, c)] * weights[c]);
        scaled * self.directions.transpose()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.dimension();
        (DMatrix::identity(p, p) + self.low_rank(|l| l)) * self.sigma_sq
    }

    /// Inverse covariance `sigma^-2 (I - sum lambda/(1+lambda) v v^T)`.
    pub fn precision(&self) -> DMatrix<f64> {
        let p = self.dimension();
        (DMatrix::identity(p, p) - self.low_rank(|l| l / (1.0 + l))) / self.sigma_sq
    }

    /// `log |Sigma|` from the closed spectrum.
    pub fn log_det(&self) -> f64 {
        self.dimension() as f64 * self.sigma_sq.ln()
            + self.spikes().iter().map(|l| (1.0 + l).ln()).sum::<f64>()
    }

    /// Eigenvalues of the implied covariance, sorted descending.
    pub fn covariance_spectrum(&self) -> Vec<f64> {
        let p = self.dimension();
        let k = self.directions.ncols();
        let mut values: Vec<f64> = self
            .spikes()
            .iter()
            .map(|l| self.sigma_sq * (1.0 + l))
            .chain(std::iter::repeat_n(self.sigma_sq, p - k))
            .collect();
        values.sort_by(|a, b| b.total_cmp(a));
        values
    }
}

/// Symmetric square root `sigma (I + sum (sqrt(1+lambda) - 1) v v^T)`.
pub fn spiked_sqrt(spec: &SpikedCovarianceSpec) -> DMatrix<f64> {
    let p = spec.dimension();
    (DMatrix::identity(p, p) + spec.low_rank(|l| (1.0 + l).sqrt() - 1.0)) * spec.sigma_sq.sqrt()
}

/// Draws `n` rows `mu + Sigma^{1/2} z`, `z ~ N(0, I)`.
pub fn sample_class(spec: &SpikedCovarianceSpec, n: usize, rng_seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(rng_seed);
    sample_class_with(spec, n, &mut rng)
}

pub(crate) fn sample_class_with(spec: &SpikedCovarianceSpec, n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let p = spec.dimension();
    let z = standard_normal_matrix(n, p, rng);
    let v = &spec.directions;
    let shrink: Vec<f64> = spec.spikes().iter().map(|l| (1.0 + l).sqrt() - 1.0).collect();
    let mut proj = &z * v;
    for (c, s) in shrink.iter().enumerate() {
        proj.column_mut(c).scale_mut(*s);
    }
    let mut x = (z + proj * v.transpose()) * spec.sigma_sq.sqrt();
    for mut row in x.row_iter_mut() {
        row += spec.mean.transpose();
    }
    x
}

/// `rows x cols` standard normal matrix, filled row by row.
pub(crate) fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Seeded `p x k` matrix with orthonormal columns: Gaussian draws
/// orthonormalized by modified Gram-Schmidt (two passes).
pub fn make_orthonormal_directions(p: usize, k: usize, rng_seed: u64) -> Result<DMatrix<f64>> {
    if k > p {
        return Err(Error::InvalidInput(format!(
            "cannot build {k} orthonormal directions in dimension {p}"
        )));
    }
    let mut rng = rng_from_seed(rng_seed);
    let mut m = standard_normal_matrix(p, k, &mut rng);
    for _ in 0..2 {
        for j in 0..k {
            for i in 0..j {
                let qi = m.column(i).into_owned();
                let proj = qi.dot(&m.column(j));
                m.column_mut(j).axpy(-proj, &qi, 1.0);
            }
            let norm = m.column(j).norm();
            if norm < 1e-12 {
                return Err(Error::Fit("Gram-Schmidt hit a dependent column".into()));
            }
            m.column_mut(j).unscale_mut(norm);
        }
    }
    Ok(m)
}

/// Sample mean and unbiased sample covariance of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub count: usize,
}

pub fn class_moments(data: &LabeledDataset, class_index: usize) -> Result<ClassMoments> {
    let rows = data.class_rows(class_index);
    moments_of_rows(&rows).map_err(|_| Error::DegenerateClass {
        class: class_index,
        count: rows.nrows(),
        required: 2,
    })
}

/// Moments of an `n x p` block of observations (divisor `n - 1`).
pub fn moments_of_rows(rows: &DMatrix<f64>) -> Result<ClassMoments> {
    let n = rows.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need 2 rows, got {n}")));
    }
    let mean = rows.row_mean().transpose();
    let mut centered = rows.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut covariance = centered.transpose() * &centered / (n as f64 - 1.0);
    // Exact symmetry for the eigensolver.
    covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(ClassMoments {
        mean,
        covariance,
        count: n,
    })
}

/// Eigenvalues sorted descending with matching unit eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub values: DVector<f64>,
    /// Column `j` is the eigenvector of `values[j]`.
    pub vectors: DMatrix<f64>,
}

impl EigenSummary {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j).into_owned()
    }

    /// Flips each eigenvector so its inner product with `reference` is
    /// nonnegative. Exact zeros keep their sign.
    pub fn align_signs(&mut self, reference: &DVector<f64>) {
        for mut col in self.vectors.column_iter_mut() {
            if col.dot(reference) < 0.0 {
                col.neg_mut();
            }
        }
    }

    /// `sum_j l_j u_j u_j^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col.scale_mut(self.values[j]);
        }
        scaled * self.vectors.transpose()
    }
}

pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<EigenSummary> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asymmetry = (m - m.transpose()).amax();
    if asymmetry > SYMMETRY_TOLERANCE * m.amax().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(order.iter());
    Ok(EigenSummary { values, vectors })
}
