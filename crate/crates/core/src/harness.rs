//! Monte Carlo and dataset benchmarks producing accuracy tables.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    default_rqda_grid, evaluate, fit_knn, fit_qda, fit_rqda_with, fit_srqda, select_rqda_gamma, Classifier,
    NoiseEstimate, QdaModel, RidgeEtaSign, SpikeCountMode, SrqdaOptions,
};
use crate::error::{Error, Result};
use crate::fisher::{BulkTerms, OmegaSearch, VarianceForm, DEFAULT_DELTA_OMEGA, DEFAULT_REFINE_RESOLUTION};
use crate::io::read_labeled_csv;
use crate::model::{make_orthonormal_directions, sample_class, LabeledDataset, SpikedCovarianceSpec};
use crate::rng::{derive_seed, hash_label, rng_from_seed};
use crate::spike::{MeanSeparationPolicy, SpikeCounts, DEFAULT_SAFETY_MARGIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Qda,
    Rqda,
    Srqda,
    Knn(usize),
    /// QDA with the true parameters (simulation only).
    OracleQda,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Qda => f.write_str("qda"),
            Method::Rqda => f.write_str("rqda"),
            Method::Srqda => f.write_str("srqda"),
            Method::Knn(k) => write!(f, "knn{k}"),
            Method::OracleQda => f.write_str("oracle-qda"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "qda" => Method::Qda,
            "rqda" | "r-qda" => Method::Rqda,
            "srqda" | "sr-qda" => Method::Srqda,
            "knn" => Method::Knn(1),
            "oracle-qda" | "oracle" => Method::OracleQda,
            _ => match s.strip_prefix("knn").and_then(|k| k.parse().ok()) {
                Some(k) if k > 0 => Method::Knn(k),
                _ => return Err(Error::InvalidInput(format!("unknown method '{s}'"))),
            },
        })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the mean offset `a` is turned into `mu_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanNormMode {
    /// `mu_0 = (a/p) (1, ..., 1)`, so `||mu|| = a / sqrt(p)`.
    #[default]
    Literal,
    /// `mu_0 = (a/sqrt(p)) (1, ..., 1)`, so `||mu|| = a`.
    UnitNorm,
}

/// Settings shared by every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSettings {
    pub rqda_grid: Vec<f64>,
    pub cv_folds: usize,
    pub rqda_eta_sign: RidgeEtaSign,
    pub grid_resolution: usize,
    pub refine_resolution: usize,
    pub delta_omega: f64,
    pub variance_form: VarianceForm,
    pub bulk_terms: BulkTerms,
    pub noise: NoiseEstimate,
    pub mean_policy: MeanSeparationPolicy,
    pub safety_margin: f64,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            rqda_grid: default_rqda_grid(),
            cv_folds: 5,
            rqda_eta_sign: RidgeEtaSign::default(),
            grid_resolution: crate::fisher::DEFAULT_GRID_RESOLUTION,
            refine_resolution: DEFAULT_REFINE_RESOLUTION,
            delta_omega: DEFAULT_DELTA_OMEGA,
            variance_form: VarianceForm::default(),
            bulk_terms: BulkTerms::default(),
            noise: NoiseEstimate::default(),
            mean_policy: MeanSeparationPolicy::default(),
            safety_margin: DEFAULT_SAFETY_MARGIN,
        }
    }
}

impl MethodSettings {
    pub fn srqda_options(&self, counts: Option<[SpikeCounts; 2]>, priors: Option<[f64; 2]>) -> SrqdaOptions {
        SrqdaOptions {
            counts: match counts {
                Some(c) => SpikeCountMode::Known(c),
                None => SpikeCountMode::Auto {
                    safety_margin: self.safety_margin,
                },
            },
            priors,
            search: OmegaSearch {
                resolution: self.grid_resolution,
                refine: self.refine_resolution,
                delta_omega: self.delta_omega,
            },
            form: self.variance_form,
            bulk: self.bulk_terms,
            noise: self.noise,
            mean_policy: self.mean_policy,
        }
    }
}

/// Fits one method on `train`. `counts` fixes SR-QDA's spike counts
/// (auto-detected otherwise); `seed` drives cross-validation.
pub fn fit_method(
    method: Method,
    train: &LabeledDataset,
    settings: &MethodSettings,
    priors: Option<[f64; 2]>,
    counts: Option<[SpikeCounts; 2]>,
    seed: u64,
) -> Result<Box<dyn Classifier + Send>> {
    Ok(match method {
        Method::Qda => Box::new(fit_qda(train, priors)?),
        Method::Rqda => {
            let sel = select_rqda_gamma(train, &settings.rqda_grid, settings.cv_folds, seed, priors, settings.rqda_eta_sign)?;
            Box::new(fit_rqda_with(train, sel.gamma, priors, settings.rqda_eta_sign)?)
        }
        Method::Srqda => Box::new(fit_srqda(train, &settings.srqda_options(counts, priors))?),
        Method::Knn(k) => Box::new(fit_knn(train, k)?),
        Method::OracleQda => {
            return Err(Error::InvalidInput("oracle QDA needs true parameters".into()));
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub setting: String,
    pub method: Method,
    pub n: usize,
    pub mean_accuracy: f64,
    pub std_error: f64,
    pub replications: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub rows: Vec<AccuracyRow>,
    /// Remarks about the run (e.g. violated assumptions); not part of the CSV.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl AccuracyTable {
    pub fn get(&self, setting: &str, method: Method, n: usize) -> Option<&AccuracyRow> {
        self.rows
            .iter()
            .find(|r| r.setting == setting && r.method == method && r.n == n)
    }

    pub fn extend(&mut self, other: AccuracyTable) {
        self.rows.extend(other.rows);
        self.notes.extend(other.notes);
    }

    /// CSV with a leading `# srqda <version>` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# srqda {}", crate::io::tool_version())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["setting", "method", "n", "mean_accuracy", "std_error", "replications", "failures"])?;
        for r in &self.rows {
            w.write_record([
                r.setting.clone(),
                r.method.to_string(),
                r.n.to_string(),
                format!("{:.6}", r.mean_accuracy),
                format!("{:.6}", r.std_error),
                r.replications.to_string(),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn pretty(&self) -> String {
        let mut s = format!(
            "{:<28} {:<11} {:>6} {:>9} {:>9} {:>6} {:>6}\n",
            "setting", "method", "n", "accuracy", "std.err", "reps", "fail"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<28} {:<11} {:>6} {:>9.4} {:>9.4} {:>6} {:>6}\n",
                r.setting,
                r.method.to_string(),
                r.n,
                r.mean_accuracy,
                r.std_error,
                r.replications,
                r.failures
            ));
        }
        for note in &self.notes {
            s.push_str(&format!("note: {note}\n"));
        }
        s
    }
}

/// Mean and standard error by pairwise summation in replication order.
fn summarize(values: &[f64]) -> (f64, f64) {
    fn pairwise(v: &[f64]) -> f64 {
        if v.len() <= 8 {
            v.iter().sum()
        } else {
            let (a, b) = v.split_at(v.len() / 2);
            pairwise(a) + pairwise(b)
        }
    }
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise(values) / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let sd = (pairwise(&dev) / (k - 1) as f64).sqrt();
    (mean, sd / (k as f64).sqrt())
}

/// Per-replication outcomes keyed by method, aggregated in fixed order.
fn aggregate(setting: &str, n: usize, methods: &[Method], outcomes: &[BTreeMap<Method, Option<f64>>]) -> Vec<AccuracyRow> {
    methods
        .iter()
        .map(|&m| {
            let ok: Vec<f64> = outcomes.iter().filter_map(|o| o.get(&m).copied().flatten()).collect();
            let (mean, se) = summarize(&ok);
            AccuracyRow {
                setting: setting.to_string(),
                method: m,
                n,
                mean_accuracy: mean,
                std_error: se,
                replications: ok.len(),
                failures: outcomes.len() - ok.len(),
            }
        })
        .collect()
}

fn run_method(
    method: Method,
    train: &LabeledDataset,
    test: &LabeledDataset,
    settings: &MethodSettings,
    priors: Option<[f64; 2]>,
    counts: Option<[SpikeCounts; 2]>,
    seed: u64,
) -> Option<f64> {
    let result = fit_method(method, train, settings, priors, counts, seed).and_then(|m| evaluate(m.as_ref(), test));
    match result {
        Ok(r) => Some(r.accuracy),
        Err(e) => {
            log::debug!("{method} failed: {e}");
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Row label; derived from the parameters when empty.
    pub setting: String,
    pub p: usize,
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    pub spikes_upper0: Vec<f64>,
    /// Most negative first.
    pub spikes_lower0: Vec<f64>,
    pub spikes_upper1: Vec<f64>,
    pub spikes_lower1: Vec<f64>,
    pub mean_scale: f64,
    pub mean_norm_mode: MeanNormMode,
    pub sample_sizes: Vec<usize>,
    pub pi0: f64,
    pub replications: usize,
    pub test_size: usize,
    pub methods: Vec<Method>,
    /// Give SR-QDA the true spike counts (otherwise detect them).
    pub known_counts: bool,
    pub rng_seed: u64,
    pub settings: MethodSettings,
}

impl Default for SimulationConfig {
    /// The Monte Carlo design with `a = 0.5`, `sigma_1^2 = 1.5`.
    fn default() -> Self {
        Self {
            setting: String::new(),
            p: 150,
            sigma0_sq: 1.0,
            sigma1_sq: 1.5,
            spikes_upper0: vec![25.0, 20.0, 15.0],
            spikes_lower0: vec![-0.95],
            spikes_upper1: vec![15.0, 10.0, 5.0],
            spikes_lower1: vec![-0.99],
            mean_scale: 0.5,
            mean_norm_mode: MeanNormMode::Literal,
            sample_sizes: vec![100, 200, 300, 400, 500, 600],
            pi0: 0.5,
            replications: 50,
            test_size: 2000,
            methods: vec![Method::Qda, Method::Rqda, Method::Srqda],
            known_counts: true,
            rng_seed: 20240715,
            settings: MethodSettings::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.test_size < 2 || self.p == 0 {
            return Err(Error::InvalidInput("replications, test_size and p must be positive".into()));
        }
        if !(self.pi0 > 0.0 && self.pi0 < 1.0) {
            return Err(Error::InvalidInput(format!("pi0 {} outside (0, 1)", self.pi0)));
        }
        if self.sample_sizes.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidInput("need at least one sample size and method".into()));
        }
        let k = self.spikes_upper0.len() + self.spikes_lower0.len() + self.spikes_upper1.len() + self.spikes_lower1.len();
        if k > self.p {
            return Err(Error::InvalidInput(format!("{k} spike directions exceed p = {}", self.p)));
        }
        Ok(())
    }

    pub fn setting_label(&self) -> String {
        if !self.setting.is_empty() {
            return self.setting.clone();
        }
        format!("a={};sigma1_sq={}", self.mean_scale, self.sigma1_sq)
    }

    pub fn mean0(&self) -> DVector<f64> {
        let p = self.p as f64;
        let v = match self.mean_norm_mode {
            MeanNormMode::Literal => self.mean_scale / p,
            MeanNormMode::UnitNorm => self.mean_scale / p.sqrt(),
        };
        DVector::from_element(self.p, v)
    }

    /// Class specs with mutually orthogonal directions drawn from `seed`.
    pub fn specs(&self, seed: u64) -> Result<[SpikedCovarianceSpec; 2]> {
        let r0 = self.spikes_upper0.len() + self.spikes_lower0.len();
        let r1 = self.spikes_upper1.len() + self.spikes_lower1.len();
        let dirs = make_orthonormal_directions(self.p, r0 + r1, seed)?;
        let s0 = SpikedCovarianceSpec::new(
            self.sigma0_sq,
            self.spikes_upper0.clone(),
            self.spikes_lower0.clone(),
            dirs.columns(0, r0).into_owned(),
            self.mean0(),
        )?;
        let s1 = SpikedCovarianceSpec::new(
            self.sigma1_sq,
            self.spikes_upper1.clone(),
            self.spikes_lower1.clone(),
            dirs.columns(r0, r1).into_owned(),
            DVector::zeros(self.p),
        )?;
        Ok([s0, s1])
    }

    pub fn class_sizes(&self, n: usize) -> [usize; 2] {
        let n0 = (self.pi0 * n as f64).round() as usize;
        [n0, n - n0]
    }

    fn true_counts(&self) -> [SpikeCounts; 2] {
        [
            SpikeCounts::new(self.spikes_upper0.len(), self.spikes_lower0.len()),
            SpikeCounts::new(self.spikes_upper1.len(), self.spikes_lower1.len()),
        ]
    }

    /// Lower spikes that fail `|lambda| > sqrt(p / n_i)` at training size `n`.
    fn subcritical_notes(&self, n: usize) -> Vec<String> {
        let sizes = self.class_sizes(n);
        let mut notes = Vec::new();
        for (i, (upper, lower)) in [(&self.spikes_upper0, &self.spikes_lower0), (&self.spikes_upper1, &self.spikes_lower1)]
            .into_iter()
            .enumerate()
        {
            let edge = (self.p as f64 / sizes[i] as f64).sqrt();
            for l in upper.iter().chain(lower) {
                if l.abs() <= edge {
                    notes.push(format!(
                        "{}: n={n}, class {i} spike {l} is not above the estimability threshold sqrt(p/n_i) = {edge:.3}",
                        self.setting_label()
                    ));
                }
            }
        }
        notes
    }
}

pub fn labeled_sample(specs: &[SpikedCovarianceSpec; 2], sizes: [usize; 2], seed: u64) -> Result<LabeledDataset> {
    let a = sample_class(&specs[0], sizes[0], derive_seed(seed, &[0]));
    let b = sample_class(&specs[1], sizes[1], derive_seed(seed, &[1]));
    LabeledDataset::from_classes(&a, &b)
}

pub fn replication_seed(base: u64, setting: &str, n: usize, r: usize) -> u64 {
    derive_seed(base, &[hash_label(setting), n as u64, r as u64])
}

/// Monte Carlo accuracy of every configured method on fresh Gaussian
/// data, per training size.
pub fn run_simulation(config: &SimulationConfig) -> Result<AccuracyTable> {
    config.validate()?;
    let setting = config.setting_label();
    let counts = config.known_counts.then(|| config.true_counts());
    let priors = Some([config.pi0, 1.0 - config.pi0]);
    let mut table = AccuracyTable::default();
    for &n in &config.sample_sizes {
        let sizes = config.class_sizes(n);
        if sizes.iter().any(|&s| s < 2) {
            return Err(Error::InvalidInput(format!("training size {n} leaves a class with fewer than 2 samples")));
        }
        table.notes.extend(config.subcritical_notes(n));
        let test_sizes = config.class_sizes(config.test_size);
        let outcomes: Vec<BTreeMap<Method, Option<f64>>> = (0..config.replications)
            .into_par_iter()
            .map(|r| -> Result<BTreeMap<Method, Option<f64>>> {
                let seed = replication_seed(config.rng_seed, &setting, n, r);
                let specs = config.specs(derive_seed(seed, &[1]))?;
                let train = labeled_sample(&specs, sizes, derive_seed(seed, &[2]))?;
                let test = labeled_sample(&specs, test_sizes, derive_seed(seed, &[3]))?;
                let mut out = BTreeMap::new();
                for &m in &config.methods {
                    let acc = if m == Method::OracleQda {
                        QdaModel::oracle([&specs[0], &specs[1]], config.pi0)
                            .and_then(|q| evaluate(&q, &test))
                            .ok()
                            .map(|r| r.accuracy)
                    } else {
                        run_method(m, &train, &test, &config.settings, priors, counts, derive_seed(seed, &[4]))
                    };
                    out.insert(m, acc);
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        table.rows.extend(aggregate(&setting, n, &config.methods, &outcomes));
    }
    table.notes.dedup();
    Ok(table)
}

/// Monte Carlo accuracy of the QDA rule built from the true parameters.
pub fn oracle_qda_accuracy(
    spec0: &SpikedCovarianceSpec,
    spec1: &SpikedCovarianceSpec,
    pi0: f64,
    n_test: usize,
    rng_seed: u64,
) -> Result<f64> {
    if n_test < 2 {
        return Err(Error::InvalidInput("need at least 2 test points".into()));
    }
    let specs = [spec0.clone(), spec1.clone()];
    let n0 = ((pi0 * n_test as f64).round() as usize).clamp(1, n_test - 1);
    let test = labeled_sample(&specs, [n0, n_test - n0], rng_seed)?;
    let model = QdaModel::oracle([spec0, spec1], pi0)?;
    Ok(evaluate(&model, &test)?.accuracy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub dataset: PathBuf,
    pub label_column: String,
    /// Label value mapped to class 0; when absent labels must be 0/1.
    pub positive_label: Option<String>,
    /// Row label; defaults to the dataset file stem.
    pub setting: String,
    pub train_fraction: f64,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub rng_seed: u64,
    pub settings: MethodSettings,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            label_column: "label".into(),
            positive_label: None,
            setting: String::new(),
            train_fraction: 0.6,
            replications: 500,
            methods: vec![
                Method::Qda,
                Method::Rqda,
                Method::Srqda,
                Method::Knn(1),
                Method::Knn(3),
                Method::Knn(5),
            ],
            rng_seed: 20240715,
            settings: MethodSettings::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidInput(format!("train fraction {} outside (0, 1)", self.train_fraction)));
        }
        if self.replications == 0 || self.methods.is_empty() {
            return Err(Error::InvalidInput("need at least one replication and method".into()));
        }
        if self.methods.contains(&Method::OracleQda) {
            return Err(Error::InvalidInput("oracle QDA is only available in simulations".into()));
        }
        Ok(())
    }

    pub fn setting_label(&self) -> String {
        if !self.setting.is_empty() {
            return self.setting.clone();
        }
        self.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }

    pub fn load(&self) -> Result<LabeledDataset> {
        let file = std::fs::File::open(&self.dataset)
            .map_err(|e| Error::Io(format!("{}: {e}", self.dataset.display())))?;
        Ok(read_labeled_csv(file, &self.label_column, self.positive_label.as_deref())?.data)
    }
}

/// Stratified split: `train_counts[c]` random members of class `c` train,
/// the rest test.
fn stratified_split(data: &LabeledDataset, train_counts: [usize; 2], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..2 {
        let mut idx = data.class_indices(c);
        idx.shuffle(&mut rng);
        let k = train_counts[c].min(idx.len());
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn split_replications(
    config: &BenchmarkConfig,
    data: &LabeledDataset,
    setting: &str,
    n_key: usize,
    train_counts: [usize; 2],
) -> Vec<BTreeMap<Method, Option<f64>>> {
    (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let seed = replication_seed(config.rng_seed, setting, n_key, r);
            let (tr, te) = stratified_split(data, train_counts, derive_seed(seed, &[1]));
            let pair = data.subset(&tr).and_then(|a| Ok((a, data.subset(&te)?)));
            let mut out = BTreeMap::new();
            for &m in &config.methods {
                let acc = match &pair {
                    Ok((train, test)) if train.class_count(0) >= 2 && train.class_count(1) >= 2 => {
                        run_method(m, train, test, &config.settings, None, None, derive_seed(seed, &[2]))
                    }
                    _ => None,
                };
                out.insert(m, acc);
            }
            out
        })
        .collect()
}

/// Repeated stratified train/test splits of a dataset.
pub fn run_benchmark_on(data: &LabeledDataset, config: &BenchmarkConfig) -> Result<AccuracyTable> {
    config.validate()?;
    let setting = config.setting_label();
    let counts = [0, 1].map(|c| (config.train_fraction * data.class_count(c) as f64).round() as usize);
    let n_train = counts[0] + counts[1];
    let outcomes = split_replications(config, data, &setting, n_train, counts);
    Ok(AccuracyTable {
        rows: aggregate(&setting, n_train, &config.methods, &outcomes),
        notes: Vec::new(),
    })
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<AccuracyTable> {
    run_benchmark_on(&config.load()?, config)
}

/// Accuracy versus training size, each size drawn by stratified
/// subsampling with the remaining rows as the test set.
pub fn learning_curve_on(data: &LabeledDataset, config: &BenchmarkConfig, train_sizes: &[usize]) -> Result<AccuracyTable> {
    config.validate()?;
    let setting = config.setting_label();
    let n = data.n_samples();
    let mut table = AccuracyTable::default();
    for &size in train_sizes {
        if size >= n {
            return Err(Error::InvalidInput(format!(
                "training size {size} leaves no test data (dataset has {n} rows)"
            )));
        }
        let frac = size as f64 / n as f64;
        let c0 = ((frac * data.class_count(0) as f64).round() as usize).min(size);
        let counts = [c0, size - c0];
        if counts[1] > data.class_count(1) || counts[0] >= data.class_count(0) && counts[1] >= data.class_count(1) {
            return Err(Error::InvalidInput(format!("training size {size} exceeds the class counts")));
        }
        let outcomes = split_replications(config, data, &setting, size, counts);
        table.rows.extend(aggregate(&setting, size, &config.methods, &outcomes));
    }
    Ok(table)
}

pub fn learning_curve(config: &BenchmarkConfig, train_sizes: &[usize]) -> Result<AccuracyTable> {
    learning_curve_on(&config.load()?, config, train_sizes)
}
