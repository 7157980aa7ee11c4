use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Deserialize;

use srqda::classifiers::{
    fit_knn, fit_qda, fit_rqda_with, fit_srqda, scores, select_rqda_gamma, Discriminant, SrqdaModel,
};
use srqda::harness::{
    learning_curve, run_benchmark, run_simulation, AccuracyTable, BenchmarkConfig, Method, MethodSettings,
    SimulationConfig,
};
use srqda::io::{read_feature_csv, read_labeled_csv, tool_version, CsvDataset, FittedModel, ModelFile};
use srqda::model::{class_moments, moments_of_rows, symmetric_eigen};
use srqda::spike::{detect_spike_counts, estimate_plug_ins, fit_class_spikes, MeanSeparationPolicy, SpikeCounts};

const DEFAULT_SEED: u64 = 20240715;

#[derive(Parser)]
#[command(name = "srqda", version, about = "Spectrally-corrected regularized QDA for spiked covariance models")]
struct Cli {
    /// Worker threads (default: all cores; 1 = serial, same output).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a classifier on a labeled CSV and write a model file.
    Fit(FitArgs),
    /// Score a feature CSV with a fitted model.
    Predict(PredictArgs),
    /// Monte Carlo accuracy on simulated spiked data.
    Simulate(SimulateArgs),
    /// Repeated train/test splits of a labeled CSV.
    Benchmark(BenchmarkArgs),
    /// Accuracy against training size on a labeled CSV.
    LearningCurve(LearningCurveArgs),
    /// Noise variance and spike estimates of a CSV.
    Estimate(EstimateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Pretty,
}

#[derive(Args)]
struct DataArgs {
    /// Labeled CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    /// Label value treated as class 0 (others are class 1); without it
    /// labels must be 0/1.
    #[arg(long)]
    positive_label: Option<String>,
}

/// `fit` / `estimate` config file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitConfig {
    data: Option<PathBuf>,
    label_column: Option<String>,
    positive_label: Option<String>,
    method: Option<Method>,
    seed: Option<u64>,
    priors: Option<[f64; 2]>,
    /// `[[upper0, lower0], [upper1, lower1]]`; detected when absent.
    spike_counts: Option<[[usize; 2]; 2]>,
    settings: MethodSettings,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// qda, rqda, srqda, knn or knnK.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV; a column named like the label column is ignored.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Comma-separated methods, e.g. qda,rqda,srqda,knn3.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated training sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[command(flatten)]
    table: TableArgs,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    table: TableArgs,
}

#[derive(Args)]
struct LearningCurveArgs {
    #[command(flatten)]
    bench: BenchmarkArgs,
    /// Comma-separated training sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Without a label column all rows are treated as one sample.
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_labeled(path: &Path, label_column: &str, positive: Option<&str>) -> Result<CsvDataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_labeled_csv(file, label_column, positive).with_context(|| format!("reading {}", path.display()))
}

fn csv_header(out: &mut dyn Write) -> Result<()> {
    writeln!(out, "# srqda {}", tool_version())?;
    Ok(())
}

fn write_table(table: &AccuracyTable, out: Option<&Path>, format: TableFormat) -> Result<()> {
    for note in &table.notes {
        log::warn!("{note}");
    }
    let mut w = open_out(out)?;
    match format {
        TableFormat::Csv => table.write_csv(&mut w)?,
        TableFormat::Pretty => w.write_all(table.pretty().as_bytes())?,
    }
    w.flush()?;
    Ok(())
}

fn known_counts(c: Option<[[usize; 2]; 2]>) -> Option<[SpikeCounts; 2]> {
    c.map(|c| c.map(|[u, l]| SpikeCounts::new(u, l)))
}

fn describe_srqda(m: &SrqdaModel) -> String {
    let mut s = String::new();
    for (i, fit) in m.fits.iter().enumerate() {
        s.push_str(&format!(
            "class {i}: sigma^2 raw {:.6}, corrected {:.6}; spikes {} (requested {})\n",
            fit.noise.raw, fit.noise.corrected, fit.counts, fit.requested
        ));
        for sp in &fit.spikes {
            s.push_str(&format!("  {:?} lambda_hat {:.6}  a_hat {:.6}\n", sp.kind, sp.lambda, sp.a));
        }
    }
    let g = &m.gamma_star;
    s.push_str(&format!(
        "gamma*: gamma1_0 {:.6}, gamma2_0 {:.6}, gamma1_1 {:.6}, gamma2_1 {:.6}\nasymptotic Fisher ratio {:.6}\n",
        g.gamma1_0, g.gamma2_0, g.gamma1_1, g.gamma2_1, m.fisher_ratio
    ));
    s
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let cfg: FitConfig = read_config(args.config.as_deref())?;
    let path = args.data.data.or(cfg.data).context("no training data given (--data or `data` in config)")?;
    let label = args.data.label_column.or(cfg.label_column).unwrap_or_else(|| "label".into());
    let positive = args.data.positive_label.or(cfg.positive_label);
    let method = args.method.or(cfg.method).unwrap_or(Method::Srqda);
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let ds = load_labeled(&path, &label, positive.as_deref())?;
    let data = &ds.data;
    let model = match method {
        Method::Qda => FittedModel::Qda(fit_qda(data, cfg.priors)?),
        Method::Rqda => {
            let s = &cfg.settings;
            let sel = select_rqda_gamma(data, &s.rqda_grid, s.cv_folds, seed, cfg.priors, s.rqda_eta_sign)?;
            eprintln!("selected R-QDA gamma {}", sel.gamma);
            FittedModel::Rqda {
                model: fit_rqda_with(data, sel.gamma, cfg.priors, s.rqda_eta_sign)?,
                selection: Some(sel),
            }
        }
        Method::Srqda => {
            let opts = cfg.settings.srqda_options(known_counts(cfg.spike_counts), cfg.priors);
            let m = fit_srqda(data, &opts)?;
            eprint!("{}", describe_srqda(&m));
            FittedModel::Srqda(Box::new(m))
        }
        Method::Knn(k) => FittedModel::Knn(fit_knn(data, k)?),
        Method::OracleQda => bail!("oracle-qda needs true parameters and cannot be fitted"),
    };
    let file = ModelFile::new(model, ds.feature_names, ds.class_names);
    let mut w = open_out(args.out.as_deref())?;
    file.write(&mut w)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn model_scores(model: &FittedModel, x: &DMatrix<f64>) -> srqda::Result<Vec<srqda::classifiers::DiscriminantScore>> {
    let d: &dyn Discriminant = match model {
        FittedModel::Qda(m) => m,
        FittedModel::Rqda { model, .. } => model,
        FittedModel::Srqda(m) => m.as_ref(),
        FittedModel::Knn(m) => m,
    };
    scores(d, x)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let file = ModelFile::read(File::open(&args.model).with_context(|| format!("opening {}", args.model.display()))?)
        .with_context(|| format!("reading model {}", args.model.display()))?;
    let input = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let (x, names) = read_feature_csv(input, Some(&args.label_column))?;
    if names.len() != file.feature_names.len() {
        bail!(
            "dimension mismatch: model has {} features, {} has {}",
            file.feature_names.len(),
            args.data.display(),
            names.len()
        );
    }
    if names != file.feature_names {
        log::warn!("feature names differ from the training data; matching by position");
    }
    let scored = model_scores(&file.model, &x)?;
    let mut w = open_out(args.out.as_deref())?;
    csv_header(&mut w)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row_index", "score", "predicted_class"])?;
    for (i, s) in scored.iter().enumerate() {
        out.write_record([i.to_string(), format!("{:.12e}", s.value), s.predicted_class.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg: SimulationConfig = read_config(args.config.as_deref())?;
    if let Some(s) = args.table.seed {
        cfg.rng_seed = s;
    }
    if let Some(r) = args.table.replications {
        cfg.replications = r;
    }
    if let Some(m) = args.table.method {
        cfg.methods = m;
    }
    if let Some(s) = args.sizes {
        cfg.sample_sizes = s;
    }
    let table = run_simulation(&cfg)?;
    write_table(&table, args.table.out.as_deref(), args.table.format)
}

fn benchmark_config(args: &BenchmarkArgs) -> Result<BenchmarkConfig> {
    let mut cfg: BenchmarkConfig = read_config(args.config.as_deref())?;
    if let Some(d) = &args.data.data {
        cfg.dataset = d.clone();
    }
    if let Some(l) = &args.data.label_column {
        cfg.label_column = l.clone();
    }
    if let Some(p) = &args.data.positive_label {
        cfg.positive_label = Some(p.clone());
    }
    if let Some(s) = args.table.seed {
        cfg.rng_seed = s;
    }
    if let Some(r) = args.table.replications {
        cfg.replications = r;
    }
    if let Some(m) = &args.table.method {
        cfg.methods = m.clone();
    }
    if cfg.dataset.as_os_str().is_empty() {
        bail!("no dataset given (--data or `dataset` in config)");
    }
    Ok(cfg)
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let cfg = benchmark_config(&args)?;
    let table = run_benchmark(&cfg)?;
    write_table(&table, args.table.out.as_deref(), args.table.format)
}

fn cmd_learning_curve(args: LearningCurveArgs) -> Result<()> {
    let cfg = benchmark_config(&args.bench)?;
    let table = learning_curve(&cfg, &args.sizes)?;
    write_table(&table, args.bench.table.out.as_deref(), args.bench.table.format)
}

/// One CSV row per estimated spike; classes without spikes get one row
/// with the spike columns empty.
fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let cfg: FitConfig = read_config(args.config.as_deref())?;
    let path = args.data.data.or(cfg.data).context("no data given (--data or `data` in config)")?;
    let label = args.data.label_column.or(cfg.label_column);
    let positive = args.data.positive_label.or(cfg.positive_label);
    let margin = cfg.settings.safety_margin;
    let counts = known_counts(cfg.spike_counts);

    let mut w = open_out(args.out.as_deref())?;
    csv_header(&mut w)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "class",
        "n",
        "sigma_sq_raw",
        "sigma_sq_corrected",
        "detected_upper",
        "detected_lower",
        "kind",
        "sample_eigenvalue",
        "lambda_hat",
        "a_hat",
        "b_hat",
    ])?;
    let fmt = |v: f64| format!("{v:.10}");

    let Some(label) = label else {
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let (x, _) = read_feature_csv(file, None)?;
        let m = moments_of_rows(&x)?;
        let eig = symmetric_eigen(&m.covariance)?;
        let dof = m.count - 1;
        let c = match counts {
            Some(c) => c[0],
            None => detect_spike_counts(&eig, dof, margin)?,
        };
        let fit = fit_class_spikes(&eig, c, dof)?;
        let head = |out: &mut csv::Writer<Box<dyn Write>>, rest: [String; 5]| -> Result<()> {
            let mut rec = vec![
                "all".to_string(),
                m.count.to_string(),
                fmt(fit.noise.raw),
                fmt(fit.noise.corrected),
                fit.counts.upper.to_string(),
                fit.counts.lower.to_string(),
            ];
            rec.extend(rest);
            out.write_record(&rec)?;
            Ok(())
        };
        if fit.spikes.is_empty() {
            head(&mut out, Default::default())?;
        }
        for s in &fit.spikes {
            head(
                &mut out,
                [format!("{:?}", s.kind).to_lowercase(), fmt(s.sample_eigenvalue), fmt(s.lambda), fmt(s.a), String::new()],
            )?;
        }
        out.flush()?;
        return Ok(());
    };

    let ds = load_labeled(&path, &label, positive.as_deref())?;
    let data = &ds.data;
    let p = data.n_features();
    let moments = [class_moments(data, 0)?, class_moments(data, 1)?];
    let mu_hat = &moments[0].mean - &moments[1].mean;
    let mut eigs = Vec::new();
    let mut fits = Vec::new();
    for i in 0..2 {
        let mut eig = symmetric_eigen(&moments[i].covariance)?;
        eig.align_signs(&mu_hat);
        let dof = moments[i].count - 1;
        let c = match counts {
            Some(c) => c[i],
            None => detect_spike_counts(&eig, dof, margin)?,
        };
        fits.push(fit_class_spikes(&eig, c, dof)?);
        eigs.push(eig);
    }
    let sigma_sq = [fits[0].noise.corrected, fits[1].noise.corrected];
    let c_mean = [0, 1].map(|i| p as f64 / moments[i].count as f64);
    let plug = estimate_plug_ins(
        [&fits[0], &fits[1]],
        [&eigs[0], &eigs[1]],
        &mu_hat,
        sigma_sq,
        c_mean,
        MeanSeparationPolicy::TreatAsZero,
    )?;
    let separated = plug.mean_separation > 0.0;
    if !separated {
        log::warn!("mean separation not estimable at this dimension; b_hat left empty");
    }
    for i in 0..2 {
        let fit = &fits[i];
        let base = vec![
            ds.class_names[i].clone(),
            moments[i].count.to_string(),
            fmt(fit.noise.raw),
            fmt(fit.noise.corrected),
            fit.counts.upper.to_string(),
            fit.counts.lower.to_string(),
        ];
        if fit.spikes.is_empty() {
            let mut rec = base.clone();
            rec.extend(std::iter::repeat_n(String::new(), 5));
            out.write_record(&rec)?;
        }
        for (k, s) in fit.spikes.iter().enumerate() {
            let mut rec = base.clone();
            let b = if separated { fmt(plug.classes[i].b_hat[k]) } else { String::new() };
            rec.extend([format!("{:?}", s.kind).to_lowercase(), fmt(s.sample_eigenvalue), fmt(s.lambda), fmt(s.a), b]);
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::LearningCurve(a) => cmd_learning_curve(a),
        Command::Estimate(a) => cmd_estimate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
