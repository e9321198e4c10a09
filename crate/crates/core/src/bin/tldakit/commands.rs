//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;

use tldakit::data::{
    generate_synthetic, load_bundle, make_folds, save_bundle, stratified_split, DatasetBundle,
    SyntheticSpec,
};
use tldakit::discriminant::pca_reduce;
use tldakit::error::{Error, Result};
use tldakit::mda::{alternating_mda, project_n, MdaOptions, TensorDatasetN, TensorN};
use tldakit::tensor::{read_tns3, read_tns3_real, write_tns3, Tensor3, Tns3Payload};
use tldakit::tlda::{
    classify_projected, evaluate, train_ratio_trace, train_trace_ratio, DistanceMetric,
    LabeledTensorDataset, ProjectedGallery, TldaModel, TldaOptions,
};
use tldakit::transform::LinearTransform;

use crate::config::{resolve, resolve_opt, Settings};

// --- shared pieces ----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TldaTr,
    TldaRt,
    Lda,
    MdaAlt,
}

impl Method {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "tlda-tr" => Ok(Method::TldaTr),
            "tlda-rt" => Ok(Method::TldaRt),
            "lda" => Ok(Method::Lda),
            "mda-alt" => Ok(Method::MdaAlt),
            other => Err(Error::invalid(format!(
                "unknown method '{other}' (expected tlda-tr, tlda-rt, lda or mda-alt)"
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Method::TldaTr => "tlda-tr",
            Method::TldaRt => "tlda-rt",
            Method::Lda => "lda",
            Method::MdaAlt => "mda-alt",
        }
    }
}

#[derive(Debug, Clone)]
enum TransformSpec {
    T,
    C,
    Custom(PathBuf),
}

impl TransformSpec {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(TransformSpec::T),
            "c" => Ok(TransformSpec::C),
            other => match other.strip_prefix("custom:") {
                Some(path) if !path.is_empty() => Ok(TransformSpec::Custom(PathBuf::from(path))),
                _ => Err(Error::invalid(format!(
                    "unknown transform '{other}' (expected t, c or custom:<path>)"
                ))),
            },
        }
    }

    fn build(&self, n3: usize) -> Result<LinearTransform> {
        match self {
            TransformSpec::T => LinearTransform::dft(n3),
            TransformSpec::C => LinearTransform::dct(n3),
            TransformSpec::Custom(path) => {
                let mut r = BufReader::new(File::open(path)?);
                let m = match read_tns3(&mut r)? {
                    Tns3Payload::Complex(t) => {
                        let (a, b, c) = t.dims();
                        if a != n3 || b != n3 || c != 1 {
                            return Err(Error::dims(format!(
                                "custom transform tensor is {a}x{b}x{c}, expected {n3}x{n3}x1"
                            )));
                        }
                        t.frontal_slice(0)
                    }
                    Tns3Payload::Real(t) => {
                        let (a, b, c) = t.dims();
                        if a != n3 || b != n3 || c != 1 {
                            return Err(Error::dims(format!(
                                "custom transform tensor is {a}x{b}x{c}, expected {n3}x{n3}x1"
                            )));
                        }
                        t.frontal_slice(0).map(|v| num_complex::Complex64::new(v, 0.0))
                    }
                };
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "custom".to_string());
                LinearTransform::custom(name, m)
            }
        }
    }
}

/// Fixed 6-significant-digit float formatting for CSV cells.
fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn write_text(path: &Path, contents: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(contents.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn dataset_from_bundle(bundle: &DatasetBundle) -> Result<LabeledTensorDataset> {
    LabeledTensorDataset::new(bundle.tensor.clone(), bundle.labels.clone())
}

/// Samples reshaped to vectors: `n1*n3 x n x 1`, tube-major per sample.
fn vectorize_bundle(bundle: &DatasetBundle) -> DatasetBundle {
    let (n1, n, n3) = bundle.tensor.dims();
    let mut out = Tensor3::zeros(n1 * n3, n, 1);
    for j in 0..n {
        for k in 0..n3 {
            for i in 0..n1 {
                out.set(i + k * n1, j, 0, bundle.tensor.get(i, j, k));
            }
        }
    }
    DatasetBundle::new(out, bundle.labels.clone(), bundle.meta.clone()).expect("dims consistent")
}

/// Samples as order-2 tensors (`n1 x n3` matrices) for the alternating
/// baseline.
fn matrix_samples(bundle: &DatasetBundle) -> Result<TensorDatasetN> {
    let (n1, n, n3) = bundle.tensor.dims();
    let mut samples = Vec::with_capacity(n);
    for j in 0..n {
        let m = bundle.tensor.lateral_matrix(j);
        let mut data = Vec::with_capacity(n1 * n3);
        for k in 0..n3 {
            for i in 0..n1 {
                data.push(m[(i, k)]);
            }
        }
        samples.push(TensorN::from_vec(&[n1, n3], data)?);
    }
    TensorDatasetN::new(samples, bundle.labels.clone())
}

/// Everything a single train/test run needs.
struct MethodConfig {
    method: Method,
    transform: TransformSpec,
    k: Option<usize>,
    gamma: Option<f64>,
    weight_between: Option<bool>,
    pca_var: Option<f64>,
    target_dims: Option<Vec<usize>>,
    metric: DistanceMetric,
    verbose: bool,
}

impl MethodConfig {
    fn objective_name(&self) -> &'static str {
        match self.method {
            Method::TldaTr | Method::MdaAlt => "trace-ratio",
            Method::TldaRt => "ratio-trace",
            Method::Lda => {
                if self.gamma.is_some() {
                    "ratio-trace"
                } else {
                    "trace-ratio"
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self.method {
            Method::TldaTr => {
                if self.k.is_none() {
                    return Err(Error::invalid("tlda-tr requires --k"));
                }
                if self.gamma.is_some() {
                    return Err(Error::invalid("--gamma only applies to ratio-trace methods"));
                }
            }
            Method::TldaRt => {
                if self.gamma.is_none() {
                    return Err(Error::invalid("tlda-rt requires --gamma"));
                }
                if self.k.is_some() {
                    return Err(Error::invalid(
                        "tlda-rt infers K from the between-scatter rank; drop --k",
                    ));
                }
            }
            Method::Lda => {
                if self.k.is_some() == self.gamma.is_some() {
                    return Err(Error::invalid(
                        "lda takes exactly one of --k (trace ratio) or --gamma (ratio trace)",
                    ));
                }
            }
            Method::MdaAlt => {
                if self.target_dims.is_none() {
                    return Err(Error::invalid("mda-alt requires --target-dims m1,m2"));
                }
                if self.metric != DistanceMetric::Frobenius {
                    return Err(Error::invalid(
                        "mda-alt projections have no tube structure; use the frobenius metric",
                    ));
                }
            }
        }
        if self.pca_var.is_some() && self.method != Method::Lda {
            return Err(Error::invalid("--pca-var only applies to lda"));
        }
        Ok(())
    }

    fn tlda_options(&self) -> TldaOptions {
        // The classical matrix LDA weights the between scatter by class
        // size; the tensor objective as written does not.
        TldaOptions {
            weight_between: self.weight_between.unwrap_or(self.method == Method::Lda),
            ..TldaOptions::default()
        }
    }
}

fn log_model(model: &TldaModel) {
    for report in &model.meta().per_slice {
        match report.mirrored_from {
            Some(src) => println!("slice={} mirrored-from={src} rho={}", report.slice, fmt_g6(report.rho)),
            None => println!(
                "slice={} iterations={} rho={} k={}",
                report.slice,
                report.iterations,
                fmt_g6(report.rho),
                report.k
            ),
        }
    }
    println!("imag-residual={:.3e}", model.meta().imag_residual);
}

/// Train a TLDA-model-producing method (everything except mda-alt).
fn train_model(bundle: &DatasetBundle, cfg: &MethodConfig) -> Result<TldaModel> {
    match cfg.method {
        Method::TldaTr | Method::TldaRt => {
            let ds = dataset_from_bundle(bundle)?;
            let l = cfg.transform.build(bundle.tensor.dims().2)?;
            match cfg.method {
                Method::TldaTr => train_trace_ratio(&ds, cfg.k.unwrap(), &l, &cfg.tlda_options()),
                _ => train_ratio_trace(&ds, cfg.gamma.unwrap(), &l, &cfg.tlda_options()),
            }
        }
        Method::Lda => {
            let vectorized = vectorize_bundle(bundle);
            let l = LinearTransform::dft(1)?;
            let opts = cfg.tlda_options();
            match cfg.pca_var {
                None => {
                    let ds = dataset_from_bundle(&vectorized)?;
                    match cfg.k {
                        Some(k) => train_trace_ratio(&ds, k, &l, &opts),
                        None => train_ratio_trace(&ds, cfg.gamma.unwrap(), &l, &opts),
                    }
                }
                Some(fraction) => {
                    let samples = vectorized.tensor.frontal_slice(0);
                    let (p, reduced) = pca_reduce(&samples, fraction)?;
                    let mut tensor = Tensor3::zeros(reduced.nrows(), reduced.ncols(), 1);
                    tensor.set_frontal_slice(0, &reduced);
                    let ds = LabeledTensorDataset::new(tensor, vectorized.labels.clone())?;
                    let model = match cfg.k {
                        Some(k) => train_trace_ratio(&ds, k, &l, &opts)?,
                        None => train_ratio_trace(&ds, cfg.gamma.unwrap(), &l, &opts)?,
                    };
                    model.compose_preprocessing(&p)
                }
            }
        }
        Method::MdaAlt => Err(Error::invalid(
            "mda-alt keeps per-mode factors and has no TLDA model file; use eval",
        )),
    }
}

/// One train/test run; returns (accuracy, train seconds, output dim).
fn run_once(
    train_bundle: &DatasetBundle,
    test_bundle: &DatasetBundle,
    cfg: &MethodConfig,
) -> Result<(f64, f64, usize)> {
    match cfg.method {
        Method::MdaAlt => {
            let train = matrix_samples(train_bundle)?;
            let test = matrix_samples(test_bundle)?;
            let dims = cfg.target_dims.as_ref().unwrap().clone();
            let started = Instant::now();
            let projectors = alternating_mda(&train, &dims, &MdaOptions::default())?;
            let seconds = started.elapsed().as_secs_f64();
            let gallery: Vec<TensorN> = train
                .samples()
                .iter()
                .map(|s| project_n(&projectors, s))
                .collect::<Result<_>>()?;
            let mut correct = 0usize;
            for (j, probe) in test.samples().iter().enumerate() {
                let p = project_n(&projectors, probe)?;
                let mut best = (f64::INFINITY, 0usize);
                for (g, cand) in gallery.iter().enumerate() {
                    let d = p.sub(cand)?.frobenius_norm();
                    if d < best.0 {
                        best = (d, g);
                    }
                }
                if train.labels()[best.1] == test.labels()[j] {
                    correct += 1;
                }
            }
            let acc = correct as f64 / test.labels().len() as f64;
            Ok((acc, seconds, dims.iter().product()))
        }
        _ => {
            let started = Instant::now();
            let model = train_model(train_bundle, cfg)?;
            let seconds = started.elapsed().as_secs_f64();
            if cfg.verbose {
                log_model(&model);
            }
            let test = match cfg.method {
                Method::Lda => vectorize_bundle(test_bundle),
                _ => test_bundle.clone(),
            };
            let train_proj = match cfg.method {
                Method::Lda => vectorize_bundle(train_bundle),
                _ => train_bundle.clone(),
            };
            let gallery = ProjectedGallery {
                data: model.project(&train_proj.tensor)?,
                labels: train_proj.labels.clone(),
            };
            let probes = model.project(&test.tensor)?;
            let result = classify_projected(&gallery, &probes, cfg.metric)?;
            let report = evaluate(&result.predictions, &result.ranked_classes, &test.labels)?;
            let dim = model.k() * model.projector().dims().2;
            Ok((report.accuracy, seconds, dim))
        }
    }
}

// --- flag plumbing ----------------------------------------------------------

#[derive(Args)]
pub struct MethodFlags {
    /// tlda-tr, tlda-rt, lda or mda-alt.
    #[arg(long)]
    method: Option<String>,
    /// t (DFT), c (DCT) or custom:<path to n3 x n3 x 1 TNS3 matrix>.
    #[arg(long)]
    transform: Option<String>,
    /// Subspace dimension (trace-ratio methods).
    #[arg(long)]
    k: Option<usize>,
    /// Ridge regularization (ratio-trace methods).
    #[arg(long)]
    gamma: Option<f64>,
    /// Weight the between scatter by class size (true for lda, false for
    /// the tensor methods unless overridden).
    #[arg(long)]
    weight_between: Option<bool>,
    /// PCA variance fraction preprocessing (lda only).
    #[arg(long)]
    pca_var: Option<f64>,
    /// Per-mode output dims for mda-alt, e.g. 8,2.
    #[arg(long)]
    target_dims: Option<String>,
    /// frobenius or mad.
    #[arg(long)]
    metric: Option<String>,
}

impl MethodFlags {
    fn resolve(&self, settings: &Settings, verbose: bool) -> Result<MethodConfig> {
        let cfg = self.resolve_unvalidated(settings, verbose)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Used by `cv`, which injects the swept hyperparameter before
    /// validating.
    fn resolve_unvalidated(&self, settings: &Settings, verbose: bool) -> Result<MethodConfig> {
        let method = Method::parse(&resolve(
            self.method.clone(),
            settings,
            "method",
            "tlda-tr".to_string(),
        )?)?;
        let transform = TransformSpec::parse(&resolve(
            self.transform.clone(),
            settings,
            "transform",
            "t".to_string(),
        )?)?;
        let metric = DistanceMetric::parse(&resolve(
            self.metric.clone(),
            settings,
            "metric",
            "frobenius".to_string(),
        )?)?;
        let target_dims = match resolve_opt(self.target_dims.clone(), settings, "target-dims")? {
            None => None,
            Some(raw) => Some(
                raw.split(',')
                    .map(|p| {
                        p.trim().parse::<usize>().map_err(|_| {
                            Error::invalid(format!("bad target-dims component '{p}'"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let cfg = MethodConfig {
            method,
            transform,
            k: resolve_opt(self.k, settings, "k")?,
            gamma: resolve_opt(self.gamma, settings, "gamma")?,
            weight_between: resolve_opt(self.weight_between, settings, "weight-between")?,
            pca_var: resolve_opt(self.pca_var, settings, "pca-var")?,
            target_dims,
            metric,
            verbose,
        };
        Ok(cfg)
    }
}

// --- gen ---------------------------------------------------------------------

#[derive(Args)]
pub struct GenArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n3: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output TNS3 path; labels go to the `.labels.csv` sidecar.
    #[arg(long)]
    out: PathBuf,
}

pub fn gen(args: GenArgs, settings: &Settings) -> Result<()> {
    let spec = SyntheticSpec {
        classes: resolve(args.classes, settings, "classes", 4)?,
        per_class: resolve(args.per_class, settings, "per-class", 50)?,
        n1: resolve(args.n1, settings, "n1", 16)?,
        n3: resolve(args.n3, settings, "n3", 4)?,
        separation: resolve(args.separation, settings, "separation", 5.0)?,
        noise: resolve(args.noise, settings, "noise", 5.0)?,
        seed: resolve(args.seed, settings, "seed", 0)?,
    };
    let bundle = generate_synthetic(&spec)?;
    save_bundle(&args.out, &bundle)?;
    println!(
        "wrote {} samples ({} classes, n1={}, n3={}) to {}",
        bundle.n_samples(),
        spec.classes,
        spec.n1,
        spec.n3,
        args.out.display()
    );
    Ok(())
}

// --- train -------------------------------------------------------------------

#[derive(Args)]
pub struct TrainArgs {
    /// Input TNS3 dataset (labels sidecar required).
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    method: MethodFlags,
    /// Output model path.
    #[arg(long)]
    out: PathBuf,
}

pub fn train(args: TrainArgs, settings: &Settings) -> Result<()> {
    let cfg = args.method.resolve(settings, false)?;
    let bundle = load_bundle(&args.input)?;
    let started = Instant::now();
    let model = train_model(&bundle, &cfg)?;
    let seconds = started.elapsed().as_secs_f64();
    log_model(&model);
    let mut w = BufWriter::new(File::create(&args.out)?);
    model.save(&mut w)?;
    w.flush()?;
    println!(
        "method={} objective={} k={} train-seconds={}",
        cfg.method.name(),
        model.objective().name(),
        model.k(),
        fmt_g6(seconds)
    );
    println!("model written to {}", args.out.display());
    Ok(())
}

// --- eval --------------------------------------------------------------------

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    method: MethodFlags,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Stratified train fraction per repetition.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

pub fn eval(args: EvalArgs, settings: &Settings) -> Result<()> {
    let cfg = args.method.resolve(settings, false)?;
    let repetitions = resolve(args.repetitions, settings, "repetitions", 30)?;
    let train_fraction = resolve(args.train_fraction, settings, "train-fraction", 0.7)?;
    let seed = resolve(args.seed, settings, "seed", 0)?;
    if repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    let bundle = load_bundle(&args.input)?;

    let mut accs = Vec::with_capacity(repetitions);
    let mut times = Vec::with_capacity(repetitions);
    let mut dim = 0usize;
    for rep in 0..repetitions {
        let split = stratified_split(&bundle.labels, train_fraction, seed + rep as u64)?;
        let train_bundle = bundle.subset(&split.train)?;
        let test_bundle = bundle.subset(&split.test)?;
        let (acc, seconds, d) = run_once(&train_bundle, &test_bundle, &cfg)?;
        accs.push(acc * 100.0);
        times.push(seconds);
        dim = d;
        println!(
            "rep={} accuracy={} train-seconds={}",
            rep,
            fmt_g6(acc * 100.0),
            fmt_g6(seconds)
        );
    }
    let (acc_mean, acc_std) = mean_std(&accs);
    let (t_mean, t_std) = mean_std(&times);
    let mut csv = String::from("objective,method,acc_mean,acc_std,time_mean,time_std,dim\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        cfg.objective_name(),
        cfg.method.name(),
        fmt_g6(acc_mean),
        fmt_g6(acc_std),
        fmt_g6(t_mean),
        fmt_g6(t_std),
        dim
    ));
    write_text(&args.out, &csv)?;
    println!(
        "acc={}±{} time={}±{} dim={} -> {}",
        fmt_g6(acc_mean),
        fmt_g6(acc_std),
        fmt_g6(t_mean),
        fmt_g6(t_std),
        dim,
        args.out.display()
    );
    Ok(())
}

/// Mean and sample standard deviation (0 for a single observation).
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

// --- cv ----------------------------------------------------------------------

#[derive(Args)]
pub struct CvArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    method: MethodFlags,
    /// Comma-separated gamma grid (ratio-trace methods).
    #[arg(long)]
    gamma_grid: Option<String>,
    /// Comma-separated K grid (trace-ratio methods).
    #[arg(long)]
    k_grid: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-fold scores CSV.
    #[arg(long)]
    out: PathBuf,
}

enum Grid {
    Gamma(Vec<f64>),
    K(Vec<usize>),
}

pub fn cv(args: CvArgs, settings: &Settings) -> Result<()> {
    let folds_n = resolve(args.folds, settings, "folds", 5)?;
    let seed = resolve(args.seed, settings, "seed", 0)?;
    let gamma_grid = resolve_opt(args.gamma_grid, settings, "gamma-grid")?;
    let k_grid = resolve_opt(args.k_grid, settings, "k-grid")?;
    let grid = match (gamma_grid, k_grid) {
        (Some(g), None) => Grid::Gamma(parse_grid(&g)?),
        (None, Some(k)) => Grid::K(parse_grid(&k)?),
        (Some(_), Some(_)) => {
            return Err(Error::invalid("give either --gamma-grid or --k-grid, not both"))
        }
        (None, None) => return Err(Error::invalid("cv needs --gamma-grid or --k-grid")),
    };
    let base = args.method.resolve_unvalidated(settings, false)?;
    match (&grid, base.method) {
        (Grid::Gamma(_), Method::TldaRt) | (Grid::Gamma(_), Method::Lda) => {}
        (Grid::K(_), Method::TldaTr) | (Grid::K(_), Method::Lda) => {}
        _ => {
            return Err(Error::invalid(
                "grid kind does not match the method's hyperparameter",
            ))
        }
    }

    let bundle = load_bundle(&args.input)?;
    let folds = make_folds(&bundle.labels, folds_n, true, seed)?;

    let mut csv = String::from("param,fold,accuracy\n");
    let mut results: Vec<(String, f64, f64)> = Vec::new(); // (label, param value, mean acc)
    let points: Vec<(String, f64)> = match &grid {
        Grid::Gamma(gs) => gs.iter().map(|&g| (format!("{g}"), g)).collect(),
        Grid::K(ks) => ks.iter().map(|&k| (format!("{k}"), k as f64)).collect(),
    };
    for (label, value) in &points {
        let mut cfg = MethodConfig {
            method: base.method,
            transform: base.transform.clone(),
            k: base.k,
            gamma: base.gamma,
            weight_between: base.weight_between,
            pca_var: base.pca_var,
            target_dims: base.target_dims.clone(),
            metric: base.metric,
            verbose: false,
        };
        match &grid {
            Grid::Gamma(_) => {
                cfg.gamma = Some(*value);
                cfg.k = None;
            }
            Grid::K(_) => {
                cfg.k = Some(*value as usize);
                cfg.gamma = None;
            }
        }
        cfg.validate()?;
        let mut accs = Vec::new();
        for (fold_idx, fold) in folds.iter().enumerate() {
            let train_bundle = bundle.subset(&fold.train)?;
            let test_bundle = bundle.subset(&fold.test)?;
            let (acc, _, _) = run_once(&train_bundle, &test_bundle, &cfg)?;
            accs.push(acc);
            csv.push_str(&format!("{label},{fold_idx},{}\n", fmt_g6(acc)));
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        results.push((label.clone(), *value, mean));
    }
    // Argmax mean accuracy, ties toward the smaller parameter value.
    let best = results
        .iter()
        .max_by(|a, b| a.2.total_cmp(&b.2).then(b.1.total_cmp(&a.1)))
        .expect("non-empty grid");
    write_text(&args.out, &csv)?;
    let kind = match grid {
        Grid::Gamma(_) => "gamma",
        Grid::K(_) => "k",
    };
    println!(
        "selected {kind}={} mean-accuracy={} -> {}",
        best.0,
        fmt_g6(best.2),
        args.out.display()
    );
    Ok(())
}

fn parse_grid<T: std::str::FromStr>(raw: &str) -> Result<Vec<T>> {
    let values = raw
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::invalid(format!("bad grid value '{p}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    Ok(values)
}

// --- product -----------------------------------------------------------------

#[derive(Args)]
pub struct ProductArgs {
    /// Left operand (TNS3).
    #[arg(long)]
    a: PathBuf,
    /// Right operand (TNS3).
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    transform: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

pub fn product(args: ProductArgs, settings: &Settings) -> Result<()> {
    let spec = TransformSpec::parse(&resolve(
        args.transform,
        settings,
        "transform",
        "t".to_string(),
    )?)?;
    let a = read_tns3_real(&mut BufReader::new(File::open(&args.a)?))?;
    let b = read_tns3_real(&mut BufReader::new(File::open(&args.b)?))?;
    let l = spec.build(a.dims().2)?;
    let c = l.product(&a, &b)?;
    let mut w = BufWriter::new(File::create(&args.out)?);
    write_tns3(&mut w, &Tns3Payload::Real(c.clone()))?;
    w.flush()?;
    println!(
        "{}x{}x{} *_L {}x{}x{} -> {}x{}x{} at {}",
        a.dims().0,
        a.dims().1,
        a.dims().2,
        b.dims().0,
        b.dims().1,
        b.dims().2,
        c.dims().0,
        c.dims().1,
        c.dims().2,
        args.out.display()
    );
    Ok(())
}

// --- cmc ---------------------------------------------------------------------

#[derive(Args)]
pub struct CmcArgs {
    /// Trained TLDA model file.
    #[arg(long)]
    model: PathBuf,
    /// Gallery dataset (TNS3 + labels sidecar).
    #[arg(long)]
    gallery: PathBuf,
    /// Probe dataset (TNS3 + labels sidecar).
    #[arg(long)]
    probes: PathBuf,
    #[arg(long)]
    metric: Option<String>,
    /// Output CSV (`rank,rate` rows).
    #[arg(long)]
    out: PathBuf,
}

pub fn cmc(args: CmcArgs, settings: &Settings) -> Result<()> {
    let metric = DistanceMetric::parse(&resolve(
        args.metric,
        settings,
        "metric",
        "frobenius".to_string(),
    )?)?;
    let model = TldaModel::load(&mut BufReader::new(File::open(&args.model)?))?;
    let gallery_bundle = load_bundle(&args.gallery)?;
    let probe_bundle = load_bundle(&args.probes)?;

    let gallery_classes: std::collections::BTreeSet<usize> =
        gallery_bundle.labels.iter().copied().collect();
    let missing: Vec<usize> = probe_bundle
        .labels
        .iter()
        .copied()
        .filter(|l| !gallery_classes.contains(l))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "probe classes missing from the gallery: {missing:?}"
        )));
    }

    let gallery = ProjectedGallery {
        data: model.project(&gallery_bundle.tensor)?,
        labels: gallery_bundle.labels.clone(),
    };
    let probes = model.project(&probe_bundle.tensor)?;
    let result = classify_projected(&gallery, &probes, metric)?;
    let report = evaluate(&result.predictions, &result.ranked_classes, &probe_bundle.labels)?;

    let mut csv = String::from("rank,rate\n");
    for (i, rate) in report.cmc.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, fmt_g6(*rate)));
    }
    write_text(&args.out, &csv)?;
    let rank1 = report.cmc.first().copied().unwrap_or(0.0);
    let rank5 = report
        .cmc
        .get(4.min(report.cmc.len().saturating_sub(1)))
        .copied()
        .unwrap_or(0.0);
    println!(
        "rank-1={} rank-5={} -> {}",
        fmt_g6(rank1),
        fmt_g6(rank5),
        args.out.display()
    );
    Ok(())
}
