//! Transform-domain tensor linear discriminant analysis.
//!
//! Samples are lateral slices of an `n1 x n x n3` tensor. Training moves the
//! whole dataset into the transform domain once; there the between/within
//! scatter structure is block diagonal, so every frontal slice yields an
//! independent `n1 x n1` discriminant subproblem. Each subproblem is solved
//! by either the Newton trace-ratio iteration or the regularized ratio-trace
//! eigenproblem, and the per-slice factors are assembled and inverse
//! transformed into a real projective tensor `V` of shape `n1 x K x n3`.
//!
//! Under the DFT with real data the transformed slices come in conjugate
//! pairs, so only slices `1..=ceil((n3+1)/2)` are solved and the rest are
//! filled by conjugation; this both halves the work and guarantees that the
//! assembled projector is real up to rounding.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use std::io::{Read, Write};

use crate::discriminant::{
    build_scatters, hermitian_rank, ratio_trace_gep, trace_ratio_newton,
    BetweenWeighting, RankSpec, TraceRatioOptions,
};
use crate::error::{Error, Result};
use crate::tensor::{read_tns3_real, write_tns3, CTensor3, Tensor3, Tns3Payload};
use crate::transform::{LinearTransform, TransformKind, DEFAULT_IMAG_TOL};

/// A sample tensor (`n1 x n x n3`, lateral slice i = sample i) with class
/// labels in `1..=c`.
#[derive(Debug, Clone)]
pub struct LabeledTensorDataset {
    data: Tensor3,
    labels: Vec<usize>,
    class_index: Vec<Vec<usize>>,
}

impl LabeledTensorDataset {
    pub fn new(data: Tensor3, labels: Vec<usize>) -> Result<Self> {
        if data.dims().1 != labels.len() {
            return Err(Error::dims(format!(
                "tensor holds {} lateral slices but {} labels were given",
                data.dims().1,
                labels.len()
            )));
        }
        let class_index = crate::discriminant::class_index(&labels)?;
        Ok(LabeledTensorDataset {
            data,
            labels,
            class_index,
        })
    }

    pub fn data(&self) -> &Tensor3 {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_index.len()
    }

    pub fn class_index(&self) -> &[Vec<usize>] {
        &self.class_index
    }

    pub fn sample(&self, i: usize) -> Tensor3 {
        self.data.lateral_slice(i)
    }
}

/// Global centroid and per-class centroids, each `n1 x 1 x n3`.
pub fn compute_centroids(ds: &LabeledTensorDataset) -> (Tensor3, Vec<Tensor3>) {
    let (n1, n, n3) = ds.data.dims();
    let mut global = Tensor3::zeros(n1, 1, n3);
    for j in 0..n {
        global = global.add(&ds.data.lateral_slice(j)).unwrap();
    }
    let global = global.scale(1.0 / n as f64);
    let class = ds
        .class_index
        .iter()
        .map(|members| {
            let mut acc = Tensor3::zeros(n1, 1, n3);
            for &j in members {
                acc = acc.add(&ds.data.lateral_slice(j)).unwrap();
            }
            acc.scale(1.0 / members.len() as f64)
        })
        .collect();
    (global, class)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    TraceRatio,
    RatioTrace,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::TraceRatio => "trace-ratio",
            Objective::RatioTrace => "ratio-trace",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TldaOptions {
    /// Weight each between-scatter term by the class size (the classical LDA
    /// form). Off by default: one term per class.
    pub weight_between: bool,
    /// Imaginary residual allowed on the assembled real projector.
    pub imag_tol: f64,
    pub newton: TraceRatioOptions,
    /// Solve frontal slices on the rayon pool.
    pub parallel: bool,
}

impl Default for TldaOptions {
    fn default() -> Self {
        TldaOptions {
            weight_between: false,
            imag_tol: DEFAULT_IMAG_TOL,
            newton: TraceRatioOptions::default(),
            parallel: true,
        }
    }
}

impl TldaOptions {
    fn weighting(&self) -> BetweenWeighting {
        if self.weight_between {
            BetweenWeighting::ClassSize
        } else {
            BetweenWeighting::Uniform
        }
    }
}

/// Per-slice training record.
#[derive(Debug, Clone)]
pub struct SliceReport {
    pub slice: usize,
    pub iterations: usize,
    pub rho: f64,
    pub k: usize,
    /// Set when the slice was filled by conjugating another slice's factor.
    pub mirrored_from: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingMeta {
    pub per_slice: Vec<SliceReport>,
    /// Largest imaginary entry discarded when the projector was realized.
    pub imag_residual: f64,
}

/// A trained projective tensor with its transform, objective and projected
/// class centroids.
#[derive(Debug, Clone)]
pub struct TldaModel {
    projector: Tensor3,
    k: usize,
    transform: LinearTransform,
    objective: Objective,
    gamma: f64,
    weight_between: bool,
    class_labels: Vec<usize>,
    centroids_projected: Vec<Tensor3>,
    meta: TrainingMeta,
}

use crate::discriminant::normalize_column_phases;

/// Indices of the frontal slices that must actually be solved; the rest are
/// conjugate mirrors (DFT on real data only).
fn slices_to_solve(l: &LinearTransform, n3: usize) -> usize {
    if l.conjugate_symmetric() {
        n3 / 2 + 1
    } else {
        n3
    }
}

fn solve_slices<F>(count: usize, parallel: bool, f: F) -> Result<Vec<(DMatrix<Complex64>, SliceReport)>>
where
    F: Fn(usize) -> Result<(DMatrix<Complex64>, SliceReport)> + Sync + Send,
{
    if parallel && count > 1 {
        (0..count).into_par_iter().map(f).collect()
    } else {
        (0..count).map(f).collect()
    }
}

fn assemble_model(
    ds: &LabeledTensorDataset,
    l: &LinearTransform,
    opts: &TldaOptions,
    k: usize,
    objective: Objective,
    gamma: f64,
    solved: Vec<(DMatrix<Complex64>, SliceReport)>,
) -> Result<TldaModel> {
    let (n1, _, n3) = ds.data.dims();
    let mut factors = CTensor3::zeros(n1, k, n3);
    let mut reports = Vec::with_capacity(n3);
    for (basis, report) in solved {
        factors.set_frontal_slice(report.slice, &basis);
        reports.push(report);
    }
    if l.conjugate_symmetric() {
        for p in n3 / 2 + 1..n3 {
            let partner = n3 - p;
            let mirrored = factors.frontal_slice(partner).map(|v| v.conj());
            factors.set_frontal_slice(p, &mirrored);
            let src = &reports[partner];
            reports.push(SliceReport {
                slice: p,
                iterations: 0,
                rho: src.rho,
                k: src.k,
                mirrored_from: Some(partner),
            });
        }
    }

    let projector_c = l.inverse(&factors)?;
    let imag_residual = projector_c.max_imag();
    if imag_residual > opts.imag_tol {
        return Err(Error::NumericalConsistency(format!(
            "projector imaginary residual {imag_residual:.3e} exceeds {:.3e}",
            opts.imag_tol
        )));
    }
    let projector = projector_c.real_part();

    let (_, class_centroids) = compute_centroids(ds);
    let centroids_projected = class_centroids
        .iter()
        .map(|c| project_with(&projector, l, c, opts.imag_tol))
        .collect::<Result<Vec<_>>>()?;

    Ok(TldaModel {
        projector,
        k,
        transform: l.clone(),
        objective,
        gamma,
        weight_between: opts.weight_between,
        class_labels: (1..=ds.n_classes()).collect(),
        centroids_projected,
        meta: TrainingMeta {
            per_slice: reports,
            imag_residual,
        },
    })
}

/// Trace-ratio training: per transformed slice, build the scatter pair and
/// run the Newton iteration for a column-orthonormal factor of width `k`.
pub fn train_trace_ratio(
    ds: &LabeledTensorDataset,
    k: usize,
    l: &LinearTransform,
    opts: &TldaOptions,
) -> Result<TldaModel> {
    let (n1, _, n3) = ds.data.dims();
    if k == 0 || k > n1 {
        return Err(Error::invalid(format!(
            "subspace dimension {k} must be in 1..={n1}"
        )));
    }
    if ds.n_classes() < 2 {
        return Err(Error::invalid("training needs at least two classes"));
    }
    let transformed = l.forward(&ds.data)?;
    let weighting = opts.weighting();
    let solved = solve_slices(slices_to_solve(l, n3), opts.parallel, |p| {
        let slice = transformed.frontal_slice(p);
        let scatters = build_scatters(&slice, &ds.labels, weighting).map_err(|e| e.at_slice(p))?;
        let state = trace_ratio_newton(&scatters, k, &opts.newton).map_err(|e| e.at_slice(p))?;
        Ok((
            normalize_column_phases(state.basis),
            SliceReport {
                slice: p,
                iterations: state.iterations,
                rho: state.rho,
                k,
                mirrored_from: None,
            },
        ))
    })?;
    assemble_model(ds, l, opts, k, Objective::TraceRatio, 0.0, solved)
}

/// Ratio-trace training: per transformed slice, solve the regularized
/// generalized eigenproblem. The subspace width is the numerical rank of the
/// between scatter, taken uniformly as the minimum over slices so the
/// projective tensor is well formed.
pub fn train_ratio_trace(
    ds: &LabeledTensorDataset,
    gamma: f64,
    l: &LinearTransform,
    opts: &TldaOptions,
) -> Result<TldaModel> {
    let (_, _, n3) = ds.data.dims();
    if gamma < 0.0 {
        return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
    }
    if ds.n_classes() < 2 {
        return Err(Error::invalid("training needs at least two classes"));
    }
    let transformed = l.forward(&ds.data)?;
    let weighting = opts.weighting();
    let count = slices_to_solve(l, n3);

    // First pass: scatters and between-scatter ranks for every solved slice.
    let scatters: Vec<_> = (0..count)
        .map(|p| {
            build_scatters(&transformed.frontal_slice(p), &ds.labels, weighting)
                .map_err(|e| e.at_slice(p))
        })
        .collect::<Result<_>>()?;
    let k = scatters
        .iter()
        .map(|s| hermitian_rank(&s.between).max(1))
        .min()
        .expect("at least one slice");

    let solved = solve_slices(count, opts.parallel, |p| {
        let eig = ratio_trace_gep(&scatters[p], gamma, RankSpec::Fixed(k))
            .map_err(|e| e.at_slice(p))?;
        Ok((
            normalize_column_phases(eig.vectors),
            SliceReport {
                slice: p,
                iterations: 1,
                rho: eig.values.iter().sum(),
                k,
                mirrored_from: None,
            },
        ))
    })?;
    assemble_model(ds, l, opts, k, Objective::RatioTrace, gamma, solved)
}

/// Project samples through a projector tensor: slice-wise
/// `(V~^(i))ᴴ X~^(i)` in the transform domain, then inverse transform.
/// Equivalent to `hermitian_transpose(V) *_L samples`.
fn project_with(
    projector: &Tensor3,
    l: &LinearTransform,
    samples: &Tensor3,
    imag_tol: f64,
) -> Result<Tensor3> {
    if samples.dims().0 != projector.dims().0 || samples.dims().2 != projector.dims().2 {
        return Err(Error::dims(format!(
            "samples {:?} do not match projector {:?}",
            samples.dims(),
            projector.dims()
        )));
    }
    let v_t = l.forward(projector)?;
    let x_t = l.forward(samples)?;
    let (_, m, n3) = x_t.dims();
    let k = projector.dims().1;
    let mut out = CTensor3::zeros(k, m, n3);
    for p in 0..n3 {
        let prod = v_t.frontal_slice(p).adjoint() * x_t.frontal_slice(p);
        out.set_frontal_slice(p, &prod);
    }
    l.inverse_real(&out, imag_tol)
}

impl TldaModel {
    pub fn projector(&self) -> &Tensor3 {
        &self.projector
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn transform(&self) -> &LinearTransform {
        &self.transform
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weight_between(&self) -> bool {
        self.weight_between
    }

    pub fn class_labels(&self) -> &[usize] {
        &self.class_labels
    }

    pub fn centroids_projected(&self) -> &[Tensor3] {
        &self.centroids_projected
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Project `n1 x m x n3` samples to `K x m x n3`.
    pub fn project(&self, samples: &Tensor3) -> Result<Tensor3> {
        project_with(&self.projector, &self.transform, samples, DEFAULT_IMAG_TOL)
    }

    /// Fold a fixed column-orthonormal preprocessing matrix `P` (`d x r`,
    /// e.g. a PCA basis) into a model trained on the reduced data, so the
    /// returned model projects raw `d`-dimensional samples directly. Only
    /// meaningful for matrix-shaped models (`n3 = 1`); projection values are
    /// unchanged because `(P V)ᵀ x = Vᵀ (Pᵀ x)`.
    pub fn compose_preprocessing(&self, p: &DMatrix<f64>) -> Result<TldaModel> {
        let (r, _, n3) = self.projector.dims();
        if n3 != 1 {
            return Err(Error::invalid(
                "preprocessing composition is defined for n3 = 1 models only",
            ));
        }
        if p.ncols() != r {
            return Err(Error::dims(format!(
                "preprocessing is {}x{} but the model expects {r} reduced dims",
                p.nrows(),
                p.ncols()
            )));
        }
        let composed = p * self.projector.frontal_slice(0);
        let mut projector = Tensor3::zeros(p.nrows(), self.k, 1);
        projector.set_frontal_slice(0, &composed);
        let mut out = self.clone();
        out.projector = projector;
        Ok(out)
    }

    /// Project a dataset into a labeled gallery.
    pub fn projected_gallery(&self, ds: &LabeledTensorDataset) -> Result<ProjectedGallery> {
        Ok(ProjectedGallery {
            data: self.project(ds.data())?,
            labels: ds.labels().to_vec(),
        })
    }

    /// Project raw probes and 1-NN classify them against the gallery.
    pub fn classify(
        &self,
        gallery: &ProjectedGallery,
        probes: &Tensor3,
        metric: DistanceMetric,
    ) -> Result<Classification> {
        let projected = self.project(probes)?;
        classify_projected(gallery, &projected, metric)
    }
}

/// Distance between projected samples (`K x 1 x n3` tensors).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMetric {
    /// Frobenius norm of the difference.
    Frobenius,
    /// Modified angle distance: negative mean, over the K projected
    /// components, of the cosine similarity between corresponding tube
    /// fibers. Zero-norm fibers contribute zero similarity. Reconstructed
    /// from the gait-identification literature; not defined in this crate's
    /// own terms beyond this formula.
    Mad,
}

impl DistanceMetric {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceMetric::Frobenius => "frobenius",
            DistanceMetric::Mad => "mad",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(DistanceMetric::Frobenius),
            "mad" => Ok(DistanceMetric::Mad),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }

    fn distance(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        match self {
            DistanceMetric::Frobenius => (a - b).norm(),
            DistanceMetric::Mad => {
                let k = a.nrows();
                let mut acc = 0.0;
                for r in 0..k {
                    let ar = a.row(r);
                    let br = b.row(r);
                    let na = ar.norm();
                    let nb = br.norm();
                    if na > 0.0 && nb > 0.0 {
                        acc += ar.dot(&br) / (na * nb);
                    }
                }
                -acc / k as f64
            }
        }
    }
}

/// Projected training samples plus their labels.
#[derive(Debug, Clone)]
pub struct ProjectedGallery {
    pub data: Tensor3,
    pub labels: Vec<usize>,
}

/// 1-NN output: one predicted label per probe, plus the distinct gallery
/// classes ranked by their best match distance (for CMC curves).
#[derive(Debug, Clone)]
pub struct Classification {
    pub predictions: Vec<usize>,
    pub ranked_classes: Vec<Vec<usize>>,
}

/// 1-NN over already-projected tensors.
pub fn classify_projected(
    gallery: &ProjectedGallery,
    probes: &Tensor3,
    metric: DistanceMetric,
) -> Result<Classification> {
    let (gk, g, gn3) = gallery.data.dims();
    let (pk, m, pn3) = probes.dims();
    if (gk, gn3) != (pk, pn3) {
        return Err(Error::dims(format!(
            "gallery projections are {gk}x..x{gn3} but probes are {pk}x..x{pn3}"
        )));
    }
    if gallery.labels.len() != g {
        return Err(Error::dims(format!(
            "gallery holds {g} samples but {} labels",
            gallery.labels.len()
        )));
    }
    let gallery_mats: Vec<DMatrix<f64>> = (0..g).map(|j| gallery.data.lateral_matrix(j)).collect();
    let mut predictions = Vec::with_capacity(m);
    let mut ranked_classes = Vec::with_capacity(m);
    for j in 0..m {
        let probe = probes.lateral_matrix(j);
        let mut order: Vec<(f64, usize)> = gallery_mats
            .iter()
            .enumerate()
            .map(|(i, gm)| (metric.distance(&probe, gm), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        predictions.push(gallery.labels[order[0].1]);
        let mut ranked = Vec::new();
        for &(_, i) in &order {
            let cls = gallery.labels[i];
            if !ranked.contains(&cls) {
                ranked.push(cls);
            }
        }
        ranked_classes.push(ranked);
    }
    Ok(Classification {
        predictions,
        ranked_classes,
    })
}

/// Classification quality report.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Fraction correct in [0, 1].
    pub accuracy: f64,
    /// Per-class accuracy; classes with no probes report 0.
    pub per_class_accuracy: Vec<f64>,
    /// `cmc[k-1]` = fraction of probes whose true class appears among the
    /// top-k distinct-class matches. Non-decreasing.
    pub cmc: Vec<f64>,
    /// `confusion[true-1][pred-1]` counts; row sums are per-class probe
    /// counts.
    pub confusion: Vec<Vec<usize>>,
    /// Wall-clock seconds per phase, filled by the harness.
    pub timings: Vec<(String, f64)>,
}

pub fn evaluate(
    predictions: &[usize],
    ranked_classes: &[Vec<usize>],
    true_labels: &[usize],
) -> Result<EvalReport> {
    let n = true_labels.len();
    if predictions.len() != n || ranked_classes.len() != n {
        return Err(Error::dims(format!(
            "lengths disagree: {} predictions, {} ranked lists, {n} labels",
            predictions.len(),
            ranked_classes.len()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let c = true_labels
        .iter()
        .chain(predictions.iter())
        .chain(ranked_classes.iter().flatten())
        .copied()
        .max()
        .unwrap_or(0);

    let mut confusion = vec![vec![0usize; c]; c];
    let mut correct = 0usize;
    for (&truth, &pred) in true_labels.iter().zip(predictions) {
        confusion[truth - 1][pred - 1] += 1;
        if truth == pred {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / n as f64;
    let per_class_accuracy = (0..c)
        .map(|t| {
            let total: usize = confusion[t].iter().sum();
            if total == 0 {
                0.0
            } else {
                confusion[t][t] as f64 / total as f64
            }
        })
        .collect();

    let max_rank = ranked_classes.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut cmc = vec![0.0; max_rank];
    for (&truth, ranked) in true_labels.iter().zip(ranked_classes) {
        if let Some(pos) = ranked.iter().position(|&cls| cls == truth) {
            for slot in cmc.iter_mut().skip(pos) {
                *slot += 1.0;
            }
        }
    }
    for slot in cmc.iter_mut() {
        *slot /= n as f64;
    }

    Ok(EvalReport {
        accuracy,
        per_class_accuracy,
        cmc,
        confusion,
        timings: Vec::new(),
    })
}

// --- model file format -----------------------------------------------------
//
// "TLDA" container: magic, version byte, objective byte, transform descriptor
// (kind byte + size; custom transforms embed their name and M so the model is
// self-contained), K, gamma, the weighting flag, dims, class labels, then the
// projector and the projected class centroids as embedded TNS3 blocks.

pub const TLDA_MAGIC: [u8; 4] = *b"TLDA";
pub const TLDA_VERSION: u8 = 1;

impl TldaModel {
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&TLDA_MAGIC)?;
        w.write_all(&[TLDA_VERSION])?;
        w.write_all(&[match self.objective {
            Objective::TraceRatio => 0u8,
            Objective::RatioTrace => 1u8,
        }])?;
        match self.transform.kind() {
            TransformKind::Dft => {
                w.write_all(&[0u8])?;
                w.write_all(&(self.transform.size() as u64).to_le_bytes())?;
            }
            TransformKind::Dct => {
                w.write_all(&[1u8])?;
                w.write_all(&(self.transform.size() as u64).to_le_bytes())?;
            }
            TransformKind::Custom(name) => {
                w.write_all(&[2u8])?;
                w.write_all(&(self.transform.size() as u64).to_le_bytes())?;
                let bytes = name.as_bytes();
                w.write_all(&(bytes.len() as u32).to_le_bytes())?;
                w.write_all(bytes)?;
                for v in self.transform.matrix().iter() {
                    w.write_all(&v.re.to_le_bytes())?;
                    w.write_all(&v.im.to_le_bytes())?;
                }
            }
        }
        w.write_all(&(self.k as u64).to_le_bytes())?;
        w.write_all(&self.gamma.to_le_bytes())?;
        w.write_all(&[self.weight_between as u8])?;
        let (n1, _, n3) = self.projector.dims();
        w.write_all(&(n1 as u64).to_le_bytes())?;
        w.write_all(&(n3 as u64).to_le_bytes())?;
        w.write_all(&(self.class_labels.len() as u64).to_le_bytes())?;
        for &l in &self.class_labels {
            w.write_all(&(l as u64).to_le_bytes())?;
        }
        write_tns3(w, &Tns3Payload::Real(self.projector.clone()))?;
        for c in &self.centroids_projected {
            write_tns3(w, &Tns3Payload::Real(c.clone()))?;
        }
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let mut head = [0u8; 5];
        r.read_exact(&mut head)
            .map_err(|_| Error::format(0, "model file too short"))?;
        if head[..4] != TLDA_MAGIC {
            return Err(Error::format(0, "bad magic, expected \"TLDA\""));
        }
        if head[4] != TLDA_VERSION {
            return Err(Error::format(4, format!("unsupported model version {}", head[4])));
        }
        let objective = match read_u8(r)? {
            0 => Objective::TraceRatio,
            1 => Objective::RatioTrace,
            other => return Err(Error::format(5, format!("unknown objective tag {other}"))),
        };
        let transform_tag = read_u8(r)?;
        let size = read_u64(r)? as usize;
        let transform = match transform_tag {
            0 => LinearTransform::dft(size)?,
            1 => LinearTransform::dct(size)?,
            2 => {
                let name_len = {
                    let mut b = [0u8; 4];
                    r.read_exact(&mut b)?;
                    u32::from_le_bytes(b) as usize
                };
                let mut name = vec![0u8; name_len];
                r.read_exact(&mut name)?;
                let name = String::from_utf8(name)
                    .map_err(|_| Error::format(0, "transform name is not UTF-8"))?;
                let mut entries = Vec::with_capacity(size * size);
                for _ in 0..size * size {
                    let re = read_f64(r)?;
                    let im = read_f64(r)?;
                    entries.push(Complex64::new(re, im));
                }
                let m = DMatrix::from_vec(size, size, entries);
                LinearTransform::custom(name, m)?
            }
            other => return Err(Error::format(6, format!("unknown transform tag {other}"))),
        };
        let k = read_u64(r)? as usize;
        let gamma = read_f64(r)?;
        let weight_between = read_u8(r)? != 0;
        let _n1 = read_u64(r)? as usize;
        let _n3 = read_u64(r)? as usize;
        let c = read_u64(r)? as usize;
        let mut class_labels = Vec::with_capacity(c);
        for _ in 0..c {
            class_labels.push(read_u64(r)? as usize);
        }
        let projector = read_tns3_real(r)?;
        let mut centroids_projected = Vec::with_capacity(c);
        for _ in 0..c {
            centroids_projected.push(read_tns3_real(r)?);
        }
        Ok(TldaModel {
            projector,
            k,
            transform,
            objective,
            gamma,
            weight_between,
            class_labels,
            centroids_projected,
            meta: TrainingMeta::default(),
        })
    }
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::discriminant::{
        build_scatters_real, hermitian_eigen_desc, principal_angles, principal_angles_real,
    };
    use crate::rng::DeterministicRng;
    use crate::testutil::rand_tensor;

    fn synthetic(seed: u64, classes: usize, per_class: usize, n1: usize, n3: usize) -> LabeledTensorDataset {
        let b = generate_synthetic(&SyntheticSpec {
            classes,
            per_class,
            n1,
            n3,
            separation: 4.0,
            noise: 0.5,
            seed,
        })
        .unwrap();
        LabeledTensorDataset::new(b.tensor, b.labels).unwrap()
    }

    #[test]
    fn centroids_basic_cases() {
        let mut t = Tensor3::zeros(2, 1, 2);
        t.set(0, 0, 0, 1.0);
        // Single sample: both centroids equal the sample. A lone class is
        // fine for centroid computation even though training rejects it.
        let ds = LabeledTensorDataset::new(t.clone(), vec![1]).unwrap();
        let (global, class) = compute_centroids(&ds);
        assert_eq!(global, t.lateral_slice(0));
        assert_eq!(class[0], t.lateral_slice(0));

        // Two samples a, -a in one class: zero centroid.
        let mut rng = DeterministicRng::seed(60);
        let a = rand_tensor(&mut rng, 3, 1, 2);
        let mut pair = Tensor3::zeros(3, 2, 2);
        pair.set_lateral_slice(0, &a);
        pair.set_lateral_slice(1, &a.scale(-1.0));
        let ds = LabeledTensorDataset::new(pair, vec![1, 1]).unwrap();
        let (global, class) = compute_centroids(&ds);
        assert!(global.frobenius_norm() < 1e-14);
        assert!(class[0].frobenius_norm() < 1e-14);
    }

    #[test]
    fn centroids_match_elementwise_means() {
        let ds = synthetic(61, 2, 5, 3, 2);
        let (global, _) = compute_centroids(&ds);
        for i in 0..3 {
            for k in 0..2 {
                let mean: f64 =
                    (0..10).map(|j| ds.data().get(i, j, k)).sum::<f64>() / 10.0;
                assert!((global.get(i, 0, k) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerates_to_matrix_lda_at_n3_one() {
        let ds = synthetic(62, 3, 8, 6, 1);
        let l = LinearTransform::dft(1).unwrap();
        let opts = TldaOptions::default();

        let model = train_trace_ratio(&ds, 2, &l, &opts).unwrap();
        let samples = ds.data().frontal_slice(0);
        let scatters =
            build_scatters_real(&samples, ds.labels(), BetweenWeighting::Uniform).unwrap();
        let direct = trace_ratio_newton(&scatters, 2, &TraceRatioOptions::default()).unwrap();
        let rho_model = model.meta().per_slice[0].rho;
        assert!((rho_model - direct.rho).abs() < 1e-8);
        let v_slice = model.projector().frontal_slice(0).map(|v| Complex64::new(v, 0.0));
        let angles = principal_angles(&v_slice, &direct.basis).unwrap();
        assert!(angles.iter().all(|&t| t < 1e-8));

        let model_rt = train_ratio_trace(&ds, 1e-6, &l, &opts).unwrap();
        let eig = ratio_trace_gep(&scatters, 1e-6, RankSpec::Fixed(model_rt.k())).unwrap();
        let v_slice = model_rt.projector().frontal_slice(0).map(|v| Complex64::new(v, 0.0));
        let angles = principal_angles(&v_slice, &eig.vectors).unwrap();
        assert!(angles.iter().all(|&t| t < 1e-8));
    }

    #[test]
    fn separable_classes_reach_full_training_accuracy() {
        // Two classes, centroid distance far beyond the noise.
        let b = generate_synthetic(&SyntheticSpec {
            classes: 2,
            per_class: 10,
            n1: 5,
            n3: 3,
            separation: 10.0,
            noise: 1.0,
            seed: 63,
        })
        .unwrap();
        let ds = LabeledTensorDataset::new(b.tensor, b.labels).unwrap();
        for l in [LinearTransform::dft(3).unwrap(), LinearTransform::dct(3).unwrap()] {
            let model = train_trace_ratio(&ds, 1, &l, &TldaOptions::default()).unwrap();
            let gallery = model.projected_gallery(&ds).unwrap();
            let result = model
                .classify(&gallery, ds.data(), DistanceMetric::Frobenius)
                .unwrap();
            let report = evaluate(&result.predictions, &result.ranked_classes, ds.labels()).unwrap();
            assert_eq!(report.accuracy, 1.0);
        }
    }

    #[test]
    fn duplicated_samples_leave_subspace_unchanged() {
        let ds = synthetic(64, 2, 6, 4, 2);
        let (n1, n, n3) = ds.data().dims();
        let mut doubled = Tensor3::zeros(n1, 2 * n, n3);
        let mut labels = Vec::new();
        for j in 0..n {
            doubled.set_lateral_slice(2 * j, &ds.data().lateral_slice(j));
            doubled.set_lateral_slice(2 * j + 1, &ds.data().lateral_slice(j));
            labels.push(ds.labels()[j]);
            labels.push(ds.labels()[j]);
        }
        let ds2 = LabeledTensorDataset::new(doubled, labels).unwrap();
        let l = LinearTransform::dft(2).unwrap();
        // Tight solver tolerance: the stopping rule fires at slightly
        // different iterations otherwise (all rho deltas halve), which leaves
        // an angle at the stopping-threshold scale rather than at the
        // fixed-point scale.
        let mut opts = TldaOptions::default();
        opts.newton.tol = 1e-13;
        let a = train_trace_ratio(&ds, 2, &l, &opts).unwrap();
        let b = train_trace_ratio(&ds2, 2, &l, &opts).unwrap();
        for p in 0..n3 {
            let angles = principal_angles_real(
                &a.projector().unfold(1).unwrap(),
                &b.projector().unfold(1).unwrap(),
            )
            .unwrap();
            assert!(angles.iter().all(|&t| t < 1e-8), "slice {p}: {angles:?}");
        }
    }

    #[test]
    fn dft_training_yields_real_projector() {
        for (seed, n3) in [(65u64, 2usize), (66, 3), (67, 4), (68, 5)] {
            let ds = synthetic(seed, 3, 6, 4, n3);
            let l = LinearTransform::dft(n3).unwrap();
            let model = train_trace_ratio(&ds, 2, &l, &TldaOptions::default()).unwrap();
            assert!(model.meta().imag_residual < 1e-8, "n3={n3}");
        }
    }

    #[test]
    fn slice_solve_order_is_immaterial() {
        let ds = synthetic(69, 2, 6, 4, 4);
        let l = LinearTransform::dct(4).unwrap();
        let serial = TldaOptions {
            parallel: false,
            ..TldaOptions::default()
        };
        let a = train_trace_ratio(&ds, 2, &l, &TldaOptions::default()).unwrap();
        let b = train_trace_ratio(&ds, 2, &l, &serial).unwrap();
        assert!(a.projector().max_abs_diff(b.projector()) < 1e-12);
    }

    #[test]
    fn projection_matches_l_product_oracle() {
        let ds = synthetic(70, 2, 5, 4, 3);
        let l = LinearTransform::dct(3).unwrap();
        let model = train_trace_ratio(&ds, 2, &l, &TldaOptions::default()).unwrap();
        let mut rng = DeterministicRng::seed(71);
        let sample = rand_tensor(&mut rng, 4, 2, 3);
        let direct = model.project(&sample).unwrap();
        let vt = l.hermitian_transpose(model.projector()).unwrap();
        let oracle = l.product(&vt, &sample).unwrap();
        assert!(direct.max_abs_diff(&oracle) < 1e-10);
    }

    #[test]
    fn projection_is_linear_and_kills_zero() {
        let ds = synthetic(72, 2, 5, 4, 3);
        let l = LinearTransform::dft(3).unwrap();
        let model = train_trace_ratio(&ds, 2, &l, &TldaOptions::default()).unwrap();
        let zero = Tensor3::zeros(4, 1, 3);
        assert!(model.project(&zero).unwrap().frobenius_norm() < 1e-14);
        let mut rng = DeterministicRng::seed(73);
        let a = rand_tensor(&mut rng, 4, 2, 3);
        let b = rand_tensor(&mut rng, 4, 2, 3);
        let (alpha, beta) = (1.3, -0.4);
        let combo = a.scale(alpha).add(&b.scale(beta)).unwrap();
        let lhs = model.project(&combo).unwrap();
        let rhs = model
            .project(&a)
            .unwrap()
            .scale(alpha)
            .add(&model.project(&b).unwrap().scale(beta))
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn projecting_projector_gives_identity_slices() {
        let ds = synthetic(74, 3, 6, 5, 2);
        let l = LinearTransform::dft(2).unwrap();
        let model = train_trace_ratio(&ds, 2, &l, &TldaOptions::default()).unwrap();
        let projected = model.project(model.projector()).unwrap();
        let f = l.forward(&projected).unwrap();
        for p in 0..2 {
            let diff = (f.frontal_slice(p) - DMatrix::<Complex64>::identity(2, 2))
                .map(|v| v.norm())
                .max();
            assert!(diff < 1e-8, "slice {p}");
        }
    }

    #[test]
    fn objective_value_consistent_with_transform_domain() {
        // The transform-domain objective (sum of per-slice scatter traces)
        // equals the sum over classes of the squared transform-domain norms
        // of the projected centroid differences.
        for l in [LinearTransform::dft(3).unwrap(), LinearTransform::dct(3).unwrap()] {
            let ds = synthetic(75, 3, 6, 4, 3);
            let opts = TldaOptions::default();
            let model = train_trace_ratio(&ds, 2, &l, &opts).unwrap();
            let x_t = l.forward(ds.data()).unwrap();
            let v_t = l.forward(model.projector()).unwrap();

            let mut num_traces = 0.0;
            let mut den_traces = 0.0;
            for p in 0..3 {
                let s = build_scatters(
                    &x_t.frontal_slice(p),
                    ds.labels(),
                    BetweenWeighting::Uniform,
                )
                .unwrap();
                let v = v_t.frontal_slice(p);
                num_traces += (v.adjoint() * &s.between * &v).trace().re;
                den_traces += (v.adjoint() * &s.within * &v).trace().re;
            }

            let (global, class) = compute_centroids(&ds);
            let mut num_norms = 0.0;
            for centroid in &class {
                let diff = centroid.sub(&global).unwrap();
                let projected = model.project(&diff).unwrap();
                num_norms += l.forward(&projected).unwrap().frobenius_norm().powi(2);
            }
            let mut den_norms = 0.0;
            for (cls, members) in ds.class_index().iter().enumerate() {
                for &j in members {
                    let dev = ds.sample(j).sub(&class[cls]).unwrap();
                    let projected = model.project(&dev).unwrap();
                    den_norms += l.forward(&projected).unwrap().frobenius_norm().powi(2);
                }
            }
            assert!(
                ((num_traces / den_traces) - (num_norms / den_norms)).abs() < 1e-8,
                "{:?}",
                l.kind()
            );
        }
    }

    #[test]
    fn ratio_trace_auto_rank_is_c_minus_one() {
        let ds = synthetic(76, 4, 8, 6, 2);
        let l = LinearTransform::dct(2).unwrap();
        let model = train_ratio_trace(&ds, 1e-4, &l, &TldaOptions::default()).unwrap();
        assert_eq!(model.k(), 3);
    }

    #[test]
    fn ratio_trace_large_gamma_approaches_between_eigenvectors() {
        let ds = synthetic(77, 3, 8, 5, 1);
        let l = LinearTransform::dft(1).unwrap();
        let model = train_ratio_trace(&ds, 1e8, &l, &TldaOptions::default()).unwrap();
        let scatters = build_scatters_real(
            &ds.data().frontal_slice(0),
            ds.labels(),
            BetweenWeighting::Uniform,
        )
        .unwrap();
        let (_, vectors) = hermitian_eigen_desc(&scatters.between);
        let top = vectors.columns(0, model.k()).into_owned();
        let v = model.projector().frontal_slice(0).map(|x| Complex64::new(x, 0.0));
        let angles = principal_angles(&v, &top).unwrap();
        assert!(angles.iter().all(|&t| t < 1e-4), "{angles:?}");
    }

    #[test]
    fn classify_exact_match_is_rank_one() {
        let ds = synthetic(78, 3, 5, 4, 2);
        let l = LinearTransform::dft(2).unwrap();
        let model = train_trace_ratio(&ds, 2, &l, &TldaOptions::default()).unwrap();
        let gallery = model.projected_gallery(&ds).unwrap();
        let probe = ds.sample(7);
        let result = model
            .classify(&gallery, &probe, DistanceMetric::Frobenius)
            .unwrap();
        assert_eq!(result.predictions[0], ds.labels()[7]);
        assert_eq!(result.ranked_classes[0][0], ds.labels()[7]);
    }

    #[test]
    fn classify_two_point_hand_case() {
        // Gallery at +u and -u (classes 1, 2); probe at 0.9u is class 1.
        let mut gallery_data = Tensor3::zeros(1, 2, 1);
        gallery_data.set(0, 0, 0, 1.0);
        gallery_data.set(0, 1, 0, -1.0);
        let gallery = ProjectedGallery {
            data: gallery_data,
            labels: vec![1, 2],
        };
        let mut probe = Tensor3::zeros(1, 1, 1);
        probe.set(0, 0, 0, 0.9);
        let r = classify_projected(&gallery, &probe, DistanceMetric::Frobenius).unwrap();
        assert_eq!(r.predictions, vec![1]);
    }

    #[test]
    fn mad_metric_favors_aligned_fibers() {
        // Probe parallel to gallery sample 1, anti-parallel to sample 2.
        let mut g = Tensor3::zeros(2, 2, 2);
        for k in 0..2 {
            for i in 0..2 {
                g.set(i, 0, k, (1 + i + k) as f64);
                g.set(i, 1, k, -((1 + i + k) as f64));
            }
        }
        let gallery = ProjectedGallery {
            data: g.clone(),
            labels: vec![1, 2],
        };
        let probe = {
            let mut t = Tensor3::zeros(2, 1, 2);
            for k in 0..2 {
                for i in 0..2 {
                    t.set(i, 0, k, 2.0 * (1 + i + k) as f64);
                }
            }
            t
        };
        let r = classify_projected(&gallery, &probe, DistanceMetric::Mad).unwrap();
        assert_eq!(r.predictions, vec![1]);
    }

    #[test]
    fn evaluate_all_correct_and_hand_cmc() {
        let preds = vec![1, 2, 3];
        let ranked = vec![vec![1, 2, 3], vec![2, 1, 3], vec![3, 1, 2]];
        let truth = vec![1, 2, 3];
        let r = evaluate(&preds, &ranked, &truth).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.cmc[0], 1.0);

        // Hand case: best ranks (1, 2, 5) over 5 gallery classes.
        let ranked = vec![
            vec![1, 2, 3, 4, 5],
            vec![3, 1, 2, 4, 5],
            vec![2, 3, 4, 5, 1],
        ];
        let truth = vec![1, 1, 1];
        let preds = vec![1, 3, 2];
        let r = evaluate(&preds, &ranked, &truth).unwrap();
        let expect = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0];
        assert_eq!(r.cmc.len(), 5);
        for (got, want) in r.cmc.iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        // Monotone, ends at 1.0.
        for w in r.cmc.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(*r.cmc.last().unwrap(), 1.0);
    }

    #[test]
    fn evaluate_random_predictions_near_chance() {
        let mut rng = DeterministicRng::seed(79);
        let c = 4;
        let n = 4000;
        let truth: Vec<usize> = (0..n).map(|_| rng.below(c) + 1).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.below(c) + 1).collect();
        let ranked: Vec<Vec<usize>> = preds.iter().map(|&p| vec![p]).collect();
        let r = evaluate(&preds, &ranked, &truth).unwrap();
        let p = 1.0 / c as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((r.accuracy - p).abs() < 3.0 * sigma, "{}", r.accuracy);
        // Confusion row sums are the per-class probe counts.
        for (cls, row) in r.confusion.iter().enumerate() {
            let count = truth.iter().filter(|&&t| t == cls + 1).count();
            assert_eq!(row.iter().sum::<usize>(), count);
        }
    }

    #[test]
    fn evaluate_rejects_length_mismatch() {
        assert!(evaluate(&[1], &[vec![1], vec![1]], &[1]).is_err());
    }

    #[test]
    fn label_permutation_invariance() {
        let ds = synthetic(80, 3, 6, 4, 2);
        let l = LinearTransform::dft(2).unwrap();
        let opts = TldaOptions::default();
        // Permutation ; 1 -> 2, 2 -> 3, 3 -> 1.
        let perm = |l: usize| l % 3 + 1;
        let permuted_labels: Vec<usize> = ds.labels().iter().map(|&l| perm(l)).collect();
        let ds_perm = LabeledTensorDataset::new(ds.data().clone(), permuted_labels).unwrap();

        let model = train_trace_ratio(&ds, 2, &l, &opts).unwrap();
        let model_perm = train_trace_ratio(&ds_perm, 2, &l, &opts).unwrap();

        let split: Vec<usize> = (0..ds.n_samples()).step_by(2).collect();
        let rest: Vec<usize> = (0..ds.n_samples()).filter(|i| i % 2 == 1).collect();
        let sub = |ds: &LabeledTensorDataset, idx: &[usize]| {
            let mut t = Tensor3::zeros(4, idx.len(), 2);
            let mut labels = Vec::new();
            for (d, &s) in idx.iter().enumerate() {
                t.set_lateral_slice(d, &ds.data().lateral_slice(s));
                labels.push(ds.labels()[s]);
            }
            LabeledTensorDataset::new(t, labels).unwrap()
        };
        let (train_a, test_a) = (sub(&ds, &split), sub(&ds, &rest));
        let (train_b, test_b) = (sub(&ds_perm, &split), sub(&ds_perm, &rest));

        let ga = model.projected_gallery(&train_a).unwrap();
        let ra = model
            .classify(&ga, test_a.data(), DistanceMetric::Frobenius)
            .unwrap();
        let ea = evaluate(&ra.predictions, &ra.ranked_classes, test_a.labels()).unwrap();

        let gb = model_perm.projected_gallery(&train_b).unwrap();
        let rb = model_perm
            .classify(&gb, test_b.data(), DistanceMetric::Frobenius)
            .unwrap();
        let eb = evaluate(&rb.predictions, &rb.ranked_classes, test_b.labels()).unwrap();

        assert!((ea.accuracy - eb.accuracy).abs() < 1e-12);
        assert_eq!(ea.cmc.len(), eb.cmc.len());
        for (x, y) in ea.cmc.iter().zip(&eb.cmc) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn model_save_load_round_trip() {
        let ds = synthetic(81, 3, 5, 4, 3);
        let l = LinearTransform::dct(3).unwrap();
        let model = train_trace_ratio(&ds, 2, &l, &TldaOptions::default()).unwrap();
        let mut bytes = Vec::new();
        model.save(&mut bytes).unwrap();
        let loaded = TldaModel::load(&mut bytes.as_slice()).unwrap();
        assert_eq!(loaded.k(), model.k());
        assert_eq!(loaded.projector(), model.projector());
        assert_eq!(loaded.centroids_projected().len(), 3);
        let mut bytes2 = Vec::new();
        loaded.save(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn model_load_rejects_garbage() {
        let mut bytes = Vec::new();
        let ds = synthetic(82, 2, 4, 3, 2);
        let l = LinearTransform::dft(2).unwrap();
        train_trace_ratio(&ds, 1, &l, &TldaOptions::default())
            .unwrap()
            .save(&mut bytes)
            .unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            TldaModel::load(&mut bytes.as_slice()),
            Err(Error::Format { .. })
        ));
        bytes[0] = b'T';
        bytes[4] = 99; // future version
        assert!(matches!(
            TldaModel::load(&mut bytes.as_slice()),
            Err(Error::Format { offset: 4, .. })
        ));
    }

    #[test]
    fn solver_failures_carry_the_slice_index() {
        // High dimension, few samples: every per-slice within scatter is
        // singular, so gamma = 0 fails and names the offending slice.
        let b = generate_synthetic(&SyntheticSpec {
            classes: 2,
            per_class: 3,
            n1: 12,
            n3: 2,
            separation: 2.0,
            noise: 1.0,
            seed: 84,
        })
        .unwrap();
        let ds = LabeledTensorDataset::new(b.tensor, b.labels).unwrap();
        let l = LinearTransform::dct(2).unwrap();
        match train_ratio_trace(&ds, 0.0, &l, &TldaOptions::default()) {
            Err(Error::Slice { slice, source }) => {
                assert!(slice < 2);
                assert!(matches!(*source, Error::Singular(_)));
            }
            other => panic!("expected a slice-annotated singular error, got {other:?}"),
        }
    }

    #[test]
    fn training_rejects_invalid_arguments() {
        let ds = synthetic(83, 2, 4, 3, 2);
        let l = LinearTransform::dft(2).unwrap();
        let opts = TldaOptions::default();
        assert!(train_trace_ratio(&ds, 0, &l, &opts).is_err());
        assert!(train_trace_ratio(&ds, 4, &l, &opts).is_err());
        assert!(train_ratio_trace(&ds, -1.0, &l, &opts).is_err());
        let wrong = LinearTransform::dft(3).unwrap();
        assert!(train_trace_ratio(&ds, 1, &wrong, &opts).is_err());
    }
}
