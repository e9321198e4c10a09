//! Dataset ingestion, synthetic data, train/test splits and folds.
//!
//! Datasets are a real tensor (`n1 x n x n3`, one sample per lateral slice)
//! plus integer labels in `1..=c`. On disk the tensor is a TNS3 file and the
//! labels travel in a sidecar CSV named by swapping the extension for
//! `labels.csv` (`data.tns3` -> `data.labels.csv`), with an `index,label`
//! header, 0-based contiguous indices, UTF-8 and LF line endings.
//!
//! Fourth-order sources (images x modalities x samples) are expected to be
//! flattened to `n1 = pixel count`, `n3 = modality count` before they reach
//! this crate; that convention is this repository's, chosen because it makes
//! every sample an `n1 x 1 x n3` lateral slice.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::DeterministicRng;
use crate::tensor::{read_tns3_real, write_tns3, Tensor3, Tns3Payload};

#[derive(Debug, Clone, Default)]
pub struct DatasetMeta {
    pub name: String,
    pub classes: usize,
    pub provenance: String,
}

#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub tensor: Tensor3,
    pub labels: Vec<usize>,
    pub meta: DatasetMeta,
}

impl DatasetBundle {
    pub fn new(tensor: Tensor3, labels: Vec<usize>, meta: DatasetMeta) -> Result<Self> {
        if tensor.dims().1 != labels.len() {
            return Err(Error::dims(format!(
                "tensor holds {} samples but {} labels were given",
                tensor.dims().1,
                labels.len()
            )));
        }
        if labels.contains(&0) {
            return Err(Error::invalid("labels must start at 1"));
        }
        Ok(DatasetBundle { tensor, labels, meta })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Restrict to the given sample indices (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<DatasetBundle> {
        let (n1, n, n3) = self.tensor.dims();
        if indices.iter().any(|&i| i >= n) {
            return Err(Error::invalid("subset index out of range"));
        }
        let mut tensor = Tensor3::zeros(n1, indices.len().max(1), n3);
        if indices.is_empty() {
            return Err(Error::invalid("subset must not be empty"));
        }
        for (dst, &src) in indices.iter().enumerate() {
            tensor.set_lateral_slice(dst, &self.tensor.lateral_slice(src));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        DatasetBundle::new(tensor, labels, self.meta.clone())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub n1: usize,
    pub n3: usize,
    /// Scale of the zero-mean Gaussian the class centroids are drawn from.
    pub separation: f64,
    /// Scale of the per-sample Gaussian noise around the centroid.
    pub noise: f64,
    pub seed: u64,
}

/// Gaussian blobs in tensor form: one centroid per class drawn once, samples
/// are centroid + noise. Deterministic under the seed; the draw order is
/// fixed (all centroids first, then samples class by class).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    if spec.classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if spec.per_class < 1 {
        return Err(Error::invalid("need at least 1 sample per class"));
    }
    if spec.n1 == 0 || spec.n3 == 0 {
        return Err(Error::invalid("tensor dimensions must be positive"));
    }
    let mut rng = DeterministicRng::seed(spec.seed);
    let mut centroids = Vec::with_capacity(spec.classes);
    for _ in 0..spec.classes {
        centroids.push(Tensor3::from_fn(spec.n1, 1, spec.n3, |_, _, _| {
            spec.separation * rng.normal()
        }));
    }
    let n = spec.classes * spec.per_class;
    let mut tensor = Tensor3::zeros(spec.n1, n, spec.n3);
    let mut labels = Vec::with_capacity(n);
    for (cls, centroid) in centroids.iter().enumerate() {
        for s in 0..spec.per_class {
            let sample = Tensor3::from_fn(spec.n1, 1, spec.n3, |i, _, k| {
                centroid.get(i, 0, k) + spec.noise * rng.normal()
            });
            tensor.set_lateral_slice(cls * spec.per_class + s, &sample);
            labels.push(cls + 1);
        }
    }
    DatasetBundle::new(
        tensor,
        labels,
        DatasetMeta {
            name: "synthetic".into(),
            classes: spec.classes,
            provenance: format!(
                "synthetic(c={}, per_class={}, n1={}, n3={}, separation={}, noise={}, seed={})",
                spec.classes, spec.per_class, spec.n1, spec.n3, spec.separation, spec.noise,
                spec.seed
            ),
        },
    )
}

/// Sidecar path for the labels CSV: extension replaced by `labels.csv`.
pub fn labels_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("labels.csv")
}

/// Write the tensor as TNS3 and the labels to the sidecar CSV.
pub fn save_bundle(path: &Path, bundle: &DatasetBundle) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tns3(&mut w, &Tns3Payload::Real(bundle.tensor.clone()))?;
    w.flush()?;
    let mut lw = BufWriter::new(File::create(labels_sidecar_path(path))?);
    lw.write_all(b"index,label\n")?;
    for (i, l) in bundle.labels.iter().enumerate() {
        lw.write_all(format!("{i},{l}\n").as_bytes())?;
    }
    lw.flush()?;
    Ok(())
}

/// Read a TNS3 tensor plus its labels sidecar.
pub fn load_bundle(path: &Path) -> Result<DatasetBundle> {
    let mut r = BufReader::new(File::open(path)?);
    let tensor = read_tns3_real(&mut r)?;
    let labels = read_labels(&labels_sidecar_path(path), tensor.dims().1)?;
    let classes = labels.iter().copied().max().unwrap_or(0);
    DatasetBundle::new(
        tensor,
        labels,
        DatasetMeta {
            name: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            classes,
            provenance: path.display().to_string(),
        },
    )
}

fn read_labels(path: &Path, expect: usize) -> Result<Vec<usize>> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if lineno == 0 {
            if line != "index,label" {
                return Err(Error::invalid(format!(
                    "labels file must start with 'index,label', got '{line}'"
                )));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (idx_str, label_str) = line.split_once(',').ok_or_else(|| {
            Error::invalid(format!("labels line {} is not 'index,label'", lineno + 1))
        })?;
        let idx: usize = idx_str
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad sample index '{idx_str}'")))?;
        let label: usize = label_str
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad label '{label_str}'")))?;
        if idx != labels.len() {
            return Err(Error::invalid(format!(
                "sample indices must be contiguous from 0: expected {}, found {idx}",
                labels.len()
            )));
        }
        if label == 0 {
            return Err(Error::invalid("labels must start at 1"));
        }
        labels.push(label);
    }
    if labels.len() != expect {
        return Err(Error::invalid(format!(
            "labels file has {} entries but the tensor holds {expect} samples",
            labels.len()
        )));
    }
    Ok(labels)
}

/// A train/test partition of sample indices.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    fn check(&self) {
        debug_assert!(self.train.iter().all(|i| !self.test.contains(i)));
    }
}

/// Stratified train/test split: each class contributes `round(frac * n_j)`
/// training samples (kept within 1..n_j-1 when the class has at least two),
/// so per-class proportions are preserved within one sample.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> Result<SplitSpec> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let index = crate::discriminant::class_index(labels)?;
    let mut rng = DeterministicRng::seed(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in &index {
        let mut order = members.clone();
        rng.shuffle(&mut order);
        let nj = order.len();
        let mut take = (train_fraction * nj as f64).round() as usize;
        if nj >= 2 {
            take = take.clamp(1, nj - 1);
        } else {
            take = 1;
        }
        train.extend_from_slice(&order[..take]);
        test.extend_from_slice(&order[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    let spec = SplitSpec {
        train,
        test,
        seed,
        stratified: true,
    };
    spec.check();
    Ok(spec)
}

/// k-fold cross-validation splits. Fold test sets partition `0..n`; under
/// stratification every class is dealt round-robin, keeping per-class counts
/// within one across folds.
pub fn make_folds(
    labels: &[usize],
    k: usize,
    stratified: bool,
    seed: u64,
) -> Result<Vec<SplitSpec>> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::invalid(format!(
            "fold count {k} must be between 2 and the sample count {n}"
        )));
    }
    let mut rng = DeterministicRng::seed(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    if stratified {
        let index = crate::discriminant::class_index(labels)?;
        for (cls, members) in index.iter().enumerate() {
            if members.len() < k {
                return Err(Error::invalid(format!(
                    "class {} has only {} samples, fewer than {k} folds; use fewer folds",
                    cls + 1,
                    members.len()
                )));
            }
            let mut order = members.clone();
            rng.shuffle(&mut order);
            for (pos, idx) in order.into_iter().enumerate() {
                folds[pos % k].push(idx);
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        for (pos, idx) in order.into_iter().enumerate() {
            folds[pos % k].push(idx);
        }
    }
    Ok(folds
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let train = (0..n).filter(|i| !test.contains(i)).collect();
            let spec = SplitSpec {
                train,
                test,
                seed,
                stratified,
            };
            spec.check();
            spec
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            classes: 3,
            per_class: 5,
            n1: 4,
            n3: 2,
            separation: 2.0,
            noise: 0.5,
            seed,
        }
    }

    #[test]
    fn synthetic_zero_noise_collapses_to_centroids() {
        let mut s = spec(1);
        s.noise = 0.0;
        let b = generate_synthetic(&s).unwrap();
        for cls in 0..3 {
            let first = b.tensor.lateral_slice(cls * 5);
            for i in 1..5 {
                let other = b.tensor.lateral_slice(cls * 5 + i);
                assert_eq!(first, other);
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(&spec(9)).unwrap();
        let b = generate_synthetic(&spec(9)).unwrap();
        assert_eq!(a.tensor, b.tensor);
        assert_eq!(a.labels, b.labels);
        let c = generate_synthetic(&spec(10)).unwrap();
        assert_ne!(a.tensor, c.tensor);
    }

    #[test]
    fn synthetic_rejects_degenerate_specs() {
        let mut s = spec(1);
        s.classes = 1;
        assert!(generate_synthetic(&s).is_err());
        let mut s = spec(1);
        s.per_class = 0;
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn synthetic_is_separable_enough_for_raw_nearest_neighbor() {
        // Sanity floor for the projected-space experiments: with
        // separation = noise = 5 the raw-space 1-NN already clears 90%.
        let b = generate_synthetic(&SyntheticSpec {
            classes: 4,
            per_class: 50,
            n1: 16,
            n3: 4,
            separation: 5.0,
            noise: 5.0,
            seed: 1,
        })
        .unwrap();
        let split = stratified_split(&b.labels, 0.7, 2).unwrap();
        let flat = |j: usize| -> Vec<f64> {
            let m = b.tensor.lateral_matrix(j);
            m.iter().copied().collect()
        };
        let mut correct = 0;
        for &probe in &split.test {
            let p = flat(probe);
            let mut best = (f64::INFINITY, usize::MAX);
            for &g in &split.train {
                let q = flat(g);
                let d: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, g);
                }
            }
            if b.labels[best.1] == b.labels[probe] {
                correct += 1;
            }
        }
        let acc = correct as f64 / split.test.len() as f64;
        assert!(acc >= 0.9, "raw 1-NN accuracy {acc}");
    }

    #[test]
    fn bundle_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tns3");
        let b = generate_synthetic(&spec(3)).unwrap();
        save_bundle(&path, &b).unwrap();
        let loaded = load_bundle(&path).unwrap();
        assert_eq!(loaded.tensor, b.tensor);
        assert_eq!(loaded.labels, b.labels);

        let bytes1 = std::fs::read(&path).unwrap();
        save_bundle(&path, &loaded).unwrap();
        let bytes2 = std::fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn truncated_tensor_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tns3");
        let b = generate_synthetic(&spec(4)).unwrap();
        save_bundle(&path, &b).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_bundle(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn labels_gap_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tns3");
        let b = generate_synthetic(&spec(5)).unwrap();
        save_bundle(&path, &b).unwrap();
        // Corrupt the sidecar: skip index 1.
        let sidecar = labels_sidecar_path(&path);
        let mut text = String::from("index,label\n0,1\n");
        for i in 2..b.n_samples() + 1 {
            text.push_str(&format!("{i},1\n"));
        }
        std::fs::write(&sidecar, text).unwrap();
        match load_bundle(&path) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("contiguous")),
            other => panic!("expected contiguity error, got {other:?}"),
        }
    }

    #[test]
    fn stratified_split_preserves_proportions() {
        // 2 classes of 6 and 4 samples, 70/30.
        let labels: Vec<usize> = [vec![1usize; 6], vec![2usize; 4]].concat();
        let s = stratified_split(&labels, 0.7, 11).unwrap();
        let train_c1 = s.train.iter().filter(|&&i| labels[i] == 1).count();
        let train_c2 = s.train.iter().filter(|&&i| labels[i] == 2).count();
        assert_eq!(train_c1, 4); // round(0.7*6)
        assert_eq!(train_c2, 3); // round(0.7*4)
        assert_eq!(s.train.len() + s.test.len(), 10);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn folds_partition_and_cover() {
        let labels = vec![1usize; 6].into_iter().chain(vec![2; 4]).collect::<Vec<_>>();
        let folds = make_folds(&labels, 2, true, 3).unwrap();
        assert_eq!(folds.len(), 2);
        // Each fold test set: 3 of class 1 + 2 of class 2.
        for f in &folds {
            assert_eq!(f.test.iter().filter(|&&i| labels[i] == 1).count(), 3);
            assert_eq!(f.test.iter().filter(|&&i| labels[i] == 2).count(), 2);
        }
        let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.test.iter().copied()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn folds_simple_partition() {
        let labels = vec![1usize; 5].into_iter().chain(vec![2; 5]).collect::<Vec<_>>();
        let folds = make_folds(&labels, 5, false, 8).unwrap();
        for f in &folds {
            assert_eq!(f.test.len(), 2);
        }
        let a = make_folds(&labels, 5, false, 8).unwrap();
        for (x, y) in folds.iter().zip(&a) {
            assert_eq!(x.test, y.test);
        }
    }

    #[test]
    fn folds_reject_small_classes_under_stratification() {
        let labels = vec![1, 1, 1, 2];
        match make_folds(&labels, 3, true, 0) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("fewer folds")),
            other => panic!("expected error, got {other:?}"),
        }
    }
}
