//! Alternating k-mode multilinear discriminant analysis baseline.
//!
//! Each sample is an order-N tensor; the method keeps one projective factor
//! per mode and sweeps over the modes, updating each factor by a trace-ratio
//! problem on the mode's scatter matrices while the other factors stay
//! fixed. Every update maximizes the same global objective (the trace ratio
//! of the fully projected data), so the objective is non-decreasing per
//! update; nothing stronger is claimed, these sweeps are a heuristic, not an
//! exact solver.
//!
//! Scatters are computed without materializing the Kronecker factor: the
//! fixed modes are projected by successive k-mode products and the deviation
//! is then unfolded. The materialized formula is used only as a test oracle.

use nalgebra::DMatrix;

use crate::discriminant::{class_index, trace_ratio_newton, ScatterPair, TraceRatioOptions};
use crate::error::{Error, Result};

/// Dense real tensor of arbitrary order. Generalizes the third-order layout:
/// mode 1 varies fastest in memory, unfoldings use the cyclic fiber ordering
/// (mode k+1 fastest, wrapping).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorN {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl TensorN {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::invalid(format!("bad tensor dims {dims:?}")));
        }
        let len = dims.iter().product();
        Ok(TensorN {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        if data.len() != t.data.len() {
            return Err(Error::dims(format!(
                "payload length {} does not match dims {dims:?}",
                data.len()
            )));
        }
        t.data = data;
        Ok(t)
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0usize; dims.len()];
        for flat in 0..t.data.len() {
            t.unflatten(flat, &mut idx);
            t.data[flat] = f(&idx);
        }
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn flatten(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        let mut stride = 1;
        for (m, &i) in idx.iter().enumerate() {
            flat += i * stride;
            stride *= self.dims[m];
        }
        flat
    }

    fn unflatten(&self, mut flat: usize, idx: &mut [usize]) {
        for (m, slot) in idx.iter_mut().enumerate() {
            *slot = flat % self.dims[m];
            flat /= self.dims[m];
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flatten(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let flat = self.flatten(idx);
        self.data[flat] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        TensorN {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::dims("tensor dims disagree".to_string()));
        }
        Ok(TensorN {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Cyclic order of the non-k modes: k+1, ..., N, 1, ..., k-1 (1-based
    /// mode labels, returned 0-based).
    fn cyclic_others(&self, mode: usize) -> Vec<usize> {
        let n = self.order();
        (1..n).map(|step| (mode - 1 + step) % n).collect()
    }

    /// Mode-k matricization (`mode` is 1-based).
    pub fn unfold(&self, mode: usize) -> Result<DMatrix<f64>> {
        let n = self.order();
        if mode == 0 || mode > n {
            return Err(Error::invalid(format!("mode {mode} out of 1..={n}")));
        }
        let others = self.cyclic_others(mode);
        let rows = self.dims[mode - 1];
        let cols: usize = others.iter().map(|&m| self.dims[m]).product();
        let mut out = DMatrix::<f64>::zeros(rows, cols.max(1));
        let mut idx = vec![0usize; n];
        for flat in 0..self.data.len() {
            self.unflatten(flat, &mut idx);
            let mut col = 0;
            let mut stride = 1;
            for &m in &others {
                col += idx[m] * stride;
                stride *= self.dims[m];
            }
            out[(idx[mode - 1], col)] = self.data[flat];
        }
        Ok(out)
    }

    pub fn fold(m: &DMatrix<f64>, mode: usize, dims: &[usize]) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let n = dims.len();
        if mode == 0 || mode > n {
            return Err(Error::invalid(format!("mode {mode} out of 1..={n}")));
        }
        let others = t.cyclic_others(mode);
        let rows = dims[mode - 1];
        let cols: usize = others.iter().map(|&m| dims[m]).product();
        if (m.nrows(), m.ncols()) != (rows, cols.max(1)) {
            return Err(Error::dims(format!(
                "matrix {}x{} cannot fold to {dims:?} along mode {mode}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut idx = vec![0usize; n];
        for flat in 0..t.data.len() {
            t.unflatten(flat, &mut idx);
            let mut col = 0;
            let mut stride = 1;
            for &mm in &others {
                col += idx[mm] * stride;
                stride *= dims[mm];
            }
            t.data[flat] = m[(idx[mode - 1], col)];
        }
        Ok(t)
    }

    /// k-mode product (`mode` 1-based): `unfold(result, mode) = u * unfold(self, mode)`.
    pub fn mode_product(&self, u: &DMatrix<f64>, mode: usize) -> Result<Self> {
        let n = self.order();
        if mode == 0 || mode > n {
            return Err(Error::invalid(format!("mode {mode} out of 1..={n}")));
        }
        if u.ncols() != self.dims[mode - 1] {
            return Err(Error::dims(format!(
                "matrix has {} columns but mode-{mode} dimension is {}",
                u.ncols(),
                self.dims[mode - 1]
            )));
        }
        let product = u * self.unfold(mode)?;
        let mut dims = self.dims.clone();
        dims[mode - 1] = u.nrows();
        Self::fold(&product, mode, &dims)
    }
}

/// Labeled collection of order-N samples with uniform dims.
#[derive(Debug, Clone)]
pub struct TensorDatasetN {
    samples: Vec<TensorN>,
    labels: Vec<usize>,
    class_index: Vec<Vec<usize>>,
}

impl TensorDatasetN {
    pub fn new(samples: Vec<TensorN>, labels: Vec<usize>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("no samples"));
        }
        if samples.len() != labels.len() {
            return Err(Error::dims(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        let dims = samples[0].dims().to_vec();
        if samples.iter().any(|s| s.dims() != dims) {
            return Err(Error::dims("samples have non-uniform dims".to_string()));
        }
        let class_index = class_index(&labels)?;
        Ok(TensorDatasetN {
            samples,
            labels,
            class_index,
        })
    }

    pub fn samples(&self) -> &[TensorN] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_dims(&self) -> &[usize] {
        self.samples[0].dims()
    }

    pub fn n_classes(&self) -> usize {
        self.class_index.len()
    }

    fn centroids(&self) -> (TensorN, Vec<TensorN>) {
        let dims = self.sample_dims().to_vec();
        let mut global = TensorN::zeros(&dims).unwrap();
        for s in &self.samples {
            global = global.add(s).unwrap();
        }
        let global = global.scale(1.0 / self.samples.len() as f64);
        let class = self
            .class_index
            .iter()
            .map(|members| {
                let mut acc = TensorN::zeros(&dims).unwrap();
                for &j in members {
                    acc = acc.add(&self.samples[j]).unwrap();
                }
                acc.scale(1.0 / members.len() as f64)
            })
            .collect();
        (global, class)
    }
}

/// Per-mode projective factors with the per-sweep objective trace.
#[derive(Debug, Clone)]
pub struct ModeProjectors {
    /// `factors[k]` is `n_k x m_k`, column-orthonormal.
    pub factors: Vec<DMatrix<f64>>,
    pub target_dims: Vec<usize>,
    pub outer_iterations: usize,
    /// Objective (trace ratio of the fully projected data) after each sweep.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MdaOptions {
    pub max_sweeps: usize,
    /// Stop when the relative objective change over a sweep drops below this.
    pub tol: f64,
    pub newton: TraceRatioOptions,
}

impl Default for MdaOptions {
    fn default() -> Self {
        MdaOptions {
            max_sweeps: 30,
            tol: 1e-6,
            newton: TraceRatioOptions::default(),
        }
    }
}

/// Deviation tensor projected along every mode but `mode` (1-based), then
/// unfolded at `mode`.
fn projected_unfolding(
    t: &TensorN,
    factors: &[DMatrix<f64>],
    mode: usize,
) -> Result<DMatrix<f64>> {
    let mut projected = t.clone();
    for (q, factor) in factors.iter().enumerate() {
        if q + 1 == mode {
            continue;
        }
        projected = projected.mode_product(&factor.transpose(), q + 1)?;
    }
    projected.unfold(mode)
}

/// Between/within scatter matrices along `mode` (1-based), all other modes
/// projected by the fixed factors. The between part carries the class-size
/// weights.
pub fn k_mode_scatters(
    ds: &TensorDatasetN,
    factors: &[DMatrix<f64>],
    mode: usize,
) -> Result<ScatterPair> {
    let order = ds.sample_dims().len();
    if factors.len() != order {
        return Err(Error::dims(format!(
            "{} factors for an order-{order} tensor",
            factors.len()
        )));
    }
    for (q, f) in factors.iter().enumerate() {
        if f.ncols() > f.nrows() || f.nrows() != ds.sample_dims()[q] {
            return Err(Error::dims(format!(
                "factor {} is {}x{}, expected {}xm with m <= {}",
                q + 1,
                f.nrows(),
                f.ncols(),
                ds.sample_dims()[q],
                ds.sample_dims()[q]
            )));
        }
    }
    if ds.n_classes() < 2 {
        return Err(Error::invalid("at least two classes are required"));
    }
    let d = ds.sample_dims()[mode - 1];
    let (global, class) = ds.centroids();
    let mut between = DMatrix::<f64>::zeros(d, d);
    let mut within = DMatrix::<f64>::zeros(d, d);
    for (cls, members) in ds.class_index.iter().enumerate() {
        let dev = class[cls].sub(&global)?;
        let u = projected_unfolding(&dev, factors, mode)?;
        between += members.len() as f64 * (&u * u.transpose());
        for &j in members {
            let dev = ds.samples[j].sub(&class[cls])?;
            let u = projected_unfolding(&dev, factors, mode)?;
            within += &u * u.transpose();
        }
    }
    ScatterPair::new(
        between.map(|v| num_complex::Complex64::new(v, 0.0)),
        within.map(|v| num_complex::Complex64::new(v, 0.0)),
    )
}

fn realize_basis(basis: DMatrix<num_complex::Complex64>) -> Result<DMatrix<f64>> {
    let normalized = crate::discriminant::normalize_column_phases(basis);
    let imag = normalized.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if imag > 1e-8 {
        return Err(Error::NumericalConsistency(format!(
            "imaginary residual {imag:.3e} in a real eigenbasis"
        )));
    }
    Ok(normalized.map(|v| v.re))
}

/// Alternating optimization: canonical-column initialization, ascending mode
/// order, each factor updated by the Newton trace-ratio solver on its mode
/// scatters. Stops when the relative objective change over a sweep falls
/// below `tol` or after `max_sweeps`.
pub fn alternating_mda(
    ds: &TensorDatasetN,
    target_dims: &[usize],
    opts: &MdaOptions,
) -> Result<ModeProjectors> {
    let dims = ds.sample_dims().to_vec();
    let order = dims.len();
    if target_dims.len() != order {
        return Err(Error::dims(format!(
            "{} target dims for an order-{order} tensor",
            target_dims.len()
        )));
    }
    for (q, (&m, &n)) in target_dims.iter().zip(&dims).enumerate() {
        if m == 0 || m > n {
            return Err(Error::invalid(format!(
                "target dim {m} for mode {} must be in 1..={n}",
                q + 1
            )));
        }
    }

    let mut factors: Vec<DMatrix<f64>> = dims
        .iter()
        .zip(target_dims)
        .map(|(&n, &m)| DMatrix::<f64>::identity(n, m))
        .collect();
    let mut objective_trace = Vec::new();
    let mut previous = f64::NEG_INFINITY;
    let mut sweeps = 0;

    for sweep in 0..opts.max_sweeps {
        sweeps = sweep + 1;
        let mut objective = previous;
        for mode in 1..=order {
            let scatters = k_mode_scatters(ds, &factors, mode)?;
            let state = trace_ratio_newton(&scatters, target_dims[mode - 1], &opts.newton)
                .map_err(|e| {
                    Error::invalid(format!("sweep {sweeps}, mode {mode}: {e}"))
                })?;
            factors[mode - 1] = realize_basis(state.basis)?;
            objective = state.rho;
        }
        objective_trace.push(objective);
        let reference = previous.abs().max(1.0);
        if previous.is_finite() && (objective - previous).abs() / reference < opts.tol {
            break;
        }
        previous = objective;
    }

    Ok(ModeProjectors {
        factors,
        target_dims: target_dims.to_vec(),
        outer_iterations: sweeps,
        objective_trace,
    })
}

/// Project an order-N sample through all factors: successive k-mode products
/// with the transposed factors. Mode order does not matter.
pub fn project_n(projectors: &ModeProjectors, sample: &TensorN) -> Result<TensorN> {
    let mut out = sample.clone();
    for (q, factor) in projectors.factors.iter().enumerate() {
        out = out.mode_product(&factor.transpose(), q + 1)?;
    }
    Ok(out)
}
