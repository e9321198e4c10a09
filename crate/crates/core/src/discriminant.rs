//! Scatter matrices and the two matrix-level discriminant solvers.
//!
//! Everything here works on Hermitian positive semi-definite scatter pairs in
//! complex arithmetic, which covers both real data (zero imaginary parts) and
//! the transform-domain slices produced under the DFT. Outer products and
//! projections use the conjugate transpose throughout so traces stay real and
//! nonnegative.
//!
//! The trace-ratio problem `max tr(Vᴴ S_B V) / tr(Vᴴ S_W V)` over orthonormal
//! `V` is solved by the Newton-style iteration that alternates a top-k
//! eigendecomposition of `S_B - rho S_W` with updates of `rho`; the inner
//! eigensolver is a dense Hermitian eigendecomposition, which is an
//! interchangeable component of the iteration. The ratio-trace problem is
//! solved in closed form through the regularized generalized eigenproblem
//! `(S_W + gamma I)^{-1} S_B`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Weight applied to each class term of the between scatter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetweenWeighting {
    /// `S_B = sum_j n_j (m_j - m)(m_j - m)ᴴ` — the classical LDA form.
    ClassSize,
    /// `S_B = sum_j (m_j - m)(m_j - m)ᴴ` — one term per class.
    Uniform,
}

/// A between/within scatter pair of matching dimension.
#[derive(Debug, Clone)]
pub struct ScatterPair {
    pub between: DMatrix<Complex64>,
    pub within: DMatrix<Complex64>,
}

impl ScatterPair {
    pub fn new(between: DMatrix<Complex64>, within: DMatrix<Complex64>) -> Result<Self> {
        if between.nrows() != between.ncols() || within.nrows() != within.ncols() {
            return Err(Error::dims("scatter matrices must be square"));
        }
        if between.nrows() != within.nrows() {
            return Err(Error::dims(format!(
                "scatter dimensions disagree: {} vs {}",
                between.nrows(),
                within.nrows()
            )));
        }
        Ok(ScatterPair { between, within })
    }

    pub fn dim(&self) -> usize {
        self.between.nrows()
    }
}

/// Validate labels (values `1..=c`, every class non-empty, at least two
/// classes) and return the per-class index lists.
pub fn class_index(labels: &[usize]) -> Result<Vec<Vec<usize>>> {
    if labels.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let c = *labels.iter().max().unwrap();
    if labels.contains(&0) {
        return Err(Error::invalid("class labels must start at 1"));
    }
    let mut index = vec![Vec::new(); c];
    for (i, &l) in labels.iter().enumerate() {
        index[l - 1].push(i);
    }
    if let Some(empty) = index.iter().position(|v| v.is_empty()) {
        return Err(Error::invalid(format!("class {} has no samples", empty + 1)));
    }
    Ok(index)
}

/// Between and within scatter matrices of labeled column vectors.
///
/// `samples` holds one observation per column; `labels[j]` is the class of
/// column `j`, with values in `1..=c`.
pub fn build_scatters(
    samples: &DMatrix<Complex64>,
    labels: &[usize],
    weighting: BetweenWeighting,
) -> Result<ScatterPair> {
    if samples.ncols() != labels.len() {
        return Err(Error::dims(format!(
            "{} samples but {} labels",
            samples.ncols(),
            labels.len()
        )));
    }
    let index = class_index(labels)?;
    if index.len() < 2 {
        return Err(Error::invalid(
            "at least two classes are required (the between scatter would be rank 0)",
        ));
    }
    let d = samples.nrows();
    let n = samples.ncols();

    let mut global = DVector::from_element(d, Complex64::new(0.0, 0.0));
    for j in 0..n {
        global += samples.column(j);
    }
    global /= Complex64::new(n as f64, 0.0);

    let mut between = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    let mut within = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for members in &index {
        let nj = members.len();
        let mut centroid = DVector::from_element(d, Complex64::new(0.0, 0.0));
        for &j in members {
            centroid += samples.column(j);
        }
        centroid /= Complex64::new(nj as f64, 0.0);

        let diff = &centroid - &global;
        let weight = match weighting {
            BetweenWeighting::ClassSize => nj as f64,
            BetweenWeighting::Uniform => 1.0,
        };
        between += (&diff * diff.adjoint()).map(|v| v * weight);

        for &j in members {
            let dev = samples.column(j) - &centroid;
            within += &dev * dev.adjoint();
        }
    }
    ScatterPair::new(between, within)
}

/// [`build_scatters`] for real data.
pub fn build_scatters_real(
    samples: &DMatrix<f64>,
    labels: &[usize],
    weighting: BetweenWeighting,
) -> Result<ScatterPair> {
    build_scatters(&samples.map(|v| Complex64::new(v, 0.0)), labels, weighting)
}

#[derive(Debug, Clone)]
pub struct TraceRatioOptions {
    /// Convergence threshold on `|delta rho|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TraceRatioOptions {
    fn default() -> Self {
        TraceRatioOptions {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Result of the Newton trace-ratio iteration.
#[derive(Debug, Clone)]
pub struct TraceRatioState {
    /// Final ratio `rho = tr(VᴴS_BV) / tr(VᴴS_WV)`.
    pub rho: f64,
    /// Column-orthonormal `d x k` basis.
    pub basis: DMatrix<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    /// `rho` after the initial guess and after every update; non-decreasing.
    pub rho_history: Vec<f64>,
}

fn trace_quotient(s: &ScatterPair, v: &DMatrix<Complex64>) -> Result<f64> {
    let num = (v.adjoint() * &s.between * v).trace().re;
    let den = (v.adjoint() * &s.within * v).trace().re;
    if den < 1e-12 {
        return Err(Error::Singular(format!(
            "within-scatter trace {den:.3e} vanishes on the current subspace; \
             add ridge jitter eps*I to S_W"
        )));
    }
    Ok(num / den)
}

/// Newton iteration for the trace-ratio problem: repeatedly take the top-k
/// eigenvectors of `S_B - rho S_W` and update `rho` until `|delta rho| < tol`
/// or `max_iter` is hit. The rho sequence is non-decreasing and the iteration
/// converges to the global optimum.
pub fn trace_ratio_newton(
    s: &ScatterPair,
    k: usize,
    opts: &TraceRatioOptions,
) -> Result<TraceRatioState> {
    let d = s.dim();
    if k == 0 || k > d {
        return Err(Error::invalid(format!(
            "target dimension {k} must be in 1..={d}"
        )));
    }

    // Deterministic start: the first k canonical basis vectors.
    let mut basis = DMatrix::<Complex64>::identity(d, k);
    let mut rho = trace_quotient(s, &basis)?;
    let mut history = vec![rho];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        let shifted = &s.between - s.within.map(|v| v * rho);
        let (_, vectors) = hermitian_eigen_desc(&shifted);
        basis = vectors.columns(0, k).into_owned();
        let next = trace_quotient(s, &basis)?;
        history.push(next);
        let delta = (next - rho).abs();
        rho = next;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(TraceRatioState {
        rho,
        basis,
        iterations,
        converged,
        rho_history: history,
    })
}

/// Eigenvalues (descending) with their eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// Number of directions to keep in [`ratio_trace_gep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSpec {
    /// Use the numerical rank of `S_B`.
    Auto,
    Fixed(usize),
}

/// Ratio-trace solution via the regularized generalized eigenproblem
/// `(S_W + gamma I)^{-1} S_B u = lambda u`.
///
/// The problem is symmetrized through the Cholesky factor of
/// `S_W + gamma I`, so eigenvalues are real and nonnegative up to rounding.
/// Returned eigenvectors are unit-norm, sorted by descending eigenvalue.
pub fn ratio_trace_gep(s: &ScatterPair, gamma: f64, k: RankSpec) -> Result<EigenPair> {
    let d = s.dim();
    if gamma < 0.0 {
        return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
    }
    if gamma == 0.0 {
        let (within_eigs, _) = hermitian_eigen_desc(&s.within);
        let smallest = within_eigs.last().copied().unwrap_or(0.0);
        let largest = within_eigs.first().copied().unwrap_or(0.0);
        if smallest <= d as f64 * f64::EPSILON * largest.max(1.0) {
            return Err(Error::Singular(format!(
                "S_W is singular at gamma = 0 (smallest eigenvalue {smallest:.3e}); \
                 use gamma > 0"
            )));
        }
    }
    let k = match k {
        RankSpec::Auto => hermitian_rank(&s.between).max(1),
        RankSpec::Fixed(k) => {
            if k == 0 || k > d {
                return Err(Error::invalid(format!(
                    "target dimension {k} must be in 1..={d}"
                )));
            }
            k
        }
    };

    let regularized = &s.within + DMatrix::from_diagonal_element(d, d, Complex64::new(gamma, 0.0));
    let chol = nalgebra::Cholesky::new(regularized).ok_or_else(|| {
        Error::Singular("S_W + gamma I is not positive definite".into())
    })?;
    let l = chol.l();

    // B = L^{-1} S_B L^{-H}, Hermitian with the generalized eigenvalues.
    let c = l
        .solve_lower_triangular(&s.between)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let b = l
        .solve_lower_triangular(&c.adjoint())
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?
        .adjoint();
    let b = (&b + b.adjoint()).map(|v| v * 0.5);

    let (values, y) = hermitian_eigen_desc(&b);
    // Back-substitute u = L^{-H} y and normalize each column.
    let u = l
        .adjoint()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let mut vectors = u.columns(0, k).into_owned();
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        }
    }
    Ok(EigenPair {
        values: values[..k].to_vec(),
        vectors,
    })
}

/// PCA preprocessing: the smallest orthonormal projection capturing at least
/// `var_fraction` of the total variance of the centered samples. Returns the
/// `d x r` projection and the projected samples `r x n`.
pub fn pca_reduce(samples: &DMatrix<f64>, var_fraction: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(var_fraction > 0.0 && var_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "variance fraction must be in (0, 1], got {var_fraction}"
        )));
    }
    let n = samples.ncols();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least 2 samples"));
    }
    let d = samples.nrows();
    let mean = samples.column_mean();
    let mut centered = samples.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let svd = centered.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let total: f64 = svd.singular_values.iter().map(|v| v * v).sum();
    let mut r = 1;
    if total > 0.0 {
        let mut acc = 0.0;
        for (count, &idx) in order.iter().enumerate() {
            acc += svd.singular_values[idx] * svd.singular_values[idx];
            if acc >= var_fraction * total {
                r = count + 1;
                break;
            }
            r = count + 1;
        }
    }
    let mut projection = DMatrix::<f64>::zeros(d, r);
    for (c, &idx) in order.iter().take(r).enumerate() {
        projection.set_column(c, &u.column(idx));
    }
    let projected = projection.transpose() * samples;
    Ok((projection, projected))
}

/// Principal angles (radians, ascending) between the column spans of `a` and
/// `b`. Cosines come from the singular values of `Q_aᴴ Q_b`; angles whose
/// cosine is close to 1 are recomputed from the sine form
/// `sin(theta_i) = sigma_i((I - Q_a Q_aᴴ) Q_b)`, which stays accurate down to
/// machine precision where `acos` loses half the digits.
pub fn principal_angles(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::dims(format!(
            "subspaces live in different dimensions: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    let cross = qa.adjoint() * &qb;
    let mut cosines: Vec<f64> = cross.clone().svd(false, false).singular_values.iter().copied().collect();
    cosines.sort_by(|x, y| y.total_cmp(x));

    let residual = &qb - &qa * cross;
    let mut sines: Vec<f64> = residual.svd(false, false).singular_values.iter().copied().collect();
    sines.sort_by(|x, y| x.total_cmp(y));

    Ok(cosines
        .into_iter()
        .zip(sines)
        .map(|(c, s)| {
            if c * c > 0.5 {
                s.clamp(-1.0, 1.0).asin()
            } else {
                c.clamp(-1.0, 1.0).acos()
            }
        })
        .collect())
}

pub fn principal_angles_real(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    principal_angles(
        &a.map(|v| Complex64::new(v, 0.0)),
        &b.map(|v| Complex64::new(v, 0.0)),
    )
}

fn orthonormalize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let qr = m.clone().qr();
    qr.q()
}

/// Deterministic eigenvector phases: rotate each column so its
/// largest-magnitude entry (lowest index on ties) is real positive.
pub(crate) fn normalize_column_phases(mut m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_mag = 0.0;
        for (i, v) in col.iter().enumerate() {
            let mag = v.norm();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        if best_mag > 0.0 {
            let correction = (col[best] / Complex64::new(best_mag, 0.0)).conj();
            for v in col.iter_mut() {
                *v *= correction;
            }
        }
    }
    m
}

/// Hermitian eigendecomposition with eigenvalues sorted descending;
/// degenerate ties break by ascending original index.
pub fn hermitian_eigen_desc(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let se = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_element(m.nrows(), m.ncols(), Complex64::new(0.0, 0.0));
    for (c, &idx) in order.iter().enumerate() {
        vectors.set_column(c, &se.eigenvectors.column(idx));
    }
    (values, vectors)
}

/// Numerical rank: singular values above `d * machine_eps * sigma_max`.
pub fn hermitian_rank(m: &DMatrix<Complex64>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return 0;
    }
    let threshold = m.nrows() as f64 * f64::EPSILON * smax;
    svd.singular_values.iter().filter(|&&s| s > threshold).count()
}
