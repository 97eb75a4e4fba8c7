//! Dense linear-algebra building blocks shared by every other module.
//!
//! Conventions, fixed here once and relied on everywhere:
//! * samples are rows, features are columns;
//! * covariance uses the 1/N population normalization;
//! * eigenpairs and singular triplets are sorted by non-increasing value;
//! * eigenvector signs are fixed so that the entry of largest magnitude is
//!   positive, ties broken by the smallest row index.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A validated sample matrix: rows are samples, columns are features.
///
/// Entries are finite and both dimensions are at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    /// Wraps a matrix, validating shape and finiteness.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyInput("data matrix must be at least 1x1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self { values })
    }

    /// Builds from row slices; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("no rows".into()));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("rows have unequal lengths".into()));
        }
        let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Self::new(m)
    }

    /// Number of samples (rows).
    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    /// Feature dimension (columns).
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Sample `i` as a column vector.
    pub fn row_vector(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    /// Sub-matrix restricted to the given sample indices, preserving order.
    pub fn select_rows(&self, indices: &[usize]) -> DataMatrix {
        let m = DMatrix::from_fn(indices.len(), self.dim(), |i, j| {
            self.values[(indices[i], j)]
        });
        DataMatrix { values: m }
    }
}

/// Eigendecomposition of a symmetric matrix with the crate's ordering and
/// sign conventions applied.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    /// Eigenvalues, sorted non-increasing.
    pub eigenvalues: DVector<f64>,
    /// Column `l` is the unit eigenvector for `eigenvalues[l]`.
    pub eigenvectors: DMatrix<f64>,
}

/// Removes column means. Returns the centered data and the mean vector.
pub fn center(data: &DataMatrix) -> (DataMatrix, DVector<f64>) {
    let n = data.n_samples();
    let d = data.dim();
    let mut mean = DVector::zeros(d);
    for j in 0..d {
        mean[j] = data.values.column(j).sum() / n as f64;
    }
    let mut centered = data.values.clone();
    for i in 0..n {
        for j in 0..d {
            centered[(i, j)] -= mean[j];
        }
    }
    (DataMatrix { values: centered }, mean)
}

/// Population cross-covariance `(1/N) A^T B` of two centered, row-aligned
/// sample matrices.
pub fn covariance(a: &DataMatrix, b: &DataMatrix) -> Result<DMatrix<f64>> {
    if a.n_samples() != b.n_samples() {
        return Err(Error::SampleCountMismatch {
            left: a.n_samples(),
            right: b.n_samples(),
        });
    }
    let n = a.n_samples() as f64;
    Ok(a.values.transpose() * &b.values / n)
}

fn max_asymmetry(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(s: &DMatrix<f64>, rel: f64) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = rel * scale;
    let max_asym = max_asymmetry(s);
    if max_asym > tol {
        return Err(Error::NotSymmetric { max_asym, tol });
    }
    Ok(())
}

/// Flips each column so its largest-magnitude entry is positive; ties are
/// broken by the smallest row index.
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let mut best_row = 0usize;
        let mut best_abs = f64::NEG_INFINITY;
        for i in 0..m.nrows() {
            let a = m[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best_row = i;
            }
        }
        if m[(best_row, j)] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Full eigendecomposition of a symmetric matrix, sorted and sign-fixed.
///
/// Fails with [`Error::NotSymmetric`] if the asymmetry exceeds `1e-8`
/// relative to the largest entry magnitude (floored at 1).
pub fn sym_eigen(s: &DMatrix<f64>) -> Result<SymmetricSpectrum> {
    check_symmetric(s, 1e-8)?;
    // Work on the exactly symmetric average so roundoff asymmetry cannot
    // leak into the solver.
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
            .then(a.cmp(&b))
    });
    let eigenvalues = DVector::from_fn(n, |l, _| eig.eigenvalues[order[l]]);
    let mut eigenvectors = DMatrix::from_fn(n, n, |i, l| eig.eigenvectors[(i, order[l])]);
    fix_column_signs(&mut eigenvectors);
    Ok(SymmetricSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Truncated inverse square root of a symmetric PSD matrix.
///
/// Eigenvalues below `rel_tol * λ_max` are dropped; the returned matrix is
/// `V_kept diag(λ^-1/2) V_kept^T` together with the kept rank. Multiplying
/// `R S R` reproduces the orthogonal projector onto the kept subspace.
pub fn inv_sqrt_truncated(s: &DMatrix<f64>, rel_tol: f64) -> Result<(DMatrix<f64>, usize)> {
    let spec = sym_eigen(s)?;
    let lambda_max = spec.eigenvalues[0];
    if lambda_max <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let threshold = rel_tol * lambda_max;
    let rank = spec
        .eigenvalues
        .iter()
        .take_while(|&&l| l >= threshold && l > 0.0)
        .count();
    if rank == 0 {
        return Err(Error::ZeroMatrix);
    }
    let n = s.nrows();
    let mut r = DMatrix::zeros(n, n);
    for l in 0..rank {
        let w = 1.0 / spec.eigenvalues[l].sqrt();
        let v = spec.eigenvectors.column(l);
        // r += w * v v^T
        for i in 0..n {
            let vi = v[i] * w;
            for j in 0..n {
                r[(i, j)] += vi * v[j];
            }
        }
    }
    Ok((r, rank))
}

/// Thin SVD `M = U diag(s) V^T` with singular values sorted non-increasing.
///
/// `U` is `nrows x k`, `V` is `ncols x k` with `k = min(nrows, ncols)`.
pub fn thin_svd_sorted(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("U requested");
    let vt = svd.v_t.expect("V^T requested");
    let s = svd.singular_values;
    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        s[b].partial_cmp(&s[a])
            .expect("finite singular values")
            .then(a.cmp(&b))
    });
    let singular = DVector::from_fn(k, |l, _| s[order[l]]);
    let u_sorted = DMatrix::from_fn(u.nrows(), k, |i, l| u[(i, order[l])]);
    let v_sorted = DMatrix::from_fn(vt.ncols(), k, |i, l| vt[(order[l], i)]);
    (u_sorted, singular, v_sorted)
}

/// Median of a slice; even lengths average the two central values.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Pearson correlation of two equal-length series.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "series lengths differ");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}
