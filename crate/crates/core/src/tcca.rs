//! Tensor CCA: generalized canonical directions for K observation sets.
//!
//! The order-K covariance tensor `C = (1/N) Σ_i x_i^(1) ⊗ … ⊗ x_i^(K)` is
//! whitened by per-set inverse covariance square roots and approximated by
//! a rank-1 tensor `ρ · p^(1) ⊗ … ⊗ p^(K)` via alternating least squares.
//! The whitened directions map back to one generalized canonical direction
//! per set; freezing those directions at every sample yields an anchored
//! metric whose landmark diffusion embedding recovers a scalar common
//! variable shared by all K sets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::diffusion::{embed, gaussian_kernel, normalize_landmark, DiffusionEmbedding};
use crate::error::{Error, Result};
use crate::metric::{neighborhood, MetricKind, MetricMatrix, NeighborhoodQuery, NeighborhoodSpec};
use crate::numerics::{center, covariance, inv_sqrt_truncated, thin_svd_sorted, DataMatrix};

/// Dense multi-way array in row-major layout (last index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    /// Wraps raw values; `dims` must multiply to the value count and all
    /// entries must be finite.
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::EmptyInput("tensor dimensions".into()));
        }
        let expect: usize = dims.iter().product();
        if expect != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims {:?} imply {} values, got {}",
                dims,
                expect,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len: usize = dims.iter().product();
        Self::new(dims, vec![0.0; len])
    }

    /// An order-1 tensor holding a vector.
    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        Self::new(vec![v.len()], v.iter().copied().collect())
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut lin = 0;
        for (i, &d) in idx.iter().zip(&self.dims) {
            debug_assert!(*i < d);
            lin = lin * d + i;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let lin = self.linear_index(idx);
        self.values[lin] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Strides around a mode: (blocks before it, its extent, contiguous
    /// run after it).
    fn mode_strides(&self, mode: usize) -> (usize, usize, usize) {
        let outer: usize = self.dims[..mode].iter().product();
        let mid = self.dims[mode];
        let inner: usize = self.dims[mode + 1..].iter().product();
        (outer, mid, inner)
    }

    /// Mode-`mode` unfolding: a `dims[mode]` by product-of-the-rest matrix
    /// whose columns enumerate the remaining indices in row-major order.
    pub fn unfold(&self, mode: usize) -> DMatrix<f64> {
        let (outer, mid, inner) = self.mode_strides(mode);
        let mut out = DMatrix::zeros(mid, outer * inner);
        for o in 0..outer {
            for m in 0..mid {
                for i in 0..inner {
                    out[(m, o * inner + i)] = self.values[(o * mid + m) * inner + i];
                }
            }
        }
        out
    }
}

/// Mode product: contracts index `mode` of `t` with the rows of `m`
/// (`dims[mode]` by `new_dim`), replacing that extent by `new_dim`:
/// `out(…, n, …) = Σ_k t(…, k, …) · m[k, n]`. For a matrix tensor and
/// mode 0 this is `m^T · t`.
pub fn mode_product(t: &DenseTensor, m: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
    if mode >= t.order() {
        return Err(Error::DimensionMismatch(format!(
            "mode {mode} out of range for order-{} tensor",
            t.order()
        )));
    }
    if m.nrows() != t.dims[mode] {
        return Err(Error::DimensionMismatch(format!(
            "mode {mode} has extent {}, matrix has {} rows",
            t.dims[mode],
            m.nrows()
        )));
    }
    let (outer, mid, inner) = t.mode_strides(mode);
    let new_mid = m.ncols();
    let mut dims = t.dims.clone();
    dims[mode] = new_mid;
    let mut values = vec![0.0; outer * new_mid * inner];
    for o in 0..outer {
        for k in 0..mid {
            let src_base = (o * mid + k) * inner;
            for n in 0..new_mid {
                let w = m[(k, n)];
                if w == 0.0 {
                    continue;
                }
                let dst_base = (o * new_mid + n) * inner;
                for i in 0..inner {
                    values[dst_base + i] += t.values[src_base + i] * w;
                }
            }
        }
    }
    DenseTensor::new(dims, values)
}

/// Contracts index `mode` with a vector, dropping that mode.
fn contract_mode(t: &DenseTensor, v: &DVector<f64>, mode: usize) -> Result<DenseTensor> {
    if v.len() != t.dims[mode] {
        return Err(Error::DimensionMismatch(format!(
            "mode {mode} has extent {}, vector has {}",
            t.dims[mode],
            v.len()
        )));
    }
    let (outer, mid, inner) = t.mode_strides(mode);
    let mut dims: Vec<usize> = t.dims.clone();
    dims.remove(mode);
    if dims.is_empty() {
        dims.push(1);
    }
    let mut values = vec![0.0; outer * inner];
    for o in 0..outer {
        for k in 0..mid {
            let w = v[k];
            if w == 0.0 {
                continue;
            }
            let src_base = (o * mid + k) * inner;
            for i in 0..inner {
                values[o * inner + i] += t.values[src_base + i] * w;
            }
        }
    }
    DenseTensor::new(dims, values)
}

/// Contracts every mode except `keep` with the matching direction,
/// returning the gradient vector for that mode.
fn contract_except(t: &DenseTensor, directions: &[DVector<f64>], keep: usize) -> DVector<f64> {
    let mut cur = t.clone();
    let mut kept_pos = keep;
    for mode in (0..directions.len()).rev() {
        if mode == keep {
            continue;
        }
        cur = contract_mode(&cur, &directions[mode], mode)
            .expect("direction lengths match tensor dims");
        if mode < kept_pos {
            kept_pos -= 1;
        }
    }
    debug_assert_eq!(kept_pos, 0);
    DVector::from_column_slice(cur.values())
}

/// Full contraction of the tensor with one direction per mode.
fn contract_all(t: &DenseTensor, directions: &[DVector<f64>]) -> f64 {
    let g = contract_except(t, directions, 0);
    g.dot(&directions[0])
}

/// Outer product of tensors: the order is the sum of input orders and each
/// entry is the product of factor entries at the split multi-index.
pub fn outer_product(factors: &[&DenseTensor]) -> Result<DenseTensor> {
    if factors.is_empty() {
        return Err(Error::EmptyInput("outer product factors".into()));
    }
    let mut dims = Vec::new();
    let mut values = vec![1.0];
    for f in factors {
        dims.extend_from_slice(f.dims());
        let mut next = Vec::with_capacity(values.len() * f.values.len());
        for &a in &values {
            for &b in &f.values {
                next.push(a * b);
            }
        }
        values = next;
    }
    DenseTensor::new(dims, values)
}

/// Order-K covariance tensor `(1/N) Σ_i x_i^(1) ⊗ … ⊗ x_i^(K)` of
/// row-aligned sets, taken as given (center first for a covariance).
pub fn covariance_tensor(sets: &[&DataMatrix]) -> Result<DenseTensor> {
    if sets.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "covariance tensor needs at least 2 sets, got {}",
            sets.len()
        )));
    }
    let n = sets[0].n_samples();
    for s in sets {
        if s.n_samples() != n {
            return Err(Error::SampleCountMismatch {
                left: n,
                right: s.n_samples(),
            });
        }
    }
    let dims: Vec<usize> = sets.iter().map(|s| s.dim()).collect();
    let mut acc = DenseTensor::zeros(dims)?;
    for i in 0..n {
        let rows: Vec<DenseTensor> = sets
            .iter()
            .map(|s| DenseTensor::from_vector(&s.row_vector(i)))
            .collect::<Result<_>>()?;
        let refs: Vec<&DenseTensor> = rows.iter().collect();
        let outer = outer_product(&refs)?;
        for (a, b) in acc.values.iter_mut().zip(outer.values) {
            *a += b;
        }
    }
    for v in acc.values.iter_mut() {
        *v /= n as f64;
    }
    Ok(acc)
}

/// Whitens a covariance tensor by the truncated inverse square roots of the
/// per-set covariances: `T = C ×_1 Σ_11^{-1/2} ×_2 … ×_K Σ_KK^{-1/2}`.
pub fn whiten_tensor(
    c: &DenseTensor,
    covariances: &[&DMatrix<f64>],
    rel_tol: f64,
) -> Result<DenseTensor> {
    if covariances.len() != c.order() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariances for an order-{} tensor",
            covariances.len(),
            c.order()
        )));
    }
    let mut out = c.clone();
    for (k, cov) in covariances.iter().enumerate() {
        let (r, _) = inv_sqrt_truncated(cov, rel_tol)?;
        out = mode_product(&out, &r, k)?;
    }
    Ok(out)
}

/// Best rank-1 approximation `ρ · p^(1) ⊗ … ⊗ p^(K)` of a tensor.
#[derive(Debug, Clone)]
pub struct Rank1Model {
    /// Contraction value at the fitted directions; non-negative.
    pub rho: f64,
    /// One unit direction per mode.
    pub directions: Vec<DVector<f64>>,
    /// ALS sweeps executed.
    pub iterations: usize,
}

/// Default ALS sweep cap.
pub const ALS_MAX_ITER: usize = 500;
/// Default relative tolerance on the contraction value.
pub const ALS_TOL: f64 = 1e-9;

fn sign_fix_direction(v: &mut DVector<f64>) -> bool {
    let mut best = 0;
    let mut best_abs = f64::MIN;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        *v = -&*v;
        true
    } else {
        false
    }
}

/// Rank-1 alternating least squares with per-sweep contraction history.
///
/// Directions start from the leading left singular vector of each mode
/// unfolding; each sweep replaces every direction by the normalized
/// contraction of the tensor against the others, which maximizes the
/// contraction coordinate-wise, so the history is non-decreasing. A seeded
/// random restart replaces any direction whose update collapses to zero.
pub fn rank1_als_with_history(
    t: &DenseTensor,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<(Rank1Model, Vec<f64>)> {
    if t.order() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "rank-1 fit needs order >= 2, got {}",
            t.order()
        )));
    }
    let scale = t.frobenius_norm();
    if scale <= 0.0 {
        return Err(Error::ZeroTensor);
    }
    let k = t.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions: Vec<DVector<f64>> = (0..k)
        .map(|mode| {
            let (u, _, _) = thin_svd_sorted(&t.unfold(mode));
            u.column(0).into_owned()
        })
        .collect();
    let mut history = Vec::new();
    let mut rho_prev = f64::NAN;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let mut rho = 0.0;
        for mode in 0..k {
            let mut g = contract_except(t, &directions, mode);
            let mut norm = g.norm();
            if norm <= 1e-14 * scale {
                // Collapsed update: restart this direction at random.
                g = DVector::from_fn(t.dims[mode], |_, _| rng.sample(StandardNormal));
                norm = g.norm();
            }
            directions[mode] = g / norm;
            rho = norm;
        }
        history.push(rho);
        if rho_prev.is_finite() && (rho - rho_prev).abs() <= tol * rho.max(1e-300) {
            break;
        }
        rho_prev = rho;
    }
    for d in directions.iter_mut() {
        sign_fix_direction(d);
    }
    let mut rho = contract_all(t, &directions);
    if rho < 0.0 {
        directions[0] = -&directions[0];
        rho = -rho;
    }
    Ok((
        Rank1Model {
            rho,
            directions,
            iterations,
        },
        history,
    ))
}

/// Rank-1 ALS without the history (see [`rank1_als_with_history`]).
pub fn rank1_als(t: &DenseTensor, max_iter: usize, tol: f64, seed: u64) -> Result<Rank1Model> {
    rank1_als_with_history(t, max_iter, tol, seed).map(|(m, _)| m)
}

/// Knobs for tensor-CCA fits.
#[derive(Debug, Clone, Copy)]
pub struct TccaParams {
    /// Relative spectrum truncation inside the whitening.
    pub rel_tol: f64,
    /// ALS sweep cap.
    pub max_iter: usize,
    /// ALS relative tolerance on the contraction value.
    pub tol: f64,
    /// Seed for ALS restart draws.
    pub seed: u64,
}

impl Default for TccaParams {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: ALS_MAX_ITER,
            tol: ALS_TOL,
            seed: 0,
        }
    }
}

/// Generalized canonical directions for K sets.
#[derive(Debug, Clone)]
pub struct TccaModel {
    /// Rank-1 fit of the whitened covariance tensor.
    pub whitened: Rank1Model,
    /// Per-set directions mapped back to observation space.
    pub directions: Vec<DVector<f64>>,
}

/// Fits generalized canonical directions by whitening the covariance
/// tensor of the (internally centered) sets and extracting its best rank-1
/// approximation; whitened directions are mapped back through the inverse
/// square roots.
pub fn fit_tcca(sets: &[&DataMatrix], params: &TccaParams) -> Result<TccaModel> {
    if sets.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "tensor CCA needs at least 2 sets, got {}",
            sets.len()
        )));
    }
    let n = sets[0].n_samples();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: n,
        });
    }
    let centered: Vec<DataMatrix> = sets.iter().map(|s| center(s).0).collect();
    let refs: Vec<&DataMatrix> = centered.iter().collect();
    let c = covariance_tensor(&refs)?;
    let mut whiteners = Vec::with_capacity(sets.len());
    for cset in &centered {
        let cov = covariance(cset, cset)?;
        let (r, _) = inv_sqrt_truncated(&cov, params.rel_tol)?;
        whiteners.push(r);
    }
    let mut t = c;
    for (k, r) in whiteners.iter().enumerate() {
        t = mode_product(&t, r, k)?;
    }
    let whitened = rank1_als(&t, params.max_iter, params.tol, params.seed)?;
    let directions = whiteners
        .iter()
        .zip(&whitened.directions)
        .map(|(r, p)| r * p)
        .collect();
    Ok(TccaModel {
        whitened,
        directions,
    })
}

/// Local tensor-CCA fit on a neighborhood, computed in the sample-spanned
/// subspace of each set. This is algebraically the same fit as [`fit_tcca`]
/// on the selected rows — the whitened tensor expressed in the orthonormal
/// singular basis of each set — but its cost scales with the neighborhood
/// size instead of the ambient dimensions.
pub fn fit_tcca_local(
    sets: &[&DataMatrix],
    indices: &[usize],
    params: &TccaParams,
) -> Result<Vec<DVector<f64>>> {
    if sets.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "tensor CCA needs at least 2 sets, got {}",
            sets.len()
        )));
    }
    if indices.len() < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: indices.len(),
        });
    }
    let w = indices.len() as f64;
    let mut bases = Vec::with_capacity(sets.len());
    let mut coords = Vec::with_capacity(sets.len());
    for s in sets {
        let (local_c, _) = center(&s.select_rows(indices));
        let scaled = local_c.values() / w.sqrt();
        let (u, sv, v) = thin_svd_sorted(&scaled);
        if sv[0] <= 0.0 {
            return Err(Error::ZeroMatrix);
        }
        let rank = (0..sv.len())
            .take_while(|&l| sv[l] * sv[l] >= params.rel_tol * sv[0] * sv[0])
            .count();
        // Whitened coordinates: sqrt(w) * U columns have unit variance.
        let xi = DMatrix::from_fn(indices.len(), rank, |i, l| w.sqrt() * u[(i, l)]);
        // Back-map for a whitened-subspace direction: V * diag(1/s).
        let back = DMatrix::from_fn(v.nrows(), rank, |d, l| v[(d, l)] / sv[l]);
        bases.push(back);
        coords.push(xi);
    }
    let dims: Vec<usize> = coords.iter().map(DMatrix::ncols).collect();
    let mut t = DenseTensor::zeros(dims)?;
    for (row, _) in indices.iter().enumerate() {
        let vecs: Vec<DenseTensor> = coords
            .iter()
            .map(|xi| DenseTensor::from_vector(&xi.row(row).transpose()))
            .collect::<Result<_>>()?;
        let refs: Vec<&DenseTensor> = vecs.iter().collect();
        let outer = outer_product(&refs)?;
        for (a, b) in t.values.iter_mut().zip(outer.values) {
            *a += b;
        }
    }
    for v in t.values.iter_mut() {
        *v /= w;
    }
    let fit = rank1_als(&t, params.max_iter, params.tol, params.seed)?;
    Ok(bases
        .iter()
        .zip(&fit.directions)
        .map(|(back, p)| back * p)
        .collect())
}

/// Knobs for the K-set diffusion pipeline.
#[derive(Debug, Clone, Copy)]
pub struct KSetParams {
    pub tcca: TccaParams,
    /// Which set's observation space carries the metric (default first).
    pub side: usize,
    /// Embedding components to return; the common variable is a scalar.
    pub d_z: usize,
}

impl Default for KSetParams {
    fn default() -> Self {
        Self {
            tcca: TccaParams::default(),
            side: 0,
            d_z: 1,
        }
    }
}

/// K-set common-variable recovery: a local tensor-CCA fit at every sample
/// anchors a rank-1 projector metric `D_ij = (p(x_i)^T (x_i - x_j))²` on
/// the chosen side, which is embedded through landmark-normalized
/// diffusion maps.
pub fn pipeline_k_sets(
    sets: &[&DataMatrix],
    spec: &NeighborhoodSpec,
    params: &KSetParams,
) -> Result<DiffusionEmbedding> {
    let metric = metric_k_sets(sets, spec, params)?;
    let kernel = gaussian_kernel(&metric)?;
    let normalized = normalize_landmark(&kernel)?;
    embed(&normalized, params.d_z)
}

/// The anchored K-set metric used by [`pipeline_k_sets`].
pub fn metric_k_sets(
    sets: &[&DataMatrix],
    spec: &NeighborhoodSpec,
    params: &KSetParams,
) -> Result<MetricMatrix> {
    if sets.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "pipeline needs at least 2 sets, got {}",
            sets.len()
        )));
    }
    if params.side >= sets.len() {
        return Err(Error::DimensionMismatch(format!(
            "side {} out of {} sets",
            params.side,
            sets.len()
        )));
    }
    let n = sets[0].n_samples();
    for s in sets {
        if s.n_samples() != n {
            return Err(Error::SampleCountMismatch {
                left: n,
                right: s.n_samples(),
            });
        }
    }
    let side_set = sets[params.side];
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let idxs = neighborhood(&NeighborhoodQuery::Index(i), sets[0], Some(sets[1]), spec)?;
            let directions = fit_tcca_local(sets, &idxs, &params.tcca)?;
            let p = &directions[params.side];
            let xi = side_set.row_vector(i);
            Ok((0..n)
                .map(|j| {
                    let proj = p.dot(&(&xi - side_set.row_vector(j)));
                    proj * proj
                })
                .collect())
        })
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    MetricMatrix::new(values, MetricKind::Anchored, Some((0..n).collect()))
}
