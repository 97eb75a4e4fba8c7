//! Diffusion-map embedding of a pairwise metric.
//!
//! A metric matrix `D` becomes a Gaussian affinity `W = exp(-D / sigma)`
//! with the bandwidth `sigma` set to the median off-diagonal metric value.
//! Square affinities are normalized to a row-stochastic diffusion operator
//! `M = Omega^{-1} W`; rectangular anchors-by-samples affinities go through
//! the landmark route `M = Omega^{-1} W^T W`. Both are represented by the
//! symmetric conjugate `S = Omega^{-1/2} W Omega^{-1/2}` (respectively
//! `Omega^{-1/2} W^T W Omega^{-1/2}`) whose eigenvectors, mapped back
//! through `Omega^{-1/2}` and scaled by their eigenvalues, are the
//! diffusion coordinates. The leading constant eigenvector is skipped.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metric::MetricMatrix;
use crate::numerics::{fix_column_signs, median, sym_eigen};

/// Gaussian affinities built from a metric matrix.
#[derive(Debug, Clone)]
pub struct AffinityKernel {
    w: DMatrix<f64>,
    sigma: f64,
    anchor_indices: Option<Vec<usize>>,
}

impl AffinityKernel {
    /// Wraps raw affinities; entries must be finite and non-negative.
    pub fn from_parts(
        w: DMatrix<f64>,
        sigma: f64,
        anchor_indices: Option<Vec<usize>>,
    ) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyInput("affinity matrix".into()));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFiniteData);
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::DimensionMismatch(format!(
                "bandwidth must be positive: {sigma}"
            )));
        }
        Ok(Self {
            w,
            sigma,
            anchor_indices,
        })
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn anchor_indices(&self) -> Option<&[usize]> {
        self.anchor_indices.as_deref()
    }
}

/// Median of the metric entries that compare two distinct samples: the
/// strict upper triangle for square metrics, and all non-self anchor-sample
/// pairs for anchored ones.
pub fn median_bandwidth(metric: &MetricMatrix) -> Result<f64> {
    let d = metric.values();
    let mut offdiag = match metric.anchor_indices() {
        None => {
            let mut v = Vec::with_capacity(d.nrows() * (d.nrows() - 1) / 2);
            for i in 0..d.nrows() {
                for j in (i + 1)..d.ncols() {
                    v.push(d[(i, j)]);
                }
            }
            v
        }
        Some(anchors) => {
            let mut v = Vec::with_capacity(anchors.len() * (d.ncols() - 1));
            for (r, &a) in anchors.iter().enumerate() {
                for j in 0..d.ncols() {
                    if j != a {
                        v.push(d[(r, j)]);
                    }
                }
            }
            v
        }
    };
    if offdiag.is_empty() {
        return Err(Error::EmptyInput(
            "metric has no off-diagonal entries".into(),
        ));
    }
    let m = median(&mut offdiag);
    if m <= 0.0 {
        return Err(Error::DegenerateMetric);
    }
    Ok(m)
}

/// Gaussian affinity with the median off-diagonal bandwidth.
pub fn gaussian_kernel(metric: &MetricMatrix) -> Result<AffinityKernel> {
    gaussian_kernel_with_sigma(metric, median_bandwidth(metric)?)
}

/// Gaussian affinity `exp(-D / sigma)` with an explicit bandwidth.
pub fn gaussian_kernel_with_sigma(metric: &MetricMatrix, sigma: f64) -> Result<AffinityKernel> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::DimensionMismatch(format!(
            "bandwidth must be positive: {sigma}"
        )));
    }
    let w = metric.values().map(|d| (-d / sigma).exp());
    AffinityKernel::from_parts(w, sigma, metric.anchor_indices().map(<[usize]>::to_vec))
}

/// Which normalization produced a [`NormalizedKernel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    RowStochastic,
    Landmark,
}

/// Symmetric conjugate of a diffusion operator plus the diagonal change of
/// basis needed to map its eigenvectors back to walk coordinates.
#[derive(Debug, Clone)]
pub struct NormalizedKernel {
    sym: DMatrix<f64>,
    back: DVector<f64>,
    kind: KernelKind,
    sigma: f64,
}

impl NormalizedKernel {
    pub fn sym(&self) -> &DMatrix<f64> {
        &self.sym
    }

    /// Per-sample factors `omega_i^{-1/2}`; eigenvectors of `sym` times
    /// these factors are eigenvectors of the row-stochastic operator.
    pub fn back(&self) -> &DVector<f64> {
        &self.back
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The row-stochastic operator `diag(back) * sym * diag(back)^{-1}`.
    pub fn markov(&self) -> DMatrix<f64> {
        let n = self.sym.nrows();
        DMatrix::from_fn(n, n, |i, j| self.back[i] * self.sym[(i, j)] / self.back[j])
    }
}

/// Row-stochastic normalization of a square affinity.
pub fn normalize_row_stochastic(kernel: &AffinityKernel) -> Result<NormalizedKernel> {
    let w = kernel.w();
    if w.nrows() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "row-stochastic normalization needs a square affinity, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    let back = inv_sqrt_row_sums(w)?;
    let n = w.nrows();
    let sym = DMatrix::from_fn(n, n, |i, j| back[i] * w[(i, j)] * back[j]);
    Ok(NormalizedKernel {
        sym,
        back,
        kind: KernelKind::RowStochastic,
        sigma: kernel.sigma(),
    })
}

/// Landmark normalization of an anchors-by-samples affinity: the Gram
/// matrix `W^T W` couples samples through shared anchors and is then
/// normalized like a square affinity.
pub fn normalize_landmark(kernel: &AffinityKernel) -> Result<NormalizedKernel> {
    let w = kernel.w();
    let gram = w.transpose() * w;
    let back = inv_sqrt_row_sums(&gram)?;
    let n = gram.nrows();
    let sym = DMatrix::from_fn(n, n, |i, j| back[i] * gram[(i, j)] * back[j]);
    Ok(NormalizedKernel {
        sym,
        back,
        kind: KernelKind::Landmark,
        sigma: kernel.sigma(),
    })
}

fn inv_sqrt_row_sums(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut back = DVector::zeros(m.nrows());
    for i in 0..m.nrows() {
        let s: f64 = m.row(i).iter().sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::DegenerateKernel { row: i });
        }
        back[i] = 1.0 / s.sqrt();
    }
    Ok(back)
}

/// Diffusion coordinates of the samples.
#[derive(Debug, Clone)]
pub struct DiffusionEmbedding {
    coordinates: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    sigma: f64,
}

impl DiffusionEmbedding {
    /// Samples-by-components coordinate matrix.
    pub fn coordinates(&self) -> &DMatrix<f64> {
        &self.coordinates
    }

    /// Eigenvalues behind each kept coordinate, descending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// One embedding coordinate as a plain vector.
    pub fn component(&self, idx: usize) -> Vec<f64> {
        self.coordinates.column(idx).iter().copied().collect()
    }
}

/// Eigendecomposes the normalized kernel and returns the `d_z` leading
/// non-constant diffusion coordinates, each eigenvector mapped back to walk
/// coordinates and scaled by its eigenvalue.
pub fn embed(kernel: &NormalizedKernel, d_z: usize) -> Result<DiffusionEmbedding> {
    let n = kernel.sym().nrows();
    if d_z == 0 {
        return Err(Error::TooManyComponents {
            requested: 0,
            available: n.saturating_sub(1),
        });
    }
    if d_z >= n {
        return Err(Error::TooManyComponents {
            requested: d_z,
            available: n.saturating_sub(1),
        });
    }
    let spectrum = sym_eigen(kernel.sym())?;
    let mut coordinates = DMatrix::zeros(n, d_z);
    let mut eigenvalues = DVector::zeros(d_z);
    let mut kept = 0;
    for l in 0..n {
        if kept == d_z {
            break;
        }
        let lambda = spectrum.eigenvalues[l];
        let psi: DVector<f64> =
            DVector::from_fn(n, |i, _| kernel.back()[i] * spectrum.eigenvectors[(i, l)]);
        let max = psi.max();
        let min = psi.min();
        if max - min < 1e-8 * psi.norm() {
            continue; // constant direction carries no coordinate information
        }
        coordinates.set_column(kept, &(psi * lambda));
        eigenvalues[kept] = lambda;
        kept += 1;
    }
    if kept < d_z {
        return Err(Error::TooManyComponents {
            requested: d_z,
            available: kept,
        });
    }
    fix_column_signs(&mut coordinates);
    Ok(DiffusionEmbedding {
        coordinates,
        eigenvalues,
        sigma: kernel.sigma(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{metric_euclidean, MetricKind, MetricMatrix};
    use crate::numerics::DataMatrix;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn square_metric(entries: &[(usize, usize, f64)], n: usize) -> MetricMatrix {
        let mut d = DMatrix::zeros(n, n);
        for &(i, j, v) in entries {
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
        MetricMatrix::new(d, MetricKind::Euclidean, None).unwrap()
    }

    #[test]
    fn bandwidth_is_median_of_upper_triangle() {
        let m = square_metric(&[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0)], 3);
        assert_abs_diff_eq!(median_bandwidth(&m).unwrap(), 2.0);
        let k = gaussian_kernel(&m).unwrap();
        assert_abs_diff_eq!(k.w()[(0, 1)], (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k.w()[(0, 0)], 1.0);
    }

    #[test]
    fn anchored_bandwidth_skips_self_pairs() {
        // Anchors 0 and 1 over three samples: the (anchor, itself) zeros are
        // excluded, leaving {1, 2, 1, 3} with median 1.5.
        let mut d = DMatrix::zeros(2, 3);
        d[(0, 1)] = 1.0;
        d[(0, 2)] = 2.0;
        d[(1, 0)] = 1.0;
        d[(1, 2)] = 3.0;
        let m = MetricMatrix::new(d, MetricKind::Anchored, Some(vec![0, 1])).unwrap();
        assert_abs_diff_eq!(median_bandwidth(&m).unwrap(), 1.5);
    }

    #[test]
    fn zero_median_metric_is_degenerate() {
        let m = square_metric(&[], 3);
        assert!(matches!(median_bandwidth(&m), Err(Error::DegenerateMetric)));
        // One nonzero entry among three still has median 0.
        let m = square_metric(&[(0, 1, 5.0)], 3);
        assert!(matches!(gaussian_kernel(&m), Err(Error::DegenerateMetric)));
        // A majority of nonzero entries gives a valid kernel.
        let m = square_metric(&[(0, 1, 5.0), (0, 2, 5.0)], 3);
        assert!(gaussian_kernel(&m).is_ok());
    }

    #[test]
    fn entry_at_bandwidth_maps_to_inverse_e() {
        let m = square_metric(&[(0, 1, 2.0), (0, 2, 2.0), (1, 2, 2.0)], 3);
        let k = gaussian_kernel(&m).unwrap();
        assert_abs_diff_eq!(k.sigma(), 2.0);
        assert_abs_diff_eq!(k.w()[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn kernel_is_strictly_monotone_in_the_metric() {
        let m = square_metric(&[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0)], 3);
        let k = gaussian_kernel(&m).unwrap();
        assert!(k.w()[(0, 1)] > k.w()[(0, 2)]);
        assert!(k.w()[(0, 2)] > k.w()[(1, 2)]);
    }

    #[test]
    fn identity_operator_embedding_is_the_documented_degenerate_case() {
        // All eigenvalues are 1 and no eigenvector is constant, so the
        // embedding returns (sign-fixed) basis-like coordinates.
        let k = AffinityKernel::from_parts(DMatrix::identity(4, 4), 1.0, None).unwrap();
        let norm = normalize_row_stochastic(&k).unwrap();
        let emb = embed(&norm, 2).unwrap();
        assert_abs_diff_eq!(emb.eigenvalues()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(emb.eigenvalues()[1], 1.0, epsilon = 1e-12);
        for c in 0..2 {
            let col = emb.coordinates().column(c);
            assert!(col.max() - col.min() >= 1e-8 * col.norm());
        }
    }

    #[test]
    fn single_anchor_uniform_affinity_is_rank_one() {
        let w = DMatrix::from_element(1, 5, 1.0);
        let k = AffinityKernel::from_parts(w, 1.0, Some(vec![2])).unwrap();
        let norm = normalize_landmark(&k).unwrap();
        let markov = norm.markov();
        for i in 0..5 {
            for j in 0..5 {
                assert_abs_diff_eq!(markov[(i, j)], 0.2, epsilon = 1e-14);
            }
        }
        let spectrum = sym_eigen(norm.sym()).unwrap();
        assert_abs_diff_eq!(spectrum.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert!(spectrum.eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn permuting_samples_permutes_embedding_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let x =
            DataMatrix::new(DMatrix::from_fn(12, 2, |_, _| rng.sample(StandardNormal))).unwrap();
        let m = metric_euclidean(&x).unwrap();
        let emb = embed(
            &normalize_row_stochastic(&gaussian_kernel(&m).unwrap()).unwrap(),
            2,
        )
        .unwrap();

        let perm: Vec<usize> = (0..12).map(|i| (i * 5) % 12).collect();
        let permuted_rows: Vec<Vec<f64>> = perm
            .iter()
            .map(|&i| (0..2).map(|d| x.values()[(i, d)]).collect())
            .collect();
        let xp = DataMatrix::from_rows(&permuted_rows).unwrap();
        let mp = metric_euclidean(&xp).unwrap();
        let embp = embed(
            &normalize_row_stochastic(&gaussian_kernel(&mp).unwrap()).unwrap(),
            2,
        )
        .unwrap();

        for c in 0..2 {
            // Compare up to a global sign per column.
            let orig: Vec<f64> = perm.iter().map(|&i| emb.coordinates()[(i, c)]).collect();
            let new: Vec<f64> = (0..12).map(|r| embp.coordinates()[(r, c)]).collect();
            let direct: f64 = orig.iter().zip(&new).map(|(a, b)| (a - b).abs()).sum();
            let flipped: f64 = orig.iter().zip(&new).map(|(a, b)| (a + b).abs()).sum();
            assert!(direct.min(flipped) < 1e-9, "column {c} not a permutation");
        }
    }

    #[test]
    fn uniform_affinity_gives_uniform_markov_rows() {
        let m = square_metric(&[], 3);
        let k = gaussian_kernel_with_sigma(&m, 1.0).unwrap();
        let norm = normalize_row_stochastic(&k).unwrap();
        let markov = norm.markov();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(markov[(i, j)], 1.0 / 3.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn markov_rows_sum_to_one_and_sym_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x =
            DataMatrix::new(DMatrix::from_fn(12, 3, |_, _| rng.sample(StandardNormal))).unwrap();
        let m = metric_euclidean(&x).unwrap();
        let norm = normalize_row_stochastic(&gaussian_kernel(&m).unwrap()).unwrap();
        let markov = norm.markov();
        for i in 0..12 {
            assert_abs_diff_eq!(markov.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            for j in 0..12 {
                assert_abs_diff_eq!(norm.sym()[(i, j)], norm.sym()[(j, i)], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn landmark_identity_affinity_is_identity_operator() {
        let k =
            AffinityKernel::from_parts(DMatrix::identity(3, 3), 1.0, Some(vec![0, 1, 2])).unwrap();
        let norm = normalize_landmark(&k).unwrap();
        let markov = norm.markov();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(markov[(i, j)], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn landmark_uniform_affinity_gives_uniform_markov() {
        let w = DMatrix::from_element(2, 4, 1.0);
        let k = AffinityKernel::from_parts(w, 1.0, Some(vec![0, 1])).unwrap();
        let norm = normalize_landmark(&k).unwrap();
        let markov = norm.markov();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(markov[(i, j)], 0.25, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn zero_affinity_row_is_degenerate() {
        let mut w = DMatrix::from_element(3, 3, 1.0);
        w.row_mut(1).fill(0.0);
        let k = AffinityKernel::from_parts(w, 1.0, None).unwrap();
        assert!(matches!(
            normalize_row_stochastic(&k),
            Err(Error::DegenerateKernel { row: 1 })
        ));
    }

    #[test]
    fn embedding_coordinates_are_markov_eigenvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x =
            DataMatrix::new(DMatrix::from_fn(15, 2, |_, _| rng.sample(StandardNormal))).unwrap();
        let m = metric_euclidean(&x).unwrap();
        let norm = normalize_row_stochastic(&gaussian_kernel(&m).unwrap()).unwrap();
        let emb = embed(&norm, 2).unwrap();
        let markov = norm.markov();
        for c in 0..2 {
            let psi = DVector::from_column_slice(&emb.component(c));
            let lambda = emb.eigenvalues()[c];
            let applied = &markov * &psi;
            for i in 0..15 {
                assert_abs_diff_eq!(applied[i], lambda * psi[i], epsilon = 1e-10);
            }
            assert!(lambda < 1.0 - 1e-12, "constant direction must be skipped");
        }
    }

    #[test]
    fn circle_embedding_has_nearly_constant_radius() {
        let n = 60;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let m = metric_euclidean(&x).unwrap();
        let norm = normalize_row_stochastic(&gaussian_kernel(&m).unwrap()).unwrap();
        let emb = embed(&norm, 2).unwrap();
        let radii: Vec<f64> = (0..n)
            .map(|i| {
                let a = emb.coordinates()[(i, 0)];
                let b = emb.coordinates()[(i, 1)];
                (a * a + b * b).sqrt()
            })
            .collect();
        let max = radii.iter().cloned().fold(f64::MIN, f64::max);
        let min = radii.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min > 0.0 && max / min < 1.2, "radius ratio {}", max / min);
    }

    #[test]
    fn two_far_clusters_split_by_leading_coordinate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rows = Vec::new();
        for i in 0..20 {
            let offset = if i < 10 { -50.0 } else { 50.0 };
            rows.push(vec![
                offset + rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ]);
        }
        let x = DataMatrix::from_rows(&rows).unwrap();
        let m = metric_euclidean(&x).unwrap();
        let norm = normalize_row_stochastic(&gaussian_kernel(&m).unwrap()).unwrap();
        let emb = embed(&norm, 1).unwrap();
        let first = emb.component(0);
        let left_sign = first[0].signum();
        assert!(first[..10].iter().all(|v| v.signum() == left_sign));
        assert!(first[10..].iter().all(|v| v.signum() == -left_sign));
    }

    #[test]
    fn too_many_components_is_rejected() {
        let m = square_metric(&[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 3.0)], 3);
        let norm = normalize_row_stochastic(&gaussian_kernel(&m).unwrap()).unwrap();
        assert!(matches!(
            embed(&norm, 3),
            Err(Error::TooManyComponents { requested: 3, .. })
        ));
        assert!(embed(&norm, 0).is_err());
    }

    #[test]
    fn embedding_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let x =
            DataMatrix::new(DMatrix::from_fn(20, 3, |_, _| rng.sample(StandardNormal))).unwrap();
        let m = metric_euclidean(&x).unwrap();
        let norm = normalize_row_stochastic(&gaussian_kernel(&m).unwrap()).unwrap();
        let a = embed(&norm, 3).unwrap();
        let b = embed(&norm, 3).unwrap();
        assert_eq!(a.coordinates().as_slice(), b.coordinates().as_slice());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]
            #[test]
            fn markov_is_row_stochastic_for_random_point_clouds(seed in 0u64..500) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = 8 + (seed % 6) as usize;
                let x = DataMatrix::new(
                    DMatrix::from_fn(n, 2, |_, _| rand::Rng::sample(&mut rng, StandardNormal)),
                ).unwrap();
                let m = metric_euclidean(&x).unwrap();
                let norm = normalize_row_stochastic(&gaussian_kernel(&m).unwrap()).unwrap();
                let markov = norm.markov();
                for i in 0..n {
                    let s: f64 = markov.row(i).iter().sum();
                    prop_assert!((s - 1.0).abs() < 1e-10);
                    for j in 0..n {
                        prop_assert!(markov[(i, j)] >= 0.0);
                    }
                }
            }
        }
    }
}
