//! Pairwise metrics on observation space built from local CCA fits.
//!
//! The central quantity is the attenuation matrix `A(x)` of a CCA model
//! fitted in a neighborhood: the quadratic form `(x_i - x_j)^T A (x_i - x_j)`
//! approximates the squared distance between the hidden common variables
//! driving both observation sets. Four estimators are provided:
//!
//! * midpoint: `A` evaluated at the pair midpoint (fourth-order accurate);
//! * endpoint-averaged: the average of `A` at both endpoints (second-order);
//! * anchored: `A` frozen at a set of anchor samples, producing a
//!   rectangular anchors-by-samples matrix for landmark normalization;
//! * Mahalanobis: single-set variant using the pseudo-inverted local
//!   covariance, the degenerate case of the CCA metric when observations
//!   carry no set-specific variables.
//!
//! A plain Euclidean metric is included as the single-set baseline.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cca::{attenuation_factor, fit_cca, CcaModel, Side, DEFAULT_REL_TOL, DEFAULT_RIDGE};
use crate::error::{Error, Result};
use crate::numerics::{center, thin_svd_sorted, DataMatrix};

/// How to gather the samples a local model is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodSpec {
    /// `width` consecutive sample indices centered on the query index,
    /// shifted to stay inside `[0, N)`. Only defined for index queries.
    TimeWindow { width: usize },
    /// The `k` nearest samples by Euclidean distance in the designated
    /// space; an indexed query point belongs to its own neighborhood.
    KNearest { k: usize, on: NeighborSpace },
}

/// Which observation space nearest-neighbor distances are measured in.
/// `Both` resolves to the first set (x-space primacy); pass `Y` to switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborSpace {
    X,
    Y,
    Both,
}

/// What a metric's entries mean and how the matrix is shaped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Midpoint,
    Anchored,
    EndpointAveraged,
    Euclidean,
    Mahalanobis,
}

/// Which side's attenuation matrix the quadratic form uses; `Average` takes
/// the mean of the two per-side forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSide {
    X,
    Y,
    Average,
}

/// Knobs for the local CCA fits inside the metric estimators.
#[derive(Debug, Clone, Copy)]
pub struct LocalCcaParams {
    /// Dimensionless ridge coefficient (see [`crate::cca::DEFAULT_RIDGE`]).
    pub ridge: f64,
    /// Relative spectrum truncation for the whitening.
    pub rel_tol: f64,
    /// Side whose attenuation matrix is evaluated.
    pub side: MetricSide,
}

impl Default for LocalCcaParams {
    fn default() -> Self {
        Self {
            ridge: DEFAULT_RIDGE,
            rel_tol: DEFAULT_REL_TOL,
            side: MetricSide::X,
        }
    }
}

/// A pairwise (or anchors-by-samples) matrix of squared metric values.
#[derive(Debug, Clone)]
pub struct MetricMatrix {
    values: DMatrix<f64>,
    kind: MetricKind,
    anchor_indices: Option<Vec<usize>>,
}

impl MetricMatrix {
    /// Validates and wraps raw metric values: entries must be ≥ -1e-9
    /// (slightly negative truncation noise is clamped to zero), square
    /// matrices must be symmetric with a zero diagonal, and anchored
    /// matrices must carry one anchor index per row.
    pub fn new(
        mut values: DMatrix<f64>,
        kind: MetricKind,
        anchor_indices: Option<Vec<usize>>,
    ) -> Result<Self> {
        for v in values.iter_mut() {
            if *v < -1e-9 {
                return Err(Error::NegativeMetricEntry { value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        match &anchor_indices {
            Some(anchors) => {
                if anchors.len() != values.nrows() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} anchors for {} rows",
                        anchors.len(),
                        values.nrows()
                    )));
                }
                if anchors.iter().any(|&a| a >= values.ncols()) {
                    return Err(Error::DimensionMismatch("anchor index out of range".into()));
                }
            }
            None => {
                if values.nrows() != values.ncols() {
                    return Err(Error::DimensionMismatch(format!(
                        "non-square {}x{} metric without anchors",
                        values.nrows(),
                        values.ncols()
                    )));
                }
                for i in 0..values.nrows() {
                    for j in (i + 1)..values.ncols() {
                        if (values[(i, j)] - values[(j, i)]).abs() > 1e-9 {
                            return Err(Error::DimensionMismatch(format!(
                                "asymmetric metric at ({i},{j})"
                            )));
                        }
                    }
                    values[(i, i)] = 0.0;
                }
            }
        }
        Ok(Self {
            values,
            kind,
            anchor_indices,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// For anchored metrics, the sample index behind each row.
    pub fn anchor_indices(&self) -> Option<&[usize]> {
        self.anchor_indices.as_deref()
    }

    /// Number of samples (columns).
    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }
}

/// A neighborhood query: either a sample index or an off-sample point
/// (e.g. a pair midpoint) in one or both observation spaces.
#[derive(Debug, Clone)]
pub enum NeighborhoodQuery {
    Index(usize),
    Point {
        x: DVector<f64>,
        y: Option<DVector<f64>>,
    },
}

fn validate_spec(spec: &NeighborhoodSpec) -> Result<()> {
    match spec {
        NeighborhoodSpec::TimeWindow { width } if *width < 2 => Err(Error::DimensionMismatch(
            format!("time window width must be at least 2, got {width}"),
        )),
        NeighborhoodSpec::KNearest { k, .. } if *k < 2 => Err(Error::DimensionMismatch(format!(
            "k-nearest neighborhoods need k >= 2, got {k}"
        ))),
        _ => Ok(()),
    }
}

/// Indices of the `k` samples nearest to `point`, sorted by (distance,
/// index). Returns all samples when `k >= N`.
fn k_nearest(data: &DataMatrix, point: &DVector<f64>, k: usize) -> Vec<usize> {
    let n = data.n_samples();
    let mut scored: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let mut d2 = 0.0;
            for j in 0..data.dim() {
                let diff = data.values()[(i, j)] - point[j];
                d2 += diff * diff;
            }
            (d2, i)
        })
        .collect();
    let k = k.min(n);
    let cmp = |a: &(f64, usize), b: &(f64, usize)| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then(a.1.cmp(&b.1))
    };
    if k < n {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// Resolves a neighborhood query against row-aligned data sets.
///
/// Time windows keep their full width by shifting at the boundaries (width 8
/// at index 0 yields `{0..=7}`); they reject off-sample point queries.
/// K-nearest neighborhoods measure distance in the space chosen by the
/// spec's [`NeighborSpace`] and include the query sample itself.
pub fn neighborhood(
    query: &NeighborhoodQuery,
    x: &DataMatrix,
    y: Option<&DataMatrix>,
    spec: &NeighborhoodSpec,
) -> Result<Vec<usize>> {
    validate_spec(spec)?;
    let n = x.n_samples();
    match spec {
        NeighborhoodSpec::TimeWindow { width } => {
            let i = match query {
                NeighborhoodQuery::Index(i) => *i,
                NeighborhoodQuery::Point { .. } => return Err(Error::TimeWindowAtMidpoint),
            };
            if i >= n {
                return Err(Error::DimensionMismatch(format!(
                    "index {i} out of {n} samples"
                )));
            }
            let w = (*width).min(n);
            let ideal_start = i as isize - (w as isize / 2 - 1);
            let start = ideal_start.clamp(0, (n - w) as isize) as usize;
            Ok((start..start + w).collect())
        }
        NeighborhoodSpec::KNearest { k, on } => {
            let (data, point) = match on {
                NeighborSpace::X | NeighborSpace::Both => {
                    let p = match query {
                        NeighborhoodQuery::Index(i) => x.row_vector(*i),
                        NeighborhoodQuery::Point { x: px, .. } => px.clone(),
                    };
                    (x, p)
                }
                NeighborSpace::Y => {
                    let yd = y.ok_or_else(|| {
                        Error::DimensionMismatch("y-space neighborhood without y data".into())
                    })?;
                    let p = match query {
                        NeighborhoodQuery::Index(i) => yd.row_vector(*i),
                        NeighborhoodQuery::Point { y: Some(py), .. } => py.clone(),
                        NeighborhoodQuery::Point { y: None, .. } => {
                            return Err(Error::DimensionMismatch(
                                "y-space neighborhood query without y point".into(),
                            ))
                        }
                    };
                    (yd, p)
                }
            };
            if point.len() != data.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "query point has {} dims, data has {}",
                    point.len(),
                    data.dim()
                )));
            }
            let idxs = k_nearest(data, &point, *k);
            if idxs.is_empty() {
                return Err(Error::EmptyNeighborhood);
            }
            Ok(idxs)
        }
    }
}

/// Attenuation factors from one local fit; quadratic forms are
/// `||F^T delta||^2`, averaged over sides when both are present.
struct LocalForm {
    f_x: Option<DMatrix<f64>>,
    f_y: Option<DMatrix<f64>>,
}

impl LocalForm {
    fn from_model(model: &CcaModel, side: MetricSide) -> Self {
        match side {
            MetricSide::X => Self {
                f_x: Some(attenuation_factor(model, Side::X)),
                f_y: None,
            },
            MetricSide::Y => Self {
                f_x: None,
                f_y: Some(attenuation_factor(model, Side::Y)),
            },
            MetricSide::Average => Self {
                f_x: Some(attenuation_factor(model, Side::X)),
                f_y: Some(attenuation_factor(model, Side::Y)),
            },
        }
    }

    fn apply(&self, dx: &DVector<f64>, dy: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        let mut sides = 0.0;
        if let Some(f) = &self.f_x {
            total += (f.transpose() * dx).norm_squared();
            sides += 1.0;
        }
        if let Some(f) = &self.f_y {
            total += (f.transpose() * dy).norm_squared();
            sides += 1.0;
        }
        total / sides
    }
}

fn fit_local(
    x: &DataMatrix,
    y: &DataMatrix,
    indices: &[usize],
    params: &LocalCcaParams,
) -> Result<LocalForm> {
    if indices.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let model = fit_cca(
        &x.select_rows(indices),
        &y.select_rows(indices),
        params.ridge,
        params.rel_tol,
    )?;
    Ok(LocalForm::from_model(&model, params.side))
}

fn check_aligned(x: &DataMatrix, y: &DataMatrix) -> Result<()> {
    if x.n_samples() != y.n_samples() {
        return Err(Error::SampleCountMismatch {
            left: x.n_samples(),
            right: y.n_samples(),
        });
    }
    Ok(())
}

/// Midpoint CCA metric: for every pair, a local model is fitted around the
/// pair midpoint and evaluated on the pair difference. K-nearest
/// neighborhoods only (time windows are undefined at midpoints).
pub fn metric_midpoint(
    x: &DataMatrix,
    y: &DataMatrix,
    spec: &NeighborhoodSpec,
    params: &LocalCcaParams,
) -> Result<MetricMatrix> {
    check_aligned(x, y)?;
    validate_spec(spec)?;
    if matches!(spec, NeighborhoodSpec::TimeWindow { .. }) {
        return Err(Error::TimeWindowAtMidpoint);
    }
    let n = x.n_samples();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row_vector(i);
            let yi = y.row_vector(i);
            let mut row = Vec::with_capacity(n - i - 1);
            for j in (i + 1)..n {
                let mid_x = (&xi + x.row_vector(j)) * 0.5;
                let mid_y = (&yi + y.row_vector(j)) * 0.5;
                let query = NeighborhoodQuery::Point {
                    x: mid_x,
                    y: Some(mid_y),
                };
                let idxs = neighborhood(&query, x, Some(y), spec)?;
                let form = fit_local(x, y, &idxs, params)?;
                let dx = &xi - x.row_vector(j);
                let dy = &yi - y.row_vector(j);
                row.push(form.apply(&dx, &dy));
            }
            Ok(row)
        })
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            let j = i + 1 + off;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    MetricMatrix::new(values, MetricKind::Midpoint, None)
}

/// Endpoint-averaged CCA metric: one local model per sample, pairs scored
/// with the average of the two endpoint attenuation matrices.
pub fn metric_endpoint_averaged(
    x: &DataMatrix,
    y: &DataMatrix,
    spec: &NeighborhoodSpec,
    params: &LocalCcaParams,
) -> Result<MetricMatrix> {
    check_aligned(x, y)?;
    validate_spec(spec)?;
    let n = x.n_samples();
    let forms: Vec<Result<LocalForm>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let idxs = neighborhood(&NeighborhoodQuery::Index(i), x, Some(y), spec)?;
            fit_local(x, y, &idxs, params)
        })
        .collect();
    let forms: Vec<LocalForm> = forms.into_iter().collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row_vector(i);
            let yi = y.row_vector(i);
            ((i + 1)..n)
                .map(|j| {
                    let dx = &xi - x.row_vector(j);
                    let dy = &yi - y.row_vector(j);
                    0.5 * (forms[i].apply(&dx, &dy) + forms[j].apply(&dx, &dy))
                })
                .collect()
        })
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    MetricMatrix::new(values, MetricKind::EndpointAveraged, None)
}

/// Anchored CCA metric: local models frozen at `anchors`, each row scoring
/// every sample against that anchor. Produces the rectangular input for
/// landmark kernel normalization.
pub fn metric_anchored(
    x: &DataMatrix,
    y: &DataMatrix,
    anchors: &[usize],
    spec: &NeighborhoodSpec,
    params: &LocalCcaParams,
) -> Result<MetricMatrix> {
    check_aligned(x, y)?;
    validate_spec(spec)?;
    if anchors.is_empty() {
        return Err(Error::EmptyAnchors);
    }
    let n = x.n_samples();
    if let Some(&bad) = anchors.iter().find(|&&a| a >= n) {
        return Err(Error::DimensionMismatch(format!(
            "anchor {bad} out of {n} samples"
        )));
    }
    let rows: Vec<Result<Vec<f64>>> = anchors
        .par_iter()
        .map(|&a| {
            let idxs = neighborhood(&NeighborhoodQuery::Index(a), x, Some(y), spec)?;
            let form = fit_local(x, y, &idxs, params)?;
            let xa = x.row_vector(a);
            let ya = y.row_vector(a);
            Ok((0..n)
                .map(|j| {
                    let dx = &xa - x.row_vector(j);
                    let dy = &ya - y.row_vector(j);
                    form.apply(&dx, &dy)
                })
                .collect())
        })
        .collect();
    let mut values = DMatrix::zeros(anchors.len(), n);
    for (r, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            values[(r, j)] = v;
        }
    }
    MetricMatrix::new(values, MetricKind::Anchored, Some(anchors.to_vec()))
}

/// Single-set Mahalanobis midpoint metric: the pair difference is weighted
/// by the pseudo-inverse of the local covariance at the pair midpoint. This
/// is what the CCA metric degenerates to when the observation has no
/// set-specific variables.
pub fn metric_mahalanobis(
    x: &DataMatrix,
    spec: &NeighborhoodSpec,
    rel_tol: f64,
) -> Result<MetricMatrix> {
    validate_spec(spec)?;
    if matches!(spec, NeighborhoodSpec::TimeWindow { .. }) {
        return Err(Error::TimeWindowAtMidpoint);
    }
    let n = x.n_samples();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row_vector(i);
            let mut row = Vec::with_capacity(n - i - 1);
            for j in (i + 1)..n {
                let mid = (&xi + x.row_vector(j)) * 0.5;
                let query = NeighborhoodQuery::Point { x: mid, y: None };
                let idxs = neighborhood(&query, x, None, spec)?;
                let (local_c, _) = center(&x.select_rows(&idxs));
                let scaled = local_c.values() / (idxs.len() as f64).sqrt();
                let (_, s, v) = thin_svd_sorted(&scaled);
                if s[0] <= 0.0 {
                    return Err(Error::ZeroMatrix);
                }
                let rank = (0..s.len())
                    .take_while(|&l| s[l] * s[l] >= rel_tol * s[0] * s[0])
                    .count();
                let delta = &xi - x.row_vector(j);
                let coords = v.columns(0, rank).transpose() * &delta;
                let mut d = 0.0;
                for l in 0..rank {
                    let c = coords[l] / s[l];
                    d += c * c;
                }
                row.push(d);
            }
            Ok(row)
        })
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            let j = i + 1 + off;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    MetricMatrix::new(values, MetricKind::Mahalanobis, None)
}

/// Squared Euclidean pairwise distances; the single-set baseline metric.
pub fn metric_euclidean(x: &DataMatrix) -> Result<MetricMatrix> {
    let n = x.n_samples();
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (x.row_vector(i) - x.row_vector(j)).norm_squared();
            values[(i, j)] = d;
            values[(j, i)] = d;
        }
    }
    MetricMatrix::new(values, MetricKind::Euclidean, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::{attenuation_matrix, fit_cca_population};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DataMatrix {
        DataMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    #[test]
    fn time_window_is_shift_clipped() {
        let x = gaussian_data(&mut ChaCha8Rng::seed_from_u64(0), 400, 2);
        let spec = NeighborhoodSpec::TimeWindow { width: 8 };
        let mid = neighborhood(&NeighborhoodQuery::Index(100), &x, None, &spec).unwrap();
        assert_eq!(mid, (97..=104).collect::<Vec<_>>());
        let start = neighborhood(&NeighborhoodQuery::Index(0), &x, None, &spec).unwrap();
        assert_eq!(start, (0..=7).collect::<Vec<_>>());
        let end = neighborhood(&NeighborhoodQuery::Index(399), &x, None, &spec).unwrap();
        assert_eq!(end, (392..=399).collect::<Vec<_>>());
        // Odd width 7 spans i-2..=i+4.
        let spec7 = NeighborhoodSpec::TimeWindow { width: 7 };
        let odd = neighborhood(&NeighborhoodQuery::Index(10), &x, None, &spec7).unwrap();
        assert_eq!(odd, (8..=14).collect::<Vec<_>>());
    }

    #[test]
    fn time_window_rejects_point_queries() {
        let x = gaussian_data(&mut ChaCha8Rng::seed_from_u64(0), 10, 2);
        let spec = NeighborhoodSpec::TimeWindow { width: 4 };
        let q = NeighborhoodQuery::Point {
            x: DVector::zeros(2),
            y: None,
        };
        assert!(matches!(
            neighborhood(&q, &x, None, &spec),
            Err(Error::TimeWindowAtMidpoint)
        ));
    }

    #[test]
    fn k_nearest_orders_by_distance_then_index() {
        let x = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![10.0]]).unwrap();
        let spec = NeighborhoodSpec::KNearest {
            k: 3,
            on: NeighborSpace::X,
        };
        let idxs = neighborhood(&NeighborhoodQuery::Index(1), &x, None, &spec).unwrap();
        assert_eq!(idxs, vec![1, 0, 2]);
    }

    #[test]
    fn k_nearest_caps_at_sample_count() {
        let x = gaussian_data(&mut ChaCha8Rng::seed_from_u64(1), 5, 2);
        let spec = NeighborhoodSpec::KNearest {
            k: 50,
            on: NeighborSpace::Both,
        };
        let idxs = neighborhood(&NeighborhoodQuery::Index(0), &x, None, &spec).unwrap();
        assert_eq!(idxs.len(), 5);
    }

    #[test]
    fn y_space_neighborhoods_use_y_distances() {
        // x: 0,1,2,3 evenly spaced; y reverses the ordering.
        let x = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = DataMatrix::from_rows(&[vec![3.0], vec![2.0], vec![1.0], vec![0.0]]).unwrap();
        let spec_y = NeighborhoodSpec::KNearest {
            k: 2,
            on: NeighborSpace::Y,
        };
        let idxs = neighborhood(&NeighborhoodQuery::Index(0), &x, Some(&y), &spec_y).unwrap();
        assert_eq!(idxs, vec![0, 1]);
        let spec_y_missing = NeighborhoodSpec::KNearest {
            k: 2,
            on: NeighborSpace::Y,
        };
        assert!(neighborhood(&NeighborhoodQuery::Index(0), &x, None, &spec_y_missing).is_err());
    }

    #[test]
    fn midpoint_metric_is_symmetric_nonnegative_zero_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian_data(&mut rng, 30, 2);
        let y = gaussian_data(&mut rng, 30, 2);
        let spec = NeighborhoodSpec::KNearest {
            k: 10,
            on: NeighborSpace::Both,
        };
        let m = metric_midpoint(&x, &y, &spec, &LocalCcaParams::default()).unwrap();
        let v = m.values();
        assert_eq!(v.nrows(), 30);
        for i in 0..30 {
            assert_abs_diff_eq!(v[(i, i)], 0.0);
            for j in 0..30 {
                assert!(v[(i, j)] >= 0.0);
                assert_abs_diff_eq!(v[(i, j)], v[(j, i)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn midpoint_rejects_time_windows() {
        let x = gaussian_data(&mut ChaCha8Rng::seed_from_u64(3), 12, 2);
        let spec = NeighborhoodSpec::TimeWindow { width: 4 };
        assert!(matches!(
            metric_midpoint(&x, &x, &spec, &LocalCcaParams::default()),
            Err(Error::TimeWindowAtMidpoint)
        ));
    }

    #[test]
    fn duplicated_set_midpoint_equals_mahalanobis() {
        // With y = x the CCA attenuation degenerates to the pseudo-inverted
        // local covariance, so the two estimators must agree.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian_data(&mut rng, 40, 2);
        let spec = NeighborhoodSpec::KNearest {
            k: 12,
            on: NeighborSpace::Both,
        };
        let params = LocalCcaParams {
            ridge: 0.0,
            ..LocalCcaParams::default()
        };
        let via_cca = metric_midpoint(&x, &x, &spec, &params).unwrap();
        let direct = metric_mahalanobis(&x, &spec, 1e-10).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let a = via_cca.values()[(i, j)];
                let b = direct.values()[(i, j)];
                assert!(
                    (a - b).abs() <= 1e-7 * b.abs().max(1e-9),
                    "mismatch at ({i},{j}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn mahalanobis_diagonal_covariance_example() {
        // Six points with exact sample covariance diag(4, 1); the pair
        // (1,0),(-1,0) has midpoint 0 and difference (2,0), so the local
        // Mahalanobis distance is 2^2/4 = 1.
        let c = 11.0f64.sqrt();
        let d = 3.0f64.sqrt();
        let x = DataMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![c, 0.0],
            vec![-c, 0.0],
            vec![0.0, d],
            vec![0.0, -d],
        ])
        .unwrap();
        let spec = NeighborhoodSpec::KNearest {
            k: 6,
            on: NeighborSpace::X,
        };
        let m = metric_mahalanobis(&x, &spec, 1e-10).unwrap();
        assert_abs_diff_eq!(m.values()[(0, 1)], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn anchored_metric_has_anchor_rows_and_zero_self_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = gaussian_data(&mut rng, 25, 3);
        let y = gaussian_data(&mut rng, 25, 3);
        let anchors = vec![0, 5, 10, 24];
        let spec = NeighborhoodSpec::KNearest {
            k: 8,
            on: NeighborSpace::Both,
        };
        let m = metric_anchored(&x, &y, &anchors, &spec, &LocalCcaParams::default()).unwrap();
        assert_eq!(m.values().nrows(), 4);
        assert_eq!(m.values().ncols(), 25);
        assert_eq!(m.anchor_indices().unwrap(), anchors.as_slice());
        for (r, &a) in anchors.iter().enumerate() {
            assert_abs_diff_eq!(m.values()[(r, a)], 0.0);
        }
        assert!(matches!(
            metric_anchored(&x, &y, &[], &spec, &LocalCcaParams::default()),
            Err(Error::EmptyAnchors)
        ));
    }

    #[test]
    fn anchored_metric_supports_time_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = gaussian_data(&mut rng, 30, 4);
        let y = gaussian_data(&mut rng, 30, 4);
        let anchors: Vec<usize> = (0..30).collect();
        let spec = NeighborhoodSpec::TimeWindow { width: 8 };
        let m = metric_anchored(&x, &y, &anchors, &spec, &LocalCcaParams::default()).unwrap();
        assert_eq!(m.values().nrows(), 30);
        assert!(m.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn euclidean_metric_matches_direct_distances() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let m = metric_euclidean(&x).unwrap();
        assert_abs_diff_eq!(m.values()[(0, 1)], 25.0);
    }

    #[test]
    fn constructor_clamps_trace_negatives_and_rejects_real_ones() {
        let mut v = DMatrix::zeros(2, 2);
        v[(0, 1)] = -5e-10;
        v[(1, 0)] = -5e-10;
        let m = MetricMatrix::new(v, MetricKind::Euclidean, None).unwrap();
        assert_abs_diff_eq!(m.values()[(0, 1)], 0.0);

        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 1)] = -1e-3;
        bad[(1, 0)] = -1e-3;
        assert!(matches!(
            MetricMatrix::new(bad, MetricKind::Euclidean, None),
            Err(Error::NegativeMetricEntry { .. })
        ));
    }

    #[test]
    fn population_metric_ignores_observation_specific_redraws() {
        // x = J_x [z; eps]: with the population attenuation matrix, the
        // quadratic form depends on Δz only, not on the drawn eps.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d_z = 2;
        let j_x = DMatrix::from_fn(7, d_z + 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let j_y = DMatrix::from_fn(6, d_z + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sxx = &j_x * j_x.transpose();
        let syy = &j_y * j_y.transpose();
        let mut coupling = DMatrix::zeros(4, 3);
        coupling[(0, 0)] = 1.0;
        coupling[(1, 1)] = 1.0;
        let sxy = &j_x * coupling * j_y.transpose();
        let model = fit_cca_population(&sxx, &syy, &sxy, 1e-10).unwrap();
        let a = attenuation_matrix(&model, Side::X);

        let dz = DVector::from_vec(vec![0.3, -1.1]);
        let quad = |deps: &DVector<f64>| {
            let mut latent = DVector::zeros(4);
            latent[0] = dz[0];
            latent[1] = dz[1];
            latent[2] = deps[0];
            latent[3] = deps[1];
            let dx = &j_x * latent;
            (dx.transpose() * &a * dx)[(0, 0)]
        };
        let d1 = quad(&DVector::from_vec(vec![0.7, -0.2]));
        let d2 = quad(&DVector::from_vec(vec![-2.0, 1.4]));
        assert!((d1 - d2).abs() <= 1e-6 * d1.abs().max(1.0), "{d1} vs {d2}");
        assert_abs_diff_eq!(d1, dz.norm_squared(), epsilon = 1e-6);
    }

    #[test]
    fn population_metric_invariant_to_linear_remixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let d_z = 2;
        let j_x = DMatrix::from_fn(6, d_z + 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let j_y = DMatrix::from_fn(5, d_z + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut coupling = DMatrix::zeros(4, 3);
        coupling[(0, 0)] = 1.0;
        coupling[(1, 1)] = 1.0;
        let sxx = &j_x * j_x.transpose();
        let syy = &j_y * j_y.transpose();
        let sxy = &j_x * &coupling * j_y.transpose();
        let model = fit_cca_population(&sxx, &syy, &sxy, 1e-10).unwrap();
        let a = attenuation_matrix(&model, Side::X);

        let b = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal))
            + DMatrix::identity(6, 6) * 3.0;
        let remixed =
            fit_cca_population(&(&b * &sxx * b.transpose()), &syy, &(&b * &sxy), 1e-10).unwrap();
        let a_b = attenuation_matrix(&remixed, Side::X);
        let latent = DVector::from_vec(vec![0.4, 0.9, -0.3, 1.2]);
        let dx = &j_x * latent;
        let d0 = (dx.transpose() * &a * &dx)[(0, 0)];
        let dxb = &b * &dx;
        let d1 = (dxb.transpose() * &a_b * &dxb)[(0, 0)];
        assert!((d0 - d1).abs() <= 1e-4 * d0.abs().max(1.0), "{d0} vs {d1}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]
            #[test]
            fn midpoint_metric_invariants(seed in 0u64..500) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = 10 + (seed % 8) as usize;
                let x = gaussian_data(&mut rng, n, 2);
                let y = gaussian_data(&mut rng, n, 2);
                let spec = NeighborhoodSpec::KNearest { k: 6, on: NeighborSpace::Both };
                let m = metric_midpoint(&x, &y, &spec, &LocalCcaParams::default()).unwrap();
                for i in 0..n {
                    prop_assert!(m.values()[(i, i)] == 0.0);
                    for j in 0..n {
                        prop_assert!(m.values()[(i, j)] >= 0.0);
                        prop_assert!((m.values()[(i, j)] - m.values()[(j, i)]).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
