//! Canonical correlation analysis between two observation sets, fitted from
//! samples or from exact covariances, plus the attenuation matrices that
//! turn a fitted model into a local quadratic form on observation space.
//!
//! The fit whitens each side with a truncated inverse square root of its
//! covariance and takes the SVD of the whitened cross-covariance. Squared
//! singular values are the squared canonical correlations `lambda`, clamped
//! to [0, 1]; back-transformed singular vectors are the canonical direction
//! matrices `P_x`, `P_y` normalized to unit projected variance.
//!
//! Rank-deficient inputs (fewer samples than features) are handled by
//! restricting the whitening to the sample subspace: directions whose
//! variance falls below `rel_tol * λ_max` are dropped rather than inverted.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{center, fix_column_signs, inv_sqrt_truncated, thin_svd_sorted, DataMatrix};

/// Default spectrum-truncation tolerance, relative to the top eigenvalue.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Default ridge coefficient. The effective per-side ridge added to the
/// covariance spectrum is `ridge * trace(Σ)/dim`, so the knob is
/// dimensionless and scale-free.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Which observation set an attenuation matrix acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
}

/// A fitted CCA model.
#[derive(Debug, Clone)]
pub struct CcaModel {
    /// Canonical directions for the first set, `d_x x d`, unit projected
    /// variance per column.
    pub p_x: DMatrix<f64>,
    /// Canonical directions for the second set, `d_y x d`.
    pub p_y: DMatrix<f64>,
    /// Squared canonical correlations in [0, 1], non-increasing, length `d`.
    pub lambda: DVector<f64>,
    /// Number of kept direction pairs, `d = min(rank_x, rank_y)`.
    pub rank: usize,
}

/// One whitened side of a sample fit, expressed in its sample subspace.
struct WhitenedSide {
    /// Left singular vectors of the centered data (sample space), kept cols.
    u: DMatrix<f64>,
    /// Feature-space basis of the kept subspace, `dim x rank`.
    v: DMatrix<f64>,
    /// Whitening weights `1/sqrt(s_i^2 + ridge_eff)` per kept direction.
    inv_weights: DVector<f64>,
    /// Correlation attenuation `s_i / sqrt(s_i^2 + ridge_eff)` per direction.
    shrink: DVector<f64>,
    rank: usize,
}

fn whiten_side(centered: &DataMatrix, ridge: f64, rel_tol: f64) -> Result<WhitenedSide> {
    let n = centered.n_samples() as f64;
    let scaled = centered.values() / n.sqrt();
    let (u, s, v) = thin_svd_sorted(&scaled);
    let data_scale = centered.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s[0] <= 1e-12 * data_scale.max(1e-300) {
        return Err(Error::ZeroMatrix);
    }
    // Eigenvalues of the covariance are s_i^2; truncate on the un-ridged
    // spectrum, then ridge the kept directions.
    let lambda_max = s[0] * s[0];
    let threshold = rel_tol * lambda_max;
    let rank = (0..s.len())
        .take_while(|&i| s[i] * s[i] >= threshold && s[i] > 0.0)
        .count();
    let trace: f64 = s.iter().map(|si| si * si).sum();
    let ridge_eff = ridge * trace / centered.dim() as f64;
    let inv_weights = DVector::from_fn(rank, |i, _| 1.0 / (s[i] * s[i] + ridge_eff).sqrt());
    let shrink = DVector::from_fn(rank, |i, _| s[i] * inv_weights[i]);
    Ok(WhitenedSide {
        u: u.columns(0, rank).into_owned(),
        v: v.columns(0, rank).into_owned(),
        inv_weights,
        shrink,
        rank,
    })
}

fn directions(side: &WhitenedSide, rotation: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    // P = V diag(inv_weights) R[:, 0..d]
    let weighted = DMatrix::from_fn(side.rank, d, |i, l| rotation[(i, l)] * side.inv_weights[i]);
    let mut p = &side.v * weighted;
    fix_column_signs(&mut p);
    p
}

/// Fits CCA from two row-aligned sample sets.
///
/// `ridge` is the dimensionless regularization coefficient (see
/// [`DEFAULT_RIDGE`]); `rel_tol` truncates the per-side covariance spectra
/// relative to their largest eigenvalue, restricting the whitening to the
/// sample subspace when `n < dim`.
pub fn fit_cca(x: &DataMatrix, y: &DataMatrix, ridge: f64, rel_tol: f64) -> Result<CcaModel> {
    if x.n_samples() != y.n_samples() {
        return Err(Error::SampleCountMismatch {
            left: x.n_samples(),
            right: y.n_samples(),
        });
    }
    if x.n_samples() < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            actual: x.n_samples(),
        });
    }
    let (xc, _) = center(x);
    let (yc, _) = center(y);
    let wx = whiten_side(&xc, ridge, rel_tol)?;
    let wy = whiten_side(&yc, ridge, rel_tol)?;

    // Whitened cross-covariance expressed in the two sample-subspace bases:
    // diag(shrink_x) (U_x^T U_y) diag(shrink_y).
    let mut cross = wx.u.transpose() * &wy.u;
    for i in 0..wx.rank {
        for j in 0..wy.rank {
            cross[(i, j)] *= wx.shrink[i] * wy.shrink[j];
        }
    }
    let (u_rot, sigma, v_rot) = thin_svd_sorted(&cross);
    let d = wx.rank.min(wy.rank);
    let lambda = DVector::from_fn(d, |l, _| (sigma[l] * sigma[l]).clamp(0.0, 1.0));
    Ok(CcaModel {
        p_x: directions(&wx, &u_rot, d),
        p_y: directions(&wy, &v_rot, d),
        lambda,
        rank: d,
    })
}

/// Fits CCA from exact covariances `Σxx`, `Σyy` and cross-covariance `Σxy`.
///
/// Same contract as [`fit_cca`] but without sampling or ridge regularization;
/// use it when population covariances are available in closed form.
pub fn fit_cca_population(
    sxx: &DMatrix<f64>,
    syy: &DMatrix<f64>,
    sxy: &DMatrix<f64>,
    rel_tol: f64,
) -> Result<CcaModel> {
    let (dx, dy) = (sxx.nrows(), syy.nrows());
    if sxy.nrows() != dx || sxy.ncols() != dy {
        return Err(Error::DimensionMismatch(format!(
            "cross-covariance is {}x{}, expected {}x{}",
            sxy.nrows(),
            sxy.ncols(),
            dx,
            dy
        )));
    }
    let (rx, rank_x) = inv_sqrt_truncated(sxx, rel_tol)?;
    let (ry, rank_y) = inv_sqrt_truncated(syy, rel_tol)?;
    let w = &rx * sxy * &ry;
    let (u, sigma, v) = thin_svd_sorted(&w);
    let d = rank_x.min(rank_y).min(sigma.len());
    let lambda = DVector::from_fn(d, |l, _| (sigma[l] * sigma[l]).clamp(0.0, 1.0));
    let mut p_x = &rx * u.columns(0, d).into_owned();
    let mut p_y = &ry * v.columns(0, d).into_owned();
    fix_column_signs(&mut p_x);
    fix_column_signs(&mut p_y);
    Ok(CcaModel {
        p_x,
        p_y,
        lambda,
        rank: d,
    })
}

/// Attenuation matrix `A = P diag(lambda) P^T` for the requested side.
///
/// Symmetric PSD; as a quadratic form on observation differences it weights
/// directions by how strongly they correlate with the other set.
pub fn attenuation_matrix(model: &CcaModel, side: Side) -> DMatrix<f64> {
    let f = attenuation_factor(model, side);
    &f * f.transpose()
}

/// Factor `F = P diag(sqrt(lambda))` with `A = F F^T`; cheaper than the full
/// matrix when only quadratic forms are needed.
pub fn attenuation_factor(model: &CcaModel, side: Side) -> DMatrix<f64> {
    let p = match side {
        Side::X => &model.p_x,
        Side::Y => &model.p_y,
    };
    DMatrix::from_fn(p.nrows(), model.rank, |i, l| {
        p[(i, l)] * model.lambda[l].sqrt()
    })
}
