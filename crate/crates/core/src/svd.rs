//! Snapshot spectra and best-fit baselines in the L² or H¹ product.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{combine, restrict, Field, Metric, Product, SubdomainMask};

/// Singular values are dropped below this fraction of the largest.
pub const RANK_FLOOR: f64 = 1e-14;

/// Singular values of the snapshot set in a given product, and the matching
/// orthonormal modes.
#[derive(Clone, Debug)]
pub struct SvdResult {
    product: Product,
    mask: SubdomainMask,
    singular_values: Vec<f64>,
    modes: Vec<Field>,
}

impl SvdResult {
    pub fn product(&self) -> Product {
        self.product
    }

    pub fn mask(&self) -> &SubdomainMask {
        &self.mask
    }

    /// All singular values, nonincreasing, including those below the rank
    /// floor.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Orthonormal modes for the singular values above the rank floor.
    pub fn modes(&self) -> &[Field] {
        &self.modes
    }

    pub fn rank(&self) -> usize {
        self.modes.len()
    }
}

fn whitened_columns(fields: &[Field], metric: &Metric) -> Result<DMatrix<f64>> {
    let cols = fields
        .par_iter()
        .map(|f| metric.whiten(f))
        .collect::<Result<Vec<_>>>()?;
    let rows = metric.rows();
    Ok(DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]))
}

/// Spectrum of the snapshot operator in `product` on `mask`.
///
/// The singular values are those of the snapshot Gram matrix
/// `G_ij = ⟨φ_i, φ_j⟩` (square roots of its eigenvalues). They are computed
/// from the whitened snapshot matrix by QR followed by an SVD of the
/// triangular factor, which keeps the small
/// end of the spectrum accurate down to roundoff in `σ₁` rather than in
/// `σ₁²`.
pub fn snapshot_svd(snapshots: &[Field], mask: &SubdomainMask, product: Product) -> Result<SvdResult> {
    if snapshots.is_empty() {
        return Err(Error::SizeMismatch { expected: 1, got: 0 });
    }
    let restricted = snapshots
        .iter()
        .map(|s| restrict(s, mask))
        .collect::<Result<Vec<_>>>()?;
    let metric = Metric::new(mask, product);
    let w = whitened_columns(&restricted, &metric)?;
    // the direct SVD of a tall rank-deficient matrix is unreliable in
    // nalgebra; reduce to the square triangular factor first
    let svd = w.qr().r().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();

    let top = singular_values.first().copied().unwrap_or(0.0);
    let grid = *mask.grid();
    let mut modes: Vec<Field> = Vec::new();
    for (&k, &s) in order.iter().zip(&singular_values) {
        if !(s > RANK_FLOOR * top) {
            break;
        }
        let coeffs: Vec<f64> = (0..restricted.len()).map(|i| v_t[(k, i)] / s).collect();
        let mut mode = combine(grid, &coeffs, &restricted);
        for _ in 0..2 {
            for prev in &modes {
                let c = metric.inner(&mode, prev)?;
                mode.axpy(-c, prev)?;
            }
        }
        let n = metric.norm(&mode)?;
        if !(n > 0.0) {
            break;
        }
        modes.push(mode.divided(n));
    }
    Ok(SvdResult {
        product,
        mask: mask.clone(),
        singular_values,
        modes,
    })
}

/// `‖φ − Π_M φ‖` with `Π_M` the orthogonal projector on the first `M` modes.
/// `M` beyond the numerical rank uses every mode.
pub fn best_fit_error(svd: &SvdResult, phi: &Field, m: usize) -> Result<f64> {
    let metric = Metric::new(&svd.mask, svd.product);
    let mut r = restrict(phi, &svd.mask)?;
    for mode in svd.modes.iter().take(m) {
        let c = metric.inner(&r, mode)?;
        r.axpy(-c, mode)?;
    }
    metric.norm(&r)
}

/// Least-squares coefficients of `φ` on `basis` in the metric.
fn span_coefficients(basis: &[Field], phi: &Field, metric: &Metric) -> Result<(Vec<f64>, f64)> {
    let b = DVector::from_vec(metric.whiten(phi)?);
    if basis.is_empty() {
        return Ok((Vec::new(), b.norm()));
    }
    let a = whitened_columns(basis, metric)?;
    let qr = a.qr();
    let q = qr.q();
    let r = qr.r();
    let qtb = q.transpose() * &b;
    let residual = (&b - &q * &qtb).norm();
    let coeffs = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient {
            requested: basis.len(),
            built: 0,
        })?;
    Ok((coeffs.iter().copied().collect(), residual))
}

/// `inf_{ψ ∈ span(basis)} ‖φ − ψ‖` on `mask` in `product`.
pub fn project_span_error(basis: &[Field], phi: &Field, mask: &SubdomainMask, product: Product) -> Result<f64> {
    let metric = Metric::new(mask, product);
    let b = DVector::from_vec(metric.whiten(phi)?);
    if basis.is_empty() {
        return Ok(b.norm());
    }
    let q = whitened_columns(basis, &metric)?.qr().q();
    let qtb = q.transpose() * &b;
    Ok((&b - &q * qtb).norm())
}

/// Orthogonal projection of `φ` on `span(basis)`, as a field on the mask.
pub fn project_span(basis: &[Field], phi: &Field, mask: &SubdomainMask, product: Product) -> Result<Field> {
    let metric = Metric::new(mask, product);
    let (coeffs, _) = span_coefficients(basis, phi, &metric)?;
    Ok(combine(*mask.grid(), &coeffs, basis))
}
