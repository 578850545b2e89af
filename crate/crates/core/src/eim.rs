//! Classical empirical interpolation: greedy magic points in the sup norm.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{combine, restrict, Field, Grid, SubdomainMask};
use crate::linalg::{forward_substitution, lower_inverse};

/// Nested EIM interpolation data.
///
/// `history[k]` is the largest sup-norm residual over the training set
/// once `k` terms are in place, so `history[0]` is `max ‖φ‖_∞` and the
/// vector has one more entry than the basis.
#[derive(Clone, Debug, PartialEq)]
pub struct EimModel {
    pub(crate) grid: Grid,
    pub(crate) mask: SubdomainMask,
    pub(crate) points: Vec<usize>,
    pub(crate) basis: Vec<Field>,
    pub(crate) b: DMatrix<f64>,
    pub(crate) selected_snapshots: Vec<usize>,
    pub(crate) history: Vec<f64>,
}

impl EimModel {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &SubdomainMask {
        &self.mask
    }

    /// Magic point node indices, in selection order.
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn basis(&self) -> &[Field] {
        &self.basis
    }

    /// `B_ij = q_j(x_i)`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn selected_snapshots(&self) -> &[usize] {
        &self.selected_snapshots
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    fn check_dim(&self, m: usize) -> Result<()> {
        if m > self.len() {
            Err(Error::SizeMismatch {
                expected: self.len(),
                got: m,
            })
        } else {
            Ok(())
        }
    }

    /// Values of `φ` at the first `m` magic points.
    pub fn sample(&self, phi: &Field, m: usize) -> Result<Vec<f64>> {
        self.check_dim(m)?;
        if phi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.points[..m].iter().map(|&k| phi.at(k)).collect())
    }

    /// Expansion coefficients of the interpolant from point values.
    pub fn coefficients(&self, m: usize, point_values: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(m)?;
        if point_values.len() != m {
            return Err(Error::SizeMismatch {
                expected: m,
                got: point_values.len(),
            });
        }
        Ok(forward_substitution(&self.b, point_values))
    }
}

fn argmax_abs(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        let a = v.abs();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    best
}

/// Greedy EIM on the training set restricted to `mask`.
///
/// Stops after `m_max` terms or once every training residual has sup norm
/// at most `tol·max ‖φ‖_∞`. Ties go to the lowest snapshot or node index.
pub fn eim_build(snapshots: &[Field], mask: &SubdomainMask, m_max: usize, tol: f64) -> Result<EimModel> {
    let grid = *mask.grid();
    let mut residuals = snapshots
        .iter()
        .map(|s| restrict(s, mask))
        .collect::<Result<Vec<_>>>()?;
    let sup = |r: &Field| r.sup_norm(mask);
    let mut norms: Vec<f64> = residuals.iter().map(sup).collect();
    let (_, first) = argmax_abs(norms.iter().copied()).ok_or(Error::DegenerateSnapshot { norm: 0.0 })?;
    if !(first > 0.0) {
        return Err(Error::DegenerateSnapshot { norm: first });
    }

    let mut points = Vec::new();
    let mut basis: Vec<Field> = Vec::new();
    let mut selected = Vec::new();
    let mut history = Vec::new();
    loop {
        let (s, worst) = argmax_abs(norms.iter().copied()).unwrap();
        history.push(worst);
        if basis.len() >= m_max || worst <= tol * first {
            break;
        }
        let r = &residuals[s];
        let (p, _) = argmax_abs(mask.nodes().iter().map(|&k| r.at(k))).unwrap();
        let x = mask.nodes()[p];
        let q = r.divided(r.at(x));
        for (res, n) in residuals.iter_mut().zip(norms.iter_mut()) {
            let c = res.at(x);
            if c != 0.0 {
                res.axpy(-c, &q)?;
            }
            *n = sup(res);
        }
        points.push(x);
        selected.push(s);
        basis.push(q);
    }

    let m = basis.len();
    let b = DMatrix::from_fn(m, m, |i, j| basis[j].at(points[i]));
    Ok(EimModel {
        grid,
        mask: mask.clone(),
        points,
        basis,
        b,
        selected_snapshots: selected,
        history,
    })
}

/// `I_M[φ] = Σ αⱼ qⱼ` with `B α = point_values`.
pub fn eim_interpolate(model: &EimModel, m: usize, point_values: &[f64]) -> Result<Field> {
    let alpha = model.coefficients(m, point_values)?;
    Ok(combine(model.grid, &alpha, &model.basis[..m]))
}

/// Lagrange functions `hᵢ = Σⱼ qⱼ [B⁻¹]ⱼᵢ`, with `hᵢ(xⱼ) = δᵢⱼ`.
pub fn lagrange_functions(model: &EimModel, m: usize) -> Result<Vec<Field>> {
    model.check_dim(m)?;
    let inv = lower_inverse(&model.b, m);
    Ok((0..m)
        .map(|i| {
            let col: Vec<f64> = (0..m).map(|j| inv[(j, i)]).collect();
            combine(model.grid, &col, &model.basis[..m])
        })
        .collect())
}

/// `Λ_M = max_x Σᵢ |hᵢ(x)|` over the mask nodes.
pub fn lebesgue_linf(model: &EimModel, m: usize) -> Result<f64> {
    let h = lagrange_functions(model, m)?;
    Ok(model
        .mask
        .nodes()
        .iter()
        .map(|&k| h.iter().map(|f| f.at(k).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}
