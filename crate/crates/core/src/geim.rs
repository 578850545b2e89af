//! Generalized empirical interpolation.
//!
//! The greedy alternates two selections. It takes the training function
//! worst approximated by the current interpolant (in the chosen product on
//! the mask). Then it takes the dictionary sensor that sees that function's
//! residual best. The residual, normalized by that sensor's reading, becomes
//! the next basis function `q̃_M`. By construction `B̃_ij = σ_i(q̃_j)` is
//! lower triangular with unit diagonal, so interpolation is a forward
//! substitution.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{combine, restrict, Field, Grid, Metric, Product, SubdomainMask};
use crate::linalg::{forward_substitution, lower_inverse, max_symmetric_eigenvalue};
use crate::sensors::{Dictionary, Sensor};

/// A sensor reading smaller than this times the residual norm counts as
/// "the dictionary cannot see the residual".
pub const VISIBILITY_FLOOR: f64 = 1e-14;

/// Nested GEIM interpolation data. `history[k]` is the largest training
/// residual norm once `k` terms are in place.
#[derive(Clone, Debug, PartialEq)]
pub struct GeimModel {
    pub(crate) grid: Grid,
    pub(crate) mask: SubdomainMask,
    pub(crate) product: Product,
    pub(crate) sensors: Vec<Sensor>,
    pub(crate) basis: Vec<Field>,
    pub(crate) b: DMatrix<f64>,
    pub(crate) selected_snapshots: Vec<usize>,
    pub(crate) history: Vec<f64>,
}

impl GeimModel {
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

    /// Product used by the greedy.
    pub fn product(&self) -> Product {
        self.product
    }

    /// Selected sensors `σ_1..σ_M`.
    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    /// Dictionary indices of the selected sensors.
    pub fn sensor_ids(&self) -> Vec<usize> {
        self.sensors.iter().map(Sensor::id).collect()
    }

    pub fn basis(&self) -> &[Field] {
        &self.basis
    }

    /// `B̃_ij = σ_i(q̃_j)`, stored lower triangular.
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

    /// Readings `σ_1(φ)..σ_M(φ)`.
    pub fn measure(&self, phi: &Field, m: usize) -> Result<Vec<f64>> {
        self.check_dim(m)?;
        if phi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.sensors[..m].iter().map(|s| s.apply_values(phi.values())).collect())
    }

    /// Coefficients `α̃^M` solving `B̃ α̃ = measurements`.
    pub fn coefficients(&self, m: usize, measurements: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(m)?;
        if measurements.len() != m {
            return Err(Error::SizeMismatch {
                expected: m,
                got: measurements.len(),
            });
        }
        Ok(forward_substitution(&self.b, measurements))
    }

    /// `𝒥_M[φ]` from the field itself.
    pub fn interpolate(&self, phi: &Field, m: usize) -> Result<Field> {
        let y = self.measure(phi, m)?;
        geim_interpolate(self, m, &y)
    }

    /// Forces the greedy through the given snapshot and sensor choices,
    /// in order. Residuals and normalization follow the usual recursion.
    #[allow(clippy::too_many_arguments)]
    pub fn from_selection(
        snapshots: &[Field],
        dict: &Dictionary,
        mask: &SubdomainMask,
        product: Product,
        snapshot_order: &[usize],
        sensor_order: &[usize],
    ) -> Result<GeimModel> {
        if snapshot_order.len() != sensor_order.len() {
            return Err(Error::SizeMismatch {
                expected: snapshot_order.len(),
                got: sensor_order.len(),
            });
        }
        let available = vec![true; dict.len()];
        build(
            snapshots,
            dict,
            mask,
            product,
            snapshot_order.len(),
            0.0,
            &available,
            Some((snapshot_order, sensor_order)),
        )
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

/// Greedy GEIM over the whole dictionary.
///
/// Stops after `m_max` terms or when the largest training residual drops to
/// `tol` times the largest training norm.
pub fn geim_build(
    snapshots: &[Field],
    dict: &Dictionary,
    mask: &SubdomainMask,
    product: Product,
    m_max: usize,
    tol: f64,
) -> Result<GeimModel> {
    geim_build_excluding(snapshots, dict, mask, product, m_max, tol, &[])
}

/// As [`geim_build`], with the listed dictionary ids removed from candidacy.
pub fn geim_build_excluding(
    snapshots: &[Field],
    dict: &Dictionary,
    mask: &SubdomainMask,
    product: Product,
    m_max: usize,
    tol: f64,
    excluded: &[usize],
) -> Result<GeimModel> {
    let mut available = vec![true; dict.len()];
    for &id in excluded {
        if let Some(a) = available.get_mut(id) {
            *a = false;
        }
    }
    build(snapshots, dict, mask, product, m_max, tol, &available, None)
}

#[allow(clippy::too_many_arguments)]
fn build(
    snapshots: &[Field],
    dict: &Dictionary,
    mask: &SubdomainMask,
    product: Product,
    m_max: usize,
    tol: f64,
    available: &[bool],
    forced: Option<(&[usize], &[usize])>,
) -> Result<GeimModel> {
    let grid = *mask.grid();
    if dict.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    if dict.is_empty() {
        return Err(Error::DictionaryExhausted {
            series: 0,
            needed: 1,
            available: 0,
        });
    }
    let metric = Metric::new(mask, product);
    let mut residuals = snapshots
        .iter()
        .map(|s| restrict(s, mask))
        .collect::<Result<Vec<_>>>()?;
    let mut norms = residuals
        .iter()
        .map(|r| metric.norm(r))
        .collect::<Result<Vec<_>>>()?;
    let (_, first) = argmax_abs(norms.iter().copied()).ok_or(Error::DegenerateSnapshot { norm: 0.0 })?;
    if !(first > 0.0) {
        return Err(Error::DegenerateSnapshot { norm: first });
    }

    let mut sensors: Vec<Sensor> = Vec::new();
    let mut basis: Vec<Field> = Vec::new();
    let mut selected = Vec::new();
    let mut history = Vec::new();
    loop {
        let (worst_idx, worst) = argmax_abs(norms.iter().copied()).unwrap();
        history.push(worst);
        let step = basis.len();
        if step >= m_max || (forced.is_none() && worst <= tol * first) {
            break;
        }
        let s = match forced {
            Some((snaps, _)) => *snaps.get(step).ok_or(Error::SizeMismatch {
                expected: snapshots.len(),
                got: step,
            })?,
            None => worst_idx,
        };
        let r = residuals.get(s).ok_or(Error::SizeMismatch {
            expected: snapshots.len(),
            got: s,
        })?;
        let sensor_id = match forced {
            Some((_, ids)) => {
                if ids[step] >= dict.len() {
                    return Err(Error::SizeMismatch {
                        expected: dict.len(),
                        got: ids[step],
                    });
                }
                ids[step]
            }
            None => {
                let mut best: Option<(usize, f64)> = None;
                for (id, sn) in dict.sensors().iter().enumerate() {
                    if !available[id] {
                        continue;
                    }
                    let a = sn.apply_values(r.values()).abs();
                    if best.is_none_or(|(_, b)| a > b) {
                        best = Some((id, a));
                    }
                }
                match best {
                    Some((id, _)) => id,
                    None => {
                        return Err(Error::DictionaryExhausted {
                            series: 0,
                            needed: step + 1,
                            available: step,
                        })
                    }
                }
            }
        };
        let sensor = dict.sensors()[sensor_id].clone();
        let reading = sensor.apply_values(r.values());
        let rnorm = norms[s];
        if !(reading.abs() >= VISIBILITY_FLOOR * rnorm) || reading == 0.0 {
            return Err(Error::DegenerateResidual {
                step: step + 1,
                value: reading,
                norm: rnorm,
            });
        }
        let mut q = r.divided(reading);
        // re-impose σ_i(q) = 0 for earlier sensors against accumulated roundoff
        for (s_i, q_i) in sensors.iter().zip(&basis) {
            let c = s_i.apply_values(q.values());
            if c != 0.0 {
                q.axpy(-c, q_i)?;
            }
        }
        let q = q.divided(sensor.apply_values(q.values()));
        for (res, n) in residuals.iter_mut().zip(norms.iter_mut()) {
            let c = sensor.apply_values(res.values());
            if c != 0.0 {
                res.axpy(-c, &q)?;
                *n = metric.norm(res)?;
            }
        }
        sensors.push(sensor);
        selected.push(s);
        basis.push(q);
    }

    let m = basis.len();
    let b = DMatrix::from_fn(m, m, |i, j| {
        if j > i {
            0.0
        } else {
            sensors[i].apply_values(basis[j].values())
        }
    });
    Ok(GeimModel {
        grid,
        mask: mask.clone(),
        product,
        sensors,
        basis,
        b,
        selected_snapshots: selected,
        history,
    })
}

/// `𝒥_M[φ] = Σ α̃_j q̃_j` with `B̃ α̃ = measurements`.
pub fn geim_interpolate(model: &GeimModel, m: usize, measurements: &[f64]) -> Result<Field> {
    let alpha = model.coefficients(m, measurements)?;
    Ok(combine(model.grid, &alpha, &model.basis[..m]))
}

/// `‖φ − 𝒥_M[φ]‖` on the model mask.
pub fn geim_error(model: &GeimModel, phi: &Field, m: usize, product: Product) -> Result<f64> {
    let metric = Metric::new(&model.mask, product);
    error_with(model, &metric, phi, m)
}

/// [`geim_error`] with a prebuilt metric on the model mask.
pub fn error_with(model: &GeimModel, metric: &Metric, phi: &Field, m: usize) -> Result<f64> {
    let approx = model.interpolate(phi, m)?;
    metric.norm(&phi.sub(&approx)?)
}

/// `max ‖𝒥_M[u]‖ / ‖u‖` over the test fields (zero fields skipped).
pub fn lebesgue_empirical(model: &GeimModel, m: usize, tests: &[Field], product: Product) -> Result<f64> {
    let metric = Metric::new(&model.mask, product);
    let mut best = 0.0f64;
    for u in tests {
        let n = metric.norm(u)?;
        if n > 0.0 {
            let j = model.interpolate(u, m)?;
            best = best.max(metric.norm(&j)? / n);
        }
    }
    Ok(best)
}

/// Operator norm of `𝒥_M` over all fields on the mask, in `product`.
///
/// With `A = B̃⁻¹S` (readings to coefficients), `K` the metric matrix and
/// `G` the basis Gram matrix, `‖𝒥_M‖² = λ_max(G^{½} A K⁻¹ Aᵀ G^{½})`.
pub fn lebesgue_exact(model: &GeimModel, m: usize, product: Product) -> Result<f64> {
    model.check_dim(m)?;
    if m == 0 {
        return Ok(0.0);
    }
    let metric = Metric::new(&model.mask, product);
    let chol = metric.assemble().cholesky()?;
    let mask = &model.mask;
    let n = mask.len();

    let rows: Vec<Vec<f64>> = model.sensors[..m]
        .iter()
        .map(|s| {
            let mut v = vec![0.0; n];
            for &(k, c) in s.taps() {
                if let Some(p) = mask.position(k) {
                    v[p] += c;
                }
            }
            v
        })
        .collect();
    let riesz: Vec<Vec<f64>> = rows.iter().map(|r| chol.solve(r)).collect();
    let t = DMatrix::from_fn(m, m, |i, j| rows[i].iter().zip(&riesz[j]).map(|(a, b)| a * b).sum());
    let binv = lower_inverse(&model.b, m);
    let c = &binv * t * binv.transpose();

    let gram = gram_matrix(&metric, &model.basis[..m])?;
    let root = sym_sqrt(gram);
    let lam = max_symmetric_eigenvalue(&root * c * &root);
    Ok(lam.max(0.0).sqrt())
}

/// `2^{M−1}·max_i ‖q̃_i‖`.
pub fn pessimistic_bound(model: &GeimModel, m: usize, product: Product) -> Result<f64> {
    model.check_dim(m)?;
    if m == 0 {
        return Ok(0.0);
    }
    let metric = Metric::new(&model.mask, product);
    let mut max = 0.0f64;
    for q in &model.basis[..m] {
        max = max.max(metric.norm(q)?);
    }
    Ok(2f64.powi(m as i32 - 1) * max)
}

pub(crate) fn gram_matrix(metric: &Metric, fields: &[Field]) -> Result<DMatrix<f64>> {
    let m = fields.len();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = metric.inner(&fields[i], &fields[j])?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

fn sym_sqrt(a: DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensors::{build_dirac_dictionary, build_moment_dictionary, default_centers, KernelShape};

    fn grid() -> Grid {
        Grid::new(33, 17, [0.0, 2.0, 0.0, 1.0], 0.75).unwrap()
    }

    fn family(g: Grid) -> Vec<Field> {
        (0..15)
            .map(|k| {
                let t = 0.9 + 0.07 * k as f64;
                let s = 0.3 + 0.05 * k as f64;
                Field::from_fn(g, move |x, y| {
                    (-(x - t).powi(2) / s - (y - 0.5).powi(2)).exp() * y * (1.0 - y)
                })
            })
            .collect()
    }

    fn dict(g: Grid) -> Dictionary {
        let m = g.omega2_mask();
        let c = default_centers(&m, None, 80);
        build_moment_dictionary(g, &m, &c, 3.0 * g.hx().max(g.hy()), KernelShape::Bump).unwrap()
    }

    #[test]
    fn single_snapshot_first_step() {
        let g = grid();
        let snaps = vec![family(g).swap_remove(3)];
        let d = dict(g);
        let mask = g.omega2_closure_mask();
        let model = geim_build(&snaps, &d, &mask, Product::L2, 5, 1e-12).unwrap();
        assert_eq!(model.len(), 1);
        let phi = restrict(&snaps[0], &mask).unwrap();
        let (best, _) = argmax_abs(d.sensors().iter().map(|s| s.apply_values(phi.values()))).unwrap();
        assert_eq!(model.sensor_ids(), vec![best]);
        let q = phi.divided(d.sensors()[best].apply_values(phi.values()));
        assert!(model.basis()[0].sub(&q).unwrap().sup_norm(&mask) < 1e-14);
    }

    #[test]
    fn dirac_dictionary_on_three_nodes() {
        let g = Grid::new(3, 3, [0.0, 1.0, 0.0, 1.0], 0.5).unwrap();
        let snaps = vec![Field::constant(g, 1.0), Field::from_fn(g, |x, _| x)];
        let mask = g.full_mask();
        let d = build_dirac_dictionary(g, &mask).unwrap();
        let model = geim_build(&snaps, &d, &mask, Product::L2, 4, 1e-12).unwrap();
        assert_eq!(model.len(), 2);
        let eim = crate::eim::eim_build(&snaps, &mask, 4, 1e-12).unwrap();
        let centers: Vec<usize> = model.sensors().iter().map(|s| s.center()).collect();
        assert_eq!(centers, eim.points());
        for s in &snaps {
            let j = model.interpolate(s, 2).unwrap();
            assert!(j.sub(s).unwrap().sup_norm(&mask) < 1e-15);
        }
    }

    #[test]
    fn structure_consistency_and_idempotence() {
        let g = grid();
        let snaps = family(g);
        let d = dict(g);
        let mask = g.omega2_closure_mask();
        for product in [Product::L2, Product::H1] {
            let model = geim_build(&snaps, &d, &mask, product, 8, 1e-12).unwrap();
            let n = model.len();
            assert!(n >= 4);
            let b = model.matrix();
            for i in 0..n {
                assert!((b[(i, i)] - 1.0).abs() < 1e-12);
                for j in 0..n {
                    if j > i {
                        assert_eq!(b[(i, j)], 0.0);
                        // the true readings above the diagonal vanish up to amplified roundoff
                        let v = model.sensors()[i].apply_values(model.basis()[j].values());
                        let h = model.history();
                        assert!(v.abs() < 1e-12 * h[0] / h[j]);
                    } else {
                        assert!(b[(i, j)].abs() <= 1.0 + 1e-10);
                    }
                }
            }
            let ids = model.sensor_ids();
            let mut sorted = ids.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), ids.len());

            let metric = Metric::new(&mask, product);
            let gram = gram_matrix(&metric, model.basis()).unwrap();
            let eig = gram.clone().symmetric_eigenvalues();
            let (lo, hi) = eig.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            assert!(lo > 1e-12 * hi);

            let u = Field::from_fn(g, |x, y| (5.0 * x).sin() * (3.0 * y).cos() + x * y);
            for m in 1..=n {
                let y = model.measure(&u, m).unwrap();
                let j = model.interpolate(&u, m).unwrap();
                let back = model.measure(&j, m).unwrap();
                let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for (a, b) in y.iter().zip(&back) {
                    assert!((a - b).abs() <= 1e-10 * scale, "{product:?} {m} {a} {b}");
                }
                let jj = model.interpolate(&j, m).unwrap();
                assert!(jj.sub(&j).unwrap().sup_norm(&mask) <= 1e-10 * j.sup_norm(&mask));
            }
        }
    }

    #[test]
    fn basis_and_span_reproduction() {
        let g = grid();
        let model = geim_build(&family(g), &dict(g), &g.omega2_closure_mask(), Product::L2, 6, 1e-12).unwrap();
        let n = model.len();
        let metric = Metric::new(model.mask(), Product::L2);
        for k in 0..n {
            let y = model.measure(&model.basis()[k], n).unwrap();
            let j = geim_interpolate(&model, n, &y).unwrap();
            assert!(metric.norm(&j.sub(&model.basis()[k]).unwrap()).unwrap() < 1e-10);
            assert!(geim_error(&model, &model.basis()[0], n.max(1), Product::L2).unwrap() < 1e-12);
        }
        let z = geim_interpolate(&model, n, &vec![0.0; n]).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let c = [0.4, -1.1, 2.3, 0.05, -0.7, 1.9];
        let psi = combine(g, &c[..n], model.basis());
        let j = model.interpolate(&psi, n).unwrap();
        assert!(metric.norm(&j.sub(&psi).unwrap()).unwrap() <= 1e-10 * metric.norm(&psi).unwrap());
        assert!(matches!(geim_interpolate(&model, n + 1, &vec![0.0; n + 1]), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn termination_and_history() {
        let g = grid();
        let snaps = family(g);
        let tol = 1e-9;
        let model = geim_build(&snaps, &dict(g), &g.omega2_closure_mask(), Product::L2, 40, tol).unwrap();
        let h = model.history();
        assert_eq!(h.len(), model.len() + 1);
        assert!(*h.last().unwrap() <= tol * h[0]);
        for s in &snaps {
            assert!(geim_error(&model, s, model.len(), Product::L2).unwrap() <= tol * h[0] * 1.0001);
        }
    }

    #[test]
    fn nested_prefixes() {
        let g = grid();
        let (snaps, d, mask) = (family(g), dict(g), g.omega2_closure_mask());
        let big = geim_build(&snaps, &d, &mask, Product::L2, 7, 0.0).unwrap();
        let small = geim_build(&snaps, &d, &mask, Product::L2, 3, 0.0).unwrap();
        assert_eq!(&big.sensor_ids()[..3], &small.sensor_ids()[..]);
        assert_eq!(&big.basis()[..3], small.basis());
        assert_eq!(&big.selected_snapshots()[..3], small.selected_snapshots());
    }

    #[test]
    fn degenerate_inputs() {
        let g = grid();
        let d = dict(g);
        let mask = g.omega2_closure_mask();
        assert!(matches!(
            geim_build(&[Field::zeros(g)], &d, &mask, Product::L2, 3, 1e-12),
            Err(Error::DegenerateSnapshot { .. })
        ));
        // a field living only on the interface column is invisible to Ω₂ sensors
        let ghost = restrict(&Field::from_fn(g, |_, y| y * (1.0 - y)), &g.interface_mask()).unwrap();
        assert!(matches!(
            geim_build(&[ghost], &d, &mask, Product::L2, 3, 1e-12),
            Err(Error::DegenerateResidual { step: 1, .. })
        ));
    }

    #[test]
    fn lebesgue_rank_one() {
        let g = grid();
        let d = dict(g);
        let sensor = &d.sensors()[d.len() / 2];
        let w = sensor.kernel_field(g);
        let mask = g.omega2_closure_mask();
        let model = geim_build(&[w.clone()], &d, &mask, Product::L2, 1, 1e-12).unwrap();
        assert_eq!(model.sensor_ids(), vec![sensor.id()]);
        let metric = Metric::new(&mask, Product::L2);
        let want = metric.norm(&model.basis()[0]).unwrap() * metric.norm(&w).unwrap();
        let got = lebesgue_exact(&model, 1, Product::L2).unwrap();
        assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
        assert!((got - 1.0).abs() < 1e-10);
        let emp = lebesgue_empirical(&model, 1, &model.basis()[..1], Product::L2).unwrap();
        assert!((emp - 1.0).abs() < 1e-12);
        assert!((pessimistic_bound(&model, 1, Product::L2).unwrap() - metric.norm(&model.basis()[0]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn lebesgue_ordering() {
        let g = grid();
        let snaps = family(g);
        let model = geim_build(&snaps, &dict(g), &g.omega2_closure_mask(), Product::L2, 6, 1e-12).unwrap();
        for product in [Product::L2, Product::H1] {
            for m in 1..=model.len() {
                let emp = lebesgue_empirical(&model, m, &snaps, product).unwrap();
                let exact = lebesgue_exact(&model, m, product).unwrap();
                assert!(emp <= exact * (1.0 + 1e-10), "{emp} > {exact}");
                assert!(exact >= 1.0 - 1e-10);
                assert!(exact <= pessimistic_bound(&model, m, product).unwrap() * (1.0 + 1e-12));
            }
        }
    }

    fn power_norm(model: &GeimModel, m: usize, product: Product) -> f64 {
        let mask = model.mask();
        let n = mask.len();
        let g = *model.grid();
        let k = Metric::new(mask, product).assemble();
        let kd = DMatrix::from_fn(n, n, |i, j| if j <= i { k.get(i, j) } else { k.get(j, i) });
        let l = kd.cholesky().unwrap().l();
        let mut j = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut e = Field::zeros(g);
            e.values_mut()[mask.nodes()[c]] = 1.0;
            let img = model.interpolate(&e, m).unwrap();
            for (r, &node) in mask.nodes().iter().enumerate() {
                j[(r, c)] = img.at(node);
            }
        }
        let lt_inv = l.transpose().try_inverse().unwrap();
        let op = l.transpose() * j * lt_inv;
        let ata = op.transpose() * &op;
        let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.37).sin());
        let mut lam = 0.0;
        for _ in 0..20_000 {
            let w = &ata * &v;
            let next = w.norm() / v.norm();
            v = w / next;
            if (next - lam).abs() <= 1e-15 * next {
                lam = next;
                break;
            }
            lam = next;
        }
        lam.sqrt()
    }

    #[test]
    fn lebesgue_matches_power_iteration() {
        let g = Grid::new(21, 11, [0.0, 2.0, 0.0, 1.0], 0.75).unwrap();
        let m = g.omega2_mask();
        let c = default_centers(&m, None, 30);
        let d = build_moment_dictionary(g, &m, &c, 3.0 * g.hx().max(g.hy()), KernelShape::Bump).unwrap();
        let model = geim_build(&family(g), &d, &g.omega2_closure_mask(), Product::L2, 4, 1e-12).unwrap();
        for product in [Product::L2, Product::H1] {
            for k in 1..=model.len() {
                let exact = lebesgue_exact(&model, k, product).unwrap();
                let oracle = power_norm(&model, k, product);
                assert!((exact - oracle).abs() <= 1e-8 * oracle, "{product:?} {k} {exact} {oracle}");
            }
        }
    }
}
