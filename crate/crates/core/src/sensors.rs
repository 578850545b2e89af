//! Dictionaries of linear forms: compactly supported moment sensors and
//! Dirac point evaluations.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::{Field, Grid, SubdomainMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelShape {
    /// `exp(−1/(1−(r/R)²))` for `r < R`.
    Bump,
    /// Indicator of `r ≤ R`.
    Box,
}

impl std::str::FromStr for KernelShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<KernelShape> {
        match s.to_ascii_lowercase().as_str() {
            "bump" => Ok(KernelShape::Bump),
            "box" => Ok(KernelShape::Box),
            other => Err(Error::Format(format!("unknown kernel shape `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SensorKind {
    Moment,
    Dirac,
}

impl SensorKind {
    pub fn name(&self) -> &'static str {
        match self {
            SensorKind::Moment => "moment",
            SensorKind::Dirac => "dirac",
        }
    }
}

/// A linear form `σ(φ) = Σ cₖ φₖ` with sparse taps.
///
/// For a moment sensor the taps are the quadrature-weighted kernel values
/// `cₖ = wₖ·κ(xₖ)`, so `σ(φ) = ∫ φ κ` and `‖κ‖_{L²} = 1`. A Dirac sensor has
/// a single unit tap at its node.
#[derive(Clone, Debug, PartialEq)]
pub struct Sensor {
    id: usize,
    kind: SensorKind,
    center: usize,
    radius: f64,
    taps: Vec<(usize, f64)>,
}

impl Sensor {
    /// Assembles a sensor from raw parts; used when decoding model bundles.
    pub fn from_parts(
        id: usize,
        kind: SensorKind,
        center: usize,
        radius: f64,
        taps: Vec<(usize, f64)>,
    ) -> Sensor {
        Sensor {
            id,
            kind,
            center,
            radius,
            taps,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    /// Center node index.
    pub fn center(&self) -> usize {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn taps(&self) -> &[(usize, f64)] {
        &self.taps
    }

    /// Evaluates the form on raw nodal values.
    #[inline]
    pub fn apply_values(&self, values: &[f64]) -> f64 {
        self.taps.iter().map(|&(k, c)| c * values[k]).sum()
    }

    /// The kernel `κ` as a field (taps divided by quadrature weights).
    /// Only meaningful for moment sensors.
    pub fn kernel_field(&self, grid: Grid) -> Field {
        let mut f = Field::zeros(grid);
        let v = f.values_mut();
        for &(k, c) in &self.taps {
            v[k] = match self.kind {
                SensorKind::Moment => c / grid.weight(k),
                SensorKind::Dirac => c,
            };
        }
        f
    }
}

/// Evaluates `σ(φ)`.
pub fn apply(sensor: &Sensor, field: &Field) -> Result<f64> {
    if let Some(&(k, _)) = sensor.taps.iter().max_by_key(|t| t.0) {
        if k >= field.values().len() {
            return Err(Error::GridMismatch);
        }
    }
    Ok(sensor.apply_values(field.values()))
}

/// Indexed candidate set of sensors sharing one kind and one subdomain.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    grid: Grid,
    mask: SubdomainMask,
    kind: SensorKind,
    sensors: Vec<Sensor>,
}

impl Dictionary {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &SubdomainMask {
        &self.mask
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Sensor> {
        self.sensors.get(id)
    }

    /// Sensor whose support contains node `k` as a Dirac; `None` for
    /// moment dictionaries or nodes outside the mask.
    pub fn dirac_at(&self, k: usize) -> Option<usize> {
        if self.kind != SensorKind::Dirac {
            return None;
        }
        self.mask.position(k)
    }

    /// CSV manifest `id,kind,center_x,center_y,radius`.
    pub fn manifest_csv(&self) -> String {
        let mut s = String::from("id,kind,center_x,center_y,radius\n");
        for sn in &self.sensors {
            let (x, y) = self.grid.point(sn.center);
            writeln!(s, "{},{},{},{},{}", sn.id, sn.kind.name(), x, y, sn.radius).unwrap();
        }
        s
    }
}

/// Every `stride`-th non-boundary node of `mask`, in node order. With
/// `stride = None` the stride is chosen so the count is close to `target`.
pub fn default_centers(mask: &SubdomainMask, stride: Option<usize>, target: usize) -> Vec<usize> {
    let grid = mask.grid();
    let interior: Vec<usize> = mask
        .nodes()
        .iter()
        .copied()
        .filter(|&k| !grid.is_boundary(k))
        .collect();
    let stride = stride.unwrap_or_else(|| {
        ((interior.len() as f64 / target.max(1) as f64).round() as usize).max(1)
    });
    interior.into_iter().step_by(stride.max(1)).collect()
}

/// Builds L²-normalized moment sensors centred at `centers`, each kernel
/// cut to the disc of `radius` and to `mask`.
pub fn build_moment_dictionary(
    grid: Grid,
    mask: &SubdomainMask,
    centers: &[usize],
    radius: f64,
    shape: KernelShape,
) -> Result<Dictionary> {
    if mask.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidGeometry(format!("sensor radius {radius} must be > 0")));
    }
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut sensors = Vec::with_capacity(centers.len());
    for (id, &c) in centers.iter().enumerate() {
        if c >= grid.len() {
            return Err(Error::InvalidGeometry(format!("center {c} outside grid")));
        }
        let (ci, cj) = grid.ij(c);
        let (cx, cy) = grid.point(c);
        let di = (radius / hx).floor() as usize;
        let dj = (radius / hy).floor() as usize;
        let mut taps = Vec::new();
        for j in cj.saturating_sub(dj)..=(cj + dj).min(grid.ny() - 1) {
            for i in ci.saturating_sub(di)..=(ci + di).min(grid.nx() - 1) {
                let k = grid.index(i, j);
                if !mask.contains(k) {
                    continue;
                }
                let r = (grid.x(i) - cx).hypot(grid.y(j) - cy) / radius;
                let v = match shape {
                    KernelShape::Bump if r < 1.0 => (-1.0 / (1.0 - r * r)).exp(),
                    KernelShape::Box if r <= 1.0 => 1.0,
                    _ => continue,
                };
                taps.push((k, v));
            }
        }
        if taps.is_empty() {
            return Err(Error::EmptySupport { center: c });
        }
        let norm2: f64 = taps.iter().map(|&(k, v)| grid.weight(k) * v * v).sum();
        let scale = norm2.sqrt().recip();
        for t in taps.iter_mut() {
            t.1 = grid.weight(t.0) * t.1 * scale;
        }
        sensors.push(Sensor {
            id,
            kind: SensorKind::Moment,
            center: c,
            radius,
            taps,
        });
    }
    Ok(Dictionary {
        grid,
        mask: mask.clone(),
        kind: SensorKind::Moment,
        sensors,
    })
}

/// One point evaluation per mask node.
pub fn build_dirac_dictionary(grid: Grid, mask: &SubdomainMask) -> Result<Dictionary> {
    if mask.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let sensors = mask
        .nodes()
        .iter()
        .enumerate()
        .map(|(id, &k)| Sensor {
            id,
            kind: SensorKind::Dirac,
            center: k,
            radius: 0.0,
            taps: vec![(k, 1.0)],
        })
        .collect();
    Ok(Dictionary {
        grid,
        mask: mask.clone(),
        kind: SensorKind::Dirac,
        sensors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{inner_l2, Metric, Product};
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(33, 17, [0.0, 2.0, 0.0, 1.0], 0.75).unwrap()
    }

    fn default_dict(shape: KernelShape) -> Dictionary {
        let g = grid();
        let m = g.omega2_mask();
        let centers = default_centers(&m, None, 60);
        build_moment_dictionary(g, &m, &centers, 3.0 * g.hx().max(g.hy()), shape).unwrap()
    }

    #[test]
    fn tiny_radius_is_scaled_dirac() {
        let g = grid();
        let m = g.omega2_mask();
        let c = g.index(20, 8);
        let d = build_moment_dictionary(g, &m, &[c], 0.5 * g.hx().min(g.hy()), KernelShape::Bump)
            .unwrap();
        let s = &d.sensors()[0];
        assert_eq!(s.taps().len(), 1);
        assert_eq!(s.taps()[0].0, c);
        let phi = Field::from_fn(g, |x, y| x + 3.0 * y);
        let ratio = apply(s, &phi).unwrap() / phi.at(c);
        assert!((ratio - g.weight(c).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn kernels_have_unit_l2_norm() {
        for shape in [KernelShape::Bump, KernelShape::Box] {
            let d = default_dict(shape);
            let g = *d.grid();
            for s in d.sensors() {
                let w = s.kernel_field(g);
                let n = inner_l2(&w, &w, &g.full_mask()).unwrap();
                assert!((n - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unit_dual_norm_attained_at_kernel() {
        let d = default_dict(KernelShape::Bump);
        let g = *d.grid();
        let metric = Metric::new(&g.full_mask(), Product::L2);
        for s in d.sensors().iter().step_by(7) {
            let w = s.kernel_field(g);
            let val = apply(s, &w).unwrap() / metric.norm(&w).unwrap();
            assert!((val - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_field_matches_dense_quadrature() {
        let d = default_dict(KernelShape::Bump);
        let g = *d.grid();
        let c = 2.5;
        let phi = Field::constant(g, c);
        for s in d.sensors() {
            let w = s.kernel_field(g);
            let dense: f64 = (0..g.len()).map(|k| g.weight(k) * w.at(k) * c).sum();
            assert!((apply(s, &phi).unwrap() - dense).abs() < 1e-12);
        }
    }

    #[test]
    fn support_is_compact_and_in_mask() {
        let d = default_dict(KernelShape::Bump);
        let g = *d.grid();
        for s in d.sensors() {
            let (cx, cy) = g.point(s.center());
            for &(k, _) in s.taps() {
                let (x, y) = g.point(k);
                assert!((x - cx).hypot(y - cy) < s.radius());
                assert!(d.mask().contains(k));
            }
        }
    }

    #[test]
    fn empty_support_is_reported() {
        let g = grid();
        let m = g.omega2_mask();
        let c = g.index(2, 8);
        let err = build_moment_dictionary(g, &m, &[c], 0.01, KernelShape::Bump).unwrap_err();
        assert!(matches!(err, Error::EmptySupport { center } if center == c));
    }

    #[test]
    fn dirac_dictionary() {
        let g = grid();
        let m = g.omega2_mask();
        let d = build_dirac_dictionary(g, &m).unwrap();
        assert_eq!(d.len(), m.len());
        let x = Field::from_fn(g, |x, _| x);
        for s in d.sensors() {
            let mut e = Field::zeros(g);
            e.values_mut()[s.center()] = 1.0;
            assert_eq!(apply(s, &e).unwrap(), 1.0);
            assert_eq!(apply(s, &x).unwrap(), g.point(s.center()).0);
        }
    }

    #[test]
    fn deterministic_build() {
        assert_eq!(default_dict(KernelShape::Bump), default_dict(KernelShape::Bump));
    }

    #[test]
    fn default_centers_near_target() {
        let g = Grid::new(65, 33, [0.0, 2.0, 0.0, 1.0], 0.75).unwrap();
        let c = default_centers(&g.omega2_mask(), None, 200);
        assert!((180..=220).contains(&c.len()), "{}", c.len());
        assert!(c.iter().all(|&k| !g.is_boundary(k) && g.omega2_mask().contains(k)));
    }

    #[test]
    fn zero_field_gives_zero() {
        let d = default_dict(KernelShape::Box);
        let z = Field::zeros(*d.grid());
        assert!(d.sensors().iter().all(|s| apply(s, &z).unwrap() == 0.0));
    }

    proptest! {
        #[test]
        fn linear_and_bounded(
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            seed in proptest::collection::vec(-1.0f64..1.0, 33 * 17 * 2),
        ) {
            let d = default_dict(KernelShape::Bump);
            let g = *d.grid();
            let f = Field::new(g, seed[..g.len()].to_vec()).unwrap();
            let h = Field::new(g, seed[g.len()..].to_vec()).unwrap();
            let mut comb = f.scaled(a);
            comb.axpy(b, &h).unwrap();
            let m2 = Metric::new(d.mask(), Product::L2);
            for s in d.sensors().iter().step_by(5) {
                let lhs = apply(s, &comb).unwrap();
                let rhs = a * apply(s, &f).unwrap() + b * apply(s, &h).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
                prop_assert!(apply(s, &f).unwrap().abs() <= m2.norm(&f).unwrap() * (1.0 + 1e-12));
            }
        }
    }
}
