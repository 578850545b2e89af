//! Discrete function spaces on a rectangular tensor grid.
//!
//! A [`Grid`] carries a vertical interface column splitting the rectangle
//! into a left subdomain `Ω₁ = {x ≤ x_Γ}` and a right subdomain
//! `Ω₂ = {x > x_Γ}`. Nodes are numbered row-major, `k = j·nx + i` with `i`
//! the column (x) index. Integrals use tensor trapezoidal weights of the
//! whole grid, restricted to a [`SubdomainMask`]; with that convention the
//! interface column belongs to `Ω₁` and subdomain integrals add up exactly.

use crate::error::{Error, Result};

/// Rectangular grid with an interior interface column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    interface_col: usize,
}

impl Grid {
    /// Builds a grid; `bounds = [x_min, x_max, y_min, y_max]`. The interface
    /// abscissa is snapped to the nearest column and must land strictly
    /// inside the grid.
    pub fn new(nx: usize, ny: usize, bounds: [f64; 4], interface_x: f64) -> Result<Grid> {
        let [x_min, x_max, y_min, y_max] = bounds;
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 3x3 nodes, got {nx}x{ny}"
            )));
        }
        if !bounds.iter().all(|b| b.is_finite()) || x_max <= x_min || y_max <= y_min {
            return Err(Error::InvalidGeometry(format!("bad bounds {bounds:?}")));
        }
        let hx = (x_max - x_min) / (nx - 1) as f64;
        let s = (interface_x - x_min) / hx;
        if !s.is_finite() {
            return Err(Error::InvalidGeometry("non-finite interface".into()));
        }
        let col = s.round();
        if (s - col).abs() > 0.5 || col < 1.0 || col > (nx - 2) as f64 {
            return Err(Error::InvalidGeometry(format!(
                "interface x = {interface_x} is not an interior grid column"
            )));
        }
        Ok(Grid {
            nx,
            ny,
            x_min,
            x_max,
            y_min,
            y_max,
            interface_col: col as usize,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Total node count `nx·ny`.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bounds(&self) -> [f64; 4] {
        [self.x_min, self.x_max, self.y_min, self.y_max]
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn interface_col(&self) -> usize {
        self.interface_col
    }

    pub fn interface_x(&self) -> f64 {
        self.x(self.interface_col)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Column and row of node `k`.
    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x_max
        } else {
            self.x_min + i as f64 * self.hx()
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            self.y_max
        } else {
            self.y_min + j as f64 * self.hy()
        }
    }

    /// Physical coordinates of node `k`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.x(i), self.y(j))
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Tensor trapezoidal weight of node `k`.
    pub fn weight(&self, k: usize) -> f64 {
        let (i, j) = self.ij(k);
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.hx() * self.hy()
    }

    pub fn full_mask(&self) -> SubdomainMask {
        SubdomainMask::from_predicate(*self, |_, _| true).expect("grid is nonempty")
    }

    /// `Ω₁` including the interface column.
    pub fn omega1_mask(&self) -> SubdomainMask {
        let c = self.interface_col;
        SubdomainMask::from_predicate(*self, |i, _| i <= c).expect("interface is interior")
    }

    /// `Ω₂` without the interface column.
    pub fn omega2_mask(&self) -> SubdomainMask {
        let c = self.interface_col;
        SubdomainMask::from_predicate(*self, |i, _| i > c).expect("interface is interior")
    }

    /// Closure of `Ω₂`: `Ω₂` plus the interface column. Restrictions to this
    /// mask still carry the interface trace.
    pub fn omega2_closure_mask(&self) -> SubdomainMask {
        let c = self.interface_col;
        SubdomainMask::from_predicate(*self, |i, _| i >= c).expect("interface is interior")
    }

    pub fn interface_mask(&self) -> SubdomainMask {
        let c = self.interface_col;
        SubdomainMask::from_predicate(*self, |i, _| i == c).expect("interface is interior")
    }
}

/// Nodal values on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at node {k}")));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Field {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Field {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.point(k);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &Field) -> Result<()> {
        self.same_grid(other)?;
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// Entrywise division; keeps `v / v == 1` exact where `scaled(1/v)`
    /// would not.
    pub fn divided(&self, d: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v / d).collect(),
        }
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Largest absolute nodal value over the mask.
    pub fn sup_norm(&self, mask: &SubdomainMask) -> f64 {
        mask.nodes()
            .iter()
            .map(|&k| self.values[k].abs())
            .fold(0.0, f64::max)
    }
}

/// Linear combination `Σ cᵢ fᵢ`; all fields share `grid`.
pub fn combine(grid: Grid, coeffs: &[f64], fields: &[Field]) -> Field {
    let mut out = Field::zeros(grid);
    for (c, f) in coeffs.iter().zip(fields) {
        if *c != 0.0 {
            for (o, v) in out.values.iter_mut().zip(&f.values) {
                *o += c * v;
            }
        }
    }
    out
}

/// A set of grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SubdomainMask {
    grid: Grid,
    nodes: Vec<usize>,
    position: Vec<usize>,
}

const NOT_IN_MASK: usize = usize::MAX;

impl SubdomainMask {
    pub fn new(grid: Grid, mut nodes: Vec<usize>) -> Result<SubdomainMask> {
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::InvalidGeometry("empty mask".into()));
        }
        if *nodes.last().unwrap() >= grid.len() {
            return Err(Error::InvalidGeometry("mask node out of range".into()));
        }
        let mut position = vec![NOT_IN_MASK; grid.len()];
        for (p, &k) in nodes.iter().enumerate() {
            position[k] = p;
        }
        Ok(SubdomainMask {
            grid,
            nodes,
            position,
        })
    }

    /// Mask of the nodes whose `(i, j)` satisfy `keep`.
    pub fn from_predicate(grid: Grid, keep: impl Fn(usize, usize) -> bool) -> Result<SubdomainMask> {
        let nodes = (0..grid.len())
            .filter(|&k| {
                let (i, j) = grid.ij(k);
                keep(i, j)
            })
            .collect();
        SubdomainMask::new(grid, nodes)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Sorted node indices.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn contains(&self, k: usize) -> bool {
        k < self.position.len() && self.position[k] != NOT_IN_MASK
    }

    /// Position of node `k` within [`nodes`](Self::nodes).
    #[inline]
    pub fn position(&self, k: usize) -> Option<usize> {
        match self.position.get(k) {
            Some(&p) if p != NOT_IN_MASK => Some(p),
            _ => None,
        }
    }
}

/// Copy of `f` on the mask, zero elsewhere.
pub fn restrict(f: &Field, mask: &SubdomainMask) -> Result<Field> {
    if f.grid != mask.grid {
        return Err(Error::GridMismatch);
    }
    let mut out = Field::zeros(f.grid);
    for &k in &mask.nodes {
        out.values[k] = f.values[k];
    }
    Ok(out)
}

/// Inner product used for norms, orthogonality and greedy selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Product {
    L2,
    H1,
}

impl Product {
    pub fn name(&self) -> &'static str {
        match self {
            Product::L2 => "l2",
            Product::H1 => "h1",
        }
    }
}

impl std::str::FromStr for Product {
    type Err = Error;

    fn from_str(s: &str) -> Result<Product> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Product::L2),
            "h1" => Ok(Product::H1),
            other => Err(Error::Format(format!("unknown product `{other}`"))),
        }
    }
}

/// One-sided or centred difference: at most two `(node, coefficient)` taps.
type Stencil = [(usize, f64); 2];

/// An inner product on a mask, in factored form `⟨f, g⟩ = (Y f)·(Y g)`.
///
/// For L² the rows of `Y` are `√wₖ eₖ`. For H¹ two more row blocks hold
/// `√wₖ ∂ₓ` and `√wₖ ∂ᵧ`, with differences centred where both neighbours
/// are in the mask and one-sided where only one is.
#[derive(Clone, Debug)]
pub struct Metric {
    mask: SubdomainMask,
    product: Product,
    sqrt_w: Vec<f64>,
    dx: Vec<Stencil>,
    dy: Vec<Stencil>,
}

impl Metric {
    pub fn new(mask: &SubdomainMask, product: Product) -> Metric {
        let grid = mask.grid;
        let sqrt_w = mask.nodes.iter().map(|&k| grid.weight(k).sqrt()).collect();
        let (dx, dy) = match product {
            Product::L2 => (Vec::new(), Vec::new()),
            Product::H1 => {
                let mut dx = Vec::with_capacity(mask.len());
                let mut dy = Vec::with_capacity(mask.len());
                for &k in &mask.nodes {
                    let (i, j) = grid.ij(k);
                    let left = (i > 0).then(|| grid.index(i - 1, j)).filter(|&n| mask.contains(n));
                    let right = (i + 1 < grid.nx)
                        .then(|| grid.index(i + 1, j))
                        .filter(|&n| mask.contains(n));
                    let down = (j > 0).then(|| grid.index(i, j - 1)).filter(|&n| mask.contains(n));
                    let up = (j + 1 < grid.ny)
                        .then(|| grid.index(i, j + 1))
                        .filter(|&n| mask.contains(n));
                    dx.push(difference(k, left, right, grid.hx()));
                    dy.push(difference(k, down, up, grid.hy()));
                }
                (dx, dy)
            }
        };
        Metric {
            mask: mask.clone(),
            product,
            sqrt_w,
            dx,
            dy,
        }
    }

    pub fn mask(&self) -> &SubdomainMask {
        &self.mask
    }

    pub fn product(&self) -> Product {
        self.product
    }

    pub fn grid(&self) -> &Grid {
        &self.mask.grid
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.grid == self.mask.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Number of rows of the factor `Y`.
    pub fn rows(&self) -> usize {
        match self.product {
            Product::L2 => self.mask.len(),
            Product::H1 => 3 * self.mask.len(),
        }
    }

    /// Applies the factor: `Y f`.
    pub fn whiten(&self, f: &Field) -> Result<Vec<f64>> {
        self.check(f)?;
        let v = &f.values;
        let n = self.mask.len();
        let mut out = Vec::with_capacity(self.rows());
        out.extend(self.mask.nodes.iter().zip(&self.sqrt_w).map(|(&k, s)| s * v[k]));
        if self.product == Product::H1 {
            for stencils in [&self.dx, &self.dy] {
                out.extend((0..n).map(|p| self.sqrt_w[p] * apply_stencil(&stencils[p], v)));
            }
        }
        Ok(out)
    }

    pub fn inner(&self, f: &Field, g: &Field) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        let (a, b) = (&f.values, &g.values);
        let mut s = 0.0;
        for (p, &k) in self.mask.nodes.iter().enumerate() {
            let w = self.sqrt_w[p] * self.sqrt_w[p];
            let mut t = a[k] * b[k];
            if self.product == Product::H1 {
                t += apply_stencil(&self.dx[p], a) * apply_stencil(&self.dx[p], b);
                t += apply_stencil(&self.dy[p], a) * apply_stencil(&self.dy[p], b);
            }
            s += w * t;
        }
        Ok(s)
    }

    pub fn norm(&self, f: &Field) -> Result<f64> {
        Ok(self.inner(f, f)?.max(0.0).sqrt())
    }

    /// The metric matrix `K = YᵀY` over mask positions, in banded form.
    pub fn assemble(&self) -> crate::linalg::SymmetricBanded {
        let n = self.mask.len();
        let pos = |k: usize| self.mask.position(k).expect("stencil stays in mask");
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for p in 0..n {
            let w = self.sqrt_w[p] * self.sqrt_w[p];
            triplets.push((p, p, w));
            if self.product == Product::H1 {
                for st in [&self.dx[p], &self.dy[p]] {
                    for &(a, ca) in st.iter() {
                        for &(b, cb) in st.iter() {
                            if ca != 0.0 && cb != 0.0 {
                                triplets.push((pos(a), pos(b), w * ca * cb));
                            }
                        }
                    }
                }
            }
        }
        let bw = triplets.iter().map(|&(a, b, _)| a.abs_diff(b)).max().unwrap_or(0);
        let mut k = crate::linalg::SymmetricBanded::zeros(n, bw);
        for (a, b, v) in triplets {
            if b <= a {
                k.add(a, b, v);
            }
        }
        k
    }
}

fn difference(k: usize, lo: Option<usize>, hi: Option<usize>, h: f64) -> Stencil {
    match (lo, hi) {
        (Some(l), Some(r)) => [(l, -0.5 / h), (r, 0.5 / h)],
        (None, Some(r)) => [(k, -1.0 / h), (r, 1.0 / h)],
        (Some(l), None) => [(l, -1.0 / h), (k, 1.0 / h)],
        (None, None) => [(k, 0.0), (k, 0.0)],
    }
}

#[inline]
fn apply_stencil(st: &Stencil, v: &[f64]) -> f64 {
    st[0].1 * v[st[0].0] + st[1].1 * v[st[1].0]
}

/// Discrete L² pairing over the mask.
pub fn inner_l2(f: &Field, g: &Field, mask: &SubdomainMask) -> Result<f64> {
    f.same_grid(g)?;
    if f.grid != mask.grid {
        return Err(Error::GridMismatch);
    }
    Metric::new(mask, Product::L2).inner(f, g)
}

/// Discrete H¹ pairing (L² part plus gradient part) over the mask.
pub fn inner_h1(f: &Field, g: &Field, mask: &SubdomainMask) -> Result<f64> {
    f.same_grid(g)?;
    if f.grid != mask.grid {
        return Err(Error::GridMismatch);
    }
    Metric::new(mask, Product::H1).inner(f, g)
}

pub fn norm(f: &Field, mask: &SubdomainMask, product: Product) -> Result<f64> {
    Metric::new(mask, product).norm(f)
}
