//! Parametrized Poisson problem `−Δφ = 1 + (α sin x + β cos(γπy))·χ₁` with
//! Dirichlet data, discretized by the 5-point finite-difference stencil.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Field, Grid, SubdomainMask};
use crate::linalg::{conjugate_gradient, BandedCholesky, SymmetricBanded};

/// Above this many unknowns the solver switches from banded Cholesky to CG.
pub const DIRECT_SOLVER_LIMIT: usize = 100_000;
const CG_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamPoint {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ParamPoint {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> ParamPoint {
        ParamPoint { alpha, beta, gamma }
    }
}

/// Uniform samples of one parameter; a single sample sits at the midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ParamAxis {
    pub fn new(min: f64, max: f64, count: usize) -> ParamAxis {
        ParamAxis { min, max, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![0.5 * (self.min + self.max)],
            n => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        self.max
                    } else {
                        self.min + (self.max - self.min) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }

    /// Midpoint of the sampling cell a quarter of the way along the axis
    /// (the axis midpoint for a single sample). Away from the centre, so a
    /// range symmetric about 0 does not yield the value 0.
    pub fn held_out(&self) -> f64 {
        let v = self.values();
        if v.len() < 2 {
            return 0.5 * (self.min + self.max);
        }
        let c = (v.len() - 1) / 4;
        0.5 * (v[c] + v[c + 1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamRanges {
    pub alpha: ParamAxis,
    pub beta: ParamAxis,
    pub gamma: ParamAxis,
}

impl ParamRanges {
    /// Tensor sampling with `α` varying fastest.
    pub fn points(&self) -> Vec<ParamPoint> {
        let (a, b, g) = (self.alpha.values(), self.beta.values(), self.gamma.values());
        let mut out = Vec::with_capacity(a.len() * b.len() * g.len());
        for &gamma in &g {
            for &beta in &b {
                for &alpha in &a {
                    out.push(ParamPoint { alpha, beta, gamma });
                }
            }
        }
        out
    }

    pub fn held_out(&self) -> ParamPoint {
        ParamPoint::new(self.alpha.held_out(), self.beta.held_out(), self.gamma.held_out())
    }
}

/// Right-hand side `1 + (α sin x + β cos(γπy))` on `chi1`, `1` elsewhere.
pub fn forcing(p: ParamPoint, grid: Grid, chi1: &SubdomainMask) -> Result<Field> {
    if chi1.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let mut f = Field::constant(grid, 1.0);
    let v = f.values_mut();
    for &k in chi1.nodes() {
        let (x, y) = grid.point(k);
        v[k] += p.alpha * x.sin() + p.beta * (p.gamma * std::f64::consts::PI * y).cos();
    }
    Ok(f)
}

#[derive(Clone, Debug)]
enum Backend {
    Direct(BandedCholesky),
    Iterative,
}

/// Dirichlet solver on the column block `i_lo ..= i_hi` of a grid. The
/// block's outer columns and the bottom and top rows carry boundary data.
#[derive(Clone, Debug)]
pub struct LaplaceSolver {
    grid: Grid,
    i_lo: usize,
    i_hi: usize,
    mx: usize,
    my: usize,
    x_fastest: bool,
    backend: Backend,
}

impl LaplaceSolver {
    /// Solver on the whole grid.
    pub fn global(grid: Grid) -> Result<LaplaceSolver> {
        LaplaceSolver::new(grid, 0, grid.nx() - 1)
    }

    /// Solver on the closure of `Ω₁` (interface column as right boundary).
    pub fn omega1(grid: Grid) -> Result<LaplaceSolver> {
        LaplaceSolver::new(grid, 0, grid.interface_col())
    }

    pub fn new(grid: Grid, i_lo: usize, i_hi: usize) -> Result<LaplaceSolver> {
        if i_hi >= grid.nx() || i_hi < i_lo + 2 {
            return Err(Error::InvalidGeometry(format!(
                "column block {i_lo}..={i_hi} has no interior"
            )));
        }
        let mx = i_hi - i_lo - 1;
        let my = grid.ny() - 2;
        let x_fastest = mx <= my;
        let mut solver = LaplaceSolver {
            grid,
            i_lo,
            i_hi,
            mx,
            my,
            x_fastest,
            backend: Backend::Iterative,
        };
        if mx * my <= DIRECT_SOLVER_LIMIT {
            solver.backend = Backend::Direct(solver.assemble().cholesky()?);
        }
        Ok(solver)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn unknowns(&self) -> usize {
        self.mx * self.my
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.backend, Backend::Direct(_))
    }

    /// Whether node `k` lies in the closed block.
    pub fn in_region(&self, k: usize) -> bool {
        let (i, _) = self.grid.ij(k);
        i >= self.i_lo && i <= self.i_hi
    }

    fn is_unknown(&self, i: usize, j: usize) -> bool {
        i > self.i_lo && i < self.i_hi && j > 0 && j + 1 < self.grid.ny()
    }

    #[inline]
    fn unknown(&self, i: usize, j: usize) -> usize {
        let (a, b) = (i - self.i_lo - 1, j - 1);
        if self.x_fastest {
            a + self.mx * b
        } else {
            b + self.my * a
        }
    }

    fn node_of(&self, u: usize) -> (usize, usize) {
        let (a, b) = if self.x_fastest {
            (u % self.mx, u / self.mx)
        } else {
            (u / self.my, u % self.my)
        };
        (a + self.i_lo + 1, b + 1)
    }

    fn coefficients(&self) -> (f64, f64, f64) {
        let cx = 1.0 / (self.grid.hx() * self.grid.hx());
        let cy = 1.0 / (self.grid.hy() * self.grid.hy());
        (2.0 * (cx + cy), cx, cy)
    }

    fn assemble(&self) -> SymmetricBanded {
        let n = self.unknowns();
        let bw = if self.x_fastest { self.mx } else { self.my };
        let (d, cx, cy) = self.coefficients();
        let mut a = SymmetricBanded::zeros(n, bw);
        for u in 0..n {
            let (i, j) = self.node_of(u);
            a.add(u, u, d);
            for (ni, nj, c) in [(i - 1, j, cx), (i, j - 1, cy)] {
                if self.is_unknown(ni, nj) {
                    let v = self.unknown(ni, nj);
                    let (hi, lo) = if v > u { (v, u) } else { (u, v) };
                    a.add(hi, lo, -c);
                }
            }
        }
        a
    }

    fn apply_operator(&self, x: &[f64], y: &mut [f64]) {
        let (d, cx, cy) = self.coefficients();
        for (u, out) in y.iter_mut().enumerate() {
            let (i, j) = self.node_of(u);
            let mut s = d * x[u];
            for (ni, nj, c) in [(i - 1, j, cx), (i + 1, j, cx), (i, j - 1, cy), (i, j + 1, cy)] {
                if self.is_unknown(ni, nj) {
                    s -= c * x[self.unknown(ni, nj)];
                }
            }
            *out = s;
        }
    }

    /// Solves `−Δₕφ = f` in the block interior with `φ = boundary` on the
    /// block boundary. The result is zero outside the closed block.
    pub fn solve(&self, f: &Field, boundary: &Field) -> Result<Field> {
        f.same_grid(boundary)?;
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let g = self.grid;
        let (_, cx, cy) = self.coefficients();
        let n = self.unknowns();
        let mut rhs = vec![0.0; n];
        let bv = boundary.values();
        for (u, r) in rhs.iter_mut().enumerate() {
            let (i, j) = self.node_of(u);
            let mut s = f.at(g.index(i, j));
            for (ni, nj, c) in [(i - 1, j, cx), (i + 1, j, cx), (i, j - 1, cy), (i, j + 1, cy)] {
                if !self.is_unknown(ni, nj) {
                    s += c * bv[g.index(ni, nj)];
                }
            }
            *r = s;
        }
        let x = match &self.backend {
            Backend::Direct(chol) => chol.solve(&rhs),
            Backend::Iterative => {
                let (x, _) = conjugate_gradient(
                    |a, b| self.apply_operator(a, b),
                    &rhs,
                    CG_TOLERANCE,
                    20 * n + 100,
                );
                x
            }
        };
        let mut out = Field::zeros(g);
        let v = out.values_mut();
        for j in 0..g.ny() {
            for i in self.i_lo..=self.i_hi {
                let k = g.index(i, j);
                v[k] = if self.is_unknown(i, j) { x[self.unknown(i, j)] } else { bv[k] };
            }
        }
        Ok(out)
    }

    /// `(‖A φ − f‖, ‖f‖)` in the Euclidean norm over the block unknowns,
    /// with `A` the stencil including boundary couplings.
    pub fn residual(&self, phi: &Field, f: &Field) -> (f64, f64) {
        let g = self.grid;
        let (mut r2, mut f2) = (0.0, 0.0);
        for u in 0..self.unknowns() {
            let (i, j) = self.node_of(u);
            let k = g.index(i, j);
            let r = neg_laplacian(phi, i, j) - f.at(k);
            r2 += r * r;
            f2 += f.at(k) * f.at(k);
        }
        (r2.sqrt(), f2.sqrt())
    }
}

/// `−Δₕφ` at interior node `(i, j)` by the 5-point stencil.
pub fn neg_laplacian(phi: &Field, i: usize, j: usize) -> f64 {
    let g = phi.grid();
    let cx = 1.0 / (g.hx() * g.hx());
    let cy = 1.0 / (g.hy() * g.hy());
    let v = |a: usize, b: usize| phi.at(g.index(a, b));
    cx * (2.0 * v(i, j) - v(i - 1, j) - v(i + 1, j)) + cy * (2.0 * v(i, j) - v(i, j - 1) - v(i, j + 1))
}

/// Global solve with Dirichlet data read from `dirichlet` on `∂Ω`.
pub fn solve_laplace(f: &Field, dirichlet: &Field) -> Result<Field> {
    LaplaceSolver::global(*f.grid())?.solve(f, dirichlet)
}

/// Solutions of the parametrized problem over a tensor parameter sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub grid: Grid,
    pub ranges: Option<ParamRanges>,
    pub params: Vec<ParamPoint>,
    pub fields: Vec<Field>,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Solves `−Δφ = f(p)` with homogeneous Dirichlet data for each point.
/// Results keep the order of `params`.
pub fn solve_params(solver: &LaplaceSolver, chi1: &SubdomainMask, params: &[ParamPoint]) -> Result<Vec<Field>> {
    let grid = *solver.grid();
    let zero = Field::zeros(grid);
    params
        .par_iter()
        .map(|&p| solver.solve(&forcing(p, grid, chi1)?, &zero))
        .collect()
}

pub fn generate_snapshots(ranges: ParamRanges, grid: Grid, chi1: &SubdomainMask) -> Result<SnapshotSet> {
    let solver = LaplaceSolver::global(grid)?;
    let params = ranges.points();
    let fields = solve_params(&solver, chi1, &params)?;
    Ok(SnapshotSet {
        grid,
        ranges: Some(ranges),
        params,
        fields,
    })
}
