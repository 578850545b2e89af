//! Reconstruction on Ω₂ from sensor data, then a Dirichlet solve on Ω₁
//! driven by the reconstructed interface trace.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Field, Grid, Metric, Product, SubdomainMask};
use crate::geim::GeimModel;
use crate::linalg::max_symmetric_eigenvalue;
use crate::pde::{forcing, LaplaceSolver, ParamPoint};

/// Errors of one coupled reconstruction against the global truth.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledResult {
    pub m: usize,
    pub reconstruction_omega2: Field,
    pub solution_omega1: Field,
    pub err_l2_omega1: f64,
    pub err_h1_omega1: f64,
    pub err_l2_omega2: f64,
    pub err_h1_omega2: f64,
    /// Discrete L² norm of the trace error along the interface.
    pub trace_error: f64,
}

/// Interface values bottom to top, one per grid row.
pub fn extract_trace(field: &Field) -> Vec<f64> {
    let g = field.grid();
    let ic = g.interface_col();
    (0..g.ny()).map(|j| field.at(g.index(ic, j))).collect()
}

/// Trapezoidal L² norm of a trace along the interface.
pub fn trace_norm(grid: &Grid, trace: &[f64]) -> f64 {
    let n = trace.len();
    trace
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            w * grid.hy() * t * t
        })
        .sum::<f64>()
        .sqrt()
}

fn check_trace(grid: &Grid, trace: &[f64]) -> Result<()> {
    if trace.len() != grid.ny() {
        return Err(Error::SizeMismatch {
            expected: grid.ny(),
            got: trace.len(),
        });
    }
    Ok(())
}

/// Boundary field for the Ω₁ block: trace on interior interface rows, zero
/// on the outer boundary.
fn interface_boundary(grid: Grid, trace: &[f64]) -> Field {
    let mut b = Field::zeros(grid);
    let ic = grid.interface_col();
    let v = b.values_mut();
    for j in 1..grid.ny() - 1 {
        v[grid.index(ic, j)] = trace[j];
    }
    b
}

/// Factored solvers for the global truth and the Ω₁ subproblem.
#[derive(Clone, Debug)]
pub struct CoupledSolver {
    grid: Grid,
    chi1: SubdomainMask,
    global: LaplaceSolver,
    omega1: LaplaceSolver,
}

impl CoupledSolver {
    pub fn new(grid: Grid, chi1: &SubdomainMask) -> Result<CoupledSolver> {
        if chi1.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        Ok(CoupledSolver {
            grid,
            chi1: chi1.clone(),
            global: LaplaceSolver::global(grid)?,
            omega1: LaplaceSolver::omega1(grid)?,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Global solution at `p` with homogeneous Dirichlet data.
    pub fn truth(&self, p: ParamPoint) -> Result<Field> {
        let f = forcing(p, self.grid, &self.chi1)?;
        self.global.solve(&f, &Field::zeros(self.grid))
    }

    /// Ω₁ solve with forcing at `p`, the given interface trace and zero data
    /// on the rest of ∂Ω₁.
    pub fn solve_omega1(&self, p: ParamPoint, trace: &[f64]) -> Result<Field> {
        check_trace(&self.grid, trace)?;
        let f = forcing(p, self.grid, &self.chi1)?;
        self.omega1.solve(&f, &interface_boundary(self.grid, trace))
    }

    /// Discrete harmonic extension of a trace into Ω₁.
    pub fn extend(&self, trace: &[f64]) -> Result<Field> {
        check_trace(&self.grid, trace)?;
        self.omega1
            .solve(&Field::zeros(self.grid), &interface_boundary(self.grid, trace))
    }
}

/// `𝒥_M[truth]` from the model's sensors.
pub fn reconstruct_omega2(model: &GeimModel, truth: &Field, m: usize) -> Result<Field> {
    model.interpolate(truth, m)
}

/// One-off Ω₁ solve; see [`CoupledSolver::solve_omega1`].
pub fn solve_omega1(p: ParamPoint, grid: Grid, chi1: &SubdomainMask, trace: &[f64]) -> Result<Field> {
    CoupledSolver::new(grid, chi1)?.solve_omega1(p, trace)
}

/// Reconstruct, transfer the trace and solve on Ω₁ for each `M`, reporting
/// errors against the global solution at `p_truth`.
pub fn coupled_run(
    model: &GeimModel,
    p_truth: ParamPoint,
    solver: &CoupledSolver,
    ms: &[usize],
) -> Result<Vec<CoupledResult>> {
    let grid = *solver.grid();
    if model.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let truth = solver.truth(p_truth)?;
    let true_trace = extract_trace(&truth);
    let m1 = grid.omega1_mask();
    let m2 = grid.omega2_mask();
    let metrics = [
        Metric::new(&m1, Product::L2),
        Metric::new(&m1, Product::H1),
        Metric::new(&m2, Product::L2),
        Metric::new(&m2, Product::H1),
    ];
    ms.par_iter()
        .map(|&m| {
            let recon = reconstruct_omega2(model, &truth, m)?;
            let trace = extract_trace(&recon);
            let sol = solver.solve_omega1(p_truth, &trace)?;
            let d1 = sol.sub(&truth)?;
            let d2 = recon.sub(&truth)?;
            let delta: Vec<f64> = trace.iter().zip(&true_trace).map(|(a, b)| a - b).collect();
            Ok(CoupledResult {
                m,
                err_l2_omega1: metrics[0].norm(&d1)?,
                err_h1_omega1: metrics[1].norm(&d1)?,
                err_l2_omega2: metrics[2].norm(&d2)?,
                err_h1_omega2: metrics[3].norm(&d2)?,
                trace_error: interior_trace_norm(&grid, &delta),
                reconstruction_omega2: recon,
                solution_omega1: sol,
            })
        })
        .collect()
}

fn interior_trace_norm(grid: &Grid, trace: &[f64]) -> f64 {
    let mut t = trace.to_vec();
    t[0] = 0.0;
    *t.last_mut().unwrap() = 0.0;
    trace_norm(grid, &t)
}

/// `sup_t ‖E t‖_{H¹(Ω₁)} / ‖t‖` over interface traces vanishing at the
/// corners, with `E` the discrete harmonic extension and `‖t‖` the
/// trapezoidal L² norm on the interface.
pub fn stability_constant(solver: &CoupledSolver) -> Result<f64> {
    let grid = *solver.grid();
    let rows: Vec<usize> = (1..grid.ny() - 1).collect();
    let ext = rows
        .par_iter()
        .map(|&j| {
            let mut t = vec![0.0; grid.ny()];
            t[j] = 1.0;
            solver.extend(&t)
        })
        .collect::<Result<Vec<_>>>()?;
    let metric = Metric::new(&grid.omega1_mask(), Product::H1);
    let n = rows.len();
    let scale = 1.0 / grid.hy();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = metric.inner(&ext[i], &ext[j])? * scale;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(max_symmetric_eigenvalue(a).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::restrict;
    use crate::geim::geim_build;
    use crate::pde::{generate_snapshots, ParamAxis, ParamRanges};
    use crate::sensors::{build_moment_dictionary, default_centers, KernelShape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(33, 17, [0.0, 2.0, 0.0, 1.0], 0.75).unwrap()
    }

    fn ranges() -> ParamRanges {
        ParamRanges {
            alpha: ParamAxis::new(0.5, 2.0, 3),
            beta: ParamAxis::new(0.5, 2.0, 3),
            gamma: ParamAxis::new(0.5, 3.0, 5),
        }
    }

    fn model(g: Grid) -> (GeimModel, Vec<Field>) {
        let set = generate_snapshots(ranges(), g, &g.omega1_mask()).unwrap();
        let m2 = g.omega2_mask();
        let c = default_centers(&m2, None, 80);
        let d = build_moment_dictionary(g, &m2, &c, 3.0 * g.hx().max(g.hy()), KernelShape::Bump).unwrap();
        let model = geim_build(&set.fields, &d, &g.omega2_closure_mask(), Product::L2, 20, 1e-12).unwrap();
        (model, set.fields)
    }

    #[test]
    fn trace_basics() {
        let g = grid();
        let t = extract_trace(&Field::constant(g, 2.5));
        assert_eq!(t.len(), g.ny());
        assert!(t.iter().all(|&v| v == 2.5));
        let f = Field::from_fn(g, |x, y| x + 10.0 * y);
        let t = extract_trace(&f);
        for (j, v) in t.iter().enumerate() {
            assert_eq!(*v, f.at(g.index(g.interface_col(), j)));
        }
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!((trace_norm(&g, &vec![1.0; g.ny()]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn splitting_consistency() {
        let g = grid();
        let s = CoupledSolver::new(g, &g.omega1_mask()).unwrap();
        let p = ParamPoint::new(1.3, -0.7, 2.2);
        let truth = s.truth(p).unwrap();
        let sol = s.solve_omega1(p, &extract_trace(&truth)).unwrap();
        let m1 = g.omega1_mask();
        let d = sol.sub(&truth).unwrap();
        assert!(d.sup_norm(&m1) <= 1e-10 * truth.sup_norm(&m1));
        assert!(matches!(s.solve_omega1(p, &[0.0; 3]), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn omega1_maximum_principle_and_superposition() {
        let g = grid();
        let chi1 = g.omega1_mask();
        let s = CoupledSolver::new(g, &chi1).unwrap();
        let p0 = ParamPoint::new(0.0, 0.0, 1.0);
        let sol = solve_omega1(p0, g, &chi1, &vec![0.0; g.ny()]).unwrap();
        let m1 = g.omega1_mask();
        for &k in m1.nodes() {
            if g.is_boundary(k) || g.ij(k).0 == g.interface_col() {
                assert_eq!(sol.at(k), 0.0);
            } else {
                assert!(sol.at(k) > 0.0);
            }
        }
        let t1: Vec<f64> = (0..g.ny()).map(|j| (j as f64 * 0.3).sin()).collect();
        let t2: Vec<f64> = (0..g.ny()).map(|j| (j as f64 * 0.11).cos()).collect();
        let sum: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| a + b).collect();
        let p = ParamPoint::new(0.4, 1.1, 2.0);
        let lhs = s.solve_omega1(p, &sum).unwrap();
        let base = s.solve_omega1(p, &vec![0.0; g.ny()]).unwrap();
        let mut rhs = base.clone();
        rhs.axpy(1.0, &s.extend(&t1).unwrap()).unwrap();
        rhs.axpy(1.0, &s.extend(&t2).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm(&m1) < 1e-12);
    }

    #[test]
    fn stability_constant_dominates_random_ratios() {
        let g = grid();
        let s = CoupledSolver::new(g, &g.omega1_mask()).unwrap();
        let c = stability_constant(&s).unwrap();
        assert!(c.is_finite() && c > 0.0);
        let metric = Metric::new(&g.omega1_mask(), Product::H1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut best = 0.0f64;
        for _ in 0..64 {
            let mut t: Vec<f64> = (0..g.ny()).map(|_| rng.random_range(-1.0..1.0)).collect();
            t[0] = 0.0;
            *t.last_mut().unwrap() = 0.0;
            let r = metric.norm(&s.extend(&t).unwrap()).unwrap() / trace_norm(&g, &t);
            assert!(r <= c * (1.0 + 1e-10));
            best = best.max(r);
        }
        assert!(best > 0.1 * c);
    }

    #[test]
    fn coupled_errors() {
        let g = grid();
        let (model, _) = model(g);
        let s = CoupledSolver::new(g, &g.omega1_mask()).unwrap();
        let c = stability_constant(&s).unwrap();
        let ms: Vec<usize> = (1..=model.len()).collect();
        let held = ranges().held_out();
        let res = coupled_run(&model, held, &s, &ms).unwrap();
        assert_eq!(res.len(), ms.len());
        for r in &res {
            assert!(r.err_h1_omega1 >= 0.0 && r.err_h1_omega1.is_finite());
            assert!(r.err_h1_omega1 <= c * r.trace_error * (1.0 + 1e-8) + 1e-13);
            let m2 = g.omega2_closure_mask();
            assert_eq!(restrict(&r.reconstruction_omega2, &m2).unwrap(), r.reconstruction_omega2);
        }
        let first = &res[0];
        let last = res.last().unwrap();
        assert!(last.err_h1_omega2 <= 0.1 * first.err_h1_omega2);
        assert!(last.err_h1_omega1 <= 0.1 * first.err_h1_omega1);
        let again = coupled_run(&model, held, &s, &ms).unwrap();
        assert_eq!(res, again);
    }

    #[test]
    fn training_truth_is_recovered() {
        let g = grid();
        let (model, _) = model(g);
        let s = CoupledSolver::new(g, &g.omega1_mask()).unwrap();
        let p = ranges().points()[7];
        let r = coupled_run(&model, p, &s, &[model.len()]).unwrap().remove(0);
        let scale = model.history()[0];
        assert!(r.err_h1_omega2 <= 1e-8 * scale.max(1.0));
        assert!(r.err_h1_omega1 <= 1e-8 * scale.max(1.0));
    }
}
