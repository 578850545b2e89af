//! The experiment commands. Each `*_table` function computes a typed table;
//! [`run`] renders tables to CSV and gnuplot files in a directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use geim_core::coupling::{coupled_run, stability_constant};
use geim_core::geim::{error_with, geim_build, lebesgue_empirical, lebesgue_exact, pessimistic_bound};
use geim_core::io::{csv_document, encode_geim, save_snapshots};
use geim_core::noise::{build_series_ensemble, variance_study};
use geim_core::pde::generate_snapshots;
use geim_core::svd::{best_fit_error, snapshot_svd};
use geim_core::{
    CoupledResult, CoupledSolver, Dictionary, Field, GeimModel, Grid, Metric, NoiseModel, ParamAxis,
    ParamPoint, ParamRanges, Product, SnapshotSet, SubdomainMask, SvdResult, VarianceReport,
};

use crate::output::Staging;
use crate::plot::{Curve, Plot};
use crate::{CliError, Command, ExperimentConfig};

type Result<T> = std::result::Result<T, CliError>;

/// Snapshots, dictionary and masks shared by the commands.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub grid: Grid,
    pub set: SnapshotSet,
    pub dict: Dictionary,
    /// Closure of Ω₂, where snapshots are interpolated and errors measured.
    pub mask: SubdomainMask,
    pub product: Product,
}

impl Context {
    pub fn new(cfg: &ExperimentConfig) -> Result<Context> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let set = generate_snapshots(cfg.ranges(), grid, &grid.omega1_mask())?;
        let dict = cfg.dictionary(grid)?;
        Ok(Context {
            cfg: cfg.clone(),
            grid,
            set,
            dict,
            mask: grid.omega2_closure_mask(),
            product: cfg.greedy_product()?,
        })
    }

    pub fn model(&self) -> Result<GeimModel> {
        Ok(geim_build(
            &self.set.fields,
            &self.dict,
            &self.mask,
            self.product,
            self.cfg.m_max,
            self.cfg.tol,
        )?)
    }

    fn comment(&self) -> String {
        format!("config_hash={}", self.cfg.hash())
    }
}

/// Parameter grid of cell midpoints: `n − 1` points per axis with `n > 1`,
/// the single value otherwise.
pub fn midpoint_ranges(r: &ParamRanges) -> ParamRanges {
    let mid = |a: &ParamAxis| {
        if a.count > 1 {
            let h = (a.max - a.min) / (a.count - 1) as f64;
            ParamAxis::new(a.min + 0.5 * h, a.max - 0.5 * h, a.count - 1)
        } else {
            *a
        }
    };
    ParamRanges {
        alpha: mid(&r.alpha),
        beta: mid(&r.beta),
        gamma: mid(&r.gamma),
    }
}

/// Largest `‖φ − 𝒥_M φ‖` over `fields`.
pub fn worst_error(model: &GeimModel, fields: &[Field], m: usize, metric: &Metric) -> Result<f64> {
    let errs = fields
        .par_iter()
        .map(|f| error_with(model, metric, f, m))
        .collect::<geim_core::Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub m: usize,
    pub err_l2: f64,
    pub err_h1: f64,
    pub rel_l2: f64,
    pub rel_h1: f64,
}

/// Worst training error against `M`, absolute and relative to the largest
/// training norm, in both products.
pub fn decay_table(ctx: &Context, model: &GeimModel) -> Result<Vec<DecayRow>> {
    let l2 = Metric::new(&ctx.mask, Product::L2);
    let h1 = Metric::new(&ctx.mask, Product::H1);
    let max_norm = |metric: &Metric| -> Result<f64> {
        let mut best = 0.0f64;
        for f in &ctx.set.fields {
            best = best.max(metric.norm(f)?);
        }
        Ok(best)
    };
    let (n_l2, n_h1) = (max_norm(&l2)?, max_norm(&h1)?);
    (1..=model.len())
        .map(|m| {
            let err_l2 = worst_error(model, &ctx.set.fields, m, &l2)?;
            let err_h1 = worst_error(model, &ctx.set.fields, m, &h1)?;
            Ok(DecayRow {
                m,
                err_l2,
                err_h1,
                rel_l2: err_l2 / n_l2,
                rel_h1: err_h1 / n_h1,
            })
        })
        .collect()
}

pub fn svd_spectra(ctx: &Context) -> Result<(SvdResult, SvdResult)> {
    Ok((
        snapshot_svd(&ctx.set.fields, &ctx.mask, Product::L2)?,
        snapshot_svd(&ctx.set.fields, &ctx.mask, Product::H1)?,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestfitRow {
    pub m: usize,
    pub geim_l2: f64,
    pub bestfit_l2: f64,
    pub geim_h1: f64,
    pub bestfit_h1: f64,
}

impl BestfitRow {
    pub fn ratio_l2(&self) -> f64 {
        self.geim_l2 / self.bestfit_l2
    }

    pub fn ratio_h1(&self) -> f64 {
        self.geim_h1 / self.bestfit_h1
    }
}

/// Worst training GEIM error against the worst SVD best-fit error with the
/// same number of modes, in each product.
pub fn bestfit_table(ctx: &Context, model: &GeimModel, svds: &(SvdResult, SvdResult)) -> Result<Vec<BestfitRow>> {
    let l2 = Metric::new(&ctx.mask, Product::L2);
    let h1 = Metric::new(&ctx.mask, Product::H1);
    let worst_fit = |svd: &SvdResult, m: usize| -> Result<f64> {
        let errs = ctx
            .set
            .fields
            .par_iter()
            .map(|f| best_fit_error(svd, f, m))
            .collect::<geim_core::Result<Vec<f64>>>()?;
        Ok(errs.into_iter().fold(0.0, f64::max))
    };
    (1..=model.len())
        .map(|m| {
            Ok(BestfitRow {
                m,
                geim_l2: worst_error(model, &ctx.set.fields, m, &l2)?,
                bestfit_l2: worst_fit(&svds.0, m)?,
                geim_h1: worst_error(model, &ctx.set.fields, m, &h1)?,
                bestfit_h1: worst_fit(&svds.1, m)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LebesgueRow {
    pub m: usize,
    pub empirical_l2: f64,
    pub exact_l2: f64,
    pub pessimistic_l2: f64,
    pub empirical_h1: f64,
    pub exact_h1: f64,
    pub pessimistic_h1: f64,
}

/// Test fields for the empirical constant: training snapshots plus the
/// solutions at every parameter cell midpoint.
pub fn lebesgue_test_fields(ctx: &Context) -> Result<Vec<Field>> {
    let mids = generate_snapshots(midpoint_ranges(&ctx.cfg.ranges()), ctx.grid, &ctx.grid.omega1_mask())?;
    let mut fields = ctx.set.fields.clone();
    fields.extend(mids.fields);
    Ok(fields)
}

pub fn lebesgue_table(model: &GeimModel, tests: &[Field]) -> Result<Vec<LebesgueRow>> {
    (1..=model.len())
        .into_par_iter()
        .map(|m| {
            Ok(LebesgueRow {
                m,
                empirical_l2: lebesgue_empirical(model, m, tests, Product::L2)?,
                exact_l2: lebesgue_exact(model, m, Product::L2)?,
                pessimistic_l2: pessimistic_bound(model, m, Product::L2)?,
                empirical_h1: lebesgue_empirical(model, m, tests, Product::H1)?,
                exact_h1: lebesgue_exact(model, m, Product::H1)?,
                pessimistic_h1: pessimistic_bound(model, m, Product::H1)?,
            })
        })
        .collect()
}

pub struct CoupledReport {
    pub stability_constant: f64,
    pub heldout_param: ParamPoint,
    pub heldout: Vec<CoupledResult>,
    pub training_param: ParamPoint,
    pub training: Vec<CoupledResult>,
}

/// Coupled runs for a held-out truth (central cell midpoint) and for one
/// training snapshot, over `M = 1..=len`.
pub fn coupled_report(ctx: &Context, model: &GeimModel) -> Result<CoupledReport> {
    let solver = CoupledSolver::new(ctx.grid, &ctx.grid.omega1_mask())?;
    let ms: Vec<usize> = (1..=model.len()).collect();
    let heldout_param = ctx.cfg.ranges().held_out();
    let idx = ctx.cfg.training_index.unwrap_or(ctx.set.len() / 2);
    let training_param = *ctx.set.params.get(idx).ok_or_else(|| {
        CliError::Config(format!("training_index {idx} is out of range (0..{})", ctx.set.len()))
    })?;
    Ok(CoupledReport {
        stability_constant: stability_constant(&solver)?,
        heldout: coupled_run(model, heldout_param, &solver, &ms)?,
        heldout_param,
        training: coupled_run(model, training_param, &solver, &ms)?,
        training_param,
    })
}

pub fn noise_report(ctx: &Context) -> Result<VarianceReport> {
    let c = &ctx.cfg;
    let ens = build_series_ensemble(
        &ctx.set.fields,
        &ctx.dict,
        &ctx.mask,
        ctx.product,
        c.noise_series,
        c.noise_dimension,
        c.tol,
    )?;
    let nm = NoiseModel::new(c.noise_epsilon, c.seed)?;
    Ok(variance_study(&ens, nm, c.noise_dimension, c.noise_trials)?)
}

fn num(v: f64) -> String {
    v.to_string()
}

fn write_csv(st: &Staging, name: &str, header: &[&str], comment: &str, rows: Vec<Vec<String>>) -> Result<()> {
    st.write(name, csv_document(header, comment, &rows))?;
    Ok(())
}

fn coupled_rows(results: &[CoupledResult], c: f64) -> Vec<Vec<String>> {
    results
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                num(r.err_l2_omega1),
                num(r.err_h1_omega1),
                num(r.err_l2_omega2),
                num(r.err_h1_omega2),
                num(r.trace_error),
                num(c * r.trace_error),
            ]
        })
        .collect()
}

const COUPLED_HEADER: [&str; 7] = [
    "M",
    "err_l2_omega1",
    "err_h1_omega1",
    "err_l2_omega2",
    "err_h1_omega2",
    "trace_error",
    "stability_bound",
];

/// Runs `cmd` and writes its files into `dir`.
pub fn run(cmd: Command, cfg: &ExperimentConfig, st: &Staging) -> Result<()> {
    let ctx = Context::new(cfg)?;
    let comment = ctx.comment();
    match cmd {
        Command::Snapshots => {
            save_snapshots(&st.path().join("snapshots"), &ctx.set, &comment)?;
        }
        Command::Decay => {
            let model = ctx.model()?;
            let rows = decay_table(&ctx, &model)?
                .into_iter()
                .map(|r| vec![r.m.to_string(), num(r.err_l2), num(r.err_h1), num(r.rel_l2), num(r.rel_h1)])
                .collect();
            write_csv(st, "decay.csv", &["M", "err_l2", "err_h1", "rel_l2", "rel_h1"], &comment, rows)?;
            let manifest = ctx.dict.manifest_csv();
            let (head, body) = manifest.split_once('\n').unwrap_or((&manifest, ""));
            st.write("dictionary.csv", format!("{head}\n# {comment}\n{body}"))?;
            st.write("geim_model.bin", encode_geim(&model, "dictionary.csv"))?;
            let plot = Plot {
                csv: "decay.csv",
                title: "Worst training GEIM error",
                xlabel: "M",
                ylabel: "error",
                log_y: true,
                curves: vec![Curve { column: 2, title: "L2" }, Curve { column: 3, title: "H1" }],
            };
            st.write("decay.gp", plot.script())?;
        }
        Command::Svd => {
            let (l2, h1) = svd_spectra(&ctx)?;
            for (svd, name) in [(&l2, "svd_l2.csv"), (&h1, "svd_h1.csv")] {
                let s = svd.singular_values();
                let rows = s
                    .iter()
                    .enumerate()
                    .map(|(i, v)| vec![(i + 1).to_string(), num(*v), num(v / s[0])])
                    .collect();
                write_csv(st, name, &["index", "singular_value", "relative"], &comment, rows)?;
            }
            let mut script = String::new();
            for (csv, title) in [("svd_l2.csv", "L2 snapshot spectrum"), ("svd_h1.csv", "H1 snapshot spectrum")] {
                let plot = Plot {
                    csv,
                    title,
                    xlabel: "index",
                    ylabel: "sigma_k / sigma_1",
                    log_y: true,
                    curves: vec![Curve { column: 3, title }],
                };
                script.push_str(&plot.script());
            }
            st.write("svd.gp", script)?;
        }
        Command::Bestfit => {
            let model = ctx.model()?;
            let svds = svd_spectra(&ctx)?;
            let rows = bestfit_table(&ctx, &model, &svds)?
                .into_iter()
                .map(|r| {
                    vec![
                        r.m.to_string(),
                        num(r.geim_l2),
                        num(r.bestfit_l2),
                        num(r.ratio_l2()),
                        num(r.geim_h1),
                        num(r.bestfit_h1),
                        num(r.ratio_h1()),
                    ]
                })
                .collect();
            write_csv(
                st,
                "bestfit.csv",
                &["M", "geim_l2", "bestfit_l2", "ratio_l2", "geim_h1", "bestfit_h1", "ratio_h1"],
                &comment,
                rows,
            )?;
            let plot = Plot {
                csv: "bestfit.csv",
                title: "GEIM error against SVD best fit",
                xlabel: "M",
                ylabel: "worst training error",
                log_y: true,
                curves: vec![
                    Curve { column: 2, title: "GEIM L2" },
                    Curve { column: 3, title: "best fit L2" },
                    Curve { column: 5, title: "GEIM H1" },
                    Curve { column: 6, title: "best fit H1" },
                ],
            };
            st.write("bestfit.gp", plot.script())?;
        }
        Command::Lebesgue => {
            let model = ctx.model()?;
            let tests = lebesgue_test_fields(&ctx)?;
            let rows = lebesgue_table(&model, &tests)?
                .into_iter()
                .map(|r| {
                    vec![
                        r.m.to_string(),
                        num(r.empirical_l2),
                        num(r.exact_l2),
                        num(r.pessimistic_l2),
                        num(r.empirical_h1),
                        num(r.exact_h1),
                        num(r.pessimistic_h1),
                    ]
                })
                .collect();
            write_csv(
                st,
                "lebesgue.csv",
                &[
                    "M",
                    "empirical_l2",
                    "exact_l2",
                    "pessimistic_l2",
                    "empirical_h1",
                    "exact_h1",
                    "pessimistic_h1",
                ],
                &comment,
                rows,
            )?;
            let plot = Plot {
                csv: "lebesgue.csv",
                title: "Norm of the GEIM operator",
                xlabel: "M",
                ylabel: "Lebesgue constant",
                log_y: true,
                curves: vec![
                    Curve { column: 2, title: "empirical L2" },
                    Curve { column: 3, title: "exact L2" },
                    Curve { column: 5, title: "empirical H1" },
                    Curve { column: 6, title: "exact H1" },
                ],
            };
            st.write("lebesgue.gp", plot.script())?;
        }
        Command::Coupled => {
            let model = ctx.model()?;
            let rep = coupled_report(&ctx, &model)?;
            let c = rep.stability_constant;
            for (name, results, p) in [
                ("coupled_heldout.csv", &rep.heldout, rep.heldout_param),
                ("coupled_training.csv", &rep.training, rep.training_param),
            ] {
                let note = format!(
                    "{comment} alpha={} beta={} gamma={} stability_constant={c}",
                    p.alpha, p.beta, p.gamma
                );
                write_csv(st, name, &COUPLED_HEADER, &note, coupled_rows(results, c))?;
            }
            let mut script = String::new();
            for (csv, title) in [
                ("coupled_heldout.csv", "Coupled errors, held-out truth"),
                ("coupled_training.csv", "Coupled errors, training truth"),
            ] {
                let plot = Plot {
                    csv,
                    title,
                    xlabel: "M",
                    ylabel: "H1 error",
                    log_y: true,
                    curves: vec![
                        Curve { column: 3, title: "Omega1" },
                        Curve { column: 5, title: "Omega2" },
                    ],
                };
                script.push_str(&plot.script());
            }
            st.write("coupled.gp", script)?;
        }
        Command::Noise => {
            let rep = noise_report(&ctx)?;
            let row = vec![
                rep.series.to_string(),
                rep.m.to_string(),
                num(rep.epsilon),
                rep.trials.to_string(),
                num(rep.std_single[0]),
                num(rep.std_averaged),
                num(rep.predicted_ratio),
            ];
            write_csv(
                st,
                "noise.csv",
                &[
                    "P",
                    "M",
                    "epsilon",
                    "trials",
                    "empirical_std_single",
                    "empirical_std_averaged",
                    "predicted_ratio",
                ],
                &comment,
                vec![row],
            )?;
            let rows = rep
                .lambdas
                .iter()
                .zip(&rep.std_single)
                .enumerate()
                .map(|(p, (l, s))| vec![(p + 1).to_string(), num(*l), num(*s)])
                .collect();
            write_csv(st, "noise_series.csv", &["series", "lambda", "empirical_std"], &comment, rows)?;
            let plot = Plot {
                csv: "noise_series.csv",
                title: "Per-series Lebesgue constant and noise deviation",
                xlabel: "series",
                ylabel: "value",
                log_y: true,
                curves: vec![
                    Curve { column: 2, title: "Lambda^p" },
                    Curve { column: 3, title: "deviation" },
                ],
            };
            st.write("noise.gp", plot.script())?;
        }
    }
    Ok(())
}

/// Stages, runs and commits one command under `cfg.out_dir`, in a worker
/// pool of `cfg.threads` threads.
pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let out: &Path = &cfg.out_dir;
    let st = Staging::new(out, cmd)?;
    pool.install(|| run(cmd, cfg, &st))?;
    Ok(st.commit()?)
}
