//! Empirical and generalized empirical interpolation on a rectangular
//! finite-difference grid, with the supporting Poisson solver, snapshot SVD,
//! interface coupling and noisy-measurement tools.

pub mod coupling;
pub mod eim;
pub mod error;
pub mod field;
pub mod geim;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod pde;
pub mod sensors;
pub mod svd;

pub use coupling::{CoupledResult, CoupledSolver};
pub use eim::EimModel;
pub use error::{Error, Result};
pub use field::{Field, Grid, Metric, Product, SubdomainMask};
pub use geim::GeimModel;
pub use noise::{NoiseModel, SeriesEnsemble, VarianceReport};
pub use pde::{LaplaceSolver, ParamAxis, ParamPoint, ParamRanges, SnapshotSet};
pub use sensors::{Dictionary, KernelShape, Sensor, SensorKind};
pub use svd::SvdResult;
