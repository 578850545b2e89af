//! Experiment configuration: a flat TOML table with one key per setting.
//!
//! Precedence is command-line flag, then config file, then the defaults
//! below. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use geim_core::sensors::{build_moment_dictionary, default_centers};
use geim_core::{Dictionary, Grid, KernelShape, ParamAxis, ParamRanges, Product};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub interface_x: f64,

    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_count: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_count: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_count: usize,

    /// Take every `sensor_stride`-th interior node of Ω₂ as a center;
    /// 0 picks the stride that gives about `sensor_target` sensors.
    pub sensor_stride: usize,
    pub sensor_target: usize,
    /// Kernel radius; 0 means 3·max(hx, hy).
    pub sensor_radius: f64,
    pub kernel: String,

    pub m_max: usize,
    /// Greedy stopping level, relative to the largest training norm.
    pub tol: f64,
    /// Norm driving the greedy: `l2` or `h1`.
    pub product: String,

    pub noise_epsilon: f64,
    pub noise_series: usize,
    pub noise_dimension: usize,
    pub noise_trials: usize,
    pub seed: u64,

    /// Training snapshot used as the in-sample truth of `coupled`; by
    /// default the middle one.
    pub training_index: Option<usize>,

    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            nx: 65,
            ny: 33,
            x_min: 0.0,
            x_max: 2.0,
            y_min: 0.0,
            y_max: 1.0,
            interface_x: 0.75,
            alpha_min: -1.0,
            alpha_max: 1.0,
            alpha_count: 6,
            beta_min: -1.0,
            beta_max: 1.0,
            beta_count: 6,
            gamma_min: 0.5,
            gamma_max: 1.5,
            gamma_count: 6,
            sensor_stride: 0,
            sensor_target: 200,
            sensor_radius: 0.0,
            kernel: "bump".into(),
            m_max: 15,
            tol: 1e-12,
            product: "l2".into(),
            noise_epsilon: 1e-3,
            noise_series: 16,
            noise_dimension: 5,
            noise_trials: 10_000,
            seed: 0,
            training_index: None,
            threads: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// SHA-256 of the settings that affect results (output directory and
    /// thread count excluded), as lowercase hex.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = PathBuf::new();
        canon.threads = 0;
        let digest = Sha256::digest(canon.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grid()?;
        for (name, n) in [
            ("alpha_count", self.alpha_count),
            ("beta_count", self.beta_count),
            ("gamma_count", self.gamma_count),
            ("m_max", self.m_max),
            ("noise_series", self.noise_series),
            ("noise_dimension", self.noise_dimension),
            ("noise_trials", self.noise_trials),
        ] {
            if n == 0 {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        for (name, lo, hi) in [
            ("alpha", self.alpha_min, self.alpha_max),
            ("beta", self.beta_min, self.beta_max),
            ("gamma", self.gamma_min, self.gamma_max),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(invalid(format!("{name} range [{lo}, {hi}] is empty or not finite")));
            }
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(invalid("tol must be finite and nonnegative"));
        }
        if !(self.noise_epsilon >= 0.0 && self.noise_epsilon.is_finite()) {
            return Err(invalid("noise_epsilon must be finite and nonnegative"));
        }
        if !(self.sensor_radius >= 0.0 && self.sensor_radius.is_finite()) {
            return Err(invalid("sensor_radius must be finite and nonnegative"));
        }
        if self.sensor_stride == 0 && self.sensor_target == 0 {
            return Err(invalid("sensor_target must be positive when sensor_stride is 0"));
        }
        self.kernel_shape()?;
        self.greedy_product()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(
            self.nx,
            self.ny,
            [self.x_min, self.x_max, self.y_min, self.y_max],
            self.interface_x,
        )?)
    }

    pub fn ranges(&self) -> ParamRanges {
        ParamRanges {
            alpha: ParamAxis::new(self.alpha_min, self.alpha_max, self.alpha_count),
            beta: ParamAxis::new(self.beta_min, self.beta_max, self.beta_count),
            gamma: ParamAxis::new(self.gamma_min, self.gamma_max, self.gamma_count),
        }
    }

    pub fn kernel_shape(&self) -> Result<KernelShape, CliError> {
        Ok(self.kernel.parse()?)
    }

    pub fn greedy_product(&self) -> Result<Product, CliError> {
        Ok(self.product.parse()?)
    }

    pub fn radius(&self, grid: &Grid) -> f64 {
        if self.sensor_radius > 0.0 {
            self.sensor_radius
        } else {
            3.0 * grid.hx().max(grid.hy())
        }
    }

    /// Moment dictionary on the interior of Ω₂.
    pub fn dictionary(&self, grid: Grid) -> Result<Dictionary, CliError> {
        let mask = grid.omega2_mask();
        let stride = (self.sensor_stride > 0).then_some(self.sensor_stride);
        let centers = default_centers(&mask, stride, self.sensor_target);
        Ok(build_moment_dictionary(
            grid,
            &mask,
            &centers,
            self.radius(&grid),
            self.kernel_shape()?,
        )?)
    }
}
