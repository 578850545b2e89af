//! Noisy sensor readings and the multi-series averaged estimator.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{combine, Field, Metric, Product, SubdomainMask};
use crate::geim::{geim_build_excluding, gram_matrix, lebesgue_exact, GeimModel};
use crate::sensors::{apply, Dictionary, Sensor};

/// Independent additive Gaussian noise of standard deviation `epsilon` on
/// every scalar reading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub epsilon: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(epsilon: f64, seed: u64) -> Result<NoiseModel> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Format(format!("noise level {epsilon} must be finite and nonnegative")));
        }
        Ok(NoiseModel { epsilon, seed })
    }
}

/// A standard normal variate determined by `(seed, sensor, draw)` alone.
pub fn standard_normal(seed: u64, sensor: usize, draw: u64) -> f64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(sensor as u64).to_le_bytes());
    key[16..24].copy_from_slice(&draw.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    StandardNormal.sample(&mut rng)
}

/// `σ(field) + ε z` with `z` keyed by the sensor's dictionary id.
pub fn noisy_measure(sensor: &Sensor, field: &Field, nm: NoiseModel, draw: u64) -> Result<f64> {
    Ok(apply(sensor, field)? + nm.epsilon * standard_normal(nm.seed, sensor.id(), draw))
}

/// `P` GEIM models over pairwise disjoint sensor sets, with their Lebesgue
/// constants and the harmonic-mean weight `λ`.
#[derive(Clone, Debug)]
pub struct SeriesEnsemble {
    models: Vec<GeimModel>,
    lambdas: Vec<f64>,
    lambda_bar: f64,
    m: usize,
}

impl SeriesEnsemble {
    pub fn models(&self) -> &[GeimModel] {
        &self.models
    }

    /// `Λ^p` at dimension `M`.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `λ` with `1/λ = (1/P) Σ 1/Λ^p`.
    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }

    pub fn series(&self) -> usize {
        self.models.len()
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    /// `(λ/P)/Λ^p` for each series.
    pub fn weights(&self) -> Vec<f64> {
        let p = self.models.len() as f64;
        self.lambdas.iter().map(|l| self.lambda_bar / (p * l)).collect()
    }

    /// Whether `Λ^p < √P` for every series.
    pub fn reduction_condition(&self) -> bool {
        let root = (self.models.len() as f64).sqrt();
        self.lambdas.iter().all(|&l| l < root)
    }
}

/// Greedy series built one after another, each excluding every sensor used
/// by the earlier ones. `Λ^p` is measured in `product`.
pub fn build_series_ensemble(
    snapshots: &[Field],
    dict: &Dictionary,
    mask: &SubdomainMask,
    product: Product,
    p: usize,
    m: usize,
    tol: f64,
) -> Result<SeriesEnsemble> {
    if p == 0 || m == 0 {
        return Err(Error::SizeMismatch { expected: 1, got: 0 });
    }
    let mut used: Vec<usize> = Vec::new();
    let mut models = Vec::with_capacity(p);
    let mut lambdas = Vec::with_capacity(p);
    for series in 0..p {
        let left = dict.len() - used.len();
        if left < m {
            return Err(Error::DictionaryExhausted {
                series,
                needed: m,
                available: left,
            });
        }
        let model = geim_build_excluding(snapshots, dict, mask, product, m, tol, &used)?;
        if model.len() < m {
            return Err(Error::RankDeficient {
                requested: m,
                built: model.len(),
            });
        }
        used.extend(model.sensor_ids());
        lambdas.push(lebesgue_exact(&model, m, product)?);
        models.push(model);
    }
    let inv = lambdas.iter().map(|l| 1.0 / l).sum::<f64>() / p as f64;
    Ok(SeriesEnsemble {
        models,
        lambdas,
        lambda_bar: 1.0 / inv,
        m,
    })
}

fn noisy_readings(model: &GeimModel, truth: &Field, nm: NoiseModel, m: usize, draw: u64) -> Result<Vec<f64>> {
    let mut y = model.measure(truth, m)?;
    for (v, s) in y.iter_mut().zip(model.sensors()) {
        *v += nm.epsilon * standard_normal(nm.seed, s.id(), draw);
    }
    Ok(y)
}

fn check_m(ens: &SeriesEnsemble, m: usize) -> Result<()> {
    if m == 0 || m > ens.m {
        return Err(Error::SizeMismatch {
            expected: ens.m,
            got: m,
        });
    }
    Ok(())
}

/// Reconstruction of series `p` from one noisy draw.
pub fn series_reconstruction(
    ens: &SeriesEnsemble,
    p: usize,
    truth: &Field,
    nm: NoiseModel,
    m: usize,
    draw: u64,
) -> Result<Field> {
    check_m(ens, m)?;
    let model = ens.models.get(p).ok_or(Error::SizeMismatch {
        expected: ens.models.len(),
        got: p,
    })?;
    let y = noisy_readings(model, truth, nm, m, draw)?;
    crate::geim::geim_interpolate(model, m, &y)
}

/// `(λ/P) Σ_p 𝒥^p_M[φ_ε]/Λ^p` for one noisy draw.
pub fn averaged_reconstruction(
    ens: &SeriesEnsemble,
    truth: &Field,
    nm: NoiseModel,
    m: usize,
    draw: u64,
) -> Result<Field> {
    check_m(ens, m)?;
    let parts = (0..ens.series())
        .map(|p| series_reconstruction(ens, p, truth, nm, m, draw))
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(*truth.grid(), &ens.weights(), &parts))
}

/// Monte-Carlo deviation statistics of the single-series and averaged
/// estimators around their noiseless counterparts, in L² on the mask.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    pub series: usize,
    pub m: usize,
    pub epsilon: f64,
    pub trials: usize,
    /// RMS deviation norm of each series.
    pub std_single: Vec<f64>,
    /// RMS deviation norm of the averaged estimator.
    pub std_averaged: f64,
    /// `λ/(Λ¹√P)`, the predicted averaged-to-first-series ratio.
    pub predicted_ratio: f64,
    pub lambdas: Vec<f64>,
    pub lambda_bar: f64,
}

impl VarianceReport {
    /// `std_averaged / std_single[0]`.
    pub fn empirical_ratio(&self) -> f64 {
        self.std_averaged / self.std_single[0]
    }

    /// `(λ/√P)·(std_single[0]/Λ¹)`.
    pub fn predicted_averaged(&self) -> f64 {
        self.predicted_ratio * self.std_single[0]
    }
}

/// Deviation statistics over `trials` draws (draw indices `0..trials`).
///
/// Deviations are linear in the noise, so each is a coefficient vector on
/// the union of the series bases and its norm comes from their Gram matrix.
pub fn variance_study(
    ens: &SeriesEnsemble,
    nm: NoiseModel,
    m: usize,
    trials: usize,
) -> Result<VarianceReport> {
    check_m(ens, m)?;
    if trials == 0 {
        return Err(Error::SizeMismatch { expected: 1, got: 0 });
    }
    let p = ens.series();
    let metric = Metric::new(ens.models[0].mask(), Product::L2);
    let fields: Vec<Field> = ens
        .models
        .iter()
        .flat_map(|md| md.basis()[..m].iter().cloned())
        .collect();
    let gram = gram_matrix(&metric, &fields)?;
    let weights = ens.weights();

    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut coeffs = Vec::with_capacity(p * m);
            for md in &ens.models {
                let z: Vec<f64> = md.sensors()[..m]
                    .iter()
                    .map(|s| nm.epsilon * standard_normal(nm.seed, s.id(), t))
                    .collect();
                coeffs.extend(md.coefficients(m, &z)?);
            }
            let c = DMatrix::from_column_slice(p * m, 1, &coeffs);
            let mut single = Vec::with_capacity(p);
            for s in 0..p {
                let block = c.rows(s * m, m);
                let g = gram.view((s * m, s * m), (m, m));
                single.push((block.transpose() * g * block)[(0, 0)].max(0.0));
            }
            let wc = DMatrix::from_fn(p * m, 1, |i, _| weights[i / m] * coeffs[i]);
            let avg = (wc.transpose() * &gram * &wc)[(0, 0)].max(0.0);
            Ok((single, avg))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sum_single = vec![0.0; p];
    let mut sum_avg = 0.0;
    for (single, avg) in &per_trial {
        for (a, b) in sum_single.iter_mut().zip(single) {
            *a += b;
        }
        sum_avg += avg;
    }
    let n = trials as f64;
    Ok(VarianceReport {
        series: p,
        m,
        epsilon: nm.epsilon,
        trials,
        std_single: sum_single.iter().map(|s| (s / n).sqrt()).collect(),
        std_averaged: (sum_avg / n).sqrt(),
        predicted_ratio: ens.lambda_bar / (ens.lambdas[0] * (p as f64).sqrt()),
        lambdas: ens.lambdas.clone(),
        lambda_bar: ens.lambda_bar,
    })
}
