//! Monte Carlo batches of `W`, Kolmogorov-distance estimates and log-log
//! rate fits.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copies::{CopyCounter, EdgeConfiguration, EdgeUniverse};
use crate::error::{check_open_probability, Error, Result};
use crate::model::SubgraphModel;
use crate::numeric::CompensatedSum;
use crate::pattern::{psi, PatternGraph, SubgraphCatalog};
use crate::rng::{replicate_rng, GnpSampler};
use crate::stein::{std_normal_cdf, CfDifference, EmpiricalDiff};

/// Replicates per parallel work item. Results never depend on it.
const CHUNK: usize = 2048;

/// Smallest batch accepted by [`kolmogorov_estimate`].
pub const MIN_KOLMOGOROV_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub n: usize,
    pub p: f64,
    pub pattern: String,
    pub seed: u64,
    pub m: usize,
}

/// `m` independent realizations of `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub meta: BatchMeta,
}

impl SampleBatch {
    pub fn new(values: Vec<f64>, meta: BatchMeta) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("empty batch".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample {v}")));
        }
        Ok(Self { values, meta })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().copied().collect::<CompensatedSum>().value() / self.len() as f64
    }

    /// Sample variance with divisor `m - 1` (zero for a single value).
    pub fn variance(&self) -> f64 {
        let m = self.len();
        if m < 2 {
            return 0.0;
        }
        let mu = self.mean();
        let ss: CompensatedSum = self.values.iter().map(|v| (v - mu) * (v - mu)).collect();
        ss.value() / (m - 1) as f64
    }
}

/// Draws `m` copy counts of `model.pattern` in `G(n, p)` and standardizes them
/// with the exact mean and `σ`.
pub fn sample_w_model(model: &SubgraphModel, m: usize, seed: u64) -> Result<SampleBatch> {
    check_open_probability(model.p)?;
    model.require_variance()?;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let universe = EdgeUniverse::new(model.n);
    let sampler = GnpSampler::new(universe, model.p)?;
    let counter = CopyCounter::new(&model.pattern);
    let chunks: Vec<Vec<f64>> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut config = EdgeConfiguration::empty(universe);
            (c * CHUNK..((c + 1) * CHUNK).min(m))
                .map(|r| {
                    let mut rng = replicate_rng(seed, r as u64);
                    sampler.sample_into(&mut config, &mut rng);
                    model.standardize(counter.count(&config))
                })
                .collect()
        })
        .collect();
    SampleBatch::new(
        chunks.concat(),
        BatchMeta {
            n: model.n,
            p: model.p,
            pattern: model.pattern.to_string(),
            seed,
            m,
        },
    )
}

pub fn sample_w(n: usize, p: f64, pattern: &PatternGraph, m: usize, seed: u64) -> Result<SampleBatch> {
    check_open_probability(p)?;
    sample_w_model(&SubgraphModel::new(n, p, pattern)?, m, seed)
}

/// Mean and variance gates applied before a batch enters a rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCheck {
    pub mean: f64,
    pub variance: f64,
    pub mean_tolerance: f64,
    pub variance_tolerance: f64,
    pub passed: bool,
}

/// `|mean| ≤ 4/√m` and `|var − 1| ≤ 10/√m`, the latter scaled up by the
/// sample kurtosis when it exceeds the Gaussian value.
pub fn normalization_check(batch: &SampleBatch) -> NormalizationCheck {
    let m = batch.len() as f64;
    let mean = batch.mean();
    let variance = batch.variance();
    let m4 = batch
        .values
        .iter()
        .map(|v| (v - mean).powi(4))
        .collect::<CompensatedSum>()
        .value()
        / m;
    let kurt = if variance > 0.0 { m4 / (variance * variance) } else { 3.0 };
    let mean_tolerance = 4.0 / m.sqrt();
    let variance_tolerance = 10.0 / m.sqrt() * ((kurt - 1.0) / 2.0).sqrt().max(1.0);
    NormalizationCheck {
        mean,
        variance,
        mean_tolerance,
        variance_tolerance,
        passed: mean.abs() <= mean_tolerance && (variance - 1.0).abs() <= variance_tolerance,
    }
}

/// Half-width of the 99% Dvoretzky–Kiefer–Wolfowitz band, `√(ln(2/0.01) / 2m)`.
pub fn dkw_epsilon(m: usize) -> f64 {
    dkw_epsilon_at(m, 0.01)
}

pub fn dkw_epsilon_at(m: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * m as f64)).sqrt()
}

/// `sup_w |F̂(w) − Φ(w)|` of the sample and its 99% DKW half-width.
pub fn kolmogorov_estimate(batch: &SampleBatch) -> Result<(f64, f64)> {
    let m = batch.len();
    if m == 0 {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    if m < MIN_KOLMOGOROV_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{m} samples, need at least {MIN_KOLMOGOROV_SAMPLES}"
        )));
    }
    let mut xs = batch.values.clone();
    xs.sort_by(f64::total_cmp);
    let mf = m as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let phi = std_normal_cdf(x);
            ((i + 1) as f64 / mf - phi).max(phi - i as f64 / mf)
        })
        .fold(0.0, f64::max);
    Ok((d.clamp(0.0, 1.0), dkw_epsilon(m)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfPoint {
    pub t: f64,
    pub value: Complex64,
    /// `√((1 − |φ̂|²) / m)`, never above `1/√m`
    pub std_error: f64,
}

/// `φ̂(t) = (1/m) Σ e^{itW_i}` on a grid.
pub fn empirical_cf(batch: &SampleBatch, t_grid: &[f64]) -> Result<Vec<CfPoint>> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty t grid".into()));
    }
    let e = EmpiricalDiff::new(&batch.values);
    Ok(t_grid
        .par_iter()
        .map(|&t| CfPoint {
            t,
            value: e.cf(t),
            std_error: e.std_error(t),
        })
        .collect())
}

/// One experiment point of a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub p: f64,
    pub d_hat: f64,
    pub dkw_eps: f64,
    pub m: usize,
}

impl RatePoint {
    pub fn from_batch(batch: &SampleBatch) -> Result<Self> {
        let (d_hat, dkw_eps) = kolmogorov_estimate(batch)?;
        Ok(Self {
            n: batch.meta.n,
            p: batch.meta.p,
            d_hat,
            dkw_eps,
            m: batch.len(),
        })
    }
}

/// Dense-regime rate `1 / (n √(1 − p))`.
pub fn rate_dense(n: usize, p: f64) -> Result<f64> {
    check_open_probability(p)?;
    Ok(1.0 / (n as f64 * (1.0 - p).sqrt()))
}

/// Sparse-regime rate `Ψ^{−1/2}`.
pub fn rate_sparse(n: usize, p: f64, catalog: &SubgraphCatalog) -> Result<f64> {
    check_open_probability(p)?;
    Ok(psi(n, p, catalog)?.psi_min.sqrt().recip())
}

#[derive(Debug, Clone, Copy)]
pub enum Predictor<'a> {
    InvNSqrt1mp,
    InvSqrtPsi(&'a SubgraphCatalog),
}

impl Predictor<'_> {
    pub fn value(&self, n: usize, p: f64) -> Result<f64> {
        match self {
            Predictor::InvNSqrt1mp => rate_dense(n, p),
            Predictor::InvSqrtPsi(c) => rate_sparse(n, p, c),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Predictor::InvNSqrt1mp => "inv_n_sqrt_1mp",
            Predictor::InvSqrtPsi(_) => "inv_sqrt_psi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub predictor: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
    pub used: Vec<RatePoint>,
    /// points with `d_hat ≤ dkw_eps`, left out of the fit
    pub filtered: Vec<RatePoint>,
}

/// Least squares of `ln d_hat` on `ln rate`. Points inside their DKW band are
/// dropped; at least four must remain.
pub fn rate_fit(points: &[RatePoint], predictor: Predictor<'_>) -> Result<RateFit> {
    let (used, filtered): (Vec<RatePoint>, Vec<RatePoint>) =
        points.iter().partition(|q| q.d_hat > q.dkw_eps);
    if used.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} of {} points above the noise floor, need 4",
            used.len(),
            points.len()
        )));
    }
    let xs: Vec<f64> = used
        .iter()
        .map(|q| predictor.value(q.n, q.p).map(f64::ln))
        .collect::<Result<_>>()?;
    let ys: Vec<f64> = used.iter().map(|q| q.d_hat.ln()).collect();
    let (slope, intercept, r2, slope_stderr) = ols(&xs, &ys)?;
    Ok(RateFit {
        predictor: predictor.name().to_string(),
        slope,
        intercept,
        r2,
        slope_stderr,
        used,
        filtered,
    })
}

/// `(slope, intercept, r², stderr(slope))`; `r² = 1` when `y` is constant.
fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("all predictor values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let stderr = if k > 2.0 { (sse / (k - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok((slope, intercept, r2, stderr))
}
