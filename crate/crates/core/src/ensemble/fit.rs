use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::EnsembleSummary;

/// Minimum number of filtered samples used for an initial-rate estimate.
pub const MIN_RATE_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    /// dT/dt, K/s.
    pub rate: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Ordinary least-squares slope and its residual-variance standard error.
fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, stderr)
}

/// OLS slope of T(t) over the leading `fraction` of the record, with at
/// least [`MIN_RATE_SAMPLES`] samples.
pub fn initial_rate(summary: &EnsembleSummary, fraction: f64) -> Result<RateEstimate> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("ensemble.rate_fraction", format!("must be in (0, 1], got {fraction}")));
    }
    let t = &summary.times;
    if t.len() < MIN_RATE_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_RATE_SAMPLES, got: t.len() });
    }
    let end = t[0] + fraction * (t[t.len() - 1] - t[0]);
    let n = t.partition_point(|&s| s <= end * (1.0 + 1e-12)).max(MIN_RATE_SAMPLES);
    let (rate, stderr) = ols_slope(&t[..n], &summary.temperature[..n]);
    Ok(RateEstimate { rate, stderr, n_samples: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    /// Initial temperature T₀, K.
    pub initial_temperature: f64,
    /// dT/dt, K/s.
    pub rate: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Weights 1/err².
    #[default]
    Weighted,
    Ordinary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub weighting: Weighting,
    pub bootstrap_samples: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { weighting: Weighting::Weighted, bootstrap_samples: 1000, seed: 0 }
    }
}

/// Linear fit rate = slope·T₀ + intercept and the zero crossing T*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    /// 1/s
    pub slope: f64,
    /// K/s
    pub intercept: f64,
    /// K
    pub t_star: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    /// First-order propagation of the parameter covariance.
    pub t_star_err: f64,
    /// Standard deviation of T* over bootstrap resamples of the points.
    pub t_star_bootstrap_err: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

struct Line {
    slope: f64,
    intercept: f64,
    var_slope: f64,
    var_intercept: f64,
    cov: f64,
    r_squared: f64,
}

fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Option<Line> {
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    // centred sums avoid cancellation when T₀ ≫ spread
    let (mx, my) = (sx / sw, sy / sw);
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (y - intercept - slope * x).powi(2)).sum();
    let syy: f64 = w.iter().zip(y).map(|(w, y)| w * (y - my).powi(2)).sum();
    let dof = x.len() as f64 - 2.0;
    let scale = if dof > 0.0 { chi2 / dof } else { f64::NAN };
    let var_slope = scale / sxx;
    Some(Line {
        slope,
        intercept,
        var_slope,
        var_intercept: scale * (1.0 / sw + mx * mx / sxx),
        cov: -mx * var_slope,
        r_squared: if syy > 0.0 { 1.0 - chi2 / syy } else { 1.0 },
    })
}

fn weights(points: &[RatePoint], weighting: Weighting) -> Result<Vec<f64>> {
    match weighting {
        Weighting::Ordinary => Ok(vec![1.0; points.len()]),
        Weighting::Weighted => points
            .iter()
            .map(|p| {
                if p.err.is_finite() && p.err > 0.0 {
                    Ok(1.0 / (p.err * p.err))
                } else {
                    Err(Error::invalid("points.err", format!("weighted fit needs err > 0, got {}", p.err)))
                }
            })
            .collect(),
    }
}

pub fn fit_steady_state(points: &[RatePoint]) -> Result<FitResult> {
    fit_steady_state_with(points, &FitOptions::default())
}

pub fn fit_steady_state_with(points: &[RatePoint], options: &FitOptions) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: points.len() });
    }
    let x: Vec<f64> = points.iter().map(|p| p.initial_temperature).collect();
    let y: Vec<f64> = points.iter().map(|p| p.rate).collect();
    let w = weights(points, options.weighting)?;
    let line = weighted_line(&x, &y, &w)
        .ok_or_else(|| Error::invalid("points", "initial temperatures must not all coincide"))?;
    if !(line.slope < 0.0) {
        return Err(Error::NoCooling { slope: line.slope });
    }
    let t_star = -line.intercept / line.slope;
    let var_t = (line.var_intercept + t_star * t_star * line.var_slope + 2.0 * t_star * line.cov) / line.slope.powi(2);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let n = points.len();
    let mut draws = Vec::with_capacity(options.bootstrap_samples);
    let (mut bx, mut by, mut bw) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..options.bootstrap_samples {
        for i in 0..n {
            let j = rng.random_range(0..n);
            bx[i] = x[j];
            by[i] = y[j];
            bw[i] = w[j];
        }
        if let Some(l) = weighted_line(&bx, &by, &bw) {
            if l.slope < 0.0 {
                draws.push(-l.intercept / l.slope);
            }
        }
    }
    let t_star_bootstrap_err = if draws.len() > 1 {
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt()
    } else {
        f64::NAN
    };

    Ok(FitResult {
        slope: line.slope,
        intercept: line.intercept,
        t_star,
        slope_err: line.var_slope.sqrt(),
        intercept_err: line.var_intercept.sqrt(),
        t_star_err: var_t.max(0.0).sqrt(),
        t_star_bootstrap_err,
        r_squared: line.r_squared,
        n_points: n,
    })
}
