use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};
use crate::io::csv_err;
use crate::rng::{stream, Phase};
use crate::stats::{covariance, excess_kurtosis, mean, skewness, variance};

/// Smallest ensemble admitted by the Gaussianity report.
pub const MIN_REPLICATES: usize = 200;

/// Bootstrap resamples used for confidence bands.
pub const BOOTSTRAP: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct GaussianityReport {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `sup |F_n(x) - Phi((x - mean) / sd)|`.
    pub ks_distance: f64,
    /// Approximate 5 % critical value of the distance with estimated parameters.
    pub ks_critical: f64,
    /// 95 % bootstrap intervals.
    pub skewness_band: (f64, f64),
    pub kurtosis_band: (f64, f64),
    /// All samples equal.
    pub degenerate: bool,
    /// False when skewness, kurtosis or the distance reject normality at 5 %.
    pub normal_plausible: bool,
}

fn percentile_band(mut v: Vec<f64>) -> (f64, f64) {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    (q(0.025), q(0.975))
}

/// Moments, normal-CDF distance and bootstrap bands of one coordinate across replicates.
pub fn gaussianity_report(samples: &[f64], seed: u64) -> Result<GaussianityReport> {
    let n = samples.len();
    if n < MIN_REPLICATES {
        return Err(invalid(format!("Gaussianity report needs at least {MIN_REPLICATES} replicates, got {n}")));
    }
    let m = mean(samples);
    let var = variance(samples);
    let degenerate = samples.iter().all(|v| *v == samples[0]);
    if degenerate {
        return Ok(GaussianityReport {
            n,
            mean: m,
            variance: 0.0,
            skewness: f64::NAN,
            excess_kurtosis: f64::NAN,
            ks_distance: f64::NAN,
            ks_critical: 0.895 / (n as f64).sqrt(),
            skewness_band: (f64::NAN, f64::NAN),
            kurtosis_band: (f64::NAN, f64::NAN),
            degenerate: true,
            normal_plausible: false,
        });
    }
    let sk = skewness(samples);
    let ku = excess_kurtosis(samples);
    let normal = Normal::new(m, var.sqrt()).map_err(|e| invalid(e.to_string()))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let nf = n as f64;
    let ks_distance = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal.cdf(*x);
            (f - i as f64 / nf).abs().max(((i + 1) as f64 / nf - f).abs())
        })
        .fold(0.0, f64::max);
    let ks_critical = 0.895 / nf.sqrt();
    let mut rng = stream(seed, Phase::Auxiliary, n as u64, 1);
    let mut sks = Vec::with_capacity(BOOTSTRAP);
    let mut kus = Vec::with_capacity(BOOTSTRAP);
    let mut buf = vec![0.0; n];
    for _ in 0..BOOTSTRAP {
        for b in buf.iter_mut() {
            *b = samples[rng.random_range(0..n)];
        }
        sks.push(skewness(&buf));
        kus.push(excess_kurtosis(&buf));
    }
    let skew_se = (6.0 / nf).sqrt();
    let kurt_se = (24.0 / nf).sqrt();
    let normal_plausible = sk.abs() <= 1.96 * skew_se * 1.5 && ku.abs() <= 1.96 * kurt_se * 1.5 && ks_distance <= ks_critical;
    Ok(GaussianityReport {
        n,
        mean: m,
        variance: var,
        skewness: sk,
        excess_kurtosis: ku,
        ks_distance,
        ks_critical,
        skewness_band: percentile_band(sks),
        kurtosis_band: percentile_band(kus),
        degenerate: false,
        normal_plausible,
    })
}

/// One entry of an empirical-versus-theoretical covariance table.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceRow {
    pub i: usize,
    pub j: usize,
    pub empirical: f64,
    pub theoretical: f64,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Standard error of the empirical covariance from the product variance.
    pub std_error: f64,
}

/// Compares sample covariances of the listed coordinate pairs with a
/// theoretical matrix; `rows[r]` holds all coordinates of replicate `r`.
pub fn cov_compare(rows: &[Vec<f64>], theory: &DMatrix<f64>, pairs: &[(usize, usize)], seed: u64) -> Vec<CovarianceRow> {
    let n = rows.len();
    let column = |i: usize| -> Vec<f64> { rows.iter().map(|r| r[i]).collect() };
    let mut rng = stream(seed, Phase::Auxiliary, n as u64, 2);
    let resamples: Vec<Vec<usize>> = (0..BOOTSTRAP).map(|_| (0..n).map(|_| rng.random_range(0..n)).collect()).collect();
    pairs
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (column(i), column(j));
            let empirical = covariance(&a, &b);
            let boot: Vec<f64> = resamples
                .iter()
                .map(|idx| {
                    let ra: Vec<f64> = idx.iter().map(|&k| a[k]).collect();
                    let rb: Vec<f64> = idx.iter().map(|&k| b[k]).collect();
                    covariance(&ra, &rb)
                })
                .collect();
            let (ci_low, ci_high) = percentile_band(boot);
            let theoretical = theory[(i, j)];
            CovarianceRow {
                i,
                j,
                empirical,
                theoretical,
                ratio: empirical / theoretical,
                ci_low,
                ci_high,
                std_error: crate::stats::covariance_std_error(&a, &b),
            }
        })
        .collect()
}

/// Rows `i, j, empirical, theoretical, ratio, ci_low, ci_high, std_error`.
pub fn write_cov_table<W: Write>(w: W, rows: &[CovarianceRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
