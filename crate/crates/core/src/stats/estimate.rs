//! Order-independent reductions and `L^p(Ω)` estimators.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{mix64, stream_rng};

const LEAF: usize = 32;

/// Sum over a fixed binary tree: the result depends only on the slice
/// contents and order, never on how the slice was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

/// Sample mean with the standard error `s/√N`.
pub fn mean_estimate(xs: &[f64]) -> Result<MeanEstimate> {
    if xs.is_empty() {
        return Err(Error::Config(
            "cannot estimate a mean from an empty sample".into(),
        ));
    }
    let n = xs.len();
    let mean = pairwise_sum(xs) / n as f64;
    let std_err = if n > 1 {
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(MeanEstimate { mean, std_err, n })
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 2.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "moment order p must be finite and ≥ 2, got {p}"
        )))
    }
}

fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 4.0 {
        (x * x) * (x * x)
    } else {
        x.abs().powf(p)
    }
}

/// `(mean |x|^p)^{1/p}`.
pub fn lp_norm(values: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    if values.is_empty() {
        return Err(Error::Config(
            "cannot estimate a norm from an empty sample".into(),
        ));
    }
    let powers: Vec<f64> = values.iter().map(|&x| abs_pow(x, p)).collect();
    Ok((pairwise_sum(&powers) / values.len() as f64).powf(1.0 / p))
}

/// Paired bootstrap of `L^p` norms: resample `b` draws one set of path
/// indices and applies it to every series, so slopes can be refit per draw.
/// Returns `norms[b][series]`.
pub fn bootstrap_norms(
    series: &[Vec<f64>],
    p: f64,
    resamples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_p(p)?;
    let n = series.first().map_or(0, Vec::len);
    if n == 0 || series.iter().any(|s| s.len() != n) {
        return Err(Error::Data(
            "bootstrap needs equally sized, non-empty series".into(),
        ));
    }
    let powers: Vec<Vec<f64>> = series
        .iter()
        .map(|s| s.iter().map(|&x| abs_pow(x, p)).collect())
        .collect();
    let key = mix64(seed ^ 0xB007_57A9);
    Ok((0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(key, b, 0);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut buf = vec![0.0; n];
            powers
                .iter()
                .map(|pw| {
                    for (slot, &k) in buf.iter_mut().zip(&idx) {
                        *slot = pw[k];
                    }
                    (pairwise_sum(&buf) / n as f64).powf(1.0 / p)
                })
                .collect()
        })
        .collect())
}

/// Equal-tailed percentile interval (nearest rank) at the given coverage.
pub fn percentile_interval(values: &[f64], coverage: f64) -> Option<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let alpha = (1.0 - coverage) / 2.0;
    let rank = |q: f64| {
        let pos = (q * (v.len() - 1) as f64).round() as usize;
        v[pos.min(v.len() - 1)]
    };
    Some((rank(alpha), rank(1.0 - alpha)))
}
