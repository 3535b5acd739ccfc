//! Ordinary least squares on `(log ε, log norm)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual variance.
    pub stderr: f64,
}

pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if let Some(&(eps, norm)) = points
        .iter()
        .find(|(e, v)| !(*e > 0.0 && *v > 0.0 && e.is_finite() && v.is_finite()))
    {
        return Err(Error::Data(format!(
            "log-log fit needs positive finite values, got (ε = {eps}, norm = {norm})"
        )));
    }
    let mut eps: Vec<f64> = points.iter().map(|p| p.0).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 3 {
        return Err(Error::Data(format!(
            "log-log fit needs at least 3 distinct ε values, got {}",
            eps.len()
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
    })
}
