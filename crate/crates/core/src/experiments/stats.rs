//! Aggregate statistics over replication outputs.

use crate::error::{Error, Result};

use super::rng::ln_factorial;

/// Kolmogorov–Smirnov distance `sup |ECDF - F|` between a sample and a
/// continuous CDF; ties are handled by comparing both sides of each jump.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "KS statistic needs at least one sample".into(),
        ));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument(
            "KS statistic got a NaN sample".into(),
        ));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i + 1;
        while j < xs.len() && xs[j] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        d = d.max(f - i as f64 / n).max(j as f64 / n - f);
        i = j;
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Total-variation distance between the empirical law of `xi` and
/// `Poisson(mean)`: half the absolute pmf differences up to the largest
/// observation, plus half the Poisson tail beyond it.
pub fn tv_poisson_estimate(xi: &[u64], mean: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Poisson mean must be positive, got {mean}"
        )));
    }
    if xi.is_empty() {
        return Err(Error::InvalidArgument(
            "TV estimate needs at least one sample".into(),
        ));
    }
    let top = *xi.iter().max().expect("non-empty") as usize;
    let mut counts = vec![0usize; top + 1];
    for &x in xi {
        counts[x as usize] += 1;
    }
    let total = xi.len() as f64;
    let mut sum = 0.0;
    let mut cdf = 0.0;
    for (j, &c) in counts.iter().enumerate() {
        let p = (j as f64 * mean.ln() - mean - ln_factorial(j as u64)).exp();
        cdf += p;
        sum += (c as f64 / total - p).abs();
    }
    Ok(0.5 * sum + 0.5 * (1.0 - cdf).max(0.0))
}

/// Sample median (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty sample".into()));
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let h = (xs.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo]))
}

/// Interquartile range.
pub fn iqr(values: &[f64]) -> Result<f64> {
    Ok(quantile(values, 0.75)? - quantile(values, 0.25)?)
}

/// `n (V^d - med^d)` with `med` the sample median of `V`; returns the
/// centred values and `med`.
pub fn median_centre(values: &[f64], n: f64, d: usize) -> Result<(Vec<f64>, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(
            "median centring needs at least two values".into(),
        ));
    }
    let med = median(values)?;
    let md = med.powi(d as i32);
    Ok((
        values.iter().map(|v| n * (v.powi(d as i32) - md)).collect(),
        med,
    ))
}
