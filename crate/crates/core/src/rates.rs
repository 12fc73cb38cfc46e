//! Convergence-rate estimation from (h, distance) data.
//!
//! With an exact reference available the rate is the slope of the log-log
//! line of best fit. Without one, distances between consecutive dyadic
//! levels give the rate through base-2 log ratios
//! LR(h) = log2( W(η_h, η_{h/2}) / W(η_{h/2}, η_{h/4}) ) = p + O(h),
//! optionally smoothed by cumulatively averaging the raw ratios from the
//! coarse end before taking the logarithm.

use crate::error::{Error, Result};

/// Outcome of one convergence experiment.
#[derive(Debug, Clone, Default)]
pub struct RateReport {
    /// Mesh widths, strictly decreasing.
    pub h_values: Vec<f64>,
    /// Wasserstein distances matched to `h_values`.
    pub distances: Vec<f64>,
    /// Log-log least squares slope.
    pub slope: f64,
    /// Log-log least squares intercept (natural log).
    pub intercept: f64,
    /// Raw dyadic log-ratios (h, LR(h)), present for self-convergence runs.
    pub lr_sequence: Option<Vec<(f64, f64)>>,
    /// Smoothed log-ratios (h, log2 of running ratio mean).
    pub smoothed_lr: Option<Vec<(f64, f64)>>,
}

impl RateReport {
    /// Final smoothed log-ratio, the headline number of self-convergence
    /// experiments.
    pub fn final_smoothed_lr(&self) -> Option<f64> {
        self.smoothed_lr
            .as_ref()
            .and_then(|seq| seq.last().map(|&(_, v)| v))
    }
}

/// Ordinary least squares of log w on log h. Returns (slope, intercept).
pub fn fit_loglog_slope(hs: &[f64], ws: &[f64]) -> Result<(f64, f64)> {
    if hs.len() != ws.len() {
        return Err(Error::InvalidArgument(format!(
            "{} h-values vs {} distances",
            hs.len(),
            ws.len()
        )));
    }
    if hs.len() < 2 {
        return Err(Error::InvalidArgument(
            "slope fit needs at least two points".into(),
        ));
    }
    if hs.iter().any(|&h| h <= 0.0) || ws.iter().any(|&w| w <= 0.0) {
        return Err(Error::InvalidArgument(
            "log-log fit needs strictly positive h and distances".into(),
        ));
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = ws.iter().map(|w| w.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "all h-values coincide; slope is undefined".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Base-2 log of the ratio of two consecutive-level distances,
/// LR(h) = log2( W(η_h, η_{h/2}) / W(η_{h/2}, η_{h/4}) ).
pub fn dyadic_log_ratio(w_h_h2: f64, w_h2_h4: f64) -> Result<f64> {
    for w in [w_h_h2, w_h2_h4] {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dyadic log-ratio needs positive finite distances, got {w}"
            )));
        }
    }
    Ok((w_h_h2 / w_h2_h4).log2())
}

/// Cumulative-average smoothing of raw distance ratios.
///
/// `ratios[k]` is the pre-log ratio W(η_h,η_{h/2}) / W(η_{h/2},η_{h/4}) at
/// `hs[k]`, ordered by decreasing h. Entries with h above the cutoff are
/// discarded; the remaining ratios are averaged cumulatively starting from
/// the largest remaining h and the base-2 log of each running mean is
/// returned alongside its h.
pub fn smooth_lr(hs: &[f64], ratios: &[f64], cutoff_h: f64) -> Result<Vec<(f64, f64)>> {
    if hs.len() != ratios.len() {
        return Err(Error::InvalidArgument(format!(
            "{} h-values vs {} ratios",
            hs.len(),
            ratios.len()
        )));
    }
    if hs.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument(
            "smoothing input must be ordered by strictly decreasing h".into(),
        ));
    }
    if ratios.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidArgument(
            "ratios must be positive and finite".into(),
        ));
    }
    let kept: Vec<(f64, f64)> = hs
        .iter()
        .zip(ratios.iter())
        .filter(|(&h, _)| h <= cutoff_h)
        .map(|(&h, &r)| (h, r))
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no entries with h <= cutoff {cutoff_h}"
        )));
    }
    let mut out = Vec::with_capacity(kept.len());
    let mut running = 0.0;
    for (k, &(h, r)) in kept.iter().enumerate() {
        running += r;
        let mean = running / (k + 1) as f64;
        out.push((h, mean.log2()));
    }
    Ok(out)
}
