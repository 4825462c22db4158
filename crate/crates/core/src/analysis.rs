//! Diagnostics over normalized OTOC series: power-law growth fits,
//! late-time oscillation statistics and the Fourier inverse participation
//! ratio.
//!
//! Series are indexed by kick number: element `n` is `C(n)/C(∞)`.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::otoc::OtocSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("series has {got} points, at least {need} required")]
    TooFewPoints { need: usize, got: usize },
    #[error("dynamic region too short: {points} usable points in window {n_lo}..={n_hi}")]
    DynamicRegionTooShort { points: usize, n_lo: usize, n_hi: usize },
    #[error("window {lo}..={hi} lies outside a series of length {len}")]
    WindowOutOfRange { lo: usize, hi: usize, len: usize },
    #[error("empty window")]
    EmptyWindow,
    #[error("amplitudes are not normalized (sum of squares {0})")]
    NotNormalized(f64),
    #[error("IPR window has {len} samples, at least {min} required")]
    WindowTooShort { len: usize, min: usize },
    #[error("spectrum vanishes identically")]
    DegenerateSpectrum,
    #[error("empty sweep")]
    EmptySweep,
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Smallest series accepted by [`fit_power_law`].
pub const MIN_FIT_SERIES: usize = 10;
/// Smallest number of points inside a fit window.
pub const MIN_FIT_POINTS: usize = 5;
/// Smallest IPR window.
pub const MIN_IPR_WINDOW: usize = 64;

/// How the pre-scrambling window of a growth fit is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FitPolicy {
    /// From the first kick above `floor` up to (excluding) the first kick
    /// where `C_norm` exceeds `threshold`.
    Threshold { threshold: f64, floor: f64 },
    /// Fixed inclusive kick range.
    Explicit { n_lo: usize, n_hi: usize },
}

impl Default for FitPolicy {
    fn default() -> Self {
        FitPolicy::Threshold { threshold: 0.5, floor: 1e-12 }
    }
}

/// Least-squares line through `(ln n, ln C_norm(n))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub b: f64,
    pub intercept: f64,
    pub window: (usize, usize),
    /// RMS residual in log space.
    pub residual: f64,
}

pub fn fit_power_law(series: &OtocSeries, policy: FitPolicy) -> Result<PowerLawFit> {
    fit_power_law_values(&series.normalized(), policy)
}

/// Same as [`fit_power_law`] on a raw normalized series indexed by kick.
pub fn fit_power_law_values(c_norm: &[f64], policy: FitPolicy) -> Result<PowerLawFit> {
    if c_norm.len() < MIN_FIT_SERIES {
        return Err(AnalysisError::TooFewPoints { need: MIN_FIT_SERIES, got: c_norm.len() });
    }
    let last = c_norm.len() - 1;
    let (n_lo, n_hi) = match policy {
        FitPolicy::Threshold { threshold, floor } => {
            let n_lo = (1..=last).find(|&n| c_norm[n] > floor).unwrap_or(last);
            let n_hi = (n_lo..=last).find(|&n| c_norm[n] > threshold).map_or(last, |n| n.saturating_sub(1));
            (n_lo, n_hi)
        }
        FitPolicy::Explicit { n_lo, n_hi } => {
            if n_lo == 0 || n_hi > last || n_lo > n_hi {
                return Err(AnalysisError::WindowOutOfRange { lo: n_lo, hi: n_hi, len: c_norm.len() });
            }
            (n_lo, n_hi)
        }
    };
    let pts: Vec<(f64, f64)> = (n_lo..=n_hi.max(n_lo))
        .filter(|&n| c_norm[n] > 0.0)
        .map(|n| ((n as f64).ln(), c_norm[n].ln()))
        .collect();
    if n_hi < n_lo + MIN_FIT_POINTS - 1 || pts.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::DynamicRegionTooShort { points: pts.len(), n_lo, n_hi });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let intercept = my - b * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - b * p.0).powi(2)).sum::<f64>() / m).sqrt();
    Ok(PowerLawFit { b, intercept, window: (n_lo, n_hi), residual })
}

/// Late-window mean and spread of `C_norm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationStats {
    pub window: (usize, usize),
    pub mean: f64,
    pub std: f64,
    /// `std / mean`.
    pub osc_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SaturationWindow {
    /// The trailing fraction of the samples.
    LastFraction(f64),
    /// Inclusive index range.
    Explicit { lo: usize, hi: usize },
}

impl Default for SaturationWindow {
    fn default() -> Self {
        SaturationWindow::LastFraction(0.5)
    }
}

impl SaturationWindow {
    /// Inclusive index range inside a series of `len` samples.
    pub fn resolve(self, len: usize) -> Result<(usize, usize)> {
        if len == 0 {
            return Err(AnalysisError::EmptyWindow);
        }
        match self {
            SaturationWindow::LastFraction(f) => {
                let take = ((len as f64) * f).round() as usize;
                if take == 0 || !(f > 0.0 && f <= 1.0) {
                    return Err(AnalysisError::EmptyWindow);
                }
                Ok((len - take, len - 1))
            }
            SaturationWindow::Explicit { lo, hi } => {
                if hi >= len || lo > hi {
                    return Err(AnalysisError::WindowOutOfRange { lo, hi, len });
                }
                Ok((lo, hi))
            }
        }
    }
}

pub fn saturation_stats(series: &OtocSeries, window: SaturationWindow) -> Result<SaturationStats> {
    saturation_stats_values(&series.normalized(), window)
}

pub fn saturation_stats_values(values: &[f64], window: SaturationWindow) -> Result<SaturationStats> {
    let (lo, hi) = window.resolve(values.len())?;
    let (mean, var) = mean_and_variance(&values[lo..=hi]);
    let std = var.sqrt();
    let osc_ratio = if std == 0.0 { 0.0 } else { std / mean.abs() };
    Ok(SaturationStats { window: (lo, hi), mean, std, osc_ratio })
}

/// Welford running mean and population variance; exact for constant input.
fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &v) in values.iter().enumerate() {
        let d = v - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (v - mean);
    }
    (mean, m2 / values.len() as f64)
}

/// Participation ratio of a normalized amplitude vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IprResult {
    pub xi: f64,
    /// Number of components.
    pub d: usize,
    /// Series window the amplitudes came from (inclusive), if any.
    pub window: Option<(usize, usize)>,
}

/// `ξ = 1 / Σ|a_j|⁴`.
pub fn ipr_of_amplitudes(amplitudes: &[C64]) -> Result<IprResult> {
    if amplitudes.is_empty() {
        return Err(AnalysisError::EmptyWindow);
    }
    let p: Vec<f64> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let norm = pairwise_sum(&p);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(AnalysisError::NotNormalized(norm));
    }
    // (Σp)²/Σp² equals 1/Σp² here and is exact for equal weights
    let p2: Vec<f64> = p.iter().map(|v| v * v).collect();
    Ok(IprResult { xi: norm * norm / pairwise_sum(&p2), d: amplitudes.len(), window: None })
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IprWindow {
    /// Whole series.
    #[default]
    Full,
    /// Trailing half of the series.
    Saturation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IprOptions {
    pub window: IprWindow,
    pub remove_mean: bool,
}

/// Unnormalized DFT `F_k = Σ_n x_n e^{-2πikn/M}`.
pub fn dft(values: &[f64]) -> Vec<C64> {
    let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Fourier IPR of `C_norm` over the chosen window.
pub fn ipr_of_otoc(series: &OtocSeries, opts: IprOptions) -> Result<IprResult> {
    ipr_of_values(&series.normalized(), opts)
}

pub fn ipr_of_values(values: &[f64], opts: IprOptions) -> Result<IprResult> {
    let (lo, hi) = match opts.window {
        IprWindow::Full if !values.is_empty() => (0, values.len() - 1),
        IprWindow::Full => return Err(AnalysisError::EmptyWindow),
        IprWindow::Saturation => SaturationWindow::LastFraction(0.5).resolve(values.len())?,
    };
    let w = &values[lo..=hi];
    if w.len() < MIN_IPR_WINDOW {
        return Err(AnalysisError::WindowTooShort { len: w.len(), min: MIN_IPR_WINDOW });
    }
    let owned: Vec<f64>;
    let w = if opts.remove_mean {
        let (mean, _) = mean_and_variance(w);
        owned = w.iter().map(|v| v - mean).collect();
        &owned[..]
    } else {
        w
    };
    let spectrum = dft(w);
    let energy: f64 = spectrum.iter().map(|f| f.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(AnalysisError::DegenerateSpectrum);
    }
    let scale = energy.sqrt().recip();
    let normalized: Vec<C64> = spectrum.iter().map(|f| f * scale).collect();
    let mut r = ipr_of_amplitudes(&normalized)?;
    r.window = Some((lo, hi));
    Ok(r)
}

/// Divides every `ξ` by the sweep maximum.
pub fn normalize_ipr_sweep<P: Clone>(results: &[(P, IprResult)]) -> Result<Vec<(P, f64)>> {
    let max = results.iter().map(|(_, r)| r.xi).fold(f64::NEG_INFINITY, f64::max);
    if results.is_empty() {
        return Err(AnalysisError::EmptySweep);
    }
    Ok(results.iter().map(|(p, r)| (p.clone(), r.xi / max)).collect())
}
