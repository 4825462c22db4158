//! CSV tables for series, fits, saturation statistics, IPR sweeps and
//! spacing histograms, plus the bundle manifest.
//!
//! Numbers carry 12 significant digits; lines end in LF.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::analysis::{IprResult, PowerLawFit, SaturationStats};
use crate::otoc::OtocSeries;
use crate::spectral::{poisson_density, wigner_dyson_density, NnsdRecord};

pub const OTOC_HEADER: &str = "n,C2,C4,C,C_norm";
pub const IPR_HEADER: &str = "param,xi,xi_frac";
pub const SPACINGS_HEADER: &str = "kick,s";
pub const HISTOGRAM_HEADER: &str = "kick,bin_center,density,P_W,P_P";
pub const FITS_HEADER: &str = "run_key,b,n_lo,n_hi,residual";
pub const SATURATION_HEADER: &str = "run_key,mean,std,osc_ratio";
pub const MANIFEST_HEADER: &str = "figure_id,run_key,csv_path,sha256";

/// Significant digits of every floating-point cell.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` with 12 significant digits: positional notation for
/// decimal exponents in `-5..12`, scientific otherwise, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Run keys and parameters are written verbatim; commas and line breaks would
/// break the table.
fn check_field(s: &str) -> &str {
    assert!(!s.contains([',', '\n', '\r', '"']), "CSV field '{s}' contains a separator");
    s
}

pub fn otoc_csv(series: &OtocSeries) -> String {
    let mut out = format!("{OTOC_HEADER}\n");
    for (n, ((c2, c4), c)) in series.c2.iter().zip(&series.c4).zip(&series.c).enumerate() {
        let _ = writeln!(out, "{n},{},{},{},{}", fmt_num(*c2), fmt_num(*c4), fmt_num(*c), fmt_num(c / series.c_inf));
    }
    out
}

/// One IPR sweep: `(parameter value, result, fraction of the sweep maximum)`.
pub fn ipr_csv(rows: &[(f64, IprResult, f64)]) -> String {
    let mut out = format!("{IPR_HEADER}\n");
    for (p, r, frac) in rows {
        let _ = writeln!(out, "{},{},{}", fmt_num(*p), fmt_num(r.xi), fmt_num(*frac));
    }
    out
}

pub fn spacings_csv(records: &[NnsdRecord]) -> String {
    let mut out = format!("{SPACINGS_HEADER}\n");
    for r in records {
        for s in &r.ensemble.spacings {
            let _ = writeln!(out, "{},{}", r.kick, fmt_num(*s));
        }
    }
    out
}

/// Histogram densities next to both model densities at the bin centres.
pub fn histogram_csv(records: &[NnsdRecord]) -> String {
    let mut out = format!("{HISTOGRAM_HEADER}\n");
    for r in records {
        for (c, d) in r.score.bin_centers().iter().zip(&r.score.density) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.kick,
                fmt_num(*c),
                fmt_num(*d),
                fmt_num(wigner_dyson_density(*c)),
                fmt_num(poisson_density(*c))
            );
        }
    }
    out
}

pub fn fits_csv(rows: &[(String, PowerLawFit)]) -> String {
    let mut out = format!("{FITS_HEADER}\n");
    for (key, f) in rows {
        let _ = writeln!(out, "{},{},{},{},{}", check_field(key), fmt_num(f.b), f.window.0, f.window.1, fmt_num(f.residual));
    }
    out
}

pub fn saturation_csv(rows: &[(String, SaturationStats)]) -> String {
    let mut out = format!("{SATURATION_HEADER}\n");
    for (key, s) in rows {
        let _ = writeln!(out, "{},{},{},{}", check_field(key), fmt_num(s.mean), fmt_num(s.std), fmt_num(s.osc_ratio));
    }
    out
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ManifestEntry {
    pub figure_id: String,
    pub run_key: String,
    /// Path relative to the bundle directory, `/`-separated.
    pub csv_path: String,
    pub sha256: String,
}

pub fn manifest_csv(entries: &[ManifestEntry]) -> String {
    let mut out = format!("{MANIFEST_HEADER}\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            check_field(&e.figure_id),
            check_field(&e.run_key),
            check_field(&e.csv_path),
            e.sha256
        );
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `contents` to `root/relative` (creating parent directories) and
/// returns its SHA-256.
pub fn write_file(root: &Path, relative: &str, contents: &str) -> io::Result<String> {
    let path = root.join(relative);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, contents)?;
    Ok(sha256_hex(contents.as_bytes()))
}
