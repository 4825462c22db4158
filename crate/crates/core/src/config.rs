//! Run configuration: symbolic angles, the TOML file format and the
//! resolved per-run settings.
//!
//! File layout (every key optional):
//!
//! ```toml
//! [chain]
//! N = 12
//! J = 1.0
//! tau = "pi/16"
//!
//! [schedules]
//! protocol = "linear"     # constant | linear | periodic
//! hx0 = 0.0
//! hz0 = 1.0               # default 1 (linear) or 4 (periodic)
//! gamma = 0.1
//! t_max = "16pi"
//!
//! [otoc]
//! observable = "block-x"  # block-x | block-z | local-x | local-z
//! sites = [1, 6]
//! n_max = 1000
//! convention = "U_W_Udag"
//! enabled = true
//!
//! [analysis]
//! fit = true
//! saturation = true
//! ipr = true
//! nnsd_kicks = [1, 5, 10]
//!
//! [sweep]
//! output = "out"
//! workers = 4
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;
use toml::Spanned;

use crate::evolution::{ChainParams, HeisenbergConvention};
use crate::otoc::{ObservableFamily, ObservableSpec};
use crate::schedules::{ProtocolKind, QuenchProtocol};

/// Configuration error, with the 1-based line of the offending key when known.
#[derive(Debug, Error, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }

    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// An angle or time given either as a rational multiple of π or as a decimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Angle {
    /// `num·π/den`, stored in lowest terms with `den > 0`.
    PiFraction { num: i64, den: i64 },
    /// Raw IEEE bits of a decimal value.
    Decimal(u64),
}

impl Angle {
    pub fn pi_fraction(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1) as i64;
        let s = den.signum();
        Angle::PiFraction { num: s * num / g, den: s * den / g }
    }

    pub fn decimal(v: f64) -> Self {
        Angle::Decimal(v.to_bits())
    }

    pub fn value(self) -> f64 {
        match self {
            Angle::PiFraction { num, den } => num as f64 * PI / den as f64,
            Angle::Decimal(bits) => f64::from_bits(bits),
        }
    }

    /// Filesystem-safe rendering (`pi_16` instead of `pi/16`).
    pub fn slug(self) -> String {
        self.to_string().replace('/', "_")
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Angle::PiFraction { num: 0, .. } => f.write_str("0"),
            Angle::PiFraction { num, den } => {
                match num {
                    1 => f.write_str("pi")?,
                    -1 => f.write_str("-pi")?,
                    n => write!(f, "{n}pi")?,
                }
                if den != 1 {
                    write!(f, "/{den}")?;
                }
                Ok(())
            }
            Angle::Decimal(bits) => write!(f, "{}", f64::from_bits(bits)),
        }
    }
}

impl FromStr for Angle {
    type Err = String;

    /// Accepts `pi`, `pi/16`, `3pi/4`, `3*pi/4`, `-pi/2`, `16pi` or a decimal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t: String = s.trim().to_ascii_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || format!("cannot parse angle '{}' (expected e.g. pi/16, 3pi/4 or 0.25)", s.trim());
        if let Some(pos) = t.find("pi") {
            let (head, tail) = (&t[..pos], &t[pos + 2..]);
            let head = head.strip_suffix('*').unwrap_or(head);
            let num: i64 = match head {
                "" | "+" => 1,
                "-" => -1,
                h => h.parse().map_err(|_| bad())?,
            };
            let den: i64 = match tail {
                "" => 1,
                d => d.strip_prefix('/').ok_or_else(bad)?.parse().map_err(|_| bad())?,
            };
            if den == 0 {
                return Err(bad());
            }
            Ok(Angle::pi_fraction(num, den))
        } else {
            let v: f64 = t.parse().map_err(|_| bad())?;
            if !v.is_finite() {
                return Err(bad());
            }
            Ok(Angle::decimal(v))
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Angle::decimal(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Kick count used when `n_max` is not given: one `t_max` for the periodic
/// protocol, otherwise 1000 kicks for `τ ≤ π/16` and 400 above.
pub fn default_n_max(protocol: &QuenchProtocol, tau: f64) -> usize {
    match protocol.kick_count(tau) {
        Some(k) => k.max(1),
        None if tau <= PI / 16.0 + 1e-12 => 1000,
        None => 400,
    }
}

/// Transverse intercept used when `hz0` is not given.
pub fn default_hz0(kind: ProtocolKind) -> f64 {
    match kind {
        ProtocolKind::Periodic => 4.0,
        _ => 1.0,
    }
}

/// Which analyses a run performs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnalysisToggles {
    pub fit: bool,
    pub saturation: bool,
    pub ipr: bool,
    pub nnsd_kicks: Vec<usize>,
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        Self { fit: true, saturation: true, ipr: true, nnsd_kicks: Vec::new() }
    }
}

/// One fully specified run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_sites: usize,
    pub coupling: f64,
    pub tau: Angle,
    pub protocol: ProtocolKind,
    pub hx0: f64,
    pub hz0: f64,
    pub gamma: f64,
    pub t_max: Angle,
    pub observable: ObservableFamily,
    pub sites: Option<(usize, usize)>,
    pub n_max: usize,
    pub convention: HeisenbergConvention,
    /// Whether the OTOC series is computed at all (NNSD-only runs switch it off).
    pub otoc: bool,
    pub analysis: AnalysisToggles,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut c = Self {
            n_sites: 12,
            coupling: 1.0,
            tau: Angle::pi_fraction(1, 4),
            protocol: ProtocolKind::Linear,
            hx0: 0.0,
            hz0: 1.0,
            gamma: 0.1,
            t_max: Angle::pi_fraction(16, 1),
            observable: ObservableFamily::BlockX,
            sites: None,
            n_max: 0,
            convention: HeisenbergConvention::default(),
            otoc: true,
            analysis: AnalysisToggles::default(),
            output: None,
            workers: None,
        };
        c.n_max = default_n_max(&c.quench(), c.tau.value());
        c
    }
}

impl RunConfig {
    pub fn params(&self) -> ChainParams {
        ChainParams::new(self.n_sites, self.coupling, self.tau.value())
    }

    pub fn quench(&self) -> QuenchProtocol {
        match self.protocol {
            ProtocolKind::Constant => QuenchProtocol::constant(self.hx0, self.hz0),
            ProtocolKind::Linear => QuenchProtocol::linear(self.hx0, self.hz0, self.gamma),
            ProtocolKind::Periodic => QuenchProtocol::periodic(self.hx0, self.hz0, self.t_max.value()),
        }
    }

    pub fn observable_spec(&self) -> ObservableSpec {
        ObservableSpec { family: self.observable, sites: self.sites }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n_sites;
        if n % 2 != 0 {
            return Err(ConfigError::new(format!("N must be even (got {n})")));
        }
        if n < 2 || n > crate::algebra::MAX_SITES {
            return Err(ConfigError::new(format!("N must lie in 2..={} (got {n})", crate::algebra::MAX_SITES)));
        }
        if !(self.tau.value() > 0.0) {
            return Err(ConfigError::new(format!("tau must be positive (got {})", self.tau)));
        }
        if self.protocol == ProtocolKind::Periodic && !(self.t_max.value() > 0.0) {
            return Err(ConfigError::new(format!("t_max must be positive (got {})", self.t_max)));
        }
        if self.n_max == 0 {
            return Err(ConfigError::new("n_max must be at least 1"));
        }
        if let Some(&k) = self.analysis.nnsd_kicks.iter().find(|&&k| k == 0) {
            return Err(ConfigError::new(format!("NNSD kicks start at 1 (got {k})")));
        }
        if self.analysis.nnsd_kicks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::new("NNSD kick list must be strictly ascending"));
        }
        if let Some(&k) = self.analysis.nnsd_kicks.iter().find(|&&k| k > self.n_max) {
            return Err(ConfigError::new(format!("NNSD kick {k} exceeds n_max = {}", self.n_max)));
        }
        if let Some((a, b)) = self.sites {
            if self.observable.is_block() {
                return Err(ConfigError::new("sites apply only to the local observables"));
            }
            if a == 0 || b == 0 || a > n || b > n {
                return Err(ConfigError::new(format!("sites ({a}, {b}) outside 1..={n}")));
            }
            if a == b {
                return Err(ConfigError::new("W and V must sit on different sites"));
            }
        }
        self.quench().validate().map_err(|e| ConfigError::new(e.to_string()))?;
        Ok(())
    }

    /// Human-readable, filesystem-safe key naming the physical parameters.
    pub fn run_key(&self) -> String {
        let mut key = format!("{}_N{}_tau{}_hx{}_hz{}", self.protocol.as_str(), self.n_sites, self.tau.slug(), self.hx0, self.hz0);
        match self.protocol {
            ProtocolKind::Linear => key.push_str(&format!("_g{}", self.gamma)),
            ProtocolKind::Periodic => key.push_str(&format!("_tmax{}", self.t_max.slug())),
            ProtocolKind::Constant => {}
        }
        if self.coupling != 1.0 {
            key.push_str(&format!("_J{}", self.coupling));
        }
        if self.otoc {
            key.push_str(&format!("_{}", self.observable.as_str()));
            if let Some((a, b)) = self.sites {
                key.push_str(&format!("-{a}-{b}"));
            }
            key.push_str(&format!("_n{}", self.n_max));
        } else {
            key.push_str("_spectrum");
        }
        if self.convention != HeisenbergConvention::default() {
            key.push_str(&format!("_{}", self.convention.as_str()));
        }
        key
    }

    /// SHA-256 over the canonical JSON of every field that affects results.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("RunConfig serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Parses a TOML document; unspecified keys take the defaults above.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: FileConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        file.resolve(text)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Values set outside the configuration file (command-line flags), keyed by
/// file section and key; they take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    table: toml::Table,
}

impl Overrides {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<toml::Value>) -> &mut Self {
        let entry = self
            .table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let toml::Value::Table(t) = entry {
            t.insert(key.to_string(), value.into());
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl RunConfig {
    /// Resolves an optional file plus overrides. File errors carry the line
    /// of the offending key; errors introduced by an override do not.
    pub fn resolve(file: Option<&str>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = file.unwrap_or("");
        if overrides.is_empty() {
            return Self::from_toml(text);
        }
        toml::from_str::<FileConfig>(text).map_err(|e| toml_error(text, &e))?;
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| toml_error(text, &e))?;
        for (section, values) in &overrides.table {
            let slot = table.entry(section.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match (slot, values) {
                (toml::Value::Table(dst), toml::Value::Table(src)) => {
                    for (k, v) in src {
                        dst.insert(k.clone(), v.clone());
                    }
                }
                _ => return Err(ConfigError::new(format!("'{section}' is not a section"))),
            }
        }
        let merged = toml::to_string(&table).map_err(|e| ConfigError::new(e.to_string()))?;
        // A problem the file has on its own keeps its line number.
        Self::from_toml(&merged).map_err(|e| match Self::from_toml(text) {
            Err(orig) if orig.message == e.message => orig,
            _ => ConfigError::new(e.message),
        })
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn toml_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let message = e.message().to_string();
    match e.span() {
        Some(span) => ConfigError::at(line_of(text, span.start), message),
        None => ConfigError::new(message),
    }
}

type Field<T> = Option<Spanned<T>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    chain: ChainSection,
    #[serde(default)]
    schedules: SchedulesSection,
    #[serde(default)]
    otoc: OtocSection,
    #[serde(default)]
    analysis: AnalysisSection,
    #[serde(default)]
    sweep: SweepSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainSection {
    #[serde(rename = "N")]
    n: Field<i64>,
    #[serde(rename = "J")]
    j: Field<f64>,
    tau: Field<Angle>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchedulesSection {
    protocol: Field<String>,
    hx0: Field<f64>,
    hz0: Field<f64>,
    gamma: Field<f64>,
    t_max: Field<Angle>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OtocSection {
    observable: Field<String>,
    sites: Field<Vec<i64>>,
    n_max: Field<i64>,
    convention: Field<String>,
    enabled: Field<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisSection {
    fit: Field<bool>,
    saturation: Field<bool>,
    ipr: Field<bool>,
    nnsd_kicks: Field<Vec<i64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    output: Field<String>,
    workers: Field<i64>,
}

impl FileConfig {
    fn resolve(self, text: &str) -> Result<RunConfig, ConfigError> {
        let line = |s: &std::ops::Range<usize>| line_of(text, s.start);
        let mut c = RunConfig::default();
        if let Some(v) = self.chain.n {
            let l = line(&v.span());
            let n = *v.get_ref();
            if n % 2 != 0 {
                return Err(ConfigError::at(l, format!("N must be even (got {n})")));
            }
            if n < 2 || n > crate::algebra::MAX_SITES as i64 {
                return Err(ConfigError::at(l, format!("N must lie in 2..={} (got {n})", crate::algebra::MAX_SITES)));
            }
            c.n_sites = n as usize;
        }
        if let Some(v) = self.chain.j {
            c.coupling = v.into_inner();
        }
        if let Some(v) = self.chain.tau {
            let l = line(&v.span());
            c.tau = v.into_inner();
            if !(c.tau.value() > 0.0) {
                return Err(ConfigError::at(l, format!("tau must be positive (got {})", c.tau)));
            }
        }
        if let Some(v) = self.schedules.protocol {
            let l = line(&v.span());
            c.protocol = v.get_ref().parse().map_err(|e: String| ConfigError::at(l, e))?;
        }
        c.hz0 = default_hz0(c.protocol);
        if let Some(v) = self.schedules.hx0 {
            c.hx0 = v.into_inner();
        }
        if let Some(v) = self.schedules.hz0 {
            c.hz0 = v.into_inner();
        }
        if let Some(v) = self.schedules.gamma {
            let l = line(&v.span());
            c.gamma = v.into_inner();
            if c.gamma < 0.0 {
                return Err(ConfigError::at(l, format!("gamma must be non-negative (got {})", c.gamma)));
            }
        }
        if let Some(v) = self.schedules.t_max {
            let l = line(&v.span());
            c.t_max = v.into_inner();
            if !(c.t_max.value() > 0.0) {
                return Err(ConfigError::at(l, format!("t_max must be positive (got {})", c.t_max)));
            }
        }
        if let Some(v) = self.otoc.observable {
            let l = line(&v.span());
            c.observable = v.get_ref().parse().map_err(|e: String| ConfigError::at(l, e))?;
        }
        if let Some(v) = self.otoc.sites {
            let l = line(&v.span());
            match v.get_ref().as_slice() {
                &[a, b] if a > 0 && b > 0 => c.sites = Some((a as usize, b as usize)),
                _ => return Err(ConfigError::at(l, "sites must be two positive site indices")),
            }
        }
        if let Some(v) = self.otoc.convention {
            let l = line(&v.span());
            c.convention = v.get_ref().parse().map_err(|e: String| ConfigError::at(l, e))?;
        }
        if let Some(v) = self.otoc.enabled {
            c.otoc = v.into_inner();
        }
        c.n_max = default_n_max(&c.quench(), c.tau.value());
        if let Some(v) = self.otoc.n_max {
            let l = line(&v.span());
            let n = *v.get_ref();
            if n < 1 {
                return Err(ConfigError::at(l, format!("n_max must be at least 1 (got {n})")));
            }
            c.n_max = n as usize;
        }
        if let Some(v) = self.analysis.fit {
            c.analysis.fit = v.into_inner();
        }
        if let Some(v) = self.analysis.saturation {
            c.analysis.saturation = v.into_inner();
        }
        if let Some(v) = self.analysis.ipr {
            c.analysis.ipr = v.into_inner();
        }
        if let Some(v) = self.analysis.nnsd_kicks {
            let l = line(&v.span());
            let kicks = v.into_inner();
            if kicks.iter().any(|&k| k < 1) {
                return Err(ConfigError::at(l, "NNSD kicks start at 1"));
            }
            c.analysis.nnsd_kicks = kicks.into_iter().map(|k| k as usize).collect();
        }
        if let Some(v) = self.sweep.output {
            c.output = Some(PathBuf::from(v.into_inner()));
        }
        if let Some(v) = self.sweep.workers {
            let l = line(&v.span());
            let w = *v.get_ref();
            if w < 1 {
                return Err(ConfigError::at(l, format!("workers must be at least 1 (got {w})")));
            }
            c.workers = Some(w as usize);
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_parsing() {
        assert_eq!("pi/16".parse::<Angle>().unwrap(), Angle::pi_fraction(1, 16));
        assert_eq!("3*pi/4".parse::<Angle>().unwrap(), Angle::pi_fraction(3, 4));
        assert_eq!("2pi/8".parse::<Angle>().unwrap(), Angle::pi_fraction(1, 4));
        assert_eq!("16pi".parse::<Angle>().unwrap().value(), 16.0 * PI);
        assert_eq!(" -PI / 2 ".parse::<Angle>().unwrap().value(), -PI / 2.0);
        assert_eq!("0.25".parse::<Angle>().unwrap().value(), 0.25);
        assert!("pi/0".parse::<Angle>().is_err());
        assert!("tau".parse::<Angle>().is_err());
        assert!("pi16".parse::<Angle>().is_err());
    }

    #[test]
    fn angle_display_round_trip() {
        for s in ["pi/16", "3pi/4", "16pi", "pi", "-pi/2", "0", "0.5"] {
            let a: Angle = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
            assert_eq!(a.to_string().parse::<Angle>().unwrap(), a);
        }
        assert_eq!(Angle::pi_fraction(1, 16).slug(), "pi_16");
    }

    #[test]
    fn symbolic_period_matches_float() {
        assert_eq!("pi/6".parse::<Angle>().unwrap().value(), PI / 6.0);
    }

    #[test]
    fn defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.n_max, 400);
        let c = RunConfig::from_toml("[chain]\ntau = \"pi/16\"\n").unwrap();
        assert_eq!(c.n_max, 1000);
        let c = RunConfig::from_toml("[chain]\ntau = \"pi/16\"\n[schedules]\nprotocol = \"periodic\"\n").unwrap();
        assert_eq!((c.n_max, c.hz0), (256, 4.0));
    }

    #[test]
    fn full_file() {
        let text = "[chain]\nN = 8\nJ = 1.0\ntau = \"pi/6\"\n\n[schedules]\nprotocol = \"linear\"\nhx0 = 1\nhz0 = 1.0\ngamma = 0.2\n\n[otoc]\nobservable = \"local-z\"\nsites = [2, 5]\nn_max = 50\n\n[analysis]\nfit = false\nnnsd_kicks = [1, 10]\n\n[sweep]\noutput = \"out\"\nworkers = 2\n";
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.n_sites, 8);
        assert_eq!(c.hx0, 1.0);
        assert_eq!(c.gamma, 0.2);
        assert_eq!(c.observable, ObservableFamily::LocalPauliZ);
        assert_eq!(c.sites, Some((2, 5)));
        assert_eq!(c.n_max, 50);
        assert!(!c.analysis.fit);
        assert_eq!(c.analysis.nnsd_kicks, vec![1, 10]);
        assert_eq!(c.workers, Some(2));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = RunConfig::from_toml("[chain]\nJ = 1.0\nN = 3\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().contains("N must be even"), "{e}");
        let e = RunConfig::from_toml("[chain]\ntau = \"tau/2\"\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = RunConfig::from_toml("[analysis]\n\nnnsd_kicks = [0, 3]\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = RunConfig::from_toml("[chain]\nbogus = 1\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = RunConfig::from_toml("[chain\n").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn nnsd_kicks_bounded_by_n_max() {
        let e = RunConfig::from_toml("[otoc]\nn_max = 10\n[analysis]\nnnsd_kicks = [5, 20]\n").unwrap_err();
        assert!(e.message.contains("exceeds n_max"), "{e}");
    }

    #[test]
    fn keys_and_hashes() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.content_hash(), b.content_hash());
        b.output = Some("elsewhere".into());
        b.workers = Some(3);
        assert_eq!(a.content_hash(), b.content_hash());
        b.hx0 = 0.1;
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.run_key(), "linear_N12_taupi_4_hx0_hz1_g0.1_block-x_n400");
        assert!(!a.run_key().contains('/'));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut o = Overrides::new();
        o.set("chain", "N", 8).set("schedules", "protocol", "periodic");
        let c = RunConfig::resolve(Some("[chain]\nN = 10\ntau = \"pi/16\"\n"), &o).unwrap();
        assert_eq!((c.n_sites, c.protocol, c.hz0, c.n_max), (8, ProtocolKind::Periodic, 4.0, 256));
        let mut bad = Overrides::new();
        bad.set("chain", "N", 3);
        let e = RunConfig::resolve(None, &bad).unwrap_err();
        assert_eq!(e.line, None);
        assert!(e.message.contains("N must be even"));
        let e = RunConfig::resolve(Some("[chain]\nN = 5\n"), &Overrides::new()).unwrap_err();
        assert_eq!(e.line, Some(2));
        // An override may repair the file; a problem it leaves alone keeps its line.
        let c = RunConfig::resolve(Some("[chain]\nN = 5\n"), &o).unwrap();
        assert_eq!(c.n_sites, 8);
        let mut hx = Overrides::new();
        hx.set("schedules", "hx0", 1.0);
        let e = RunConfig::resolve(Some("[chain]\nN = 5\n"), &hx).unwrap_err();
        assert_eq!(e.line, Some(2));
    }
}
