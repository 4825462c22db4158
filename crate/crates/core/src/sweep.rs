//! Parameter grids: per-point execution with an on-disk cache, a worker
//! pool, and results sorted by run key.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::analysis::{
    fit_power_law, ipr_of_otoc, saturation_stats, FitPolicy, IprOptions, IprResult, PowerLawFit,
    SaturationStats, SaturationWindow,
};
use crate::config::RunConfig;
use crate::otoc::{run_otoc_with, OtocSeries, RunOptions};
use crate::spectral::{nnsd_at_kicks, score_nnsd, HistogramOptions, NnsdRecord, SpacingEnsemble};

/// Settings of the analyses applied to every point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub fit: FitPolicy,
    pub saturation: SaturationWindow,
    pub ipr: IprOptions,
    pub histogram: HistogramOptions,
}

#[derive(Debug, Clone, Default)]
pub struct GridOptions {
    /// Size of the worker pool; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Directory of cached series and spacing ensembles.
    pub cache: Option<PathBuf>,
    pub analysis: AnalysisSettings,
}

/// Everything computed for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub series: Option<OtocSeries>,
    pub fit: Option<PowerLawFit>,
    pub saturation: Option<SaturationStats>,
    pub ipr: Option<IprResult>,
    pub nnsd: Vec<NnsdRecord>,
}

/// Outcome of one grid point; the point failed iff `errors` is non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub key: String,
    pub config: RunConfig,
    pub result: PointResult,
    pub errors: Vec<String>,
}

impl PointOutcome {
    pub fn failed(&self) -> bool {
        !self.errors.is_empty()
    }
}

/// Grid results sorted by `(run key, content hash)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub points: Vec<PointOutcome>,
}

impl GridOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &PointOutcome> {
        self.points.iter().filter(|p| p.failed())
    }

    pub fn all_ok(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn get(&self, key: &str) -> Option<&PointOutcome> {
        self.points.iter().find(|p| p.key == key)
    }
}

/// Write-once store of expensive artifacts, one JSON file per content hash.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, kind: &str, hash: &str) -> PathBuf {
        self.dir.join(format!("{kind}-{hash}.json"))
    }

    pub fn load<T: for<'de> Deserialize<'de>>(&self, kind: &str, hash: &str) -> Option<T> {
        let bytes = std::fs::read(self.path(kind, hash)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    /// Stores `value` unless an entry already exists.
    pub fn store<T: Serialize>(&self, kind: &str, hash: &str, value: &T) -> std::io::Result<()> {
        let path = self.path(kind, hash);
        if path.exists() {
            return Ok(());
        }
        std::fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!(".{kind}-{hash}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec(value).map_err(std::io::Error::other)?)?;
        std::fs::rename(&tmp, &path)
    }
}

fn hash_json<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("serializable key")))
}

/// Hash of the settings that determine the OTOC series.
pub fn series_hash(c: &RunConfig) -> String {
    hash_json(&(
        "otoc",
        c.params(),
        c.quench(),
        c.observable_spec(),
        c.n_max,
        c.convention,
    ))
}

/// Hash of the settings that determine the spacing ensembles.
pub fn spectrum_hash(c: &RunConfig) -> String {
    hash_json(&("nnsd", c.params(), c.quench(), &c.analysis.nnsd_kicks))
}

/// Runs one configuration; failures of individual analyses are collected
/// rather than aborting the rest.
pub fn run_point(config: &RunConfig, options: &GridOptions) -> PointOutcome {
    let mut errors = Vec::new();
    let mut result = PointResult { series: None, fit: None, saturation: None, ipr: None, nnsd: Vec::new() };
    let key = config.run_key();
    if let Err(e) = config.validate() {
        errors.push(format!("config: {e}"));
        return PointOutcome { key, config: config.clone(), result, errors };
    }
    let cache = options.cache.as_ref().map(Cache::new);
    let settings = options.analysis;

    if config.otoc {
        let hash = series_hash(config);
        let cached = cache.as_ref().and_then(|c| c.load::<OtocSeries>("otoc", &hash));
        let series = match cached {
            Some(s) => Ok(s),
            None => run_otoc_with(
                &config.params(),
                &config.quench(),
                &config.observable_spec(),
                config.n_max,
                RunOptions { convention: config.convention, stop_above: None },
            )
            .inspect(|s| {
                if let Some(c) = &cache {
                    if let Err(e) = c.store("otoc", &hash, s) {
                        errors.push(format!("cache: {e}"));
                    }
                }
            }),
        };
        match series {
            Ok(series) => {
                if config.analysis.fit {
                    match fit_power_law(&series, settings.fit) {
                        Ok(f) => result.fit = Some(f),
                        Err(e) => errors.push(format!("fit: {e}")),
                    }
                }
                if config.analysis.saturation {
                    match saturation_stats(&series, settings.saturation) {
                        Ok(s) => result.saturation = Some(s),
                        Err(e) => errors.push(format!("saturation: {e}")),
                    }
                }
                if config.analysis.ipr {
                    match ipr_of_otoc(&series, settings.ipr) {
                        Ok(r) => result.ipr = Some(r),
                        Err(e) => errors.push(format!("ipr: {e}")),
                    }
                }
                result.series = Some(series);
            }
            Err(e) => errors.push(format!("otoc: {e}")),
        }
    }

    if !config.analysis.nnsd_kicks.is_empty() {
        let hash = spectrum_hash(config);
        let cached = cache.as_ref().and_then(|c| c.load::<Vec<SpacingEnsemble>>("nnsd", &hash));
        let records = match cached {
            Some(ensembles) => ensembles
                .into_iter()
                .map(|ensemble| {
                    score_nnsd(&ensemble, settings.histogram).map(|score| NnsdRecord { kick: ensemble.kick, ensemble, score })
                })
                .collect::<Result<Vec<_>, _>>(),
            None => nnsd_at_kicks(&config.params(), &config.quench(), &config.analysis.nnsd_kicks, settings.histogram)
                .inspect(|recs| {
                    if let Some(c) = &cache {
                        let ensembles: Vec<&SpacingEnsemble> = recs.iter().map(|r| &r.ensemble).collect();
                        if let Err(e) = c.store("nnsd", &hash, &ensembles) {
                            errors.push(format!("cache: {e}"));
                        }
                    }
                }),
        };
        match records {
            Ok(r) => result.nnsd = r,
            Err(e) => errors.push(format!("nnsd: {e}")),
        }
    }
    PointOutcome { key, config: config.clone(), result, errors }
}

/// Runs every configuration. Identical configurations are executed once.
pub fn run_grid(configs: &[RunConfig], options: &GridOptions) -> GridOutcome {
    let mut unique: Vec<(String, String, &RunConfig)> = Vec::new();
    for c in configs {
        let entry = (c.run_key(), c.content_hash(), c);
        if !unique.iter().any(|(k, h, _)| *k == entry.0 && *h == entry.1) {
            unique.push(entry);
        }
    }
    unique.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    let work = || unique.par_iter().map(|(_, _, c)| run_point(c, options)).collect::<Vec<_>>();
    let points = match options.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    };
    GridOutcome { points }
}
