//! Figure recipes (F2…F10): the run grid behind each data figure and the
//! CSV bundle written from the grid results.
//!
//! Bundle layout under `<root>/<id>/`:
//! * `otoc/<run_key>.csv` for every OTOC run,
//! * `<panel>/fits.csv` and `<panel>/saturation.csv` for growth and saturation panels,
//! * `<panel>/ipr.csv` for each IPR series,
//! * `<panel>/<run_key>_spacings.csv` and `<panel>/<run_key>_hist.csv` for NNSD runs,
//! * `manifest.csv` listing every file with its SHA-256.

use std::collections::BTreeSet;
use std::io;
use std::path::Path;
use thiserror::Error;

use crate::analysis::normalize_ipr_sweep;
use crate::config::{default_n_max, Angle, AnalysisToggles, RunConfig};
use crate::otoc::ObservableFamily;
use crate::output::{self, ManifestEntry};
use crate::schedules::ProtocolKind;
use crate::sweep::GridOutcome;

#[derive(Debug, Error)]
pub enum FigureError {
    #[error("unknown figure id '{0}' (data figures are F2…F10)")]
    UnknownId(String),
    #[error("F1 is an illustration and has no data")]
    Illustration,
    #[error("run {0} is missing from the grid results")]
    MissingRun(String),
    #[error("run {key} has no {what}")]
    MissingResult { key: String, what: &'static str },
    #[error("{0}")]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// The three kick periods of every figure.
pub fn periods() -> [Angle; 3] {
    [Angle::pi_fraction(1, 16), Angle::pi_fraction(1, 6), Angle::pi_fraction(1, 4)]
}

/// `0, step, …, 1`.
pub fn unit_grid(step_tenths: usize) -> Vec<f64> {
    (0..=10).step_by(step_tenths).map(|k| k as f64 / 10.0).collect()
}

/// Slopes of the Γ sweeps.
pub const GAMMA_SWEEP: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];
/// NNSD kicks of the linear protocol.
pub const LINEAR_NNSD_KICKS: [usize; 5] = [1, 5, 10, 20, 50];
/// NNSD kicks of the periodic protocol (`t_max = 16π`, `τ = π/4`: 64 kicks).
pub const PERIODIC_NNSD_KICKS: [usize; 5] = [1, 8, 16, 32, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptParameter {
    Hx0,
    Gamma,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PanelKind {
    Growth,
    Saturation,
    Ipr(SweptParameter),
    Nnsd,
}

/// One output panel: the runs it aggregates and how.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub name: String,
    pub kind: PanelKind,
    pub runs: Vec<RunConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRecipe {
    pub id: String,
    pub description: &'static str,
    pub panels: Vec<Panel>,
}

/// Overrides applied to every run of a recipe (for quick or reduced runs).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RecipeOverrides {
    pub n_sites: Option<usize>,
    pub n_max: Option<usize>,
}

impl FigureRecipe {
    /// All runs, deduplicated by run key; toggles of duplicates are merged.
    pub fn runs(&self) -> Vec<RunConfig> {
        let mut out: Vec<RunConfig> = Vec::new();
        for run in self.panels.iter().flat_map(|p| &p.runs) {
            match out.iter_mut().find(|r| r.run_key() == run.run_key()) {
                Some(r) => {
                    r.analysis.fit |= run.analysis.fit;
                    r.analysis.saturation |= run.analysis.saturation;
                    r.analysis.ipr |= run.analysis.ipr;
                }
                None => out.push(run.clone()),
            }
        }
        out
    }

    fn apply(mut self, o: RecipeOverrides) -> Self {
        for run in self.panels.iter_mut().flat_map(|p| p.runs.iter_mut()) {
            if let Some(n) = o.n_sites {
                run.n_sites = n;
            }
            if let Some(m) = o.n_max {
                if run.otoc {
                    run.n_max = m;
                } else {
                    run.analysis.nnsd_kicks.retain(|&k| k <= m);
                    run.n_max = run.analysis.nnsd_kicks.last().copied().unwrap_or(1);
                }
            }
        }
        self
    }
}

fn otoc_run(protocol: ProtocolKind, tau: Angle, hx0: f64, family: ObservableFamily) -> RunConfig {
    let mut c = RunConfig {
        protocol,
        tau,
        hx0,
        hz0: crate::config::default_hz0(protocol),
        observable: family,
        analysis: AnalysisToggles { fit: false, saturation: false, ipr: false, nnsd_kicks: Vec::new() },
        ..RunConfig::default()
    };
    c.n_max = default_n_max(&c.quench(), tau.value());
    c
}

fn with_toggle(mut c: RunConfig, kind: &PanelKind) -> RunConfig {
    match kind {
        PanelKind::Growth => c.analysis.fit = true,
        PanelKind::Saturation => c.analysis.saturation = true,
        PanelKind::Ipr(_) => c.analysis.ipr = true,
        PanelKind::Nnsd => {}
    }
    c
}

fn panel(name: impl Into<String>, kind: PanelKind, runs: Vec<RunConfig>) -> Panel {
    let runs = runs.into_iter().map(|r| with_toggle(r, &kind)).collect();
    Panel { name: name.into(), kind, runs }
}

fn nnsd_run(protocol: ProtocolKind, hx0: f64, kicks: &[usize]) -> RunConfig {
    let mut c = otoc_run(protocol, Angle::pi_fraction(1, 4), hx0, ObservableFamily::BlockX);
    c.otoc = false;
    c.analysis.nnsd_kicks = kicks.to_vec();
    c.n_max = *kicks.last().expect("non-empty kick list");
    c
}

/// Saturation sweep over `h_x0` at the three periods (periodic protocol).
fn periodic_saturation(family: ObservableFamily, step_tenths: usize) -> Vec<Panel> {
    periods()
        .into_iter()
        .map(|tau| {
            let runs = unit_grid(step_tenths)
                .into_iter()
                .map(|hx| otoc_run(ProtocolKind::Periodic, tau, hx, family))
                .collect();
            panel(format!("saturation_tau{}", tau.slug()), PanelKind::Saturation, runs)
        })
        .collect()
}

pub fn figure_recipe(id: &str, overrides: RecipeOverrides) -> Result<FigureRecipe, FigureError> {
    use ObservableFamily::*;
    use ProtocolKind::*;
    let id = id.trim().to_ascii_uppercase();
    let (description, panels) = match id.as_str() {
        "F1" => return Err(FigureError::Illustration),
        "F2" => {
            let runs = [0.0, 1.0]
                .into_iter()
                .flat_map(|hx| periods().into_iter().map(move |tau| otoc_run(Linear, tau, hx, BlockX)))
                .collect();
            ("OTOC growth, linear quench, h_x0 = 0 and 1", vec![panel("growth", PanelKind::Growth, runs)])
        }
        "F3" => {
            let panels = periods()
                .into_iter()
                .map(|tau| {
                    let runs = unit_grid(1).into_iter().map(|hx| otoc_run(Linear, tau, hx, BlockX)).collect();
                    panel(format!("saturation_tau{}", tau.slug()), PanelKind::Saturation, runs)
                })
                .collect();
            ("OTOC saturation versus h_x0, linear quench", panels)
        }
        "F4" => {
            let tau = Angle::pi_fraction(1, 4);
            let panels = [0.0, 1.0]
                .into_iter()
                .map(|hx| {
                    let runs = GAMMA_SWEEP
                        .iter()
                        .map(|&g| RunConfig { gamma: g, ..otoc_run(Linear, tau, hx, BlockX) })
                        .collect();
                    panel(format!("saturation_hx{hx}"), PanelKind::Saturation, runs)
                })
                .collect();
            ("OTOC saturation versus Γ at τ = π/4", panels)
        }
        "F5" => {
            let mut panels = Vec::new();
            for tau in periods() {
                let runs = unit_grid(1).into_iter().map(|hx| otoc_run(Linear, tau, hx, BlockX)).collect();
                panels.push(panel(format!("ipr_hx0_tau{}", tau.slug()), PanelKind::Ipr(SweptParameter::Hx0), runs));
            }
            for tau in periods() {
                for hx in [0.0, 1.0] {
                    let runs = GAMMA_SWEEP
                        .iter()
                        .map(|&g| RunConfig { gamma: g, ..otoc_run(Linear, tau, hx, BlockX) })
                        .collect();
                    panels.push(panel(
                        format!("ipr_gamma_tau{}_hx{hx}", tau.slug()),
                        PanelKind::Ipr(SweptParameter::Gamma),
                        runs,
                    ));
                }
            }
            ("Fourier IPR versus h_x0 and versus Γ", panels)
        }
        "F6" => {
            let runs = [0.0, 1.0].into_iter().map(|hx| nnsd_run(Linear, hx, &LINEAR_NNSD_KICKS)).collect();
            ("NNSD of cumulative unitaries, linear quench, τ = π/4", vec![panel("nnsd", PanelKind::Nnsd, runs)])
        }
        "F7" => {
            let tau = Angle::pi_fraction(1, 4);
            let t8 = Angle::pi_fraction(8, 1);
            let at_8pi = |hx: f64, n: usize| {
                let mut c = RunConfig { t_max: t8, n_sites: n, ..otoc_run(Periodic, tau, hx, BlockX) };
                c.n_max = default_n_max(&c.quench(), tau.value());
                c
            };
            let mut panels = vec![
                panel("growth", PanelKind::Growth, vec![at_8pi(0.0, 12), at_8pi(1.0, 12)]),
                panel("growth_sizes", PanelKind::Growth, [8, 10, 12].into_iter().map(|n| at_8pi(0.0, n)).collect()),
            ];
            panels.extend(periodic_saturation(BlockX, 1));
            let runs = [0.0, 4.0].into_iter().map(|hx| nnsd_run(Periodic, hx, &PERIODIC_NNSD_KICKS)).collect();
            panels.push(panel("nnsd", PanelKind::Nnsd, runs));
            ("Periodic quench, block x observables: growth, saturation and NNSD", panels)
        }
        "F8" => ("Periodic quench, local x observables", periodic_saturation(LocalPauliX, 1)),
        "F9" => ("Periodic quench, block z observables", periodic_saturation(BlockZ, 2)),
        "F10" => ("Periodic quench, local z observables", periodic_saturation(LocalPauliZ, 1)),
        _ => return Err(FigureError::UnknownId(id)),
    };
    let recipe = FigureRecipe { id, description, panels };
    Ok(recipe.apply(overrides))
}

/// Ids of every data figure.
pub const FIGURE_IDS: [&str; 9] = ["F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10"];

fn lookup<'a>(grid: &'a GridOutcome, run: &RunConfig) -> Result<&'a crate::sweep::PointOutcome, FigureError> {
    let key = run.run_key();
    grid.get(&key).ok_or(FigureError::MissingRun(key))
}

/// Writes the CSV bundle of `recipe` into `root/<id>/` and returns the
/// manifest entries (also written to `manifest.csv`).
pub fn write_bundle(recipe: &FigureRecipe, grid: &GridOutcome, root: &Path) -> Result<Vec<ManifestEntry>, FigureError> {
    let dir = root.join(&recipe.id);
    std::fs::create_dir_all(&dir)?;
    let mut entries = Vec::new();
    let mut add = |run_key: String, rel: String, contents: String| -> Result<(), FigureError> {
        let sha256 = output::write_file(&dir, &rel, &contents)?;
        entries.push(ManifestEntry { figure_id: recipe.id.clone(), run_key, csv_path: rel, sha256 });
        Ok(())
    };
    let mut written = BTreeSet::new();
    for p in &recipe.panels {
        for run in &p.runs {
            let point = lookup(grid, run)?;
            if let Some(series) = &point.result.series {
                if written.insert(point.key.clone()) {
                    add(point.key.clone(), format!("otoc/{}.csv", point.key), output::otoc_csv(series))?;
                }
            }
        }
        match &p.kind {
            PanelKind::Growth => {
                let rows = p
                    .runs
                    .iter()
                    .map(|run| {
                        let pt = lookup(grid, run)?;
                        let fit = pt.result.fit.ok_or(FigureError::MissingResult { key: pt.key.clone(), what: "fit" })?;
                        Ok((pt.key.clone(), fit))
                    })
                    .collect::<Result<Vec<_>, FigureError>>()?;
                add(p.name.clone(), format!("{}/fits.csv", p.name), output::fits_csv(&rows))?;
            }
            PanelKind::Saturation => {
                let rows = p
                    .runs
                    .iter()
                    .map(|run| {
                        let pt = lookup(grid, run)?;
                        let s = pt
                            .result
                            .saturation
                            .ok_or(FigureError::MissingResult { key: pt.key.clone(), what: "saturation statistics" })?;
                        Ok((pt.key.clone(), s))
                    })
                    .collect::<Result<Vec<_>, FigureError>>()?;
                add(p.name.clone(), format!("{}/saturation.csv", p.name), output::saturation_csv(&rows))?;
            }
            PanelKind::Ipr(param) => {
                let results = p
                    .runs
                    .iter()
                    .map(|run| {
                        let pt = lookup(grid, run)?;
                        let r = pt.result.ipr.ok_or(FigureError::MissingResult { key: pt.key.clone(), what: "IPR" })?;
                        let x = match param {
                            SweptParameter::Hx0 => run.hx0,
                            SweptParameter::Gamma => run.gamma,
                        };
                        Ok((x, r))
                    })
                    .collect::<Result<Vec<_>, FigureError>>()?;
                let fractions = normalize_ipr_sweep(&results)?;
                let rows: Vec<_> = results.iter().zip(&fractions).map(|((x, r), (_, f))| (*x, *r, *f)).collect();
                add(p.name.clone(), format!("{}/ipr.csv", p.name), output::ipr_csv(&rows))?;
            }
            PanelKind::Nnsd => {
                for run in &p.runs {
                    let pt = lookup(grid, run)?;
                    if pt.result.nnsd.is_empty() {
                        return Err(FigureError::MissingResult { key: pt.key.clone(), what: "NNSD records" });
                    }
                    add(pt.key.clone(), format!("{}/{}_spacings.csv", p.name, pt.key), output::spacings_csv(&pt.result.nnsd))?;
                    add(pt.key.clone(), format!("{}/{}_hist.csv", p.name, pt.key), output::histogram_csv(&pt.result.nnsd))?;
                }
            }
        }
    }
    output::write_file(&dir, "manifest.csv", &output::manifest_csv(&entries))?;
    Ok(entries)
}
