use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use otoc_quench::config::{ConfigError, Overrides, RunConfig};
use otoc_quench::figures::{figure_recipe, write_bundle, FigureError, RecipeOverrides};
use otoc_quench::output::{self, ManifestEntry};
use otoc_quench::spectral::HistogramOptions;
use otoc_quench::analysis::{IprOptions, IprWindow};
use otoc_quench::sweep::{run_grid, run_point, AnalysisSettings, GridOptions, GridOutcome, PointOutcome};

/// Kicked Ising chains under quenched fields: OTOCs, spacing statistics and figure bundles.
#[derive(Debug, Parser)]
#[command(name = "otoc-quench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one OTOC series and its growth, saturation and IPR analyses.
    Otoc(OtocArgs),
    /// Spacing statistics of the cumulative unitary at selected kicks.
    Nnsd(NnsdArgs),
    /// Compute the CSV bundle behind one data figure (F2…F10).
    Figure(FigureArgs),
    /// Run the Cartesian product of comma-separated parameter lists.
    Grid(GridArgs),
}

/// Physics settings. Each flag overrides the configuration file.
#[derive(Debug, Args)]
struct PhysicsArgs {
    /// TOML configuration file [default: none]
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of sites (even) [default: 12]
    #[arg(long = "N", value_name = "N")]
    n_sites: Option<i64>,
    /// Ising coupling J [default: 1]
    #[arg(long = "J", value_name = "J")]
    coupling: Option<f64>,
    /// Kick period, e.g. pi/16 or 0.2 [default: pi/4]
    #[arg(long)]
    tau: Option<String>,
    /// constant, linear or periodic [default: linear]
    #[arg(long)]
    protocol: Option<String>,
    /// Longitudinal amplitude h_x0 [default: 0]
    #[arg(long)]
    hx0: Option<f64>,
    /// Transverse intercept h_z0 [default: 1 (linear), 4 (periodic)]
    #[arg(long)]
    hz0: Option<f64>,
    /// Linear slope Γ [default: 0.1]
    #[arg(long)]
    gamma: Option<f64>,
    /// Duration of the periodic quench [default: 16pi]
    #[arg(long = "t-max")]
    t_max: Option<String>,
}

#[derive(Debug, Args)]
struct OtocArgs {
    #[command(flatten)]
    physics: PhysicsArgs,
    /// block-x, block-z, local-x or local-z [default: block-x]
    #[arg(long)]
    observable: Option<String>,
    /// Sites of W and V for local observables, e.g. 1,6 [default: 1,N/2]
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<i64>>,
    /// Number of kicks [default: 1000 for tau <= pi/16, 400 otherwise; t_max/tau for periodic]
    #[arg(long)]
    nmax: Option<i64>,
    /// U_W_Udag or Udag_W_U [default: U_W_Udag]
    #[arg(long)]
    convention: Option<String>,
    /// Skip the power-law fit [default: false]
    #[arg(long)]
    no_fit: bool,
    /// Skip the saturation statistics [default: false]
    #[arg(long)]
    no_saturation: bool,
    /// Skip the Fourier IPR [default: false]
    #[arg(long)]
    no_ipr: bool,
    #[command(flatten)]
    ipr: IprArgs,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum WindowArg {
    Full,
    Saturation,
}

#[derive(Debug, Args)]
struct IprArgs {
    /// Fourier IPR window: the whole series or its trailing half [default: full]
    #[arg(long, value_enum, default_value_t = WindowArg::Full, hide_default_value = true)]
    window: WindowArg,
    /// Subtract the window mean before the Fourier transform [default: false]
    #[arg(long)]
    remove_mean: bool,
}

impl IprArgs {
    fn settings(&self) -> AnalysisSettings {
        let window = match self.window {
            WindowArg::Full => IprWindow::Full,
            WindowArg::Saturation => IprWindow::Saturation,
        };
        AnalysisSettings { ipr: IprOptions { window, remove_mean: self.remove_mean }, ..Default::default() }
    }
}

#[derive(Debug, Args)]
struct HistogramArgs {
    /// Histogram bins [default: 25]
    #[arg(long, default_value_t = HistogramOptions::default().bins, hide_default_value = true)]
    bins: usize,
    /// Histogram cutoff in units of the mean spacing [default: 4]
    #[arg(long = "s-cut", default_value_t = HistogramOptions::default().s_cut, hide_default_value = true)]
    s_cut: f64,
    /// Relative margin required for a verdict [default: 0.1]
    #[arg(long, default_value_t = HistogramOptions::default().margin, hide_default_value = true)]
    margin: f64,
}

impl HistogramArgs {
    fn options(&self) -> HistogramOptions {
        HistogramOptions { bins: self.bins, s_cut: self.s_cut, margin: self.margin }
    }
}

#[derive(Debug, Args)]
struct NnsdArgs {
    #[command(flatten)]
    physics: PhysicsArgs,
    /// Kicks at which to analyse the cumulative unitary, e.g. 1,5,10 [default: from the configuration file]
    #[arg(long, value_delimiter = ',')]
    kicks: Option<Vec<i64>>,
    #[command(flatten)]
    histogram: HistogramArgs,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FigureArgs {
    /// Figure id, F2…F10
    id: String,
    /// Bundle root; the bundle goes to <out>/<id>/ [default: figures]
    #[arg(long, default_value = "figures", hide_default_value = true)]
    out: PathBuf,
    /// Override the number of sites of every run [default: as in the figure]
    #[arg(long = "N", value_name = "N")]
    n_sites: Option<usize>,
    /// Override the number of kicks of every run [default: as in the figure]
    #[arg(long)]
    nmax: Option<usize>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    workers: Option<usize>,
    /// Cache directory for series and spectra [default: none]
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// TOML configuration file for the fixed settings [default: none]
    #[arg(long)]
    config: Option<PathBuf>,
    /// Site counts, e.g. 8,10,12 [default: from the configuration]
    #[arg(long = "N", value_name = "N", value_delimiter = ',')]
    n_sites: Vec<i64>,
    /// Kick periods, e.g. pi/16,pi/4 [default: from the configuration]
    #[arg(long, value_delimiter = ',')]
    tau: Vec<String>,
    /// Protocols [default: from the configuration]
    #[arg(long, value_delimiter = ',')]
    protocol: Vec<String>,
    /// Longitudinal amplitudes [default: from the configuration]
    #[arg(long, value_delimiter = ',')]
    hx0: Vec<f64>,
    /// Linear slopes [default: from the configuration]
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Observable families [default: from the configuration]
    #[arg(long, value_delimiter = ',')]
    observable: Vec<String>,
    #[command(flatten)]
    ipr: IprArgs,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    workers: Option<usize>,
    /// Cache directory for series and spectra [default: none]
    #[arg(long)]
    cache: Option<PathBuf>,
}

/// Failure with its exit status: 2 for input errors, 3 for numerical ones.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::numerical(format!("i/o: {e}"))
    }
}

fn read_config(path: Option<&Path>) -> Result<Option<String>, Failure> {
    path.map(|p| std::fs::read_to_string(p).map_err(|e| Failure::input(format!("cannot read {}: {e}", p.display()))))
        .transpose()
}

fn physics_overrides(p: &PhysicsArgs, o: &mut Overrides) {
    if let Some(v) = p.n_sites {
        o.set("chain", "N", v);
    }
    if let Some(v) = p.coupling {
        o.set("chain", "J", v);
    }
    if let Some(v) = &p.tau {
        o.set("chain", "tau", v.as_str());
    }
    if let Some(v) = &p.protocol {
        o.set("schedules", "protocol", v.as_str());
    }
    if let Some(v) = p.hx0 {
        o.set("schedules", "hx0", v);
    }
    if let Some(v) = p.hz0 {
        o.set("schedules", "hz0", v);
    }
    if let Some(v) = p.gamma {
        o.set("schedules", "gamma", v);
    }
    if let Some(v) = &p.t_max {
        o.set("schedules", "t_max", v.as_str());
    }
}

fn load(physics: &PhysicsArgs, mut overrides: Overrides) -> Result<RunConfig, Failure> {
    physics_overrides(physics, &mut overrides);
    let text = read_config(physics.config.as_deref())?;
    let config = RunConfig::resolve(text.as_deref(), &overrides).map_err(|e| match &physics.config {
        Some(p) if e.line.is_some() => Failure::input(format!("{}: {e}", p.display())),
        _ => Failure::input(e.to_string()),
    })?;
    Ok(config)
}

fn output_dir(flag: &Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.clone().or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn report_errors(point: &PointOutcome) -> Result<(), Failure> {
    if point.failed() {
        return Err(Failure::numerical(format!("{}: {}", point.key, point.errors.join("; "))));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(output::fmt_num).unwrap_or_else(|| "NA".into())
}

fn cmd_otoc(args: &OtocArgs) -> Result<(), Failure> {
    let mut o = Overrides::new();
    if let Some(v) = &args.observable {
        o.set("otoc", "observable", v.as_str());
    }
    if let Some(v) = &args.sites {
        o.set("otoc", "sites", v.clone());
    }
    if let Some(v) = args.nmax {
        o.set("otoc", "n_max", v);
    }
    if let Some(v) = &args.convention {
        o.set("otoc", "convention", v.as_str());
    }
    o.set("otoc", "enabled", true);
    if args.no_fit {
        o.set("analysis", "fit", false);
    }
    if args.no_saturation {
        o.set("analysis", "saturation", false);
    }
    if args.no_ipr {
        o.set("analysis", "ipr", false);
    }
    let mut config = load(&args.physics, o)?;
    config.analysis.nnsd_kicks.clear();
    let out = output_dir(&args.out, &config);
    let point = run_point(&config, &GridOptions { analysis: args.ipr.settings(), ..Default::default() });
    if let Some(series) = &point.result.series {
        let rel = format!("{}.csv", point.key);
        output::write_file(&out, &rel, &output::otoc_csv(series))?;
        eprintln!("wrote {}", out.join(rel).display());
    }
    println!(
        "b={}, osc_ratio={}, xi={}",
        fmt_opt(point.result.fit.map(|f| f.b)),
        fmt_opt(point.result.saturation.map(|s| s.osc_ratio)),
        fmt_opt(point.result.ipr.map(|r| r.xi)),
    );
    report_errors(&point)
}

fn cmd_nnsd(args: &NnsdArgs) -> Result<(), Failure> {
    let mut o = Overrides::new();
    o.set("otoc", "enabled", false);
    if let Some(kicks) = &args.kicks {
        if kicks.contains(&0) {
            return Err(Failure::input("kicks start at 1 (got 0)"));
        }
        o.set("analysis", "nnsd_kicks", kicks.clone());
        if let Some(&last) = kicks.iter().max() {
            o.set("otoc", "n_max", last);
        }
    }
    let config = load(&args.physics, o)?;
    if config.analysis.nnsd_kicks.is_empty() {
        return Err(Failure::input("no kicks given (use --kicks or [analysis] nnsd_kicks)"));
    }
    let options = GridOptions {
        analysis: AnalysisSettings { histogram: args.histogram.options(), ..Default::default() },
        ..Default::default()
    };
    let point = run_point(&config, &options);
    report_errors(&point)?;
    let out = output_dir(&args.out, &config);
    output::write_file(&out, &format!("{}_spacings.csv", point.key), &output::spacings_csv(&point.result.nnsd))?;
    output::write_file(&out, &format!("{}_hist.csv", point.key), &output::histogram_csv(&point.result.nnsd))?;
    for r in &point.result.nnsd {
        println!(
            "kick={} verdict={:?} d_W={} d_P={}",
            r.kick,
            r.score.verdict,
            output::fmt_num(r.score.distance_wd),
            output::fmt_num(r.score.distance_poisson)
        );
    }
    Ok(())
}

fn grid_summary(grid: &GridOutcome) -> Result<(), Failure> {
    let failed: Vec<String> = grid.failures().map(|p| format!("{}: {}", p.key, p.errors.join("; "))).collect();
    for f in &failed {
        eprintln!("failed {f}");
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::numerical(format!("{} of {} runs failed", failed.len(), grid.points.len())))
    }
}

fn cmd_figure(args: &FigureArgs) -> Result<(), Failure> {
    let overrides = RecipeOverrides { n_sites: args.n_sites, n_max: args.nmax };
    let recipe = figure_recipe(&args.id, overrides).map_err(|e| Failure::input(e.to_string()))?;
    let runs = recipe.runs();
    for run in &runs {
        run.validate().map_err(|e| Failure::input(format!("{}: {e}", run.run_key())))?;
    }
    eprintln!("{}: {} ({} runs)", recipe.id, recipe.description, runs.len());
    let grid = run_grid(&runs, &GridOptions { workers: args.workers, cache: args.cache.clone(), ..Default::default() });
    grid_summary(&grid)?;
    let entries = write_bundle(&recipe, &grid, &args.out).map_err(|e| match e {
        FigureError::Io(e) => Failure::from(e),
        other => Failure::numerical(other.to_string()),
    })?;
    eprintln!("wrote {} files to {}", entries.len() + 1, args.out.join(&recipe.id).display());
    Ok(())
}

fn cmd_grid(args: &GridArgs) -> Result<(), Failure> {
    let text = read_config(args.config.as_deref())?;
    if let Some(t) = &text {
        RunConfig::from_toml(t).map_err(|e| match &args.config {
            Some(p) => Failure::input(format!("{}: {e}", p.display())),
            None => Failure::input(e.to_string()),
        })?;
    }
    type Setter = Box<dyn Fn(&mut Overrides)>;
    let mut axes: Vec<Vec<Setter>> = Vec::new();
    let mut push = |values: Vec<Setter>| {
        if !values.is_empty() {
            axes.push(values);
        }
    };
    push(args.n_sites.iter().map(|&v| Box::new(move |o: &mut Overrides| { o.set("chain", "N", v); }) as Setter).collect());
    push(args.tau.iter().cloned().map(|v| Box::new(move |o: &mut Overrides| { o.set("chain", "tau", v.as_str()); }) as Setter).collect());
    push(args.protocol.iter().cloned().map(|v| Box::new(move |o: &mut Overrides| { o.set("schedules", "protocol", v.as_str()); }) as Setter).collect());
    push(args.hx0.iter().map(|&v| Box::new(move |o: &mut Overrides| { o.set("schedules", "hx0", v); }) as Setter).collect());
    push(args.gamma.iter().map(|&v| Box::new(move |o: &mut Overrides| { o.set("schedules", "gamma", v); }) as Setter).collect());
    push(args.observable.iter().cloned().map(|v| Box::new(move |o: &mut Overrides| { o.set("otoc", "observable", v.as_str()); }) as Setter).collect());

    let mut combos: Vec<Overrides> = vec![Overrides::new()];
    for axis in &axes {
        combos = combos
            .iter()
            .flat_map(|base| {
                axis.iter().map(move |set| {
                    let mut o = base.clone();
                    set(&mut o);
                    o
                })
            })
            .collect();
    }
    let configs = combos
        .iter()
        .map(|o| RunConfig::resolve(text.as_deref(), o))
        .collect::<Result<Vec<_>, _>>()?;
    let base = &configs[0];
    let out = output_dir(&args.out, base);
    let workers = args.workers.or(base.workers);
    let grid = run_grid(&configs, &GridOptions { workers, cache: args.cache.clone(), analysis: args.ipr.settings() });

    let mut entries = Vec::new();
    let mut add = |key: &str, rel: String, contents: String| -> Result<(), Failure> {
        let sha256 = output::write_file(&out, &rel, &contents)?;
        entries.push(ManifestEntry { figure_id: "grid".into(), run_key: key.into(), csv_path: rel, sha256 });
        Ok(())
    };
    let ok: Vec<&PointOutcome> = grid.points.iter().filter(|p| !p.failed()).collect();
    for p in &ok {
        if let Some(s) = &p.result.series {
            add(&p.key, format!("otoc/{}.csv", p.key), output::otoc_csv(s))?;
        }
        if !p.result.nnsd.is_empty() {
            add(&p.key, format!("nnsd/{}_spacings.csv", p.key), output::spacings_csv(&p.result.nnsd))?;
            add(&p.key, format!("nnsd/{}_hist.csv", p.key), output::histogram_csv(&p.result.nnsd))?;
        }
    }
    let fits: Vec<_> = ok.iter().filter_map(|p| p.result.fit.map(|f| (p.key.clone(), f))).collect();
    if !fits.is_empty() {
        add("grid", "fits.csv".into(), output::fits_csv(&fits))?;
    }
    let sat: Vec<_> = ok.iter().filter_map(|p| p.result.saturation.map(|s| (p.key.clone(), s))).collect();
    if !sat.is_empty() {
        add("grid", "saturation.csv".into(), output::saturation_csv(&sat))?;
    }
    entries.sort();
    output::write_file(&out, "manifest.csv", &output::manifest_csv(&entries))?;
    for p in &ok {
        println!(
            "{}: b={}, osc_ratio={}, xi={}",
            p.key,
            fmt_opt(p.result.fit.map(|f| f.b)),
            fmt_opt(p.result.saturation.map(|s| s.osc_ratio)),
            fmt_opt(p.result.ipr.map(|r| r.xi)),
        );
    }
    grid_summary(&grid)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Otoc(a) => cmd_otoc(a),
        Command::Nnsd(a) => cmd_nnsd(a),
        Command::Figure(a) => cmd_figure(a),
        Command::Grid(a) => cmd_grid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
