//! The `gridsvc` command line: fit, relabel, evaluate, benchmark, export,
//! query and plot support vector clustering runs.

mod plot;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use gridsvc::data::parse_class_tag;
use gridsvc::eval::{bench_labeling, class_distribution, precision, write_bench_csv, LabelParams};
use gridsvc::{ClusterAssignment, DataSource, Error, FittedRun, LabelMethod, LabelSpace, RunConfig};

pub use plot::{render_svg, PlotOptions};

/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for failures while running.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "gridsvc", version, about = "Support vector clustering with grid labeling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a ball, label it and write the run, assignments and summary
    Fit(FitArgs),
    /// Relabel a saved run with other labeling parameters
    Label(LabelArgs),
    /// Precision and class distribution of a run or an assignment CSV
    Eval(EvalArgs),
    /// Time the labelers on one fitted ball
    Bench(BenchArgs),
    /// Write the members of every cluster to a text file
    Export(ExportArgs),
    /// List clusters, search members by name or show one cluster
    Query(QueryArgs),
    /// Draw the projected points, clusters and ball as SVG
    Plot(PlotArgs),
}

/// Run parameters; values given here override the config file.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// key=value file read before the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// example, figure2 or terms
    #[arg(long)]
    pub preset: Option<String>,
    /// numeric table (CSV or whitespace separated) or term list
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// feature dictionary for term data
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// TM-TM, TM-RD, TM-BG or TM-TG (or term-term, term-radical, ...)
    #[arg(long)]
    pub language: Option<String>,
    #[arg(long)]
    pub kernel: Option<String>,
    /// quadratic or stochastic
    #[arg(long)]
    pub optimizer: Option<String>,
    /// grid, knn-adj or mst-adj
    #[arg(long)]
    pub labeling: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// vote threshold (grid) or neighbour/link count (adjacency)
    #[arg(long)]
    pub k: Option<usize>,
    /// grid size
    #[arg(long)]
    pub g: Option<usize>,
    /// projection column for x, one-based; 0 with cy=0 selects COA
    #[arg(long)]
    pub cx: Option<usize>,
    #[arg(long)]
    pub cy: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// segment samples of the adjacency labelers
    #[arg(long)]
    pub samples: Option<usize>,
    /// Jaccard+ noise bound
    #[arg(long)]
    pub noise: Option<f64>,
    /// output directory
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// base name of the written files
    #[arg(long, default_value = "run")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// where to write the relabeled run; defaults to overwriting --run
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub labeling: Option<String>,
    #[arg(long)]
    pub g: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["run", "assignment"])))]
pub struct EvalArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// name,cluster CSV; class tags are read from the leading number of each name
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    /// directory for precision.txt and distribution.csv
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// timed repeats per configuration (after one warm-up)
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// grid sizes to time; defaults to the configured g
    #[arg(long, value_delimiter = ',')]
    pub grid_sizes: Vec<usize>,
    /// neighbour (knn-adj) and link (mst-adj) count
    #[arg(long, default_value_t = 10)]
    pub neighbours: usize,
    /// methods to time
    #[arg(long, value_delimiter = ',', default_value = "grid,knn-adj,mst-adj")]
    pub methods: Vec<String>,
    /// CSV with one row per (method, n, g, repeat)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// report kernel-evaluation counts only, leaving out wall times
    #[arg(long)]
    pub ops_only: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// embedded in the file name: clusters_<name>.txt
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("query").required(true).args(["all", "substring", "id"])))]
pub struct QueryArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub all: bool,
    /// clusters with a member whose name contains this text
    #[arg(long)]
    pub substring: Option<String>,
    /// members of one cluster
    #[arg(long)]
    pub id: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// leave out the in-ball cell shading
    #[arg(long)]
    pub no_grid: bool,
    /// leave out the support vector rings
    #[arg(long)]
    pub no_sv: bool,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::FileNotFound(_) | Error::InvalidParameter(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

impl ConfigArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut push = |k: &'static str, val: Option<String>| {
            if let Some(val) = val {
                v.push((k, val));
            }
        };
        push("data", self.data.as_ref().map(|p| p.display().to_string()));
        push("features", self.features.as_ref().map(|p| p.display().to_string()));
        push("language", self.language.clone());
        push("kernel", self.kernel.clone());
        push("optimizer", self.optimizer.clone());
        push("labeling", self.labeling.clone());
        push("nu", self.nu.map(|x| x.to_string()));
        push("q", self.q.map(|x| x.to_string()));
        push("k", self.k.map(|x| x.to_string()));
        push("g", self.g.map(|x| x.to_string()));
        push("cx", self.cx.map(|x| x.to_string()));
        push("cy", self.cy.map(|x| x.to_string()));
        push("seed", self.seed.map(|x| x.to_string()));
        push("samples", self.samples.map(|x| x.to_string()));
        push("noise", self.noise.map(|x| x.to_string()));
        push("output", self.output.as_ref().map(|p| p.display().to_string()));
        v
    }

    /// Defaults, then the config file, then the preset flag, then the other
    /// flags. Every failure here is a usage error.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        let as_usage = |e: Error| usage(e.to_string());
        if let Some(path) = &self.config {
            if !path.exists() {
                return Err(as_usage(Error::FileNotFound(path.clone())));
            }
            let text = fs::read_to_string(path)?;
            cfg.apply_file(&text)
                .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        }
        if let Some(p) = &self.preset {
            cfg.apply_file(&format!("preset={p}")).map_err(as_usage)?;
        }
        for (k, v) in self.flag_pairs() {
            cfg.set(k, &v).map_err(as_usage)?;
        }
        cfg.validate().map_err(as_usage)?;
        Ok(cfg)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError {
        code: EXIT_RUNTIME,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = args.config.resolve()?;
    let source = DataSource::load(&cfg)?;
    let run = gridsvc::fit(&source, &cfg)?;
    fs::create_dir_all(&cfg.output)?;
    let base = cfg.output.join(&args.name);

    let mut bytes = Vec::new();
    run.write(&mut bytes)?;
    write_file(&base.with_extension("run"), &bytes)?;

    let mut csv = Vec::new();
    run.assignment.write_csv(&mut csv, &run.row_names)?;
    write_file(&base.with_extension("clusters.csv"), &csv)?;

    let attributes = source.attributes()?;
    let summary = run.summary(Some(&attributes));
    write_file(&base.with_extension("summary.txt"), summary.as_bytes())?;
    out.write_all(summary.as_bytes())?;
    writeln!(out, "wrote {}", base.with_extension("run").display())?;
    Ok(())
}

fn cmd_label(args: &LabelArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut run = FittedRun::load(&args.run)?;
    let mut cfg = run.config.clone();
    let overrides = [
        ("labeling", args.labeling.clone()),
        ("g", args.g.map(|x| x.to_string())),
        ("k", args.k.map(|x| x.to_string())),
        ("samples", args.samples.map(|x| x.to_string())),
    ];
    for (k, v) in overrides {
        if let Some(v) = v {
            cfg.set(k, &v).map_err(|e| usage(e.to_string()))?;
        }
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    run.relabel(&cfg)?;
    let target = args.out.as_ref().unwrap_or(&args.run);
    let mut bytes = Vec::new();
    run.write(&mut bytes)?;
    write_file(target, &bytes)?;
    out.write_all(run.summary(None).as_bytes())?;
    Ok(())
}

fn tags_of(names: &[String]) -> CliResult<Vec<u32>> {
    let tags: Vec<Option<u32>> = names.iter().map(|n| parse_class_tag(n).0).collect();
    let missing = tags.iter().filter(|t| t.is_none()).count();
    if missing > 0 {
        return Err(Error::MissingTags(missing).into());
    }
    Ok(tags.into_iter().flatten().collect())
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let (names, assignment) = match (&args.run, &args.assignment) {
        (Some(run), _) => {
            let run = FittedRun::load(run)?;
            (run.row_names, run.assignment)
        }
        (None, Some(csv)) => ClusterAssignment::load_csv(csv)?,
        (None, None) => return Err(usage("give --run or --assignment")),
    };
    let tags = tags_of(&names)?;
    let report = precision(&assignment, &tags)?;
    let table = class_distribution(&assignment, &tags)?;
    let mut text = Vec::new();
    report.write_text(&mut text)?;
    writeln!(text)?;
    table.write_text(&mut text)?;
    out.write_all(&text)?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
        let mut p = Vec::new();
        report.write_text(&mut p)?;
        write_file(&dir.join("precision.txt"), &p)?;
        let mut c = Vec::new();
        table.write_csv(&mut c)?;
        write_file(&dir.join("distribution.csv"), &c)?;
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = args.config.resolve()?;
    if args.repeats < 3 {
        return Err(usage(format!("need at least 3 repeats, got {}", args.repeats)));
    }
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<LabelMethod>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(e.to_string()))?;
    let sizes = if args.grid_sizes.is_empty() {
        vec![cfg.g]
    } else {
        args.grid_sizes.clone()
    };
    let source = DataSource::load(&cfg)?;
    let (model, projection) = gridsvc::pipeline::fit_model(&source, &cfg)?;
    let space = LabelSpace::new(&model, &projection)?;

    let mut results = Vec::new();
    for &method in &methods {
        let ladder: &[usize] = if method == LabelMethod::Grid { &sizes } else { &sizes[..1] };
        for &g in ladder {
            let k = if method == LabelMethod::Grid { cfg.k } else { args.neighbours };
            let params = LabelParams { g, k, m: cfg.samples };
            results.push(bench_labeling(&space, method, params, args.repeats)?);
        }
    }

    if args.ops_only {
        writeln!(out, "{:>8} {:>6} {:>4} {:>14}", "method", "n", "g", "kernel_evals")?;
        for r in &results {
            writeln!(out, "{:>8} {:>6} {:>4} {:>14}", r.method.name(), r.n, r.g, r.op_count)?;
        }
    } else {
        let grid_time = results.iter().find(|r| r.method == LabelMethod::Grid).map(|r| r.wall_time);
        writeln!(
            out,
            "{:>8} {:>6} {:>4} {:>14} {:>14} {:>10}",
            "method", "n", "g", "kernel_evals", "median_s", "vs_grid"
        )?;
        for r in &results {
            let speed = grid_time.map_or("-".to_string(), |g| format!("{:.3}", g / r.wall_time));
            writeln!(
                out,
                "{:>8} {:>6} {:>4} {:>14} {:>14.6} {:>10}",
                r.method.name(),
                r.n,
                r.g,
                r.op_count,
                r.wall_time,
                speed
            )?;
        }
    }
    if let Some(path) = &args.out {
        let mut csv = Vec::new();
        write_bench_csv(&results, &mut csv)?;
        write_file(path, &csv)?;
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs, out: &mut dyn Write) -> CliResult<()> {
    let run = FittedRun::load(&args.run)?;
    if args.name.is_empty() || args.name.contains(['/', '\\']) {
        return Err(usage(format!("invalid export name {:?}", args.name)));
    }
    fs::create_dir_all(&args.output)?;
    let path = args.output.join(format!("clusters_{}.txt", args.name));
    let mut bytes = Vec::new();
    run.export_clusters(&mut bytes)?;
    write_file(&path, &bytes)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn print_cluster(out: &mut dyn Write, run: &FittedRun, id: u32) -> std::io::Result<()> {
    let members = run.assignment.members(id);
    if id == 0 {
        writeln!(out, "cluster 0 (unclustered): {} members", members.len())?;
    } else {
        writeln!(out, "cluster {id}: {} members", members.len())?;
    }
    for i in members {
        writeln!(out, "  {}", run.row_names[i])?;
    }
    Ok(())
}

fn cmd_query(args: &QueryArgs, out: &mut dyn Write) -> CliResult<()> {
    let run = FittedRun::load(&args.run)?;
    let a = &run.assignment;
    let mut ids: Vec<u32> = a.sizes().keys().copied().collect();
    if a.unclustered() > 0 {
        ids.push(0);
    }
    if let Some(id) = args.id {
        if id != 0 && !a.sizes().contains_key(&id) {
            writeln!(out, "no cluster with id {id}")?;
        } else {
            print_cluster(out, &run, id)?;
        }
    } else if let Some(text) = &args.substring {
        let hits: Vec<u32> = ids
            .into_iter()
            .filter(|&id| a.members(id).iter().any(|&i| run.row_names[i].contains(text.as_str())))
            .collect();
        if hits.is_empty() {
            writeln!(out, "no cluster has a member matching {text:?}")?;
        }
        for id in hits {
            print_cluster(out, &run, id)?;
        }
    } else {
        for id in ids {
            print_cluster(out, &run, id)?;
        }
    }
    Ok(())
}

fn cmd_plot(args: &PlotArgs, out: &mut dyn Write) -> CliResult<()> {
    let run = FittedRun::load(&args.run)?;
    let svg = render_svg(
        &run,
        PlotOptions {
            grid: !args.no_grid,
            support_vectors: !args.no_sv,
        },
    );
    write_file(&args.out, svg.as_bytes())?;
    writeln!(out, "wrote {}", args.out.display())?;
    Ok(())
}

/// Execute one parsed command, writing its report to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Label(a) => cmd_label(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Export(a) => cmd_export(a, out),
        Command::Query(a) => cmd_query(a, out),
        Command::Plot(a) => cmd_plot(a, out),
    }
}

/// Parse `args`, run the command and return the process exit code. Errors
/// are reported on stderr as a single `error: ...` line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {}", e.message.replace('\n', " "));
            e.code
        }
    }
}
