//! Experiment runner behind the `ossgcl` binary.

pub mod config;
pub mod plot;
pub mod runner;
pub mod stats;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use ossgcl::losses::AlphaTarget;
use ossgcl::trainers::Method;
use ossgcl::Error;

use config::{DatasetName, RunConfig, FIGURE_ALPHA_GRID};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ossgcl", version, about = "Online semi-supervised continual learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration (or a sweep) and write run reports.
    Run(RunArgs),
    /// Build plot-ready CSV tables from a directory of reports.
    PlotData {
        /// Directory holding `.jsonl` run reports.
        reports: PathBuf,
        /// Output directory for the tables (defaults to the reports directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|e| format!("`{x}`: {e}")))
        .collect()
}

fn method_list(s: &str) -> Result<Vec<Method>, String> {
    s.split(',')
        .map(|x| Method::parse(x.trim()).map_err(|e| e.to_string()))
        .collect()
}

fn method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

fn alpha_target(s: &str) -> Result<AlphaTarget, String> {
    match s {
        "unlabeled" => Ok(AlphaTarget::Unlabeled),
        "labeled" => Ok(AlphaTarget::Labeled),
        _ => Err(format!("expected `unlabeled` or `labeled`, got `{s}`")),
    }
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = method)]
    pub method: Option<Method>,
    /// synthetic, cifar10 or cifar100.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Directory with the CIFAR binary files.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub mem_size: Option<usize>,
    #[arg(long)]
    pub mem_batch: Option<usize>,
    #[arg(long)]
    pub stream_batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Which loss term alpha scales: unlabeled (default) or labeled.
    #[arg(long, value_parser = alpha_target)]
    pub galpha_on: Option<AlphaTarget>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Parallel runs within a sweep.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Record the per-step loss in each report.
    #[arg(long)]
    pub trace_loss: bool,
    /// Sweep alpha over 10^-1.5 .. 10^0.75 in quarter decades.
    #[arg(long)]
    pub alpha_grid: bool,
    /// Comma-separated alpha values to sweep.
    #[arg(long, value_parser = list::<f64>)]
    pub sweep_alpha: Option<Vec<f64>>,
    #[arg(long, value_parser = list::<usize>)]
    pub sweep_mem_batch: Option<Vec<usize>>,
    #[arg(long, value_parser = list::<usize>)]
    pub sweep_mem_size: Option<Vec<usize>>,
    #[arg(long, value_parser = method_list)]
    pub sweep_methods: Option<Vec<Method>>,
    /// Suppress per-run progress on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

impl RunArgs {
    pub fn resolve(&self) -> ossgcl::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = Some(v);
                }
            )*};
        }
        set!(alpha, tau, mem_size, mem_batch, stream_batch, lr, seed, out, galpha_on, epochs);
        if let Some(m) = self.method {
            c.method = m;
        }
        if let Some(d) = &self.dataset {
            c.dataset.name = DatasetName::parse(d)?;
        }
        if let Some(p) = &self.data_dir {
            c.dataset.path = Some(p.clone());
        }
        if let Some(r) = self.reps {
            c.reps = r;
        }
        if let Some(j) = self.jobs {
            c.jobs = j;
        }
        c.trace_loss |= self.trace_loss;
        if self.alpha_grid {
            c.sweep.alpha_log10 = Some(FIGURE_ALPHA_GRID);
        }
        if let Some(v) = &self.sweep_alpha {
            c.sweep.alpha = v.clone();
        }
        if let Some(v) = &self.sweep_mem_batch {
            c.sweep.mem_batch = v.clone();
        }
        if let Some(v) = &self.sweep_mem_size {
            c.sweep.mem_size = v.clone();
        }
        if let Some(v) = &self.sweep_methods {
            c.sweep.methods = v.clone();
        }
        Ok(c)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Report { .. } => EXIT_CONFIG,
        Error::Data { .. } | Error::Io { .. } => EXIT_DATA,
        _ => EXIT_NUMERIC,
    }
}

fn run(args: &RunArgs) -> ossgcl::Result<()> {
    let cfg = args.resolve()?;
    let runs = cfg.expand()?;
    let out = cfg.out_dir();
    let done = runner::execute(&cfg, &runs, &out, !args.quiet)?;
    let rows = runner::aggregate(done.iter().map(|f| &f.report));
    let agg = out.join("aggregate.csv");
    runner::write_aggregate(&agg, &rows)?;
    println!("wrote {} report(s) and {}", done.len(), agg.display());
    Ok(())
}

/// Parse `args` and execute; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::PlotData { reports, out } => {
            plot::emit_plot_data(reports, out.as_deref().unwrap_or(reports)).map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
            })
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
