//! `fxcorr`: batch front end writing plot-ready CSV and JSON.
//!
//! Exit codes: 0 success, 2 usage or input errors, 3 data-quality errors,
//! 4 numerical failures.

mod config;
mod error;
mod output;

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use fxcorr::nullmodels::{random_rate_panel, FICTITIOUS_CODE, RANDOM_BASE, SYNTHETIC_QUOTE};
use fxcorr::rates::RatesError;
use fxcorr::rng::Marginal;
use fxcorr::{
    build_ladder, despike, fictitious_panel, load_raw, one_factor_panel, per_base_report,
    random_panel, sector_ladder, synchronize, GapPolicy, NullKind, NullSpec, PreprocessConfig,
    RatePanel, SigmaFict,
};

use crate::config::{
    read_sectors, resolve_input, resolve_output, RunConfig, Source, Task, RUN_CONFIG_FILE,
};
use crate::error::CliError;
use crate::output::{io_writer, write_json, write_with};

#[derive(Debug, Parser)]
#[command(
    name = "fxcorr",
    version,
    about = "Per-base FX correlation spectra and eigenvalue ladders"
)]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synchronize and despike a long quotes file into a wide panel
    Ingest {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        preprocess: PreprocessArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlation matrix, histogram, spectrum and RMT bounds per base
    Analyze {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        preprocess: PreprocessArgs,
        /// Null model: random, one_factor, or fictitious (adds FIC to the input)
        #[arg(long)]
        null: Option<NullKind>,
        #[command(flatten)]
        null_flags: NullFlags,
        /// Base currency; repeat for several
        #[arg(long)]
        base: Vec<String>,
        #[arg(long, default_value_t = 1)]
        tau: usize,
        #[arg(long, default_value_t = fxcorr::corrmat::DEFAULT_BINS)]
        bins: usize,
        /// Also write the matrix in the binary FXCM layout
        #[arg(long)]
        binary: bool,
        /// Also write eigenvectors.csv
        #[arg(long)]
        eigenvectors: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Largest-eigenvalue ladder over every base
    Ladder {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        preprocess: PreprocessArgs,
        /// Null model: random, one_factor, or fictitious (adds FIC to the input)
        #[arg(long)]
        null: Option<NullKind>,
        #[command(flatten)]
        null_flags: NullFlags,
        #[arg(long, default_value_t = 1)]
        tau: usize,
        /// Add the fictitious currency FIC as an extra base
        #[arg(long)]
        with_fict: bool,
        /// Sector file: one `name: CODE,CODE,...` line per sector
        #[arg(long)]
        sector: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a null-model panel
    Null {
        #[arg(long)]
        kind: NullKind,
        #[command(flatten)]
        null_flags: NullFlags,
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        preprocess: PreprocessArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run from a saved run_config.json
    Replay {
        config: PathBuf,
        /// Write to this directory instead of the recorded one
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Long quotes file with header `date,currency,price`
    #[arg(long, conflicts_with = "panel")]
    input: Option<PathBuf>,
    /// Wide panel file as written by `ingest`
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Currency every input price is quoted in
    #[arg(long, default_value = "USD")]
    quote: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GapArg {
    CarryForward,
    Intersect,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long, value_enum, default_value_t = GapArg::CarryForward)]
    gap_policy: GapArg,
    /// Flag returns larger than this many standard deviations
    #[arg(long, default_value_t = 5.0)]
    spike_sigma: f64,
    /// Largest fraction of cells despiking may replace
    #[arg(long, default_value_t = 0.005)]
    spike_cap: f64,
    #[arg(long, default_value_t = 3)]
    despike_passes: usize,
    /// Fewest quotes a currency may have
    #[arg(long, default_value_t = 3)]
    min_length: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MarginalArg {
    Gaussian,
    Uniform,
}

#[derive(Debug, Args)]
struct NullFlags {
    /// Seed for every random draw of the run
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of generated series
    #[arg(long)]
    size: Option<usize>,
    /// Number of generated return samples
    #[arg(long)]
    samples: Option<usize>,
    /// Loading on the common factor; pairwise correlation is its square
    #[arg(long)]
    loading: Option<f64>,
    #[arg(long, value_enum)]
    marginal: Option<MarginalArg>,
    /// Volatility of the fictitious currency, or `match_median`
    #[arg(long)]
    sigma_fict: Option<SigmaFict>,
}

impl PreprocessArgs {
    fn resolve(&self) -> PreprocessConfig {
        PreprocessConfig {
            spike_sigma: self.spike_sigma,
            spike_fraction_cap: self.spike_cap,
            max_despike_passes: self.despike_passes,
            gap_policy: match self.gap_policy {
                GapArg::CarryForward => GapPolicy::CarryForward,
                GapArg::Intersect => GapPolicy::Intersect,
            },
            min_series_length: self.min_length,
        }
    }
}

impl SourceArgs {
    fn resolve(&self) -> Result<Option<Source>, CliError> {
        Ok(match (&self.input, &self.panel) {
            (Some(p), _) => Some(Source::Raw {
                path: resolve_input(p)?,
            }),
            (None, Some(p)) => Some(Source::Panel {
                path: resolve_input(p)?,
            }),
            (None, None) => None,
        })
    }
}

impl NullFlags {
    fn spec(&self, kind: NullKind) -> NullSpec {
        let mut spec = NullSpec::new(kind, self.seed);
        if let Some(v) = self.size {
            spec.size = v;
        }
        if let Some(v) = self.samples {
            spec.samples = v;
        }
        if let Some(v) = self.loading {
            spec.factor_loading = v;
        }
        if let Some(m) = self.marginal {
            spec.marginal = match m {
                MarginalArg::Gaussian => Marginal::Gaussian,
                MarginalArg::Uniform => Marginal::Uniform,
            };
        }
        if let Some(s) = self.sigma_fict {
            spec.sigma_fict = s;
        }
        spec
    }
}

fn base_config(
    task: Task,
    source: &SourceArgs,
    preprocess: &PreprocessArgs,
    out: &Path,
) -> Result<RunConfig, CliError> {
    Ok(RunConfig {
        version: env!("CARGO_PKG_VERSION").to_string(),
        task,
        source: source.resolve()?,
        quote: source.quote.clone(),
        bases: Vec::new(),
        tau: 1,
        preprocess: preprocess.resolve(),
        bins: fxcorr::corrmat::DEFAULT_BINS,
        null: None,
        with_fict: false,
        sectors: Vec::new(),
        binary: false,
        eigenvectors: false,
        out: resolve_output(out)?,
        seed: 0,
    })
}

fn resolve(command: Command) -> Result<RunConfig, CliError> {
    match command {
        Command::Ingest {
            source,
            preprocess,
            out,
        } => base_config(Task::Ingest, &source, &preprocess, &out),
        Command::Analyze {
            source,
            preprocess,
            null,
            null_flags,
            base,
            tau,
            bins,
            binary,
            eigenvectors,
            out,
        } => Ok(RunConfig {
            bases: base,
            tau,
            bins,
            null: null.map(|k| null_flags.spec(k)),
            binary,
            eigenvectors,
            seed: null_flags.seed,
            ..base_config(Task::Analyze, &source, &preprocess, &out)?
        }),
        Command::Ladder {
            source,
            preprocess,
            null,
            null_flags,
            tau,
            with_fict,
            sector,
            out,
        } => Ok(RunConfig {
            tau,
            null: null.map(|k| null_flags.spec(k)),
            with_fict,
            sectors: sector
                .as_deref()
                .map(read_sectors)
                .transpose()?
                .unwrap_or_default(),
            seed: null_flags.seed,
            ..base_config(Task::Ladder, &source, &preprocess, &out)?
        }),
        Command::Null {
            kind,
            null_flags,
            source,
            preprocess,
            out,
        } => Ok(RunConfig {
            null: Some(null_flags.spec(kind)),
            seed: null_flags.seed,
            ..base_config(Task::Null, &source, &preprocess, &out)?
        }),
        Command::Replay { config, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if cfg.version != env!("CARGO_PKG_VERSION") {
                log::warn!("replaying a config written by fxcorr {}", cfg.version);
            }
            if let Some(out) = out {
                cfg.out = resolve_output(&out)?;
            }
            Ok(cfg)
        }
    }
}

fn load_panel(cfg: &RunConfig) -> Result<RatePanel, CliError> {
    let panel = match &cfg.source {
        Some(Source::Raw { path }) => {
            let table = load_raw(path, &cfg.quote)?;
            let synced = synchronize(&table, &cfg.preprocess)?;
            despike(&synced, &cfg.preprocess)?
        }
        Some(Source::Panel { path }) => {
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            RatePanel::read_csv(BufReader::new(file), &cfg.quote)?
        }
        None => match &cfg.null {
            Some(spec) if spec.kind == NullKind::Random => random_rate_panel(spec)?,
            Some(spec) if spec.kind == NullKind::OneFactor => one_factor_panel(spec)?,
            _ => return Err(CliError::Usage("no input panel".into())),
        },
    };
    match &cfg.null {
        Some(spec) if spec.kind == NullKind::Fictitious => Ok(fictitious_panel(&panel, spec)?),
        _ => Ok(panel),
    }
}

fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    write_json(&cfg.out.join(RUN_CONFIG_FILE), cfg)?;
    match cfg.task {
        Task::Ingest => ingest(cfg),
        Task::Analyze => analyze(cfg),
        Task::Ladder => ladder(cfg),
        Task::Null => null(cfg),
    }
}

fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let panel = load_panel(cfg)?;
    write_with(&cfg.out.join("panel.csv"), |w| panel.write_csv(w))?;
    write_with(&cfg.out.join("despike_log.csv"), |w| {
        panel.write_despike_log(w)
    })?;
    println!(
        "panel: {} currencies quoted in {}, {} dates, {} cells despiked",
        panel.n_currencies(),
        panel.quote_currency(),
        panel.len(),
        panel.despike_log().len()
    );
    Ok(())
}

fn default_base(cfg: &RunConfig) -> Option<&'static str> {
    match cfg.null.as_ref().map(|s| s.kind) {
        Some(NullKind::Random) => Some(RANDOM_BASE),
        Some(NullKind::OneFactor) => Some(SYNTHETIC_QUOTE),
        Some(NullKind::Fictitious) => Some(FICTITIOUS_CODE),
        None => None,
    }
}

fn analyze(cfg: &RunConfig) -> Result<(), CliError> {
    let bases: Vec<String> = if cfg.bases.is_empty() {
        let b = default_base(cfg).ok_or_else(|| CliError::Usage("--base is required".into()))?;
        vec![b.to_string()]
    } else {
        cfg.bases.clone()
    };
    let panel = load_panel(cfg)?;
    for base in &bases {
        if !panel.contains(base) {
            return Err(RatesError::UnknownBase(base.clone()).into());
        }
    }
    for base in &bases {
        let report = per_base_report(&panel, base, cfg.tau, cfg.bins)?;
        if !report.excluded.is_empty() {
            log::warn!(
                "base {base}: dropped zero-variance rows {}",
                report.excluded.join(",")
            );
        }
        let dir = cfg.out.join(base);
        io_writer(&dir.join("matrix.csv"), |w| report.matrix.write_csv(w))?;
        io_writer(&dir.join("histogram.csv"), |w| {
            report.histogram.write_csv(w)
        })?;
        io_writer(&dir.join("spectrum.csv"), |w| report.spectrum.write_csv(w))?;
        write_json(&dir.join("bounds.json"), &report.bounds)?;
        if cfg.binary {
            io_writer(&dir.join("matrix.fxcm"), |w| report.matrix.write_binary(w))?;
        }
        if cfg.eigenvectors {
            io_writer(&dir.join("eigenvectors.csv"), |w| {
                report.spectrum.write_eigenvectors_csv(w)
            })?;
        }
        println!(
            "{base}: m = {}, T = {}, lambda_max = {:.4}, {} above lambda_plus = {:.4}",
            report.matrix.dim(),
            report.matrix.samples(),
            report.spectrum.lambda_max(),
            report.bounds.count_above,
            report.bounds.lambda_plus
        );
    }
    Ok(())
}

fn write_ladder(dir: &Path, stem: &str, ladder: &fxcorr::Ladder) -> Result<(), CliError> {
    io_writer(&dir.join(format!("{stem}.csv")), |w| ladder.write_csv(w))?;
    write_json(&dir.join(format!("{stem}.json")), ladder)?;
    for o in &ladder.omitted {
        log::warn!("{stem}: base {} omitted: {}", o.base, o.reason);
    }
    let top = ladder.entries.first().map_or("-", |e| e.base.as_str());
    let bottom = ladder.entries.last().map_or("-", |e| e.base.as_str());
    println!(
        "{stem}: {} bases, largest {top}, smallest {bottom}",
        ladder.entries.len()
    );
    Ok(())
}

fn ladder(cfg: &RunConfig) -> Result<(), CliError> {
    let panel = load_panel(cfg)?;
    if cfg.sectors.is_empty() {
        let ladder = build_ladder(&panel, cfg.tau, cfg.with_fict, cfg.seed)?;
        return write_ladder(&cfg.out, "ladder", &ladder);
    }
    let panel = if cfg.with_fict {
        fictitious_panel(&panel, &NullSpec::fictitious(cfg.seed))?
    } else {
        panel
    };
    for sector in &cfg.sectors {
        let ladder = sector_ladder(&panel, &sector.codes, cfg.tau)?;
        write_ladder(&cfg.out, &format!("ladder_{}", sector.name), &ladder)?;
    }
    Ok(())
}

fn null(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.null.as_ref().expect("validated");
    if spec.kind == NullKind::Random {
        let rows = random_panel(spec)?;
        io_writer(&cfg.out.join("returns.csv"), |w| rows.write_csv(w))?;
    }
    let panel = load_panel(cfg)?;
    write_with(&cfg.out.join("panel.csv"), |w| panel.write_csv(w))?;
    println!(
        "{} panel: {} currencies quoted in {}, {} dates",
        spec.kind,
        panel.n_currencies(),
        panel.quote_currency(),
        panel.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    match resolve(cli.command).and_then(|cfg| execute(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fxcorr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
