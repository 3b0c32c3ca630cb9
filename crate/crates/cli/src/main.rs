//! Convergence study driver.
//!
//! Flags override values from `--config`, which override the defaults.

use std::error::Error as _;
use std::path::PathBuf;
use std::process::ExitCode;

use cgp_mfem::harness::{emit_tables, parse_levels, run_convergence, write_markdown, ExperimentConfig, TableFormat};
use cgp_mfem::timeloop::SolverKind;
use clap::Parser;

#[derive(Debug, Parser)]
#[command(
    name = "cgp-mfem",
    version,
    about = "Space-time convergence study for cGP(r)-MFEM(p)"
)]
struct Cli {
    /// Plain `key = value` file with experiment settings.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Temporal degree.
    #[arg(long)]
    r: Option<usize>,
    /// Raviart-Thomas degree.
    #[arg(long)]
    p: Option<usize>,
    /// Inclusive level range, e.g. `0..4`.
    #[arg(long, value_name = "A..B")]
    levels: Option<String>,
    /// Time steps on level 0; doubled on every level.
    #[arg(long, value_name = "N")]
    n_base: Option<usize>,
    /// Vertex distortion factor in [0, 0.5).
    #[arg(long, value_name = "F")]
    distortion: Option<f64>,
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Temporal frequency of the manufactured solution.
    #[arg(long, value_name = "W")]
    omega: Option<f64>,
    #[arg(long, value_name = "T")]
    final_time: Option<f64>,
    /// Relative residual tolerance per time step.
    #[arg(long)]
    tol: Option<f64>,
    /// Run all levels concurrently.
    #[arg(long)]
    parallel_levels: bool,
    /// Output directory for tables and the run record.
    #[arg(long, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    /// Table formats to write.
    #[arg(long, value_delimiter = ',', default_value = "csv,markdown,plot-data")]
    formats: Vec<String>,
    /// Also write per-level mesh, first-step matrix and checkpoint dumps.
    #[arg(long)]
    dump: bool,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SolverArg {
    Direct,
    Schur,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Direct => SolverKind::Direct,
            SolverArg::Schur => SolverKind::Schur,
        }
    }
}

fn resolve(cli: &Cli) -> cgp_mfem::Result<ExperimentConfig> {
    let mut c = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = cli.r {
        c.r = v;
    }
    if let Some(v) = cli.p {
        c.p = v;
    }
    if let Some(v) = &cli.levels {
        (c.level_min, c.level_max) = parse_levels(v)?;
    }
    if let Some(v) = cli.n_base {
        c.n_base = v;
    }
    if let Some(v) = cli.distortion {
        c.distortion = v;
    }
    if let Some(v) = cli.seed {
        c.seed = v;
    }
    if let Some(v) = cli.solver {
        c.solver = v.into();
    }
    if let Some(v) = cli.omega {
        c.omega = v;
    }
    if let Some(v) = cli.final_time {
        c.final_time = v;
    }
    if let Some(v) = cli.tol {
        c.tol = v;
    }
    c.parallel_levels |= cli.parallel_levels;
    if cli.dump {
        c.dump_dir = Some(cli.out.join("dumps"));
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: &Cli) -> cgp_mfem::Result<()> {
    let config = resolve(cli)?;
    if cli.print_config {
        print!("{}", config.to_kv());
        return Ok(());
    }
    let formats = cli
        .formats
        .iter()
        .map(|f| f.parse::<TableFormat>())
        .collect::<cgp_mfem::Result<Vec<_>>>()?;
    let record = run_convergence(&config)?;
    for format in formats {
        emit_tables(&record, format, &cli.out)?;
    }
    record.write_json(&cli.out.join("record.json"))?;
    let mut stdout = std::io::stdout().lock();
    write_markdown(&record, &mut stdout).map_err(|e| cgp_mfem::Error::Io {
        path: "<stdout>".into(),
        source: e,
    })?;
    eprintln!(
        "wrote {} ({} levels, {:.1} s, config {})",
        cli.out.display(),
        record.rows.len(),
        record.seconds,
        &record.config_hash[..12]
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
