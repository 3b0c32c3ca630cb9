//! Convergence experiments: level sweeps, run records and table output.
//!
//! Level `l` uses `n_base * 2^l` uniform time steps on the level-`l` mesh,
//! optionally distorted. Rows are always ordered by level, also when the
//! levels run concurrently.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::CoefficientField;
use crate::error::{Error, Result};
use crate::mesh::{distort, unit_square_mesh, QuadMesh, MAX_LEVEL};
use crate::mms::{eoc, error_norms, mms_standard, DEFAULT_OMEGA};
use crate::spaces::{build_pair, MAX_SPACE_DEGREE};
use crate::time_basis::MAX_TIME_DEGREE;
use crate::timeloop::{RunOptions, SolverKind, Stepper, DEFAULT_STEP_TOL};

/// Distortion factors with a documented robustness study.
pub const DISTORTION_FACTORS: [f64; 3] = [0.05, 0.10, 0.25];

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_160_101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub r: usize,
    pub p: usize,
    pub level_min: u32,
    pub level_max: u32,
    pub n_base: usize,
    pub final_time: f64,
    pub omega: f64,
    pub distortion: f64,
    pub seed: u64,
    pub solver: SolverKind,
    pub tol: f64,
    pub parallel_levels: bool,
    /// Per-level mesh, first-step matrix and checkpoint dumps go here.
    pub dump_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            r: 2,
            p: 2,
            level_min: 0,
            level_max: 4,
            n_base: 10,
            final_time: 1.0,
            omega: DEFAULT_OMEGA,
            distortion: 0.0,
            seed: DEFAULT_SEED,
            solver: SolverKind::Direct,
            tol: DEFAULT_STEP_TOL,
            parallel_levels: false,
            dump_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Keys accepted by [`ExperimentConfig::set`] and config files.
    pub const KEYS: [&'static str; 13] = [
        "r",
        "p",
        "level_min",
        "level_max",
        "n_base",
        "final_time",
        "omega",
        "distortion",
        "seed",
        "solver",
        "tol",
        "parallel_levels",
        "dump_dir",
    ];

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::invalid(format!("`{key}`: cannot parse `{value}`")))
        }
        match key {
            "r" => self.r = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "level_min" => self.level_min = num(key, value)?,
            "level_max" => self.level_max = num(key, value)?,
            "levels" => (self.level_min, self.level_max) = parse_levels(value)?,
            "n_base" => self.n_base = num(key, value)?,
            "final_time" => self.final_time = num(key, value)?,
            "omega" => self.omega = num(key, value)?,
            "distortion" => self.distortion = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "solver" => self.solver = value.parse()?,
            "tol" => self.tol = num(key, value)?,
            "parallel_levels" => self.parallel_levels = num(key, value)?,
            "dump_dir" => self.dump_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            other => return Err(Error::invalid(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |message: String| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {message}", i + 1),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail("expected `key = value`".into()))?;
            config.set(key.trim(), value.trim()).map_err(|e| fail(e.to_string()))?;
        }
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Canonical `key = value` text; parsing it gives back `self`.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for key in Self::KEYS {
            let value = match key {
                "r" => self.r.to_string(),
                "p" => self.p.to_string(),
                "level_min" => self.level_min.to_string(),
                "level_max" => self.level_max.to_string(),
                "n_base" => self.n_base.to_string(),
                "final_time" => format!("{:e}", self.final_time),
                "omega" => format!("{:e}", self.omega),
                "distortion" => format!("{:e}", self.distortion),
                "seed" => self.seed.to_string(),
                "solver" => self.solver.to_string(),
                "tol" => format!("{:e}", self.tol),
                "parallel_levels" => self.parallel_levels.to_string(),
                "dump_dir" => self
                    .dump_dir
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
                _ => unreachable!(),
            };
            let _ = writeln!(s, "{key} = {value}");
        }
        s
    }

    /// SHA-256 of the fields that determine the numbers in a record.
    /// Scheduling and dump options are excluded.
    pub fn hash(&self) -> String {
        let numeric = ExperimentConfig {
            parallel_levels: false,
            dump_dir: None,
            ..self.clone()
        };
        Sha256::digest(numeric.to_kv().as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if !(1..=MAX_TIME_DEGREE).contains(&self.r) {
            return bad(format!("r must lie in 1..={MAX_TIME_DEGREE}, got {}", self.r));
        }
        if self.p > MAX_SPACE_DEGREE {
            return bad(format!("p must lie in 0..={MAX_SPACE_DEGREE}, got {}", self.p));
        }
        if self.level_min > self.level_max || self.level_max > MAX_LEVEL {
            return bad(format!(
                "levels {}..{} must be ordered and at most {MAX_LEVEL}",
                self.level_min, self.level_max
            ));
        }
        if self.n_base == 0 {
            return bad("n_base must be positive".into());
        }
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return bad(format!("final time must be positive, got {}", self.final_time));
        }
        if !self.omega.is_finite() {
            return bad(format!("omega must be finite, got {}", self.omega));
        }
        if !(0.0..0.5).contains(&self.distortion) {
            return bad(format!("distortion must lie in [0, 0.5), got {}", self.distortion));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tolerance must lie in (0, 1), got {}", self.tol));
        }
        Ok(())
    }

    pub fn steps(&self, level: u32) -> usize {
        self.n_base << level
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<u32> {
        self.level_min..=self.level_max
    }
}

/// Parses `A..B` or `A..=B` (both inclusive) or a single level.
pub fn parse_levels(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::invalid(format!("levels `{s}`: expected A..B"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

/// Errors and sizes of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: u32,
    pub steps: usize,
    pub tau: f64,
    pub cells: usize,
    pub h: f64,
    /// Spatial unknowns per temporal degree of freedom.
    pub ndof: usize,
    pub err_u: f64,
    pub err_q_l2: f64,
    pub err_div_q: f64,
    pub err_q_v: f64,
    pub eoc_u: Option<f64>,
    pub eoc_q: Option<f64>,
    pub seconds: f64,
    pub solver_iterations: usize,
    pub max_step_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub rows: Vec<LevelRow>,
    pub seconds: f64,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

fn stage<T>(level: u32, stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        level,
        stage,
        source: Box::new(e),
    })
}

/// Level-`level` mesh of the configuration, distorted if requested.
pub fn level_mesh(config: &ExperimentConfig, level: u32) -> Result<QuadMesh> {
    let mesh = stage(level, "mesh", unit_square_mesh(level))?;
    if config.distortion > 0.0 {
        return stage(level, "distort", distort(&mesh, config.distortion, config.seed));
    }
    Ok(mesh)
}

/// Runs one level; EOC fields are left empty.
pub fn run_level(config: &ExperimentConfig, level: u32) -> Result<LevelRow> {
    let start = Instant::now();
    let exact = stage(level, "mms", mms_standard(&CoefficientField::identity(), config.omega))?;
    let data = stage(level, "mms", exact.problem_data(config.final_time))?;
    let mesh = Arc::new(level_mesh(config, level)?);
    let (scalar, flux) = stage(level, "spaces", build_pair(mesh.clone(), config.p))?;
    let ndof = scalar.dim() + flux.dim();
    let steps = config.steps(level);
    let stepper = stage(level, "assembly", Stepper::new(&data, scalar, flux, config.r, steps))?;
    let options = RunOptions {
        solver: config.solver,
        tol: config.tol,
    };
    let solution = stage(level, "timeloop", stepper.run(&data, options))?;
    let norms = stage(level, "errors", error_norms(&solution, &exact))?;

    if let Some(dir) = &config.dump_dir {
        let dump = || -> Result<()> {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            mesh.write_text_file(&dir.join(format!("mesh_level{level}.txt")))?;
            let path = dir.join(format!("step_matrix_level{level}.mtx"));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = std::io::BufWriter::new(file);
            stepper
                .operator(0)
                .matrix
                .write_coordinate(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;
            solution.write_checkpoint_file(&dir.join(format!("checkpoint_level{level}.txt")))
        };
        stage(level, "dump", dump())?;
    }

    Ok(LevelRow {
        level,
        steps,
        tau: config.final_time / steps as f64,
        cells: mesh.num_cells(),
        h: mesh.h_max(),
        ndof,
        err_u: norms.u,
        err_q_l2: norms.q,
        err_div_q: norms.div_q,
        err_q_v: norms.q_v(),
        eoc_u: None,
        eoc_q: None,
        seconds: start.elapsed().as_secs_f64(),
        solver_iterations: solution.stats.iter().map(|s| s.iterations).sum(),
        max_step_residual: solution.stats.iter().map(|s| s.relative_residual).fold(0.0, f64::max),
    })
}

/// Sweeps all configured levels and fills in the EOC columns.
pub fn run_convergence(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let mut rows = if config.parallel_levels {
        std::thread::scope(|s| {
            let handles: Vec<_> = config
                .levels()
                .map(|level| s.spawn(move || run_level(config, level)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        config
            .levels()
            .map(|level| run_level(config, level))
            .collect::<Result<Vec<_>>>()?
    };
    fill_eoc(&mut rows);
    Ok(RunRecord {
        config: config.clone(),
        config_hash: config.hash(),
        rows,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// EOC between consecutive rows, which are consecutive levels.
pub fn fill_eoc(rows: &mut [LevelRow]) {
    let eu = eoc(&rows.iter().map(|r| r.err_u).collect::<Vec<_>>());
    let eq = eoc(&rows.iter().map(|r| r.err_q_v).collect::<Vec<_>>());
    for (i, row) in rows.iter_mut().enumerate() {
        row.eoc_u = eu[i];
        row.eoc_q = eq[i];
    }
}

/// Scientific notation with five significant digits and a signed,
/// two-digit exponent: `4.0298e-02`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.4e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Value as it appears in a CSV table.
pub fn round_sci(x: f64) -> f64 {
    sci(x).parse().expect("formatted number parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
    PlotData,
}

impl TableFormat {
    pub const ALL: [TableFormat; 3] = [TableFormat::Csv, TableFormat::Markdown, TableFormat::PlotData];

    pub fn file_name(self) -> &'static str {
        match self {
            TableFormat::Csv => "convergence.csv",
            TableFormat::Markdown => "convergence.md",
            TableFormat::PlotData => "convergence.dat",
        }
    }
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "plot-data" | "plot" => Ok(TableFormat::PlotData),
            other => Err(Error::invalid(format!(
                "unknown table format `{other}`, expected csv, markdown or plot-data"
            ))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "level", "N", "tau", "cells", "h", "ndof", "err_u", "eoc_u", "err_q_V", "eoc_q",
];

pub fn write_csv(record: &RunRecord, w: impl Write) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    let opt = |e: Option<f64>| e.map(sci).unwrap_or_default();
    for row in &record.rows {
        out.write_record([
            row.level.to_string(),
            row.steps.to_string(),
            sci(row.tau),
            row.cells.to_string(),
            sci(row.h),
            row.ndof.to_string(),
            sci(row.err_u),
            opt(row.eoc_u),
            sci(row.err_q_v),
            opt(row.eoc_q),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One parsed CSV row; floats carry the table precision.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub level: u32,
    #[serde(rename = "N")]
    pub steps: usize,
    pub tau: f64,
    pub cells: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_u: f64,
    pub eoc_u: Option<f64>,
    #[serde(rename = "err_q_V")]
    pub err_q_v: f64,
    pub eoc_q: Option<f64>,
}

impl CsvRow {
    /// The row as written for `row`.
    pub fn expected(row: &LevelRow) -> Self {
        CsvRow {
            level: row.level,
            steps: row.steps,
            tau: round_sci(row.tau),
            cells: row.cells,
            h: round_sci(row.h),
            ndof: row.ndof,
            err_u: round_sci(row.err_u),
            eoc_u: row.eoc_u.map(round_sci),
            err_q_v: round_sci(row.err_q_v),
            eoc_q: row.eoc_q.map(round_sci),
        }
    }
}

pub fn read_csv(r: impl std::io::Read) -> csv::Result<Vec<CsvRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// Mesh table followed by the error table.
pub fn write_markdown(record: &RunRecord, mut w: impl Write) -> std::io::Result<()> {
    let c = &record.config;
    writeln!(
        w,
        "cGP({})-MFEM({}), distortion {}, seed {}, solver {}\n",
        c.r, c.p, c.distortion, c.seed, c.solver
    )?;
    writeln!(w, "| Level | N | tau_n | cells | h | N_DoF |")?;
    writeln!(w, "|---:|---:|---:|---:|---:|---:|")?;
    for row in &record.rows {
        writeln!(
            w,
            "| {} | {} | {} | {} | {} | {} |",
            row.level,
            row.steps,
            sci(row.tau),
            row.cells,
            sci(row.h),
            row.ndof
        )?;
    }
    let eoc = |e: Option<f64>| e.map_or("---".to_string(), |v| format!("{v:.2}"));
    writeln!(w)?;
    writeln!(w, "| Level | L2(I;L2) error u | EOC | L2(I;V) error q | EOC |")?;
    writeln!(w, "|---:|---:|---:|---:|---:|")?;
    for row in &record.rows {
        writeln!(
            w,
            "| {} | {} | {} | {} | {} |",
            row.level,
            sci(row.err_u),
            eoc(row.eoc_u),
            sci(row.err_q_v),
            eoc(row.eoc_q)
        )?;
    }
    Ok(())
}

/// Two whitespace-separated `h error` blocks, `u` then `q`, separated by
/// two blank lines. Values are written at full precision.
pub fn write_plot_data(record: &RunRecord, mut w: impl Write) -> std::io::Result<()> {
    for (i, (name, pick)) in [
        ("u", (|r: &LevelRow| r.err_u) as fn(&LevelRow) -> f64),
        ("q_V", |r: &LevelRow| r.err_q_v),
    ]
    .into_iter()
    .enumerate()
    {
        if i > 0 {
            writeln!(w, "\n")?;
        }
        writeln!(w, "# norm {name}: h error")?;
        for row in &record.rows {
            writeln!(w, "{:e} {:e}", row.h, pick(row))?;
        }
    }
    Ok(())
}

/// Parses [`write_plot_data`] output into `(h, error)` blocks.
pub fn read_plot_data(text: &str) -> Result<Vec<Vec<(f64, f64)>>> {
    let mut blocks: Vec<Vec<(f64, f64)>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('#') {
            blocks.push(Vec::new());
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        let (Some(Ok(h)), Some(Ok(e)), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::invalid(format!("malformed plot-data line `{line}`")));
        };
        blocks
            .last_mut()
            .ok_or_else(|| Error::invalid("plot data before a header"))?
            .push((h, e));
    }
    Ok(blocks)
}

/// Writes `format` into `dir` and returns the file path.
pub fn emit_tables(record: &RunRecord, format: TableFormat, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format.file_name());
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = match format {
        TableFormat::Csv => write_csv(record, &mut w).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(e) => e,
            other => std::io::Error::other(format!("{other:?}")),
        }),
        TableFormat::Markdown => write_markdown(record, &mut w),
        TableFormat::PlotData => write_plot_data(record, &mut w),
    };
    io.and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(level: u32, err: f64) -> LevelRow {
        LevelRow {
            level,
            steps: 10 << level,
            tau: 0.1 / f64::from(1 << level),
            cells: 1 << (2 * level),
            h: std::f64::consts::SQRT_2 / f64::from(1 << level),
            ndof: 33,
            err_u: err,
            err_q_l2: err,
            err_div_q: err,
            err_q_v: 20.0 * err,
            eoc_u: None,
            eoc_q: None,
            seconds: 0.0,
            solver_iterations: 0,
            max_step_residual: 0.0,
        }
    }

    fn record(rows: Vec<LevelRow>) -> RunRecord {
        let config = ExperimentConfig::default();
        RunRecord {
            config_hash: config.hash(),
            config,
            rows,
            seconds: 0.0,
        }
    }

    #[test]
    fn sci_matches_table_style() {
        assert_eq!(sci(4.0298e-02), "4.0298e-02");
        assert_eq!(sci(0.1), "1.0000e-01");
        assert_eq!(sci(1.234_56), "1.2346e+00");
        assert_eq!(sci(27840.0), "2.7840e+04");
        assert_eq!(sci(0.0), "0.0000e+00");
        assert_eq!(sci(-2.5e-120), "-2.5000e-120");
        assert_eq!(round_sci(1.23456789e-3), 1.2346e-3);
    }

    #[test]
    fn config_text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.set("levels", "1..3").unwrap();
        c.set("solver", "schur").unwrap();
        c.set("distortion", "0.1").unwrap();
        c.set("dump_dir", "/tmp/x").unwrap();
        assert_eq!((c.level_min, c.level_max), (1, 3));
        let back = ExperimentConfig::parse(&c.to_kv(), Path::new("kv")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_scheduling() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            parallel_levels: true,
            dump_dir: Some("d".into()),
            ..a.clone()
        };
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn config_file_errors_name_the_line() {
        let text = "# comment\nr = 2\n\np = two\n";
        let err = ExperimentConfig::parse(text, Path::new("exp.cfg")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("exp.cfg") && msg.contains("line 4"), "{msg}");
        assert!(ExperimentConfig::parse("bogus = 1", Path::new("x")).is_err());
        assert!(ExperimentConfig::parse("r 2", Path::new("x")).is_err());
    }

    #[test]
    fn levels_syntax() {
        assert_eq!(parse_levels("0..4").unwrap(), (0, 4));
        assert_eq!(parse_levels("2..=5").unwrap(), (2, 5));
        assert_eq!(parse_levels("3").unwrap(), (3, 3));
        assert!(parse_levels("a..b").is_err());
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig::default();
        ok.validate().unwrap();
        for bad in [
            ExperimentConfig { r: 0, ..ok.clone() },
            ExperimentConfig { p: 9, ..ok.clone() },
            ExperimentConfig {
                level_min: 3,
                level_max: 2,
                ..ok.clone()
            },
            ExperimentConfig {
                n_base: 0,
                ..ok.clone()
            },
            ExperimentConfig {
                final_time: 0.0,
                ..ok.clone()
            },
            ExperimentConfig {
                distortion: 0.5,
                ..ok.clone()
            },
            ExperimentConfig { tol: 0.0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidArgument(_))), "{bad:?}");
        }
    }

    #[test]
    fn eoc_columns() {
        let mut rows = vec![row(0, 8e-2), row(1, 1e-2), row(2, 1.25e-3)];
        fill_eoc(&mut rows);
        assert_eq!(rows[0].eoc_u, None);
        assert_eq!(rows[1].eoc_u, Some(3.0));
        assert_eq!(rows[2].eoc_q, Some(3.0));
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = vec![row(0, 4.029_812_3e-2), row(1, 1.131_6e-2)];
        fill_eoc(&mut rows);
        let rec = record(rows);
        let mut buf = Vec::new();
        write_csv(&rec, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("level,N,tau,cells,h,ndof,err_u,eoc_u,err_q_V,eoc_q\n"));
        assert!(
            text.contains("0,10,1.0000e-01,1,1.4142e+00,33,4.0298e-02,,8.0596e-01,\n"),
            "{text}"
        );
        let back = read_csv(&buf[..]).unwrap();
        let expected: Vec<_> = rec.rows.iter().map(CsvRow::expected).collect();
        assert_eq!(back, expected);
    }

    #[test]
    fn markdown_layout() {
        let mut rows = vec![row(0, 4e-2), row(1, 5e-3)];
        fill_eoc(&mut rows);
        let mut buf = Vec::new();
        write_markdown(&record(rows), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("| 0 | 10 | 1.0000e-01 | 1 | 1.4142e+00 | 33 |"), "{text}");
        assert!(text.contains("| 0 | 4.0000e-02 | --- | 8.0000e-01 | --- |"), "{text}");
        assert!(text.contains("| 1 | 5.0000e-03 | 3.00 | 1.0000e-01 | 3.00 |"), "{text}");
    }

    #[test]
    fn plot_data_slopes_equal_eoc() {
        let mut rows = vec![row(0, 3.7e-2), row(1, 9.1e-3), row(2, 1.3e-3)];
        fill_eoc(&mut rows);
        let rec = record(rows);
        let mut buf = Vec::new();
        write_plot_data(&rec, &mut buf).unwrap();
        let blocks = read_plot_data(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(blocks.len(), 2);
        for (block, pick) in blocks.iter().zip([
            (|r: &LevelRow| r.eoc_u) as fn(&LevelRow) -> Option<f64>,
            |r: &LevelRow| r.eoc_q,
        ]) {
            for (w, r) in block.windows(2).zip(&rec.rows[1..]) {
                let slope = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
                assert!((slope - pick(r).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn emit_reports_io_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_tables(&record(vec![row(0, 1.0)]), TableFormat::Csv, &blocker).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
        for f in TableFormat::ALL {
            let path = emit_tables(&record(vec![row(0, 1.0)]), f, dir.path()).unwrap();
            assert!(path.exists());
        }
    }
}
