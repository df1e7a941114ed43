//! Command-line front end: argument parsing, validation and the subcommands
//! behind the `phasequant` binary.
//!
//! Every command writes its data (CSV or a text report) to `--out` or stdout
//! and its diagnostics to the log stream. CSV files start with `#` metadata
//! lines recording all parameters.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{ambiguity_report, DEFAULT_TIE_TOL};
use crate::cache::{cache_path, load_or_build, CacheOutcome};
use crate::capacity::{CapacityEngine, CapacityPoint, MONOTONICITY_SLACK};
use crate::channel::{db_to_linear, format_symbols, ChannelConfig, Constellation, GAUSS_LEGENDRE_ORDER};
use crate::error::{Error, Result};
use crate::likelihood::SectorLikelihoodTable;
use crate::montecarlo::{mc_capacity_point, DEFAULT_SAMPLES, MIN_SAMPLES, RNG_ALGORITHM};
use crate::verify::{run_suite, VerifyOptions};

/// Cache directory used by `orbits` when none is given.
pub const DEFAULT_CACHE_DIR: &str = "orbit-cache";

#[derive(Debug, Parser)]
#[command(name = "phasequant", version, about = "Capacity of phase-quantized noncoherent MPSK")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Capacity over an SNR grid (Monte Carlo when --dither is set).
    Sweep(RunArgs),
    /// Same as `sweep --dither`.
    Dither(RunArgs),
    /// Build, cache and summarize the orbit tables.
    Orbits(RunArgs),
    /// Run the invariant suite.
    Verify(RunArgs),
    /// ML ambiguity report over all outputs.
    Ambiguity(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Constellation size.
    #[arg(long = "M", default_value_t = 4)]
    pub m: usize,
    /// Phase sectors.
    #[arg(long = "K", default_value_t = 8)]
    pub k: usize,
    /// Block length.
    #[arg(long = "L", default_value_t = 6)]
    pub l: usize,
    /// SNR in dB: a list `0,5,20` or an inclusive range `start:stop:step`.
    /// `-inf` selects zero SNR.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// Phase grid size (multiple of K). Defaults to 128 K.
    #[arg(long = "n-phi")]
    pub n_phi: Option<usize>,
    /// Rotate the constellation by 2 pi / (K L) per slot.
    #[arg(long)]
    pub dither: bool,
    /// Monte Carlo samples per SNR point.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for cached orbit tables.
    #[arg(long = "cache-dir")]
    pub cache_dir: Option<PathBuf>,
    /// Relative tolerance for ML ties.
    #[arg(long = "tie-tol", default_value_t = DEFAULT_TIE_TOL)]
    pub tie_tol: f64,
    /// Random draws per symmetry check in `verify`.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Sweep,
    Orbits,
    Verify,
    Ambiguity,
}

/// Validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    /// Channel at the first grid SNR.
    pub cfg: ChannelConfig,
    pub snr_db: Vec<f64>,
    pub n_phi: usize,
    pub dither: bool,
    pub samples: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub tie_tol: f64,
    pub trials: usize,
}

fn default_snr(command: CommandKind) -> &'static str {
    match command {
        CommandKind::Sweep => "-5:20:1",
        CommandKind::Verify => "0,5,20",
        CommandKind::Ambiguity => "5,20",
        CommandKind::Orbits => "5",
    }
}

/// Parses `a,b,c` or `start:stop:step` (inclusive) into dB values.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::InvalidConfig(format!("bad SNR grid {text:?}: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
                return Err(bad("need finite start <= stop and step > 0"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count)
                .map(|i| {
                    let v = start + i as f64 * step;
                    (v * 1e9).round() / 1e9
                })
                .collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(bad("use a,b,c or start:stop:step")),
    };
    if grid.is_empty() {
        return Err(bad("empty"));
    }
    if grid.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(bad("values must be finite or -inf"));
    }
    Ok(grid)
}

impl RunConfig {
    pub fn from_args(command: CommandKind, args: &RunArgs, force_dither: bool) -> Result<Self> {
        let snr_db = parse_snr_grid(args.snr.as_deref().unwrap_or(default_snr(command)))?;
        let cfg = ChannelConfig::new(args.m, args.k, args.l, db_to_linear(snr_db[0]))?;
        let n_phi = args.n_phi.unwrap_or(SectorLikelihoodTable::default_n_phi(args.k));
        if n_phi == 0 || !n_phi.is_multiple_of(args.k) {
            return Err(Error::InvalidConfig(format!(
                "--n-phi {n_phi} must be a positive multiple of K={}",
                args.k
            )));
        }
        let dither = args.dither || force_dither;
        if command == CommandKind::Sweep && dither && args.samples < MIN_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "--samples must be at least {MIN_SAMPLES}"
            )));
        }
        if !(0.0..1.0).contains(&args.tie_tol) {
            return Err(Error::InvalidConfig("--tie-tol must lie in [0, 1)".into()));
        }
        let cache_dir = match (command, &args.cache_dir) {
            (CommandKind::Orbits, None) => Some(PathBuf::from(DEFAULT_CACHE_DIR)),
            (_, dir) => dir.clone(),
        };
        Ok(Self {
            command,
            cfg,
            snr_db,
            n_phi,
            dither,
            samples: args.samples,
            seed: args.seed,
            out: args.out.clone(),
            cache_dir,
            tie_tol: args.tie_tol,
            trials: args.trials,
        })
    }

    fn at(&self, snr_db: f64) -> Result<ChannelConfig> {
        self.cfg.with_snr(db_to_linear(snr_db))
    }

    fn metadata(&self, w: &mut dyn Write, method: &str) -> io::Result<()> {
        writeln!(w, "# phasequant {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# command: {:?}", self.command)?;
        writeln!(
            w,
            "# M={} K={} L={} a={} n_phi={} dither={}",
            self.cfg.m(),
            self.cfg.k(),
            self.cfg.l(),
            self.cfg.a(),
            self.n_phi,
            self.dither
        )?;
        if self.dither {
            writeln!(w, "# dither: delta_l = l * 2 pi / (K L)")?;
        }
        writeln!(w, "# snr_db: {}", join(&self.snr_db))?;
        writeln!(w, "# snr: Es/N0 = 1/(2 sigma^2), unit-energy PSK, linear = 10^(dB/10)")?;
        writeln!(
            w,
            "# quadrature: uniform {}-node phase average; sector integrals by composite Gauss-Legendre order {}",
            self.n_phi, GAUSS_LEGENDRE_ORDER
        )?;
        writeln!(w, "# entropy: log base 2, p < 1e-300 contributes 0")?;
        writeln!(w, "# method: {method}")?;
        Ok(())
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Exit status for an error: 2 for resource guards, 1 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ResourceGuard(_) => 2,
        _ => 1,
    }
}

#[derive(Debug, Serialize)]
struct SweepRow {
    snr_db: f64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L")]
    l: usize,
    n_phi: usize,
    dither: bool,
    h_z_bits: f64,
    h_z_given_x_bits: f64,
    mi_bits: f64,
    cap_per_symbol_bits: f64,
    std_error: Option<f64>,
    samples: Option<u64>,
    seed: Option<u64>,
}

impl From<&CapacityPoint> for SweepRow {
    fn from(p: &CapacityPoint) -> Self {
        Self {
            snr_db: p.snr_db,
            m: p.metadata.m,
            k: p.metadata.k,
            l: p.metadata.l,
            n_phi: p.metadata.n_phi,
            dither: p.metadata.dithered,
            h_z_bits: p.h_out,
            h_z_given_x_bits: p.h_cond,
            mi_bits: p.mi,
            cap_per_symbol_bits: p.cap_per_symbol,
            std_error: p.sampling.map(|s| s.std_error),
            samples: p.sampling.map(|s| s.samples),
            seed: p.sampling.map(|s| s.seed),
        }
    }
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidConfig(format!("CSV encoding: {other:?}")),
    }
}

fn orbit_tables(
    run: &RunConfig,
    log: &mut dyn Write,
) -> Result<(crate::symmetry::ConditionalOrbitTable, crate::symmetry::OutputOrbitTable)> {
    let (k, m, l) = (run.cfg.k(), run.cfg.m(), run.cfg.l());
    let start = Instant::now();
    let (cond, out, outcome) = load_or_build(run.cache_dir.as_deref(), k, m, l)?;
    let how = match outcome {
        CacheOutcome::Hit => "loaded from cache",
        CacheOutcome::Stored => "enumerated and cached",
        CacheOutcome::Computed => "enumerated",
    };
    writeln!(
        log,
        "orbit tables K={k} M={m} L={l}: {how} in {:.1} ms",
        start.elapsed().as_secs_f64() * 1e3
    )?;
    Ok((cond, out))
}

/// `sweep`: one CSV row per SNR point, flushed as it is produced.
pub fn cmd_sweep(run: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let method = if run.dither {
        format!(
            "Monte Carlo, samples={} seed={} rng={RNG_ALGORITHM}",
            run.samples, run.seed
        )
    } else {
        "orbit-reduced exact summation".to_string()
    };
    run.metadata(out, &method)?;
    let engine = if run.dither {
        None
    } else {
        let (c, o) = orbit_tables(run, log)?;
        Some(CapacityEngine::from_tables(c, o)?)
    };
    let mut wtr = csv_writer(out);
    let mut points: Vec<CapacityPoint> = Vec::new();
    let mut first_error: Option<Error> = None;
    for &db in &run.snr_db {
        let result = run.at(db).and_then(|cfg| match &engine {
            Some(engine) => engine.point(&cfg, run.n_phi),
            None => {
                let cons = Constellation::new(&cfg, run.dither);
                let table = SectorLikelihoodTable::build(&cfg, &cons, run.n_phi)?;
                mc_capacity_point(&table, &cons, run.samples, run.seed)
            }
        });
        match result {
            Ok(p) => {
                wtr.serialize(SweepRow::from(&p)).map_err(csv_err)?;
                wtr.flush()?;
                points.push(p);
            }
            Err(e) => {
                writeln!(log, "snr {db} dB: {e}")?;
                first_error.get_or_insert(e);
            }
        }
    }
    wtr.flush()?;
    for w in points.windows(2) {
        let slack = match w[1].sampling.zip(w[0].sampling) {
            Some((a, b)) => 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt(),
            None => MONOTONICITY_SLACK,
        };
        if w[1].snr_db > w[0].snr_db && w[1].cap_per_symbol < w[0].cap_per_symbol - slack {
            writeln!(
                log,
                "warning: capacity drops from {} at {} dB to {} at {} dB",
                w[0].cap_per_symbol, w[0].snr_db, w[1].cap_per_symbol, w[1].snr_db
            )?;
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// `orbits`: builds or loads both tables and prints a summary line.
pub fn cmd_orbits(run: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let (cond, outp) = orbit_tables(run, log)?;
    let (k, m, l) = (run.cfg.k(), run.cfg.m(), run.cfg.l());
    writeln!(
        out,
        "K={k} M={m} L={l} |S_Z|={} sum={} |S~_Z|={} sum={}",
        cond.len(),
        cond.total(),
        outp.len(),
        outp.total()
    )?;
    if let Some(dir) = &run.cache_dir {
        writeln!(log, "cache file: {}", cache_path(dir, k, m, l).display())?;
    }
    Ok(())
}

/// Outcome of `verify`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub passed: bool,
    pub first_failure: Option<String>,
}

/// `verify`: runs the invariant suite at every grid SNR.
pub fn cmd_verify(run: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<VerifyOutcome> {
    let opts = VerifyOptions {
        trials: run.trials,
        seed: run.seed,
        ..Default::default()
    };
    let mut first_failure = None;
    for &db in &run.snr_db {
        let cfg = run.at(db)?;
        let start = Instant::now();
        let report = run_suite(&cfg, run.n_phi, run.dither, &opts)?;
        writeln!(
            out,
            "# M={} K={} L={} snr_db={} n_phi={} dither={}",
            cfg.m(),
            cfg.k(),
            cfg.l(),
            db,
            run.n_phi,
            run.dither
        )?;
        for c in &report.checks {
            writeln!(out, "{c}")?;
        }
        writeln!(log, "verify at {db} dB: {:.2} s", start.elapsed().as_secs_f64())?;
        if let Some(f) = report.first_failure() {
            first_failure.get_or_insert(format!("{} at {db} dB", f.name));
        }
    }
    let passed = first_failure.is_none();
    writeln!(out, "{}", if passed { "all checks passed" } else { "verification FAILED" })?;
    Ok(VerifyOutcome {
        passed,
        first_failure,
    })
}

#[derive(Debug, Serialize)]
struct AmbiguityCsvRow {
    snr_db: f64,
    z: String,
    ambiguous: bool,
    n_tied_inputs: usize,
    tied_inputs: String,
    max_log_likelihood: f64,
    p_z: f64,
}

/// `ambiguity`: every outcome vector with its ML ties, plus the ambiguous
/// mass per SNR as trailing comments and on the log stream.
pub fn cmd_ambiguity(run: &RunConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<Vec<(f64, f64)>> {
    run.metadata(out, &format!("exhaustive ML over grid phases in [0, 2 pi / M), tie tolerance {}", run.tie_tol))?;
    let mut masses = Vec::new();
    let mut wtr = csv_writer(out);
    for &db in &run.snr_db {
        let cfg = run.at(db)?;
        let table = SectorLikelihoodTable::build(&cfg, &Constellation::new(&cfg, run.dither), run.n_phi)?;
        let report = ambiguity_report(&table, run.tie_tol)?;
        for row in &report.rows {
            let tied = row.result.tied_inputs();
            wtr.serialize(AmbiguityCsvRow {
                snr_db: db,
                z: format_symbols(&row.z),
                ambiguous: row.result.ambiguous,
                n_tied_inputs: tied.len(),
                tied_inputs: tied.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
                max_log_likelihood: row.result.max_log_likelihood,
                p_z: row.p_z,
            })
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        writeln!(
            log,
            "snr {db} dB: {} of {} outputs ambiguous, total mass {}",
            report.ambiguous_count(),
            report.rows.len(),
            report.ambiguous_mass
        )?;
        masses.push((db, report.ambiguous_mass));
    }
    let inner = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    for (db, mass) in &masses {
        writeln!(inner, "# ambiguous_mass snr_db={db}: {mass}")?;
    }
    inner.flush()?;
    Ok(masses)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            Box::new(io::BufWriter::new(fs::File::create(p)?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> u8 {
    let (kind, args, force_dither) = match &cli.command {
        Command::Sweep(a) => (CommandKind::Sweep, a, false),
        Command::Dither(a) => (CommandKind::Sweep, a, true),
        Command::Orbits(a) => (CommandKind::Orbits, a, false),
        Command::Verify(a) => (CommandKind::Verify, a, false),
        Command::Ambiguity(a) => (CommandKind::Ambiguity, a, false),
    };
    let mut log = io::stderr().lock();
    let result = RunConfig::from_args(kind, args, force_dither).and_then(|run| {
        let mut out = open_out(run.out.as_deref())?;
        let code = match kind {
            CommandKind::Sweep => cmd_sweep(&run, &mut *out, &mut log).map(|_| 0),
            CommandKind::Orbits => cmd_orbits(&run, &mut *out, &mut log).map(|_| 0),
            CommandKind::Ambiguity => cmd_ambiguity(&run, &mut *out, &mut log).map(|_| 0),
            CommandKind::Verify => cmd_verify(&run, &mut *out, &mut log).map(|v| match v.first_failure {
                None => 0,
                Some(name) => {
                    let _ = writeln!(log, "verification failed: {name}");
                    1
                }
            }),
        }?;
        out.flush()?;
        Ok(code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            exit_code(&e)
        }
    }
}
