use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bohmfield_core::sim::{
    ensemble, exit_code, selfcheck, ErrorRecord, LeafRecord, OutputRecord, RunConfig, RunHeader, RunOptions,
    SelfCheckOptions, Simulation,
};
use bohmfield_core::{Error, Leaf, ModeBasis};
use clap::{Parser, Subcommand};
use log::{info, warn};

/// Verbosity: 0 warnings only, 1 progress, 2 adds per-step wall clock to records, 3 debug.
const VERBOSITY_ENV: &str = "BOHMFIELD_VERBOSE";

#[derive(Parser)]
#[command(name = "bohmfield", version, about = "Pilot-wave scalar field simulator on space-like leaves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the leaf-by-leaf evolution and emit one record per leaf.
    Run {
        config: PathBuf,
        /// Override the configured number of steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-site wide CSV table instead of JSON lines.
        #[arg(long)]
        csv: bool,
        /// Continue from the last leaf record in a previous JSON-lines output.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Sample |Psi|^2, transport the ensemble and report KS distances.
    Ensemble {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured ensemble size.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selfcheck {
        /// Break the symmetry of K by this amount (negative control).
        #[arg(long, hide = true)]
        perturb_k: Option<f64>,
    },
    /// Print the frequencies and modes of the initial leaf.
    Modes {
        config: PathBuf,
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn verbosity() -> u8 {
    std::env::var(VERBOSITY_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

fn init_logging(level: u8) {
    let filter = match level {
        0 => log::LevelFilter::Warn,
        1 | 2 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

/// A failure with the process status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e) as u8,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(RunConfig::from_toml_str(&text)?)
}

fn open_output(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(fs::File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn last_leaf_record(path: &Path) -> Result<LeafRecord, Failure> {
    let file = fs::File::open(path)?;
    let mut last = None;
    for line in io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(OutputRecord::Leaf(record)) = serde_json::from_str(&line) {
            last = Some(*record);
        }
    }
    last.ok_or_else(|| Failure {
        code: 2,
        message: format!("no leaf record in {}", path.display()),
    })
}

fn json_line(out: &mut dyn Write, record: &OutputRecord) -> io::Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")
}

/// Wide table: one row per leaf, one column per site and quantity.
struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    fn new(out: W) -> Self {
        Self {
            writer: csv::Writer::from_writer(out),
            header_written: false,
        }
    }

    fn write(&mut self, r: &LeafRecord) -> csv::Result<()> {
        let per_site: [(&str, &[f64]); 6] = [
            ("phi", &r.phi),
            ("velocity", &r.velocity),
            ("rho", &r.rho),
            ("w_t", &r.w_t),
            ("w_x", &r.w_x),
            ("lapse", &r.lapse),
        ];
        if !self.header_written {
            let mut header = vec!["step".to_string(), "t".into(), "log_abs_psi".into(), "degenerate_sites".into()];
            for (name, values) in &per_site {
                header.extend((0..values.len()).map(|i| format!("{name}_{i}")));
            }
            header.extend((0..r.q.len()).map(|n| format!("q_{n}")));
            header.extend((0..r.leaf.t.len()).map(|i| format!("T_{i}")));
            header.extend((0..r.leaf.x.len()).map(|i| format!("X_{i}")));
            self.writer.write_record(&header)?;
            self.header_written = true;
        }
        let mut row = vec![
            r.step.to_string(),
            r.t.to_string(),
            r.log_abs_psi.to_string(),
            r.degenerate_sites.to_string(),
        ];
        for (_, values) in &per_site {
            row.extend(values.iter().map(f64::to_string));
        }
        row.extend(r.q.iter().map(f64::to_string));
        row.extend(r.leaf.t.iter().map(f64::to_string));
        row.extend(r.leaf.x.iter().map(f64::to_string));
        self.writer.write_record(&row)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

fn run(config: PathBuf, steps: Option<usize>, out: Option<PathBuf>, csv: bool, resume: Option<PathBuf>, level: u8) -> Result<(), Failure> {
    let config = load_config(&config)?;
    let options = RunOptions {
        steps,
        wall_clock: level >= 2,
    };
    let sim = match &resume {
        Some(path) => Simulation::resume(&config, options, &last_leaf_record(path)?)?,
        None => Simulation::new(&config, options)?,
    };
    let total = sim.steps();
    info!("running {} steps from step {}", total, sim.step());
    let out = open_output(out.as_deref())?;
    let mut sink = if csv {
        Sink::Csv(Box::new(CsvSink::new(out)))
    } else {
        let mut out = out;
        json_line(&mut *out, &OutputRecord::Header(RunHeader::new(&config, total)))?;
        Sink::Json(out)
    };

    let mut last = (sim.step(), sim.leaf().label());
    let mut failure = None;
    for item in sim {
        match item {
            Ok(record) => {
                last = (record.step, record.t);
                if record.step % 100 == 0 {
                    info!("step {} t = {}", record.step, record.t);
                }
                match &mut sink {
                    Sink::Csv(table) => table.write(&record).map_err(csv_failure)?,
                    Sink::Json(out) => json_line(&mut **out, &OutputRecord::Leaf(Box::new(record)))?,
                }
            }
            Err(e) => {
                if let Sink::Json(out) = &mut sink {
                    json_line(&mut **out, &OutputRecord::Error(ErrorRecord::new(last.0, last.1, &e)))?;
                }
                failure = Some(e);
            }
        }
    }
    match &mut sink {
        Sink::Csv(table) => table.flush()?,
        Sink::Json(out) => out.flush()?,
    }
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

enum Sink {
    Json(Box<dyn Write>),
    Csv(Box<CsvSink<Box<dyn Write>>>),
}

fn run_ensemble(config: PathBuf, seed: Option<u64>, samples: Option<usize>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut config = load_config(&config)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(n) = samples {
        config.ensemble_size = n;
    }
    let report = ensemble(&config)?;
    if let Some(w) = &report.warning {
        warn!("{w}");
    }
    if report.failed > 0 {
        warn!("{} trajectories failed and were dropped", report.failed);
    }
    let mut out = open_output(out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    for e in &report.entries {
        info!("t = {:.6}  KS = {:.5}  (noise floor {:.5})", e.t, e.ks, report.noise_floor);
    }
    Ok(())
}

fn run_selfcheck(perturb_k: Option<f64>) -> Result<(), Failure> {
    let report = selfcheck(SelfCheckOptions { perturb_k });
    let mut out = io::stdout().lock();
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{status} {:<24} residual {:.3e}  tolerance {:.1e}", c.name, c.residual, c.tolerance)?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "self check failed".into(),
        })
    }
}

fn print_modes(config: PathBuf, csv: bool, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = load_config(&config)?;
    let leaf: Leaf = config.initial_leaf()?;
    let basis = ModeBasis::for_leaf(&leaf, config.mass)?;
    let mut out = open_output(out.as_deref())?;
    if csv {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut header = vec!["n".to_string(), "omega".into()];
        header.extend((0..basis.dim()).map(|i| format!("phi_{i}")));
        w.write_record(&header).map_err(csv_failure)?;
        for (n, omega) in basis.frequencies().iter().enumerate() {
            let mut row = vec![n.to_string(), omega.to_string()];
            row.extend(basis.mode(n).iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_failure)?;
        }
        w.flush()?;
    } else {
        for (n, omega) in basis.frequencies().iter().enumerate() {
            let line = serde_json::json!({ "n": n, "omega": omega, "mode": basis.mode(n) });
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = verbosity();
    init_logging(level);
    let outcome = match cli.command {
        Command::Run {
            config,
            steps,
            out,
            csv,
            resume,
        } => run(config, steps, out, csv, resume, level),
        Command::Ensemble {
            config,
            seed,
            samples,
            out,
        } => run_ensemble(config, seed, samples, out),
        Command::Selfcheck { perturb_k } => run_selfcheck(perturb_k),
        Command::Modes { config, csv, out } => print_modes(config, csv, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("bohmfield: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
