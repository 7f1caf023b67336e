use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use spinspec::analysis::{self, AnalysisReport, SpinVerdict, Suite};
use spinspec::problem::{Problem, ProblemSpec};
use spinspec::spectral::{AsymptoticReport, CountingTable, Truncation};
use spinspec::Error;

const MAX_DIMENSION: usize = 30_000;
const MAX_COUNT_LAMBDA: f64 = 500.0;

#[derive(Parser)]
#[command(name = "spinspec", version, about = "Spectral geometry of 2×2 first-order systems on the 3-torus")]
struct Cli {
    /// Output directory for reports and CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metric, charge, spin structure, spinor, action and the two coefficients.
    Analyze { spec: PathBuf },
    /// Galerkin eigenvalues, counting function and asymptotic comparison.
    Spectrum {
        spec: PathBuf,
        /// Fourier truncation; defaults to the spec's value.
        #[arg(long = "M", short = 'M', visible_alias = "m")]
        m: Option<usize>,
        #[arg(long = "lambda-max", default_value_t = 10.0)]
        lambda_max: f64,
        /// Overrides the computed first coefficient.
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        /// Overrides the computed second coefficient.
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
    },
    /// Randomized invariance suites.
    Verify {
        spec: PathBuf,
        /// conformal, su2, rigid, charge_conjugation, torsion, subprincipal or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Exact counting table of the double-turn example.
    Count {
        #[arg(long = "lambda-max", default_value_t = 100.0)]
        lambda_max: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = analysis::example_a())]
        a: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = analysis::example_b())]
        b: f64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(1, format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Validation(_) | Error::MetricMismatch { .. } | Error::NonpositiveWeight { .. } => 2,
            Error::SpinStructureMismatch { .. } | Error::ChargeMismatch => 3,
            Error::NotElliptic { .. } | Error::ChargeInconsistent { .. } => 4,
            Error::TruncationTooSmall { .. } => 5,
            Error::LiftIllConditioned { .. } | Error::VanishingSpinor { .. } | Error::ConvergenceFailure(_) => 1,
        };
        Failure::new(code, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn configure_threads() -> Outcome {
    let Ok(raw) = std::env::var("SPINSPEC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::new(2, format!("SPINSPEC_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(1, e.to_string()))
}

fn load(path: &Path) -> Result<Problem, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
    Ok(ProblemSpec::from_json(&text)?.validate()?)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Outcome {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(&path, text + "\n").map_err(|e| Failure::io(&path, e))
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Outcome {
    let path = dir.join(name);
    let to_failure = |e: csv::Error| Failure::new(1, format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(to_failure)?;
    w.write_record(header).map_err(to_failure)?;
    for row in rows {
        w.write_record(&row).map_err(to_failure)?;
    }
    w.flush().map_err(|e| Failure::io(&path, e))
}

fn write_counting(dir: &Path, table: &CountingTable) -> Outcome {
    write_csv(
        dir,
        "counting.csv",
        &["lambda", "N", "trusted"],
        table
            .samples
            .iter()
            .map(|s| vec![real(s.lambda), s.count.to_string(), s.trusted.to_string()]),
    )
}

#[derive(Serialize)]
struct AsymptoticSummary {
    a: f64,
    b: f64,
    window: (f64, f64),
    window_mean: f64,
    fit_range: (f64, f64),
    exponent: Option<f64>,
    samples: usize,
}

impl From<&AsymptoticReport> for AsymptoticSummary {
    fn from(r: &AsymptoticReport) -> Self {
        Self {
            a: r.a,
            b: r.b,
            window: r.window,
            window_mean: r.window_mean,
            fit_range: r.fit_range,
            exponent: r.exponent,
            samples: r.residuals.len(),
        }
    }
}

fn analyze(spec: &Path, out: &Path) -> Outcome {
    let problem = load(spec)?;
    let report = analysis::analyze(&problem)?;
    write_json(out, "analysis.json", &report)?;
    match report.spin_structure {
        SpinVerdict::Compatible => Ok(()),
        SpinVerdict::SpinStructureMismatch { cycle } => Err(Error::SpinStructureMismatch { cycle }.into()),
        SpinVerdict::ChargeMismatch => Err(Error::ChargeMismatch.into()),
    }
}

#[derive(Serialize)]
struct SpectrumSummary {
    truncation: usize,
    dimension: usize,
    eigenvalues: usize,
    trusted: usize,
    trust_radius: f64,
    residual: f64,
    blocks: usize,
    weight_truncation_bound: f64,
    asymptotic: AsymptoticSummary,
}

fn coefficients(problem: &Problem, a: Option<f64>, b: Option<f64>) -> Result<(f64, f64), Failure> {
    if let (Some(a), Some(b)) = (a, b) {
        return Ok((a, b));
    }
    let report: AnalysisReport = analysis::analyze(problem)?;
    Ok((a.unwrap_or(report.a), b.unwrap_or(report.b())))
}

fn spectrum(spec: &Path, out: &Path, m: Option<usize>, lambda_max: f64, a: Option<f64>, b: Option<f64>) -> Outcome {
    let problem = load(spec)?;
    let m = m.unwrap_or(problem.truncation);
    let dim = Truncation::new(m).dimension();
    if dim > MAX_DIMENSION {
        return Err(Failure::new(2, format!("M = {m} gives dimension {dim} > {MAX_DIMENSION}")));
    }
    if !(lambda_max > 0.0) {
        return Err(Failure::new(2, "lambda-max must be positive"));
    }
    let (a, b) = coefficients(&problem, a, b)?;
    let r = analysis::spectrum(&problem, m, lambda_max, a, b)?;
    let s = &r.spectrum;
    write_csv(
        out,
        "eigenvalues.csv",
        &["index", "lambda", "trusted"],
        s.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, l)| vec![i.to_string(), real(*l), s.is_trusted(*l).to_string()]),
    )?;
    write_counting(out, &r.counting)?;
    write_json(
        out,
        "spectrum.json",
        &SpectrumSummary {
            truncation: m,
            dimension: dim,
            eigenvalues: s.eigenvalues.len(),
            trusted: s.trusted().count(),
            trust_radius: s.trust_radius,
            residual: s.residual,
            blocks: s.blocks,
            weight_truncation_bound: r.weight_truncation_bound,
            asymptotic: (&r.asymptotic).into(),
        },
    )
}

fn verify(spec: &Path, out: &Path, suite: &str, seed: u64) -> Outcome {
    let suites = Suite::parse(suite).ok_or_else(|| Failure::new(2, format!("unknown suite {suite:?}")))?;
    let problem = load(spec)?;
    let report = analysis::verify(&problem, &suites, seed)?;
    write_json(out, "verify.json", &report)?;
    for c in &report.checks {
        println!(
            "{} {}/{} residual {:.3e} tolerance {:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite.name(),
            c.name,
            c.residual,
            c.tolerance
        );
    }
    if report.passed {
        return Ok(());
    }
    let w = report.worst().expect("a failing check");
    Err(Failure::new(
        6,
        format!("suite failure: worst residual {}/{} = {:.3e} > {:.1e}", w.suite.name(), w.name, w.residual, w.tolerance),
    ))
}

fn count(out: &Path, lambda_max: f64, a: f64, b: f64) -> Outcome {
    if !(lambda_max > 0.0 && lambda_max <= MAX_COUNT_LAMBDA) {
        return Err(Failure::new(2, format!("lambda-max must lie in (0, {MAX_COUNT_LAMBDA}]")));
    }
    let (table, report) = analysis::exact_count(lambda_max, a, b);
    write_counting(out, &table)?;
    write_json(out, "count.json", &AsymptoticSummary::from(&report))
}

fn run(cli: Cli) -> Outcome {
    configure_threads()?;
    fs::create_dir_all(&cli.out).map_err(|e| Failure::io(&cli.out, e))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Analyze { spec } => analyze(&spec, out),
        Command::Spectrum {
            spec,
            m,
            lambda_max,
            a,
            b,
        } => spectrum(&spec, out, m, lambda_max, a, b),
        Command::Verify { spec, suite, seed } => verify(&spec, out, &suite, seed),
        Command::Count { lambda_max, a, b } => count(out, lambda_max, a, b),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("spinspec: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
