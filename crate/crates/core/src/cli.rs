//! Command-line front end: `run`, `sweep` and `validate`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::SimError;
use crate::kernel::{Environment, RunOutcome};
use crate::scenarios::{
    build_party, counter_scenario, CounterConfig, PartyConfig, Trace, TraceRecord, Variant,
};
use crate::stats::{self, MM1Params};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SIMULATION: i32 = 2;

/// Horizon applied to `run` when neither `--until` nor `--cap` is given.
pub const DEFAULT_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Philosophers(Variant),
    Counter,
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "counter" {
            return Ok(Scenario::Counter);
        }
        s.parse::<Variant>()
            .map(Scenario::Philosophers)
            .map_err(|_| {
                format!("unknown scenario '{s}' (expected classic, ordered, bowl, impatient or counter)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Jsonl,
    Csv,
}

/// Inclusive party-size range: `5`, `2..19`, `2..=19` or `2,3,8`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeRange(pub Vec<usize>);

impl FromStr for SizeRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = |_| format!("invalid party size range '{s}'");
        let sizes: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let (a, b): (usize, usize) = (
                a.trim().parse().map_err(bad)?,
                b.trim().parse().map_err(bad)?,
            );
            (a..=b).collect()
        } else {
            s.split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(bad)?
        };
        if sizes.is_empty() {
            return Err(format!("party size range '{s}' is empty"));
        }
        Ok(SizeRange(sizes))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "procsim",
    version,
    about = "Process-oriented discrete event simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and print its trace and outcome.
    Run(RunArgs),
    /// Sweep party sizes and seeds, emitting one CSV row per cell.
    Sweep(SweepArgs),
    /// Check the kernel against the M/M/1 closed form and the RNG against
    /// the exponential distribution.
    Validate(ValidateArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// classic | ordered | bowl | impatient | counter
    #[arg(long)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Simulation horizon; omitted means run until the event list drains.
    #[arg(long)]
    pub until: Option<f64>,
    /// Safety horizon used when --until is omitted.
    #[arg(long, conflicts_with = "until")]
    pub cap: Option<f64>,
    /// Emit philosopher diagnostics (the counter always traces).
    #[arg(long)]
    pub diag: bool,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    pub format: Format,
    /// Decimals for times (default: 6, or 1 for the counter).
    #[arg(long)]
    pub precision: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Counter scenario: number of customers.
    #[arg(long, default_value_t = 10)]
    pub customers: usize,
    /// Counter scenario: a service fails with probability 1/K.
    #[arg(long, default_value_t = 10)]
    pub fail_one_in: u64,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    /// classic | ordered | bowl | impatient
    #[arg(long)]
    pub scenario: Variant,
    /// Party sizes, e.g. 2..19.
    #[arg(long)]
    pub n: SizeRange,
    #[arg(long)]
    pub until: f64,
    /// Number of replicate seeds per cell.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// First replicate seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 100_000)]
    pub customers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Simulation(String),
    ClosedOutput,
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Simulation(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Failure::ClosedOutput;
        }
        Failure::Simulation(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Simulation(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        if e.io_error_kind() == Some(io::ErrorKind::BrokenPipe) {
            return Failure::ClosedOutput;
        }
        Failure::Simulation(format!("json error: {e}"))
    }
}

/// Parse `args` (including the program name) and execute. Output goes to
/// `out` unless `--output` names a file; diagnostics go to `err`.
pub fn main_with<O: Write, E: Write>(args: &[String], out: &mut O, err: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(err, "{e}");
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => with_output(&a.output, out, |w| run(a, w, err)),
        Command::Sweep(a) => with_output(&a.output, out, |w| sweep(a, w)),
        Command::Validate(a) => validate(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Simulation(msg)) => {
            let _ = writeln!(err, "simulation error: {msg}");
            EXIT_SIMULATION
        }
        Err(Failure::ClosedOutput) => EXIT_OK,
    }
}

fn with_output<O: Write>(
    path: &Option<PathBuf>,
    out: &mut O,
    body: impl FnOnce(&mut dyn Write) -> Result<i32, Failure>,
) -> Result<i32, Failure> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            let code = body(&mut w)?;
            w.flush()?;
            Ok(code)
        }
        None => body(out),
    }
}

/// Render trace records.
///
/// `human` prints `{actor} {message} @{time}` per line; `jsonl` one JSON
/// object per line with keys `time`, `actor`, `message`; `csv` a
/// `time,actor,message` table. Times use `precision` decimals except in
/// `jsonl`, which keeps full precision.
pub fn emit_trace(
    records: &[TraceRecord],
    format: Format,
    precision: usize,
    out: &mut dyn Write,
) -> io::Result<()> {
    match format {
        Format::Human => {
            for r in records {
                writeln!(out, "{} {} @{:.*}", r.actor, r.message, precision, r.time)?;
            }
        }
        Format::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut *out, r)?;
                out.write_all(b"\n")?;
            }
        }
        Format::Csv => {
            if !records.is_empty() {
                writeln!(out, "time,actor,message")?;
            }
            for r in records {
                writeln!(out, "{:.*},{},{}", precision, r.time, r.actor, r.message)?;
            }
        }
    }
    Ok(())
}

fn check_time(name: &str, t: Option<f64>) -> Result<(), Failure> {
    match t {
        Some(t) if !(t.is_finite() && t >= 0.0) => Err(Failure::Usage(format!(
            "--{name} must be a nonnegative number, got {t}"
        ))),
        _ => Ok(()),
    }
}

fn run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    check_time("until", args.until)?;
    check_time("cap", args.cap)?;
    match args.scenario {
        Scenario::Philosophers(variant) => run_party(args, variant, out, err),
        Scenario::Counter => run_counter(args, out, err),
    }
}

fn summary_sink<'a>(
    format: Format,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
) -> &'a mut dyn Write {
    match format {
        Format::Human => out,
        _ => err,
    }
}

fn run_party(
    args: &RunArgs,
    variant: Variant,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    if args.n < 2 {
        return Err(Failure::Usage(format!(
            "--n must be at least 2, got {}",
            args.n
        )));
    }
    let precision = args.precision.unwrap_or(6);
    let env = Environment::new(args.seed);
    let trace = if args.diag {
        Trace::enabled()
    } else {
        Trace::disabled()
    };
    let party = build_party(&env, &PartyConfig::new(args.n, variant), &trace)?;
    let horizon = args.until.or(args.cap).unwrap_or(DEFAULT_CAP);
    let outcome = env.run(Some(horizon));
    emit_trace(&trace.records(), args.format, precision, out)?;
    let outcome = outcome?;

    let summary = summary_sink(args.format, out, err);
    let counts = party.counts();
    match outcome {
        RunOutcome::Exhausted { now } if party.is_deadlocked() => {
            writeln!(
                summary,
                "DEADLOCK detected at t={now:.precision$}; counts={counts:?}"
            )?;
        }
        RunOutcome::Exhausted { now } => {
            writeln!(
                summary,
                "event list exhausted at t={now:.precision$}; counts={counts:?}"
            )?;
        }
        RunOutcome::ReachedHorizon { now } => {
            let label = if args.until.is_some() {
                "horizon"
            } else {
                "safety cap"
            };
            writeln!(
                summary,
                "{label} reached at t={now:.precision$}; counts={counts:?}"
            )?;
        }
    }
    writeln!(
        summary,
        "mean waiting: {:.*}",
        precision,
        party.mean_waiting()
    )?;
    if let Some(bowl) = &party.bowl {
        writeln!(summary, "bowl level: {}", bowl.level())?;
    }
    Ok(EXIT_OK)
}

fn run_counter(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let precision = args.precision.unwrap_or(1);
    let config = CounterConfig {
        n_customers: args.customers,
        fail_one_in: args.fail_one_in,
        ..Default::default()
    };
    config
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let env = Environment::new(args.seed);
    let model = counter_scenario(&env, config, Trace::enabled())?;
    let horizon = args.until.or(args.cap);
    let outcome = env.run(horizon);
    emit_trace(&model.trace().records(), args.format, precision, out)?;
    outcome?;
    let customers = model.customers();
    let failed = customers.iter().filter(|c| c.failed).count();
    let resolved = customers.iter().filter(|c| c.resolved_at.is_some()).count();
    let summary = summary_sink(args.format, out, err);
    writeln!(
        summary,
        "customers: {}, served: {}, failed: {}",
        customers.len(),
        resolved - failed,
        failed
    )?;
    Ok(EXIT_OK)
}

fn sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    check_time("until", Some(args.until))?;
    if args.until <= 0.0 {
        return Err(Failure::Usage("--until must be positive".into()));
    }
    if args.seeds == 0 {
        return Err(Failure::Usage("--seeds must be at least 1".into()));
    }
    if let Some(&n) = args.n.0.iter().find(|&&n| n < 2) {
        return Err(Failure::Usage(format!("party size {n} is below 2")));
    }
    let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
    let results = stats::sweep(&[args.scenario], &args.n.0, args.until, &seeds)?;
    match args.format {
        Format::Csv => stats::write_csv(&results, out)?,
        Format::Jsonl => {
            for r in &results {
                serde_json::to_writer(&mut *out, r)?;
                out.write_all(b"\n")?;
            }
        }
        Format::Human => {
            writeln!(
                out,
                "{:<10} {:>4} {:>12} {:>10} {:>9}",
                "variant", "n", "mean_wait", "sd", "deadlocks"
            )?;
            for c in stats::summarize(&results) {
                writeln!(
                    out,
                    "{:<10} {:>4} {:>12.4} {:>10.4} {:>9}",
                    c.variant.as_str(),
                    c.n,
                    c.mean,
                    c.sd,
                    c.deadlocks
                )?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Check {
    name: String,
    expected: f64,
    observed: f64,
    tolerance: f64,
    pass: bool,
}

fn validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut checks = Vec::new();
    for (l, m) in [(0.05, 0.1), (0.01, 0.1)] {
        let params = MM1Params::new(l, m)?;
        let expected = stats::mm1_expected_wait(params)?;
        let observed = stats::mm1_simulate(params, args.customers, args.seed)?;
        let tolerance = 0.10 * expected;
        checks.push(Check {
            name: format!("mm1 wait λ={l} μ={m}"),
            expected,
            observed,
            tolerance,
            pass: (observed - expected).abs() <= tolerance,
        });
    }
    let mut rng = stats::Rng::seed_from(args.seed);
    let draws: Vec<f64> = (0..10_000).map(|_| rng.expovariate(10.0)).collect();
    let ks = stats::ks_exponential(&draws, 10.0);
    let critical = stats::ks_critical_1pct(draws.len());
    checks.push(Check {
        name: "exponential KS distance".into(),
        expected: 0.0,
        observed: ks,
        tolerance: critical,
        pass: ks < critical,
    });

    let mut all = true;
    for c in &checks {
        all &= c.pass;
        writeln!(
            out,
            "{} {}: observed {:.6}, expected {:.6} ± {:.6}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.expected,
            c.tolerance
        )?;
    }
    Ok(if all { EXIT_OK } else { EXIT_SIMULATION })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let argv: Vec<String> = std::iter::once("procsim")
            .chain(args.iter().copied())
            .map(String::from)
            .collect();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with(&argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn size_ranges() {
        assert_eq!("2..4".parse::<SizeRange>().unwrap().0, vec![2, 3, 4]);
        assert_eq!("2..=4".parse::<SizeRange>().unwrap().0, vec![2, 3, 4]);
        assert_eq!("5".parse::<SizeRange>().unwrap().0, vec![5]);
        assert_eq!("3,7".parse::<SizeRange>().unwrap().0, vec![3, 7]);
        assert!("4..2".parse::<SizeRange>().is_err());
        assert!("x".parse::<SizeRange>().is_err());
    }

    #[test]
    fn human_trace_format() {
        let recs = [
            TraceRecord {
                time: 1.108437215824142,
                actor: "P1".into(),
                message: "obtained chopstick".into(),
            },
            TraceRecord {
                time: 10.0,
                actor: "Customer".into(),
                message: "left".into(),
            },
        ];
        let mut buf = Vec::new();
        emit_trace(&recs[..1], Format::Human, 6, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "P1 obtained chopstick @1.108437\n"
        );
        let mut buf = Vec::new();
        emit_trace(&recs[1..], Format::Human, 1, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "Customer left @10.0\n");
        let mut buf = Vec::new();
        emit_trace(&recs[1..], Format::Jsonl, 1, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"time\":10.0,\"actor\":\"Customer\",\"message\":\"left\"}\n"
        );
        let mut buf = Vec::new();
        emit_trace(&[], Format::Human, 6, &mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(call(&["run", "--scenario", "banquet"]).0, EXIT_USAGE);
        assert_eq!(
            call(&["sweep", "--scenario", "ordered", "--n", "2..4"]).0,
            EXIT_USAGE
        );
        assert_eq!(
            call(&["run", "--scenario", "classic", "--n", "1"]).0,
            EXIT_USAGE
        );
        assert_eq!(
            call(&["run", "--scenario", "ordered", "--until", "-3"]).0,
            EXIT_USAGE
        );
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("sweep"));
    }

    #[test]
    fn counter_run_prints_the_trace() {
        let (code, out, _) = call(&["run", "--scenario", "counter", "--seed", "3"]);
        assert_eq!(code, EXIT_OK);
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("The operator fell asleep @0.0"));
        assert_eq!(lines.next(), Some("Customer arrived @0.0"));
        assert_eq!(lines.next(), Some("The operator woke up @0.0"));
        assert!(out.contains("Customer left @"));
        assert!(out.contains("customers: 10"));
    }

    #[test]
    fn jsonl_summary_goes_to_stderr() {
        let (code, out, err) = call(&[
            "run",
            "--scenario",
            "ordered",
            "--n",
            "3",
            "--until",
            "100",
            "--diag",
            "--format",
            "jsonl",
        ]);
        assert_eq!(code, EXIT_OK);
        for line in out.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(
                v.get("time").is_some() && v.get("actor").is_some() && v.get("message").is_some()
            );
        }
        assert!(err.contains("horizon reached at t=100.000000"));
    }

    #[test]
    fn sweep_emits_csv() {
        let (code, out, _) = call(&[
            "sweep",
            "--scenario",
            "ordered",
            "--n",
            "2..3",
            "--until",
            "500",
            "--seeds",
            "2",
        ]);
        assert_eq!(code, EXIT_OK);
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines[0], "variant,n,t,seed,mean_waiting,deadlocked");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("ordered,2,500.0,0,"));
    }
}
