use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lawnsim::experiment::{
    compare, rows_for_report, run_with_log, sweep, sweep_points, write_csv, write_sweep_csv, Mode, RunError,
    SWEEP_POINT_LIMIT,
};
use lawnsim::scenario::{Scenario, ScenarioConfig, ScenarioError};

const SCENARIO_DIR_ENV: &str = "LAWNSIM_SCENARIO_DIR";
const DEFAULT_SCENARIO_FILE: &str = "reference.json";

#[derive(Parser)]
#[command(name = "lawnsim", version, about = "Air-ground UAV coordination simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file; prints OK or one `path: message` line per problem.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run one mode for one seed.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "slm-llm")]
        mode: Mode,
        /// Defaults to the scenario's own seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
        /// Also write the base station's long-term memory log (JSON lines).
        #[arg(long)]
        ltm_log: Option<PathBuf>,
    },
    /// Run all three modes over a seed set and check the orderings.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "0..20")]
        seeds: String,
        /// Restrict to these modes (repeatable).
        #[arg(long)]
        mode: Vec<Mode>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare over the Cartesian product of `--vary key=v1,v2,..` axes.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "0..5")]
        seeds: String,
        #[arg(long)]
        mode: Vec<Mode>,
        #[arg(long = "vary", value_name = "KEY=V1,V2,..", required = true)]
        vary: Vec<String>,
        /// Permit sweeps above the point cap.
        #[arg(long)]
        allow_large: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON; relative paths also resolve against $LAWNSIM_SCENARIO_DIR.
    /// Without it, `reference.json` from that directory or the bundled reference is used.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override a config key, e.g. `costs.t_llm=1.5` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    /// Pretty JSON.
    Text,
}

/// Exit status table.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Config(String),
    Simulation(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Config(_) => 2,
            Failure::Simulation(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Config(m) | Failure::Simulation(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Invalid(d) => {
                Failure::Invalid(d.iter().map(|d| format!("invalid: {d}")).collect::<Vec<_>>().join("\n"))
            }
            ScenarioError::Io(e) => Failure::Io(format!("io: {e}")),
            ScenarioError::Generation { .. } => Failure::Simulation(format!("simulation: {e}")),
            e @ (ScenarioError::Parse { .. } | ScenarioError::Override { .. }) => Failure::Config(format!("config: {e}")),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Scenario(e) => e.into(),
            e => Failure::Simulation(format!("simulation: {e}")),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("io: {}: {e}", path.display()))
}

fn resolve(path: Option<&Path>) -> Option<PathBuf> {
    let dir = std::env::var_os(SCENARIO_DIR_ENV).map(PathBuf::from);
    match (path, dir) {
        (Some(p), Some(dir)) if p.is_relative() && !p.exists() => Some(dir.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(dir)) => Some(dir.join(DEFAULT_SCENARIO_FILE)).filter(|p| p.exists()),
        (None, None) => None,
    }
}

fn load_config(args: &ScenarioArgs) -> Result<ScenarioConfig, Failure> {
    let mut config = match resolve(args.scenario.as_deref()) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            ScenarioConfig::parse(&text)?
        }
        None => Scenario::reference_config(),
    };
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("config: --set {kv:?}: expected KEY=VALUE")))?;
        config.apply_override(k.trim(), v.trim())?;
    }
    Ok(config)
}

fn load(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    Ok(Scenario::new(load_config(args)?)?)
}

/// `a..b` (half-open), `a..=b`, or a comma list.
fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = |m: String| Failure::Config(format!("usage: --seeds {s:?}: {m}"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| bad(format!("{t:?}: {e}")));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad("no seeds".into()));
    }
    Ok(seeds)
}

fn parse_axes(vary: &[String]) -> Result<Vec<(String, Vec<String>)>, Failure> {
    vary.iter()
        .map(|a| {
            let (k, vs) = a
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("usage: --vary {a:?}: expected KEY=V1,V2,..")))?;
            let vs: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            if vs.is_empty() {
                return Err(Failure::Config(format!("usage: --vary {a:?}: no values")));
            }
            Ok((k.trim().to_string(), vs))
        })
        .collect()
}

/// Writes to `--out` or stdout. Returns whether stdout was used.
fn emit(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<bool, Failure> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))?;
            Ok(false)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            match body(&mut w) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(Failure::Io(format!("io: stdout: {e}"))),
                _ => {}
            }
            Ok(true)
        }
    }
}

/// Prints informational lines where they won't mix with data on stdout.
fn note(data_on_stdout: bool, line: &str) {
    if data_on_stdout {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn modes_or_all(modes: &[Mode]) -> Vec<Mode> {
    if modes.is_empty() {
        Mode::ALL.to_vec()
    } else {
        modes.to_vec()
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { scenario } => {
            load(&scenario)?;
            println!("OK");
            Ok(())
        }
        Command::Run {
            scenario,
            mode,
            seed,
            output,
            ltm_log,
        } => {
            let s = load(&scenario)?;
            let seed = seed.unwrap_or(s.config().seed);
            let result = run_with_log(&s, mode, seed)?;
            let report = &result.report;
            let on_stdout = emit(output.out.as_deref(), |w| match output.format {
                Format::Csv => write_csv(w, &rows_for_report(report)).map_err(io::Error::from),
                Format::Text => writeln!(w, "{}", report.to_json()),
            })?;
            if let Some(path) = ltm_log {
                let file = File::create(&path).map_err(io_err(&path))?;
                let mut w = BufWriter::new(file);
                result.memory.write_log(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
            }
            for u in &report.uavs {
                note(
                    on_stdout,
                    &format!(
                        "uav {}: traj {} cells, {} waypoints, mean latency {:.6}s, energy {:.6}J{}",
                        u.uav_id,
                        u.trajectory_length,
                        u.waypoints_completed,
                        u.mean_latency,
                        u.energy,
                        if u.failed { " (failed)" } else { "" }
                    ),
                );
            }
            if report.tick_limit_exceeded {
                note(on_stdout, &format!("tick limit reached after {} ticks", report.ticks));
            }
            Ok(())
        }
        Command::Compare {
            scenario,
            seeds,
            mode,
            output,
        } => {
            let seeds = parse_seeds(&seeds)?;
            let s = load(&scenario)?;
            let table = compare(&s, &modes_or_all(&mode), &seeds);
            let on_stdout = emit(output.out.as_deref(), |w| match output.format {
                Format::Csv => write_csv(w, &table.rows).map_err(io::Error::from),
                Format::Text => writeln!(w, "{}", table.to_json()),
            })?;
            for e in &table.errors {
                eprintln!("error: {e}");
            }
            for line in table.verdict_lines() {
                note(on_stdout, &line);
            }
            if table.reports.is_empty() {
                return Err(Failure::Simulation("simulation: every run failed".into()));
            }
            Ok(())
        }
        Command::Sweep {
            scenario,
            seeds,
            mode,
            vary,
            allow_large,
            output,
        } => {
            let seeds = parse_seeds(&seeds)?;
            let axes = parse_axes(&vary)?;
            let n = sweep_points(&axes).len();
            if n > SWEEP_POINT_LIMIT && !allow_large {
                return Err(Failure::Config(format!(
                    "usage: sweep has {n} points, above the cap of {SWEEP_POINT_LIMIT}; pass --allow-large to run it"
                )));
            }
            let s = load(&scenario)?;
            let points = sweep(&s, &axes, &modes_or_all(&mode), &seeds)?;
            let on_stdout = emit(output.out.as_deref(), |w| match output.format {
                Format::Csv => write_sweep_csv(w, &points).map_err(io::Error::from),
                Format::Text => writeln!(w, "{}", serde_json::to_string_pretty(&points).expect("sweep serializes")),
            })?;
            for p in &points {
                for line in p.table.verdict_lines() {
                    note(on_stdout, &format!("[{}] {line}", p.label()));
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
