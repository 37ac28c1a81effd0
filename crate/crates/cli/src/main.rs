use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlpf_core::benchmarks::{ctl_problem, dvg02_problem, ProblemName, LJ13_GLOBAL_MINIMUM};
use mlpf_core::harness::acceptance::{run_criterion, CRITERIA};
use mlpf_core::harness::config::{parse_entries, resolve, Entry, InitialPoint, RunConfig};
use mlpf_core::harness::experiment::{
    compare_methods, default_initials, run_and_write, summary_table, write_summary,
};
use mlpf_core::harness::output_dir;
use mlpf_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mlpf",
    version,
    about = "Layered functional-derivative optimizer experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace.
    Run(RunArgs),
    /// Run the method matrix over several initial points.
    Compare(CompareArgs),
    /// Print the available benchmark problems.
    ListProblems,
    /// Run the acceptance suite.
    Check(CheckArgs),
}

/// Every flag mirrors a config key and overrides the config file.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    use_kdl: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    kdl_offset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long)]
    factorized: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    max_steps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    cost_tol: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    step_tol: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x_tol: Option<String>,
    /// `canonical:K`, `lj_seed:N`, `random` or a comma-separated vector.
    #[arg(long, allow_hyphen_values = true)]
    initial: Option<String>,
    #[arg(long)]
    rng_seed: Option<String>,
    #[arg(long)]
    record_stride: Option<String>,
    #[arg(long)]
    full_trace: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// Output directory (default: $MLPF_OUT_DIR, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// `;`-separated initial points; defaults to the problem's canonical set.
    #[arg(long, allow_hyphen_values = true)]
    initials: Option<String>,
    /// Concurrent cells.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args)]
struct CheckArgs {
    /// Run only the named criterion (repeatable).
    #[arg(long)]
    only: Vec<String>,
    /// Print criterion names and exit.
    #[arg(long)]
    list: bool,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let fields: [(&'static str, &Option<String>); 19] = [
            ("problem", &self.problem),
            ("method", &self.method),
            ("kernel", &self.kernel),
            ("use_kdl", &self.use_kdl),
            ("kdl_offset", &self.kdl_offset),
            ("eta", &self.eta),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("factorized", &self.factorized),
            ("max_steps", &self.max_steps),
            ("cost_tol", &self.cost_tol),
            ("step_tol", &self.step_tol),
            ("x_tol", &self.x_tol),
            ("initial", &self.initial),
            ("rng_seed", &self.rng_seed),
            ("record_stride", &self.record_stride),
            ("full_trace", &self.full_trace),
            ("format", &self.format),
            ("output", &self.output),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect()
    }

    fn load(&self) -> Result<RunConfig, Error> {
        let mut entries = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Config {
                    field: "config".into(),
                    message: format!("{}: {e}", path.display()),
                })?;
                parse_entries(&text).map_err(|e| Error::Config {
                    field: "config".into(),
                    message: format!("{}: {e}", path.display()),
                })?
            }
            None => Vec::new(),
        };
        for (key, value) in self.overrides() {
            entries.retain(|e| e.key != key);
            entries.push(Entry {
                key: key.to_string(),
                value: value.clone(),
                line: 0,
            });
        }
        resolve(&entries)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonFinite { .. }
        | Error::NonFiniteValue { .. }
        | Error::KdlDomain { .. }
        | Error::PairTooClose { .. }
        | Error::RelaxationFailed { .. }
        | Error::GlobalBasin { .. } => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(&err))
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let cfg = match args.config.load() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let dir = output_dir(args.config.out.clone());
    match run_and_write(&cfg, &dir) {
        Ok((trace, path)) => {
            let last = trace.last();
            println!(
                "{} {}: status {} after {} steps, objective {:.10e}, trace {}",
                cfg.problem,
                cfg.label(),
                trace.status,
                trace.steps,
                last.objective,
                path.display()
            );
            if let Some(m) = &trace.message {
                println!("note: {m}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn parse_initials(spec: &str) -> Result<Vec<InitialPoint>, Error> {
    spec.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|m: String| Error::Config {
                field: "initials".into(),
                message: m,
            })
        })
        .collect()
}

fn cmd_compare(args: CompareArgs) -> ExitCode {
    let cfg = match args.config.load() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let initials = match &args.initials {
        Some(s) => match parse_initials(s) {
            Ok(v) => v,
            Err(e) => return fail(e),
        },
        None => default_initials(&cfg),
    };
    let dir = output_dir(args.config.out.clone());
    let rows = match compare_methods(&cfg, &initials, args.jobs, Some(&dir)) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let summary = dir.join(format!("{}-summary.csv", cfg.problem));
    if let Err(e) = write_summary(&rows, &summary) {
        return fail(e);
    }
    print!("{}", summary_table(&rows));
    println!("summary {}", summary.display());
    ExitCode::SUCCESS
}

fn cmd_list() -> ExitCode {
    let show = |v: &[f64]| {
        let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
        format!("({})", parts.join(", "))
    };
    for p in [ctl_problem(), dvg02_problem()] {
        let initials: Vec<String> = p.canonical_initials.iter().map(|x| show(x)).collect();
        println!(
            "{:<6} dim {:<2} minimum {} at {}  initials {}",
            p.name.as_str(),
            p.dim(),
            p.global_minimum_value,
            show(p.global_minimum_location.as_deref().unwrap_or(&[])),
            initials.join(" ")
        );
    }
    println!(
        "{:<6} dim {:<2} minimum {} at the centered icosahedron  initials lj_seed:N (seeded local minimum)",
        ProblemName::Lj13.as_str(),
        39,
        LJ13_GLOBAL_MINIMUM
    );
    ExitCode::SUCCESS
}

fn cmd_check(args: CheckArgs) -> ExitCode {
    if args.list {
        for name in CRITERIA {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }
    let names: Vec<String> = if args.only.is_empty() {
        CRITERIA.iter().map(|s| s.to_string()).collect()
    } else {
        args.only.clone()
    };
    let mut all = true;
    for name in &names {
        match run_criterion(name) {
            Some(c) => {
                println!("{}", c.line());
                all &= c.passed;
            }
            None => {
                eprintln!("error: unknown criterion `{name}` (see `mlpf check --list`)");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ACCEPTANCE)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::ListProblems => cmd_list(),
        Command::Check(a) => cmd_check(a),
    }
}
