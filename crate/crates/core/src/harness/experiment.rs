//! Single runs and method-comparison sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::benchmarks::{
    ctl_problem, dvg02_problem, find_lj_local_minimum, lj13_problem, sample_point,
    BenchmarkProblem, ClusterGeometry, ProblemName, LJ_PAIR_FLOOR,
};
use crate::error::{Error, Result};
use crate::harness::config::{default_eta, InitialPoint, RunConfig};
use crate::harness::trace_io::emit_trace;
use crate::mlpf::{
    run_optimization, CostConfig, KernelKind, Method, OptimizationTrace, OptimizerConfig,
};

/// Local-minimum seeds tried after the configured one.
pub const LJ_SEED_ATTEMPTS: u64 = 64;

/// Everything needed to call [`run_optimization`].
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub problem: BenchmarkProblem,
    pub initial: Vec<f64>,
    pub opt: OptimizerConfig,
    pub cost: CostConfig,
    pub header: Vec<(String, String)>,
}

pub fn prepare(cfg: &RunConfig) -> Result<PreparedRun> {
    cfg.validate()?;
    let mut header = cfg.to_pairs();
    header.push(("version".into(), env!("CARGO_PKG_VERSION").into()));
    let (problem, initial) = match cfg.problem {
        ProblemName::Ctl | ProblemName::Dvg02 => {
            let p = if cfg.problem == ProblemName::Ctl {
                ctl_problem()
            } else {
                dvg02_problem()
            };
            let x = match &cfg.initial {
                InitialPoint::Canonical(k) => {
                    p.canonical_initials.get(*k).cloned().ok_or_else(|| {
                        Error::config(
                            "initial",
                            format!(
                                "{} has {} canonical initials",
                                p.name,
                                p.canonical_initials.len()
                            ),
                        )
                    })?
                }
                InitialPoint::Explicit(v) => v.clone(),
                InitialPoint::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
                    sample_point(&mut rng, &p.domain_box, |_| true)
                }
                InitialPoint::LjSeed(_) => unreachable!("rejected by validate"),
            };
            (p, x)
        }
        ProblemName::Lj13 => {
            let geom = match &cfg.initial {
                InitialPoint::LjSeed(s) => {
                    let (used, g) = find_lj_local_minimum(*s, LJ_SEED_ATTEMPTS)?;
                    header.push(("lj_seed_used".into(), used.to_string()));
                    g
                }
                InitialPoint::Explicit(v) => ClusterGeometry::from_flat(v, LJ_PAIR_FLOOR)?,
                _ => unreachable!("rejected by validate"),
            };
            let p = lj13_problem(&geom)?;
            let x = p.canonical_initials[0].clone();
            (p, x)
        }
    };
    problem.check_initial(&initial)?;
    let mut cost = CostConfig::new(cfg.kernel, problem.target);
    if cfg.use_kdl {
        cost = cost.with_kdl(cfg.kdl_offset);
    }
    let opt = OptimizerConfig {
        method: cfg.method,
        eta: cfg.eta,
        alpha: cfg.alpha,
        beta: cfg.beta,
        max_steps: cfg.max_steps,
        cost_tol: cfg.cost_tol,
        step_tol: cfg.step_tol,
        x_tol: cfg.x_tol,
        factorized: cfg.factorized,
        rng_seed: cfg.rng_seed,
        record_stride: cfg.effective_stride(),
        ..OptimizerConfig::default()
    };
    Ok(PreparedRun {
        problem,
        initial,
        opt,
        cost,
        header,
    })
}

/// Runs one configured experiment; the trace header echoes the config.
pub fn run_experiment(cfg: &RunConfig) -> Result<OptimizationTrace> {
    let run = prepare(cfg)?;
    let mut trace = run_optimization(&run.problem, &run.initial, &run.opt, &run.cost)?;
    trace.header = run.header;
    Ok(trace)
}

/// Runs an experiment and writes its trace into `out_dir`.
pub fn run_and_write(cfg: &RunConfig, out_dir: &Path) -> Result<(OptimizationTrace, PathBuf)> {
    let trace = run_experiment(cfg)?;
    let path = out_dir.join(cfg.file_name());
    emit_trace(&trace, &path, cfg.format)?;
    Ok((trace, path))
}

/// The five comparison variants derived from `base`: square without KDL,
/// square with KDL, sigmoid with KDL, factorized square with KDL, Taylor.
pub fn method_matrix(base: &RunConfig) -> Vec<RunConfig> {
    let mlpf = |kernel, use_kdl, factorized| {
        let mut c = base.clone();
        c.method = Method::Mlpf;
        c.kernel = kernel;
        c.use_kdl = use_kdl;
        c.factorized = factorized;
        if base.method != Method::Mlpf {
            c.eta = default_eta(base.problem, Method::Mlpf);
        }
        c
    };
    let mut taylor = base.clone();
    taylor.method = Method::Taylor;
    taylor.kernel = KernelKind::Square;
    taylor.factorized = false;
    taylor.use_kdl = RunConfig::defaults(base.problem, Method::Taylor).use_kdl;
    if base.method != Method::Taylor {
        taylor.eta = default_eta(base.problem, Method::Taylor);
    }
    vec![
        mlpf(KernelKind::Square, false, false),
        mlpf(KernelKind::Square, true, false),
        mlpf(KernelKind::Sigmoid, true, false),
        mlpf(KernelKind::Square, true, true),
        taylor,
    ]
}

/// Canonical starting points of a problem, or the configured LJ seed.
pub fn default_initials(cfg: &RunConfig) -> Vec<InitialPoint> {
    match cfg.problem {
        ProblemName::Ctl => (0..ctl_problem().canonical_initials.len())
            .map(InitialPoint::Canonical)
            .collect(),
        ProblemName::Dvg02 => (0..dvg02_problem().canonical_initials.len())
            .map(InitialPoint::Canonical)
            .collect(),
        ProblemName::Lj13 => vec![cfg.initial.clone()],
    }
}

/// One line of the comparison summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub initial: String,
    /// Trace status, or `error` when the cell failed before producing one.
    pub status: String,
    pub steps: usize,
    pub final_cost: f64,
    pub final_objective: f64,
    pub trace_file: String,
    pub message: String,
}

/// Runs every (variant, initial) cell with at most `jobs` concurrent runs.
/// Traces are written into `out_dir` when given; failed cells are recorded
/// in the summary and the remaining cells still run.
pub fn compare_methods(
    base: &RunConfig,
    initials: &[InitialPoint],
    jobs: usize,
    out_dir: Option<&Path>,
) -> Result<Vec<SummaryRow>> {
    let mut cells = Vec::new();
    for (k, init) in initials.iter().enumerate() {
        for variant in method_matrix(base) {
            let mut c = variant;
            c.initial = init.clone();
            c.output = Some(format!(
                "{}-{}-init{k}.{}",
                c.problem,
                c.label(),
                c.format.extension()
            ));
            cells.push(c);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|c| run_cell(c, out_dir))
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

fn run_cell(cfg: &RunConfig, out_dir: Option<&Path>) -> SummaryRow {
    let name = cfg.file_name();
    let result = match out_dir {
        Some(dir) => run_and_write(cfg, dir).map(|(t, _)| t),
        None => run_experiment(cfg),
    };
    match result {
        Ok(t) => {
            let last = t.last();
            SummaryRow {
                label: cfg.label(),
                initial: cfg.initial.to_string(),
                status: t.status.to_string(),
                steps: t.steps,
                final_cost: last.rho_cost,
                final_objective: last.objective,
                trace_file: if out_dir.is_some() {
                    name
                } else {
                    String::new()
                },
                message: t.message.unwrap_or_default(),
            }
        }
        Err(e) => SummaryRow {
            label: cfg.label(),
            initial: cfg.initial.to_string(),
            status: "error".into(),
            steps: 0,
            final_cost: f64::NAN,
            final_objective: f64::NAN,
            trace_file: String::new(),
            message: e.to_string(),
        },
    }
}

/// Summary as CSV text with a fixed column order.
pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label",
        "initial",
        "status",
        "steps",
        "final_cost",
        "final_objective",
        "trace",
        "message",
    ])
    .map_err(|e| Error::TraceFormat(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.initial.clone(),
            r.status.clone(),
            r.steps.to_string(),
            format!("{:.16e}", r.final_cost),
            format!("{:.16e}", r.final_objective),
            r.trace_file.clone(),
            r.message.clone(),
        ])
        .map_err(|e| Error::TraceFormat(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::TraceFormat(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::TraceFormat(e.to_string()))
}

/// Fixed-width table for terminals.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<28} {:<14} {:<10} {:>8} {:>14} {:>16}\n",
        "label", "initial", "status", "steps", "final_cost", "final_objective"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<28} {:<14} {:<10} {:>8} {:>14.6e} {:>16.8e}",
            r.label, r.initial, r.status, r.steps, r.final_cost, r.final_objective
        );
    }
    s
}

/// Writes the summary CSV next to the traces.
pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, summary_csv(rows)?)?;
    Ok(())
}
