//! Acceptance suite shared by `mlpf check` and the `acceptance` test target.
//!
//! Every check compares against an independent oracle: closed-form
//! objectives and central differences for gradients, direct arithmetic for
//! kernels, the gradient-descent relaxer for the LJ-13 reference energy.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::{
    ctl_closed_form, ctl_problem, dvg02_closed_form, dvg02_problem, icosahedron_coords,
    relaxed_icosahedron, sample_point, ClusterGeometry, ProblemName, LJ13_GLOBAL_MINIMUM,
    LJ_PAIR_FLOOR,
};
use crate::error::Result;
use crate::funcgraph::{fd_gradient, relative_gradient_error};
use crate::harness::config::{InitialPoint, RunConfig};
use crate::harness::experiment::run_experiment;
use crate::harness::trace_io::to_csv;
use crate::mlpf::{
    cost_update, logistic, logistic_derivative, CostConfig, CostKernel, KernelKind, Method, Status,
};

pub const FD_STEP: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-6;
pub const GRADIENT_POINTS: usize = 100;
pub const KINK_CLEARANCE: f64 = 1e-3;
pub const ODDNESS_TOL: f64 = 1e-12;
pub const LOGISTIC_TOL: f64 = 1e-10;
pub const CTL_X_TOL: f64 = 1e-3;
pub const CTL_BUDGET: usize = 100_000;
pub const DVG_BUDGET: usize = 200_000;
pub const DVG_REDUCTION: f64 = 1e3;
pub const STALL_WINDOW: usize = 10_000;
pub const STALL_REL_CHANGE: f64 = 1e-12;
pub const LJ_TRAP_STEPS: usize = 10_000;
pub const LJ_TRAP_TOL: f64 = 1e-6;
pub const LJ_SQUARE_BUDGET: usize = 1_000_000;
pub const LJ_SQUARE_REL: f64 = 0.02;
pub const LJ_SIGMOID_BUDGET: usize = 10_000;
pub const LJ_SHELL_TOL: f64 = 0.05;
pub const LJ_NOKDL_REL: f64 = 0.05;
/// Reference energy must agree with the relaxed icosahedron to this.
pub const LJ_REFERENCE_TOL: f64 = 1e-4;

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Criterion {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Criterion {
    /// `PASS name (1.2s): detail`
    pub fn line(&self) -> String {
        format!(
            "{} {} ({:.1}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

pub const CRITERIA: &[&str] = &[
    "gradient_oracle",
    "kernel_exactness",
    "ctl_convergence",
    "dvg02_progress",
    "lj13_trap",
    "lj13_recovery",
    "determinism",
];

/// Runs one named criterion.
pub fn run_criterion(name: &str) -> Option<Criterion> {
    let start = Instant::now();
    let (name, result): (&'static str, Result<(bool, String)>) = match name {
        "gradient_oracle" => ("gradient_oracle", gradient_oracle()),
        "kernel_exactness" => ("kernel_exactness", kernel_exactness()),
        "ctl_convergence" => ("ctl_convergence", ctl_convergence()),
        "dvg02_progress" => ("dvg02_progress", dvg02_progress()),
        "lj13_trap" => ("lj13_trap", lj13_trap()),
        "lj13_recovery" => ("lj13_recovery", lj13_recovery()),
        "determinism" => ("determinism", determinism()),
        _ => return None,
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    Some(Criterion {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_all() -> Vec<Criterion> {
    CRITERIA.iter().filter_map(|n| run_criterion(n)).collect()
}

/// Pair sum written out directly, independent of the layer graph.
fn lj_oracle(flat: &[f64]) -> Result<f64> {
    let n = flat.len() / 3;
    let mut e = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = (0..3)
                .map(|k| (flat[3 * i + k] - flat[3 * j + k]).powi(2))
                .sum::<f64>()
                .sqrt();
            e += 4.0 * (d.powf(-12.0) - d.powf(-6.0));
        }
    }
    Ok(e)
}

/// Worst FD mismatch of a graph gradient over sampled points.
fn worst_gradient_error(
    graph: &crate::funcgraph::LayerGraph,
    points: &[Vec<f64>],
    oracle: impl Fn(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let mut worst = 0.0_f64;
    for x in points {
        let (_, g) = graph.gradient(x)?;
        let fd = fd_gradient(&oracle, x, FD_STEP)?;
        worst = worst.max(relative_gradient_error(&g, &fd));
    }
    Ok(worst)
}

pub fn gradient_oracle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a5d);

    let ctl = ctl_problem();
    let ctl_pts: Vec<Vec<f64>> = (0..GRADIENT_POINTS)
        .map(|_| {
            sample_point(&mut rng, &ctl.sample_box, |x| {
                let h3 = 100.0 - (x[0] * x[0] + x[1] * x[1]).sqrt() / std::f64::consts::PI;
                h3.abs() > KINK_CLEARANCE
                    && x[0].sin().abs() > KINK_CLEARANCE
                    && x[1].sin().abs() > KINK_CLEARANCE
            })
        })
        .collect();
    let e_ctl = worst_gradient_error(&ctl.graph, &ctl_pts, |x| Ok(ctl_closed_form(x[0], x[1])))?;

    let dvg = dvg02_problem();
    let dvg_pts: Vec<Vec<f64>> = (0..GRADIENT_POINTS)
        .map(|_| sample_point(&mut rng, &dvg.sample_box, |_| true))
        .collect();
    let e_dvg = worst_gradient_error(&dvg.graph, &dvg_pts, |x| Ok(dvg02_closed_form(x)))?;

    // jittered icosahedra keep every pair well clear of r = 0
    let base = icosahedron_coords(1.1).flat();
    let lj_pts: Vec<Vec<f64>> = (0..GRADIENT_POINTS)
        .map(|_| {
            let jitter = vec![(-0.15, 0.15); base.len()];
            loop {
                let d = sample_point(&mut rng, &jitter, |_| true);
                let x: Vec<f64> = base.iter().zip(&d).map(|(a, b)| a + b).collect();
                let ok = ClusterGeometry::from_flat(&x, LJ_PAIR_FLOOR)
                    .map(|g| g.min_pair_distance() > 0.8)
                    .unwrap_or(false);
                if ok {
                    break x;
                }
            }
        })
        .collect();
    let geom = ClusterGeometry::from_flat(&lj_pts[0], LJ_PAIR_FLOOR)?;
    let lj = crate::benchmarks::lj13_problem(&geom)?;
    let e_lj = worst_gradient_error(&lj.graph, &lj_pts, lj_oracle)?;

    let passed = e_ctl < GRADIENT_TOL && e_dvg < GRADIENT_TOL && e_lj < GRADIENT_TOL;
    Ok((
        passed,
        format!(
            "worst relative error over {GRADIENT_POINTS} points: ctl {e_ctl:.2e}, dvg02 {e_dvg:.2e}, lj13 {e_lj:.2e} (tol {GRADIENT_TOL:e})"
        ),
    ))
}

pub fn kernel_exactness() -> Result<(bool, String)> {
    let grid: Vec<f64> = (0..=2000).map(|k| -10.0 + 0.01 * k as f64).collect();
    let square = CostConfig::new(KernelKind::Square, 0.0);
    let mut cubic_err = 0.0_f64;
    for &r in &grid {
        let want = 2.0 * r * r * r / 3.0;
        let got = cost_update(r, &square)?;
        let scale = want.abs().max(f64::MIN_POSITIVE);
        cubic_err = cubic_err.max((got - want).abs() / scale);
    }
    let cubic_ok = cubic_err <= 4.0 * f64::EPSILON;

    let mut odd_err = 0.0_f64;
    let mut zero_ok = true;
    for kind in [KernelKind::Square, KernelKind::Sigmoid] {
        let k = CostKernel::new(kind);
        zero_ok &= k.apply(0.0) == 0.0;
        for i in 0..=10_000 {
            let r = 0.01 * i as f64;
            odd_err = odd_err.max((k.apply(-r) + k.apply(r)).abs());
        }
    }
    let odd_ok = odd_err <= ODDNESS_TOL && zero_ok;

    let h = 1e-5;
    let mut logistic_err = 0.0_f64;
    for &r in &grid {
        let fd = (logistic(r + h) - logistic(r - h)) / (2.0 * h);
        let e = (-r).exp();
        let closed = e / ((1.0 + e) * (1.0 + e));
        logistic_err = logistic_err
            .max((fd - closed).abs())
            .max((logistic_derivative(r) - closed).abs());
    }
    let logistic_ok = logistic_err < LOGISTIC_TOL;
    Ok((
        cubic_ok && odd_ok && logistic_ok,
        format!(
            "cubic rel err {cubic_err:.1e} (tol {:.1e}), oddness {odd_err:.1e}, u(0)=0 {zero_ok}, logistic derivative {logistic_err:.1e} (tol {LOGISTIC_TOL:e})",
            4.0 * f64::EPSILON
        ),
    ))
}

fn linf_to_origin(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn ctl_convergence() -> Result<(bool, String)> {
    let mut parts = Vec::new();
    let mut mlpf_all = true;
    let mut taylor_fails = false;
    for k in 0..ctl_problem().canonical_initials.len() {
        for method in [Method::Mlpf, Method::Taylor] {
            let mut cfg = RunConfig::defaults(ProblemName::Ctl, method);
            cfg.initial = InitialPoint::Canonical(k);
            cfg.max_steps = CTL_BUDGET;
            cfg.x_tol = Some(CTL_X_TOL);
            let t = run_experiment(&cfg)?;
            let dist = linf_to_origin(&t.final_point);
            let reached = dist < CTL_X_TOL && t.steps <= CTL_BUDGET;
            match method {
                Method::Mlpf => mlpf_all &= reached,
                Method::Taylor => taylor_fails |= !reached,
            }
            parts.push(format!("{method}#{k} |x|inf={dist:.3e}"));
        }
    }
    Ok((
        mlpf_all && taylor_fails,
        format!(
            "mlpf all reach: {mlpf_all}, taylor fails somewhere: {taylor_fails}; {}",
            parts.join(", ")
        ),
    ))
}

/// First iteration starting a window of `window` steps over which the
/// relative change of `values` stays below `rel` while above `floor`.
pub fn find_stall(rows: &[(usize, f64)], window: usize, rel: f64, floor: f64) -> Option<usize> {
    let mut j = 0;
    for (i, &(it, f)) in rows.iter().enumerate() {
        j = j.max(i);
        while j < rows.len() && rows[j].0 < it + window {
            j += 1;
        }
        if j == rows.len() {
            break;
        }
        let (_, g) = rows[j];
        if f.abs() > floor && ((g - f) / f).abs() < rel {
            return Some(it);
        }
    }
    None
}

pub fn dvg02_progress() -> Result<(bool, String)> {
    let mut cfg = RunConfig::defaults(ProblemName::Dvg02, Method::Mlpf);
    cfg.max_steps = DVG_BUDGET;
    cfg.full_trace = true;
    let t = run_experiment(&cfg)?;
    let f0 = t.rows[0].objective;
    let f1 = t.last().objective;
    let reduced = f1.is_finite() && f1 <= f0 / DVG_REDUCTION;
    let series: Vec<(usize, f64)> = t.rows.iter().map(|r| (r.iteration, r.objective)).collect();
    let stall = find_stall(&series, STALL_WINDOW, STALL_REL_CHANGE, cfg.cost_tol);
    let passed = reduced && stall.is_none() && t.status != Status::Diverged;
    Ok((
        passed,
        format!(
            "f0 {f0:.4e} -> {f1:.4e} after {} steps (x{:.1e}), status {}, stall {:?}",
            t.steps,
            f0 / f1,
            t.status,
            stall
        ),
    ))
}

pub fn lj13_trap() -> Result<(bool, String)> {
    let mut cfg = RunConfig::defaults(ProblemName::Lj13, Method::Taylor);
    cfg.max_steps = LJ_TRAP_STEPS;
    cfg.full_trace = true;
    let t = run_experiment(&cfg)?;
    let e0 = t.rows[0].objective;
    let drift = t
        .rows
        .iter()
        .map(|r| (r.objective - e0).abs())
        .fold(0.0_f64, f64::max);
    Ok((
        drift < LJ_TRAP_TOL && t.steps == LJ_TRAP_STEPS,
        format!(
            "E0 {e0:.10}, max |E - E0| {drift:.2e} over {} steps",
            t.steps
        ),
    ))
}

pub fn lj13_recovery() -> Result<(bool, String)> {
    let reference = relaxed_icosahedron()?.energy;
    let reference_ok = (reference - LJ13_GLOBAL_MINIMUM).abs() < LJ_REFERENCE_TOL;
    let target = LJ13_GLOBAL_MINIMUM;

    let mut square = RunConfig::defaults(ProblemName::Lj13, Method::Mlpf);
    square.max_steps = LJ_SQUARE_BUDGET;
    let ts = run_experiment(&square)?;
    let es = ts.last().objective;
    let square_ok = ((es - target) / target).abs() <= LJ_SQUARE_REL;

    let mut sigmoid = RunConfig::defaults(ProblemName::Lj13, Method::Mlpf);
    sigmoid.kernel = KernelKind::Sigmoid;
    sigmoid.max_steps = LJ_SIGMOID_BUDGET;
    let tg = run_experiment(&sigmoid)?;
    let spread = ClusterGeometry::from_flat(&tg.final_point, 0.0)
        .map(|g| g.shell_spread())
        .unwrap_or(f64::INFINITY);
    let sigmoid_ok = spread <= LJ_SHELL_TOL;

    let mut nokdl = RunConfig::defaults(ProblemName::Lj13, Method::Mlpf);
    nokdl.use_kdl = false;
    nokdl.max_steps = LJ_SQUARE_BUDGET;
    let tn = run_experiment(&nokdl)?;
    let en = tn.last().objective;
    let nokdl_ok = en >= target * (1.0 - LJ_NOKDL_REL);

    Ok((
        reference_ok && square_ok && sigmoid_ok && nokdl_ok,
        format!(
            "reference {reference:.6} ({}); square+kdl E {es:.6} after {} steps ({}); sigmoid+kdl shell spread {spread:.3} after {} steps ({}); square no-kdl E {en:.6} ({})",
            verdict(reference_ok),
            ts.steps,
            verdict(square_ok),
            tg.steps,
            verdict(sigmoid_ok),
            verdict(nokdl_ok)
        ),
    ))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "miss"
    }
}

pub fn determinism() -> Result<(bool, String)> {
    let mut ctl = RunConfig::defaults(ProblemName::Ctl, Method::Mlpf);
    ctl.max_steps = 2_000;
    let mut lj = RunConfig::defaults(ProblemName::Lj13, Method::Mlpf);
    lj.kernel = KernelKind::Sigmoid;
    lj.max_steps = 500;
    let mut dvg = RunConfig::defaults(ProblemName::Dvg02, Method::Mlpf);
    dvg.initial = InitialPoint::Random;
    dvg.rng_seed = 7;
    dvg.max_steps = 2_000;
    let mut same = true;
    for cfg in [&ctl, &lj, &dvg] {
        let a = to_csv(&run_experiment(cfg)?)?;
        let b = to_csv(&run_experiment(cfg)?)?;
        same &= a == b;
    }
    Ok((
        same,
        format!("ctl, lj13 and seeded dvg02 CSV byte-identical: {same}"),
    ))
}
