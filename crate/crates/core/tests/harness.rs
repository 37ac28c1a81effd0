use std::path::Path;

use mlpf_core::benchmarks::{
    lj_energy, ClusterGeometry, ProblemName, DVG02_OPTIMUM, LJ_PAIR_FLOOR,
};
use mlpf_core::harness::config::{parse_config, InitialPoint, RunConfig, TraceFileFormat};
use mlpf_core::harness::experiment::{compare_methods, run_and_write, run_experiment, summary_csv};
use mlpf_core::harness::trace_io::{from_csv, from_json, read_trace, to_csv, to_json};
use mlpf_core::mlpf::{KernelKind, Method, OptimizationTrace, Status, TraceRow};
use mlpf_core::Error;
use proptest::prelude::*;

/// Bit equality, except that every NaN matches every NaN.
fn same(x: f64, y: f64) -> bool {
    x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan())
}

fn same_bits(a: &OptimizationTrace, b: &OptimizationTrace) -> bool {
    let rows = a.rows.len() == b.rows.len()
        && a.rows.iter().zip(&b.rows).all(|(r, s)| {
            r.iteration == s.iteration
                && same(r.rho_n, s.rho_n)
                && same(r.rho_cost, s.rho_cost)
                && same(r.objective, s.objective)
                && r.targets.len() == s.targets.len()
                && r.targets.iter().zip(&s.targets).all(|(x, y)| same(*x, *y))
        });
    rows && a.header == b.header
        && a.status == b.status
        && a.steps == b.steps
        && a.message == b.message
        && a.final_point.len() == b.final_point.len()
        && a.final_point
            .iter()
            .zip(&b.final_point)
            .all(|(x, y)| same(*x, *y))
}

#[test]
fn full_lj_config_round_trips() {
    let text = "\
problem = lj13
method = mlpf
kernel = sigmoid
use_kdl = true
kdl_offset = 50
eta = 1e-4
alpha = 1
beta = 1
factorized = false
max_steps = 10000
cost_tol = 1e-12
step_tol = 1e-300
x_tol = none
initial = lj_seed:3
rng_seed = 7
record_stride = 10
full_trace = true
format = json
output = sig.json
";
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.kernel, KernelKind::Sigmoid);
    assert_eq!(cfg.initial, InitialPoint::LjSeed(3));
    assert_eq!(cfg.format, TraceFileFormat::Json);
    assert_eq!(parse_config(&cfg.emit()).unwrap(), cfg);
}

#[test]
fn minimal_config_uses_problem_defaults() {
    let cfg = parse_config("problem = dvg02\n").unwrap();
    assert_eq!(cfg, RunConfig::defaults(ProblemName::Dvg02, Method::Mlpf));
    let cfg = parse_config("# comment only\nproblem = ctl\nmethod = taylor\n").unwrap();
    assert_eq!(cfg, RunConfig::defaults(ProblemName::Ctl, Method::Taylor));
}

#[test]
fn config_errors_carry_line_numbers() {
    match parse_config("problem = ctl\n\neta = -1\n") {
        Err(Error::Parse { line: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    match parse_config("problem = ctl\nlearning_rate = 1\n") {
        Err(Error::Parse { line: 2, .. }) => {}
        other => panic!("{other:?}"),
    }
    match parse_config("problem ctl\n") {
        Err(Error::Parse { line: 1, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap();
        n += 1;
    }
    assert!(n >= 9);
}

#[test]
fn run_from_dvg02_optimum_converges_at_zero() {
    let mut cfg = RunConfig::defaults(ProblemName::Dvg02, Method::Mlpf);
    cfg.initial = InitialPoint::Explicit(DVG02_OPTIMUM.to_vec());
    let t = run_experiment(&cfg).unwrap();
    assert_eq!(t.status, Status::Converged);
    assert_eq!(t.steps, 0);
}

#[test]
fn lj_taylor_stops_at_max_steps_and_objective_is_pair_energy() {
    let mut cfg = RunConfig::defaults(ProblemName::Lj13, Method::Taylor);
    cfg.max_steps = 300;
    let t = run_experiment(&cfg).unwrap();
    assert_eq!(t.status, Status::MaxSteps);
    assert_eq!(t.steps, 300);
    let g = ClusterGeometry::from_flat(&t.final_point, LJ_PAIR_FLOOR).unwrap();
    let e = lj_energy(&g).unwrap();
    assert!((t.last().objective - e).abs() <= 1e-9 * e.abs());
}

#[test]
fn written_traces_are_byte_identical_and_readable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::defaults(ProblemName::Ctl, Method::Mlpf);
    cfg.max_steps = 500;
    for format in [TraceFileFormat::Csv, TraceFileFormat::Json] {
        cfg.format = format;
        let (t, a) = run_and_write(&cfg, &dir.path().join("a")).unwrap();
        let (_, b) = run_and_write(&cfg, &dir.path().join("b")).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert!(same_bits(&read_trace(&a).unwrap(), &t));
    }
}

#[test]
fn compare_with_no_initials_is_empty() {
    let cfg = RunConfig::defaults(ProblemName::Ctl, Method::Mlpf);
    assert!(compare_methods(&cfg, &[], 2, None).unwrap().is_empty());
}

#[test]
fn compare_summary_matches_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::defaults(ProblemName::Ctl, Method::Mlpf);
    cfg.max_steps = 200;
    let initials = [
        InitialPoint::Canonical(0),
        InitialPoint::Explicit(vec![0.5, -0.25]),
    ];
    let rows = compare_methods(&cfg, &initials, 3, Some(dir.path())).unwrap();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        let t = read_trace(&dir.path().join(&r.trace_file)).unwrap();
        assert_eq!(r.status, t.status.to_string());
        assert_eq!(r.steps, t.steps);
        assert_eq!(r.final_objective.to_bits(), t.last().objective.to_bits());
    }
    // same cells in the same order regardless of thread count
    let again = compare_methods(&cfg, &initials, 1, None).unwrap();
    for (a, b) in rows.iter().zip(&again) {
        assert_eq!(
            (&a.label, &a.initial, &a.status, a.steps),
            (&b.label, &b.initial, &b.status, b.steps)
        );
    }
    assert!(summary_csv(&rows).unwrap().starts_with("label,"));
}

fn arb_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => any::<f64>(),
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
        1 => Just(-0.0),
    ]
}

fn arb_trace() -> impl Strategy<Value = OptimizationTrace> {
    (1usize..6, 1usize..20).prop_flat_map(|(width, len)| {
        (
            proptest::collection::vec(
                (
                    arb_f64(),
                    arb_f64(),
                    arb_f64(),
                    proptest::collection::vec(arb_f64(), width),
                ),
                len,
            ),
            proptest::collection::vec(arb_f64(), width),
            prop_oneof![
                Just(Status::Converged),
                Just(Status::MaxSteps),
                Just(Status::Diverged)
            ],
            proptest::option::of("[a-z]([a-z ]{0,18}[a-z])?"),
        )
            .prop_map(
                move |(rows, final_point, status, message)| OptimizationTrace {
                    header: vec![
                        ("problem".into(), "ctl".into()),
                        ("eta".into(), "0.001".into()),
                    ],
                    steps: rows.len() - 1,
                    rows: rows
                        .into_iter()
                        .enumerate()
                        .map(|(k, (rho_n, rho_cost, objective, targets))| TraceRow {
                            iteration: k,
                            rho_n,
                            rho_cost,
                            objective,
                            targets,
                        })
                        .collect(),
                    status,
                    final_point,
                    message,
                },
            )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(t in arb_trace()) {
        let bytes = to_csv(&t).unwrap();
        let back = from_csv(std::str::from_utf8(&bytes).unwrap()).unwrap();
        prop_assert!(same_bits(&t, &back));
        prop_assert_eq!(to_csv(&back).unwrap(), bytes);
    }

    #[test]
    fn json_round_trip_is_exact(t in arb_trace()) {
        let bytes = to_json(&t).unwrap();
        let back = from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
        prop_assert!(same_bits(&t, &back));
        prop_assert_eq!(to_json(&back).unwrap(), bytes);
    }
}
