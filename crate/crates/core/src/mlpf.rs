//! Functional-derivative update machinery and the optimizer loop.
//!
//! An update for an optimized scalar `t` read by layer `i` is assembled as
//!
//! ```text
//! Δ_t = -η · u(ρ_cost) · δF_i · (∂ρ_i/∂t) · (α·t + β)
//! ```
//!
//! where `u` is the cost kernel, `δF_i = ∂ρ_N/∂ρ_i` the layer sensitivity and
//! `(∂ρ_i/∂t)(α·t + β)` the `a·X + b` neuron: the proportional part collapses
//! the functional derivative along `t` to a point, the bias part is the
//! ordinary chain-rule term. The Taylor baseline is plain gradient descent on
//! `X_cost = ρ_cost²`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmarks::BenchmarkProblem;
use crate::error::{Error, Result};
use crate::funcgraph::{Activations, Input, LayerGraph, ProductRule, Workspace};

/// Logistic function `1 / (1 + e^{-ρ})`.
pub fn logistic(rho: f64) -> f64 {
    1.0 / (1.0 + (-rho).exp())
}

/// `e^{-ρ} / (1 + e^{-ρ})²`, the closed-form derivative of [`logistic`].
pub fn logistic_derivative(rho: f64) -> f64 {
    let e = (-rho).exp();
    e / ((1.0 + e) * (1.0 + e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Square cost `ρ²`; update `(2/3)·ρ³`.
    Square,
    /// Sigmoid-derived convex cost; update `2σ(ρ) - 1`.
    Sigmoid,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Square => "square",
            KernelKind::Sigmoid => "sigmoid",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(KernelKind::Square),
            "sigmoid" | "sigmoid_convex" => Ok(KernelKind::Sigmoid),
            other => Err(Error::config("kernel", format!("unknown kernel `{other}`"))),
        }
    }
}

/// Scalar map from the cost residual to `δF_cost`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostKernel {
    pub kind: KernelKind,
}

impl CostKernel {
    pub fn new(kind: KernelKind) -> Self {
        Self { kind }
    }

    /// `u(ρ)`. Odd, strictly increasing, `u(0) = 0`.
    pub fn apply(&self, rho: f64) -> f64 {
        match self.kind {
            KernelKind::Square => 2.0 / 3.0 * rho * rho * rho,
            // 2σ(ρ) - 1 written as tanh(ρ/2) so that oddness is exact
            KernelKind::Sigmoid => (0.5 * rho).tanh(),
        }
    }
}

/// How the residual between `ρ_N` and the target `ρ_0` is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConfig {
    pub kernel: CostKernel,
    pub use_kdl: bool,
    pub kdl_offset: f64,
    pub target: f64,
}

impl CostConfig {
    pub fn new(kind: KernelKind, target: f64) -> Self {
        Self {
            kernel: CostKernel::new(kind),
            use_kdl: false,
            kdl_offset: 1.0,
            target,
        }
    }

    pub fn with_kdl(mut self, offset: f64) -> Self {
        self.use_kdl = true;
        self.kdl_offset = offset;
        self
    }

    /// `ρ_cost`: either `ρ_N - ρ_0` or its KDL form.
    pub fn residual(&self, rho_n: f64) -> Result<f64> {
        if self.use_kdl {
            apply_kdl(rho_n, self.target, self.kdl_offset)
        } else {
            Ok(rho_n - self.target)
        }
    }

    /// `dρ_cost/dρ_N`.
    pub fn residual_slope(&self, rho_n: f64) -> f64 {
        if self.use_kdl {
            1.0 / (rho_n + self.kdl_offset)
        } else {
            1.0
        }
    }
}

/// `log(ρ_N + off) - log(ρ_0 + off)`.
pub fn apply_kdl(rho_n: f64, rho_0: f64, offset: f64) -> Result<f64> {
    let a = rho_n + offset;
    if !(a > 0.0) {
        return Err(Error::KdlDomain {
            name: "rho_n",
            value: rho_n,
            offset,
        });
    }
    let b = rho_0 + offset;
    if !(b > 0.0) {
        return Err(Error::KdlDomain {
            name: "rho_0",
            value: rho_0,
            offset,
        });
    }
    Ok(a.ln() - b.ln())
}

/// `δF_cost = u(ρ_cost)`.
pub fn cost_update(rho_n: f64, cost: &CostConfig) -> Result<f64> {
    Ok(cost.kernel.apply(cost.residual(rho_n)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mlpf,
    Taylor,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mlpf => "mlpf",
            Method::Taylor => "taylor",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlpf" => Ok(Method::Mlpf),
            "taylor" => Ok(Method::Taylor),
            other => Err(Error::config("method", format!("unknown method `{other}`"))),
        }
    }
}

/// What the optimizer moves: the variable vector or the layer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OptimizeVars,
    OptimizeParams,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OptimizeVars => "optimize_vars",
            Mode::OptimizeParams => "optimize_params",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimize_vars" | "vars" => Ok(Mode::OptimizeVars),
            "optimize_params" | "params" => Ok(Mode::OptimizeParams),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub mode: Mode,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_steps: usize,
    /// Stop once `|ρ_N - ρ_0|` drops below this.
    pub cost_tol: f64,
    /// Stop once the update norm drops below this.
    pub step_tol: f64,
    /// Stop once the iterate is this close (max norm) to the known minimizer.
    pub x_tol: Option<f64>,
    pub factorized: bool,
    pub rng_seed: u64,
    /// Keep every k-th row in the trace (first and last rows are always kept).
    pub record_stride: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Mlpf,
            mode: Mode::OptimizeVars,
            eta: 1e-3,
            alpha: 1.0,
            beta: 1.0,
            max_steps: 100_000,
            cost_tol: 1e-12,
            step_tol: 1e-300,
            x_tol: None,
            factorized: false,
            rng_seed: 0,
            record_stride: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::config(
                "eta",
                format!("must be positive, got {}", self.eta),
            ));
        }
        if self.max_steps < 1 {
            return Err(Error::config("max_steps", "must be at least 1"));
        }
        if !(self.cost_tol > 0.0) {
            return Err(Error::config("cost_tol", "must be positive"));
        }
        if !(self.step_tol > 0.0) {
            return Err(Error::config("step_tol", "must be positive"));
        }
        if let Some(t) = self.x_tol {
            if !(t > 0.0) {
                return Err(Error::config("x_tol", "must be positive"));
            }
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::config("alpha", "alpha and beta must be finite"));
        }
        if self.record_stride < 1 {
            return Err(Error::config("record_stride", "must be at least 1"));
        }
        Ok(())
    }
}

/// One optimized scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Var(usize),
    Param { layer: usize, index: usize },
}

/// Signed steps, one per optimized scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateVector {
    pub deltas: Vec<f64>,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl UpdateVector {
    pub fn norm(&self) -> f64 {
        self.deltas.iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.deltas.iter().all(|&d| d == 0.0)
    }
}

/// `δF_i = ∂ρ_N/∂ρ_i` at the given activations; `1` for the output layer.
pub fn layer_sensitivity(
    graph: &LayerGraph,
    x: &[f64],
    acts: &Activations,
    layer: usize,
) -> Result<f64> {
    graph.layer(layer)?;
    Ok(graph.sensitivities(x, acts)?[layer])
}

/// `(∂ρ_i/∂t)·(α·t + β)` for a target read by layer `i`.
///
/// A variable the layer does not read contributes zero.
pub fn neuron_update(
    graph: &LayerGraph,
    x: &[f64],
    acts: &Activations,
    layer: usize,
    target: Target,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let node = graph.layer(layer)?;
    let (partial, t) = match target {
        Target::Var(k) => {
            if k >= graph.variable_dim() {
                return Err(Error::InvalidVariable(k));
            }
            let mut partial = 0.0;
            for (slot, input) in node.inputs.iter().enumerate() {
                if *input == Input::Var(k) {
                    partial += graph.local_input_partial(layer, slot, x, acts)?;
                }
            }
            (partial, x[k])
        }
        Target::Param {
            layer: owner,
            index,
        } => {
            if owner != layer {
                return Err(Error::InvalidParam {
                    layer,
                    param: index,
                });
            }
            let partial = graph.local_param_partial(layer, index, x, acts)?;
            (partial, node.params[index])
        }
    };
    Ok(partial * (alpha * t + beta))
}

/// Stateful stepper holding reusable buffers for one graph.
#[derive(Debug, Clone)]
pub struct Stepper {
    ws: Workspace,
    scratch: Vec<f64>,
}

impl Default for Stepper {
    fn default() -> Self {
        Self::new()
    }
}

/// Result of one evaluation + update computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub rho_n: f64,
    pub rho_cost: f64,
}

impl Stepper {
    pub fn new() -> Self {
        Self {
            ws: Workspace::default(),
            scratch: Vec::new(),
        }
    }

    /// Evaluates the graph at `x` and writes the update into `out`.
    pub fn step(
        &mut self,
        graph: &LayerGraph,
        x: &[f64],
        opt: &OptimizerConfig,
        cost: &CostConfig,
        out: &mut Vec<f64>,
    ) -> Result<StepInfo> {
        let rho_n = graph.forward(x, &mut self.ws)?;
        let rho_cost = cost.residual(rho_n)?;
        let (scale, rule, alpha, beta) = match opt.method {
            Method::Mlpf => {
                let rule = if opt.factorized {
                    ProductRule::FactorNeurons {
                        a: opt.alpha,
                        b: opt.beta,
                    }
                } else {
                    ProductRule::Exact
                };
                (cost.kernel.apply(rho_cost), rule, opt.alpha, opt.beta)
            }
            Method::Taylor => (
                2.0 * rho_cost * cost.residual_slope(rho_n),
                ProductRule::Exact,
                0.0,
                1.0,
            ),
        };
        out.clear();
        if scale == 0.0 {
            let n = match opt.mode {
                Mode::OptimizeVars => graph.variable_dim(),
                Mode::OptimizeParams => graph.param_count(),
            };
            out.resize(n, 0.0);
            return Ok(StepInfo { rho_n, rho_cost });
        }
        graph.backward(x, &mut self.ws, rule)?;
        let factor = -opt.eta * scale;
        match opt.mode {
            Mode::OptimizeVars => {
                out.extend(
                    self.ws
                        .var_grad
                        .iter()
                        .zip(x)
                        .map(|(g, t)| factor * g * (alpha * t + beta)),
                );
            }
            Mode::OptimizeParams => {
                for (id, layer) in graph.layers().iter().enumerate() {
                    self.scratch.clear();
                    self.scratch
                        .extend(layer.inputs.iter().map(|input| match *input {
                            Input::Var(k) => x[k],
                            Input::Layer(j) => self.ws.values[j],
                        }));
                    let adj = self.ws.adjoints[id];
                    for (j, theta) in layer.params.iter().enumerate() {
                        let partial = layer.kind.d_param(&layer.params, &self.scratch, j);
                        out.push(factor * adj * partial * (alpha * theta + beta));
                    }
                }
            }
        }
        if out.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFiniteValue {
                what: "update vector",
            });
        }
        Ok(StepInfo { rho_n, rho_cost })
    }
}

/// MLP_f update for the current point (and the graph's current parameters).
pub fn assemble_update(
    graph: &LayerGraph,
    x: &[f64],
    opt: &OptimizerConfig,
    cost: &CostConfig,
) -> Result<UpdateVector> {
    let opt = OptimizerConfig {
        method: Method::Mlpf,
        ..opt.clone()
    };
    let mut deltas = Vec::new();
    Stepper::new().step(graph, x, &opt, cost, &mut deltas)?;
    Ok(UpdateVector {
        deltas,
        eta: opt.eta,
        alpha: opt.alpha,
        beta: opt.beta,
    })
}

/// Chain-rule gradient-descent step on `X_cost = ρ_cost²`.
pub fn step_taylor(
    graph: &LayerGraph,
    x: &[f64],
    mode: Mode,
    eta: f64,
    cost: &CostConfig,
) -> Result<UpdateVector> {
    let opt = OptimizerConfig {
        method: Method::Taylor,
        mode,
        eta,
        ..OptimizerConfig::default()
    };
    let mut deltas = Vec::new();
    Stepper::new().step(graph, x, &opt, cost, &mut deltas)?;
    Ok(UpdateVector {
        deltas,
        eta,
        alpha: 0.0,
        beta: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxSteps,
    Diverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxSteps => "max_steps",
            Status::Diverged => "diverged",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(Status::Converged),
            "max_steps" => Ok(Status::MaxSteps),
            "diverged" => Ok(Status::Diverged),
            other => Err(Error::TraceFormat(format!("unknown status `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub rho_n: f64,
    pub rho_cost: f64,
    pub objective: f64,
    /// Target vector when it has at most five components, otherwise `[‖t‖₂]`.
    pub targets: Vec<f64>,
}

/// Per-iteration record of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    /// Config echo as ordered `key = value` pairs.
    pub header: Vec<(String, String)>,
    pub rows: Vec<TraceRow>,
    pub status: Status,
    /// Number of updates applied.
    pub steps: usize,
    pub final_point: Vec<f64>,
    pub message: Option<String>,
}

impl OptimizationTrace {
    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("a trace always has its first row")
    }

    /// Whether the targets column holds the full vector.
    pub fn logs_full_targets(&self) -> bool {
        self.final_point.len() <= MAX_LOGGED_DIMS
    }
}

pub const MAX_LOGGED_DIMS: usize = 5;

fn logged_targets(t: &[f64]) -> Vec<f64> {
    if t.len() <= MAX_LOGGED_DIMS {
        t.to_vec()
    } else {
        vec![t.iter().map(|v| v * v).sum::<f64>().sqrt()]
    }
}

/// Iterates the configured method from `initial` until the cost tolerance,
/// step tolerance, optional location tolerance or step budget is hit.
///
/// Numeric failures after the first iteration end the run with status
/// `diverged`; a failure at the initial point is an error.
pub fn run_optimization(
    problem: &BenchmarkProblem,
    initial: &[f64],
    opt: &OptimizerConfig,
    cost: &CostConfig,
) -> Result<OptimizationTrace> {
    opt.validate()?;
    problem.check_initial(initial)?;
    let mut graph = problem.graph.clone();
    let mut t: Vec<f64> = match opt.mode {
        Mode::OptimizeVars => initial.to_vec(),
        Mode::OptimizeParams => graph.params(),
    };
    let x_fixed = initial.to_vec();
    let mut stepper = Stepper::new();
    let mut delta = Vec::new();
    let mut rows = Vec::new();
    let mut pending: Option<TraceRow> = None;
    let mut message = None;
    let mut status = Status::MaxSteps;
    let mut steps = 0;

    for n in 0..=opt.max_steps {
        let x: &[f64] = match opt.mode {
            Mode::OptimizeVars => &t,
            Mode::OptimizeParams => &x_fixed,
        };
        let info = stepper.step(&graph, x, opt, cost, &mut delta);
        let info = match info {
            Ok(info) => info,
            Err(e) if n == 0 => return Err(e),
            Err(e) => {
                status = Status::Diverged;
                message = Some(e.to_string());
                break;
            }
        };
        let row = TraceRow {
            iteration: n,
            rho_n: info.rho_n,
            rho_cost: info.rho_cost,
            objective: info.rho_n,
            targets: logged_targets(&t),
        };
        if n % opt.record_stride == 0 {
            rows.push(row);
            pending = None;
        } else {
            pending = Some(row);
        }

        if (info.rho_n - cost.target).abs() < opt.cost_tol {
            status = Status::Converged;
            break;
        }
        if let (Some(tol), Some(xs), Mode::OptimizeVars) = (
            opt.x_tol,
            problem.global_minimum_location.as_ref(),
            opt.mode,
        ) {
            let dist = t
                .iter()
                .zip(xs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dist < tol {
                status = Status::Converged;
                break;
            }
        }
        if n == opt.max_steps {
            status = Status::MaxSteps;
            break;
        }
        let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm < opt.step_tol {
            status = Status::Converged;
            break;
        }
        for (v, d) in t.iter_mut().zip(&delta) {
            *v += d;
        }
        steps = n + 1;
        if opt.mode == Mode::OptimizeParams {
            graph.set_params(&t)?;
        }
        let radius = t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !radius.is_finite() || radius > problem.divergence_radius {
            status = Status::Diverged;
            message = Some(format!("iterate left the divergence radius ({radius:e})"));
            break;
        }
    }
    if status == Status::Diverged {
        // record the state that ended the run
        if let Ok(v) = graph.eval_forward(match opt.mode {
            Mode::OptimizeVars => &t,
            Mode::OptimizeParams => &x_fixed,
        }) {
            let rc = cost.residual(v).unwrap_or(f64::NAN);
            pending = Some(TraceRow {
                iteration: steps,
                rho_n: v,
                rho_cost: rc,
                objective: v,
                targets: logged_targets(&t),
            });
        }
    }
    if let Some(row) = pending {
        if rows
            .last()
            .is_none_or(|r: &TraceRow| r.iteration < row.iteration)
        {
            rows.push(row);
        }
    }
    Ok(OptimizationTrace {
        header: Vec::new(),
        rows,
        status,
        steps,
        final_point: t,
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcgraph::{GraphBuilder, LayerKind};

    fn square_graph() -> LayerGraph {
        let mut b = GraphBuilder::new(1);
        b.add(LayerKind::Power, &[Input::Var(0)], &[1.0, 2.0], "x^2")
            .unwrap();
        b.build().unwrap()
    }

    #[test]
    fn square_kernel_at_one_is_two_thirds() {
        let cost = CostConfig::new(KernelKind::Square, 0.0);
        assert_eq!(cost_update(1.0, &cost).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn kernels_vanish_at_zero_residual() {
        for kind in [KernelKind::Square, KernelKind::Sigmoid] {
            let cost = CostConfig::new(kind, 3.5);
            assert_eq!(cost_update(3.5, &cost).unwrap(), 0.0);
        }
    }

    #[test]
    fn sigmoid_kernel_saturates_below_one() {
        let k = CostKernel::new(KernelKind::Sigmoid);
        let mut prev = 0.0;
        for rho in [1.0, 5.0, 20.0, 40.0] {
            let u = k.apply(rho);
            assert!(u > prev && u <= 1.0);
            prev = u;
        }
        assert!(k.apply(10.0) < 1.0);
        assert!((k.apply(40.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_kernel_matches_centered_logistic() {
        let k = CostKernel::new(KernelKind::Sigmoid);
        for i in -100..=100 {
            let rho = i as f64 * 0.1;
            assert!((k.apply(rho) - (2.0 * logistic(rho) - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn kdl_examples() {
        assert_eq!(apply_kdl(5.0, 5.0, 1.0).unwrap(), 0.0);
        let v = apply_kdl(std::f64::consts::E - 1.0, 0.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = apply_kdl(-44.0, -44.32, 50.0).unwrap();
        assert!((v - (6.0_f64.ln() - 5.68_f64.ln())).abs() < 1e-12);
        assert!((v - 0.0548).abs() < 1e-4);
    }

    #[test]
    fn kdl_rejects_non_positive_arguments() {
        assert!(matches!(
            apply_kdl(-2.0, 0.0, 1.0),
            Err(Error::KdlDomain { name: "rho_n", .. })
        ));
        assert!(matches!(
            apply_kdl(0.0, -1.0, 1.0),
            Err(Error::KdlDomain { name: "rho_0", .. })
        ));
    }

    #[test]
    fn cost_update_sign_follows_residual() {
        for kind in [KernelKind::Square, KernelKind::Sigmoid] {
            let cost = CostConfig::new(kind, 1.0).with_kdl(2.0);
            assert!(cost_update(1.5, &cost).unwrap() > 0.0);
            assert!(cost_update(0.5, &cost).unwrap() < 0.0);
        }
    }

    #[test]
    fn neuron_update_examples() {
        let mut b = GraphBuilder::new(1);
        b.add(LayerKind::Affine, &[Input::Var(0)], &[2.0, 0.0], "ax")
            .unwrap();
        let g = b.build().unwrap();
        let x = [3.0];
        let acts = g.eval_with_activations(&x).unwrap();
        let a = Target::Param { layer: 0, index: 0 };
        // (∂ρ/∂a)(α·a + β) = 3·(2 + 1)
        assert_eq!(neuron_update(&g, &x, &acts, 0, a, 1.0, 1.0).unwrap(), 9.0);
        // α = 0, β = 1: plain partial
        assert_eq!(neuron_update(&g, &x, &acts, 0, a, 0.0, 1.0).unwrap(), 3.0);
        // t = 0, β = 0
        let x0 = [0.0];
        let acts0 = g.eval_with_activations(&x0).unwrap();
        assert_eq!(
            neuron_update(&g, &x0, &acts0, 0, Target::Var(0), 1.0, 0.0).unwrap(),
            0.0
        );
        assert!(neuron_update(&g, &x, &acts, 0, Target::Var(4), 1.0, 1.0).is_err());
        assert!(neuron_update(
            &g,
            &x,
            &acts,
            0,
            Target::Param { layer: 0, index: 9 },
            1.0,
            1.0
        )
        .is_err());
        assert!(neuron_update(&g, &x, &acts, 2, Target::Var(0), 1.0, 1.0).is_err());
    }

    #[test]
    fn layer_sensitivity_examples() {
        let mut b = GraphBuilder::new(1);
        let l0 = b.sum(&[Input::Var(0)], "x").unwrap();
        b.add(LayerKind::Affine, &[l0], &[2.0, 0.0], "2x").unwrap();
        let g = b.build().unwrap();
        let x = [0.4];
        let acts = g.eval_with_activations(&x).unwrap();
        assert_eq!(layer_sensitivity(&g, &x, &acts, 1).unwrap(), 1.0);
        assert_eq!(layer_sensitivity(&g, &x, &acts, 0).unwrap(), 2.0);
        assert!(layer_sensitivity(&g, &x, &acts, 2).is_err());
    }

    #[test]
    fn assemble_update_single_square_layer() {
        // δF_cost = 2/3, δF_i = 1, ∂ρ/∂x = 2, α = 0, β = 1 → Δx = -4/3
        let g = square_graph();
        let opt = OptimizerConfig {
            eta: 1.0,
            alpha: 0.0,
            beta: 1.0,
            ..OptimizerConfig::default()
        };
        let cost = CostConfig::new(KernelKind::Square, 0.0);
        let u = assemble_update(&g, &[1.0], &opt, &cost).unwrap();
        assert!((u.deltas[0] + 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_gives_zero_update() {
        let g = square_graph();
        let cost = CostConfig::new(KernelKind::Square, 4.0);
        let u = assemble_update(&g, &[2.0], &OptimizerConfig::default(), &cost).unwrap();
        assert!(u.is_zero());
        let u = step_taylor(&g, &[2.0], Mode::OptimizeVars, 0.1, &cost).unwrap();
        assert!(u.is_zero());
    }

    #[test]
    fn taylor_step_on_square() {
        // Δx = -η·2ρ_cost·2x = -4
        let g = square_graph();
        let cost = CostConfig::new(KernelKind::Square, 0.0);
        let u = step_taylor(&g, &[1.0], Mode::OptimizeVars, 1.0, &cost).unwrap();
        assert_eq!(u.deltas, vec![-4.0]);
    }

    #[test]
    fn assembled_update_equals_per_layer_sum() {
        // ρ = sin(x0)·x1² + tanh(x0)
        let mut b = GraphBuilder::new(2);
        let s = b.unary(LayerKind::Sin, Input::Var(0), "s").unwrap();
        let q = b
            .add(LayerKind::Power, &[Input::Var(1)], &[1.0, 2.0], "q")
            .unwrap();
        let p = b.add(LayerKind::Product, &[s, q], &[1.0], "p").unwrap();
        let t = b.unary(LayerKind::Tanh, Input::Var(0), "t").unwrap();
        b.sum(&[p, t], "out").unwrap();
        let g = b.build().unwrap();
        let x = [0.8, -1.3];
        let opt = OptimizerConfig {
            eta: 0.1,
            alpha: 0.7,
            beta: 0.4,
            ..OptimizerConfig::default()
        };
        let cost = CostConfig::new(KernelKind::Sigmoid, -0.2);
        let u = assemble_update(&g, &x, &opt, &cost).unwrap();

        let acts = g.eval_with_activations(&x).unwrap();
        let dcost = cost_update(acts.output(), &cost).unwrap();
        for k in 0..2 {
            let mut sum = 0.0;
            for i in 0..g.len() {
                let s = layer_sensitivity(&g, &x, &acts, i).unwrap();
                sum += s * neuron_update(&g, &x, &acts, i, Target::Var(k), 0.7, 0.4).unwrap();
            }
            let expected = -0.1 * dcost * sum;
            assert!((u.deltas[k] - expected).abs() < 1e-14, "{k}");
        }
    }

    #[test]
    fn param_mode_updates_parameters() {
        // fit a in ρ = a·x at x = 3 towards ρ_0 = 3
        let mut b = GraphBuilder::new(1);
        b.add(LayerKind::Affine, &[Input::Var(0)], &[2.0, 0.0], "ax")
            .unwrap();
        let g = b.build().unwrap();
        let opt = OptimizerConfig {
            mode: Mode::OptimizeParams,
            eta: 0.1,
            alpha: 0.0,
            beta: 1.0,
            ..OptimizerConfig::default()
        };
        let cost = CostConfig::new(KernelKind::Square, 3.0);
        let u = assemble_update(&g, &[3.0], &opt, &cost).unwrap();
        // ρ_cost = 3, u = 18, ∂ρ/∂a = 3, ∂ρ/∂b = 1
        assert!((u.deltas[0] + 0.1 * 18.0 * 3.0).abs() < 1e-12);
        assert!((u.deltas[1] + 0.1 * 18.0).abs() < 1e-12);
    }

    #[test]
    fn optimizer_config_validation() {
        let bad = OptimizerConfig {
            eta: -1.0,
            ..OptimizerConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { field, .. }) if field == "eta"));
        let bad = OptimizerConfig {
            max_steps: 0,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig::default().validate().is_ok());
    }
}
