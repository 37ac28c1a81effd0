//! Layered representation of a continuous objective.
//!
//! An objective `ρ_N(x)` is stored as an ordered list of scalar layers. Each
//! layer reads the variable vector `x` and/or the outputs of earlier layers,
//! carries its own parameter block `θ_i`, and knows its analytic partial
//! derivatives with respect to both. Layer ids are 0-based positions in the
//! list; the last layer is the objective.

use crate::error::{Error, Result};

/// Where a layer reads one of its inputs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    /// Component `k` of the variable vector.
    Var(usize),
    /// Output of an earlier layer.
    Layer(usize),
}

/// Elementary layer kinds.
///
/// Parameter layouts:
///
/// * `Affine`: `[a_1, .., a_m, b]`, `ρ = Σ a_k u_k + b`
/// * `Power`: `[c, p]`, `ρ = c·u^p`
/// * `Product`: `[c]`, `ρ = c·Π u_k`
/// * unary maps (`Sin`, `Cos`, `Tanh`, `Exp`, `Log`, `Sqrt`, `Abs`,
///   `Reciprocal`): `[w, b]`, `ρ = f(w·u + b)`
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Affine,
    Power,
    Product,
    Sin,
    Cos,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
    Reciprocal,
}

/// Sign with `sign(0) = 0`; used as the subgradient of `|·|`.
#[inline]
pub fn sign0(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn as_small_int(p: f64) -> Option<i32> {
    if p.fract() == 0.0 && p.abs() <= 64.0 {
        Some(p as i32)
    } else {
        None
    }
}

#[inline]
fn pow(u: f64, p: f64) -> f64 {
    match as_small_int(p) {
        Some(n) => u.powi(n),
        None => u.powf(p),
    }
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Affine => "affine",
            LayerKind::Power => "power",
            LayerKind::Product => "product",
            LayerKind::Sin => "sin",
            LayerKind::Cos => "cos",
            LayerKind::Tanh => "tanh",
            LayerKind::Exp => "exp",
            LayerKind::Log => "log",
            LayerKind::Sqrt => "sqrt",
            LayerKind::Abs => "abs",
            LayerKind::Reciprocal => "reciprocal",
        }
    }

    fn is_unary_map(self) -> bool {
        !matches!(
            self,
            LayerKind::Affine | LayerKind::Power | LayerKind::Product
        )
    }

    fn expected_params(self, n_inputs: usize) -> usize {
        match self {
            LayerKind::Affine => n_inputs + 1,
            LayerKind::Product => 1,
            _ => 2,
        }
    }

    fn map(self, z: f64) -> f64 {
        match self {
            LayerKind::Sin => z.sin(),
            LayerKind::Cos => z.cos(),
            LayerKind::Tanh => z.tanh(),
            LayerKind::Exp => z.exp(),
            LayerKind::Log => z.ln(),
            LayerKind::Sqrt => z.sqrt(),
            LayerKind::Abs => z.abs(),
            LayerKind::Reciprocal => 1.0 / z,
            _ => unreachable!("not a unary map"),
        }
    }

    fn map_derivative(self, z: f64) -> f64 {
        match self {
            LayerKind::Sin => z.cos(),
            LayerKind::Cos => -z.sin(),
            LayerKind::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            LayerKind::Exp => z.exp(),
            LayerKind::Log => 1.0 / z,
            LayerKind::Sqrt => 0.5 / z.sqrt(),
            LayerKind::Abs => sign0(z),
            LayerKind::Reciprocal => -1.0 / (z * z),
            _ => unreachable!("not a unary map"),
        }
    }

    /// Layer value for the given parameters and gathered inputs.
    pub fn eval(self, params: &[f64], inputs: &[f64]) -> f64 {
        match self {
            LayerKind::Affine => {
                let m = inputs.len();
                inputs
                    .iter()
                    .zip(&params[..m])
                    .map(|(u, a)| a * u)
                    .sum::<f64>()
                    + params[m]
            }
            LayerKind::Power => params[0] * pow(inputs[0], params[1]),
            LayerKind::Product => params[0] * inputs.iter().product::<f64>(),
            _ => self.map(params[0] * inputs[0] + params[1]),
        }
    }

    /// `∂ρ/∂u_k`.
    pub fn d_input(self, params: &[f64], inputs: &[f64], k: usize) -> f64 {
        match self {
            LayerKind::Affine => params[k],
            LayerKind::Power => {
                let (c, p) = (params[0], params[1]);
                if p == 0.0 {
                    0.0
                } else {
                    c * p * pow(inputs[0], p - 1.0)
                }
            }
            LayerKind::Product => {
                let rest: f64 = inputs
                    .iter()
                    .enumerate()
                    .filter(|&(l, _)| l != k)
                    .map(|(_, u)| u)
                    .product();
                params[0] * rest
            }
            _ => params[0] * self.map_derivative(params[0] * inputs[0] + params[1]),
        }
    }

    /// `∂ρ/∂θ_j`.
    pub fn d_param(self, params: &[f64], inputs: &[f64], j: usize) -> f64 {
        match self {
            LayerKind::Affine => {
                if j < inputs.len() {
                    inputs[j]
                } else {
                    1.0
                }
            }
            LayerKind::Power => {
                let (c, p) = (params[0], params[1]);
                let u = inputs[0];
                if j == 0 {
                    pow(u, p)
                } else if u == 0.0 && p > 0.0 {
                    0.0
                } else {
                    c * pow(u, p) * u.ln()
                }
            }
            LayerKind::Product => inputs.iter().product(),
            _ => {
                let z = params[0] * inputs[0] + params[1];
                let d = self.map_derivative(z);
                if j == 0 {
                    inputs[0] * d
                } else {
                    d
                }
            }
        }
    }
}

/// One layer `ρ_i(inputs; θ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNode {
    pub kind: LayerKind,
    pub inputs: Vec<Input>,
    pub params: Vec<f64>,
    pub label: String,
}

impl LayerNode {
    /// Multiplicative sub-terms of a product layer.
    pub fn factors(&self) -> Option<&[Input]> {
        (self.kind == LayerKind::Product && self.inputs.len() >= 2).then_some(&self.inputs[..])
    }
}

/// Per-layer values `ρ_1..ρ_N` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    values: Vec<f64>,
}

impl Activations {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layer(&self, id: usize) -> Option<f64> {
        self.values.get(id).copied()
    }

    pub fn output(&self) -> f64 {
        *self.values.last().expect("activations are never empty")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Reusable buffers for allocation-free forward and backward sweeps.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub values: Vec<f64>,
    pub adjoints: Vec<f64>,
    pub var_grad: Vec<f64>,
    scratch: Vec<f64>,
}

/// Backward propagation rule through product layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProductRule {
    /// Ordinary chain rule.
    Exact,
    /// Each factor `g` of a product layer is treated as its own `a·g + b`
    /// neuron: the local derivative `∂ρ/∂g` is scaled by `(a·g + b)`.
    FactorNeurons { a: f64, b: f64 },
}

/// An objective as an ordered hierarchy of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGraph {
    variable_dim: usize,
    layers: Vec<LayerNode>,
}

/// Incremental, validating constructor for [`LayerGraph`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    variable_dim: usize,
    layers: Vec<LayerNode>,
}

impl GraphBuilder {
    pub fn new(variable_dim: usize) -> Self {
        Self {
            variable_dim,
            layers: Vec::new(),
        }
    }

    /// Appends a layer and returns a handle to its output.
    pub fn add(
        &mut self,
        kind: LayerKind,
        inputs: &[Input],
        params: &[f64],
        label: impl Into<String>,
    ) -> Result<Input> {
        let id = self.layers.len();
        let arity_ok = match kind {
            LayerKind::Affine | LayerKind::Product => !inputs.is_empty(),
            _ => inputs.len() == 1,
        };
        if !arity_ok {
            return Err(Error::InputCount {
                layer: id,
                kind: kind.name(),
                expected: if kind.is_unary_map() || kind == LayerKind::Power {
                    "1".into()
                } else {
                    "at least 1".into()
                },
                got: inputs.len(),
            });
        }
        let expected = kind.expected_params(inputs.len());
        if params.len() != expected {
            return Err(Error::ParamCount {
                layer: id,
                kind: kind.name(),
                expected,
                got: params.len(),
            });
        }
        for input in inputs {
            let ok = match *input {
                Input::Var(k) => k < self.variable_dim,
                Input::Layer(j) => j < id,
            };
            if !ok {
                return Err(Error::Topology {
                    layer: id,
                    reference: format!("{input:?}"),
                });
            }
        }
        self.layers.push(LayerNode {
            kind,
            inputs: inputs.to_vec(),
            params: params.to_vec(),
            label: label.into(),
        });
        Ok(Input::Layer(id))
    }

    /// `Σ u_k`.
    pub fn sum(&mut self, inputs: &[Input], label: impl Into<String>) -> Result<Input> {
        let mut params = vec![1.0; inputs.len()];
        params.push(0.0);
        self.add(LayerKind::Affine, inputs, &params, label)
    }

    /// `f(u)` for a unary map with unit scale and zero shift.
    pub fn unary(
        &mut self,
        kind: LayerKind,
        input: Input,
        label: impl Into<String>,
    ) -> Result<Input> {
        self.add(kind, &[input], &[1.0, 0.0], label)
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn build(self) -> Result<LayerGraph> {
        if self.layers.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Ok(LayerGraph {
            variable_dim: self.variable_dim,
            layers: self.layers,
        })
    }
}

impl LayerGraph {
    pub fn variable_dim(&self) -> usize {
        self.variable_dim
    }

    pub fn layers(&self) -> &[LayerNode] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Id of the output layer `ρ_N`.
    pub fn output_id(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, id: usize) -> Result<&LayerNode> {
        self.layers.get(id).ok_or(Error::InvalidLayer(id))
    }

    /// Total number of scalar parameters over all layers.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }

    /// All parameters, concatenated layer by layer.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.params.iter().copied())
            .collect()
    }

    /// Replaces all parameters from a flat vector in [`LayerGraph::params`] order.
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let n = layer.params.len();
            layer.params.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// `(layer, param)` pairs in flat parameter order.
    pub fn param_index(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| (0..l.params.len()).map(move |j| (i, j)))
            .collect()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.variable_dim {
            return Err(Error::Dimension {
                expected: self.variable_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn gather(layer: &LayerNode, x: &[f64], values: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(layer.inputs.iter().map(|input| match *input {
            Input::Var(k) => x[k],
            Input::Layer(j) => values[j],
        }));
    }

    /// Forward sweep into a workspace; returns `ρ_N`.
    pub fn forward(&self, x: &[f64], ws: &mut Workspace) -> Result<f64> {
        self.check_dim(x)?;
        ws.values.clear();
        ws.values.reserve(self.layers.len());
        for (id, layer) in self.layers.iter().enumerate() {
            Self::gather(layer, x, &ws.values, &mut ws.scratch);
            let v = layer.kind.eval(&layer.params, &ws.scratch);
            if !v.is_finite() {
                return Err(Error::NonFinite { layer: id });
            }
            ws.values.push(v);
        }
        Ok(*ws.values.last().unwrap())
    }

    /// Backward sweep after [`LayerGraph::forward`]: fills `ws.adjoints`
    /// with `∂ρ_N/∂ρ_i` and `ws.var_grad` with `∂ρ_N/∂x`.
    pub fn backward(&self, x: &[f64], ws: &mut Workspace, rule: ProductRule) -> Result<()> {
        let n = self.layers.len();
        ws.adjoints.clear();
        ws.adjoints.resize(n, 0.0);
        ws.var_grad.clear();
        ws.var_grad.resize(self.variable_dim, 0.0);
        ws.adjoints[n - 1] = 1.0;
        for id in (0..n).rev() {
            let adj = ws.adjoints[id];
            if adj == 0.0 {
                continue;
            }
            let layer = &self.layers[id];
            Self::gather(layer, x, &ws.values, &mut ws.scratch);
            for (k, input) in layer.inputs.iter().enumerate() {
                let mut local = layer.kind.d_input(&layer.params, &ws.scratch, k);
                if let (ProductRule::FactorNeurons { a, b }, Some(_)) = (rule, layer.factors()) {
                    local *= a * ws.scratch[k] + b;
                }
                let contrib = adj * local;
                if !contrib.is_finite() {
                    return Err(Error::NonFinite { layer: id });
                }
                match *input {
                    Input::Var(v) => ws.var_grad[v] += contrib,
                    Input::Layer(j) => ws.adjoints[j] += contrib,
                }
            }
        }
        Ok(())
    }

    /// `ρ_N(x; θ)`.
    pub fn eval_forward(&self, x: &[f64]) -> Result<f64> {
        let mut ws = Workspace::default();
        self.forward(x, &mut ws)
    }

    /// All layer values; the last entry is bit-identical to [`LayerGraph::eval_forward`].
    pub fn eval_with_activations(&self, x: &[f64]) -> Result<Activations> {
        let mut ws = Workspace::default();
        self.forward(x, &mut ws)?;
        Ok(Activations { values: ws.values })
    }

    /// Layer inputs gathered from `x` and a set of activations.
    pub fn layer_inputs(&self, id: usize, x: &[f64], acts: &Activations) -> Result<Vec<f64>> {
        let layer = self.layer(id)?;
        let mut buf = Vec::with_capacity(layer.inputs.len());
        Self::gather(layer, x, &acts.values, &mut buf);
        Ok(buf)
    }

    /// Local `∂ρ_i/∂θ_ij` at the given activations.
    pub fn local_param_partial(
        &self,
        id: usize,
        param: usize,
        x: &[f64],
        acts: &Activations,
    ) -> Result<f64> {
        let layer = self.layer(id)?;
        if param >= layer.params.len() {
            return Err(Error::InvalidParam { layer: id, param });
        }
        let inputs = self.layer_inputs(id, x, acts)?;
        let d = layer.kind.d_param(&layer.params, &inputs, param);
        if !d.is_finite() {
            return Err(Error::NonFinite { layer: id });
        }
        Ok(d)
    }

    /// Local `∂ρ_i/∂u_k` for input slot `k` at the given activations.
    pub fn local_input_partial(
        &self,
        id: usize,
        input: usize,
        x: &[f64],
        acts: &Activations,
    ) -> Result<f64> {
        let layer = self.layer(id)?;
        if input >= layer.inputs.len() {
            return Err(Error::InvalidInput { layer: id, input });
        }
        let inputs = self.layer_inputs(id, x, acts)?;
        let d = layer.kind.d_input(&layer.params, &inputs, input);
        if !d.is_finite() {
            return Err(Error::NonFinite { layer: id });
        }
        Ok(d)
    }

    /// `∂ρ_i/∂θ_ij` at `x`.
    pub fn partial_wrt_param(&self, id: usize, param: usize, x: &[f64]) -> Result<f64> {
        self.layer(id)?;
        let acts = self.eval_with_activations(x)?;
        self.local_param_partial(id, param, x, &acts)
    }

    /// `∂ρ_i/∂u_k` at `x`, where `k` indexes the layer's input slots.
    pub fn partial_wrt_input(&self, id: usize, input: usize, x: &[f64]) -> Result<f64> {
        self.layer(id)?;
        let acts = self.eval_with_activations(x)?;
        self.local_input_partial(id, input, x, &acts)
    }

    /// Chain-composed `∂ρ_N/∂ρ_i` for every layer.
    pub fn sensitivities(&self, x: &[f64], acts: &Activations) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if acts.len() != self.layers.len() {
            return Err(Error::Dimension {
                expected: self.layers.len(),
                got: acts.len(),
            });
        }
        let mut ws = Workspace {
            values: acts.values.clone(),
            ..Workspace::default()
        };
        self.backward(x, &mut ws, ProductRule::Exact)?;
        Ok(ws.adjoints)
    }

    /// `(ρ_N, ∇_x ρ_N)`.
    pub fn gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut ws = Workspace::default();
        let value = self.forward(x, &mut ws)?;
        self.backward(x, &mut ws, ProductRule::Exact)?;
        Ok((value, ws.var_grad))
    }

    /// `∇_θ ρ_N` in flat parameter order.
    pub fn param_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut ws = Workspace::default();
        self.forward(x, &mut ws)?;
        self.backward(x, &mut ws, ProductRule::Exact)?;
        let mut out = Vec::with_capacity(self.param_count());
        let mut buf = Vec::new();
        for (id, layer) in self.layers.iter().enumerate() {
            Self::gather(layer, x, &ws.values, &mut buf);
            for j in 0..layer.params.len() {
                let d = ws.adjoints[id] * layer.kind.d_param(&layer.params, &buf, j);
                if !d.is_finite() {
                    return Err(Error::NonFinite { layer: id });
                }
                out.push(d);
            }
        }
        Ok(out)
    }
}

/// Central-difference gradient of `objective` at `x` with step `h`.
///
/// Verification only; the optimizers never call it.
pub fn fd_gradient<F>(objective: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::config(
            "h",
            "finite-difference step must be positive",
        ));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = x[k] + h;
        let plus = objective(&probe)?;
        probe[k] = x[k] - h;
        let minus = objective(&probe)?;
        probe[k] = x[k];
        let g = (plus - minus) / (2.0 * h);
        if !g.is_finite() {
            return Err(Error::NonFiniteValue {
                what: "finite-difference gradient",
            });
        }
        grad.push(g);
    }
    Ok(grad)
}

/// `max_k |a_k - b_k| / max(1, max_k |a_k|)`.
pub fn relative_gradient_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = analytic.iter().fold(1.0_f64, |m, g| m.max(g.abs()));
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> LayerGraph {
        // ρ = a·x with a = 2
        let mut b = GraphBuilder::new(1);
        b.add(LayerKind::Affine, &[Input::Var(0)], &[2.0, 0.0], "ax")
            .unwrap();
        b.build().unwrap()
    }

    #[test]
    fn linear_layer_param_partial_is_input() {
        let g = linear();
        assert_eq!(g.partial_wrt_param(0, 0, &[3.0]).unwrap(), 3.0);
        assert_eq!(g.partial_wrt_param(0, 1, &[3.0]).unwrap(), 1.0);
    }

    #[test]
    fn identity_layer_input_partial_is_one() {
        let mut b = GraphBuilder::new(1);
        b.sum(&[Input::Var(0)], "id").unwrap();
        let g = b.build().unwrap();
        assert_eq!(g.partial_wrt_input(0, 0, &[0.7]).unwrap(), 1.0);
    }

    #[test]
    fn abs_subgradient_at_zero() {
        // d/dh exp(|h|) at h = 0 with sign(0) = 0
        let mut b = GraphBuilder::new(1);
        let a = b.unary(LayerKind::Abs, Input::Var(0), "abs").unwrap();
        b.unary(LayerKind::Exp, a, "exp").unwrap();
        let g = b.build().unwrap();
        let (_, grad) = g.gradient(&[0.0]).unwrap();
        assert_eq!(grad[0], 0.0);
        assert_eq!(g.partial_wrt_input(0, 0, &[0.0]).unwrap(), 0.0);
        assert_eq!(g.partial_wrt_input(1, 0, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn power_partial_fractional_exponent() {
        // x^0.1 at x = 1.27
        let mut b = GraphBuilder::new(1);
        b.add(LayerKind::Power, &[Input::Var(0)], &[1.0, 0.1], "pow")
            .unwrap();
        let g = b.build().unwrap();
        let d = g.partial_wrt_input(0, 0, &[1.27]).unwrap();
        let fd = fd_gradient(|x| g.eval_forward(x), &[1.27], 1e-6).unwrap()[0];
        assert!((d - 0.1 * 1.27_f64.powf(-0.9)).abs() < 1e-15);
        assert!((d - fd).abs() < 1e-9);
    }

    #[test]
    fn every_kind_matches_finite_differences() {
        use LayerKind::*;
        let cases: &[(LayerKind, &[f64], &[f64])] = &[
            (Affine, &[0.3, -1.7], &[1.5, -0.5, 0.25]),
            (Power, &[1.3], &[0.8, 2.5]),
            (Power, &[-0.9], &[2.0, 3.0]),
            (Product, &[0.4, -1.1, 2.2], &[1.5]),
            (Sin, &[0.7], &[1.3, 0.2]),
            (Cos, &[0.7], &[1.3, 0.2]),
            (Tanh, &[0.7], &[1.3, 0.2]),
            (Exp, &[0.7], &[1.3, 0.2]),
            (Log, &[0.7], &[1.3, 0.2]),
            (Sqrt, &[0.7], &[1.3, 0.2]),
            (Abs, &[-0.7], &[1.3, 0.2]),
            (Reciprocal, &[0.7], &[1.3, 0.2]),
        ];
        let h = 1e-6;
        for &(kind, inputs, params) in cases {
            for k in 0..inputs.len() {
                let mut p = inputs.to_vec();
                p[k] += h;
                let plus = kind.eval(params, &p);
                p[k] -= 2.0 * h;
                let minus = kind.eval(params, &p);
                let fd = (plus - minus) / (2.0 * h);
                let an = kind.d_input(params, inputs, k);
                assert!(
                    (an - fd).abs() < 1e-7 * an.abs().max(1.0),
                    "{kind:?} input {k}"
                );
            }
            // u^p has no exponent derivative for negative u
            let skip_exponent = kind == Power && inputs[0] < 0.0;
            for j in 0..params.len() {
                if skip_exponent && j == 1 {
                    continue;
                }
                let mut p = params.to_vec();
                p[j] += h;
                let plus = kind.eval(&p, inputs);
                p[j] -= 2.0 * h;
                let minus = kind.eval(&p, inputs);
                let fd = (plus - minus) / (2.0 * h);
                let an = kind.d_param(params, inputs, j);
                assert!(
                    (an - fd).abs() < 1e-7 * an.abs().max(1.0),
                    "{kind:?} param {j}"
                );
            }
        }
    }

    #[test]
    fn builder_rejects_forward_references() {
        let mut b = GraphBuilder::new(2);
        let err = b
            .add(LayerKind::Sin, &[Input::Layer(0)], &[1.0, 0.0], "bad")
            .unwrap_err();
        assert!(matches!(err, Error::Topology { layer: 0, .. }));
        let err = b
            .add(LayerKind::Sin, &[Input::Var(2)], &[1.0, 0.0], "bad")
            .unwrap_err();
        assert!(matches!(err, Error::Topology { .. }));
    }

    #[test]
    fn builder_checks_param_count() {
        let mut b = GraphBuilder::new(1);
        let err = b
            .add(LayerKind::Affine, &[Input::Var(0)], &[1.0], "x")
            .unwrap_err();
        assert!(matches!(
            err,
            Error::ParamCount {
                expected: 2,
                got: 1,
                ..
            }
        ));
        assert!(matches!(
            GraphBuilder::new(1).build(),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn non_finite_value_names_layer() {
        let mut b = GraphBuilder::new(1);
        let s = b.sum(&[Input::Var(0)], "x").unwrap();
        b.unary(LayerKind::Reciprocal, s, "1/x").unwrap();
        let g = b.build().unwrap();
        assert!(matches!(
            g.eval_forward(&[0.0]),
            Err(Error::NonFinite { layer: 1 })
        ));
    }

    #[test]
    fn invalid_ids_are_errors() {
        let g = linear();
        assert!(matches!(
            g.partial_wrt_param(3, 0, &[1.0]),
            Err(Error::InvalidLayer(3))
        ));
        assert!(matches!(
            g.partial_wrt_param(0, 5, &[1.0]),
            Err(Error::InvalidParam { layer: 0, param: 5 })
        ));
        assert!(matches!(
            g.partial_wrt_input(0, 1, &[1.0]),
            Err(Error::InvalidInput { layer: 0, input: 1 })
        ));
        assert!(matches!(
            g.eval_forward(&[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn activations_output_matches_forward_bitwise() {
        let mut b = GraphBuilder::new(2);
        let s = b.unary(LayerKind::Sin, Input::Var(0), "s").unwrap();
        let t = b.unary(LayerKind::Tanh, Input::Var(1), "t").unwrap();
        b.add(LayerKind::Product, &[s, t], &[3.0], "p").unwrap();
        let g = b.build().unwrap();
        let x = [0.37, -1.2];
        let acts = g.eval_with_activations(&x).unwrap();
        assert_eq!(acts.len(), 3);
        assert_eq!(
            acts.output().to_bits(),
            g.eval_forward(&x).unwrap().to_bits()
        );
    }

    #[test]
    fn factor_neurons_reduce_to_chain_rule_for_zero_a_unit_b() {
        let mut b = GraphBuilder::new(2);
        let s = b.unary(LayerKind::Sin, Input::Var(0), "s").unwrap();
        let t = b.unary(LayerKind::Exp, Input::Var(1), "e").unwrap();
        b.add(LayerKind::Product, &[s, t], &[1.0], "p").unwrap();
        let g = b.build().unwrap();
        let x = [0.9, -0.4];
        let mut ws = Workspace::default();
        g.forward(&x, &mut ws).unwrap();
        g.backward(&x, &mut ws, ProductRule::Exact).unwrap();
        let exact = ws.var_grad.clone();
        g.backward(&x, &mut ws, ProductRule::FactorNeurons { a: 0.0, b: 1.0 })
            .unwrap();
        for (e, f) in exact.iter().zip(&ws.var_grad) {
            assert!((e - f).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }

    #[test]
    fn fd_gradient_of_square() {
        let g = fd_gradient(|x| Ok(x[0] * x[0]), &[2.0], 1e-5).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!(fd_gradient(|x| Ok(x[0]), &[2.0], 0.0).is_err());
        assert!(fd_gradient(|_| Ok(f64::NAN), &[2.0], 1e-5).is_err());
    }
}
