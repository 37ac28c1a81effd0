use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer} produced a non-finite value")]
    NonFinite { layer: usize },

    #[error("non-finite value while evaluating {what}")]
    NonFiniteValue { what: &'static str },

    #[error("invalid layer id {0}")]
    InvalidLayer(usize),

    #[error("invalid parameter id {param} for layer {layer}")]
    InvalidParam { layer: usize, param: usize },

    #[error("invalid input id {input} for layer {layer}")]
    InvalidInput { layer: usize, input: usize },

    #[error("invalid variable id {0}")]
    InvalidVariable(usize),

    #[error("layer {layer} references {reference} which is not an earlier layer or variable")]
    Topology { layer: usize, reference: String },

    #[error("layer {layer} ({kind}) expects {expected} parameters, got {got}")]
    ParamCount {
        layer: usize,
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("layer {layer} ({kind}) expects {expected} inputs, got {got}")]
    InputCount {
        layer: usize,
        kind: &'static str,
        expected: String,
        got: usize,
    },

    #[error("graph has no layers")]
    EmptyGraph,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("KDL log argument {value} is not positive (value {name} with offset {offset})")]
    KdlDomain {
        name: &'static str,
        value: f64,
        offset: f64,
    },

    #[error("particles {i} and {j} are {distance} apart, below the floor {floor}")]
    PairTooClose {
        i: usize,
        j: usize,
        distance: f64,
        floor: f64,
    },

    #[error("relaxation did not converge within {steps} steps (gradient norm {grad_norm})")]
    RelaxationFailed { steps: usize, grad_norm: f64 },

    #[error("seed {seed} relaxed into the icosahedral basin (energy {energy})")]
    GlobalBasin { seed: u64, energy: f64 },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("trace format error: {0}")]
    TraceFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
