use thiserror::Error;

use crate::graph::VertexId;

/// Errors raised while building or querying a graph.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(VertexId),
    #[error("unknown vertex id {0}")]
    UnknownVertex(VertexId),
    #[error("vertex index {index} out of bounds for graph with {n} vertices")]
    IndexOutOfBounds { index: usize, n: usize },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(VertexId, VertexId),
    #[error("edge ({u}, {v}) has non-positive or non-finite weight {b}")]
    BadEdgeWeight { u: VertexId, v: VertexId, b: f64 },
    #[error("vertex {id}: {reason}")]
    BadVertex { id: VertexId, reason: String },
    #[error("subset must be nonempty")]
    EmptySubset,
    #[error("subset is disconnected: no edge joins {{{}}} to the rest of the subset", .component.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))]
    DisconnectedSubset { component: Vec<VertexId> },
    #[error("subset has infinite diameter")]
    InfiniteDiameter,
    #[error("truncation {t}: complement of K_t is empty")]
    EmptyComplement { t: usize },
    #[error("truncation family subsets are not nested at t = {t}")]
    NotNested { t: usize },
    #[error("function has {got} values but graph has {expected} vertices")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("graph failed validation: {0}")]
    Invalid(String),
}

/// Errors from operator assembly and eigen decomposition.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("requested {k} eigenpairs but graph has only {n} vertices")]
    TooManyEigenpairs { k: usize, n: usize },
    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("insufficient spectral window: lambda = {lambda} is not below any of the {k} computed eigenvalues")]
    InsufficientWindow { lambda: f64, k: usize },
    #[error("lambda = {lambda} lies in the spectrum (distance {delta:e})")]
    InSpectrum { lambda: f64, delta: f64 },
    #[error("form bound violated: {0}")]
    BoundViolated(String),
}

/// Errors from nonlinearity construction.
#[derive(Debug, Error)]
pub enum NonlinearityError {
    #[error("power exponent p = {0} must exceed 2")]
    ExponentTooSmall(f64),
    #[error("vertex weight g must be positive and finite, got {0}")]
    BadWeight(f64),
    #[error("nonlinearity defined on {got} vertices but graph has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// Errors from the ground-state solver and its checks.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("direction lies in the constraint subspace F")]
    DegenerateDirection,
    #[error("inner maximization did not converge (stationarity {residual:e})")]
    InnerNoConvergence { residual: f64 },
    #[error("spectral window insufficient: solver needs all {n} eigenpairs, got {k}")]
    WindowInsufficient { k: usize, n: usize },
    #[error("problem too large: {n} vertices exceeds the dense limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("all {0} starts failed to converge")]
    AllStartsDiverged(usize),
    #[error("nontrivial critical point found where none may exist: {0}")]
    UnexpectedSolution(String),
    #[error("critical value bound violated: {0}")]
    BoundViolated(String),
    #[error("nonlinearity lacks structural parameters (p, q, a0, a1)")]
    MissingParams,
}

/// Errors from sweeps and audits.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid sweep: {0}")]
    BadSweep(String),
    #[error("only {got} usable rows, need at least {need}")]
    TooFewRows { got: usize, need: usize },
    #[error("inequality violated: {0}")]
    Violation(String),
}

/// Errors from reading and writing files.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error("manifest digest mismatch for {path}: recorded {recorded}, found {found}")]
    DigestMismatch {
        path: String,
        recorded: String,
        found: String,
    },
}
