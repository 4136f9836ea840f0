use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("power-law exponent must satisfy p > 1, got {0}")]
    InvalidExponent(f64),
    #[error("regularisation weight must be finite and non-negative, got {0}")]
    InvalidRegularisation(f64),
    #[error("radial root-find did not converge after {iterations} iterations (residual {residual:e})")]
    RootFindNonConvergence { iterations: usize, residual: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid mesh dimensions: {0}")]
    InvalidDimensions(String),
    #[error("triangle {index} has non-positive signed area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("mesh is not conforming: {0}")]
    NonConforming(String),
    #[error("vertex index {0} out of range")]
    VertexOutOfRange(usize),
    #[error("crack segment ({0}, {1}) is not an interior mesh edge")]
    CrackEdgeNotInterior(usize, usize),
    #[error("crack path point ({0}, {1}) is not a mesh vertex")]
    CrackPointNotVertex(f64, f64),
    #[error("crack path touches the domain boundary at vertex {0} (E1)")]
    CrackTouchesBoundary(usize),
    #[error("inconsistent side assignment along the crack: {0}")]
    InconsistentSide(String),
    #[error("crack release times must be non-decreasing along the path (E4): segment {index} releases at {time} after {previous}")]
    ReleaseNotMonotone {
        index: usize,
        previous: f64,
        time: f64,
    },
    #[error("crack path does not follow mesh edges: {0}")]
    CrackNotOnEdges(String),
    #[error("crack path has {segments} segments but {times} release times")]
    ReleaseCountMismatch { segments: usize, times: usize },
    #[error("invalid release time {0} (must be >= 0 or +inf)")]
    InvalidReleaseTime(f64),
    #[error("nodal field has length {got}, expected {expected}")]
    FieldLength { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("step {step}: Newton did not converge after {iterations} iterations (residual {residual:e}, target {target:e})")]
    NonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error("step {step}: line search stalled at Newton iteration {iteration} (residual {residual:e})")]
    LineSearchStall {
        step: usize,
        iteration: usize,
        residual: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step {step}: Newton matrix is not positive definite")]
    Factorization { step: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("load data violates {assumption}: {message}")]
    IncompatibleData {
        assumption: &'static str,
        message: String,
    },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed [{assumption}]: {message}")]
    Validation {
        assumption: &'static str,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParadoxError {
    #[error("inconclusive resolution: max |balance residual| {max_residual:e} exceeds tolerance {tolerance:e}; increase n")]
    InconclusiveResolution { max_residual: f64, tolerance: f64 },
    #[error("scenario has no crack segment released in (0, T]; the paradox check needs a growing crack")]
    NoCrackGrowth,
}

/// Top-level error for anything driven from a scenario.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Paradox(#[from] ParadoxError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
