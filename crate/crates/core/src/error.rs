use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate cell with signed area {area:e}")]
    DegenerateCell { area: f64 },
    #[error("cell {cell} out of range (mesh has {len} cells)")]
    CellOutOfRange { cell: usize, len: usize },
    #[error("cell {cell} references missing vertex {vertex}")]
    VertexOutOfRange { cell: usize, vertex: usize },
    #[error("edge {edge:?} is shared by {cells} cells")]
    NonManifoldEdge { edge: [usize; 2], cells: usize },
    #[error("refinement edge table does not match the cells")]
    InvalidRefinementEdges,
    #[error("V - E + C = {value}, expected 1")]
    EulerCharacteristic { value: i64 },
    #[error("hanging node: vertex {vertex} lies on edge {edge:?}")]
    HangingNode { vertex: usize, edge: [usize; 2] },
    #[error("inconsistent mesh: {0}")]
    Inconsistent(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Violations of the material parameter bounds.
#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("mu must be positive (got {0})")]
    Shear(f64),
    #[error("2 mu + lambda must be positive (got {0})")]
    Dilatation(f64),
    #[error("alpha_{index} = {value} must lie in (0, 1]")]
    BiotWillis { index: usize, value: f64 },
    #[error("storage coefficient s_{index} = {value} must be positive")]
    Storage { index: usize, value: f64 },
    #[error("conductance kappa_{index} = {value} must be positive")]
    Conductance { index: usize, value: f64 },
    #[error("transfer gamma_{i}{j} = {value} must be nonnegative, symmetric, and zero on the diagonal")]
    Transfer { i: usize, j: usize, value: f64 },
    #[error("expected {expected} values for {name}, got {got}")]
    Length { name: &'static str, expected: usize, got: usize },
    #[error("at least one fluid network is required")]
    NoNetworks,
}

/// Errors raised by assembly, time stepping, estimation and adaptivity.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear solve failed at t = {time}: {message}")]
    Solve { time: f64, message: String },
    #[error("time step refinement did not terminate at t = {time} after {attempts} retries")]
    StepControl { time: f64, attempts: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// A failure inside one run of a batch, tagged with the run.
    #[error("{context}: {source}")]
    Run { context: String, source: Box<Error> },
}

impl Error {
    pub fn in_run(self, context: impl Into<String>) -> Error {
        Error::Run { context: context.into(), source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
