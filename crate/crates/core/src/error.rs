use thiserror::Error;

/// Error variants shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A measure needs at least one support point.
    #[error("empty support: a discrete measure needs at least one atom")]
    EmptySupport,

    /// A weight was negative beyond roundoff.
    #[error("negative weight at index {index}: {value}")]
    NegativeWeight { index: usize, value: f64 },

    /// Total mass must be positive before normalization.
    #[error("total mass is not positive: {0}")]
    ZeroMass(f64),

    /// Points, maps, or matrices disagree on dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Exponents below 1 are outside the supported cost family.
    #[error("invalid exponent p = {0}: need p >= 1")]
    InvalidExponent(f64),

    /// p = infinity never materializes a cost matrix; use the bottleneck solver.
    #[error("infinite exponent: p = inf is handled by the bottleneck solver, not a cost matrix")]
    InfiniteExponent,

    /// c-transform over an empty point set has no minimum.
    #[error("empty domain: c-transform needs a non-empty point set")]
    EmptyDomain,

    /// Marginal weight vectors do not carry equal total mass.
    #[error("infeasible marginals: source mass {mu} vs target mass {nu}")]
    InfeasibleMarginals { mu: f64, nu: f64 },

    /// Complementary slackness cannot be reconstructed; the plan is not optimal.
    #[error("non-optimal plan: {0}")]
    NonOptimalPlan(String),

    /// Interpolation parameter outside [0, 1].
    #[error("interpolation parameter out of range: s = {0}")]
    OutOfRange(f64),

    /// Metric derivative requested at a path endpoint.
    #[error("boundary index {index}: metric derivative needs an interior sample (path has {len})")]
    BoundaryIndex { index: usize, len: usize },

    /// Velocity extraction with a non-positive step.
    #[error("zero step: h = {0} must be positive")]
    ZeroStep(f64),

    /// Velocity assignments do not line up with path samples.
    #[error("misaligned samples: {0}")]
    MisalignedSamples(String),

    /// J1 is +infinity on measures that are not absolutely continuous.
    #[error("not absolutely continuous: J1 requires a grid density")]
    NotAbsolutelyContinuous,

    /// Grid construction over a degenerate box.
    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    /// Snapping a measure whose support leaves the grid box.
    #[error("point outside grid domain: {0:?}")]
    OutOfDomain(Vec<f64>),

    /// Beckmann node weights with mismatched totals.
    #[error("mass mismatch: sum mu = {mu}, sum nu = {nu}")]
    MassMismatch { mu: f64, nu: f64 },

    /// Positive mass sits on nodes the flow network cannot reach.
    #[error("disconnected support: no path between an excess and a deficit node")]
    DisconnectedSupport,

    /// Caller-supplied diameter smaller than the observed support diameter.
    #[error("diameter violated: supplied D = {supplied}, observed {observed}")]
    DiameterViolated { supplied: f64, observed: f64 },

    /// Density cell below the positivity floor.
    #[error("degenerate density: cell {index} has value {value} < {floor}")]
    DegenerateDensity { index: usize, value: f64, floor: f64 },

    /// Map values leaving the target interval.
    #[error("map value {value} outside target interval [{lo}, {hi}]")]
    MapOutOfRange { value: f64, lo: f64, hi: f64 },

    /// Functional specification rejected (convexity/superlinearity validation).
    #[error("invalid functional: {0}")]
    InvalidFunctional(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally valid file violating the schema (NaN coordinate, bad field).
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },

    /// Internal invariant breakage; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
