use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Each variant maps onto one exit-code class of the command-line driver,
/// see [`Error::exit_class`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("one-form is not closed (exactness residual {residual:.3e} > {gate:.3e})")]
    NonClosedForm { residual: f64, gate: f64 },
    #[error("samples are not on the unit sphere (max | |h| - 1 | = {0:.3e})")]
    NotSpherical(f64),
    #[error("samples do not define an immersion at node {node}")]
    NotImmersed { node: usize },
    #[error("metric is ill-conditioned at node {node} (condition number {cond:.3e})")]
    IllConditionedMetric { node: usize, cond: f64 },
    #[error("integrating-factor system has no solution (integrability residual {residual:.3e} > {gate:.3e})")]
    NoSolution { residual: f64, gate: f64 },
    #[error("elliptic system is resonant (smallest singular value estimate {sigma_min:.3e}, norm {norm:.3e})")]
    Resonance { sigma_min: f64, norm: f64 },
    #[error("map is not an immersion at node {node}")]
    NotAnImmersion { node: usize },
    #[error("family passes through the origin at node {node}")]
    OriginCrossing { node: usize },
    #[error("parametrization is nowhere regular")]
    NowhereRegular,
    #[error("inconsistent geometry: {what} residual {residual:.3e} > {gate:.3e}")]
    InconsistentGeometry { what: String, residual: f64, gate: f64 },
    #[error("degenerate envelope system at node {node} (rank {rank} < 3)")]
    DegenerateEnvelope { node: usize, rank: usize },
    #[error("rank error: {0}")]
    Rank(String),
    #[error("hypersurface is not infinitesimally bendable: {0}")]
    Unclassifiable(String),
    #[error("classification error: {0}")]
    Classification(String),
    #[error("tangent frame is degenerate at node {node}")]
    FrameDegeneracy { node: usize },
    #[error("bending system is not integrable (compatibility residual {residual:.3e} > {gate:.3e})")]
    NonIntegrable { residual: f64, gate: f64 },
    #[error("displacement one-form is not closed (path residual {residual:.3e} > {gate:.3e})")]
    NonClosed { residual: f64, gate: f64 },
    #[error("probe grid too large: {unknowns} unknowns (limit {limit})")]
    Size { unknowns: usize, limit: usize },
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
}

/// Exit-code classes of the command-line contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Input,
    Geometry,
    Integrability,
}

impl ExitClass {
    pub fn code(self) -> i32 {
        match self {
            ExitClass::Input => 2,
            ExitClass::Geometry => 3,
            ExitClass::Integrability => 4,
        }
    }
}

impl Error {
    pub fn exit_class(&self) -> ExitClass {
        use Error::*;
        match self {
            InvalidGrid(_) | Dimension(_) | Input(_) | Io { .. } | Format(_) | Size { .. } => {
                ExitClass::Input
            }
            NotSpherical(_)
            | NotImmersed { .. }
            | IllConditionedMetric { .. }
            | Resonance { .. }
            | NotAnImmersion { .. }
            | OriginCrossing { .. }
            | NowhereRegular
            | InconsistentGeometry { .. }
            | DegenerateEnvelope { .. }
            | Rank(_)
            | FrameDegeneracy { .. } => ExitClass::Geometry,
            NonClosedForm { .. }
            | NoSolution { .. }
            | Unclassifiable(_)
            | Classification(_)
            | NonIntegrable { .. }
            | NonClosed { .. } => ExitClass::Integrability,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
