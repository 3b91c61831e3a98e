use crate::krylov::SolveStats;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in a run.
///
/// Blow-up style failures ([`Error::SolverNotConverged`], [`Error::SingularProjection`],
/// [`Error::NonFinite`]) are reported separately from configuration problems so that
/// sweeps can classify a run as unstable instead of aborting.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    ConfigList(Vec<String>),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(
        "linear solver did not converge after {} iterations ({} restarts): relative residual {:.3e}",
        .0.stats.iterations, .0.stats.restarts, .0.stats.relative_residual
    )]
    SolverNotConverged(Box<SolveFailure>),

    #[error("singular projection at cell ({i}, {j}, {l}): |m| = {norm:.3e}")]
    SingularProjection {
        i: usize,
        j: usize,
        l: usize,
        norm: f64,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Best iterate and statistics of a linear solve that missed its tolerance.
#[derive(Clone)]
pub struct SolveFailure {
    pub best: Vec<f64>,
    pub stats: SolveStats,
}

impl std::fmt::Debug for SolveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolveFailure")
            .field("unknowns", &self.best.len())
            .field("stats", &self.stats)
            .finish()
    }
}

impl Error {
    /// True for numerical failures that signal an unstable run.
    pub fn is_blow_up(&self) -> bool {
        matches!(
            self,
            Error::SolverNotConverged(_) | Error::SingularProjection { .. } | Error::NonFinite(_)
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::ConfigList(_))
    }
}
