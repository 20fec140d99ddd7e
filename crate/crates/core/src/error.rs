use std::path::PathBuf;

use crate::grid::Cell;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameter `{key}`: {message}")]
    Invalid { key: &'static str, message: String },

    #[error("{} parameter violation(s): {}", .0.len(), join_violations(.0))]
    Violations(Vec<crate::config::Violation>),

    #[error("cell {cell} outside the {rows}x{cols} array")]
    CellOutOfRange { cell: Cell, rows: usize, cols: usize },

    #[error("operation requires ideal selectors (r_sf = 0, r_sh = r_su = inf)")]
    NonIdealSelectors,

    #[error("nodal system is singular; isolated nodes: {nodes:?}")]
    SingularSystem { nodes: Vec<usize> },

    #[error("quadrature did not converge: error estimate {estimate:e} above {tolerance:e}")]
    QuadratureNonConvergence { estimate: f64, tolerance: f64 },

    #[error("sample budget of {budget} exhausted with 99% half-width {half_width:e} > {tolerance:e}")]
    SampleBudgetExhausted { budget: u64, half_width: f64, tolerance: f64 },

    #[error("no density crossing between the LRS and HRS means")]
    NoThresholdCrossing,

    #[error("STMC precondition violated: R_th0 = {r_th0} must exceed the largest line load {max_load}")]
    StmcPrecondition { r_th0: f64, max_load: f64 },

    #[error("inconsistent sweep: {0}")]
    Sweep(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad input (configuration, arguments), as
    /// opposed to numerical or runtime failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Invalid { .. }
                | Error::Violations(_)
                | Error::CellOutOfRange { .. }
                | Error::NonIdealSelectors
                | Error::Sweep(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

fn join_violations(v: &[crate::config::Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
