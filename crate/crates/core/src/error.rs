use thiserror::Error;

/// Error type shared across the crate.
///
/// The CLI maps these onto process exit codes: configuration problems exit
/// with 2, data problems with 3, numeric failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter bundle or config value violates a construction invariant.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Configuration file could not be parsed or is internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Input data (ratings file, feature file) is malformed.
    #[error("data error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Data {
        /// 1-based line number in the offending file, when known.
        line: Option<usize>,
        msg: String,
    },

    /// The target arm is the worst arm at some probe context, so no valid
    /// attack margin exists there.
    #[error("assumption violated at probe {probe_index}: {msg}")]
    AssumptionViolated { probe_index: usize, msg: String },

    /// Target and worst arm have identical true means at a context, so the
    /// white-box mixing probability is undefined.
    #[error("degenerate denominator: target and worst arm means coincide")]
    DegenerateDenominator,

    /// A computation produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A trial inside an experiment failed; carries the trial seed.
    #[error("trial with seed {seed} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
