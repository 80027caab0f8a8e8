//! Error types shared by every module in the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, EnsembleError>;

/// Everything that can go wrong when building or averaging an ensemble.
#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    /// A vector did not match the spectrum length it was used with.
    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A spectrum needs at least two levels.
    #[error("spectrum needs at least {min} levels, got {actual}")]
    TooFewLevels { min: usize, actual: usize },

    /// Spectra must consist of finite energies.
    #[error("spectrum level at input position {index} is not finite")]
    NonFiniteLevel { index: usize },

    /// A state or occupation vector failed the normalization constraint.
    #[error("not normalized: components sum to {sum} (tolerance {tolerance})")]
    NotNormalized { sum: f64, tolerance: f64 },

    /// Occupation probabilities must be nonnegative.
    #[error("occupation probability at index {index} is negative: {value}")]
    NegativeProbability { index: usize, value: f64 },

    /// The requested total energy cannot be realized by any occupation vector.
    ///
    /// `bound` names the saturated or violated side ("lower" or "upper");
    /// the feasible energies are the open interval `(lo, hi)`.
    #[error(
        "energy {energy} is infeasible: violates the {bound} bound {value} \
         (feasible open range is {lo}..{hi})"
    )]
    InfeasibleEnergy {
        energy: f64,
        lo: f64,
        hi: f64,
        bound: &'static str,
        value: f64,
    },

    /// Two distinct pivot energies are required but the levels tie.
    #[error("degenerate pivot: need two distinct energies, found repeated level {value}")]
    DegeneratePivot { value: f64 },

    /// A ground-level probability fell outside the feasible interval.
    #[error("p1 = {p1} lies outside the feasible interval [{lo}, {hi}]")]
    OutsideInterval { p1: f64, lo: f64, hi: f64 },

    /// An operation only supports particular spectrum sizes.
    #[error("unsupported spectrum size {n}: {context}")]
    UnsupportedSize { n: usize, context: &'static str },

    /// A parameter value at which the requested quantity is undefined.
    #[error("{name} = {value} is a singular point for this quantity")]
    SingularParameter { name: &'static str, value: f64 },

    /// A parameter failed its precondition.
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A convergence-sweep member failed; carries the offending level count.
    #[error("sweep member N = {n} failed: {source}")]
    SweepMember {
        n: usize,
        #[source]
        source: Box<EnsembleError>,
    },

    /// A named spectrum family cannot produce the requested size.
    #[error("spectrum family cannot produce N = {n}: {context}")]
    FamilyMember { n: usize, context: &'static str },
}
