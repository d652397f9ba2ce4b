use thiserror::Error;

/// Which of the coupled paths produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathLabel {
    Coarse,
    Fine,
    Antithetic,
    /// A single uncoupled path (level zero, reference runs).
    Single,
}

impl std::fmt::Display for PathLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PathLabel::Coarse => "coarse",
            PathLabel::Fine => "fine",
            PathLabel::Antithetic => "antithetic",
            PathLabel::Single => "single",
        };
        f.write_str(s)
    }
}

/// Errors surfaced by the simulation and estimation layers.
///
/// Divergence of an explicit scheme on a superlinear problem is a meaningful
/// outcome, not a bug, so it carries enough context to report which path blew
/// up and where.
#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "commutative Milstein scheme requested for a non-commutative model \
         (commutativity defect {defect:.3e} at a sampled state)"
    )]
    NonCommutativeModel { defect: f64 },

    #[error("scheme diverged during {context}")]
    NonFiniteState { context: &'static str },

    #[error(
        "scheme diverged on the {path} path at level {level}, sample {sample}, \
         coarse step {step}"
    )]
    Diverged {
        path: PathLabel,
        level: u32,
        sample: u64,
        step: u64,
    },

    #[error(
        "accuracy unreachable: level {level} would need {requested:.3e} samples; \
         the level variance {variance:.3e} suggests the scheme is unstable here"
    )]
    AccuracyUnreachable {
        level: u32,
        requested: f64,
        variance: f64,
    },

    #[error(
        "bias estimate {bias:.3e} still above target {target:.3e} after \
         reaching max level {max_level}"
    )]
    BiasNotConverged {
        max_level: u32,
        bias: f64,
        target: f64,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;
