use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },

    #[error("swap input must be a finite nonnegative amount, got {0}")]
    NegativeInput(f64),

    #[error("price drift must be finite and nonnegative, got {0}")]
    DriftOutOfDomain(f64),

    #[error("drift perturbation {0} outside (0, 0.1]")]
    PerturbationOutOfRange(f64),

    #[error("swap curve is not strictly concave at input {input} (second derivative {second})")]
    NotConcave { input: f64, second: f64 },

    #[error("root solver did not converge within {iterations} iterations")]
    SolverDiverged { iterations: usize },

    #[error("root is not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("quadrature did not reach tolerance {tolerance}")]
    QuadratureFailed { tolerance: f64 },

    #[error("function evaluated to a non-finite value near {at}")]
    NonFiniteEvaluation { at: f64 },

    #[error("unknown closed form `{0}`")]
    UnknownClosedForm(String),
}
