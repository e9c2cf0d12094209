use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rate `{name}` must be strictly positive (got {value})")]
    NonPositiveRate { name: &'static str, value: f64 },

    #[error("detuning `{name}` must be non-zero")]
    ZeroDetuning { name: &'static str },

    #[error("`{name}` must be non-negative (got {value})")]
    NegativeAmplitude { name: &'static str, value: f64 },

    #[error("`{name}` is not finite")]
    NonFinite { name: &'static str },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config is missing key `{0}`")]
    MissingKey(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("commutator drifted by {defect:e} at t = {t}")]
    CommutatorDrift { t: f64, defect: f64 },

    #[error("negative phonon number {value:e}")]
    NegativePhonon { value: f64 },

    #[error("phonon number has imaginary part {imag:e}")]
    ComplexPhonon { imag: f64 },

    #[error("quadrature did not converge at t = {t} (last change {change:e})")]
    QuadratureNotConverged { t: f64, change: f64 },

    #[error("adiabatic reduction requires J = 0 (got {0})")]
    TunnelingNotZero(f64),

    #[error("Lyapunov equation is singular or drift is unstable")]
    SingularLyapunov,

    #[error("formula outside its domain: radicand {radicand} < 0")]
    DomainError { radicand: f64 },

    #[error("second drive intensity is zero")]
    DegenerateDrive,

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonPositiveRate { .. }
            | Error::ZeroDetuning { .. }
            | Error::NegativeAmplitude { .. }
            | Error::NonFinite { .. }
            | Error::Config { .. }
            | Error::MissingKey(_)
            | Error::InvalidArgument(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
