use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("norm of {0} is divisible by 3")]
    NonCoprimeToThree(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("arguments are not coprime: {0}")]
    NotCoprime(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no square root of -3 modulo {0}")]
    NoSolution(String),
    #[error("class enumeration exhausted the norm bound {bound} with {found}/{needed} classes")]
    ExhaustionFailure { bound: u64, found: usize, needed: usize },
    #[error("ambiguous prime divisor above {0}")]
    AmbiguousDivisor(u64),
    #[error("series needs more than {0} terms")]
    PrecisionBudgetExceeded(usize),
    #[error("precision check failed: {0}")]
    PrecisionFailure(String),
    #[error("no admissible rational near {value} (denominator bound {bound})")]
    RecognitionFailure { value: String, bound: String },
    #[error("imaginary part {0} exceeds tolerance")]
    NonRealResidual(String),
    #[error("no cube root of unity makes the value real or imaginary")]
    NoValidCubeRoot,
    #[error("consistency failure: {0}")]
    ConsistencyFailure(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("Tate's algorithm stuck at p = {0}")]
    AlgorithmStuck(u64),
    #[error("root number ambiguous (spreads {plus} / {minus})")]
    RootNumberAmbiguous { plus: String, minus: String },
    #[error("no admissible matrix for D = {0}")]
    NoAdmissibleMatrix(u64),
    #[error("cache: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
