use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is indefinite: {0}")]
    Indefinite(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("denominator {0} is too small for the requested operation elements")]
    DTooSmall(u64),
    #[error("invalid superoperator: {0}")]
    InvalidSuperoperator(String),

    #[error("branch exceeded the depth limit of {0} steps")]
    DepthLimitExceeded(usize),
    #[error("input head left the tape at position {0}")]
    HeadOutOfRange(isize),

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("symbol {0:?} is not in the input alphabet")]
    InvalidInputSymbol(char),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(char),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("nondeterministic step needs a choice label")]
    MissingChoice,
    #[error("choice label {0:?} does not name an available transition")]
    InvalidChoice(char),
    #[error("no transition for state {state:?} reading {symbol:?}")]
    NoTransition { state: char, symbol: char },
    #[error("machine did not halt within {0} steps")]
    StepLimitExceeded(usize),
    #[error("machine description: {0}")]
    MachineFormat(String),

    #[error("instance is not a member; no honest prover exists")]
    NotAMember,
    #[error("strategy enumeration capped at n = {cap}, instance has n = {n}")]
    CapExceeded { n: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Stable machine-readable code, used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSymmetric => "E_NOT_SYMMETRIC",
            Error::Indefinite(_) => "E_INDEFINITE",
            Error::DimensionMismatch(_) => "E_DIMENSION",
            Error::DTooSmall(_) => "E_D_TOO_SMALL",
            Error::InvalidSuperoperator(_) => "E_INVALID_SOP",
            Error::DepthLimitExceeded(_) => "E_DEPTH_LIMIT",
            Error::HeadOutOfRange(_) => "E_HEAD_RANGE",
            Error::Syntax { .. } => "E_SYNTAX",
            Error::InvalidInputSymbol(_) => "E_INPUT_SYMBOL",
            Error::UnknownSymbol(_) => "E_UNKNOWN_SYMBOL",
            Error::InvalidConfiguration(_) => "E_CONFIGURATION",
            Error::MissingChoice => "E_MISSING_CHOICE",
            Error::InvalidChoice(_) => "E_INVALID_CHOICE",
            Error::NoTransition { .. } => "E_NO_TRANSITION",
            Error::StepLimitExceeded(_) => "E_STEP_LIMIT",
            Error::MachineFormat(_) => "E_MACHINE_FORMAT",
            Error::NotAMember => "E_NOT_A_MEMBER",
            Error::CapExceeded { .. } => "E_CAP_EXCEEDED",
            Error::InvalidParameter(_) => "E_PARAMETER",
        }
    }
}
