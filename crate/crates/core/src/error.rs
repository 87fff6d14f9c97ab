use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // geometry
    #[error("mismatched lengths: {left} vs {right}")]
    MismatchedLengths { left: usize, right: usize },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("chain too short: {len} residues, need at least {min}")]
    ChainTooShort { len: usize, min: usize },
    #[error("window size {0} is even")]
    EvenWindow(usize),
    #[error("window size {0} is below the minimum of 5")]
    WindowTooSmall(usize),
    #[error("invalid internal coordinate at step {index}: {reason}")]
    InvalidInternalCoordinate { index: usize, reason: String },
    #[error("non-finite coordinate at residue {0}")]
    NonFiniteCoordinate(usize),
    #[error("broken chain: Cα–Cα distance {distance:.3} Å between residues {index} and {next}", next = index + 1)]
    BrokenChain { index: usize, distance: f64 },

    // codebook
    #[error("codebook needs at least {min} codes, got {got}")]
    TooFewCodes { got: usize, min: usize },
    #[error("codebook has zero-width vectors")]
    EmptyDimension,
    #[error("non-finite codebook entry at row {row}, column {col}")]
    NonFiniteCode { row: usize, col: usize },
    #[error("duplicate codebook rows {first} and {second}")]
    DuplicateRows { first: usize, second: usize },
    #[error("negative synonym threshold {0}")]
    NegativeTau(f64),
    #[error("need at least {needed} distinct samples, got {got}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    // tokenizer / perturbation
    #[error("token {token} at position {position} is out of range for a codebook of {m} codes")]
    TokenOutOfRange { position: usize, token: u32, m: usize },
    #[error("token sequence is bound to codebook '{seq}' but '{other}' was supplied")]
    MismatchedCodebook { seq: String, other: String },
    #[error("token sequence was encoded with window {seq} but window {requested} was requested")]
    WindowMismatch { seq: usize, requested: usize },
    #[error("invalid swap configuration: {0}")]
    InvalidConfig(String),
    #[error("ensemble is empty")]
    EmptyEnsemble,

    // metrics
    #[error("need at least two conformations")]
    SingleConformation,
    #[error("need at least {needed} conformations, got {got}")]
    TooFewConformations { got: usize, needed: usize },
    #[error("correlation undefined: input vector is constant")]
    ConstantInput,
    #[error("covariance is not positive semi-definite (eigenvalue {0:e})")]
    NonSpdCovariance(f64),

    // io
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("no Cα atoms found{}", chain.map(|c| format!(" for chain '{c}'")).unwrap_or_default())]
    NoCalpha { chain: Option<char> },
    #[error("model {model} disagrees with model {first} on its residue set")]
    InconsistentModels { first: i64, model: i64 },
    #[error("coordinate {0:.3} cannot be written in an F8.3 field")]
    CoordinateOverflow(f64),
    #[error("bad magic bytes in codebook file")]
    BadMagic,
    #[error("unsupported codebook format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("{extra} unexpected trailing bytes after codebook payload")]
    TrailingBytes { extra: usize },
    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: '{text}' is not a non-negative integer token")]
    NonIntegerToken { line: usize, column: usize, text: String },
    #[error("missing '# codebook: <id> window: <w>' header")]
    MissingHeader,
    #[error("input is empty")]
    EmptyInput,
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

impl Error {
    /// True for failures rooted in numerical or geometric validity rather than
    /// malformed input or bad usage.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGeometry(_)
                | Error::InvalidInternalCoordinate { .. }
                | Error::NonFiniteCoordinate(_)
                | Error::BrokenChain { .. }
                | Error::ConstantInput
                | Error::NonSpdCovariance(_)
                | Error::CoordinateOverflow(_)
        )
    }
}
