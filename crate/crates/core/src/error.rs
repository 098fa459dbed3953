use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupoidError {
    #[error("arrows belong to different groupoid graphs")]
    ForeignArrow,
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("unknown generator id {0}")]
    UnknownGeneratorId(usize),
    #[error("u-value of generator `{0}` is not finite")]
    InvalidValuation(String),
    #[error("letters do not chain")]
    BrokenChain,
    #[error("malformed arrow `{0}`")]
    BadArrowSyntax(String),
    #[error("arrow is not a loop")]
    NotALoop,
    #[error("invalid groupoid document: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RingError {
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error("ring elements live in different truncation contexts")]
    ContextMismatch,
    #[error("truncation length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("cannot truncate at {requested} above the context length {available}")]
    CannotUntruncate { requested: f64, available: f64 },
    #[error("loop has u-value {0} >= 0, violating the Novikov condition")]
    NovikovViolation(f64),
    #[error("element is not invertible: {0}")]
    NotInvertible(String),
    #[error("invalid ring element document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComplexError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error("grading violation: index({q}) = {q_index} but index({p}) - 1 = {expected}")]
    Grading { p: String, q: String, q_index: usize, expected: i64 },
    #[error("incidence <{p},{q}> has term `{arrow}` which is not an arrow {p} -> {q}")]
    Support { p: String, q: String, arrow: String },
    #[error("incidence <{p},{q}> has term `{arrow}` with u-value {u} >= 0")]
    NonNegativeValuation { p: String, q: String, arrow: String, u: f64 },
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("complex fails d^2 = 0 at <{p},{r}>")]
    DSquaredFails { p: String, r: String },
    #[error("invalid complex document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlideError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error("crossing loop is not a loop")]
    NotALoop,
    #[error("crossing loop has u-value {0} >= 0")]
    NonNegativeLoop(f64),
    #[error("script events are based at different generators")]
    MixedBasePoints,
    #[error("invalid script document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("point is on the co-sphere and never exits the model")]
    OnCoSphere,
    #[error("point is not on the expected boundary component: {0}")]
    NotOnBoundary(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HolonomyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("elementary condition {condition} fails: {detail}")]
    NotElementary { condition: u8, detail: String },
    #[error("non-generic configuration: {0}")]
    NonGeneric(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("quantity below the zero threshold: {0}")]
    BelowThreshold(String),
}
