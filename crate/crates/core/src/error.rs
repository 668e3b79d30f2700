//! Error types shared across the crate.

use thiserror::Error;

/// Evaluation hit a point outside an operation's domain (log of a
/// non-positive value, division by zero, fractional power of a negative
/// base, ...). Solvers treat this as an infinite objective / infinite
/// violation rather than a hard failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain fault in {op}({operand})")]
pub struct DomainFault {
    pub op: &'static str,
    pub operand: f64,
}

/// A variable or family-member reference that does not resolve.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("variable index {0} out of range (model has {1} variables)")]
    Variable(usize, usize),
    #[error("unbound family member `{0}` (no enclosing sum or quantifier)")]
    UnboundMember(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Domain(#[from] DomainFault),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Malformed model file.
#[derive(Debug, Error)]
#[error("format error: {0}")]
pub struct FormatError(pub String);

/// Script emission requires fully expanded families.
#[derive(Debug, Error)]
#[error("emit error: {0}")]
pub struct EmitError(pub String);

/// Invalid test-problem / scale combination or other spec-level misuse.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct SpecError(pub String);

/// Invalid solver or GA configuration.
#[derive(Debug, Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

/// No best-known reference recorded for the requested instance.
#[derive(Debug, Error)]
#[error("no reference value recorded for TP{tp} at scale {scale}")]
pub struct MissingReference {
    pub tp: u8,
    pub scale: usize,
}

/// The logistic-regression information matrix could not be factorized
/// even after ridge repair.
#[derive(Debug, Error)]
#[error("singular fit: information matrix not positive definite (ridge {ridge:e})")]
pub struct SingularFit {
    pub ridge: f64,
}

/// A LaTeX source that cannot be turned into a model.  Warnings never
/// produce this; only genuinely missing or contradictory structure does
/// (no objective, unbalanced groups, a relation missing one side, an
/// unsupported model class).
#[derive(Debug, Clone)]
pub struct ParseError {
    pub message: String,
    /// Byte range in the original source, when a location makes sense.
    pub span: Option<(usize, usize)>,
}

impl ParseError {
    pub fn new(message: impl Into<String>, span: Option<(usize, usize)>) -> Self {
        ParseError {
            message: message.into(),
            span,
        }
    }
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.span {
            Some((a, b)) => write!(f, "parse error at bytes {a}..{b}: {}", self.message),
            None => write!(f, "parse error: {}", self.message),
        }
    }
}

impl std::error::Error for ParseError {}
