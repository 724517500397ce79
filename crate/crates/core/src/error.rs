use thiserror::Error;

use crate::sexpr::{ReadError, SourceSpan, Symbol};

/// Errors detected before anything runs: malformed expressions and patterns,
/// expander failures, and bad definitions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StaticError {
    #[error("malformed expression at {span}: {message}")]
    MalformedExpr { span: SourceSpan, message: String },
    #[error("malformed pattern at {span}: {message}")]
    MalformedPattern { span: SourceSpan, message: String },
    #[error("unknown pattern head `{head}` at {span}")]
    UnknownPatternHead { span: SourceSpan, head: String },
    #[error("expansion fuel exhausted while expanding `{expander}` at {span}")]
    FuelExhausted { span: SourceSpan, expander: Symbol },
    #[error("or-pattern branches bind different variables at {span}: {left:?} vs {right:?}")]
    OrBindingMismatch {
        span: SourceSpan,
        left: Vec<Symbol>,
        right: Vec<Symbol>,
    },
    #[error("struct `{name}` expects {expected} field patterns, got {found} at {span}")]
    StructArityError {
        span: SourceSpan,
        name: Symbol,
        expected: usize,
        found: usize,
    },
    #[error("pattern variable `{name}` bound twice at {span}")]
    DuplicateVariable { span: SourceSpan, name: Symbol },
    #[error("`{name}` is already defined at {span}")]
    DuplicateDefinition { span: SourceSpan, name: Symbol },
    #[error("`{name}` is a reserved pattern keyword at {span}")]
    ReservedName { span: SourceSpan, name: Symbol },
    #[error("no rule of expander `{expander}` matches the use at {span}")]
    NoRuleMatches { span: SourceSpan, expander: Symbol },
    #[error("bad expander template at {span}: {message}")]
    BadTemplate { span: SourceSpan, message: String },
    #[error("match with no clauses at {span}")]
    EmptyMatch { span: SourceSpan },
}

impl StaticError {
    /// Short name of the error kind, as shown by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            StaticError::MalformedExpr { .. } => "MalformedExpr",
            StaticError::MalformedPattern { .. } => "MalformedPattern",
            StaticError::UnknownPatternHead { .. } => "UnknownPatternHead",
            StaticError::FuelExhausted { .. } => "FuelExhausted",
            StaticError::OrBindingMismatch { .. } => "OrBindingMismatch",
            StaticError::StructArityError { .. } => "StructArityError",
            StaticError::DuplicateVariable { .. } => "DuplicateVariable",
            StaticError::DuplicateDefinition { .. } => "DuplicateDefinition",
            StaticError::ReservedName { .. } => "ReservedName",
            StaticError::NoRuleMatches { .. } => "NoRuleMatches",
            StaticError::BadTemplate { .. } => "BadTemplate",
            StaticError::EmptyMatch { .. } => "EmptyMatch",
        }
    }

    pub fn span(&self) -> SourceSpan {
        match self {
            StaticError::MalformedExpr { span, .. }
            | StaticError::MalformedPattern { span, .. }
            | StaticError::UnknownPatternHead { span, .. }
            | StaticError::FuelExhausted { span, .. }
            | StaticError::OrBindingMismatch { span, .. }
            | StaticError::StructArityError { span, .. }
            | StaticError::DuplicateVariable { span, .. }
            | StaticError::DuplicateDefinition { span, .. }
            | StaticError::ReservedName { span, .. }
            | StaticError::NoRuleMatches { span, .. }
            | StaticError::BadTemplate { span, .. }
            | StaticError::EmptyMatch { span } => *span,
        }
    }
}

/// Errors raised while evaluating expressions or running matches.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(Symbol),
    #[error("{name}: expected {expected} arguments, got {found}")]
    ArityError {
        name: String,
        expected: String,
        found: usize,
    },
    #[error("{0}")]
    TypeError(String),
    #[error("{0}")]
    UserError(String),
    #[error("not a procedure: {0}")]
    NotCallable(String),
    #[error("match failed: no clause matches {0}")]
    MatchFailure(String),
    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),
}

impl EvalError {
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::UnboundVariable(_) => "UnboundVariable",
            EvalError::ArityError { .. } => "ArityError",
            EvalError::TypeError(_) => "TypeError",
            EvalError::UserError(_) => "UserError",
            EvalError::NotCallable(_) => "NotCallable",
            EvalError::MatchFailure(_) => "MatchFailure",
            EvalError::InternalInvariantViolation(_) => "InternalInvariantViolation",
        }
    }

    pub(crate) fn type_error(who: &str, expected: &str, got: &crate::sexpr::Value) -> EvalError {
        EvalError::TypeError(format!("{}: expected {}, got {}", who, expected, got))
    }
}

/// Any error a program can produce.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error(transparent)]
    Static(#[from] StaticError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    /// Reader and static errors are reported before execution.
    pub fn is_static(&self) -> bool {
        !matches!(self, Error::Eval(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Read(ReadError::UnbalancedDelimiter { .. }) => "UnbalancedDelimiter",
            Error::Read(ReadError::BadToken { .. }) => "BadToken",
            Error::Static(e) => e.kind(),
            Error::Eval(e) => e.kind(),
        }
    }
}
