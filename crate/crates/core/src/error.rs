use thiserror::Error;

/// Errors shared by all constructions.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    /// A string is not a node of the ambient tree, operands come from
    /// different ambient trees, or an index is out of range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input text; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A removal schedule re-adds a removed cone or removes the root.
    #[error("schedule error: {0}")]
    Schedule(String),

    /// A stagewise construction hit an impossible state (e.g. the stage
    /// tree became empty, violating the pruned-baseline promise).
    #[error("construction error: {0}")]
    Construction(String),

    /// A bounded search ran out of budget.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    /// A point name is too coarse for the requested output precision.
    #[error("insufficient name: {0}")]
    InsufficientName(String),

    /// A precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
}
