use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("LexError line {line}, col {col}: {message}")]
    Lex { line: u32, col: u32, message: String },
    #[error("SyntaxError line {line}, col {col}: expected one of {}{}", expected.join(", "), detail.as_deref().map(|d| format!(" ({d})")).unwrap_or_default())]
    Syntax {
        line: u32,
        col: u32,
        expected: Vec<String>,
        detail: Option<String>,
    },
    #[error("UnknownIdentifier line {line}: no module named `{name}`")]
    UnknownIdentifier { line: u32, name: String },
}

impl ParseError {
    pub fn line(&self) -> u32 {
        match self {
            ParseError::Lex { line, .. }
            | ParseError::Syntax { line, .. }
            | ParseError::UnknownIdentifier { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("EvalError line {line}: {message}")]
pub struct EvalError {
    pub line: u32,
    pub message: String,
}

impl EvalError {
    pub fn new(line: u32, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}
