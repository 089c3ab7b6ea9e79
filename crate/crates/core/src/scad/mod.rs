//! OpenSCAD-subset front end: lexing, parsing, expansion and printing.

pub mod ast;
pub mod error;
pub mod expand;
pub mod json;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod source;
pub mod value;

pub use ast::{AstNode, BooleanOp, Expr, NodeId, NodeKind, PrimitiveKind, Span, SyntaxTree, TransformKind};
pub use error::{EvalError, ParseError};
pub use expand::expand;
pub use parser::{parse, parse_str};
pub use pretty::pretty_print;
pub use source::SourceFile;
pub use value::{eval, Env, Value};
