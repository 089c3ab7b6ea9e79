//! A source file taken through parsing, expansion and block analysis.

use thiserror::Error;

use crate::blocks::{analyze, BlockError, BlockSet};
use crate::geometry::{GeometryError, Shape};
use crate::scad::{expand, parse, Env, EvalError, ParseError, SourceFile, SyntaxTree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("EvalError line {}: {}", .0.line, .0.message)]
    Eval(EvalError),
    #[error(transparent)]
    Blocks(#[from] BlockError),
}

impl From<EvalError> for ProgramError {
    fn from(e: EvalError) -> Self {
        ProgramError::Eval(e)
    }
}

#[derive(Clone, Debug)]
pub struct Program {
    pub source: SourceFile,
    /// Expanded tree: no loops, modules or assignments left.
    pub tree: SyntaxTree,
    pub blocks: BlockSet,
}

impl Program {
    pub fn load(source: SourceFile) -> Result<Program, ProgramError> {
        let parsed = parse(&source)?;
        let tree = expand(&parsed, &Env::new())?;
        let blocks = analyze(&tree)?;
        Ok(Program { source, tree, blocks })
    }

    pub fn from_text(text: &str) -> Result<Program, ProgramError> {
        Program::load(SourceFile::inline(text))
    }

    pub fn shape(&self) -> Result<Shape, GeometryError> {
        Shape::new(&self.tree, &self.blocks)
    }
}
