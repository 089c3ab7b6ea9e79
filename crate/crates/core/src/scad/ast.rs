use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::source::SourceFile;

pub type NodeId = usize;

/// Inclusive, 1-based line range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub end_line: u32,
}

impl Span {
    pub fn new(start_line: u32, end_line: u32) -> Self {
        Self { start_line, end_line }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start_line <= other.start_line && other.end_line <= self.end_line
    }

    pub fn lines(&self) -> std::ops::RangeInclusive<u32> {
        self.start_line..=self.end_line
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrimitiveKind {
    Cube,
    Sphere,
    Cylinder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Translate,
    Rotate,
    Scale,
    Mirror,
    Multmatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BooleanOp {
    Union,
    Difference,
    Intersection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub default: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Root,
    Primitive(PrimitiveKind),
    Transform(TransformKind),
    Boolean(BooleanOp),
    Hull,
    ModuleDef { name: String, params: Vec<Param> },
    ModuleCall { name: String },
    For { bindings: Vec<(String, Expr)> },
    Assign { name: String, value: Expr },
}

impl NodeKind {
    /// Keyword used in source for this node.
    pub fn keyword(&self) -> &str {
        match self {
            NodeKind::Root => "root",
            NodeKind::Primitive(PrimitiveKind::Cube) => "cube",
            NodeKind::Primitive(PrimitiveKind::Sphere) => "sphere",
            NodeKind::Primitive(PrimitiveKind::Cylinder) => "cylinder",
            NodeKind::Transform(TransformKind::Translate) => "translate",
            NodeKind::Transform(TransformKind::Rotate) => "rotate",
            NodeKind::Transform(TransformKind::Scale) => "scale",
            NodeKind::Transform(TransformKind::Mirror) => "mirror",
            NodeKind::Transform(TransformKind::Multmatrix) => "multmatrix",
            NodeKind::Boolean(BooleanOp::Union) => "union",
            NodeKind::Boolean(BooleanOp::Difference) => "difference",
            NodeKind::Boolean(BooleanOp::Intersection) => "intersection",
            NodeKind::Hull => "hull",
            NodeKind::ModuleDef { .. } => "module",
            NodeKind::ModuleCall { name } => name,
            NodeKind::For { .. } => "for",
            NodeKind::Assign { .. } => "assign",
        }
    }

    /// Category name used in JSON dumps.
    pub fn category(&self) -> &'static str {
        match self {
            NodeKind::Root => "Root",
            NodeKind::Primitive(_) => "Primitive",
            NodeKind::Transform(_) => "Transform",
            NodeKind::Boolean(_) => "Boolean",
            NodeKind::Hull => "Hull",
            NodeKind::ModuleDef { .. } => "ModuleDef",
            NodeKind::ModuleCall { .. } => "ModuleCall",
            NodeKind::For { .. } => "For",
            NodeKind::Assign { .. } => "Assign",
        }
    }

    pub fn builtin(name: &str) -> Option<NodeKind> {
        Some(match name {
            "cube" => NodeKind::Primitive(PrimitiveKind::Cube),
            "sphere" => NodeKind::Primitive(PrimitiveKind::Sphere),
            "cylinder" => NodeKind::Primitive(PrimitiveKind::Cylinder),
            "translate" => NodeKind::Transform(TransformKind::Translate),
            "rotate" => NodeKind::Transform(TransformKind::Rotate),
            "scale" => NodeKind::Transform(TransformKind::Scale),
            "mirror" => NodeKind::Transform(TransformKind::Mirror),
            "multmatrix" => NodeKind::Transform(TransformKind::Multmatrix),
            "union" => NodeKind::Boolean(BooleanOp::Union),
            "difference" => NodeKind::Boolean(BooleanOp::Difference),
            "intersection" => NodeKind::Boolean(BooleanOp::Intersection),
            "hull" => NodeKind::Hull,
            _ => return None,
        })
    }

    pub fn is_geometry(&self) -> bool {
        matches!(
            self,
            NodeKind::Primitive(_) | NodeKind::Transform(_) | NodeKind::Boolean(_) | NodeKind::Hull
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    Bool(bool),
    Ident(String),
    Vector(Vec<Expr>),
    Range {
        start: Box<Expr>,
        step: Option<Box<Expr>>,
        end: Box<Expr>,
    },
    Neg(Box<Expr>),
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    /// True when the expression contains only literals.
    pub fn is_literal(&self) -> bool {
        match self {
            Expr::Number(_) | Expr::Bool(_) => true,
            Expr::Vector(items) => items.iter().all(Expr::is_literal),
            _ => false,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Neg(_) => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(n) => write!(f, "{}", format_number(*n)),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Ident(name) => f.write_str(name),
            Expr::Vector(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
            Expr::Range { start, step, end } => match step {
                Some(step) => write!(f, "[{start} : {step} : {end}]"),
                None => write!(f, "[{start} : {end}]"),
            },
            Expr::Neg(inner) => {
                if inner.precedence() < 3 {
                    write!(f, "-({inner})")
                } else {
                    write!(f, "-{inner}")
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let prec = op.precedence();
                if lhs.precedence() < prec {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // Left associative: an equal-precedence right operand needs parens.
                if rhs.precedence() <= prec {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_number(n: f64) -> String {
    if n == 0.0 {
        // Collapse -0 so printing never produces "-0" for a literal zero.
        return "0".to_string();
    }
    format!("{n}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Argument {
    pub name: Option<String>,
    pub value: Expr,
}

impl fmt::Display for Argument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(name) => write!(f, "{name} = {}", self.value),
            None => write!(f, "{}", self.value),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AstNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub args: Vec<Argument>,
    pub span: Span,
    pub children: Vec<NodeId>,
    /// Comments immediately preceding this statement, raw text.
    pub comments: Vec<String>,
    /// Comments between the last child and the closing brace (or end of file for Root).
    pub trailing_comments: Vec<String>,
}

impl AstNode {
    pub fn arg(&self, name: &str) -> Option<&Expr> {
        self.args
            .iter()
            .find(|a| a.name.as_deref() == Some(name))
            .map(|a| &a.value)
    }

    pub fn positional(&self, index: usize) -> Option<&Expr> {
        self.args.iter().filter(|a| a.name.is_none()).nth(index).map(|a| &a.value)
    }
}

#[derive(Clone, Debug)]
pub struct SyntaxTree {
    pub root: NodeId,
    pub nodes: Vec<AstNode>,
    pub source: Arc<SourceFile>,
}

impl SyntaxTree {
    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &AstNode {
        &self.nodes[self.root]
    }

    /// Parent table indexed by node id.
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parents = vec![None; self.nodes.len()];
        for node in &self.nodes {
            for &c in &node.children {
                parents[c] = Some(node.id);
            }
        }
        parents
    }

    /// Node ids in depth-first pre-order, which is also source order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        out
    }

    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.nodes[id].children.iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// True when no loop, module, or assignment nodes remain.
    pub fn is_expanded(&self) -> bool {
        self.nodes.iter().all(|n| {
            !matches!(
                n.kind,
                NodeKind::For { .. }
                    | NodeKind::ModuleCall { .. }
                    | NodeKind::ModuleDef { .. }
                    | NodeKind::Assign { .. }
            )
        })
    }

    /// Structural equality: kinds, arguments, comments and child order; spans
    /// and node ids are ignored.
    pub fn structurally_eq(&self, other: &SyntaxTree) -> bool {
        fn eq(a: &SyntaxTree, an: NodeId, b: &SyntaxTree, bn: NodeId) -> bool {
            let (x, y) = (a.node(an), b.node(bn));
            x.kind == y.kind
                && x.args == y.args
                && x.comments == y.comments
                && x.trailing_comments == y.trailing_comments
                && x.children.len() == y.children.len()
                && x
                    .children
                    .iter()
                    .zip(&y.children)
                    .all(|(&c, &d)| eq(a, c, b, d))
        }
        eq(self, self.root, other, other.root)
    }

    /// Same as [`structurally_eq`](Self::structurally_eq) but ignoring comments.
    pub fn geometry_eq(&self, other: &SyntaxTree) -> bool {
        fn eq(a: &SyntaxTree, an: NodeId, b: &SyntaxTree, bn: NodeId) -> bool {
            let (x, y) = (a.node(an), b.node(bn));
            x.kind == y.kind
                && x.args == y.args
                && x.children.len() == y.children.len()
                && x
                    .children
                    .iter()
                    .zip(&y.children)
                    .all(|(&c, &d)| eq(a, c, b, d))
        }
        eq(self, self.root, other, other.root)
    }
}
