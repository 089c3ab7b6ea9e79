//! Recursive-descent parser for the supported OpenSCAD subset.

use std::collections::HashSet;
use std::sync::Arc;

use super::ast::{
    Argument, AstNode, BinaryOp, Expr, NodeId, NodeKind, Param, Span, SyntaxTree,
};
use super::error::ParseError;
use super::lexer::{lex, Spanned, Token};
use super::source::SourceFile;

/// OpenSCAD constructs outside the supported subset. Named explicitly so the
/// error says "unsupported" rather than "unknown module".
const UNSUPPORTED: &[&str] = &[
    "minkowski",
    "linear_extrude",
    "rotate_extrude",
    "polyhedron",
    "square",
    "circle",
    "polygon",
    "text",
    "import",
    "color",
    "offset",
    "projection",
    "render",
    "children",
    "echo",
    "assert",
    "let",
    "if",
    "else",
    "each",
    "resize",
    "surface",
    "function",
    "include",
    "use",
];

pub fn parse(source: &SourceFile) -> Result<SyntaxTree, ParseError> {
    let tokens = lex(&source.text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        nodes: Vec::new(),
        pending_comments: Vec::new(),
        module_depth: 0,
    };
    let root = parser.alloc(NodeKind::Root, Vec::new(), 1);
    let children = parser.statements_until(&Token::Eof)?;
    let trailing = std::mem::take(&mut parser.pending_comments);
    let last_line = source.line_count().max(1) as u32;
    {
        let r = &mut parser.nodes[root];
        r.children = children;
        r.trailing_comments = trailing;
        r.span = Span::new(1, last_line);
    }
    let tree = SyntaxTree {
        root,
        nodes: parser.nodes,
        source: Arc::new(source.clone()),
    };
    check_module_calls(&tree)?;
    Ok(tree)
}

pub fn parse_str(text: &str) -> Result<SyntaxTree, ParseError> {
    parse(&SourceFile::inline(text))
}

fn check_module_calls(tree: &SyntaxTree) -> Result<(), ParseError> {
    let defined: HashSet<&str> = tree
        .nodes
        .iter()
        .filter_map(|n| match &n.kind {
            NodeKind::ModuleDef { name, .. } => Some(name.as_str()),
            _ => None,
        })
        .collect();
    for node in &tree.nodes {
        if let NodeKind::ModuleCall { name } = &node.kind {
            if !defined.contains(name.as_str()) {
                return Err(ParseError::UnknownIdentifier {
                    line: node.span.start_line,
                    name: name.clone(),
                });
            }
        }
    }
    Ok(())
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    nodes: Vec<AstNode>,
    pending_comments: Vec<String>,
    module_depth: usize,
}

impl Parser {
    fn alloc(&mut self, kind: NodeKind, args: Vec<Argument>, line: u32) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(AstNode {
            id,
            kind,
            args,
            span: Span::new(line, line),
            children: Vec::new(),
            comments: Vec::new(),
            trailing_comments: Vec::new(),
        });
        id
    }

    /// Current non-comment token; comments are moved to the pending list.
    fn peek(&mut self) -> &Spanned {
        while let Token::Comment(text) = &self.tokens[self.pos].token {
            self.pending_comments.push(text.clone());
            self.pos += 1;
        }
        &self.tokens[self.pos]
    }

    fn peek_token(&mut self) -> Token {
        self.peek().token.clone()
    }

    /// Token after the current one, skipping comments without consuming them.
    fn peek_second(&mut self) -> Token {
        self.peek();
        self.tokens[self.pos + 1..]
            .iter()
            .find(|t| !matches!(t.token, Token::Comment(_)))
            .map(|t| t.token.clone())
            .unwrap_or(Token::Eof)
    }

    fn advance(&mut self) -> Spanned {
        self.peek();
        let t = self.tokens[self.pos].clone();
        if t.token != Token::Eof {
            self.pos += 1;
        }
        t
    }

    fn error(&mut self, expected: &[&str], detail: Option<String>) -> ParseError {
        let t = self.peek().clone();
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            detail: detail.or_else(|| Some(format!("found {}", t.token.describe()))),
        }
    }

    fn expect(&mut self, token: Token, name: &str) -> Result<Spanned, ParseError> {
        if self.peek().token == token {
            Ok(self.advance())
        } else {
            Err(self.error(&[name], None))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Spanned), ParseError> {
        match self.peek_token() {
            Token::Ident(name) => Ok((name, self.advance())),
            _ => Err(self.error(&["identifier"], None)),
        }
    }

    fn statements_until(&mut self, end: &Token) -> Result<Vec<NodeId>, ParseError> {
        let mut out = Vec::new();
        loop {
            let tok = self.peek_token();
            if &tok == end {
                return Ok(out);
            }
            if tok == Token::Eof {
                return Err(self.error(&["`}`"], None));
            }
            if let Some(id) = self.statement()? {
                out.push(id);
            }
        }
    }

    /// Parses `{ stmts }` or a single statement; returns children and the last line.
    fn body(&mut self, owner: NodeId) -> Result<(Vec<NodeId>, u32), ParseError> {
        if self.peek_token() == Token::LBrace {
            self.advance();
            let children = self.statements_until(&Token::RBrace)?;
            let trailing = std::mem::take(&mut self.pending_comments);
            self.nodes[owner].trailing_comments = trailing;
            let close = self.advance();
            Ok((children, close.line))
        } else if self.peek_token() == Token::Semi {
            let semi = self.advance();
            Ok((Vec::new(), semi.line))
        } else {
            match self.statement()? {
                Some(child) => {
                    let end = self.nodes[child].span.end_line;
                    Ok((vec![child], end))
                }
                None => Err(self.error(&["statement"], None)),
            }
        }
    }

    fn statement(&mut self) -> Result<Option<NodeId>, ParseError> {
        let first = self.peek().clone();
        match first.token.clone() {
            Token::Semi => {
                self.advance();
                Ok(None)
            }
            Token::Module => self.module_def().map(Some),
            Token::For => self.for_loop().map(Some),
            Token::Ident(name) => {
                if self.peek_second() == Token::Assign {
                    self.assignment(name).map(Some)
                } else if UNSUPPORTED.contains(&name.as_str()) {
                    Err(ParseError::Syntax {
                        line: first.line,
                        col: first.col,
                        expected: vec!["statement".into()],
                        detail: Some(format!("unsupported construct `{name}`")),
                    })
                } else {
                    self.call(name).map(Some)
                }
            }
            _ => Err(self.error(&["statement", "identifier", "`module`", "`for`"], None)),
        }
    }

    fn take_comments(&mut self, id: NodeId) {
        let comments = std::mem::take(&mut self.pending_comments);
        self.nodes[id].comments = comments;
    }

    fn assignment(&mut self, name: String) -> Result<NodeId, ParseError> {
        let start = self.advance();
        let id = self.alloc(
            NodeKind::Assign {
                name,
                value: Expr::Number(0.0),
            },
            Vec::new(),
            start.line,
        );
        self.take_comments(id);
        self.expect(Token::Assign, "`=`")?;
        let value = self.expr()?;
        let semi = self.expect(Token::Semi, "`;`")?;
        if let NodeKind::Assign { value: v, .. } = &mut self.nodes[id].kind {
            *v = value;
        }
        self.nodes[id].span.end_line = semi.line;
        Ok(id)
    }

    fn module_def(&mut self) -> Result<NodeId, ParseError> {
        let start = self.advance();
        if self.module_depth >= 2 {
            return Err(ParseError::Syntax {
                line: start.line,
                col: start.col,
                expected: vec!["statement".into()],
                detail: Some("module definitions nest at most one level deep".into()),
            });
        }
        let (name, _) = self.expect_ident()?;
        let id = self.alloc(
            NodeKind::ModuleDef {
                name: name.clone(),
                params: Vec::new(),
            },
            Vec::new(),
            start.line,
        );
        self.take_comments(id);
        self.expect(Token::LParen, "`(`")?;
        let mut params = Vec::new();
        while self.peek_token() != Token::RParen {
            let (pname, _) = self.expect_ident()?;
            let default = if self.peek_token() == Token::Assign {
                self.advance();
                Some(self.expr()?)
            } else {
                None
            };
            params.push(Param {
                name: pname,
                default,
            });
            if self.peek_token() == Token::Comma {
                self.advance();
            } else if self.peek_token() != Token::RParen {
                return Err(self.error(&["`,`", "`)`"], None));
            }
        }
        self.advance();
        self.nodes[id].kind = NodeKind::ModuleDef { name, params };
        self.module_depth += 1;
        let body = self.body(id);
        self.module_depth -= 1;
        let (children, end) = body?;
        self.nodes[id].children = children;
        self.nodes[id].span.end_line = end;
        Ok(id)
    }

    fn for_loop(&mut self) -> Result<NodeId, ParseError> {
        let start = self.advance();
        let id = self.alloc(NodeKind::For { bindings: Vec::new() }, Vec::new(), start.line);
        self.take_comments(id);
        self.expect(Token::LParen, "`(`")?;
        let mut bindings = Vec::new();
        loop {
            let (var, _) = self.expect_ident()?;
            self.expect(Token::Assign, "`=`")?;
            bindings.push((var, self.expr()?));
            match self.peek_token() {
                Token::Comma => {
                    self.advance();
                }
                Token::RParen => break,
                _ => return Err(self.error(&["`,`", "`)`"], None)),
            }
        }
        self.advance();
        self.nodes[id].kind = NodeKind::For { bindings };
        let (children, end) = self.body(id)?;
        self.nodes[id].children = children;
        self.nodes[id].span.end_line = end;
        Ok(id)
    }

    fn call(&mut self, name: String) -> Result<NodeId, ParseError> {
        let start = self.advance();
        let kind = NodeKind::builtin(&name).unwrap_or(NodeKind::ModuleCall { name: name.clone() });
        let id = self.alloc(kind.clone(), Vec::new(), start.line);
        self.take_comments(id);
        self.expect(Token::LParen, "`(`")?;
        let args = self.arguments()?;
        self.nodes[id].args = args;

        let (children, end) = match &kind {
            NodeKind::Primitive(_) | NodeKind::ModuleCall { .. } => {
                let semi = self.expect(Token::Semi, "`;`")?;
                (Vec::new(), semi.line)
            }
            _ => self.body(id)?,
        };
        if matches!(kind, NodeKind::Transform(_)) && children.is_empty() {
            return Err(ParseError::Syntax {
                line: start.line,
                col: start.col,
                expected: vec!["statement".into()],
                detail: Some(format!("`{name}` requires a child statement")),
            });
        }
        self.nodes[id].children = children;
        self.nodes[id].span.end_line = end;
        Ok(id)
    }

    /// Argument list after `(`, consuming the closing `)`.
    fn arguments(&mut self) -> Result<Vec<Argument>, ParseError> {
        let mut args = Vec::new();
        loop {
            match self.peek_token() {
                Token::RParen => {
                    self.advance();
                    return Ok(args);
                }
                Token::Ident(name) if self.peek_second() == Token::Assign => {
                    self.advance();
                    self.advance();
                    let value = self.expr()?;
                    args.push(Argument {
                        name: Some(name),
                        value,
                    });
                }
                _ => {
                    if !self.starts_expr() {
                        return Err(self.error(&["expression", "identifier", "`)`"], None));
                    }
                    let value = self.expr()?;
                    args.push(Argument { name: None, value });
                }
            }
            match self.peek_token() {
                Token::Comma => {
                    self.advance();
                }
                Token::RParen => {}
                _ => return Err(self.error(&["`,`", "`)`"], None)),
            }
        }
    }

    fn starts_expr(&mut self) -> bool {
        matches!(
            self.peek_token(),
            Token::Number(_)
                | Token::Ident(_)
                | Token::True
                | Token::False
                | Token::LParen
                | Token::LBracket
                | Token::Minus
                | Token::Plus
        )
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_token() {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_token() {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_token() {
            Token::Minus => {
                self.advance();
                Ok(match self.unary()? {
                    Expr::Number(n) => Expr::Number(-n),
                    other => Expr::Neg(Box::new(other)),
                })
            }
            Token::Plus => {
                self.advance();
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_token() {
            Token::Number(n) => {
                self.advance();
                Ok(Expr::Number(n))
            }
            Token::True => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Token::False => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Token::Ident(name) => {
                self.advance();
                if self.peek_token() == Token::LParen {
                    let t = self.peek().clone();
                    return Err(ParseError::Syntax {
                        line: t.line,
                        col: t.col,
                        expected: vec!["operator".into()],
                        detail: Some(format!("function calls are not supported (`{name}(...)`)")),
                    });
                }
                Ok(Expr::Ident(name))
            }
            Token::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Token::LBracket => self.bracket(),
            _ => Err(self.error(&["expression"], None)),
        }
    }

    fn bracket(&mut self) -> Result<Expr, ParseError> {
        self.advance();
        if self.peek_token() == Token::RBracket {
            self.advance();
            return Ok(Expr::Vector(Vec::new()));
        }
        let first = self.expr()?;
        if self.peek_token() == Token::Colon {
            self.advance();
            let second = self.expr()?;
            let (step, end) = if self.peek_token() == Token::Colon {
                self.advance();
                (Some(Box::new(second)), self.expr()?)
            } else {
                (None, second)
            };
            self.expect(Token::RBracket, "`]`")?;
            return Ok(Expr::Range {
                start: Box::new(first),
                step,
                end: Box::new(end),
            });
        }
        let mut items = vec![first];
        loop {
            match self.peek_token() {
                Token::Comma => {
                    self.advance();
                    items.push(self.expr()?);
                }
                Token::RBracket => {
                    self.advance();
                    return Ok(Expr::Vector(items));
                }
                _ => return Err(self.error(&["`,`", "`]`"], None)),
            }
        }
    }
}
