//! Loop unrolling, module inlining and constant folding.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::{Rc, Weak};

use super::ast::{Argument, AstNode, NodeId, NodeKind, Span, SyntaxTree};
use super::error::EvalError;
use super::value::{eval, range_values, Env, Value};

pub const MAX_MODULE_DEPTH: usize = 64;

/// Owned intermediate form; flattened into an arena once expansion finishes.
struct Expanded {
    kind: NodeKind,
    args: Vec<Argument>,
    span: Span,
    comments: Vec<String>,
    trailing_comments: Vec<String>,
    children: Vec<Expanded>,
}

struct ModuleEntry {
    def: NodeId,
    env: Env,
    /// Table of the defining scope, which includes the entry itself.
    scope: Weak<RefCell<Modules>>,
}

type Modules = HashMap<String, Rc<ModuleEntry>>;

struct Expander<'a> {
    tree: &'a SyntaxTree,
}

/// Expands loops, module calls and assignments. Every produced node keeps the
/// span of the statement it came from; nodes produced by a module call take
/// the call site's span.
pub fn expand(tree: &SyntaxTree, env: &Env) -> Result<SyntaxTree, EvalError> {
    let ex = Expander { tree };
    let root = tree.root();
    let children = ex.expand_list(&root.children, env, &Modules::new(), None, 0)?;
    let top = Expanded {
        kind: NodeKind::Root,
        args: Vec::new(),
        span: root.span,
        comments: root.comments.clone(),
        trailing_comments: root.trailing_comments.clone(),
        children,
    };
    let mut nodes = Vec::new();
    flatten(top, &mut nodes);
    Ok(SyntaxTree {
        root: 0,
        nodes,
        source: tree.source.clone(),
    })
}

fn flatten(e: Expanded, out: &mut Vec<AstNode>) -> NodeId {
    let id = out.len();
    out.push(AstNode {
        id,
        kind: e.kind,
        args: e.args,
        span: e.span,
        children: Vec::new(),
        comments: e.comments,
        trailing_comments: e.trailing_comments,
    });
    let children: Vec<NodeId> = e.children.into_iter().map(|c| flatten(c, out)).collect();
    out[id].children = children;
    id
}

impl Expander<'_> {
    fn expand_list(
        &self,
        stmts: &[NodeId],
        env: &Env,
        modules: &Modules,
        span_override: Option<Span>,
        depth: usize,
    ) -> Result<Vec<Expanded>, EvalError> {
        // Assignments apply to the whole scope, evaluated in order.
        let mut scope_env = env.clone();
        for &id in stmts {
            let node = self.tree.node(id);
            if let NodeKind::Assign { name, value } = &node.kind {
                let v = eval(value, &scope_env, node.span.start_line)?;
                scope_env.set(name, v);
            }
        }

        // The table outlives every call expanded from this scope.
        let table = Rc::new(RefCell::new(modules.clone()));
        for &id in stmts {
            if let NodeKind::ModuleDef { name, .. } = &self.tree.node(id).kind {
                let entry = ModuleEntry {
                    def: id,
                    env: scope_env.clone(),
                    scope: Rc::downgrade(&table),
                };
                table.borrow_mut().insert(name.clone(), Rc::new(entry));
            }
        }
        let scope_modules = table.borrow().clone();

        let mut out = Vec::new();
        for &id in stmts {
            let node = self.tree.node(id);
            let line = node.span.start_line;
            let produced = match &node.kind {
                NodeKind::ModuleDef { .. } | NodeKind::Assign { .. } => continue,
                NodeKind::Root => unreachable!("root is never a child"),
                NodeKind::For { bindings } => {
                    let mut produced = Vec::new();
                    self.unroll(node, bindings, 0, &scope_env, &scope_modules, span_override, depth, &mut produced)?;
                    produced
                }
                NodeKind::ModuleCall { name } => {
                    if depth + 1 > MAX_MODULE_DEPTH {
                        return Err(EvalError::new(line, "module recursion depth exceeded"));
                    }
                    let entry = scope_modules
                        .get(name)
                        .ok_or_else(|| EvalError::new(line, format!("no module named `{name}`")))?
                        .clone();
                    let def = self.tree.node(entry.def);
                    let body_env = self.bind_params(def, node, &scope_env, &entry.env)?;
                    let call_span = span_override.unwrap_or(node.span);
                    let def_modules = entry
                        .scope
                        .upgrade()
                        .map(|t| t.borrow().clone())
                        .unwrap_or_default();
                    self.expand_list(&def.children, &body_env, &def_modules, Some(call_span), depth + 1)?
                }
                kind => {
                    let args = node
                        .args
                        .iter()
                        .map(|a| {
                            Ok(Argument {
                                name: a.name.clone(),
                                value: eval(&a.value, &scope_env, line)?.to_expr(),
                            })
                        })
                        .collect::<Result<Vec<_>, EvalError>>()?;
                    let children =
                        self.expand_list(&node.children, &scope_env, &scope_modules, span_override, depth)?;
                    if !matches!(kind, NodeKind::Primitive(_)) && children.is_empty() {
                        // Produces no geometry (e.g. a transform over an empty loop).
                        Vec::new()
                    } else {
                        let keep_comments = span_override.is_none();
                        vec![Expanded {
                            kind: kind.clone(),
                            args,
                            span: span_override.unwrap_or(node.span),
                            comments: if keep_comments { node.comments.clone() } else { Vec::new() },
                            trailing_comments: if keep_comments {
                                node.trailing_comments.clone()
                            } else {
                                Vec::new()
                            },
                            children,
                        }]
                    }
                }
            };
            let mut produced = produced;
            if matches!(node.kind, NodeKind::For { .. } | NodeKind::ModuleCall { .. })
                && span_override.is_none()
            {
                if let Some(first) = produced.first_mut() {
                    let mut comments = node.comments.clone();
                    comments.append(&mut first.comments);
                    first.comments = comments;
                }
            }
            out.extend(produced);
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn unroll(
        &self,
        node: &AstNode,
        bindings: &[(String, super::ast::Expr)],
        index: usize,
        env: &Env,
        modules: &Modules,
        span_override: Option<Span>,
        depth: usize,
        out: &mut Vec<Expanded>,
    ) -> Result<(), EvalError> {
        let Some((var, range)) = bindings.get(index) else {
            let mut body = self.expand_list(&node.children, env, modules, span_override, depth)?;
            if !out.is_empty() {
                // Body comments appear once, on the first iteration.
                strip_comments(&mut body);
            }
            out.extend(body);
            return Ok(());
        };
        for v in range_values(range, env, node.span.start_line)? {
            let inner = env.with(var, Value::Number(v));
            self.unroll(node, bindings, index + 1, &inner, modules, span_override, depth, out)?;
        }
        Ok(())
    }

    fn bind_params(&self, def: &AstNode, call: &AstNode, caller_env: &Env, def_env: &Env) -> Result<Env, EvalError> {
        let line = call.span.start_line;
        let NodeKind::ModuleDef { name, params } = &def.kind else {
            unreachable!("module entry points at a definition");
        };
        let mut values: Vec<Option<Value>> = vec![None; params.len()];
        let mut positional = 0;
        let mut specials = Vec::new();
        for arg in &call.args {
            let v = eval(&arg.value, caller_env, line)?;
            match &arg.name {
                None => {
                    if positional >= params.len() {
                        return Err(EvalError::new(line, format!("too many arguments to `{name}`")));
                    }
                    values[positional] = Some(v);
                    positional += 1;
                }
                Some(n) => match params.iter().position(|p| &p.name == n) {
                    Some(i) => values[i] = Some(v),
                    None if n.starts_with('$') => specials.push((n.clone(), v)),
                    None => {
                        return Err(EvalError::new(line, format!("`{name}` has no parameter `{n}`")))
                    }
                },
            }
        }
        let mut env = def_env.clone();
        for (n, v) in specials {
            env.set(&n, v);
        }
        for (param, value) in params.iter().zip(values) {
            let v = match value {
                Some(v) => v,
                None => match &param.default {
                    Some(d) => eval(d, &env, def.span.start_line)?,
                    None => {
                        return Err(EvalError::new(
                            line,
                            format!("missing argument `{}` for `{name}`", param.name),
                        ))
                    }
                },
            };
            env.set(&param.name, v);
        }
        Ok(env)
    }
}

fn strip_comments(nodes: &mut [Expanded]) {
    for n in nodes {
        n.comments.clear();
        n.trailing_comments.clear();
        strip_comments(&mut n.children);
    }
}
