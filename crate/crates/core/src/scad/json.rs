//! `--dump-ast` JSON form: `{id, kind, params, span, children}`.

use serde_json::{json, Map, Value as Json};

use super::ast::{NodeId, NodeKind, SyntaxTree};
use super::value::{eval, Env};

pub fn dump_ast(tree: &SyntaxTree) -> Json {
    node_json(tree, tree.root)
}

fn node_json(tree: &SyntaxTree, id: NodeId) -> Json {
    let node = tree.node(id);
    let mut params = Map::new();
    let mut positional = 0;
    for arg in &node.args {
        let key = match &arg.name {
            Some(n) => n.clone(),
            None => {
                positional += 1;
                format!("#{}", positional - 1)
            }
        };
        params.insert(key, expr_json(&arg.value));
    }
    match &node.kind {
        NodeKind::ModuleDef { name, params: p } => {
            params.insert("name".into(), json!(name));
            params.insert(
                "params".into(),
                Json::Array(p.iter().map(|p| json!(p.name)).collect()),
            );
        }
        NodeKind::ModuleCall { name } => {
            params.insert("name".into(), json!(name));
        }
        NodeKind::For { bindings } => {
            for (v, e) in bindings {
                params.insert(v.clone(), json!(e.to_string()));
            }
        }
        NodeKind::Assign { name, value } => {
            params.insert(name.clone(), expr_json(value));
        }
        _ => {}
    }
    let kind = match &node.kind {
        NodeKind::Root | NodeKind::Hull => node.kind.category().to_string(),
        NodeKind::ModuleDef { .. } | NodeKind::ModuleCall { .. } | NodeKind::For { .. } | NodeKind::Assign { .. } => {
            node.kind.category().to_string()
        }
        k => format!("{}({})", k.category(), k.keyword()),
    };
    let mut obj = json!({
        "id": id,
        "kind": kind,
        "params": params,
        "span": [node.span.start_line, node.span.end_line],
        "children": node.children.iter().map(|&c| node_json(tree, c)).collect::<Vec<_>>(),
    });
    if !node.comments.is_empty() {
        obj["comments"] = json!(node.comments);
    }
    obj
}

/// Literal JSON when the expression is constant, otherwise its source text.
fn expr_json(expr: &super::ast::Expr) -> Json {
    match eval(expr, &Env::new(), 0) {
        Ok(v) => v.to_json(),
        Err(_) => json!(expr.to_string()),
    }
}
