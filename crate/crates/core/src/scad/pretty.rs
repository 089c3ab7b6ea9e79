use std::fmt::Write as _;

use super::ast::{NodeId, NodeKind, SyntaxTree};
use super::source::SourceFile;

const INDENT: &str = "  ";

/// Canonical text for a tree: one statement per line, two-space indents,
/// comments on their own lines before the statement they belong to.
pub fn pretty_print(tree: &SyntaxTree) -> SourceFile {
    let mut out = String::new();
    let root = tree.root();
    for &c in &root.children {
        write_node(tree, c, 0, &mut out);
    }
    for comment in &root.trailing_comments {
        write_comment(comment, 0, &mut out);
    }
    SourceFile::new(tree.source.path.clone(), out)
}

fn write_comment(comment: &str, depth: usize, out: &mut String) {
    // Block comments keep their inner lines verbatim so they reparse identically.
    let _ = writeln!(out, "{}{}", INDENT.repeat(depth), comment);
}

fn write_node(tree: &SyntaxTree, id: NodeId, depth: usize, out: &mut String) {
    let node = tree.node(id);
    let pad = INDENT.repeat(depth);
    for comment in &node.comments {
        write_comment(comment, depth, out);
    }
    let args = node
        .args
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let head = match &node.kind {
        NodeKind::Assign { name, value } => {
            let _ = writeln!(out, "{pad}{name} = {value};");
            return;
        }
        NodeKind::ModuleCall { name } => {
            let _ = writeln!(out, "{pad}{name}({args});");
            return;
        }
        NodeKind::Primitive(_) => {
            let _ = writeln!(out, "{pad}{}({args});", node.kind.keyword());
            return;
        }
        NodeKind::ModuleDef { name, params } => {
            let params = params
                .iter()
                .map(|p| match &p.default {
                    Some(d) => format!("{} = {d}", p.name),
                    None => p.name.clone(),
                })
                .collect::<Vec<_>>()
                .join(", ");
            format!("module {name}({params})")
        }
        NodeKind::For { bindings } => {
            let b = bindings
                .iter()
                .map(|(v, e)| format!("{v} = {e}"))
                .collect::<Vec<_>>()
                .join(", ");
            format!("for ({b})")
        }
        NodeKind::Root => unreachable!("root is printed by the caller"),
        kind => format!("{}({args})", kind.keyword()),
    };
    let _ = writeln!(out, "{pad}{head} {{");
    for &c in &node.children {
        write_node(tree, c, depth + 1, out);
    }
    for comment in &node.trailing_comments {
        write_comment(comment, depth + 1, out);
    }
    let _ = writeln!(out, "{pad}}}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scad::expand::expand;
    use crate::scad::parser::{parse, parse_str};
    use crate::scad::value::Env;

    fn round_trips(text: &str) {
        let tree = parse_str(text).unwrap();
        let printed = pretty_print(&tree);
        let again = parse(&printed).unwrap_or_else(|e| panic!("{e}\n{}", printed.text));
        assert!(tree.structurally_eq(&again), "{}", printed.text);
    }

    #[test]
    fn cube_round_trip() {
        round_trips("cube([1,2,3]);");
        assert_eq!(pretty_print(&parse_str("cube([1,2,3]);").unwrap()).text, "cube([1, 2, 3]);\n");
    }

    #[test]
    fn expanded_loop_prints_explicit_statements() {
        let tree = expand(&parse_str("for(i=[0:2]) cube(i+1);").unwrap(), &Env::new()).unwrap();
        assert_eq!(pretty_print(&tree).text, "cube(1);\ncube(2);\ncube(3);\n");
    }

    #[test]
    fn comment_precedes_statement() {
        let tree = parse_str("union() { // wing\n sphere(2); }").unwrap();
        assert_eq!(pretty_print(&tree).text, "union() {\n  // wing\n  sphere(2);\n}\n");
    }

    #[test]
    fn expressions_keep_their_shape() {
        round_trips("a = 1 - (2 - 3); b = (1 + 2) * -c; d = -(a + b) / 2; e = [0 : 0.5 : 2];");
        round_trips("module m(x, y = [1, 2]) { translate([x, -y[0] + 0, 0]) cube(1); } m(1);".replace("y[0]", "x").as_str());
        round_trips("/* block\n   comment */\nfor (i = [0 : 3], j = [1, 2]) { rotate([0, 0, i * 90]) cube(j, center = true); }\n// tail");
    }
}
