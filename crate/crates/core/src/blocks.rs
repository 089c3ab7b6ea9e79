//! Commentable code blocks and the comments attached to them.
//!
//! A breadth-first walk from the root stops at *irreducible* blocks: a single
//! primitive under any chain of single-child wrappers, or a
//! difference/intersection/hull whose subtree contains only primitives and
//! transforms. Group nodes above two or more blocks become *composite* blocks.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scad::{BooleanOp, NodeId, NodeKind, SourceFile, Span, SyntaxTree};

/// Sentinel label for blocks that received no vote.
pub const UNLABELED: &str = "unlabeled";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Irreducible,
    Composite,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeBlock {
    pub id: BlockId,
    pub kind: BlockKind,
    pub span: Span,
    pub ast_node: NodeId,
    pub parent: Option<BlockId>,
    pub children: Vec<BlockId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BlockSet {
    /// Indexed by `BlockId`, in source order.
    pub blocks: Vec<CodeBlock>,
    pub roots: Vec<BlockId>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error("NotExpanded: tree still contains loops, modules or assignments")]
    NotExpanded,
    #[error("MalformedComment line {line}: comment above a block has no label text")]
    MalformedComment { line: u32 },
}

impl BlockSet {
    pub fn get(&self, id: BlockId) -> &CodeBlock {
        &self.blocks[id.index()]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.blocks.iter().map(|b| b.id)
    }

    pub fn irreducible(&self) -> impl Iterator<Item = &CodeBlock> + '_ {
        self.blocks.iter().filter(|b| b.kind == BlockKind::Irreducible)
    }

    /// Irreducible blocks at or below `id`, in source order.
    pub fn irreducible_under(&self, id: BlockId) -> Vec<BlockId> {
        let block = self.get(id);
        if block.kind == BlockKind::Irreducible {
            return vec![id];
        }
        block
            .children
            .iter()
            .flat_map(|&c| self.irreducible_under(c))
            .collect()
    }

    /// Same forest shape and spans; node ids are not compared.
    pub fn same_structure(&self, other: &BlockSet) -> bool {
        self.roots == other.roots
            && self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| {
                a.kind == b.kind && a.parent == b.parent && a.children == b.children
            })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.blocks
                .iter()
                .map(|b| {
                    serde_json::json!({
                        "id": b.id,
                        "kind": b.kind,
                        "span": [b.span.start_line, b.span.end_line],
                        "parent": b.parent,
                        "children": b.children,
                    })
                })
                .collect(),
        )
    }
}

/// Per-block labels and confidence scores.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockAssignment {
    pub labels: BTreeMap<BlockId, Vec<String>>,
    #[serde(default)]
    pub scores: BTreeMap<BlockId, f64>,
}

impl BlockAssignment {
    pub fn labels_of(&self, id: BlockId) -> &[String] {
        self.labels.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// First label, used as the block's prediction.
    pub fn primary(&self, id: BlockId) -> Option<&str> {
        self.labels_of(id).first().map(String::as_str)
    }

    pub fn set(&mut self, id: BlockId, labels: Vec<String>) {
        self.labels.insert(id, labels);
    }

    /// Only blocks with at least one label.
    pub fn labeled(&self) -> impl Iterator<Item = (BlockId, &[String])> + '_ {
        self.labels
            .iter()
            .filter(|(_, l)| !l.is_empty())
            .map(|(&id, l)| (id, l.as_slice()))
    }

    pub fn restricted_to_labeled(&self) -> BlockAssignment {
        BlockAssignment {
            labels: self
                .labeled()
                .map(|(id, l)| (id, l.to_vec()))
                .collect(),
            scores: BTreeMap::new(),
        }
    }
}

fn is_wrapper(kind: &NodeKind) -> bool {
    matches!(kind, NodeKind::Transform(_) | NodeKind::Boolean(BooleanOp::Union))
}

fn only_primitives_and_transforms(tree: &SyntaxTree, id: NodeId) -> bool {
    tree.descendants(id)
        .iter()
        .all(|&d| matches!(tree.node(d).kind, NodeKind::Primitive(_) | NodeKind::Transform(_)))
}

/// Stop point of the downward walk.
pub fn is_irreducible(tree: &SyntaxTree, id: NodeId) -> bool {
    let node = tree.node(id);
    match &node.kind {
        NodeKind::Primitive(_) => true,
        // A hull's surface cannot be split among its operands.
        NodeKind::Hull => !node.children.is_empty(),
        NodeKind::Boolean(BooleanOp::Difference | BooleanOp::Intersection) => {
            !node.children.is_empty() && only_primitives_and_transforms(tree, id)
        }
        kind if is_wrapper(kind) => node.children.len() == 1 && is_irreducible(tree, node.children[0]),
        _ => false,
    }
}

/// Children the walk descends into. Subtracted operands of a difference
/// remove geometry and are never commentable on their own.
fn walk_children(tree: &SyntaxTree, id: NodeId) -> &[NodeId] {
    let node = tree.node(id);
    match node.kind {
        NodeKind::Boolean(BooleanOp::Difference) => &node.children[..node.children.len().min(1)],
        _ => &node.children,
    }
}

/// Single top-level union that wraps the whole program, treated as the root.
fn root_union(tree: &SyntaxTree) -> Option<NodeId> {
    let root = tree.root();
    match root.children.as_slice() {
        [only] if tree.node(*only).kind == NodeKind::Boolean(BooleanOp::Union)
            && !is_irreducible(tree, *only) =>
        {
            Some(*only)
        }
        _ => None,
    }
}

pub fn find_irreducible_blocks(tree: &SyntaxTree) -> Result<Vec<CodeBlock>, BlockError> {
    if !tree.is_expanded() {
        return Err(BlockError::NotExpanded);
    }
    let mut stops = Vec::new();
    let mut queue: VecDeque<NodeId> = tree.root().children.iter().copied().collect();
    while let Some(id) = queue.pop_front() {
        if is_irreducible(tree, id) {
            stops.push(id);
        } else {
            queue.extend(walk_children(tree, id));
        }
    }
    // Pre-order node ids follow source order.
    stops.sort_unstable();
    Ok(stops
        .into_iter()
        .enumerate()
        .map(|(i, node)| CodeBlock {
            id: BlockId(i as u32),
            kind: BlockKind::Irreducible,
            span: tree.node(node).span,
            ast_node: node,
            parent: None,
            children: Vec::new(),
        })
        .collect())
}

pub fn collect_commentable_blocks(leaves: &[CodeBlock], tree: &SyntaxTree) -> BlockSet {
    struct Draft {
        kind: BlockKind,
        node: NodeId,
        span: Span,
        children: Vec<usize>,
    }

    fn build(
        tree: &SyntaxTree,
        id: NodeId,
        leaf_at: &HashMap<NodeId, usize>,
        drafts: &mut Vec<Draft>,
    ) -> Vec<usize> {
        if let Some(&leaf) = leaf_at.get(&id) {
            return vec![leaf];
        }
        let below: Vec<usize> = walk_children(tree, id)
            .iter()
            .flat_map(|&c| build(tree, c, leaf_at, drafts))
            .collect();
        let node = tree.node(id);
        if below.len() >= 2 {
            drafts.push(Draft {
                kind: BlockKind::Composite,
                node: id,
                span: node.span,
                children: below,
            });
            return vec![drafts.len() - 1];
        }
        if let [single] = below[..] {
            // Extend a composite over single-child wrappers above it.
            if drafts[single].kind == BlockKind::Composite && is_wrapper(&node.kind) && node.children.len() == 1 {
                drafts[single].node = id;
                drafts[single].span = node.span;
            }
        }
        below
    }

    let mut drafts: Vec<Draft> = leaves
        .iter()
        .map(|b| Draft {
            kind: BlockKind::Irreducible,
            node: b.ast_node,
            span: b.span,
            children: Vec::new(),
        })
        .collect();
    let leaf_at: HashMap<NodeId, usize> = leaves.iter().enumerate().map(|(i, b)| (b.ast_node, i)).collect();

    let top_level: Vec<NodeId> = match root_union(tree) {
        Some(u) => tree.node(u).children.clone(),
        None => tree.root().children.clone(),
    };
    let roots: Vec<usize> = top_level
        .iter()
        .flat_map(|&c| build(tree, c, &leaf_at, &mut drafts))
        .collect();

    // Renumber in source order (pre-order node ids; composites precede their children).
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.sort_by_key(|&d| drafts[d].node);
    let mut new_id = vec![BlockId(0); drafts.len()];
    for (i, &d) in order.iter().enumerate() {
        new_id[d] = BlockId(i as u32);
    }
    let mut blocks: Vec<CodeBlock> = order
        .iter()
        .map(|&d| CodeBlock {
            id: new_id[d],
            kind: drafts[d].kind,
            span: drafts[d].span,
            ast_node: drafts[d].node,
            parent: None,
            children: drafts[d].children.iter().map(|&c| new_id[c]).collect(),
        })
        .collect();
    for i in 0..blocks.len() {
        for c in blocks[i].children.clone() {
            blocks[c.index()].parent = Some(BlockId(i as u32));
        }
    }
    BlockSet {
        blocks,
        roots: roots.into_iter().map(|r| new_id[r]).collect(),
    }
}

/// Irreducible discovery plus composite collection.
pub fn analyze(tree: &SyntaxTree) -> Result<BlockSet, BlockError> {
    let leaves = find_irreducible_blocks(tree)?;
    Ok(collect_commentable_blocks(&leaves, tree))
}

fn is_generated_comment(line: &str) -> bool {
    let t = line.trim();
    let Some(rest) = t.strip_prefix("// ") else {
        return false;
    };
    !rest.is_empty() && rest.chars().all(|c| c.is_ascii_lowercase() || c == ' ' || c == ',')
}

pub fn format_comment(labels: &[String]) -> String {
    format!("// {}", labels.join(", "))
}

/// Labels written at each block start line; blocks sharing a line share one comment.
fn labels_by_line(bs: &BlockSet, a: &BlockAssignment) -> BTreeMap<u32, Vec<String>> {
    let mut by_line: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for block in &bs.blocks {
        let labels = a.labels_of(block.id);
        if labels.is_empty() {
            continue;
        }
        let entry = by_line.entry(block.span.start_line).or_default();
        for l in labels {
            if !entry.contains(l) {
                entry.push(l.clone());
            }
        }
    }
    by_line
}

/// Writes `// label[, label]*` above the first line of each assigned block,
/// replacing generated comments already there. Blocks missing from the
/// assignment keep whatever comment they had.
pub fn insert_comments(source: &SourceFile, bs: &BlockSet, a: &BlockAssignment) -> (SourceFile, Vec<String>) {
    let mut warnings = Vec::new();
    for block in &bs.blocks {
        if a.labels_of(block.id).iter().any(|l| l == UNLABELED) {
            warnings.push(format!(
                "block {} (lines {}-{}) is unlabeled",
                block.id, block.span.start_line, block.span.end_line
            ));
        }
    }
    let by_line = labels_by_line(bs, a);
    let lines = source.lines();
    let mut drop = vec![false; lines.len() + 1];
    for &target in by_line.keys() {
        let mut k = target as usize - 1;
        while k >= 1 && is_generated_comment(lines[k - 1]) {
            drop[k] = true;
            k -= 1;
        }
    }
    let mut out = String::with_capacity(source.text.len() + by_line.len() * 16);
    for (i, line) in lines.iter().enumerate() {
        let n = i + 1;
        if drop[n] {
            continue;
        }
        if let Some(labels) = by_line.get(&(n as u32)) {
            let indent: String = line.chars().take_while(|c| c.is_whitespace()).collect();
            out.push_str(&indent);
            out.push_str(&format_comment(labels));
            out.push('\n');
        }
        out.push_str(line);
        out.push('\n');
    }
    (SourceFile::new(source.path.clone(), out), warnings)
}

/// Reads the `// l1, l2` comment directly above each block. Blocks without
/// one are left out of the assignment.
pub fn read_ground_truth(source: &SourceFile, bs: &BlockSet) -> Result<BlockAssignment, BlockError> {
    let mut a = BlockAssignment::default();
    for block in &bs.blocks {
        let above = block.span.start_line.saturating_sub(1);
        let Some(text) = source.line(above) else { continue };
        let Some(body) = text.trim().strip_prefix("//") else { continue };
        if !body.chars().any(|c| c.is_alphanumeric() || c == '_') {
            return Err(BlockError::MalformedComment { line: above });
        }
        let labels: Vec<String> = body
            .split(',')
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        a.set(block.id, labels);
    }
    Ok(a)
}
