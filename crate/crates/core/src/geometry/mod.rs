//! Implicit CSG execution of an expanded tree: membership, bounds, hulls and
//! block attribution.

pub mod aabb;
pub mod affine;
pub mod hull;
pub mod sampling;

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

pub use aabb::Aabb;
pub use affine::{Affine, Primitive};
pub use hull::{ConvexPolytope, HalfSpace};
pub use sampling::{sample_labeled_points, SurfaceSample};

use crate::blocks::{BlockId, BlockKind, BlockSet, CodeBlock};
use crate::scad::{BooleanOp, NodeId, NodeKind, SyntaxTree};

/// Boundary samples drawn per hull.
pub const HULL_SAMPLES: usize = 2048;
/// Hull membership slack, relative to the shape diagonal.
pub const HULL_TOLERANCE: f64 = 1e-6;
/// Attribution dilation, relative to the shape diagonal.
pub const ATTRIBUTION_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("InvalidArgument line {line}: {message}")]
    InvalidArgument { line: u32, message: String },
    #[error("EmptyShape: the program produces no solid geometry")]
    EmptyShape,
    #[error("NotExpanded: tree still contains loops, modules or assignments")]
    NotExpanded,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf { prim: Primitive, to_local: Affine, to_world: Affine },
    Hull(ConvexPolytope),
    Union,
    Intersection,
    Difference,
    Empty,
}

#[derive(Clone, Debug)]
struct CNode {
    op: Op,
    children: Vec<u32>,
    aabb: Aabb,
    ast: NodeId,
}

/// Executable solid for an expanded tree, immutable once built.
#[derive(Clone, Debug)]
pub struct Shape {
    tree: SyntaxTree,
    blocks: BlockSet,
    nodes: Vec<CNode>,
    node_of: HashMap<NodeId, u32>,
    root: u32,
    bounds: Aabb,
    diag: f64,
    /// Irreducible blocks in source order with their compiled node.
    block_nodes: Vec<(BlockId, u32)>,
    /// Primitive node → owning irreducible block.
    pub block_index: HashMap<NodeId, BlockId>,
    /// Leaves and hulls whose interior can contribute to the solid.
    positive: Vec<u32>,
    pub warnings: Vec<String>,
}

/// Unit offsets used to dilate a point: 6 axes and 8 diagonals.
fn probe_directions() -> [Vector3<f64>; 14] {
    let s = 1.0 / 3f64.sqrt();
    [
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(-1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(s, s, s),
        Vector3::new(s, s, -s),
        Vector3::new(s, -s, s),
        Vector3::new(s, -s, -s),
        Vector3::new(-s, s, s),
        Vector3::new(-s, s, -s),
        Vector3::new(-s, -s, s),
        Vector3::new(-s, -s, -s),
    ]
}

fn pad_rounding(b: Aabb) -> Aabb {
    if b.is_empty() {
        return b;
    }
    let scale = b.diag() + b.min.coords.amax().max(b.max.coords.amax());
    b.dilate(scale * 1e-12)
}

fn leaf_bounds(prim: &Primitive, to_world: &Affine) -> Aabb {
    match *prim {
        Primitive::Sphere { r } => {
            // Exact box of an affine image of a sphere.
            let half = Vector3::from_fn(|i, _| r * to_world.lin.row(i).norm());
            let c = Point3::from(to_world.off);
            Aabb::new(c - half, c + half)
        }
        _ => {
            let (lo, hi) = prim.local_box();
            let corners = Aabb::new(Point3::from(lo), Point3::from(hi)).corners().map(|c| to_world.apply(&c));
            Aabb::from_points(corners.iter())
        }
    }
}

struct Compiler<'a> {
    tree: &'a SyntaxTree,
    nodes: Vec<CNode>,
    node_of: HashMap<NodeId, u32>,
    warnings: Vec<String>,
    hulls: Vec<u32>,
}

impl Compiler<'_> {
    fn push(&mut self, op: Op, children: Vec<u32>, aabb: Aabb, ast: NodeId) -> u32 {
        self.nodes.push(CNode { op, children, aabb, ast });
        (self.nodes.len() - 1) as u32
    }

    fn empty(&mut self, ast: NodeId) -> u32 {
        let id = self.push(Op::Empty, Vec::new(), Aabb::empty(), ast);
        for d in std::iter::once(ast).chain(self.tree.descendants(ast)) {
            self.node_of.insert(d, id);
        }
        id
    }

    fn group(&mut self, op: Op, children: Vec<u32>, ast: NodeId) -> u32 {
        let boxes = children.iter().map(|&c| self.nodes[c as usize].aabb);
        let aabb = match op {
            Op::Union | Op::Hull(_) => boxes.fold(Aabb::empty(), |a, b| a.merge(&b)),
            Op::Intersection => {
                let mut it = boxes;
                let first = it.next().unwrap_or_else(Aabb::empty);
                it.fold(first, |a, b| a.intersect(&b))
            }
            Op::Difference => boxes.take(1).next().unwrap_or_else(Aabb::empty),
            _ => unreachable!("group op"),
        };
        self.push(op, children, aabb, ast)
    }

    fn compile(&mut self, id: NodeId, world: &Affine) -> Result<u32, GeometryError> {
        let node = self.tree.node(id);
        let c = match &node.kind {
            NodeKind::Primitive(kind) => {
                let prim = affine::decode_primitive(node, *kind)?;
                match world.inverse() {
                    Some(to_local) => {
                        let aabb = pad_rounding(leaf_bounds(&prim, world));
                        self.push(Op::Leaf { prim, to_local, to_world: *world }, Vec::new(), aabb, id)
                    }
                    None => {
                        self.warnings
                            .push(format!("SingularTransform line {}: geometry is empty", node.span.start_line));
                        self.empty(id)
                    }
                }
            }
            NodeKind::Transform(kind) => {
                let t = affine::decode_transform(node, *kind)?;
                if t.det().abs() < affine::SINGULAR_DET {
                    self.warnings
                        .push(format!("SingularTransform line {}: geometry is empty", node.span.start_line));
                    return Ok(self.empty(id));
                }
                let inner = world.then_after(&t);
                let children = self.compile_all(&node.children, &inner)?;
                if children.len() == 1 {
                    children[0]
                } else {
                    self.group(Op::Union, children, id)
                }
            }
            NodeKind::Boolean(op) => {
                let children = self.compile_all(&node.children, world)?;
                let op = match op {
                    BooleanOp::Union => Op::Union,
                    BooleanOp::Intersection => Op::Intersection,
                    BooleanOp::Difference => Op::Difference,
                };
                self.group(op, children, id)
            }
            NodeKind::Hull => {
                let children = self.compile_all(&node.children, world)?;
                let placeholder = ConvexPolytope { half_spaces: Vec::new(), tolerance: 0.0, degenerate: false };
                let h = self.group(Op::Hull(placeholder), children, id);
                self.hulls.push(h);
                h
            }
            NodeKind::Root => {
                let children = self.compile_all(&node.children, world)?;
                self.group(Op::Union, children, id)
            }
            _ => return Err(GeometryError::NotExpanded),
        };
        self.node_of.insert(id, c);
        Ok(c)
    }

    fn compile_all(&mut self, ids: &[NodeId], world: &Affine) -> Result<Vec<u32>, GeometryError> {
        ids.iter().map(|&c| self.compile(c, world)).collect()
    }
}

/// Fibonacci-lattice points on a sphere of radius `r`.
fn fibonacci_sphere(r: f64, n: usize) -> impl Iterator<Item = Point3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * i as f64;
        Point3::new(r * rho * phi.cos(), r * rho * phi.sin(), r * z)
    })
}

fn circle(r: f64, z: f64, n: usize) -> impl Iterator<Item = Point3<f64>> {
    (0..n).map(move |i| {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        Point3::new(r * a.cos(), r * a.sin(), z)
    })
}

/// Points whose hull approximates the primitive's hull.
fn primitive_samples(prim: &Primitive, count: usize) -> Vec<Point3<f64>> {
    match *prim {
        Primitive::Box { lo, hi } => Aabb::new(Point3::from(lo), Point3::from(hi)).corners().to_vec(),
        Primitive::Sphere { r } => fibonacci_sphere(r, count.max(8)).collect(),
        Primitive::Cylinder { z0, h, r1, r2 } => {
            let k = (count / 2).max(8);
            circle(r1, z0, k).chain(circle(r2, z0 + h, k)).collect()
        }
    }
}

impl Shape {
    /// Compiles `tree` (expanded) and indexes the irreducible blocks of `blocks`.
    pub fn new(tree: &SyntaxTree, blocks: &BlockSet) -> Result<Shape, GeometryError> {
        if !tree.is_expanded() {
            return Err(GeometryError::NotExpanded);
        }
        let mut c = Compiler {
            tree,
            nodes: Vec::new(),
            node_of: HashMap::new(),
            warnings: Vec::new(),
            hulls: Vec::new(),
        };
        let root = c.compile(tree.root, &Affine::identity())?;
        let bounds = c.nodes[root as usize].aabb;
        if bounds.is_empty() {
            return Err(GeometryError::EmptyShape);
        }
        let diag = bounds.diag().max(f64::MIN_POSITIVE);
        let tolerance = HULL_TOLERANCE * diag;
        let Compiler { mut nodes, node_of, mut warnings, hulls, .. } = c;

        for h in hulls {
            let mut leaves = Vec::new();
            for &child in &nodes[h as usize].children {
                positive_leaves(&nodes, child, &mut leaves);
            }
            let per_leaf = HULL_SAMPLES / leaves.len().max(1);
            let mut points = Vec::new();
            for l in leaves {
                if let Op::Leaf { prim, to_world, .. } = &nodes[l as usize].op {
                    points.extend(primitive_samples(prim, per_leaf).iter().map(|p| to_world.apply(p)));
                }
            }
            let poly = hull::polytope(&points, tolerance);
            if poly.degenerate {
                let line = tree.node(nodes[h as usize].ast).span.start_line;
                warnings.push(format!("DegenerateHull line {line}: using a thickened slab"));
            }
            let node = &mut nodes[h as usize];
            node.aabb = node.aabb.dilate(tolerance);
            node.op = Op::Hull(poly);
        }

        let mut positive = Vec::new();
        positive_leaves(&nodes, root, &mut positive);

        let mut block_nodes = Vec::new();
        let mut block_index = HashMap::new();
        for b in blocks.irreducible() {
            let cn = *node_of.get(&b.ast_node).ok_or(GeometryError::NotExpanded)?;
            block_nodes.push((b.id, cn));
            for d in std::iter::once(b.ast_node).chain(tree.descendants(b.ast_node)) {
                if matches!(tree.node(d).kind, NodeKind::Primitive(_)) {
                    block_index.insert(d, b.id);
                }
            }
        }

        Ok(Shape {
            tree: tree.clone(),
            blocks: blocks.clone(),
            nodes,
            node_of,
            root,
            bounds,
            diag,
            block_nodes,
            block_index,
            positive,
            warnings,
        })
    }

    pub fn tree(&self) -> &SyntaxTree {
        &self.tree
    }

    pub fn blocks(&self) -> &BlockSet {
        &self.blocks
    }

    pub fn diag(&self) -> f64 {
        self.diag
    }

    /// Bounds of the whole solid.
    pub fn root_bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn contains_point(&self, p: &Point3<f64>) -> bool {
        self.contains_c(self.root, p)
    }

    /// Membership for the solid produced by `node`.
    pub fn contains(&self, node: NodeId, p: &Point3<f64>) -> bool {
        self.node_of.get(&node).is_some_and(|&c| self.contains_c(c, p))
    }

    /// Conservative bounds of `node`. Empty means the node provably produces nothing.
    pub fn bounds(&self, node: NodeId) -> Result<Aabb, GeometryError> {
        let b = self
            .node_of
            .get(&node)
            .map(|&c| self.nodes[c as usize].aabb)
            .unwrap_or_else(Aabb::empty);
        if b.is_empty() {
            Err(GeometryError::EmptyShape)
        } else {
            Ok(b)
        }
    }

    pub fn hull_polytope(&self, hull_node: NodeId) -> Option<&ConvexPolytope> {
        match &self.nodes[*self.node_of.get(&hull_node)? as usize].op {
            Op::Hull(p) => Some(p),
            _ => None,
        }
    }

    fn contains_c(&self, i: u32, p: &Point3<f64>) -> bool {
        let n = &self.nodes[i as usize];
        if !n.aabb.contains(p) {
            return false;
        }
        match &n.op {
            Op::Leaf { prim, to_local, .. } => prim.contains(&to_local.apply(p)),
            Op::Hull(poly) => poly.contains(p),
            Op::Union => n.children.iter().any(|&c| self.contains_c(c, p)),
            Op::Intersection => !n.children.is_empty() && n.children.iter().all(|&c| self.contains_c(c, p)),
            Op::Difference => match n.children.split_first() {
                Some((&first, rest)) => self.contains_c(first, p) && !rest.iter().any(|&c| self.contains_c(c, p)),
                None => false,
            },
            Op::Empty => false,
        }
    }

    /// Irreducible block owning a surface point: the earliest block in source
    /// order whose geometry, dilated by the attribution epsilon, contains `p`.
    pub fn attribute_block(&self, p: &Point3<f64>) -> Option<BlockId> {
        let eps = ATTRIBUTION_EPS * self.diag;
        self.block_nodes
            .iter()
            .find(|&&(_, c)| self.contains_dilated_c(c, p, eps))
            .map(|&(id, _)| id)
    }

    fn contains_dilated_c(&self, c: u32, p: &Point3<f64>, eps: f64) -> bool {
        self.nodes[c as usize].aabb.dilate(eps).contains(p)
            && (self.contains_c(c, p) || probe_directions().iter().any(|d| self.contains_c(c, &(p + d * eps))))
    }

    /// Membership in `node`'s solid grown by roughly `eps`: the point itself
    /// or one of 14 probes at distance `eps` lies inside.
    pub fn contains_dilated(&self, node: NodeId, p: &Point3<f64>, eps: f64) -> bool {
        self.node_of.get(&node).is_some_and(|&c| self.contains_dilated_c(c, p, eps))
    }

    /// Irreducible block containing `node`, if any.
    pub fn owning_block(&self, node: NodeId) -> Option<&CodeBlock> {
        self.block_index.get(&node).map(|&b| self.blocks.get(b))
    }

    pub fn is_irreducible(&self, b: BlockId) -> bool {
        self.blocks.get(b).kind == BlockKind::Irreducible
    }

    /// Appends conservative parameter intervals of `o + t·d` that may lie
    /// inside the solid. Outside their union membership is always false.
    pub fn ray_intervals(&self, o: &Point3<f64>, d: &Vector3<f64>, pad: f64, out: &mut Vec<(f64, f64)>) {
        for &i in &self.positive {
            let n = &self.nodes[i as usize];
            let iv = match &n.op {
                Op::Leaf { prim, to_local, .. } => {
                    let q0 = to_local.apply(o).coords;
                    let dq = to_local.apply_vec(d);
                    match *prim {
                        Primitive::Sphere { r } => {
                            let a = dq.norm_squared();
                            let b = q0.dot(&dq);
                            let c = q0.norm_squared() - r * r;
                            let disc = b * b - a * c;
                            // Near-tangent rays keep a zero-width interval; padding covers rounding.
                            if a == 0.0 || disc < -1e-12 * (b * b + a * c.abs()) {
                                None
                            } else {
                                let s = disc.max(0.0).sqrt();
                                Some(((-b - s) / a, (-b + s) / a))
                            }
                        }
                        _ => {
                            let (lo, hi) = prim.local_box();
                            aabb::slab_interval(&lo, &hi, &q0, &dq)
                        }
                    }
                }
                Op::Hull(poly) => poly.ray_interval(o, d),
                _ => None,
            };
            if let Some((t0, t1)) = iv {
                out.push((t0 - pad, t1 + pad));
            }
        }
    }
}

fn positive_leaves(nodes: &[CNode], i: u32, out: &mut Vec<u32>) {
    let n = &nodes[i as usize];
    match n.op {
        Op::Leaf { .. } | Op::Hull(_) => out.push(i),
        Op::Difference => {
            if let Some(&first) = n.children.first() {
                positive_leaves(nodes, first, out);
            }
        }
        Op::Union | Op::Intersection => {
            for &c in &n.children {
                positive_leaves(nodes, c, out);
            }
        }
        Op::Empty => {}
    }
}
