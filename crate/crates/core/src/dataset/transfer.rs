//! Labeled point clouds and ground-truth transfer onto program blocks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::blocks::{BlockAssignment, BlockSet};
use crate::geometry::Shape;

pub const DEFAULT_SHARE: f64 = 0.2;
/// Block dilation for matching, relative to the shape diagonal.
pub const MATCH_EPS: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledPointCloud {
    pub points: Vec<[f64; 3]>,
    pub labels: Vec<String>,
}

impl LabeledPointCloud {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.points.is_empty() {
            return Err(DatasetError::EmptyCloud);
        }
        if self.points.len() != self.labels.len() {
            return Err(DatasetError::InvalidCloud(format!(
                "{} points but {} labels",
                self.points.len(),
                self.labels.len()
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let c: LabeledPointCloud = serde_json::from_str(text).map_err(|e| DatasetError::InvalidCloud(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// ASCII PLY with `x y z label` vertices; label names come from
    /// `comment label <index> <name>` header lines.
    pub fn to_ply(&self) -> String {
        let mut table: Vec<&str> = Vec::new();
        for l in &self.labels {
            if !table.contains(&l.as_str()) {
                table.push(l);
            }
        }
        let mut out = String::from("ply\nformat ascii 1.0\n");
        for (i, l) in table.iter().enumerate() {
            let _ = writeln!(out, "comment label {i} {l}");
        }
        let _ = write!(
            out,
            "element vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty int label\nend_header\n",
            self.points.len()
        );
        for (p, l) in self.points.iter().zip(&self.labels) {
            let idx = table.iter().position(|t| t == l).expect("label is in table");
            let _ = writeln!(out, "{} {} {} {idx}", p[0], p[1], p[2]);
        }
        out
    }

    pub fn from_ply(text: &str) -> Result<Self, DatasetError> {
        let bad = |m: &str| DatasetError::InvalidCloud(format!("ply: {m}"));
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("ply") {
            return Err(bad("missing magic"));
        }
        let mut table: BTreeMap<usize, String> = BTreeMap::new();
        let mut count = None;
        let mut props = Vec::new();
        for line in lines.by_ref() {
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["format", "ascii", _] => {}
                ["format", ..] => return Err(bad("only ascii is supported")),
                ["comment", "label", i, name] => {
                    table.insert(i.parse().map_err(|_| bad("label index"))?, name.to_string());
                }
                ["comment", ..] => {}
                ["element", "vertex", n] => count = Some(n.parse::<usize>().map_err(|_| bad("vertex count"))?),
                ["element", ..] => {}
                ["property", _, name] => props.push(name.to_string()),
                ["end_header"] => break,
                _ => return Err(bad(&format!("unexpected header line `{line}`"))),
            }
        }
        let count = count.ok_or_else(|| bad("no vertex element"))?;
        let col = |name: &str| props.iter().position(|p| p == name).ok_or_else(|| bad(&format!("no `{name}` property")));
        let (cx, cy, cz, cl) = (col("x")?, col("y")?, col("z")?, col("label")?);
        let mut cloud = LabeledPointCloud { points: Vec::with_capacity(count), labels: Vec::with_capacity(count) };
        for line in lines.filter(|l| !l.trim().is_empty()).take(count) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < props.len() {
                return Err(bad("short vertex line"));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad("number"));
            cloud.points.push([num(cx)?, num(cy)?, num(cz)?]);
            let idx: usize = f[cl].parse().map_err(|_| bad("label index"))?;
            cloud.labels.push(table.get(&idx).cloned().ok_or_else(|| bad(&format!("label {idx} not in table")))?);
        }
        if cloud.points.len() != count {
            return Err(bad("fewer vertices than declared"));
        }
        cloud.validate()?;
        Ok(cloud)
    }
}

/// Majority-vote labels per block from the cloud points falling inside it.
/// Every label holding at least `share` of a block's points is kept, most
/// frequent first. A block with no points takes the nearest point's label.
pub fn transfer_labels(
    blocks: &BlockSet,
    shape: &Shape,
    cloud: &LabeledPointCloud,
    share: f64,
) -> Result<(BlockAssignment, Vec<String>), DatasetError> {
    cloud.validate()?;
    let eps = MATCH_EPS * shape.diag();
    let points: Vec<Point3<f64>> = cloud.points.iter().map(|p| Point3::from(*p)).collect();
    let mut out = BlockAssignment::default();
    let mut warnings = Vec::new();
    for b in &blocks.blocks {
        let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
        let mut total = 0usize;
        for (p, l) in points.iter().zip(&cloud.labels) {
            if shape.contains_dilated(b.ast_node, p, eps) {
                *votes.entry(l).or_default() += 1;
                total += 1;
            }
        }
        if total == 0 {
            let center = shape.bounds(b.ast_node).map(|a| a.center()).unwrap_or(Point3::origin());
            let nearest = points
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, c)| (*a - center).norm_squared().total_cmp(&(*c - center).norm_squared()))
                .map(|(i, _)| i)
                .expect("cloud is non-empty");
            warnings.push(format!(
                "block {} (line {}) matched no cloud points; using nearest label `{}`",
                b.id, b.span.start_line, cloud.labels[nearest]
            ));
            out.set(b.id, vec![cloud.labels[nearest].clone()]);
            continue;
        }
        let mut ranked: Vec<(&str, usize)> = votes.into_iter().filter(|&(_, n)| n as f64 / total as f64 >= share).collect();
        // Stable: equal counts stay in label order.
        ranked.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
        out.set(b.id, ranked.into_iter().map(|(l, _)| l.to_string()).collect());
    }
    Ok((out, warnings))
}
