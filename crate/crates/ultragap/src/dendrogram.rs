//! Proximity dendrograms and the rooted tree they generate.
//!
//! A dendrogram is a chain of partitions indexed by strictly increasing
//! heights, from singletons at height 0 to the whole point set at the top.
//! Finite ultrametric spaces and proximity dendrograms are in bijection:
//! the partition at height h is the set of connected components of the
//! threshold graph {(i,j) : d(i,j) <= h}, and conversely d(i,j) is the
//! smallest height at which i and j share a block.
//!
//! Blocks are canonicalized as sorted index lists and partitions as sorted
//! lists of blocks, so equality and hashing are deterministic.

use crate::metric::{FiniteMetric, MetricError};
use crate::rational::{format_rational, to_f64, Rational};
use num::traits::Zero;
use serde_json::{json, Value};
use thiserror::Error;

pub type Block = Vec<usize>;
pub type Partition = Vec<Block>;

#[derive(Debug, Error)]
pub enum DendrogramError {
    #[error("dendrogram needs at least two points")]
    TooSmall,
    #[error("heights must start at 0 and strictly increase; bad height at index {0}")]
    BadHeights(usize),
    #[error("need at least one non-zero height")]
    NoMergeHeight,
    #[error("partition at height index {0} is not a partition of the point set")]
    NotAPartition(usize),
    #[error("bottom partition must be all singletons")]
    BottomNotSingletons,
    #[error("top partition must be the whole point set")]
    TopNotWhole,
    #[error("partition at height index {0} is not a proper refinement of the next")]
    NotProperRefinement(usize),
    #[error("input is not ultrametric; the refinement chain would break")]
    NotUltrametric,
    #[error("json: {0}")]
    Json(String),
}

/// A proximity dendrogram over a labeled point set.
///
/// Immutable after construction; safe for concurrent reads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    labels: Vec<String>,
    heights: Vec<f64>,
    exact_heights: Option<Vec<Rational>>,
    partitions: Vec<Partition>,
}

impl Dendrogram {
    /// Validate heights and the refinement chain. `heights` includes the
    /// leading 0; `partitions` has one entry per height.
    // The negated comparison is deliberate: NaN heights must fail.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(
        labels: Vec<String>,
        heights: Vec<f64>,
        exact_heights: Option<Vec<Rational>>,
        partitions: Vec<Partition>,
    ) -> Result<Self, DendrogramError> {
        let n = labels.len();
        if n < 2 {
            return Err(DendrogramError::TooSmall);
        }
        if heights.is_empty() || heights[0] != 0.0 {
            return Err(DendrogramError::BadHeights(0));
        }
        for k in 1..heights.len() {
            if !(heights[k] > heights[k - 1]) {
                return Err(DendrogramError::BadHeights(k));
            }
        }
        if heights.len() < 2 {
            return Err(DendrogramError::NoMergeHeight);
        }
        if heights.len() != partitions.len() {
            return Err(DendrogramError::NotAPartition(partitions.len()));
        }
        let mut partitions = partitions;
        for (k, p) in partitions.iter_mut().enumerate() {
            canonicalize(p);
            let mut seen = vec![false; n];
            for block in p.iter() {
                if block.is_empty() {
                    return Err(DendrogramError::NotAPartition(k));
                }
                for &i in block {
                    if i >= n || seen[i] {
                        return Err(DendrogramError::NotAPartition(k));
                    }
                    seen[i] = true;
                }
            }
            if seen.iter().any(|&s| !s) {
                return Err(DendrogramError::NotAPartition(k));
            }
        }
        if partitions[0].len() != n {
            return Err(DendrogramError::BottomNotSingletons);
        }
        let last = partitions.len() - 1;
        if partitions[last].len() != 1 {
            return Err(DendrogramError::TopNotWhole);
        }
        for k in 1..partitions.len() {
            if !is_proper_refinement(&partitions[k - 1], &partitions[k]) {
                return Err(DendrogramError::NotProperRefinement(k - 1));
            }
        }
        Ok(Dendrogram {
            labels,
            heights,
            exact_heights,
            partitions,
        })
    }

    /// Single-linkage construction at the exact distance thresholds.
    pub fn from_metric(m: &FiniteMetric) -> Result<Self, MetricError> {
        if !m.is_ultrametric() {
            return Err(MetricError::NotUltrametric);
        }
        if m.n() < 2 {
            return Err(MetricError::NoNonzeroDistance);
        }
        let n = m.n();
        let mut heights = vec![0.0];
        let mut exact_heights = m.exact_matrix().map(|_| vec![Rational::zero()]);
        match (m.exact_matrix(), &mut exact_heights) {
            (Some(exact), Some(eh)) => {
                let mut ds: Vec<&Rational> = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        ds.push(&exact[i * n + j]);
                    }
                }
                ds.sort();
                ds.dedup();
                for d in ds {
                    eh.push(d.clone());
                    heights.push(to_f64(d));
                }
            }
            _ => heights.extend(m.distinct_nonzero_distances()),
        }

        let mut partitions = Vec::with_capacity(heights.len());
        for (k, &h) in heights.iter().enumerate() {
            let mut uf = UnionFind::new(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let within = match (m.exact_matrix(), &exact_heights) {
                        (Some(exact), Some(eh)) => exact[i * n + j] <= eh[k],
                        _ => m.dist(i, j) <= h,
                    };
                    if within {
                        uf.union(i, j);
                    }
                }
            }
            partitions.push(uf.partition());
        }
        Dendrogram::new(m.labels().to_vec(), heights, exact_heights, partitions)
            .map_err(|_| MetricError::NotUltrametric)
    }

    /// The induced ultrametric: d(i,j) = smallest height where i and j share
    /// a block. Round-trips exactly with `from_metric`.
    pub fn to_metric(&self) -> FiniteMetric {
        let n = self.labels.len();
        match &self.exact_heights {
            Some(eh) => {
                let mut rows = vec![vec![Rational::zero(); n]; n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let k = self.merge_level(i, j);
                        rows[i][j] = eh[k].clone();
                        rows[j][i] = eh[k].clone();
                    }
                }
                FiniteMetric::validate_exact(self.labels.clone(), rows)
            }
            None => {
                let mut rows = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let k = self.merge_level(i, j);
                        rows[i][j] = self.heights[k];
                        rows[j][i] = self.heights[k];
                    }
                }
                FiniteMetric::validate(self.labels.clone(), rows)
            }
        }
        .expect("a valid dendrogram always induces an ultrametric")
    }

    fn merge_level(&self, i: usize, j: usize) -> usize {
        for (k, p) in self.partitions.iter().enumerate() {
            if p.iter().any(|b| b.contains(&i) && b.contains(&j)) {
                return k;
            }
        }
        unreachable!("top partition contains every pair")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Heights including the leading 0.
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn exact_heights(&self) -> Option<&[Rational]> {
        self.exact_heights.as_deref()
    }

    /// Number of non-zero heights.
    pub fn num_levels(&self) -> usize {
        self.heights.len() - 1
    }

    pub fn partition(&self, k: usize) -> &Partition {
        &self.partitions[k]
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    /// The generated directed rooted tree.
    pub fn tree(&self) -> DendroTree {
        DendroTree::from_dendrogram(self)
    }

    /// Wire format: {"labels":[...], "levels":[{"height":h,"blocks":[[...]]}]}
    /// with the height-0 singleton level implied.
    pub fn from_json(text: &str) -> Result<Self, DendrogramError> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| DendrogramError::Json(e.to_string()))?;
        let labels: Vec<String> = v
            .get("labels")
            .and_then(|l| l.as_array())
            .ok_or_else(|| DendrogramError::Json("missing labels array".into()))?
            .iter()
            .map(|s| {
                s.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| DendrogramError::Json("labels must be strings".into()))
            })
            .collect::<Result<_, _>>()?;
        let n = labels.len();
        let levels = v
            .get("levels")
            .and_then(|l| l.as_array())
            .ok_or_else(|| DendrogramError::Json("missing levels array".into()))?;
        let mut heights = vec![0.0];
        let mut exact_heights = vec![Rational::zero()];
        let mut partitions: Vec<Partition> = vec![(0..n).map(|i| vec![i]).collect()];
        for level in levels {
            let h = level
                .get("height")
                .ok_or_else(|| DendrogramError::Json("level missing height".into()))?;
            let exact = parse_height(h)?;
            if exact.is_zero() {
                continue; // implied singleton level spelled out
            }
            heights.push(to_f64(&exact));
            exact_heights.push(exact);
            let blocks = level
                .get("blocks")
                .and_then(|b| b.as_array())
                .ok_or_else(|| DendrogramError::Json("level missing blocks".into()))?;
            let mut partition = Vec::new();
            for b in blocks {
                let idx: Vec<usize> = b
                    .as_array()
                    .ok_or_else(|| DendrogramError::Json("block must be an array".into()))?
                    .iter()
                    .map(|x| {
                        x.as_u64().map(|u| u as usize).ok_or_else(|| {
                            DendrogramError::Json("block entries are indices".into())
                        })
                    })
                    .collect::<Result<_, _>>()?;
                partition.push(idx);
            }
            partitions.push(partition);
        }
        Dendrogram::new(labels, heights, Some(exact_heights), partitions)
    }

    pub fn to_json(&self) -> String {
        let levels: Vec<Value> = (1..self.heights.len())
            .map(|k| {
                let height = match &self.exact_heights {
                    Some(eh) if !eh[k].is_integer() => json!(format_rational(&eh[k])),
                    _ => json!(self.heights[k]),
                };
                json!({
                    "height": height,
                    "blocks": self.partitions[k],
                })
            })
            .collect();
        serde_json::to_string_pretty(&json!({
            "labels": self.labels,
            "levels": levels,
        }))
        .unwrap()
    }
}

fn parse_height(v: &Value) -> Result<Rational, DendrogramError> {
    match v {
        Value::Number(x) => {
            let f = x
                .as_f64()
                .ok_or_else(|| DendrogramError::Json("bad height".into()))?;
            Rational::from_float(f).ok_or_else(|| DendrogramError::Json("bad height".into()))
        }
        Value::String(s) => {
            crate::rational::parse_rational(s).map_err(|e| DendrogramError::Json(e.to_string()))
        }
        _ => Err(DendrogramError::Json(
            "height must be a number or string".into(),
        )),
    }
}

fn canonicalize(p: &mut Partition) {
    for b in p.iter_mut() {
        b.sort_unstable();
    }
    p.sort();
}

fn is_proper_refinement(finer: &Partition, coarser: &Partition) -> bool {
    if finer == coarser {
        return false;
    }
    finer.iter().all(|fb| {
        coarser
            .iter()
            .any(|cb| fb.iter().all(|i| cb.binary_search(i).is_ok()))
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, i: usize, j: usize) {
        let (ri, rj) = (self.find(i), self.find(j));
        if ri != rj {
            self.parent[ri.max(rj)] = ri.min(rj);
        }
    }

    fn partition(&mut self) -> Partition {
        let n = self.parent.len();
        let mut blocks: Vec<Block> = vec![Vec::new(); n];
        for i in 0..n {
            let r = self.find(i);
            blocks[r].push(i);
        }
        let mut out: Partition = blocks.into_iter().filter(|b| !b.is_empty()).collect();
        canonicalize(&mut out);
        out
    }
}

/// A node of the generated tree: a block with its level, children and parent.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub members: Block,
    /// Smallest k with this block in the partition at height k.
    pub level: usize,
    /// Left-adjacent children; empty exactly for the singleton leaves.
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

/// The directed rooted tree generated by a dendrogram.
///
/// Nodes are deduplicated blocks, ordered by (level, smallest member index),
/// so node ids are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct DendroTree {
    labels: Vec<String>,
    nodes: Vec<TreeNode>,
    root: usize,
    num_levels: usize,
}

impl DendroTree {
    fn from_dendrogram(d: &Dendrogram) -> Self {
        let mut nodes: Vec<TreeNode> = Vec::new();
        for (k, partition) in d.partitions().iter().enumerate() {
            for block in partition {
                if !nodes.iter().any(|n| &n.members == block) {
                    nodes.push(TreeNode {
                        members: block.clone(),
                        level: k,
                        children: Vec::new(),
                        parent: None,
                    });
                }
            }
        }
        nodes.sort_by_key(|n| (n.level, n.members[0]));
        let find = |nodes: &[TreeNode], block: &Block| -> usize {
            nodes.iter().position(|n| &n.members == block).unwrap()
        };
        // Children of a level-k node are the blocks of the next-finer
        // partition contained in it.
        for v in 0..nodes.len() {
            let k = nodes[v].level;
            if k == 0 {
                continue;
            }
            let members = nodes[v].members.clone();
            let mut children = Vec::new();
            for block in d.partition(k - 1) {
                if block.iter().all(|i| members.binary_search(i).is_ok()) {
                    children.push(find(&nodes, block));
                }
            }
            for &c in &children {
                nodes[c].parent = Some(v);
            }
            nodes[v].children = children;
        }
        let root = find(
            &nodes,
            &nodes
                .iter()
                .max_by_key(|n| n.members.len())
                .unwrap()
                .members
                .clone(),
        );
        DendroTree {
            labels: d.labels().to_vec(),
            nodes,
            root,
            num_levels: d.num_levels(),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// Left-degree b(v).
    pub fn left_degree(&self, id: usize) -> usize {
        self.nodes[id].children.len()
    }

    /// Node ids at a given level.
    pub fn level_nodes(&self, level: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].level == level)
            .collect()
    }

    /// The coteries: blocks of level 1.
    pub fn coteries(&self) -> Vec<usize> {
        self.level_nodes(1)
    }

    /// Leaf node id for a point index.
    pub fn leaf_of(&self, point: usize) -> usize {
        (0..self.nodes.len())
            .find(|&i| self.nodes[i].level == 0 && self.nodes[i].members == [point])
            .unwrap()
    }

    pub fn coterie_profile(&self) -> CoterieProfile {
        let coteries = self.coteries();
        let sizes: Vec<usize> = coteries
            .iter()
            .map(|&c| self.nodes[c].members.len())
            .collect();
        let covered: usize = sizes.iter().sum();
        let mut in_coterie = vec![false; self.labels.len()];
        for &c in &coteries {
            for &i in &self.nodes[c].members {
                in_coterie[i] = true;
            }
        }
        let uncovered = (0..self.labels.len()).filter(|&i| !in_coterie[i]).collect();
        CoterieProfile {
            sizes,
            covered,
            uncovered,
        }
    }
}

/// Multiset of coterie sizes plus the points lying in no coterie.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoterieProfile {
    pub sizes: Vec<usize>,
    pub covered: usize,
    pub uncovered: Vec<usize>,
}
