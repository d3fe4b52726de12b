//! Class taxonomies and the class-distance matrices derived from them.

mod encode;
mod hcd;
mod parse;

use std::collections::HashMap;
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use encode::{lcd_encode, ClassDistanceMatrix, Encoding};
pub use hcd::{hcd_encode, HcdConfig, HcdOutcome, NodeEmbedding};
pub use parse::{parse_taxonomy, parse_taxonomy_file, TaxonomyFormat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaxonomyError {
    #[error("taxonomy is empty")]
    Empty,
    #[error("line {line}: duplicate label `{label}`")]
    DuplicateLabel { label: String, line: usize },
    #[error("line {line}: `{label}` has more than one parent")]
    MultipleParents { label: String, line: usize },
    #[error("cycle through `{label}`")]
    Cycle { label: String },
    #[error("more than one root: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("invalid hcd config: {0}")]
    InvalidConfig(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, TaxonomyError>;

/// Index of a node in a [`Taxonomy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A rooted tree over class labels. Leaves are the predictable classes,
/// indexed in declaration order.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    labels: Vec<String>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    height: Vec<usize>,
    root: usize,
    leaves: Vec<usize>,
    leaf_index: Vec<Option<usize>>,
    by_label: HashMap<String, usize>,
}

/// Incremental construction of a [`Taxonomy`]; nodes keep insertion order.
#[derive(Debug, Default)]
pub struct TaxonomyBuilder {
    labels: Vec<String>,
    parent: Vec<Option<usize>>,
    by_label: HashMap<String, usize>,
}

impl TaxonomyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `label` (if new) and returns its id.
    pub fn node(&mut self, label: &str) -> usize {
        if let Some(&id) = self.by_label.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_string());
        self.parent.push(None);
        self.by_label.insert(label.to_string(), id);
        id
    }

    pub fn contains(&self, label: &str) -> bool {
        self.by_label.contains_key(label)
    }

    pub fn parent_of(&self, label: &str) -> Option<&str> {
        let id = *self.by_label.get(label)?;
        self.parent[id].map(|p| self.labels[p].as_str())
    }

    /// Records the edge `parent -> child`. `line` is used for error reports.
    pub fn edge(&mut self, parent: &str, child: &str, line: usize) -> Result<()> {
        if parent == child {
            return Err(TaxonomyError::Cycle {
                label: child.to_string(),
            });
        }
        let p = self.node(parent);
        let c = self.node(child);
        match self.parent[c] {
            Some(existing) if existing == p => Err(TaxonomyError::DuplicateLabel {
                label: child.to_string(),
                line,
            }),
            Some(_) => Err(TaxonomyError::MultipleParents {
                label: child.to_string(),
                line,
            }),
            None => {
                self.parent[c] = Some(p);
                Ok(())
            }
        }
    }

    pub fn build(self) -> Result<Taxonomy> {
        Taxonomy::from_parents(self.labels, self.parent)
    }
}

impl Taxonomy {
    /// Builds a tree from a parent table. Node order is preserved and defines
    /// the leaf (class) order.
    pub fn from_parents(labels: Vec<String>, parent: Vec<Option<usize>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(TaxonomyError::Empty);
        }
        assert_eq!(n, parent.len());
        let mut by_label = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if by_label.insert(l.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateLabel {
                    label: l.clone(),
                    line: 0,
                });
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        let root = match roots.as_slice() {
            [] => {
                return Err(TaxonomyError::Cycle {
                    label: labels[0].clone(),
                })
            }
            [r] => *r,
            many => {
                return Err(TaxonomyError::MultipleRoots(
                    many.iter().map(|&i| labels[i].clone()).collect(),
                ));
            }
        };
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        // Breadth-first from the root; unreachable nodes sit on a cycle.
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut order = vec![root];
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &v in &children[u] {
                depth[v] = depth[u] + 1;
                order.push(v);
            }
        }
        if let Some(lost) = (0..n).find(|&i| depth[i] == usize::MAX) {
            return Err(TaxonomyError::Cycle {
                label: labels[lost].clone(),
            });
        }
        let mut height = vec![0usize; n];
        for &u in order.iter().rev() {
            if let Some(p) = parent[u] {
                height[p] = height[p].max(height[u] + 1);
            }
        }
        let leaves: Vec<usize> = (0..n).filter(|&i| children[i].is_empty()).collect();
        let mut leaf_index = vec![None; n];
        for (k, &l) in leaves.iter().enumerate() {
            leaf_index[l] = Some(k);
        }
        Ok(Self {
            labels,
            parent,
            children,
            depth,
            height,
            root,
            leaves,
            leaf_index,
            by_label,
        })
    }

    /// Complete tree where every node at depth `d` has `branching[d]`
    /// children. Labels are `root` and `c<i>_<j>_...` by path.
    pub fn balanced(branching: &[usize]) -> Self {
        let mut labels = vec!["root".to_string()];
        let mut parent = vec![None];
        let mut frontier = vec![(0usize, String::from("c"))];
        for &b in branching {
            let mut next = Vec::new();
            for (p, prefix) in &frontier {
                for i in 0..b {
                    let label = if *p == 0 {
                        format!("{prefix}{i}")
                    } else {
                        format!("{prefix}_{i}")
                    };
                    labels.push(label.clone());
                    parent.push(Some(*p));
                    next.push((labels.len() - 1, label));
                }
            }
            frontier = next;
        }
        Self::from_parents(labels, parent).expect("balanced tree is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> NodeId {
        NodeId(self.root)
    }

    /// Number of leaf classes `K`.
    pub fn num_classes(&self) -> usize {
        self.leaves.len()
    }

    /// Tree height `h` (height of the root).
    pub fn height(&self) -> usize {
        self.height[self.root]
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.by_label.get(label).copied().map(NodeId)
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v.0].map(NodeId)
    }

    pub fn children(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.children[v.0].iter().copied().map(NodeId)
    }

    pub fn depth(&self, v: NodeId) -> usize {
        self.depth[v.0]
    }

    /// Leaf nodes in class-index order.
    pub fn leaves(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        self.leaves.iter().copied().map(NodeId)
    }

    pub fn leaf(&self, class: usize) -> Option<NodeId> {
        self.leaves.get(class).copied().map(NodeId)
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        self.leaves.iter().map(|&i| self.labels[i].clone()).collect()
    }

    /// Class index of a leaf label.
    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.by_label.get(label).and_then(|&i| self.leaf_index[i])
    }

    fn check(&self, v: NodeId) -> Result<usize> {
        if v.0 < self.labels.len() {
            Ok(v.0)
        } else {
            Err(TaxonomyError::UnknownNode(v.to_string()))
        }
    }

    /// Longest downward edge count to a leaf; leaves have height 0.
    pub fn node_height(&self, v: NodeId) -> Result<usize> {
        Ok(self.height[self.check(v)?])
    }

    /// Deepest common ancestor of `u` and `v`.
    pub fn lca(&self, u: NodeId, v: NodeId) -> Result<NodeId> {
        let (mut a, mut b) = (self.check(u)?, self.check(v)?);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has a parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has a parent");
        }
        while a != b {
            a = self.parent[a].expect("non-root has a parent");
            b = self.parent[b].expect("non-root has a parent");
        }
        Ok(NodeId(a))
    }

    pub fn lca_by_label(&self, u: &str, v: &str) -> Result<NodeId> {
        let a = self
            .node_id(u)
            .ok_or_else(|| TaxonomyError::UnknownNode(u.to_string()))?;
        let b = self
            .node_id(v)
            .ok_or_else(|| TaxonomyError::UnknownNode(v.to_string()))?;
        self.lca(a, b)
    }

    /// LCA height between two classes (0 when equal).
    pub fn class_distance(&self, i: usize, j: usize) -> Result<usize> {
        let a = self
            .leaf(i)
            .ok_or_else(|| TaxonomyError::UnknownNode(format!("class {i}")))?;
        let b = self
            .leaf(j)
            .ok_or_else(|| TaxonomyError::UnknownNode(format!("class {j}")))?;
        self.node_height(self.lca(a, b)?)
    }

    /// SHA-256 over the leaf labels in class order, hex encoded.
    pub fn leaf_digest(&self) -> String {
        leaf_digest(&self.leaf_labels())
    }

    /// Renders the tree in the tab-indented text form.
    pub fn to_indented(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            for _ in 0..self.depth[u] {
                out.push('\t');
            }
            out.push_str(&self.labels[u]);
            out.push('\n');
            stack.extend(self.children[u].iter().rev());
        }
        out
    }
}

pub fn leaf_digest(labels: &[String]) -> String {
    let mut h = Sha256::new();
    for l in labels {
        h.update(l.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}
