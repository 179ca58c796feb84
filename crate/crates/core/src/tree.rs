//! Draft token trees.
//!
//! Nodes are stored append-only in topological order with dense ids; the
//! root is node 0. Joint probabilities are computed once, when a node is
//! attached, as the parent's joint probability times the node's own
//! generation probability.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TokenId;

pub type NodeId = usize;

pub const ROOT: NodeId = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub token: TokenId,
    /// Generation probability under the draft model.
    pub p: f64,
    /// Joint probability: product of `p` along the root path.
    pub joint: f64,
    /// Entropy of the distribution this node was drawn from (nats).
    pub entropy: f64,
    /// Structural level; the root is 0, its children 1.
    pub level: usize,
    pub confidence: Option<f64>,
    pub accepted: Option<bool>,
}

impl TreeNode {
    /// Depth feature as assigned by the drafting loop: the first draft layer
    /// is 0. The root reports 0 as well.
    pub fn depth_feature(&self) -> usize {
        self.level.saturating_sub(1)
    }

    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenTree {
    nodes: Vec<TreeNode>,
    children: Vec<Vec<NodeId>>,
    layers: Vec<Vec<NodeId>>,
}

impl TokenTree {
    /// A tree holding only the root, which stands for the last context token.
    pub fn new(root_token: TokenId) -> Self {
        let root = TreeNode {
            id: ROOT,
            parent: None,
            token: root_token,
            p: 1.0,
            joint: 1.0,
            entropy: 0.0,
            level: 0,
            confidence: Some(1.0),
            accepted: None,
        };
        TokenTree {
            nodes: vec![root],
            children: vec![Vec::new()],
            layers: vec![vec![ROOT]],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Never true: a tree always has its root.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of draft (non-root) nodes.
    pub fn draft_len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[ROOT]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&TreeNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Node ids per level; `layers()[0]` is the root.
    pub fn layers(&self) -> &[Vec<NodeId>] {
        &self.layers
    }

    /// Deepest level present (0 for a root-only tree).
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn attach_children(
        &mut self,
        parent: NodeId,
        tokens: &[TokenId],
        probs: &[f64],
    ) -> Result<Vec<NodeId>> {
        let parent_node = self.node(parent)?;
        if tokens.len() != probs.len() {
            return Err(Error::LengthMismatch {
                tokens: tokens.len(),
                probs: probs.len(),
            });
        }
        if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::ProbabilityOutOfRange(bad));
        }
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let parent_joint = parent_node.joint;
        let level = parent_node.level + 1;
        if self.layers.len() <= level {
            self.layers.resize_with(level + 1, Vec::new);
        }
        let mut ids = Vec::with_capacity(tokens.len());
        for (&token, &p) in tokens.iter().zip(probs) {
            let id = self.nodes.len();
            self.nodes.push(TreeNode {
                id,
                parent: Some(parent),
                token,
                p,
                joint: parent_joint * p,
                entropy: 0.0,
                level,
                confidence: None,
                accepted: None,
            });
            self.children.push(Vec::new());
            self.children[parent].push(id);
            self.layers[level].push(id);
            ids.push(id);
        }
        Ok(ids)
    }

    pub fn set_entropy(&mut self, id: NodeId, entropy: f64) -> Result<()> {
        self.node_mut(id)?.entropy = entropy;
        Ok(())
    }

    pub fn set_confidence(&mut self, id: NodeId, confidence: f64) -> Result<()> {
        self.node_mut(id)?.confidence = Some(confidence);
        Ok(())
    }

    pub fn set_accepted(&mut self, id: NodeId, accepted: bool) -> Result<()> {
        self.node_mut(id)?.accepted = Some(accepted);
        Ok(())
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut TreeNode> {
        self.nodes.get_mut(id).ok_or(Error::UnknownNode(id))
    }

    /// Ids from the root down to `id`, inclusive.
    pub fn path_to_root(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let mut path = Vec::with_capacity(self.node(id)?.level + 1);
        let mut cur = Some(id);
        while let Some(n) = cur {
            path.push(n);
            cur = self.nodes[n].parent;
        }
        path.reverse();
        Ok(path)
    }

    /// Draft tokens from the root (exclusive) down to `id` (inclusive).
    pub fn path_tokens(&self, id: NodeId) -> Result<Vec<TokenId>> {
        Ok(self
            .path_to_root(id)?
            .into_iter()
            .skip(1)
            .map(|n| self.nodes[n].token)
            .collect())
    }

    /// `mask[i][j] == 1` iff `j` lies on the path from the root to `i`.
    pub fn ancestor_mask(&self) -> Vec<Vec<u8>> {
        let n = self.nodes.len();
        let mut mask: Vec<Vec<u8>> = Vec::with_capacity(n);
        for node in &self.nodes {
            // Parents precede children, so the parent's row is complete.
            let mut row = match node.parent {
                Some(parent) => mask[parent].clone(),
                None => vec![0; n],
            };
            row[node.id] = 1;
            mask.push(row);
        }
        mask
    }

    /// True iff `set` together with the root is closed under the parent relation.
    pub fn is_connected_subtree(&self, set: &[NodeId]) -> bool {
        let members: HashSet<NodeId> = set.iter().copied().collect();
        set.iter().all(|&id| match self.nodes.get(id) {
            None => false,
            Some(node) => match node.parent {
                None => true,
                Some(ROOT) => true,
                Some(parent) => members.contains(&parent),
            },
        })
    }

    /// The tree restricted to the root plus `set`, with ids renumbered in
    /// original insertion order.
    pub fn subtree(&self, set: &[NodeId]) -> Result<TokenTree> {
        if let Some(&bad) = set.iter().find(|&&id| id >= self.nodes.len()) {
            return Err(Error::UnknownNode(bad));
        }
        if !self.is_connected_subtree(set) {
            return Err(Error::invalid("node set is not a connected subtree"));
        }
        let mut keep = vec![false; self.nodes.len()];
        keep[ROOT] = true;
        for &id in set {
            keep[id] = true;
        }
        let mut remap = vec![usize::MAX; self.nodes.len()];
        remap[ROOT] = ROOT;
        let mut out = TokenTree::new(self.nodes[ROOT].token);
        out.nodes[ROOT] = self.nodes[ROOT].clone();
        for node in self.nodes.iter().skip(1).filter(|n| keep[n.id]) {
            let parent = remap[node.parent.expect("non-root has parent")];
            let id = out.nodes.len();
            remap[node.id] = id;
            let level = node.level;
            if out.layers.len() <= level {
                out.layers.resize_with(level + 1, Vec::new);
            }
            out.nodes.push(TreeNode {
                id,
                parent: Some(parent),
                ..node.clone()
            });
            out.children.push(Vec::new());
            out.children[parent].push(id);
            out.layers[level].push(id);
        }
        Ok(out)
    }

    /// Checks the structural invariants. Used by tests and file loading.
    pub fn validate(&self) -> Result<()> {
        let root = self.root();
        if root.parent.is_some() || root.p != 1.0 || root.joint != 1.0 {
            return Err(Error::malformed("tree", "root must have p = P = 1 and no parent"));
        }
        for node in self.nodes.iter().skip(1) {
            let parent = node
                .parent
                .ok_or_else(|| Error::malformed("tree", format!("node {} has no parent", node.id)))?;
            if parent >= node.id {
                return Err(Error::malformed(
                    "tree",
                    format!("node {} precedes its parent {parent}", node.id),
                ));
            }
            let pn = &self.nodes[parent];
            if node.level != pn.level + 1 {
                return Err(Error::malformed("tree", format!("node {} level", node.id)));
            }
            let expect = pn.joint * node.p;
            if (node.joint - expect).abs() > 1e-12 * expect.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::malformed(
                    "tree",
                    format!("node {} joint probability {} != {}", node.id, node.joint, expect),
                ));
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W, header: &TreeFileHeader) -> Result<()> {
        serde_json::to_writer(&mut w, header)?;
        writeln!(w).map_err(|e| Error::io("<tree>", e))?;
        for node in &self.nodes {
            serde_json::to_writer(&mut w, &NodeRecord::from(node))?;
            writeln!(w).map_err(|e| Error::io("<tree>", e))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<(TreeFileHeader, TokenTree)> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::malformed("tree file", "missing header"))?
            .map_err(|e| Error::io("<tree>", e))?;
        let header: TreeFileHeader = serde_json::from_str(&header_line)?;
        let mut tree: Option<TokenTree> = None;
        for line in lines {
            let line = line.map_err(|e| Error::io("<tree>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: NodeRecord = serde_json::from_str(&line)?;
            match (&mut tree, rec.parent) {
                (None, None) => {
                    let mut t = TokenTree::new(rec.token);
                    t.nodes[ROOT].confidence = rec.confidence;
                    t.nodes[ROOT].accepted = rec.accepted;
                    t.nodes[ROOT].entropy = rec.entropy;
                    tree = Some(t);
                }
                (Some(t), Some(parent)) => {
                    if rec.id != t.len() {
                        return Err(Error::malformed("tree file", format!("node id {} out of order", rec.id)));
                    }
                    let id = t.attach_children(parent, &[rec.token], &[rec.p])?[0];
                    let node = t.node_mut(id)?;
                    node.entropy = rec.entropy;
                    node.confidence = rec.confidence;
                    node.accepted = rec.accepted;
                    if (node.joint - rec.joint).abs() > 1e-12 * rec.joint.abs().max(f64::MIN_POSITIVE) {
                        return Err(Error::malformed("tree file", format!("node {id} joint probability")));
                    }
                    if node.depth_feature() != rec.depth {
                        return Err(Error::malformed("tree file", format!("node {id} depth")));
                    }
                }
                _ => return Err(Error::malformed("tree file", "root must come first, exactly once")),
            }
        }
        let tree = tree.ok_or_else(|| Error::malformed("tree file", "no nodes"))?;
        Ok((header, tree))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFileHeader {
    pub vocab: usize,
    #[serde(rename = "K")]
    pub top_k: usize,
    pub d_max: usize,
    pub strategy: String,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: NodeId,
    parent: Option<NodeId>,
    token: TokenId,
    p: f64,
    #[serde(rename = "P")]
    joint: f64,
    #[serde(rename = "H")]
    entropy: f64,
    #[serde(rename = "d")]
    depth: usize,
    #[serde(rename = "C")]
    confidence: Option<f64>,
    accepted: Option<bool>,
}

impl From<&TreeNode> for NodeRecord {
    fn from(n: &TreeNode) -> Self {
        NodeRecord {
            id: n.id,
            parent: n.parent,
            token: n.token,
            p: n.p,
            joint: n.joint,
            entropy: n.entropy,
            depth: n.depth_feature(),
            confidence: n.confidence,
            accepted: n.accepted,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn chain(n: usize) -> TokenTree {
        let mut t = TokenTree::new(0);
        let mut parent = ROOT;
        for i in 1..n {
            parent = t.attach_children(parent, &[i as TokenId], &[0.5]).unwrap()[0];
        }
        t
    }

    pub(crate) fn random_tree(seed: u64, n: usize) -> TokenTree {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = TokenTree::new(0);
        for _ in 1..n {
            let parent = rng.random_range(0..t.len());
            let p: f64 = rng.random();
            let tok = rng.random_range(0..100);
            t.attach_children(parent, &[tok], &[p]).unwrap();
        }
        t
    }

    #[test]
    fn root_children_inherit_probability() {
        let mut t = TokenTree::new(7);
        let ids = t.attach_children(ROOT, &[1, 2, 3], &[0.5, 0.3, 0.2]).unwrap();
        let joints: Vec<f64> = ids.iter().map(|&i| t.node(i).unwrap().joint).collect();
        assert_eq!(joints, vec![0.5, 0.3, 0.2]);
        let grand = t.attach_children(ids[0], &[9], &[0.4]).unwrap()[0];
        assert_eq!(t.node(grand).unwrap().joint, 0.2);
        assert_eq!(t.layers().len(), 3);
    }

    #[test]
    fn empty_attach_is_noop() {
        let mut t = TokenTree::new(0);
        let before = t.clone();
        assert!(t.attach_children(ROOT, &[], &[]).unwrap().is_empty());
        assert_eq!(t, before);
    }

    #[test]
    fn attach_errors() {
        let mut t = TokenTree::new(0);
        assert!(matches!(t.attach_children(5, &[1], &[0.5]), Err(Error::UnknownNode(5))));
        assert!(matches!(
            t.attach_children(ROOT, &[1, 2], &[0.5]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            t.attach_children(ROOT, &[1], &[1.5]),
            Err(Error::ProbabilityOutOfRange(_))
        ));
        assert!(matches!(
            t.attach_children(ROOT, &[1], &[f64::NAN]),
            Err(Error::ProbabilityOutOfRange(_))
        ));
    }

    #[test]
    fn chain_mask_is_lower_triangular() {
        let m = chain(3).ancestor_mask();
        assert_eq!(m, vec![vec![1, 0, 0], vec![1, 1, 0], vec![1, 1, 1]]);
    }

    #[test]
    fn sibling_mask() {
        let mut t = TokenTree::new(0);
        t.attach_children(ROOT, &[1, 2], &[0.5, 0.5]).unwrap();
        let m = t.ancestor_mask();
        assert_eq!(m[1][2], 0);
        assert_eq!(m[2][1], 0);
        assert!(m.iter().all(|row| row[ROOT] == 1));
    }

    #[test]
    fn mask_matches_parent_walk() {
        for seed in 0..20 {
            let t = random_tree(seed, 20);
            let m = t.ancestor_mask();
            for i in 0..t.len() {
                let mut expect = vec![0u8; t.len()];
                let mut cur = Some(i);
                while let Some(c) = cur {
                    expect[c] = 1;
                    cur = t.nodes()[c].parent;
                }
                assert_eq!(m[i], expect);
                let ones = m[i].iter().filter(|&&b| b == 1).count();
                assert_eq!(ones, t.nodes()[i].level + 1);
            }
        }
    }

    #[test]
    fn subtree_predicate() {
        let t = chain(4);
        assert!(t.is_connected_subtree(&[ROOT]));
        assert!(t.is_connected_subtree(&[]));
        assert!(t.is_connected_subtree(&[1, 2]));
        assert!(!t.is_connected_subtree(&[2]));
        assert!(!t.is_connected_subtree(&[99]));
    }

    #[test]
    fn path_to_root_examples() {
        let t = chain(4);
        assert_eq!(t.path_to_root(ROOT).unwrap(), vec![ROOT]);
        assert_eq!(t.path_to_root(3).unwrap(), vec![0, 1, 2, 3]);
        assert!(matches!(t.path_to_root(4), Err(Error::UnknownNode(4))));
    }

    #[test]
    fn subtree_extraction_renumbers() {
        let mut t = TokenTree::new(0);
        let a = t.attach_children(ROOT, &[1, 2], &[0.6, 0.4]).unwrap();
        let b = t.attach_children(a[1], &[3], &[0.5]).unwrap();
        let s = t.subtree(&[a[1], b[0]]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.node(1).unwrap().token, 2);
        assert_eq!(s.node(2).unwrap().parent, Some(1));
        assert_eq!(s.node(2).unwrap().joint, 0.2);
        s.validate().unwrap();
        assert!(t.subtree(&[b[0]]).is_err());
    }

    #[test]
    fn jsonl_roundtrip() {
        let mut t = random_tree(3, 30);
        t.set_confidence(4, 0.25).unwrap();
        t.set_accepted(2, true).unwrap();
        let header = TreeFileHeader {
            vocab: 100,
            top_k: 3,
            d_max: 4,
            strategy: "c2t".into(),
            seed: 1,
        };
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf, &header).unwrap();
        let (h, back) = TokenTree::read_jsonl(&buf[..]).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn path_reproduces_insertion_ancestry(seed in 0u64..10_000, n in 1usize..60) {
            let t = random_tree(seed, n);
            t.validate().unwrap();
            for node in t.nodes() {
                let path = t.path_to_root(node.id).unwrap();
                prop_assert_eq!(path[0], ROOT);
                prop_assert_eq!(*path.last().unwrap(), node.id);
                for w in path.windows(2) {
                    prop_assert_eq!(t.nodes()[w[1]].parent, Some(w[0]));
                }
                let mut walk = Vec::new();
                let mut cur = Some(node.id);
                while let Some(c) = cur { walk.push(c); cur = t.nodes()[c].parent; }
                walk.reverse();
                prop_assert_eq!(&path, &walk);
                // Joint probability never increases along the path.
                for w in path.windows(2) {
                    prop_assert!(t.nodes()[w[1]].joint <= t.nodes()[w[0]].joint);
                }
            }
        }
    }
}
