//! Label hierarchy: the acyclic root → attribute → region graph, state
//! legality and exhaustive enumeration of the legal state space.
//!
//! A state is legal when every active node with parents has at least one
//! active parent, and every active node with children has at least one
//! active child. Nothing else is constrained.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, GraphError, Result};

/// Largest graph whose state space we are willing to enumerate (2^24 candidates).
pub const MAX_ENUMERATION_NODES: usize = 24;

/// Hard ceiling on graph size, imposed by the 64-bit state masks.
pub const MAX_NODES: usize = 64;

/// The shipped hierarchy config (face → 5 attributes → 6 regions, full bipartite).
pub const DEFAULT_GRAPH_CONFIG: &str = include_str!("../configs/ffsc_default.graph");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    Root,
    Attribute,
    Region,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Root => "root",
            Tier::Attribute => "attribute",
            Tier::Region => "region",
        }
    }

    fn parse(s: &str) -> Option<Tier> {
        match s {
            "root" => Some(Tier::Root),
            "attribute" => Some(Tier::Attribute),
            "region" => Some(Tier::Region),
            _ => None,
        }
    }

    /// Whether an edge `self -> child` is allowed.
    fn may_parent(self, child: Tier) -> bool {
        matches!(
            (self, child),
            (Tier::Root, Tier::Attribute) | (Tier::Attribute, Tier::Region)
        )
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub tier: Tier,
}

/// A validated label hierarchy.
///
/// Immutable after construction. The legal-state enumeration is computed on
/// first use and cached, so a graph can be shared across threads freely.
#[derive(Debug, Clone)]
pub struct LabelGraph {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    parent_mask: Vec<u64>,
    child_mask: Vec<u64>,
    legal: OnceLock<Vec<u64>>,
}

impl PartialEq for LabelGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl LabelGraph {
    /// Builds and validates a graph from nodes (indexed by position) and
    /// `(parent, child)` edges.
    pub fn new(nodes: Vec<Node>, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        let lines = vec![0; edges.len()];
        Self::build(nodes, edges, &lines)
    }

    fn build(
        nodes: Vec<Node>,
        edges: Vec<(usize, usize)>,
        edge_lines: &[usize],
    ) -> Result<Self, GraphError> {
        let n = nodes.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if n > MAX_NODES {
            return Err(GraphError::Syntax {
                line: 0,
                msg: format!("{n} nodes exceeds the {MAX_NODES}-node limit"),
            });
        }
        if nodes[0].tier != Tier::Root {
            return Err(GraphError::MissingRoot);
        }
        let mut seen = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if seen.insert(node.name.as_str(), i).is_some() {
                return Err(GraphError::DuplicateName {
                    line: 0,
                    name: node.name.clone(),
                });
            }
            if i > 0 && node.tier == Tier::Root {
                return Err(GraphError::ExtraRoot {
                    name: node.name.clone(),
                });
            }
        }

        let mut parents = vec![Vec::new(); n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut dedup = Vec::with_capacity(edges.len());
        for (k, &(p, c)) in edges.iter().enumerate() {
            let line = edge_lines[k];
            for end in [p, c] {
                if end >= n {
                    return Err(GraphError::DanglingEdge {
                        line,
                        name: end.to_string(),
                    });
                }
            }
            if children[p].contains(&c) {
                continue;
            }
            if p == c || reaches(&children, c, p) {
                return Err(GraphError::Cycle {
                    line,
                    parent: nodes[p].name.clone(),
                    child: nodes[c].name.clone(),
                });
            }
            children[p].push(c);
            parents[c].push(p);
            dedup.push((p, c, line));
        }
        for &(p, c, line) in &dedup {
            if !nodes[p].tier.may_parent(nodes[c].tier) {
                return Err(GraphError::TierViolation {
                    line,
                    parent: nodes[p].name.clone(),
                    parent_tier: nodes[p].tier.as_str(),
                    child: nodes[c].name.clone(),
                    child_tier: nodes[c].tier.as_str(),
                });
            }
        }
        for (i, node) in nodes.iter().enumerate().skip(1) {
            if parents[i].is_empty() {
                return Err(GraphError::Orphan {
                    name: node.name.clone(),
                });
            }
        }

        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let mut edges: Vec<(usize, usize)> = dedup.into_iter().map(|(p, c, _)| (p, c)).collect();
        edges.sort_unstable();
        let to_mask = |ids: &Vec<usize>| ids.iter().fold(0u64, |m, &i| m | (1 << i));
        let parent_mask = parents.iter().map(to_mask).collect();
        let child_mask = children.iter().map(to_mask).collect();
        Ok(Self {
            nodes,
            edges,
            parents,
            children,
            parent_mask,
            child_mask,
            legal: OnceLock::new(),
        })
    }

    /// The shipped default hierarchy.
    pub fn default_ffsc() -> Self {
        parse_graph(DEFAULT_GRAPH_CONFIG).expect("shipped default graph config is valid")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parents(&self, id: usize) -> &[usize] {
        &self.parents[id]
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    pub fn node_id(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn ids_with_tier(&self, tier: Tier) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.tier == tier)
            .map(|(i, _)| i)
    }

    pub fn tier_counts(&self) -> (usize, usize, usize) {
        let count = |t| self.nodes.iter().filter(|n| n.tier == t).count();
        (count(Tier::Root), count(Tier::Attribute), count(Tier::Region))
    }

    /// Legality of a raw bitmask (bit i = y_i).
    pub fn is_legal_mask(&self, mask: u64) -> bool {
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let pm = self.parent_mask[i];
            if pm != 0 && mask & pm == 0 {
                return false;
            }
            let cm = self.child_mask[i];
            if cm != 0 && mask & cm == 0 {
                return false;
            }
        }
        true
    }

    /// Legal states as ascending bitmasks, enumerated once and cached.
    pub fn legal_states(&self) -> Result<&[u64]> {
        let n = self.len();
        if n > MAX_ENUMERATION_NODES {
            return Err(Error::Capacity {
                what: "node count for enumeration",
                requested: n,
                limit: MAX_ENUMERATION_NODES,
            });
        }
        Ok(self.legal.get_or_init(|| {
            (0u64..1 << n).filter(|&m| self.is_legal_mask(m)).collect()
        }))
    }

    /// Canonical config text: nodes by id, edges sorted by (parent id, child id).
    pub fn to_config_text(&self) -> String {
        let mut out = String::from("nodes:\n");
        for (i, n) in self.nodes.iter().enumerate() {
            out.push_str(&format!("{i} {} {}\n", n.name, n.tier));
        }
        out.push_str("edges:\n");
        for &(p, c) in &self.edges {
            out.push_str(&format!("{} -> {}\n", self.nodes[p].name, self.nodes[c].name));
        }
        out
    }

    /// Stable 64-bit graph identity: the first eight bytes (big endian) of the
    /// SHA-256 digest of [`LabelGraph::to_config_text`].
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_config_text().as_bytes());
        u64::from_be_bytes(digest[..8].try_into().unwrap())
    }
}

fn reaches(children: &[Vec<usize>], from: usize, target: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = vec![false; children.len()];
    while let Some(v) = stack.pop() {
        if v == target {
            return true;
        }
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(children[v].iter().copied());
    }
    false
}

/// One full binary assignment over the graph's nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelState {
    mask: u64,
    len: usize,
}

impl LabelState {
    pub fn zeros(len: usize) -> Self {
        Self { mask: 0, len }
    }

    pub fn from_mask(mask: u64, len: usize) -> Self {
        debug_assert!(len == 64 || mask >> len == 0);
        Self { mask, len }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() > MAX_NODES {
            return Err(Error::Capacity {
                what: "state length",
                requested: bits.len(),
                limit: MAX_NODES,
            });
        }
        let mut mask = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => mask |= 1 << i,
                other => return Err(Error::Input(format!("state bit {i} is {other}, not 0/1"))),
            }
        }
        Ok(Self {
            mask,
            len: bits.len(),
        })
    }

    pub fn from_active(len: usize, active: impl IntoIterator<Item = usize>) -> Self {
        let mask = active.into_iter().fold(0u64, |m, i| {
            assert!(i < len, "node {i} out of range for length {len}");
            m | (1 << i)
        });
        Self { mask, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn get(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }
}

impl fmt::Display for LabelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A partial assignment: the observed node ids and their values. Node ids
/// absent from the set are unobserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObservedLabels {
    len: usize,
    known: u64,
    values: u64,
}

impl ObservedLabels {
    pub fn new(len: usize, entries: impl IntoIterator<Item = (usize, bool)>) -> Result<Self> {
        let mut obs = Self::none(len);
        for (i, v) in entries {
            if i >= len {
                return Err(Error::Input(format!("observed node {i} out of range (N = {len})")));
            }
            obs.known |= 1 << i;
            if v {
                obs.values |= 1 << i;
            }
        }
        Ok(obs)
    }

    /// Nothing observed.
    pub fn none(len: usize) -> Self {
        Self {
            len,
            known: 0,
            values: 0,
        }
    }

    /// Every node observed with the given state's values.
    pub fn full(state: &LabelState) -> Self {
        let known = if state.len == 64 {
            u64::MAX
        } else {
            (1u64 << state.len) - 1
        };
        Self {
            len: state.len,
            known,
            values: state.mask,
        }
    }

    /// Observed values taken from `state` on the nodes in `known`.
    pub fn from_masks(len: usize, known: u64, values: u64) -> Self {
        Self {
            len,
            known,
            values: values & known,
        }
    }

    /// Keeps only node `i` (if it is observed).
    pub fn restrict_to(&self, i: usize) -> Self {
        let bit = 1u64 << i;
        Self {
            len: self.len,
            known: self.known & bit,
            values: self.values & bit,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn count(&self) -> usize {
        self.known.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.known == 0
    }

    pub fn known_mask(&self) -> u64 {
        self.known
    }

    pub fn value_mask(&self) -> u64 {
        self.values
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        (self.known >> i & 1 == 1).then_some(self.values >> i & 1 == 1)
    }

    /// Observed `(node, value)` pairs in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        (0..self.len).filter_map(|i| self.get(i).map(|v| (i, v)))
    }

    /// Whether a full state agrees with every observed entry.
    #[inline]
    pub fn matches(&self, mask: u64) -> bool {
        (mask ^ self.values) & self.known == 0
    }
}

/// Checks a state against both hierarchy constraints.
pub fn is_legal(graph: &LabelGraph, state: &LabelState) -> Result<bool> {
    if state.len() != graph.len() {
        return Err(Error::Dimension {
            what: "label state",
            expected: graph.len(),
            got: state.len(),
        });
    }
    Ok(graph.is_legal_mask(state.mask()))
}

/// Every legal state in ascending bitmask order.
pub fn enumerate_legal(graph: &LabelGraph) -> Result<Vec<LabelState>> {
    let n = graph.len();
    Ok(graph
        .legal_states()?
        .iter()
        .map(|&m| LabelState::from_mask(m, n))
        .collect())
}

/// Parses the hierarchy config format:
///
/// ```text
/// nodes:
/// 0 face root
/// 1 age attribute
/// edges:
/// face -> age
/// ```
///
/// `#` starts a comment; blank lines are ignored; lines within a section may
/// appear in any order.
pub fn parse_graph(config_text: &str) -> Result<LabelGraph, GraphError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Nodes,
        Edges,
    }
    let mut section = Section::None;
    let mut declared: Vec<(usize, usize, String, Tier)> = Vec::new();
    let mut raw_edges: Vec<(usize, String, String)> = Vec::new();

    for (idx, raw) in config_text.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        match text {
            "nodes:" => {
                section = Section::Nodes;
                continue;
            }
            "edges:" => {
                section = Section::Edges;
                continue;
            }
            _ => {}
        }
        match section {
            Section::None => {
                return Err(GraphError::Syntax {
                    line,
                    msg: format!("`{text}` appears before any `nodes:` or `edges:` section"),
                })
            }
            Section::Nodes => {
                let parts: Vec<&str> = text.split_whitespace().collect();
                let [id, name, tier] = parts[..] else {
                    return Err(GraphError::Syntax {
                        line,
                        msg: format!("expected `<id> <name> <tier>`, got `{text}`"),
                    });
                };
                let id: usize = id.parse().map_err(|_| GraphError::Syntax {
                    line,
                    msg: format!("node id `{id}` is not a non-negative integer"),
                })?;
                let tier = Tier::parse(tier).ok_or_else(|| GraphError::Syntax {
                    line,
                    msg: format!("unknown tier `{tier}` (expected root, attribute or region)"),
                })?;
                declared.push((line, id, name.to_string(), tier));
            }
            Section::Edges => {
                let Some((p, c)) = text.split_once("->") else {
                    return Err(GraphError::Syntax {
                        line,
                        msg: format!("expected `<parent> -> <child>`, got `{text}`"),
                    });
                };
                let (p, c) = (p.trim(), c.trim());
                if p.is_empty() || c.is_empty() || p.contains(char::is_whitespace) || c.contains(char::is_whitespace) {
                    return Err(GraphError::Syntax {
                        line,
                        msg: format!("expected `<parent> -> <child>`, got `{text}`"),
                    });
                }
                raw_edges.push((line, p.to_string(), c.to_string()));
            }
        }
    }

    if declared.is_empty() {
        return Err(GraphError::Empty);
    }
    let count = declared.len();
    let mut slots: Vec<Option<Node>> = vec![None; count];
    let mut by_name = HashMap::new();
    for (line, id, name, tier) in declared {
        if by_name.contains_key(&name) {
            return Err(GraphError::DuplicateName { line, name });
        }
        if id >= count {
            return Err(GraphError::SparseIds {
                id: (0..count).find(|&i| slots[i].is_none()).unwrap_or(count),
                count,
            });
        }
        if slots[id].is_some() {
            return Err(GraphError::DuplicateId { line, id });
        }
        by_name.insert(name.clone(), id);
        slots[id] = Some(Node { name, tier });
    }
    let nodes: Vec<Node> = slots.into_iter().map(|n| n.expect("dense ids")).collect();

    let mut edges = Vec::with_capacity(raw_edges.len());
    let mut lines = Vec::with_capacity(raw_edges.len());
    for (line, p, c) in raw_edges {
        let lookup = |name: &String| {
            by_name.get(name).copied().ok_or_else(|| GraphError::DanglingEdge {
                line,
                name: name.clone(),
            })
        };
        edges.push((lookup(&p)?, lookup(&c)?));
        lines.push(line);
    }
    LabelGraph::build(nodes, edges, &lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> LabelGraph {
        parse_graph("nodes:\n0 root root\n1 a attribute\n2 l region\nedges:\nroot -> a\na -> l\n").unwrap()
    }

    fn brute_force(graph: &LabelGraph) -> Vec<u64> {
        // Literal reading of the two constraints over explicit bit vectors.
        let n = graph.len();
        (0u64..1 << n)
            .filter(|&m| {
                let y: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
                (0..n).all(|j| {
                    let ps = graph.parents(j);
                    let cs = graph.children(j);
                    let parent_ok = !y[j] || ps.is_empty() || ps.iter().any(|&p| y[p]);
                    let child_ok = !y[j] || cs.is_empty() || cs.iter().any(|&c| y[c]);
                    parent_ok && child_ok
                })
            })
            .collect()
    }

    #[test]
    fn chain_legality() {
        let g = chain();
        let st = |b: &[u8]| LabelState::from_bits(b).unwrap();
        assert!(is_legal(&g, &st(&[0, 0, 0])).unwrap());
        assert!(!is_legal(&g, &st(&[1, 0, 0])).unwrap());
        assert!(is_legal(&g, &st(&[1, 1, 1])).unwrap());
        assert!(matches!(
            is_legal(&g, &st(&[1, 1])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn chain_enumeration() {
        let states = enumerate_legal(&chain()).unwrap();
        let bits: Vec<Vec<u8>> = states.iter().map(|s| s.bits()).collect();
        assert_eq!(bits, vec![vec![0, 0, 0], vec![1, 1, 1]]);
    }

    #[test]
    fn root_only_graph() {
        let g = parse_graph("nodes:\n0 r root\n").unwrap();
        let bits: Vec<Vec<u8>> = enumerate_legal(&g).unwrap().iter().map(|s| s.bits()).collect();
        assert_eq!(bits, vec![vec![0], vec![1]]);
    }

    #[test]
    fn default_graph_shape_and_count() {
        let g = LabelGraph::default_ffsc();
        assert_eq!(g.len(), 12);
        assert_eq!(g.tier_counts(), (1, 5, 6));
        let names: Vec<&str> = g.nodes().iter().map(|n| n.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "face", "age", "expression", "gender", "identity", "pose", "eye", "eyebrow", "lip",
                "mouth", "nose", "skin"
            ]
        );
        let legal = g.legal_states().unwrap();
        assert_eq!(legal.len(), 1954);
        assert_eq!(legal.len(), 1 + 31 * 63);
        assert_eq!(legal, brute_force(&g).as_slice());
    }

    #[test]
    fn default_graph_attribute_without_region_is_illegal() {
        let g = LabelGraph::default_ffsc();
        let age = g.node_id("age").unwrap();
        let s = LabelState::from_active(12, [0, age]);
        assert!(!is_legal(&g, &s).unwrap());
    }

    #[test]
    fn parse_errors_are_distinct() {
        let base = "nodes:\n0 r root\n1 a attribute\n2 l region\n";
        let e = parse_graph(&format!("{base}edges:\nr -> a\na -> l\nl -> a\n")).unwrap_err();
        assert!(matches!(e, GraphError::Cycle { line: 8, .. }), "{e:?}");
        let e = parse_graph(&format!("{base}edges:\nr -> a\nr -> l\n")).unwrap_err();
        assert!(matches!(e, GraphError::TierViolation { line: 7, .. }), "{e:?}");
        let e = parse_graph(&format!("{base}edges:\nr -> a\na -> x\n")).unwrap_err();
        assert!(matches!(e, GraphError::DanglingEdge { line: 7, .. }), "{e:?}");
        let e = parse_graph(&format!("{base}3 a region\nedges:\n")).unwrap_err();
        assert!(matches!(e, GraphError::DuplicateName { line: 5, .. }), "{e:?}");
        let e = parse_graph(&format!("{base}edges:\nr -> a\n")).unwrap_err();
        assert!(matches!(e, GraphError::Orphan { .. }), "{e:?}");
        let e = parse_graph("nodes:\n0 a attribute\n1 l region\nedges:\na -> l\n").unwrap_err();
        assert_eq!(e, GraphError::MissingRoot);
        let e = parse_graph("nodes:\n0 r root\n2 a attribute\n").unwrap_err();
        assert!(matches!(e, GraphError::SparseIds { id: 1, .. }), "{e:?}");
        let e = parse_graph("nodes:\n0 r root\n1 a leaf\n").unwrap_err();
        assert!(matches!(e, GraphError::Syntax { line: 3, .. }), "{e:?}");
        let e = parse_graph("0 r root\n").unwrap_err();
        assert!(matches!(e, GraphError::Syntax { line: 1, .. }), "{e:?}");
    }

    #[test]
    fn region_to_attribute_edge_is_tier_violation() {
        let e = parse_graph(
            "nodes:\n0 r root\n1 a attribute\n2 l region\nedges:\nr -> a\nl -> a\n",
        )
        .unwrap_err();
        assert!(matches!(e, GraphError::TierViolation { .. }), "{e:?}");
    }

    #[test]
    fn sections_are_order_insensitive() {
        let a = parse_graph("edges:\na -> l\nroot -> a\nnodes:\n2 l region\n0 root root\n1 a attribute\n").unwrap();
        assert_eq!(a, chain());
        assert_eq!(a.hash(), chain().hash());
    }

    #[test]
    fn canonical_text_round_trips() {
        let g = LabelGraph::default_ffsc();
        let again = parse_graph(&g.to_config_text()).unwrap();
        assert_eq!(g, again);
        assert_eq!(g.hash(), again.hash());
        assert_ne!(g.hash(), chain().hash());
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let mut text = String::from("nodes:\n0 r root\n1 a attribute\n");
        let mut edges = String::from("edges:\nr -> a\n");
        for i in 0..24 {
            text.push_str(&format!("{} l{i} region\n", i + 2));
            edges.push_str(&format!("a -> l{i}\n"));
        }
        let g = parse_graph(&(text + &edges)).unwrap();
        assert_eq!(g.len(), 26);
        match enumerate_legal(&g) {
            Err(Error::Capacity { limit, .. }) => assert_eq!(limit, MAX_ENUMERATION_NODES),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn observed_labels_matching() {
        let obs = ObservedLabels::new(3, [(0, true), (2, false)]).unwrap();
        assert_eq!(obs.count(), 2);
        assert_eq!(obs.get(1), None);
        assert_eq!(obs.get(0), Some(true));
        assert!(obs.matches(0b001));
        assert!(obs.matches(0b011));
        assert!(!obs.matches(0b101));
        assert!(ObservedLabels::new(3, [(3, true)]).is_err());
        assert_eq!(obs.iter().collect::<Vec<_>>(), vec![(0, true), (2, false)]);
    }
}
