//! Access hierarchies: validated DAGs with a designated root, per-node
//! versions and a canonical parent assignment.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;

/// Public node label: index plus version.
///
/// Version-0 labels encode compactly as the 4-octet big-endian index; any
/// other version uses the 8-octet `index || version` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub index: NodeId,
    pub version: u32,
}

impl Label {
    pub fn new(index: NodeId, version: u32) -> Self {
        Label { index, version }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.index.to_be_bytes().to_vec();
        if self.version != 0 {
            out.extend_from_slice(&self.version.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match bytes.len() {
            4 => Ok(Label::new(u32::from_be_bytes(bytes.try_into().unwrap()), 0)),
            8 => Ok(Label::new(
                u32::from_be_bytes(bytes[..4].try_into().unwrap()),
                u32::from_be_bytes(bytes[4..].try_into().unwrap()),
            )),
            n => Err(Error::CorruptFile(format!("label of {n} octets"))),
        }
    }
}

/// A directed acyclic graph over node ids. No root requirement.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dag {
    succ: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pred: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl Dag {
    pub fn new(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self> {
        let mut dag = Dag::default();
        for n in nodes {
            if dag.succ.insert(n, BTreeSet::new()).is_some() {
                return Err(Error::DuplicateNode(n));
            }
            dag.pred.insert(n, BTreeSet::new());
        }
        if dag.succ.is_empty() {
            return Err(Error::EmptyHierarchy);
        }
        for (a, b) in edges {
            if !dag.contains_node(a) || !dag.contains_node(b) {
                return Err(Error::DanglingEdge(a, b));
            }
            if a == b {
                return Err(Error::CycleDetected);
            }
            if !dag.succ.get_mut(&a).unwrap().insert(b) {
                return Err(Error::DuplicateEdge(a, b));
            }
            dag.pred.get_mut(&b).unwrap().insert(a);
        }
        if dag.topological_order().len() != dag.node_count() {
            return Err(Error::CycleDetected);
        }
        Ok(dag)
    }

    pub fn contains_node(&self, n: NodeId) -> bool {
        self.succ.contains_key(&n)
    }

    pub fn contains_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.succ.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn node_count(&self) -> usize {
        self.succ.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.values().map(BTreeSet::len).sum()
    }

    /// Node ids in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.succ.keys().copied()
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.succ
            .iter()
            .flat_map(|(&a, s)| s.iter().map(move |&b| (a, b)))
    }

    pub fn successors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.succ.get(&n).into_iter().flatten().copied()
    }

    pub fn predecessors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.pred.get(&n).into_iter().flatten().copied()
    }

    pub fn in_degree(&self, n: NodeId) -> usize {
        self.pred.get(&n).map_or(0, BTreeSet::len)
    }

    pub fn max_node(&self) -> Option<NodeId> {
        self.succ.keys().next_back().copied()
    }

    /// Nodes without predecessors, ascending.
    pub fn minimal_nodes(&self) -> Vec<NodeId> {
        self.pred
            .iter()
            .filter(|(_, p)| p.is_empty())
            .map(|(&n, _)| n)
            .collect()
    }

    /// Kahn's algorithm, always releasing the smallest ready id first.
    /// Returns fewer than `node_count` nodes when a cycle exists.
    pub fn topological_order(&self) -> Vec<NodeId> {
        let mut indeg: BTreeMap<NodeId, usize> =
            self.pred.iter().map(|(&n, p)| (n, p.len())).collect();
        let mut ready: BTreeSet<NodeId> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut order = Vec::with_capacity(self.node_count());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for s in self.successors(n) {
                let d = indeg.get_mut(&s).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(s);
                }
            }
        }
        order
    }

    /// Nodes reachable from `n` through at least one edge.
    pub fn reachable_from(&self, n: NodeId) -> BTreeSet<NodeId> {
        Self::closure(n, |x| self.successors(x).collect())
    }

    /// Nodes that reach `n` through at least one edge.
    pub fn reaching(&self, n: NodeId) -> BTreeSet<NodeId> {
        Self::closure(n, |x| self.predecessors(x).collect())
    }

    fn closure(start: NodeId, next: impl Fn(NodeId) -> Vec<NodeId>) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for y in next(x) {
                if seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    pub(crate) fn insert_node(&mut self, n: NodeId) -> Result<()> {
        if self.contains_node(n) {
            return Err(Error::DuplicateNode(n));
        }
        self.succ.insert(n, BTreeSet::new());
        self.pred.insert(n, BTreeSet::new());
        Ok(())
    }

    /// Inserts an edge, refusing anything that would close a cycle.
    pub(crate) fn insert_edge(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        for n in [a, b] {
            if !self.contains_node(n) {
                return Err(Error::UnknownNode(n));
            }
        }
        if self.contains_edge(a, b) {
            return Err(Error::DuplicateEdge(a, b));
        }
        if a == b || self.reachable_from(b).contains(&a) {
            return Err(Error::WouldCreateCycle(a, b));
        }
        self.succ.get_mut(&a).unwrap().insert(b);
        self.pred.get_mut(&b).unwrap().insert(a);
        Ok(())
    }

    pub(crate) fn remove_edge(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        if !self.succ.get_mut(&a).is_some_and(|s| s.remove(&b)) {
            return Err(Error::UnknownEdge(a, b));
        }
        self.pred.get_mut(&b).unwrap().remove(&a);
        Ok(())
    }

    /// Removes a node and every incident edge.
    pub(crate) fn remove_node(&mut self, n: NodeId) -> Result<()> {
        let succ = self.succ.remove(&n).ok_or(Error::UnknownNode(n))?;
        let pred = self.pred.remove(&n).unwrap();
        for s in succ {
            self.pred.get_mut(&s).unwrap().remove(&n);
        }
        for p in pred {
            self.succ.get_mut(&p).unwrap().remove(&n);
        }
        Ok(())
    }
}

/// Adds a fresh root (id = max id + 1) above every minimal node when there
/// is more than one; otherwise returns the graph unchanged.
pub fn augment_root(dag: &Dag) -> Dag {
    let minimal = dag.minimal_nodes();
    if minimal.len() <= 1 {
        return dag.clone();
    }
    let root = dag.max_node().map_or(0, |m| m + 1);
    let mut out = dag.clone();
    out.insert_node(root).expect("fresh id");
    for m in minimal {
        out.insert_edge(root, m).expect("edges from a fresh root cannot close a cycle");
    }
    out
}

/// A validated access hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessHierarchy {
    dag: Dag,
    root: NodeId,
    versions: BTreeMap<NodeId, u32>,
    parent: BTreeMap<NodeId, NodeId>,
}

impl AccessHierarchy {
    /// Validates a raw node/edge list, adding a root above several minimal
    /// nodes when needed.
    pub fn validate(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self> {
        Self::from_dag(augment_root(&Dag::new(nodes, edges)?))
    }

    /// Like [`validate`](Self::validate) but rejects several minimal nodes.
    pub fn validate_strict(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self> {
        Self::from_dag(Dag::new(nodes, edges)?)
    }

    pub fn from_dag(dag: Dag) -> Result<Self> {
        let minimal = dag.minimal_nodes();
        match minimal.as_slice() {
            [root] => Ok(Self::assemble(dag, *root, BTreeMap::new())),
            [] => Err(Error::EmptyHierarchy),
            _ => Err(Error::MultipleComponents(minimal)),
        }
    }

    /// Recomputes the canonical parent map; zero versions are dropped.
    pub(crate) fn assemble(dag: Dag, root: NodeId, mut versions: BTreeMap<NodeId, u32>) -> Self {
        versions.retain(|n, v| *v != 0 && dag.contains_node(*n));
        let parent = canonical_parents(&dag, root);
        AccessHierarchy {
            dag,
            root,
            versions,
            parent,
        }
    }

    /// Replaces the version map. Unknown nodes are rejected.
    pub fn with_versions(self, versions: BTreeMap<NodeId, u32>) -> Result<Self> {
        if let Some(&n) = versions.keys().find(|n| !self.dag.contains_node(**n)) {
            return Err(Error::UnknownNode(n));
        }
        Ok(Self::assemble(self.dag, self.root, versions))
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.dag.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.dag.edge_count()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.dag.nodes()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.dag.edges()
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.dag.contains_node(n)
    }

    fn check(&self, n: NodeId) -> Result<()> {
        if self.contains(n) {
            Ok(())
        } else {
            Err(Error::UnknownNode(n))
        }
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.parent.get(&n).copied()
    }

    pub fn parents(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.parent
    }

    pub fn is_parent_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.parent(b) == Some(a)
    }

    pub fn version(&self, n: NodeId) -> u32 {
        self.versions.get(&n).copied().unwrap_or(0)
    }

    /// Non-zero versions only.
    pub fn versions(&self) -> &BTreeMap<NodeId, u32> {
        &self.versions
    }

    pub fn label(&self, n: NodeId) -> Result<Label> {
        self.check(n)?;
        Ok(Label::new(n, self.version(n)))
    }

    /// Proper descendants of `n`.
    pub fn descendants(&self, n: NodeId) -> Result<BTreeSet<NodeId>> {
        self.check(n)?;
        Ok(self.dag.reachable_from(n))
    }

    /// Proper ancestors of `n`.
    pub fn ancestors(&self, n: NodeId) -> Result<BTreeSet<NodeId>> {
        self.check(n)?;
        Ok(self.dag.reaching(n))
    }

    pub fn topological_order(&self) -> Vec<NodeId> {
        self.dag.topological_order()
    }

    /// Path from `from` to `to` along hierarchy edges, or `None`.
    ///
    /// Each step prefers a parent edge among the successors that still reach
    /// `to`, then the shortest remaining distance, then the smallest id.
    pub fn derivation_path(&self, from: NodeId, to: NodeId) -> Result<Option<Vec<NodeId>>> {
        self.check(from)?;
        self.check(to)?;
        if from == to {
            return Ok(Some(vec![from]));
        }
        // distance of every node that reaches `to`
        let mut dist = BTreeMap::from([(to, 0usize)]);
        let mut queue = VecDeque::from([to]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            for p in self.dag.predecessors(x) {
                dist.entry(p).or_insert_with(|| {
                    queue.push_back(p);
                    d + 1
                });
            }
        }
        if !dist.contains_key(&from) {
            return Ok(None);
        }
        let mut path = vec![from];
        let mut cur = from;
        while cur != to {
            let candidates: Vec<NodeId> = self
                .dag
                .successors(cur)
                .filter(|s| dist.contains_key(s))
                .collect();
            let via_parent: Vec<NodeId> = candidates
                .iter()
                .copied()
                .filter(|&s| self.is_parent_edge(cur, s))
                .collect();
            let pool = if via_parent.is_empty() { &candidates } else { &via_parent };
            cur = *pool
                .iter()
                .min_by_key(|&&s| (dist[&s], s))
                .expect("a node with finite distance has a successor closer to the target");
            path.push(cur);
        }
        Ok(Some(path))
    }

    pub fn to_file(&self) -> HierarchyFile {
        HierarchyFile {
            nodes: self.nodes().collect(),
            edges: self.edges().map(|(a, b)| [a, b]).collect(),
            versions: if self.versions.is_empty() {
                None
            } else {
                Some(self.versions.iter().map(|(n, v)| (n.to_string(), *v)).collect())
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HierarchyFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidHierarchyFile(e.to_string()))?;
        file.into_hierarchy()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("plain data serializes")
    }

    pub(crate) fn into_parts(self) -> (Dag, NodeId, BTreeMap<NodeId, u32>) {
        (self.dag, self.root, self.versions)
    }
}

/// DFS from the root visiting successors in ascending id order; every node's
/// parent is the node from which the search first discovers it.
fn canonical_parents(dag: &Dag, root: NodeId) -> BTreeMap<NodeId, NodeId> {
    let mut parent = BTreeMap::new();
    let mut visited = BTreeSet::from([root]);
    let mut stack: Vec<(NodeId, Vec<NodeId>, usize)> =
        vec![(root, dag.successors(root).collect(), 0)];
    while let Some((node, succ, pos)) = stack.last_mut() {
        if *pos == succ.len() {
            stack.pop();
            continue;
        }
        let next = succ[*pos];
        *pos += 1;
        if visited.insert(next) {
            parent.insert(next, *node);
            stack.push((next, dag.successors(next).collect(), 0));
        }
    }
    parent
}

/// On-disk JSON hierarchy: `{"nodes": [..], "edges": [[a, b], ..], "versions": {"id": v}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyFile {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<[NodeId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub versions: Option<BTreeMap<String, u32>>,
}

impl HierarchyFile {
    /// Validates the file. Node ids must be exactly `0..N`.
    pub fn into_hierarchy(self) -> Result<AccessHierarchy> {
        let mut sorted = self.nodes.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &n)| n as usize != i) {
            return Err(Error::InvalidHierarchyFile(
                "node ids must be dense from 0".into(),
            ));
        }
        let h = AccessHierarchy::validate(self.nodes, self.edges.iter().map(|e| (e[0], e[1])))?;
        let mut versions = BTreeMap::new();
        for (k, v) in self.versions.unwrap_or_default() {
            let id: NodeId = k
                .parse()
                .map_err(|_| Error::InvalidHierarchyFile(format!("bad version key {k:?}")))?;
            versions.insert(id, v);
        }
        h.with_versions(versions)
    }
}
