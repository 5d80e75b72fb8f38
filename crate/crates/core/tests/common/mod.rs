#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use arcula::dhka::Seed;
use arcula::hierarchy::{AccessHierarchy, NodeId};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;

pub fn rng(stream: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(0xa2c0_1a00 ^ stream)
}

pub fn test_seed() -> Seed {
    let mut b = [0u8; 64];
    rng(64).fill(&mut b[..]);
    Seed::new(b)
}

/// Random DAG with at most `max_nodes` nodes and `max_edges` edges after
/// root augmentation. Node ids are shuffled so they do not follow a
/// topological order.
pub fn random_hierarchy(rng: &mut ChaCha20Rng, max_nodes: u32, max_edges: usize) -> AccessHierarchy {
    let n = rng.gen_range(1..max_nodes);
    let mut perm: Vec<NodeId> = (0..n).collect();
    perm.shuffle(rng);
    let budget = max_edges.saturating_sub(n as usize);
    let possible = (n as usize) * (n as usize - 1) / 2;
    let m = rng.gen_range(0..=budget.min(possible));
    let mut edges = BTreeSet::new();
    while edges.len() < m {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a < b {
            edges.insert((perm[a as usize], perm[b as usize]));
        }
    }
    let h = AccessHierarchy::validate(0..n, edges).unwrap();
    assert!(h.node_count() as u32 <= max_nodes && h.edge_count() <= max_edges);
    h
}

pub fn corpus(count: usize, max_nodes: u32, max_edges: usize) -> Vec<AccessHierarchy> {
    let mut r = rng(1);
    (0..count).map(|_| random_hierarchy(&mut r, max_nodes, max_edges)).collect()
}

/// Plain BFS over an edge list, independent of the hierarchy module.
pub fn bfs_reach(edges: impl IntoIterator<Item = (NodeId, NodeId)>, from: NodeId) -> BTreeSet<NodeId> {
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().push(b);
    }
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(x) = queue.pop_front() {
        for &y in adj.get(&x).into_iter().flatten() {
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    seen
}
