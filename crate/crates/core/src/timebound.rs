//! Time-bound key assignment over `n` periods.
//!
//! Each access-hierarchy node `v` with period range `T_v` is expanded into a
//! copy of the interval hierarchy over `T_v`. Period keys live at the
//! singleton intervals, and an access edge `u -> v` links `(u, [t,t])` to
//! `(v, [t,t])` for every shared period `t`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dhka::Seed;
use crate::error::{Error, Result};
use crate::hierarchy::{augment_root, AccessHierarchy, Dag, NodeId};
use crate::wallet::{derive_priv, SigningKey, Wallet};

/// Contiguous 1-based period range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 2]", into = "[u32; 2]")]
pub struct Interval {
    pub start: u32,
    pub end: u32,
}

impl Interval {
    pub fn new(start: u32, end: u32) -> Option<Self> {
        (1 <= start && start <= end).then_some(Interval { start, end })
    }

    pub fn single(t: u32) -> Self {
        Interval { start: t, end: t }
    }

    pub fn len(&self) -> u32 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: u32) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.start.max(other.start), self.end.min(other.end))
    }

    /// All sub-intervals, longest first, then by start.
    pub fn sub_intervals(&self) -> Vec<Interval> {
        let mut out = Vec::new();
        for len in (1..=self.len()).rev() {
            for s in self.start..=self.end + 1 - len {
                out.push(Interval { start: s, end: s + len - 1 });
            }
        }
        out
    }

    /// Interval-hierarchy edges inside this range: `[j,k] -> [j,k-1]` and
    /// `[j,k] -> [j+1,k]`.
    pub fn hierarchy_edges(&self) -> Vec<IntervalEdge> {
        self.sub_intervals()
            .into_iter()
            .filter(|i| i.start < i.end)
            .flat_map(|i| {
                [
                    (i, Interval { start: i.start, end: i.end - 1 }),
                    (i, Interval { start: i.start + 1, end: i.end }),
                ]
            })
            .collect()
    }
}

impl TryFrom<[u32; 2]> for Interval {
    type Error = String;

    fn try_from(v: [u32; 2]) -> Result<Self, String> {
        Interval::new(v[0], v[1]).ok_or_else(|| format!("invalid interval {v:?}"))
    }
}

impl From<Interval> for [u32; 2] {
    fn from(i: Interval) -> Self {
        [i.start, i.end]
    }
}

/// Edge from a wider interval to one it contains.
pub type IntervalEdge = (Interval, Interval);

/// The interval hierarchy over periods `1..=n`.
pub fn interval_dag(n: u32) -> Result<(Vec<Interval>, Vec<IntervalEdge>)> {
    let all = Interval::new(1, n).ok_or(Error::InvalidPeriodCount(n))?;
    Ok((all.sub_intervals(), all.hierarchy_edges()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimedNode {
    pub base: NodeId,
    pub interval: Interval,
}

/// The expanded hierarchy and the mapping back to (node, interval) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedHierarchy {
    pub hierarchy: AccessHierarchy,
    pub periods: u32,
    assignments: BTreeMap<NodeId, Interval>,
    nodes: BTreeMap<NodeId, TimedNode>,
    index: BTreeMap<TimedNode, NodeId>,
}

impl TimedHierarchy {
    pub fn assignments(&self) -> &BTreeMap<NodeId, Interval> {
        &self.assignments
    }

    /// `None` for the added root above all entry nodes.
    pub fn timed_node(&self, id: NodeId) -> Option<TimedNode> {
        self.nodes.get(&id).copied()
    }

    pub fn id_of(&self, node: TimedNode) -> Option<NodeId> {
        self.index.get(&node).copied()
    }

    /// Entry node `(v, T_v)` handed to the user of `v`.
    pub fn entry(&self, base: NodeId) -> Result<NodeId> {
        let interval = *self.assignments.get(&base).ok_or(Error::UnknownNode(base))?;
        Ok(self.index[&TimedNode { base, interval }])
    }

    /// Node holding the period-`t` key of `base`.
    pub fn leaf(&self, base: NodeId, t: u32) -> Option<NodeId> {
        self.id_of(TimedNode { base, interval: Interval::single(t) })
    }

    /// Certificate expiry for every node: the end of its interval, or the
    /// last period for the added root.
    pub fn expiries(&self) -> BTreeMap<NodeId, u32> {
        self.hierarchy
            .nodes()
            .map(|id| (id, self.nodes.get(&id).map_or(self.periods, |t| t.interval.end)))
            .collect()
    }
}

/// Expands `h` with per-node period ranges into the time-bound hierarchy.
/// The root defaults to all periods; any other node must be assigned.
pub fn augment_timed(
    h: &AccessHierarchy,
    assignments: &BTreeMap<NodeId, Interval>,
    periods: u32,
) -> Result<TimedHierarchy> {
    let all = Interval::new(1, periods).ok_or(Error::InvalidPeriodCount(periods))?;
    if let Some(&n) = assignments.keys().find(|&&n| !h.contains(n)) {
        return Err(Error::UnknownNode(n));
    }
    let mut resolved = BTreeMap::new();
    for v in h.nodes() {
        let t = match assignments.get(&v) {
            Some(t) => *t,
            None if v == h.root() => all,
            None => return Err(Error::EmptyAssignment(v)),
        };
        if t.end > periods {
            return Err(Error::EmptyAssignment(v));
        }
        resolved.insert(v, t);
    }

    let mut nodes = BTreeMap::new();
    let mut index = BTreeMap::new();
    for (&base, t) in &resolved {
        for interval in t.sub_intervals() {
            let id = nodes.len() as NodeId;
            let tn = TimedNode { base, interval };
            nodes.insert(id, tn);
            index.insert(tn, id);
        }
    }
    let id = |base, interval| index[&TimedNode { base, interval }];
    let mut edges = Vec::new();
    for (&base, t) in &resolved {
        for (a, b) in t.hierarchy_edges() {
            edges.push((id(base, a), id(base, b)));
        }
    }
    for (u, v) in h.edges() {
        if let Some(shared) = resolved[&u].intersect(&resolved[&v]) {
            for t in shared.start..=shared.end {
                edges.push((id(u, Interval::single(t)), id(v, Interval::single(t))));
            }
        }
    }
    let dag = augment_root(&Dag::new(nodes.keys().copied(), edges)?);
    Ok(TimedHierarchy {
        hierarchy: AccessHierarchy::from_dag(dag)?,
        periods,
        assignments: resolved,
        nodes,
        index,
    })
}

/// Parses `{"node": [start, end], ...}`.
pub fn parse_assignments(text: &str) -> Result<BTreeMap<NodeId, Interval>> {
    let raw: BTreeMap<String, Interval> =
        serde_json::from_str(text).map_err(|e| Error::InvalidHierarchyFile(e.to_string()))?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse()
                .map(|n| (n, v))
                .map_err(|_| Error::InvalidHierarchyFile(format!("bad node key {k:?}")))
        })
        .collect()
}

/// A wallet over the time-bound hierarchy with expiring certificates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedWallet {
    pub timed: TimedHierarchy,
    pub wallet: Wallet,
}

pub fn timed_wallet_set(
    h: &AccessHierarchy,
    assignments: &BTreeMap<NodeId, Interval>,
    periods: u32,
    seed: &Seed,
) -> Result<TimedWallet> {
    let timed = augment_timed(h, assignments, periods)?;
    let wallet = Wallet::with_options(
        timed.hierarchy.clone(),
        seed.clone(),
        Default::default(),
        timed.expiries(),
    )?;
    Ok(TimedWallet { timed, wallet })
}

impl TimedWallet {
    /// Secret handed to the user of `base`: the entry node's derivation key.
    pub fn entry_key(&self, base: NodeId) -> Result<[u8; 32]> {
        self.wallet.derivation_key(self.timed.entry(base)?)
    }

    /// Period-`t` signing key of `target`, derived from the entry secret of
    /// `user`. Fails with `NoPath` outside the user's reach.
    pub fn derive_period_key(
        &self,
        user: NodeId,
        entry_key: &[u8; 32],
        target: NodeId,
        t: u32,
    ) -> Result<SigningKey> {
        let from = self.timed.entry(user)?;
        let to = self.timed.leaf(target, t).ok_or(Error::NoPath { from, to: target })?;
        derive_priv(self.wallet.pp(), entry_key, from, to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::test_seed;
    use crate::wallet::{derive_pub, wallet_sign, wallet_verify_at};

    fn iv(a: u32, b: u32) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn interval_dag_small() {
        let (nodes, edges) = interval_dag(1).unwrap();
        assert_eq!((nodes.len(), edges.len()), (1, 0));
        let (nodes, edges) = interval_dag(3).unwrap();
        assert_eq!(nodes.len(), 6);
        let mut edges = edges;
        edges.sort();
        let mut expected = vec![
            (iv(1, 3), iv(1, 2)),
            (iv(1, 3), iv(2, 3)),
            (iv(1, 2), iv(1, 1)),
            (iv(1, 2), iv(2, 2)),
            (iv(2, 3), iv(2, 2)),
            (iv(2, 3), iv(3, 3)),
        ];
        expected.sort();
        assert_eq!(edges, expected);
        assert_eq!(interval_dag(0), Err(Error::InvalidPeriodCount(0)));
    }

    #[test]
    fn interval_dag_counts() {
        for n in 1..=8u32 {
            let (nodes, edges) = interval_dag(n).unwrap();
            assert_eq!(nodes.len() as u32, n * (n + 1) / 2);
            assert_eq!(edges.len() as u32, n * (n - 1));
        }
    }

    #[test]
    fn single_node_single_period() {
        let h = AccessHierarchy::validate([0], []).unwrap();
        let t = augment_timed(&h, &BTreeMap::from([(0, iv(1, 1))]), 1).unwrap();
        assert_eq!(t.hierarchy.node_count(), 1);
    }

    #[test]
    fn disjoint_ranges_have_no_cross_edges() {
        let h = AccessHierarchy::validate([0, 1], [(0, 1)]).unwrap();
        let a = BTreeMap::from([(0, iv(1, 2)), (1, iv(3, 4))]);
        let tw = timed_wallet_set(&h, &a, 4, &test_seed()).unwrap();
        let key = tw.entry_key(0).unwrap();
        for t in 3..=4 {
            assert!(matches!(tw.derive_period_key(0, &key, 1, t), Err(Error::NoPath { .. })));
        }
    }

    #[test]
    fn overlapping_chain() {
        let h = AccessHierarchy::validate([0, 1], [(0, 1)]).unwrap();
        let a = BTreeMap::from([(0, iv(1, 2)), (1, iv(2, 3))]);
        let tw = timed_wallet_set(&h, &a, 3, &test_seed()).unwrap();
        let key = tw.entry_key(0).unwrap();
        let sk = tw.derive_period_key(0, &key, 1, 2).unwrap();
        assert_eq!(sk.cert.expiry, Some(2));
        assert!(tw.derive_period_key(0, &key, 1, 3).is_err());

        let leaf = tw.timed.leaf(1, 2).unwrap();
        let pk = derive_pub(tw.wallet.pp(), leaf).unwrap();
        let ws = wallet_sign(&sk, b"m");
        assert!(wallet_verify_at(&pk, b"m", &ws, 2));
        assert!(!wallet_verify_at(&pk, b"m", &ws, 3));
    }

    #[test]
    fn token_count_formula() {
        let h = AccessHierarchy::validate(0..3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let a = BTreeMap::from([(1, iv(2, 5)), (2, iv(1, 4))]);
        let tw = timed_wallet_set(&h, &a, 5, &test_seed()).unwrap();
        let ranges = [iv(1, 5), iv(2, 5), iv(1, 4)];
        let intra: u32 = ranges.iter().map(|r| (r.len() - 1) * (r.len() - 2) / 2).sum();
        let cross: u32 = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(u, v)| ranges[u].intersect(&ranges[v]).map_or(0, |i| i.len()))
            .sum();
        assert_eq!(tw.wallet.pp().mapping.tokens.len() as u32, intra + cross);
    }

    #[test]
    fn per_period_keys_distinct() {
        let h = AccessHierarchy::validate([0], []).unwrap();
        let tw = timed_wallet_set(&h, &BTreeMap::new(), 4, &test_seed()).unwrap();
        let keys: std::collections::BTreeSet<_> =
            (1..=4).map(|t| tw.wallet.secrets()[&tw.timed.leaf(0, t).unwrap()].key).collect();
        assert_eq!(keys.len(), 4);
    }

    #[test]
    fn assignment_errors() {
        let h = AccessHierarchy::validate([0, 1], [(0, 1)]).unwrap();
        assert_eq!(augment_timed(&h, &BTreeMap::new(), 3), Err(Error::EmptyAssignment(1)));
        assert_eq!(
            augment_timed(&h, &BTreeMap::from([(1, iv(2, 4))]), 3),
            Err(Error::EmptyAssignment(1))
        );
        assert!(parse_assignments(r#"{"1": [3, 2]}"#).is_err());
        assert_eq!(parse_assignments(r#"{"1": [2, 3]}"#).unwrap(), BTreeMap::from([(1, iv(2, 3))]));
    }
}
