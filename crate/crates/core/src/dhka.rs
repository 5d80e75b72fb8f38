//! Deterministic hierarchical key assignment.
//!
//! Every node gets a secret `S`, a derivation tag `t` and a key `x`. Secrets
//! flow down the canonical parent tree by PRF evaluation; every other edge
//! `(i, j)` carries a token: `S_j` sealed under `r_ij = PRF(t_i, 02, l_j)`.

use std::collections::BTreeMap;
use std::fmt;

use crate::codec::{Reader, Writer};
use crate::crypto::{aead_open, aead_seal, prf, PrfKey, PrfTag, SymmetricKey};
use crate::error::{Error, Result};
use crate::hierarchy::{AccessHierarchy, Label, NodeId};

pub const SEED_LEN: usize = 64;

/// 512-bit wallet seed.
#[derive(Clone, PartialEq, Eq)]
pub struct Seed([u8; SEED_LEN]);

impl Seed {
    pub fn new(bytes: [u8; SEED_LEN]) -> Self {
        Seed(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        Ok(Seed(
            bytes
                .try_into()
                .map_err(|_| Error::InvalidSeedLength(bytes.len()))?,
        ))
    }

    pub fn as_bytes(&self) -> &[u8; SEED_LEN] {
        &self.0
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Seed(..)")
    }
}

/// Per-node secret material.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct NodeSecrets {
    pub secret: [u8; 32],
    pub tag: [u8; 32],
    pub key: [u8; 32],
}

impl NodeSecrets {
    pub fn from_secret(secret: [u8; 32], label: &Label) -> Self {
        let l = label.to_bytes();
        NodeSecrets {
            secret,
            tag: prf((&secret).into(), PrfTag::DerivationTag, &l),
            key: prf((&secret).into(), PrfTag::Key, &l),
        }
    }
}

impl fmt::Debug for NodeSecrets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("NodeSecrets(..)")
    }
}

pub type SecretTable = BTreeMap<NodeId, NodeSecrets>;

/// Which edges receive a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenPolicy {
    /// Parent edges are covered by PRF evaluation and carry nothing.
    #[default]
    NonParentEdges,
    /// Every edge carries a token. Used to cross-check non-canonical paths.
    AllEdges,
}

impl TokenPolicy {
    pub fn wants_token(self, h: &AccessHierarchy, i: NodeId, j: NodeId) -> bool {
        match self {
            TokenPolicy::NonParentEdges => !h.is_parent_edge(i, j),
            TokenPolicy::AllEdges => true,
        }
    }
}

/// Public labels and edge tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PublicMapping {
    pub labels: BTreeMap<NodeId, Label>,
    pub tokens: BTreeMap<(NodeId, NodeId), Vec<u8>>,
}

impl PublicMapping {
    pub fn label(&self, n: NodeId) -> Result<Label> {
        self.labels.get(&n).copied().ok_or(Error::UnknownNode(n))
    }

    pub fn token(&self, i: NodeId, j: NodeId) -> Option<&[u8]> {
        self.tokens.get(&(i, j)).map(Vec::as_slice)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        self.encode(&mut w);
        w.buf
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.count(self.labels.len());
        for (id, label) in &self.labels {
            w.u32(*id);
            w.bytes8(&label.to_bytes());
        }
        w.count(self.tokens.len());
        for ((i, j), ct) in &self.tokens {
            w.u32(*i);
            w.u32(*j);
            w.bytes16(ct);
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let pm = Self::decode(&mut r)?;
        r.finish()?;
        Ok(pm)
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let mut pm = PublicMapping::default();
        for _ in 0..r.u32()? {
            let id = r.u32()?;
            let label = Label::from_bytes(r.bytes8()?)?;
            if label.index != id || pm.labels.insert(id, label).is_some() {
                return Err(Error::CorruptFile(format!("label entry for node {id}")));
            }
        }
        for _ in 0..r.u32()? {
            let (i, j) = (r.u32()?, r.u32()?);
            if pm.tokens.insert((i, j), r.bytes16()?.to_vec()).is_some() {
                return Err(Error::CorruptFile(format!("duplicate token ({i}, {j})")));
            }
        }
        Ok(pm)
    }
}

pub fn child_secret(parent_secret: &[u8; 32], label: &Label) -> [u8; 32] {
    prf(parent_secret.into(), PrfTag::Secret, &label.to_bytes())
}

pub fn edge_key(tag_from: &[u8; 32], label_to: &Label) -> SymmetricKey {
    SymmetricKey(prf(tag_from.into(), PrfTag::EdgeKey, &label_to.to_bytes()))
}

pub fn seal_token(from: &NodeSecrets, label_to: &Label, to: &NodeSecrets) -> Vec<u8> {
    aead_seal(&edge_key(&from.tag, label_to), &to.secret)
}

pub fn open_token(tag_from: &[u8; 32], label_to: &Label, token: &[u8]) -> Result<[u8; 32]> {
    let pt = aead_open(&edge_key(tag_from, label_to), token)?;
    pt.try_into().map_err(|_| Error::AuthFailure)
}

/// Secrets of every node, parents before children.
pub fn derive_secrets(h: &AccessHierarchy, root_key: PrfKey<'_>) -> SecretTable {
    let mut table = SecretTable::new();
    for n in h.topological_order() {
        let label = Label::new(n, h.version(n));
        let secret = match h.parent(n) {
            None => prf(root_key, PrfTag::Secret, &label.to_bytes()),
            Some(p) => child_secret(&table[&p].secret, &label),
        };
        table.insert(n, NodeSecrets::from_secret(secret, &label));
    }
    table
}

pub fn dhka_set(h: &AccessHierarchy, seed: &Seed) -> (PublicMapping, SecretTable) {
    dhka_set_with(h, seed.as_bytes().into(), TokenPolicy::default())
}

/// Set keyed by an arbitrary 32- or 64-octet root key.
pub fn dhka_set_with(
    h: &AccessHierarchy,
    root_key: PrfKey<'_>,
    policy: TokenPolicy,
) -> (PublicMapping, SecretTable) {
    let secrets = derive_secrets(h, root_key);
    let labels: BTreeMap<NodeId, Label> =
        h.nodes().map(|n| (n, Label::new(n, h.version(n)))).collect();
    let tokens = h
        .edges()
        .filter(|&(i, j)| policy.wants_token(h, i, j))
        .map(|(i, j)| ((i, j), seal_token(&secrets[&i], &labels[&j], &secrets[&j])))
        .collect();
    (PublicMapping { labels, tokens }, secrets)
}

/// Recovers `x_to` from the secret of `from` along the canonical path.
pub fn dhka_derive(
    h: &AccessHierarchy,
    pm: &PublicMapping,
    from: NodeId,
    to: NodeId,
    secret_from: &[u8; 32],
) -> Result<[u8; 32]> {
    let path = h
        .derivation_path(from, to)?
        .ok_or(Error::NoPath { from, to })?;
    derive_along(h, pm, &path, secret_from)
}

/// Walks an explicit path. Each step opens the edge token when present and
/// otherwise falls back to parent-edge PRF evaluation.
pub fn derive_along(
    h: &AccessHierarchy,
    pm: &PublicMapping,
    path: &[NodeId],
    secret_from: &[u8; 32],
) -> Result<[u8; 32]> {
    let (&first, rest) = path.split_first().ok_or(Error::Internal("empty path"))?;
    let mut cur = NodeSecrets::from_secret(*secret_from, &pm.label(first)?);
    let mut cur_id = first;
    for &next in rest {
        if !h.dag().contains_edge(cur_id, next) {
            return Err(Error::UnknownEdge(cur_id, next));
        }
        let label = pm.label(next)?;
        let secret = if let Some(token) = pm.token(cur_id, next) {
            open_token(&cur.tag, &label, token)?
        } else if h.is_parent_edge(cur_id, next) {
            child_secret(&cur.secret, &label)
        } else {
            return Err(Error::MissingToken(cur_id, next));
        };
        cur = NodeSecrets::from_secret(secret, &label);
        cur_id = next;
    }
    Ok(cur.key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{arb_hierarchy, test_seed};
    use proptest::prelude::*;

    fn diamond() -> AccessHierarchy {
        AccessHierarchy::validate(0..4, [(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn seed_length_enforced() {
        assert_eq!(Seed::from_slice(&[0; 32]), Err(Error::InvalidSeedLength(32)));
        assert!(Seed::from_slice(&[0; 64]).is_ok());
    }

    #[test]
    fn chain_has_no_tokens() {
        let h = AccessHierarchy::validate(0..3, [(0, 1), (1, 2)]).unwrap();
        let (pm, _) = dhka_set(&h, &test_seed());
        assert!(pm.tokens.is_empty());
    }

    #[test]
    fn diamond_has_one_token_on_non_parent_edge() {
        let (pm, _) = dhka_set(&diamond(), &test_seed());
        assert_eq!(pm.tokens.keys().collect::<Vec<_>>(), vec![&(2, 3)]);
        assert_eq!(pm.tokens[&(2, 3)].len(), 12 + 32 + 16);
    }

    #[test]
    fn straight_line_chain_matches() {
        let seed = test_seed();
        let h = AccessHierarchy::validate(0..3, [(0, 1), (1, 2)]).unwrap();
        let (_, table) = dhka_set(&h, &seed);
        let s0 = prf(seed.as_bytes().into(), PrfTag::Secret, &[0, 0, 0, 0]);
        let s1 = prf((&s0).into(), PrfTag::Secret, &[0, 0, 0, 1]);
        let s2 = prf((&s1).into(), PrfTag::Secret, &[0, 0, 0, 2]);
        assert_eq!(table[&2].secret, s2);
        assert_eq!(table[&2].tag, prf((&s2).into(), PrfTag::DerivationTag, &[0, 0, 0, 2]));
        assert_eq!(table[&2].key, prf((&s2).into(), PrfTag::Key, &[0, 0, 0, 2]));
    }

    #[test]
    fn derive_identity_and_no_path() {
        let h = diamond();
        let (pm, table) = dhka_set(&h, &test_seed());
        assert_eq!(dhka_derive(&h, &pm, 2, 2, &table[&2].secret).unwrap(), table[&2].key);
        assert_eq!(dhka_derive(&h, &pm, 2, 3, &table[&2].secret).unwrap(), table[&3].key);
        assert_eq!(
            dhka_derive(&h, &pm, 1, 2, &table[&1].secret),
            Err(Error::NoPath { from: 1, to: 2 })
        );
    }

    #[test]
    fn token_then_parent_edge() {
        // 2 -> 3 is a token edge, 3 -> 4 a parent edge
        let h = AccessHierarchy::validate(0..5, [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)]).unwrap();
        let (pm, table) = dhka_set(&h, &test_seed());
        assert_eq!(dhka_derive(&h, &pm, 2, 4, &table[&2].secret).unwrap(), table[&4].key);
    }

    #[test]
    fn corrupted_token_and_wrong_secret() {
        let h = diamond();
        let (mut pm, table) = dhka_set(&h, &test_seed());
        assert_eq!(
            dhka_derive(&h, &pm, 2, 3, &table[&1].secret),
            Err(Error::AuthFailure)
        );
        pm.tokens.get_mut(&(2, 3)).unwrap()[20] ^= 1;
        assert_eq!(
            dhka_derive(&h, &pm, 2, 3, &table[&2].secret),
            Err(Error::AuthFailure)
        );
        pm.tokens.clear();
        assert_eq!(
            dhka_derive(&h, &pm, 2, 3, &table[&2].secret),
            Err(Error::MissingToken(2, 3))
        );
    }

    #[test]
    fn mapping_serialization() {
        let (pm, _) = dhka_set(&diamond(), &test_seed());
        let bytes = pm.to_bytes();
        assert_eq!(PublicMapping::from_bytes(&bytes).unwrap(), pm);
        // 4 + 4 * (4 + 1 + 4) + 4 + (4 + 4 + 2 + 60)
        assert_eq!(bytes.len(), 4 + 36 + 4 + 70);
        assert!(PublicMapping::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn derive_agrees_with_set(h in arb_hierarchy(14, 30)) {
            let (pm, table) = dhka_set(&h, &test_seed());
            prop_assert_eq!(pm.tokens.len(), h.edge_count() + 1 - h.node_count());
            for i in h.nodes() {
                for j in h.descendants(i).unwrap() {
                    prop_assert_eq!(dhka_derive(&h, &pm, i, j, &table[&i].secret).unwrap(), table[&j].key);
                }
            }
        }

        #[test]
        fn all_edge_tokens_work_on_every_edge(h in arb_hierarchy(10, 20)) {
            let (pm, table) = dhka_set_with(&h, test_seed().as_bytes().into(), TokenPolicy::AllEdges);
            prop_assert_eq!(pm.tokens.len(), h.edge_count());
            for (i, j) in h.edges() {
                prop_assert_eq!(derive_along(&h, &pm, &[i, j], &table[&i].secret).unwrap(), table[&j].key);
            }
        }
    }
}
