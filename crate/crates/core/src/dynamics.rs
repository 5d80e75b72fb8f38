//! Rekeying and hierarchy mutation for a live [`Wallet`].
//!
//! Every mutation edits the graph and the version map, then refreshes only
//! what changed: a node is recomputed when its label or parent changed or
//! its parent was recomputed, tokens are resealed on edges touching such a
//! node, and certificates are reissued for them (all of them when the root
//! key changed). The result always equals a from-scratch rebuild.

use std::collections::{BTreeMap, BTreeSet};

use crate::crypto::{keygen_from_bytes, prf, PrfTag};
use crate::dhka::{child_secret, seal_token, NodeSecrets, PublicMapping, SecretTable};
use crate::error::{Error, Result};
use crate::hierarchy::{AccessHierarchy, Dag, Label, NodeId};
use crate::wallet::{issue_certificate, Wallet, WalletPublicParams};

fn bump(versions: &mut BTreeMap<NodeId, u32>, nodes: impl IntoIterator<Item = NodeId>) -> Result<()> {
    for n in nodes {
        let v = versions.entry(n).or_insert(0);
        *v = v.checked_add(1).ok_or(Error::Internal("version overflow"))?;
    }
    Ok(())
}

/// `{n}` together with everything reachable from it.
fn cone(dag: &Dag, n: NodeId) -> BTreeSet<NodeId> {
    let mut c = dag.reachable_from(n);
    c.insert(n);
    c
}

impl Wallet {
    fn parts(&self) -> (Dag, NodeId, BTreeMap<NodeId, u32>) {
        self.pp.hierarchy.clone().into_parts()
    }

    fn check(&self, n: NodeId) -> Result<()> {
        if self.hierarchy().contains(n) {
            Ok(())
        } else {
            Err(Error::UnknownNode(n))
        }
    }

    /// Bumps the version of `n` and refreshes what depends on it.
    pub fn rekey(&mut self, n: NodeId) -> Result<()> {
        self.check(n)?;
        let (dag, root, mut versions) = self.parts();
        bump(&mut versions, [n])?;
        self.refresh(AccessHierarchy::assemble(dag, root, versions))
    }

    /// Rekeys `n` and all of its descendants.
    pub fn replace_key(&mut self, n: NodeId) -> Result<()> {
        self.check(n)?;
        let (dag, root, mut versions) = self.parts();
        bump(&mut versions, cone(&dag, n))?;
        self.refresh(AccessHierarchy::assemble(dag, root, versions))
    }

    /// Removes `(i, j)`; an orphaned `j` is reattached to the root. `j` and
    /// its descendants are rekeyed.
    pub fn delete_edge(&mut self, i: NodeId, j: NodeId) -> Result<()> {
        let (mut dag, root, mut versions) = self.parts();
        dag.remove_edge(i, j)?;
        if dag.in_degree(j) == 0 {
            dag.insert_edge(root, j)?;
        }
        bump(&mut versions, cone(&dag, j))?;
        self.refresh(AccessHierarchy::assemble(dag, root, versions))
    }

    /// Removes a non-root node. Its children lose the edge from it as in
    /// [`delete_edge`](Self::delete_edge).
    pub fn delete_node(&mut self, n: NodeId) -> Result<()> {
        self.check(n)?;
        let (mut dag, root, mut versions) = self.parts();
        if n == root {
            return Err(Error::CannotDeleteRoot);
        }
        let children: Vec<NodeId> = dag.successors(n).collect();
        let mut affected = BTreeSet::new();
        for &c in &children {
            dag.remove_edge(n, c)?;
            if dag.in_degree(c) == 0 {
                dag.insert_edge(root, c)?;
            }
        }
        for &c in &children {
            affected.extend(cone(&dag, c));
        }
        bump(&mut versions, affected)?;
        let retired_version = versions.remove(&n).unwrap_or(0);
        dag.remove_node(n)?;
        self.refresh(AccessHierarchy::assemble(dag, root, versions))?;
        self.retired.insert(n, retired_version);
        self.expiries.remove(&n);
        Ok(())
    }

    /// Adds `(i, j)`. When the edge makes `i` the new parent of `j`, `j` and
    /// its descendants are rekeyed; otherwise one token is added.
    pub fn insert_edge(&mut self, i: NodeId, j: NodeId) -> Result<()> {
        let (mut dag, root, mut versions) = self.parts();
        dag.insert_edge(i, j)?;
        let probe = AccessHierarchy::assemble(dag.clone(), root, versions.clone());
        if probe.parent(j) != self.hierarchy().parent(j) {
            bump(&mut versions, cone(&dag, j))?;
        }
        self.refresh(AccessHierarchy::assemble(dag, root, versions))
    }

    /// Adds node `id` under `parent`, then each of `extra_edges` in order.
    pub fn insert_node(&mut self, id: NodeId, parent: NodeId, extra_edges: &[(NodeId, NodeId)]) -> Result<()> {
        self.check(parent)?;
        let (mut dag, root, mut versions) = self.parts();
        dag.insert_node(id)?;
        dag.insert_edge(parent, id)?;
        if let Some(&v) = self.retired.get(&id) {
            versions.insert(id, v.checked_add(1).ok_or(Error::Internal("version overflow"))?);
        }
        let mut next = self.clone();
        next.refresh(AccessHierarchy::assemble(dag, root, versions))?;
        next.retired.remove(&id);
        for &(a, b) in extra_edges {
            next.insert_edge(a, b)?;
        }
        *self = next;
        Ok(())
    }

    /// Moves the wallet to `h`, recomputing only what changed.
    fn refresh(&mut self, h: AccessHierarchy) -> Result<()> {
        let old = &self.pp;
        let old_h = &old.hierarchy;
        let mut secrets = SecretTable::new();
        let mut dirty = BTreeSet::new();
        for n in h.topological_order() {
            let label = Label::new(n, h.version(n));
            let parent = h.parent(n);
            let clean = old_h.contains(n)
                && old.mapping.labels.get(&n) == Some(&label)
                && old_h.parent(n) == parent
                && parent.is_none_or(|p| !dirty.contains(&p));
            if clean {
                secrets.insert(n, self.secrets[&n]);
                continue;
            }
            dirty.insert(n);
            let s = match parent {
                None => prf(self.seed.as_bytes().into(), PrfTag::Secret, &label.to_bytes()),
                Some(p) => child_secret(&secrets[&p].secret, &label),
            };
            secrets.insert(n, NodeSecrets::from_secret(s, &label));
        }

        let labels: BTreeMap<NodeId, Label> =
            h.nodes().map(|n| (n, Label::new(n, h.version(n)))).collect();
        let mut tokens = BTreeMap::new();
        for (i, j) in h.edges().filter(|&(i, j)| self.policy.wants_token(&h, i, j)) {
            let token = match old.mapping.token(i, j) {
                Some(t) if !dirty.contains(&i) && !dirty.contains(&j) => t.to_vec(),
                _ => seal_token(&secrets[&i], &labels[&j], &secrets[&j]),
            };
            tokens.insert((i, j), token);
        }

        let root = h.root();
        let master = keygen_from_bytes(&secrets[&root].key)?;
        let all = dirty.contains(&root);
        let mut certs = BTreeMap::new();
        for n in h.nodes() {
            let expiry = self.expiries.get(&n).copied();
            let cert = match old.certs.get(&n) {
                Some(c) if !all && !dirty.contains(&n) && c.expiry == expiry => c.clone(),
                _ => {
                    let pk = keygen_from_bytes(&secrets[&n].key)?.public();
                    issue_certificate(&master, &pk, &labels[&n], expiry)
                }
            };
            certs.insert(n, cert);
        }

        self.pp = WalletPublicParams {
            hierarchy: h,
            mapping: PublicMapping { labels, tokens },
            certs,
            mpk: master.public(),
        };
        self.secrets = secrets;
        Ok(())
    }
}
