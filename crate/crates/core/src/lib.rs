//! Arcula: hierarchical deterministic wallets built on a deterministic
//! hierarchical key assignment scheme over arbitrary access DAGs.

pub(crate) mod codec;
pub mod crypto;
pub mod dhka;
pub mod dynamics;
pub mod error;
pub mod hierarchy;
pub mod script;
pub mod seed;
pub mod store;
pub mod timebound;
pub mod vm;
pub mod wallet;

pub use error::{Error, ErrorKind, Result};

#[cfg(test)]
pub(crate) mod test_support {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use crate::dhka::Seed;
    use crate::hierarchy::AccessHierarchy;

    pub fn test_seed() -> Seed {
        let mut b = [0u8; 64];
        for (i, x) in b.iter_mut().enumerate() {
            *x = i as u8;
        }
        Seed::new(b)
    }

    /// Random DAG on `0..n` with edges oriented from smaller to larger id,
    /// root-augmented when needed.
    pub fn arb_hierarchy(max_nodes: u32, max_edges: usize) -> impl Strategy<Value = AccessHierarchy> {
        (1..=max_nodes).prop_flat_map(move |n| {
            prop::collection::vec((0..n, 0..n), 0..=max_edges).prop_map(move |pairs| {
                let edges: BTreeSet<(u32, u32)> = pairs
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| (a.min(b), a.max(b)))
                    .collect();
                AccessHierarchy::validate(0..n, edges).unwrap()
            })
        })
    }
}
