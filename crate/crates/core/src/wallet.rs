//! The five-algorithm hierarchical deterministic wallet plus the unlinkable
//! (perturbed master key) variant.
//!
//! Node `i` signs with the keypair generated from its key `x_i`; a
//! certificate issued by the root key binds that public key to the node's
//! label, so verifiers only need the master public key and the label.

use std::collections::BTreeMap;

use k256::NonZeroScalar;

use crate::crypto::{
    keygen_from_bytes, perturb_public, perturb_secret, prf, sign_msg, verify_msg,
    CompressedPoint, KeyPair, PrfTag,
};
use crate::dhka::{derive_secrets, dhka_derive, dhka_set_with, PublicMapping, SecretTable, Seed, TokenPolicy};
use crate::error::{Error, Result};
use crate::hierarchy::{AccessHierarchy, Label, NodeId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    /// DER signature by the master key.
    pub sig: Vec<u8>,
    /// Last valid period, time-bound wallets only.
    pub expiry: Option<u32>,
}

/// `pk (33) || label [|| expiry BE32]`.
pub fn certificate_message(pk: &CompressedPoint, label: &Label, expiry: Option<u32>) -> Vec<u8> {
    let mut msg = pk.as_bytes().to_vec();
    msg.extend_from_slice(&label.to_bytes());
    if let Some(e) = expiry {
        msg.extend_from_slice(&e.to_be_bytes());
    }
    msg
}

pub fn issue_certificate(
    master: &KeyPair,
    pk: &CompressedPoint,
    label: &Label,
    expiry: Option<u32>,
) -> Certificate {
    Certificate {
        sig: sign_msg(master, &certificate_message(pk, label, expiry)),
        expiry,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalletPublicParams {
    pub hierarchy: AccessHierarchy,
    pub mapping: PublicMapping,
    pub certs: BTreeMap<NodeId, Certificate>,
    pub mpk: CompressedPoint,
}

impl WalletPublicParams {
    pub fn cert(&self, n: NodeId) -> Result<&Certificate> {
        self.certs.get(&n).ok_or(Error::UnknownNode(n))
    }
}

/// A node's signing key together with its certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigningKey {
    pub keypair: KeyPair,
    pub label: Label,
    pub cert: Certificate,
}

impl SigningKey {
    pub fn public(&self) -> CompressedPoint {
        self.keypair.public()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityPublicKey {
    pub mpk: CompressedPoint,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalletSignature {
    pub pk: CompressedPoint,
    pub sig: Vec<u8>,
    pub cert: Certificate,
}

/// Builds public parameters and the secret table for `h`.
pub fn wallet_set(h: &AccessHierarchy, seed: &Seed) -> Result<(WalletPublicParams, SecretTable)> {
    wallet_set_with(h, seed, TokenPolicy::default(), &BTreeMap::new())
}

/// [`wallet_set`] with an explicit token policy and certificate expiries.
pub fn wallet_set_with(
    h: &AccessHierarchy,
    seed: &Seed,
    policy: TokenPolicy,
    expiries: &BTreeMap<NodeId, u32>,
) -> Result<(WalletPublicParams, SecretTable)> {
    let (mapping, secrets) = dhka_set_with(h, seed.as_bytes().into(), policy);
    let master = keygen_from_bytes(&secrets[&h.root()].key)?;
    let mut certs = BTreeMap::new();
    for (&n, s) in &secrets {
        let pk = keygen_from_bytes(&s.key)?.public();
        let cert = issue_certificate(&master, &pk, &mapping.labels[&n], expiries.get(&n).copied());
        certs.insert(n, cert);
    }
    let pp = WalletPublicParams {
        hierarchy: h.clone(),
        mapping,
        certs,
        mpk: master.public(),
    };
    Ok((pp, secrets))
}

/// Public key of node `j`. Uses no secret input.
pub fn derive_pub(pp: &WalletPublicParams, j: NodeId) -> Result<IdentityPublicKey> {
    Ok(IdentityPublicKey {
        mpk: pp.mpk,
        label: pp.mapping.label(j)?,
    })
}

/// Signing key of `j` from the derivation key (node secret) of `i`.
pub fn derive_priv(
    pp: &WalletPublicParams,
    derivation_key: &[u8; 32],
    i: NodeId,
    j: NodeId,
) -> Result<SigningKey> {
    let x = dhka_derive(&pp.hierarchy, &pp.mapping, i, j, derivation_key)?;
    Ok(SigningKey {
        keypair: keygen_from_bytes(&x)?,
        label: pp.mapping.label(j)?,
        cert: pp.cert(j)?.clone(),
    })
}

pub fn wallet_sign(sk: &SigningKey, msg: &[u8]) -> WalletSignature {
    WalletSignature {
        pk: sk.public(),
        sig: sign_msg(&sk.keypair, msg),
        cert: sk.cert.clone(),
    }
}

/// Checks the certificate binding under the master key and the message
/// signature under the node key.
pub fn wallet_verify(pk: &IdentityPublicKey, msg: &[u8], ws: &WalletSignature) -> bool {
    let cert_msg = certificate_message(&ws.pk, &pk.label, ws.cert.expiry);
    verify_msg(pk.mpk.as_bytes(), &cert_msg, &ws.cert.sig)
        && verify_msg(ws.pk.as_bytes(), msg, &ws.sig)
}

/// [`wallet_verify`] that also rejects certificates expired before `period`.
pub fn wallet_verify_at(
    pk: &IdentityPublicKey,
    msg: &[u8],
    ws: &WalletSignature,
    period: u32,
) -> bool {
    ws.cert.expiry.is_none_or(|e| e >= period) && wallet_verify(pk, msg, ws)
}

/// Root key of the second key-assignment instance producing chain codes.
pub fn chain_root_key(seed: &Seed) -> [u8; 32] {
    prf(seed.as_bytes().into(), PrfTag::Secret, b"unlink")
}

/// Per-node chain codes: the keys of a second key-assignment instance on
/// the same hierarchy.
pub fn chain_codes(h: &AccessHierarchy, seed: &Seed) -> BTreeMap<NodeId, [u8; 32]> {
    let root = chain_root_key(seed);
    derive_secrets(h, (&root).into())
        .into_iter()
        .map(|(n, s)| (n, s.key))
        .collect()
}

/// Perturbed master key and certificate for one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnlinkableIdentity {
    pub mpk: CompressedPoint,
    /// Signature by the perturbed master secret over the node public key.
    pub cert: Vec<u8>,
}

pub fn verify_unlinkable(mpk: &CompressedPoint, pk: &CompressedPoint, cert: &[u8]) -> bool {
    verify_msg(mpk.as_bytes(), pk.as_bytes(), cert)
}

/// Mutable wallet state owned by the seed holder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wallet {
    pub(crate) seed: Seed,
    pub(crate) policy: TokenPolicy,
    pub(crate) expiries: BTreeMap<NodeId, u32>,
    pub(crate) pp: WalletPublicParams,
    pub(crate) secrets: SecretTable,
    /// Last version of every deleted node, so a reused id never gets a
    /// previously issued label.
    pub(crate) retired: BTreeMap<NodeId, u32>,
}

impl Wallet {
    pub fn new(h: AccessHierarchy, seed: Seed) -> Result<Self> {
        Self::with_options(h, seed, TokenPolicy::default(), BTreeMap::new())
    }

    pub fn with_options(
        h: AccessHierarchy,
        seed: Seed,
        policy: TokenPolicy,
        expiries: BTreeMap<NodeId, u32>,
    ) -> Result<Self> {
        let (pp, secrets) = wallet_set_with(&h, &seed, policy, &expiries)?;
        Ok(Wallet {
            seed,
            policy,
            expiries,
            pp,
            secrets,
            retired: BTreeMap::new(),
        })
    }

    /// Same wallet recomputed from scratch on the current hierarchy.
    pub fn rebuild(&self) -> Result<Self> {
        let mut w = Self::with_options(
            self.pp.hierarchy.clone(),
            self.seed.clone(),
            self.policy,
            self.expiries.clone(),
        )?;
        w.retired = self.retired.clone();
        Ok(w)
    }

    pub fn pp(&self) -> &WalletPublicParams {
        &self.pp
    }

    pub fn secrets(&self) -> &SecretTable {
        &self.secrets
    }

    pub fn hierarchy(&self) -> &AccessHierarchy {
        &self.pp.hierarchy
    }

    pub fn seed(&self) -> &Seed {
        &self.seed
    }

    pub fn expiries(&self) -> &BTreeMap<NodeId, u32> {
        &self.expiries
    }

    /// Last version of each deleted node id.
    pub fn retired(&self) -> &BTreeMap<NodeId, u32> {
        &self.retired
    }

    /// Restores retired versions saved from an earlier session.
    pub fn with_retired(mut self, retired: BTreeMap<NodeId, u32>) -> Self {
        self.retired = retired;
        self
    }

    pub fn derivation_key(&self, n: NodeId) -> Result<[u8; 32]> {
        Ok(self.secrets.get(&n).ok_or(Error::UnknownNode(n))?.secret)
    }

    pub fn master_keypair(&self) -> Result<KeyPair> {
        keygen_from_bytes(&self.secrets[&self.hierarchy().root()].key)
    }

    pub fn signing_key(&self, n: NodeId) -> Result<SigningKey> {
        let s = self.secrets.get(&n).ok_or(Error::UnknownNode(n))?;
        Ok(SigningKey {
            keypair: keygen_from_bytes(&s.key)?,
            label: self.pp.mapping.label(n)?,
            cert: self.pp.cert(n)?.clone(),
        })
    }

    pub fn chain_code(&self, n: NodeId) -> Result<[u8; 32]> {
        chain_codes(self.hierarchy(), &self.seed)
            .remove(&n)
            .ok_or(Error::UnknownNode(n))
    }

    /// Perturbed master secret `sk_0 + F_c(l_n)` for node `n`.
    pub fn unlinkable_master_secret(&self, n: NodeId) -> Result<NonZeroScalar> {
        let c = self.chain_code(n)?;
        let label = self.pp.mapping.label(n)?.to_bytes();
        perturb_secret(&self.master_keypair()?.secret_scalar(), (&c).into(), &label)
    }

    pub fn unlinkable_identity(&self, n: NodeId) -> Result<UnlinkableIdentity> {
        let c = self.chain_code(n)?;
        let label = self.pp.mapping.label(n)?.to_bytes();
        let mpk = perturb_public(&self.pp.mpk, (&c).into(), &label)?;
        let master = KeyPair::from_scalar(self.unlinkable_master_secret(n)?);
        if master.public() != mpk {
            return Err(Error::Internal("perturbed key pair mismatch"));
        }
        let pk = self.signing_key(n)?.public();
        Ok(UnlinkableIdentity {
            mpk,
            cert: sign_msg(&master, pk.as_bytes()),
        })
    }
}
